// Times the OpenMP columnar kernels against the serial reference.
#include <chrono>
#include <cstdio>
#include <omp.h>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "zsim/columnar/build.hpp"
#include "zsim/columnar/kernels.hpp"
#include "zsim/columnar/ops.hpp"
#include "zsim/reference/reference.hpp"
#include "zsim/util/rng.hpp"

using namespace zsim;

namespace {

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Times the OpenMP columnar kernels against the serial reference"};
  uint64_t rows = 200000;
  int reps = 3;
  app.add_option("--rows", rows, "Rows per column")->check(CLI::Range(uint64_t(16), uint64_t(1) << 32))->capture_default_str();
  app.add_option("--reps", reps, "Repetitions; the best time is reported")->check(CLI::PositiveNumber)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  mem::StoreConfig sc;
  sc.mem_limit = 4ull << 30;
  sc.verify_immutable = false;
  mem::Store store(sc);
  col::MemoryContext ctx{&store, store.create_account("bench")};
  Rng rng(7);
  std::vector<double> a(rows), b(rows), c(rows);
  std::vector<std::string> s(rows);
  for (uint64_t i = 0; i < rows; ++i) {
    a[i] = rng.unit();
    b[i] = rng.unit();
    c[i] = 3 * a[i] - 2 * b[i] + 0.01 * rng.unit();
    s[i] = fmt::format("straße row {}", i);
  }
  auto t = col::make_table({{"a", col::make_float64(ctx, a)},
                            {"b", col::make_float64(ctx, b)},
                            {"c", col::make_float64(ctx, c)},
                            {"s", col::make_utf8(ctx, s)}});
  auto rt = ref::from_table(t);
  col::MatMul mm{3, 4, {1, 0, 2, 1, 0, 1, 1, 2, 1, 1, 0, 3}};
  col::Ols ols{{"a", "b"}, "c"};
  col::Upper up{"s"};

  std::printf("rows=%llu threads=%d\n", (unsigned long long)rows, omp_get_max_threads());
  std::printf("%-8s %12s %12s %8s\n", "kernel", "omp_s", "serial_s", "speedup");
  auto row = [&](const char* name, double k, double r) { std::printf("%-8s %12.6f %12.6f %8.2f\n", name, k, r, r / k); };
  row("matmul", best_of(reps, [&] { col::kernel(ctx, t, mm); }), best_of(reps, [&] { ref::matmul(rt, mm); }));
  row("ols", best_of(reps, [&] { col::kernel(ctx, t, ols); }), best_of(reps, [&] { ref::ols(rt, ols); }));
  row("upper", best_of(reps, [&] { col::kernel(ctx, t, up); }), best_of(reps, [&] { ref::upper(rt, up.column); }));
  row("sum", best_of(reps, [&] { col::kernel(ctx, t, col::SumAll{}); }), best_of(reps, [&] { ref::sum_all(rt); }));
  return 0;
}
