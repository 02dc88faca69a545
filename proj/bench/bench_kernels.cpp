// Times the parallel hot paths of the cavity pipeline, one thread vs all,
// and checks the outputs agree bitwise. Every omp region writes disjoint
// per-row slots with no reductions, so thread count must not change results.
//
//   bench_kernels [grid_n]     default grid_n = 6

#include "qising/cavity.hpp"
#include "qising/grid.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace qising;
using clk = std::chrono::steady_clock;

namespace {

int g_threads = 1;

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int hardware_threads() {
#ifdef _OPENMP
  return omp_get_num_procs();
#else
  return 1;
#endif
}

template <class F>
double time_ms(F&& f) {
  auto t0 = clk::now();
  f();
  return std::chrono::duration<double, std::milli>(clk::now() - t0).count();
}

bool same_kernel(const GridKernel& a, const GridKernel& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(double)) != 0)
      return false;
  return true;
}

void report(const char* name, double serial_ms, double par_ms, bool identical) {
  std::printf("%-28s %10.1f ms %10.1f ms %7.2fx   %s\n", name, serial_ms,
              par_ms, par_ms > 0 ? serial_ms / par_ms : 0.0,
              identical ? "identical" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  int n = argc > 1 ? std::atoi(argv[1]) : 6;
  CavityParams par{GridSpec{n, 1.0, true}, 1.0, 0.0, 2};
  g_threads = hardware_threads();
  std::printf("grid_n = %d, states = %u, threads = %d\n", n,
              par.grid.n_states(), g_threads);
  std::printf("%-28s %13s %13s %8s\n", "kernel", "serial", "parallel",
              "speedup");

  // site tables: one exact conditional law per boundary history
  set_threads(1);
  CavityContext ctx_s(par);
  double t_s = time_ms([&] { ctx_s.warm_site_tables(); });
  set_threads(g_threads);
  CavityContext ctx_p(par);
  double t_p = time_ms([&] { ctx_p.warm_site_tables(); });
  bool same = true;
  std::size_t row_bytes =
      std::size_t(ctx_s.lattice().size) * ctx_s.dim() * sizeof(double);
  for (int eta = 0; eta < ctx_s.dim(); ++eta)
    same = same &&
           std::memcmp(ctx_s.site_table(eta), ctx_p.site_table(eta), row_bytes) == 0;
  report("site tables", t_s, t_p, same);

  // five cavity recursion steps from the all-plus kernel
  NuResult nu_s, nu_p;
  set_threads(1);
  t_s = time_ms([&] { nu_s = nu_recursion(ctx_s, 5, 0.0); });
  set_threads(g_threads);
  t_p = time_ms([&] { nu_p = nu_recursion(ctx_p, 5, 0.0); });
  report("nu step x5", t_s, t_p, same_kernel(nu_s.nu_inf, nu_p.nu_inf));

  // derivative operator: per-row pinned LU factorization, then applies
  set_threads(1);
  double f_s = time_ms([&] { DOperator op(ctx_s, nu_s.nu_inf); (void)op; });
  DOperator op_s(ctx_s, nu_s.nu_inf);
  set_threads(g_threads);
  double f_p = time_ms([&] { DOperator op(ctx_p, nu_p.nu_inf); (void)op; });
  DOperator op_p(ctx_p, nu_p.nu_inf);

  GridKernel rho(ctx_s.dim());
  for (auto& row : rho) {
    row.assign(ctx_s.dim(), 0.0);
    row.front() = -1.0;
    row.back() = 1.0;
  }
  GridKernel out_s, out_p;
  set_threads(1);
  t_s = time_ms([&] {
    out_s = rho;
    for (int k = 0; k < 20; ++k) out_s = op_s.apply(out_s);
  });
  set_threads(g_threads);
  t_p = time_ms([&] {
    out_p = rho;
    for (int k = 0; k < 20; ++k) out_p = op_p.apply(out_p);
  });
  report("derivative factor", f_s, f_p, true);
  report("derivative apply x20", t_s, t_p, same_kernel(out_s, out_p));
  return 0;
}
