#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qising/grid.hpp"

namespace qising {

// kernel: one measure per conditioning state
using GridKernel = std::vector<GridMeasure>;

struct CavityParams {
  GridSpec grid;
  double lambda = 1.0;
  double h = 0.0;  // constant base field
  int b = 2;       // children per vertex
};

// Mixed-radix lattice of slice-wise sums of b children signs: digit in [0,b]
// per slice, sum value 2*digit - b.
struct SumLattice {
  int b = 0;
  int n = 0;
  int size = 0;
  std::vector<int> pow;  // (b+1)^k

  SumLattice() = default;
  SumLattice(int b_, int n_);
  int digit(int idx, int k) const { return idx / pow[k] % (b + 1); }
  int sum_value(int idx, int k) const { return 2 * digit(idx, k) - b; }
};

// Precomputed tables for the resampling operator at fixed parameters. The
// site table for a conditioning state eta holds, for every lattice point s,
// the single-site law with per-slice field h + s_k + eta_k; built lazily per
// eta and cached. Memory guard rejects lattices whose single-eta table
// exceeds the budget.
class CavityContext {
 public:
  explicit CavityContext(const CavityParams& par);

  const CavityParams& params() const { return par_; }
  int dim() const { return dim_; }
  const SumLattice& lattice() const { return lat_; }
  const GridMeasure& phi() const { return phi_; }  // zero-field reference law

  // lat.size x dim row-major table of site laws for this eta
  const double* site_table(std::uint32_t eta) const;
  // build every eta slice up front (required before parallel row maps)
  void warm_site_tables() const;
  // guard for operations that need all 2^N eta slices resident
  void require_full_cache() const;

  int state_offset(std::uint32_t x) const { return state_offset_[x]; }

  double norm_1x(const GridKernel& rho) const;    // sum_eta phi(eta) tv(row)
  double norm_inf_x(const GridKernel& rho) const; // max_eta tv(row)

 private:
  CavityParams par_;
  int dim_ = 0;
  SumLattice lat_;
  std::vector<int> state_offset_;
  GridMeasure phi_;
  mutable std::vector<std::vector<double>> site_cache_;
};

// R for one eta and a fixed child kernel list, prepared for repeated
// application: rho -> sum-field weights -> site laws.
class ROperator {
 public:
  ROperator(const CavityContext& ctx, std::uint32_t eta,
            const std::vector<const GridKernel*>& kernels);
  GridMeasure apply(const GridMeasure& rho) const;

 private:
  const CavityContext* ctx_;
  std::uint32_t eta_;
  Eigen::MatrixXd s_;  // (conditioning state) x (lattice point)
};

GridMeasure apply_R(const CavityContext& ctx, std::uint32_t eta,
                    const std::vector<const GridKernel*>& kernels,
                    const GridMeasure& rho);

// fixed point of rho = R(rho); tol bounds the accepted TV residual
GridMeasure solve_cavity(const CavityContext& ctx, std::uint32_t eta,
                         const std::vector<const GridKernel*>& kernels,
                         double tol = 1e-12);

struct NuResult {
  GridKernel nu_inf;
  std::vector<double> increments;  // sup-row TV step sizes
  int steps = 0;
  bool converged = false;
  double c_hat = 0;  // density bound: nu/phi ratio within [c_hat, 1/c_hat]
};

// nu_0 = point mass at all-plus per row; each step solves the cavity fixed
// point with the previous kernel in every child slot
NuResult nu_recursion(const CavityContext& ctx, int n_max, double tol = 1e-10,
                      std::vector<GridKernel>* trace = nullptr);

// row-wise (I - R_{nu..nu})^{-1} R_{rho,nu,..,nu}(nu^eta).  the inverse acts
// on the zero-mass subspace, so each row factors once into a pinned dense
// solve; rho must carry zero mass per row or the series it represents
// diverges.  Factor the operator when applying it repeatedly.
class DOperator {
 public:
  DOperator(const CavityContext& ctx, const GridKernel& nu_inf);
  GridKernel apply(const GridKernel& rho) const;

 private:
  const CavityContext* ctx_;
  const GridKernel* nu_;
  Eigen::MatrixXd s_pure_;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;  // per eta
};

GridKernel apply_D(const CavityContext& ctx, const GridKernel& rho,
                   const GridKernel& nu_inf);

struct DkScanResult {
  std::vector<double> norms;  // max over directions of |D^k| in inf-X norm,
                              // directions normalized in 1-X norm; k=1..k_max
  double rate = 0;            // fitted geometric decay across k
};

DkScanResult dk_norm_scan(const CavityContext& ctx, const GridKernel& nu_inf,
                          int k_max, std::uint64_t seed, int n_random = 4);

struct KappaResult {
  std::vector<double> gaps;  // conditional magnetization gap per depth
  double kappa_hat = 0;      // geometric rate fitted on depths >= 2
};

// Regular tree of the given free depth, leaves feeling b frozen neighbors of
// sign boundary_sign. Upward partition-vector messages per level, then the
// conditional spine chain from a root pinned all-plus vs all-minus.
KappaResult kappa_exact(const CavityParams& par, int depth, int boundary_sign);

struct GammaResult {
  double gamma_hat = 0;  // max tv between site laws differing in one neighbor
  int points = 0;
  double worst_lipschitz_ratio = 0;  // max tv / (Gamma * l1 field distance)
  int lipschitz_violations = 0;
  int lipschitz_pairs = 0;
};

GammaResult gamma_exact(const CavityParams& par, int n_random_envelope,
                        int n_lipschitz_pairs, std::uint64_t seed);

// least-squares geometric rate of |values| from index `from` on
double geometric_rate(const std::vector<double>& values, int from);

}  // namespace qising
