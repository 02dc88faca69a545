#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/SparseCore>

#include "qising/graph.hpp"
#include "qising/grid.hpp"
#include "qising/rng.hpp"

namespace qising {

// piecewise-constant censoring schedule: from windows[i].t until the next
// window only the listed free vertices may actually update
struct Schedule {
  struct Window {
    double t;
    std::vector<int> active;  // sorted free-vertex ids
  };
  std::vector<Window> windows;

  static Schedule full(const SiteGraph& g);
  static Schedule none();
  // the free vertices of the subtree rooted at `vertex` (tree graphs only)
  static Schedule subtree(const SiteGraph& g, int vertex);
  // censor to `early` until t_release, then open up to everything
  static Schedule released(Schedule early, const SiteGraph& g, double t_release);

  const std::vector<int>& active_at(double t) const;
  bool is_active(double t, int site) const;
  void validate(const SiteGraph& g) const;
  // true when this schedule's active set is contained in other's at all times
  bool subset_of(const Schedule& other) const;
};

struct ChainState {
  SpinConfigMap config;  // free vertices only
  double time = 0;
  std::uint64_t events = 0;  // clock rings, censored ones included
  std::uint64_t seed = 0;
};

// Event-driven heat-bath dynamics: every free vertex rings at rate 1 from its
// own reproducible stream; an active ring resamples the whole site trajectory
// from its exact conditional given the neighbors. Censored rings are skipped
// but still consume the clock, so runs with different schedules share event
// times. periodic_time picks the imaginary-time boundary condition used by
// the single-site conditional.
ChainState run(const SiteGraph& g, const ModelParams& par, const BoundarySpec& bc,
               const Schedule& sched, double t_end, SpinConfigMap start,
               bool periodic_time, std::uint64_t seed);

// same loop with a callback every probe_dt after probe_start
ChainState run_with_probe(
    const SiteGraph& g, const ModelParams& par, const BoundarySpec& bc,
    const Schedule& sched, double t_end, SpinConfigMap start, bool periodic_time,
    std::uint64_t seed, double probe_start, double probe_dt,
    const std::function<void(double, const SpinConfigMap&)>& probe);

struct CoupledChains {
  ChainState plus;
  ChainState minus;
};

// two chains from the all-plus and all-minus starts driven by the same clocks
// and the same per-event randomness (shared bridge draws; the order holds
// statistically, not pathwise)
CoupledChains coupled_run_pm(const SiteGraph& g, const ModelParams& par,
                             const BoundarySpec& bc, const Schedule& sched,
                             double t_end, bool periodic_time, std::uint64_t seed,
                             double probe_dt = 0,
                             const std::function<void(double, const SpinConfigMap&,
                                                      const SpinConfigMap&)>& probe = {});

// ---- grid mode: N time slices per site, exact linear algebra possible ----

// per-slice field seen by `site`: base field at slice midpoints plus the
// slice signs of all neighbors
std::vector<double> grid_local_field(const SiteGraph& g,
                                     const std::vector<std::uint32_t>& states,
                                     const std::vector<std::uint32_t>& frozen,
                                     const PiecewiseField& base,
                                     const GridSpec& spec, int site);

// exact draw from the N-slice single-site conditional, consuming one uniform
// per slice; sequential inverse-CDF, so sharing the uniforms across two
// ordered environments yields an order-preserving coupling
std::uint32_t sample_grid_site(const std::vector<double>& field, double lambda,
                               const GridSpec& spec,
                               const std::vector<double>& uniforms);

// slice-sign states for the frozen vertices
std::vector<std::uint32_t> grid_boundary(const SiteGraph& g, const BoundarySpec& bc,
                                         const GridSpec& spec);

struct GridChain {
  std::vector<std::uint32_t> states;  // free vertices
  double time = 0;
  std::uint64_t events = 0;
};

GridChain run_grid(const SiteGraph& g, const ModelParams& par,
                   const BoundarySpec& bc, const GridSpec& spec,
                   const Schedule& sched, double t_end,
                   std::vector<std::uint32_t> start, std::uint64_t seed,
                   double probe_dt = 0,
                   const std::function<void(double, const GridChain&)>& probe = {});

struct CoupledGridChains {
  GridChain plus;
  GridChain minus;
  std::uint64_t order_checks = 0;  // sitewise comparisons, all of which held
};

// grid-mode grand coupling from the top and bottom states; order is checked
// after every event and a violation throws
CoupledGridChains coupled_run_pm_grid(const SiteGraph& g, const ModelParams& par,
                                      const BoundarySpec& bc, const GridSpec& spec,
                                      const Schedule& sched, double t_end,
                                      std::uint64_t seed);

// ---- exact finite-state machinery ----

// transition-rate matrix of the heat-bath dynamics restricted to the active
// set, on the product state space (2^N)^{n_free}; entry (i,j) is the rate
// from state i to state j
Eigen::SparseMatrix<double> grid_generator(const SiteGraph& g, const ModelParams& par,
                                           const GridSpec& spec, const BoundarySpec& bc,
                                           const std::vector<int>& active);

// exact stationary law of the discretized model on the product state space
std::vector<double> grid_gibbs_vector(const SiteGraph& g, const ModelParams& par,
                                      const GridSpec& spec, const BoundarySpec& bc);

// row-vector transport v e^{t L} by uniformization, tail below 1e-16
std::vector<double> evolve_uniformized(const Eigen::SparseMatrix<double>& gen,
                                       std::vector<double> v, double t);

// product-space magnetization sum_x sigma_x . 1 of a state index
double grid_config_magnetization(std::uint64_t state, int n_free, const GridSpec& spec);

struct CensoringReport {
  struct Row {
    double t;
    double var_more, var_less;  // larger active set first
    double ent_more, ent_less;
    double tv_more, tv_less;
    bool dominated;       // law under more updates sits below
    bool dominated_exact;  // exhaustive up-set check vs sampled
  };
  std::vector<Row> rows;
  bool ok = false;
  double worst_slack = 0;  // most negative inequality margin
};

// from the all-plus point mass, evolve under two schedules with
// active(a) contained in active(b) and verify that more updating means
// closer to equilibrium in variance, entropy and TV, and stochastically lower
CensoringReport censoring_check_exact(const SiteGraph& g, const ModelParams& par,
                                      const GridSpec& spec, const BoundarySpec& bc,
                                      const Schedule& a, const Schedule& b,
                                      const std::vector<double>& times,
                                      double tol = 1e-10);

struct GapScanRow {
  int depth = 0;
  double tau_int = 0;  // in time units
  double se = 0;
  int n_samples = 0;
};

// equilibrium autocorrelation time of the root magnetization across depths
std::vector<GapScanRow> gap_scan(int b, const std::vector<int>& depths,
                                 double beta, double lambda, double h,
                                 const BoundarySpec& bc, bool periodic_time,
                                 double burn_in, double sample_dt, int n_samples,
                                 std::uint64_t seed);

struct KappaMcRow {
  int depth = 0;       // level below the pinned root, 1-based
  double gap_mc = 0;   // plus-root minus minus-root spine magnetization
  double se = 0;
};

// tree whose root is itself frozen at +1 or -1, leaves feeling b frozen
// neighbors of boundary_sign; sampled counterpart of the exact conditional
// gap recursion. Magnetization is the raw integral, range [-beta, beta].
std::vector<KappaMcRow> kappa_mc(int b, int depth, double beta, double lambda,
                                 double h, int boundary_sign, bool periodic_time,
                                 double burn_in, double sample_dt, int n_samples,
                                 std::uint64_t seed);

}  // namespace qising
