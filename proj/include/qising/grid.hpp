#pragma once

#include <cstdint>
#include <vector>

#include "qising/rng.hpp"
#include "qising/trajectory.hpp"

namespace qising {

// Time discretization of [0,beta] into n_slices equal slices. A state of one
// site is an integer in [0, 2^n): bit k set means sign +1 on slice k. Slice
// weight e^{h_k sign Delta}; each slice boundary contributes p on a sign
// change and 1-p otherwise, p = lambda*Delta/(1+lambda*Delta). Periodic mode
// adds the wrap boundary between the last slice and the first.
struct GridSpec {
  int n_slices = 8;
  double beta = 1.0;
  bool periodic = true;

  double delta() const { return beta / n_slices; }
  std::uint32_t n_states() const { return 1u << n_slices; }
};

using GridMeasure = std::vector<double>;

// normalized single-site law for a per-slice field
GridMeasure grid_single_site(const std::vector<double>& field_slices,
                             double lambda, const GridSpec& spec);

// number of sign changes counted by the slice boundaries of spec
int grid_flip_count(std::uint32_t state, const GridSpec& spec);

// time integral of the sign over [0,beta], i.e. delta * (sum of slice signs)
double grid_magnetization(std::uint32_t state, const GridSpec& spec);

double tv_norm(const GridMeasure& mu);            // half the total mass
double tv(const GridMeasure& a, const GridMeasure& b);
double measure_mass(const GridMeasure& mu);

// slice-aligned trajectory for a grid state and back
Trajectory grid_state_to_trajectory(std::uint32_t state, const GridSpec& spec);
std::uint32_t grid_trajectory_to_state(const Trajectory& t,
                                       const GridSpec& spec);

// Up-sets of the bitwise partial order on n-bit states, as indicator masks
// over the 2^n states (mask bit s set means state s belongs). Built by the
// two-half recursion; includes the empty and the full set. n <= 5.
std::vector<std::uint64_t> enumerate_up_sets(int n_bits);

struct OrderCheck {
  bool ok = false;
  bool exact = false;  // false when up-sets were sampled, not enumerated
  double worst = 0;    // most negative up-set mass encountered
};

// signed measure rho has rho(U) >= -1e-12 for every up-set U; exact for
// n_bits <= 5, otherwise 10^4 random monotone threshold sets
OrderCheck stoch_positive(const GridMeasure& rho, int n_bits,
                          std::uint64_t seed = 987654321u);
OrderCheck stoch_leq(const GridMeasure& mu, const GridMeasure& nu, int n_bits,
                     std::uint64_t seed = 987654321u);

// p/q increasing along every covering pair of the state order; q must be
// strictly positive
bool monotone_density(const GridMeasure& p, const GridMeasure& q, int n_bits);

}  // namespace qising
