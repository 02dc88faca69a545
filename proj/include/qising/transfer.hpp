#pragma once

#include "qising/trajectory.hpp"

namespace qising {

// Weight matrix of a field interval. entry (s0,s1) is the total weight of
// spin paths running from sign s0 to sign s1 across the interval: Poisson
// flip measure at rate lambda times the field tilt e^{\int h sigma}. A
// separate log scale keeps long products of intervals in range; true entry =
// k[i][j] * e^{log_scale}. Row index 0 is sign +1, row index 1 is sign -1.
struct IntervalKernel {
  double k[2][2];
  double log_scale{0};

  static IntervalKernel identity() { return IntervalKernel{{{1, 0}, {0, 1}}, 0.0}; }

  double entry(int s0, int s1) const;      // true value, may over/underflow
  double log_entry(int s0, int s1) const;  // -inf for a zero entry
  double raw(int s0, int s1) const;        // scaled value as stored
};

inline int sign_index(int s) { return s > 0 ? 0 : 1; }
inline int index_sign(int i) { return i == 0 ? +1 : -1; }

// closed form for one constant-field piece of length t
IntervalKernel interval_kernel(double h, double lambda, double t);

// renormalized product, left to right in time
IntervalKernel kernel_product(const IntervalKernel& a, const IntervalKernel& b);

// product over all pieces of the field
IntervalKernel path_kernel(const PiecewiseField& h, double lambda);

// product over the pieces intersected with [t0,t1]
IntervalKernel path_kernel_range(const PiecewiseField& h, double lambda, double t0, double t1);

// Endpoint boundary condition of a single-site measure. A free sign carries
// the uniform 1/2 prior of the reference measure; a pinned sign carries no
// prior (it is a conditioning, not a weighting). Periodic ties sigma(0) =
// sigma(beta), both signs still carrying the 1/2 prior.
struct EndpointCondition {
  enum class Kind { free_ends, periodic, pinned };
  Kind kind{Kind::free_ends};
  int s0{0};  // pinned start sign, 0 = free
  int s1{0};  // pinned end sign, 0 = free

  static EndpointCondition free_ends() { return {Kind::free_ends, 0, 0}; }
  static EndpointCondition periodic() { return {Kind::periodic, 0, 0}; }
  static EndpointCondition pinned(int s0, int s1) {
    if ((s0 != 0 && s0 != 1 && s0 != -1) || (s1 != 0 && s1 != 1 && s1 != -1))
      throw std::invalid_argument("EndpointCondition: pinned signs must be -1, 0, +1");
    if (s0 == 0 && s1 == 0)
      throw std::invalid_argument("EndpointCondition: pinned needs at least one sign");
    return {Kind::pinned, s0, s1};
  }
};

// joint law of (sigma(0), sigma(beta)) under the tilted measure with the
// given boundary condition
struct EndpointLaw {
  double p[2][2];
  double prob(int s0, int s1) const { return p[sign_index(s0)][sign_index(s1)]; }
};

EndpointLaw endpoint_law(const IntervalKernel& k, const EndpointCondition& bc);

// log normalization of the single-site measure for the boundary condition
double log_partition(const IntervalKernel& k, const EndpointCondition& bc);

}  // namespace qising
