#pragma once

#include "qising/rng.hpp"
#include "qising/trajectory.hpp"
#include "qising/transfer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace qising {

// draw from the untilted reference measure: uniform initial sign, Poisson
// flip times at rate lambda
Trajectory sample_free_reference(double beta, double lambda, RngStream& rng);

// Exact draw from the single-site measure tilted by the piecewise-constant
// field: endpoint signs from endpoint_law, breakpoint signs by conditioning
// through suffix kernels, then recursive midpoint bisection inside each
// constant piece down to segments with (lambda s)^3/6 < 1e-12, where the
// conditioned flip count is drawn from its truncated series (0/1/2 flips; the
// remaining tail mass falls back to one more bisection).
Trajectory sample_site(const PiecewiseField& field, double lambda,
                       const EndpointCondition& bc, RngStream& rng);

// One draw from the monotone coupling of the two end-pinned conditionals
// sigma(beta)=+1 and sigma(beta)=-1: last-flip times are drawn independently
// for the two conditionals, the paths agree before the later of the two and
// sit at +1 resp. -1 after it. Guarantees minus <= plus pathwise.
struct CoupledEndpointPair {
  Trajectory plus;
  Trajectory minus;
};
CoupledEndpointPair monotone_endpoint_coupling(const PiecewiseField& field, double lambda,
                                               RngStream& rng);

// P(T <= t) for the last flip time under the sigma(beta)=tau conditional;
// exposed because tests pin its closed-form atom at t=0
double last_flip_cdf(const PiecewiseField& field, double lambda, int tau, double t);

// standard increasing observables, scaled so the constant +1 path maps to +1
// and the constant -1 path to -1 where a scale is meaningful
struct IncreasingFunction {
  std::string name;
  std::function<double(const Trajectory&)> f;
};
std::vector<IncreasingFunction> increasing_function_suite(double beta);

}  // namespace qising
