#include "qising/transfer.hpp"

#include <cmath>
#include <limits>

namespace qising {

double IntervalKernel::entry(int s0, int s1) const {
  return k[sign_index(s0)][sign_index(s1)] * std::exp(log_scale);
}

double IntervalKernel::log_entry(int s0, int s1) const {
  double v = k[sign_index(s0)][sign_index(s1)];
  if (v <= 0) return -std::numeric_limits<double>::infinity();
  return std::log(v) + log_scale;
}

double IntervalKernel::raw(int s0, int s1) const {
  return k[sign_index(s0)][sign_index(s1)];
}

// Closed form for a constant piece:
//   K = e^{-lambda t} exp(t [[h, lambda], [lambda, -h]])
//     = e^{-lambda t} [ cosh(rt) + (h/r) sinh(rt),   (lambda/r) sinh(rt)
//                       (lambda/r) sinh(rt),         cosh(rt) - (h/r) sinh(rt) ]
// with r = sqrt(h^2 + lambda^2). Entries are computed scaled by e^{-rt} so
// nothing overflows for large rt; the scale moves into log_scale.
IntervalKernel interval_kernel(double h, double lambda, double t) {
  if (lambda < 0 || t < 0 || !std::isfinite(h) || !std::isfinite(lambda) || !std::isfinite(t))
    throw std::invalid_argument("interval_kernel: need lambda >= 0, t >= 0, finite h");
  const double r = std::hypot(h, lambda);
  const double x = r * t;
  double chs, shn;  // e^{-x} cosh(x) and e^{-x} sinh(x)/x
  if (x == 0) {
    chs = 1.0;
    shn = 1.0;  // limit of sinh(x)/x; the t factor below handles t == 0
  } else {
    const double em = std::expm1(-2.0 * x);  // e^{-2x} - 1
    chs = 1.0 + 0.5 * em;
    shn = -em / (2.0 * x);
  }
  IntervalKernel out;
  out.k[0][0] = chs + h * t * shn;
  out.k[0][1] = lambda * t * shn;
  out.k[1][0] = lambda * t * shn;
  out.k[1][1] = chs - h * t * shn;
  out.log_scale = x - lambda * t;
  // cosh >= (|h|/r) sinh guarantees nonnegativity; clamp the roundoff dust
  for (auto& row : out.k)
    for (auto& v : row)
      if (v < 0) v = 0;
  return out;
}

IntervalKernel kernel_product(const IntervalKernel& a, const IntervalKernel& b) {
  IntervalKernel out;
  out.log_scale = a.log_scale + b.log_scale;
  double mx = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      out.k[i][j] = a.k[i][0] * b.k[0][j] + a.k[i][1] * b.k[1][j];
      mx = std::max(mx, out.k[i][j]);
    }
  if (mx > 0) {
    for (auto& row : out.k)
      for (auto& v : row) v /= mx;
    out.log_scale += std::log(mx);
  }
  return out;
}

IntervalKernel path_kernel(const PiecewiseField& h, double lambda) {
  return path_kernel_range(h, lambda, 0.0, h.beta());
}

IntervalKernel path_kernel_range(const PiecewiseField& h, double lambda, double t0, double t1) {
  if (t0 < 0 || t1 > h.beta() || t0 > t1)
    throw std::invalid_argument("path_kernel_range: bad time range");
  IntervalKernel acc = IntervalKernel::identity();
  const auto& br = h.breaks();
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    const double lo = std::max(t0, br[i]);
    const double hi = std::min(t1, br[i + 1]);
    if (hi > lo) acc = kernel_product(acc, interval_kernel(h.values()[i], lambda, hi - lo));
  }
  return acc;
}

EndpointLaw endpoint_law(const IntervalKernel& k, const EndpointCondition& bc) {
  EndpointLaw law{};
  double w[2][2] = {{0, 0}, {0, 0}};
  using Kind = EndpointCondition::Kind;
  switch (bc.kind) {
    case Kind::free_ends:
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) w[i][j] = 0.5 * k.k[i][j];
      break;
    case Kind::periodic:
      w[0][0] = 0.5 * k.k[0][0];
      w[1][1] = 0.5 * k.k[1][1];
      break;
    case Kind::pinned:
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          if (bc.s0 != 0 && sign_index(bc.s0) != i) continue;
          if (bc.s1 != 0 && sign_index(bc.s1) != j) continue;
          w[i][j] = (bc.s0 != 0 ? 1.0 : 0.5) * k.k[i][j];
        }
      break;
  }
  double z = w[0][0] + w[0][1] + w[1][0] + w[1][1];
  if (!(z > 0))
    throw std::domain_error("endpoint_law: boundary condition has zero weight");
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) law.p[i][j] = w[i][j] / z;
  return law;
}

double log_partition(const IntervalKernel& k, const EndpointCondition& bc) {
  using Kind = EndpointCondition::Kind;
  double z = 0;
  double prior = 1.0;
  switch (bc.kind) {
    case Kind::free_ends:
      z = 0.5 * (k.k[0][0] + k.k[0][1] + k.k[1][0] + k.k[1][1]);
      break;
    case Kind::periodic:
      z = 0.5 * (k.k[0][0] + k.k[1][1]);
      break;
    case Kind::pinned:
      prior = (bc.s0 != 0) ? 1.0 : 0.5;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          if (bc.s0 != 0 && sign_index(bc.s0) != i) continue;
          if (bc.s1 != 0 && sign_index(bc.s1) != j) continue;
          z += prior * k.k[i][j];
        }
      break;
  }
  if (!(z > 0))
    throw std::domain_error("log_partition: boundary condition has zero weight");
  return std::log(z) + k.log_scale;
}

}  // namespace qising
