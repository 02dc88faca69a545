#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qising {

// Single-spin imaginary-time path on [0,beta]: a cadlag function with values
// in {-1,+1}, jumping at finitely many flip times strictly inside (0,beta).
// The value at a flip time is the post-flip sign. Immutable after
// construction; flip times must come in strictly increasing order, duplicates
// and boundary flips are rejected rather than cleaned up.
class Trajectory {
 public:
  Trajectory(int initial_sign, std::vector<double> flips, double beta)
      : s0_(initial_sign), flips_(std::move(flips)), beta_(beta) {
    if (s0_ != 1 && s0_ != -1)
      throw std::invalid_argument("Trajectory: initial sign must be +1 or -1");
    if (!(beta_ > 0) || !std::isfinite(beta_))
      throw std::invalid_argument("Trajectory: beta must be positive and finite");
    double prev = 0.0;
    for (double t : flips_) {
      if (!(t > prev) || !(t < beta_))
        throw std::invalid_argument(
            "Trajectory: flips must be strictly increasing inside (0,beta)");
      prev = t;
    }
  }

  static Trajectory constant(int sign, double beta) {
    return Trajectory(sign, {}, beta);
  }

  int initial_sign() const { return s0_; }
  double beta() const { return beta_; }
  const std::vector<double>& flips() const { return flips_; }
  std::size_t n_flips() const { return flips_.size(); }

  int value(double t) const {
    if (t < 0 || t > beta_)
      throw std::invalid_argument("Trajectory::value: t outside [0,beta]");
    const auto k = std::upper_bound(flips_.begin(), flips_.end(), t) - flips_.begin();
    return (k & 1) ? -s0_ : s0_;
  }

  int final_sign() const { return (flips_.size() & 1) ? -s0_ : s0_; }
  bool periodic() const { return final_sign() == s0_; }

  // \int_0^beta sigma(t) dt
  double integral() const {
    double acc = 0.0, prev = 0.0;
    int s = s0_;
    for (double t : flips_) {
      acc += s * (t - prev);
      prev = t;
      s = -s;
    }
    return acc + s * (beta_ - prev);
  }

 private:
  int s0_;
  std::vector<double> flips_;
  double beta_;
};

// Piecewise-constant real-valued field on [0,beta]. Value on [break_i,
// break_{i+1}); the right endpoint beta belongs to the last piece.
class PiecewiseField {
 public:
  PiecewiseField(std::vector<double> breaks, std::vector<double> values)
      : breaks_(std::move(breaks)), values_(std::move(values)) {
    if (breaks_.size() < 2 || values_.size() + 1 != breaks_.size())
      throw std::invalid_argument("PiecewiseField: need k+1 breaks for k values");
    if (breaks_.front() != 0.0)
      throw std::invalid_argument("PiecewiseField: first break must be 0");
    for (std::size_t i = 1; i < breaks_.size(); ++i)
      if (!(breaks_[i] > breaks_[i - 1]))
        throw std::invalid_argument("PiecewiseField: breaks must strictly increase");
    for (double v : values_)
      if (!std::isfinite(v))
        throw std::invalid_argument("PiecewiseField: values must be finite");
  }

  static PiecewiseField constant(double value, double beta) {
    return PiecewiseField({0.0, beta}, {value});
  }

  double beta() const { return breaks_.back(); }
  std::size_t n_pieces() const { return values_.size(); }
  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<double>& values() const { return values_; }

  double value(double t) const {
    if (t < 0 || t > beta())
      throw std::invalid_argument("PiecewiseField::value: t outside [0,beta]");
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - breaks_.begin());
    if (idx >= breaks_.size()) idx = breaks_.size() - 1;  // t == beta
    return values_[idx - 1];
  }

  // \int_0^beta h(t) dt restricted to [a,b]
  double integral(double a, double b) const {
    if (a < 0 || b > beta() || a > b)
      throw std::invalid_argument("PiecewiseField::integral: bad range");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < breaks_.size(); ++i) {
      const double lo = std::max(a, breaks_[i]);
      const double hi = std::min(b, breaks_[i + 1]);
      if (hi > lo) acc += values_[i] * (hi - lo);
    }
    return acc;
  }

 private:
  std::vector<double> breaks_;
  std::vector<double> values_;
};

struct ModelParams {
  double beta;
  double lambda;
  PiecewiseField h;

  ModelParams(double beta_, double lambda_, PiecewiseField h_)
      : beta(beta_), lambda(lambda_), h(std::move(h_)) {
    if (!(beta > 0) || !std::isfinite(beta))
      throw std::invalid_argument("ModelParams: beta must be positive");
    if (lambda < 0 || !std::isfinite(lambda))
      throw std::invalid_argument("ModelParams: lambda must be >= 0");
    if (h.beta() != beta)
      throw std::invalid_argument("ModelParams: field lives on a different [0,beta]");
  }

  static ModelParams constant_field(double beta, double lambda, double h) {
    return ModelParams(beta, lambda, PiecewiseField::constant(h, beta));
  }
};

namespace detail {

// merged partition of [0,beta] over the flip/break point sets of the inputs
inline std::vector<double> merged_breaks(std::initializer_list<const std::vector<double>*> lists,
                                         double beta) {
  std::vector<double> pts;
  pts.push_back(0.0);
  for (const auto* l : lists) pts.insert(pts.end(), l->begin(), l->end());
  pts.push_back(beta);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

inline void require_same_beta(double a, double b, const char* who) {
  if (a != b) throw std::invalid_argument(std::string(who) + ": beta mismatch");
}

}  // namespace detail

// \int_0^beta a(t) b(t) dt
inline double dot(const Trajectory& a, const Trajectory& b) {
  detail::require_same_beta(a.beta(), b.beta(), "dot");
  const auto pts = detail::merged_breaks({&a.flips(), &b.flips()}, a.beta());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    acc += a.value(pts[i]) * b.value(pts[i]) * (pts[i + 1] - pts[i]);
  return acc;
}

// \int_0^beta h(t) sigma(t) dt
inline double dot(const PiecewiseField& h, const Trajectory& s) {
  detail::require_same_beta(h.beta(), s.beta(), "dot");
  auto pts = detail::merged_breaks({&s.flips()}, s.beta());
  pts.insert(pts.end(), h.breaks().begin(), h.breaks().end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    acc += h.value(pts[i]) * s.value(pts[i]) * (pts[i + 1] - pts[i]);
  return acc;
}

// \int |a-b| = 2 * (length of the disagreement set)
inline double l1_distance(const Trajectory& a, const Trajectory& b) {
  detail::require_same_beta(a.beta(), b.beta(), "l1_distance");
  const auto pts = detail::merged_breaks({&a.flips(), &b.flips()}, a.beta());
  double dis = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    if (a.value(pts[i]) != b.value(pts[i])) dis += pts[i + 1] - pts[i];
  return 2.0 * dis;
}

// a(t) <= b(t) for all t
inline bool partial_leq(const Trajectory& a, const Trajectory& b) {
  detail::require_same_beta(a.beta(), b.beta(), "partial_leq");
  const auto pts = detail::merged_breaks({&a.flips(), &b.flips()}, a.beta());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    if (a.value(pts[i]) > b.value(pts[i])) return false;
  return true;
}

namespace detail {

// canonical trajectory from a sign on each cell of a partition
inline Trajectory from_cells(const std::vector<double>& pts, const std::vector<int>& signs,
                             double beta) {
  std::vector<double> flips;
  for (std::size_t i = 1; i < signs.size(); ++i)
    if (signs[i] != signs[i - 1]) flips.push_back(pts[i]);
  return Trajectory(signs.front(), std::move(flips), beta);
}

}  // namespace detail

inline Trajectory pointwise_max(const Trajectory& a, const Trajectory& b) {
  detail::require_same_beta(a.beta(), b.beta(), "pointwise_max");
  const auto pts = detail::merged_breaks({&a.flips(), &b.flips()}, a.beta());
  std::vector<int> signs(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    signs[i] = std::max(a.value(pts[i]), b.value(pts[i]));
  return detail::from_cells(pts, signs, a.beta());
}

inline Trajectory pointwise_min(const Trajectory& a, const Trajectory& b) {
  detail::require_same_beta(a.beta(), b.beta(), "pointwise_min");
  const auto pts = detail::merged_breaks({&a.flips(), &b.flips()}, a.beta());
  std::vector<int> signs(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    signs[i] = std::min(a.value(pts[i]), b.value(pts[i]));
  return detail::from_cells(pts, signs, a.beta());
}

// base field plus the +-1 contribution of each neighbour trajectory,
// breakpoints merged
inline PiecewiseField assemble_field(const PiecewiseField& base,
                                     const std::vector<const Trajectory*>& neighbours) {
  std::vector<double> pts = base.breaks();
  for (const auto* n : neighbours) {
    detail::require_same_beta(base.beta(), n->beta(), "assemble_field");
    pts.insert(pts.end(), n->flips().begin(), n->flips().end());
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> vals(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double v = base.value(pts[i]);
    for (const auto* n : neighbours) v += n->value(pts[i]);
    vals[i] = v;
  }
  return PiecewiseField(std::move(pts), std::move(vals));
}

// field restricted to [0, t_end], as a field on [0, t_end]
inline PiecewiseField restrict_prefix(const PiecewiseField& h, double t_end) {
  if (!(t_end > 0) || t_end > h.beta())
    throw std::invalid_argument("restrict_prefix: t_end outside (0,beta]");
  std::vector<double> pts, vals;
  for (std::size_t i = 0; i + 1 < h.breaks().size(); ++i) {
    if (h.breaks()[i] >= t_end) break;
    pts.push_back(h.breaks()[i]);
    vals.push_back(h.values()[i]);
  }
  pts.push_back(t_end);
  return PiecewiseField(std::move(pts), std::move(vals));
}

}  // namespace qising
