#include "qising/site_sampler.hpp"

#include <algorithm>
#include <cmath>

namespace qising {

namespace {

// (1 - e^{-x})/x, the stable workhorse for the small closed forms below
double em1x(double x) {
  if (x == 0) return 1.0;
  return -std::expm1(-x) / x;
}

// position integral of the one-flip weight over a length-s segment starting
// at sign a: \int_0^s e^{h a (2u - s)} du
double one_flip_integral(double h, int a, double s) {
  const double c = 2.0 * h * a;
  return s * std::exp(h * a * s) * em1x(c * s);
}

// two flips, equal endpoints: \int_{0<u1<u2<s} e^{h a (s - 2(u2-u1))}
double two_flip_integral(double h, int a, double s) {
  const double c = 2.0 * h * a;
  const double cs = c * s;
  double base;  // \int_0^s (s-g) e^{-c g} dg
  if (std::abs(cs) < 1e-3) {
    base = s * s * (1.0 / 2 + cs * (-1.0 / 6 + cs * (1.0 / 24 - cs / 120)));
  } else {
    base = s * (-std::expm1(-cs)) / c - (1.0 - (1.0 + cs) * std::exp(-cs)) / (c * c);
  }
  return std::exp(h * a * s) * base;
}

struct SegmentSampler {
  double lambda;
  RngStream* rng;
  std::vector<double>* out;

  bool small(double s) const {
    const double x = lambda * s;
    return x * x * x < 6e-12;
  }

  // weight of the zero-flip path over (a, length s, field h) and the full
  // kernel entry it sits inside
  static double w0(double h, int a, double s, double lambda) {
    return std::exp((h * a - lambda) * s);
  }

  // K[a,a] - W0, the total weight of >=1-flip paths with equal endpoints,
  // computed without cancellation for small arguments
  static double cond1_deficit(double h, int a, double s, double lambda) {
    const double r = std::hypot(h, lambda);
    const double x = r * s;
    const double ha = h * a;
    if (x < 1e-3) {
      const double l2 = lambda * lambda;
      return std::exp(-lambda * s) * l2 * s * s *
             (0.5 + ha * s / 6.0 + (r * r + ha * ha) * s * s / 24.0);
    }
    const IntervalKernel K = interval_kernel(h, lambda, s);
    return K.entry(a, a) - w0(h, a, s, lambda);
  }

  void one_flip_position(double h, int a, double s, double t0) {
    // density on (0,s) proportional to e^{2 h a u}
    const double c = 2.0 * h * a;
    const double u = rng->uniform();
    double pos;
    if (std::abs(c * s) < 1e-9) {
      pos = u * s;
    } else {
      pos = std::log1p(u * std::expm1(c * s)) / c;
    }
    pos = std::min(std::max(pos, 1e-300), s * (1 - 1e-16));
    out->push_back(t0 + pos);
  }

  void two_flip_positions(double h, int a, double s, double t0) {
    // joint density proportional to e^{-2 h a (u2-u1)} on 0<u1<u2<s;
    // rejection off the uniform simplex, acceptance is ~1 for the tiny
    // segments this is called on
    const double c = 2.0 * h * a;
    const double m = std::max(0.0, -c * s);  // log of the density sup
    for (int tries = 0; tries < 100000; ++tries) {
      double u1 = rng->uniform() * s, u2 = rng->uniform() * s;
      if (u2 < u1) std::swap(u1, u2);
      if (std::log(std::max(rng->uniform(), 1e-300)) < -c * (u2 - u1) - m) {
        u1 = std::max(u1, 1e-300);
        u2 = std::min(std::max(u2, std::nextafter(u1, s)), s * (1 - 1e-16));
        out->push_back(t0 + u1);
        out->push_back(t0 + u2);
        return;
      }
    }
    throw std::runtime_error("two_flip_positions: rejection loop stuck");
  }

  // exact draw of the bridge over a constant piece, endpoints pinned
  void sample(double h, int a, int b, double s, double t0, int depth = 0) {
    if (depth > 200) throw std::runtime_error("segment bisection: runaway recursion");
    if (lambda == 0) {
      if (a != b) throw std::logic_error("segment: opposite endpoints need lambda > 0");
      return;
    }
    if (a == b) {
      const IntervalKernel K = interval_kernel(h, lambda, s);
      const double p0 = std::exp((h * a - lambda) * s - K.log_entry(a, a));
      if (rng->uniform() < p0) return;  // constant across the whole segment
      sample_cond1(h, a, s, t0, depth);
      return;
    }
    // opposite endpoints: every admissible path already flips
    if (small(s)) {
      const IntervalKernel K = interval_kernel(h, lambda, s);
      const double w1 = lambda * std::exp(-lambda * s) * one_flip_integral(h, a, s);
      if (rng->uniform() * K.entry(a, -a) < w1) {
        one_flip_position(h, a, s, t0);
        return;
      }
      // tail (three or more flips): one more split of the full conditional
      bisect(h, a, b, s, t0, depth);
      return;
    }
    bisect(h, a, b, s, t0, depth);
  }

  void bisect(double h, int a, int b, double s, double t0, int depth) {
    const IntervalKernel Kh = interval_kernel(h, lambda, 0.5 * s);
    const double wp = Kh.raw(a, +1) * Kh.raw(+1, b);
    const double wm = Kh.raw(a, -1) * Kh.raw(-1, b);
    const int m = (rng->uniform() * (wp + wm) < wp) ? +1 : -1;
    sample(h, a, m, 0.5 * s, t0, depth + 1);
    sample(h, m, b, 0.5 * s, t0 + 0.5 * s, depth + 1);
  }

  // equal endpoints conditioned on at least one flip
  void sample_cond1(double h, int a, double s, double t0, int depth) {
    if (depth > 200) throw std::runtime_error("segment bisection: runaway recursion");
    if (small(s)) {
      const double deficit = cond1_deficit(h, a, s, lambda);
      const double w2 =
          lambda * lambda * std::exp(-lambda * s) * two_flip_integral(h, a, s);
      if (rng->uniform() * deficit < w2) {
        two_flip_positions(h, a, s, t0);
        return;
      }
      // tail (four or more flips)
      bisect_cond1(h, a, s, t0, depth);
      return;
    }
    bisect_cond1(h, a, s, t0, depth);
  }

  void bisect_cond1(double h, int a, double s, double t0, int depth) {
    const double half = 0.5 * s;
    const IntervalKernel Kh = interval_kernel(h, lambda, half);
    // midpoint == a must exclude the globally constant path
    const double w_same =
        cond1_deficit(h, a, half, lambda) * (Kh.entry(a, a) + w0(h, a, half, lambda));
    const double w_flip = Kh.entry(a, -a) * Kh.entry(-a, a);
    if (rng->uniform() * (w_same + w_flip) < w_flip) {
      sample(h, a, -a, half, t0, depth + 1);
      sample(h, -a, a, half, t0 + half, depth + 1);
      return;
    }
    // midpoint equals a; at least one half must flip
    const double p_left_const = w0(h, a, half, lambda) *
                                cond1_deficit(h, a, half, lambda) / w_same;
    if (rng->uniform() < p_left_const) {
      sample_cond1(h, a, half, t0 + half, depth + 1);
    } else {
      sample_cond1(h, a, half, t0, depth + 1);
      sample(h, a, a, half, t0 + half, depth + 1);
    }
  }
};

}  // namespace

Trajectory sample_free_reference(double beta, double lambda, RngStream& rng) {
  if (!(beta > 0) || lambda < 0)
    throw std::invalid_argument("sample_free_reference: need beta > 0, lambda >= 0");
  const long n = rng.poisson(lambda * beta);
  std::vector<double> flips(n);
  for (auto& t : flips) t = rng.uniform() * beta;
  std::sort(flips.begin(), flips.end());
  flips.erase(std::unique(flips.begin(), flips.end()), flips.end());
  const int s0 = rng.bernoulli(0.5) ? +1 : -1;
  return Trajectory(s0, std::move(flips), beta);
}

Trajectory sample_site(const PiecewiseField& field, double lambda,
                       const EndpointCondition& bc, RngStream& rng) {
  if (lambda < 0) throw std::invalid_argument("sample_site: lambda must be >= 0");
  const double beta = field.beta();
  const auto& br = field.breaks();
  const std::size_t m = field.n_pieces();

  // piece kernels and suffix products
  std::vector<IntervalKernel> piece(m);
  for (std::size_t i = 0; i < m; ++i)
    piece[i] = interval_kernel(field.values()[i], lambda, br[i + 1] - br[i]);
  std::vector<IntervalKernel> suffix(m + 1);
  suffix[m] = IntervalKernel::identity();
  for (std::size_t i = m; i-- > 0;) suffix[i] = kernel_product(piece[i], suffix[i + 1]);

  // endpoint pair; fall back to the last admissible cell if roundoff pushes
  // the uniform past the total
  const EndpointLaw law = endpoint_law(suffix[0], bc);
  int s_begin = 0, s_end = 0;
  {
    const double u = rng.uniform();
    double acc = 0;
    bool done = false;
    for (int i = 0; i < 2 && !done; ++i)
      for (int j = 0; j < 2 && !done; ++j) {
        if (law.p[i][j] <= 0) continue;
        s_begin = index_sign(i);
        s_end = index_sign(j);
        acc += law.p[i][j];
        if (u < acc) done = true;
      }
  }

  // signs at interior breakpoints, conditioned on the endpoint pair
  std::vector<int> sign_at(m + 1);
  sign_at[0] = s_begin;
  sign_at[m] = s_end;
  for (std::size_t i = 1; i < m; ++i) {
    const int x = sign_at[i - 1];
    const double wp = piece[i - 1].raw(x, +1) * suffix[i].raw(+1, s_end);
    const double wm = piece[i - 1].raw(x, -1) * suffix[i].raw(-1, s_end);
    if (!(wp + wm > 0))
      throw std::domain_error("sample_site: conditioning has zero weight");
    sign_at[i] = (rng.uniform() * (wp + wm) < wp) ? +1 : -1;
  }

  std::vector<double> flips;
  SegmentSampler seg{lambda, &rng, &flips};
  for (std::size_t i = 0; i < m; ++i)
    seg.sample(field.values()[i], sign_at[i], sign_at[i + 1], br[i + 1] - br[i], br[i]);

  // a sign change across a breakpoint is realized by an odd number of bridge
  // flips inside the piece, never by a flip at the breakpoint itself
  std::sort(flips.begin(), flips.end());
  // roundoff can land two flips on the same double or push one onto a
  // boundary; nudge rather than drop, dropping would break flip parity
  for (std::size_t i = 0; i < flips.size(); ++i) {
    const double prev = (i == 0) ? 0.0 : flips[i - 1];
    if (flips[i] <= prev) flips[i] = std::nextafter(prev, beta);
    if (flips[i] >= beta) flips[i] = std::nextafter(beta, 0.0);
  }
  for (std::size_t i = flips.size(); i-- > 1;)
    if (flips[i] <= flips[i - 1]) flips[i - 1] = std::nextafter(flips[i], 0.0);
  return Trajectory(s_begin, std::move(flips), beta);
}

double last_flip_cdf(const PiecewiseField& field, double lambda, int tau, double t) {
  const double beta = field.beta();
  if (t < 0 || t > beta) throw std::invalid_argument("last_flip_cdf: t outside [0,beta]");
  const double tail = field.integral(t, beta) * tau - lambda * (beta - t);
  const IntervalKernel head = path_kernel_range(field, lambda, 0.0, t);
  const double log_num =
      std::log(0.5 * (head.raw(+1, tau) + head.raw(-1, tau))) + head.log_scale + tail;
  const IntervalKernel full = path_kernel(field, lambda);
  const double log_den =
      std::log(0.5 * (full.raw(+1, tau) + full.raw(-1, tau))) + full.log_scale;
  return std::exp(log_num - log_den);
}

CoupledEndpointPair monotone_endpoint_coupling(const PiecewiseField& field, double lambda,
                                               RngStream& rng) {
  const double beta = field.beta();
  auto draw_last_flip = [&](int tau) -> double {
    const double u = rng.uniform();
    if (u <= last_flip_cdf(field, lambda, tau, 0.0)) return 0.0;
    double lo = 0.0, hi = beta;
    for (int it = 0; it < 100 && hi - lo > 1e-15 * beta; ++it) {
      const double mid = 0.5 * (lo + hi);
      (last_flip_cdf(field, lambda, tau, mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  const double t_plus = draw_last_flip(+1);
  const double t_minus = draw_last_flip(-1);
  const double T = std::max(t_plus, t_minus);
  const int eps = (t_plus < t_minus) ? +1 : -1;

  if (T == 0.0) {
    return {Trajectory::constant(+1, beta), Trajectory::constant(-1, beta)};
  }

  const Trajectory shared =
      sample_site(restrict_prefix(field, T), lambda, EndpointCondition::pinned(0, eps), rng);
  std::vector<double> plus_flips = shared.flips();
  std::vector<double> minus_flips = shared.flips();
  if (eps == -1)
    plus_flips.push_back(T);  // the plus path jumps up at its last flip T
  else
    minus_flips.push_back(T);  // the minus path jumps down at T
  return {Trajectory(shared.initial_sign(), std::move(plus_flips), beta),
          Trajectory(shared.initial_sign(), std::move(minus_flips), beta)};
}

std::vector<IncreasingFunction> increasing_function_suite(double beta) {
  std::vector<IncreasingFunction> out;
  out.push_back({"time_average", [beta](const Trajectory& s) { return s.integral() / beta; }});
  const std::vector<double> grid = {0.0, 0.25 * beta, 0.5 * beta, 0.75 * beta, beta};
  const std::vector<std::string> tag = {"0", "q1", "q2", "q3", "beta"};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    out.push_back({"value_at_" + tag[i], [t](const Trajectory& s) { return double(s.value(t)); }});
  }
  out.push_back({"min_on_grid", [grid](const Trajectory& s) {
                   double m = 1;
                   for (double t : grid) m = std::min(m, double(s.value(t)));
                   return m;
                 }});
  out.push_back({"all_plus_on_grid", [grid](const Trajectory& s) {
                   for (double t : grid)
                     if (s.value(t) < 0) return -1.0;
                   return 1.0;
                 }});
  out.push_back({"not_all_minus_on_grid", [grid](const Trajectory& s) {
                   for (double t : grid)
                     if (s.value(t) > 0) return 1.0;
                   return -1.0;
                 }});
  out.push_back({"both_ends_plus", [beta](const Trajectory& s) {
                   return (s.value(0.0) > 0 && s.value(beta) > 0) ? 1.0 : -1.0;
                 }});
  return out;
}

}  // namespace qising
