#include "qising/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qising {

int grid_flip_count(std::uint32_t state, const GridSpec& spec) {
  int n = spec.n_slices;
  std::uint32_t mask = spec.n_states() - 1;
  std::uint32_t rot = ((state >> 1) | (state << (n - 1))) & mask;
  std::uint32_t diff = state ^ rot;
  if (!spec.periodic) diff &= mask >> 1;  // drop the wrap boundary
  return std::popcount(diff);
}

double grid_magnetization(std::uint32_t state, const GridSpec& spec) {
  return spec.delta() * (2 * std::popcount(state) - spec.n_slices);
}

GridMeasure grid_single_site(const std::vector<double>& field_slices,
                             double lambda, const GridSpec& spec) {
  int n = spec.n_slices;
  if ((int)field_slices.size() != n)
    throw std::invalid_argument("field slice count mismatch");
  if (n < 1 || n > 16) throw std::invalid_argument("slice count out of range");
  double d = spec.delta();
  double p = lambda * d / (1 + lambda * d);
  double log_p = std::log(p);          // -inf at lambda=0, handled below
  double log_q = std::log1p(-p);
  std::uint32_t dim = spec.n_states();

  std::vector<double> logw(dim);
  double best = -std::numeric_limits<double>::infinity();
  for (std::uint32_t s = 0; s < dim; ++s) {
    double acc = 0;
    for (int k = 0; k < n; ++k)
      acc += d * field_slices[k] * ((s >> k) & 1u ? 1.0 : -1.0);
    int flips = grid_flip_count(s, spec);
    if (flips > 0 && p == 0) {
      logw[s] = -std::numeric_limits<double>::infinity();
      continue;
    }
    if (flips > 0) acc += flips * log_p;
    acc += (n - flips - (spec.periodic ? 0 : 1)) * log_q;
    logw[s] = acc;
    best = std::max(best, acc);
  }
  GridMeasure out(dim);
  double z = 0;
  for (std::uint32_t s = 0; s < dim; ++s) {
    double w = std::exp(logw[s] - best);
    out[s] = w;
    z += w;
  }
  for (auto& w : out) w /= z;
  return out;
}

double tv_norm(const GridMeasure& mu) {
  double acc = 0;
  for (double v : mu) acc += std::abs(v);
  return acc / 2;
}

double tv(const GridMeasure& a, const GridMeasure& b) {
  if (a.size() != b.size()) throw std::invalid_argument("tv size mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / 2;
}

double measure_mass(const GridMeasure& mu) {
  double acc = 0;
  for (double v : mu) acc += v;
  return acc;
}

Trajectory grid_state_to_trajectory(std::uint32_t state,
                                    const GridSpec& spec) {
  int n = spec.n_slices;
  double d = spec.delta();
  int initial = state & 1u ? 1 : -1;
  std::vector<double> flips;
  for (int k = 0; k + 1 < n; ++k)
    if (((state >> k) ^ (state >> (k + 1))) & 1u) flips.push_back((k + 1) * d);
  return Trajectory(initial, std::move(flips), spec.beta);
}

std::uint32_t grid_trajectory_to_state(const Trajectory& t,
                                       const GridSpec& spec) {
  if (t.beta() != spec.beta) throw std::invalid_argument("beta mismatch");
  std::uint32_t s = 0;
  double d = spec.delta();
  for (int k = 0; k < spec.n_slices; ++k)
    if (t.value((k + 0.5) * d) > 0) s |= 1u << k;
  return s;
}

std::vector<std::uint64_t> enumerate_up_sets(int n_bits) {
  if (n_bits < 0 || n_bits > 5)
    throw std::invalid_argument("up-set enumeration limited to 5 bits");
  std::vector<std::uint64_t> cur{0u, 1u};  // functions of zero variables
  for (int k = 1; k <= n_bits; ++k) {
    int half = 1 << (k - 1);
    std::vector<std::uint64_t> next;
    // a monotone indicator splits on the top bit into a pair lo <= hi
    for (auto lo : cur)
      for (auto hi : cur)
        if ((lo & ~hi) == 0) next.push_back(lo | (hi << half));
    cur = std::move(next);
  }
  return cur;
}

namespace {

OrderCheck positive_exact(const GridMeasure& rho, int n_bits) {
  OrderCheck r;
  r.exact = true;
  r.worst = 0;
  for (auto mask : enumerate_up_sets(n_bits)) {
    double acc = 0;
    for (int s = 0; s < (1 << n_bits); ++s)
      if (mask >> s & 1u) acc += rho[s];
    r.worst = std::min(r.worst, acc);
  }
  r.ok = r.worst >= -1e-12;
  return r;
}

OrderCheck positive_sampled(const GridMeasure& rho, int n_bits,
                            std::uint64_t seed) {
  OrderCheck r;
  r.exact = false;
  r.worst = 0;
  RngStream rng(seed, 71);
  int dim = 1 << n_bits;
  std::vector<double> w(n_bits);
  std::vector<double> score(dim);
  for (int trial = 0; trial < 10000; ++trial) {
    double total = 0;
    for (auto& wi : w) {
      wi = rng.exponential(1.0);
      total += wi;
    }
    double thresh = rng.uniform(0.0, total);
    for (int s = 0; s < dim; ++s) {
      double acc = 0;
      for (int i = 0; i < n_bits; ++i)
        if (s >> i & 1) acc += w[i];
      score[s] = acc;
    }
    double mass = 0;
    for (int s = 0; s < dim; ++s)
      if (score[s] >= thresh) mass += rho[s];
    r.worst = std::min(r.worst, mass);
  }
  r.ok = r.worst >= -1e-12;
  return r;
}

}  // namespace

OrderCheck stoch_positive(const GridMeasure& rho, int n_bits,
                          std::uint64_t seed) {
  if ((int)rho.size() != (1 << n_bits))
    throw std::invalid_argument("measure size mismatch");
  return n_bits <= 5 ? positive_exact(rho, n_bits)
                     : positive_sampled(rho, n_bits, seed);
}

OrderCheck stoch_leq(const GridMeasure& mu, const GridMeasure& nu, int n_bits,
                     std::uint64_t seed) {
  if (mu.size() != nu.size()) throw std::invalid_argument("size mismatch");
  GridMeasure diff(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) diff[i] = nu[i] - mu[i];
  return stoch_positive(diff, n_bits, seed);
}

bool monotone_density(const GridMeasure& p, const GridMeasure& q, int n_bits) {
  int dim = 1 << n_bits;
  if ((int)p.size() != dim || (int)q.size() != dim)
    throw std::invalid_argument("size mismatch");
  for (int s = 0; s < dim; ++s)
    if (!(q[s] > 0)) throw std::invalid_argument("reference not positive");
  for (int s = 0; s < dim; ++s)
    for (int i = 0; i < n_bits; ++i) {
      if (s >> i & 1) continue;
      int t = s | (1 << i);
      // p(s)/q(s) <= p(t)/q(t) up to roundoff
      if (p[s] * q[t] > p[t] * q[s] + 1e-12 * std::abs(p[s] * q[t]) + 1e-300)
        return false;
    }
  return true;
}

}  // namespace qising
