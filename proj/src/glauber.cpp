#include "qising/glauber.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <stdexcept>

#include "qising/ed.hpp"
#include "qising/estimators.hpp"
#include "qising/site_sampler.hpp"

namespace qising {

namespace {

constexpr std::uint64_t kClockTag = 101;
constexpr std::uint64_t kEventTag = 202;

struct Ring {
  double t;
  int site;
  bool operator>(const Ring& o) const { return t > o.t; }
};

using RingQueue = std::priority_queue<Ring, std::vector<Ring>, std::greater<Ring>>;

}  // namespace

Schedule Schedule::full(const SiteGraph& g) {
  Schedule s;
  std::vector<int> all(g.n_free);
  for (int i = 0; i < g.n_free; ++i) all[i] = i;
  s.windows.push_back({0.0, std::move(all)});
  return s;
}

Schedule Schedule::none() {
  Schedule s;
  s.windows.push_back({0.0, {}});
  return s;
}

Schedule Schedule::subtree(const SiteGraph& g, int vertex) {
  if (!g.is_free(vertex))
    throw std::invalid_argument("Schedule::subtree: vertex not free");
  Schedule s;
  std::vector<int> inside;
  for (int v = 0; v < g.n_free; ++v) {
    int w = v;
    while (w != -1 && w != vertex) w = g.parent[w];
    if (w == vertex) inside.push_back(v);
  }
  s.windows.push_back({0.0, std::move(inside)});
  return s;
}

Schedule Schedule::released(Schedule early, const SiteGraph& g, double t_release) {
  Schedule s;
  for (const auto& w : early.windows)
    if (w.t < t_release) s.windows.push_back(w);
  std::vector<int> all(g.n_free);
  for (int i = 0; i < g.n_free; ++i) all[i] = i;
  s.windows.push_back({t_release, std::move(all)});
  return s;
}

const std::vector<int>& Schedule::active_at(double t) const {
  if (windows.empty()) throw std::logic_error("Schedule: no windows");
  std::size_t i = windows.size();
  while (i > 1 && windows[i - 1].t > t) --i;
  return windows[i - 1].active;
}

bool Schedule::is_active(double t, int site) const {
  const auto& a = active_at(t);
  return std::binary_search(a.begin(), a.end(), site);
}

void Schedule::validate(const SiteGraph& g) const {
  if (windows.empty() || windows.front().t != 0.0)
    throw std::invalid_argument("Schedule: first window must start at 0");
  for (std::size_t i = 1; i < windows.size(); ++i)
    if (!(windows[i].t > windows[i - 1].t))
      throw std::invalid_argument("Schedule: window times must increase");
  for (const auto& w : windows) {
    if (!std::is_sorted(w.active.begin(), w.active.end()))
      throw std::invalid_argument("Schedule: active sets must be sorted");
    for (int v : w.active)
      if (!g.is_free(v))
        throw std::invalid_argument("Schedule: active vertex not free");
  }
}

bool Schedule::subset_of(const Schedule& other) const {
  std::vector<double> ts;
  for (const auto& w : windows) ts.push_back(w.t);
  for (const auto& w : other.windows) ts.push_back(w.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  for (double t : ts) {
    const auto& a = active_at(t);
    const auto& b = other.active_at(t);
    if (!std::includes(b.begin(), b.end(), a.begin(), a.end())) return false;
  }
  return true;
}

// ---- continuum event loop ----

namespace {

void check_start(const SiteGraph& g, const ModelParams& par,
                 const SpinConfigMap& start) {
  if ((int)start.size() != g.n_free)
    throw std::invalid_argument("run: start size mismatch");
  for (const auto& tr : start)
    if (tr.beta() != par.beta)
      throw std::invalid_argument("run: start lives on a different [0,beta]");
}

}  // namespace

ChainState run_with_probe(
    const SiteGraph& g, const ModelParams& par, const BoundarySpec& bc,
    const Schedule& sched, double t_end, SpinConfigMap start, bool periodic_time,
    std::uint64_t seed, double probe_start, double probe_dt,
    const std::function<void(double, const SpinConfigMap&)>& probe) {
  sched.validate(g);
  check_start(g, par, start);
  auto frozen = bc.materialize(g, par.beta);
  auto cond = periodic_time ? EndpointCondition::periodic()
                            : EndpointCondition::free_ends();

  std::vector<RngStream> clocks;
  clocks.reserve(g.n_free);
  RingQueue queue;
  for (int i = 0; i < g.n_free; ++i) {
    clocks.emplace_back(seed, kClockTag, (std::uint64_t)i);
    queue.push({clocks[i].exponential(1.0), i});
  }
  std::vector<std::uint64_t> ring_count(g.n_free, 0);

  ChainState st;
  st.config = std::move(start);
  st.seed = seed;
  double next_probe = probe && probe_dt > 0
                          ? probe_start
                          : std::numeric_limits<double>::infinity();
  while (!queue.empty()) {
    Ring r = queue.top();
    if (r.t > t_end) break;
    queue.pop();
    while (next_probe <= r.t && next_probe <= t_end) {
      probe(next_probe, st.config);
      next_probe += probe_dt;
    }
    ++st.events;
    std::uint64_t k = ring_count[r.site]++;
    if (sched.is_active(r.t, r.site)) {
      auto field = local_field(g, st.config, frozen, par.h, r.site);
      RngStream ev(seed, kEventTag, (std::uint64_t)r.site, k);
      st.config[r.site] = sample_site(field, par.lambda, cond, ev);
    }
    queue.push({r.t + clocks[r.site].exponential(1.0), r.site});
  }
  while (next_probe <= t_end) {
    probe(next_probe, st.config);
    next_probe += probe_dt;
  }
  st.time = t_end;
  return st;
}

ChainState run(const SiteGraph& g, const ModelParams& par, const BoundarySpec& bc,
               const Schedule& sched, double t_end, SpinConfigMap start,
               bool periodic_time, std::uint64_t seed) {
  return run_with_probe(g, par, bc, sched, t_end, std::move(start), periodic_time,
                        seed, 0, 0, {});
}

CoupledChains coupled_run_pm(const SiteGraph& g, const ModelParams& par,
                             const BoundarySpec& bc, const Schedule& sched,
                             double t_end, bool periodic_time, std::uint64_t seed,
                             double probe_dt,
                             const std::function<void(double, const SpinConfigMap&,
                                                      const SpinConfigMap&)>& probe) {
  sched.validate(g);
  auto frozen = bc.materialize(g, par.beta);
  auto cond = periodic_time ? EndpointCondition::periodic()
                            : EndpointCondition::free_ends();

  std::vector<RngStream> clocks;
  RingQueue queue;
  for (int i = 0; i < g.n_free; ++i) {
    clocks.emplace_back(seed, kClockTag, (std::uint64_t)i);
    queue.push({clocks[i].exponential(1.0), i});
  }
  std::vector<std::uint64_t> ring_count(g.n_free, 0);

  CoupledChains ch;
  ch.plus.config = constant_config(g, +1, par.beta);
  ch.minus.config = constant_config(g, -1, par.beta);
  ch.plus.seed = ch.minus.seed = seed;
  double next_probe = probe && probe_dt > 0
                          ? probe_dt
                          : std::numeric_limits<double>::infinity();
  while (!queue.empty()) {
    Ring r = queue.top();
    if (r.t > t_end) break;
    queue.pop();
    while (next_probe <= r.t && next_probe <= t_end) {
      probe(next_probe, ch.plus.config, ch.minus.config);
      next_probe += probe_dt;
    }
    ++ch.plus.events;
    ++ch.minus.events;
    std::uint64_t k = ring_count[r.site]++;
    if (sched.is_active(r.t, r.site)) {
      // identical streams: the two chains read the same randomness
      RngStream ev_p(seed, kEventTag, (std::uint64_t)r.site, k);
      RngStream ev_m(seed, kEventTag, (std::uint64_t)r.site, k);
      auto f_p = local_field(g, ch.plus.config, frozen, par.h, r.site);
      auto f_m = local_field(g, ch.minus.config, frozen, par.h, r.site);
      ch.plus.config[r.site] = sample_site(f_p, par.lambda, cond, ev_p);
      ch.minus.config[r.site] = sample_site(f_m, par.lambda, cond, ev_m);
    }
    queue.push({r.t + clocks[r.site].exponential(1.0), r.site});
  }
  while (next_probe <= t_end) {
    probe(next_probe, ch.plus.config, ch.minus.config);
    next_probe += probe_dt;
  }
  ch.plus.time = ch.minus.time = t_end;
  return ch;
}

// ---- grid mode ----

std::vector<double> grid_local_field(const SiteGraph& g,
                                     const std::vector<std::uint32_t>& states,
                                     const std::vector<std::uint32_t>& frozen,
                                     const PiecewiseField& base,
                                     const GridSpec& spec, int site) {
  int n = spec.n_slices;
  double d = spec.delta();
  std::vector<double> field(n);
  for (int k = 0; k < n; ++k) field[k] = base.value((k + 0.5) * d);
  for (int nb : g.adj[site]) {
    std::uint32_t s = g.is_free(nb) ? states[nb] : frozen[nb - g.n_free];
    for (int k = 0; k < n; ++k) field[k] += (s >> k & 1) ? 1.0 : -1.0;
  }
  return field;
}

std::uint32_t sample_grid_site(const std::vector<double>& field, double lambda,
                               const GridSpec& spec,
                               const std::vector<double>& uniforms) {
  int n = spec.n_slices;
  if ((int)field.size() != n)
    throw std::invalid_argument("sample_grid_site: field size mismatch");
  if ((int)uniforms.size() < n)
    throw std::invalid_argument("sample_grid_site: need one uniform per slice");
  double d = spec.delta();
  double p = lambda * d / (1.0 + lambda * d);
  auto q = [p](int s, int s2) { return s == s2 ? 1.0 - p : p; };
  auto gk = [&](int k, int s) { return std::exp(field[k] * d * (s ? 1.0 : -1.0)); };

  std::uint32_t out = 0;
  if (!spec.periodic) {
    // backward messages, then sequential inverse-CDF slice by slice
    std::vector<std::array<double, 2>> m(n);
    m[n - 1] = {gk(n - 1, 0), gk(n - 1, 1)};
    for (int k = n - 2; k >= 0; --k) {
      for (int s = 0; s < 2; ++s)
        m[k][s] = gk(k, s) * (q(s, 0) * m[k + 1][0] + q(s, 1) * m[k + 1][1]);
      double norm = m[k][0] + m[k][1];
      m[k][0] /= norm;
      m[k][1] /= norm;
    }
    int prev = uniforms[0] < m[0][1] / (m[0][0] + m[0][1]) ? 1 : 0;
    out |= (std::uint32_t)prev;
    for (int k = 1; k < n; ++k) {
      double w0 = q(prev, 0) * m[k][0], w1 = q(prev, 1) * m[k][1];
      prev = uniforms[k] < w1 / (w0 + w1) ? 1 : 0;
      out |= (std::uint32_t)prev << k;
    }
    return out;
  }

  // periodic wrap: one backward pass per first-slice value, rescaled by a
  // shared factor so the two passes stay comparable
  std::array<std::vector<std::array<double, 2>>, 2> m;
  m[0].assign(n, {1.0, 1.0});
  m[1].assign(n, {1.0, 1.0});
  if (n > 1) {
    for (int a = 0; a < 2; ++a)
      for (int s = 0; s < 2; ++s) m[a][n - 1][s] = gk(n - 1, s) * q(s, a);
    for (int k = n - 2; k >= 1; --k) {
      for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 2; ++s)
          m[a][k][s] =
              gk(k, s) * (q(s, 0) * m[a][k + 1][0] + q(s, 1) * m[a][k + 1][1]);
      double norm = m[0][k][0] + m[0][k][1] + m[1][k][0] + m[1][k][1];
      for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 2; ++s) m[a][k][s] /= norm;
    }
  }
  double v0, v1;
  if (n == 1) {
    v0 = gk(0, 0) * q(0, 0);
    v1 = gk(0, 1) * q(1, 1);
  } else {
    v0 = gk(0, 0) * (q(0, 0) * m[0][1][0] + q(0, 1) * m[0][1][1]);
    v1 = gk(0, 1) * (q(1, 0) * m[1][1][0] + q(1, 1) * m[1][1][1]);
  }
  int first = uniforms[0] < v1 / (v0 + v1) ? 1 : 0;
  out |= (std::uint32_t)first;
  int prev = first;
  for (int k = 1; k < n; ++k) {
    double w0 = q(prev, 0) * m[first][k][0], w1 = q(prev, 1) * m[first][k][1];
    prev = uniforms[k] < w1 / (w0 + w1) ? 1 : 0;
    out |= (std::uint32_t)prev << k;
  }
  return out;
}

std::vector<std::uint32_t> grid_boundary(const SiteGraph& g, const BoundarySpec& bc,
                                         const GridSpec& spec) {
  auto trajs = bc.materialize(g, spec.beta);
  std::vector<std::uint32_t> out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) out.push_back(grid_trajectory_to_state(t, spec));
  return out;
}

GridChain run_grid(const SiteGraph& g, const ModelParams& par,
                   const BoundarySpec& bc, const GridSpec& spec,
                   const Schedule& sched, double t_end,
                   std::vector<std::uint32_t> start, std::uint64_t seed,
                   double probe_dt,
                   const std::function<void(double, const GridChain&)>& probe) {
  sched.validate(g);
  if ((int)start.size() != g.n_free)
    throw std::invalid_argument("run_grid: start size mismatch");
  auto frozen = grid_boundary(g, bc, spec);

  std::vector<RngStream> clocks;
  RingQueue queue;
  for (int i = 0; i < g.n_free; ++i) {
    clocks.emplace_back(seed, kClockTag, (std::uint64_t)i);
    queue.push({clocks[i].exponential(1.0), i});
  }
  std::vector<std::uint64_t> ring_count(g.n_free, 0);

  GridChain st;
  st.states = std::move(start);
  std::vector<double> u(spec.n_slices);
  double next_probe =
      probe && probe_dt > 0 ? probe_dt : std::numeric_limits<double>::infinity();
  while (!queue.empty()) {
    Ring r = queue.top();
    if (r.t > t_end) break;
    queue.pop();
    while (next_probe <= r.t && next_probe <= t_end) {
      st.time = next_probe;
      probe(next_probe, st);
      next_probe += probe_dt;
    }
    ++st.events;
    std::uint64_t k = ring_count[r.site]++;
    if (sched.is_active(r.t, r.site)) {
      RngStream ev(seed, kEventTag, (std::uint64_t)r.site, k);
      for (auto& v : u) v = ev.uniform();
      auto field = grid_local_field(g, st.states, frozen, par.h, spec, r.site);
      st.states[r.site] = sample_grid_site(field, par.lambda, spec, u);
    }
    queue.push({r.t + clocks[r.site].exponential(1.0), r.site});
  }
  while (next_probe <= t_end) {
    st.time = next_probe;
    probe(next_probe, st);
    next_probe += probe_dt;
  }
  st.time = t_end;
  return st;
}

CoupledGridChains coupled_run_pm_grid(const SiteGraph& g, const ModelParams& par,
                                      const BoundarySpec& bc, const GridSpec& spec,
                                      const Schedule& sched, double t_end,
                                      std::uint64_t seed) {
  sched.validate(g);
  auto frozen = grid_boundary(g, bc, spec);
  std::uint32_t top = (spec.n_states() - 1u);

  std::vector<RngStream> clocks;
  RingQueue queue;
  for (int i = 0; i < g.n_free; ++i) {
    clocks.emplace_back(seed, kClockTag, (std::uint64_t)i);
    queue.push({clocks[i].exponential(1.0), i});
  }
  std::vector<std::uint64_t> ring_count(g.n_free, 0);

  CoupledGridChains ch;
  ch.plus.states.assign(g.n_free, top);
  ch.minus.states.assign(g.n_free, 0u);
  std::vector<double> u(spec.n_slices);
  while (!queue.empty()) {
    Ring r = queue.top();
    if (r.t > t_end) break;
    queue.pop();
    ++ch.plus.events;
    ++ch.minus.events;
    std::uint64_t k = ring_count[r.site]++;
    if (sched.is_active(r.t, r.site)) {
      RngStream ev(seed, kEventTag, (std::uint64_t)r.site, k);
      for (auto& v : u) v = ev.uniform();
      auto f_p = grid_local_field(g, ch.plus.states, frozen, par.h, spec, r.site);
      auto f_m = grid_local_field(g, ch.minus.states, frozen, par.h, spec, r.site);
      ch.plus.states[r.site] = sample_grid_site(f_p, par.lambda, spec, u);
      ch.minus.states[r.site] = sample_grid_site(f_m, par.lambda, spec, u);
      for (int v = 0; v < g.n_free; ++v) {
        if (ch.minus.states[v] & ~ch.plus.states[v])
          throw std::logic_error("coupled grid chains lost the order");
        ++ch.order_checks;
      }
    }
    queue.push({r.t + clocks[r.site].exponential(1.0), r.site});
  }
  ch.plus.time = ch.minus.time = t_end;
  return ch;
}

// ---- exact finite-state machinery ----

namespace {

int product_bits(const SiteGraph& g, const GridSpec& spec) {
  int bits = g.n_free * spec.n_slices;
  if (bits > 20)
    throw std::invalid_argument("grid product state space above 2^20");
  return bits;
}

std::uint32_t site_of(std::uint64_t state, int i, int n) {
  return (std::uint32_t)(state >> (i * n)) & ((1u << n) - 1u);
}

}  // namespace

Eigen::SparseMatrix<double> grid_generator(const SiteGraph& g, const ModelParams& par,
                                           const GridSpec& spec, const BoundarySpec& bc,
                                           const std::vector<int>& active) {
  int bits = product_bits(g, spec);
  int n = spec.n_slices;
  std::uint64_t n_states = 1ull << bits;
  auto frozen = grid_boundary(g, bc, spec);
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<std::uint32_t> sites(g.n_free);
  for (std::uint64_t s = 0; s < n_states; ++s) {
    for (int i = 0; i < g.n_free; ++i) sites[i] = site_of(s, i, n);
    for (int x : active) {
      auto field = grid_local_field(g, sites, frozen, par.h, spec, x);
      auto law = grid_single_site(field, par.lambda, spec);
      std::uint64_t base = s & ~(((1ull << n) - 1ull) << (x * n));
      for (std::uint32_t v = 0; v < (1u << n); ++v) {
        std::uint64_t to = base | ((std::uint64_t)v << (x * n));
        double rate = law[v] - (to == s ? 1.0 : 0.0);
        if (rate != 0.0) trip.emplace_back((int)s, (int)to, rate);
      }
    }
  }
  Eigen::SparseMatrix<double> gen((int)n_states, (int)n_states);
  gen.setFromTriplets(trip.begin(), trip.end());
  return gen;
}

std::vector<double> grid_gibbs_vector(const SiteGraph& g, const ModelParams& par,
                                      const GridSpec& spec, const BoundarySpec& bc) {
  int bits = product_bits(g, spec);
  int n = spec.n_slices;
  double d = spec.delta();
  std::uint64_t n_states = 1ull << bits;
  auto frozen = grid_boundary(g, bc, spec);
  double lp = par.lambda > 0
                  ? std::log(par.lambda * d / (1.0 + par.lambda * d))
                  : -std::numeric_limits<double>::infinity();
  double ls = par.lambda > 0 ? std::log(1.0 / (1.0 + par.lambda * d)) : 0.0;
  int boundaries = spec.periodic ? n : n - 1;

  std::vector<double> logw(n_states, 0.0);
  for (std::uint64_t s = 0; s < n_states; ++s) {
    double acc = 0.0;
    for (int i = 0; i < g.n_free; ++i) {
      std::uint32_t si = site_of(s, i, n);
      int flips = grid_flip_count(si, spec);
      if (flips > 0) acc += flips * lp;
      acc += (boundaries - flips) * ls;
      for (int k = 0; k < n; ++k)
        acc += par.h.value((k + 0.5) * d) * d * ((si >> k & 1) ? 1.0 : -1.0);
    }
    for (auto [a, b] : g.edges) {
      std::uint32_t sa = g.is_free(a) ? site_of(s, a, n) : frozen[a - g.n_free];
      std::uint32_t sb = g.is_free(b) ? site_of(s, b, n) : frozen[b - g.n_free];
      // aligned slices add delta, opposed subtract: delta*(n - 2*popcount(xor))
      acc += d * (n - 2 * __builtin_popcount(sa ^ sb));
    }
    logw[s] = acc;
  }
  double mx = *std::max_element(logw.begin(), logw.end());
  double z = 0;
  for (auto& v : logw) z += (v = std::exp(v - mx));
  for (auto& v : logw) v /= z;
  return logw;
}

std::vector<double> evolve_uniformized(const Eigen::SparseMatrix<double>& gen,
                                       std::vector<double> v, double t) {
  if (t == 0 || gen.nonZeros() == 0) return v;
  int n = gen.rows();
  double rate = 0;
  for (int i = 0; i < n; ++i) rate = std::max(rate, -gen.coeff(i, i));
  if (rate == 0) return v;

  Eigen::Map<Eigen::VectorXd> v0(v.data(), n);
  Eigen::VectorXd cur = v0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  double lt = rate * t;
  double coef = std::exp(-lt);
  double cum = coef;
  acc += coef * cur;
  long j_max = (long)(lt + 40.0 * std::sqrt(lt + 1.0) + 60.0);
  for (long j = 1; j <= j_max; ++j) {
    // cur <- cur P with P = I + L/rate, applied on the right of a row vector
    cur += Eigen::VectorXd(gen.transpose() * cur) / rate;
    coef *= lt / j;
    cum += coef;
    acc += coef * cur;
    if (1.0 - cum < 1e-16) break;
  }
  return std::vector<double>(acc.data(), acc.data() + n);
}

double grid_config_magnetization(std::uint64_t state, int n_free,
                                 const GridSpec& spec) {
  double acc = 0;
  for (int i = 0; i < n_free; ++i)
    acc += grid_magnetization(site_of(state, i, spec.n_slices), spec);
  return acc;
}

namespace {

// evolve the all-plus point mass through the schedule, reporting the law at
// each requested (sorted) time
std::vector<std::vector<double>> evolve_schedule(const SiteGraph& g,
                                                 const ModelParams& par,
                                                 const GridSpec& spec,
                                                 const BoundarySpec& bc,
                                                 const Schedule& sched,
                                                 const std::vector<double>& times) {
  int bits = product_bits(g, spec);
  std::uint64_t n_states = 1ull << bits;
  std::vector<double> v(n_states, 0.0);
  v[n_states - 1] = 1.0;  // all-plus start

  std::vector<Eigen::SparseMatrix<double>> gens;
  for (const auto& w : sched.windows)
    gens.push_back(grid_generator(g, par, spec, bc, w.active));

  std::vector<std::vector<double>> out;
  double cur_t = 0;
  for (double t : times) {
    if (t < cur_t) throw std::invalid_argument("times must be sorted");
    while (cur_t < t) {
      std::size_t wi = sched.windows.size();
      while (wi > 1 && sched.windows[wi - 1].t > cur_t) --wi;
      --wi;
      double seg_end = wi + 1 < sched.windows.size()
                           ? std::min(sched.windows[wi + 1].t, t)
                           : t;
      v = evolve_uniformized(gens[wi], std::move(v), seg_end - cur_t);
      cur_t = seg_end;
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

CensoringReport censoring_check_exact(const SiteGraph& g, const ModelParams& par,
                                      const GridSpec& spec, const BoundarySpec& bc,
                                      const Schedule& a, const Schedule& b,
                                      const std::vector<double>& times,
                                      double tol) {
  a.validate(g);
  b.validate(g);
  if (!a.subset_of(b))
    throw std::invalid_argument("censoring_check_exact: schedules not nested");
  int bits = product_bits(g, spec);
  auto mu = grid_gibbs_vector(g, par, spec, bc);
  auto laws_a = evolve_schedule(g, par, spec, bc, a, times);
  auto laws_b = evolve_schedule(g, par, spec, bc, b, times);

  auto var_of = [&](const std::vector<double>& p) {
    double acc = 0;
    for (std::size_t s = 0; s < p.size(); ++s) acc += p[s] * p[s] / mu[s];
    return acc - 1.0;
  };
  auto ent_of = [&](const std::vector<double>& p) {
    double acc = 0;
    for (std::size_t s = 0; s < p.size(); ++s)
      if (p[s] > 0) acc += p[s] * std::log(p[s] / mu[s]);
    return acc;
  };

  CensoringReport rep;
  rep.ok = true;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < times.size(); ++i) {
    CensoringReport::Row row;
    row.t = times[i];
    row.var_less = var_of(laws_a[i]);
    row.var_more = var_of(laws_b[i]);
    row.ent_less = ent_of(laws_a[i]);
    row.ent_more = ent_of(laws_b[i]);
    row.tv_less = tv(laws_a[i], mu);
    row.tv_more = tv(laws_b[i], mu);
    auto ord = stoch_leq(laws_b[i], laws_a[i], bits);
    row.dominated = ord.ok;
    row.dominated_exact = ord.exact;
    for (double slack : {row.var_less - row.var_more, row.ent_less - row.ent_more,
                         row.tv_less - row.tv_more})
      rep.worst_slack = std::min(rep.worst_slack, slack);
    if (row.var_more > row.var_less + tol || row.ent_more > row.ent_less + tol ||
        row.tv_more > row.tv_less + tol || !row.dominated)
      rep.ok = false;
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<GapScanRow> gap_scan(int b, const std::vector<int>& depths,
                                 double beta, double lambda, double h,
                                 const BoundarySpec& bc, bool periodic_time,
                                 double burn_in, double sample_dt, int n_samples,
                                 std::uint64_t seed) {
  std::vector<GapScanRow> rows;
  for (int depth : depths) {
    auto g = build_tree({b, depth, false});
    auto par = ModelParams::constant_field(beta, lambda, h);
    std::vector<double> series;
    series.reserve(n_samples);
    double t_end = burn_in + n_samples * sample_dt + 0.5 * sample_dt;
    run_with_probe(g, par, bc, Schedule::full(g), t_end,
                   constant_config(g, +1, beta), periodic_time,
                   seed + 7919ull * (std::uint64_t)depth, burn_in + sample_dt,
                   sample_dt, [&](double, const SpinConfigMap& cfg) {
                     if ((int)series.size() < n_samples)
                       series.push_back(cfg[0].integral());
                   });
    auto ac = integrated_autocorrelation(series);
    // sample-unit tau times the spacing = quadrature of the autocorrelation
    // integral, so depth 0 lands near 1
    rows.push_back({depth, ac.tau * sample_dt, ac.se * sample_dt,
                    (int)series.size()});
  }
  return rows;
}

std::vector<KappaMcRow> kappa_mc(int b, int depth, double beta, double lambda,
                                 double h, int boundary_sign, bool periodic_time,
                                 double burn_in, double sample_dt, int n_samples,
                                 std::uint64_t seed) {
  if (b < 2 || depth < 1) throw std::invalid_argument("kappa_mc: need b >= 2, depth >= 1");
  // free vertices are levels 1..depth in breadth order; frozen are the root
  // followed by the b ghosts under each deepest leaf
  std::vector<int> level_start(depth + 1, 0);  // within the free range
  int m = 0;
  for (int l = 1; l <= depth; ++l) {
    level_start[l] = m;
    m += (int)std::llround(std::pow((double)b, l));
  }
  int n_leaves = (int)std::llround(std::pow((double)b, depth));
  int root = m;
  std::vector<std::pair<int, int>> edges;
  for (int k = 0; k < b; ++k) edges.push_back({root, k});
  for (int l = 2; l <= depth; ++l) {
    int width = (int)std::llround(std::pow((double)b, l));
    for (int k = 0; k < width; ++k)
      edges.push_back({level_start[l - 1] + k / b, level_start[l] + k});
  }
  for (int k = 0; k < n_leaves; ++k)
    for (int c = 0; c < b; ++c)
      edges.push_back({level_start[depth] + k, m + 1 + k * b + c});
  SiteGraph g = make_graph(m, 1 + n_leaves * b, std::move(edges));

  auto par = ModelParams::constant_field(beta, lambda, h);
  double t_end = burn_in + n_samples * sample_dt + 0.5 * sample_dt;
  auto spine_series = [&](int root_sign) {
    BoundarySpec bc;
    bc.kind = BoundarySpec::Kind::custom;
    bc.custom.push_back(Trajectory(root_sign, {}, beta));
    for (int k = 0; k < n_leaves * b; ++k)
      bc.custom.push_back(Trajectory(boundary_sign, {}, beta));
    std::vector<std::vector<double>> series(depth);
    run_with_probe(g, par, bc, Schedule::full(g), t_end,
                   constant_config(g, root_sign, beta), periodic_time,
                   seed + (root_sign > 0 ? 0u : 1u), burn_in + sample_dt,
                   sample_dt, [&](double, const SpinConfigMap& cfg) {
                     if ((int)series[0].size() >= n_samples) return;
                     for (int l = 1; l <= depth; ++l)
                       series[l - 1].push_back(cfg[level_start[l]].integral());
                   });
    return series;
  };
  auto plus = spine_series(+1);
  auto minus = spine_series(-1);
  std::vector<KappaMcRow> rows;
  for (int l = 1; l <= depth; ++l) {
    auto p = sokal_mean(plus[l - 1]);
    auto q = sokal_mean(minus[l - 1]);
    rows.push_back({l, p.mean - q.mean, std::hypot(p.se, q.se)});
  }
  return rows;
}

// declared with the exact-diagonalization interfaces; lives here because it
// drives the dynamics
std::vector<ObservableCheck> path_integral_check(const SiteGraph& g, double h,
                                                 double lambda, double beta,
                                                 std::uint64_t seed, long n_sweeps,
                                                 long burn_in_sweeps) {
  auto par = ModelParams::constant_field(beta, lambda, h);
  auto ham = build_hamiltonian(g, h, lambda);

  struct Obs {
    std::string name;
    int i, j;  // j < 0 for single-site
  };
  std::vector<Obs> obs;
  for (int i = 0; i < g.n_free; ++i)
    obs.push_back({"sz_" + std::to_string(i), i, -1});
  for (auto [a, b] : g.edges)
    if (g.is_free(a) && g.is_free(b))
      obs.push_back({"szsz_" + std::to_string(a) + "_" + std::to_string(b), a, b});

  std::vector<std::vector<double>> series(obs.size());
  double sample_dt = 1.0;
  double t_end = (double)burn_in_sweeps + (double)n_sweeps * sample_dt;
  run_with_probe(g, par, BoundarySpec::all_plus(), Schedule::full(g), t_end,
                 constant_config(g, +1, beta), true, seed,
                 (double)burn_in_sweeps + sample_dt, sample_dt,
                 [&](double, const SpinConfigMap& cfg) {
                   for (std::size_t o = 0; o < obs.size(); ++o) {
                     double v = obs[o].j < 0
                                    ? cfg[obs[o].i].integral() / beta
                                    : dot(cfg[obs[o].i], cfg[obs[o].j]) / beta;
                     series[o].push_back(v);
                   }
                 });

  std::vector<ObservableCheck> out;
  for (std::size_t o = 0; o < obs.size(); ++o) {
    auto bm = batch_mean(series[o], 64);
    ObservableCheck check;
    check.name = obs[o].name;
    check.ed = obs[o].j < 0
                   ? thermal_expectation(pauli_z(obs[o].i, g.n_free), ham, beta)
                   : thermal_expectation(pauli_zz(obs[o].i, obs[o].j, g.n_free),
                                         ham, beta);
    check.mc = bm.mean;
    check.se = bm.se;
    check.z = bm.se > 0 ? (bm.mean - check.ed) / bm.se : 0.0;
    check.n_eff = bm.n_eff;
    out.push_back(check);
  }
  return out;
}

}  // namespace qising
