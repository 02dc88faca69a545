#include "qising/glauber.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "qising/ed.hpp"
#include "qising/estimators.hpp"
#include "qising/site_sampler.hpp"

using namespace qising;

TEST_CASE("schedule windows and containment") {
  auto g = build_tree({2, 2, false});
  auto full = Schedule::full(g);
  auto none = Schedule::none();
  auto sub = Schedule::subtree(g, 1);
  full.validate(g);
  none.validate(g);
  sub.validate(g);

  CHECK(full.active_at(3.0).size() == 7);
  CHECK(none.active_at(0.0).empty());
  // vertex 1 heads one of the two depth-1 subtrees: itself plus two children
  CHECK(sub.active_at(0.0).size() == 3);
  CHECK(sub.is_active(1.0, 1));
  CHECK(!sub.is_active(1.0, 0));

  CHECK(none.subset_of(sub));
  CHECK(sub.subset_of(full));
  CHECK(!full.subset_of(sub));

  auto rel = Schedule::released(sub, g, 2.0);
  rel.validate(g);
  CHECK(rel.subset_of(full));
  CHECK(rel.active_at(1.9).size() == 3);
  CHECK(rel.active_at(2.0).size() == 7);

  Schedule bad;
  bad.windows.push_back({0.5, {0}});
  CHECK_THROWS(bad.validate(g));
}

TEST_CASE("empty schedule leaves the start untouched") {
  auto g = build_path(3);
  auto par = ModelParams::constant_field(1.0, 0.8, 0.3);
  auto start = constant_config(g, -1, 1.0);
  auto st = run(g, par, BoundarySpec::all_plus(), Schedule::none(), 12.0, start,
                true, 42);
  CHECK(st.events > 0);
  for (int i = 0; i < 3; ++i) {
    CHECK(st.config[i].initial_sign() == -1);
    CHECK(st.config[i].n_flips() == 0);
  }
}

TEST_CASE("same seed reproduces the chain exactly") {
  auto g = build_tree({2, 1, false});
  auto par = ModelParams::constant_field(1.0, 0.7, 0.2);
  auto a = run(g, par, BoundarySpec::all_plus(), Schedule::full(g), 15.0,
               constant_config(g, +1, 1.0), true, 777);
  auto b = run(g, par, BoundarySpec::all_plus(), Schedule::full(g), 15.0,
               constant_config(g, +1, 1.0), true, 777);
  CHECK(a.events == b.events);
  for (int i = 0; i < g.n_free; ++i) {
    REQUIRE(a.config[i].initial_sign() == b.config[i].initial_sign());
    REQUIRE(a.config[i].flips() == b.config[i].flips());
  }
  auto c = run(g, par, BoundarySpec::all_plus(), Schedule::full(g), 15.0,
               constant_config(g, +1, 1.0), true, 778);
  bool same = true;
  for (int i = 0; i < g.n_free; ++i)
    same = same && a.config[i].flips() == c.config[i].flips();
  CHECK(!same);
}

TEST_CASE("single-site chain equilibrates to the exact conditional") {
  double beta = 1.0, lambda = 0.9, h = 0.5;
  auto g = make_graph(1, 0, {});
  auto par = ModelParams::constant_field(beta, lambda, h);
  auto field = PiecewiseField::constant(h, beta);

  for (bool periodic : {true, false}) {
    std::vector<double> from_chain, from_sampler;
    RngStream direct(555, 12, periodic ? 1 : 0);
    auto cond =
        periodic ? EndpointCondition::periodic() : EndpointCondition::free_ends();
    for (int rep = 0; rep < 6000; ++rep) {
      auto st = run(g, par, BoundarySpec::all_plus(), Schedule::full(g), 8.0,
                    constant_config(g, +1, beta), periodic,
                    900000ull + 2 * rep + (periodic ? 1 : 0));
      from_chain.push_back(st.config[0].integral());
      from_sampler.push_back(sample_site(field, lambda, cond, direct).integral());
    }
    auto ks = ks_two_sample(from_chain, from_sampler, 0.01);
    CHECK(!ks.reject);
  }
}

TEST_CASE("grid conditional sampler matches the exact slice law") {
  GridSpec spec{3, 1.0, true};
  std::vector<double> field{0.4, -0.2, 0.7};
  double lambda = 0.8;
  for (bool periodic : {true, false}) {
    spec.periodic = periodic;
    auto law = grid_single_site(field, lambda, spec);
    RngStream rng(31, 7, periodic ? 1 : 0);
    std::vector<double> u(spec.n_slices);
    std::vector<double> counts(8, 0.0);
    int n = 200000;
    for (int it = 0; it < n; ++it) {
      for (auto& v : u) v = rng.uniform();
      counts[sample_grid_site(field, lambda, spec, u)] += 1.0;
    }
    for (int s = 0; s < 8; ++s) {
      double emp = counts[s] / n;
      double bound = 4.0 * std::sqrt(law[s] * (1 - law[s]) / n) + 1.0 / n;
      CHECK(std::abs(emp - law[s]) <= bound);
    }
  }
}

TEST_CASE("shared uniforms couple ordered environments monotonically") {
  RngStream rng(99, 3);
  for (int n : {1, 2, 4, 6}) {
    GridSpec spec{n, 1.3, true};
    for (int trial = 0; trial < 4000; ++trial) {
      spec.periodic = trial % 2 == 0;
      std::vector<double> lo(n), hi(n), u(n);
      for (int k = 0; k < n; ++k) {
        lo[k] = rng.uniform(-2.0, 2.0);
        hi[k] = lo[k] + rng.uniform(0.0, 2.0);
        u[k] = rng.uniform();
      }
      double lambda = rng.uniform(0.0, 1.5);
      auto a = sample_grid_site(lo, lambda, spec, u);
      auto b = sample_grid_site(hi, lambda, spec, u);
      REQUIRE((a & ~b) == 0u);  // a <= b in the slicewise order
    }
  }
}

TEST_CASE("coupled grid chains keep the order and coalesce") {
  auto g = build_tree({2, 2, false});
  auto par = ModelParams::constant_field(1.0, 1.0, 0.1);
  GridSpec spec{3, 1.0, true};
  auto ch = coupled_run_pm_grid(g, par, BoundarySpec::all_plus(), spec,
                                Schedule::full(g), 40.0, 2024);
  CHECK(ch.order_checks > 0);
  for (int v = 0; v < g.n_free; ++v)
    CHECK((ch.minus.states[v] & ~ch.plus.states[v]) == 0u);
  // by t=40 the grand coupling has almost surely coalesced on 7 sites
  CHECK(ch.plus.states == ch.minus.states);
}

TEST_CASE("grid chain long-run occupancy matches the exact stationary law") {
  auto g = build_path(2);
  auto par = ModelParams::constant_field(1.0, 0.9, 0.25);
  GridSpec spec{2, 1.0, true};
  auto pi = grid_gibbs_vector(g, par, spec, BoundarySpec::all_plus());

  std::vector<double> counts(16, 0.0);
  int n_probe = 20000;
  run_grid(g, par, BoundarySpec::all_plus(), spec, Schedule::full(g),
           5.0 * (n_probe + 1), {3u, 3u}, 4242, 5.0,
           [&](double, const GridChain& st) {
             counts[st.states[0] | st.states[1] << 2] += 1.0;
           });
  double chi2 = 0, total = 0;
  for (double c : counts) total += c;
  REQUIRE(total >= n_probe);
  for (int s = 0; s < 16; ++s) {
    double expd = pi[s] * total;
    chi2 += (counts[s] - expd) * (counts[s] - expd) / expd;
  }
  CHECK(chi2 < 37.697);  // chi-squared 0.999 quantile, 15 dof
}

TEST_CASE("generator rows, stationarity and spectral gap") {
  auto g = build_path(2);
  auto par = ModelParams::constant_field(1.0, 0.8, 0.15);
  GridSpec spec{2, 1.0, true};
  std::vector<int> all{0, 1};
  auto gen = grid_generator(g, par, spec, BoundarySpec::all_plus(), all);
  Eigen::MatrixXd dense = Eigen::MatrixXd(gen);

  for (int i = 0; i < dense.rows(); ++i) {
    CHECK(std::abs(dense.row(i).sum()) < 1e-12);
    for (int j = 0; j < dense.cols(); ++j)
      if (i != j) CHECK(dense(i, j) >= 0.0);
  }

  auto pi = grid_gibbs_vector(g, par, spec, BoundarySpec::all_plus());
  Eigen::Map<Eigen::VectorXd> pi_v(pi.data(), (int)pi.size());
  CHECK((dense.transpose() * pi_v).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::EigenSolver<Eigen::MatrixXd> es(-dense);
  std::vector<double> re;
  for (int i = 0; i < dense.rows(); ++i) re.push_back(es.eigenvalues()[i].real());
  std::sort(re.begin(), re.end());
  CHECK(std::abs(re[0]) < 1e-10);
  CHECK(re[1] > 1e-6);  // spectral gap of the 16-state chain
}

TEST_CASE("uniformized transport agrees with a dense matrix exponential") {
  auto g = build_path(2);
  auto par = ModelParams::constant_field(1.0, 0.7, 0.3);
  GridSpec spec{2, 1.0, true};
  auto gen = grid_generator(g, par, spec, BoundarySpec::all_plus(), {0, 1});
  Eigen::MatrixXd l = Eigen::MatrixXd(gen);
  double t = 0.73;

  // independent oracle: scaling-and-squaring Taylor series
  Eigen::MatrixXd a = t * l;
  int squarings = 0;
  while (a.cwiseAbs().rowwise().sum().maxCoeff() > 0.5) {
    a *= 0.5;
    ++squarings;
  }
  Eigen::MatrixXd e = Eigen::MatrixXd::Identity(l.rows(), l.cols());
  Eigen::MatrixXd term = e;
  for (int k = 1; k <= 24; ++k) {
    term = term * a / k;
    e += term;
  }
  for (int s = 0; s < squarings; ++s) e = e * e;

  std::vector<double> v(l.rows(), 0.0);
  v[5] = 0.4;
  v[15] = 0.6;
  auto moved = evolve_uniformized(gen, v, t);
  Eigen::Map<Eigen::VectorXd> v0(v.data(), (int)v.size());
  Eigen::VectorXd expect = e.transpose() * v0;
  for (int i = 0; i < (int)moved.size(); ++i)
    CHECK(moved[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("more updating moves the plus start closer to equilibrium") {
  auto g = build_tree({2, 1, false});
  auto par = ModelParams::constant_field(1.0, 0.8, 0.2);
  GridSpec spec{2, 1.0, true};
  std::vector<double> times{0.3, 1.0, 2.5};

  SUBCASE("strict nesting") {
    Schedule root_only;
    root_only.windows.push_back({0.0, {0}});
    auto rep = censoring_check_exact(g, par, spec, BoundarySpec::all_plus(),
                                     root_only, Schedule::full(g), times);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.ok);
    for (const auto& row : rep.rows) {
      CHECK(row.var_more <= row.var_less + 1e-10);
      CHECK(row.ent_more <= row.ent_less + 1e-10);
      CHECK(row.tv_more <= row.tv_less + 1e-10);
      CHECK(row.dominated);
    }
  }
  SUBCASE("nothing versus everything shrinks tv strictly") {
    auto rep = censoring_check_exact(g, par, spec, BoundarySpec::all_plus(),
                                     Schedule::none(), Schedule::full(g), times);
    CHECK(rep.ok);
    for (const auto& row : rep.rows) CHECK(row.tv_more < row.tv_less - 1e-4);
  }
  SUBCASE("released censoring stays nested") {
    auto rel = Schedule::released(Schedule::subtree(g, 1), g, 1.0);
    auto rep = censoring_check_exact(g, par, spec, BoundarySpec::all_plus(), rel,
                                     Schedule::full(g), times);
    CHECK(rep.ok);
  }
  SUBCASE("equal schedules give equalities") {
    auto rep = censoring_check_exact(g, par, spec, BoundarySpec::all_plus(),
                                     Schedule::full(g), Schedule::full(g), times);
    CHECK(rep.ok);
    for (const auto& row : rep.rows) {
      CHECK(row.var_more == doctest::Approx(row.var_less).epsilon(1e-12));
      CHECK(row.tv_more == doctest::Approx(row.tv_less).epsilon(1e-12));
    }
  }
  SUBCASE("not nested throws") {
    Schedule root_only;
    root_only.windows.push_back({0.0, {0}});
    CHECK_THROWS(censoring_check_exact(g, par, spec, BoundarySpec::all_plus(),
                                       Schedule::full(g), root_only, times));
  }
}

TEST_CASE("evolved density is monotone on the two-site two-slice system") {
  auto g = build_path(2);
  auto par = ModelParams::constant_field(1.0, 0.8, 0.2);
  GridSpec spec{2, 1.0, true};
  auto mu = grid_gibbs_vector(g, par, spec, BoundarySpec::all_plus());
  auto gen = grid_generator(g, par, spec, BoundarySpec::all_plus(), {0, 1});
  std::vector<double> nu(16, 0.0);
  nu[15] = 1.0;
  for (double t : {0.2, 0.8, 2.0}) {
    auto p = evolve_uniformized(gen, nu, t);
    CHECK(monotone_density(p, mu, 4));
    auto ord = stoch_leq(mu, p, 4);
    CHECK(ord.exact);
    CHECK(ord.ok);
  }
}

TEST_CASE("coupled continuum chains narrow the gap over time") {
  auto g = build_tree({2, 2, false});
  auto par = ModelParams::constant_field(1.0, 0.9, 0.1);
  std::vector<double> gap_sum(4, 0.0);
  std::vector<double> probe_times{1.0, 2.0, 4.0, 8.0};
  int reps = 120;
  for (int rep = 0; rep < reps; ++rep) {
    std::size_t idx = 0;
    coupled_run_pm(g, par, BoundarySpec::all_plus(), Schedule::full(g), 8.0, true,
                   5000 + rep, 1.0,
                   [&](double t, const SpinConfigMap& p, const SpinConfigMap& m) {
                     for (std::size_t i = 0; i < probe_times.size(); ++i)
                       if (std::abs(t - probe_times[i]) < 1e-9)
                         gap_sum[i] += p[0].integral() - m[0].integral();
                     (void)idx;
                   });
  }
  for (auto& v : gap_sum) v /= reps;
  CHECK(gap_sum[0] > -0.05);
  CHECK(gap_sum[3] < gap_sum[0] + 0.05);
  CHECK(gap_sum[3] > -0.05);
  CHECK(gap_sum[3] < 0.2);  // nearly coalesced by t=8
}

TEST_CASE("root autocorrelation time is order one at depth zero") {
  auto rows = gap_scan(2, {0}, 1.0, 0.8, 0.0, BoundarySpec::all_plus(), true,
                       10.0, 0.5, 4000, 13);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].tau_int > 0.6);
  CHECK(rows[0].tau_int < 1.5);
  CHECK(rows[0].n_samples == 4000);
}

TEST_CASE("path integral observables match exact diagonalization") {
  SUBCASE("single site") {
    auto g = make_graph(1, 0, {});
    auto checks = path_integral_check(g, 0.4, 0.6, 1.0, 31337, 20000, 50);
    REQUIRE(checks.size() == 1);
    CHECK(std::abs(checks[0].z) < 4.0);
    CHECK(checks[0].n_eff > 3000);
    double r = std::hypot(0.4, 0.6);
    CHECK(checks[0].ed == doctest::Approx((0.4 / r) * std::tanh(r)).epsilon(1e-12));
  }
  SUBCASE("two sites") {
    auto g = build_path(2);
    auto checks = path_integral_check(g, 0.3, 0.7, 1.0, 999, 12000, 50);
    REQUIRE(checks.size() == 3);  // two single spins and the pair product
    for (const auto& c : checks) CHECK(std::abs(c.z) < 4.0);
  }
  SUBCASE("classical limit") {
    auto g = build_path(2);
    auto checks = path_integral_check(g, 0.45, 0.0, 1.3, 321, 6000, 30);
    for (const auto& c : checks) CHECK(std::abs(c.z) < 4.0);
  }
}
