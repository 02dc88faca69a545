#include "qising/estimators.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "qising/glauber.hpp"
#include "qising/graph.hpp"
#include "qising/rng.hpp"
#include "qising/site_sampler.hpp"

using namespace qising;

TEST_CASE("batch means on iid, constant and alternating series") {
  RngStream rng(7, 1);
  std::vector<double> iid(10000);
  for (auto& v : iid) {
    // Box-Muller standard normal
    double u1 = rng.uniform(1e-12, 1.0), u2 = rng.uniform();
    v = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  auto bm = batch_mean(iid, 32);
  CHECK(std::abs(bm.mean) < 0.05);
  CHECK(bm.se > 0.01 * 0.7);
  CHECK(bm.se < 0.01 * 1.3);
  CHECK(bm.n_eff > 3000);
  CHECK(!bm.anticorrelated);

  std::vector<double> flat(500, 3.25);
  auto bf = batch_mean(flat, 10);
  CHECK(bf.mean == 3.25);
  CHECK(bf.se == 0.0);
  CHECK(!bf.anticorrelated);

  std::vector<double> alt(1000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 1.0 : -1.0;
  auto ba = batch_mean(alt, 10);
  CHECK(ba.anticorrelated);

  CHECK_THROWS(batch_mean(std::vector<double>(10, 1.0), 32));
}

TEST_CASE("autocorrelation time of iid and AR(1) series") {
  RngStream rng(11, 2);
  std::vector<double> iid(10000);
  for (auto& v : iid) v = rng.uniform(-1.0, 1.0);
  auto ac = integrated_autocorrelation(iid);
  CHECK(ac.tau > 0.35);
  CHECK(ac.tau < 0.75);

  // AR(1) x_t = phi x_{t-1} + noise has tau = (1+phi)/(2(1-phi)) = 9.5
  double phi = 0.9;
  std::vector<double> ar(60000);
  double x = 0;
  for (auto& v : ar) {
    double u1 = rng.uniform(1e-12, 1.0), u2 = rng.uniform();
    x = phi * x + std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    v = x;
  }
  auto ar_res = integrated_autocorrelation(ar);
  CHECK(ar_res.tau > 9.5 * 0.8);
  CHECK(ar_res.tau < 9.5 * 1.2);
  CHECK(ar_res.window >= 6.0 * ar_res.tau - 1);

  // too short for the fitted tau
  std::vector<double> shorty(ar.begin(), ar.begin() + 200);
  CHECK_THROWS(integrated_autocorrelation(shorty));
}

TEST_CASE("projected tv separates shifted laws and stays near zero for equal ones") {
  RngStream rng(13, 3);
  auto draw = [&](double shift) {
    SampleMatrix m;
    for (int i = 0; i < 4000; ++i) {
      double u1 = rng.uniform(1e-12, 1.0), u2 = rng.uniform();
      double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
      m.push_back({g + shift, rng.uniform()});
    }
    return m;
  };
  auto a = draw(0.0), b = draw(0.0), c = draw(1.0);

  auto same = projected_tv(a, b, {0, 1});
  CHECK(same.tv < 0.08);
  CHECK(same.lo <= same.hi);
  CHECK(same.hi < 0.15);
  CHECK(same.hi >= same.tv * 0.5);

  auto far = projected_tv(a, c, {0, 1});
  // true TV between N(0,1) and N(1,1) is about 0.383
  CHECK(far.tv > 0.25);
  CHECK(far.per_projection[0] > far.per_projection[1]);
  CHECK(far.lo > 0.2);

  // monotone in the projection list
  auto only_noise = projected_tv(a, c, {1});
  CHECK(far.tv >= only_noise.tv - 1e-12);

  CHECK_THROWS(projected_tv(a, b, {}));
  CHECK_THROWS(projected_tv(a, b, {7}));
}

TEST_CASE("two-sample KS calibration") {
  RngStream rng(17, 4);
  std::vector<double> a(8000), b(8000), c(8000);
  for (auto& v : a) v = rng.uniform();
  for (auto& v : b) v = rng.uniform();
  for (auto& v : c) v = std::pow(rng.uniform(), 1.35);
  auto same = ks_two_sample(a, b, 0.01);
  CHECK(!same.reject);
  auto diff = ks_two_sample(a, c, 0.01);
  CHECK(diff.reject);
  CHECK(same.threshold == doctest::Approx(1.6276 * std::sqrt(2.0 / 8000)).epsilon(1e-3));
}

TEST_CASE("battery scoring applies the corrected thresholds") {
  std::vector<BatteryRow> rows;
  auto mk = [](double est, double se) {
    BatteryRow r;
    r.battery = "demo";
    r.statistic = "s";
    r.estimate = est;
    r.se = se;
    return r;
  };
  rows.push_back(mk(0.5, 0.1));    // comfortable pass
  rows.push_back(mk(-0.25, 0.1));  // 2.5 SE: warn
  rows.push_back(mk(-1.0, 0.1));   // 10 SE: fail at any correction
  auto rep = score_battery(rows);
  CHECK(rep.verdict == "FAIL");
  CHECK(rep.rows[0].verdict == "PASS");
  CHECK(rep.rows[1].verdict == "WARN");
  CHECK(rep.rows[2].verdict == "FAIL");

  // a -3.1 SE dip is only a warning once three tests share the suite
  std::vector<BatteryRow> mild{mk(0.1, 0.1), mk(0.0, 0.1), mk(-0.31, 0.1)};
  auto rep2 = score_battery(mild);
  CHECK(rep2.rows[2].verdict == "WARN");
  CHECK(rep2.verdict == "WARN");

  // exactly one test: the plain 3 SE rule
  auto rep3 = score_battery({mk(-0.31, 0.1)});
  CHECK(rep3.verdict == "FAIL");

  // zero spread: sign decides
  auto rep4 = score_battery({mk(0.0, 0.0), mk(-0.1, 0.0)});
  CHECK(rep4.rows[0].verdict == "PASS");
  CHECK(rep4.rows[1].verdict == "FAIL");
}

TEST_CASE("inequality batteries pass on the faithful dynamics") {
  BatterySettings s;
  s.seed = 42;

  auto fkg = fkg_battery(s);
  CHECK(fkg.verdict == "PASS");
  CHECK(fkg.rows.size() == 6);
  // strong pairs carry real power, leaf pairs sit near zero by pinning
  CHECK(fkg.rows[1].z > 2.0);
  CHECK(fkg.rows[4].z > 3.0);

  auto fld = monotone_field_battery(s);
  CHECK(fld.verdict == "PASS");
  CHECK(fld.rows.size() == 12);

  auto bc = monotone_bc_battery(s);
  CHECK(bc.verdict == "PASS");
  for (const auto& r : bc.rows) CHECK(r.estimate > 0);

  auto cen = censoring_mc_battery(s);
  CHECK(cen.verdict == "PASS");
  CHECK(cen.rows.size() == 16);

  // free time boundary exercises the other endpoint law
  BatterySettings sf = s;
  sf.periodic_time = false;
  sf.n_samples = 8000;
  sf.seed = 43;
  CHECK(fkg_battery(sf).verdict == "PASS");
  CHECK(censoring_mc_battery(sf).verdict == "PASS");
}

TEST_CASE("normal quantile round trip") {
  for (double p : {0.001, 0.0227, 0.5, 0.8413, 0.999}) {
    double x = normal_quantile(p);
    CHECK(0.5 * std::erfc(-x / std::sqrt(2.0)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-10));
  double p3 = 0.5 * std::erfc(3.0 / std::sqrt(2.0));
  CHECK(normal_quantile(p3) == doctest::Approx(-3.0).epsilon(1e-8));
}

// with no transverse term the trajectories never flip, so the chain reduces
// to the classical two-spin Gibbs measure and the association inequality has
// a four-state enumeration oracle
TEST_CASE("classical limit covariance matches enumeration") {
  double beta = 1.0, h = 0.3;
  double z = 0, m0 = 0, m01 = 0;
  for (int s0 : {-1, 1})
    for (int s1 : {-1, 1}) {
      double w = std::exp(beta * (s0 * s1 + h * (s0 + s1)));
      z += w;
      m0 += w * s0;
      m01 += w * s0 * s1;
    }
  m0 /= z;
  m01 /= z;
  double cov_exact = m01 - m0 * m0;
  REQUIRE(cov_exact > 0);

  auto g = build_path(2);
  auto par = ModelParams::constant_field(beta, 0.0, h);
  std::vector<double> prod;
  int n = 6000;
  run_with_probe(g, par, BoundarySpec::all_plus(), Schedule::full(g),
                 30.0 + n * 1.0, constant_config(g, +1, beta), true, 4242u,
                 31.0, 1.0, [&](double, const SpinConfigMap& c) {
                   if ((int)prod.size() < n)
                     prod.push_back(c[0].integral() / beta *
                                    (c[1].integral() / beta));
                 });
  // every path is constant, so the product series is Bernoulli-like
  for (double v : prod) CHECK(std::abs(std::abs(v) - 1.0) < 1e-12);
  auto bm = sokal_mean(prod);
  CHECK(std::abs(bm.mean - m01) < 3.5 * bm.se);
  CHECK(bm.mean > 0);
}

// the closed-form magnetization (h/r)tanh(beta r) is increasing in h; the
// exact sampler tracks it point by point at two fields half a unit apart
TEST_CASE("single site field monotonicity against the closed form") {
  double beta = 1.2, lambda = 0.7;
  auto mean_at = [&](double h) {
    double r = std::hypot(h, lambda);
    return h / r * std::tanh(beta * r);
  };
  for (double h : {-0.8, -0.2, 0.1, 0.6, 1.3})
    CHECK(mean_at(h + 0.5) > mean_at(h));

  RngStream rng(99, 3);
  for (double h : {0.2, 0.7}) {
    auto field = PiecewiseField::constant(h, beta);
    std::vector<double> series(8000);
    for (auto& v : series)
      v = sample_site(field, lambda, EndpointCondition::periodic(), rng)
              .integral() / beta;
    auto bm = batch_mean(series, 32);
    CHECK(std::abs(bm.mean - mean_at(h)) < 3.5 * bm.se);
  }
}
