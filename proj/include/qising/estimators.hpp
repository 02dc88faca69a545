#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qising {

struct BatchMeanResult {
  double mean = 0;
  double se = 0;
  double n_eff = 0;
  bool anticorrelated = false;  // n_eff above n and lag-1 correlation clearly negative
};

// batch-means standard error; n_batches contiguous blocks, remainder dropped
BatchMeanResult batch_mean(const std::vector<double>& series, int n_batches = 32);

// mean with a Sokal-window error bar, var * 2 tau_int / n. Preferred over
// batch means for series whose variance lives in rare excursions, where most
// batches see no event and the batch spread collapses.
BatchMeanResult sokal_mean(const std::vector<double>& series);

struct AutocorrResult {
  double tau = 0.5;  // in sample units, 1/2 for iid
  double se = 0;
  int window = 0;
};

// windowed sum of normalized autocorrelations, window = smallest W >= c*tau(W);
// throws when the series is shorter than 50 tau
AutocorrResult integrated_autocorrelation(const std::vector<double>& series,
                                          double c = 6.0);

using SampleMatrix = std::vector<std::vector<double>>;  // [sample][statistic]

struct ProjectedTvResult {
  double tv = 0;  // max over projections, a lower bound on the true TV
  double lo = 0, hi = 0;  // bootstrap percentile CI
  std::vector<double> per_projection;
};

// one-dimensional empirical TV on shared quantile bins, maximized over the
// projection columns
ProjectedTvResult projected_tv(const SampleMatrix& a, const SampleMatrix& b,
                               const std::vector<int>& projections,
                               int n_boot = 200, std::uint64_t seed = 1u);

struct KsResult {
  double d = 0;
  double threshold = 0;
  bool reject = false;
};

// two-sample Kolmogorov-Smirnov at level alpha
KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b,
                       double alpha = 0.01);

// one inequality check: margin >= 0 up to noise, z = margin / se
struct BatteryRow {
  std::string battery;
  std::string statistic;
  double estimate = 0;  // the margin that should be nonnegative
  double se = 0;
  double z = 0;
  std::string verdict;  // PASS / WARN / FAIL
};

struct BatteryReport {
  std::vector<BatteryRow> rows;
  std::string verdict = "PASS";  // worst row wins
  int n_tests = 0;
};

// assigns verdicts: FAIL below -3 SE with a Bonferroni-adjusted threshold
// across the suite, WARN between -2 and the adjusted threshold
BatteryReport score_battery(std::vector<BatteryRow> rows);

double normal_quantile(double p);  // inverse standard normal CDF

// shared knobs for the inequality batteries below; all run the heat-bath
// chain on a regular tree with a fixed spin boundary
struct BatterySettings {
  int b = 2;
  int depth = 2;
  double beta = 1.0;
  double lambda = 0.8;
  double h = 0.2;
  bool periodic_time = true;
  double burn_in = 25.0;
  double sample_dt = 1.0;
  int n_samples = 20000;
  std::uint64_t seed = 1;
};

// positive association: Cov(f,g) >= 0 for increasing observables on pairs of
// sites, estimated from one equilibrated chain
BatteryReport fkg_battery(const BatterySettings& s);

// raising the field raises every increasing observable
BatteryReport monotone_field_battery(const BatterySettings& s);

// plus boundary dominates minus boundary
BatteryReport monotone_bc_battery(const BatterySettings& s);

// finite-time laws from the all-plus start: freezing a subtree early keeps
// the chain above the fully active one
BatteryReport censoring_mc_battery(const BatterySettings& s);

}  // namespace qising
