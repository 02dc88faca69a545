#include "qising/cavity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qising/rng.hpp"

namespace qising {

namespace {
constexpr std::size_t kSliceBudget = std::size_t(48) << 20;  // one eta table
constexpr std::size_t kFullBudget = std::size_t(256) << 20;  // all eta tables
}  // namespace

SumLattice::SumLattice(int b_, int n_) : b(b_), n(n_) {
  pow.resize(n + 1);
  pow[0] = 1;
  for (int k = 0; k < n; ++k) pow[k + 1] = pow[k] * (b + 1);
  size = pow[n];
}

CavityContext::CavityContext(const CavityParams& par)
    : par_(par), dim_(1 << par.grid.n_slices),
      lat_(par.b, par.grid.n_slices) {
  if (par.b < 1) throw std::invalid_argument("need at least one child");
  std::size_t slice_bytes =
      std::size_t(lat_.size) * std::size_t(dim_) * sizeof(double);
  if (slice_bytes > kSliceBudget)
    throw std::invalid_argument("sum-field table exceeds the memory budget");
  state_offset_.resize(dim_);
  for (int x = 0; x < dim_; ++x) {
    int off = 0;
    for (int k = 0; k < par.grid.n_slices; ++k)
      if (x >> k & 1) off += lat_.pow[k];
    state_offset_[x] = off;
  }
  phi_ = grid_single_site(std::vector<double>(par.grid.n_slices, 0.0),
                          par.lambda, par.grid);
  site_cache_.resize(dim_);
}

const double* CavityContext::site_table(std::uint32_t eta) const {
  auto& slot = site_cache_[eta];
  if (slot.empty()) {
    slot.resize(std::size_t(lat_.size) * dim_);
    int n = par_.grid.n_slices;
    std::vector<double> field(n);
    for (int s = 0; s < lat_.size; ++s) {
      for (int k = 0; k < n; ++k)
        field[k] = par_.h + lat_.sum_value(s, k) + (eta >> k & 1 ? 1.0 : -1.0);
      auto row = grid_single_site(field, par_.lambda, par_.grid);
      std::copy(row.begin(), row.end(), slot.begin() + std::size_t(s) * dim_);
    }
  }
  return slot.data();
}

void CavityContext::warm_site_tables() const {
  require_full_cache();
#pragma omp parallel for schedule(dynamic)
  for (int eta = 0; eta < dim_; ++eta) site_table(eta);
}

void CavityContext::require_full_cache() const {
  std::size_t total = std::size_t(dim_) * lat_.size * dim_ * sizeof(double);
  if (total > kFullBudget)
    throw std::invalid_argument(
        "full eta table cache exceeds the memory budget; use a smaller grid");
}

double CavityContext::norm_1x(const GridKernel& rho) const {
  double acc = 0;
  for (int eta = 0; eta < dim_; ++eta) acc += phi_[eta] * tv_norm(rho[eta]);
  return acc;
}

double CavityContext::norm_inf_x(const GridKernel& rho) const {
  double acc = 0;
  for (int eta = 0; eta < dim_; ++eta) acc = std::max(acc, tv_norm(rho[eta]));
  return acc;
}

namespace {

// S(sigma0, s) = weight of slice-sum lattice point s under the product of
// the b child kernel rows at sigma0
Eigen::MatrixXd build_sum_matrix(const CavityContext& ctx,
                                 const std::vector<const GridKernel*>& ks) {
  int b = ctx.params().b;
  if ((int)ks.size() != b) throw std::invalid_argument("need b child kernels");
  int dim = ctx.dim();
  int lat = ctx.lattice().size;
  Eigen::MatrixXd s_mat(dim, lat);
  std::vector<double> cur(lat), nxt(lat);
  for (int s0 = 0; s0 < dim; ++s0) {
    const auto& row0 = (*ks[0])[s0];
    std::fill(cur.begin(), cur.end(), 0.0);
    for (int x = 0; x < dim; ++x) cur[ctx.state_offset(x)] += row0[x];
    for (int i = 1; i < b; ++i) {
      const auto& row = (*ks[i])[s0];
      std::fill(nxt.begin(), nxt.end(), 0.0);
      for (int idx = 0; idx < lat; ++idx) {
        double w = cur[idx];
        if (w == 0) continue;
        for (int x = 0; x < dim; ++x) nxt[idx + ctx.state_offset(x)] += w * row[x];
      }
      cur.swap(nxt);
    }
    for (int idx = 0; idx < lat; ++idx) s_mat(s0, idx) = cur[idx];
  }
  return s_mat;
}

GridMeasure apply_with_sum_matrix(const CavityContext& ctx, std::uint32_t eta,
                                  const Eigen::MatrixXd& s_mat,
                                  const GridMeasure& rho) {
  int dim = ctx.dim();
  int lat = ctx.lattice().size;
  Eigen::Map<const Eigen::VectorXd> rho_v(rho.data(), dim);
  Eigen::VectorXd wlat = s_mat.transpose() * rho_v;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      site(ctx.site_table(eta), lat, dim);
  Eigen::VectorXd out = site.transpose() * wlat;
  return GridMeasure(out.data(), out.data() + dim);
}

// the row map is linear, so the fixed point solves a dense linear system;
// one equation is redundant (mass is preserved) and becomes the constraint
// sum = 1.  the TV residual check keeps the advertised error contract.
GridMeasure solve_row(const CavityContext& ctx, std::uint32_t eta,
                      const Eigen::MatrixXd& s_mat, double tol) {
  int dim = ctx.dim();
  int lat = ctx.lattice().size;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      site(ctx.site_table(eta), lat, dim);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim);
  a.noalias() -= site.transpose() * s_mat.transpose();
  a.row(dim - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  rhs[dim - 1] = 1.0;
  Eigen::VectorXd x = a.partialPivLu().solve(rhs);
  GridMeasure cur(x.data(), x.data() + dim);
  auto img = apply_with_sum_matrix(ctx, eta, s_mat, cur);
  if (!(tv(cur, img) < tol))
    throw std::runtime_error("cavity fixed point did not converge");
  return cur;
}

}  // namespace

ROperator::ROperator(const CavityContext& ctx, std::uint32_t eta,
                     const std::vector<const GridKernel*>& kernels)
    : ctx_(&ctx), eta_(eta), s_(build_sum_matrix(ctx, kernels)) {}

GridMeasure ROperator::apply(const GridMeasure& rho) const {
  return apply_with_sum_matrix(*ctx_, eta_, s_, rho);
}

GridMeasure apply_R(const CavityContext& ctx, std::uint32_t eta,
                    const std::vector<const GridKernel*>& kernels,
                    const GridMeasure& rho) {
  return apply_with_sum_matrix(ctx, eta, build_sum_matrix(ctx, kernels), rho);
}

GridMeasure solve_cavity(const CavityContext& ctx, std::uint32_t eta,
                         const std::vector<const GridKernel*>& kernels,
                         double tol) {
  return solve_row(ctx, eta, build_sum_matrix(ctx, kernels), tol);
}

NuResult nu_recursion(const CavityContext& ctx, int n_max, double tol,
                      std::vector<GridKernel>* trace) {
  ctx.warm_site_tables();
  int dim = ctx.dim();
  NuResult res;
  GridKernel cur(dim, GridMeasure(dim, 0.0));
  for (int eta = 0; eta < dim; ++eta) cur[eta][dim - 1] = 1.0;  // all-plus
  if (trace) trace->push_back(cur);
  for (int n = 0; n < n_max; ++n) {
    GridKernel nxt(dim);
    std::vector<const GridKernel*> ks(ctx.params().b, &cur);
    auto s_mat = build_sum_matrix(ctx, ks);
    bool stuck = false;
#pragma omp parallel for schedule(dynamic)
    for (int eta = 0; eta < dim; ++eta) {
      try {
        nxt[eta] = solve_row(ctx, eta, s_mat, 1e-12);
      } catch (const std::exception&) {
        stuck = true;
      }
    }
    if (stuck) throw std::runtime_error("cavity row did not converge");
    double inc = 0;
    for (int eta = 0; eta < dim; ++eta)
      inc = std::max(inc, tv(cur[eta], nxt[eta]));
    res.increments.push_back(inc);
    cur = std::move(nxt);
    if (trace) trace->push_back(cur);
    ++res.steps;
    if (inc < tol) {
      res.converged = true;
      break;
    }
  }
  // density bound of the fixed point against the free reference
  double c_hat = 1.0;
  for (int eta = 0; eta < dim; ++eta)
    for (int x = 0; x < dim; ++x) {
      double ratio = cur[eta][x] / ctx.phi()[x];
      if (!(ratio > 0)) {
        c_hat = 0;
        break;
      }
      c_hat = std::min(c_hat, std::min(ratio, 1.0 / ratio));
    }
  res.c_hat = c_hat;
  res.nu_inf = std::move(cur);
  return res;
}

DOperator::DOperator(const CavityContext& ctx, const GridKernel& nu_inf)
    : ctx_(&ctx), nu_(&nu_inf) {
  ctx.warm_site_tables();
  int dim = ctx.dim();
  int lat = ctx.lattice().size;
  std::vector<const GridKernel*> pure(ctx.params().b, &nu_inf);
  s_pure_ = build_sum_matrix(ctx, pure);
  lu_.resize(dim);
#pragma omp parallel for schedule(dynamic)
  for (int eta = 0; eta < dim; ++eta) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        site(ctx.site_table(eta), lat, dim);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim);
    a.noalias() -= site.transpose() * s_pure_.transpose();
    a.row(dim - 1).setOnes();  // pins the summed tail to the zero-mass sheet
    lu_[eta].compute(a);
  }
}

GridKernel DOperator::apply(const GridKernel& rho) const {
  int dim = ctx_->dim();
  int b = ctx_->params().b;
  std::vector<const GridKernel*> mixed(b, nu_);
  mixed[0] = &rho;
  auto s_mixed = build_sum_matrix(*ctx_, mixed);
  GridKernel out(dim);
  bool off_sheet = false;
#pragma omp parallel for schedule(dynamic)
  for (int eta = 0; eta < dim; ++eta) {
    GridMeasure t0 = apply_with_sum_matrix(*ctx_, eta, s_mixed, (*nu_)[eta]);
    double mass = 0, scale = 0;
    for (double v : t0) {
      mass += v;
      scale += std::abs(v);
    }
    if (std::abs(mass) > 1e-9 * std::max(scale, 1.0)) off_sheet = true;
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(t0.data(), dim);
    rhs[dim - 1] = 0.0;
    Eigen::VectorXd x = lu_[eta].solve(rhs);
    out[eta] = GridMeasure(x.data(), x.data() + dim);
  }
  if (off_sheet)
    throw std::invalid_argument("direction kernel must have zero-mass rows");
  return out;
}

GridKernel apply_D(const CavityContext& ctx, const GridKernel& rho,
                   const GridKernel& nu_inf) {
  return DOperator(ctx, nu_inf).apply(rho);
}

double geometric_rate(const std::vector<double>& values, int from) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int i = from; i < (int)values.size(); ++i) {
    double v = std::abs(values[i]);
    if (v <= 0) continue;
    double x = i, y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return 0;
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return std::exp(slope);
}

DkScanResult dk_norm_scan(const CavityContext& ctx, const GridKernel& nu_inf,
                          int k_max, std::uint64_t seed, int n_random) {
  int dim = ctx.dim();
  RngStream rng(seed, 55);
  std::vector<GridKernel> directions;

  // single-row two-point differences, top-bottom plus random pairs
  std::vector<int> rows{0, dim - 1, dim / 2};
  for (int r = 0; r < 3; ++r)
    rows.push_back((int)(rng.next() % (std::uint64_t)dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int r = rows[i];
    int hi = i < 3 ? dim - 1 : (int)(rng.next() % (std::uint64_t)dim);
    int lo = i < 3 ? 0 : (int)(rng.next() % (std::uint64_t)dim);
    if (hi == lo) hi = dim - 1 - lo;
    GridKernel k(dim, GridMeasure(dim, 0.0));
    k[r][hi] += 1.0;
    k[r][lo] -= 1.0;
    directions.push_back(std::move(k));
  }
  // random stochastically positive kernels: sums of (upper - lower) pairs
  for (int t = 0; t < n_random; ++t) {
    GridKernel k(dim, GridMeasure(dim, 0.0));
    for (int eta = 0; eta < dim; ++eta)
      for (int j = 0; j < 4; ++j) {
        int a = (int)(rng.next() % (std::uint64_t)dim);
        int up = a | (int)(rng.next() % (std::uint64_t)dim);
        if (up == a) up = dim - 1;
        double w = rng.uniform();
        k[eta][up] += w;
        k[eta][a] -= w;
      }
    directions.push_back(std::move(k));
  }

  DkScanResult res;
  res.norms.assign(k_max, 0.0);
  DOperator op(ctx, nu_inf);
  for (auto& dir : directions) {
    double n1 = ctx.norm_1x(dir);
    if (n1 <= 0) continue;
    for (auto& row : dir)
      for (auto& v : row) v /= n1;
    GridKernel cur = dir;
    for (int k = 1; k <= k_max; ++k) {
      cur = op.apply(cur);
      res.norms[k - 1] = std::max(res.norms[k - 1], ctx.norm_inf_x(cur));
    }
  }
  res.rate = geometric_rate(res.norms, 0);
  return res;
}

KappaResult kappa_exact(const CavityParams& par, int depth,
                        int boundary_sign) {
  const GridSpec& spec = par.grid;
  int n = spec.n_slices;
  int dim = 1 << n;
  double d = spec.delta();

  // slice-overlap edge weights exp(delta * sum_k x_k y_k)
  Eigen::MatrixXd edge(dim, dim);
  for (int x = 0; x < dim; ++x)
    for (int y = 0; y < dim; ++y)
      edge(x, y) = std::exp(d * (n - 2 * std::popcount(unsigned(x ^ y))));

  auto w_int = grid_single_site(std::vector<double>(n, par.h), par.lambda, spec);
  auto w_leaf = grid_single_site(
      std::vector<double>(n, par.h + par.b * boundary_sign), par.lambda, spec);

  // upward messages per level, normalized to max 1
  std::vector<Eigen::VectorXd> up(depth + 1);
  up[depth] = Eigen::Map<const Eigen::VectorXd>(w_leaf.data(), dim);
  up[depth] /= up[depth].maxCoeff();
  for (int lev = depth - 1; lev >= 0; --lev) {
    Eigen::VectorXd below = edge * up[lev + 1];
    Eigen::VectorXd u(dim);
    for (int x = 0; x < dim; ++x)
      u[x] = w_int[x] * std::pow(below[x], par.b);
    up[lev] = u / u.maxCoeff();
  }

  KappaResult res;
  auto run_root = [&](int root_state) {
    std::vector<double> mags;
    Eigen::VectorXd cur = Eigen::VectorXd::Zero(dim);
    cur[root_state] = 1.0;
    auto mag = [&](const Eigen::VectorXd& v) {
      double acc = 0;
      for (int x = 0; x < dim; ++x)
        acc += v[x] * grid_magnetization(x, spec);
      return acc;
    };
    mags.push_back(mag(cur));
    for (int lev = 1; lev <= depth; ++lev) {
      Eigen::VectorXd nxt = Eigen::VectorXd::Zero(dim);
      for (int x = 0; x < dim; ++x) {
        if (cur[x] == 0) continue;
        Eigen::VectorXd row = edge.row(x).transpose().cwiseProduct(up[lev]);
        nxt += cur[x] / row.sum() * row;
      }
      cur = nxt;
      mags.push_back(mag(cur));
    }
    return mags;
  };
  auto plus = run_root(dim - 1);
  auto minus = run_root(0);
  for (int lev = 0; lev <= depth; ++lev)
    res.gaps.push_back(plus[lev] - minus[lev]);
  res.kappa_hat = geometric_rate(res.gaps, 2);
  return res;
}

GammaResult gamma_exact(const CavityParams& par, int n_random_envelope,
                        int n_lipschitz_pairs, std::uint64_t seed) {
  const GridSpec& spec = par.grid;
  int n = spec.n_slices;
  int dim = 1 << n;
  int b = par.b;
  RngStream rng(seed, 99);
  GammaResult res;

  auto site = [&](const std::vector<double>& f) {
    return grid_single_site(f, par.lambda, spec);
  };
  auto eta_field = [&](int state, double base) {
    std::vector<double> f(n);
    for (int k = 0; k < n; ++k)
      f[k] = base + (state >> k & 1 ? 1.0 : -1.0);
    return f;
  };

  // worst pair over single-neighbor sign patterns at each constant
  // remaining-neighbor sum; extremes plus alternating patterns, then random
  // sum-field vectors
  std::uint32_t alt = 0;
  for (int k = 0; k < n; k += 2) alt |= 1u << k;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs{
      {std::uint32_t(dim - 1), 0u},
      {std::uint32_t(dim - 1), alt},
      {alt, 0u},
      {alt, std::uint32_t(dim - 1) & ~alt}};
  for (int c = -b; c <= b; ++c)
    for (auto [ea, eb] : pairs) {
      double t = tv(site(eta_field(ea, par.h + c)), site(eta_field(eb, par.h + c)));
      res.gamma_hat = std::max(res.gamma_hat, t);
      ++res.points;
    }
  SumLattice lat(b, n);
  for (int trial = 0; trial < n_random_envelope; ++trial) {
    int s = (int)(rng.next() % (std::uint64_t)lat.size);
    std::uint32_t ea = (std::uint32_t)(rng.next() % (std::uint64_t)dim);
    std::uint32_t eb = (std::uint32_t)(rng.next() % (std::uint64_t)dim);
    std::vector<double> fa(n), fb(n);
    for (int k = 0; k < n; ++k) {
      double base = par.h + lat.sum_value(s, k);
      fa[k] = base + (ea >> k & 1 ? 1.0 : -1.0);
      fb[k] = base + (eb >> k & 1 ? 1.0 : -1.0);
    }
    double t = tv(site(fa), site(fb));
    res.gamma_hat = std::max(res.gamma_hat, t);
    ++res.points;
  }

  // Lipschitz bound in the time-integral L1 distance
  double m_env = spec.beta * (std::abs(par.h) + b + 1);
  double gamma_const = 1.0 / std::log(3.0);
  res.lipschitz_pairs = n_lipschitz_pairs;
  for (int trial = 0; trial < n_lipschitz_pairs; ++trial) {
    std::vector<double> fa(n), fb(n);
    double l1 = 0;
    for (int k = 0; k < n; ++k) {
      fa[k] = rng.uniform(-m_env / spec.beta, m_env / spec.beta);
      fb[k] = rng.uniform(-m_env / spec.beta, m_env / spec.beta);
      l1 += std::abs(fa[k] - fb[k]) * spec.delta();
    }
    double t = tv(site(fa), site(fb));
    double bound = gamma_const * l1;
    double ratio = t / bound;
    res.worst_lipschitz_ratio = std::max(res.worst_lipschitz_ratio, ratio);
    if (t > bound * (1 + 1e-9)) ++res.lipschitz_violations;
  }
  return res;
}

}  // namespace qising
