#include "qising/ed.hpp"

#include <cmath>
#include <stdexcept>

namespace qising {

namespace {
double spin_of(std::uint32_t state, int site) {
  return (state >> site) & 1u ? 1.0 : -1.0;
}
}  // namespace

DenseOperator build_hamiltonian(const SiteGraph& g, double h, double lambda,
                                int frozen_sign) {
  int n = g.n_free;
  if (n > 12) throw std::invalid_argument("hamiltonian too large");
  std::uint32_t dim = 1u << n;

  // frozen neighbors act as a fixed extra field on their free endpoint
  std::vector<double> field(n, h);
  for (auto [u, v] : g.edges) {
    if (g.is_frozen(v)) field[u] += frozen_sign;
    if (g.is_frozen(u)) field[v] += frozen_sign;
  }

  DenseOperator ham = DenseOperator::Zero(dim, dim);
  for (std::uint32_t s = 0; s < dim; ++s) {
    double diag = 0;
    for (auto [u, v] : g.edges)
      if (g.is_free(u) && g.is_free(v)) diag -= spin_of(s, u) * spin_of(s, v);
    for (int i = 0; i < n; ++i) diag -= field[i] * spin_of(s, i);
    ham(s, s) = diag;
    for (int i = 0; i < n; ++i) ham(s ^ (1u << i), s) -= lambda;
  }
  return ham;
}

DenseOperator pauli_z(int site, int n) {
  std::uint32_t dim = 1u << n;
  DenseOperator op = DenseOperator::Zero(dim, dim);
  for (std::uint32_t s = 0; s < dim; ++s) op(s, s) = spin_of(s, site);
  return op;
}

DenseOperator pauli_zz(int i, int j, int n) {
  std::uint32_t dim = 1u << n;
  DenseOperator op = DenseOperator::Zero(dim, dim);
  for (std::uint32_t s = 0; s < dim; ++s)
    op(s, s) = spin_of(s, i) * spin_of(s, j);
  return op;
}

DenseOperator pauli_x(int site, int n) {
  std::uint32_t dim = 1u << n;
  DenseOperator op = DenseOperator::Zero(dim, dim);
  for (std::uint32_t s = 0; s < dim; ++s) op(s ^ (1u << site), s) = 1.0;
  return op;
}

double thermal_expectation(const DenseOperator& obs, const DenseOperator& ham,
                           double beta) {
  Eigen::SelfAdjointEigenSolver<DenseOperator> es(ham);
  const auto& w = es.eigenvalues();
  const auto& v = es.eigenvectors();
  double w_min = w.minCoeff();
  double z = 0, acc = 0;
  for (int a = 0; a < w.size(); ++a) {
    double boltz = std::exp(-beta * (w[a] - w_min));
    z += boltz;
    acc += boltz * v.col(a).dot(obs * v.col(a));
  }
  return acc / z;
}

DenseOperator thermal_operator(const DenseOperator& ham, double beta) {
  Eigen::SelfAdjointEigenSolver<DenseOperator> es(ham);
  const auto& w = es.eigenvalues();
  double w_min = w.minCoeff();
  Eigen::VectorXd boltz(w.size());
  for (int a = 0; a < w.size(); ++a) boltz[a] = std::exp(-beta * (w[a] - w_min));
  return es.eigenvectors() * boltz.asDiagonal() *
         es.eigenvectors().transpose();
}

double expm_consistency(const DenseOperator& ham, double beta) {
  double w_min =
      Eigen::SelfAdjointEigenSolver<DenseOperator>(ham).eigenvalues().minCoeff();
  DenseOperator a = -beta * (ham - w_min * DenseOperator::Identity(
                                              ham.rows(), ham.cols()));
  // scaling and squaring with a plain Taylor series, independent of the
  // eigendecomposition route
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm > 0.5) {
    norm /= 2;
    ++squarings;
  }
  DenseOperator small = a / std::ldexp(1.0, squarings);
  DenseOperator result = DenseOperator::Identity(a.rows(), a.cols());
  DenseOperator term = result;
  for (int k = 1; k <= 24; ++k) {
    term = (term * small) / k;
    result += term;
  }
  for (int k = 0; k < squarings; ++k) result = result * result;
  return (result - thermal_operator(ham, beta)).cwiseAbs().maxCoeff();
}

}  // namespace qising
