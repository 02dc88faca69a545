#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "qising/graph.hpp"

namespace qising {

// Dense symmetric operator on the 2^n spin basis. Basis index bit v set
// means spin v is +1.
using DenseOperator = Eigen::MatrixXd;

// H = -sum_edges s_i s_j - h sum_i s_i - lambda sum_i X_i, with frozen
// neighbors folded in as an extra local field frozen_sign per incident edge.
// Intended for small systems; throws beyond 12 free sites.
DenseOperator build_hamiltonian(const SiteGraph& g, double h, double lambda,
                                int frozen_sign = 1);

DenseOperator pauli_z(int site, int n);
DenseOperator pauli_zz(int i, int j, int n);
DenseOperator pauli_x(int site, int n);

// <O> at inverse temperature beta via full eigendecomposition; spectrum is
// shifted by its minimum before exponentiating
double thermal_expectation(const DenseOperator& obs, const DenseOperator& ham,
                           double beta);

// exp(-beta (H - w_min)), eigendecomposition route
DenseOperator thermal_operator(const DenseOperator& ham, double beta);

// max abs entry difference between the eigendecomposition thermal operator
// and an independent scaling-and-squaring Taylor evaluation
double expm_consistency(const DenseOperator& ham, double beta);

// one observable compared between exact diagonalization and a Monte Carlo
// time-average estimate
struct ObservableCheck {
  std::string name;
  double ed = 0;
  double mc = 0;
  double se = 0;
  double z = 0;  // (mc - ed) / se
  double n_eff = 0;
};

// Runs the continuous-time single-site dynamics on the graph and compares
// time-averaged spin observables against exact diagonalization. Periodic in
// imaginary time. Defined in glauber.cpp.
std::vector<ObservableCheck> path_integral_check(const SiteGraph& g, double h,
                                                 double lambda, double beta,
                                                 std::uint64_t seed,
                                                 long n_sweeps,
                                                 long burn_in_sweeps);

}  // namespace qising
