#pragma once

#include <vector>

#include "qfi/common.hpp"
#include "qfi/qmath.hpp"

namespace qfi::metrology {

struct QfiReport {
    double f_q = 0.0;
    std::vector<double> bounds;  // F_0 ... F_n_max
    int n_max = 0;
};

struct WitnessThresholds {
    int n_qubits = 0;
    std::vector<double> gamma;  // gamma[k-1] = Gamma(N, k), k = 1..N
};

// Quantum Fisher information from the spectral decomposition:
//   F_Q = 2 sum_{(mu,nu): l_mu + l_nu > 0} (l_mu - l_nu)^2 / (l_mu + l_nu) |<mu|A|nu>|^2
// Eigenvalue pairs with l_mu + l_nu <= 1e-12 are skipped.
double qfi_exact(const CMat& rho, const qmath::DiagonalOperator& a);

// n-th lower bound, spectral form:
//   F_n = 2 sum_{l=0..n} sum_{(mu,nu)} (l_mu - l_nu)^2 (1 - l_mu - l_nu)^l |<mu|A|nu>|^2
double lower_bound_spectral(const CMat& rho, const qmath::DiagonalOperator& a, int n);

// Same bound as a trace polynomial:
//   F_n = 2 sum_{q=0..n} binom(n+1, q+1) (-1)^q sum_{m=0..q+2} C_m^(q) Tr(rho^{q+2-m} A rho^m A)
// with C_m^(q) = binom(q,m) - 2 binom(q,m-1) + binom(q,m-2).
// This route never diagonalizes rho and accepts the (possibly non-PSD)
// matrices coming out of shadow estimation.
double lower_bound_trace_polynomial(const CMat& rho, const qmath::DiagonalOperator& a, int n);

QfiReport qfi_report(const CMat& rho, const qmath::DiagonalOperator& a, int n_max);

double purity(const CMat& rho);

// Gamma(N, k) = floor(N/k) k^2 + (N - floor(N/k) k)^2. A state with
// F_Q > Gamma(N, k) is not k-producible.
double witness_gamma(int n_qubits, int k);
WitnessThresholds witness_thresholds(int n_qubits);

}  // namespace qfi::metrology
