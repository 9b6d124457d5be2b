#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qfi {

using Complex = std::complex<double>;

// Dense row-major complex matrix; the carrier for states, operators,
// unitaries and shadows.
using CMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Mat2 = Eigen::Matrix<Complex, 2, 2, Eigen::RowMajor>;

// Hard cap on operator size: dense 2^N x 2^N storage tops out at N = 12.
inline constexpr int kMaxQubits = 12;
inline constexpr Eigen::Index kMaxDim = Eigen::Index(1) << kMaxQubits;

inline Eigen::Index dim_of(int n_qubits) { return Eigen::Index(1) << n_qubits; }

inline void check_qubit_cap(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits)
        throw std::invalid_argument("qubit count " + std::to_string(n_qubits) +
                                    " outside supported range [1, " +
                                    std::to_string(kMaxQubits) + "]");
}

inline void check_dim_cap(Eigen::Index dim) {
    if (dim < 1 || dim > kMaxDim)
        throw std::invalid_argument("operator dimension " + std::to_string(dim) +
                                    " exceeds cap " + std::to_string(kMaxDim));
}

// Thrown when the estimated survival probability makes the shadow
// inversion ill-conditioned (G <= 1/2: the coefficients diverge).
struct mitigation_guard_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace qfi
