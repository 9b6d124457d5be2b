#pragma once

#include <span>
#include <vector>

#include "qfi/common.hpp"

namespace qfi::qmath {

// Operator diagonal in the computational basis (the collective spin
// A = 1/2 sum_j sigma_j^z lives here).
struct DiagonalOperator {
    RVec diagonal;

    Eigen::Index dim() const { return diagonal.size(); }
};

// Eigenvalues sorted descending, eigenvectors as matching columns.
struct SpectralDecomposition {
    RVec eigenvalues;
    CMat eigenvectors;
};

enum class Side { Left, Right };

CMat identity(Eigen::Index dim);
Mat2 pauli_x();
Mat2 pauli_y();
Mat2 pauli_z();
// Swap of two copies of one qubit (4x4).
CMat two_copy_swap();

// Kronecker product in qubit order: the first factor owns the most
// significant bits of the result index.
CMat tensor_product(std::span<const CMat> factors);
CMat tensor_product(const CMat& a, const CMat& b);

// Max-norm distance from Hermiticity.
double hermiticity_defect(const CMat& m);

// Eigendecomposition of a Hermitian matrix. The input is symmetrized as
// (M + M^dag)/2 before decomposing; inputs further than `tol` from
// Hermitian are rejected.
SpectralDecomposition hermitian_eig(const CMat& m, double tol = 1e-10);

// D*M (Left, row scaling) or M*D (Right, column scaling).
CMat apply_diagonal(const CMat& m, const DiagonalOperator& d, Side side);

// Two-copy single-qubit twirling channel: the Haar average of
// (U^dag)^x2 Q U^x2, reduced to its identity/swap components:
//   (1/3) [ (Tr Q - Tr(S Q)/2) I + (Tr(S Q) - Tr Q / 2) S ].
CMat twirl_two_copy(const CMat& q);

// A = 1/2 sum_j sigma_j^z on n qubits; qubit 1 is the most significant bit.
DiagonalOperator collective_spin_z(int n_qubits);

}  // namespace qfi::qmath
