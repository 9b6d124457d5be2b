#include "qfi/qmath.hpp"

#include <stdexcept>

namespace qfi::qmath {

CMat identity(Eigen::Index dim) { return CMat::Identity(dim, dim); }

Mat2 pauli_x() {
    Mat2 m;
    m << 0, 1, 1, 0;
    return m;
}

Mat2 pauli_y() {
    Mat2 m;
    m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
    return m;
}

Mat2 pauli_z() {
    Mat2 m;
    m << 1, 0, 0, -1;
    return m;
}

CMat two_copy_swap() {
    CMat s = CMat::Zero(4, 4);
    s(0, 0) = 1;
    s(1, 2) = 1;
    s(2, 1) = 1;
    s(3, 3) = 1;
    return s;
}

CMat tensor_product(const CMat& a, const CMat& b) {
    if (a.rows() != a.cols() || b.rows() != b.cols())
        throw std::invalid_argument("tensor_product: factors must be square");
    const Eigen::Index da = a.rows(), db = b.rows();
    check_dim_cap(da * db);
    CMat out(da * db, da * db);
    for (Eigen::Index i = 0; i < da; ++i)
        for (Eigen::Index j = 0; j < da; ++j)
            out.block(i * db, j * db, db, db) = a(i, j) * b;
    return out;
}

CMat tensor_product(std::span<const CMat> factors) {
    if (factors.empty()) throw std::invalid_argument("tensor_product: no factors");
    CMat acc = factors[0];
    if (acc.rows() != acc.cols())
        throw std::invalid_argument("tensor_product: factors must be square");
    check_dim_cap(acc.rows());
    for (std::size_t k = 1; k < factors.size(); ++k) acc = tensor_product(acc, factors[k]);
    return acc;
}

double hermiticity_defect(const CMat& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

SpectralDecomposition hermitian_eig(const CMat& m, double tol) {
    if (m.rows() != m.cols()) throw std::invalid_argument("hermitian_eig: matrix not square");
    if (hermiticity_defect(m) > tol)
        throw std::invalid_argument("hermitian_eig: input not Hermitian within tolerance");
    const CMat sym = 0.5 * (m + m.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<CMat> solver(sym);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("hermitian_eig: eigensolver failed to converge");
    // Eigen sorts ascending; flip to descending.
    const Eigen::Index n = sym.rows();
    SpectralDecomposition out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        out.eigenvectors.col(k) = solver.eigenvectors().col(n - 1 - k);
    return out;
}

CMat apply_diagonal(const CMat& m, const DiagonalOperator& d, Side side) {
    if (m.rows() != m.cols() || m.rows() != d.dim())
        throw std::invalid_argument("apply_diagonal: dimension mismatch");
    CMat out = m;
    if (side == Side::Left) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) *= d.diagonal[i];
    } else {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) *= d.diagonal[j];
    }
    return out;
}

CMat twirl_two_copy(const CMat& q) {
    if (q.rows() != 4 || q.cols() != 4)
        throw std::invalid_argument("twirl_two_copy: expected a 4x4 two-copy operator");
    const CMat s = two_copy_swap();
    const Complex tr_q = q.trace();
    const Complex tr_sq = (s * q).trace();
    return (1.0 / 3.0) * ((tr_q - 0.5 * tr_sq) * identity(4) + (tr_sq - 0.5 * tr_q) * s);
}

DiagonalOperator collective_spin_z(int n_qubits) {
    check_qubit_cap(n_qubits);
    const Eigen::Index dim = dim_of(n_qubits);
    DiagonalOperator a;
    a.diagonal.resize(dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        const int ones = __builtin_popcountll(static_cast<unsigned long long>(s));
        a.diagonal[s] = 0.5 * (n_qubits - 2 * ones);
    }
    return a;
}

}  // namespace qfi::qmath
