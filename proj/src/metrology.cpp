#include "qfi/metrology.hpp"

#include <cmath>
#include <stdexcept>

namespace qfi::metrology {

namespace {

constexpr double kPairCutoff = 1e-12;

struct Spectral {
    RVec lambda;
    CMat a_eigenbasis;  // <mu| A |nu>
};

// Diagonalize rho (clamping tiny negative eigenvalues) and rotate the
// diagonal observable into its eigenbasis.
Spectral prepare(const CMat& rho, const qmath::DiagonalOperator& a) {
    if (rho.rows() != a.dim()) throw std::invalid_argument("qfi: dimension mismatch");
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > 1e-8)
        throw std::invalid_argument("qfi: state trace differs from 1");

    auto eig = qmath::hermitian_eig(rho, 1e-8);
    if (eig.eigenvalues.minCoeff() < -1e-8)
        throw std::invalid_argument("qfi: state has a negative eigenvalue beyond tolerance");

    Spectral out;
    out.lambda = eig.eigenvalues;
    // Numerical zeros from rank-deficient states: clip and renormalize.
    bool clipped = false;
    for (Eigen::Index k = 0; k < out.lambda.size(); ++k) {
        if (out.lambda[k] < 0.0) {
            out.lambda[k] = 0.0;
            clipped = true;
        }
    }
    if (clipped) out.lambda /= out.lambda.sum();

    const CMat av = qmath::apply_diagonal(eig.eigenvectors, a, qmath::Side::Left);
    out.a_eigenbasis = eig.eigenvectors.adjoint() * av;
    return out;
}

double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double acc = 1.0;
    for (int i = 0; i < k; ++i) acc = acc * double(n - i) / double(i + 1);
    return acc;
}

// Tr(X A Y A) for diagonal A, without forming any product.
double trace_sandwich(const CMat& x, const CMat& y, const RVec& a) {
    const Eigen::Index d = x.rows();
    Complex acc = 0.0;
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) acc += x(k, l) * a[l] * y(l, k) * a[k];
    return acc.real();
}

}  // namespace

double qfi_exact(const CMat& rho, const qmath::DiagonalOperator& a) {
    const Spectral s = prepare(rho, a);
    const Eigen::Index d = s.lambda.size();
    double acc = 0.0;
    for (Eigen::Index mu = 0; mu < d; ++mu) {
        for (Eigen::Index nu = 0; nu < d; ++nu) {
            const double sum = s.lambda[mu] + s.lambda[nu];
            if (sum <= kPairCutoff) continue;
            const double diff = s.lambda[mu] - s.lambda[nu];
            acc += diff * diff / sum * std::norm(s.a_eigenbasis(mu, nu));
        }
    }
    return 2.0 * acc;
}

double lower_bound_spectral(const CMat& rho, const qmath::DiagonalOperator& a, int n) {
    if (n < 0) throw std::invalid_argument("lower_bound_spectral: negative order");
    const Spectral s = prepare(rho, a);
    const Eigen::Index d = s.lambda.size();
    double acc = 0.0;
    for (Eigen::Index mu = 0; mu < d; ++mu) {
        for (Eigen::Index nu = 0; nu < d; ++nu) {
            const double sum = s.lambda[mu] + s.lambda[nu];
            if (sum <= kPairCutoff) continue;
            const double diff = s.lambda[mu] - s.lambda[nu];
            double geom = 0.0, pow = 1.0;
            for (int l = 0; l <= n; ++l) {
                geom += pow;
                pow *= (1.0 - sum);
            }
            acc += diff * diff * geom * std::norm(s.a_eigenbasis(mu, nu));
        }
    }
    return 2.0 * acc;
}

double lower_bound_trace_polynomial(const CMat& rho, const qmath::DiagonalOperator& a, int n) {
    if (n < 0) throw std::invalid_argument("lower_bound_trace_polynomial: negative order");
    if (rho.rows() != a.dim())
        throw std::invalid_argument("lower_bound_trace_polynomial: dimension mismatch");

    // rho^k for k = 0 .. n+2, by repeated multiplication.
    std::vector<CMat> powers;
    powers.reserve(std::size_t(n) + 3);
    powers.push_back(CMat::Identity(rho.rows(), rho.cols()));
    for (int k = 1; k <= n + 2; ++k) powers.push_back(powers.back() * rho);

    double total = 0.0;
    for (int q = 0; q <= n; ++q) {
        const double outer = binom(n + 1, q + 1) * ((q % 2 == 0) ? 1.0 : -1.0);
        double inner = 0.0;
        for (int m = 0; m <= q + 2; ++m) {
            const double c = binom(q, m) - 2.0 * binom(q, m - 1) + binom(q, m - 2);
            if (c == 0.0) continue;
            inner += c * trace_sandwich(powers[std::size_t(q + 2 - m)],
                                        powers[std::size_t(m)], a.diagonal);
        }
        total += outer * inner;
    }
    return 2.0 * total;
}

QfiReport qfi_report(const CMat& rho, const qmath::DiagonalOperator& a, int n_max) {
    QfiReport rep;
    rep.n_max = n_max;
    rep.f_q = qfi_exact(rho, a);
    rep.bounds.reserve(std::size_t(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) rep.bounds.push_back(lower_bound_spectral(rho, a, n));
    return rep;
}

double purity(const CMat& rho) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("purity: matrix not square");
    return (rho * rho).trace().real();
}

double witness_gamma(int n_qubits, int k) {
    if (k < 1 || k > n_qubits) throw std::invalid_argument("witness_gamma: k outside [1, N]");
    const int blocks = n_qubits / k;
    const int rest = n_qubits - blocks * k;
    return double(blocks) * k * k + double(rest) * rest;
}

WitnessThresholds witness_thresholds(int n_qubits) {
    WitnessThresholds w;
    w.n_qubits = n_qubits;
    for (int k = 1; k <= n_qubits; ++k) w.gamma.push_back(witness_gamma(n_qubits, k));
    return w;
}

}  // namespace qfi::metrology
