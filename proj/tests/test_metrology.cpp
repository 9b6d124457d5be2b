#include <doctest.h>

#include <cmath>

#include "qfi/metrology.hpp"
#include "qfi/qmath.hpp"
#include "qfi/sampling.hpp"
#include "qfi/states.hpp"
#include "test_helpers.hpp"

using namespace qfi;
using qmath::DiagonalOperator;

namespace {

CMat dense_of(const DiagonalOperator& a) {
    CMat m = CMat::Zero(a.dim(), a.dim());
    for (Eigen::Index k = 0; k < a.dim(); ++k) m(k, k) = a.diagonal[k];
    return m;
}

// spectral QFI evaluated with a dense observable, written independently of
// the library path
double qfi_dense_oracle(const CMat& rho, const CMat& a_dense) {
    Eigen::SelfAdjointEigenSolver<CMat> solver(rho);
    const auto& lam = solver.eigenvalues();
    const CMat av = solver.eigenvectors().adjoint() * a_dense * solver.eigenvectors();
    double acc = 0.0;
    for (Eigen::Index mu = 0; mu < rho.rows(); ++mu)
        for (Eigen::Index nu = 0; nu < rho.rows(); ++nu) {
            const double sum = lam[mu] + lam[nu];
            if (sum <= 1e-12) continue;
            const double diff = lam[mu] - lam[nu];
            acc += 2.0 * diff * diff / sum * std::norm(av(mu, nu));
        }
    return acc;
}

double tr(const CMat& m) { return m.trace().real(); }

}  // namespace

TEST_CASE("pure GHZ at N=10 reaches the Heisenberg limit") {
    const CMat rho = states::density_matrix(states::ghz(10));
    CHECK(metrology::qfi_exact(rho, qmath::collective_spin_z(10)) ==
          doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("maximally mixed state carries no Fisher information") {
    const int n = 3;
    const CMat rho = CMat::Identity(8, 8) / 8.0;
    CHECK(metrology::qfi_exact(rho, qmath::collective_spin_z(n)) ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("qfi matches the double-loop oracle on random 2-qubit states") {
    auto s = rng::derive_stream(301, {1});
    const auto a = qmath::collective_spin_z(2);
    for (int rep = 0; rep < 5; ++rep) {
        const CMat rho = test::rand_density(s, 4);
        const double fq = metrology::qfi_exact(rho, a);
        CHECK(fq == doctest::Approx(qfi_dense_oracle(rho, dense_of(a))).epsilon(1e-10));
    }
}

TEST_CASE("qfi rejects invalid states") {
    const auto a = qmath::collective_spin_z(2);
    CMat not_normalized = CMat::Identity(4, 4);
    CHECK_THROWS_AS((void)metrology::qfi_exact(not_normalized, a), std::invalid_argument);
    CMat not_psd = CMat::Zero(4, 4);
    not_psd(0, 0) = 1.5;
    not_psd(1, 1) = -0.5;
    CHECK_THROWS_AS((void)metrology::qfi_exact(not_psd, a), std::invalid_argument);
}

TEST_CASE("all bounds collapse to the QFI for pure states") {
    auto s = rng::derive_stream(302, {1});
    const auto a = qmath::collective_spin_z(3);
    const auto psi = test::rand_pure(s, 3);
    const CMat rho = states::density_matrix(psi);
    const double fq = metrology::qfi_exact(rho, a);

    // 4 Var(A) for pure states
    const CVec apsi = a.diagonal.cast<Complex>().cwiseProduct(psi.amplitudes);
    const double mean_a = psi.amplitudes.dot(apsi).real();
    const double var = apsi.squaredNorm() - mean_a * mean_a;
    CHECK(fq == doctest::Approx(4.0 * var).epsilon(1e-9));

    for (int n = 0; n <= 4; ++n) {
        CHECK(metrology::lower_bound_spectral(rho, a, n) == doctest::Approx(fq).epsilon(1e-9));
        CHECK(metrology::lower_bound_trace_polynomial(rho, a, n) ==
              doctest::Approx(fq).epsilon(1e-9));
    }
}

TEST_CASE("spectral bounds converge to the QFI") {
    // White-noise-mixed random pure state: the convergence rate is
    // 1 - min over pairs of (l_mu + l_nu) restricted to l_mu != l_nu, which
    // stays well below 1 here. (A full-rank Wishart state with two small
    // non-degenerate eigenvalues can have a rate arbitrarily close to 1.)
    auto s = rng::derive_stream(303, {1});
    const auto a = qmath::collective_spin_z(3);
    const CMat rho = states::white_noise_mix(test::rand_pure(s, 3), 0.3);
    const double fq = metrology::qfi_exact(rho, a);
    double prev_gap = fq - metrology::lower_bound_spectral(rho, a, 0);
    for (int n : {5, 10, 20, 40}) {
        const double gap = fq - metrology::lower_bound_spectral(rho, a, n);
        CHECK(gap <= prev_gap + 1e-12);
        prev_gap = gap;
    }
    CHECK(std::abs(metrology::lower_bound_spectral(rho, a, 40) - fq) < 1e-6);
}

TEST_CASE("F_0 equals its commutator trace form") {
    auto s = rng::derive_stream(304, {1});
    const auto a = qmath::collective_spin_z(2);
    const CMat ad = dense_of(a);
    const CMat rho = test::rand_density(s, 4);
    const double direct = 4.0 * tr(rho * (rho * ad - ad * rho) * ad);
    CHECK(metrology::lower_bound_spectral(rho, a, 0) == doctest::Approx(direct).epsilon(1e-10));
    CHECK(metrology::lower_bound_trace_polynomial(rho, a, 0) ==
          doctest::Approx(direct).epsilon(1e-10));
    // q = 0 coefficients (1, -2, 1): 4 [Tr(rho^2 A^2) - Tr(rho A rho A)]
    const double expanded = 4.0 * (tr(rho * rho * ad * ad) - tr(rho * ad * rho * ad));
    CHECK(direct == doctest::Approx(expanded).epsilon(1e-10));
}

TEST_CASE("F_1 equals 2 F_0 - 4 Tr(rho^2 [rho, A] A)") {
    auto s = rng::derive_stream(305, {1});
    const auto a = qmath::collective_spin_z(2);
    const CMat ad = dense_of(a);
    const CMat rho = test::rand_density(s, 4);
    const double f0 = metrology::lower_bound_trace_polynomial(rho, a, 0);
    const double f1_expected = 2.0 * f0 - 4.0 * tr(rho * rho * (rho * ad - ad * rho) * ad);
    CHECK(metrology::lower_bound_trace_polynomial(rho, a, 1) ==
          doctest::Approx(f1_expected).epsilon(1e-10));
}

TEST_CASE("F_2 equals 3(F_1 - F_0) + 4 Tr(rho^2 [rho^2, A] A)") {
    auto s = rng::derive_stream(306, {1});
    const auto a = qmath::collective_spin_z(2);
    const CMat ad = dense_of(a);
    const CMat rho = test::rand_density(s, 4);
    const CMat rho2 = rho * rho;
    const double f0 = metrology::lower_bound_trace_polynomial(rho, a, 0);
    const double f1 = metrology::lower_bound_trace_polynomial(rho, a, 1);
    const double f2_expected = 3.0 * (f1 - f0) + 4.0 * tr(rho2 * (rho2 * ad - ad * rho2) * ad);
    CHECK(metrology::lower_bound_trace_polynomial(rho, a, 2) ==
          doctest::Approx(f2_expected).epsilon(1e-10));
}

TEST_CASE("spectral and trace-polynomial routes agree for n <= 6") {
    auto s = rng::derive_stream(307, {1});
    for (int n_qubits : {2, 3}) {
        const auto a = qmath::collective_spin_z(n_qubits);
        const CMat rho = test::rand_density(s, dim_of(n_qubits));
        for (int n = 0; n <= 6; ++n) {
            const double spectral = metrology::lower_bound_spectral(rho, a, n);
            const double poly = metrology::lower_bound_trace_polynomial(rho, a, n);
            CHECK(spectral == doctest::Approx(poly).epsilon(1e-9));
        }
    }
}

TEST_CASE("monotone convergence over a 200-state corpus") {
    auto s = rng::derive_stream(308, {1});
    for (int rep = 0; rep < 200; ++rep) {
        const int n_qubits = 2 + rep % 3;
        const auto a = qmath::collective_spin_z(n_qubits);
        const CMat rho = test::rand_density(s, dim_of(n_qubits));
        const auto report = metrology::qfi_report(rho, a, 6);

        for (int n = 1; n <= 6; ++n)
            CHECK(report.bounds[std::size_t(n)] >= report.bounds[std::size_t(n - 1)] - 1e-9);
        CHECK(report.bounds[6] <= report.f_q + 1e-9);

        // geometric decay of the gap: the largest successive ratio stays
        // below 1, and the chain inequality follows from it
        double r = 0.0;
        bool degenerate = false;
        for (int n = 1; n <= 6; ++n) {
            const double prev = report.f_q - report.bounds[std::size_t(n - 1)];
            const double cur = report.f_q - report.bounds[std::size_t(n)];
            if (prev < 1e-12) {
                degenerate = true;
                break;
            }
            r = std::max(r, cur / prev);
        }
        if (!degenerate) {
            CHECK(r < 1.0);
            const double gap0 = report.f_q - report.bounds[0];
            for (int n = 0; n <= 6; ++n)
                CHECK(report.f_q - report.bounds[std::size_t(n)] <=
                      gap0 * std::pow(r, n) + 1e-9);
        }
    }
}

TEST_CASE("unitary covariance of F_Q and the bounds") {
    auto s = rng::derive_stream(309, {1});
    const int n_qubits = 2;
    const auto a = qmath::collective_spin_z(n_qubits);
    const CMat rho = test::rand_density(s, 4);

    SUBCASE("basis permutation keeps A diagonal") {
        // swap basis states 1 and 2 (a permutation unitary)
        CMat v = CMat::Zero(4, 4);
        v(0, 0) = v(3, 3) = 1;
        v(1, 2) = v(2, 1) = 1;
        const CMat rho_v = v * rho * v.adjoint();
        const CMat ad_v = v * dense_of(a) * v.adjoint();
        DiagonalOperator a_v;
        a_v.diagonal = ad_v.diagonal().real();

        CHECK(metrology::qfi_exact(rho_v, a_v) ==
              doctest::Approx(metrology::qfi_exact(rho, a)).epsilon(1e-9));
        for (int n = 0; n <= 3; ++n)
            CHECK(metrology::lower_bound_trace_polynomial(rho_v, a_v, n) ==
                  doctest::Approx(metrology::lower_bound_trace_polynomial(rho, a, n))
                      .epsilon(1e-9));
    }

    SUBCASE("generic unitary through the dense oracle") {
        auto stream = rng::derive_stream(310, {1});
        const CMat u = qmath::tensor_product(CMat(sampling::sample_cue_unitary(stream)),
                                             CMat(sampling::sample_cue_unitary(stream)));
        const CMat rho_v = u * rho * u.adjoint();
        const CMat a_v = u * dense_of(a) * u.adjoint();
        CHECK(qfi_dense_oracle(rho_v, a_v) ==
              doctest::Approx(metrology::qfi_exact(rho, a)).epsilon(1e-9));
    }
}

TEST_CASE("purity of reference states") {
    auto s = rng::derive_stream(311, {1});
    const auto psi = test::rand_pure(s, 3);
    CHECK(metrology::purity(states::density_matrix(psi)) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(metrology::purity(CMat::Identity(8, 8) / 8.0) ==
          doctest::Approx(1.0 / 8.0).epsilon(1e-12));

    const CMat mix =
        0.8 * states::density_matrix(states::ghz(3)) + 0.2 / 8.0 * CMat::Identity(8, 8);
    const CMat sq = mix * mix;
    CHECK(metrology::purity(mix) == doctest::Approx(sq.trace().real()).epsilon(1e-12));
}

TEST_CASE("producibility witness values") {
    CHECK(metrology::witness_gamma(10, 5) == doctest::Approx(50.0));
    CHECK(metrology::witness_gamma(12, 5) == doctest::Approx(54.0));
    for (int n : {2, 5, 9}) CHECK(metrology::witness_gamma(n, 1) == doctest::Approx(double(n)));
    CHECK(metrology::witness_gamma(8, 7) == doctest::Approx(50.0));  // (N-1)^2 + 1

    const auto w = metrology::witness_thresholds(12);
    for (int k = 2; k <= 12; ++k)
        CHECK(w.gamma[std::size_t(k - 1)] >= w.gamma[std::size_t(k - 2)]);
}
