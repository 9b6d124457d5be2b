#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "qfi/metrology.hpp"
#include "qfi/qmath.hpp"
#include "qfi/states.hpp"
#include "test_helpers.hpp"

using namespace qfi;
using states::Boundary;
using states::TfimSpec;

namespace {

// dense H built from explicit tensor products, independent of the
// bit-arithmetic construction in the library
CMat dense_tfim(const TfimSpec& spec) {
    const int n = spec.n_qubits;
    const CMat i2 = qmath::identity(2);
    const CMat x = qmath::pauli_x();
    const CMat z = qmath::pauli_z();
    CMat h = CMat::Zero(dim_of(n), dim_of(n));
    const int bonds = spec.boundary == Boundary::Periodic && n > 2 ? n : n - 1;
    for (int b = 0; b < bonds; ++b) {
        std::vector<CMat> fs(std::size_t(n), i2);
        fs[std::size_t(b)] = z;
        fs[std::size_t((b + 1) % n)] = z;
        h -= spec.coupling * qmath::tensor_product(fs);
    }
    for (int j = 0; j < n; ++j) {
        std::vector<CMat> fs(std::size_t(n), i2);
        fs[std::size_t(j)] = x;
        h -= spec.field * qmath::tensor_product(fs);
    }
    return h;
}

CMat expm_herm(const CMat& h, double t) {
    // exp(-i t H) through the eigendecomposition
    const auto eig = qmath::hermitian_eig(h, 1e-9);
    CVec phases(h.rows());
    for (Eigen::Index k = 0; k < h.rows(); ++k)
        phases[k] = std::exp(Complex(0.0, -t * eig.eigenvalues[k]));
    return eig.eigenvectors * phases.asDiagonal() * eig.eigenvectors.adjoint();
}

}  // namespace

TEST_CASE("ghz amplitudes") {
    const auto g1 = states::ghz(1);
    CHECK(std::abs(g1.amplitudes[0] - 1.0 / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(g1.amplitudes[1] - 1.0 / std::sqrt(2.0)) < 1e-15);

    const auto g3 = states::ghz(3);
    CHECK(std::abs(g3.amplitudes[0] - 1.0 / std::sqrt(2.0)) < 1e-15);
    CHECK(std::abs(g3.amplitudes[7] - 1.0 / std::sqrt(2.0)) < 1e-15);
    for (int k = 1; k < 7; ++k) CHECK(std::abs(g3.amplitudes[k]) == 0.0);
}

TEST_CASE("ghz saturates the Heisenberg limit at N=8") {
    const auto rho = states::density_matrix(states::ghz(8));
    const double fq = metrology::qfi_exact(rho, qmath::collective_spin_z(8));
    CHECK(fq == doctest::Approx(64.0).epsilon(1e-9));
}

TEST_CASE("classical Ising diagonal at h=0") {
    const CMat h = states::tfim_hamiltonian({2, 1.0, 0.0, Boundary::Open});
    RVec expected(4);
    expected << -1, 1, 1, -1;
    for (int k = 0; k < 4; ++k) CHECK(h(k, k).real() == doctest::Approx(expected[k]));
    CHECK(h.cwiseAbs().sum() == doctest::Approx(4.0));
}

TEST_CASE("free spins at J=0") {
    const TfimSpec spec{2, 0.0, 1.0, Boundary::Open};
    const CMat h = states::tfim_hamiltonian(spec);
    const CMat oracle = dense_tfim(spec);
    CHECK((h - oracle).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(states::tfim_ground_state(spec).energy == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("N=6 critical chain matches the independent dense construction") {
    const TfimSpec spec{6, 1.0, 1.0, Boundary::Open};
    const CMat h = states::tfim_hamiltonian(spec);
    const CMat oracle = dense_tfim(spec);
    CHECK((h - oracle).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::SelfAdjointEigenSolver<CMat> solver(oracle);
    CHECK(states::tfim_ground_state(spec).energy ==
          doctest::Approx(solver.eigenvalues().minCoeff()).epsilon(1e-9));
}

TEST_CASE("paramagnetic limit: ground state approaches |++>") {
    const TfimSpec spec{2, 1.0, 1000.0, Boundary::Open};
    const auto gs = states::tfim_ground_state(spec);
    const auto plus = states::plus_state(2);
    const double fidelity = std::norm(plus.amplitudes.dot(gs.state.amplitudes));
    CHECK(fidelity > 1.0 - 1e-3);
}

TEST_CASE("ferromagnetic limit: ground space spanned by |00> and |11>") {
    const TfimSpec spec{2, 1.0, 0.0, Boundary::Open};
    const auto gs = states::tfim_ground_state(spec);
    CHECK(gs.degeneracy == 2);
    const double in_span =
        std::norm(gs.state.amplitudes[0]) + std::norm(gs.state.amplitudes[3]);
    CHECK(in_span == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("exact QFI of the critical ground state via two code paths") {
    const TfimSpec spec{8, 1.0, 1.0, Boundary::Open};
    const auto gs = states::tfim_ground_state(spec);
    const auto a = qmath::collective_spin_z(8);
    const double fq = metrology::qfi_exact(states::density_matrix(gs.state), a);

    // brute-force oracle: full spectral sum over the density-matrix
    // eigenpairs, written out directly
    const auto eig = qmath::hermitian_eig(states::density_matrix(gs.state), 1e-9);
    const CMat av = eig.eigenvectors.adjoint() *
                    qmath::apply_diagonal(eig.eigenvectors, a, qmath::Side::Left);
    double oracle = 0.0;
    for (Eigen::Index mu = 0; mu < 256; ++mu) {
        for (Eigen::Index nu = 0; nu < 256; ++nu) {
            const double num = eig.eigenvalues[mu] + eig.eigenvalues[nu];
            if (num <= 1e-12) continue;
            const double diff = eig.eigenvalues[mu] - eig.eigenvalues[nu];
            oracle += 2.0 * diff * diff / num * std::norm(av(mu, nu));
        }
    }
    CHECK(fq == doctest::Approx(oracle).epsilon(1e-9));
    // pure state: 4 Var(A)
    const CVec apsi = a.diagonal.cast<Complex>().cwiseProduct(gs.state.amplitudes);
    const double mean_a = gs.state.amplitudes.dot(apsi).real();
    const double mean_a2 = apsi.squaredNorm();
    CHECK(fq == doctest::Approx(4.0 * (mean_a2 - mean_a * mean_a)).epsilon(1e-8));
}

TEST_CASE("zero angles leave the initial state unchanged") {
    const TfimSpec spec{3, 1.0, 1.0, Boundary::Open};
    states::VariationalAngles angles;
    angles.gamma = {0.0, 0.0};
    angles.delta = {0.0, 0.0};
    auto s = rng::derive_stream(201, {1});
    const auto psi0 = test::rand_pure(s, 3);
    const auto out = states::variational_state(spec, angles, psi0);
    CHECK((out.amplitudes - psi0.amplitudes).norm() < 1e-12);
}

TEST_CASE("single layer matches the dense matrix-exponential oracle") {
    const TfimSpec spec{2, 1.0, 1.0, Boundary::Open};
    states::VariationalAngles angles;
    angles.gamma = {0.3};
    angles.delta = {0.3};
    const auto psi0 = states::plus_state(2);
    const auto out = states::variational_state(spec, angles, psi0);

    TfimSpec only_a = spec, only_b = spec;
    only_a.field = 0.0;
    only_b.coupling = 0.0;
    const CMat ua = expm_herm(dense_tfim(only_a), 0.3);
    const CMat ub = expm_herm(dense_tfim(only_b), 0.3);
    const CVec oracle = ub * (ua * psi0.amplitudes);
    CHECK((out.amplitudes - oracle).norm() < 1e-10);
}

TEST_CASE("circuit reversal returns to the initial state") {
    const TfimSpec spec{4, 1.0, 1.0, Boundary::Open};
    auto s = rng::derive_stream(202, {1});
    states::VariationalAngles fwd;
    for (int l = 0; l < 3; ++l) {
        fwd.gamma.push_back(s.uniform() * 2 - 1);
        fwd.delta.push_back(s.uniform() * 2 - 1);
    }
    const auto psi0 = test::rand_pure(s, 4);
    auto psi = states::variational_state(spec, fwd, psi0);
    // undo layer by layer in reverse order: delta first, then gamma
    for (int l = 2; l >= 0; --l) {
        states::VariationalAngles undo_b;
        undo_b.gamma = {0.0};
        undo_b.delta = {-fwd.delta[std::size_t(l)]};
        psi = states::variational_state(spec, undo_b, psi);
        states::VariationalAngles undo_a;
        undo_a.gamma = {-fwd.gamma[std::size_t(l)]};
        undo_a.delta = {0.0};
        psi = states::variational_state(spec, undo_a, psi);
    }
    CHECK((psi.amplitudes - psi0.amplitudes).norm() < 1e-9);
    CHECK(psi.amplitudes.norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("p = N/2 prepares the critical ground state exactly at N=4") {
    TfimSpec spec;
    spec.n_qubits = 4;  // default boundary: the translation-invariant chain
    const auto result = states::optimize_angles(spec, 2, 12345);
    CHECK(result.residual <= 1e-6);
    CHECK(result.fidelity > 0.999);
    CHECK(result.converged);
}

TEST_CASE("p=1 is strictly worse than p=2 and beats no better than the grid oracle") {
    const TfimSpec spec{4, 1.0, 1.0, Boundary::Open};
    const auto p1 = states::optimize_angles(spec, 1, 99);
    const auto p2 = states::optimize_angles(spec, 2, 99);
    CHECK(p1.residual > p2.residual);

    // grid oracle over the p=1 angle plane
    double best = 1e9;
    const int grid = 64;
    for (int a = 0; a < grid; ++a) {
        for (int b = 0; b < grid; ++b) {
            states::VariationalAngles ang;
            ang.gamma = {-M_PI + (a + 0.5) * 2 * M_PI / grid};
            ang.delta = {-M_PI + (b + 0.5) * 2 * M_PI / grid};
            best = std::min(best,
                            states::energy_expectation(
                                spec, states::variational_state(spec, ang)));
        }
    }
    CHECK(p1.energy <= best + 1e-9);
}

TEST_CASE("p = 0 returns the transverse-field ground state energy") {
    const TfimSpec spec{4, 1.0, 1.3, Boundary::Open};
    const auto result = states::optimize_angles(spec, 0, 7);
    CHECK(result.energy == doctest::Approx(-1.3 * 4).epsilon(1e-12));
}

TEST_CASE("optimized angle cache round-trips") {
    const TfimSpec spec{4, 1.0, 1.0, Boundary::Open};
    const auto result = states::optimize_angles(spec, 1, 5, 4);
    const std::string path = "angle_cache_test.json";
    states::store_cached_angles(path, spec, 1, 5, result);
    states::OptimizationResult loaded;
    REQUIRE(states::load_cached_angles(path, spec, 1, 5, loaded));
    CHECK(loaded.energy == doctest::Approx(result.energy));
    CHECK(loaded.angles.gamma[0] == doctest::Approx(result.angles.gamma[0]));
    states::OptimizationResult missing;
    CHECK_FALSE(states::load_cached_angles(path, spec, 2, 5, missing));
    std::filesystem::remove(path);
}
