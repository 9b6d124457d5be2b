#include <doctest.h>

#include <cmath>

#include "qfi/noise.hpp"
#include "qfi/qmath.hpp"
#include "qfi/states.hpp"
#include "test_helpers.hpp"

#include <nlohmann/json.hpp>

using namespace qfi;
using noise::DriftSchedule;
using noise::NoiseModel;

namespace {

double survival(const NoiseModel& model, int eta) {
    // G = 1/2 sum_s <s| Lambda(|s><s|) |s> on one qubit
    double acc = 0.0;
    for (int s = 0; s < 2; ++s) {
        CMat rho = CMat::Zero(2, 2);
        rho(s, s) = 1.0;
        const CMat out = noise::apply_channel(rho, model, 1, eta);
        acc += out(s, s).real();
    }
    return 0.5 * acc;
}

}  // namespace

TEST_CASE("zero-probability channels act as the identity") {
    auto s = rng::derive_stream(401, {1});
    const CMat rho = test::rand_density(s, 4);
    const NoiseModel model = NoiseModel::noiseless(2);
    CHECK((noise::apply_channel(rho, model, 1, 1) - rho).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("single-qubit readout flip on |0><0|") {
    const double p = 0.3;
    NoiseModel model = NoiseModel::uniform_readout(1, p);
    CMat rho = CMat::Zero(2, 2);
    rho(0, 0) = 1.0;
    const CMat out = noise::apply_channel(rho, model, 1, 1);
    CHECK(out(0, 0).real() == doctest::Approx(1.0 - p).epsilon(1e-12));
    CHECK(out(1, 1).real() == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("layered depolarizing plus readout matches the first-order survival law") {
    NoiseModel model;
    model.per_qubit = {{0.014, 0.01}};
    const int eta = 5;
    const double g = survival(model, eta);
    const double first_order = 1.0 - (2.0 * 0.01 / 3.0) * eta - 0.014;
    const double scale = eta * 0.01 + 0.014;
    CHECK(std::abs(g - first_order) < 5.0 * scale * scale);
    CHECK(g < 1.0);
}

TEST_CASE("channels preserve the trace") {
    auto s = rng::derive_stream(402, {1});
    // Kraus completeness for the single-qubit blocks
    for (const auto& kraus : {noise::depolarizing_kraus(0.3), noise::bit_flip_kraus(0.2)}) {
        CMat acc = CMat::Zero(2, 2);
        for (const auto& k : kraus) acc += k.adjoint() * k;
        CHECK((acc - qmath::identity(2)).cwiseAbs().maxCoeff() < 1e-12);
    }
    // and for the full composed channel
    NoiseModel model;
    model.per_qubit = {{0.05, 0.02}, {0.1, 0.0}};
    model.cross_talk = {{1, 2, 0.03}};
    const CMat rho = test::rand_density(s, 4);
    const CMat out = noise::apply_channel(rho, model, 1, 3);
    CHECK(out.trace().real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(qmath::hermiticity_defect(out) < 1e-12);
}

TEST_CASE("classical sampler leaves outcomes unchanged without noise") {
    const NoiseModel model = NoiseModel::noiseless(4);
    auto s = rng::derive_stream(403, {1});
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index outcome = Eigen::Index(s.below(16));
        CHECK(noise::classical_readout_sampler(outcome, 4, model, 1, s) == outcome);
    }
}

TEST_CASE("classical sampler flip rate matches the channel probability") {
    NoiseModel model = NoiseModel::uniform_readout(1, 0.49);
    auto s = rng::derive_stream(404, {1});
    const int n = 200000;
    int flips = 0;
    for (int rep = 0; rep < n; ++rep)
        if (noise::classical_readout_sampler(Eigen::Index(0), 1, model, 1, s) == 1) ++flips;
    const double se = std::sqrt(0.49 * 0.51 / n);
    CHECK(std::abs(double(flips) / n - 0.49) < 3.0 * se);
}

TEST_CASE("correlated pair flips at the cross-talk rate") {
    NoiseModel model = NoiseModel::noiseless(6);
    model.cross_talk = {{4, 5, 0.002}};
    auto s = rng::derive_stream(405, {1});
    const int n = 1000000;
    int joint = 0;
    const Eigen::Index mask = (Eigen::Index(1) << 2) | (Eigen::Index(1) << 1);  // qubits 4,5 of 6
    for (int rep = 0; rep < n; ++rep) {
        const Eigen::Index out = noise::classical_readout_sampler(Eigen::Index(0), 6, model, 1, s);
        if (out == mask) ++joint;
    }
    const double se = std::sqrt(0.002 * 0.998 / n);
    CHECK(std::abs(double(joint) / n - 0.002) < 3.0 * se);
}

TEST_CASE("string interface flips the advertised bit positions") {
    NoiseModel model = NoiseModel::noiseless(3);
    model.per_qubit[0].p_meas = 0.4999;  // qubit 1 = leftmost character
    auto s = rng::derive_stream(406, {1});
    bool saw_flip = false;
    for (int rep = 0; rep < 64 && !saw_flip; ++rep) {
        const std::string out = noise::classical_readout_sampler("010", model, 1, s);
        CHECK(out[1] == '1');
        CHECK(out[2] == '0');
        saw_flip = out[0] == '1';
    }
    CHECK(saw_flip);
}

TEST_CASE("sampler path agrees with the density-matrix path") {
    NoiseModel model;
    model.per_qubit = {{0.1, 0.0}, {0.2, 0.0}};
    model.cross_talk = {{1, 2, 0.05}};

    auto s = rng::derive_stream(407, {1});
    const auto psi = test::rand_pure(s, 2);
    const CMat rho = states::density_matrix(psi);
    const RVec ideal = rho.diagonal().real();

    // exact action on the distribution == diagonal of the channel output
    const RVec transformed = noise::transform_distribution(ideal, 2, model, 1);
    const CMat channel_out = noise::apply_channel(rho, model, 1, 1);
    CHECK((transformed - channel_out.diagonal().real()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(transformed.sum() == doctest::Approx(1.0).epsilon(1e-12));

    // empirical sampler histogram against the exact distribution
    const int samples = 100000;
    std::vector<double> cdf(4);
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
        acc += ideal[k];
        cdf[std::size_t(k)] = acc;
    }
    RVec hist = RVec::Zero(4);
    for (int rep = 0; rep < samples; ++rep) {
        const double u = s.uniform() * acc;
        Eigen::Index out = 0;
        while (out < 3 && cdf[std::size_t(out)] < u) ++out;
        hist[noise::classical_readout_sampler(out, 2, model, 1, s)] += 1.0;
    }
    hist /= double(samples);
    const double tv = 0.5 * (hist - transformed).cwiseAbs().sum();
    CHECK(tv <= 5.0 / std::sqrt(double(samples)));
}

TEST_CASE("sampler refuses depolarizing models") {
    NoiseModel model;
    model.per_qubit = {{0.0, 0.1}};
    auto s = rng::derive_stream(408, {1});
    CHECK_THROWS_AS((void)noise::classical_readout_sampler(Eigen::Index(0), 1, model, 1, s),
                    std::invalid_argument);
}

TEST_CASE("drift schedules") {
    SUBCASE("steps") {
        DriftSchedule d;
        d.kind = DriftSchedule::Kind::Steps;
        d.steps = {{5, 2.0}, {9, 0.5}};
        CHECK(d.scale(1) == doctest::Approx(1.0));
        CHECK(d.scale(4) == doctest::Approx(1.0));
        CHECK(d.scale(5) == doctest::Approx(2.0));
        CHECK(d.scale(8) == doctest::Approx(2.0));
        CHECK(d.scale(9) == doctest::Approx(0.5));
    }
    SUBCASE("jitter is a pure function of iteration and seed") {
        DriftSchedule d;
        d.kind = DriftSchedule::Kind::Jitter;
        d.amplitude = 0.1;
        d.seed = 99;
        for (int i = 1; i <= 20; ++i) {
            const double a = d.scale(i);
            CHECK(a == d.scale(i));
            CHECK(a >= 0.9);
            CHECK(a <= 1.1);
        }
        DriftSchedule other = d;
        other.seed = 100;
        bool differs = false;
        for (int i = 1; i <= 20 && !differs; ++i) differs = other.scale(i) != d.scale(i);
        CHECK(differs);
    }
    SUBCASE("scaling outside the valid range is rejected") {
        NoiseModel model = NoiseModel::uniform_readout(1, 0.4);
        model.drift.kind = DriftSchedule::Kind::Steps;
        model.drift.steps = {{3, 1.5}};
        CHECK(model.effective(1, 1).p_meas == doctest::Approx(0.4));
        CHECK_THROWS_AS((void)model.effective(1, 3), std::invalid_argument);
    }
}

TEST_CASE("noise model JSON round-trip") {
    NoiseModel model;
    model.per_qubit = {{0.014, 0.001}, {0.02, 0.0}};
    model.cross_talk = {{1, 2, 0.0022}};
    model.drift.kind = DriftSchedule::Kind::Steps;
    model.drift.steps = {{7, 1.5}};
    model.drift.seed = 42;

    nlohmann::json j;
    noise::to_json(j, model);
    NoiseModel back;
    noise::from_json(j, back);
    CHECK(back.per_qubit.size() == 2);
    CHECK(back.per_qubit[0].p_meas == doctest::Approx(0.014));
    CHECK(back.per_qubit[0].p_u == doctest::Approx(0.001));
    CHECK(back.cross_talk.size() == 1);
    CHECK(back.cross_talk[0].p_nl == doctest::Approx(0.0022));
    CHECK(back.drift.kind == DriftSchedule::Kind::Steps);
    CHECK(back.drift.steps.at(0).first == 7);
}
