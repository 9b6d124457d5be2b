#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qfi/calibration.hpp"
#include "qfi/sampling.hpp"
#include "qfi/states.hpp"
#include "test_helpers.hpp"

#include <nlohmann/json.hpp>

using namespace qfi;
using calibration::Method;
using sampling::ExperimentPlan;
using sampling::MeasurementRecord;
using sampling::Purpose;
using sampling::StateInput;

namespace {

states::PureState zero_state(int n) {
    states::PureState psi;
    psi.n_qubits = n;
    psi.amplitudes = CVec::Zero(dim_of(n));
    psi.amplitudes[0] = 1.0;
    return psi;
}

std::vector<MeasurementRecord> calibration_run(int n_qubits, const noise::NoiseModel& model,
                                               int n_iterations, int n_u, int n_m,
                                               std::uint64_t seed) {
    ExperimentPlan plan;
    plan.n_qubits = n_qubits;
    plan.n_iterations = n_iterations;
    plan.unitaries_per_iteration = n_u;
    plan.total_unitaries = n_iterations * n_u;
    plan.shots_per_unitary = n_m;
    plan.master_seed = seed;
    return sampling::run_protocol(StateInput(zero_state(n_qubits)), plan, model,
                                  Purpose::Calibration);
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / double(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / double(v.size() - 1);
}

}  // namespace

TEST_CASE("noiseless calibration estimates C = 2/3 and G = 1") {
    const auto records = calibration_run(1, noise::NoiseModel::noiseless(1), 1, 20000, 1000, 61);
    const double c = calibration::estimate_c_j(records, 1);
    // B-term spread is the dominant noise on the plain estimator:
    // sd(sum_s P^2) = sqrt(0.0222) per unitary
    const double se = std::sqrt(0.0222 / 20000.0);
    CHECK(std::abs(c - 2.0 / 3.0) < 3.0 * se);
    CHECK(std::abs(calibration::estimate_g_plain(records, 1) - 1.0) < 9.0 * se);
    // the enhanced estimator only carries shot noise
    CHECK(std::abs(calibration::estimate_g_enhanced(records, 1) - 1.0) < 1e-3);
}

TEST_CASE("fully depolarized marginals pin G to 1/2") {
    // hand-built records whose empirical marginals are exactly 1/2
    auto s = rng::derive_stream(602, {1});
    std::vector<MeasurementRecord> records;
    for (int r = 1; r <= 50; ++r) {
        MeasurementRecord rec;
        rec.iteration = 1;
        rec.unitary_index = r;
        rec.purpose = Purpose::Calibration;
        rec.n_qubits = 1;
        rec.shots = 1000;
        rec.unitaries = {sampling::sample_cue_unitary(s)};
        rec.counts[0] = 500;
        rec.counts[1] = 500;
        records.push_back(rec);
    }
    // C = (1/N_U) sum_r (1/2) sum_s P(s) = 1/2 exactly
    CHECK(calibration::estimate_c_j(records, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(calibration::estimate_g_plain(records, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("readout flips shift G to 1 - p and C to (1 + G)/3") {
    const double p = 0.014;
    const int runs = 200;
    std::vector<double> g_plain, g_enh, c_vals;
    for (int run = 0; run < runs; ++run) {
        const auto records = calibration_run(1, noise::NoiseModel::uniform_readout(1, p), 1,
                                             200, 1000, 7000 + std::uint64_t(run));
        g_plain.push_back(calibration::estimate_g_plain(records, 1));
        g_enh.push_back(calibration::estimate_g_enhanced(records, 1));
        c_vals.push_back(calibration::estimate_c_j(records, 1));
    }

    SUBCASE("unbiasedness of both estimators at 3 standard errors") {
        const double se_plain = std::sqrt(var_of(g_plain) / runs);
        const double se_enh = std::sqrt(var_of(g_enh) / runs);
        CHECK(std::abs(mean_of(g_plain) - (1.0 - p)) < 3.0 * se_plain);
        CHECK(std::abs(mean_of(g_enh) - (1.0 - p)) < 3.0 * se_enh);
        const double se_c = std::sqrt(var_of(c_vals) / runs);
        CHECK(std::abs(mean_of(c_vals) - (1.0 + (1.0 - p)) / 3.0) < 3.0 * se_c);
    }

    SUBCASE("common random numbers reduce the variance") {
        CHECK(var_of(g_enh) <= var_of(g_plain));
        // the reduction is drastic in the weak-noise regime
        CHECK(var_of(g_enh) < 0.05 * var_of(g_plain));
    }

    SUBCASE("the two estimators share their expectation value") {
        std::vector<double> delta;
        for (int k = 0; k < runs; ++k)
            delta.push_back(g_enh[std::size_t(k)] - g_plain[std::size_t(k)]);
        const double se = std::sqrt(var_of(delta) / runs);
        CHECK(std::abs(mean_of(delta)) < 3.0 * se);
    }
}

TEST_CASE("per-unitary contributions average to the estimator") {
    const auto records = calibration_run(1, noise::NoiseModel::uniform_readout(1, 0.05), 1,
                                         400, 1000, 99);
    for (Method m : {Method::Plain, Method::Enhanced}) {
        const auto contrib = calibration::g_contributions(records, 1, m);
        const double est = m == Method::Plain ? calibration::estimate_g_plain(records, 1)
                                              : calibration::estimate_g_enhanced(records, 1);
        CHECK(mean_of(contrib) == doctest::Approx(est).epsilon(1e-12));
    }
    // p = 0.05 flips: G = 0.95 within a few error bars
    const auto contrib = calibration::g_contributions(records, 1, Method::Enhanced);
    const double se = std::sqrt(var_of(contrib) / double(contrib.size()));
    CHECK(std::abs(mean_of(contrib) - 0.95) < 4.0 * se);
}

TEST_CASE("noiseless pair estimate is consistent with one") {
    const auto records = calibration_run(2, noise::NoiseModel::noiseless(2), 1, 4000, 1000, 21);
    const auto pair = calibration::estimate_pair(records, 1, 2);
    CHECK(std::abs(pair.g_pair - 1.0) < 3e-3);
    CHECK(std::abs(pair.g_j - 1.0) < 1e-3);
    CHECK(std::abs(pair.g_jp - 1.0) < 1e-3);
}

TEST_CASE("independent flips factorize the pair survival probability") {
    noise::NoiseModel model = noise::NoiseModel::noiseless(2);
    model.per_qubit[0].p_meas = 0.03;
    model.per_qubit[1].p_meas = 0.05;
    const auto records = calibration_run(2, model, 1, 8000, 1000, 22);
    const auto pair = calibration::estimate_pair(records, 1, 2);
    CHECK(std::abs(pair.g_pair - 0.97 * 0.95) < 3e-3);
    CHECK(std::abs(pair.g_pair - pair.g_j * pair.g_jp) < 3e-3);  // R ~ 0
}

TEST_CASE("cross-talk channel reproduces the reference pair pattern") {
    // the pair-(4,5) parameters measured on the 13-qubit device, applied to
    // a two-qubit system
    const double p_l4 = 0.0214, p_l5 = 0.0308, p_nl = 0.0022;
    noise::NoiseModel model = noise::NoiseModel::noiseless(2);
    model.per_qubit[0].p_meas = p_l4;
    model.per_qubit[1].p_meas = p_l5;
    model.cross_talk = {{1, 2, p_nl}};

    const auto records = calibration_run(2, model, 20, 200, 1000, 23);
    const auto table = calibration::build_table(records, Method::Enhanced, {{1, 2}});
    const auto report = calibration::locality_report(table);
    REQUIRE(report.pairs.size() == 1);
    const auto& lp = report.pairs.front();

    // exact channel values (XOR-composition of flip probabilities)
    const auto xor_p = [](double a, double b) { return a + b - 2.0 * a * b; };
    const double g4 = 1.0 - xor_p(p_l4, p_nl);
    const double g5 = 1.0 - xor_p(p_l5, p_nl);
    const double g45 = (1 - p_nl) * (1 - p_l4) * (1 - p_l5) + p_nl * p_l4 * p_l5;

    // averaged estimates against the exact values at 4 sigma
    std::vector<double> gj, gjp, gpair;
    for (const auto& [i, cal] : table.iterations) {
        gj.push_back(cal.pairs[0].g_j);
        gjp.push_back(cal.pairs[0].g_jp);
        gpair.push_back(cal.pairs[0].g_pair);
    }
    CHECK(std::abs(mean_of(gj) - g4) < 4.0 * std::sqrt(var_of(gj) / 20.0));
    CHECK(std::abs(mean_of(gjp) - g5) < 4.0 * std::sqrt(var_of(gjp) / 20.0));
    CHECK(std::abs(mean_of(gpair) - g45) < 4.0 * std::sqrt(var_of(gpair) / 20.0));

    // and the published pattern: 0.9756 / 0.9661 / 0.9447
    CHECK(std::abs(mean_of(gj) - 0.9756) < 4e-3);
    CHECK(std::abs(mean_of(gjp) - 0.9661) < 4e-3);
    CHECK(std::abs(mean_of(gpair) - 0.9447) < 4e-3);

    // first-order inversion recovers the channel parameters
    CHECK(std::abs(lp.p_nl - p_nl) < 3.0 * lp.p_nl_err + 2e-4);
    CHECK(std::abs(lp.p_l_j - p_l4) < 3.0 * lp.p_l_j_err + 2e-4);
    CHECK(std::abs(lp.p_l_jp - p_l5) < 3.0 * lp.p_l_jp_err + 2e-4);
    const double ratio = lp.p_nl / std::max(lp.p_l_j, lp.p_l_jp);
    CHECK(ratio > 0.02);
    CHECK(ratio < 0.2);
}

TEST_CASE("no cross-talk means R compatible with zero") {
    noise::NoiseModel model = noise::NoiseModel::uniform_readout(2, 0.02);
    const auto records = calibration_run(2, model, 10, 200, 1000, 24);
    const auto table = calibration::build_table(records, Method::Enhanced, {{1, 2}});
    const auto report = calibration::locality_report(table);
    REQUIRE(report.pairs.size() == 1);
    CHECK(std::abs(report.pairs[0].r_tilde) < 3.0 * report.pairs[0].r_tilde_err + 1e-4);
    CHECK(report.pairs[0].has_error_bars);
}

TEST_CASE("single-iteration locality report is flagged as bar-less") {
    noise::NoiseModel model = noise::NoiseModel::uniform_readout(2, 0.02);
    const auto records = calibration_run(2, model, 1, 100, 500, 25);
    const auto table = calibration::build_table(records, Method::Enhanced, {{1, 2}});
    const auto report = calibration::locality_report(table);
    REQUIRE(report.pairs.size() == 1);
    CHECK_FALSE(report.pairs[0].has_error_bars);
    CHECK(report.pairs[0].r_tilde_err == 0.0);
}

TEST_CASE("calibration table guards and persistence") {
    const auto records = calibration_run(2, noise::NoiseModel::uniform_readout(2, 0.01), 2,
                                         50, 500, 26);
    auto table = calibration::build_table(records, Method::Enhanced);
    CHECK(table.n_qubits == 2);
    CHECK(table.iterations.size() == 2);
    CHECK(table.g_checked(1, 1) > 0.9);
    CHECK_THROWS_AS((void)table.g_checked(3, 1), std::invalid_argument);

    table.iterations[2].g[0] = 0.4;  // inject a pathological entry
    CHECK_THROWS_AS((void)table.g_checked(2, 1), mitigation_guard_error);
    const auto low = table.flag_low();
    REQUIRE(low.size() == 1);
    CHECK(low[0] == std::pair<int, int>{2, 1});

    const auto j = calibration::table_to_json(table);
    const auto back = calibration::table_from_json(j);
    CHECK(back.n_qubits == table.n_qubits);
    CHECK(back.method == table.method);
    CHECK(back.iterations.at(1).g[0] == doctest::Approx(table.iterations.at(1).g[0]));
    CHECK(back.iterations.at(2).g[0] == doctest::Approx(0.4));
}
