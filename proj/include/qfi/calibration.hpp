#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qfi/sampling.hpp"

namespace qfi::calibration {

enum class Method { Plain, Enhanced };

const char* method_tag(Method m);
Method method_from_tag(const std::string& tag);

struct PairEstimate {
    int j = 0;   // 1-based qubit indices
    int jp = 0;
    double g_j = 0.0;
    double g_jp = 0.0;
    double g_pair = 0.0;
};

struct IterationCalibration {
    std::vector<double> g;  // survival probability per qubit
    std::vector<PairEstimate> pairs;
};

// Per-iteration, per-qubit survival probabilities (and optional pairwise
// cross-talk estimates).
struct CalibrationTable {
    int n_qubits = 0;
    Method method = Method::Enhanced;
    std::map<int, IterationCalibration> iterations;

    // G for (iteration, qubit); throws mitigation_guard_error when G <= 1/2
    // (the inversion coefficients diverge) and invalid_argument when the
    // iteration is missing.
    double g_checked(int iteration, int qubit) const;
    // (iteration, qubit) entries with G <= 1/2.
    std::vector<std::pair<int, int>> flag_low() const;
};

struct LocalityPair {
    int j = 0;
    int jp = 0;
    double r_tilde = 0.0;   // G_{j,j'} - G_j G_{j'}: nonzero witnesses cross-talk
    double r_tilde_err = 0.0;
    double p_nl = 0.0;
    double p_nl_err = 0.0;
    double p_l_j = 0.0;
    double p_l_j_err = 0.0;
    double p_l_jp = 0.0;
    double p_l_jp_err = 0.0;
    int iterations = 0;
    bool has_error_bars = false;
};

struct LocalityReport {
    std::vector<LocalityPair> pairs;
    // R = 0 cannot exclude cross-talk; the witness is one-sided.
    std::string note = "R != 0 witnesses non-local noise; R = 0 is inconclusive";
};

// C_j = (1/N_U) sum_r sum_{s_j} Phat(s_j|U_j) P(s_j|U_j). Noiseless value
// 2/3; relates to the survival probability as C_j = (1 + G_j)/3.
double estimate_c_j(std::span<const sampling::MeasurementRecord> iteration_records, int qubit);

// B_j = (1/N_U) sum_r sum_{s_j} P(s_j|U_j)^2; Haar mean 2/3 (used as the
// common-random-numbers control variate).
double estimate_b_j(std::span<const sampling::MeasurementRecord> iteration_records, int qubit);

double estimate_g_plain(std::span<const sampling::MeasurementRecord> iteration_records,
                        int qubit);
double estimate_g_enhanced(std::span<const sampling::MeasurementRecord> iteration_records,
                           int qubit);

// Per-unitary contributions whose mean is the estimator; their spread gives
// the statistical error bar.
std::vector<double> g_contributions(std::span<const sampling::MeasurementRecord> iteration_records,
                                    int qubit, Method method);

// Two-qubit marginal machinery of the cross-talk diagnostics:
// D = (1 + G_j + G_j' + G_{j,j'})/9, estimated with the common-random-number
// correction, then inverted for G_{j,j'}.
PairEstimate estimate_pair(std::span<const sampling::MeasurementRecord> iteration_records,
                           int j, int jp);

// Groups calibration records by iteration and estimates every qubit (and
// requested pair) per iteration.
CalibrationTable build_table(const std::vector<sampling::MeasurementRecord>& records,
                             Method method,
                             const std::vector<std::pair<int, int>>& pairs = {});

// First-order inversion of the pair model: p_NL ~ R, p_L^(j) ~ G_j' - G_{j,j'}.
// Error bars are the standard deviation of the mean across iterations.
LocalityReport locality_report(const CalibrationTable& table);

nlohmann::json table_to_json(const CalibrationTable& table);
CalibrationTable table_from_json(const nlohmann::json& j);
void write_table_file(const std::string& path, const CalibrationTable& table);
CalibrationTable read_table_file(const std::string& path);

}  // namespace qfi::calibration
