#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfi/calibration.hpp"
#include "qfi/metrology.hpp"
#include "qfi/noise.hpp"
#include "qfi/sampling.hpp"
#include "qfi/shadows.hpp"
#include "qfi/states.hpp"

namespace qfi::harness {

// Configuration problems map to CLI exit code 2.
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class ExperimentKind { Ghz, Tfim, EtaScan, BudgetScan, GScan, Locality, CalibCompare };

const char* kind_tag(ExperimentKind k);
ExperimentKind kind_from_tag(const std::string& tag);

struct StateSpec {
    enum class Kind { Ghz, Tfim, Zero };
    Kind kind = Kind::Ghz;
    states::TfimSpec tfim;   // J, h, boundary (n_qubits filled per experiment point)
    int depth = 0;           // variational layers for Tfim
    double mix_w = 0.0;      // rho = (1-w)|psi><psi| + w I/2^N
};

// Per-qubit noise replicated across system sizes, instantiated per N.
struct NoiseTemplate {
    std::vector<noise::QubitNoise> per_qubit;  // explicit table (optional)
    bool uniform = true;
    noise::QubitNoise uniform_noise;
    std::vector<noise::PairNoise> cross_talk;
    noise::DriftSchedule drift;

    noise::NoiseModel instantiate(int n_qubits) const;
};

struct EstimatorSettings {
    int n_batches = 10;
    std::vector<int> orders = {0, 1, 2};
    calibration::Method method = calibration::Method::Enhanced;
    bool purity = false;
};

struct PlanSettings {
    int unitaries_per_iteration = 200;
    int shots_per_unitary = 1000;
    int eta = 1;
    bool share_unitaries = true;
    int total_unitaries = 0;  // 0: size by the 300 * 2^{N/2} budget rule

    sampling::ExperimentPlan instantiate(int n_qubits, std::uint64_t seed) const;
};

struct RunConfig {
    ExperimentKind kind = ExperimentKind::Ghz;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;

    std::vector<int> n_list = {4, 6, 8};
    std::vector<int> depth_list = {1, 2, 3};
    std::vector<int> eta_list = {1, 2, 3, 4, 5, 6};
    std::vector<double> epsilon_list = {0.0, 0.02, 0.05};
    std::vector<int> nu_grid = {25, 50, 100, 200, 400, 800};
    std::vector<double> nu_factors = {0.35, 0.7, 1.4, 2.8};
    int runs_per_point = 100;
    int repetitions = 10;
    double tfim_prep_depolarizing = 0.0;  // depth-noise proxy, per layer per qubit

    StateSpec state;
    PlanSettings plan;
    NoiseTemplate noise;
    EstimatorSettings estimator;

    std::string run_id() const;  // hash of the canonical config + seed
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config_file(const std::string& path);

struct FigureRow {
    double x = 0.0;
    double value = 0.0;
    double stderr_ = 0.0;
    std::string series;
};

struct FigureTable {
    std::string experiment;
    std::string run_id;
    std::vector<FigureRow> rows;
    nlohmann::json metadata;  // provenance, fits, witness flags, verdicts
};

void write_figure_csv(const std::string& path, const FigureTable& table);
nlohmann::json figure_to_json(const FigureTable& table);

// One full simulate-calibrate-estimate pass for a single system size.
struct PipelineResult {
    std::vector<shadows::Estimate> robust;  // per requested order
    std::vector<shadows::Estimate> raw;
    std::optional<shadows::Estimate> purity_robust;
    std::optional<shadows::Estimate> purity_raw;
    calibration::CalibrationTable table;
    std::vector<sampling::MeasurementRecord> cal_records;  // kept when requested
    std::vector<sampling::MeasurementRecord> est_records;
};

PipelineResult run_pipeline(const sampling::StateInput& state,
                            const sampling::ExperimentPlan& plan,
                            const noise::NoiseModel& model, const EstimatorSettings& settings,
                            bool keep_records = false);

// Density matrix after p variational layers with a per-layer per-qubit
// depolarizing channel (depth-scaled preparation noise proxy).
CMat noisy_variational_density(const states::TfimSpec& spec,
                               const states::VariationalAngles& angles, double p_u_layer);

FigureTable run_ghz_experiment(const RunConfig& config);
FigureTable run_tfim_experiment(const RunConfig& config);
FigureTable run_eta_scan(const RunConfig& config);
FigureTable run_budget_scan(const RunConfig& config);
FigureTable run_gscan(const RunConfig& config);
FigureTable run_locality(const RunConfig& config);
FigureTable run_calibration_comparison(const RunConfig& config);

FigureTable run_experiment(const RunConfig& config);

}  // namespace qfi::harness
