#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "qfi/common.hpp"
#include "qfi/noise.hpp"
#include "qfi/rng.hpp"
#include "qfi/states.hpp"

namespace qfi::sampling {

enum class Purpose { Calibration, Estimation };

const char* purpose_tag(Purpose p);
Purpose purpose_from_tag(const std::string& tag);

// U = U_1 x ... x U_N, independent single-qubit factors. For eta > 1 the
// factor stored per qubit is the product of all applied layers.
struct LocalUnitaryLayer {
    int n_qubits = 0;
    int iteration = 0;      // 1-based
    int unitary_index = 0;  // 1-based
    std::vector<Mat2> factors;
};

struct MeasurementRecord {
    int iteration = 0;
    int unitary_index = 0;
    Purpose purpose = Purpose::Estimation;
    int n_qubits = 0;
    int shots = 0;
    std::vector<Mat2> unitaries;
    std::map<Eigen::Index, int> counts;  // outcome index -> multiplicity
};

struct ExperimentPlan {
    int n_qubits = 0;
    int n_iterations = 0;
    int unitaries_per_iteration = 0;  // iteration cap; the last one may be short
    int total_unitaries = 0;
    int shots_per_unitary = 1000;
    int eta = 1;
    bool share_unitaries = true;  // reuse the calibration unitaries for estimation
    std::uint64_t master_seed = 0;

    int unitaries_in(int iteration) const;
    void validate() const;
};

// State fed to the estimation half of the protocol: pure or density matrix.
using StateInput = std::variant<states::PureState, CMat>;

// Haar-distributed single-qubit unitary: QR of a Ginibre matrix with the
// R diagonal made real positive.
Mat2 sample_cue_unitary(rng::Stream& stream);

// P(s|U) = <s| U rho U^dag |s>
RVec born_probabilities(const states::PureState& psi, const LocalUnitaryLayer& layer);
RVec born_probabilities(const CMat& rho, const LocalUnitaryLayer& layer);
RVec born_probabilities(const StateInput& state, const LocalUnitaryLayer& layer);

// U rho U^dag for a product unitary, O(N 4^N).
CMat rotate_density(const CMat& rho, const LocalUnitaryLayer& layer);

// All records of one protocol run (calibration or estimation), ordered by
// (iteration, unitary). Generation is parallel over (i, r); output is
// deterministic for a fixed plan and seed.
std::vector<MeasurementRecord> run_protocol(const StateInput& state, const ExperimentPlan& plan,
                                            const noise::NoiseModel& model, Purpose purpose);

// N_U^tot = ceil(300 * 2^{N/2}) split into iterations of 200 unitaries
// (the last iteration may be short), N_M = 1000.
ExperimentPlan auto_budget(int n_qubits);

std::string index_to_bits(Eigen::Index s, int n_qubits);
Eigen::Index bits_to_index(const std::string& bits);

}  // namespace qfi::sampling
