#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qfi/common.hpp"
#include "qfi/rng.hpp"

namespace qfi::noise {

// Multiplicative scale on all channel probabilities as a function of the
// iteration index. Pure function of (iteration, seed).
struct DriftSchedule {
    enum class Kind { None, Steps, Jitter };
    Kind kind = Kind::None;
    // Steps: (first iteration, scale) sorted ascending; scale 1 before the
    // first entry.
    std::vector<std::pair<int, double>> steps;
    // Jitter: scale = 1 + amplitude * u(iteration), u in [-1, 1).
    double amplitude = 0.0;
    std::uint64_t seed = 0;

    double scale(int iteration) const;
};

struct QubitNoise {
    double p_meas = 0.0;  // readout bit-flip probability, [0, 1/2)
    double p_u = 0.0;     // depolarizing probability per unitary layer, [0, 1)
};

struct PairNoise {
    int j = 0;       // 1-based qubit indices
    int jp = 0;
    double p_nl = 0.0;  // correlated two-qubit flip probability, [0, 1/2)
};

// Noise placed between the random unitaries and the readout:
// Lambda = cross-talk o Lambda_meas o (Lambda_U)^eta, per iteration.
struct NoiseModel {
    std::vector<QubitNoise> per_qubit;
    std::vector<PairNoise> cross_talk;
    DriftSchedule drift;

    static NoiseModel noiseless(int n_qubits);
    static NoiseModel uniform_readout(int n_qubits, double p_meas);

    int n_qubits() const { return static_cast<int>(per_qubit.size()); }
    bool flip_only() const;
    bool is_noiseless() const;

    // Drift-scaled parameters for one iteration; throws when a scaled
    // probability leaves its valid range.
    QubitNoise effective(int qubit, int iteration) const;
    double effective_pair(std::size_t pair_index, int iteration) const;

    void validate() const;
};

// Density-matrix application of the full channel: per qubit eta depolarizing
// layers then the readout flip, then the correlated pair flips.
CMat apply_channel(const CMat& rho_rotated, const NoiseModel& model, int iteration, int eta);

// Per-qubit depolarizing layer on every qubit (used as a depth-noise proxy
// during state preparation).
CMat depolarize_all(const CMat& rho, double p_u);

// Classical action of the flip-type channels on one sampled outcome.
// Refuses models with depolarizing noise: that channel does not commute with
// the computational-basis measurement in this representation.
Eigen::Index classical_readout_sampler(Eigen::Index outcome, int n_qubits,
                                       const NoiseModel& model, int iteration,
                                       rng::Stream& stream);
std::string classical_readout_sampler(const std::string& bits, const NoiseModel& model,
                                      int iteration, rng::Stream& stream);

// Exact action of the flip-type channels on an outcome distribution.
RVec transform_distribution(const RVec& probs, int n_qubits, const NoiseModel& model,
                            int iteration);

// Kraus sets for the single-qubit building blocks (test support for the
// trace-preservation invariant).
std::vector<CMat> depolarizing_kraus(double p_u);
std::vector<CMat> bit_flip_kraus(double p);

void to_json(nlohmann::json& j, const NoiseModel& model);
void from_json(const nlohmann::json& j, NoiseModel& model);

}  // namespace qfi::noise
