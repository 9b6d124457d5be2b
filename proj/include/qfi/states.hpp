#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfi/common.hpp"
#include "qfi/qmath.hpp"

namespace qfi::states {

struct PureState {
    int n_qubits = 0;
    CVec amplitudes;

    Eigen::Index dim() const { return amplitudes.size(); }
};

enum class Boundary { Open, Periodic };

// Periodic by default: the exact p = N/2 variational preparation of the
// critical ground state holds on the translation-invariant chain (verified
// numerically down to machine precision; the open chain stalls at residual
// ~1e-2 for any p <= N/2).
struct TfimSpec {
    int n_qubits = 0;
    double coupling = 1.0;   // J
    double field = 1.0;      // h
    Boundary boundary = Boundary::Periodic;
};

struct VariationalAngles {
    std::vector<double> gamma;  // one per layer, multiplies H_A = -J sum sz sz
    std::vector<double> delta;  // one per layer, multiplies H_B = -h sum sx

    int layers() const { return static_cast<int>(gamma.size()); }
};

struct GroundState {
    PureState state;
    double energy = 0.0;
    int degeneracy = 1;  // > 1 when the ground level is (numerically) degenerate
};

struct OptimizationResult {
    VariationalAngles angles;
    double energy = 0.0;
    double residual = 0.0;        // energy - exact ground energy
    double fidelity = 0.0;        // overlap^2 with the exact ground state
    bool converged = false;
    int best_restart = -1;
};

PureState ghz(int n_qubits);
// |+>^N, the ground state of H_B.
PureState plus_state(int n_qubits);

PureState normalized(PureState psi);
CMat density_matrix(const PureState& psi);
// rho = (1-w) |psi><psi| + w * I / 2^N
CMat white_noise_mix(const PureState& psi, double w);

CMat tfim_hamiltonian(const TfimSpec& spec);
GroundState tfim_ground_state(const TfimSpec& spec);

double energy_expectation(const TfimSpec& spec, const PureState& psi);

// prod_{l=1..p} exp(-i delta_l H_B) exp(-i gamma_l H_A) |initial>, layer 1 first.
PureState variational_state(const TfimSpec& spec, const VariationalAngles& angles,
                            const PureState& initial);
PureState variational_state(const TfimSpec& spec, const VariationalAngles& angles);

// Simplex search over the 2p angles, 16 seeded restarts by default.
OptimizationResult optimize_angles(const TfimSpec& spec, int layers, std::uint64_t seed,
                                   int restarts = 16);

// JSON cache for optimized angles, keyed by (N, p, J, h, boundary, seed).
// Loading returns false when the key is absent or the file does not exist.
bool load_cached_angles(const std::string& path, const TfimSpec& spec, int layers,
                        std::uint64_t seed, OptimizationResult& out);
void store_cached_angles(const std::string& path, const TfimSpec& spec, int layers,
                         std::uint64_t seed, const OptimizationResult& result);

}  // namespace qfi::states
