#include "qfi/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qfi::sampling {

namespace {

constexpr std::uint64_t kTagUnitary = 0x756e6974;  // stream labels
constexpr std::uint64_t kTagShots = 0x73686f74;

// In-place single-qubit gate on an amplitude vector, qubit 1-based.
void apply_gate(CVec& amps, int n, int qubit, const Mat2& u) {
    const Eigen::Index mask = Eigen::Index(1) << (n - qubit);
    const Eigen::Index dim = amps.size();
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (i & mask) continue;
        const Complex a0 = amps[i];
        const Complex a1 = amps[i | mask];
        amps[i] = u(0, 0) * a0 + u(0, 1) * a1;
        amps[i | mask] = u(1, 0) * a0 + u(1, 1) * a1;
    }
}

std::vector<Mat2> sample_layer_factors(const ExperimentPlan& plan, Purpose purpose,
                                       int iteration, int r) {
    // With shared unitaries the stream key is purpose-independent, so the
    // calibration and estimation halves of an iteration see identical
    // factors.
    const std::uint64_t purpose_key =
        plan.share_unitaries ? 0 : (purpose == Purpose::Calibration ? 1 : 2);
    auto stream = rng::derive_stream(
        plan.master_seed, {kTagUnitary, purpose_key, std::uint64_t(iteration), std::uint64_t(r)});
    std::vector<Mat2> factors(std::size_t(plan.n_qubits), Mat2::Identity());
    for (int j = 0; j < plan.n_qubits; ++j) {
        Mat2 u = Mat2::Identity();
        for (int layer = 0; layer < plan.eta; ++layer)
            u = (sample_cue_unitary(stream) * u).eval();  // layer 1 applied first
        factors[std::size_t(j)] = u;
    }
    return factors;
}

RVec noisy_distribution(const StateInput& state, const LocalUnitaryLayer& layer,
                        const noise::NoiseModel& model, int iteration, int eta) {
    if (model.flip_only()) {
        RVec p = born_probabilities(state, layer);
        if (!model.is_noiseless())
            p = noise::transform_distribution(p, layer.n_qubits, model, iteration);
        return p;
    }
    // Depolarizing component present: go through the density matrix.
    CMat rho;
    if (std::holds_alternative<states::PureState>(state))
        rho = states::density_matrix(std::get<states::PureState>(state));
    else
        rho = std::get<CMat>(state);
    const CMat noisy = noise::apply_channel(rotate_density(rho, layer), model, iteration, eta);
    return noisy.diagonal().real();
}

std::map<Eigen::Index, int> draw_counts(const RVec& probs, int shots, rng::Stream& stream) {
    const Eigen::Index dim = probs.size();
    std::vector<double> cdf(static_cast<std::size_t>(dim));
    double acc = 0.0;
    for (Eigen::Index s = 0; s < dim; ++s) {
        acc += std::max(0.0, probs[s]);
        cdf[std::size_t(s)] = acc;
    }
    if (acc <= 0.0) throw std::runtime_error("outcome distribution sums to zero");

    std::map<Eigen::Index, int> counts;
    for (int m = 0; m < shots; ++m) {
        const double u = stream.uniform() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const Eigen::Index s = std::min<Eigen::Index>(it - cdf.begin(), dim - 1);
        ++counts[s];
    }
    return counts;
}

}  // namespace

const char* purpose_tag(Purpose p) { return p == Purpose::Calibration ? "cal" : "est"; }

Purpose purpose_from_tag(const std::string& tag) {
    if (tag == "cal") return Purpose::Calibration;
    if (tag == "est") return Purpose::Estimation;
    throw std::invalid_argument("unknown purpose tag: " + tag);
}

int ExperimentPlan::unitaries_in(int iteration) const {
    if (iteration < 1 || iteration > n_iterations) return 0;
    const int before = (iteration - 1) * unitaries_per_iteration;
    return std::min(unitaries_per_iteration, total_unitaries - before);
}

void ExperimentPlan::validate() const {
    check_qubit_cap(n_qubits);
    if (n_iterations < 1 || unitaries_per_iteration < 1 || shots_per_unitary < 1)
        throw std::invalid_argument("experiment plan: counts must be positive");
    if (eta < 1) throw std::invalid_argument("experiment plan: eta must be >= 1");
    if (total_unitaries < 1 ||
        total_unitaries > n_iterations * unitaries_per_iteration ||
        total_unitaries <= (n_iterations - 1) * unitaries_per_iteration)
        throw std::invalid_argument("experiment plan: total unitaries inconsistent");
}

Mat2 sample_cue_unitary(rng::Stream& stream) {
    // Ginibre draw
    Mat2 g;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) g(r, c) = Complex(stream.normal(), stream.normal());
    // Gram-Schmidt with positive normalization constants: equivalent to QR
    // with a real-positive R diagonal, which makes Q Haar-distributed.
    Eigen::Vector2cd q0 = g.col(0);
    q0 /= q0.norm();
    Eigen::Vector2cd q1 = g.col(1) - q0 * (q0.dot(g.col(1)));
    q1 /= q1.norm();
    Mat2 u;
    u.col(0) = q0;
    u.col(1) = q1;
    return u;
}

RVec born_probabilities(const states::PureState& psi, const LocalUnitaryLayer& layer) {
    if (psi.n_qubits != layer.n_qubits)
        throw std::invalid_argument("born_probabilities: qubit mismatch");
    CVec amps = psi.amplitudes;
    for (int j = 1; j <= layer.n_qubits; ++j)
        apply_gate(amps, layer.n_qubits, j, layer.factors[std::size_t(j - 1)]);
    return amps.cwiseAbs2();
}

CMat rotate_density(const CMat& rho, const LocalUnitaryLayer& layer) {
    const int n = layer.n_qubits;
    if (rho.rows() != dim_of(n)) throw std::invalid_argument("rotate_density: size mismatch");
    CMat out = rho;
    const Eigen::Index dim = rho.rows();
    for (int j = 1; j <= n; ++j) {
        const Mat2& u = layer.factors[std::size_t(j - 1)];
        const Eigen::Index mask = Eigen::Index(1) << (n - j);
        // rows: U rho
        for (Eigen::Index c = 0; c < dim; ++c) {
            for (Eigen::Index r = 0; r < dim; ++r) {
                if (r & mask) continue;
                const Complex a0 = out(r, c);
                const Complex a1 = out(r | mask, c);
                out(r, c) = u(0, 0) * a0 + u(0, 1) * a1;
                out(r | mask, c) = u(1, 0) * a0 + u(1, 1) * a1;
            }
        }
        // cols: (U rho) U^dag
        for (Eigen::Index r = 0; r < dim; ++r) {
            for (Eigen::Index c = 0; c < dim; ++c) {
                if (c & mask) continue;
                const Complex a0 = out(r, c);
                const Complex a1 = out(r, c | mask);
                out(r, c) = a0 * std::conj(u(0, 0)) + a1 * std::conj(u(0, 1));
                out(r, c | mask) = a0 * std::conj(u(1, 0)) + a1 * std::conj(u(1, 1));
            }
        }
    }
    return out;
}

RVec born_probabilities(const CMat& rho, const LocalUnitaryLayer& layer) {
    return rotate_density(rho, layer).diagonal().real();
}

RVec born_probabilities(const StateInput& state, const LocalUnitaryLayer& layer) {
    if (std::holds_alternative<states::PureState>(state))
        return born_probabilities(std::get<states::PureState>(state), layer);
    return born_probabilities(std::get<CMat>(state), layer);
}

std::vector<MeasurementRecord> run_protocol(const StateInput& state, const ExperimentPlan& plan,
                                            const noise::NoiseModel& model, Purpose purpose) {
    plan.validate();
    model.validate();
    if (model.n_qubits() != plan.n_qubits)
        throw std::invalid_argument("run_protocol: noise model does not match plan");
    const Eigen::Index dim = dim_of(plan.n_qubits);
    if (std::holds_alternative<states::PureState>(state)) {
        if (std::get<states::PureState>(state).dim() != dim)
            throw std::invalid_argument("run_protocol: state does not match plan");
    } else if (std::get<CMat>(state).rows() != dim) {
        throw std::invalid_argument("run_protocol: state does not match plan");
    }

    std::vector<std::pair<int, int>> tasks;
    tasks.reserve(std::size_t(plan.total_unitaries));
    for (int i = 1; i <= plan.n_iterations; ++i)
        for (int r = 1; r <= plan.unitaries_in(i); ++r) tasks.emplace_back(i, r);

    std::vector<MeasurementRecord> records(tasks.size());

#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t t = 0; t < std::ptrdiff_t(tasks.size()); ++t) {
        const auto [i, r] = tasks[std::size_t(t)];
        LocalUnitaryLayer layer;
        layer.n_qubits = plan.n_qubits;
        layer.iteration = i;
        layer.unitary_index = r;
        layer.factors = sample_layer_factors(plan, purpose, i, r);

        const RVec probs = noisy_distribution(state, layer, model, i, plan.eta);

        auto shot_stream = rng::derive_stream(
            plan.master_seed,
            {kTagShots, std::uint64_t(purpose == Purpose::Calibration ? 1 : 2),
             std::uint64_t(i), std::uint64_t(r)});

        MeasurementRecord rec;
        rec.iteration = i;
        rec.unitary_index = r;
        rec.purpose = purpose;
        rec.n_qubits = plan.n_qubits;
        rec.shots = plan.shots_per_unitary;
        rec.unitaries = layer.factors;
        rec.counts = draw_counts(probs, plan.shots_per_unitary, shot_stream);
        records[std::size_t(t)] = std::move(rec);
    }
    return records;
}

ExperimentPlan auto_budget(int n_qubits) {
    check_qubit_cap(n_qubits);
    ExperimentPlan plan;
    plan.n_qubits = n_qubits;
    plan.total_unitaries =
        int(std::ceil(300.0 * std::pow(2.0, 0.5 * n_qubits) - 1e-9));
    plan.unitaries_per_iteration = 200;
    plan.n_iterations =
        (plan.total_unitaries + plan.unitaries_per_iteration - 1) / plan.unitaries_per_iteration;
    plan.shots_per_unitary = 1000;
    return plan;
}

std::string index_to_bits(Eigen::Index s, int n_qubits) {
    std::string out(std::size_t(n_qubits), '0');
    for (int k = 0; k < n_qubits; ++k)
        if ((s >> (n_qubits - 1 - k)) & 1) out[std::size_t(k)] = '1';
    return out;
}

Eigen::Index bits_to_index(const std::string& bits) {
    Eigen::Index s = 0;
    for (char c : bits) {
        s <<= 1;
        if (c == '1')
            s |= 1;
        else if (c != '0')
            throw std::invalid_argument("bitstring must contain only 0/1");
    }
    return s;
}

}  // namespace qfi::sampling
