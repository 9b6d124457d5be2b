#include "qfi/noise.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "qfi/qmath.hpp"

namespace qfi::noise {

namespace {

using json = nlohmann::json;

void check_p(double p, double limit, const char* what) {
    if (!(p >= 0.0) || !(p < limit))
        throw std::invalid_argument(std::string(what) + " probability outside [0, " +
                                    std::to_string(limit) + ")");
}

// (1-p) rho + p (X-mask) rho (X-mask): flips of all bits in `mask`.
CMat xor_mix(const CMat& rho, Eigen::Index mask, double p) {
    const Eigen::Index d = rho.rows();
    CMat out(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c)
            out(r, c) = (1.0 - p) * rho(r, c) + p * rho(r ^ mask, c ^ mask);
    return out;
}

// (1-p) rho + (p/3) sum_axis sigma rho sigma on one qubit. In index terms:
// matching row/col bits mix with the flipped pair, mismatched entries are
// damped by (1 - 4p/3).
CMat depolarize_qubit(const CMat& rho, Eigen::Index mask, double p) {
    const Eigen::Index d = rho.rows();
    CMat out(d, d);
    const double keep = 1.0 - 2.0 * p / 3.0;
    const double swap = 2.0 * p / 3.0;
    const double damp = 1.0 - 4.0 * p / 3.0;
    for (Eigen::Index r = 0; r < d; ++r) {
        const bool br = (r & mask) != 0;
        for (Eigen::Index c = 0; c < d; ++c) {
            const bool bc = (c & mask) != 0;
            if (br == bc)
                out(r, c) = keep * rho(r, c) + swap * rho(r ^ mask, c ^ mask);
            else
                out(r, c) = damp * rho(r, c);
        }
    }
    return out;
}

int qubit_count_for_dim(Eigen::Index dim) {
    int n = 0;
    while ((Eigen::Index(1) << n) < dim) ++n;
    if ((Eigen::Index(1) << n) != dim) throw std::invalid_argument("dimension not a power of 2");
    return n;
}

}  // namespace

double DriftSchedule::scale(int iteration) const {
    switch (kind) {
        case Kind::None:
            return 1.0;
        case Kind::Steps: {
            double s = 1.0;
            for (const auto& [start, value] : steps)
                if (iteration >= start) s = value;
            return s;
        }
        case Kind::Jitter: {
            auto stream = rng::derive_stream(seed, {0xd21f7u, std::uint64_t(iteration)});
            return 1.0 + amplitude * (2.0 * stream.uniform() - 1.0);
        }
    }
    return 1.0;
}

NoiseModel NoiseModel::noiseless(int n_qubits) {
    NoiseModel m;
    m.per_qubit.assign(std::size_t(n_qubits), QubitNoise{});
    return m;
}

NoiseModel NoiseModel::uniform_readout(int n_qubits, double p_meas) {
    NoiseModel m;
    m.per_qubit.assign(std::size_t(n_qubits), QubitNoise{p_meas, 0.0});
    m.validate();
    return m;
}

bool NoiseModel::flip_only() const {
    for (const auto& q : per_qubit)
        if (q.p_u > 0.0) return false;
    return true;
}

bool NoiseModel::is_noiseless() const {
    if (!flip_only()) return false;
    for (const auto& q : per_qubit)
        if (q.p_meas > 0.0) return false;
    for (const auto& pr : cross_talk)
        if (pr.p_nl > 0.0) return false;
    return true;
}

QubitNoise NoiseModel::effective(int qubit, int iteration) const {
    const double s = drift.scale(iteration);
    QubitNoise q = per_qubit.at(std::size_t(qubit - 1));
    q.p_meas *= s;
    q.p_u *= s;
    check_p(q.p_meas, 0.5, "drift-scaled readout");
    check_p(q.p_u, 1.0, "drift-scaled depolarizing");
    return q;
}

double NoiseModel::effective_pair(std::size_t pair_index, int iteration) const {
    const double p = cross_talk.at(pair_index).p_nl * drift.scale(iteration);
    check_p(p, 0.5, "drift-scaled cross-talk");
    return p;
}

void NoiseModel::validate() const {
    if (per_qubit.empty()) throw std::invalid_argument("noise model covers no qubits");
    for (const auto& q : per_qubit) {
        check_p(q.p_meas, 0.5, "readout");
        check_p(q.p_u, 1.0, "depolarizing");
    }
    const int n = n_qubits();
    for (const auto& pr : cross_talk) {
        if (pr.j < 1 || pr.j > n || pr.jp < 1 || pr.jp > n || pr.j == pr.jp)
            throw std::invalid_argument("cross-talk pair indices invalid");
        check_p(pr.p_nl, 0.5, "cross-talk");
    }
}

CMat apply_channel(const CMat& rho_rotated, const NoiseModel& model, int iteration, int eta) {
    if (eta < 1) throw std::invalid_argument("apply_channel: eta must be >= 1");
    const int n = qubit_count_for_dim(rho_rotated.rows());
    if (n != model.n_qubits())
        throw std::invalid_argument("apply_channel: model does not match state size");

    CMat rho = rho_rotated;
    for (int j = 1; j <= n; ++j) {
        const QubitNoise q = model.effective(j, iteration);
        const Eigen::Index mask = Eigen::Index(1) << (n - j);
        if (q.p_u > 0.0)
            for (int layer = 0; layer < eta; ++layer) rho = depolarize_qubit(rho, mask, q.p_u);
        if (q.p_meas > 0.0) rho = xor_mix(rho, mask, q.p_meas);
    }
    for (std::size_t k = 0; k < model.cross_talk.size(); ++k) {
        const double p = model.effective_pair(k, iteration);
        if (p <= 0.0) continue;
        const auto& pr = model.cross_talk[k];
        const Eigen::Index mask =
            (Eigen::Index(1) << (n - pr.j)) | (Eigen::Index(1) << (n - pr.jp));
        rho = xor_mix(rho, mask, p);
    }
    return rho;
}

CMat depolarize_all(const CMat& rho, double p_u) {
    check_p(p_u, 1.0, "depolarizing");
    const int n = qubit_count_for_dim(rho.rows());
    CMat out = rho;
    for (int j = 1; j <= n; ++j)
        out = depolarize_qubit(out, Eigen::Index(1) << (n - j), p_u);
    return out;
}

Eigen::Index classical_readout_sampler(Eigen::Index outcome, int n_qubits,
                                       const NoiseModel& model, int iteration,
                                       rng::Stream& stream) {
    if (!model.flip_only())
        throw std::invalid_argument(
            "classical sampler requires a flip-only model (no depolarizing)");
    Eigen::Index s = outcome;
    for (int j = 1; j <= n_qubits; ++j) {
        const QubitNoise q = model.effective(j, iteration);
        if (q.p_meas > 0.0 && stream.uniform() < q.p_meas)
            s ^= Eigen::Index(1) << (n_qubits - j);
    }
    for (std::size_t k = 0; k < model.cross_talk.size(); ++k) {
        const double p = model.effective_pair(k, iteration);
        if (p > 0.0 && stream.uniform() < p) {
            const auto& pr = model.cross_talk[k];
            s ^= (Eigen::Index(1) << (n_qubits - pr.j)) |
                 (Eigen::Index(1) << (n_qubits - pr.jp));
        }
    }
    return s;
}

std::string classical_readout_sampler(const std::string& bits, const NoiseModel& model,
                                      int iteration, rng::Stream& stream) {
    const int n = static_cast<int>(bits.size());
    Eigen::Index s = 0;
    for (int k = 0; k < n; ++k) {
        if (bits[std::size_t(k)] == '1')
            s |= Eigen::Index(1) << (n - 1 - k);
        else if (bits[std::size_t(k)] != '0')
            throw std::invalid_argument("bitstring must contain only 0/1");
    }
    s = classical_readout_sampler(s, n, model, iteration, stream);
    std::string out(std::size_t(n), '0');
    for (int k = 0; k < n; ++k)
        if ((s >> (n - 1 - k)) & 1) out[std::size_t(k)] = '1';
    return out;
}

RVec transform_distribution(const RVec& probs, int n_qubits, const NoiseModel& model,
                            int iteration) {
    if (!model.flip_only())
        throw std::invalid_argument("distribution transform requires a flip-only model");
    if (probs.size() != dim_of(n_qubits))
        throw std::invalid_argument("distribution size mismatch");

    RVec p = probs;
    const Eigen::Index dim = p.size();
    auto mix = [&](Eigen::Index mask, double q) {
        RVec next(dim);
        for (Eigen::Index s = 0; s < dim; ++s)
            next[s] = (1.0 - q) * p[s] + q * p[s ^ mask];
        p.swap(next);
    };
    for (int j = 1; j <= n_qubits; ++j) {
        const QubitNoise q = model.effective(j, iteration);
        if (q.p_meas > 0.0) mix(Eigen::Index(1) << (n_qubits - j), q.p_meas);
    }
    for (std::size_t k = 0; k < model.cross_talk.size(); ++k) {
        const double q = model.effective_pair(k, iteration);
        if (q <= 0.0) continue;
        const auto& pr = model.cross_talk[k];
        mix((Eigen::Index(1) << (n_qubits - pr.j)) | (Eigen::Index(1) << (n_qubits - pr.jp)),
            q);
    }
    return p;
}

std::vector<CMat> depolarizing_kraus(double p_u) {
    check_p(p_u, 1.0, "depolarizing");
    std::vector<CMat> k;
    k.push_back(std::sqrt(1.0 - p_u) * qmath::identity(2));
    k.push_back(std::sqrt(p_u / 3.0) * CMat(qmath::pauli_x()));
    k.push_back(std::sqrt(p_u / 3.0) * CMat(qmath::pauli_y()));
    k.push_back(std::sqrt(p_u / 3.0) * CMat(qmath::pauli_z()));
    return k;
}

std::vector<CMat> bit_flip_kraus(double p) {
    check_p(p, 1.0, "bit flip");
    std::vector<CMat> k;
    k.push_back(std::sqrt(1.0 - p) * qmath::identity(2));
    k.push_back(std::sqrt(p) * CMat(qmath::pauli_x()));
    return k;
}

void to_json(json& j, const NoiseModel& model) {
    j = json::object();
    j["per_qubit"] = json::array();
    for (const auto& q : model.per_qubit)
        j["per_qubit"].push_back({{"p_meas", q.p_meas}, {"p_u", q.p_u}});
    j["cross_talk"] = json::array();
    for (const auto& pr : model.cross_talk)
        j["cross_talk"].push_back({{"pair", {pr.j, pr.jp}}, {"p_nl", pr.p_nl}});
    json drift;
    switch (model.drift.kind) {
        case DriftSchedule::Kind::None:
            drift["kind"] = "none";
            break;
        case DriftSchedule::Kind::Steps: {
            drift["kind"] = "steps";
            json steps = json::array();
            for (const auto& [it, sc] : model.drift.steps) steps.push_back({it, sc});
            drift["params"] = {{"steps", steps}};
            break;
        }
        case DriftSchedule::Kind::Jitter:
            drift["kind"] = "jitter";
            drift["params"] = {{"amplitude", model.drift.amplitude}};
            break;
    }
    drift["seed"] = model.drift.seed;
    j["drift"] = drift;
}

void from_json(const json& j, NoiseModel& model) {
    model = NoiseModel{};
    for (const auto& q : j.at("per_qubit"))
        model.per_qubit.push_back({q.at("p_meas").get<double>(), q.at("p_u").get<double>()});
    if (j.contains("cross_talk")) {
        for (const auto& pr : j["cross_talk"]) {
            PairNoise pn;
            pn.j = pr.at("pair")[0].get<int>();
            pn.jp = pr.at("pair")[1].get<int>();
            pn.p_nl = pr.at("p_nl").get<double>();
            model.cross_talk.push_back(pn);
        }
    }
    if (j.contains("drift")) {
        const json& d = j["drift"];
        const std::string kind = d.value("kind", "none");
        if (kind == "none") {
            model.drift.kind = DriftSchedule::Kind::None;
        } else if (kind == "steps") {
            model.drift.kind = DriftSchedule::Kind::Steps;
            for (const auto& s : d.at("params").at("steps"))
                model.drift.steps.emplace_back(s[0].get<int>(), s[1].get<double>());
        } else if (kind == "jitter") {
            model.drift.kind = DriftSchedule::Kind::Jitter;
            model.drift.amplitude = d.at("params").at("amplitude").get<double>();
        } else {
            throw std::invalid_argument("unknown drift kind: " + kind);
        }
        model.drift.seed = d.value("seed", std::uint64_t(0));
    }
    model.validate();
}

}  // namespace qfi::noise
