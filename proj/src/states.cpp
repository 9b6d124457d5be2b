#include "qfi/states.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "qfi/rng.hpp"

namespace qfi::states {

namespace {

using json = nlohmann::json;

// Ising bond energy of basis state s: sum over bonds of z_j z_{j+1},
// with z = +1 for bit 0. Qubit 1 is the most significant bit.
double bond_sum(Eigen::Index s, int n, Boundary boundary) {
    double acc = 0.0;
    const int bonds = (boundary == Boundary::Periodic && n > 2) ? n : n - 1;
    for (int b = 0; b < bonds; ++b) {
        const int j = b;                  // qubit j+1
        const int jn = (b + 1) % n;       // neighbour
        const int zj = ((s >> (n - 1 - j)) & 1) ? -1 : 1;
        const int zjn = ((s >> (n - 1 - jn)) & 1) ? -1 : 1;
        acc += zj * zjn;
    }
    return acc;
}

// In-place single-qubit gate on an amplitude vector; qubit is 1-based.
void apply_single_qubit(CVec& amps, int n, int qubit, const Mat2& u) {
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

void check_spec(const TfimSpec& spec) {
    if (spec.n_qubits < 2) throw std::invalid_argument("tfim: need at least 2 qubits");
    check_qubit_cap(spec.n_qubits);
}

std::string cache_key(const TfimSpec& spec, int layers, std::uint64_t seed) {
    const char* b = spec.boundary == Boundary::Open ? "open" : "periodic";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "N=%d,p=%d,J=%.17g,h=%.17g,b=%s,seed=%llu",
                  spec.n_qubits, layers, spec.coupling, spec.field, b,
                  static_cast<unsigned long long>(seed));
    return buf;
}

// Nelder-Mead on an unconstrained objective. Returns best point found.
std::pair<std::vector<double>, double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> start,
    double step, int max_evals, double ftol) {
    const int d = static_cast<int>(start.size());
    std::vector<std::vector<double>> pts(d + 1, start);
    std::vector<double> vals(d + 1);
    for (int k = 1; k <= d; ++k) pts[k][k - 1] += step;
    for (int k = 0; k <= d; ++k) vals[k] = f(pts[k]);
    int evals = d + 1;

    auto order = [&] {
        std::vector<int> idx(d + 1);
        for (int k = 0; k <= d; ++k) idx[k] = k;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return vals[a] < vals[b]; });
        std::vector<std::vector<double>> p2(d + 1);
        std::vector<double> v2(d + 1);
        for (int k = 0; k <= d; ++k) {
            p2[k] = pts[idx[k]];
            v2[k] = vals[idx[k]];
        }
        pts.swap(p2);
        vals.swap(v2);
    };

    order();
    while (evals < max_evals && std::abs(vals[d] - vals[0]) > ftol) {
        std::vector<double> centroid(d, 0.0);
        for (int k = 0; k < d; ++k)
            for (int m = 0; m < d; ++m) centroid[m] += pts[k][m] / d;

        auto blend = [&](double t) {
            std::vector<double> p(d);
            for (int m = 0; m < d; ++m) p[m] = centroid[m] + t * (pts[d][m] - centroid[m]);
            return p;
        };

        const auto reflected = blend(-1.0);
        const double fr = f(reflected);
        ++evals;
        if (fr < vals[0]) {
            const auto expanded = blend(-2.0);
            const double fe = f(expanded);
            ++evals;
            if (fe < fr) {
                pts[d] = expanded;
                vals[d] = fe;
            } else {
                pts[d] = reflected;
                vals[d] = fr;
            }
        } else if (fr < vals[d - 1]) {
            pts[d] = reflected;
            vals[d] = fr;
        } else {
            const auto contracted = blend(fr < vals[d] ? -0.5 : 0.5);
            const double fc = f(contracted);
            ++evals;
            if (fc < std::min(fr, vals[d])) {
                pts[d] = contracted;
                vals[d] = fc;
            } else {
                for (int k = 1; k <= d; ++k) {
                    for (int m = 0; m < d; ++m) pts[k][m] = 0.5 * (pts[k][m] + pts[0][m]);
                    vals[k] = f(pts[k]);
                }
                evals += d;
            }
        }
        order();
    }
    return {pts[0], vals[0]};
}

double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a <= 0) a += 2.0 * M_PI;
    return a - M_PI;
}

}  // namespace

PureState ghz(int n_qubits) {
    check_qubit_cap(n_qubits);
    PureState psi;
    psi.n_qubits = n_qubits;
    psi.amplitudes = CVec::Zero(dim_of(n_qubits));
    const double r = 1.0 / std::sqrt(2.0);
    psi.amplitudes[0] = r;
    psi.amplitudes[psi.dim() - 1] = r;
    return psi;
}

PureState plus_state(int n_qubits) {
    check_qubit_cap(n_qubits);
    PureState psi;
    psi.n_qubits = n_qubits;
    const Eigen::Index dim = dim_of(n_qubits);
    psi.amplitudes = CVec::Constant(dim, Complex(1.0 / std::sqrt(double(dim)), 0.0));
    return psi;
}

PureState normalized(PureState psi) {
    const double n = psi.amplitudes.norm();
    if (n <= 0) throw std::invalid_argument("cannot normalize the zero vector");
    psi.amplitudes /= n;
    return psi;
}

CMat density_matrix(const PureState& psi) {
    return psi.amplitudes * psi.amplitudes.adjoint();
}

CMat white_noise_mix(const PureState& psi, double w) {
    if (w < 0.0 || w > 1.0) throw std::invalid_argument("mixing weight outside [0, 1]");
    const Eigen::Index dim = psi.dim();
    return (1.0 - w) * density_matrix(psi) +
           (w / double(dim)) * CMat::Identity(dim, dim);
}

CMat tfim_hamiltonian(const TfimSpec& spec) {
    check_spec(spec);
    const int n = spec.n_qubits;
    const Eigen::Index dim = dim_of(n);
    CMat h = CMat::Zero(dim, dim);
    for (Eigen::Index s = 0; s < dim; ++s) {
        h(s, s) = -spec.coupling * bond_sum(s, n, spec.boundary);
        for (int j = 0; j < n; ++j) {
            const Eigen::Index t = s ^ (Eigen::Index(1) << (n - 1 - j));
            h(t, s) += -spec.field;
        }
    }
    return h;
}

GroundState tfim_ground_state(const TfimSpec& spec) {
    const CMat h = tfim_hamiltonian(spec);
    const auto eig = qmath::hermitian_eig(h, 1e-9);
    const Eigen::Index dim = h.rows();
    const double e0 = eig.eigenvalues[dim - 1];  // eigenvalues are descending
    const double scale = std::max(1.0, eig.eigenvalues.cwiseAbs().maxCoeff());
    const double tol = 1e-9 * scale;

    int degeneracy = 0;
    for (Eigen::Index k = dim - 1; k >= 0 && eig.eigenvalues[k] - e0 <= tol; --k) ++degeneracy;

    GroundState out;
    out.energy = e0;
    out.degeneracy = degeneracy;
    out.state.n_qubits = spec.n_qubits;

    if (degeneracy == 1) {
        out.state.amplitudes = eig.eigenvectors.col(dim - 1);
    } else {
        // Fix a representative deterministically: project basis vectors in
        // lexicographic order onto the ground space, keep the first that
        // survives.
        const CMat basis = eig.eigenvectors.rightCols(degeneracy);
        for (Eigen::Index k = 0; k < dim; ++k) {
            CVec v = basis * (basis.adjoint().col(k).eval());
            const double norm = v.norm();
            if (norm > 1e-6) {
                out.state.amplitudes = v / norm;
                break;
            }
        }
    }

    // Deterministic phase: first non-negligible amplitude made real positive.
    for (Eigen::Index k = 0; k < dim; ++k) {
        const Complex a = out.state.amplitudes[k];
        if (std::abs(a) > 1e-9) {
            out.state.amplitudes *= std::conj(a) / std::abs(a);
            break;
        }
    }
    return out;
}

double energy_expectation(const TfimSpec& spec, const PureState& psi) {
    check_spec(spec);
    const int n = spec.n_qubits;
    if (psi.n_qubits != n) throw std::invalid_argument("energy_expectation: qubit mismatch");
    const Eigen::Index dim = psi.dim();
    Complex acc = 0.0;
    for (Eigen::Index s = 0; s < dim; ++s) {
        Complex hpsi = -spec.coupling * bond_sum(s, n, spec.boundary) * psi.amplitudes[s];
        for (int j = 0; j < n; ++j)
            hpsi += -spec.field * psi.amplitudes[s ^ (Eigen::Index(1) << (n - 1 - j))];
        acc += std::conj(psi.amplitudes[s]) * hpsi;
    }
    return acc.real();
}

PureState variational_state(const TfimSpec& spec, const VariationalAngles& angles,
                            const PureState& initial) {
    check_spec(spec);
    if (angles.gamma.size() != angles.delta.size())
        throw std::invalid_argument("variational_state: gamma/delta length mismatch");
    if (initial.n_qubits != spec.n_qubits)
        throw std::invalid_argument("variational_state: initial state qubit mismatch");

    const int n = spec.n_qubits;
    const Eigen::Index dim = initial.dim();
    PureState psi = initial;

    for (int l = 0; l < angles.layers(); ++l) {
        // exp(-i gamma H_A): H_A is diagonal, pure phases.
        const double gamma = angles.gamma[l];
        for (Eigen::Index s = 0; s < dim; ++s) {
            const double e = -spec.coupling * bond_sum(s, n, spec.boundary);
            psi.amplitudes[s] *= std::exp(Complex(0.0, -gamma * e));
        }
        // exp(-i delta H_B) = prod_j exp(+i delta h sigma_x_j)
        const double theta = angles.delta[l] * spec.field;
        Mat2 u;
        u << std::cos(theta), Complex(0, 1) * std::sin(theta),
             Complex(0, 1) * std::sin(theta), std::cos(theta);
        for (int j = 1; j <= n; ++j) apply_single_qubit(psi.amplitudes, n, j, u);
    }
    return psi;
}

PureState variational_state(const TfimSpec& spec, const VariationalAngles& angles) {
    return variational_state(spec, angles, plus_state(spec.n_qubits));
}

OptimizationResult optimize_angles(const TfimSpec& spec, int layers, std::uint64_t seed,
                                   int restarts) {
    check_spec(spec);
    if (layers < 0) throw std::invalid_argument("optimize_angles: negative layer count");

    const GroundState exact = tfim_ground_state(spec);
    const PureState psi0 = plus_state(spec.n_qubits);

    OptimizationResult best;
    best.energy = energy_expectation(spec, psi0);
    best.angles.gamma.assign(std::size_t(layers), 0.0);
    best.angles.delta.assign(std::size_t(layers), 0.0);

    if (layers == 0) {
        best.residual = best.energy - exact.energy;
        best.fidelity = std::norm(exact.state.amplitudes.dot(psi0.amplitudes));
        best.converged = true;
        best.best_restart = 0;
        return best;
    }

    const int d = 2 * layers;
    auto objective = [&](const std::vector<double>& x) {
        VariationalAngles a;
        a.gamma.assign(x.begin(), x.begin() + layers);
        a.delta.assign(x.begin() + layers, x.end());
        return energy_expectation(spec, variational_state(spec, a, psi0));
    };

    bool have_best = false;
    for (int r = 0; r < restarts; ++r) {
        auto stream = rng::derive_stream(seed, {0x4f5054u, std::uint64_t(r)});
        std::vector<double> start(d);
        for (double& v : start) v = (stream.uniform() * 2.0 - 1.0) * M_PI;

        auto [pt, val] = nelder_mead(objective, start, 0.6, 800 * d, 1e-13);
        // polish from the found point with shrinking simplex
        for (double step : {0.05, 0.005}) {
            auto [p2, v2] = nelder_mead(objective, pt, step, 400 * d, 1e-14);
            if (v2 < val) {
                pt = p2;
                val = v2;
            }
        }

        if (!have_best || val < best.energy - 1e-15) {
            have_best = true;
            best.energy = val;
            best.best_restart = r;
            best.angles.gamma.assign(pt.begin(), pt.begin() + layers);
            best.angles.delta.assign(pt.begin() + layers, pt.end());
        }
        if (best.energy - exact.energy < 1e-10) break;  // already exact
    }

    for (double& g : best.angles.gamma) g = wrap_angle(g);
    for (double& dl : best.angles.delta) dl = wrap_angle(dl);
    best.energy = objective([&] {
        std::vector<double> x(best.angles.gamma);
        x.insert(x.end(), best.angles.delta.begin(), best.angles.delta.end());
        return x;
    }());
    best.residual = best.energy - exact.energy;
    const PureState opt = variational_state(spec, best.angles, psi0);
    best.fidelity = std::norm(exact.state.amplitudes.dot(opt.amplitudes));
    best.converged = best.residual < 1e-6;
    return best;
}

bool load_cached_angles(const std::string& path, const TfimSpec& spec, int layers,
                        std::uint64_t seed, OptimizationResult& out) {
    std::ifstream in(path);
    if (!in) return false;
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error&) {
        return false;
    }
    const std::string key = cache_key(spec, layers, seed);
    if (!doc.contains("entries") || !doc["entries"].contains(key)) return false;
    const json& e = doc["entries"][key];
    out.angles.gamma = e.at("gamma").get<std::vector<double>>();
    out.angles.delta = e.at("delta").get<std::vector<double>>();
    out.energy = e.at("energy").get<double>();
    out.residual = e.at("residual").get<double>();
    out.fidelity = e.at("fidelity").get<double>();
    out.converged = e.at("converged").get<bool>();
    out.best_restart = e.value("best_restart", -1);
    return true;
}

void store_cached_angles(const std::string& path, const TfimSpec& spec, int layers,
                         std::uint64_t seed, const OptimizationResult& result) {
    json doc;
    {
        std::ifstream in(path);
        if (in) {
            try {
                in >> doc;
            } catch (const json::parse_error&) {
                doc = json::object();
            }
        }
    }
    if (!doc.contains("entries")) doc["entries"] = json::object();
    json e;
    e["gamma"] = result.angles.gamma;
    e["delta"] = result.angles.delta;
    e["energy"] = result.energy;
    e["residual"] = result.residual;
    e["fidelity"] = result.fidelity;
    e["converged"] = result.converged;
    e["best_restart"] = result.best_restart;
    doc["entries"][cache_key(spec, layers, seed)] = e;
    std::ofstream out(path);
    out << doc.dump(2) << '\n';
}

}  // namespace qfi::states
