#include "qfi/calibration.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace qfi::calibration {

namespace {

using json = nlohmann::json;
using sampling::MeasurementRecord;

// Empirical single-bit marginal frequencies (P(0), P(1)) of qubit j.
std::pair<double, double> marginal(const MeasurementRecord& rec, int qubit) {
    const Eigen::Index mask = Eigen::Index(1) << (rec.n_qubits - qubit);
    long long ones = 0;
    for (const auto& [s, n] : rec.counts)
        if (s & mask) ones += n;
    const double p1 = double(ones) / double(rec.shots);
    return {1.0 - p1, p1};
}

// Ideal Born probabilities (|<0|U|0>|^2, |<1|U|0>|^2) for the calibration
// state |0>.
std::pair<double, double> ideal(const MeasurementRecord& rec, int qubit) {
    const Mat2& u = rec.unitaries[std::size_t(qubit - 1)];
    const double p0 = std::norm(u(0, 0));
    const double p1 = std::norm(u(1, 0));
    return {p0, p1};
}

void check_nonempty(std::span<const MeasurementRecord> records) {
    if (records.empty()) throw std::invalid_argument("calibration: no records");
}

double mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / double(v.size());
}

// standard deviation of the mean
double sdom(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / double(v.size() - 1) / double(v.size()));
}

}  // namespace

const char* method_tag(Method m) { return m == Method::Plain ? "plain" : "enhanced"; }

Method method_from_tag(const std::string& tag) {
    if (tag == "plain") return Method::Plain;
    if (tag == "enhanced") return Method::Enhanced;
    throw std::invalid_argument("unknown calibration method: " + tag);
}

double estimate_c_j(std::span<const MeasurementRecord> records, int qubit) {
    check_nonempty(records);
    double acc = 0.0;
    for (const auto& rec : records) {
        const auto [f0, f1] = marginal(rec, qubit);
        const auto [p0, p1] = ideal(rec, qubit);
        acc += f0 * p0 + f1 * p1;
    }
    return acc / double(records.size());
}

double estimate_b_j(std::span<const MeasurementRecord> records, int qubit) {
    check_nonempty(records);
    double acc = 0.0;
    for (const auto& rec : records) {
        const auto [p0, p1] = ideal(rec, qubit);
        acc += p0 * p0 + p1 * p1;
    }
    return acc / double(records.size());
}

double estimate_g_plain(std::span<const MeasurementRecord> records, int qubit) {
    return 3.0 * estimate_c_j(records, qubit) - 1.0;
}

double estimate_g_enhanced(std::span<const MeasurementRecord> records, int qubit) {
    // E[B_j] = 2/3 exactly under the Haar average, so the control variate
    // costs no bias.
    return 3.0 * (estimate_c_j(records, qubit) - estimate_b_j(records, qubit) + 2.0 / 3.0) - 1.0;
}

std::vector<double> g_contributions(std::span<const MeasurementRecord> records, int qubit,
                                    Method method) {
    check_nonempty(records);
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        const auto [f0, f1] = marginal(rec, qubit);
        const auto [p0, p1] = ideal(rec, qubit);
        const double c = f0 * p0 + f1 * p1;
        if (method == Method::Plain) {
            out.push_back(3.0 * c - 1.0);
        } else {
            const double b = p0 * p0 + p1 * p1;
            out.push_back(3.0 * (c - b + 2.0 / 3.0) - 1.0);
        }
    }
    return out;
}

PairEstimate estimate_pair(std::span<const MeasurementRecord> records, int j, int jp) {
    check_nonempty(records);
    if (j == jp) throw std::invalid_argument("estimate_pair: need two distinct qubits");

    PairEstimate est;
    est.j = j;
    est.jp = jp;
    est.g_j = estimate_g_enhanced(records, j);
    est.g_jp = estimate_g_enhanced(records, jp);

    double acc = 0.0;
    for (const auto& rec : records) {
        const Eigen::Index mj = Eigen::Index(1) << (rec.n_qubits - j);
        const Eigen::Index mjp = Eigen::Index(1) << (rec.n_qubits - jp);
        // empirical two-bit marginal
        double f[2][2] = {{0, 0}, {0, 0}};
        for (const auto& [s, n] : rec.counts)
            f[(s & mj) ? 1 : 0][(s & mjp) ? 1 : 0] += double(n) / double(rec.shots);
        const auto [pj0, pj1] = ideal(rec, j);
        const auto [pq0, pq1] = ideal(rec, jp);
        const double pj[2] = {pj0, pj1};
        const double pq[2] = {pq0, pq1};
        double d = 0.0, b = 0.0;
        for (int a = 0; a < 2; ++a) {
            for (int bq = 0; bq < 2; ++bq) {
                const double prod = pj[a] * pq[bq];
                d += f[a][bq] * prod;
                b += prod * prod;
            }
        }
        // common-random-number correction; E[B] = (2/3)^2 for independent
        // single-qubit Haar factors
        acc += d - b;
    }
    const double d_hat = acc / double(records.size()) + 4.0 / 9.0;
    est.g_pair = 9.0 * d_hat - 1.0 - est.g_j - est.g_jp;
    return est;
}

double CalibrationTable::g_checked(int iteration, int qubit) const {
    const auto it = iterations.find(iteration);
    if (it == iterations.end())
        throw std::invalid_argument("calibration table: missing iteration " +
                                    std::to_string(iteration));
    const double g = it->second.g.at(std::size_t(qubit - 1));
    if (g <= 0.5)
        throw mitigation_guard_error("survival probability G = " + std::to_string(g) +
                                     " <= 1/2 for qubit " + std::to_string(qubit) +
                                     " in iteration " + std::to_string(iteration) +
                                     "; mitigation refused");
    return g;
}

std::vector<std::pair<int, int>> CalibrationTable::flag_low() const {
    std::vector<std::pair<int, int>> low;
    for (const auto& [i, cal] : iterations)
        for (std::size_t j = 0; j < cal.g.size(); ++j)
            if (cal.g[j] <= 0.5) low.emplace_back(i, int(j) + 1);
    return low;
}

CalibrationTable build_table(const std::vector<MeasurementRecord>& records, Method method,
                             const std::vector<std::pair<int, int>>& pairs) {
    if (records.empty()) throw std::invalid_argument("build_table: no records");

    CalibrationTable table;
    table.method = method;
    table.n_qubits = records.front().n_qubits;

    std::map<int, std::vector<MeasurementRecord>> grouped;
    for (const auto& rec : records) {
        if (rec.n_qubits != table.n_qubits)
            throw std::invalid_argument("build_table: mixed qubit counts");
        grouped[rec.iteration].push_back(rec);
    }

    for (auto& [i, recs] : grouped) {
        IterationCalibration cal;
        cal.g.resize(std::size_t(table.n_qubits));
        for (int j = 1; j <= table.n_qubits; ++j) {
            cal.g[std::size_t(j - 1)] = method == Method::Plain
                                            ? estimate_g_plain(recs, j)
                                            : estimate_g_enhanced(recs, j);
        }
        for (const auto& [j, jp] : pairs) cal.pairs.push_back(estimate_pair(recs, j, jp));
        table.iterations[i] = std::move(cal);
    }
    return table;
}

LocalityReport locality_report(const CalibrationTable& table) {
    LocalityReport report;

    std::set<std::pair<int, int>> keys;
    for (const auto& [i, cal] : table.iterations)
        for (const auto& p : cal.pairs) keys.insert({p.j, p.jp});

    for (const auto& [j, jp] : keys) {
        std::vector<double> r, pl_j, pl_jp;
        for (const auto& [i, cal] : table.iterations) {
            for (const auto& p : cal.pairs) {
                if (p.j != j || p.jp != jp) continue;
                r.push_back(p.g_pair - p.g_j * p.g_jp);
                pl_j.push_back(p.g_jp - p.g_pair);
                pl_jp.push_back(p.g_j - p.g_pair);
            }
        }
        if (r.empty()) continue;
        LocalityPair lp;
        lp.j = j;
        lp.jp = jp;
        lp.iterations = int(r.size());
        lp.has_error_bars = r.size() >= 2;
        lp.r_tilde = mean(r);
        lp.r_tilde_err = sdom(r);
        lp.p_nl = lp.r_tilde;
        lp.p_nl_err = lp.r_tilde_err;
        lp.p_l_j = mean(pl_j);
        lp.p_l_j_err = sdom(pl_j);
        lp.p_l_jp = mean(pl_jp);
        lp.p_l_jp_err = sdom(pl_jp);
        report.pairs.push_back(lp);
    }
    return report;
}

json table_to_json(const CalibrationTable& table) {
    json j;
    j["method"] = method_tag(table.method);
    j["n_qubits"] = table.n_qubits;
    json iters = json::object();
    for (const auto& [i, cal] : table.iterations) {
        json entry;
        entry["g"] = cal.g;
        json prs = json::array();
        for (const auto& p : cal.pairs)
            prs.push_back({{"j", p.j},
                           {"jp", p.jp},
                           {"g_j", p.g_j},
                           {"g_jp", p.g_jp},
                           {"g_pair", p.g_pair}});
        entry["pairs"] = prs;
        iters[std::to_string(i)] = entry;
    }
    j["iterations"] = iters;
    return j;
}

CalibrationTable table_from_json(const json& j) {
    CalibrationTable table;
    table.method = method_from_tag(j.at("method").get<std::string>());
    table.n_qubits = j.at("n_qubits").get<int>();
    for (const auto& [key, entry] : j.at("iterations").items()) {
        IterationCalibration cal;
        cal.g = entry.at("g").get<std::vector<double>>();
        if (entry.contains("pairs")) {
            for (const auto& p : entry["pairs"]) {
                PairEstimate pe;
                pe.j = p.at("j").get<int>();
                pe.jp = p.at("jp").get<int>();
                pe.g_j = p.at("g_j").get<double>();
                pe.g_jp = p.at("g_jp").get<double>();
                pe.g_pair = p.at("g_pair").get<double>();
                cal.pairs.push_back(pe);
            }
        }
        table.iterations[std::stoi(key)] = std::move(cal);
    }
    return table;
}

void write_table_file(const std::string& path, const CalibrationTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << table_to_json(table).dump(2) << '\n';
}

CalibrationTable read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    json j;
    in >> j;
    return table_from_json(j);
}

}  // namespace qfi::calibration
