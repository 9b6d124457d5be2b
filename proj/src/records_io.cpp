#include "qfi/records_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace qfi::records_io {

namespace {
using json = nlohmann::json;
}

json record_to_json(const sampling::MeasurementRecord& rec) {
    json j;
    j["iter"] = rec.iteration;
    j["r"] = rec.unitary_index;
    j["purpose"] = sampling::purpose_tag(rec.purpose);
    json us = json::array();
    for (const auto& u : rec.unitaries) {
        json entries = json::array();
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                entries.push_back({u(r, c).real(), u(r, c).imag()});
        us.push_back(entries);
    }
    j["unitaries"] = us;
    json counts = json::object();
    for (const auto& [s, n] : rec.counts)
        counts[sampling::index_to_bits(s, rec.n_qubits)] = n;
    j["counts"] = counts;
    j["shots"] = rec.shots;
    return j;
}

sampling::MeasurementRecord record_from_json(const json& j) {
    sampling::MeasurementRecord rec;
    rec.iteration = j.at("iter").get<int>();
    rec.unitary_index = j.at("r").get<int>();
    rec.purpose = sampling::purpose_from_tag(j.at("purpose").get<std::string>());
    rec.shots = j.at("shots").get<int>();

    const json& us = j.at("unitaries");
    rec.n_qubits = static_cast<int>(us.size());
    for (const auto& entries : us) {
        if (entries.size() != 4)
            throw std::invalid_argument("record: unitary must have 4 entries");
        Mat2 u;
        for (int k = 0; k < 4; ++k)
            u(k / 2, k % 2) = Complex(entries[std::size_t(k)][0].get<double>(),
                                      entries[std::size_t(k)][1].get<double>());
        rec.unitaries.push_back(u);
    }

    int total = 0;
    for (const auto& [bits, n] : j.at("counts").items()) {
        if (static_cast<int>(bits.size()) != rec.n_qubits)
            throw std::invalid_argument("record: bitstring length mismatch");
        rec.counts[sampling::bits_to_index(bits)] = n.get<int>();
        total += n.get<int>();
    }
    if (total != rec.shots) throw std::invalid_argument("record: counts do not sum to shots");
    return rec;
}

void write_records(std::ostream& out, const std::vector<sampling::MeasurementRecord>& records) {
    for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
}

void write_records_file(const std::string& path,
                        const std::vector<sampling::MeasurementRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_records(out, records);
}

std::vector<sampling::MeasurementRecord> read_records(std::istream& in) {
    std::vector<sampling::MeasurementRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(json::parse(line)));
    }
    return records;
}

std::vector<sampling::MeasurementRecord> read_records_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return read_records(in);
}

}  // namespace qfi::records_io
