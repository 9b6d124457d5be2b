#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qfi/sampling.hpp"

namespace qfi::records_io {

// One JSON object per line and per (iteration, unitary):
//   {"iter": i, "r": r, "purpose": "cal"|"est",
//    "unitaries": [[[re,im] x4] xN], "counts": {"0101...": n}, "shots": N_M}
// Unitary entries are row-major (u00, u01, u10, u11); the leftmost bitstring
// character is qubit 1.
nlohmann::json record_to_json(const sampling::MeasurementRecord& rec);
sampling::MeasurementRecord record_from_json(const nlohmann::json& j);

void write_records(std::ostream& out, const std::vector<sampling::MeasurementRecord>& records);
void write_records_file(const std::string& path,
                        const std::vector<sampling::MeasurementRecord>& records);

std::vector<sampling::MeasurementRecord> read_records(std::istream& in);
std::vector<sampling::MeasurementRecord> read_records_file(const std::string& path);

}  // namespace qfi::records_io
