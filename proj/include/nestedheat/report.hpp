#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nestedheat/harness.hpp"

namespace nh {

// Shortest round-trip decimal form of a double ('.' decimal point, C locale).
std::string format_double(double v);

// FNV-1a over raw bytes; used to fingerprint spec files in manifests.
std::uint64_t fnv1a(const std::string& bytes);

std::string read_file(const std::string& path);          // throws BadSpec on failure
void write_file(const std::string& path, const std::string& content);

// One CSV table; cells are written verbatim, so callers format numbers.  A
// nonempty preamble is emitted as a '#' comment line above the header (tool
// version and spec fingerprint).
struct Csv {
    std::string preamble;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string to_string() const;
};

// "<tool> <version> spec fnv1a:<hash>" stamp for output files.
std::string provenance_stamp(std::uint64_t spec_hash);

// Report serialization (stable field order, no timestamps).
std::string bound_report_json(const BoundReport& report, std::uint64_t spec_hash);
Csv worst_case_csv(const BoundReport& report);

// Run manifest content for a CLI invocation.
std::string manifest_json(const std::string& subcommand, const std::vector<std::string>& argv,
                          std::uint64_t seed, std::uint64_t spec_hash);

}  // namespace nh
