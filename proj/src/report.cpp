#include "nestedheat/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nestedheat/version.hpp"

namespace nh {
namespace {

// JSON has no inf/nan literals; encode nonfinite values as strings so the
// far-tail logs survive serialization.
nlohmann::ordered_json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_double(v);
}

nlohmann::ordered_json worst_case_json(const WorstCase& w) {
    nlohmann::ordered_json j;
    j["t"] = json_number(w.t);
    j["M"] = w.M;
    j["x"] = {json_number(w.x.x), json_number(w.x.y)};
    j["y"] = {json_number(w.y.x), json_number(w.y.y)};
    j["log_ratio"] = json_number(w.log_ratio);
    return j;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::BadSpec, "cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::BadSpec, "cannot write " + path);
    out << content;
}

std::string Csv::to_string() const {
    std::ostringstream os;
    if (!preamble.empty()) os << "# " << preamble << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
    return os.str();
}

std::string provenance_stamp(std::uint64_t spec_hash) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "nestedheat %s spec fnv1a:%016llx", kVersion,
                  static_cast<unsigned long long>(spec_hash));
    return buf;
}

std::string bound_report_json(const BoundReport& report, std::uint64_t spec_hash) {
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "fnv1a:%016llx", static_cast<unsigned long long>(spec_hash));
    j["spec_hash"] = hex;
    j["claim"] = report.claim;
    j["system"] = report.system;
    j["grid"]["t_factors"] = nlohmann::ordered_json::array();
    for (double f : report.grid.t_factors) j["grid"]["t_factors"].push_back(json_number(f));
    j["grid"]["M_values"] = report.grid.M_values;
    j["grid"]["pairs_per_M"] = report.grid.pairs_per_M;
    j["grid"]["sample_depth"] = report.grid.sample_depth;
    j["grid"]["seed"] = report.grid.seed;
    j["grid"]["stability"] = json_number(report.grid.stability);
    j["log_min_ratio"] = json_number(report.log_min_ratio);
    j["log_max_ratio"] = json_number(report.log_max_ratio);
    j["per_M_log_min"] = nlohmann::ordered_json::array();
    for (double v : report.per_M_log_min) j["per_M_log_min"].push_back(json_number(v));
    j["per_M_log_max"] = nlohmann::ordered_json::array();
    for (double v : report.per_M_log_max) j["per_M_log_max"].push_back(json_number(v));
    j["worst_low"] = worst_case_json(report.worst_low);
    j["worst_high"] = worst_case_json(report.worst_high);
    j["stats"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.stats) j["stats"][k] = json_number(v);
    j["notes"] = report.notes;
    j["pass"] = report.pass;
    return j.dump(2) + "\n";
}

Csv worst_case_csv(const BoundReport& report) {
    Csv csv;
    csv.header = {"end", "t", "M", "x1", "x2", "y1", "y2", "log_ratio"};
    for (const auto& [name, w] :
         {std::pair<const char*, const WorstCase&>{"min", report.worst_low},
          std::pair<const char*, const WorstCase&>{"max", report.worst_high}}) {
        csv.rows.push_back({name, format_double(w.t), std::to_string(w.M), format_double(w.x.x),
                            format_double(w.x.y), format_double(w.y.x), format_double(w.y.y),
                            format_double(w.log_ratio)});
    }
    return csv;
}

std::string manifest_json(const std::string& subcommand, const std::vector<std::string>& argv,
                          std::uint64_t seed, std::uint64_t spec_hash) {
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["argv"] = argv;
    j["seed"] = seed;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                  static_cast<unsigned long long>(spec_hash));
    j["spec_hash"] = buf;
    return j.dump(2) + "\n";
}

}  // namespace nh
