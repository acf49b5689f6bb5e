#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nestedheat/report.hpp"
#include "test_support.hpp"

#ifndef NESTEDHEAT_CLI_BIN
#error NESTEDHEAT_CLI_BIN must point at the command-line binary
#endif

using namespace nh;

namespace {

namespace fs = std::filesystem;

std::string gasket_spec() { return nhtest::config_path("gasket"); }

// Scratch directory per test case, removed on scope exit.
struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("nestedheat_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
    int code = -1;
    std::string out, err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

RunResult run_cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + NESTEDHEAT_CLI_BIN + " " + args +
                            " >" + (dir / "stdout.txt") + " 2>" + (dir / "stderr.txt");
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "stdout.txt");
    r.err = slurp(dir / "stderr.txt");
    return r;
}

// Data rows of an emitted CSV (preamble and header stripped).
std::vector<std::vector<std::string>> csv_rows(const std::string& path) {
    std::istringstream in(slurp(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool seen_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!seen_header) {
            seen_header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

std::vector<std::string> csv_header(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        return cells;
    }
    return {};
}

std::size_t column(const std::string& path, const std::string& name) {
    const auto header = csv_header(path);
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    FAIL("column " << name << " not found in " << path);
    return 0;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream(path, std::ios::binary) << content;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help exits cleanly and usage errors exit 64") {
    TempDir dir;
    const RunResult help = run_cli(dir, "--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("verify") != std::string::npos);

    CHECK(run_cli(dir, "frobnicate --spec x").code == 64);
    const RunResult flag = run_cli(dir, "generate --spec " + gasket_spec() + " --frobnicate");
    CHECK(flag.code == 64);
    CHECK(flag.err.find("Usage") != std::string::npos);
    CHECK(run_cli(dir, "generate").code == 64);  // --spec is required
    CHECK(run_cli(dir, "verify --spec " + gasket_spec() + " --claim nope").code == 64);
}

TEST_CASE("missing spec file fails with a diagnostic naming the path") {
    TempDir dir;
    const RunResult r = run_cli(dir, "generate --spec /nonexistent/missing.json --out " + (dir / "o"));
    CHECK(r.code == 1);
    CHECK(r.err.find("/nonexistent/missing.json") != std::string::npos);
}

TEST_CASE("generate emits stamped cell and vertex tables plus a manifest") {
    TempDir dir;
    const std::string out = dir / "gen";
    const RunResult r =
        run_cli(dir, "generate --spec " + gasket_spec() + " --M 0 --seed 5 --out " + out);
    REQUIRE(r.code == 0);

    const auto cells = csv_rows(out + "/cells.csv");
    REQUIRE(cells.size() == 9);  // level-0 cells of the J = 2 envelope
    CHECK(cells[0][column(out + "/cells.csv", "word")] == "1-1");
    CHECK(csv_rows(out + "/vertices.csv").size() == 15);

    const std::string preamble = slurp(out + "/cells.csv").substr(0, 200);
    CHECK(preamble.rfind("# ", 0) == 0);
    CHECK(preamble.find("fnv1a:") != std::string::npos);

    const std::string manifest = slurp(out + "/manifest.json");
    CHECK(manifest.find("\"subcommand\": \"generate\"") != std::string::npos);
    CHECK(manifest.find("\"seed\": 5") != std::string::npos);
    CHECK(manifest.find("\"version\"") != std::string::npos);
}

TEST_CASE("label emits one label per lattice vertex and one rotation per cell") {
    TempDir dir;
    const std::string out = dir / "lab";
    REQUIRE(run_cli(dir, "label --spec " + gasket_spec() + " --M 0 --out " + out).code == 0);
    CHECK(csv_rows(out + "/labelling.csv").size() == 15);
    CHECK(csv_rows(out + "/rotations.csv").size() == 9);
}

TEST_CASE("project folds a point into the base complex") {
    TempDir dir;
    const std::string out = dir / "proj";
    REQUIRE(run_cli(dir, "project --spec " + gasket_spec() + " --M 0 --x 2,0 --out " + out).code ==
            0);
    const std::string csv = out + "/project.csv";
    const auto rows = csv_rows(csv);
    REQUIRE(rows.size() == 1);
    const Vec2 p{std::stod(rows[0][column(csv, "pi1")]), std::stod(rows[0][column(csv, "pi2")])};
    CHECK(nhtest::gasket().on_fractal(p, 0));
}

TEST_CASE("metric resolves a pairs file to chain distances") {
    TempDir dir;
    write_text(dir / "pairs.csv", "x1,x2,y1,y2\n0,0,2,0\n0,0,1,0\n");
    const std::string out = dir / "met";
    REQUIRE(run_cli(dir, "metric --spec " + gasket_spec() + " --M 0 --pairs " + (dir / "pairs.csv") +
                             " --out " + out)
                .code == 0);
    const std::string csv = out + "/metric.csv";
    const auto rows = csv_rows(csv);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][column(csv, "d")] == "2");
    CHECK(rows[1][column(csv, "d")] == "1");
    CHECK(rows[0][column(csv, "lower_bound")] == "0");
}

TEST_CASE("constants reports the growth pair, separation, and chain bound") {
    TempDir dir;
    const std::string out = dir / "con";
    REQUIRE(run_cli(dir, "constants --spec " + gasket_spec() + " --out " + out).code == 0);
    const std::string csv = out + "/constants.csv";
    const auto rows = csv_rows(csv);
    REQUIRE(rows.size() == 1);
    const double c17_hat = std::stod(rows[0][column(csv, "c17_hat")]);
    const double c17_cert = std::stod(rows[0][column(csv, "c17_cert")]);
    const double c18_hat = std::stod(rows[0][column(csv, "c18_hat")]);
    const double c18_cert = std::stod(rows[0][column(csv, "c18_cert")]);
    CHECK(c17_cert > 0.0);
    CHECK(c17_cert < c17_hat);
    CHECK(c18_cert > c18_hat);
    CHECK(std::stod(rows[0][column(csv, "c19")]) == doctest::Approx(1.0));
    CHECK(rows[0][column(csv, "chain_n")] == "2");
}

TEST_CASE("fiber lists every shell with its class") {
    TempDir dir;
    const std::string out = dir / "fib";
    REQUIRE(run_cli(dir, "fiber --spec " + gasket_spec() +
                             " --M 0 --m-max 2 --y 0.3333333333333333,0 --out " + out)
                .code == 0);
    const std::string csv = out + "/fiber.csv";
    const auto rows = csv_rows(csv);
    REQUIRE(rows.size() == 27);  // base + 2 touching siblings + 6 + 18
    const std::size_t cls = column(csv, "class");
    const std::size_t shell = column(csv, "m");
    int base = 0, b = 0, c = 0, a1 = 0, a2 = 0;
    for (const auto& row : rows) {
        if (row[cls] == "base") ++base;
        if (row[cls] == "B") ++b;
        if (row[cls] == "C") ++c;
        if (row[cls] == "A" && row[shell] == "1") ++a1;
        if (row[cls] == "A" && row[shell] == "2") ++a2;
    }
    CHECK(base == 1);
    CHECK(b == 0);
    CHECK(c == 2);
    CHECK(a1 == 6);
    CHECK(a2 == 18);
}

TEST_CASE("density at a lattice vertex dominates the on-diagonal profile") {
    TempDir dir;
    const std::string out = dir / "dens";
    REQUIRE(run_cli(dir, "density --spec " + gasket_spec() + " --t 1 --x 0,0 --y 0,0 --M 0 --out " +
                             out)
                .code == 0);
    const std::string csv = out + "/density.csv";
    const auto rows = csv_rows(csv);
    REQUIRE(rows.size() == 1);
    const double gM = std::stod(rows[0][column(csv, "gM")]);
    const double g_base = std::stod(rows[0][column(csv, "g_base")]);
    const double tail = std::stod(rows[0][column(csv, "tail_bound")]);
    CHECK(g_base == doctest::Approx(1.0));  // t^{-d_s/2} at t = 1
    CHECK(gM >= 1.0);
    CHECK(tail < 1e-9 * gM);
}

TEST_CASE("simulation backend beyond the surrogate is reported unavailable") {
    TempDir dir;
    const RunResult r = run_cli(dir, "density --spec " + gasket_spec() +
                                         " --t 1 --x 0,0 --y 0,0 --backend mc --out " + (dir / "o"));
    CHECK(r.code == 1);
    CHECK(r.err.find("MCUnavailable") != std::string::npos);
}

TEST_CASE("simulate bins folded endpoints and stamps the run") {
    TempDir dir;
    const std::string out = dir / "sim";
    REQUIRE(run_cli(dir, "simulate --spec " + gasket_spec() +
                             " --level -3 --steps 200 --walks 40 --M 0 --bin-level -1 --x0 0,0" +
                             " --seed 3 --out " + out)
                .code == 0);
    const std::string csv = out + "/histogram.csv";
    const auto rows = csv_rows(csv);
    REQUIRE(!rows.empty());
    double mass = 0;
    for (const auto& row : rows) {
        CHECK(std::stod(row[column(csv, "density")]) > 0.0);
        mass += std::stod(row[column(csv, "mass")]);
    }
    CHECK(mass > 0.0);
    const std::string meta = slurp(out + "/run.json");
    CHECK(meta.find("\"discard_fraction\"") != std::string::npos);
    CHECK(meta.find("\"time_step\"") != std::string::npos);
    CHECK(meta.find("\"seed\": 3") != std::string::npos);
}

TEST_CASE("enumeration cap from the environment is honoured") {
    TempDir dir;
    const RunResult r = run_cli(dir, "generate --spec " + gasket_spec() + " --M 0 --J 3 --out " +
                                         (dir / "o"),
                                "NESTEDHEAT_CAP=5");
    CHECK(r.code == 1);
    CHECK(r.err.find("cap") != std::string::npos);
}

TEST_CASE("verify card passes on the triangle lattice") {
    TempDir dir;
    const std::string out = dir / "card";
    const RunResult r =
        run_cli(dir, "verify --claim card --spec " + gasket_spec() + " --out " + out);
    REQUIRE(r.code == 0);
    const std::string report = slurp(out + "/report.json");
    CHECK(report.find("\"claim\": \"card\"") != std::string::npos);
    CHECK(report.find("\"pass\": true") != std::string::npos);
    CHECK(report.find("\"version\"") != std::string::npos);
    CHECK(report.find("fnv1a:") != std::string::npos);
    const std::string worst = slurp(out + "/worst.csv");
    CHECK(worst.rfind("# ", 0) == 0);
    CHECK(worst.find("fnv1a:") != std::string::npos);
}

TEST_CASE("verify runs are byte-deterministic for a fixed seed") {
    TempDir dir;
    write_text(dir / "grid.json",
               "{\"t_factors\": [0.02, 1.0, 8.0], \"M_values\": [0], "
               "\"pairs_per_M\": 4, \"sample_depth\": 5}\n");
    const std::string common = "verify --claim thm31 --spec " + gasket_spec() + " --grid " +
                               (dir / "grid.json") + " --seed 7 --out ";
    REQUIRE(run_cli(dir, common + (dir / "a")).code == 0);
    REQUIRE(run_cli(dir, common + (dir / "b")).code == 0);
    CHECK(slurp(dir / "a/report.json") == slurp(dir / "b/report.json"));
    CHECK(slurp(dir / "a/worst.csv") == slurp(dir / "b/worst.csv"));
    CHECK(slurp(dir / "a/report.json").find("\"pass\": true") != std::string::npos);
}

TEST_CASE("verify reports an out-of-band claim with exit 2") {
    TempDir dir;
    // stability 1.5 is tighter than the intermediate-regime band on this grid
    write_text(dir / "grid.json",
               "{\"t_factors\": [0.02, 1.0, 8.0], \"M_values\": [0], "
               "\"pairs_per_M\": 4, \"sample_depth\": 5, \"stability\": 1.5}\n");
    const RunResult r = run_cli(dir, "verify --claim cor37 --spec " + gasket_spec() + " --grid " +
                                         (dir / "grid.json") + " --seed 2026 --out " + (dir / "o"));
    CHECK(r.code == 2);
    CHECK(slurp(dir / "o/report.json").find("\"pass\": false") != std::string::npos);
}

}  // TEST_SUITE
