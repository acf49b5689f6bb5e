#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nestedheat/graph_metric.hpp"
#include "nestedheat/harness.hpp"
#include "nestedheat/random_walk.hpp"
#include "nestedheat/report.hpp"
#include "nestedheat/version.hpp"

namespace {

using namespace nh;

struct RunContext {
    FractalSystem sys;
    std::uint64_t spec_hash = 0;
    std::string out_dir = {};
    std::uint64_t seed = 1;
    std::int64_t cap = kDefaultCellCap;
    std::string stamp = {};

    void emit(const std::string& name, const std::string& content) const {
        write_file(out_dir + "/" + name, content);
    }
    void emit(const std::string& name, Csv csv) const {
        csv.preamble = stamp;
        emit(name, csv.to_string());
    }
};

Vec2 parse_point(const std::string& s) {
    std::istringstream is(s);
    Vec2 p;
    char comma = 0;
    if (!(is >> p.x >> comma >> p.y) || comma != ',' || !(is >> std::ws).eof())
        throw CLI::ValidationError("expected a point as 'x,y', got '" + s + "'");
    return p;
}

std::string word_string(const CellAddress& a) {
    std::string s;
    for (std::size_t i = 0; i < a.word.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(static_cast<int>(a.word[i]));
    }
    return s.empty() ? "(base)" : s;
}

std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << h;
    return os.str();
}

double fitted_c18(const RunContext& ctx) {
    const GrowthConstants fit = growth_constants(ctx.sys, {-1, 0, 1}, 50,
                                                 Rng::derive(ctx.seed, 0xC18));
    return fit.c18_cert;
}

template <typename F>
double density_with_ladder(const RunContext& ctx, int M, F&& eval) {
    // Retry with a deeper labelling if the series outruns the envelope.
    for (int extra : {6, 9, 12}) {
        const Labelling lab = construct_labelling(ctx.sys, M, M + extra, ctx.cap);
        try {
            return eval(lab);
        } catch (const Error& e) {
            if (e.code() != Errc::UnlabelledCell || extra == 12) throw;
        }
    }
    fail(Errc::NoConvergence, "series needs more shells than the deepest envelope");
}

int cmd_generate(const RunContext& ctx, int M, int J) {
    Csv cells;
    cells.header = {"rank", "word", "tau1", "tau2"};
    std::int64_t rank = 0;
    visit_cells(
        ctx.sys, M, J,
        [&](const CellAddress& a, const Vec2& tau) {
            cells.rows.push_back({std::to_string(rank++), word_string(a), format_double(tau.x),
                                  format_double(tau.y)});
        },
        ctx.cap);
    ctx.emit("cells.csv", cells);

    const VertexLattice lattice = vertex_lattice(ctx.sys, M, J, ctx.cap);
    Csv verts;
    verts.header = {"id", "x1", "x2", "rank"};
    for (std::size_t i = 0; i < lattice.table.size(); ++i) {
        const Vec2& p = lattice.table.points()[i];
        verts.rows.push_back({std::to_string(i), format_double(p.x), format_double(p.y),
                              std::to_string(lattice.rank[i])});
    }
    ctx.emit("vertices.csv", verts);
    return 0;
}

int cmd_label(const RunContext& ctx, int M, int J) {
    const Labelling lab = construct_labelling(ctx.sys, M, J, ctx.cap);
    const GlpReport check = verify_glp(ctx.sys, lab);
    if (!check.ok) fail(Errc::NoGLP, "labelling failed independent re-verification");

    Csv verts;
    verts.header = {"vertex_x", "vertex_y", "level", "label"};
    for (std::size_t i = 0; i < lab.verts.size(); ++i) {
        const Vec2& p = lab.verts.points()[i];
        verts.rows.push_back(
            {format_double(p.x), format_double(p.y), std::to_string(M), std::to_string(lab.label[i])});
    }
    ctx.emit("labelling.csv", verts);

    Csv rots;
    rots.header = {"rank", "word", "rotation"};
    std::int64_t rank = 0;
    visit_cells(
        ctx.sys, M, J,
        [&](const CellAddress& a, const Vec2&) {
            rots.rows.push_back({std::to_string(rank), word_string(a),
                                 std::to_string(lab.cell_rotation[static_cast<std::size_t>(rank)])});
            ++rank;
        },
        ctx.cap);
    ctx.emit("rotations.csv", rots);
    return 0;
}

int cmd_project(const RunContext& ctx, int M, int J, const Vec2& x) {
    const Labelling lab = construct_labelling(ctx.sys, M, J, ctx.cap);
    const Vec2 p = project(ctx.sys, lab, x, M);
    Csv csv;
    csv.header = {"x1", "x2", "M", "pi1", "pi2"};
    csv.rows.push_back({format_double(x.x), format_double(x.y), std::to_string(M),
                        format_double(p.x), format_double(p.y)});
    ctx.emit("project.csv", csv);
    return 0;
}

int cmd_metric(const RunContext& ctx, int M, int J, const std::vector<std::pair<Vec2, Vec2>>& pairs) {
    const CellGraph graph = build_cell_graph(ctx.sys, M, J, ctx.cap);
    Csv csv;
    csv.header = {"x1", "x2", "y1", "y2", "M", "d", "lower_bound"};
    for (const auto& [x, y] : pairs) {
        const MetricResult r = d_M(ctx.sys, graph, x, y);
        csv.rows.push_back({format_double(x.x), format_double(x.y), format_double(y.x),
                            format_double(y.y), std::to_string(M), std::to_string(r.d),
                            r.lower_bound ? "1" : "0"});
    }
    ctx.emit("metric.csv", csv);
    return 0;
}

int cmd_constants(const RunContext& ctx, const std::vector<int>& levels, int samples) {
    const GrowthConstants fit = growth_constants(ctx.sys, levels, samples, ctx.seed);
    const double c19 = separation_constant(ctx.sys, 0);
    const int chain_n = kumagai_n(ctx.sys, levels[levels.size() / 2]);
    Csv csv;
    csv.header = {"c17_hat", "c18_hat", "c17_cert", "c18_cert", "c19", "chain_n"};
    csv.rows.push_back({format_double(fit.c17_hat), format_double(fit.c18_hat),
                        format_double(fit.c17_cert), format_double(fit.c18_cert),
                        format_double(c19), std::to_string(chain_n)});
    ctx.emit("constants.csv", csv);
    return 0;
}

int cmd_fiber(const RunContext& ctx, int M, int m_max, const Vec2& y) {
    const Labelling lab = construct_labelling(ctx.sys, M, M + m_max + 1, ctx.cap);
    const FiberDecomposition fib = fiber(ctx.sys, lab, y, M, m_max, ctx.cap);
    Csv csv;
    csv.header = {"m", "y1", "y2", "class", "z1", "z2"};
    csv.rows.push_back({"0", format_double(y.x), format_double(y.y), "base", "", ""});
    for (const Vec2& p : fib.B)
        csv.rows.push_back({"0", format_double(p.x), format_double(p.y), "B", "", ""});
    for (const auto& c : fib.C)
        csv.rows.push_back({"0", format_double(c.point.x), format_double(c.point.y), "C",
                            format_double(c.contact.x), format_double(c.contact.y)});
    for (int m = 1; m <= m_max; ++m) {
        for (const Vec2& p : fib.A[static_cast<std::size_t>(m)])
            csv.rows.push_back(
                {std::to_string(m), format_double(p.x), format_double(p.y), "A", "", ""});
    }
    ctx.emit("fiber.csv", csv);
    return 0;
}

int cmd_density(const RunContext& ctx, double t, const Vec2& x, const Vec2& y, int M,
                double rel_tol, const std::string& backend, double c_eval) {
    KernelParams params;
    params.dims = ctx.sys.dims();
    params.c_eval = c_eval;
    params.c18 = fitted_c18(ctx);
    if (backend == "mc") g_free(params, t, x, y, FreeKernelBackend::mc);  // reports the gap
    DensityOptions opts;
    opts.rel_tol = rel_tol;
    DensityResult r{};
    density_with_ladder(ctx, M, [&](const Labelling& lab) {
        r = g_M_density(params, ctx.sys, lab, t, x, y, M, opts);
        return r.value;
    });
    Csv csv;
    csv.header = {"t",  "M",  "x1", "x2",     "y1",     "y2",
                  "gM", "g1", "g2", "g_base", "m_used", "tail_bound"};
    csv.rows.push_back({format_double(t), std::to_string(M), format_double(x.x),
                        format_double(x.y), format_double(y.x), format_double(y.y),
                        format_double(r.value), format_double(r.g1), format_double(r.g2),
                        format_double(r.g_base), std::to_string(r.m_used),
                        format_double(r.tail_bound)});
    ctx.emit("density.csv", csv);
    return 0;
}

int cmd_simulate(const RunContext& ctx, int level, std::int64_t steps, std::int64_t walks, int M,
                 int bin_level, int J, const Vec2& x0) {
    const WalkGraph graph = build_walk_graph(ctx.sys, level, J, ctx.cap);
    const int start = graph.verts.find(x0);
    if (start < 0) fail(Errc::NotOnFractal, "start point is not a lattice vertex of the envelope");
    const Labelling lab = construct_labelling(ctx.sys, M, std::max(J, M + 2), ctx.cap);

    std::vector<int> finals(static_cast<std::size_t>(walks), -1);
    const std::int64_t absorbed = run_ensemble(
        graph, start, walks, ctx.seed, {steps},
        [&](std::int64_t w, int, int v) { finals[static_cast<std::size_t>(w)] = v; });

    // Bin the folded endpoints of the surviving walks.
    std::vector<std::vector<std::int64_t>> bins_of(graph.verts.size());
    std::vector<bool> known(graph.verts.size(), false);
    std::map<std::int64_t, std::pair<std::int64_t, double>> hist;  // bin -> (count, mass)
    std::int64_t kept = 0;
    for (std::int64_t w = 0; w < walks; ++w) {
        const int v = finals[static_cast<std::size_t>(w)];
        if (graph.absorbing[static_cast<std::size_t>(v)]) continue;
        if (!known[static_cast<std::size_t>(v)]) {
            const Vec2 p = project(ctx.sys, lab, graph.verts.points()[static_cast<std::size_t>(v)], M);
            for (const CellAddress& a : containing_cells(ctx.sys, p, bin_level, M))
                bins_of[static_cast<std::size_t>(v)].push_back(address_rank(ctx.sys, a));
            known[static_cast<std::size_t>(v)] = true;
        }
        const auto& bins = bins_of[static_cast<std::size_t>(v)];
        for (std::int64_t b : bins) {
            hist[b].first += 1;
            hist[b].second += 1.0 / static_cast<double>(bins.size());
        }
        ++kept;
    }
    if (kept == 0) fail(Errc::InsufficientSamples, "every walk was absorbed before the endpoint");

    const double mu = std::pow(static_cast<double>(ctx.sys.N()), bin_level);
    Csv csv;
    csv.header = {"bin", "count", "mass", "density"};
    for (const auto& [b, cm] : hist) {
        csv.rows.push_back({std::to_string(b), std::to_string(cm.first), format_double(cm.second),
                            format_double(cm.second / static_cast<double>(kept) / mu)});
    }
    ctx.emit("histogram.csv", csv);

    nlohmann::ordered_json meta;
    meta["version"] = kVersion;
    meta["spec_hash"] = hash_hex(ctx.spec_hash);
    meta["seed"] = ctx.seed;
    meta["discard_fraction"] =
        static_cast<double>(absorbed) / static_cast<double>(walks);
    meta["time_step"] = graph.time_step;
    ctx.emit("run.json", meta.dump(2) + "\n");
    return 0;
}

GridSpec load_grid(const std::string& path, std::uint64_t seed) {
    GridSpec grid = default_grid(seed);
    if (path.empty()) return grid;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::BadSpec, "grid file " + path + ": " + e.what());
    }
    if (j.contains("t_factors")) grid.t_factors = j["t_factors"].get<std::vector<double>>();
    if (j.contains("M_values")) grid.M_values = j["M_values"].get<std::vector<int>>();
    if (j.contains("pairs_per_M")) grid.pairs_per_M = j["pairs_per_M"].get<int>();
    if (j.contains("sample_depth")) grid.sample_depth = j["sample_depth"].get<int>();
    if (j.contains("stability")) grid.stability = j["stability"].get<double>();
    return grid;
}

int cmd_verify(const RunContext& ctx, const std::string& claim, const std::string& grid_path) {
    const GridSpec grid = load_grid(grid_path, ctx.seed);
    BoundReport report;
    if (claim == "metric") {
        report = check_metric(ctx.sys, grid.M_values, grid.pairs_per_M, ctx.seed);
    } else if (claim == "card") {
        // One sub-check per level; a system without a consistent labelling
        // falls back to the label-free census of the same counts.
        report.claim = "card";
        report.pass = true;
        for (std::size_t i = 0; i < grid.M_values.size(); ++i) {
            const int M = grid.M_values[i];
            BoundReport sub;
            try {
                const Labelling lab = construct_labelling(ctx.sys, M, M + 5, ctx.cap);
                std::vector<Vec2> ys;
                Rng rng(Rng::derive(ctx.seed, 7000 + i));
                for (int s = 0; s < 20; ++s) ys.push_back(sample_point(ctx.sys, M, 6, rng));
                sub = check_cardinalities(ctx.sys, &lab, M, 4, ys);
            } catch (const NoGlpError&) {
                sub = check_cardinalities(ctx.sys, nullptr, M, 4, {});
                sub.notes.push_back("no consistent labelling exists; counts from address census");
            }
            report.system = sub.system;
            report.pass = report.pass && sub.pass;
            for (const auto& [k, v] : sub.stats)
                report.stats["M" + std::to_string(M) + "_" + k] = v;
            for (const auto& n : sub.notes)
                report.notes.push_back("M=" + std::to_string(M) + ": " + n);
        }
        report.grid = grid;
    } else {
        KernelParams params;
        params.dims = ctx.sys.dims();
        params.c18 = fitted_c18(ctx);
        // One labelling per level, deep enough for the series at every t.
        std::vector<Labelling> labs;
        for (int M : grid.M_values) labs.push_back(construct_labelling(ctx.sys, M, M + 11, ctx.cap));
        // The scans take a single labelling; give them the one for the first
        // level and re-run per level to keep envelopes aligned.
        const auto scan_per_level = [&](auto&& scan_fn) {
            BoundReport merged;
            bool first = true;
            bool sub_pass = true;
            for (std::size_t i = 0; i < grid.M_values.size(); ++i) {
                GridSpec g1 = grid;
                g1.M_values = {grid.M_values[i]};
                BoundReport r = scan_fn(params, ctx.sys, labs[i], g1);
                sub_pass = sub_pass && r.pass;
                if (first) {
                    merged = r;
                    first = false;
                } else {
                    merged.per_M_log_min.push_back(r.per_M_log_min[0]);
                    merged.per_M_log_max.push_back(r.per_M_log_max[0]);
                    if (r.log_min_ratio < merged.log_min_ratio) {
                        merged.log_min_ratio = r.log_min_ratio;
                        merged.worst_low = r.worst_low;
                    }
                    if (r.log_max_ratio > merged.log_max_ratio) {
                        merged.log_max_ratio = r.log_max_ratio;
                        merged.worst_high = r.worst_high;
                    }
                }
            }
            merged.grid = grid;
            // Re-apply the stability verdict across the merged levels.
            const auto drift = [](const std::vector<double>& v) {
                double lo = v[0], hi = v[0];
                for (double x : v) {
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
                return hi - lo;
            };
            const double dmin = drift(merged.per_M_log_min);
            const double dmax = drift(merged.per_M_log_max);
            merged.stats["drift_min"] = std::exp(dmin);
            merged.stats["drift_max"] = std::exp(dmax);
            merged.pass = sub_pass && std::isfinite(merged.log_min_ratio) &&
                          std::isfinite(merged.log_max_ratio) &&
                          dmin < std::log(grid.stability) && dmax < std::log(grid.stability);
            return merged;
        };
        if (claim == "thm31") {
            report = scan_per_level([](const KernelParams& p, const FractalSystem& s,
                                       const Labelling& l, const GridSpec& g) {
                return scan_theorem_1(p, s, l, g);
            });
        } else if (claim == "thm32") {
            report = scan_per_level([](const KernelParams& p, const FractalSystem& s,
                                       const Labelling& l, const GridSpec& g) {
                return scan_theorem_2(p, s, l, g);
            });
        } else if (claim == "lem36") {
            report = scan_per_level([](const KernelParams& p, const FractalSystem& s,
                                       const Labelling& l, const GridSpec& g) {
                return scan_lemma_tail(p, s, l, g);
            });
        } else {  // cor37: per-regime bands need the pooled grid in one pass
            BoundReport merged;
            bool first = true;
            for (std::size_t i = 0; i < grid.M_values.size(); ++i) {
                GridSpec g1 = grid;
                g1.M_values = {grid.M_values[i]};
                BoundReport r = scan_corollary(params, ctx.sys, labs[i], g1);
                if (first) {
                    merged = r;
                    first = false;
                } else {
                    merged.pass = merged.pass && r.pass;
                    for (const auto& [k, v] : r.stats) {
                        if (k.find("_log_lo") != std::string::npos)
                            merged.stats[k] = std::min(merged.stats.count(k) ? merged.stats[k] : v, v);
                        else if (k.find("_log_hi") != std::string::npos)
                            merged.stats[k] = std::max(merged.stats.count(k) ? merged.stats[k] : v, v);
                        else if (k.find("_count") != std::string::npos)
                            merged.stats[k] += v;
                    }
                }
            }
            for (const char* r : {"A", "B", "C"}) {
                const std::string lo = std::string(r) + "_log_lo";
                const std::string hi = std::string(r) + "_log_hi";
                if (merged.stats.count(lo)) {
                    const double spread = merged.stats[hi] - merged.stats[lo];
                    merged.stats[std::string(r) + "_band"] = std::exp(spread);
                    if (!(spread < std::log(grid.stability))) merged.pass = false;
                }
            }
            merged.grid = grid;
            report = merged;
        }
        std::ostringstream note;
        note << "metric growth constant from internal fit: c18_cert=" << format_double(params.c18);
        report.notes.push_back(note.str());
    }
    ctx.emit("report.json", bound_report_json(report, ctx.spec_hash));
    Csv worst = worst_case_csv(report);
    worst.preamble = ctx.stamp;
    ctx.emit("worst.csv", worst.to_string());
    return report.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nested fractal heat kernel toolkit"};
    app.require_subcommand(1);

    std::string spec_path, out_dir = "out", grid_path, backend = "surrogate", x_str, y_str,
                x0_str = "0,0", pairs_path;
    std::uint64_t seed = 1;
    int jobs = 1, M = 0, J = INT_MIN, m_max = 4, bin_level = -2, level = -4, samples = 200;
    std::int64_t steps = 1000, walks = 1000;
    double t = 1.0, rel_tol = 1e-9, c_eval = 1.0;
    std::vector<int> levels{-1, 0, 1};
    std::string claim;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--spec", spec_path, "system description file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "random seed recorded in all artifacts");
        sub->add_option("--jobs", jobs, "worker bound; 1 forces sequential mode")
            ->check(CLI::PositiveNumber);
        return sub;
    };

    auto* generate = add_common(app.add_subcommand("generate", "enumerate cells and vertices"));
    generate->add_option("--M", M, "cell level");
    generate->add_option("--J", J, "envelope level (default M+2)");

    auto* label = add_common(app.add_subcommand("label", "construct and emit the labelling"));
    label->add_option("--M", M, "lattice level");
    label->add_option("--J", J, "envelope level (default M+2)");

    auto* project_cmd = add_common(app.add_subcommand("project", "fold a point into the base complex"));
    project_cmd->add_option("--M", M, "base complex level");
    project_cmd->add_option("--J", J, "envelope level (default M+2)");
    project_cmd->add_option("--x", x_str, "point to fold, as 'x,y'")->required();

    auto* metric = add_common(app.add_subcommand("metric", "chain distances between point pairs"));
    metric->add_option("--M", M, "cell level");
    metric->add_option("--J", J, "envelope level (default M+2)");
    metric->add_option("--x", x_str, "first point 'x,y'");
    metric->add_option("--y", y_str, "second point 'x,y'");
    metric->add_option("--pairs", pairs_path, "CSV of pairs: x1,x2,y1,y2");

    auto* constants = add_common(app.add_subcommand("constants", "fit metric growth constants"));
    constants->add_option("--levels", levels, "levels to scan");
    constants->add_option("--samples", samples, "pairs per level")->check(CLI::PositiveNumber);

    auto* fiber_cmd = add_common(app.add_subcommand("fiber", "enumerate a projection fiber"));
    fiber_cmd->add_option("--M", M, "base complex level");
    fiber_cmd->add_option("--m-max", m_max, "deepest shell");
    fiber_cmd->add_option("--y", y_str, "base point 'x,y'")->required();

    auto* density = add_common(app.add_subcommand("density", "reflected transition density"));
    density->add_option("--t", t, "time")->required();
    density->add_option("--x", x_str, "first point 'x,y'")->required();
    density->add_option("--y", y_str, "second point 'x,y'")->required();
    density->add_option("--M", M, "base complex level");
    density->add_option("--rel-tol", rel_tol, "series tolerance");
    density->add_option("--backend", backend, "free kernel backend")
        ->check(CLI::IsMember({"surrogate", "mc"}));
    density->add_option("--c-eval", c_eval, "exponent constant of the free profile");

    auto* simulate_cmd = add_common(app.add_subcommand("simulate", "random walk ensemble"));
    simulate_cmd->add_option("--level", level, "lattice level of the walk");
    simulate_cmd->add_option("--steps", steps, "steps per walk")->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--walks", walks, "ensemble size")->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--M", M, "base complex level for folding");
    simulate_cmd->add_option("--bin-level", bin_level, "histogram cell level");
    simulate_cmd->add_option("--J", J, "free walk envelope (default M+1)");
    simulate_cmd->add_option("--x0", x0_str, "start vertex 'x,y'");

    auto* verify = add_common(app.add_subcommand("verify", "run a claim check"));
    verify->add_option("--claim", claim, "claim id")
        ->required()
        ->check(CLI::IsMember({"thm31", "thm32", "lem36", "cor37", "card", "metric"}));
    verify->add_option("--grid", grid_path, "grid description file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 64;
    }

    try {
        RunContext ctx{FractalSystem::build(load_system_spec(spec_path))};
        const std::string spec_bytes = read_file(spec_path);
        ctx.spec_hash = fnv1a(spec_bytes);
        ctx.out_dir = out_dir;
        ctx.seed = seed;
        ctx.stamp = provenance_stamp(ctx.spec_hash);
        if (const char* cap_env = std::getenv("NESTEDHEAT_CAP")) {
            ctx.cap = std::stoll(cap_env);
            if (ctx.cap <= 0) fail(Errc::BadSpec, "NESTEDHEAT_CAP must be positive");
        }
        std::filesystem::create_directories(out_dir);

        std::vector<std::string> argv_strings(argv, argv + argc);
        const CLI::App* sub = app.get_subcommands().front();
        ctx.emit("manifest.json",
                 manifest_json(sub->get_name(), argv_strings, seed, ctx.spec_hash));

        if (J == INT_MIN) J = sub->get_name() == "simulate" ? M + 1 : M + 2;

        if (sub == generate) return cmd_generate(ctx, M, J);
        if (sub == label) return cmd_label(ctx, M, J);
        if (sub == project_cmd) return cmd_project(ctx, M, J, parse_point(x_str));
        if (sub == metric) {
            std::vector<std::pair<Vec2, Vec2>> pairs;
            if (!pairs_path.empty()) {
                std::istringstream in(read_file(pairs_path));
                std::string line;
                while (std::getline(in, line)) {
                    if (line.empty() || line[0] == '#' || line.rfind("x1", 0) == 0) continue;
                    const auto c1 = line.find(',');
                    const auto c2 = line.find(',', c1 + 1);
                    const auto c3 = line.find(',', c2 + 1);
                    if (c3 == std::string::npos)
                        fail(Errc::BadSpec, "pairs row needs x1,x2,y1,y2: " + line);
                    pairs.emplace_back(
                        parse_point(line.substr(0, c1) + "," + line.substr(c1 + 1, c2 - c1 - 1)),
                        parse_point(line.substr(c2 + 1, c3 - c2 - 1) + "," + line.substr(c3 + 1)));
                }
            }
            if (!x_str.empty() && !y_str.empty())
                pairs.emplace_back(parse_point(x_str), parse_point(y_str));
            if (pairs.empty())
                fail(Errc::GridEmpty, "metric needs --x/--y or a --pairs file");
            return cmd_metric(ctx, M, J, pairs);
        }
        if (sub == constants) return cmd_constants(ctx, levels, samples);
        if (sub == fiber_cmd) return cmd_fiber(ctx, M, m_max, parse_point(y_str));
        if (sub == density)
            return cmd_density(ctx, t, parse_point(x_str), parse_point(y_str), M, rel_tol, backend,
                               c_eval);
        if (sub == simulate_cmd)
            return cmd_simulate(ctx, level, steps, walks, M, bin_level, J, parse_point(x0_str));
        if (sub == verify) return cmd_verify(ctx, claim, grid_path);
        std::cerr << "unhandled subcommand\n";
        return 64;
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << "\n";
        return 64;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
