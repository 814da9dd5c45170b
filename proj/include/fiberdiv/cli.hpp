#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fiberdiv/analysis.hpp"
#include "fiberdiv/densegrid.hpp"
#include "fiberdiv/io.hpp"
#include "fiberdiv/subdivide.hpp"
#include "fiberdiv/testfibers.hpp"

namespace fiberdiv::cli {

enum ExitCode : int { ok = 0, usage = 1, resource = 2, invariant = 3 };

enum class Mode { subdivide, dense, compare };

struct RunConfig {
    std::vector<std::string> functions;
    std::vector<double> y;
    int n = 0;
    std::string box;
    std::optional<double> delta;
    std::optional<int> depth;
    Mode mode = Mode::subdivide;
    std::string leaves_path;
    std::string stats_path;
    std::string svg_path;
    std::uint64_t budget = 100'000'000;
    unsigned workers = 1;
    int fit_levels = 5;
    std::optional<double> dim;
    std::string fiber_name;
    std::uint64_t seed = 1;
    std::size_t samples = 1000;
};

/// "lo:hi[,lo:hi...]"
inline Box parse_box(const std::string& text) {
    std::vector<double> lo;
    std::vector<double> hi;
    std::stringstream ss(text);
    std::string axis;
    while (std::getline(ss, axis, ',')) {
        const auto colon = axis.find(':', axis.empty() ? 0 : 1);
        if (colon == std::string::npos) throw std::invalid_argument("--box: axis '" + axis + "' is not lo:hi");
        std::size_t used = 0;
        const std::string a = axis.substr(0, colon);
        const std::string b = axis.substr(colon + 1);
        double l = 0.0;
        double h = 0.0;
        try {
            l = std::stod(a, &used);
            if (used != a.size()) throw std::invalid_argument(a);
            h = std::stod(b, &used);
            if (used != b.size()) throw std::invalid_argument(b);
        } catch (const std::exception&) {
            throw std::invalid_argument("--box: axis '" + axis + "' is not lo:hi");
        }
        lo.push_back(l);
        hi.push_back(h);
    }
    return Box(std::move(lo), std::move(hi));
}

inline Mode parse_mode(const std::string& s) {
    if (s == "subdivide") return Mode::subdivide;
    if (s == "dense") return Mode::dense;
    if (s == "compare") return Mode::compare;
    throw std::invalid_argument("unknown mode '" + s + "' (expected subdivide, dense or compare)");
}

namespace detail {

inline void print_table(std::ostream& out, const ComplexityReport& rep) {
    out << "n=" << rep.n << " m=" << rep.m << " delta0=" << rep.delta0 << " delta=" << rep.delta << " N=" << rep.depth
        << " d=" << rep.d << '\n';
    out << "t\tcount\tmu_d\tevals\n";
    for (const auto& r : rep.rows) out << r.t << '\t' << r.count << '\t' << r.mu_d << '\t' << r.evals << '\n';
    out << "subdivision predicate evals: " << rep.total_evals << '\n';
    out << "leaves: " << rep.leaves << '\n';
    if (rep.fit) out << "slope: " << rep.fit->slope << " (r^2 " << rep.fit->r_squared << ")\n";
    if (rep.measure) out << "measure estimate: " << rep.measure->final_value << '\n';
    if (rep.dense) {
        out << "dense predicate evals: " << rep.dense->evals << '\n';
        out << "dense/subdivision eval ratio: " << rep.dense->eval_ratio << '\n';
        out << "leaf sets identical: " << (rep.dense->leaves_match ? "yes" : "no") << '\n';
    }
}

} // namespace detail

/// Runs one configured job. Returns the process exit code.
inline int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    FiberSpec fiber;
    Box root;
    const TestFiber* catalog_fiber = nullptr;
    std::optional<double> d = cfg.dim;

    if (!cfg.fiber_name.empty()) {
        catalog_fiber = &find_fiber(cfg.fiber_name);
        fiber = catalog_fiber->fiber;
        root = catalog_fiber->root;
        if (!d) d = static_cast<double>(catalog_fiber->true_dimension);
    }
    if (!cfg.functions.empty()) {
        if (cfg.functions.size() != cfg.y.size())
            throw std::invalid_argument("-f and -y must be given the same number of times");
        if (cfg.n < 1) throw std::invalid_argument("-n <dim> is required with -f");
        fiber = FiberSpec::parse(cfg.functions, cfg.y, cfg.n);
    }
    if (!cfg.box.empty()) root = parse_box(cfg.box);
    if (fiber.exprs.empty()) throw std::invalid_argument("no fiber given: use -f/-y or --fiber");
    if (root.dim() == 0) throw std::invalid_argument("no root box given: use --box");
    if (root.dim() != fiber.n)
        throw std::invalid_argument("--box has " + std::to_string(root.dim()) + " axes but n = " + std::to_string(fiber.n));
    if (!cfg.delta && !cfg.depth) throw std::invalid_argument("one of --delta or --depth is required");
    if (!d) d = static_cast<double>(std::max(0, fiber.n - fiber.m()));
    if (!cfg.svg_path.empty() && root.dim() != 2)
        throw UnsupportedDimension("--svg needs n = 2, got n = " + std::to_string(root.dim()));

    const Predicate predicate = interval_predicate(fiber);

    if (cfg.mode == Mode::dense) {
        DenseOptions dopt;
        dopt.delta = cfg.delta;
        dopt.depth_override = cfg.depth;
        dopt.budget = cfg.budget;
        dopt.workers = cfg.workers;
        const DenseResult dr = dense_scan(predicate, root, dopt);
        if (dr.predicate_evals != dr.total_cells || predicate.evals() != dr.total_cells) {
            err << "internal error: dense scan evaluated " << dr.predicate_evals << " of " << dr.total_cells << " cells\n";
            return invariant;
        }
        if (!cfg.leaves_path.empty()) export_leaves(root, dr.flagged, cfg.leaves_path, LeafFormat::csv);
        if (!cfg.svg_path.empty()) export_leaves(root, dr.flagged, cfg.svg_path, LeafFormat::svg);
        nlohmann::ordered_json j;
        j["n"] = root.dim();
        j["m"] = fiber.m();
        j["delta0"] = root.diameter();
        j["delta"] = cfg.delta.value_or(std::ldexp(root.diameter(), -dr.depth));
        j["N"] = dr.depth;
        j["dense"] = {{"cells", dr.total_cells}, {"evals", dr.predicate_evals}, {"flagged", dr.flagged.size()}, {"seconds", dr.elapsed}};
        j["alpha_M"] = predicate.mean_cost();
        if (!cfg.stats_path.empty()) fiberdiv::detail::write_file(cfg.stats_path, j.dump(2) + "\n");
        out << "dense cells: " << dr.total_cells << "\nflagged: " << dr.flagged.size() << "\ndense predicate evals: " << dr.predicate_evals << '\n';
        return ok;
    }

    SubdivideOptions sopt;
    sopt.delta = cfg.delta;
    sopt.max_depth_override = cfg.depth;
    sopt.budget = cfg.budget;
    sopt.workers = cfg.workers;
    sopt.measure_dim = d;
    sopt.keep_levels = catalog_fiber != nullptr;
    SubdivisionResult sub = subdivide(predicate, root, sopt);
    sub.fiber = fiber;

    // Eval identity: 1 + sum_{t>=1} 2^n |Q_{t-1}|, cross-checked against the predicate's own counter.
    std::uint64_t expected = 1;
    for (std::size_t t = 1; t < sub.levels.size(); ++t) expected += (std::uint64_t{1} << root.dim()) * sub.levels[t - 1].count;
    if (expected != sub.total_evals() || predicate.evals() != expected) {
        err << "internal error: subdivision eval count " << sub.total_evals() << " (predicate saw " << predicate.evals()
            << "), expected " << expected << '\n';
        return invariant;
    }

    std::optional<DenseResult> dense;
    if (cfg.mode == Mode::compare) {
        DenseOptions dopt;
        dopt.depth_override = sub.depth;
        dopt.budget = cfg.budget;
        dopt.workers = cfg.workers;
        dense = dense_scan(predicate, root, dopt);
    }

    std::optional<FitRange> range;
    try {
        range = default_fit_range(sub.levels, cfg.fit_levels);
    } catch (const InsufficientLevels&) {
    }
    const ComplexityReport rep = build_report(sub, dense ? &*dense : nullptr, *d, range);

    std::optional<CoverageReport> coverage;
    if (catalog_fiber && !sub.leaves.empty()) {
        const auto pts = catalog_fiber->sampler(cfg.seed, cfg.samples);
        if (!pts.empty()) coverage = coverage_check(sub, pts);
    }

    if (!cfg.leaves_path.empty()) export_leaves(sub, cfg.leaves_path, LeafFormat::csv);
    if (!cfg.svg_path.empty()) export_leaves(sub, cfg.svg_path, LeafFormat::svg);
    if (!cfg.stats_path.empty()) export_stats(rep, cfg.stats_path, coverage ? &*coverage : nullptr);
    detail::print_table(out, rep);
    if (coverage) out << "coverage: " << (coverage->pass ? "pass" : "FAIL " + coverage->diagnosis) << '\n';

    if (dense && !rep.dense->leaves_match) {
        err << "internal error: subdivision leaves differ from the dense flagged set\n";
        return invariant;
    }
    if (coverage && !coverage->pass) {
        err << "internal error: coverage failed: " << coverage->diagnosis << '\n';
        return invariant;
    }
    return ok;
}

/// Parses argv and runs. The mode is the first positional word or --mode.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Orthree approximation of implicitly defined fibers f^-1({y})", "fiberdiv"};
    RunConfig cfg;
    std::string mode_word;
    std::string mode_flag;
    std::optional<double> delta;
    std::optional<int> depth;
    std::optional<double> dim;

    app.add_option("command", mode_word, "subdivide | dense | compare");
    app.add_option("--mode", mode_flag, "subdivide | dense | compare (alternative to the positional word)");
    app.add_option("-n", cfg.n, "domain dimension");
    app.add_option("-f", cfg.functions, "component expression (repeatable)")->allow_extra_args(false);
    app.add_option("-y", cfg.y, "target value paired with each -f (repeatable)")->allow_extra_args(false);
    app.add_option("--box", cfg.box, "root box lo:hi[,lo:hi...]");
    auto* delta_opt = app.add_option("--delta", delta, "target voxel diameter");
    auto* depth_opt = app.add_option("--depth", depth, "refinement rounds N (instead of --delta)");
    delta_opt->excludes(depth_opt);
    app.add_option("--leaves", cfg.leaves_path, "write the leaf set as CSV");
    app.add_option("--stats", cfg.stats_path, "write statistics as JSON");
    app.add_option("--svg", cfg.svg_path, "write an SVG rendering (n = 2)");
    app.add_option("--budget", cfg.budget, "maximum voxels per level / dense cells");
    app.add_option("--workers", cfg.workers, "worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--fit-levels", cfg.fit_levels, "deepest levels used for the dimension fit")->check(CLI::Range(3, 60));
    app.add_option("--dim", dim, "d for the box-counting measure");
    app.add_option("--fiber", cfg.fiber_name, "catalog fiber (shortcut for -f/-y/--box)");
    app.add_option("--seed", cfg.seed, "sampler seed for coverage checks");
    app.add_option("--samples", cfg.samples, "on-fiber samples for coverage checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return usage;
    }

    try {
        if (!mode_word.empty() && !mode_flag.empty() && mode_word != mode_flag)
            throw std::invalid_argument("mode given twice with different values");
        const std::string m = !mode_word.empty() ? mode_word : mode_flag;
        if (m.empty()) throw std::invalid_argument("missing mode: subdivide, dense or compare");
        cfg.mode = parse_mode(m);
        cfg.delta = delta;
        cfg.depth = depth;
        cfg.dim = dim;
        return execute(cfg, out, err);
    } catch (const ResourceLimit& e) {
        err << "resource limit: " << e.what() << '\n';
        return resource;
    } catch (const ArityError& e) {
        err << "ArityError: " << e.what() << '\n';
        return usage;
    } catch (const SyntaxError& e) {
        err << "SyntaxError: " << e.what() << '\n';
        return usage;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << '\n';
        return usage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return invariant;
    }
}

} // namespace fiberdiv::cli
