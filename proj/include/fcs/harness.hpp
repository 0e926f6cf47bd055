#pragma once

// Batch harness behind the `fcs` executable: configuration (flags plus an
// optional key=value file), validation, subcommand dispatch, CSV output and a
// JSON run manifest.

#include "fcs/approx.hpp"
#include "fcs/curve.hpp"
#include "fcs/curve_space.hpp"
#include "fcs/error.hpp"
#include "fcs/fourier.hpp"
#include "fcs/grid.hpp"
#include "fcs/hjmm.hpp"
#include "fcs/random.hpp"
#include "fcs/spectral.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fcs {

inline constexpr const char* kArtifactVersion = "1.0.0";

enum ExitCode : int { kExitPass = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitNumeric = 3 };

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"spectrum", "fourier-verify", "simulate", "approximate", "verify-all"};
    return s;
}

struct RunConfig {
    std::string command;
    double beta = 0.5;
    double gamma = 1.5;
    std::size_t cells = 64;
    double x_max = 0.0;  ///< 0 selects recommended_x_max
    std::string spacing = "graded";
    double vol_c = 0.02;
    double vol_a = 1.0;
    double dt = 1.0 / 252.0;
    double t_max = 1.0;
    std::size_t paths = 100;
    std::uint64_t seed = 1;
    std::string h0_file;
    double h0_level = 0.05;
    double x_probe = 1.0;
    bool snapshots = false;
    std::size_t rank = 4;
    double eps = 0.0;          ///< 0 selects 2^-rank
    double threshold_K = 0.0;  ///< 0 selects 2 ||h0||_gamma
    std::size_t fourier_curves = 100;
    std::string out = "fcs_out";

    [[nodiscard]] WeightParams params() const { return {beta, gamma}; }
    [[nodiscard]] Spacing grid_spacing() const { return spacing == "uniform" ? Spacing::Uniform : Spacing::Graded; }
    [[nodiscard]] double eps_for(std::size_t n) const { return eps > 0.0 ? eps : default_eps(n); }

    [[nodiscard]] SimConfig sim() const {
        SimConfig s;
        s.dt = dt;
        s.t_max = t_max;
        s.n_paths = paths;
        s.seed = seed;
        return s;
    }

    /// Grid for spectrum and fourier-verify.
    [[nodiscard]] GridPtr space_grid() const {
        double xm = x_max > 0.0 ? x_max : recommended_x_max(params());
        return share(Grid::make(grid_spacing(), xm, cells));
    }

    /// Grid for simulation: the space grid extended by the horizon.
    [[nodiscard]] GridPtr simulation_grid() const {
        if (x_max > 0.0) return share(Grid::make(grid_spacing(), x_max + t_max, cells));
        return sim_grid(params(), cells, t_max, grid_spacing());
    }

    [[nodiscard]] ForwardCurve initial_curve() const {
        if (!h0_file.empty()) {
            std::ifstream is(h0_file);
            if (!is) fail(ErrorCode::ConfigError, "cli_harness.parse_config", "h0-file: cannot open '" + h0_file + "'");
            return read_curve(is);
        }
        return ForwardCurve::constant(simulation_grid(), h0_level);
    }

    [[nodiscard]] nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["beta"] = beta;
        j["gamma"] = gamma;
        j["cells"] = cells;
        j["x-max"] = x_max;
        j["spacing"] = spacing;
        j["vol-c"] = vol_c;
        j["vol-a"] = vol_a;
        j["dt"] = dt;
        j["t-max"] = t_max;
        j["paths"] = paths;
        j["seed"] = seed;
        j["h0-file"] = h0_file;
        j["h0-level"] = h0_level;
        j["x-probe"] = x_probe;
        j["snapshots"] = snapshots;
        j["rank"] = rank;
        j["eps"] = eps;
        j["threshold-K"] = threshold_K;
        j["fourier-curves"] = fourier_curves;
        j["out"] = out;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace detail {

/// Accepts "a/b" wherever a number is expected, so dt = 1/252 can be written exactly.
inline CLI::Validator ratio_validator() {
    return CLI::Validator(
        [](std::string& s) -> std::string {
            auto slash = s.find('/');
            if (slash == std::string::npos) return {};
            char* end = nullptr;
            std::string a = s.substr(0, slash), b = s.substr(slash + 1);
            double num = std::strtod(a.c_str(), &end);
            if (end == a.c_str() || *end != '\0') return "expected a number or A/B, got '" + s + "'";
            double den = std::strtod(b.c_str(), &end);
            if (end == b.c_str() || *end != '\0' || den == 0.0) return "expected a number or A/B, got '" + s + "'";
            s = format_double(num / den);
            return {};
        },
        "NUMBER|A/B", "ratio");
}

[[noreturn]] inline void config_error(const std::string& key, const std::string& what) {
    fail(ErrorCode::ConfigError, "cli_harness.parse_config", key + ": " + what);
}

}  // namespace detail

/// Checks every parameter constraint before any numerical work.
inline void validate(const RunConfig& c) {
    using detail::config_error;
    if (std::find(subcommands().begin(), subcommands().end(), c.command) == subcommands().end()) {
        config_error("command", "unknown subcommand '" + c.command + "'");
    }
    if (!(c.beta > 0.0) || !std::isfinite(c.beta)) config_error("beta", "expected a positive real");
    if (!(c.gamma > c.beta) || !std::isfinite(c.gamma)) config_error("gamma", "expected a real greater than beta");
    if (c.cells < 2) config_error("cells", "expected an integer >= 2");
    if (!(c.x_max >= 0.0) || !std::isfinite(c.x_max)) config_error("x-max", "expected a non-negative real (0 = automatic)");
    if (c.spacing != "graded" && c.spacing != "uniform") config_error("spacing", "expected 'graded' or 'uniform'");
    if (!(c.vol_c >= 0.0)) config_error("vol-c", "expected a non-negative real");
    if (!(c.dt > 0.0)) config_error("dt", "expected a positive real");
    if (!(c.t_max >= c.dt)) config_error("t-max", "expected a real >= dt");
    double steps = c.t_max / c.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps) config_error("t-max", "expected an integer multiple of dt");
    if (c.paths < 1) config_error("paths", "expected an integer >= 1");
    if (c.rank < 1) config_error("rank", "expected an integer >= 1");
    if (c.rank > c.cells) config_error("rank", "expected an integer <= cells");
    if (!(c.eps >= 0.0)) config_error("eps", "expected a non-negative real (0 = 2^-rank)");
    if (!(c.threshold_K >= 0.0)) config_error("threshold-K", "expected a non-negative real (0 = 2 ||h0||)");
    if (c.fourier_curves < 1) config_error("fourier-curves", "expected an integer >= 1");
    if (c.out.empty()) config_error("out", "expected a directory path");

    bool needs_sim = c.command == "simulate" || c.command == "approximate" || c.command == "verify-all";
    if (!needs_sim) return;
    if (!(2.0 * c.vol_a > c.gamma)) config_error("vol-a", "expected a real greater than gamma/2");
    ForwardCurve h0 = [&] {
        try {
            return c.initial_curve();
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ConfigError) throw;
            config_error("h0-file", e.what());
        }
    }();
    const Grid& g = h0.grid();
    if (c.h0_file.empty() && !(std::isfinite(c.h0_level))) config_error("h0-level", "expected a finite real");
    if (!(c.x_probe >= 0.0 && c.x_probe <= g.x_max())) config_error("x-probe", "expected a real in [0, grid x_max]");
    try {
        c.sim().validate(g);
    } catch (const Error& e) {
        config_error("dt", e.what());
    }
    if (c.threshold_K > 0.0) {
        double n0 = hgamma_norm(h0, c.params());
        if (!(c.threshold_K > n0)) {
            config_error("threshold-K", "expected a real > ||h0||_gamma = " + format_double(n0));
        }
    }
}

/// Flags override values from --config; unknown keys are rejected.
/// Returns nullopt when help was printed.
inline std::optional<RunConfig> parse_config(int argc, const char* const* argv, std::ostream& out = std::cout) {
    RunConfig c;
    CLI::App app{"Weighted forward-curve spaces, finite-rank approximation and HJMM audits", "fcs"};
    app.set_config("--config", "", "key=value file; command-line flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::error);
    auto ratio = detail::ratio_validator();

    app.add_option("command", c.command, "spectrum | fourier-verify | simulate | approximate | verify-all")
        ->required()
        ->configurable(false);
    app.add_option("--beta", c.beta, "L2 weight exponent")->transform(ratio);
    app.add_option("--gamma", c.gamma, "H weight exponent")->transform(ratio);
    app.add_option("--cells", c.cells, "grid cells");
    app.add_option("--x-max", c.x_max, "truncation point (0 = automatic)")->transform(ratio);
    app.add_option("--spacing", c.spacing, "graded | uniform");
    app.add_option("--vol-c", c.vol_c, "Vasicek volatility level")->transform(ratio);
    app.add_option("--vol-a", c.vol_a, "Vasicek mean reversion")->transform(ratio);
    app.add_option("--dt", c.dt, "time step")->transform(ratio);
    app.add_option("--t-max", c.t_max, "horizon")->transform(ratio);
    app.add_option("--paths", c.paths, "Monte Carlo paths");
    app.add_option("--seed", c.seed, "random seed");
    app.add_option("--h0-file", c.h0_file, "initial curve in curve text format");
    app.add_option("--h0-level", c.h0_level, "flat initial curve level when no h0-file is given")->transform(ratio);
    app.add_option("--x-probe", c.x_probe, "maturity reported by simulate")->transform(ratio);
    app.add_flag("--snapshots", c.snapshots, "write final curves of simulated paths");
    app.add_option("--rank", c.rank, "approximation rank n");
    app.add_option("--eps", c.eps, "perturbation budget eps_n (0 = 2^-n)")->transform(ratio);
    app.add_option("--threshold-K", c.threshold_K, "stopping threshold K (0 = 2 ||h0||_gamma)")->transform(ratio);
    app.add_option("--fourier-curves", c.fourier_curves, "random curves in the Fourier bound check");
    app.add_option("--out", c.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return std::nullopt;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return std::nullopt;
    } catch (const CLI::ParseError& e) {
        fail(ErrorCode::ConfigError, "cli_harness.parse_config", std::string(e.get_name()) + ": " + e.what());
    }
    validate(c);
    return c;
}

inline RunConfig parse_config(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"fcs"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream sink;
    auto c = parse_config(static_cast<int>(argv.size()), argv.data(), sink);
    if (!c) fail(ErrorCode::ConfigError, "cli_harness.parse_config", "help requested");
    return *c;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : os_(path) {
        if (!os_) fail(ErrorCode::InvalidArgument, "cli_harness.run", "cannot write " + path.string());
        row(header);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) os_ << ',';
            os_ << fields[i];
        }
        os_ << '\n';
    }

private:
    std::ofstream os_;
};

inline std::string num(double v) { return format_double(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }

/// A measured quantity compared with its limits; slack is the distance to
/// the nearer limit, negative when violated.
struct Check {
    std::string name;
    double measured = 0.0;
    double limit = 0.0;
    bool pass = false;
    double lower = -std::numeric_limits<double>::infinity();

    static Check at_most(std::string name, double measured, double limit) {
        return {std::move(name), measured, limit, measured <= limit};
    }
    static Check within(std::string name, double measured, double lo, double hi) {
        return {std::move(name), measured, hi, measured >= lo && measured <= hi, lo};
    }
    [[nodiscard]] double slack() const { return std::min(limit - measured, measured - lower); }
};

struct RunManifest {
    RunConfig config;
    std::vector<Check> checks;
    std::vector<std::string> artifacts;
    nlohmann::ordered_json reports = nlohmann::ordered_json::array();  ///< audit metadata
    double wall_clock_seconds = 0.0;

    [[nodiscard]] bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }
    [[nodiscard]] int exit_code() const { return passed() ? kExitPass : kExitCheckFailed; }

    [[nodiscard]] nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["artifact_version"] = kArtifactVersion;
        j["config"] = config.to_json();
        j["passed"] = passed();
        auto& cs = j["checks"] = nlohmann::ordered_json::array();
        for (const auto& c : checks) {
            nlohmann::ordered_json e{{"name", c.name}, {"pass", c.pass}, {"measured", c.measured}};
            if (std::isfinite(c.lower)) e["lower"] = c.lower;
            e["limit"] = c.limit;
            e["slack"] = c.slack();
            cs.push_back(std::move(e));
        }
        j["artifacts"] = artifacts;
        j["reports"] = reports;
        j["wall_clock_seconds"] = wall_clock_seconds;
        return j;
    }
};

/// Deterministic random H0 curve for property checks: smooth derivative
/// decaying like exp(-rate x) with Gaussian coefficients.
inline ForwardCurve random_test_curve(const GridPtr& g, std::uint64_t seed, std::uint64_t index, double rate) {
    const std::uint64_t stream = 0xC0FFEE;
    double a = rng::normal(seed, stream, index, 0);
    double b = rng::normal(seed, stream, index, 1);
    double c = rng::normal(seed, stream, index, 2);
    std::vector<double> d(g->n_nodes());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double x = g->node(i);
        double wiggle = 0.2 * rng::normal(seed, stream, index, 3 + i);
        d[i] = (a + b * std::sin(3.0 * x) + wiggle) * std::exp(-rate * x) + c * std::exp(-2.0 * rate * x);
    }
    return ForwardCurve(g, 0.0, std::move(d));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

class Runner {
public:
    Runner(RunConfig cfg, std::filesystem::path dir) : dir_(std::move(dir)) { man_.config = std::move(cfg); }

    RunManifest finish(double seconds) {
        man_.wall_clock_seconds = seconds;
        std::ofstream os(dir_ / "manifest.json");
        os << man_.to_json().dump(2) << '\n';
        return man_;
    }

    void spectrum() {
        const auto& c = man_.config;
        auto grid = c.space_grid();
        auto sys = singular_system(make_basis(grid, c.params()));
        std::size_t rows = std::min(sys.rank(), grid->n_cells());
        CsvWriter csv(path("spectrum.csv"), {"k", "s_k", "defect_T_k"});
        double worst_defect = 0.0, worst_rise = 0.0;
        for (std::size_t k = 1; k <= rows; ++k) {
            double defect = operator_defect(sys, make_tn(sys, k));
            worst_defect = std::max(worst_defect, std::abs(defect - sys.s_at(k)));
            if (k > 1) worst_rise = std::max(worst_rise, sys.s()[k - 1] - sys.s()[k - 2]);
            csv.row({num(k), num(sys.s()[k - 1]), num(defect)});
        }
        add(Check::at_most("spectrum.defect_equals_next_singular_value", worst_defect, 1e-10));
        add(Check::at_most("spectrum.non_increasing", worst_rise, 0.0));

        double xm = grid->x_max();
        auto fine = singular_system(make_basis(share(Grid::make(c.grid_spacing(), xm, 2 * c.cells)), c.params()));
        std::size_t lead = std::min<std::size_t>({8, sys.rank(), fine.rank()});
        double change = 0.0;
        for (std::size_t k = 0; k < lead; ++k) change = std::max(change, std::abs(fine.s()[k] - sys.s()[k]) / fine.s()[k]);
        add(Check::at_most("spectrum.leading_stable_under_refinement", change, 1e-3));
        if (lead == 8) {
            double tail = fine.s_at(2 * c.cells - 1);
            add(Check::at_most("spectrum.tail_below_tenth_of_s8", tail, fine.s()[7] / 10.0));
        }
        artifact("spectrum.csv");
    }

    void fourier_verify() {
        const auto& c = man_.config;
        const WeightParams w = c.params();
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        CsvWriter csv(path("fourier_checks.csv"), {"check", "measured", "limit", "slack", "pass"});
        auto record = [&](Check ch) {
            csv.row({ch.name, num(ch.measured), num(ch.limit), num(ch.slack()), ch.pass ? "1" : "0"});
            add(std::move(ch));
        };

        LineGrid lg(20.0, 1 << 12);
        auto gauss = sample(lg, [](double x) { return std::exp(-0.5 * x * x); });
        auto packet = sample(lg, [](double x) { return std::sin(3.0 * x) * std::exp(-x * x / 4.0); });
        auto rel = [](cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };

        auto pg = plancherel_check(gauss, gauss);
        double plancherel = std::max(rel(pg.lhs, pg.rhs), std::abs(pg.lhs.real() - std::sqrt(std::numbers::pi)) /
                                                               std::sqrt(std::numbers::pi));
        auto pp = plancherel_check(gauss, packet);
        plancherel = std::max(plancherel, std::abs(pp.lhs - pp.rhs) / (l2_norm(gauss) * l2_norm(packet)));
        record(Check::at_most("fourier.plancherel_relative", plancherel, 1e-6));

        double deriv = std::max(derivative_identity_check(gauss), derivative_identity_check(packet));
        record(Check::at_most("fourier.derivative_identity", deriv, 1e-4));

        auto l1_ratio = [&](const LineFunction& f) {
            double l1 = l1_norm(f);
            return l1 > 0.0 ? sup_norm(fourier(f)) / (l1 * inv_sqrt_2pi) : 0.0;
        };
        double l1c0 = std::max(l1_ratio(gauss), l1_ratio(packet));

        auto sob = weighted_sobolev_bound_check(gauss);
        record(Check::at_most("fourier.weighted_sobolev_bound", sob.lhs - sob.rhs, 0.0));

        auto grid = c.space_grid();
        const double rate = 0.6 * w.gamma() + 0.2;
        double repr = 0.0, c0 = 0.0, l1_lift = 0.0;
        std::vector<double> c0_ratio(c.fourier_curves, 0.0), l1_ratio_lift(c.fourier_curves, 0.0);
        parallel_for(c.fourier_curves, [&](std::size_t i) {
            auto h = random_test_curve(grid, c.seed, i, rate);
            auto b = c0_bound_check(h, w);
            c0_ratio[i] = b.bound > 0.0 ? b.sup_ft / b.bound : 0.0;
            l1_ratio_lift[i] = l1_ratio(lift_to_line(h, w, line_grid_for(*grid)));
        });
        for (std::size_t i = 0; i < c.fourier_curves; ++i) {
            c0 = std::max(c0, c0_ratio[i]);
            l1_lift = std::max(l1_lift, l1_ratio_lift[i]);
        }
        for (std::size_t i = 0; i < std::min<std::size_t>(c.fourier_curves, 10); ++i) {
            auto h = random_test_curve(grid, c.seed, i, rate);
            for (double xi : probe_frequencies()) {
                auto r = functional_representation_check(h, xi, w);
                repr = std::max(repr, std::abs(r.direct - r.paired) / (1.0 + std::abs(r.direct)));
            }
        }
        record(Check::at_most("fourier.l1_to_c0_bound_ratio", std::max(l1c0, l1_lift), 1.0 + 1e-12));
        record(Check::at_most("fourier.functional_representation", repr, 1e-6));
        record(Check::at_most("fourier.c0_bound_ratio", c0, 1.0));
        artifact("fourier_checks.csv");
    }

    void simulate_paths() {
        const auto& c = man_.config;
        auto h0 = c.initial_curve();
        auto vol = vasicek_vol(h0.grid_ptr(), c.params(), c.vol_c, c.vol_a);
        auto ens = simulate(h0, vol, c.sim());
        const CurveSpace space(h0.grid_ptr(), c.params());

        CsvWriter csv(path("simulate.csv"), {"path", "t", "norm_gamma", "r0", "r_probe"});
        bool finite = true;
        std::vector<std::vector<std::array<double, 3>>> cols(ens.paths.size());
        parallel_for(ens.paths.size(), [&](std::size_t p) {
            for (const auto& r : ens.paths[p].states) cols[p].push_back({space.hgamma_norm(r), r.h0(), r.value(c.x_probe)});
        });
        for (std::size_t p = 0; p < ens.paths.size(); ++p) {
            const auto& path = ens.paths[p];
            for (std::size_t i = 0; i < path.states.size(); ++i) {
                const auto& v = cols[p][i];
                finite = finite && std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
                csv.row({num(p), num(ens.time(path.steps[i])), num(v[0]), num(v[1]), num(v[2])});
            }
        }
        add(Check::at_most("simulate.non_finite_states", finite ? 0.0 : 1.0, 0.0));

        auto again = run_path(h0, vol, c.sim(), brownian_increments(c.seed, 0, c.sim().n_steps(), vol.dimension(), c.dt));
        double diff = 0.0;
        for (std::size_t i = 0; i < again.states.size(); ++i) {
            diff = std::max(diff, space.hgamma_norm(again.states[i] - ens.paths[0].states[i]));
        }
        add(Check::at_most("simulate.seed_replay_difference", diff, 0.0));
        artifact("simulate.csv");

        if (c.snapshots) {
            std::filesystem::create_directories(dir_ / "snapshots");
            for (std::size_t p = 0; p < ens.paths.size(); ++p) {
                char name[64];
                std::snprintf(name, sizeof name, "snapshots/path_%04zu.txt", p);
                std::ofstream os(dir_ / name);
                write_curve(os, ens.paths[p].states.back());
                artifact(name);
            }
        }
    }

    /// Audits for the ranks in `ranks`; per-row CSV only when `rows` is set.
    void approximate(const std::vector<std::size_t>& ranks, bool rows) {
        const auto& c = man_.config;
        auto h0 = c.initial_curve();
        const WeightParams w = c.params();
        auto vol = vasicek_vol(h0.grid_ptr(), w, c.vol_c, c.vol_a);
        auto ens = simulate(h0, vol, c.sim());
        auto sys = singular_system(make_basis(h0.grid_ptr(), w, true));
        double K = c.threshold_K > 0.0 ? c.threshold_K : 2.0 * hgamma_norm(h0, w);

        std::optional<CsvWriter> detail;
        if (rows) detail.emplace(path("approximate.csv"), std::vector<std::string>{"audit", "rank", "path", "t", "lhs", "rhs", "margin"});
        CsvWriter summary(path("approximate_summary.csv"),
                          {"audit", "rank", "eps", "bound", "worst_margin", "worst_path", "worst_t", "pass"});
        CsvWriter mse_csv(path("approximate_mse.csv"), {"rank", "eps", "rms_sup_error", "std_error", "k_hat", "bound", "pass"});
        auto emit = [&](const ErrorReport& rep, double eps) {
            if (detail) {
                for (const auto& r : rep.rows) {
                    detail->row({rep.label, num(rep.rank), num(r.path), num(r.t), num(r.lhs), num(r.rhs), num(r.margin)});
                }
            }
            summary.row({rep.label, num(rep.rank), num(eps), num(rep.bound), num(rep.worst_margin), num(rep.worst_path),
                         num(ens.time(rep.worst_step)), rep.passed() ? "1" : "0"});
            auto meta = nlohmann::ordered_json::object();
            for (const auto& [k, v] : rep.metadata) meta[k] = v;
            man_.reports.push_back({{"audit", rep.label}, {"rank", rep.rank}, {"metadata", meta}});
            add(Check::at_most("approximate." + rep.label + ".n" + std::to_string(rep.rank) + ".worst_margin",
                               rep.worst_margin, 1.0));
        };

        double prev_mse = std::numeric_limits<double>::infinity();
        double worst_increase = -std::numeric_limits<double>::infinity();
        for (std::size_t n : ranks) {
            if (n > sys.rank()) fail(ErrorCode::RankTooLarge, "cli_harness.run", "rank exceeds retained modes");
            double eps = c.eps_for(n);
            auto tn = make_tn(sys, n);
            auto sn = perturb_functionals(sys, n, eps, c.seed);
            emit(audit_norm_conv(ens, tn, sys), 0.0);
            emit(audit_est_epsilon_n(ens, sn, sys, eps), eps);
            emit(audit_uni_local(ens, sn, sys, eps, K), eps);

            auto mse = mean_square_error(ens, sn, sys, eps);
            mse_csv.row({num(n), num(eps), num(mse.value), num(mse.std_error), num(mse.k_hat), num(mse.bound),
                         mse.passed() ? "1" : "0"});
            add(Check::at_most("approximate.mean_square_error.n" + std::to_string(n) + ".over_bound",
                               mse.value - mse.bound, kAuditSlack));
            worst_increase = std::max(worst_increase, mse.value - prev_mse);
            prev_mse = mse.value;

            auto ito = ito_approximant(ens.paths[0], sn, vol, c.sim());
            auto proj = project_path(ens.paths[0], std::make_shared<const FiniteRankOperator>(sn));
            add(Check::at_most("approximate.coupling_checksum_mismatch.n" + std::to_string(n),
                               ito.increments_checksum == proj.increments_checksum ? 0.0 : 1.0, 0.0));
        }
        if (ranks.size() > 1) add(Check::at_most("approximate.mean_square_error_decreasing_in_n", worst_increase, 0.0));
        if (rows) artifact("approximate.csv");
        artifact("approximate_summary.csv");
        artifact("approximate_mse.csv");
    }

    /// Ito approximant versus projected path on one coupled path at dt and dt/2.
    void coupling_order() {
        const auto& c = man_.config;
        auto h0 = c.initial_curve();
        const WeightParams w = c.params();
        auto vol = vasicek_vol(h0.grid_ptr(), w, c.vol_c, c.vol_a);
        auto sys = singular_system(make_basis(h0.grid_ptr(), w, true));
        const std::size_t n = std::min<std::size_t>(4, sys.rank());
        auto sn = perturb_functionals(sys, n, c.eps_for(n), c.seed);
        SimConfig coarse = c.sim();
        coarse.n_paths = 1;
        SimConfig fine = coarse;
        fine.dt = coarse.dt / 2.0;
        auto inc = brownian_increments(c.seed, 0, fine.n_steps(), vol.dimension(), fine.dt);
        auto ef = simulate_with_increments(h0, vol, fine, {inc});
        auto ec = simulate_with_increments(h0, vol, coarse, {coarsen(inc, vol.dimension(), 2)});
        double gf = max_gap(ito_approximant(ef.paths[0], sn, vol, fine), project_path(ef, sn)[0]);
        double gc = max_gap(ito_approximant(ec.paths[0], sn, vol, coarse), project_path(ec, sn)[0]);
        CsvWriter csv(path("coupling.csv"), {"dt", "max_gap"});
        csv.row({num(coarse.dt), num(gc)});
        csv.row({num(fine.dt), num(gf)});
        double ratio = gf > 0.0 ? gc / gf : 0.0;
        add(Check::within("approximate.coupling_gap_ratio", ratio, 1.7, 2.3));
        artifact("coupling.csv");
    }

private:
    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    void add(Check c) { man_.checks.push_back(std::move(c)); }
    void artifact(std::string name) { man_.artifacts.push_back(std::move(name)); }

    std::filesystem::path dir_;
    RunManifest man_;
};

/// Validates, creates the output directory, dispatches and writes the manifest.
inline RunManifest run(const RunConfig& cfg) {
    validate(cfg);
    auto start = std::chrono::steady_clock::now();
    std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    Runner r(cfg, dir);
    if (cfg.command == "spectrum") {
        r.spectrum();
    } else if (cfg.command == "fourier-verify") {
        r.fourier_verify();
    } else if (cfg.command == "simulate") {
        r.simulate_paths();
    } else if (cfg.command == "approximate") {
        r.approximate({cfg.rank}, true);
    } else {
        r.spectrum();
        r.fourier_verify();
        r.simulate_paths();
        r.approximate({1, 2, 4, 8}, false);
        r.coupling_order();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r.finish(secs);
}

/// Entry point of the executable; returns the process exit code.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::optional<RunConfig> cfg;
    try {
        cfg = parse_config(argc, argv, out);
    } catch (const Error& e) {
        err << "fcs: " << e.what() << '\n';
        return kExitConfig;
    }
    if (!cfg) return kExitPass;
    try {
        auto man = run(*cfg);
        for (const auto& c : man.checks) {
            char line[256];
            std::snprintf(line, sizeof line, "%-4s %-60s measured=%.6g limit=%.6g\n", c.pass ? "PASS" : "FAIL",
                          c.name.c_str(), c.measured, c.limit);
            out << line;
        }
        out << (man.passed() ? "all checks passed" : "some checks FAILED") << " (" << man.checks.size()
            << " checks, output in " << cfg->out << ")\n";
        return man.exit_code();
    } catch (const Error& e) {
        err << "fcs: " << e.what() << '\n';
        return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitNumeric;
    } catch (const std::exception& e) {
        err << "fcs: " << e.what() << '\n';
        return kExitNumeric;
    }
}

}  // namespace fcs
