#pragma once

// Pure-diffusion HJM dynamics in Musiela parametrization,
//
//   dr_t = (d/dx r_t + alpha(t, r_t)) dt + sum_j sigma^j(t, r_t) dW^j_t,
//   alpha = sum_j sigma^j * int_0^x sigma^j,
//
// stepped by the splitting scheme r+ = S_dt (r + alpha dt + sum_j sigma^j dW_j),
// where S_t h = h(t + .) is the translation semigroup.

#include "fcs/curve.hpp"
#include "fcs/curve_space.hpp"
#include "fcs/error.hpp"
#include "fcs/grid.hpp"
#include "fcs/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace fcs {

// ---------------------------------------------------------------------------
// Semigroup and drift
// ---------------------------------------------------------------------------

/// (S_t h)(x) = h(x + t). The derivative is read off at x_i + t by linear
/// interpolation, which is exact when t maps nodes onto nodes. A nonzero
/// h'(x_max) cannot be carried past the truncation point and shifts values by
/// about width * h'(x_max) / 2; grids sized by recommended_x_max make this negligible.
inline ForwardCurve shift(const ForwardCurve& h, double t) {
    if (!(t >= 0.0)) fail(ErrorCode::InvalidArgument, "hjmm_sim.shift", "t must be >= 0");
    const Grid& g = h.grid();
    if (t > g.x_max()) {
        fail(ErrorCode::HorizonExceeded, "hjmm_sim.shift",
             "t=" + format_double(t) + " exceeds grid horizon " + format_double(g.x_max()));
    }
    if (t == 0.0) return h;
    std::vector<double> d(g.n_nodes());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double y = g.node(i) + t;
        d[i] = y >= g.x_max() ? 0.0 : h.derivative(y);
    }
    return ForwardCurve(h.grid_ptr(), h.h_inf(), std::move(d));
}

/// int_0^{x_i} h at every node, exact for the piecewise-quadratic curve.
inline std::vector<double> cumulative_integral(const ForwardCurve& h) {
    const Grid& g = h.grid();
    std::vector<double> c(g.n_nodes(), 0.0);
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        auto p = h.value_poly(i);
        c[i + 1] = c[i] + g.width(i) * (p[0] + p[1] / 2.0 + p[2] / 3.0 + h.h_inf());
    }
    return c;
}

/// sum_j sigma^j(x) int_0^x sigma^j. The result has derivative nodal values
/// sigma' Sigma + sigma^2 and vanishes at infinity, like the sigma^j.
inline ForwardCurve drift_from_components(const std::vector<ForwardCurve>& sigmas, const GridPtr& grid) {
    std::vector<double> d(grid->n_nodes(), 0.0);
    for (const auto& s : sigmas) {
        if (!same_grid(s.grid_ptr(), grid)) fail(ErrorCode::GridMismatch, "hjmm_sim.hjm_drift", "volatility grid differs");
        auto cum = cumulative_integral(s);
        auto rel = s.relative_levels();
        for (std::size_t i = 0; i < d.size(); ++i) {
            double v = rel[i] + s.h_inf();
            d[i] += s.dcoef()[i] * cum[i] + v * v;
        }
    }
    return ForwardCurve(grid, 0.0, std::move(d));
}

// ---------------------------------------------------------------------------
// Volatility
// ---------------------------------------------------------------------------

using VolComponent = std::function<ForwardCurve(double t, const ForwardCurve& r)>;

struct VolSpec {
    std::vector<VolComponent> components;
    bool state_dependent = false;
    bool time_dependent = false;

    /// sigma and alpha can be evaluated once per simulation.
    [[nodiscard]] bool is_constant() const noexcept { return !state_dependent && !time_dependent; }

    [[nodiscard]] std::size_t dimension() const noexcept { return components.size(); }

    [[nodiscard]] std::vector<ForwardCurve> evaluate(double t, const ForwardCurve& r) const {
        std::vector<ForwardCurve> out;
        out.reserve(components.size());
        for (const auto& c : components) {
            auto s = c(t, r);
            if (!s.in_h0()) fail(ErrorCode::InvalidArgument, "hjmm_sim.VolSpec", "volatility must vanish at infinity");
            if (!same_grid(s.grid_ptr(), r.grid_ptr())) {
                fail(ErrorCode::GridMismatch, "hjmm_sim.VolSpec", "volatility grid differs from state grid");
            }
            out.push_back(std::move(s));
        }
        return out;
    }
};

/// Deterministic volatility given by fixed curves.
inline VolSpec constant_vol(std::vector<ForwardCurve> curves) {
    VolSpec v;
    for (auto& c : curves) {
        v.components.push_back([c = std::move(c)](double, const ForwardCurve&) { return c; });
    }
    return v;
}

/// sigma(x) = c e^{-a x}, projected onto the grid in H_gamma.
inline ForwardCurve vasicek_curve(const GridPtr& grid, const WeightParams& w, double c, double a) {
    if (!(a > 0.0)) fail(ErrorCode::InvalidArgument, "hjmm_sim.vasicek_vol", "need a > 0");
    if (!(2.0 * a > w.gamma())) {
        fail(ErrorCode::InvalidArgument, "hjmm_sim.vasicek_vol",
             "c e^{-a x} lies in H_gamma only for a > gamma/2");
    }
    return project_function(
        grid, w, [=](double x) { return c * std::exp(-a * x); }, [=](double x) { return -a * c * std::exp(-a * x); });
}

inline VolSpec vasicek_vol(const GridPtr& grid, const WeightParams& w, double c, double a) {
    return constant_vol({vasicek_curve(grid, w, c, a)});
}

inline ForwardCurve hjm_drift(const VolSpec& vol, double t, const ForwardCurve& r) {
    return drift_from_components(vol.evaluate(t, r), r.grid_ptr());
}

/// Pointwise alpha(x) = sum_j sigma^j(x) int_0^x sigma^j for the grid volatility,
/// before the drift is stored as a grid curve.
inline double hjm_drift_at(const VolSpec& vol, double t, const ForwardCurve& r, double x) {
    double a = 0.0;
    for (const auto& s : vol.evaluate(t, r)) {
        const Grid& g = s.grid();
        auto cum = cumulative_integral(s);
        double y = std::min(x, g.x_max());
        std::size_t i = g.cell_of(y);
        double w = g.width(i);
        double u = (y - g.node(i)) / w;
        auto p = s.value_poly(i);
        double partial = w * (p[0] * u + p[1] * u * u / 2.0 + p[2] * u * u * u / 3.0 + s.h_inf() * u);
        a += s.value(x) * (cum[i] + partial);
    }
    return a;
}

namespace detail {

inline ForwardCurve euler_step_with(const ForwardCurve& r, const std::vector<ForwardCurve>& sig, const ForwardCurve& alpha,
                                    double dt, std::span<const double> dW) {
    if (dW.size() != sig.size()) {
        fail(ErrorCode::InvalidArgument, "hjmm_sim.euler_step", "need one increment per volatility component");
    }
    ForwardCurve next = r;
    next.axpy(dt, alpha);
    for (std::size_t j = 0; j < sig.size(); ++j) next.axpy(dW[j], sig[j]);
    return shift(next, dt);
}

}  // namespace detail

/// r+ = S_dt (r + alpha dt + sum_j sigma^j dW_j).
inline ForwardCurve euler_step(const ForwardCurve& r, double t, const VolSpec& vol, double dt, std::span<const double> dW) {
    auto sig = vol.evaluate(t, r);
    return detail::euler_step_with(r, sig, drift_from_components(sig, r.grid_ptr()), dt, dW);
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct SimConfig {
    double dt = 1.0 / 252.0;
    double t_max = 1.0;
    std::size_t n_paths = 100;
    std::uint64_t seed = 1;
    bool record_states = true;  ///< keep every step; otherwise only the initial and final states

    [[nodiscard]] std::size_t n_steps() const { return static_cast<std::size_t>(std::llround(t_max / dt)); }

    void validate(const Grid& grid) const {
        const char* where = "hjmm_sim.SimConfig";
        if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::InvalidArgument, where, "dt must be positive");
        if (!(t_max >= dt)) fail(ErrorCode::InvalidArgument, where, "need dt <= t_max");
        double n = t_max / dt;
        if (std::abs(n - std::round(n)) > 1e-9 * n) {
            fail(ErrorCode::InvalidArgument, where, "t_max must be an integer multiple of dt");
        }
        if (n_paths == 0) fail(ErrorCode::InvalidArgument, where, "n_paths must be >= 1");
        if (dt > grid.x_max()) fail(ErrorCode::HorizonExceeded, where, "dt exceeds the grid horizon");
    }
};

/// Grid for simulation: truncation point for the weights plus the time horizon,
/// so shifted curves never read past the represented range.
inline GridPtr sim_grid(const WeightParams& w, std::size_t n_cells, double t_max, Spacing spacing = Spacing::Graded) {
    return share(Grid::make(spacing, recommended_x_max(w) + t_max, n_cells));
}

/// Increments for one path: n_steps rows of d values, each N(0, dt), drawn from
/// the counter stream (seed, path).
inline std::vector<double> brownian_increments(std::uint64_t seed, std::size_t path, std::size_t n_steps, std::size_t d,
                                               double dt) {
    std::vector<double> out(n_steps * d);
    double sd = std::sqrt(dt);
    for (std::size_t i = 0; i < n_steps; ++i) {
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = sd * rng::normal(seed, path, i, j);
    }
    return out;
}

/// Sum consecutive blocks of `factor` steps: increments for a coarser time step
/// driven by the same Brownian path.
inline std::vector<double> coarsen(const std::vector<double>& inc, std::size_t d, std::size_t factor) {
    if (factor == 0 || d == 0 || inc.size() % (d * factor) != 0) {
        fail(ErrorCode::InvalidArgument, "hjmm_sim.coarsen", "increment count not divisible by factor");
    }
    std::size_t n = inc.size() / (d * factor);
    std::vector<double> out(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < factor; ++k) {
            for (std::size_t j = 0; j < d; ++j) out[i * d + j] += inc[(i * factor + k) * d + j];
        }
    }
    return out;
}

struct Path {
    std::vector<std::size_t> steps;    ///< step index of each stored state
    std::vector<ForwardCurve> states;  ///< r at t = steps[k] * dt
    std::vector<double> increments;    ///< n_steps * d values, row-major by step
};

struct PathEnsemble {
    SimConfig config;
    std::size_t dimension = 0;
    GridPtr grid;
    std::vector<Path> paths;

    [[nodiscard]] double time(std::size_t step) const { return static_cast<double>(step) * config.dt; }
    [[nodiscard]] bool has_increments() const {
        for (const auto& p : paths) {
            if (p.increments.size() != config.n_steps() * dimension) return false;
        }
        return !paths.empty();
    }
};

/// Worker count: hardware concurrency, capped by FCS_THREADS when set.
inline std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FCS_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Run body(i) for i in [0, n) on worker threads; each index is processed once
/// and results must be written to per-index slots.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
    std::size_t workers = worker_count(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline Path run_path(const ForwardCurve& h0, const VolSpec& vol, const SimConfig& cfg, std::vector<double> increments) {
    const std::size_t n = cfg.n_steps();
    const std::size_t d = vol.dimension();
    if (increments.size() != n * d) {
        fail(ErrorCode::MissingIncrements, "hjmm_sim.simulate", "increment count does not match steps * dimension");
    }
    Path p;
    p.steps.push_back(0);
    p.states.push_back(h0);
    ForwardCurve r = h0;
    std::optional<std::vector<ForwardCurve>> sig;
    std::optional<ForwardCurve> alpha;
    if (vol.is_constant()) {
        sig = vol.evaluate(0.0, h0);
        alpha = drift_from_components(*sig, h0.grid_ptr());
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> dW(increments.data() + i * d, d);
        r = sig ? detail::euler_step_with(r, *sig, *alpha, cfg.dt, dW)
                : euler_step(r, static_cast<double>(i) * cfg.dt, vol, cfg.dt, dW);
        if (cfg.record_states || i + 1 == n) {
            p.steps.push_back(i + 1);
            p.states.push_back(r);
        }
    }
    p.increments = std::move(increments);
    return p;
}

/// Paths driven by caller-supplied increments (one vector per path).
inline PathEnsemble simulate_with_increments(const ForwardCurve& h0, const VolSpec& vol, const SimConfig& cfg,
                                             std::vector<std::vector<double>> increments) {
    cfg.validate(h0.grid());
    if (increments.size() != cfg.n_paths) {
        fail(ErrorCode::MissingIncrements, "hjmm_sim.simulate_with_increments", "need one increment vector per path");
    }
    PathEnsemble e{cfg, vol.dimension(), h0.grid_ptr(), std::vector<Path>(cfg.n_paths)};
    parallel_for(cfg.n_paths, [&](std::size_t k) { e.paths[k] = run_path(h0, vol, cfg, std::move(increments[k])); });
    return e;
}

inline PathEnsemble simulate(const ForwardCurve& h0, const VolSpec& vol, const SimConfig& cfg) {
    cfg.validate(h0.grid());
    PathEnsemble e{cfg, vol.dimension(), h0.grid_ptr(), std::vector<Path>(cfg.n_paths)};
    parallel_for(cfg.n_paths, [&](std::size_t k) {
        auto inc = brownian_increments(cfg.seed, k, cfg.n_steps(), vol.dimension(), cfg.dt);
        e.paths[k] = run_path(h0, vol, cfg, std::move(inc));
    });
    return e;
}

/// Index into path.states of the first state with ||r||_gamma >= K, or none.
/// K must exceed the initial norm, so the index is never 0.
inline std::optional<std::size_t> hitting_index(const Path& path, const CurveSpace& space, double K) {
    double n0 = space.hgamma_norm(path.states.front());
    if (!(K > n0)) {
        fail(ErrorCode::BadThreshold, "hjmm_sim.hitting_time",
             "K=" + format_double(K) + " must exceed ||h0||_gamma=" + format_double(n0));
    }
    for (std::size_t k = 1; k < path.states.size(); ++k) {
        if (space.hgamma_norm(path.states[k]) >= K) return k;
    }
    return std::nullopt;
}

/// First recorded time with ||r_t||_gamma >= K.
inline std::optional<double> hitting_time(const Path& path, const CurveSpace& space, double K, double dt) {
    auto k = hitting_index(path, space, K);
    if (!k) return std::nullopt;
    return static_cast<double>(path.steps[*k]) * dt;
}

}  // namespace fcs
