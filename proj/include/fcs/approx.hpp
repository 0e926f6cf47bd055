#pragma once

// Finite-rank operators applied along simulated paths, the finite-dimensional
// Ito approximant driven by the same Brownian increments, and pathwise audits
// of the truncation bounds
//
//   ||T_n r_t - r_t||_H2          <= s_{n+1} ||r_t||_gamma
//   ||S_n r_t - r_t||_H2          <= (s_{n+1} + eps_n) ||r_t||_gamma
//   sup_t ||S_n r_{t^tau} - r_{t^tau}||_H2 <= K (s_{n+1} + eps_n)

#include "fcs/curve.hpp"
#include "fcs/curve_space.hpp"
#include "fcs/error.hpp"
#include "fcs/hjmm.hpp"
#include "fcs/random.hpp"
#include "fcs/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fcs {

/// Absolute slack added to every audited bound.
inline constexpr double kAuditSlack = 1e-8;

/// Default perturbation budget eps_n = 2^{-n}.
inline double default_eps(std::size_t n) { return std::ldexp(1.0, -static_cast<int>(n)); }

/// F_n-valued process: coordinates in f_1..f_n at the recorded steps.
struct ProjectedPath {
    std::vector<std::size_t> steps;
    std::vector<Eigen::VectorXd> coefficients;
    std::shared_ptr<const FiniteRankOperator> op;
    std::uint64_t increments_checksum = 0;

    [[nodiscard]] ForwardCurve curve(std::size_t i) const { return op->reconstruct(coefficients.at(i)); }
};

struct ErrorRow {
    std::size_t path = 0;
    std::size_t step = 0;
    double t = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  ///< lhs / (rhs + slack); the bound holds iff margin <= 1
};

struct ErrorReport {
    std::string label;
    std::size_t rank = 0;
    double bound = 0.0;  ///< constant multiplying ||r_t||_gamma (or the absolute bound for uni_local)
    std::vector<ErrorRow> rows;
    double worst_margin = 0.0;
    double worst_lhs = 0.0;
    std::size_t worst_path = 0;
    std::size_t worst_step = 0;
    std::vector<std::pair<std::string, double>> metadata;

    [[nodiscard]] bool passed() const noexcept { return worst_margin <= 1.0; }
};

namespace detail {

inline void require_same_grid(const PathEnsemble& ens, const FiniteRankOperator& op, const char* where) {
    if (!same_grid(ens.grid, op.basis()->grid_ptr())) {
        fail(ErrorCode::BasisMismatch, where, "ensemble and operator live on different grids");
    }
}

inline void require_same_basis(const FiniteRankOperator& op, const SingularSystem& sys, const char* where) {
    if (!(*op.basis() == *sys.basis())) fail(ErrorCode::BasisMismatch, where, "operator and system use different bases");
}

inline double margin(double lhs, double rhs) { return lhs / (rhs + kAuditSlack); }

/// Fold per-path rows into a report in path order, so the worst row does not
/// depend on thread scheduling.
inline void collect(ErrorReport& rep, std::vector<std::vector<ErrorRow>> per_path) {
    bool first = true;
    for (auto& rows : per_path) {
        for (auto& r : rows) {
            if (first || r.margin > rep.worst_margin) {
                rep.worst_margin = r.margin;
                rep.worst_path = r.path;
                rep.worst_step = r.step;
                first = false;
            }
            rep.worst_lhs = std::max(rep.worst_lhs, r.lhs);
            rep.rows.push_back(r);
        }
    }
}

/// Rows lhs = ||op(r) - r||_H2, rhs = factor * ||r||_gamma for states [0, last].
inline std::vector<ErrorRow> relative_rows(const PathEnsemble& ens, std::size_t p, const FiniteRankOperator& op,
                                           const CurveSpace& space, double factor, std::size_t last) {
    const Path& path = ens.paths[p];
    std::vector<ErrorRow> rows;
    rows.reserve(last + 1);
    for (std::size_t i = 0; i <= last && i < path.states.size(); ++i) {
        const ForwardCurve& r = path.states[i];
        ErrorRow row;
        row.path = p;
        row.step = path.steps[i];
        row.t = ens.time(row.step);
        row.lhs = space.h2_norm(op.apply(r) - r);
        row.rhs = factor * space.hgamma_norm(r);
        row.margin = margin(row.lhs, row.rhs);
        rows.push_back(row);
    }
    return rows;
}

/// Measured regularity of the perturbations zeta_k - e_k: the fraction of
/// each budget used and the largest jump of the derivative's slope.
inline void record_perturbation(ErrorReport& rep, const FiniteRankOperator& op, const SingularSystem& sys, double eps) {
    const Grid& g = sys.basis()->grid();
    const CurveSpace space(sys.basis()->grid_ptr(), sys.basis()->params());
    double fill = 0.0, rel = 0.0, kink = 0.0;
    for (std::size_t k = 0; k < op.rank(); ++k) {
        ForwardCurve delta = op.functional(k) - sys.e(k);
        double nrm = space.hgamma_norm(delta);
        rel = std::max(rel, nrm);
        if (eps > 0.0) fill = std::max(fill, nrm * std::ldexp(1.0, static_cast<int>(k + 1)) * sys.s()[k] / eps);
        const auto& d = delta.dcoef();
        for (std::size_t i = 1; i + 1 < d.size(); ++i) {
            double left = (d[i] - d[i - 1]) / g.width(i - 1);
            double right = (d[i + 1] - d[i]) / g.width(i);
            kink = std::max(kink, std::abs(right - left));
        }
    }
    rep.metadata.emplace_back("perturbation_budget_fill", fill);
    rep.metadata.emplace_back("perturbation_max_hgamma_norm", rel);
    rep.metadata.emplace_back("perturbation_max_slope_jump", kink);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Projection and the Ito approximant
// ---------------------------------------------------------------------------

/// Coefficient k at each recorded step is s_k <r_t, zeta_k>_gamma.
inline ProjectedPath project_path(const Path& path, std::shared_ptr<const FiniteRankOperator> op) {
    ProjectedPath out;
    out.steps = path.steps;
    out.coefficients.reserve(path.states.size());
    for (const auto& r : path.states) out.coefficients.push_back(op->coefficients(r));
    out.op = std::move(op);
    out.increments_checksum = rng::checksum(path.increments);
    return out;
}

inline std::vector<ProjectedPath> project_path(const PathEnsemble& ens, const FiniteRankOperator& op) {
    detail::require_same_grid(ens, op, "approx.project_path");
    auto shared = std::make_shared<const FiniteRankOperator>(op);
    std::vector<ProjectedPath> out(ens.paths.size());
    parallel_for(ens.paths.size(), [&](std::size_t p) { out[p] = project_path(ens.paths[p], shared); });
    return out;
}

/// Euler integration of the n coefficient processes with the path's own
/// increments. The generator pairing <A* zeta, r> is replaced by the
/// semigroup difference <zeta, (S_dt r - r) / dt>_gamma. Requires every step
/// to be recorded.
inline ProjectedPath ito_approximant(const Path& path, const FiniteRankOperator& op, const VolSpec& vol,
                                     const SimConfig& cfg) {
    const char* where = "approx.ito_approximant";
    const std::size_t n = cfg.n_steps();
    const std::size_t d = vol.dimension();
    if (path.increments.size() != n * d) fail(ErrorCode::MissingIncrements, where, "path has no recorded increments");
    if (path.states.size() != n + 1) fail(ErrorCode::MissingIncrements, where, "path must record every step");
    if (!same_grid(path.states.front().grid_ptr(), op.basis()->grid_ptr())) {
        fail(ErrorCode::BasisMismatch, where, "path and operator live on different grids");
    }
    auto shared = std::make_shared<const FiniteRankOperator>(op);

    std::vector<Eigen::VectorXd> sig_c;
    Eigen::VectorXd alpha_c;
    auto load_vol = [&](double t, const ForwardCurve& r) {
        auto sig = vol.evaluate(t, r);
        alpha_c = op.coefficients(drift_from_components(sig, r.grid_ptr()));
        sig_c.clear();
        for (const auto& s : sig) sig_c.push_back(op.coefficients(s));
    };
    if (vol.is_constant()) load_vol(0.0, path.states.front());

    ProjectedPath out;
    out.steps.resize(n + 1);
    out.coefficients.reserve(n + 1);
    Eigen::VectorXd c = op.coefficients(path.states.front());
    out.steps[0] = 0;
    out.coefficients.push_back(c);
    for (std::size_t i = 0; i < n; ++i) {
        const ForwardCurve& r = path.states[i];
        if (!vol.is_constant()) load_vol(static_cast<double>(i) * cfg.dt, r);
        c += op.coefficients(shift(r, cfg.dt) - r);
        c += cfg.dt * alpha_c;
        for (std::size_t j = 0; j < d; ++j) c += path.increments[i * d + j] * sig_c[j];
        out.steps[i + 1] = i + 1;
        out.coefficients.push_back(c);
    }
    out.op = std::move(shared);
    out.increments_checksum = rng::checksum(path.increments);
    return out;
}

/// max over shared steps of ||a - b||_H2. The f_k are orthonormal in H2, so
/// this is the Euclidean distance of the coefficient vectors.
inline double max_gap(const ProjectedPath& a, const ProjectedPath& b) {
    if (a.steps != b.steps) fail(ErrorCode::InvalidArgument, "approx.max_gap", "paths record different steps");
    double g = 0.0;
    for (std::size_t i = 0; i < a.coefficients.size(); ++i) {
        g = std::max(g, (a.coefficients[i] - b.coefficients[i]).norm());
    }
    return g;
}

// ---------------------------------------------------------------------------
// Audits
// ---------------------------------------------------------------------------

/// lhs = ||T_n r_t - r_t||_H2 against s_{n+1} ||r_t||_gamma.
inline ErrorReport audit_norm_conv(const PathEnsemble& ens, const FiniteRankOperator& tn, const SingularSystem& sys) {
    const char* where = "approx.audit_norm_conv";
    detail::require_same_grid(ens, tn, where);
    detail::require_same_basis(tn, sys, where);
    const CurveSpace space(ens.grid, sys.basis()->params());
    ErrorReport rep;
    rep.label = "norm_conv";
    rep.rank = tn.rank();
    rep.bound = sys.s_at(tn.rank());
    std::vector<std::vector<ErrorRow>> rows(ens.paths.size());
    parallel_for(ens.paths.size(), [&](std::size_t p) {
        rows[p] = detail::relative_rows(ens, p, tn, space, rep.bound, ens.paths[p].states.size());
    });
    detail::collect(rep, std::move(rows));
    return rep;
}

/// lhs = ||S_n r_t - r_t||_H2 against (s_{n+1} + eps_n) ||r_t||_gamma. The
/// projected path stands in for the Ito approximant.
inline ErrorReport audit_est_epsilon_n(const PathEnsemble& ens, const FiniteRankOperator& sn, const SingularSystem& sys,
                                       double eps_n) {
    const char* where = "approx.audit_est_epsilon_n";
    detail::require_same_grid(ens, sn, where);
    detail::require_same_basis(sn, sys, where);
    if (!(eps_n >= 0.0)) fail(ErrorCode::InvalidArgument, where, "eps_n must be non-negative");
    const CurveSpace space(ens.grid, sys.basis()->params());
    ErrorReport rep;
    rep.label = "est_epsilon_n";
    rep.rank = sn.rank();
    rep.bound = sys.s_at(sn.rank()) + eps_n;
    std::vector<std::vector<ErrorRow>> rows(ens.paths.size());
    parallel_for(ens.paths.size(), [&](std::size_t p) {
        rows[p] = detail::relative_rows(ens, p, sn, space, rep.bound, ens.paths[p].states.size());
    });
    detail::collect(rep, std::move(rows));
    rep.metadata.emplace_back("eps_n", eps_n);
    detail::record_perturbation(rep, sn, sys, eps_n);
    return rep;
}

/// Paths stopped at the first recorded state with ||r||_gamma >= K (that
/// state included); every audited lhs is compared with K (s_{n+1} + eps_n).
inline ErrorReport audit_uni_local(const PathEnsemble& ens, const FiniteRankOperator& sn, const SingularSystem& sys,
                                   double eps_n, double K) {
    const char* where = "approx.audit_uni_local";
    detail::require_same_grid(ens, sn, where);
    detail::require_same_basis(sn, sys, where);
    if (!(eps_n >= 0.0)) fail(ErrorCode::InvalidArgument, where, "eps_n must be non-negative");
    const CurveSpace space(ens.grid, sys.basis()->params());
    for (const auto& p : ens.paths) {
        double n0 = space.hgamma_norm(p.states.front());
        if (!(K > n0)) {
            fail(ErrorCode::BadThreshold, where, "K=" + format_double(K) + " must exceed ||h0||_gamma=" + format_double(n0));
        }
    }
    ErrorReport rep;
    rep.label = "uni_local";
    rep.rank = sn.rank();
    rep.bound = K * (sys.s_at(sn.rank()) + eps_n);
    std::vector<std::vector<ErrorRow>> rows(ens.paths.size());
    std::vector<int> hit(ens.paths.size(), 0);
    parallel_for(ens.paths.size(), [&](std::size_t p) {
        const Path& path = ens.paths[p];
        auto tau = hitting_index(path, space, K);
        std::size_t last = tau ? *tau : path.states.size() - 1;
        hit[p] = tau ? 1 : 0;
        for (std::size_t i = 0; i <= last; ++i) {
            const ForwardCurve& r = path.states[i];
            ErrorRow row;
            row.path = p;
            row.step = path.steps[i];
            row.t = ens.time(row.step);
            row.lhs = space.h2_norm(sn.apply(r) - r);
            row.rhs = rep.bound;
            row.margin = detail::margin(row.lhs, row.rhs);
            rows[p].push_back(row);
        }
    });
    detail::collect(rep, std::move(rows));
    double n_hit = 0.0;
    for (int h : hit) n_hit += h;
    rep.metadata.emplace_back("eps_n", eps_n);
    rep.metadata.emplace_back("K", K);
    rep.metadata.emplace_back("paths_stopped", n_hit);
    return rep;
}

struct MseEstimate {
    double value = 0.0;      ///< E[sup_t ||op(r_t) - r_t||^2_H2]^{1/2}
    double std_error = 0.0;  ///< delta-method standard error of value
    double k_hat = 0.0;      ///< E[sup_t ||r_t||^2_gamma]^{1/2}
    double bound = 0.0;      ///< k_hat (s_{n+1} + eps_n)

    [[nodiscard]] bool passed() const noexcept { return value <= bound + kAuditSlack; }
};

inline MseEstimate mean_square_error(const PathEnsemble& ens, const FiniteRankOperator& op, const SingularSystem& sys,
                                     double eps_n) {
    const char* where = "approx.mean_square_error";
    if (ens.paths.empty()) fail(ErrorCode::EmptyEnsemble, where, "ensemble has no paths");
    detail::require_same_grid(ens, op, where);
    detail::require_same_basis(op, sys, where);
    const CurveSpace space(ens.grid, sys.basis()->params());
    const std::size_t np = ens.paths.size();
    std::vector<double> err2(np, 0.0), norm2(np, 0.0);
    parallel_for(np, [&](std::size_t p) {
        for (const auto& r : ens.paths[p].states) {
            double e = space.h2_norm(op.apply(r) - r);
            double h = space.hgamma_norm(r);
            err2[p] = std::max(err2[p], e * e);
            norm2[p] = std::max(norm2[p], h * h);
        }
    });
    double mean = 0.0, mean_n = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
        mean += err2[p];
        mean_n += norm2[p];
    }
    mean /= static_cast<double>(np);
    mean_n /= static_cast<double>(np);

    MseEstimate out;
    out.value = std::sqrt(mean);
    out.k_hat = std::sqrt(mean_n);
    out.bound = out.k_hat * (sys.s_at(op.rank()) + eps_n);
    auto [lo, hi] = std::minmax_element(err2.begin(), err2.end());
    if (np > 1 && *lo != *hi && mean > 0.0) {
        double var = 0.0;
        for (double x : err2) var += (x - mean) * (x - mean);
        var /= static_cast<double>(np - 1);
        out.std_error = std::sqrt(var / static_cast<double>(np)) / (2.0 * out.value);
    }
    return out;
}

}  // namespace fcs
