#pragma once

// Norms, inner products and embedding constants of the forward curve spaces
//
//   H_gamma:       ||h||_gamma^2 = |h(0)|^2 + int |h'(x)|^2 e^{gamma x} dx
//   L^2_beta:      ||h||^2 = int |h(x)|^2 e^{beta x} dx
//   L^2_beta (+) R: ||h||^2 = ||h - h(inf)||^2_{L^2_beta} + |h(inf)|^2
//
// All integrals of grid curves are exact: per cell the integrand is a
// polynomial in u = (x - x_i)/w_i times an exponential, integrated with
// closed-form moments.

#include "fcs/curve.hpp"
#include "fcs/error.hpp"
#include "fcs/grid.hpp"
#include "fcs/quadrature.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fcs {

/// Exponential moments int_cell u^k e^{rate x} dx for every cell of a grid.
class CellMoments {
public:
    CellMoments(const Grid& grid, double rate) : rate_(rate), m_(grid.n_cells()) {
        for (std::size_t i = 0; i < grid.n_cells(); ++i) {
            m_[i] = quad::cell_exp_moments(rate, grid.node(i), grid.width(i));
        }
    }
    [[nodiscard]] const quad::Moments& operator[](std::size_t cell) const { return m_[cell]; }
    [[nodiscard]] double rate() const noexcept { return rate_; }
    [[nodiscard]] std::size_t size() const noexcept { return m_.size(); }

private:
    double rate_;
    std::vector<quad::Moments> m_;
};

namespace detail {

template <std::size_t A, std::size_t B>
double poly_product_moment(const std::array<double, A>& p, const std::array<double, B>& q, const quad::Moments& m) {
    static_assert(A + B - 2 <= quad::kMaxMomentDegree);
    double s = 0.0;
    for (std::size_t k = 0; k < A; ++k) {
        for (std::size_t l = 0; l < B; ++l) s += p[k] * q[l] * m[k + l];
    }
    return s;
}

/// int h' g' e^{rate x} over the grid.
inline double derivative_inner(const ForwardCurve& h, const ForwardCurve& g, const CellMoments& mom) {
    double s = 0.0;
    for (std::size_t i = 0; i < mom.size(); ++i) {
        s += poly_product_moment(h.derivative_poly(i), g.derivative_poly(i), mom[i]);
    }
    return s;
}

/// int (h - h(inf)) (g - g(inf)) e^{rate x} over the grid.
inline double relative_value_inner(const ForwardCurve& h, const ForwardCurve& g, const CellMoments& mom) {
    double s = 0.0;
    for (std::size_t i = 0; i < mom.size(); ++i) {
        s += poly_product_moment(h.value_poly(i), g.value_poly(i), mom[i]);
    }
    return s;
}

inline void require_h0(const ForwardCurve& h, const char* where) {
    if (!h.in_h0()) {
        fail(ErrorCode::TailNotNegligible, where,
             "curve has h(inf) = " + std::to_string(h.h_inf()) + " != 0; its L^2_beta integral diverges");
    }
}

}  // namespace detail

/// Cached metric of one (grid, weights) pair. Use this in loops; the free
/// functions below rebuild the moment tables on every call.
class CurveSpace {
public:
    CurveSpace(GridPtr grid, WeightParams w)
        : grid_(std::move(grid)), w_(w), mom_gamma_(*grid_, w.gamma()), mom_beta_(*grid_, w.beta()) {}

    [[nodiscard]] const GridPtr& grid_ptr() const noexcept { return grid_; }
    [[nodiscard]] const Grid& grid() const noexcept { return *grid_; }
    [[nodiscard]] const WeightParams& params() const noexcept { return w_; }

    [[nodiscard]] double hgamma_inner(const ForwardCurve& h, const ForwardCurve& g) const {
        check(h);
        check(g);
        return h.h0() * g.h0() + detail::derivative_inner(h, g, mom_gamma_);
    }
    [[nodiscard]] double hgamma_norm(const ForwardCurve& h) const { return std::sqrt(hgamma_inner(h, h)); }

    [[nodiscard]] double l2beta_inner(const ForwardCurve& h, const ForwardCurve& g) const {
        check(h);
        check(g);
        detail::require_h0(h, "curve_space.l2beta_norm");
        detail::require_h0(g, "curve_space.l2beta_norm");
        return detail::relative_value_inner(h, g, mom_beta_);
    }
    [[nodiscard]] double l2beta_norm(const ForwardCurve& h) const { return std::sqrt(l2beta_inner(h, h)); }

    /// Inner product of L^2_beta (+) R after the split h = (h - h(inf)) + h(inf).
    [[nodiscard]] double h2_inner(const ForwardCurve& h, const ForwardCurve& g) const {
        check(h);
        check(g);
        return detail::relative_value_inner(h, g, mom_beta_) + h.h_inf() * g.h_inf();
    }
    [[nodiscard]] double h2_norm(const ForwardCurve& h) const { return std::sqrt(h2_inner(h, h)); }

private:
    void check(const ForwardCurve& h) const {
        if (!same_grid(h.grid_ptr(), grid_)) fail(ErrorCode::GridMismatch, "curve_space", "curve not on this space's grid");
    }

    GridPtr grid_;
    WeightParams w_;
    CellMoments mom_gamma_;
    CellMoments mom_beta_;
};

/// (|h(0)|^2 + int |h'|^2 e^{exponent x} dx)^{1/2}; the H_gamma norm for exponent = gamma.
inline double hweighted_norm(const ForwardCurve& h, double exponent) {
    CellMoments mom(h.grid(), exponent);
    return std::sqrt(h.h0() * h.h0() + detail::derivative_inner(h, h, mom));
}

inline double hgamma_inner(const ForwardCurve& h, const ForwardCurve& g, const WeightParams& w) {
    h.check_same_grid(g, "curve_space.hgamma_inner");
    CellMoments mom(h.grid(), w.gamma());
    return h.h0() * g.h0() + detail::derivative_inner(h, g, mom);
}

inline double hgamma_norm(const ForwardCurve& h, const WeightParams& w) { return hweighted_norm(h, w.gamma()); }

inline double l2beta_norm(const ForwardCurve& h, const WeightParams& w) {
    detail::require_h0(h, "curve_space.l2beta_norm");
    CellMoments mom(h.grid(), w.beta());
    return std::sqrt(detail::relative_value_inner(h, h, mom));
}

/// Weighted L^2 norm of the piecewise-linear interpolant of the samples with
/// weight e^{weight_exponent x}.
inline double sampled_l2_norm(const SampledCurve& c) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        double a = c.values[i];
        double b = c.values[i + 1];
        double w = c.nodes[i + 1] - c.nodes[i];
        if (c.weight_exponent == 0.0) {
            s += w * (a * a + a * b + b * b) / 3.0;
        } else {
            auto m = quad::cell_exp_moments(c.weight_exponent, c.nodes[i], w);
            std::array<double, 2> p{a, b - a};
            s += detail::poly_product_moment(p, p, m);
        }
    }
    return std::sqrt(s);
}

inline double l2beta_norm(const SampledCurve& c, const WeightParams& w) {
    SampledCurve weighted = c;
    weighted.weight_exponent = w.beta();
    if (c.nodes.front() < 0.0) {
        fail(ErrorCode::InvalidArgument, "curve_space.l2beta_norm", "L^2_beta samples must lie in [0, inf)");
    }
    return sampled_l2_norm(weighted);
}

/// W^1 norm of the piecewise-linear interpolant (unweighted).
inline double sampled_w1_norm(const SampledCurve& c) {
    SampledCurve plain = c;
    plain.weight_exponent = 0.0;
    double l2 = sampled_l2_norm(plain);
    double d2 = 0.0;
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        double w = c.nodes[i + 1] - c.nodes[i];
        double slope = (c.values[i + 1] - c.values[i]) / w;
        d2 += w * slope * slope;
    }
    return std::sqrt(l2 * l2 + d2);
}

inline double product_norm(const ProductElement& p) {
    double l2 = sampled_l2_norm(p.l2_part);
    return std::sqrt(l2 * l2 + p.scalar_part * p.scalar_part);
}

// ---------------------------------------------------------------------------
// Embedding constants
// ---------------------------------------------------------------------------

/// ||h||_{L^2_beta} <= C1 ||h||_gamma on H^0_gamma, C1 = 1/sqrt(gamma (gamma - beta)).
inline double embedding_constant_c1(double beta, double gamma) { return 1.0 / std::sqrt(gamma * (gamma - beta)); }
inline double embedding_constant_c1(const WeightParams& w) { return embedding_constant_c1(w.beta(), w.gamma()); }

/// W^1(R) bound of the reflected lift (h e^{(beta/2) x})^*:
/// C2^2 = 2 C1^2 + 2 (2 + beta^2 C1^2 / 2).
inline double embedding_constant_c2(const WeightParams& w) {
    double c1 = embedding_constant_c1(w);
    double b = w.beta();
    return std::sqrt(2.0 * c1 * c1 + 4.0 + b * b * c1 * c1);
}

/// L^1(R) bound of the reflected lift: C3 = 2 C1(delta, gamma) / sqrt(delta - beta).
inline double embedding_constant_c3(const WeightParams& w) {
    double d = w.delta();
    return 2.0 * embedding_constant_c1(d, w.gamma()) * std::sqrt(1.0 / (d - w.beta()));
}

// ---------------------------------------------------------------------------
// Reflection, lift, split
// ---------------------------------------------------------------------------

/// Even extension h*(x) = h(|x|) of samples on [0, L] to [-L, L].
inline SampledCurve reflect(const SampledCurve& h) {
    if (h.nodes.front() != 0.0) {
        fail(ErrorCode::InvalidArgument, "curve_space.reflect", "samples must start at x = 0");
    }
    std::size_t n = h.size();
    std::vector<double> x(2 * n - 1);
    std::vector<double> v(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        x[n - 1 + i] = h.nodes[i];
        v[n - 1 + i] = h.values[i];
        x[n - 1 - i] = -h.nodes[i];
        v[n - 1 - i] = h.values[i];
    }
    return SampledCurve(std::move(x), std::move(v), 0.0);
}

/// Samples of x -> h(x) e^{(beta/2) x} on [0, x_max], `per_cell` points per cell.
inline SampledCurve weighted_lift(const ForwardCurve& h, const WeightParams& w, std::size_t per_cell = 16) {
    detail::require_h0(h, "curve_space.weighted_lift");
    const Grid& g = h.grid();
    std::vector<double> x;
    x.reserve(g.n_cells() * per_cell + 1);
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        for (std::size_t k = 0; k < per_cell; ++k) {
            x.push_back(g.node(i) + g.width(i) * static_cast<double>(k) / static_cast<double>(per_cell));
        }
    }
    x.push_back(g.x_max());
    std::vector<double> v(x.size());
    double half = 0.5 * w.beta();
    for (std::size_t i = 0; i < x.size(); ++i) v[i] = h.relative_value(x[i]) * std::exp(half * x[i]);
    return SampledCurve(std::move(x), std::move(v), 0.0);
}

struct SplitCurve {
    ForwardCurve zero_level;  ///< h - h(inf), an element of H^0_gamma
    double level;             ///< h(inf)
};

inline SplitCurve split(const ForwardCurve& h) {
    std::vector<double> d(h.dcoef().begin(), h.dcoef().end());
    return {ForwardCurve(h.grid_ptr(), 0.0, std::move(d)), h.h_inf()};
}

inline ProductElement to_product(const ForwardCurve& h, const WeightParams& w, std::size_t per_cell = 16) {
    auto parts = split(h);
    SampledCurve s = weighted_lift(parts.zero_level, w, per_cell);
    // Store h itself with weight e^{beta x} rather than the lifted samples.
    double half = 0.5 * w.beta();
    for (std::size_t i = 0; i < s.size(); ++i) s.values[i] *= std::exp(-half * s.nodes[i]);
    s.weight_exponent = w.beta();
    return {std::move(s), parts.level};
}

// ---------------------------------------------------------------------------
// Projection of analytic curves onto a grid
// ---------------------------------------------------------------------------

namespace detail {

/// Solve (T + b b^T) x = r with T symmetric tridiagonal (diag, off) by the
/// Thomas algorithm and Sherman-Morrison.
inline std::vector<double> solve_tridiag_rank1(const std::vector<double>& diag, const std::vector<double>& off,
                                               const std::vector<double>& b, const std::vector<double>& r) {
    std::size_t n = diag.size();
    auto thomas = [&](const std::vector<double>& rhs) {
        std::vector<double> c(n), d(n), x(n);
        double m = diag[0];
        c[0] = n > 1 ? off[0] / m : 0.0;
        d[0] = rhs[0] / m;
        for (std::size_t i = 1; i < n; ++i) {
            m = diag[i] - off[i - 1] * c[i - 1];
            c[i] = i + 1 < n ? off[i] / m : 0.0;
            d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / m;
        }
        x[n - 1] = d[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
        return x;
    };
    auto y = thomas(r);
    auto z = thomas(b);
    double by = 0.0, bz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        by += b[i] * y[i];
        bz += b[i] * z[i];
    }
    double f = by / (1.0 + bz);
    for (std::size_t i = 0; i < n; ++i) y[i] -= f * z[i];
    return y;
}

}  // namespace detail

/// H_gamma-orthogonal projection of an analytic curve f onto the grid space,
/// with the long-end level kept exact: the result is f_inf + P(f - f_inf).
/// `df` is the derivative of f.
inline ForwardCurve project_function(const GridPtr& grid, const WeightParams& w, const std::function<double(double)>& f,
                                     const std::function<double(double)>& df, double f_inf = 0.0) {
    const Grid& g = *grid;
    std::size_t n = g.n_nodes();
    CellMoments mom(g, w.gamma());
    std::vector<double> diag(n, 0.0), off(n > 1 ? n - 1 : 0, 0.0), b(n, 0.0), r(n, 0.0);
    double f0 = f(0.0) - f_inf;
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        const auto& m = mom[i];
        double wi = g.width(i);
        // hats phi_i = 1 - u, phi_{i+1} = u on cell i
        diag[i] += m[0] - 2.0 * m[1] + m[2];
        diag[i + 1] += m[2];
        off[i] += m[1] - m[2];
        b[i] -= 0.5 * wi;
        b[i + 1] -= 0.5 * wi;
        double a = g.node(i);
        double rate = w.gamma() + 1.0;
        r[i] += quad::integrate([&](double x) { return df(x) * (1.0 - (x - a) / wi) * std::exp(w.gamma() * x); },
                                a, a + wi, rate, 2);
        r[i + 1] += quad::integrate([&](double x) { return df(x) * ((x - a) / wi) * std::exp(w.gamma() * x); }, a,
                                    a + wi, rate, 2);
    }
    for (std::size_t i = 0; i < n; ++i) r[i] += f0 * b[i];
    auto d = detail::solve_tridiag_rank1(diag, off, b, r);
    return ForwardCurve(grid, f_inf, std::move(d));
}

}  // namespace fcs
