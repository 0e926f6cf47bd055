#pragma once

#include "fcs/error.hpp"
#include "fcs/grid.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace fcs {

/// Element of H_gamma on a truncated grid.
///
/// The weak derivative h' is continuous and piecewise linear with nodal values
/// `dcoef()[i] = h'(x_i)`, and h' = 0 beyond x_max. The curve is recovered from
/// its long-end level by h(x) = h(inf) - int_x^inf h'(s) ds, so h is piecewise
/// quadratic and h(x) = h(inf) for x >= x_max.
class ForwardCurve {
public:
    ForwardCurve(GridPtr grid, double h_inf, std::vector<double> dcoef)
        : grid_(std::move(grid)), h_inf_(h_inf), dcoef_(std::move(dcoef)) {
        if (!grid_) fail(ErrorCode::InvalidArgument, "curve_space.ForwardCurve", "null grid");
        if (dcoef_.size() != grid_->n_nodes()) {
            fail(ErrorCode::InvalidArgument, "curve_space.ForwardCurve",
                 "need one derivative value per node (" + std::to_string(grid_->n_nodes()) + "), got " +
                     std::to_string(dcoef_.size()));
        }
        if (!std::isfinite(h_inf_)) fail(ErrorCode::InvalidArgument, "curve_space.ForwardCurve", "h_inf not finite");
        rebuild_levels();
    }

    static ForwardCurve zero(GridPtr grid) {
        auto n = grid->n_nodes();
        return ForwardCurve(std::move(grid), 0.0, std::vector<double>(n, 0.0));
    }

    static ForwardCurve constant(GridPtr grid, double c) {
        auto n = grid->n_nodes();
        return ForwardCurve(std::move(grid), c, std::vector<double>(n, 0.0));
    }

    /// Coordinates are (h'(x_0), ..., h'(x_n)[, h(inf)]).
    static ForwardCurve from_coordinates(GridPtr grid, std::span<const double> coords, bool with_level) {
        std::size_t n = grid->n_nodes();
        if (coords.size() != n + (with_level ? 1 : 0)) {
            fail(ErrorCode::BasisMismatch, "curve_space.from_coordinates", "coordinate length mismatch");
        }
        std::vector<double> d(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(n));
        return ForwardCurve(std::move(grid), with_level ? coords[n] : 0.0, std::move(d));
    }

    [[nodiscard]] const Grid& grid() const noexcept { return *grid_; }
    [[nodiscard]] const GridPtr& grid_ptr() const noexcept { return grid_; }
    [[nodiscard]] double h_inf() const noexcept { return h_inf_; }
    [[nodiscard]] double h0() const noexcept { return h_inf_ + rel_[0]; }
    [[nodiscard]] std::span<const double> dcoef() const noexcept { return dcoef_; }
    [[nodiscard]] bool in_h0() const noexcept { return h_inf_ == 0.0; }

    /// h(x_i) - h(inf) at the nodes.
    [[nodiscard]] std::span<const double> relative_levels() const noexcept { return rel_; }

    [[nodiscard]] std::vector<double> coordinates(bool with_level) const {
        std::vector<double> c(dcoef_);
        if (with_level) c.push_back(h_inf_);
        return c;
    }

    [[nodiscard]] double eval(double x) const {
        if (!(x >= 0.0) || x > grid_->x_max()) {
            fail(ErrorCode::OutOfRange, "curve_space.eval",
                 "x=" + std::to_string(x) + " outside [0, " + std::to_string(grid_->x_max()) + "]");
        }
        return h_inf_ + relative_value(x);
    }

    /// h(x) - h(inf), defined on all of [0, inf).
    [[nodiscard]] double relative_value(double x) const {
        if (x >= grid_->x_max()) return 0.0;
        std::size_t i = grid_->cell_of(x);
        double w = grid_->width(i);
        double u = (x - grid_->node(i)) / w;
        double a = dcoef_[i];
        double b = dcoef_[i + 1];
        return rel_[i + 1] - w * (a * (1.0 - u) * (1.0 - u) + b * (1.0 - u * u)) * 0.5;
    }

    /// h(x) for any x >= 0 (constant h(inf) beyond the grid).
    [[nodiscard]] double value(double x) const { return h_inf_ + relative_value(x); }

    [[nodiscard]] double derivative(double x) const {
        if (x > grid_->x_max()) return 0.0;
        std::size_t i = grid_->cell_of(x);
        double u = (x - grid_->node(i)) / grid_->width(i);
        return dcoef_[i] + (dcoef_[i + 1] - dcoef_[i]) * u;
    }

    /// Coefficients of h - h(inf) on a cell as a quadratic in u = (x - x_i)/w_i.
    [[nodiscard]] std::array<double, 3> value_poly(std::size_t cell) const {
        double w = grid_->width(cell);
        double a = dcoef_[cell];
        double b = dcoef_[cell + 1];
        return {rel_[cell], w * a, -0.5 * w * (a - b)};
    }

    /// Coefficients of h' on a cell as a linear polynomial in u.
    [[nodiscard]] std::array<double, 2> derivative_poly(std::size_t cell) const {
        return {dcoef_[cell], dcoef_[cell + 1] - dcoef_[cell]};
    }

    ForwardCurve& operator+=(const ForwardCurve& o) { return axpy(1.0, o); }
    ForwardCurve& operator-=(const ForwardCurve& o) { return axpy(-1.0, o); }

    ForwardCurve& axpy(double alpha, const ForwardCurve& o) {
        check_same_grid(o, "curve_space.axpy");
        h_inf_ += alpha * o.h_inf_;
        for (std::size_t i = 0; i < dcoef_.size(); ++i) dcoef_[i] += alpha * o.dcoef_[i];
        rebuild_levels();
        return *this;
    }

    ForwardCurve& operator*=(double s) {
        h_inf_ *= s;
        for (auto& d : dcoef_) d *= s;
        rebuild_levels();
        return *this;
    }

    friend ForwardCurve operator+(ForwardCurve a, const ForwardCurve& b) { return a += b; }
    friend ForwardCurve operator-(ForwardCurve a, const ForwardCurve& b) { return a -= b; }
    friend ForwardCurve operator*(double s, ForwardCurve a) { return a *= s; }
    friend ForwardCurve operator*(ForwardCurve a, double s) { return a *= s; }

    void check_same_grid(const ForwardCurve& o, const char* where) const {
        if (!same_grid(grid_, o.grid_)) fail(ErrorCode::GridMismatch, where, "curves live on different grids");
    }

private:
    void rebuild_levels() {
        std::size_t n = grid_->n_cells();
        rel_.assign(n + 1, 0.0);
        for (std::size_t i = n; i-- > 0;) {
            rel_[i] = rel_[i + 1] - 0.5 * grid_->width(i) * (dcoef_[i] + dcoef_[i + 1]);
        }
    }

    GridPtr grid_;
    double h_inf_;
    std::vector<double> dcoef_;
    std::vector<double> rel_;
};

/// Function samples on a node set: the L^2_beta component of L^2_beta (+) R
/// (weight_exponent = beta, nodes in [0, inf)) or an unweighted curve on a
/// symmetric line grid (weight_exponent = 0). Between nodes the curve is the
/// linear interpolant.
struct SampledCurve {
    std::vector<double> nodes;
    std::vector<double> values;
    double weight_exponent = 0.0;

    SampledCurve() = default;
    SampledCurve(std::vector<double> x, std::vector<double> v, double weight = 0.0)
        : nodes(std::move(x)), values(std::move(v)), weight_exponent(weight) {
        if (nodes.size() != values.size() || nodes.size() < 2) {
            fail(ErrorCode::InvalidArgument, "curve_space.SampledCurve", "nodes/values length mismatch");
        }
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!std::isfinite(values[i])) fail(ErrorCode::InvalidArgument, "curve_space.SampledCurve", "non-finite value");
            if (i > 0 && !(nodes[i] > nodes[i - 1])) {
                fail(ErrorCode::InvalidArgument, "curve_space.SampledCurve", "nodes must be strictly increasing");
            }
        }
        if (weight_exponent != 0.0 && nodes.front() < 0.0) {
            fail(ErrorCode::InvalidArgument, "curve_space.SampledCurve", "weighted curves live on [0, inf)");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return nodes.size(); }
};

/// Element of L^2_beta (+) R.
struct ProductElement {
    SampledCurve l2_part;
    double scalar_part = 0.0;
};

// ---------------------------------------------------------------------------
// Curve text format
//
//   grid x_max=<float> n_cells=<int>[ spacing=uniform]
//   <h0> <h_inf>
//   <h'(x_0)>
//   ...
//   <h'(x_n)>
//
// Floats are written with 17 significant digits.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_curve(std::ostream& os, const ForwardCurve& h) {
    const Grid& g = h.grid();
    if (g.spacing() == Spacing::Custom) {
        fail(ErrorCode::InvalidArgument, "curve_space.write_curve", "custom grids are not serializable");
    }
    os << "grid x_max=" << format_double(g.x_max()) << " n_cells=" << g.n_cells();
    if (g.spacing() == Spacing::Uniform) os << " spacing=uniform";
    os << '\n' << format_double(h.h0()) << ' ' << format_double(h.h_inf()) << '\n';
    for (double d : h.dcoef()) os << format_double(d) << '\n';
}

inline std::string to_text(const ForwardCurve& h) {
    std::ostringstream os;
    write_curve(os, h);
    return os.str();
}

inline double parse_double(const std::string& s, const char* what) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        fail(ErrorCode::ParseError, "curve_space.read_curve", std::string("bad ") + what + ": '" + s + "'");
    }
    return v;
}

inline ForwardCurve read_curve(std::istream& is) {
    const char* where = "curve_space.read_curve";
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::ParseError, where, "missing header");
    std::istringstream hs(line);
    std::string tag;
    hs >> tag;
    if (tag != "grid") fail(ErrorCode::ParseError, where, "header must start with 'grid'");
    double x_max = -1.0;
    long n_cells = -1;
    Spacing spacing = Spacing::Graded;
    std::string tok;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) fail(ErrorCode::ParseError, where, "bad header token '" + tok + "'");
        std::string key = tok.substr(0, eq);
        std::string val = tok.substr(eq + 1);
        if (key == "x_max") {
            x_max = parse_double(val, "x_max");
        } else if (key == "n_cells") {
            n_cells = static_cast<long>(parse_double(val, "n_cells"));
        } else if (key == "spacing") {
            if (val == "uniform") spacing = Spacing::Uniform;
            else if (val == "graded") spacing = Spacing::Graded;
            else fail(ErrorCode::ParseError, where, "unknown spacing '" + val + "'");
        } else {
            fail(ErrorCode::ParseError, where, "unknown header key '" + key + "'");
        }
    }
    if (x_max <= 0.0 || n_cells <= 0) fail(ErrorCode::ParseError, where, "header needs x_max and n_cells");
    auto grid = share(Grid::make(spacing, x_max, static_cast<std::size_t>(n_cells)));

    std::string s0, sinf;
    if (!(is >> s0 >> sinf)) fail(ErrorCode::ParseError, where, "missing 'h0 h_inf' line");
    double h0 = parse_double(s0, "h0");
    double h_inf = parse_double(sinf, "h_inf");
    std::vector<double> d;
    d.reserve(grid->n_nodes());
    std::string sd;
    while (is >> sd) d.push_back(parse_double(sd, "derivative value"));
    if (d.size() != grid->n_nodes()) {
        fail(ErrorCode::ParseError, where,
             "expected " + std::to_string(grid->n_nodes()) + " derivative values, got " + std::to_string(d.size()));
    }
    ForwardCurve h(std::move(grid), h_inf, std::move(d));
    double scale = std::abs(h_inf) + std::abs(h.h0()) + 1e-300;
    if (std::abs(h.h0() - h0) > 1e-12 * scale + 1e-300) {
        fail(ErrorCode::ParseError, where, "h0 inconsistent with h_inf and derivative values");
    }
    return h;
}

inline ForwardCurve from_text(const std::string& text) {
    std::istringstream is(text);
    return read_curve(is);
}

}  // namespace fcs
