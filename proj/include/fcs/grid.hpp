#pragma once

#include "fcs/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fcs {

/// Weight exponents of L^2_beta and H_gamma. delta = (beta + gamma)/2 is the
/// midpoint exponent used by the L^1 and Fourier-functional estimates.
class WeightParams {
public:
    WeightParams(double beta, double gamma) : beta_(beta), gamma_(gamma) {
        if (!(beta > 0.0) || !(gamma > beta) || !std::isfinite(gamma)) {
            fail(ErrorCode::InvalidArgument, "curve_space.WeightParams",
                 "need gamma > beta > 0, got beta=" + std::to_string(beta) +
                     " gamma=" + std::to_string(gamma));
        }
    }

    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    [[nodiscard]] double delta() const noexcept { return 0.5 * (beta_ + gamma_); }

    friend bool operator==(const WeightParams&, const WeightParams&) = default;

private:
    double beta_;
    double gamma_;
};

/// Truncation point with exp(-(gamma - beta) x_max) = 1e-10.
inline double recommended_x_max(const WeightParams& w) {
    return std::log(1e10) / (w.gamma() - w.beta());
}

enum class Spacing { Uniform, Graded, Custom };

/// Grading rate of the canonical graded grid: nodes are uniform in
/// t = 1 - exp(-rate x).
inline constexpr double kGradingRate = 0.5;

/// Nodes 0 = x_0 < x_1 < ... < x_n = x_max of the truncated half line.
class Grid {
public:
    static Grid uniform(double x_max, std::size_t n_cells) {
        check_args(x_max, n_cells);
        std::vector<double> nodes(n_cells + 1);
        for (std::size_t k = 0; k <= n_cells; ++k) {
            nodes[k] = x_max * static_cast<double>(k) / static_cast<double>(n_cells);
        }
        nodes.back() = x_max;
        return Grid(std::move(nodes), Spacing::Uniform);
    }

    /// Cells widen geometrically toward x_max.
    static Grid graded(double x_max, std::size_t n_cells) {
        check_args(x_max, n_cells);
        const double c = kGradingRate;
        const double t_max = -std::expm1(-c * x_max);
        std::vector<double> nodes(n_cells + 1);
        for (std::size_t k = 0; k <= n_cells; ++k) {
            double t = t_max * static_cast<double>(k) / static_cast<double>(n_cells);
            nodes[k] = -std::log1p(-t) / c;
        }
        nodes.front() = 0.0;
        nodes.back() = x_max;
        return Grid(std::move(nodes), Spacing::Graded);
    }

    static Grid from_nodes(std::vector<double> nodes) {
        if (nodes.size() < 2 || nodes.front() != 0.0) {
            fail(ErrorCode::InvalidArgument, "curve_space.Grid", "nodes must start at 0 and have >= 2 entries");
        }
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            if (!(nodes[i] > nodes[i - 1]) || !std::isfinite(nodes[i])) {
                fail(ErrorCode::InvalidArgument, "curve_space.Grid", "nodes must be strictly increasing");
            }
        }
        return Grid(std::move(nodes), Spacing::Custom);
    }

    static Grid make(Spacing spacing, double x_max, std::size_t n_cells) {
        return spacing == Spacing::Uniform ? uniform(x_max, n_cells) : graded(x_max, n_cells);
    }

    [[nodiscard]] std::size_t n_cells() const noexcept { return nodes_.size() - 1; }
    [[nodiscard]] std::size_t n_nodes() const noexcept { return nodes_.size(); }
    [[nodiscard]] double x_max() const noexcept { return nodes_.back(); }
    [[nodiscard]] std::span<const double> nodes() const noexcept { return nodes_; }
    [[nodiscard]] double node(std::size_t i) const { return nodes_[i]; }
    [[nodiscard]] double width(std::size_t cell) const { return nodes_[cell + 1] - nodes_[cell]; }
    [[nodiscard]] double min_width() const {
        double m = width(0);
        for (std::size_t i = 1; i < n_cells(); ++i) m = std::min(m, width(i));
        return m;
    }
    [[nodiscard]] Spacing spacing() const noexcept { return spacing_; }

    /// Index of the cell containing x, for x in [0, x_max]; x_max maps to the last cell.
    [[nodiscard]] std::size_t cell_of(double x) const {
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
        auto idx = static_cast<std::size_t>(it - nodes_.begin());
        if (idx == 0) return 0;
        return std::min(idx - 1, n_cells() - 1);
    }

    friend bool operator==(const Grid& a, const Grid& b) { return a.nodes_ == b.nodes_; }

private:
    Grid(std::vector<double> nodes, Spacing spacing) : nodes_(std::move(nodes)), spacing_(spacing) {}

    static void check_args(double x_max, std::size_t n_cells) {
        if (!(x_max > 0.0) || !std::isfinite(x_max) || n_cells == 0) {
            fail(ErrorCode::InvalidArgument, "curve_space.Grid", "need x_max > 0 and n_cells >= 1");
        }
    }

    std::vector<double> nodes_;
    Spacing spacing_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr share(Grid g) { return std::make_shared<const Grid>(std::move(g)); }

inline bool same_grid(const GridPtr& a, const GridPtr& b) { return a == b || (a && b && *a == *b); }

}  // namespace fcs
