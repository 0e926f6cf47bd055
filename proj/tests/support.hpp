#pragma once

// Test-side oracles. Nothing here calls the library's integration code:
// quadrature is a separate composite Gauss-Legendre rule with nodes from
// Golub-Welsch-free Newton iteration, and random curves come from std::mt19937_64.

#include "fcs/curve.hpp"
#include "fcs/grid.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

/// 16-point Gauss-Legendre nodes/weights on [-1, 1].
struct GL16 {
    double x[16];
    double w[16];
    GL16() {
        const int n = 16;
        for (int i = 0; i < n; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                double dp = n * (z * p1 - p0) / (z * z - 1.0);
                double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (z * p1 - p0) / (z * z - 1.0);
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

inline const GL16& gl16() {
    static const GL16 r;
    return r;
}

/// Composite 16-point rule with `pieces` equal panels on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, int pieces) {
    const auto& r = gl16();
    double h = (b - a) / pieces;
    double s = 0.0;
    for (int p = 0; p < pieces; ++p) {
        double lo = a + p * h;
        double mid = lo + 0.5 * h;
        for (int i = 0; i < 16; ++i) s += r.w[i] * f(mid + 0.5 * h * r.x[i]);
    }
    return 0.5 * h * s;
}

/// Integral over every grid cell, `per_cell` panels each (integrands that are
/// smooth per cell but kinked at nodes).
inline double integrate_cells(const fcs::Grid& g, const std::function<double(double)>& f, int per_cell = 2) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.n_cells(); ++i) s += integrate(f, g.node(i), g.node(i + 1), per_cell);
    return s;
}

inline double hgamma_norm(const fcs::ForwardCurve& h, double gamma) {
    double d = integrate_cells(h.grid(), [&](double x) {
        double v = h.derivative(x);
        return v * v * std::exp(gamma * x);
    });
    return std::sqrt(h.h0() * h.h0() + d);
}

inline double l2_weighted_norm(const fcs::ForwardCurve& h, double beta) {
    double s = integrate_cells(h.grid(), [&](double x) {
        double v = h.relative_value(x);
        return v * v * std::exp(beta * x);
    });
    return std::sqrt(s);
}

/// Random H^0_gamma curve whose derivative decays like e^{-rate x}, so its
/// H_gamma norm stays O(1) for rate > gamma/2.
inline fcs::ForwardCurve random_curve(const fcs::GridPtr& g, std::mt19937_64& rng, double rate, double h_inf = 0.0) {
    std::normal_distribution<double> n01;
    std::vector<double> d(g->n_nodes());
    double a = n01(rng), b = n01(rng), c = n01(rng);
    for (std::size_t i = 0; i < d.size(); ++i) {
        double x = g->node(i);
        d[i] = (a + b * std::sin(3.0 * x) + 0.2 * n01(rng)) * std::exp(-rate * x) + c * std::exp(-2.0 * rate * x);
    }
    return fcs::ForwardCurve(g, h_inf, std::move(d));
}

}  // namespace oracle
