#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

namespace fcs::quad {

/// Gauss-Legendre rule on [-1, 1].
template <std::size_t N>
struct GaussLegendre {
    std::array<double, N> nodes{};
    std::array<double, N> weights{};

    GaussLegendre() {
        // Newton iteration on P_N starting from the Chebyshev guess.
        for (std::size_t i = 0; i < N; ++i) {
            double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                                (static_cast<double>(N) + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0;
                double p1 = x;
                for (std::size_t k = 2; k <= N; ++k) {
                    double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                    p0 = p1;
                    p1 = pk;
                }
                dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

inline const GaussLegendre<8>& gl8() {
    static const GaussLegendre<8> rule;
    return rule;
}

/// Integrate f over [a, b] with order-8 Gauss-Legendre. The interval is split
/// so that each piece has rate*width <= 1; `rate` is the largest exponential
/// rate present in f (0 for non-exponential integrands).
template <typename F>
auto integrate(F&& f, double a, double b, double rate = 0.0, std::size_t min_pieces = 1) {
    using R = decltype(f(a));
    const auto& rule = gl8();
    double width = b - a;
    auto pieces = static_cast<std::size_t>(std::ceil(std::abs(rate) * width));
    if (pieces < min_pieces) pieces = min_pieces;
    if (pieces == 0) pieces = 1;
    double h = width / static_cast<double>(pieces);
    R total{};
    for (std::size_t p = 0; p < pieces; ++p) {
        double lo = a + h * static_cast<double>(p);
        double mid = lo + 0.5 * h;
        R part{};
        for (std::size_t i = 0; i < 8; ++i) {
            part += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
        }
        total += 0.5 * h * part;
    }
    return total;
}

/// Highest monomial degree supported by the exponential moments.
inline constexpr std::size_t kMaxMomentDegree = 4;
using Moments = std::array<double, kMaxMomentDegree + 1>;

/// I_k(s) = int_0^1 u^k e^{s u} du for k = 0..4.
inline Moments unit_exp_moments(double s) {
    Moments m{};
    if (std::abs(s) < 1.5) {
        // Power series: I_k = sum_j s^j / (j! (j + k + 1)).
        for (std::size_t k = 0; k <= kMaxMomentDegree; ++k) {
            double term = 1.0;
            double sum = 0.0;
            for (int j = 0; j < 60; ++j) {
                double add = term / static_cast<double>(j + k + 1);
                sum += add;
                if (std::abs(add) < 1e-18 * std::abs(sum)) break;
                term *= s / static_cast<double>(j + 1);
            }
            m[k] = sum;
        }
        return m;
    }
    double es = std::exp(s);
    m[0] = std::expm1(s) / s;
    for (std::size_t k = 1; k <= kMaxMomentDegree; ++k) {
        m[k] = (es - static_cast<double>(k) * m[k - 1]) / s;
    }
    return m;
}

/// int_a^{a+w} u^k e^{rate x} dx with u = (x - a)/w.
inline Moments cell_exp_moments(double rate, double a, double w) {
    Moments m = unit_exp_moments(rate * w);
    double scale = w * std::exp(rate * a);
    for (auto& v : m) v *= scale;
    return m;
}

}  // namespace fcs::quad
