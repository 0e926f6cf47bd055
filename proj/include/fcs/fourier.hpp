#pragma once

// Continuous Fourier transform on the line,
//
//   (F h)(xi) = (2 pi)^{-1/2} int h(x) e^{-i xi x} dx,
//
// approximated by an FFT on a symmetric grid, plus the checks of the identities
// used by the compactness argument (Plancherel, F h' = i xi F h, the L^1 -> C_0
// bound and the representation of F((h e^{beta x/2})^*)(xi) as an L^2_delta pairing).

#include "fcs/curve.hpp"
#include "fcs/curve_space.hpp"
#include "fcs/error.hpp"
#include "fcs/grid.hpp"
#include "fcs/quadrature.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

namespace fcs {

using cplx = std::complex<double>;

/// x_j = -L + j * spacing, j = 0..n-1, spacing = 2L/n.
class LineGrid {
public:
    LineGrid(double half_width, std::size_t n_points) : L_(half_width), n_(n_points) {
        if (!(half_width > 0.0) || !std::isfinite(half_width) || n_points < 4 || n_points % 2 != 0) {
            fail(ErrorCode::InvalidArgument, "fourier_lab.LineGrid", "need L > 0 and an even n_points >= 4");
        }
    }

    [[nodiscard]] double half_width() const noexcept { return L_; }
    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] double spacing() const noexcept { return 2.0 * L_ / static_cast<double>(n_); }
    [[nodiscard]] double x(std::size_t j) const noexcept { return -L_ + static_cast<double>(j) * spacing(); }
    /// xi_m = pi m / L for m = -n/2 .. n/2 - 1, stored at index m + n/2.
    [[nodiscard]] double xi(std::size_t idx) const noexcept {
        return std::numbers::pi * (static_cast<double>(idx) - static_cast<double>(n_ / 2)) / L_;
    }
    [[nodiscard]] double xi_spacing() const noexcept { return std::numbers::pi / L_; }

    friend bool operator==(const LineGrid&, const LineGrid&) = default;

private:
    double L_;
    std::size_t n_;
};

/// Real samples of a function on a LineGrid.
struct LineFunction {
    LineGrid grid;
    std::vector<double> values;

    LineFunction(LineGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) fail(ErrorCode::InvalidArgument, "fourier_lab.LineFunction", "length mismatch");
        for (double x : values) {
            if (!std::isfinite(x)) fail(ErrorCode::InvalidArgument, "fourier_lab.LineFunction", "non-finite sample");
        }
    }
};

inline LineFunction sample(const LineGrid& g, const std::function<double(double)>& f) {
    std::vector<double> v(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) v[j] = f(g.x(j));
    return {g, std::move(v)};
}

struct Spectrum {
    std::vector<double> xi;
    std::vector<cplx> values;
};

inline constexpr double kDecayTolerance = 1e-8;

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

inline void require_decayed(const LineFunction& h, const char* where) {
    double peak = 0.0;
    for (double v : h.values) peak = std::max(peak, std::abs(v));
    double edge = std::max(std::abs(h.values.front()), std::abs(h.values.back()));
    if (edge > kDecayTolerance * peak) {
        fail(ErrorCode::NotDecayed, where,
             "|h(+-L)| = " + format_double(edge) + " exceeds 1e-8 * max|h| = " + format_double(kDecayTolerance * peak));
    }
}

/// Unnormalized forward DFT X_m = sum_j x_j e^{-2 pi i j m / n}.
inline std::vector<cplx> dft(const std::vector<cplx>& in) {
    const int n = static_cast<int>(in.size());
    std::vector<cplx> out(in.size());
    auto* ip = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
    auto* op = reinterpret_cast<fftw_complex*>(out.data());
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(n, ip, op, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

}  // namespace detail

/// Spectrum on xi_m = pi m / L, m = -n/2..n/2-1. The DFT is calibrated to the
/// continuous transform by spacing / sqrt(2 pi) and the phase (-1)^m of the
/// grid offset -L.
inline Spectrum fourier(const LineFunction& h) {
    detail::require_decayed(h, "fourier_lab.fourier");
    const auto& g = h.grid;
    const std::size_t n = g.size();
    std::vector<cplx> in(h.values.begin(), h.values.end());
    auto X = detail::dft(in);
    Spectrum s;
    s.xi.resize(n);
    s.values.resize(n);
    const double scale = g.spacing() / std::sqrt(2.0 * std::numbers::pi);
    const auto half = static_cast<long>(n / 2);
    for (std::size_t idx = 0; idx < n; ++idx) {
        long m = static_cast<long>(idx) - half;
        auto k = static_cast<std::size_t>((m + static_cast<long>(n)) % static_cast<long>(n));
        double sign = (m % 2 == 0) ? 1.0 : -1.0;
        s.xi[idx] = g.xi(idx);
        s.values[idx] = scale * sign * X[k];
    }
    return s;
}

inline double l1_norm(const LineFunction& h) {
    double s = 0.0;
    for (double v : h.values) s += std::abs(v);
    return s * h.grid.spacing();
}

inline double l2_norm(const LineFunction& h) {
    double s = 0.0;
    for (double v : h.values) s += v * v;
    return std::sqrt(s * h.grid.spacing());
}

inline double l2_norm(const Spectrum& s, double xi_spacing) {
    double a = 0.0;
    for (const auto& v : s.values) a += std::norm(v);
    return std::sqrt(a * xi_spacing);
}

inline double sup_norm(const Spectrum& s) {
    double m = 0.0;
    for (const auto& v : s.values) m = std::max(m, std::abs(v));
    return m;
}

/// Fourth-order central difference; samples beyond the grid are taken as 0.
inline LineFunction differentiate(const LineFunction& h) {
    const auto n = h.values.size();
    const double d = h.grid.spacing();
    auto at = [&](long j) { return (j < 0 || j >= static_cast<long>(n)) ? 0.0 : h.values[static_cast<std::size_t>(j)]; };
    std::vector<double> out(n);
    for (long j = 0; j < static_cast<long>(n); ++j) {
        out[static_cast<std::size_t>(j)] = (at(j - 2) - 8.0 * at(j - 1) + 8.0 * at(j + 1) - at(j + 2)) / (12.0 * d);
    }
    return {h.grid, std::move(out)};
}

struct InnerPair {
    cplx lhs;
    cplx rhs;
};

/// Plancherel: lhs = <F f, F g>_{L^2}, rhs = <f, g>_{L^2}.
inline InnerPair plancherel_check(const LineFunction& f, const LineFunction& g) {
    if (!(f.grid == g.grid)) fail(ErrorCode::GridMismatch, "fourier_lab.plancherel_check", "line grids differ");
    auto F = fourier(f);
    auto G = fourier(g);
    cplx lhs = 0.0;
    for (std::size_t m = 0; m < F.values.size(); ++m) lhs += F.values[m] * std::conj(G.values[m]);
    lhs *= f.grid.xi_spacing();
    double rhs = 0.0;
    for (std::size_t j = 0; j < f.values.size(); ++j) rhs += f.values[j] * g.values[j];
    rhs *= f.grid.spacing();
    return {lhs, rhs};
}

/// max over |xi| <= xi_max/2 of |F(h')(xi) - i xi F(h)(xi)| / (1 + |F h(xi)|).
inline double derivative_identity_check(const LineFunction& h, const LineFunction& dh) {
    if (!(h.grid == dh.grid)) fail(ErrorCode::GridMismatch, "fourier_lab.derivative_identity_check", "line grids differ");
    auto F = fourier(h);
    auto D = fourier(dh);
    const double limit = 0.5 * std::numbers::pi * static_cast<double>(h.grid.size() / 2) / h.grid.half_width();
    double worst = 0.0;
    for (std::size_t m = 0; m < F.values.size(); ++m) {
        if (std::abs(F.xi[m]) > limit) continue;
        cplx want = cplx(0.0, F.xi[m]) * F.values[m];
        worst = std::max(worst, std::abs(D.values[m] - want) / (1.0 + std::abs(F.values[m])));
    }
    return worst;
}

inline double derivative_identity_check(const LineFunction& h) { return derivative_identity_check(h, differentiate(h)); }

struct BoundPair {
    double lhs;
    double rhs;
};

/// lhs = ||xi F h||_{L^2}, rhs = ||h||_{W^1} with h' by fourth-order differences.
inline BoundPair weighted_sobolev_bound_check(const LineFunction& h) {
    auto F = fourier(h);
    auto dh = differentiate(h);
    detail::require_decayed(dh, "fourier_lab.weighted_sobolev_bound_check");
    double a = 0.0;
    for (std::size_t m = 0; m < F.values.size(); ++m) a += F.xi[m] * F.xi[m] * std::norm(F.values[m]);
    double lhs = std::sqrt(a * h.grid.xi_spacing());
    double l2 = l2_norm(h);
    double d2 = l2_norm(dh);
    return {lhs, std::sqrt(l2 * l2 + d2 * d2)};
}

/// Samples of the reflected lift x -> h(|x|) e^{(beta/2)|x|}; zero beyond x_max.
inline LineFunction lift_to_line(const ForwardCurve& h, const WeightParams& w, const LineGrid& g) {
    detail::require_h0(h, "fourier_lab.lift_to_line");
    double half = 0.5 * w.beta();
    return sample(g, [&](double x) {
        double a = std::abs(x);
        return h.relative_value(a) * std::exp(half * a);
    });
}

/// Line grid covering [-x_max, x_max] with margin and at least `per_cell`
/// samples across the narrowest cell.
inline LineGrid line_grid_for(const Grid& grid, double per_cell = 4.0) {
    double L = grid.x_max() + 1.0;
    double target = std::min(grid.min_width(), 0.25) / per_cell;
    std::size_t n = 64;
    while (2.0 * L / static_cast<double>(n) > target && n < (std::size_t{1} << 22)) n *= 2;
    return {L, n};
}

namespace detail {

/// int_{a}^{b} f(x) e^{-i xi x} dx by GL8 split by the oscillation and weight rates.
inline cplx oscillatory_integral(const std::function<double(double)>& f, double a, double b, double xi, double rate) {
    double r = std::abs(xi) / std::numbers::pi + std::abs(rate);
    return quad::integrate([&](double x) { return f(x) * std::exp(cplx(0.0, -xi * x)); }, a, b, r, 1);
}

}  // namespace detail

/// F((h e^{beta x/2})^*)(xi) by quadrature of the transform over the mirrored grid cells.
inline cplx lift_transform(const ForwardCurve& h, const WeightParams& w, double xi) {
    detail::require_h0(h, "fourier_lab.lift_transform");
    const Grid& g = h.grid();
    const double half = 0.5 * w.beta();
    auto lift = [&](double x) {
        double a = std::abs(x);
        return h.relative_value(a) * std::exp(half * a);
    };
    cplx s = 0.0;
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        double a = g.node(i), b = g.node(i + 1);
        s += detail::oscillatory_integral(lift, a, b, xi, half);
        s += detail::oscillatory_integral(lift, -b, -a, xi, half);
    }
    return s / std::sqrt(2.0 * std::numbers::pi);
}

/// (2 pi)^{-1/2} <h, e^{(beta/2 - delta) x} 2 cos(xi x)>_{L^2_delta}.
inline cplx lift_pairing(const ForwardCurve& h, const WeightParams& w, double xi) {
    detail::require_h0(h, "fourier_lab.lift_pairing");
    const Grid& g = h.grid();
    const double d = w.delta();
    const double k = 0.5 * w.beta() - d;
    double s = 0.0;
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        double r = std::abs(xi) / std::numbers::pi + d;
        s += quad::integrate(
            [&](double x) { return h.relative_value(x) * std::exp(k * x) * 2.0 * std::cos(xi * x) * std::exp(d * x); },
            g.node(i), g.node(i + 1), r, 1);
    }
    return s / std::sqrt(2.0 * std::numbers::pi);
}

struct ComplexPair {
    cplx direct;
    cplx paired;
};

inline ComplexPair functional_representation_check(const ForwardCurve& h, double xi, const WeightParams& w) {
    return {lift_transform(h, w, xi), lift_pairing(h, w, xi)};
}

/// Frequencies at which the functional representation is probed.
inline const std::vector<double>& probe_frequencies() {
    static const std::vector<double> p{0.0, 0.5, -0.5, 1.0, -1.0, 5.0, -5.0, 20.0, -20.0};
    return p;
}

/// ||(h e^{beta x/2})^*||_{L^1(R)} by per-cell quadrature.
inline double lift_l1_norm(const ForwardCurve& h, const WeightParams& w) {
    detail::require_h0(h, "fourier_lab.lift_l1_norm");
    const Grid& g = h.grid();
    const double half = 0.5 * w.beta();
    double s = 0.0;
    for (std::size_t i = 0; i < g.n_cells(); ++i) {
        s += quad::integrate([&](double x) { return std::abs(h.relative_value(x)) * std::exp(half * x); }, g.node(i),
                             g.node(i + 1), half, 2);
    }
    return 2.0 * s;
}

struct C0Bound {
    double sup_ft;
    double bound;
};

/// sup_ft = max over the FFT frequency grid of |F((h e^{beta x/2})^*)|,
/// bound = C3 / sqrt(2 pi) * ||h||_gamma.
inline C0Bound c0_bound_check(const ForwardCurve& h, const WeightParams& w) {
    detail::require_h0(h, "fourier_lab.c0_bound_check");
    double norm = hgamma_norm(h, w);
    double bound = embedding_constant_c3(w) / std::sqrt(2.0 * std::numbers::pi) * norm;
    if (norm == 0.0) return {0.0, 0.0};
    auto g = line_grid_for(h.grid());
    return {sup_norm(fourier(lift_to_line(h, w, g))), bound};
}

}  // namespace fcs
