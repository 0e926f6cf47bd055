#include "fcs/hjmm.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace fcs;

namespace {

const WeightParams kW(0.5, 1.5);

ForwardCurve exp_curve(const GridPtr& g, double lambda) {
    return project_function(
        g, kW, [=](double x) { return std::exp(-lambda * x); }, [=](double x) { return -lambda * std::exp(-lambda * x); });
}

}  // namespace

TEST(Shift, IdentityAndSemigroup) {
    auto g = share(Grid::uniform(12.0, 384));  // width 1/32
    std::mt19937_64 rng(1);
    auto h = oracle::random_curve(g, rng, 1.0, 0.04);
    std::vector<double> d(h.dcoef().begin(), h.dcoef().end());
    d.back() = 0.0;  // nothing to lose past x_max
    h = ForwardCurve(g, h.h_inf(), d);
    auto s0 = shift(h, 0.0);
    for (std::size_t i = 0; i < g->n_nodes(); ++i) EXPECT_EQ(s0.dcoef()[i], h.dcoef()[i]);
    double w = g->width(0);
    auto a = shift(shift(h, 3 * w), 5 * w);
    auto b = shift(h, 8 * w);
    for (std::size_t i = 0; i < g->n_nodes(); ++i) EXPECT_NEAR(a.dcoef()[i], b.dcoef()[i], 1e-10);
    EXPECT_EQ(b.h_inf(), h.h_inf());
    for (double x : {0.0, 0.7, 3.3}) EXPECT_NEAR(b.value(x), h.value(x + 8 * w), 1e-10);
    EXPECT_THROW((void)shift(h, 12.5), Error);
    EXPECT_THROW((void)shift(h, -0.1), Error);
}

TEST(Shift, ExponentialValue) {
    auto g = share(Grid::graded(30.0, 256));
    auto h = exp_curve(g, 2.0);
    EXPECT_NEAR(shift(h, 1.0).eval(0.0), std::exp(-2.0), 1e-5);
}

TEST(Drift, ZeroAndQuadraticScaling) {
    auto g = sim_grid(kW, 64, 1.0);
    auto zero = hjm_drift(VolSpec{}, 0.0, ForwardCurve::zero(g));
    for (double d : zero.dcoef()) EXPECT_EQ(d, 0.0);
    auto s = vasicek_curve(g, kW, 0.02, 1.0);
    auto a1 = hjm_drift(constant_vol({s}), 0.0, ForwardCurve::zero(g));
    auto a2 = hjm_drift(constant_vol({2.0 * s}), 0.0, ForwardCurve::zero(g));
    for (std::size_t i = 0; i < g->n_nodes(); ++i) EXPECT_NEAR(a2.dcoef()[i], 4.0 * a1.dcoef()[i], 1e-18);
}

TEST(Drift, VasicekClosedForm) {
    const double c = 0.02, a = 1.0;
    auto g = share(Grid::uniform(25.0, 5000));
    auto vol = vasicek_vol(g, kW, c, a);
    auto alpha = hjm_drift(vol, 0.0, ForwardCurve::zero(g));
    // The stored curve integrates a piecewise-linear alpha', an O(width^2) error.
    double x = std::log(2.0);
    EXPECT_NEAR(alpha.eval(x), 1e-4, 5e-9);
    EXPECT_NEAR(hjm_drift_at(vol, 0.0, ForwardCurve::zero(g), x), 1e-4, 1e-12);
    for (double y : {0.1, 1.0, 3.0}) {
        double want = c * c / a * (std::exp(-a * y) - std::exp(-2 * a * y));
        EXPECT_NEAR(alpha.eval(y), want, 5e-9);
        EXPECT_NEAR(hjm_drift_at(vol, 0.0, ForwardCurve::zero(g), y), want, 1e-12);
    }
}

TEST(Drift, NonNegativeForPositiveVol) {
    auto g = sim_grid(kW, 64, 1.0);
    auto vol = vasicek_vol(g, kW, 0.02, 1.0);
    auto zero = ForwardCurve::zero(g);
    auto alpha = hjm_drift(vol, 0.0, zero);
    double peak = 0.0;
    for (std::size_t i = 0; i < g->n_cells(); ++i) {
        for (double u : {0.0, 0.3, 0.7}) {
            double x = g->node(i) + u * g->width(i);
            EXPECT_GE(hjm_drift_at(vol, 0.0, zero, x), 0.0);
            peak = std::max(peak, alpha.value(x));
        }
    }
    for (std::size_t i = 0; i < g->n_nodes(); ++i) EXPECT_GE(alpha.value(g->node(i)), -1e-2 * peak);
}

TEST(Vasicek, RejectsSlowDecay) {
    auto g = sim_grid(kW, 16, 1.0);
    EXPECT_THROW((void)vasicek_curve(g, WeightParams(1.0, 2.0), 0.02, 1.0), Error);
    EXPECT_THROW((void)vasicek_curve(g, kW, 0.02, -1.0), Error);
}

TEST(EulerStep, ZeroVolIsShift) {
    auto g = share(Grid::uniform(10.0, 2520));
    auto h = exp_curve(g, 1.0) + ForwardCurve::constant(g, 0.03);
    auto next = euler_step(h, 0.0, VolSpec{}, 1.0 / 252.0, {});
    auto ref = shift(h, 1.0 / 252.0);
    for (std::size_t i = 0; i < g->n_nodes(); ++i) EXPECT_EQ(next.dcoef()[i], ref.dcoef()[i]);
}

TEST(EulerStep, MatchesScalarOracle) {
    // Uniform grid with width dt, so the shift moves nodes onto nodes.
    const double dt = 1.0 / 252.0;
    auto g = share(Grid::uniform(7560 * dt, 7560));
    auto sigma = vasicek_curve(g, kW, 0.02, 1.0);
    auto vol = constant_vol({sigma});
    auto h0 = ForwardCurve::constant(g, 0.05);
    const double dw = 0.01;
    std::vector<double> dW{dw};
    auto next = euler_step(h0, 0.0, vol, dt, dW);
    auto alpha = hjm_drift(vol, 0.0, h0);
    for (double x : {0.0, 1.0, 4.5}) {
        double want = 0.05 + alpha.value(x + dt) * dt + sigma.value(x + dt) * dw;
        EXPECT_NEAR(next.eval(x), want, 1e-12) << x;
    }
    auto det = euler_step(h0, 0.0, vol, dt, std::vector<double>{0.0});
    auto diff = det - shift(h0, dt);
    auto sa = shift(dt * alpha, dt);
    for (std::size_t i = 0; i < g->n_nodes(); ++i) EXPECT_NEAR(diff.dcoef()[i], sa.dcoef()[i], 1e-18);
}

TEST(Increments, ReproducibleAndCoarsened) {
    auto a = brownian_increments(7, 3, 64, 2, 0.01);
    auto b = brownian_increments(7, 3, 64, 2, 0.01);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, brownian_increments(8, 3, 64, 2, 0.01));
    auto c = coarsen(a, 2, 4);
    ASSERT_EQ(c.size(), 32u);
    EXPECT_DOUBLE_EQ(c[1], a[1] + a[3] + a[5] + a[7]);
    EXPECT_THROW((void)coarsen(a, 2, 3), Error);
    // Moments over many draws.
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double z = rng::normal(1, 0, static_cast<std::uint64_t>(i), 0);
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Simulate, ZeroVolAndSeedReproducibility) {
    auto g = sim_grid(kW, 32, 0.25);
    auto h0 = exp_curve(g, 1.0) + ForwardCurve::constant(g, 0.05);
    SimConfig cfg{.dt = 1.0 / 64, .t_max = 0.25, .n_paths = 3, .seed = 1};
    auto e = simulate(h0, VolSpec{}, cfg);
    ForwardCurve r = h0;
    for (std::size_t k = 1; k < e.paths[0].states.size(); ++k) {
        r = shift(r, cfg.dt);
        for (const auto& p : e.paths) {
            for (std::size_t i = 0; i < g->n_nodes(); ++i) EXPECT_EQ(p.states[k].dcoef()[i], r.dcoef()[i]);
        }
    }
    auto vol = vasicek_vol(g, kW, 0.02, 1.0);
    auto e1 = simulate(h0, vol, cfg);
    auto e2 = simulate(h0, vol, cfg);
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
        EXPECT_EQ(e1.paths[p].increments, e2.paths[p].increments);
        const auto& a = e1.paths[p].states.back();
        const auto& b = e2.paths[p].states.back();
        for (std::size_t i = 0; i < g->n_nodes(); ++i) EXPECT_EQ(a.dcoef()[i], b.dcoef()[i]);
    }
    EXPECT_TRUE(e1.has_increments());
}

TEST(Simulate, ConfigValidation) {
    auto g = sim_grid(kW, 16, 1.0);
    auto h0 = ForwardCurve::constant(g, 0.05);
    EXPECT_THROW((void)simulate(h0, VolSpec{}, SimConfig{.dt = 0.0}), Error);
    EXPECT_THROW((void)simulate(h0, VolSpec{}, SimConfig{.dt = 0.3, .t_max = 1.0}), Error);
    EXPECT_THROW((void)simulate(h0, VolSpec{}, SimConfig{.dt = 0.25, .t_max = 1.0, .n_paths = 0}), Error);
}

TEST(Simulate, ZeroVolNormConstantInsideGrid) {
    // A flat curve is invariant under the shift.
    auto g = share(Grid::uniform(8.0, 512));
    auto h0 = ForwardCurve::constant(g, 0.05);
    SimConfig cfg{.dt = 1.0 / 64, .t_max = 0.5, .n_paths = 1, .seed = 3};
    auto e = simulate(h0, VolSpec{}, cfg);
    CurveSpace space(g, kW);
    for (const auto& s : e.paths[0].states) EXPECT_EQ(space.hgamma_norm(s), space.hgamma_norm(h0));
}

TEST(Simulate, MartingaleProbe) {
    auto g = sim_grid(kW, 64, 1.0);
    auto vol = vasicek_vol(g, kW, 0.02, 1.0);
    auto h0 = ForwardCurve::constant(g, 0.05);
    SimConfig cfg{.dt = 1.0 / 252, .t_max = 1.0, .n_paths = 10000, .seed = 11, .record_states = false};
    auto e = simulate(h0, vol, cfg);
    SimConfig det_cfg = cfg;
    det_cfg.n_paths = 1;
    std::vector<std::vector<double>> zero(1, std::vector<double>(cfg.n_steps(), 0.0));
    auto det = simulate_with_increments(h0, vol, det_cfg, zero).paths[0].states.back();
    CurveSpace space(g, kW);
    auto probe = vol.evaluate(0.0, h0)[0];
    double s = 0.0, s2 = 0.0;
    for (const auto& p : e.paths) {
        double v = space.hgamma_inner(probe, p.states.back() - det);
        s += v;
        s2 += v * v;
    }
    double n = static_cast<double>(cfg.n_paths);
    double mean = s / n;
    double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_GT(se, 0.0);
    EXPECT_LT(std::abs(mean), 3.0 * se);
    // Short-rate probe as well.
    double r0 = 0.0, r02 = 0.0;
    for (const auto& p : e.paths) {
        double v = p.states.back().h0() - det.h0();
        r0 += v;
        r02 += v * v;
    }
    double m0 = r0 / n;
    EXPECT_LT(std::abs(m0), 3.0 * std::sqrt((r02 / n - m0 * m0) / n));
}

TEST(Simulate, StrongOrderOne) {
    // Uniform grid whose width divides dt/8 at both levels, so every shift is exact.
    auto g = share(Grid::uniform(8.0, 2048));
    auto vol = vasicek_vol(g, kW, 0.02, 1.0);
    auto h0 = ForwardCurve::constant(g, 0.05);
    CurveSpace space(g, kW);
    const std::size_t paths = 200;
    auto rms_error = [&](double dt) {
        SimConfig fine{.dt = dt / 8, .t_max = 1.0, .n_paths = paths, .seed = 5, .record_states = false};
        SimConfig coarse = fine;
        coarse.dt = dt;
        std::vector<std::vector<double>> fi(paths), co(paths);
        for (std::size_t p = 0; p < paths; ++p) {
            fi[p] = brownian_increments(5, p, fine.n_steps(), 1, fine.dt);
            co[p] = coarsen(fi[p], 1, 8);
        }
        auto ef = simulate_with_increments(h0, vol, fine, fi);
        auto ec = simulate_with_increments(h0, vol, coarse, co);
        double s = 0.0;
        for (std::size_t p = 0; p < paths; ++p) {
            double d = space.hgamma_norm(ec.paths[p].states.back() - ef.paths[p].states.back());
            s += d * d;
        }
        return std::sqrt(s / paths);
    };
    double e1 = rms_error(1.0 / 16);
    double e2 = rms_error(1.0 / 32);
    double ratio = e1 / e2;
    EXPECT_GE(ratio, 1.7);
    EXPECT_LE(ratio, 2.3);
}

TEST(HittingTime, SyntheticPath) {
    auto g = sim_grid(kW, 16, 1.0);
    CurveSpace space(g, kW);
    auto base = exp_curve(g, 1.0);
    Path p;
    for (std::size_t k = 0; k <= 10; ++k) {
        p.steps.push_back(k);
        p.states.push_back((1.0 + 0.1 * static_cast<double>(k)) * base);
    }
    double n0 = space.hgamma_norm(base);
    double K = n0 * 1.65;
    auto t = hitting_time(p, space, K, 0.01);
    ASSERT_TRUE(t.has_value());
    EXPECT_NEAR(*t, 0.07, 1e-15);
    EXPECT_FALSE(hitting_time(p, space, 100.0 * n0, 0.01).has_value());
    EXPECT_THROW((void)hitting_time(p, space, n0, 0.01), Error);
}

TEST(HittingTime, LargeVolHitsEarlyButPositive) {
    auto g = sim_grid(kW, 32, 0.5);
    auto vol = vasicek_vol(g, kW, 0.5, 1.0);
    auto h0 = ForwardCurve::constant(g, 0.05);
    SimConfig cfg{.dt = 1.0 / 100, .t_max = 0.5, .n_paths = 20, .seed = 2};
    auto e = simulate(h0, vol, cfg);
    CurveSpace space(g, kW);
    for (const auto& p : e.paths) {
        auto t = hitting_time(p, space, 0.0501, cfg.dt);
        ASSERT_TRUE(t.has_value());
        EXPECT_GT(*t, 0.0);
        EXPECT_LE(*t, 0.05);
    }
}
