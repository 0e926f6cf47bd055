#include "fcs/fourier.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fcs;

namespace {

const double kPi = std::numbers::pi;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * kPi);

ForwardCurve exp_curve(const GridPtr& g, const WeightParams& w, double lambda) {
    return project_function(
        g, w, [=](double x) { return std::exp(-lambda * x); }, [=](double x) { return -lambda * std::exp(-lambda * x); });
}

}  // namespace

TEST(LineGrid, Layout) {
    LineGrid g(2.0, 8);
    EXPECT_EQ(g.spacing(), 0.5);
    EXPECT_EQ(g.x(0), -2.0);
    EXPECT_EQ(g.xi(4), 0.0);
    EXPECT_DOUBLE_EQ(g.xi(0), -4.0 * kPi / 2.0);
    EXPECT_THROW(LineGrid(1.0, 7), Error);
    EXPECT_THROW(LineGrid(0.0, 8), Error);
}

TEST(Fourier, TwoSidedExponential) {
    // e^{-|x|}: F = sqrt(2/pi) / (1 + xi^2). The kink at 0 limits accuracy to O(dx^2).
    LineGrid g(40.0, 1 << 16);
    auto h = sample(g, [](double x) { return std::exp(-std::abs(x)); });
    auto F = fourier(h);
    for (std::size_t m = 0; m < F.xi.size(); m += 997) {
        double want = std::sqrt(2.0 / kPi) / (1.0 + F.xi[m] * F.xi[m]);
        EXPECT_NEAR(F.values[m].real(), want, 1e-6);
        EXPECT_NEAR(F.values[m].imag(), 0.0, 1e-9);
    }
    EXPECT_NEAR(F.values[g.size() / 2].real(), std::sqrt(2.0 / kPi), 1e-7);
}

TEST(Fourier, GaussianIsSelfDual) {
    LineGrid g(20.0, 1 << 12);
    auto h = sample(g, [](double x) { return std::exp(-0.5 * x * x); });
    auto F = fourier(h);
    for (std::size_t m = 0; m < F.xi.size(); ++m) {
        EXPECT_NEAR(std::abs(F.values[m] - std::exp(-0.5 * F.xi[m] * F.xi[m])), 0.0, 1e-12);
    }
}

TEST(Fourier, ZeroAndDecayGuard) {
    LineGrid g(5.0, 64);
    auto z = fourier(sample(g, [](double) { return 0.0; }));
    for (auto v : z.values) EXPECT_EQ(std::abs(v), 0.0);
    try {
        (void)fourier(sample(g, [](double x) { return std::exp(-0.1 * x * x); }));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotDecayed);
    }
}

TEST(Fourier, L1Bound) {
    LineGrid g(30.0, 1 << 12);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        double a = u(rng), c = 3 * u(rng), s = 1.5 + u(rng);
        auto h = sample(g, [&](double x) { return (a + std::sin(c * x)) * std::exp(-(x - c) * (x - c) / (s * s)); });
        EXPECT_LE(sup_norm(fourier(h)), l1_norm(h) * kInvSqrt2Pi * (1 + 1e-14));
    }
}

TEST(Plancherel, ClosedForms) {
    LineGrid g(40.0, 1 << 14);
    auto e = sample(g, [](double x) { return std::exp(-std::abs(x)); });
    auto p = plancherel_check(e, e);
    EXPECT_NEAR(p.rhs.real(), 1.0, 1e-5);  // Riemann sum across the kink at 0
    EXPECT_NEAR(std::abs(p.lhs - p.rhs), 0.0, 1e-12);

    auto gs = sample(g, [](double x) { return std::exp(-0.5 * x * x); });
    auto q = plancherel_check(gs, gs);
    EXPECT_NEAR(q.lhs.real(), std::sqrt(kPi), 1e-12);

    auto left = sample(g, [](double x) { return std::exp(-4 * (x + 10) * (x + 10)); });
    auto right = sample(g, [](double x) { return std::exp(-4 * (x - 10) * (x - 10)); });
    auto o = plancherel_check(left, right);
    EXPECT_NEAR(std::abs(o.lhs), 0.0, 1e-12);

    EXPECT_THROW((void)plancherel_check(gs, sample(LineGrid(40.0, 1 << 13), [](double) { return 0.0; })), Error);
}

TEST(DerivativeIdentity, GaussianAndPacket) {
    LineGrid g(20.0, 1 << 12);
    auto gs = sample(g, [](double x) { return std::exp(-0.5 * x * x); });
    EXPECT_LT(derivative_identity_check(gs), 1e-6);
    EXPECT_EQ(derivative_identity_check(sample(g, [](double) { return 0.0; })), 0.0);

    auto packet = [](double x) { return std::sin(3.0 * x) * std::exp(-x * x / 4.0); };
    EXPECT_LT(derivative_identity_check(sample(g, packet)), 1e-4);
    // Oracle: the same check at 2^16 points with the analytic derivative.
    LineGrid fine(20.0, 1 << 16);
    auto dpacket = [](double x) {
        return (3.0 * std::cos(3.0 * x) - 0.5 * x * std::sin(3.0 * x)) * std::exp(-x * x / 4.0);
    };
    EXPECT_LT(derivative_identity_check(sample(fine, packet), sample(fine, dpacket)), 1e-10);
}

TEST(SobolevBound, GaussianClosedForm) {
    LineGrid g(20.0, 1 << 12);
    auto b = weighted_sobolev_bound_check(sample(g, [](double x) { return std::exp(-0.5 * x * x); }));
    EXPECT_NEAR(b.lhs, std::sqrt(std::sqrt(kPi) / 2.0), 1e-8);
    EXPECT_NEAR(b.rhs, std::sqrt(1.5 * std::sqrt(kPi)), 1e-8);
    EXPECT_NEAR(b.rhs * b.rhs - b.lhs * b.lhs, std::sqrt(kPi), 1e-8);
    auto z = weighted_sobolev_bound_check(sample(g, [](double) { return 0.0; }));
    EXPECT_EQ(z.lhs, 0.0);
    EXPECT_EQ(z.rhs, 0.0);
}

TEST(FunctionalRepresentation, ClosedForms) {
    WeightParams w(1.0, 2.0);
    auto g = share(Grid::graded(40.0, 256));
    auto h = exp_curve(g, w, 2.0);
    auto r0 = functional_representation_check(h, 0.0, w);
    EXPECT_NEAR(std::abs(r0.direct - r0.paired), 0.0, 1e-12);
    EXPECT_NEAR(r0.direct.real(), 2.0 * kInvSqrt2Pi * (2.0 / 3.0), 1e-6);
    auto r5 = functional_representation_check(h, 5.0, w);
    EXPECT_NEAR(std::abs(r5.direct - r5.paired), 0.0, 1e-12);
    EXPECT_NEAR(r5.direct.real(), 2.0 * kInvSqrt2Pi * 1.5 / (2.25 + 25.0), 1e-6);
    EXPECT_NEAR(r5.direct.imag(), 0.0, 1e-14);
    auto z = functional_representation_check(ForwardCurve::zero(g), 1.0, w);
    EXPECT_EQ(std::abs(z.direct), 0.0);
    EXPECT_THROW((void)functional_representation_check(ForwardCurve::constant(g, 1.0), 1.0, w), Error);
}

TEST(FunctionalRepresentation, RandomCurvesAllProbes) {
    WeightParams w(1.0, 3.0);
    auto g = share(Grid::graded(recommended_x_max(w), 64));
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        auto h = oracle::random_curve(g, rng, 1.8);
        for (double xi : probe_frequencies()) {
            auto r = functional_representation_check(h, xi, w);
            EXPECT_LE(std::abs(r.direct - r.paired), 1e-6 * (1.0 + std::abs(r.direct)));
        }
    }
}

TEST(C0Bound, ClosedFormAndRandom) {
    WeightParams w(1.0, 3.0);
    auto g = share(Grid::graded(40.0, 256));
    auto h = exp_curve(g, w, 2.0);
    auto c = c0_bound_check(h, w);
    EXPECT_NEAR(c.sup_ft, 2.0 * kInvSqrt2Pi / 1.5, 1e-5);
    EXPECT_NEAR(c.bound, (2.0 / std::sqrt(3.0)) * kInvSqrt2Pi * std::sqrt(5.0), 1e-5);
    auto c2 = c0_bound_check(3.0 * h, w);
    EXPECT_NEAR(c2.sup_ft, 3.0 * c.sup_ft, 1e-12);
    EXPECT_NEAR(c2.bound, 3.0 * c.bound, 1e-12);
    auto z = c0_bound_check(ForwardCurve::zero(g), w);
    EXPECT_EQ(z.sup_ft, 0.0);
    EXPECT_EQ(z.bound, 0.0);

    auto gr = share(Grid::graded(recommended_x_max(w), 64));
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 10; ++rep) {
        auto r = oracle::random_curve(gr, rng, 1.6);
        auto b = c0_bound_check(r, w);
        EXPECT_LE(b.sup_ft, b.bound + 1e-6);
        EXPECT_LE(lift_l1_norm(r, w), embedding_constant_c3(w) * hgamma_norm(r, w));
    }
}

TEST(C0Bound, TransformMatchesQuadrature) {
    WeightParams w(1.0, 2.0);
    auto g = share(Grid::graded(recommended_x_max(w), 32));
    std::mt19937_64 rng(13);
    auto h = oracle::random_curve(g, rng, 1.4);
    auto lg = line_grid_for(*g, 8.0);
    auto F = fourier(lift_to_line(h, w, lg));
    for (std::size_t m = lg.size() / 2; m < lg.size() / 2 + 40; m += 7) {
        EXPECT_NEAR(std::abs(F.values[m] - lift_transform(h, w, F.xi[m])), 0.0, 1e-5) << F.xi[m];
    }
}

TEST(WeakConvergence, ProbeValuesConverge) {
    WeightParams w(1.0, 2.0);
    auto g = share(Grid::graded(recommended_x_max(w), 48));
    std::mt19937_64 rng(15);
    auto h = oracle::random_curve(g, rng, 1.3);
    auto d = oracle::random_curve(g, rng, 1.3);
    for (double xi : probe_frequencies()) {
        cplx target = lift_transform(h, w, xi);
        double prev = 1e300;
        for (int j = 1; j <= 64; j *= 4) {
            double err = std::abs(lift_transform(h + (1.0 / j) * d, w, xi) - target);
            EXPECT_LE(err, prev);
            prev = err;
        }
        EXPECT_LT(prev, 0.05 * (1.0 + std::abs(target)));
    }
}
