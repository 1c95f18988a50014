#include "gwlab/profile.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <functional>

using namespace gwlab;

namespace {

// classical RK4 on y' = f(x, y) for a pair, fixed step
using Pair = std::array<double, 2>;

Pair rk4_step(const std::function<Pair(double, const Pair&)>& f, double x, const Pair& y, double h)
{
    auto add = [](const Pair& a, const Pair& b, double s) { return Pair{a[0] + s * b[0], a[1] + s * b[1]}; };
    Pair k1 = f(x, y);
    Pair k2 = f(x + h / 2, add(y, k1, h / 2));
    Pair k3 = f(x + h / 2, add(y, k2, h / 2));
    Pair k4 = f(x + h, add(y, k3, h));
    return {y[0] + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            y[1] + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

// w'' + 2 w'/r + (3 delta + 4 pi w^3)/4 = 0 from w(0) = w0, sampled at r_out; also returns the first
// zero by linear interpolation on a fine step
struct Shot {
    std::vector<double> w;
    double zero = 0.0;
};

Shot shoot(double delta, double w0, const std::vector<double>& r_out, double h)
{
    auto f = [delta](double r, const Pair& y) {
        return Pair{y[1], -2.0 * y[1] / r - (3.0 * delta + 4.0 * M_PI * y[0] * y[0] * y[0]) / 4.0};
    };
    // series start: w = w0 - c r^2 / 6, c = (3 delta + 4 pi w0^3)/4
    double c = (3.0 * delta + 4.0 * M_PI * w0 * w0 * w0) / 4.0;
    double r = 1e-6;
    Pair y{w0 - c * r * r / 6.0, -c * r / 3.0};
    Shot out;
    out.w.assign(r_out.size(), 0.0);
    out.w[0] = w0;
    std::size_t k = 1;
    while (true) {
        double step = h;
        if (k < r_out.size() && r + step > r_out[k])
            step = r_out[k] - r;
        Pair yn = rk4_step(f, r, y, step);
        if (yn[0] <= 0.0 && out.zero == 0.0)
            out.zero = r + step * y[0] / (y[0] - yn[0]);
        r += step;
        y = yn;
        if (k < r_out.size() && std::abs(r - r_out[k]) < 1e-15) {
            out.w[k] = y[0];
            ++k;
        }
        if (k >= r_out.size() && out.zero != 0.0)
            break;
        if (r > 3.0 * r_out.back())
            break;
    }
    return out;
}

double lane_emden_zero()
{
    double h = 2e-5, x = 1e-6;
    auto f = [](double x, const Pair& y) { return Pair{y[1], -2.0 * y[1] / x - y[0] * y[0] * y[0]}; };
    Pair y{1.0 - x * x / 6.0, -x / 3.0};
    while (true) {
        Pair yn = rk4_step(f, x, y, h);
        if (yn[0] <= 0.0) {
            // secant refinement on the step fraction
            double a = 0.0, b = h, fa = y[0], fb = yn[0];
            for (int it = 0; it < 60 && std::abs(b - a) > 1e-16; ++it) {
                double m = b - fb * (b - a) / (fb - fa);
                double fm = rk4_step(f, x, y, m)[0];
                a = b;
                fa = fb;
                b = m;
                fb = fm;
            }
            return x + b;
        }
        x += h;
        y = yn;
    }
}

} // namespace

TEST(Profile, LaneEmdenFirstZeroOracle)
{
    EXPECT_NEAR(lane_emden_zero(), kLaneEmdenXi1, 1e-9);
}

TEST(Profile, DeltaZeroMatchesLaneEmdenRadius)
{
    auto p = solve_profile(0.0, 1.0, 512);
    double R_oracle = lane_emden_zero() / (std::sqrt(M_PI) * p.w0);
    EXPECT_LE(std::abs(R_oracle - 1.0), 1e-6);
}

TEST(Profile, MatchesIndependentShooting)
{
    for (double d : {-0.05, -0.02, -0.01, 0.0, 0.01}) {
        auto p = solve_profile(d, 1.0, 256);
        auto shot = shoot(d, p.w0, p.grid.r, 1e-4);
        double worst = 0.0;
        for (int i = 0; i < p.grid.n; ++i)
            worst = std::max(worst, std::abs(shot.w[i] - p.w[i]));
        EXPECT_LE(worst, 1e-8 * p.w0) << "delta " << d;
        EXPECT_NEAR(shot.zero, 1.0, 1e-7) << "delta " << d;
    }
}

TEST(Profile, ResidualsOnTheSweep)
{
    for (double d : {-0.05, -0.02, -0.01, 0.0}) {
        auto p = solve_profile(d, 1.0, 1024);
        EXPECT_LE(profile_residual(p), 1e-8 * std::max(1.0, std::pow(p.w0, 3))) << d;
        EXPECT_LE(profile_identity_residual(p), 1e-7) << d;
        EXPECT_LT(p.wprime.back(), 0.0) << d;
        EXPECT_EQ(p.w.back(), 0.0);
        for (int i = 0; i < p.grid.n; ++i)
            EXPECT_GT(p.w[i], 0.0);
    }
}

TEST(Profile, MassFromQuadratureAndBoundarySlope)
{
    auto p = solve_profile(-0.02, 1.0, 1024);
    std::vector<double> f(p.grid.size()), g(p.grid.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double r = p.grid.r[i], w3 = std::pow(p.w[i], 3);
        f[i] = w3 * r * r;
        g[i] = w3 * r * r * r * r;
    }
    EXPECT_NEAR(4.0 * M_PI * quad::simpson(f, p.grid.h), p.mass, 1e-6 * p.mass);
    EXPECT_NEAR(4.0 * M_PI * quad::simpson(g, p.grid.h), p.m2, 1e-6 * p.m2);
    // 4 pi M(R) / R^2 = -(4 w'(R) + delta R)
    EXPECT_NEAR(p.mass, -(4.0 * p.wprime.back() - 0.02), 1e-9);
}

TEST(Profile, ScalingSymmetry)
{
    // w_a(r) = a w(a r) solves the equation with a^3 delta on [0, R/a]
    double a = 1.25, d = -0.02;
    auto p = solve_profile(d, 1.0, 512);
    auto q = solve_profile(a * a * a * d, 1.0 / a, 512);
    EXPECT_NEAR(q.w0, a * p.w0, 1e-9 * p.w0);
    for (int i = 0; i <= 512; i += 64)
        EXPECT_NEAR(q.w[i], a * p.w[i], 1e-9 * p.w0);
}

TEST(Profile, Deterministic)
{
    auto p = solve_profile(-0.01, 1.0, 256);
    auto q = solve_profile(-0.01, 1.0, 256);
    EXPECT_EQ(p.w, q.w);
    EXPECT_EQ(p.w0, q.w0);
}

TEST(Profile, InadmissibleDelta)
{
    try {
        solve_profile(-5.0, 1.0, 256);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoCompactSupport);
    }
    EXPECT_THROW(solve_profile(-0.02, 1.0, 16), Error);
    EXPECT_THROW(solve_profile(-0.02, -1.0, 256), Error);
}

TEST(Parameters, Regimes)
{
    EXPECT_EQ(classify_regime(-0.02, 0.2), Regime::SelfSimilar);
    EXPECT_EQ(classify_regime(-0.02, 1.0), Regime::LinearExpanding);
    EXPECT_EQ(classify_regime(0.0, 0.0), Regime::LaneEmden);
    EXPECT_EQ(classify_regime(0.0, 1.0), Regime::LinearExpanding);
    EXPECT_EQ(classify_regime(0.01, 0.0), Regime::LinearExpanding);
    EXPECT_THROW(classify_regime(0.0, -1.0), Error);
    EXPECT_THROW(classify_regime(-0.02, 0.1), Error);
    EXPECT_THROW(classify_regime(-0.5, 2.0), Error);
    auto gp = make_parameters(-0.02, 0.2);
    EXPECT_NEAR(gp.b, -0.2, 1e-15);
    EXPECT_EQ(make_parameters(0.0, 1.0).b, 0.0);
}

TEST(Expansion, SelfSimilarClosedForm)
{
    for (double d : {-0.05, -0.02, -0.01}) {
        auto gp = self_similar(d);
        auto h = time_map(solve_lambda(gp, 100.0, 2000));
        double l1 = gp.lambda1;
        for (std::size_t i = 0; i < h.t.size(); ++i) {
            double x = 1.0 + 1.5 * l1 * h.t[i];
            EXPECT_NEAR(h.lambda[i], std::pow(x, 2.0 / 3.0), 1e-8 * h.lambda[i]);
            // d lambda/ds / lambda is constant along the family
            EXPECT_NEAR(h.lambdadot[i] * std::sqrt(h.lambda[i]), l1, 1e-6);
            EXPECT_NEAR(h.s[i], std::log(x) / (1.5 * l1), 1e-8 * (1.0 + h.s[i]));
        }
    }
}

TEST(Expansion, LinearAsymptoticSpeed)
{
    for (double d : {-0.05, 0.0, 0.01}) {
        auto gp = make_parameters(d, 1.0);
        auto h = solve_lambda(gp, 1e4, 2000);
        EXPECT_NEAR(h.lambdadot.back(), std::sqrt(1.0 + 2.0 * d), 1e-4) << d;
        // energy lambda'^2 / 2 + delta / lambda is conserved
        for (std::size_t i = 0; i < h.t.size(); i += 100)
            EXPECT_NEAR(0.5 * h.lambdadot[i] * h.lambdadot[i] + d / h.lambda[i], 0.5 + d, 1e-8);
    }
    auto h = time_map(solve_lambda(make_parameters(0.0, 1.0), 10.0, 2000));
    for (std::size_t i = 0; i < h.t.size(); ++i) {
        EXPECT_NEAR(h.lambda[i], 1.0 + h.t[i], 1e-12);
        EXPECT_NEAR(h.s[i], std::log(1.0 + h.t[i]), 1e-8);
    }
}

TEST(Expansion, BadInput)
{
    EXPECT_THROW(solve_lambda(self_similar(-0.02), -1.0, 10), Error);
    EXPECT_THROW(solve_lambda(self_similar(-0.02), 1.0, 0), Error);
}
