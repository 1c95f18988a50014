#include "gwlab/fieldops.hpp"
#include "gwlab/profile.hpp"
#include "gwlab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace gwlab;

namespace {

// n-point Gauss-Legendre nodes and weights on [-1, 1] by Newton on P_n
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w)
{
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
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
            if (std::abs(dz) < 1e-16)
                break;
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

double gl_integrate(const std::function<double(double)>& f, double a, double b, int n = 40)
{
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        s += w[i] * f(0.5 * (a + b) + 0.5 * (b - a) * x[i]);
    return 0.5 * (b - a) * s;
}

double max_err(const std::vector<double>& a, const std::vector<double>& b)
{
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        e = std::max(e, std::abs(a[i] - b[i]));
    return e;
}

} // namespace

TEST(Poisson, ClosedFormUniformSource)
{
    for (double R : {1.0, 2.0}) {
        RadialGrid g(R, 256);
        auto one = sample_mode(0, g, [](double) { return 1.0; }, ModeKind::WeightedDivergence);
        auto psi = mode_potential(one);
        for (int i = 0; i <= g.n; ++i)
            EXPECT_NEAR(psi.values[i], g.r[i] * g.r[i] / 6.0 - R * R / 2.0, 1e-8);
    }
}

TEST(Poisson, ClosedFormLinearDipole)
{
    for (double R : {1.0, 1.5}) {
        RadialGrid g(R, 256);
        auto src = sample_mode(1, g, [](double r) { return r; }, ModeKind::WeightedDivergence);
        auto psi = mode_potential(src);
        for (int i = 0; i <= g.n; ++i) {
            double r = g.r[i];
            EXPECT_NEAR(psi.values[i], -R * R * r / 6.0 + r * r * r / 10.0, 1e-8);
        }
    }
}

TEST(Poisson, SecondOrderInverse)
{
    for (int l = 0; l <= 3; ++l) {
        std::vector<double> errs;
        for (int n : {128, 256, 512}) {
            RadialGrid g(1.0, n);
            auto src = sample_mode(l, g, [l](double r) { return std::pow(r, l) * (1.0 + std::sin(2.0 * r * r)); },
                                   ModeKind::WeightedDivergence);
            auto back = mode_laplacian(mode_potential(src));
            errs.push_back(max_err(back.values, src.values));
        }
        EXPECT_GE(std::log2(errs[0] / errs[1]), 1.8) << "l=" << l;
        EXPECT_GE(std::log2(errs[1] / errs[2]), 1.8) << "l=" << l;
    }
}

TEST(Poisson, CoulombKernelCrossCheck)
{
    // psi(r) = -(1/4 pi) int K_l(r, y) g(y) y^2 dy, integrated with Gauss-Legendre on both sides of r
    RadialGrid g(1.0, 256);
    for (int l = 0; l <= 3; ++l) {
        auto gf = [l](double r) { return std::pow(r, l) * std::exp(-r * r) * (1.0 - r); };
        auto psi = mode_potential(sample_mode(l, g, gf, ModeKind::WeightedDivergence));
        for (int i = 8; i <= g.n; i += 31) {
            double r = g.r[i];
            auto f = [&](double y) { return coulomb_kernel(l, r, y) * gf(y) * y * y; };
            double ref = -(gl_integrate(f, 0.0, r) + gl_integrate(f, r, 1.0)) / (4.0 * M_PI);
            EXPECT_NEAR(psi.values[i], ref, 1e-7) << "l=" << l << " r=" << r;
        }
    }
}

TEST(Poisson, GradientEnergyEqualsPairing)
{
    // int |grad psi|^2 over space = -int g psi r^2 for Lap psi = g
    RadialGrid g(1.0, 512);
    for (int l = 0; l <= 2; ++l) {
        auto src = sample_mode(l, g, [l](double r) { return std::pow(r, l) * (1.0 - r * r) * (2.0 + r); },
                               ModeKind::WeightedDivergence);
        auto psi = mode_potential(src);
        std::vector<double> f(g.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            f[i] = src.values[i] * psi.values[i] * g.r[i] * g.r[i];
        double pair = -quad::simpson(f, g.h);
        EXPECT_NEAR(potential_gradient_norm(psi), pair, 1e-4 * std::abs(pair)) << l;
    }
}

TEST(Laplacian, ExactOnRegularPolynomials)
{
    RadialGrid g(1.0, 128);
    for (int l = 0; l <= 4; ++l) {
        auto psi = sample_mode(l, g, [l](double r) { return std::pow(r, l + 2); }, ModeKind::Potential);
        auto lap = mode_laplacian(psi);
        for (int i = 1; i < g.n; ++i)
            EXPECT_NEAR(lap.values[i], (4.0 * l + 6.0) * std::pow(g.r[i], l), 1e-8) << "l=" << l << " i=" << i;
    }
}

TEST(Divergence, MatrixMatchesOperator)
{
    auto p = solve_profile(-0.02, 1.0, 128);
    Lcg64 rng(3);
    for (int l = 0; l <= 3; ++l) {
        auto u = sample_mode(l, p.grid, [&](double r) { return std::pow(r, l == 0 ? 2 : l) * std::cos(3.0 * r); });
        for (int i = 0; i <= p.grid.n; ++i)
            u.values[i] += 1e-3 * uniform(rng, -1.0, 1.0) * std::pow(p.grid.r[i], l == 0 ? 2 : l);
        if (l >= 1)
            u.values[0] = 0.0;
        auto g = mode_divergence(u, p);
        Eigen::MatrixXd D = divergence_matrix(l, p);
        Eigen::Map<const Eigen::VectorXd> uv(u.values.data(), u.values.size());
        Eigen::VectorXd gv = D * uv;
        for (int i = 1; i < p.grid.n; ++i)
            EXPECT_NEAR(gv[i], g.values[i], 1e-9 * (1.0 + std::abs(g.values[i]))) << "l=" << l << " i=" << i;
    }
}

TEST(Divergence, AffineDirection)
{
    // u = r^2/2: w^3 * 3 + 3 w^2 w' r, exact for the stencils
    auto p = solve_profile(-0.02, 1.0, 256);
    auto g = mode_divergence(sample_mode(0, p.grid, [](double r) { return 0.5 * r * r; }), p);
    for (int i = 1; i < p.grid.n; ++i) {
        double w = p.w[i];
        EXPECT_NEAR(g.values[i], 3.0 * w * w * w + 3.0 * w * w * p.wprime[i] * p.grid.r[i], 1e-9);
    }
}

TEST(Harmonics, Orthonormal)
{
    std::vector<double> x, w;
    gauss_legendre(12, x, w);
    const int nphi = 16;
    std::vector<std::pair<int, int>> lm;
    for (int l = 0; l <= 2; ++l)
        for (int m = -l; m <= l; ++m)
            lm.push_back({l, m});
    for (auto [l1, m1] : lm)
        for (auto [l2, m2] : lm) {
            double s = 0.0;
            for (int a = 0; a < 12; ++a)
                for (int k = 0; k < nphi; ++k) {
                    double ph = 2.0 * M_PI * k / nphi, st = std::sqrt(1.0 - x[a] * x[a]);
                    double X = st * std::cos(ph), Y = st * std::sin(ph), Z = x[a];
                    s += w[a] * (2.0 * M_PI / nphi) * spherical_harmonic(l1, m1, X, Y, Z) *
                         spherical_harmonic(l2, m2, X, Y, Z);
                }
            EXPECT_NEAR(s, (l1 == l2 && m1 == m2) ? 1.0 : 0.0, 1e-12);
        }
    EXPECT_THROW(spherical_harmonic(3, 0, 0.0, 0.0, 1.0), Error);
}

TEST(Quadrature, ExactAndConvergent)
{
    RadialGrid g(2.0, 64);
    std::vector<double> f(g.size()), c(g.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = g.r[i] * g.r[i] * g.r[i];
    EXPECT_NEAR(quad::simpson(f, g.h), 4.0, 1e-12);
    auto cum = quad::cumulative(f, g.h);
    for (std::size_t i = 0; i < f.size(); ++i)
        EXPECT_NEAR(cum[i], std::pow(g.r[i], 4) / 4.0, 1e-11);
    auto gw = quad::gregory_weights(g.n, g.h);
    double s = 0.0;
    for (double v : gw)
        s += v;
    EXPECT_NEAR(s, 2.0, 1e-13);
}

TEST(WeightedInner, ValuesAndErrors)
{
    auto p = solve_profile(-0.01, 1.0, 128);
    std::vector<double> one(p.grid.size(), 1.0);
    EXPECT_NEAR(weighted_inner(one, one, 0, p), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(4.0 * M_PI * weighted_inner(one, one, 3, p), p.mass, 1e-5 * p.mass);
    EXPECT_THROW(weighted_inner(one, one, -1, p), Error);
    std::vector<double> short_v(10, 1.0);
    EXPECT_THROW(weighted_inner(short_v, one, 0, p), Error);
    auto q = solve_profile(-0.01, 1.0, 256);
    auto a = sample_mode(0, p.grid, [](double r) { return r; });
    auto b = sample_mode(0, q.grid, [](double r) { return r; });
    EXPECT_THROW(weighted_inner(a, b, 0, p), Error);
}
