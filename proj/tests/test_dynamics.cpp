#include "gwlab/dynamics.hpp"
#include "gwlab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <memory>

using namespace gwlab;

namespace {

const StarProfile& profile(double delta, int n)
{
    static std::map<std::pair<double, int>, StarProfile> cache;
    auto key = std::make_pair(delta, n);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, solve_profile(delta, 1.0, n)).first;
    return it->second;
}

const ModeSystem& system_for(int l, double delta, int n)
{
    static std::map<std::tuple<int, double, int>, std::unique_ptr<ModeSystem>> cache;
    auto key = std::make_tuple(l, delta, n);
    auto& slot = cache[key];
    if (!slot)
        slot = std::make_unique<ModeSystem>(build_mode_system(l, profile(delta, n)));
    return *slot;
}

std::vector<double> column(const std::vector<DiagnosticsRecord>& recs, double DiagnosticsRecord::*f)
{
    std::vector<double> v;
    for (const auto& r : recs)
        v.push_back(r.*f);
    return v;
}

ModeState random_state(int l, const RadialGrid& g, std::uint64_t seed, Regime regime)
{
    Lcg64 rng(seed);
    ModeState st;
    st.l = l;
    st.u = random_mode(l, g, rng);
    st.u_s = random_mode(l, g, rng);
    st.regime = regime;
    return st;
}

constexpr double kDelta = -0.02;
constexpr int kN = 256;

} // namespace

TEST(Characteristic, RootsSolveThePolynomial)
{
    Lcg64 rng(8);
    for (int t = 0; t < 50; ++t) {
        double b = uniform(rng, -1.0, 0.0), om = uniform(rng, -1.0, 0.01);
        auto [p, m] = characteristic_roots(b, om);
        if (p == m)
            continue;
        EXPECT_NEAR(p * p - 0.5 * b * p + om, 0.0, 1e-12);
        EXPECT_NEAR(m * m - 0.5 * b * m + om, 0.0, 1e-12);
        EXPECT_GT(p, m);
    }
    // the affine eigenvalues give mu = (|b|, -3|b|/2) and (|b|/2, -|b|)
    double b = -0.2;
    auto r0 = characteristic_roots(b, 3.0 * kDelta);
    auto r1 = characteristic_roots(b, kDelta);
    EXPECT_NEAR(r0.first, 0.2, 1e-14);
    EXPECT_NEAR(r0.second, -0.3, 1e-14);
    EXPECT_NEAR(r1.first, 0.1, 1e-14);
    EXPECT_NEAR(r1.second, -0.2, 1e-14);
}

TEST(ModeSystem, AffineEigenvalues)
{
    EXPECT_NEAR(system_for(0, kDelta, kN).omega[system_for(0, kDelta, kN).affine], 3.0 * kDelta, 1e-4);
    EXPECT_NEAR(system_for(1, kDelta, kN).omega[system_for(1, kDelta, kN).affine], kDelta, 1e-4);
    EXPECT_EQ(system_for(2, kDelta, kN).affine, -1);
    const auto& s2 = system_for(2, kDelta, kN);
    for (int k = 0; k < s2.omega.size(); ++k)
        EXPECT_GE(s2.omega[k], 0.0);
}

TEST(ModeSystem, EigenvectorsAreMassOrthonormal)
{
    const auto& sys = system_for(1, kDelta, kN);
    Eigen::MatrixXd G = sys.phi.transpose() * sys.M * sys.phi;
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(G.rows(), G.cols());
    EXPECT_LE((G - I).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(sys.omega[sys.kernel], 0.0);
}

TEST(Projection, RemovesGrowthAndIsIdempotent)
{
    const auto& p = profile(kDelta, kN);
    const auto& sys = system_for(0, kDelta, kN);
    auto st = random_state(0, p.grid, 5, Regime::SelfSimilar);
    auto once = project_stable(st, sys, -0.2);
    auto twice = project_stable(once, sys, -0.2);
    for (std::size_t i = 0; i < once.u.values.size(); ++i) {
        EXPECT_NEAR(once.u.values[i], twice.u.values[i], 1e-10);
        EXPECT_NEAR(once.u_s.values[i], twice.u_s.values[i], 1e-10);
    }
    // l >= 2 is untouched
    auto s2 = random_state(2, p.grid, 5, Regime::SelfSimilar);
    auto p2 = project_stable(s2, system_for(2, kDelta, kN), -0.2);
    EXPECT_EQ(p2.u.values, s2.u.values);
}

TEST(SelfSimilar, AffineRatesAndDrift)
{
    const auto& p = profile(kDelta, kN);
    auto gp = self_similar(kDelta);
    double bb = std::abs(gp.b);
    for (int l = 0; l <= 1; ++l) {
        const auto& sys = system_for(l, kDelta, kN);
        double grow = (l == 0 ? 1.0 : 0.5) * bb, decay = (l == 0 ? 1.5 : 1.0) * bb;
        EvolveOptions og;
        og.n_steps = 20000;
        og.ds = 20.0 / grow / og.n_steps;
        auto st = random_state(l, p.grid, 12345 + l, Regime::SelfSimilar);
        auto run = evolve_mode(st, sys, gp, og);
        double g = fit_rate(column(run.records, &DiagnosticsRecord::s),
                            column(run.records, &DiagnosticsRecord::affine_amplitude));
        EXPECT_NEAR(g / grow, 1.0, 0.05) << "l=" << l;

        double mm = characteristic_roots(gp.b, sys.omega[sys.affine]).second;
        ModeState sl;
        sl.l = l;
        sl.u = sample_mode(l, p.grid, [l](double r) { return 1e-3 * (l == 0 ? 0.5 * r * r : r); });
        sl.u_s = sample_mode(l, p.grid, [&](double r) { return mm * 1e-3 * (l == 0 ? 0.5 * r * r : r); });
        EvolveOptions od;
        od.n_steps = 20000;
        od.ds = 10.0 / decay / od.n_steps;
        auto sr = evolve_mode(project_stable(sl, sys, gp.b), sys, gp, od);
        double dr = -fit_rate(column(sr.records, &DiagnosticsRecord::s),
                              column(sr.records, &DiagnosticsRecord::affine_amplitude));
        EXPECT_NEAR(dr / decay, 1.0, 0.02) << "l=" << l;
    }
    // momentum pairing along l = 1 data on the constraint
    const auto& sys1 = system_for(1, kDelta, kN);
    auto ps = project_stable(random_state(1, p.grid, 12346, Regime::SelfSimilar), sys1, gp.b);
    double norm = mode_data_norm(ps, sys1);
    EvolveOptions o;
    auto run = evolve_mode(ps, sys1, gp, o);
    for (const auto& r : run.records)
        EXPECT_LE(std::abs(r.momentum_pairing), 1e-8 * norm);
}

TEST(SelfSimilar, HigherModeEnergyDecays)
{
    const auto& p = profile(kDelta, kN);
    auto run = evolve_mode(random_state(2, p.grid, 12347, Regime::SelfSimilar), system_for(2, kDelta, kN),
                           self_similar(kDelta), EvolveOptions{});
    auto e = column(run.records, &DiagnosticsRecord::mode_energy);
    double kappa = -fit_rate(column(run.records, &DiagnosticsRecord::s), e, 0.0, 5.0, 40.0);
    EXPECT_GT(kappa, 0.0);
    for (std::size_t i = 1; i < e.size(); ++i)
        EXPECT_LE(e[i], e[i - 1] * (1.0 + 1e-9));
}

TEST(SelfSimilar, GalileanMomentum)
{
    // u_s = r / c1 is a uniform translation; W / M stays 1
    const auto& p = profile(kDelta, kN);
    const auto& sys = system_for(1, kDelta, kN);
    double c1 = std::sqrt(3.0 / (4.0 * M_PI));
    auto st = make_mode_state(1, p.grid, [](double) { return 0.0; }, [c1](double r) { return r / c1; },
                              Regime::SelfSimilar);
    EvolveOptions o;
    o.ds = 0.01;
    o.n_steps = 2000;
    auto run = evolve_mode(st, sys, self_similar(kDelta), o);
    for (const auto& r : run.records)
        EXPECT_NEAR(r.Wdelta / p.mass, 1.0, 1e-3);
}

TEST(LinearRegime, EnergyStaysBounded)
{
    for (double d : {0.0, 0.01}) {
        auto gp = make_parameters(d, 1.0);
        const auto& p = profile(d, kN);
        for (int l = 0; l <= 2; ++l) {
            EvolveOptions o;
            o.ds = 1.5e-3;
            o.n_steps = 20000;
            o.sample_every = 10;
            auto run = evolve_mode(random_state(l, p.grid, 777 + l, Regime::LinearExpanding), system_for(l, d, kN), gp, o);
            double e0 = run.records.front().mode_energy;
            for (const auto& r : run.records)
                EXPECT_LE(r.mode_energy, 3.0 * e0) << "d=" << d << " l=" << l;
        }
    }
}

TEST(Evolve, RejectsMismatchedInput)
{
    const auto& p = profile(kDelta, kN);
    auto st = random_state(1, p.grid, 1, Regime::SelfSimilar);
    EXPECT_THROW(evolve_mode(st, system_for(2, kDelta, kN), self_similar(kDelta), EvolveOptions{}), Error);
    EvolveOptions bad;
    bad.ds = -1.0;
    EXPECT_THROW(evolve_mode(st, system_for(1, kDelta, kN), self_similar(kDelta), bad), Error);
    auto other = random_state(1, profile(kDelta, 128).grid, 1, Regime::SelfSimilar);
    EXPECT_THROW(evolve_mode(other, system_for(1, kDelta, kN), self_similar(kDelta), EvolveOptions{}), Error);
}

TEST(Radial, BackgroundIsAFixedPoint)
{
    for (double d : {-0.05, -0.02, -0.01}) {
        const auto& p = profile(d, 512);
        auto m = make_radial_model(p, self_similar(d).b);
        EXPECT_LE(radial_fixed_point_residual(m), 1e-8);
        auto st = make_radial_state(p, [](double r) { return r; }, [](double) { return 0.0; });
        auto run = evolve_radial_nonlinear(st, m, 0.5, 4);
        for (int i = 0; i <= p.grid.n; ++i)
            EXPECT_NEAR(run.state.xi[i], p.grid.r[i], 1e-10);
        double E0 = run.records.front().Edelta, scale = radial_energy_scale(m, st);
        for (const auto& r : run.records) {
            EXPECT_NEAR(r.Edelta, E0, 1e-10 * scale);
            EXPECT_NEAR(r.Wdelta, 0.0, 1e-12);
        }
    }
}

TEST(Radial, EpsilonRunMatchesLinearModes)
{
    double d = -0.02;
    auto gp = self_similar(d);
    const auto& p = profile(d, 512);
    auto m = make_radial_model(p, gp.b);
    const auto& sys = system_for(0, d, 512);
    auto shape = [](double r) { return r * (1.0 - 0.5 * r * r + 0.3 * r * r * r * r); };
    double prev = 0.0;
    for (double eps : {2e-3, 1e-3}) {
        auto c = compare_radial_with_mode(p, m, sys, gp, shape, eps, 1.0);
        EXPECT_LE(c.error, 10.0 * eps * eps) << eps;
        EXPECT_LE(c.energy_drift, 1e-6);
        EXPECT_NEAR(c.amplitude / eps, 1.0, 0.5);
        if (prev > 0.0) {
            EXPECT_LT(c.error, prev); // the mismatch shrinks with the amplitude
        }
        prev = c.error;
    }
}

TEST(Radial, TimeTranslateDecays)
{
    double d = -0.02;
    auto gp = self_similar(d);
    const auto& p = profile(d, kN);
    auto m = make_radial_model(p, gp.b);
    auto st = radial_translate_state(p, gp.b, 0.5);
    double E0 = radial_energy(m, st), scale = radial_energy_scale(m, st);
    std::vector<double> s, a;
    for (int k = 0; k < 40; ++k) {
        st = evolve_radial_nonlinear(st, m, 0.5, 1).state;
        s.push_back(st.s);
        a.push_back(st.xi.back() - 1.0);
        EXPECT_LE(std::abs(radial_energy(m, st) - E0), 1e-6 * scale);
    }
    EXPECT_NEAR(-fit_rate(s, a) / 0.3, 1.0, 0.05);
    // the exact family: xi(R) = lambda(t + tau) / lambda(t) with t from s
    double bb = 0.2, t = (std::exp(1.5 * bb * st.s) - 1.0) / (1.5 * bb);
    double exact = std::pow((1.0 + 1.5 * bb * (t + 0.5)) / (1.0 + 1.5 * bb * t), 2.0 / 3.0);
    EXPECT_NEAR(st.xi.back(), exact, 1e-6);
}

TEST(Radial, ShellCrossingIsReported)
{
    const auto& p = profile(-0.02, 128);
    auto m = make_radial_model(p, -0.2);
    auto st = make_radial_state(p, [](double r) { return r; }, [](double) { return 0.0; });
    st.xi[10] = st.xi[12];
    try {
        evolve_radial_nonlinear(st, m, 0.1, 1);
        FAIL() << "expected ShellCrossing";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShellCrossing);
    }
}
