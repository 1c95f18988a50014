#pragma once

#include "gwlab/errors.hpp"
#include "gwlab/grid.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace gwlab {

constexpr double kPi = 3.14159265358979323846;

// first zero of the n = 3 Lane-Emden function, used only to seed the shooting bracket
constexpr double kLaneEmdenXi1 = 6.896848619376960;

enum class Regime { SelfSimilar, LinearExpanding, LaneEmden };

inline const char* regime_name(Regime r)
{
    switch (r) {
    case Regime::SelfSimilar: return "self_similar";
    case Regime::LinearExpanding: return "linear";
    case Regime::LaneEmden: return "lane_emden";
    }
    return "unknown";
}

struct GWParameters {
    double delta = 0.0;
    double lambda1 = 0.0;
    double b = 0.0;
    Regime regime = Regime::LaneEmden;
};

// Lower end of the admissible delta window; the true boundary is only known empirically.
constexpr double kDefaultDeltaMin = -0.1;

inline Regime classify_regime(double delta, double lambda1, double delta_min = kDefaultDeltaMin)
{
    if (!std::isfinite(delta) || !std::isfinite(lambda1))
        throw Error(ErrorKind::InvalidInput, "non-finite expansion parameters");
    if (delta > 0.0)
        return Regime::LinearExpanding;
    if (delta == 0.0) {
        if (lambda1 == 0.0)
            return Regime::LaneEmden;
        if (lambda1 > 0.0)
            return Regime::LinearExpanding;
        throw Error(ErrorKind::CollapsingOrInadmissible, "delta = 0 with lambda1 < 0 collapses");
    }
    if (delta <= delta_min)
        throw Error(ErrorKind::CollapsingOrInadmissible, "delta below the admissible window");
    double crit = std::sqrt(2.0 * std::abs(delta));
    if (std::abs(lambda1 - crit) <= 1e-12 * crit)
        return Regime::SelfSimilar;
    if (lambda1 > crit)
        return Regime::LinearExpanding;
    throw Error(ErrorKind::CollapsingOrInadmissible, "lambda1 below the escape value for this delta");
}

inline GWParameters make_parameters(double delta, double lambda1, double delta_min = kDefaultDeltaMin)
{
    GWParameters p;
    p.delta = delta;
    p.lambda1 = lambda1;
    p.regime = classify_regime(delta, lambda1, delta_min);
    p.b = (p.regime == Regime::SelfSimilar) ? -std::sqrt(2.0 * std::abs(delta)) : 0.0;
    return p;
}

// self-similar parameters for a given delta < 0
inline GWParameters self_similar(double delta)
{
    double l1 = std::sqrt(2.0 * std::abs(delta));
    GWParameters p{delta, l1, -l1, Regime::SelfSimilar};
    if (delta == 0.0)
        p.regime = Regime::LaneEmden;
    return p;
}

struct StarProfile {
    GWParameters params;
    RadialGrid grid;
    std::vector<double> w;
    std::vector<double> wprime;
    std::vector<double> enclosed; // int_0^r w^3 y^2 dy
    double w0 = 0.0;
    double mass = 0.0; // 4 pi int w^3 r^2
    double m2 = 0.0;   // 4 pi int w^3 r^4

    double R() const { return grid.R; }
};

struct ProfileOptions {
    double delta_min = kDefaultDeltaMin;
    double rtol = 1e-12;
    double atol = 1e-14;
    double r_max_factor = 40.0;
    int max_shoot_iter = 200;
    bool allow_coarse = false;
};

namespace detail {

using ProfileState = std::array<double, 4>; // w, w', int w^3 r^2, int w^3 r^4

struct ProfileRhs {
    double delta;
    void operator()(const ProfileState& x, ProfileState& dx, double r) const
    {
        double w3 = x[0] * x[0] * x[0];
        dx[0] = x[1];
        dx[1] = -2.0 * x[1] / r - (3.0 * delta + 4.0 * kPi * w3) / 4.0;
        dx[2] = w3 * r * r;
        dx[3] = w3 * r * r * r * r;
    }
};

// series about the origin through r^4
inline ProfileState taylor_start(double delta, double w0, double r)
{
    double a2 = -(3.0 * delta + 4.0 * kPi * w0 * w0 * w0) / 24.0;
    double a4 = -3.0 * kPi * w0 * w0 * a2 / 20.0;
    double r2 = r * r;
    double w03 = w0 * w0 * w0;
    ProfileState x;
    x[0] = w0 + a2 * r2 + a4 * r2 * r2;
    x[1] = 2.0 * a2 * r + 4.0 * a4 * r2 * r;
    x[2] = w03 * r2 * r / 3.0 + 3.0 * w0 * w0 * a2 * r2 * r2 * r / 5.0;
    x[3] = w03 * r2 * r2 * r / 5.0;
    return x;
}

} // namespace detail

// First zero of the radial profile started at w(0) = w0, or nullopt when the profile turns
// around (or runs past r_max) before reaching vacuum.
inline std::optional<double> first_zero(double delta, double w0, double r_scale, const ProfileOptions& opt = {})
{
    using namespace boost::numeric::odeint;
    detail::ProfileRhs rhs{delta};
    double r0 = 1e-4 * r_scale;
    auto x = detail::taylor_start(delta, w0, r0);
    auto stepper = make_dense_output(opt.atol, opt.rtol, runge_kutta_dopri5<detail::ProfileState>());
    stepper.initialize(x, r0, 1e-3 * r_scale);
    double r_max = opt.r_max_factor * r_scale;
    for (int steps = 0; steps < 2000000; ++steps) {
        auto span = stepper.do_step(rhs);
        const auto& cur = stepper.current_state();
        if (!std::isfinite(cur[0]))
            return std::nullopt;
        if (cur[0] <= 0.0) {
            double a = span.first, b = span.second;
            double fa = stepper.previous_state()[0], fb = cur[0];
            detail::ProfileState tmp;
            int side = 0;
            for (int it = 0; it < 200 && b - a > 4e-16 * b; ++it) {
                double c = (a * fb - b * fa) / (fb - fa);
                if (!(c > a && c < b))
                    c = 0.5 * (a + b);
                stepper.calc_state(c, tmp);
                double fc = tmp[0];
                if (fc == 0.0)
                    return c;
                if ((fc > 0.0) == (fa > 0.0)) {
                    a = c;
                    fa = fc;
                    if (side == -1)
                        fb *= 0.5;
                    side = -1;
                } else {
                    b = c;
                    fb = fc;
                    if (side == 1)
                        fa *= 0.5;
                    side = 1;
                }
            }
            return (a * fb - b * fa) / (fb - fa);
        }
        if (cur[1] >= 0.0 || span.second > r_max)
            return std::nullopt;
    }
    return std::nullopt;
}

inline StarProfile solve_profile(double delta, double R_target, int n, double tol_shoot = 1e-13,
                                 const ProfileOptions& opt = {})
{
    if (!std::isfinite(delta))
        throw Error(ErrorKind::InvalidInput, "delta must be finite");
    if (delta < opt.delta_min)
        throw Error(ErrorKind::NoCompactSupport,
                    "delta = " + std::to_string(delta) + " lies below the admissible bound " +
                        std::to_string(opt.delta_min));
    RadialGrid grid(R_target, n, opt.allow_coarse);

    // R(w0) decreases along the physical branch; a missing zero counts as R = +inf
    auto mismatch = [&](double w0) {
        auto z = first_zero(delta, w0, R_target, opt);
        return z ? (*z - R_target) : std::numeric_limits<double>::infinity();
    };
    double guess = kLaneEmdenXi1 / (std::sqrt(kPi) * R_target);
    double lo = guess, hi = guess;
    double flo = mismatch(lo), fhi = flo;
    int expand = 0;
    while (fhi > 0.0) {
        lo = hi;
        flo = fhi;
        hi *= 1.5;
        fhi = mismatch(hi);
        if (++expand > 60)
            throw Error(ErrorKind::ShootingDiverged, "could not bracket the central value from above");
    }
    while (flo < 0.0) {
        hi = lo;
        fhi = flo;
        lo /= 1.5;
        flo = mismatch(lo);
        if (++expand > 60)
            throw Error(ErrorKind::ShootingDiverged, "could not bracket the central value from below");
    }
    if (std::isinf(flo) && fhi > 0.0)
        throw Error(ErrorKind::NoCompactSupport, "no vacuum boundary for delta = " + std::to_string(delta));

    int it = 0;
    while (hi - lo > tol_shoot * hi) {
        double mid = 0.5 * (lo + hi);
        double fm = mismatch(mid);
        if (fm > 0.0)
            lo = mid;
        else
            hi = mid;
        if (++it > opt.max_shoot_iter)
            throw Error(ErrorKind::ShootingDiverged, "bisection did not converge");
    }
    double w0 = 0.5 * (lo + hi);
    if (!first_zero(delta, w0, R_target, opt))
        throw Error(ErrorKind::NoCompactSupport, "profile at the converged central value has no zero");

    // second pass: land exactly on every node
    using namespace boost::numeric::odeint;
    StarProfile p;
    p.params = self_similar(delta);
    if (delta > 0.0) {
        p.params.regime = Regime::LinearExpanding;
        p.params.b = 0.0;
    }
    p.grid = grid;
    p.w0 = w0;
    p.w.assign(n + 1, 0.0);
    p.wprime.assign(n + 1, 0.0);
    p.enclosed.assign(n + 1, 0.0);
    p.w[0] = w0;
    double r0 = std::min(1e-4 * R_target, 0.1 * grid.h);
    auto x = detail::taylor_start(delta, w0, r0);
    std::vector<double> times;
    times.reserve(n + 1);
    times.push_back(r0);
    for (int i = 1; i <= n; ++i)
        times.push_back(grid.r[i]);
    double m4 = 0.0;
    int k = 0;
    integrate_times(make_controlled(opt.atol, opt.rtol, runge_kutta_dopri5<detail::ProfileState>()),
                    detail::ProfileRhs{delta}, x, times.begin(), times.end(), 1e-3 * grid.h,
                    [&](const detail::ProfileState& s, double) {
                        if (k > 0) {
                            p.w[k] = s[0];
                            p.wprime[k] = s[1];
                            p.enclosed[k] = s[2];
                            m4 = s[3];
                        }
                        ++k;
                    });
    // the last node is the vacuum boundary by construction
    p.w[n] = 0.0;
    p.mass = 4.0 * kPi * p.enclosed[n];
    p.m2 = 4.0 * kPi * m4;
    if (!(p.wprime[n] < 0.0))
        throw Error(ErrorKind::NoCompactSupport, "boundary slope is not negative");
    return p;
}

// max |w'' + 2w'/r + (3 delta + 4 pi w^3)/4| over interior nodes, w'' from a fourth-order
// difference of the stored slope
inline double profile_residual(const StarProfile& p)
{
    const auto& g = p.grid;
    double worst = 0.0;
    for (int i = 2; i <= g.n - 2; ++i) {
        const auto& d = p.wprime;
        double w2 = (-d[i + 2] + 8.0 * d[i + 1] - 8.0 * d[i - 1] + d[i - 2]) / (12.0 * g.h);
        double w = p.w[i];
        double res = w2 + 2.0 * d[i] / g.r[i] + (3.0 * p.params.delta + 4.0 * kPi * w * w * w) / 4.0;
        worst = std::max(worst, std::abs(res));
    }
    return worst;
}

// max |4 pi M(r)/r^2 + 4 w' + delta r| over nodes r > 0
inline double profile_identity_residual(const StarProfile& p)
{
    double worst = 0.0;
    for (int i = 1; i <= p.grid.n; ++i) {
        double r = p.grid.r[i];
        double v = 4.0 * kPi * p.enclosed[i] / (r * r) + 4.0 * p.wprime[i] + p.params.delta * r;
        worst = std::max(worst, std::abs(v));
    }
    return worst;
}

// ---------------------------------------------------------------------------------------------
// expansion factor

struct ExpansionHistory {
    GWParameters params;
    std::vector<double> t;
    std::vector<double> lambda;
    std::vector<double> lambdadot;
    std::vector<double> s;
    Regime regime = Regime::LaneEmden;
};

inline double self_similar_lambda(double t, double lambda1)
{
    return std::pow(1.0 + 1.5 * lambda1 * t, 2.0 / 3.0);
}

inline ExpansionHistory solve_lambda(const GWParameters& params, double t_end, int n_steps,
                                     double rtol = 1e-13)
{
    using namespace boost::numeric::odeint;
    using State = std::array<double, 2>;
    if (!(t_end > 0.0) || n_steps < 1)
        throw Error(ErrorKind::InvalidInput, "need t_end > 0 and at least one step");
    ExpansionHistory h;
    h.params = params;
    h.regime = params.regime;
    double delta = params.delta;
    auto rhs = [delta](const State& x, State& dx, double) {
        if (!(x[0] > 1e-9) || !std::isfinite(x[1]))
            throw Error(ErrorKind::BlowupDetected, "expansion factor collapsed");
        dx[0] = x[1];
        dx[1] = delta / (x[0] * x[0]);
    };
    std::vector<double> times(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i)
        times[i] = t_end * i / n_steps;
    State x{1.0, params.lambda1};
    try {
        integrate_times(make_controlled(1e-15, rtol, runge_kutta_dopri5<State>()), rhs, x, times.begin(),
                        times.end(), t_end / n_steps * 1e-2, [&](const State& s, double t) {
                            if (!(s[0] > 1e-9))
                                throw Error(ErrorKind::BlowupDetected, "expansion factor collapsed");
                            h.t.push_back(t);
                            h.lambda.push_back(s[0]);
                            h.lambdadot.push_back(s[1]);
                        });
    } catch (const boost::numeric::odeint::step_adjustment_error&) {
        throw Error(ErrorKind::BlowupDetected, "step size underflow in expansion ODE");
    } catch (const boost::numeric::odeint::no_progress_error&) {
        throw Error(ErrorKind::BlowupDetected, "no progress in expansion ODE");
    }
    return h;
}

// s(t) = int_0^t lambda^{-p}, p = 3/2 in the self-similar case and 1 otherwise;
// fourth-order corrected trapezoid using the stored slopes
inline ExpansionHistory time_map(ExpansionHistory h)
{
    double p = (h.regime == Regime::SelfSimilar) ? 1.5 : 1.0;
    std::size_t n = h.t.size();
    h.s.assign(n, 0.0);
    auto f = [&](std::size_t i) { return std::pow(h.lambda[i], -p); };
    auto df = [&](std::size_t i) { return -p * std::pow(h.lambda[i], -p - 1.0) * h.lambdadot[i]; };
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double dt = h.t[i + 1] - h.t[i];
        h.s[i + 1] = h.s[i] + 0.5 * dt * (f(i) + f(i + 1)) + dt * dt / 12.0 * (df(i) - df(i + 1));
    }
    return h;
}

} // namespace gwlab
