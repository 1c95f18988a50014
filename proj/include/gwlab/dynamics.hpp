#pragma once

#include "gwlab/fieldops.hpp"
#include "gwlab/profile.hpp"
#include "gwlab/rng.hpp"
#include "gwlab/spectral.hpp"

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace gwlab {

struct DiagnosticsRecord {
    double s = 0.0;
    double mode_energy = 0.0;
    double momentum_pairing = 0.0; // affine pairing, l = 0 and 1
    double affine_amplitude = 0.0; // <theta, X>_3 / <X, X>_3 with X = r^2/2 or r
    double Edelta = 0.0;           // radial solver only
    double Wdelta = 0.0;
};

struct ModeState {
    int l = 0;
    ModeFunction u;
    ModeFunction u_s;
    double s = 0.0;
    Regime regime = Regime::SelfSimilar;
    std::vector<std::pair<double, double>> history; // (s, energy)
};

// roots of mu^2 - (b/2) mu + omega = 0, ordered (growing, decaying); complex pairs return the real part twice
inline std::pair<double, double> characteristic_roots(double b, double omega)
{
    double disc = b * b / 16.0 - omega;
    if (disc < 0.0)
        return {b / 4.0, b / 4.0};
    double sq = std::sqrt(disc);
    return {b / 4.0 + sq, b / 4.0 - sq};
}

// The discrete system for one harmonic degree. Unknowns are u at nodes first..n: for l >= 1 u(0) = 0
// (regularity), for l = 0 u_0 = u_1 = 0 (u'(0) = 0 and the free constant).
//   mass    M(u, v) = int w^3 (u'v' + l(l+1) u v / r^2) r^2        (P1 elements)
//   form    A(u, v) = Lambda(D u, D v)                             (D the divergence stencil)
// Both are symmetric; the pencil is diagonalised once and every evolution runs on the modes.
struct ModeSystem {
    int l = 0;
    int first = 1;
    RadialGrid grid;
    Eigen::MatrixXd M, A, H; // H: int w^4 |Hess(u Y)|^2 over the sphere
    Eigen::VectorXd omega;
    Eigen::MatrixXd phi;     // M-orthonormal eigenvectors
    int affine = -1;         // mode closest to the affine direction (l = 0, 1)
    int kernel = -1;         // static mode spanned by the discrete divergence kernel
    Eigen::VectorXd X;       // r^2/2 or r on the unknowns
    Eigen::VectorXd beta;    // phi^T M X
    double XMX = 1.0;
};

namespace detail {

inline int first_unknown(int l)
{
    return l == 0 ? 2 : 1;
}

inline Eigen::VectorXd dofs(const ModeFunction& u)
{
    int n = u.grid.n, f = first_unknown(u.l);
    Eigen::VectorXd x(n - f + 1);
    for (int i = f; i <= n; ++i)
        x[i - f] = u.values[i] - (u.l == 0 ? u.values[1] : 0.0);
    return x;
}

inline ModeFunction from_dofs(int l, const RadialGrid& g, const Eigen::VectorXd& x)
{
    int f = first_unknown(l);
    ModeFunction u{l, g, std::vector<double>(g.n + 1, 0.0), ModeKind::Displacement};
    for (int i = f; i <= g.n; ++i)
        u.values[i] = x[i - f];
    return u;
}

// integrand of the Hessian norm times r^2, as a quadratic form in (u'', u', u) at radius r
inline Eigen::Matrix3d hessian_density(int l, double r)
{
    double L = l * (l + 1.0);
    Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
    double r2 = r * r;
    // u''^2 r^2
    q(0, 0) = r2;
    // 2L (u' - u/r)^2 + 2 u'^2
    q(1, 1) = 2.0 * L + 2.0;
    q(1, 2) = q(2, 1) = -2.0 * L / r;
    q(2, 2) = 2.0 * L / r2;
    // L(L-1) u^2 / r^2 - 2L u u' / r
    q(2, 2) += L * (L - 1.0) / r2;
    q(1, 2) -= L / r;
    q(2, 1) -= L / r;
    return q;
}

} // namespace detail

inline ModeSystem build_mode_system(int l, const StarProfile& p)
{
    const auto& g = p.grid;
    int n = g.n;
    double h = g.h;
    double L = l * (l + 1.0);
    ModeSystem sys;
    sys.l = l;
    sys.first = detail::first_unknown(l);
    sys.grid = g;
    int f = sys.first, m = n - f + 1;

    // mass
    sys.M = Eigen::MatrixXd::Zero(n + 1, n + 1);
    const double gx[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    for (int e = 0; e < n; ++e) {
        for (int q = 0; q < 3; ++q) {
            double r = g.r[e] + gx[q] * h;
            double w = detail::profile_at(p, r);
            double a = gw[q] * h * w * w * w;
            double ph[2] = {1.0 - gx[q], gx[q]};
            double dph[2] = {-1.0 / h, 1.0 / h};
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    sys.M(e + i, e + j) += a * (dph[i] * dph[j] * r * r + L * ph[i] * ph[j]);
        }
    }

    // form on g: (4/3) q w^-2 on the diagonal plus the symmetrised Coulomb pairing
    auto Q = detail::form_weights(g);
    Eigen::MatrixXd P = potential_matrix(l, g);
    Eigen::MatrixXd Ag(n + 1, n + 1);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            Ag(i, j) = 2.0 * kPi * (Q[i] * P(i, j) + Q[j] * P(j, i));
    for (int i = 0; i < n; ++i)
        Ag(i, i) += (4.0 / 3.0) * Q[i] / (p.w[i] * p.w[i]);
    Eigen::MatrixXd D = divergence_matrix(l, p);
    Eigen::MatrixXd D0 = D;
    // the r = 0 row carries no local weight, so a jump between u_0 and u_1 would only be seen by the
    // Coulomb part; take g_0 from the interior rows instead
    if (l == 0) {
        D.row(0) = 3.0 * D.row(1) - 3.0 * D.row(2) + D.row(3);
        // g of a radial field has no net charge; remove the discrete remainder along w^2
        Eigen::VectorXd q(n + 1), k(n + 1);
        for (int i = 0; i <= n; ++i) {
            q[i] = Q[i];
            k[i] = p.w[i] * p.w[i];
        }
        Eigen::RowVectorXd charge = q.transpose() * D;
        D -= k * charge / q.dot(k);
    }

    Eigen::MatrixXd Afull = D.transpose() * Ag * D;
    Afull = 0.5 * (Afull + Afull.transpose()).eval();

    // Hessian form: nodal u'', u' by central differences, Gregory weights, w^4
    {
        Eigen::MatrixXd D1 = Eigen::MatrixXd::Zero(n + 1, n + 1), D2 = Eigen::MatrixXd::Zero(n + 1, n + 1);
        for (int i = 1; i < n; ++i) {
            D1(i, i - 1) = -0.5 / h;
            D1(i, i + 1) = 0.5 / h;
            D2(i, i - 1) = 1.0 / (h * h);
            D2(i, i) = -2.0 / (h * h);
            D2(i, i + 1) = 1.0 / (h * h);
        }
        auto qg = quad::gregory_weights(n, h);
        Eigen::MatrixXd Hf = Eigen::MatrixXd::Zero(n + 1, n + 1);
        // interior nodes only: w^4 vanishes at R and the r = 0 node carries weight 3h/8 of a
        // regular integrand, which is dropped
        for (int i = 1; i < n; ++i) {
            double w4 = std::pow(p.w[i], 4);
            auto q = detail::hessian_density(l, g.r[i]);
            Eigen::MatrixXd B(3, n + 1);
            B.row(0) = D2.row(i);
            B.row(1) = D1.row(i);
            B.row(2) = Eigen::RowVectorXd::Unit(n + 1, i);
            Hf += (qg[i] * w4) * (B.transpose() * q * B);
        }
        sys.H = Hf.bottomRightCorner(m, m);
    }

    sys.M = sys.M.bottomRightCorner(m, m).eval();
    sys.A = Afull.bottomRightCorner(m, m);

    // Discrete kernel of the divergence: the grid image of the singular solution of
    // w^3 Lap u + 3 w^2 w' u' = 0, which blows up at R and is not admissible. Built by marching the
    // stencil outwards and removed M-orthogonally from the space.
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n + 1);
    if (l == 0) {
        for (int i = 1; i < n; ++i)
            z[i + 1] = (p.w[i] * p.w[i] - D0(i, i - 1) * z[i - 1] - D0(i, i) * z[i]) / D0(i, i + 1);
    } else {
        z[1] = 1.0;
        for (int i = 1; i < n; ++i)
            z[i + 1] = (-D0(i, i - 1) * z[i - 1] - D0(i, i) * z[i]) / D0(i, i + 1);
    }
    Eigen::VectorXd Mz = sys.M * z.tail(m);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Mz / Mz.norm());
    Eigen::MatrixXd full = Eigen::MatrixXd::Identity(m, m);
    full.applyOnTheLeft(qr.householderQ());
    Eigen::MatrixXd Zc = full.rightCols(m - 1);
    Eigen::MatrixXd Ar = Zc.transpose() * sys.A * Zc, Mr = Zc.transpose() * sys.M * Zc;
    Ar = 0.5 * (Ar + Ar.transpose()).eval();
    Mr = 0.5 * (Mr + Mr.transpose()).eval();

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ar, Mr);
    if (es.info() != Eigen::Success)
        throw Error(ErrorKind::IndefiniteMass, "mode mass matrix is not positive definite");
    // the kernel vector is kept as a static mode (omega = 0) at the last index so that smooth data
    // keep their full surface content; it is left out of the affine bookkeeping
    sys.omega = Eigen::VectorXd::Zero(m);
    sys.omega.head(m - 1) = es.eigenvalues();
    sys.phi.resize(m, m);
    sys.phi.leftCols(m - 1) = Zc * es.eigenvectors();
    sys.phi.col(m - 1) = z.tail(m) / std::sqrt(z.tail(m).dot(Mz));
    sys.kernel = m - 1;

    sys.X.resize(m);
    for (int i = f; i <= n; ++i)
        sys.X[i - f] = (l == 0) ? 0.5 * (g.r[i] * g.r[i] - g.r[1] * g.r[1]) : (l == 1 ? g.r[i] : 0.0);
    if (l <= 1) {
        Eigen::VectorXd MX = sys.M * sys.X;
        sys.XMX = sys.X.dot(MX);
        sys.beta = sys.phi.transpose() * MX;
        sys.beta[sys.kernel] = 0.0;
        sys.beta.cwiseAbs().maxCoeff(&sys.affine);
    } else {
        sys.beta = Eigen::VectorXd::Zero(m);
    }
    return sys;
}

inline ModeState make_mode_state(int l, const RadialGrid& g, const std::function<double(double)>& u,
                                 const std::function<double(double)>& us, Regime regime)
{
    ModeState st;
    st.l = l;
    st.u = sample_mode(l, g, u);
    st.u_s = sample_mode(l, g, us);
    st.regime = regime;
    return st;
}

// smooth random data r^l sum_k a_k (r/R)^{2k} (l = 0 starts at r^2)
inline ModeFunction random_mode(int l, const RadialGrid& g, Lcg64& rng, int terms = 4)
{
    std::vector<double> a(terms);
    for (auto& c : a)
        c = uniform(rng, -1.0, 1.0);
    return sample_mode(l, g, [&](double r) {
        double x = r / g.R, s = 0.0, xp = 1.0;
        for (int k = 0; k < terms; ++k, xp *= x * x)
            s += a[k] * xp;
        return std::pow(x, l == 0 ? 2 : l) * s;
    });
}

inline double mode_data_norm(const ModeState& st, const ModeSystem& sys)
{
    auto x = detail::dofs(st.u), v = detail::dofs(st.u_s);
    return std::sqrt(x.dot(sys.M * x) + v.dot(sys.M * v));
}

// Removes the growing part of the affine mode: (a, a') along the discrete affine eigenvector is
// split over the two characteristic lines and the mu_+ component dropped. No-op for l >= 2.
inline ModeState project_stable(ModeState st, const ModeSystem& sys, double b)
{
    if (st.l >= 2 || sys.affine < 0)
        return st;
    require_same_grid(st.u.grid, sys.grid);
    auto x = detail::dofs(st.u), v = detail::dofs(st.u_s);
    Eigen::VectorXd ph = sys.phi.col(sys.affine);
    Eigen::VectorXd Mph = sys.M * ph;
    double a = Mph.dot(x), ad = Mph.dot(v);
    auto [mp, mm] = characteristic_roots(b, sys.omega[sys.affine]);
    if (mp == mm)
        return st;
    double alpha = (ad - mm * a) / (mp - mm);
    x -= alpha * ph;
    v -= alpha * mp * ph;
    int l = st.l;
    st.u = detail::from_dofs(l, sys.grid, x);
    st.u_s = detail::from_dofs(l, sys.grid, v);
    st.u_s.kind = ModeKind::Displacement;
    return st;
}

struct EvolveOptions {
    double ds = 2e-3;
    int n_steps = 20000;
    int sample_every = 1;        // records are kept every this many steps
    double growth_bound = 1e-9;  // allowed relative energy increase per step (l >= 2)
};

struct ModeRun {
    ModeState state;
    std::vector<DiagnosticsRecord> records;
};

namespace detail {

// exp(ds K), K = [[0, 1], [-omega, b/2]]
inline Eigen::Matrix2d damped_propagator(double omega, double b, double ds)
{
    double tau = b / 4.0;
    double d = tau * tau - omega;
    double C, S;
    if (d > 0.0) {
        double q = std::sqrt(d);
        C = std::cosh(q * ds);
        S = std::sinh(q * ds) / q;
    } else if (d < 0.0) {
        double q = std::sqrt(-d);
        C = std::cos(q * ds);
        S = std::sin(q * ds) / q;
    } else {
        C = 1.0;
        S = ds;
    }
    Eigen::Matrix2d N;
    N << -tau, 1.0, -omega, tau;
    return std::exp(tau * ds) * (C * Eigen::Matrix2d::Identity() + S * N);
}

// lambda and dlambda/dt as functions of s with ds/dt = 1/lambda
inline std::vector<std::array<double, 2>> linear_lambda(const GWParameters& gp, const std::vector<double>& s_out)
{
    using namespace boost::numeric::odeint;
    using State = std::array<double, 2>;
    double delta = gp.delta;
    auto rhs = [delta](const State& x, State& dx, double) {
        dx[0] = x[0] * x[1];
        dx[1] = delta / x[0];
    };
    std::vector<State> out;
    State x{1.0, gp.lambda1};
    std::vector<double> times;
    times.push_back(0.0);
    for (double s : s_out)
        times.push_back(s);
    integrate_times(make_controlled(1e-14, 1e-13, runge_kutta_dopri5<State>()), rhs, x, times.begin(),
                    times.end(), 1e-4, [&](const State& st, double) { out.push_back(st); });
    out.erase(out.begin());
    return out;
}

} // namespace detail

// Self-similar: u_ss - (b/2) u_s + ell(u) = 0, each mode propagated exactly.
// Linearly expanding: lambda u_ss + lambda_s u_s + ell(u) = 0, implicit midpoint per mode.
inline ModeRun evolve_mode(ModeState st, const ModeSystem& sys, const GWParameters& gp, const EvolveOptions& opt)
{
    require_same_grid(st.u.grid, sys.grid);
    if (st.l != sys.l)
        throw Error(ErrorKind::InvalidInput, "state and system have different degrees");
    if (!(opt.ds > 0.0) || opt.n_steps < 0)
        throw Error(ErrorKind::InvalidInput, "need ds > 0 and n_steps >= 0");
    int n = static_cast<int>(sys.omega.size());
    double b = gp.b;
    const double c1 = std::sqrt(3.0 / (4.0 * kPi));

    Eigen::VectorXd c = sys.phi.transpose() * (sys.M * detail::dofs(st.u));
    Eigen::VectorXd v = sys.phi.transpose() * (sys.M * detail::dofs(st.u_s));
    Eigen::MatrixXd Hm;
    bool linear = st.regime == Regime::LinearExpanding;
    if (linear)
        Hm = sys.phi.transpose() * sys.H * sys.phi;

    std::vector<double> mu_minus(n, 0.0);
    if (sys.affine >= 0)
        mu_minus[sys.affine] = characteristic_roots(b, sys.omega[sys.affine]).second;

    std::vector<double> s_mid, s_end;
    std::vector<std::array<double, 2>> lam_mid, lam_end;
    double s0 = st.s;
    if (linear) {
        for (int k = 0; k < opt.n_steps; ++k) {
            s_mid.push_back(s0 + (k + 0.5) * opt.ds);
            s_end.push_back(s0 + (k + 1.0) * opt.ds);
        }
        std::vector<double> all;
        for (int k = 0; k < opt.n_steps; ++k) {
            all.push_back(s_mid[k]);
            all.push_back(s_end[k]);
        }
        std::vector<double> pts{s0};
        pts.insert(pts.end(), all.begin(), all.end());
        if (s0 == 0.0)
            pts.erase(pts.begin());
        auto lam = detail::linear_lambda(gp, pts);
        std::size_t off = (s0 == 0.0) ? 0 : 1;
        for (int k = 0; k < opt.n_steps; ++k) {
            lam_mid.push_back(lam[off + 2 * k]);
            lam_end.push_back(lam[off + 2 * k + 1]);
        }
    }
    auto lambda_at_start = [&]() {
        if (!linear)
            return std::exp(-b * s0);
        if (s0 == 0.0)
            return 1.0;
        return detail::linear_lambda(gp, {s0})[0][0];
    };

    auto energy = [&](double lam) {
        double e = 0.0;
        if (!linear) {
            for (int k = 0; k < n; ++k)
                e += v[k] * v[k] + std::abs(sys.omega[k]) * c[k] * c[k];
        } else {
            e = lam * v.squaredNorm() + c.squaredNorm() + c.dot(Hm * c);
        }
        return e;
    };
    auto record = [&](double s, double lam) {
        DiagnosticsRecord r;
        r.s = s;
        r.mode_energy = energy(lam);
        if (sys.affine >= 0) {
            int a = sys.affine;
            r.momentum_pairing = v[a] - mu_minus[a] * c[a];
            r.affine_amplitude = sys.beta.dot(c) / sys.XMX;
            if (st.l == 1)
                r.Wdelta = std::pow(lam, -0.5) * sys.beta.dot(v - b * c) / c1;
        }
        return r;
    };

    ModeRun run;
    double lam0 = lambda_at_start();
    run.records.push_back(record(s0, lam0));
    st.history.emplace_back(s0, run.records.back().mode_energy);

    std::vector<Eigen::Matrix2d> prop;
    if (!linear) {
        prop.resize(n);
        for (int k = 0; k < n; ++k)
            prop[k] = detail::damped_propagator(sys.omega[k], b, opt.ds);
    }
    double e_prev = run.records.back().mode_energy;
    for (int step = 0; step < opt.n_steps; ++step) {
        double lam_e = 1.0;
        if (!linear) {
            for (int k = 0; k < n; ++k) {
                double ck = c[k], vk = v[k];
                c[k] = prop[k](0, 0) * ck + prop[k](0, 1) * vk;
                v[k] = prop[k](1, 0) * ck + prop[k](1, 1) * vk;
            }
            lam_e = std::exp(-b * (s0 + (step + 1) * opt.ds));
        } else {
            double lam = lam_mid[step][0];
            double alpha = lam_mid[step][1];  // lambda_s / lambda = dlambda/dt
            double h = opt.ds;
            for (int k = 0; k < n; ++k) {
                double beta = sys.omega[k] / lam;
                // c1 - c0 = h (v0 + v1)/2 ; v1 - v0 = -h alpha (v0 + v1)/2 - h beta (c0 + c1)/2
                double a11 = 1.0, a12 = -h / 2.0, a21 = h * beta / 2.0, a22 = 1.0 + h * alpha / 2.0;
                double r1 = c[k] + h / 2.0 * v[k];
                double r2 = v[k] - h * alpha / 2.0 * v[k] - h * beta / 2.0 * c[k];
                double det = a11 * a22 - a12 * a21;
                double cn = (r1 * a22 - a12 * r2) / det;
                double vn = (a11 * r2 - a21 * r1) / det;
                c[k] = cn;
                v[k] = vn;
            }
            lam_e = lam_end[step][0];
        }
        bool sample = ((step + 1) % std::max(1, opt.sample_every) == 0) || step + 1 == opt.n_steps;
        if (!linear && st.l >= 2) {
            double e = energy(lam_e);
            if (e > e_prev * (1.0 + opt.growth_bound) + 1e-300)
                throw Error(ErrorKind::StepUnstable, "mode energy grew during a step of a coercive mode");
            e_prev = e;
        }
        if (sample) {
            double s = s0 + (step + 1) * opt.ds;
            run.records.push_back(record(s, lam_e));
            st.history.emplace_back(s, run.records.back().mode_energy);
        }
    }
    st.s = s0 + opt.n_steps * opt.ds;
    Eigen::VectorXd x = sys.phi * c, xs = sys.phi * v;
    int l = st.l;
    auto hist = std::move(st.history);
    st.u = detail::from_dofs(l, sys.grid, x);
    st.u_s = detail::from_dofs(l, sys.grid, xs);
    st.history = std::move(hist);
    run.state = std::move(st);
    return run;
}

// least-squares slope of log|y| against s, dropping the first `discard` fraction of samples and
// anything outside [s_lo, s_hi]
inline double fit_rate(const std::vector<double>& s, const std::vector<double>& y, double discard = 0.2,
                       double s_lo = -1e300, double s_hi = 1e300)
{
    std::size_t start = static_cast<std::size_t>(discard * s.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = start; i < s.size(); ++i) {
        if (s[i] < s_lo || s[i] > s_hi || !(std::abs(y[i]) > 0.0))
            continue;
        double ly = std::log(std::abs(y[i]));
        sx += s[i];
        sy += ly;
        sxx += s[i] * s[i];
        sxy += s[i] * ly;
        ++m;
    }
    if (m < 2)
        return 0.0;
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// ---------------------------------------------------------------------------------------------
// radial nonlinear flow

struct RadialState {
    RadialGrid grid;
    std::vector<double> xi;
    std::vector<double> xi_s;
    double s = 0.0;
    std::vector<double> M_of_r; // int_0^r w^3 y^2 dy at the labels
};

// Lagrangian shells: node i carries the mass mu_i of its dual cell, cell c = [i, i+1] carries
// 3 A_c V_c^{-1/3} of internal energy with V_c = (xi_{i+1}^3 - xi_i^3)/3, and gravity is the shell sum
// -4 pi mu_i (M_<i + mu_i/2) / xi_i. A_c is chosen so that xi = r is an exact discrete equilibrium.
// Everything is per unit solid angle.
struct RadialModel {
    RadialGrid grid;
    double delta = 0.0;
    double b = 0.0;
    std::vector<double> mu;    // node masses
    std::vector<double> below; // M_<i
    std::vector<double> A;     // cell entropies
    std::vector<double> P0;    // background cell pressures
};

inline RadialModel make_radial_model(const StarProfile& p, double b)
{
    const auto& g = p.grid;
    int n = g.n;
    RadialModel m;
    m.grid = g;
    m.delta = p.params.delta;
    m.b = b;
    m.mu.assign(n + 1, 0.0);
    const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
    const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
    for (int e = 0; e < n; ++e) {
        // each half element goes to its nearest node
        for (int half = 0; half < 2; ++half) {
            double a = g.r[e] + 0.5 * half * g.h, len = 0.5 * g.h;
            double s = 0.0;
            for (int q = 0; q < 4; ++q) {
                double r = a + 0.5 * len * (gx[q] + 1.0);
                double w = detail::profile_at(p, r);
                s += 0.5 * len * gw[q] * w * w * w * r * r;
            }
            m.mu[e + half] += s;
        }
    }
    m.below.assign(n + 1, 0.0);
    for (int i = 1; i <= n; ++i)
        m.below[i] = m.below[i - 1] + m.mu[i - 1];
    m.P0.assign(n, 0.0);
    m.A.assign(n, 0.0);
    double P = 0.0;
    for (int i = n; i >= 1; --i) {
        double r = g.r[i];
        double F = m.mu[i] * m.delta * r + 4.0 * kPi * m.mu[i] * (m.below[i] + 0.5 * m.mu[i]) / (r * r);
        P += F / (r * r);
        m.P0[i - 1] = P;
    }
    for (int c = 0; c < n; ++c) {
        double V = (std::pow(g.r[c + 1], 3) - std::pow(g.r[c], 3)) / 3.0;
        m.A[c] = m.P0[c] * std::pow(V, 4.0 / 3.0);
    }
    return m;
}

inline RadialState make_radial_state(const StarProfile& p, const std::function<double(double)>& xi,
                                     const std::function<double(double)>& xi_s)
{
    RadialState st;
    st.grid = p.grid;
    int n = p.grid.n;
    st.xi.resize(n + 1);
    st.xi_s.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
        st.xi[i] = xi(p.grid.r[i]);
        st.xi_s[i] = xi_s(p.grid.r[i]);
    }
    st.xi[0] = 0.0;
    st.xi_s[0] = 0.0;
    std::vector<double> f(n + 1);
    for (int i = 0; i <= n; ++i)
        f[i] = std::pow(p.w[i], 3) * p.grid.r[i] * p.grid.r[i];
    st.M_of_r = quad::cumulative(f, p.grid.h);
    return st;
}

namespace detail {

inline void check_shells(const std::vector<double>& xi)
{
    int n = static_cast<int>(xi.size()) - 1;
    for (int i = 0; i <= n; ++i)
        if (!std::isfinite(xi[i]))
            throw Error(ErrorKind::VacuumViolation, "non-finite shell position");
    if (!(xi[n] > xi[n - 1]))
        throw Error(ErrorKind::VacuumViolation, "vacuum boundary moved inside its neighbour");
    for (int i = 0; i < n - 1; ++i)
        if (!(xi[i + 1] > xi[i]))
            throw Error(ErrorKind::ShellCrossing, "shells crossed at node " + std::to_string(i + 1));
}

} // namespace detail

// acceleration of nodes 1..n (entry 0 stays zero)
inline void radial_acceleration(const RadialModel& m, const std::vector<double>& xi, const std::vector<double>& xs,
                                std::vector<double>& acc)
{
    int n = m.grid.n;
    acc.assign(n + 1, 0.0);
    std::vector<double> P(n + 1, 0.0);
    for (int c = 0; c < n; ++c) {
        double V = (xi[c + 1] * xi[c + 1] * xi[c + 1] - xi[c] * xi[c] * xi[c]) / 3.0;
        if (!(V > 0.0))
            throw Error(ErrorKind::ShellCrossing, "cell volume vanished");
        P[c] = m.A[c] * std::pow(V, -4.0 / 3.0);
    }
    for (int i = 1; i <= n; ++i) {
        double x = xi[i];
        double f = x * x * (P[i - 1] - P[i]) - 4.0 * kPi * m.mu[i] * (m.below[i] + 0.5 * m.mu[i]) / (x * x);
        acc[i] = 0.5 * m.b * xs[i] - m.delta * x + f / m.mu[i];
    }
}

inline double radial_fixed_point_residual(const RadialModel& m)
{
    std::vector<double> acc, zero(m.grid.n + 1, 0.0);
    radial_acceleration(m, m.grid.r, zero, acc);
    double worst = 0.0;
    for (double a : acc)
        worst = std::max(worst, std::abs(a));
    return worst;
}

inline double radial_potential_energy(const RadialModel& m, const std::vector<double>& xi)
{
    int n = m.grid.n;
    double U = 0.0;
    for (int c = 0; c < n; ++c) {
        double V = (xi[c + 1] * xi[c + 1] * xi[c + 1] - xi[c] * xi[c] * xi[c]) / 3.0;
        U += 3.0 * m.A[c] * std::pow(V, -1.0 / 3.0);
    }
    for (int i = 1; i <= n; ++i)
        U -= 4.0 * kPi * m.mu[i] * (m.below[i] + 0.5 * m.mu[i]) / xi[i];
    return U;
}

// E = 4 pi e^{bs} [ 1/2 sum mu (xi_s - b xi)^2 + U ], conserved by the semi-discrete flow
inline double radial_energy(const RadialModel& m, const RadialState& st)
{
    double K = 0.0;
    for (int i = 1; i <= m.grid.n; ++i) {
        double d = st.xi_s[i] - m.b * st.xi[i];
        K += 0.5 * m.mu[i] * d * d;
    }
    return 4.0 * kPi * std::exp(m.b * st.s) * (K + radial_potential_energy(m, st.xi));
}

// 4 pi e^{bs} (K + |U|): the size of the terms that cancel in E, for drift checks on zero-energy data
inline double radial_energy_scale(const RadialModel& m, const RadialState& st)
{
    double K = 0.0;
    for (int i = 1; i <= m.grid.n; ++i) {
        double d = st.xi_s[i] - m.b * st.xi[i];
        K += 0.5 * m.mu[i] * d * d;
    }
    return 4.0 * kPi * std::exp(m.b * st.s) * (K + std::abs(radial_potential_energy(m, st.xi)));
}

// W = lambda^{-1/2} int (xi_s - b xi) w^3 dx: the angular integral of the radial unit vector is
// evaluated by Gauss-Legendre x trapezoid quadrature on the sphere
inline std::array<double, 3> radial_momentum(const RadialModel& m, const RadialState& st)
{
    double radial = 0.0;
    for (int i = 1; i <= m.grid.n; ++i)
        radial += m.mu[i] * (st.xi_s[i] - m.b * st.xi[i]);
    const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
    const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
    std::array<double, 3> nhat{0.0, 0.0, 0.0};
    const int nphi = 8;
    for (int a = 0; a < 4; ++a) {
        double ct = gx[a], st_ = std::sqrt(1.0 - ct * ct);
        for (int k = 0; k < nphi; ++k) {
            double ph = 2.0 * kPi * k / nphi;
            double wq = gw[a] * 2.0 * kPi / nphi;
            nhat[0] += wq * st_ * std::cos(ph);
            nhat[1] += wq * st_ * std::sin(ph);
            nhat[2] += wq * ct;
        }
    }
    double lam = std::exp(-m.b * st.s);
    for (auto& v : nhat)
        v *= radial / std::sqrt(lam);
    return nhat;
}

// Phi(r_i) = -4 pi [ M_<=i / xi_i + sum_{j>i} mu_j / xi_j ] with lumped masses
inline std::vector<double> lagrangian_potential(const RadialModel& m, const std::vector<double>& xi)
{
    int n = m.grid.n;
    std::vector<double> phi(n + 1, 0.0);
    double outer = 0.0;
    for (int i = n; i >= 1; --i) {
        phi[i] = -4.0 * kPi * ((m.below[i] + m.mu[i]) / xi[i] + outer);
        outer += m.mu[i] / xi[i];
    }
    phi[0] = -4.0 * kPi * outer;
    return phi;
}

struct RadialRun {
    RadialState state;
    std::vector<DiagnosticsRecord> records;
};

inline DiagnosticsRecord radial_record(const RadialModel& m, const RadialState& st)
{
    DiagnosticsRecord r;
    r.s = st.s;
    r.Edelta = radial_energy(m, st);
    auto W = radial_momentum(m, st);
    r.Wdelta = std::sqrt(W[0] * W[0] + W[1] * W[1] + W[2] * W[2]);
    double e = 0.0;
    for (int i = 1; i <= m.grid.n; ++i) {
        double d = st.xi[i] - m.grid.r[i];
        e += m.mu[i] * (st.xi_s[i] * st.xi_s[i] + d * d);
    }
    r.mode_energy = 4.0 * kPi * e;
    return r;
}

inline RadialRun evolve_radial_nonlinear(RadialState st, const RadialModel& m, double ds, int n_steps,
                                         double rtol = 1e-12, double atol = 1e-14)
{
    using namespace boost::numeric::odeint;
    using State = std::vector<double>;
    require_same_grid(st.grid, m.grid);
    int n = m.grid.n;
    detail::check_shells(st.xi);
    State x(2 * (n + 1));
    for (int i = 0; i <= n; ++i) {
        x[i] = st.xi[i];
        x[n + 1 + i] = st.xi_s[i];
    }
    std::vector<double> xi(n + 1), xs(n + 1), acc;
    auto rhs = [&](const State& y, State& dy, double) {
        std::copy(y.begin(), y.begin() + n + 1, xi.begin());
        std::copy(y.begin() + n + 1, y.end(), xs.begin());
        radial_acceleration(m, xi, xs, acc);
        for (int i = 0; i <= n; ++i) {
            dy[i] = (i == 0) ? 0.0 : xs[i];
            dy[n + 1 + i] = acc[i];
        }
    };
    RadialRun run;
    run.records.push_back(radial_record(m, st));
    auto stepper = make_controlled(atol, rtol, runge_kutta_dopri5<State>());
    double dt = ds * 0.1;
    for (int k = 0; k < n_steps; ++k) {
        double s1 = st.s + ds;
        double t = st.s;
        int tries = 0;
        while (t < s1 - 1e-14 * std::max(1.0, std::abs(s1))) {
            double step = std::min(dt, s1 - t);
            controlled_step_result res;
            try {
                res = stepper.try_step(rhs, x, t, step);
            } catch (const Error& e) {
                // a trial stage inverted a cell: treat as a rejected step
                if (e.kind() != ErrorKind::ShellCrossing)
                    throw;
                step *= 0.25;
                res = fail;
            }
            dt = step;
            if (res == success)
                tries = 0;
            else if (++tries > 200 || dt < 1e-14 * ds)
                throw Error(ErrorKind::ShellCrossing, "step size underflow in the radial flow");
        }
        for (int i = 0; i <= n; ++i) {
            st.xi[i] = x[i];
            st.xi_s[i] = x[n + 1 + i];
        }
        st.s = s1;
        detail::check_shells(st.xi);
        run.records.push_back(radial_record(m, st));
    }
    run.state = std::move(st);
    return run;
}

// sqrt(4 pi sum mu d^2): the order-zero tracked norm of a radial displacement d = xi - r
inline double radial_tracked_norm(const RadialModel& m, const std::vector<double>& d)
{
    double e = 0.0;
    for (int i = 1; i <= m.grid.n; ++i)
        e += m.mu[i] * d[i] * d[i];
    return std::sqrt(4.0 * kPi * e);
}

// time-translated background: xi = (lambda(tau)/lambda(0)) r with the matching velocity, lambda the
// self-similar expansion with lambda1 = |b|
inline RadialState radial_translate_state(const StarProfile& p, double b, double tau)
{
    double bb = std::abs(b);
    double k0 = self_similar_lambda(tau, bb);
    double kd = bb * std::pow(1.0 + 1.5 * bb * tau, -1.0 / 3.0) - k0 * bb;
    return make_radial_state(p, [&](double r) { return k0 * r; }, [&](double r) { return kd * r; });
}

struct RadialComparison {
    double eps = 0.0;
    double error = 0.0;      // tracked norm of (nonlinear - linear) displacement at the end of the window
    double amplitude = 0.0;  // tracked norm of the nonlinear displacement there
    double energy_drift = 0.0; // max |E(s) - E(0)| / |E(0)| along the nonlinear run
};

// Runs xi = r + eps f(r) / |f| (|f| the tracked norm, zero velocity) through the nonlinear flow and
// the l = 0 mode system over [0, window]; the linear displacement is u'/sqrt(4 pi)
inline RadialComparison compare_radial_with_mode(const StarProfile& p, const RadialModel& m, const ModeSystem& sys,
                                                 const GWParameters& gp, const std::function<double(double)>& f,
                                                 double eps, double window, int outputs = 10, int mode_steps = 1000)
{
    if (sys.l != 0)
        throw Error(ErrorKind::InvalidInput, "the radial flow compares against the l = 0 system");
    int n = p.grid.n;
    std::vector<double> fv(n + 1);
    for (int i = 0; i <= n; ++i)
        fv[i] = f(p.grid.r[i]);
    double c = eps / radial_tracked_norm(m, fv);
    auto ns = make_radial_state(p, [&](double r) { return r + c * f(r); }, [](double) { return 0.0; });
    auto rn = evolve_radial_nonlinear(ns, m, window / outputs, outputs);

    const double s4 = std::sqrt(4.0 * kPi);
    std::vector<double> dv(n + 1);
    for (int i = 0; i <= n; ++i)
        dv[i] = s4 * c * fv[i];
    ModeState ls;
    ls.l = 0;
    ls.regime = Regime::SelfSimilar;
    ls.u = ModeFunction{0, p.grid, quad::cumulative(dv, p.grid.h), ModeKind::Displacement};
    ls.u_s = ModeFunction{0, p.grid, std::vector<double>(n + 1, 0.0), ModeKind::Displacement};
    EvolveOptions o;
    o.ds = window / mode_steps;
    o.n_steps = mode_steps;
    o.sample_every = mode_steps;
    auto lr = evolve_mode(ls, sys, gp, o);
    auto du = fd::derivative(lr.state.u.values, p.grid.h);

    RadialComparison out;
    out.eps = eps;
    std::vector<double> diff(n + 1, 0.0), dn(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) {
        dn[i] = rn.state.xi[i] - p.grid.r[i];
        diff[i] = dn[i] - du[i] / s4;
    }
    out.error = radial_tracked_norm(m, diff);
    out.amplitude = radial_tracked_norm(m, dn);
    double E0 = rn.records.front().Edelta;
    for (const auto& r : rn.records)
        out.energy_drift = std::max(out.energy_drift, std::abs(r.Edelta - E0) / std::abs(E0));
    return out;
}

} // namespace gwlab
