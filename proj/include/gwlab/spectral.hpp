#pragma once

#include "gwlab/fieldops.hpp"
#include "gwlab/profile.hpp"
#include "gwlab/tridiag.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace gwlab {

struct QuadraticFormReport {
    int l = 0;
    std::vector<std::string> constraints;
    double min_value = 0.0;        // min of the form over g with int w^{-2} g^2 r^2 = 1
    ModeFunction minimizer;        // normalised the same way
    double coercivity_ratio = 0.0; // min of the form over the reference-norm unit sphere
};

struct EigenReport {
    std::string operator_id;
    std::vector<double> eigenvalues;
    ModeFunction ground_state;
    double residual = 0.0;
    double kernel_residual = 0.0; // A1 only
    int sign_changes = 0;
};

namespace detail {

// g / w^power on the grid; nodes with w = 0 take the quadratic extrapolation of their neighbours
inline std::vector<double> over_weight(const std::vector<double>& g, const StarProfile& p, int power)
{
    int n = p.grid.n;
    std::vector<double> q(n + 1);
    for (int i = 0; i <= n; ++i)
        q[i] = (p.w[i] > 0.0) ? g[i] / std::pow(p.w[i], power) : 0.0;
    for (int i = n; i >= 3; --i)
        if (!(p.w[i] > 0.0))
            q[i] = 3.0 * q[i - 1] - 3.0 * q[i - 2] + q[i - 3];
    return q;
}

inline void check_vanishing_at_boundary(const ModeFunction& g)
{
    double scale = 0.0;
    for (double v : g.values)
        scale = std::max(scale, std::abs(v));
    if (std::abs(g.values.back()) > 1e-10 * scale)
        throw Error(ErrorKind::NonIntegrableWeight,
                    "weighted divergence does not vanish at the vacuum boundary; w^-2 g^2 is not integrable");
}

// quadrature used by every mode form: end-corrected trapezoid times r^2
inline std::vector<double> form_weights(const RadialGrid& g)
{
    auto q = quad::gregory_weights(g.n, g.h);
    for (std::size_t i = 0; i < q.size(); ++i)
        q[i] *= g.r[i] * g.r[i];
    return q;
}

// cubic Hermite value of the profile at radius r
inline double profile_at(const StarProfile& p, double r)
{
    const auto& g = p.grid;
    int i = std::min(static_cast<int>(r / g.h), g.n - 1);
    double t = (r - g.r[i]) / g.h;
    double t2 = t * t, t3 = t2 * t;
    double v = (2 * t3 - 3 * t2 + 1) * p.w[i] + (t3 - 2 * t2 + t) * g.h * p.wprime[i] +
               (-2 * t3 + 3 * t2) * p.w[i + 1] + (t3 - t2) * g.h * p.wprime[i + 1];
    return std::max(v, 0.0);
}

// P1 finite elements on the grid nodes: K = int kw phi_i' phi_j', M = int mw phi_i phi_j,
// three-point Gauss on each element
template <class KW, class MW>
void assemble_p1(const RadialGrid& g, KW&& kw, MW&& mw, Tridiag& K, Tridiag& M)
{
    int n = g.n;
    K = Tridiag(n + 1);
    M = Tridiag(n + 1);
    const double gx[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    for (int e = 0; e < n; ++e) {
        double k = 0.0, m00 = 0.0, m01 = 0.0, m11 = 0.0;
        for (int q = 0; q < 3; ++q) {
            double r = g.r[e] + gx[q] * g.h;
            double a = gw[q] * g.h;
            double kv = kw(r), mv = mw(r);
            k += a * kv / (g.h * g.h);
            double p0 = 1.0 - gx[q], p1 = gx[q];
            m00 += a * mv * p0 * p0;
            m01 += a * mv * p0 * p1;
            m11 += a * mv * p1 * p1;
        }
        K.d[e] += k;
        K.d[e + 1] += k;
        K.e[e] -= k;
        M.d[e] += m00;
        M.d[e + 1] += m11;
        M.e[e] += m01;
    }
}

inline int count_sign_changes(const std::vector<double>& v, double floor)
{
    int changes = 0, last = 0;
    for (double x : v) {
        if (std::abs(x) <= floor)
            continue;
        int s = x > 0 ? 1 : -1;
        if (last != 0 && s != last)
            ++changes;
        last = s;
    }
    return changes;
}

} // namespace detail

// l-mode image of L applied to grad(u Y): Lθ = grad(ell Y) with
// ell = -(4/3) w^{-2} g - 4 pi psi, g the weighted divergence and psi its potential
inline ModeFunction apply_L_mode(const ModeFunction& u, const StarProfile& p)
{
    auto g = mode_divergence(u, p);
    auto psi = mode_potential(g);
    auto local = detail::over_weight(g.values, p, 2);
    ModeFunction ell{u.l, u.grid, std::vector<double>(u.grid.size()), ModeKind::Displacement};
    for (std::size_t i = 0; i < ell.values.size(); ++i)
        ell.values[i] = -(4.0 / 3.0) * local[i] - 4.0 * kPi * psi.values[i];
    return ell;
}

// int ((4/3) w^{-2} g^2 + 4 pi g psi) r^2 dr
inline double lambda_form(const ModeFunction& g, const StarProfile& p)
{
    require_same_grid(g.grid, p.grid);
    detail::check_vanishing_at_boundary(g);
    auto psi = mode_potential(g);
    auto q = detail::over_weight(g.values, p, 1);
    auto Q = detail::form_weights(p.grid);
    double s = 0.0;
    for (std::size_t i = 0; i < Q.size(); ++i)
        s += Q[i] * ((4.0 / 3.0) * q[i] * q[i] + 4.0 * kPi * g.values[i] * psi.values[i]);
    return s;
}

// int w^{-2} g^2 r^2 dr, the local part of the reference norm
inline double local_norm_sq(const ModeFunction& g, const StarProfile& p)
{
    auto q = detail::over_weight(g.values, p, 1);
    auto Q = detail::form_weights(p.grid);
    double s = 0.0;
    for (std::size_t i = 0; i < Q.size(); ++i)
        s += Q[i] * q[i] * q[i];
    return s;
}

// reference norm: local part plus the full-space gradient energy of the potential
inline double reference_norm_sq(const ModeFunction& g, const StarProfile& p)
{
    auto psi = mode_potential(g);
    auto Q = detail::form_weights(p.grid);
    double coul = 0.0;
    for (std::size_t i = 0; i < Q.size(); ++i)
        coul += Q[i] * g.values[i] * psi.values[i];
    return local_norm_sq(g, p) - coul;
}

// ||f||_3 relative residual of the eigen-relations L x = 3 delta x (l = 0) and L e = delta e (l = 1)
inline double eigen_relation_residual(int l, const StarProfile& p)
{
    if (l != 0 && l != 1)
        throw Error(ErrorKind::InvalidInput, "eigen-relations exist for l = 0 and l = 1 only");
    double delta = p.params.delta;
    auto X = sample_mode(l, p.grid, [l](double r) { return l == 0 ? 0.5 * r * r : r; });
    double mu = (l == 0 ? 3.0 : 1.0) * delta;
    auto ell = apply_L_mode(X, p);
    std::vector<double> diff(ell.values.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = ell.values[i] - mu * X.values[i];
    if (l == 0) {
        std::vector<double> one(diff.size(), 1.0);
        double c = weighted_inner(diff, one, 3, p) / weighted_inner(one, one, 3, p);
        for (auto& v : diff)
            v -= c;
    }
    return std::sqrt(weighted_inner(diff, diff, 3, p) / weighted_inner(X.values, X.values, 3, p));
}

// Minimise the mode form over g = w * (nodal P1 function). For l = 0 the total charge
// int g r^2 always vanishes (g is the divergence of a field vanishing on the boundary);
// `constrained` adds the moment condition (r^4 for l = 0, r^3 for l = 1).
inline QuadraticFormReport minimize_lambda(int l, const StarProfile& p, bool constrained)
{
    const auto& grid = p.grid;
    int n = grid.n;
    int m = n - 1; // v_1 .. v_{n-1}
    auto Q = detail::form_weights(grid);
    auto qs = quad::gregory_weights(n, grid.h);
    Eigen::MatrixXd P = potential_matrix(l, grid);

    // S: diagonal plus the boundary node whose quotient is extrapolated from v_{n-1..n-3}
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
    for (int i = 1; i <= n - 1; ++i)
        S(i - 1, i - 1) = Q[i];
    Eigen::Vector3d ext(3.0, -3.0, 1.0);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            S(m - 1 - a, m - 1 - b) += Q[n] * ext[a] * ext[b];

    Eigen::MatrixXd C(m, m);
    for (int i = 1; i <= n - 1; ++i)
        for (int j = 1; j <= n - 1; ++j)
            C(i - 1, j - 1) = Q[i] * p.w[i] * P(i, j) * p.w[j];
    Eigen::MatrixXd Cs = 0.5 * (C + C.transpose());
    Eigen::MatrixXd Lam = (4.0 / 3.0) * S + 4.0 * kPi * Cs;
    Eigen::MatrixXd B = S - Cs;

    QuadraticFormReport rep;
    rep.l = l;
    std::vector<Eigen::VectorXd> rows;
    if (l == 0) {
        Eigen::VectorXd a(m);
        for (int i = 1; i <= n - 1; ++i)
            a[i - 1] = Q[i] * p.w[i];
        rows.push_back(a);
        rep.constraints.push_back("charge");
    }
    if (constrained && (l == 0 || l == 1)) {
        Eigen::VectorXd a(m);
        int pw = (l == 0) ? 4 : 3;
        for (int i = 1; i <= n - 1; ++i)
            a[i - 1] = qs[i] * std::pow(grid.r[i], pw) * p.w[i];
        rows.push_back(a);
        rep.constraints.push_back(l == 0 ? "r4_moment" : "r3_moment");
    }

    Eigen::MatrixXd Z;
    int k = static_cast<int>(rows.size());
    if (k > 0) {
        Eigen::MatrixXd A(m, k);
        for (int c = 0; c < k; ++c)
            A.col(c) = rows[c] / rows[c].norm();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
        Eigen::MatrixXd full = Eigen::MatrixXd::Identity(m, m);
        full.applyOnTheLeft(qr.householderQ());
        Z = full.rightCols(m - k);
    } else {
        Z = Eigen::MatrixXd::Identity(m, m);
    }
    Eigen::MatrixXd Lz = Z.transpose() * Lam * Z;
    Eigen::MatrixXd Sz = Z.transpose() * S * Z;
    Eigen::MatrixXd Bz = Z.transpose() * B * Z;
    Lz = 0.5 * (Lz + Lz.transpose()).eval();
    Sz = 0.5 * (Sz + Sz.transpose()).eval();
    Bz = 0.5 * (Bz + Bz.transpose()).eval();

    Eigen::LLT<Eigen::MatrixXd> chkS(Sz), chkB(Bz);
    if (chkS.info() != Eigen::Success || chkB.info() != Eigen::Success)
        throw Error(ErrorKind::IndefiniteMass, "reference norm matrix is not positive definite");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Lz, Sz);
    if (es.info() != Eigen::Success)
        throw Error(ErrorKind::IndefiniteMass, "generalized eigensolver failed");
    rep.min_value = es.eigenvalues()[0];
    Eigen::VectorXd v = Z * es.eigenvectors().col(0);
    v /= std::sqrt(v.dot(S * v));

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eb(Lz, Bz, Eigen::EigenvaluesOnly);
    if (eb.info() != Eigen::Success)
        throw Error(ErrorKind::IndefiniteMass, "generalized eigensolver failed");
    rep.coercivity_ratio = eb.eigenvalues()[0];

    rep.minimizer = ModeFunction{l, grid, std::vector<double>(n + 1, 0.0), ModeKind::WeightedDivergence};
    for (int i = 1; i <= n - 1; ++i)
        rep.minimizer.values[i] = p.w[i] * v[i - 1];
    // fix the overall sign so the minimiser is reproducible
    double s = 0.0;
    for (double x : rep.minimizer.values)
        s += x;
    if (s < 0.0)
        for (auto& x : rep.minimizer.values)
            x = -x;
    return rep;
}

// A1 = -Lap_1 - 3 pi w^2 with y(R) = 0, written for z = r y as -z'' + (2/r^2 - 3 pi w^2) z;
// fourth-order five-point stencil, z even about the origin and odd about R
inline EigenReport sturm_liouville_A1(const StarProfile& p)
{
    const auto& g = p.grid;
    int n = g.n;
    int m = n - 1;
    double c = 1.0 / (12.0 * g.h * g.h);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    for (int i = 1; i <= n - 1; ++i) {
        double r = g.r[i];
        int k = i - 1;
        A(k, k) = 30.0 * c + 2.0 / (r * r) - 3.0 * kPi * p.w[i] * p.w[i];
        if (k + 1 < m)
            A(k, k + 1) = A(k + 1, k) = -16.0 * c;
        if (k + 2 < m)
            A(k, k + 2) = A(k + 2, k) = c;
    }
    A(0, 0) += c;         // z_{-1} = z_1
    A(m - 1, m - 1) -= c; // z_{n+1} = -z_{n-1}
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    EigenReport rep;
    rep.operator_id = "A1";
    for (int k = 0; k < 3; ++k)
        rep.eigenvalues.push_back(es.eigenvalues()[k]);
    Eigen::VectorXd z = es.eigenvectors().col(0);
    if (z.sum() < 0.0)
        z = -z;
    rep.residual = (A * z - rep.eigenvalues[0] * z).norm() / z.norm();
    rep.ground_state = ModeFunction{1, g, std::vector<double>(n + 1, 0.0), ModeKind::Potential};
    for (int i = 1; i <= n - 1; ++i)
        rep.ground_state.values[i] = z[i - 1] / g.r[i];
    std::vector<double> zv(z.data(), z.data() + m);
    rep.sign_changes = detail::count_sign_changes(zv, 1e-12 * z.cwiseAbs().maxCoeff());

    // kernel relation A1 w' = 0 on [0.05 R, R), r^2 dr norm, same stencil order
    std::vector<double> zw(n + 1);
    for (int i = 0; i <= n; ++i)
        zw[i] = g.r[i] * p.wprime[i];
    double num = 0.0, den = 0.0;
    for (int i = 1; i <= n - 1; ++i) {
        double r = g.r[i];
        if (r < 0.05 * g.R)
            continue;
        double d2;
        if (i + 2 <= n && i >= 2)
            d2 = (-zw[i - 2] + 16.0 * zw[i - 1] - 30.0 * zw[i] + 16.0 * zw[i + 1] - zw[i + 2]) * c;
        else
            d2 = (10.0 * zw[i + 1] - 15.0 * zw[i] - 4.0 * zw[i - 1] + 14.0 * zw[i - 2] - 6.0 * zw[i - 3] +
                  zw[i - 4]) * c;
        double res = -d2 + (2.0 / (r * r) - 3.0 * kPi * p.w[i] * p.w[i]) * zw[i];
        num += res * res;
        den += zw[i] * zw[i];
    }
    rep.kernel_residual = std::sqrt(num / den);
    return rep;
}

// phi -> -(4/(3 w^3 r^4)) (w^4 r^4 phi')' + 3 delta phi on L2(w^3 r^4), restricted to
// <phi, 1> = 0; eigenvalues[0] is the constrained minimum, eigenvalues[1] the unconstrained one
inline EigenReport radial_script_L(const StarProfile& p)
{
    Tridiag K, M;
    detail::assemble_p1(
        p.grid,
        [&](double r) {
            double w = detail::profile_at(p, r);
            return (4.0 / 3.0) * w * w * w * w * r * r * r * r;
        },
        [&](double r) {
            double w = detail::profile_at(p, r);
            return w * w * w * r * r * r * r;
        },
        K, M);
    double d3 = 3.0 * p.params.delta;
    for (std::size_t i = 0; i < K.size(); ++i)
        K.d[i] += d3 * M.d[i];
    for (std::size_t i = 0; i + 1 < K.size(); ++i)
        K.e[i] += d3 * M.e[i];
    std::vector<double> one(K.size(), 1.0);
    auto a = M.apply(one);
    auto ce = tri::constrained_least(K, M, a);
    EigenReport rep;
    rep.operator_id = "radial";
    rep.eigenvalues = {ce.value, tri::kth_eigenvalue(K, M, 0)};
    rep.residual = 0.0;
    // residual of the constrained problem: remove the multiplier direction first
    auto kx = K.apply(ce.vector), mx = M.apply(ce.vector);
    std::vector<double> r(kx.size());
    double aa = 0.0, ar = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] = kx[i] - ce.value * mx[i];
        aa += a[i] * a[i];
        ar += a[i] * r[i];
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        double v = r[i] - ar / aa * a[i];
        num += v * v;
        den += mx[i] * mx[i];
    }
    rep.residual = std::sqrt(num / den);
    rep.ground_state = ModeFunction{0, p.grid, ce.vector, ModeKind::Displacement};
    rep.sign_changes = detail::count_sign_changes(ce.vector, 1e-12);
    return rep;
}

// inf over radial theta of int d^{k+2} theta'^2 r^2 / int d^k (theta - avg)^2 r^2, the average
// taken over the ball of radius 2R/3
inline double hardy_poincare_constant(int k, const RadialGrid& grid, const std::function<double(double)>& dist)
{
    if (k < 0)
        throw Error(ErrorKind::InvalidInput, "weight exponent must be non-negative");
    Tridiag K, M;
    detail::assemble_p1(
        grid, [&](double r) { return std::pow(dist(r), k + 2) * r * r; },
        [&](double r) { return std::pow(dist(r), k) * r * r; }, K, M);
    // a_j = int_0^{2R/3} phi_j r^2 dr
    double cut = 2.0 * grid.R / 3.0;
    std::vector<double> a(grid.size(), 0.0);
    const double gx[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    for (int e = 0; e < grid.n; ++e) {
        double lo = grid.r[e], hi = std::min(grid.r[e + 1], cut);
        if (hi <= lo)
            break;
        for (int q = 0; q < 3; ++q) {
            double r = lo + gx[q] * (hi - lo);
            double t = (r - grid.r[e]) / grid.h;
            double wq = gw[q] * (hi - lo) * r * r;
            a[e] += wq * (1.0 - t);
            a[e + 1] += wq * t;
        }
    }
    return tri::constrained_least(K, M, a).value;
}

inline std::function<double(double)> boundary_distance(double R)
{
    return [R](double r) { return std::max(R - r, 0.0); };
}

} // namespace gwlab
