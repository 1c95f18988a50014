#pragma once

#include "gwlab/grid.hpp"
#include "gwlab/profile.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace gwlab {

enum class ModeKind { Displacement, WeightedDivergence, Potential };

inline const char* mode_kind_name(ModeKind k)
{
    switch (k) {
    case ModeKind::Displacement: return "displacement";
    case ModeKind::WeightedDivergence: return "weighted_divergence";
    case ModeKind::Potential: return "potential";
    }
    return "unknown";
}

struct HarmonicIndex {
    int l = 0;
    int m = 0;
};

// Radial coefficient of a single real harmonic (Y normalised to unit L2 norm on the sphere).
// Potentials are stored on [0, R]; outside, psi(r) = psi(R) (R/r)^{l+1}.
struct ModeFunction {
    int l = 0;
    RadialGrid grid;
    std::vector<double> values;
    ModeKind kind = ModeKind::Displacement;
};

template <class F>
ModeFunction sample_mode(int l, const RadialGrid& grid, F&& f, ModeKind kind = ModeKind::Displacement)
{
    ModeFunction m{l, grid, std::vector<double>(grid.size()), kind};
    for (std::size_t i = 0; i < grid.size(); ++i)
        m.values[i] = f(grid.r[i]);
    return m;
}

inline std::vector<double> weight_power(const StarProfile& p, int k)
{
    std::vector<double> w(p.grid.size(), 1.0);
    if (k != 0)
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = std::pow(p.w[i], k);
    return w;
}

// int f g w^k r^2 dr, composite Simpson
inline double weighted_inner(const std::vector<double>& f, const std::vector<double>& g, int k,
                             const StarProfile& p)
{
    if (f.size() != p.grid.size() || g.size() != p.grid.size())
        throw Error(ErrorKind::GridMismatch, "sample count does not match the profile grid");
    if (k < 0)
        throw Error(ErrorKind::InvalidInput, "negative weight power is not integrable at the boundary");
    auto q = quad::simpson_weights(p.grid.n, p.grid.h);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double r = p.grid.r[i];
        s += q[i] * f[i] * g[i] * std::pow(p.w[i], k) * r * r;
    }
    return s;
}

inline double weighted_inner(const ModeFunction& f, const ModeFunction& g, int k, const StarProfile& p)
{
    require_same_grid(f.grid, g.grid);
    require_same_grid(f.grid, p.grid);
    return weighted_inner(f.values, g.values, k, p);
}

namespace detail {

// For l >= 1 the Laplacian is differenced through q = psi / r^l, which is even and smooth for regular
// modes: Lap_l psi = r^l (q'' + (2l + 2) q' / r). Row i (1 <= i < n) of the stencil acting on psi,
// with q(0) = (4 q_1 - q_2) / 3 from evenness. Entries are (column, weight).
inline std::array<std::pair<int, double>, 4> regular_laplacian_row(int l, const RadialGrid& g, int i)
{
    double h = g.h, r = g.r[i];
    double cm = 1.0 / (h * h) - (2.0 * l + 2.0) / (2.0 * h * r);
    double c0 = -2.0 / (h * h);
    double cp = 1.0 / (h * h) + (2.0 * l + 2.0) / (2.0 * h * r);
    auto scale = [&](int j) { return std::pow(r / g.r[j], l); };
    if (i == 1)
        return {{{1, (c0 + 4.0 / 3.0 * cm) * scale(1)}, {2, (cp - cm / 3.0) * scale(2)}, {0, 0.0}, {0, 0.0}}};
    return {{{i - 1, cm * scale(i - 1)}, {i, c0}, {i + 1, cp * scale(i + 1)}, {0, 0.0}}};
}

} // namespace detail

// (1/r^2)(r^2 psi')' - l(l+1) psi / r^2; value at r = 0 is the regular limit
inline ModeFunction mode_laplacian(const ModeFunction& psi)
{
    const auto& g = psi.grid;
    const auto& v = psi.values;
    int n = g.n;
    double h = g.h;
    double ll = psi.l * (psi.l + 1.0);
    ModeFunction out{psi.l, g, std::vector<double>(n + 1), ModeKind::WeightedDivergence};
    out.values[0] = (psi.l == 0) ? 6.0 * (v[1] - v[0]) / (h * h) : 0.0;
    for (int i = 1; i < n; ++i) {
        double r = g.r[i];
        double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        double d1 = (v[i + 1] - v[i - 1]) / (2.0 * h);
        out.values[i] = d2 + 2.0 * d1 / r - ll * v[i] / (r * r);
    }
    if (psi.l >= 1)
        for (int i = 1; i < n; ++i) {
            double acc = 0.0;
            for (auto [j, c] : detail::regular_laplacian_row(psi.l, g, i))
                acc += c * v[j];
            out.values[i] = acc;
        }
    double d2 = (2.0 * v[n] - 5.0 * v[n - 1] + 4.0 * v[n - 2] - v[n - 3]) / (h * h);
    double d1 = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
    out.values[n] = d2 + 2.0 * d1 / g.R - ll * v[n] / (g.R * g.R);
    return out;
}

namespace detail {

// r^p with the convention 0^p = 0 for p > 0 and the regular-mode limit 0 for p <= 0 at the origin
inline double rpow0(double r, int p)
{
    if (r == 0.0)
        return (p == 0) ? 1.0 : 0.0;
    return std::pow(r, p);
}

} // namespace detail

// psi_l(r) = -1/(2l+1) [ r^{-l-1} int_0^r y^{l+2} g + r^l int_r^R y^{1-l} g ]
inline ModeFunction mode_potential(const ModeFunction& g)
{
    const auto& grid = g.grid;
    int n = grid.n;
    int l = g.l;
    std::vector<double> outer(n + 1);
    for (int i = 0; i <= n; ++i)
        outer[i] = detail::rpow0(grid.r[i], 1 - l) * g.values[i];
    auto Fin = quad::product_cumulative(g.values, grid.h, l + 2);
    auto Fout = quad::cumulative(outer, grid.h);
    double total = Fout[n];
    ModeFunction psi{l, grid, std::vector<double>(n + 1), ModeKind::Potential};
    double c = -1.0 / (2.0 * l + 1.0);
    psi.values[0] = (l == 0) ? c * total : 0.0;
    for (int i = 1; i <= n; ++i) {
        double r = grid.r[i];
        psi.values[i] = c * (Fin[i] / std::pow(r, l + 1) + std::pow(r, l) * (total - Fout[i]));
    }
    return psi;
}

// dense matrix P with psi = P g on the grid, same quadrature as mode_potential
inline Eigen::MatrixXd potential_matrix(int l, const RadialGrid& grid)
{
    int n = grid.n;
    Eigen::MatrixXd C = quad::cumulative_matrix(n, grid.h);
    Eigen::MatrixXd Cin = quad::product_cumulative_matrix(n, grid.h, l + 2);
    Eigen::MatrixXd P(n + 1, n + 1);
    double c = -1.0 / (2.0 * l + 1.0);
    std::vector<double> pout(n + 1);
    for (int j = 0; j <= n; ++j)
        pout[j] = detail::rpow0(grid.r[j], 1 - l);
    for (int j = 0; j <= n; ++j)
        P(0, j) = (l == 0) ? c * C(n, j) * pout[j] : 0.0;
    for (int i = 1; i <= n; ++i) {
        double r = grid.r[i];
        double a = 1.0 / std::pow(r, l + 1), b = std::pow(r, l);
        for (int j = 0; j <= n; ++j)
            P(i, j) = c * (a * Cin(i, j) + b * (C(n, j) - C(i, j)) * pout[j]);
    }
    return P;
}

// w^3 Lap_l u + 3 w^2 w' u'
inline ModeFunction mode_divergence(const ModeFunction& u, const StarProfile& p)
{
    require_same_grid(u.grid, p.grid);
    auto lap = mode_laplacian(u);
    auto du = fd::derivative(u.values, u.grid.h);
    ModeFunction g{u.l, u.grid, std::vector<double>(u.grid.size()), ModeKind::WeightedDivergence};
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        double w = p.w[i];
        g.values[i] = w * w * w * lap.values[i] + 3.0 * w * w * p.wprime[i] * du[i];
    }
    return g;
}

// banded matrix D with (D u)_i = mode_divergence(u)_i
inline Eigen::MatrixXd divergence_matrix(int l, const StarProfile& p)
{
    const auto& g = p.grid;
    int n = g.n;
    double h = g.h;
    double ll = l * (l + 1.0);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n + 1, n + 1);
    // row 0: only l = 0 carries a value there, and w'(0) = 0
    if (l == 0) {
        double w3 = p.w[0] * p.w[0] * p.w[0];
        D(0, 0) = -6.0 / (h * h) * w3;
        D(0, 1) = 6.0 / (h * h) * w3;
    }
    for (int i = 1; i < n; ++i) {
        double r = g.r[i], w = p.w[i];
        double a = w * w * w, b = 3.0 * w * w * p.wprime[i];
        D(i, i - 1) = a * (1.0 / (h * h) - 1.0 / (r * h)) - b / (2.0 * h);
        D(i, i) = a * (-2.0 / (h * h) - ll / (r * r));
        D(i, i + 1) = a * (1.0 / (h * h) + 1.0 / (r * h)) + b / (2.0 * h);
    }
    if (l >= 1)
        for (int i = 1; i < n; ++i) {
            double w = p.w[i], a = w * w * w, b = 3.0 * w * w * p.wprime[i];
            D(i, i - 1) = -b / (2.0 * h);
            D(i, i) = 0.0;
            D(i, i + 1) = b / (2.0 * h);
            for (auto [j, c] : detail::regular_laplacian_row(l, g, i))
                D(i, j) += a * c;
        }
    // last node: w = 0 so the row vanishes
    return D;
}

inline double coulomb_kernel(int l, double x, double y)
{
    double lo = std::min(x, y), hi = std::max(x, y);
    return 4.0 * kPi / (2.0 * l + 1.0) * std::pow(lo, l) / std::pow(hi, l + 1);
}

// real spherical harmonic at the unit vector (x, y, z); m = -l..l, l <= 2
inline double spherical_harmonic(int l, int m, double x, double y, double z)
{
    if (l < 0 || l > 2 || m < -l || m > l)
        throw Error(ErrorKind::InvalidInput, "harmonics are tabulated for l <= 2 only");
    const double c0 = 0.5 / std::sqrt(kPi);
    const double c1 = std::sqrt(3.0 / (4.0 * kPi));
    const double c2 = 0.5 * std::sqrt(15.0 / kPi);
    const double c20 = 0.25 * std::sqrt(5.0 / kPi);
    if (l == 0)
        return c0;
    if (l == 1)
        return c1 * (m == -1 ? y : (m == 0 ? z : x));
    switch (m) {
    case -2: return c2 * x * y;
    case -1: return c2 * y * z;
    case 0: return c20 * (3.0 * z * z - 1.0);
    case 1: return c2 * x * z;
    default: return 0.5 * c2 * (x * x - y * y);
    }
}

inline double spherical_harmonic(int l, int m, double theta, double phi)
{
    return spherical_harmonic(l, m, std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                              std::cos(theta));
}

// int_0^inf (psi'^2 r^2 + l(l+1) psi^2) dr with the exterior tail added in closed form
inline double potential_gradient_norm(const ModeFunction& psi)
{
    const auto& g = psi.grid;
    auto d = fd::derivative(psi.values, g.h);
    std::vector<double> f(g.size());
    double ll = psi.l * (psi.l + 1.0);
    for (std::size_t i = 0; i < f.size(); ++i)
        f[i] = d[i] * d[i] * g.r[i] * g.r[i] + ll * psi.values[i] * psi.values[i];
    double pR = psi.values.back();
    return quad::simpson(f, g.h) + (psi.l + 1.0) * g.R * pR * pR;
}

} // namespace gwlab
