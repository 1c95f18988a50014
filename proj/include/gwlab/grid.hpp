#pragma once

#include "gwlab/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace gwlab {

// Uniform radial grid on [0, R]: n intervals, n + 1 nodes, node 0 at the origin.
struct RadialGrid {
    double R = 1.0;
    int n = 0;
    double h = 0.0;
    std::vector<double> r;

    RadialGrid() = default;
    RadialGrid(double radius, int intervals, bool allow_coarse = false)
        : R(radius), n(intervals)
    {
        if (!(radius > 0.0) || !std::isfinite(radius))
            throw Error(ErrorKind::InvalidInput, "grid radius must be positive");
        if (intervals < (allow_coarse ? 8 : 64))
            throw Error(ErrorKind::InvalidInput, "grid resolution too small: " + std::to_string(intervals));
        h = R / n;
        r.resize(n + 1);
        for (int i = 0; i <= n; ++i)
            r[i] = i * h;
        r[n] = R;
    }

    std::size_t size() const { return r.size(); }

    bool same_as(const RadialGrid& o) const
    {
        return n == o.n && std::abs(R - o.R) <= 1e-14 * R;
    }
};

inline void require_same_grid(const RadialGrid& a, const RadialGrid& b)
{
    if (!a.same_as(b))
        throw Error(ErrorKind::GridMismatch, "grids differ (n=" + std::to_string(a.n) + " vs " +
                                                 std::to_string(b.n) + ")");
}

namespace quad {

// Composite Simpson weights; an odd interval count ends with a 3/8 panel.
inline std::vector<double> simpson_weights(int n, double h)
{
    std::vector<double> w(n + 1, 0.0);
    int m = (n % 2 == 0) ? n : n - 3;
    for (int i = 0; i < m; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if (m != n) {
        w[m] += 3.0 * h / 8.0;
        w[m + 1] += 9.0 * h / 8.0;
        w[m + 2] += 9.0 * h / 8.0;
        w[m + 3] += 3.0 * h / 8.0;
    }
    return w;
}

// Trapezoid with fourth-order end corrections; uniform interior weights, so no odd/even bias
inline std::vector<double> gregory_weights(int n, double h)
{
    std::vector<double> w(n + 1, h);
    const double c[3] = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};
    for (int i = 0; i < 3; ++i) {
        w[i] = c[i] * h;
        w[n - i] = c[i] * h;
    }
    return w;
}

inline double simpson(const std::vector<double>& f, double h)
{
    auto w = simpson_weights(static_cast<int>(f.size()) - 1, h);
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        s += w[i] * f[i];
    return s;
}

namespace detail {

// weights for integrating the quintic through 6 consecutive unit-spaced points over [a, a+1]
inline const std::array<std::array<double, 6>, 5>& quintic_interval_table()
{
    static const auto table = [] {
        std::array<std::array<double, 6>, 5> t{};
        for (int a = 0; a < 5; ++a) {
            for (int j = 0; j < 6; ++j) {
                std::array<double, 7> c{};
                c[0] = 1.0;
                int deg = 0;
                for (int k = 0; k < 6; ++k) {
                    if (k == j)
                        continue;
                    double inv = 1.0 / (j - k);
                    std::array<double, 7> nc{};
                    for (int d = 0; d <= deg; ++d) {
                        nc[d + 1] += c[d] * inv;
                        nc[d] -= c[d] * k * inv;
                    }
                    c = nc;
                    ++deg;
                }
                double s = 0.0;
                for (int d = 0; d <= deg; ++d)
                    s += c[d] * (std::pow(a + 1.0, d + 1) - std::pow(double(a), d + 1)) / (d + 1);
                t[a][j] = s;
            }
        }
        return t;
    }();
    return table;
}

} // namespace detail

// Stencil start and local weights (already scaled by h) for the interval [r_i, r_{i+1}].
struct IntervalRule {
    int start;
    std::array<double, 6> w;
};

inline IntervalRule interval_rule(int i, int n, double h)
{
    int s = i - 2;
    if (s < 0)
        s = 0;
    if (s > n - 5)
        s = n - 5;
    const auto& t = detail::quintic_interval_table();
    IntervalRule rule{s, {}};
    for (int j = 0; j < 6; ++j)
        rule.w[j] = t[i - s][j] * h;
    return rule;
}

// prefix integrals F_i = int_0^{r_i} f, fifth order
inline std::vector<double> cumulative(const std::vector<double>& f, double h)
{
    int n = static_cast<int>(f.size()) - 1;
    std::vector<double> F(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        auto rule = interval_rule(i, n, h);
        double s = 0.0;
        for (int j = 0; j < 6; ++j)
            s += rule.w[j] * f[rule.start + j];
        F[i + 1] = F[i] + s;
    }
    return F;
}

// row i holds the weights that produce F_i from nodal values
inline Eigen::MatrixXd cumulative_matrix(int n, double h)
{
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 0; i < n; ++i) {
        C.row(i + 1) = C.row(i);
        auto rule = interval_rule(i, n, h);
        for (int j = 0; j < 6; ++j)
            C(i + 1, rule.start + j) += rule.w[j];
    }
    return C;
}

// Product rule for int y^p f(y) dy over [r_i, r_{i+1}], p >= 0: f is interpolated by the local
// quintic and the power is integrated exactly (16-point Gauss-Legendre)
inline IntervalRule product_interval_rule(int i, int n, double h, int p)
{
    static const double gx[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                 0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
    static const double gw[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                 0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};
    int s = std::clamp(i - 2, 0, n - 5);
    int a = i - s;
    IntervalRule rule{s, {}};
    auto lagrange = [](int j, double t) {
        double v = 1.0;
        for (int k = 0; k < 6; ++k)
            if (k != j)
                v *= (t - k) / double(j - k);
        return v;
    };
    for (int q = 0; q < 16; ++q) {
        double x = (q < 8) ? 0.5 - 0.5 * gx[q] : 0.5 + 0.5 * gx[q - 8];
        double wq = 0.5 * gw[q % 8];
        double t = a + x;
        double y = (s + t) * h;
        double yp = std::pow(y, p);
        for (int j = 0; j < 6; ++j)
            rule.w[j] += wq * yp * lagrange(j, t) * h;
    }
    return rule;
}

inline std::vector<double> product_cumulative(const std::vector<double>& f, double h, int p)
{
    int n = static_cast<int>(f.size()) - 1;
    std::vector<double> F(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        auto rule = product_interval_rule(i, n, h, p);
        double s = 0.0;
        for (int j = 0; j < 6; ++j)
            s += rule.w[j] * f[rule.start + j];
        F[i + 1] = F[i] + s;
    }
    return F;
}

inline Eigen::MatrixXd product_cumulative_matrix(int n, double h, int p)
{
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 0; i < n; ++i) {
        C.row(i + 1) = C.row(i);
        auto rule = product_interval_rule(i, n, h, p);
        for (int j = 0; j < 6; ++j)
            C(i + 1, rule.start + j) += rule.w[j];
    }
    return C;
}

} // namespace quad

namespace fd {

// centered second-order first derivative, one-sided second order at both ends
inline std::vector<double> derivative(const std::vector<double>& f, double h)
{
    int n = static_cast<int>(f.size()) - 1;
    std::vector<double> d(n + 1);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for (int i = 1; i < n; ++i)
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    d[n] = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    return d;
}

inline std::vector<double> second_derivative(const std::vector<double>& f, double h)
{
    int n = static_cast<int>(f.size()) - 1;
    std::vector<double> d(n + 1);
    double h2 = h * h;
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    for (int i = 1; i < n; ++i)
        d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    d[n] = (2.0 * f[n] - 5.0 * f[n - 1] + 4.0 * f[n - 2] - f[n - 3]) / h2;
    return d;
}

} // namespace fd

} // namespace gwlab
