#pragma once

#include "gwlab/errors.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace gwlab {

// Symmetric tridiagonal matrix: d[0..m-1] on the diagonal, e[0..m-2] below/above it.
struct Tridiag {
    std::vector<double> d, e;

    explicit Tridiag(std::size_t m = 0) : d(m, 0.0), e(m > 0 ? m - 1 : 0, 0.0) {}
    std::size_t size() const { return d.size(); }

    std::vector<double> apply(const std::vector<double>& x) const
    {
        std::size_t m = d.size();
        std::vector<double> y(m);
        for (std::size_t i = 0; i < m; ++i) {
            y[i] = d[i] * x[i];
            if (i > 0)
                y[i] += e[i - 1] * x[i - 1];
            if (i + 1 < m)
                y[i] += e[i] * x[i + 1];
        }
        return y;
    }
};

namespace tri {

// number of eigenvalues of the pencil (K, M) below mu, M positive definite (Sylvester inertia)
inline int count_below(const Tridiag& K, const Tridiag& M, double mu)
{
    std::size_t m = K.size();
    int neg = 0;
    double piv = 0.0, prev_off = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double a = K.d[i] - mu * M.d[i];
        if (i > 0) {
            double p = piv;
            if (p == 0.0)
                p = std::numeric_limits<double>::min();
            a -= prev_off * prev_off / p;
        }
        piv = a;
        if (piv < 0.0)
            ++neg;
        if (i + 1 < m)
            prev_off = K.e[i] - mu * M.e[i];
    }
    return neg;
}

// solves (K - mu M) x = b by LDL^T without pivoting
inline std::vector<double> solve_shifted(const Tridiag& K, const Tridiag& M, double mu, std::vector<double> b)
{
    std::size_t m = K.size();
    std::vector<double> diag(m), off(m > 0 ? m - 1 : 0);
    for (std::size_t i = 0; i < m; ++i)
        diag[i] = K.d[i] - mu * M.d[i];
    for (std::size_t i = 0; i + 1 < m; ++i)
        off[i] = K.e[i] - mu * M.e[i];
    std::vector<double> piv(m);
    piv[0] = diag[0];
    for (std::size_t i = 1; i < m; ++i) {
        double p = piv[i - 1] == 0.0 ? std::numeric_limits<double>::min() : piv[i - 1];
        double l = off[i - 1] / p;
        piv[i] = diag[i] - l * off[i - 1];
        b[i] -= l * b[i - 1];
    }
    std::vector<double> x(m);
    x[m - 1] = b[m - 1] / piv[m - 1];
    for (std::size_t i = m - 1; i-- > 0;)
        x[i] = (b[i] - off[i] * x[i + 1]) / piv[i];
    return x;
}

inline double spectral_bound(const Tridiag& K, const Tridiag& M)
{
    double kmax = 0.0, mmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < K.size(); ++i) {
        double row = std::abs(K.d[i]);
        if (i > 0)
            row += std::abs(K.e[i - 1]);
        if (i + 1 < K.size())
            row += std::abs(K.e[i]);
        kmax = std::max(kmax, row);
        double mrow = M.d[i];
        if (i > 0)
            mrow -= std::abs(M.e[i - 1]);
        if (i + 1 < K.size())
            mrow -= std::abs(M.e[i]);
        mmin = std::min(mmin, mrow);
    }
    if (!(mmin > 0.0)) {
        // not diagonally dominant: fall back to a crude but safe scale
        mmin = std::numeric_limits<double>::infinity();
        for (double v : M.d)
            mmin = std::min(mmin, v);
        mmin *= 1e-3;
    }
    if (!(mmin > 0.0))
        throw Error(ErrorKind::IndefiniteMass, "mass matrix is not positive");
    return 2.0 * kmax / mmin + 1.0;
}

// k-th smallest eigenvalue (k = 0, 1, ...) by bisection on the inertia count
inline double kth_eigenvalue(const Tridiag& K, const Tridiag& M, int k, double rel_tol = 1e-14)
{
    double bound = spectral_bound(K, M);
    double lo = -bound, hi = bound;
    while (count_below(K, M, lo) > k)
        lo *= 2.0;
    while (count_below(K, M, hi) <= k)
        hi *= 2.0;
    for (int it = 0; it < 400; ++it) {
        double mid = 0.5 * (lo + hi);
        if (hi - lo <= rel_tol * std::max(std::abs(mid), 1e-300) + 1e-300)
            break;
        if (count_below(K, M, mid) > k)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

inline double m_norm(const Tridiag& M, const std::vector<double>& x)
{
    auto y = M.apply(x);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        s += x[i] * y[i];
    return std::sqrt(s);
}

// eigenvector for a converged eigenvalue by inverse iteration, M-normalised
inline std::vector<double> eigenvector(const Tridiag& K, const Tridiag& M, double mu)
{
    std::size_t m = K.size();
    double shift = mu - 1e-10 * std::max(1.0, std::abs(mu));
    std::vector<double> x(m, 1.0);
    for (std::size_t i = 0; i < m; ++i)
        x[i] = 1.0 + 0.01 * std::sin(1.0 + 3.0 * i);
    for (int it = 0; it < 6; ++it) {
        x = solve_shifted(K, M, shift, M.apply(x));
        double nrm = m_norm(M, x);
        for (auto& v : x)
            v /= nrm;
    }
    return x;
}

// residual ||(K - mu M) x|| / ||M x|| (Euclidean)
inline double pencil_residual(const Tridiag& K, const Tridiag& M, double mu, const std::vector<double>& x)
{
    auto kx = K.apply(x), mx = M.apply(x);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = kx[i] - mu * mx[i];
        num += r * r;
        den += mx[i] * mx[i];
    }
    return std::sqrt(num / den);
}

struct ConstrainedEigen {
    double value;
    std::vector<double> vector;
};

// least eigenvalue of (K, M) restricted to {x : a.x = 0}: the root of a^T (K - mu M)^{-1} a
// between the first two unconstrained eigenvalues
inline ConstrainedEigen constrained_least(const Tridiag& K, const Tridiag& M, const std::vector<double>& a)
{
    double mu1 = kth_eigenvalue(K, M, 0);
    double mu2 = kth_eigenvalue(K, M, 1);
    auto secular = [&](double mu) {
        auto x = solve_shifted(K, M, mu, a);
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += a[i] * x[i];
        return s;
    };
    double gap = mu2 - mu1;
    double lo = mu1 + 1e-9 * gap, hi = mu2 - 1e-9 * gap;
    double flo = secular(lo), fhi = secular(hi);
    ConstrainedEigen out{};
    if (!(flo < 0.0 && fhi > 0.0)) {
        // no sign change: either the ground state already satisfies the constraint (f >= 0 near mu1)
        // or the constraint is M-parallel to it and the answer is the second eigenvalue
        out.value = (flo >= 0.0) ? mu1 : mu2;
        out.vector = eigenvector(K, M, out.value);
        return out;
    }
    for (int it = 0; it < 300 && hi - lo > 1e-15 * std::max(std::abs(lo), std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (secular(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    out.value = 0.5 * (lo + hi);
    out.vector = solve_shifted(K, M, out.value, a);
    double nrm = m_norm(M, out.vector);
    for (auto& v : out.vector)
        v /= nrm;
    return out;
}

} // namespace tri

} // namespace gwlab
