#pragma once

#include "gwlab/config.hpp"
#include "gwlab/dynamics.hpp"
#include "gwlab/fieldops.hpp"
#include "gwlab/io.hpp"
#include "gwlab/profile.hpp"
#include "gwlab/rng.hpp"
#include "gwlab/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace gwlab {

struct CheckRow {
    double delta = 0.0;
    std::string id;
    bool applicable = true;
    bool pass = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

inline const std::vector<std::string>& check_ids()
{
    static const std::vector<std::string> ids = {
        "profile",         "expansion",    "poisson",        "eigenvectors",
        "mu1",             "coercivity",   "higher_modes",   "radial_operator",
        "hardy_poincare",  "dynamics_self_similar", "dynamics_linear", "radial_nonlinear"};
    return ids;
}

struct VerificationMatrix {
    std::vector<CheckRow> rows;

    bool all_pass() const
    {
        for (const auto& r : rows)
            if (r.applicable && !r.pass)
                return false;
        return true;
    }

    json to_json() const
    {
        json out;
        out["all_pass"] = all_pass();
        json arr = json::array();
        for (const auto& r : rows) {
            json j;
            j["delta"] = r.delta;
            j["check"] = r.id;
            j["status"] = !r.applicable ? "n/a" : (r.pass ? "pass" : "fail");
            j["value"] = r.value;
            j["tolerance"] = r.tolerance;
            j["detail"] = r.detail;
            arr.push_back(j);
        }
        out["rows"] = arr;
        return out;
    }

    std::string table() const
    {
        std::ostringstream s;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-8s %-22s %-6s %14s %12s  %s\n", "delta", "check", "status", "value",
                      "tolerance", "detail");
        s << buf;
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%-8.4g %-22s %-6s %14.6g %12.3g  ", r.delta, r.id.c_str(),
                          !r.applicable ? "n/a" : (r.pass ? "pass" : "FAIL"), r.value, r.tolerance);
            s << buf << r.detail << '\n';
        }
        return s.str();
    }
};

namespace verify {

// ---------------------------------------------------------------------------------------------
// independent Lane-Emden n = 3 first zero: fixed-step RK4 on (theta, theta') from a series start,
// the crossing located by Newton on the cubic Hermite interpolant of the last step

inline double lane_emden_first_zero(double h = 1e-4)
{
    auto f = [](double x, double y, double yp, double& d1, double& d2) {
        d1 = yp;
        d2 = -2.0 * yp / x - y * y * y;
    };
    double x = 1e-3;
    double y = 1.0 - x * x / 6.0 + x * x * x * x / 40.0;
    double yp = -x / 3.0 + x * x * x / 10.0;
    while (true) {
        double k1, l1, k2, l2, k3, l3, k4, l4;
        f(x, y, yp, k1, l1);
        f(x + h / 2, y + h / 2 * k1, yp + h / 2 * l1, k2, l2);
        f(x + h / 2, y + h / 2 * k2, yp + h / 2 * l2, k3, l3);
        f(x + h, y + h * k3, yp + h * l3, k4, l4);
        double yn = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        double ypn = yp + h / 6 * (l1 + 2 * l2 + 2 * l3 + l4);
        if (yn <= 0.0) {
            double t = y / (y - yn);
            for (int it = 0; it < 50; ++it) {
                double h00 = 2 * t * t * t - 3 * t * t + 1, h10 = t * t * t - 2 * t * t + t;
                double h01 = -2 * t * t * t + 3 * t * t, h11 = t * t * t - t * t;
                double v = h00 * y + h10 * h * yp + h01 * yn + h11 * h * ypn;
                double d00 = 6 * t * t - 6 * t, d10 = 3 * t * t - 4 * t + 1;
                double d01 = -6 * t * t + 6 * t, d11 = 3 * t * t - 2 * t;
                double dv = d00 * y + d10 * h * yp + d01 * yn + d11 * h * ypn;
                double step = v / dv;
                t -= step;
                if (std::abs(step) < 1e-15)
                    break;
            }
            return x + t * h;
        }
        x += h;
        y = yn;
        yp = ypn;
        if (x > 20.0)
            throw Error(ErrorKind::NoCompactSupport, "Lane-Emden oracle found no zero");
    }
}

// profiles shared between cells; solved once per (delta, n)
class ProfileStore {
public:
    ProfileStore(double R, bool force, bool use_cache, double lambda1)
        : R_(R), force_(force), use_cache_(use_cache), lambda1_(lambda1)
    {
    }

    std::shared_ptr<const StarProfile> get(double delta, int n)
    {
        std::shared_ptr<Slot> slot;
        {
            std::lock_guard<std::mutex> lk(mu_);
            auto& s = slots_[{delta, n}];
            if (!s)
                s = std::make_shared<Slot>();
            slot = s;
        }
        std::call_once(slot->once, [&] {
            ProfileOptions opt;
            opt.allow_coarse = force_;
            if (use_cache_) {
                std::lock_guard<std::mutex> lk(io_);
                slot->p = std::make_shared<StarProfile>(
                    io::cached_profile(delta, lambda1_, R_, n, false, opt).profile);
            } else {
                slot->p = std::make_shared<StarProfile>(solve_profile(delta, R_, n, 1e-13, opt));
            }
        });
        return slot->p;
    }

private:
    struct Slot {
        std::once_flag once;
        std::shared_ptr<const StarProfile> p;
    };
    double R_;
    bool force_, use_cache_;
    double lambda1_;
    std::mutex mu_, io_;
    std::map<std::pair<double, int>, std::shared_ptr<Slot>> slots_;
};

struct Context {
    RunConfig cfg;
    ProfileStore* store = nullptr;
    int n() const { return cfg.grid_n; }
    int half() const { return std::max(cfg.grid_n / 2, 8); }
    int quarter() const { return std::max(cfg.grid_n / 4, 8); }
};

inline std::string num(double v)
{
    return io::fmt(v, "%.4g");
}

inline CheckRow make_row(double delta, const std::string& id)
{
    CheckRow r;
    r.delta = delta;
    r.id = id;
    return r;
}

// ---------------------------------------------------------------------------------------------
// the checks

inline CheckRow check_profile(double delta, Context& c)
{
    auto row = make_row(delta, "profile");
    auto p = c.store->get(delta, c.n());
    double res = profile_residual(*p);
    double bound = 1e-8 * std::max(1.0, std::pow(p->w0, 3));
    double ident = profile_identity_residual(*p);
    double slope = p->wprime.back();
    row.value = res;
    row.tolerance = bound;
    row.pass = res <= bound && slope < 0.0 && ident <= 1e-7;
    row.detail = "w0=" + num(p->w0) + " w'(R)=" + num(slope) + " identity=" + num(ident);
    if (delta == 0.0) {
        double xi1 = lane_emden_first_zero();
        double R_oracle = xi1 / (std::sqrt(kPi) * p->w0);
        double rel = std::abs(R_oracle - p->R()) / p->R();
        row.pass = row.pass && rel <= 1e-6;
        row.detail += " lane_emden_radius_rel=" + num(rel);
    }
    return row;
}

inline CheckRow check_expansion(double delta, Context& c)
{
    auto row = make_row(delta, "expansion");
    bool ok = true;
    std::string d;
    if (delta < 0.0) {
        auto gp = self_similar(delta);
        auto h = solve_lambda(gp, 100.0, 2000);
        double worst = 0.0, rate = 0.0;
        for (std::size_t i = 0; i < h.t.size(); ++i) {
            double exact = self_similar_lambda(h.t[i], gp.lambda1);
            worst = std::max(worst, std::abs(h.lambda[i] / exact - 1.0));
            // d lambda/ds / lambda = lambda' lambda^{1/2}
            rate = std::max(rate, std::abs(h.lambdadot[i] * std::sqrt(h.lambda[i]) - std::sqrt(2.0 * std::abs(delta))));
        }
        ok = worst <= 1e-8 && rate <= 1e-6;
        row.value = worst;
        row.tolerance = 1e-8;
        d = "log_rate_err=" + num(rate) + " ";
    }
    double l1 = c.cfg.lambda1;
    if (l1 * l1 + 2.0 * delta > 0.0 && l1 > 0.0) {
        auto gl = make_parameters(delta, l1);
        auto h = solve_lambda(gl, 1e4, 2000);
        double err = std::abs(h.lambdadot.back() - std::sqrt(l1 * l1 + 2.0 * delta));
        ok = ok && err <= 1e-4;
        if (delta >= 0.0) {
            row.value = err;
            row.tolerance = 1e-4;
        }
        d += "linear_speed_err=" + num(err);
    } else {
        d += "linear regime not admissible for lambda1=" + num(l1);
        ok = false;
    }
    row.pass = ok;
    row.detail = d;
    return row;
}

// max |Lap_l(potential(g)) - g| over all nodes
inline double poisson_defect(int l, int n)
{
    RadialGrid g(1.0, n, true);
    auto src = sample_mode(l, g, [l](double r) { return std::pow(r, l) * std::cos(1.3 * r * r); },
                           ModeKind::WeightedDivergence);
    auto back = mode_laplacian(mode_potential(src));
    double worst = 0.0;
    for (int i = 0; i <= n; ++i)
        worst = std::max(worst, std::abs(back.values[i] - src.values[i]));
    return worst;
}

inline CheckRow check_poisson(double delta, Context&)
{
    auto row = make_row(delta, "poisson");
    bool ok = true;
    double worst_order = 1e300;
    std::string d;
    for (int l = 0; l <= 2; ++l) {
        double e1 = poisson_defect(l, 64), e2 = poisson_defect(l, 128), e3 = poisson_defect(l, 256);
        double o1 = std::log2(e1 / e2), o2 = std::log2(e2 / e3);
        worst_order = std::min({worst_order, o1, o2});
        d += "l" + std::to_string(l) + ":" + num(e1) + "," + num(e2) + "," + num(e3) + " ";
    }
    ok = worst_order >= 1.8;
    // closed forms on R = 1
    RadialGrid g(1.0, 256);
    auto one = sample_mode(0, g, [](double) { return 1.0; }, ModeKind::WeightedDivergence);
    auto lin = sample_mode(1, g, [](double r) { return r; }, ModeKind::WeightedDivergence);
    auto p0 = mode_potential(one), p1 = mode_potential(lin);
    double cf = 0.0;
    for (int i = 0; i <= g.n; ++i) {
        double r = g.r[i];
        cf = std::max(cf, std::abs(p0.values[i] - (r * r / 6.0 - 0.5)));
        cf = std::max(cf, std::abs(p1.values[i] - (-r / 6.0 + r * r * r / 10.0)));
    }
    ok = ok && cf <= 1e-8;
    row.value = worst_order;
    row.tolerance = 1.8;
    row.pass = ok;
    row.detail = d + "closed_form=" + num(cf);
    return row;
}

inline CheckRow check_eigenvectors(double delta, Context& c)
{
    auto row = make_row(delta, "eigenvectors");
    auto p = c.store->get(delta, c.n());
    double r0 = eigen_relation_residual(0, *p), r1 = eigen_relation_residual(1, *p);
    row.value = std::max(r0, r1);
    row.tolerance = 1e-5;
    row.pass = row.value <= row.tolerance;
    row.detail = "l0=" + num(r0) + " l1=" + num(r1);
    return row;
}

inline CheckRow check_mu1(double delta, Context& c)
{
    auto row = make_row(delta, "mu1");
    auto p = c.store->get(delta, c.n());
    auto rep = sturm_liouville_A1(*p);
    row.value = rep.eigenvalues[0];
    row.tolerance = 0.0;
    row.pass = rep.eigenvalues[0] > 0.0 && rep.kernel_residual <= 1e-4 && rep.sign_changes == 0;
    row.detail = "kernel_rel=" + num(rep.kernel_residual) + " sign_changes=" + std::to_string(rep.sign_changes);
    return row;
}

inline CheckRow check_coercivity(double delta, Context& c)
{
    auto row = make_row(delta, "coercivity");
    auto pc = c.store->get(delta, c.quarter());
    auto pf = c.store->get(delta, c.half());
    auto l0c = minimize_lambda(0, *pc, true), l0f = minimize_lambda(0, *pf, true);
    auto l1c = minimize_lambda(1, *pc, true), l1f = minimize_lambda(1, *pf, true);
    auto l0u = minimize_lambda(0, *pf, false);
    auto gx = mode_divergence(sample_mode(0, pf->grid, [](double r) { return 0.5 * r * r; }), *pf);
    double dir = lambda_form(gx, *pf) / local_norm_sq(gx, *pf);
    double ref0 = std::abs(l0c.coercivity_ratio / l0f.coercivity_ratio - 1.0);
    double ref1 = std::abs(l1c.coercivity_ratio / l1f.coercivity_ratio - 1.0);
    bool ok = l0f.coercivity_ratio >= 0.01 && l1f.coercivity_ratio >= 0.01 && ref0 <= 0.05 && ref1 <= 0.05;
    double bracket;
    if (delta < 0.0) {
        bracket = std::abs(l0u.min_value / dir - 1.0);
        ok = ok && l0u.min_value < 0.0 && bracket <= 0.1;
    } else {
        // the direction value vanishes with delta: the minimum must sit at zero
        bracket = std::abs(l0u.min_value);
        ok = ok && bracket <= 1e-6;
    }
    row.value = std::min(l0f.coercivity_ratio, l1f.coercivity_ratio);
    row.tolerance = 0.01;
    row.pass = ok;
    row.detail = "l0=" + num(l0f.coercivity_ratio) + " (refine " + num(ref0) + ") l1=" + num(l1f.coercivity_ratio) +
                 " (refine " + num(ref1) + ") l0_free_min=" + num(l0u.min_value) + " direction=" + num(dir) +
                 " bracket=" + num(bracket);
    return row;
}

inline CheckRow check_higher_modes(double delta, Context& c)
{
    auto row = make_row(delta, "higher_modes");
    auto p = c.store->get(delta, c.quarter());
    bool ok = true;
    double lowest = 1e300, prev = -1e300;
    std::string d;
    for (int l = 2; l <= 6; ++l) {
        auto rep = minimize_lambda(l, *p, false);
        lowest = std::min(lowest, rep.min_value);
        ok = ok && rep.min_value >= -1e-8 && rep.coercivity_ratio >= prev;
        prev = rep.coercivity_ratio;
        d += "l" + std::to_string(l) + "=" + num(rep.coercivity_ratio) + " ";
    }
    row.value = lowest;
    row.tolerance = -1e-8;
    row.pass = ok;
    row.detail = d;
    return row;
}

inline CheckRow check_radial_operator(double delta, Context& c)
{
    auto row = make_row(delta, "radial_operator");
    auto p = c.store->get(delta, c.n());
    auto rep = radial_script_L(*p);
    row.value = rep.eigenvalues[0];
    row.tolerance = 0.0;
    row.pass = rep.eigenvalues[0] > 0.0;
    row.detail = "unconstrained=" + num(rep.eigenvalues[1]) + " residual=" + num(rep.residual);
    return row;
}

inline CheckRow check_hardy_poincare(double delta, Context& c)
{
    auto row = make_row(delta, "hardy_poincare");
    double R = c.cfg.R;
    RadialGrid gc(R, c.half(), true), gf(R, c.n(), true);
    bool ok = true;
    double worst = 0.0;
    std::string d;
    for (int k = 0; k <= 3; ++k) {
        double a = hardy_poincare_constant(k, gc, boundary_distance(R));
        double b = hardy_poincare_constant(k, gf, boundary_distance(R));
        double rel = std::abs(a / b - 1.0);
        worst = std::max(worst, rel);
        ok = ok && a > 0.0 && b > 0.0;
        d += "k" + std::to_string(k) + "=" + num(b) + " ";
    }
    row.value = worst;
    row.tolerance = 0.05;
    row.pass = ok && worst <= 0.05;
    row.detail = d;
    return row;
}

inline std::vector<double> series(const std::vector<DiagnosticsRecord>& recs, double DiagnosticsRecord::*field)
{
    std::vector<double> v;
    for (const auto& r : recs)
        v.push_back(r.*field);
    return v;
}

inline ModeState random_state(int l, const RadialGrid& g, std::uint64_t seed, Regime regime)
{
    Lcg64 rng(seed);
    ModeState st;
    st.l = l;
    st.u = random_mode(l, g, rng);
    st.u_s = random_mode(l, g, rng);
    st.regime = regime;
    return st;
}

inline CheckRow check_dynamics_self_similar(double delta, Context& c)
{
    auto row = make_row(delta, "dynamics_self_similar");
    if (delta >= 0.0) {
        row.applicable = false;
        row.detail = "no self-similar expansion at this delta";
        return row;
    }
    auto p = c.store->get(delta, c.half());
    auto gp = self_similar(delta);
    double b = gp.b, bb = std::abs(b);
    EvolveOptions opt;
    opt.ds = c.cfg.evolve.ds;
    opt.n_steps = c.cfg.evolve.n_steps;
    bool ok = true;
    std::string d;
    double worst_rel = 0.0;

    for (int l = 0; l <= 1; ++l) {
        auto sys = build_mode_system(l, *p);
        double grow_target = (l == 0 ? 1.0 : 0.5) * bb;
        double decay_target = (l == 0 ? 1.5 : 1.0) * bb;

        // fit windows scale with 1/|b| so the affine part dominates the modes damped at b/4
        EvolveOptions og = opt, od = opt;
        og.ds = 20.0 / grow_target / opt.n_steps;
        od.ds = 10.0 / decay_target / opt.n_steps;

        auto st = random_state(l, p->grid, 12345 + l, Regime::SelfSimilar);
        auto run = evolve_mode(st, sys, gp, og);
        double grow = fit_rate(series(run.records, &DiagnosticsRecord::s),
                               series(run.records, &DiagnosticsRecord::affine_amplitude));
        double eg = std::abs(grow / grow_target - 1.0);
        ok = ok && eg <= 0.05;

        auto mm = characteristic_roots(b, sys.omega[sys.affine]).second;
        ModeState sl;
        sl.l = l;
        sl.regime = Regime::SelfSimilar;
        double amp = 1e-3;
        sl.u = sample_mode(l, p->grid, [&](double r) { return amp * (l == 0 ? 0.5 * r * r : r); });
        sl.u_s = sample_mode(l, p->grid, [&](double r) { return mm * amp * (l == 0 ? 0.5 * r * r : r); });
        auto sr = evolve_mode(project_stable(sl, sys, b), sys, gp, od);
        double decay = -fit_rate(series(sr.records, &DiagnosticsRecord::s),
                                 series(sr.records, &DiagnosticsRecord::affine_amplitude));
        double ed = std::abs(decay / decay_target - 1.0);
        ok = ok && ed <= 0.02;
        worst_rel = std::max(worst_rel, ed);
        d += "l" + std::to_string(l) + " grow=" + num(grow) + " decay=" + num(decay) + " ";

        if (l == 1) {
            auto ps = project_stable(st, sys, b);
            double norm = mode_data_norm(ps, sys);
            auto pr = evolve_mode(ps, sys, gp, opt);
            double drift = 0.0;
            for (const auto& r : pr.records)
                drift = std::max(drift, std::abs(r.momentum_pairing));
            ok = ok && drift <= 1e-8 * norm;
            d += "drift/norm=" + num(drift / norm) + " ";
        }
    }

    auto sys2 = build_mode_system(2, *p);
    auto run2 = evolve_mode(random_state(2, p->grid, 12345 + 2, Regime::SelfSimilar), sys2, gp, opt);
    double kappa = -fit_rate(series(run2.records, &DiagnosticsRecord::s),
                             series(run2.records, &DiagnosticsRecord::mode_energy), 0.0, 5.0, 40.0);
    ok = ok && kappa > 0.0;
    d += "kappa=" + num(kappa);

    row.value = worst_rel;
    row.tolerance = 0.02;
    row.pass = ok;
    row.detail = d;
    return row;
}

inline CheckRow check_dynamics_linear(double delta, Context& c)
{
    auto row = make_row(delta, "dynamics_linear");
    bool ok = true;
    double worst = 0.0;
    std::string d;
    for (double dl : {0.0, 0.01}) {
        auto gp = make_parameters(dl, 1.0);
        auto p = c.store->get(dl, c.half());
        for (int l = 0; l <= 2; ++l) {
            auto sys = build_mode_system(l, *p);
            EvolveOptions opt;
            opt.ds = 1.5e-3;
            opt.n_steps = 20000;
            opt.sample_every = 10;
            auto run = evolve_mode(random_state(l, p->grid, 777 + l, Regime::LinearExpanding), sys, gp, opt);
            double e0 = run.records.front().mode_energy, mx = 0.0;
            for (const auto& r : run.records)
                mx = std::max(mx, r.mode_energy / e0);
            worst = std::max(worst, mx);
            d += "d" + num(dl) + "/l" + std::to_string(l) + "=" + num(mx) + " ";
        }
    }
    ok = worst <= 3.0;
    row.value = worst;
    row.tolerance = 3.0;
    row.pass = ok;
    row.detail = d;
    return row;
}

// odd polynomial r sum a_k r^{2k} with seeded coefficients
inline std::function<double(double)> radial_test_shape()
{
    Lcg64 rng(99);
    std::array<double, 4> a;
    for (auto& v : a)
        v = uniform(rng, -1.0, 1.0);
    return [a](double r) {
        double s = 0.0, xp = 1.0;
        for (int k = 0; k < 4; ++k, xp *= r * r)
            s += a[k] * xp;
        return r * s;
    };
}

inline CheckRow check_radial_nonlinear(double delta, Context& c)
{
    auto row = make_row(delta, "radial_nonlinear");
    if (delta >= 0.0) {
        row.applicable = false;
        row.detail = "no self-similar expansion at this delta";
        return row;
    }
    auto gp = self_similar(delta);
    double bb = std::abs(gp.b);
    auto p = c.store->get(delta, c.n());
    auto m = make_radial_model(*p, gp.b);
    double fp = radial_fixed_point_residual(m);

    auto sys = build_mode_system(0, *p);
    double eps = 1e-3;
    auto cmp = compare_radial_with_mode(*p, m, sys, gp, radial_test_shape(), eps, 1.0);
    double ratio = cmp.error / (eps * eps);

    auto pt = c.store->get(delta, c.half());
    auto mt = make_radial_model(*pt, gp.b);
    auto st = radial_translate_state(*pt, gp.b, 0.5);
    std::vector<double> s, a;
    // the translate family has zero energy: its drift is measured against the energy scale
    double E0 = radial_energy(mt, st), scale = radial_energy_scale(mt, st);
    double drift = cmp.energy_drift, drift_t = 0.0;
    for (int k = 0; k < 40; ++k) {
        st = evolve_radial_nonlinear(st, mt, 0.5, 1).state;
        s.push_back(st.s);
        a.push_back(st.xi.back() / pt->R() - 1.0);
        drift_t = std::max(drift_t, std::abs(radial_energy(mt, st) - E0) / scale);
    }
    drift = std::max(drift, drift_t);
    double rate = -fit_rate(s, a);
    double er = std::abs(rate / (1.5 * bb) - 1.0);

    row.value = ratio;
    row.tolerance = 10.0;
    row.pass = fp <= 1e-8 && drift <= 1e-6 && ratio <= 10.0 && er <= 0.05;
    row.detail = "fixed_point=" + num(fp) + " energy_drift=" + num(cmp.energy_drift) + "," + num(drift_t) + " err/eps^2=" + num(ratio) +
                 " translate_rate=" + num(rate) + " (rel " + num(er) + ")";
    return row;
}

using CheckFn = CheckRow (*)(double, Context&);

inline const std::map<std::string, CheckFn>& registry()
{
    static const std::map<std::string, CheckFn> r = {
        {"profile", check_profile},
        {"expansion", check_expansion},
        {"poisson", check_poisson},
        {"eigenvectors", check_eigenvectors},
        {"mu1", check_mu1},
        {"coercivity", check_coercivity},
        {"higher_modes", check_higher_modes},
        {"radial_operator", check_radial_operator},
        {"hardy_poincare", check_hardy_poincare},
        {"dynamics_self_similar", check_dynamics_self_similar},
        {"dynamics_linear", check_dynamics_linear},
        {"radial_nonlinear", check_radial_nonlinear}};
    return r;
}

inline bool delta_independent(const std::string& id)
{
    return id == "poisson" || id == "hardy_poincare" || id == "dynamics_linear";
}

} // namespace verify

// Runs the selected checks for every delta of the sweep on a pool of `workers` threads
// (0: hardware concurrency). Row order is fixed: delta-major, check ids in suite order.
inline VerificationMatrix run_verification(const RunConfig& cfg, int workers = 0, bool use_cache = true)
{
    std::vector<std::string> ids;
    for (const auto& id : check_ids())
        if (cfg.only.empty() || std::find(cfg.only.begin(), cfg.only.end(), id) != cfg.only.end())
            ids.push_back(id);
    for (const auto& o : cfg.only)
        if (!verify::registry().count(o))
            throw Error(ErrorKind::InvalidInput, "unknown check id '" + o + "'");

    verify::ProfileStore store(cfg.R, cfg.force, use_cache, cfg.lambda1);
    verify::Context ctx;
    ctx.cfg = cfg;
    ctx.store = &store;

    struct Cell {
        std::string id;
        double delta;
        CheckRow row;
    };
    std::vector<Cell> cells;
    for (const auto& id : ids) {
        if (verify::delta_independent(id))
            cells.push_back({id, cfg.delta.front(), {}});
        else
            for (double d : cfg.delta)
                cells.push_back({id, d, {}});
    }

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next++) < cells.size();) {
            auto& cell = cells[i];
            try {
                cell.row = verify::registry().at(cell.id)(cell.delta, ctx);
            } catch (const std::exception& e) {
                cell.row = verify::make_row(cell.delta, cell.id);
                cell.row.pass = false;
                cell.row.detail = std::string("error: ") + e.what();
            }
        }
    };
    int nw = workers > 0 ? workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    nw = std::min<int>(nw, static_cast<int>(cells.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nw; ++t)
        pool.emplace_back(work);
    work();
    for (auto& t : pool)
        t.join();

    VerificationMatrix vm;
    for (double d : cfg.delta)
        for (const auto& id : ids)
            for (const auto& cell : cells)
                if (cell.id == id && (verify::delta_independent(id) || cell.delta == d)) {
                    CheckRow r = cell.row;
                    r.delta = d;
                    vm.rows.push_back(r);
                    break;
                }
    return vm;
}

} // namespace gwlab
