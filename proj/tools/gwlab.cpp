#include "gwlab/config.hpp"
#include "gwlab/dynamics.hpp"
#include "gwlab/io.hpp"
#include "gwlab/profile.hpp"
#include "gwlab/spectral.hpp"
#include "gwlab/verify.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

using namespace gwlab;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrorKind k)
{
    switch (k) {
    case ErrorKind::NoCompactSupport:
    case ErrorKind::ShootingDiverged:
    case ErrorKind::CollapsingOrInadmissible:
    case ErrorKind::GridMismatch:
    case ErrorKind::NonIntegrableWeight:
    case ErrorKind::InvalidInput:
        return 2;
    default:
        return 1;
    }
}

struct Cli {
    std::string config_file;
    std::map<std::string, std::string> keys; // dotted key -> raw value from the command line
    std::vector<std::string> only;
    bool force = false;
    bool no_projection = false;
    int workers = 0;
    double t_end = 100.0;
    bool svg = false;
};

RunConfig build_config(const Cli& cli)
{
    RunConfig c;
    if (!cli.config_file.empty())
        config::load_file(c, cli.config_file);
    for (const auto& [k, v] : cli.keys)
        config::set(c, k, v);
    c.force = c.force || cli.force;
    if (!cli.only.empty())
        c.only = cli.only;
    if (cli.no_projection)
        c.evolve.projection = false;
    config::validate(c);
    return c;
}

bool wants(const RunConfig& c, const std::string& fmt)
{
    return std::find(c.output.formats.begin(), c.output.formats.end(), fmt) != c.output.formats.end();
}

std::string dtag(double d)
{
    return io::fmt(d, "%+.4g");
}

int cmd_profile(const RunConfig& c)
{
    ProfileOptions opt;
    opt.allow_coarse = c.force;
    for (double d : c.delta) {
        auto cp = io::cached_profile(d, c.lambda1, c.R, c.grid_n, c.force, opt);
        const auto& p = cp.profile;
        std::printf("delta=%s w0=%s R=%s mass=%s m2=%s residual=%s identity=%s cache=%s (%s)\n",
                    io::fmt(d, "%.6g").c_str(), io::fmt(p.w0, "%.15g").c_str(), io::fmt(p.R(), "%.6g").c_str(),
                    io::fmt(p.mass, "%.12g").c_str(), io::fmt(p.m2, "%.12g").c_str(),
                    io::fmt(profile_residual(p), "%.3e").c_str(), io::fmt(profile_identity_residual(p), "%.3e").c_str(),
                    cp.hit ? "hit" : "written", cp.path.string().c_str());
        if (wants(c, "csv"))
            io::write_text(fs::path(c.output.dir) / ("profile_d" + dtag(d) + ".csv"), io::profile_csv(p));
    }
    return 0;
}

int cmd_lambda(const RunConfig& c, double t_end)
{
    for (double d : c.delta) {
        auto gp = make_parameters(d, c.lambda1);
        auto h = time_map(solve_lambda(gp, t_end, 1000));
        std::printf("delta=%s lambda1=%s regime=%s b=%s lambda(%g)=%s lambda'=%s s=%s\n", io::fmt(d, "%.6g").c_str(),
                    io::fmt(c.lambda1, "%.6g").c_str(), regime_name(gp.regime), io::fmt(gp.b, "%.6g").c_str(), t_end,
                    io::fmt(h.lambda.back(), "%.12g").c_str(), io::fmt(h.lambdadot.back(), "%.12g").c_str(),
                    io::fmt(h.s.back(), "%.12g").c_str());
        if (wants(c, "csv")) {
            std::string s = "t,lambda,lambdadot,s\n";
            for (std::size_t i = 0; i < h.t.size(); ++i)
                s += io::fmt(h.t[i]) + "," + io::fmt(h.lambda[i]) + "," + io::fmt(h.lambdadot[i]) + "," +
                     io::fmt(h.s[i]) + "\n";
            io::write_text(fs::path(c.output.dir) / ("lambda_d" + dtag(d) + ".csv"), s);
        }
    }
    return 0;
}

int cmd_spectrum(const RunConfig& c)
{
    ProfileOptions opt;
    opt.allow_coarse = c.force;
    for (double d : c.delta) {
        auto p = io::cached_profile(d, c.lambda1, c.R, c.grid_n, c.force, opt).profile;
        int nq = std::max(c.grid_n / 4, 8);
        auto pq = io::cached_profile(d, c.lambda1, c.R, nq, c.force, opt).profile;
        json j;
        j["delta"] = d;
        j["grid_n"] = c.grid_n;
        j["eigen_residual_l0"] = eigen_relation_residual(0, p);
        j["eigen_residual_l1"] = eigen_relation_residual(1, p);
        auto a1 = sturm_liouville_A1(p);
        j["A1_eigenvalues"] = std::vector<double>(a1.eigenvalues.begin(),
                                                  a1.eigenvalues.begin() + std::min<std::size_t>(4, a1.eigenvalues.size()));
        j["A1_kernel_residual"] = a1.kernel_residual;
        auto rl = radial_script_L(p);
        j["radial_constrained"] = rl.eigenvalues[0];
        j["radial_unconstrained"] = rl.eigenvalues[1];
        json modes = json::array();
        for (int l = 0; l <= 6; ++l) {
            for (bool con : {false, true}) {
                if (con && l > 1)
                    continue;
                auto r = minimize_lambda(l, pq, con);
                modes.push_back({{"l", l}, {"constrained", con}, {"grid_n", nq}, {"min", r.min_value},
                                 {"ratio", r.coercivity_ratio}});
            }
        }
        j["modes"] = modes;
        std::printf("%s\n", j.dump(1).c_str());
        if (wants(c, "json"))
            io::write_text(fs::path(c.output.dir) / ("spectrum_d" + dtag(d) + ".json"), j.dump(1) + "\n");
    }
    return 0;
}

int cmd_verify(const RunConfig& c, int workers)
{
    auto vm = run_verification(c, workers);
    std::printf("%s", vm.table().c_str());
    if (wants(c, "json"))
        io::write_text(fs::path(c.output.dir) / "verify.json", vm.to_json().dump(1) + "\n");
    if (vm.all_pass()) {
        std::printf("all checks pass\n");
        return 0;
    }
    std::fprintf(stderr, "failing rows:\n");
    for (const auto& r : vm.rows)
        if (r.applicable && !r.pass)
            std::fprintf(stderr, "  delta=%g %s: %s\n", r.delta, r.id.c_str(), r.detail.c_str());
    return 1;
}

int cmd_evolve(const RunConfig& c, bool svg)
{
    const auto& e = c.evolve;
    bool linear = e.regime == "linear";
    for (double d : c.delta) {
        GWParameters gp;
        if (linear) {
            gp = make_parameters(d, c.lambda1);
            if (gp.regime != Regime::LinearExpanding)
                throw Error(ErrorKind::InvalidInput, "delta and lambda1 do not give a linearly expanding star");
        } else {
            if (!(d < 0.0))
                throw Error(ErrorKind::InvalidInput, "the self-similar regime needs delta < 0");
            gp = make_parameters(d, std::sqrt(2.0 * std::abs(d)));
        }
        ProfileOptions opt;
        opt.allow_coarse = c.force;
        auto p = io::cached_profile(d, c.lambda1, c.R, c.grid_n, c.force, opt).profile;
        auto sys = build_mode_system(e.l, p);
        Lcg64 rng((linear ? 777 : 12345) + e.l);
        ModeState st;
        st.l = e.l;
        st.u = random_mode(e.l, p.grid, rng);
        st.u_s = random_mode(e.l, p.grid, rng);
        st.regime = linear ? Regime::LinearExpanding : Regime::SelfSimilar;
        if (e.projection && !linear)
            st = project_stable(st, sys, gp.b);
        EvolveOptions o;
        o.ds = e.ds;
        o.n_steps = e.n_steps;
        o.sample_every = std::max(1, e.n_steps / 2000);
        auto run = evolve_mode(st, sys, gp, o);

        std::vector<double> s, y;
        bool affine = !linear && e.l <= 1;
        double mx = 0.0, e0 = run.records.front().mode_energy;
        for (const auto& r : run.records) {
            s.push_back(r.s);
            y.push_back(affine ? r.affine_amplitude : r.mode_energy);
            mx = std::max(mx, r.mode_energy / e0);
        }
        double rate = fit_rate(s, y);
        std::string base = "evolve_" + std::string(linear ? "linear" : "self_similar") + "_d" + dtag(d) + "_l" +
                           std::to_string(e.l);
        fs::path dir(c.output.dir);
        if (wants(c, "csv"))
            io::write_text(dir / (base + ".csv"), io::series_csv(run.records));
        json m;
        m["regime"] = linear ? "linear" : "self_similar";
        m["delta"] = d;
        m["lambda1"] = gp.lambda1;
        m["b"] = gp.b;
        m["l"] = e.l;
        m["grid_n"] = c.grid_n;
        m["ds"] = e.ds;
        m["n_steps"] = e.n_steps;
        m["projection"] = e.projection && !linear;
        m["fitted_quantity"] = affine ? "affine_amplitude" : "mode_energy";
        m["fitted_rate"] = rate;
        m["max_energy_ratio"] = mx;
        m["final_energy_ratio"] = run.records.back().mode_energy / e0;
        if (wants(c, "json"))
            io::write_text(dir / (base + ".json"), m.dump(1) + "\n");
        if (svg || wants(c, "svg"))
            io::write_text(dir / (base + ".svg"), io::svg_log_polyline(s, y, base));
        std::printf("%s fitted_rate=%s (%s) max_energy_ratio=%s\n", base.c_str(), io::fmt(rate, "%.6g").c_str(),
                    affine ? "affine amplitude" : "mode energy", io::fmt(mx, "%.6g").c_str());
    }
    return 0;
}

int cmd_report(const RunConfig& c, int workers)
{
    fs::path dir(c.output.dir);
    json vj;
    if (fs::exists(dir / "verify.json")) {
        vj = io::read_json(dir / "verify.json");
    } else {
        auto vm = run_verification(c, workers);
        vj = vm.to_json();
        io::write_text(dir / "verify.json", vj.dump(1) + "\n");
    }
    std::string md = "# gwlab report\n\n";
    md += "grid_n = " + std::to_string(c.grid_n) + ", R = " + io::fmt(c.R, "%.6g") + "\n\n";
    md += "| delta | w0 | mass | m2 |\n|---|---|---|---|\n";
    ProfileOptions opt;
    opt.allow_coarse = c.force;
    for (double d : c.delta) {
        auto p = io::cached_profile(d, c.lambda1, c.R, c.grid_n, c.force, opt).profile;
        md += "| " + io::fmt(d, "%.4g") + " | " + io::fmt(p.w0, "%.10g") + " | " + io::fmt(p.mass, "%.10g") + " | " +
              io::fmt(p.m2, "%.10g") + " |\n";
    }
    md += "\n| delta | check | status | value | tolerance | detail |\n|---|---|---|---|---|---|\n";
    for (const auto& r : vj.at("rows"))
        md += "| " + io::fmt(r.at("delta").get<double>(), "%.4g") + " | " + r.at("check").get<std::string>() + " | " +
              r.at("status").get<std::string>() + " | " + io::fmt(r.at("value").get<double>(), "%.6g") + " | " +
              io::fmt(r.at("tolerance").get<double>(), "%.3g") + " | " + r.at("detail").get<std::string>() + " |\n";
    io::write_text(dir / "report.md", md);
    std::printf("wrote %s\n", (dir / "report.md").string().c_str());
    return vj.value("all_pass", false) ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"gwlab: expanding polytropic star profiles, spectra and linear dynamics"};
    app.fallthrough();
    app.require_subcommand(1);
    Cli cli;

    app.add_option("--config", cli.config_file, "key=value config file")->check(CLI::ExistingFile);
    for (const auto& key : config::known_keys())
        app.add_option_function<std::string>(
            "--" + key, [&cli, key](const std::string& v) { cli.keys[key] = v; }, "config key " + key);
    app.add_option_function<std::string>("--steps", [&cli](const std::string& v) { cli.keys["evolve.n_steps"] = v; },
                                         "evolve.n_steps");
    app.add_option_function<std::string>("--l", [&cli](const std::string& v) { cli.keys["evolve.l"] = v; },
                                         "evolve.l");
    app.add_option_function<std::string>("--regime", [&cli](const std::string& v) { cli.keys["evolve.regime"] = v; },
                                         "evolve.regime: self_similar or linear");
    app.add_option_function<std::string>("--out", [&cli](const std::string& v) { cli.keys["output.dir"] = v; },
                                         "output.dir");
    app.add_option("--only", cli.only, "verify: restrict to these check ids")->delimiter(',');
    app.add_flag("--force", cli.force, "recompute cached profiles and admit coarse grids");
    app.add_flag("--no-projection", cli.no_projection, "evolve: keep the growing affine component");
    app.add_option("--workers", cli.workers, "verify: worker threads (0 = hardware)");
    app.add_option("--t-end", cli.t_end, "lambda: final time");
    app.add_flag("--svg", cli.svg, "evolve: also write an SVG of the fitted series");

    auto* sp = app.add_subcommand("profile", "solve or load the enthalpy profile");
    auto* sl = app.add_subcommand("lambda", "expansion factor and time map");
    auto* ss = app.add_subcommand("spectrum", "eigen-relations, A1, radial operator and mode forms");
    auto* sv = app.add_subcommand("verify", "verification matrix over the delta sweep");
    auto* se = app.add_subcommand("evolve", "linear mode evolution");
    auto* sr = app.add_subcommand("report", "markdown report from the verification matrix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig c = build_config(cli);
        if (sp->parsed())
            return cmd_profile(c);
        if (sl->parsed())
            return cmd_lambda(c, cli.t_end);
        if (ss->parsed())
            return cmd_spectrum(c);
        if (sv->parsed())
            return cmd_verify(c, cli.workers);
        if (se->parsed())
            return cmd_evolve(c, cli.svg);
        if (sr->parsed())
            return cmd_report(c, cli.workers);
    } catch (const Error& e) {
        std::fprintf(stderr, "gwlab: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "gwlab: %s\n", e.what());
        return 1;
    }
    return 2;
}
