#pragma once

#include "gwlab/dynamics.hpp"
#include "gwlab/fieldops.hpp"
#include "gwlab/profile.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace gwlab {

using json = nlohmann::json;

namespace io {

constexpr int kCacheVersion = 1;

inline std::string fmt(double v, const char* spec = "%.17g")
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::filesystem::path cache_dir()
{
    const char* env = std::getenv("GWLAB_CACHE");
    return (env && *env) ? std::filesystem::path(env) : std::filesystem::path("cache");
}

inline std::string cache_name(double delta, double lambda1, double R, int n)
{
    return "profile_d" + fmt(delta, "%+.10e") + "_l" + fmt(lambda1, "%.10e") + "_R" + fmt(R, "%.10e") + "_n" +
           std::to_string(n) + ".json";
}

inline json profile_to_json(const StarProfile& p, double lambda1)
{
    json j;
    j["version"] = kCacheVersion;
    j["delta"] = p.params.delta;
    j["lambda1"] = lambda1;
    j["R"] = p.grid.R;
    j["n"] = p.grid.n;
    j["w0"] = p.w0;
    j["nodes"] = p.grid.r;
    j["w"] = p.w;
    j["wprime"] = p.wprime;
    j["mass"] = p.mass;
    j["m2"] = p.m2;
    return j;
}

// the enclosed mass is not stored: 4 pi M(r) = -(4 w' + delta r) r^2 holds exactly for the profile
inline StarProfile profile_from_json(const json& j)
{
    if (j.value("version", -1) != kCacheVersion)
        throw Error(ErrorKind::InvalidInput, "unsupported profile cache version");
    StarProfile p;
    double delta = j.at("delta").get<double>();
    p.params = self_similar(delta);
    if (delta > 0.0) {
        p.params.regime = Regime::LinearExpanding;
        p.params.b = 0.0;
    }
    int n = j.at("n").get<int>();
    p.grid = RadialGrid(j.at("R").get<double>(), n, true);
    p.w = j.at("w").get<std::vector<double>>();
    p.wprime = j.at("wprime").get<std::vector<double>>();
    auto nodes = j.at("nodes").get<std::vector<double>>();
    if (static_cast<int>(p.w.size()) != n + 1 || p.wprime.size() != p.w.size() || nodes.size() != p.w.size())
        throw Error(ErrorKind::GridMismatch, "cache arrays do not match n");
    for (int i = 0; i <= n; ++i)
        if (std::abs(nodes[i] - p.grid.r[i]) > 1e-12 * p.grid.R)
            throw Error(ErrorKind::GridMismatch, "cache nodes are not the uniform grid");
    p.w0 = j.at("w0").get<double>();
    p.mass = j.at("mass").get<double>();
    p.m2 = j.at("m2").get<double>();
    p.enclosed.assign(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) {
        double r = p.grid.r[i];
        p.enclosed[i] = -(4.0 * p.wprime[i] + delta * r) * r * r / (4.0 * kPi);
    }
    return p;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::InvalidInput, "cannot write " + path.string());
    out << text;
}

inline json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::InvalidInput, "cannot read " + path.string());
    return json::parse(in);
}

struct CachedProfile {
    StarProfile profile;
    std::filesystem::path path;
    bool hit = false;
};

// loads the profile from the cache when the stored parameters match, otherwise solves and stores it
inline CachedProfile cached_profile(double delta, double lambda1, double R, int n, bool force = false,
                                    const ProfileOptions& opt = {})
{
    CachedProfile out;
    out.path = cache_dir() / cache_name(delta, lambda1, R, n);
    if (!force && std::filesystem::exists(out.path)) {
        try {
            auto j = read_json(out.path);
            if (j.at("delta").get<double>() == delta && j.at("R").get<double>() == R && j.at("n").get<int>() == n) {
                out.profile = profile_from_json(j);
                out.hit = true;
                return out;
            }
        } catch (const std::exception&) {
            // unreadable or stale entry: fall through and rebuild it
        }
    }
    out.profile = solve_profile(delta, R, n, 1e-13, opt);
    write_text(out.path, profile_to_json(out.profile, lambda1).dump(1) + "\n");
    return out;
}

// ---------------------------------------------------------------------------------------------
// CSV

inline std::string profile_csv(const StarProfile& p)
{
    std::ostringstream s;
    s << "r,w,wprime\n";
    for (std::size_t i = 0; i < p.w.size(); ++i)
        s << fmt(p.grid.r[i]) << ',' << fmt(p.w[i]) << ',' << fmt(p.wprime[i]) << '\n';
    return s.str();
}

inline std::string mode_csv(const ModeFunction& m)
{
    std::ostringstream s;
    s << "r,value\n";
    for (std::size_t i = 0; i < m.values.size(); ++i)
        s << fmt(m.grid.r[i]) << ',' << fmt(m.values[i]) << '\n';
    return s.str();
}

inline std::string series_csv(const std::vector<DiagnosticsRecord>& recs)
{
    std::ostringstream s;
    s << "s,energy,momentum_pairing,Edelta\n";
    for (const auto& r : recs)
        s << fmt(r.s) << ',' << fmt(r.mode_energy) << ',' << fmt(r.momentum_pairing) << ',' << fmt(r.Edelta)
          << '\n';
    return s.str();
}

// ---------------------------------------------------------------------------------------------
// mode JSON

inline json mode_to_json(const ModeFunction& m)
{
    json j;
    j["l"] = m.l;
    j["kind"] = mode_kind_name(m.kind);
    j["nodes"] = m.grid.r;
    j["values"] = m.values;
    return j;
}

inline ModeKind mode_kind_from_name(const std::string& s)
{
    if (s == "displacement")
        return ModeKind::Displacement;
    if (s == "weighted_divergence")
        return ModeKind::WeightedDivergence;
    if (s == "potential")
        return ModeKind::Potential;
    throw Error(ErrorKind::InvalidInput, "unknown mode kind '" + s + "'");
}

inline ModeFunction mode_from_json(const json& j)
{
    auto nodes = j.at("nodes").get<std::vector<double>>();
    auto values = j.at("values").get<std::vector<double>>();
    if (nodes.size() < 9 || nodes.size() != values.size())
        throw Error(ErrorKind::GridMismatch, "mode nodes and values differ in length");
    int n = static_cast<int>(nodes.size()) - 1;
    RadialGrid g(nodes.back(), n, true);
    for (int i = 0; i <= n; ++i)
        if (std::abs(nodes[i] - g.r[i]) > 1e-12 * g.R)
            throw Error(ErrorKind::GridMismatch, "mode nodes are not uniform");
    return ModeFunction{j.at("l").get<int>(), g, values, mode_kind_from_name(j.at("kind").get<std::string>())};
}

// ---------------------------------------------------------------------------------------------
// SVG: one polyline of log10|y| against x

inline std::string svg_log_polyline(const std::vector<double>& x, const std::vector<double>& y,
                                     const std::string& title)
{
    const double W = 640, H = 400, pad = 50;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
        if (std::abs(y[i]) > 0.0 && std::isfinite(y[i]))
            pts.push_back({x[i], std::log10(std::abs(y[i]))});
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!pts.empty()) {
        x0 = x1 = pts[0].first;
        y0 = y1 = pts[0].second;
        for (auto [a, b] : pts) {
            x0 = std::min(x0, a);
            x1 = std::max(x1, a);
            y0 = std::min(y0, b);
            y1 = std::max(y1, b);
        }
        if (x1 == x0)
            x1 = x0 + 1;
        if (y1 == y0)
            y1 = y0 + 1;
    }
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << pad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
    s << "<text x=\"4\" y=\"" << pad << "\" font-size=\"11\">" << fmt(y1, "%.2f") << "</text>\n";
    s << "<text x=\"4\" y=\"" << H - pad << "\" font-size=\"11\">" << fmt(y0, "%.2f") << "</text>\n";
    s << "<text x=\"" << pad << "\" y=\"" << H - pad + 16 << "\" font-size=\"11\">" << fmt(x0, "%.3g") << "</text>\n";
    s << "<text x=\"" << W - pad << "\" y=\"" << H - pad + 16 << "\" font-size=\"11\">" << fmt(x1, "%.3g")
      << "</text>\n";
    s << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"" << pad << ',' << pad << ' ' << pad
      << ',' << H - pad << ' ' << W - pad << ',' << H - pad << "\"/>\n";
    s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (auto [a, b] : pts) {
        double px = pad + (a - x0) / (x1 - x0) * (W - 2 * pad);
        double py = H - pad - (b - y0) / (y1 - y0) * (H - 2 * pad);
        s << fmt(px, "%.2f") << ',' << fmt(py, "%.2f") << ' ';
    }
    s << "\"/>\n</svg>\n";
    return s.str();
}

} // namespace io
} // namespace gwlab
