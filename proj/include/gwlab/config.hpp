#pragma once

#include "gwlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gwlab {

struct Tolerances {
    double tol_shoot = 1e-13;
    double tol_ode = 1e-12;
    double tol_eig = 1e-5;
    double tol_drift = 1e-8;
};

struct EvolveConfig {
    double ds = 2e-3;
    int n_steps = 20000;
    int l = 2;
    bool projection = true;
    std::string regime = "self_similar"; // or "linear"
};

struct OutputConfig {
    std::string dir = "out";
    std::vector<std::string> formats = {"csv", "json"};
};

struct RunConfig {
    std::vector<double> delta = {-0.05, -0.02, -0.01, 0.0};
    double lambda1 = 1.0; // used by the linear regime only
    double R = 1.0;
    int grid_n = 1024;
    Tolerances tol;
    EvolveConfig evolve;
    OutputConfig output;
    bool force = false;          // recompute cached profiles and admit coarse grids
    std::vector<std::string> only; // verify: restrict to these check ids
};

namespace config {

inline std::string trim(const std::string& s)
{
    auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!trim(item).empty())
            out.push_back(trim(item));
    return out;
}

inline double to_real(const std::string& key, const std::string& v)
{
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(x))
            throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidInput, "key '" + key + "': not a number: '" + v + "'");
    }
}

inline int to_int(const std::string& key, const std::string& v)
{
    double x = to_real(key, v);
    if (x != std::floor(x) || std::abs(x) > 2e9)
        throw Error(ErrorKind::InvalidInput, "key '" + key + "': not an integer: '" + v + "'");
    return static_cast<int>(x);
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw Error(ErrorKind::InvalidInput, "key '" + key + "': not a boolean: '" + v + "'");
}

inline const std::vector<std::string>& known_keys()
{
    static const std::vector<std::string> k = {
        "delta",          "lambda1",           "R",
        "grid_n",         "tolerances.tol_shoot", "tolerances.tol_ode",
        "tolerances.tol_eig", "tolerances.tol_drift", "evolve.ds",
        "evolve.n_steps", "evolve.l",          "evolve.projection",
        "evolve.regime",  "output.dir",        "output.formats"};
    return k;
}

inline void set(RunConfig& c, const std::string& key, const std::string& raw)
{
    std::string v = trim(raw);
    if (key == "delta") {
        c.delta.clear();
        for (auto& s : split_list(v))
            c.delta.push_back(to_real(key, s));
    } else if (key == "lambda1") {
        c.lambda1 = to_real(key, v);
    } else if (key == "R") {
        c.R = to_real(key, v);
    } else if (key == "grid_n") {
        c.grid_n = to_int(key, v);
    } else if (key == "tolerances.tol_shoot") {
        c.tol.tol_shoot = to_real(key, v);
    } else if (key == "tolerances.tol_ode") {
        c.tol.tol_ode = to_real(key, v);
    } else if (key == "tolerances.tol_eig") {
        c.tol.tol_eig = to_real(key, v);
    } else if (key == "tolerances.tol_drift") {
        c.tol.tol_drift = to_real(key, v);
    } else if (key == "evolve.ds") {
        c.evolve.ds = to_real(key, v);
    } else if (key == "evolve.n_steps") {
        c.evolve.n_steps = to_int(key, v);
    } else if (key == "evolve.l") {
        c.evolve.l = to_int(key, v);
    } else if (key == "evolve.projection") {
        c.evolve.projection = to_bool(key, v);
    } else if (key == "evolve.regime") {
        c.evolve.regime = v;
    } else if (key == "output.dir") {
        c.output.dir = v;
    } else if (key == "output.formats") {
        c.output.formats = split_list(v);
    } else {
        throw Error(ErrorKind::InvalidInput, "unknown config key '" + key + "'");
    }
}

// flat key=value lines, '#' starts a comment, [section] headers prefix the following keys
inline void parse(RunConfig& c, std::istream& in)
{
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::InvalidInput, "config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        if (!section.empty() && key.find('.') == std::string::npos)
            key = section + "." + key;
        set(c, key, line.substr(eq + 1));
    }
}

inline void load_file(RunConfig& c, const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::InvalidInput, "cannot open config file " + path);
    parse(c, in);
}

inline void validate(const RunConfig& c)
{
    if (c.delta.empty())
        throw Error(ErrorKind::InvalidInput, "delta sweep is empty");
    if (!(c.R > 0.0))
        throw Error(ErrorKind::InvalidInput, "R must be positive");
    if (c.grid_n < (c.force ? 8 : 64))
        throw Error(ErrorKind::InvalidInput, "grid_n must be at least 64 (use --force for coarse grids)");
    for (double t : {c.tol.tol_shoot, c.tol.tol_ode, c.tol.tol_eig, c.tol.tol_drift})
        if (!(t > 0.0))
            throw Error(ErrorKind::InvalidInput, "tolerances must be positive");
    if (!(c.evolve.ds > 0.0) || c.evolve.n_steps < 1)
        throw Error(ErrorKind::InvalidInput, "evolve.ds must be positive and evolve.n_steps at least 1");
    if (c.evolve.l < 0)
        throw Error(ErrorKind::InvalidInput, "evolve.l must be non-negative");
    if (c.evolve.regime != "self_similar" && c.evolve.regime != "linear")
        throw Error(ErrorKind::InvalidInput, "evolve.regime must be self_similar or linear");
}

} // namespace config
} // namespace gwlab
