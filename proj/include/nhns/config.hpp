#pragma once

/// Run configuration: flat `key = value` text with dotted keys, '#' comments.
///
///   scenario = remark3
///   grid.nx = 128
///   time.t_end = 2

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nhns/diagnostics.hpp"
#include "nhns/dynamics.hpp"
#include "nhns/error.hpp"
#include "nhns/scenarios.hpp"

namespace nhns {

struct RunConfig {
    ScenarioSpec scenario = find_scenario("remark3");
    PhysParams phys{};
    double t_end = 2.0;
    int output_every = 1;
    std::string output_dir = "out";
    int snapshot_every = 0;  ///< in output rows; 0 disables snapshots
    std::vector<Point> tracer_seeds;
    std::uint64_t seed = 0;
};

using Setting = std::pair<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a finite number, got '" + v + "'");
    }
}

inline long long parse_integer(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    const long long x = parse_integer(key, v);
    if (x < -2147483647LL || x > 2147483647LL) throw ConfigError(key, "integer out of range");
    return static_cast<int>(x);
}

/// "x:y;x:y;..."
inline std::vector<Point> parse_points(const std::string& key, const std::string& v) {
    std::vector<Point> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError(key, "expected points as x:y;x:y, got '" + item + "'");
        out.push_back({parse_double(key, trim(item.substr(0, colon))), parse_double(key, trim(item.substr(colon + 1)))});
    }
    return out;
}

inline std::string point_list(const std::vector<Point>& pts) {
    std::string s;
    for (const auto& p : pts) {
        if (!s.empty()) s += ';';
        s += format_full(p.x) + ":" + format_full(p.y);
    }
    return s;
}

}  // namespace detail

/// Parses config text into settings in file order. Duplicate keys: the last one wins.
inline std::vector<Setting> parse_config_text(const std::string& text) {
    std::vector<Setting> out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected key = value, got '" + line + "'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline std::vector<Setting> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& v) {
    using detail::parse_double;
    using detail::parse_int;
    ScenarioSpec& sc = cfg.scenario;
    if (key == "scenario") {
        try {
            cfg.scenario = find_scenario(v);
        } catch (const Error& e) {
            throw ConfigError(key, e.what());
        }
    } else if (key == "scenario.c0") sc.c0 = parse_double(key, v);
    else if (key == "scenario.k1") sc.k1 = parse_double(key, v);
    else if (key == "scenario.k2") sc.k2 = parse_double(key, v);
    else if (key == "scenario.theta_min") sc.theta_min = parse_double(key, v);
    else if (key == "scenario.theta_bump") sc.theta_bump = parse_double(key, v);
    else if (key == "scenario.amplitude") sc.amplitude = parse_double(key, v);
    else if (key == "scenario.rho_uniform") sc.rho_uniform = parse_double(key, v);
    else if (key == "scenario.stream") {
        if (v == "sine") sc.stream = StreamShape::sine;
        else if (v == "sine_squared") sc.stream = StreamShape::sine_squared;
        else throw ConfigError(key, "expected sine or sine_squared, got '" + v + "'");
    } else if (key == "phys.alpha") cfg.phys.alpha = parse_double(key, v);
    else if (key == "phys.beta") cfg.phys.beta = parse_double(key, v);
    else if (key == "phys.rho_floor") cfg.phys.rho_floor = parse_double(key, v);
    else if (key == "phys.cfl") cfg.phys.cfl = parse_double(key, v);
    else if (key == "time.t_end") cfg.t_end = parse_double(key, v);
    else if (key == "time.dt_max") cfg.phys.dt_max = parse_double(key, v);
    else if (key == "grid.nx") sc.nx = parse_int(key, v);
    else if (key == "grid.ny") sc.ny = parse_int(key, v);
    else if (key == "grid.n") sc.nx = sc.ny = parse_int(key, v);
    else if (key == "grid.x0") sc.x0 = parse_double(key, v);
    else if (key == "grid.y0") sc.y0 = parse_double(key, v);
    else if (key == "grid.lx") sc.lx = parse_double(key, v);
    else if (key == "grid.ly") sc.ly = parse_double(key, v);
    else if (key == "output.every") cfg.output_every = parse_int(key, v);
    else if (key == "output.dir") cfg.output_dir = v;
    else if (key == "output.snapshots") cfg.snapshot_every = parse_int(key, v);
    else if (key == "solver.rel_tol") cfg.phys.solver.rel_tol = parse_double(key, v);
    else if (key == "solver.max_iters") cfg.phys.solver.max_iters = parse_int(key, v);
    else if (key == "solver.preconditioner") {
        if (v == "none") cfg.phys.solver.preconditioner = Preconditioner::none;
        else if (v == "jacobi") cfg.phys.solver.preconditioner = Preconditioner::jacobi;
        else if (v == "ic") cfg.phys.solver.preconditioner = Preconditioner::ic;
        else throw ConfigError(key, "expected none, jacobi or ic, got '" + v + "'");
    } else if (key == "tracer.seeds") cfg.tracer_seeds = detail::parse_points(key, v);
    else if (key == "seed") {
        const long long x = detail::parse_integer(key, v);
        if (x < 0) throw ConfigError(key, "seed must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(x);
    } else throw ConfigError(key, "unknown key");
}

/// Checks every value eagerly; the error names the offending key.
inline void validate_config(const RunConfig& cfg) {
    const ScenarioSpec& sc = cfg.scenario;
    auto require = [](bool ok, const char* key, const std::string& msg) {
        if (!ok) throw ConfigError(key, msg);
    };
    require(sc.k1 > 0.0 && sc.k1 < 2.0, "scenario.k1", "k1 not in (0,2)");
    require(sc.k2 > 0.0 && sc.k2 < 2.0, "scenario.k2", "k2 not in (0,2)");
    require(sc.c0 > 0.0 && sc.c0 < 1.0, "scenario.c0", "c0 not in (0,1)");
    require(sc.theta_min > 0.0, "scenario.theta_min", "theta_min must be positive");
    require(sc.theta_bump >= 0.0, "scenario.theta_bump", "theta_bump must be >= 0");
    require(sc.rho_uniform > 0.0, "scenario.rho_uniform", "rho_uniform must be positive");
    require(sc.nx >= 2, "grid.nx", "nx must be >= 2");
    require(sc.ny >= 2, "grid.ny", "ny must be >= 2");
    require(sc.lx > 0.0, "grid.lx", "lx must be positive");
    require(sc.ly > 0.0, "grid.ly", "ly must be positive");
    require(cfg.phys.alpha >= 0.0, "phys.alpha", "alpha must be >= 0");
    require(cfg.phys.beta >= 0.0, "phys.beta", "beta must be >= 0");
    require(cfg.phys.rho_floor > 0.0 && cfg.phys.rho_floor <= 1e-4, "phys.rho_floor", "rho_floor must lie in (0, 1e-4]");
    require(cfg.phys.cfl > 0.0 && cfg.phys.cfl < 1.0, "phys.cfl", "cfl must lie in (0, 1)");
    require(cfg.phys.dt_max > 0.0, "time.dt_max", "dt_max must be positive");
    require(cfg.t_end > 0.0, "time.t_end", "t_end must be positive");
    require(cfg.phys.solver.rel_tol > 0.0 && cfg.phys.solver.rel_tol < 1.0, "solver.rel_tol", "rel_tol must lie in (0, 1)");
    require(cfg.phys.solver.max_iters >= 0, "solver.max_iters", "max_iters must be >= 1 (or 0 for the default)");
    require(cfg.output_every >= 1, "output.every", "output cadence must be >= 1");
    require(cfg.snapshot_every >= 0, "output.snapshots", "snapshot cadence must be >= 0");
    require(!cfg.output_dir.empty(), "output.dir", "output directory must not be empty");
    for (const auto& p : cfg.tracer_seeds)
        require(p.x > sc.x0 && p.x < sc.x0 + sc.lx && p.y > sc.y0 && p.y < sc.y0 + sc.ly, "tracer.seeds",
                "seed (" + format_full(p.x) + ", " + format_full(p.y) + ") is not inside the domain");
    if (sc.density == DensityProfile::remark3) {
        try {
            (void)remark3_density(sc, sc.grid());
        } catch (const Error& e) {
            throw ConfigError("grid.nx", e.what());
        }
    }
    try {
        sc.validate();
        cfg.phys.validate();
    } catch (const Error& e) {
        throw ConfigError("config", e.what());
    }
}

/// Applies `scenario` first (it resets the scenario defaults), then everything else in order.
inline RunConfig build_config(const std::vector<Setting>& settings) {
    RunConfig cfg;
    for (const auto& [k, v] : settings)
        if (k == "scenario") apply_setting(cfg, k, v);
    for (const auto& [k, v] : settings)
        if (k != "scenario") apply_setting(cfg, k, v);
    validate_config(cfg);
    return cfg;
}

/// The fully resolved configuration as settings; build_config(resolved_settings(c)) == c.
inline std::vector<Setting> resolved_settings(const RunConfig& cfg) {
    const ScenarioSpec& sc = cfg.scenario;
    auto num = [](double x) { return format_full(x); };
    const char* pc = cfg.phys.solver.preconditioner == Preconditioner::none     ? "none"
                     : cfg.phys.solver.preconditioner == Preconditioner::jacobi ? "jacobi"
                                                                                 : "ic";
    return {
        {"scenario", sc.name},
        {"scenario.c0", num(sc.c0)},
        {"scenario.k1", num(sc.k1)},
        {"scenario.k2", num(sc.k2)},
        {"scenario.theta_min", num(sc.theta_min)},
        {"scenario.theta_bump", num(sc.theta_bump)},
        {"scenario.amplitude", num(sc.amplitude)},
        {"scenario.rho_uniform", num(sc.rho_uniform)},
        {"scenario.stream", sc.stream == StreamShape::sine ? "sine" : "sine_squared"},
        {"phys.alpha", num(cfg.phys.alpha)},
        {"phys.beta", num(cfg.phys.beta)},
        {"phys.rho_floor", num(cfg.phys.rho_floor)},
        {"phys.cfl", num(cfg.phys.cfl)},
        {"time.t_end", num(cfg.t_end)},
        {"time.dt_max", num(cfg.phys.dt_max)},
        {"grid.nx", std::to_string(sc.nx)},
        {"grid.ny", std::to_string(sc.ny)},
        {"grid.x0", num(sc.x0)},
        {"grid.y0", num(sc.y0)},
        {"grid.lx", num(sc.lx)},
        {"grid.ly", num(sc.ly)},
        {"output.every", std::to_string(cfg.output_every)},
        {"output.dir", cfg.output_dir},
        {"output.snapshots", std::to_string(cfg.snapshot_every)},
        {"solver.rel_tol", num(cfg.phys.solver.rel_tol)},
        {"solver.max_iters", std::to_string(cfg.phys.solver.max_iters)},
        {"solver.preconditioner", pc},
        {"tracer.seeds", detail::point_list(cfg.tracer_seeds)},
        {"seed", std::to_string(cfg.seed)},
    };
}

}  // namespace nhns
