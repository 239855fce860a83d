#pragma once

/// Command implementations behind the `nhns` executable. Each returns a process exit code.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nhns/config.hpp"
#include "nhns/diagnostics.hpp"
#include "nhns/dynamics.hpp"
#include "nhns/inequalities.hpp"
#include "nhns/scenarios.hpp"

namespace nhns {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_runtime = 3, exit_verify_fail = 4 };

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    return out;
}

inline void write_snapshots(const std::filesystem::path& dir, const State& s, int index) {
    char tag[32];
    std::snprintf(tag, sizeof tag, "%06d", index);
    for (const auto& [name, field] : {std::pair<const char*, const ScalarField*>{"rho", &s.rho},
                                      {"theta", &s.theta},
                                      {"p", &s.p}}) {
        auto out = open_output(dir / (std::string(name) + "_" + tag + ".txt"));
        write_snapshot(out, name, s.t, *field);
    }
}

}  // namespace detail

struct RunResult {
    std::vector<DiagRecord> records;
    TheoremConstants constants;
    double final_surrogate = 0.0;
    std::vector<std::pair<double, double>> tracer_errors;  ///< (t, flow-map error)
    long steps = 0;
};

/// Runs the configured simulation, writing diagnostics.csv, manifest.json, tracer.csv (when
/// seeds are given) and snapshots into the output directory.
inline RunResult execute_run(const RunConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    if (cfg.snapshot_every > 0) fs::create_directories(dir / "snapshots");

    State s = build_scenario(cfg.scenario);
    RunResult res;
    res.constants = theorem_constants(s, cfg.phys, s.rho.grid());
    const TheoremConstants& k = res.constants;
    const ScalarField rho0 = s.rho;

    auto csv = detail::open_output(dir / "diagnostics.csv");
    write_csv_header(csv);
    std::optional<std::ofstream> tracer_csv;
    std::optional<FlowMapTracer> tracer;
    if (!cfg.tracer_seeds.empty()) {
        tracer.emplace(s.rho, cfg.tracer_seeds);
        tracer_csv.emplace(detail::open_output(dir / "tracer.csv"));
        *tracer_csv << "t,flow_map_error\n";
    }

    const double eps = 1e-12 * std::max(1.0, std::abs(cfg.t_end));
    int rows = 0;
    double window_residual = 0.0;
    MacVelocity u_prev = s.u;
    auto emit = [&](const State& st, double residual) {
        DiagRecord r = compute_record(st, k, cfg.scenario.c0, residual);
        write_csv_row(csv, r);
        res.records.push_back(r);
        if (tracer) {
            const double e = tracer->error(st.rho);
            res.tracer_errors.emplace_back(st.t, e);
            *tracer_csv << format_full(st.t) << ',' << format_full(e) << '\n';
        }
        if (cfg.snapshot_every > 0 && rows % cfg.snapshot_every == 0)
            detail::write_snapshots(dir / "snapshots", st, rows);
        ++rows;
    };

    State final = run(std::move(s), cfg.phys, cfg.t_end, [&](const State& st, const StepReport* rep) {
        if (!rep) {
            emit(st, 0.0);
            return;
        }
        ++res.steps;
        if (tracer) tracer->advance(u_prev, st.u, rep->dt);
        u_prev = st.u;
        window_residual += rep->energy_residual;
        const bool last = !(st.t < cfg.t_end - eps);
        if (res.steps % cfg.output_every == 0 || last) {
            emit(st, window_residual);
            window_residual = 0.0;
        }
        if (last && cfg.snapshot_every > 0 && (rows - 1) % cfg.snapshot_every != 0)
            detail::write_snapshots(dir / "snapshots", st, rows - 1);
    });
    res.final_surrogate = theta_distance_surrogate(final, k);

    const double vac = vacuum_measure(rho0, cfg.scenario.c0);
    const ConditionVerdict verdict = check_condition_79(vac, cfg.scenario.c0);
    nlohmann::ordered_json m;
    nlohmann::ordered_json conf = nlohmann::ordered_json::object();
    for (const auto& [key, value] : resolved_settings(cfg)) conf[key] = value;
    m["config"] = conf;
    m["constants"] = {{"rho_tilde", k.rho_tilde}, {"theta_lower", k.theta_lower}, {"d", k.d},
                      {"E0", k.E0},               {"rho_bar", k.rho_bar},         {"theta_star", k.theta_star},
                      {"sigma1", k.sigma1},       {"sigma2", k.sigma2}};
    m["vacuum"] = {{"c0", cfg.scenario.c0},
                   {"measure", vac},
                   {"threshold", verdict.threshold},
                   {"margin", verdict.margin},
                   {"condition_79_holds", verdict.holds}};
    m["initial_density_range"] = {{"min", rho0.min()}, {"max", rho0.max()}};
    m["final"] = {{"t", final.t}, {"steps", res.steps}, {"theta_distance_discrete_surrogate", res.final_surrogate}};
    auto man = detail::open_output(dir / "manifest.json");
    man << m.dump(2) << '\n';

    log << "run finished: t = " << format_full(final.t) << ", " << res.steps << " steps, " << rows
        << " rows written to " << (dir / "diagnostics.csv").string() << '\n';
    return res;
}

inline int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        execute_run(cfg, out);
        return exit_ok;
    } catch (const ConfigError& e) {
        err << "config error [" << e.key() << "]: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return exit_runtime;
    }
}

// ---------------------------------------------------------------------------------------------
// verify

enum class Verdict { pass, fail, not_applicable };

struct VerifyItem {
    std::string name;
    Verdict verdict = Verdict::not_applicable;
    std::string detail;
};

struct VerifyThresholds {
    double mass_drift = 1e-12;
    double energy_drift = 1e-2;
    double rho_tol = rho_bound_tol;
    double theta_tol = theta_bound_tol;
    double ke_rate_fraction = 0.95;
    double theta_rate_fraction = 0.9;
    double flow_map_fraction = 0.05;
    std::optional<double> window_lo;  ///< defaults to 0.5
    std::optional<double> window_hi;  ///< defaults to the last time
};

struct VerifyInputs {
    std::vector<DiagRecord> records;
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    double rho_tilde = 0.0;
    double theta_lower = 0.0;
    std::optional<double> rho0_range;  ///< max rho0 - min rho0
    std::vector<std::pair<double, double>> tracer_errors;
};

namespace detail {

inline std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

/// Fitted rate of a positive decaying series against `required`.
inline VerifyItem rate_item(const std::string& name, const std::vector<std::pair<double, double>>& series,
                            double lo, double hi, double required, const char* sigma_name) {
    VerifyItem item{name, Verdict::not_applicable, ""};
    double peak = 0.0;
    for (const auto& pt : series) peak = std::max(peak, std::abs(pt.second));
    const double scale = series.empty() ? 0.0 : std::abs(series.front().second);
    std::vector<std::pair<double, double>> win;
    double win_max = 0.0;
    for (const auto& pt : series)
        if (pt.first >= lo && pt.first <= hi) {
            win.push_back(pt);
            win_max = std::max(win_max, std::abs(pt.second));
        }
    if (peak == 0.0 || win_max <= 1e-12 * scale) {
        item.detail = "not applicable (zero signal)";
        return item;
    }
    if (win.size() < 8) {
        item.detail = "not applicable (" + std::to_string(win.size()) + " samples in window, need 8)";
        return item;
    }
    try {
        const double rate = fit_decay_rate(win, lo, hi);
        item.verdict = rate >= required ? Verdict::pass : Verdict::fail;
        item.detail = "rate " + sci(rate) + " over [" + sci(lo) + ", " + sci(hi) + "], required >= " + sci(required) +
                      " (" + sigma_name + ")";
    } catch (const Error& e) {
        item.verdict = Verdict::fail;
        item.detail = e.what();
    }
    return item;
}

}  // namespace detail

inline std::vector<VerifyItem> verify_records(const VerifyInputs& in, const VerifyThresholds& th = {}) {
    const auto& rs = in.records;
    if (rs.empty()) throw StructuralError("verify: no diagnostic rows");
    std::vector<VerifyItem> items;
    auto add = [&](const std::string& name, bool ok, const std::string& detail) {
        items.push_back({name, ok ? Verdict::pass : Verdict::fail, detail});
    };

    double mass_drift = 0.0, energy_drift = 0.0;
    const double m0 = rs.front().mass, e0 = rs.front().E_total;
    for (const auto& r : rs) {
        mass_drift = std::max(mass_drift, std::abs(r.mass - m0) / (m0 != 0.0 ? std::abs(m0) : 1.0));
        energy_drift = std::max(energy_drift, std::abs(r.E_total - e0) / (e0 != 0.0 ? std::abs(e0) : 1.0));
    }
    add("mass_drift", mass_drift <= th.mass_drift, detail::sci(mass_drift) + " (<= " + detail::sci(th.mass_drift) + ")");
    add("energy_drift", energy_drift <= th.energy_drift,
        detail::sci(energy_drift) + " (<= " + detail::sci(th.energy_drift) + ")");

    int violations = 0;
    double worst_t = 0.0;
    for (const auto& r : rs) {
        const bool bad = r.min_rho < -th.rho_tol || r.max_rho > in.rho_tilde + th.rho_tol ||
                         r.min_theta < in.theta_lower - th.theta_tol;
        if (bad && violations++ == 0) worst_t = r.t;
    }
    add("bounds", violations == 0,
        violations == 0 ? "all rows within bounds"
                        : std::to_string(violations) + " rows out of bounds, first at t = " + detail::sci(worst_t));

    const double lo = th.window_lo.value_or(0.5);
    const double hi = th.window_hi.value_or(rs.back().t);
    std::vector<std::pair<double, double>> ke, td;
    for (const auto& r : rs) {
        ke.emplace_back(r.t, r.KE);
        td.emplace_back(r.t, r.theta_dist);
    }
    items.push_back(detail::rate_item("ke_decay_rate", ke, lo, hi, th.ke_rate_fraction * in.sigma1, "sigma1"));
    items.push_back(detail::rate_item("theta_decay_rate", td, lo, hi, th.theta_rate_fraction * in.sigma2, "sigma2"));

    if (!in.tracer_errors.empty()) {
        const double range = in.rho0_range.value_or(rs.front().max_rho - rs.front().min_rho);
        double worst = 0.0;
        for (const auto& pt : in.tracer_errors) worst = std::max(worst, pt.second);
        const double limit = th.flow_map_fraction * range;
        add("flow_map", worst <= limit, "max error " + detail::sci(worst) + " (<= " + detail::sci(limit) + ")");
    }
    return items;
}

inline std::vector<std::pair<double, double>> read_tracer_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || detail::trim(line) != "t,flow_map_error")
        throw StructuralError("tracer csv: unexpected header");
    std::vector<std::pair<double, double>> out;
    while (std::getline(is, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw StructuralError("tracer csv: malformed row '" + line + "'");
        try {
            out.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw StructuralError("tracer csv: malformed row '" + line + "'");
        }
    }
    return out;
}

inline VerifyInputs load_verify_inputs(const std::string& csv_path, const std::string& manifest_path,
                                       const std::string& tracer_path = "") {
    VerifyInputs in;
    std::ifstream csv(csv_path);
    if (!csv) throw StructuralError("cannot open '" + csv_path + "'");
    in.records = read_csv(csv);
    std::ifstream man(manifest_path);
    if (!man) throw StructuralError("cannot open '" + manifest_path + "'");
    try {
        const auto m = nlohmann::json::parse(man);
        const auto& c = m.at("constants");
        in.sigma1 = c.at("sigma1").get<double>();
        in.sigma2 = c.at("sigma2").get<double>();
        in.rho_tilde = c.at("rho_tilde").get<double>();
        in.theta_lower = c.at("theta_lower").get<double>();
        if (m.contains("initial_density_range")) {
            const auto& r = m.at("initial_density_range");
            in.rho0_range = r.at("max").get<double>() - r.at("min").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("manifest: ") + e.what());
    }
    if (!tracer_path.empty()) {
        std::ifstream tr(tracer_path);
        if (!tr) throw StructuralError("cannot open '" + tracer_path + "'");
        in.tracer_errors = read_tracer_csv(tr);
    }
    return in;
}

inline int print_verify_report(const std::vector<VerifyItem>& items, std::ostream& out) {
    bool failed = false;
    for (const auto& it : items) {
        const char* tag = it.verdict == Verdict::pass ? "PASS" : it.verdict == Verdict::fail ? "FAIL" : "N/A ";
        out << tag << "  " << it.name << ": " << it.detail << '\n';
        failed = failed || it.verdict == Verdict::fail;
    }
    return failed ? exit_verify_fail : exit_ok;
}

// ---------------------------------------------------------------------------------------------
// scenarios, check-condition, ineq

inline int cmd_scenarios(std::ostream& out) {
    for (const auto& e : scenario_catalog()) {
        const ScenarioSpec& s = e.spec;
        out << s.name << "  (" << s.nx << "x" << s.ny << ")  " << e.description << '\n';
    }
    return exit_ok;
}

struct ConditionReport {
    double eps = 0.0;
    double measure = 0.0;
    double exact_measure = 0.0;  ///< pi eps^2 = exp(-1/c0^2)
    ConditionVerdict verdict79;
    std::optional<ConditionVerdict> verdict83;
};

inline ConditionReport evaluate_condition(const ScenarioSpec& spec, std::optional<double> big_c, double beta) {
    ConditionReport r;
    r.eps = vacuum_radius(spec.c0);
    r.exact_measure = std::numbers::pi * r.eps * r.eps;
    r.measure = vacuum_measure(remark3_density(spec, spec.grid()), spec.c0);
    r.verdict79 = check_condition_79(r.measure, spec.c0);
    if (big_c) r.verdict83 = check_condition_83(r.measure, spec.c0, beta, *big_c);
    return r;
}

inline void print_condition(const ConditionReport& r, const ScenarioSpec& spec, std::ostream& out) {
    out << "c0 " << format_full(spec.c0) << ", grid " << spec.nx << "x" << spec.ny << '\n';
    out << "vacuum radius eps " << format_full(r.eps) << '\n';
    out << "|V| discrete " << format_full(r.measure) << ", continuous " << format_full(r.exact_measure) << '\n';
    out << "condition |V| <= exp(-1/c0^2) = " << format_full(r.verdict79.threshold) << ": "
        << (r.verdict79.holds ? "holds" : "fails") << " (margin " << format_full(r.verdict79.margin) << ")\n";
    if (r.verdict83)
        out << "variant with C: threshold " << format_full(r.verdict83->threshold) << ": "
            << (r.verdict83->holds ? "holds" : "fails") << " (margin " << format_full(r.verdict83->margin) << ")\n";
}

/// Reads "t,value" rows; a first line that does not parse as numbers is taken as a header.
inline SampledFunction read_sampled_csv(std::istream& is, const std::string& what) {
    std::vector<double> t, v;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument(line);
            std::size_t u1 = 0, u2 = 0;
            const std::string a = detail::trim(line.substr(0, comma)), b = detail::trim(line.substr(comma + 1));
            const double x = std::stod(a, &u1), y = std::stod(b, &u2);
            if (u1 != a.size() || u2 != b.size()) throw std::invalid_argument(line);
            t.push_back(x);
            v.push_back(y);
        } catch (const std::exception&) {
            if (t.empty() && lineno == 1) continue;
            throw StructuralError(what + ": malformed row " + std::to_string(lineno) + ": '" + line + "'");
        }
    }
    return SampledFunction(std::move(t), std::move(v));
}

inline void write_sampled_csv(const SampledFunction& f, std::ostream& out) {
    out << "t,bound\n";
    for (std::size_t k = 0; k < f.size(); ++k) out << format_full(f.knots()[k]) << ',' << format_full(f.values()[k]) << '\n';
}

}  // namespace nhns
