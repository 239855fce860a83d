// nhns: run, verify and inspect heat-conducting inhomogeneous Navier-Stokes simulations.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nhns/cli.hpp"

namespace {

using namespace nhns;

struct RunArgs {
    std::string config_path;
    std::vector<Setting> settings;
};

/// Arguments left over after CLI11 parsing: an optional leading config path, then
/// "--key=value" or "--key value" overrides.
RunArgs run_args(const std::vector<std::string>& extras) {
    RunArgs out;
    for (std::size_t k = 0; k < extras.size(); ++k) {
        const std::string& a = extras[k];
        if (a.rfind("--", 0) != 0) {
            if (k == 0) {
                out.config_path = a;
                continue;
            }
            throw ConfigError(a, "unexpected argument");
        }
        const std::string body = a.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
            out.settings.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (k + 1 >= extras.size()) throw ConfigError(body, "missing value");
            out.settings.emplace_back(body, extras[++k]);
        }
    }
    return out;
}

SampledFunction load_sampled(const std::string& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open '" + path + "'");
    return read_sampled_csv(in, what);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heat-conducting inhomogeneous incompressible Navier-Stokes: simulation and checks"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a simulation: nhns run [config] [--key=value ...]");
    run->footer("config: file of 'key = value' lines. Every key may also be given as --key=value or --key value.");
    run->allow_extras();

    auto* verify = app.add_subcommand("verify", "check a diagnostics CSV against the acceptance thresholds");
    std::string csv_path, manifest_path, tracer_path;
    std::optional<double> window_lo, window_hi;
    verify->add_option("csv", csv_path, "diagnostics.csv")->required();
    verify->add_option("--manifest", manifest_path, "manifest.json (default: next to the CSV)");
    verify->add_option("--tracer", tracer_path, "tracer.csv (default: next to the CSV, if present)");
    verify->add_option("--window-lo", window_lo, "start of the decay-fit window (default 0.5)");
    verify->add_option("--window-hi", window_hi, "end of the decay-fit window (default: last time)");

    app.add_subcommand("scenarios", "list built-in scenarios");

    auto* cond = app.add_subcommand("check-condition", "evaluate the vacuum smallness condition on a grid");
    ScenarioSpec cspec = find_scenario("remark3");
    std::optional<double> big_c;
    double cbeta = 0.5;
    cond->add_option("--c0", cspec.c0, "density threshold c0")->capture_default_str();
    cond->add_option("--k1", cspec.k1, "inner exponent")->capture_default_str();
    cond->add_option("--k2", cspec.k2, "outer exponent")->capture_default_str();
    cond->add_option("--nx", cspec.nx, "cells in x")->capture_default_str();
    cond->add_option("--ny", cspec.ny, "cells in y")->capture_default_str();
    cond->add_option("--C", big_c, "also evaluate the variant with this constant C");
    cond->add_option("--beta", cbeta, "conductivity exponent for the variant")->capture_default_str();

    auto* ineq = app.add_subcommand("ineq", "Gronwall and Bihari bounds from sampled data (CSV t,value)");
    ineq->require_subcommand(1);
    auto* gron = ineq->add_subcommand("gronwall", "f2(t) exp(int_0^t c)");
    std::string f2_path, c_path, h_path, out_path;
    gron->add_option("--f2", f2_path, "non-decreasing f2 samples")->required();
    gron->add_option("--c", c_path, "non-negative c samples")->required();
    gron->add_option("--out", out_path, "output CSV (default stdout)");
    auto* bihari = ineq->add_subcommand("bihari", "G^-1(G(c1) + c2 int_0^t h)");
    bihari->set_help_flag("--help", "Print this help message and exit");  // frees -h for the source term
    double c1 = 1.0, c2 = 1.0;
    std::string wname = "log_growth";
    std::optional<double> x0;
    bihari->add_option("--c1", c1, "c1 > 0")->required();
    bihari->add_option("--c2", c2, "c2 > 0")->required();
    bihari->add_option("--h", h_path, "non-negative h samples")->required();
    bihari->add_option("--w", wname, "nonlinearity")->check(CLI::IsMember({"linear", "log_growth"}))->capture_default_str();
    bihari->add_option("--x0", x0, "lower limit of G (default min(c1,1)/2)");
    bihari->add_option("--out", out_path, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (run->parsed()) {
            RunConfig cfg;
            try {
                const RunArgs args = run_args(run->remaining());
                std::vector<Setting> settings;
                if (!args.config_path.empty()) settings = read_config_file(args.config_path);
                settings.insert(settings.end(), args.settings.begin(), args.settings.end());
                cfg = build_config(settings);
            } catch (const ConfigError& e) {
                std::cerr << "config error [" << e.key() << "]: " << e.what() << '\n';
                return exit_config;
            }
            return cmd_run(cfg, std::cout, std::cerr);
        }
        if (verify->parsed()) {
            namespace fs = std::filesystem;
            const fs::path dir = fs::path(csv_path).parent_path();
            if (manifest_path.empty()) manifest_path = (dir / "manifest.json").string();
            if (tracer_path.empty() && fs::exists(dir / "tracer.csv")) tracer_path = (dir / "tracer.csv").string();
            VerifyInputs in;
            try {
                in = load_verify_inputs(csv_path, manifest_path, tracer_path);
            } catch (const StructuralError& e) {
                std::cerr << "verify: " << e.what() << '\n';
                return exit_config;
            }
            VerifyThresholds th;
            th.window_lo = window_lo;
            th.window_hi = window_hi;
            return print_verify_report(verify_records(in, th), std::cout);
        }
        if (app.got_subcommand("scenarios")) return cmd_scenarios(std::cout);
        if (cond->parsed()) {
            try {
                cspec.validate();
            } catch (const Error& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return exit_config;
            }
            print_condition(evaluate_condition(cspec, big_c, cbeta), cspec, std::cout);
            return exit_ok;
        }
        if (ineq->parsed()) {
            SampledFunction result;
            if (gron->parsed())
                result = gronwall_envelope(load_sampled(f2_path, "f2"), load_sampled(c_path, "c"));
            else
                result = bihari_bound(c1, c2, load_sampled(h_path, "h"),
                                      wname == "linear" ? Nonlinearity::linear : Nonlinearity::log_growth, x0);
            if (out_path.empty()) {
                write_sampled_csv(result, std::cout);
            } else {
                std::ofstream out(out_path);
                if (!out) throw Error("cannot write '" + out_path + "'");
                write_sampled_csv(result, out);
            }
            return exit_ok;
        }
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_ok;
}
