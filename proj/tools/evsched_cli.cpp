// evsched: run, compare and validate joint charging / power-flow schedules.
//
// Exit codes: 0 success, 1 invariant check failed (validate), 2 configuration
// error, 3 solver failure, 4 infeasible scenario.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evsched/harness.hpp"

namespace {

using namespace evsched;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kConfigError = 2;
constexpr int kSolverFailure = 3;
constexpr int kInfeasible = 4;

struct Flags {
    std::string config;
    std::optional<std::string> case_name;
    std::optional<std::string> profile;
    std::optional<std::string> mode;
    std::optional<std::string> scenario;
    std::optional<std::uint64_t> seed;
    std::optional<int> pevs;
    std::optional<double> mu1;
    std::optional<double> mu2;
    std::optional<double> exponent;
    std::optional<double> epsilon;
    std::optional<std::string> out;
};

void add_config_flags(CLI::App* cmd, Flags& f, bool with_mode) {
    cmd->add_option("--config", f.config, "JSON run configuration");
    cmd->add_option("--case", f.case_name, "bundled case name or path to a case JSON");
    cmd->add_option("--profile", f.profile, "bundled profile name or path to a profile CSV");
    if (with_mode) {
        cmd->add_option("--mode", f.mode, "dynamic or static")->check(CLI::IsMember({"dynamic", "static"}));
    }
    cmd->add_option("--scenario", f.scenario, "fleet or toy")->check(CLI::IsMember({"fleet", "toy"}));
    cmd->add_option("--seed", f.seed, "scenario seed");
    cmd->add_option("--pevs-per-station", f.pevs, "PEVs per charging station (fleet scenarios)");
    cmd->add_option("--mu1", f.mu1, "stage-1 penalty weight");
    cmd->add_option("--mu2", f.mu2, "stage-2 penalty weight");
    cmd->add_option("--exponent-L", f.exponent, "exponent of the binary penalty, > 1");
    cmd->add_option("--epsilon", f.epsilon, "stopping tolerance of both stages");
    cmd->add_option("--out", f.out, "output directory");
}

RunConfig resolve(const Flags& f, std::optional<ScenarioKind> default_scenario = std::nullopt) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (!c.scenario && default_scenario) {
        c.scenario = default_scenario;
    }
    if (f.case_name) c.case_name = *f.case_name;
    if (f.profile) c.profile = *f.profile;
    if (f.mode) c.mode = *f.mode;
    if (f.scenario) c.scenario = scenario_kind_from_string(*f.scenario);
    if (f.seed) c.seed = *f.seed;
    if (f.pevs) c.pevs_per_station = *f.pevs;
    if (f.mu1) c.mu1 = *f.mu1;
    if (f.mu2) c.mu2 = *f.mu2;
    if (f.exponent) c.exponent = *f.exponent;
    if (f.epsilon) c.epsilon = *f.epsilon;
    if (f.out) c.out = *f.out;
    c.validate();
    return c;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path);
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + " is not valid JSON: " + e.what());
    }
}

int cmd_run(const Flags& f) {
    const RunConfig c = resolve(f);
    const Scenario sc = build_scenario(c);
    std::cout << c.case_name << ": " << sc.tasks.size() << " PEVs, " << sc.time.num_slots << " slots, mode "
              << c.mode << '\n';
    EpisodeReport rep;
    if (c.mode == "static") {
        rep = run_static(sc, c.mpc_options());
    } else {
        // stepwise so that a failure still leaves the completed slots on disk
        MpcState st = initial_state(sc);
        std::vector<SlotRecord> slots;
        try {
            while (st.slot <= sc.time.num_slots) {
                slots.push_back(mpc_step(sc, st, c.mpc_options()));
            }
        } catch (const Error&) {
            auto partial = make_report(sc, st, "dynamic-partial", std::move(slots));
            partial.config = config_to_json(c);
            write_artifacts(c.out, sc.grid, partial);
            std::cerr << "partial artifacts written to " << c.out << '\n';
            throw;
        }
        rep = make_report(sc, st, "dynamic", std::move(slots));
    }
    rep.config = config_to_json(c);
    write_artifacts(c.out, sc.grid, rep);
    write_summary_table(std::cout, {{c.case_name + "/" + c.mode, rep}});
    std::cout << std::setprecision(10) << "total cost " << rep.total_cost() << " (generation "
              << rep.generation_cost << ", charging " << rep.charging_cost << "), fallbacks " << rep.fallback_count << ", all tasks complete: "
              << (rep.all_completed() ? "yes" : "no") << '\n';
    for (const auto& d : rep.diagnostics) {
        std::cout << "  note: " << d << '\n';
    }
    std::cout << "artifacts in " << c.out << '\n';
    return kOk;
}

int cmd_compare(const std::string& a, const std::string& b) {
    const auto cmp = compare_reports(read_json(a), read_json(b));
    write_comparison(std::cout, cmp);
    return kOk;
}

int cmd_oracle(const Flags& f) {
    const RunConfig c = resolve(f, ScenarioKind::toy);
    const Scenario sc = build_scenario(c);
    const auto cmp = compare_with_oracle(sc, c.mpc_options(), c.oracle_cache);
    std::filesystem::create_directories(c.out);
    std::ofstream(std::filesystem::path(c.out) / "oracle.json") << std::setw(2)
                                                                << oracle_result_to_json(cmp.oracle) << '\n';
    auto rep = cmp.report;
    rep.config = config_to_json(c);
    write_artifacts(c.out, sc.grid, rep);
    std::cout << std::setprecision(10);
    std::cout << "schedules enumerated: " << cmp.oracle.schedules_enumerated << '\n';
    std::cout << "relaxation bound: " << cmp.relaxation_bound << '\n';
    std::cout << "oracle cost:      " << cmp.oracle_cost << " (" << cmp.oracle_seconds << " s)\n";
    std::cout << "pipeline cost:    " << cmp.pipeline_cost << " (" << cmp.pipeline_seconds << " s)\n";
    std::cout << "relative gap:     " << cmp.relative_gap
              << (std::abs(cmp.relative_gap) <= 1e-2 ? " (<= 1%)" : " (> 1%)") << '\n';
    std::cout << "voltage error:    " << cmp.max_voltage_error << " p.u.\n";
    std::cout << "same schedule:    " << (cmp.same_schedule ? "yes" : "no") << '\n';
    return kOk;
}

int cmd_validate(const Flags& f) {
    if (!f.config.empty()) {
        resolve(f);
        std::cout << "PASS config " << f.config << '\n';
    }
    return validate_bundled(std::cout) ? kOk : kCheckFailed;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint PEV charging and power-flow scheduling"};
    app.require_subcommand(1);
    Flags run_flags, oracle_flags, validate_flags;
    std::string report_a, report_b;

    auto* run = app.add_subcommand("run", "run a dynamic (rolling-horizon) or static episode");
    add_config_flags(run, run_flags, true);
    auto* compare = app.add_subcommand("compare", "compare a dynamic and a static report of one scenario");
    compare->add_option("dynamic", report_a, "report.json of the first run")->required();
    compare->add_option("static", report_b, "report.json of the second run")->required();
    auto* oracle = app.add_subcommand("oracle", "compare the pipeline with brute-force enumeration on a toy case");
    add_config_flags(oracle, oracle_flags, false);
    auto* validate = app.add_subcommand("validate", "check bundled data and run the invariant suite");
    validate->add_option("--config", validate_flags.config, "also validate this configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) {
            return cmd_run(run_flags);
        }
        if (*compare) {
            return cmd_compare(report_a, report_b);
        }
        if (*oracle) {
            return cmd_oracle(oracle_flags);
        }
        return cmd_validate(validate_flags);
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const Error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    }
}
