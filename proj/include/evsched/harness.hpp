#ifndef EVSCHED_HARNESS_HPP
#define EVSCHED_HARNESS_HPP

// Experiment plumbing shared by the command-line tool and the acceptance
// runner: run configuration, scenario construction, oracle comparison,
// summary tables and report comparison.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsched/bruteforce_oracle.hpp"
#include "evsched/errors.hpp"
#include "evsched/grid_model.hpp"
#include "evsched/mpc_controller.hpp"
#include "evsched/scenario.hpp"

namespace evsched {

#ifdef EVSCHED_DATA_DIR
inline constexpr const char* kDataDir = EVSCHED_DATA_DIR;
#else
inline constexpr const char* kDataDir = "data";
#endif

/// Bundled names ("case9", "profile2") resolve into the data directory;
/// anything else is taken as a path.
inline std::string resolve_case_path(const std::string& name) {
    if (std::filesystem::exists(name)) {
        return name;
    }
    const auto bundled = std::filesystem::path(kDataDir) / "cases" / (name + ".json");
    if (std::filesystem::exists(bundled)) {
        return bundled.string();
    }
    throw ValidationError("case not found: " + name);
}

inline std::string resolve_profile_path(const std::string& name) {
    if (std::filesystem::exists(name)) {
        return name;
    }
    const auto bundled = std::filesystem::path(kDataDir) / "profiles" / (name + ".csv");
    if (std::filesystem::exists(bundled)) {
        return bundled.string();
    }
    throw ValidationError("profile not found: " + name);
}

enum class ScenarioKind { fleet, toy };

struct RunConfig {
    std::string case_name = "case9";
    std::string profile = "profile2";
    std::optional<ScenarioKind> scenario;  // default: fleet
    int pevs_per_station = 4;
    std::uint64_t seed = 1;
    int slots = 24;
    double slot_hours = 0.5;
    std::optional<double> rate_kw;  // default 20 (fleet) or 10000 (toy)
    double efficiency = 1.0;
    double capacity_kwh = 100.0;
    double initial_soc = 0.2;
    std::string mode = "dynamic";  // dynamic | static
    std::optional<double> mu1;     // default 1 (fleet) or 1000 (toy)
    double mu2 = 10.0;
    double exponent = 1.5;
    double epsilon = 1e-4;
    std::string out = "out";
    std::string oracle_cache;  // empty: no cache

    ScenarioKind scenario_kind() const { return scenario.value_or(ScenarioKind::fleet); }
    double resolved_rate() const { return rate_kw.value_or(scenario_kind() == ScenarioKind::toy ? 10000.0 : 20.0); }
    double resolved_mu1() const { return mu1.value_or(scenario_kind() == ScenarioKind::toy ? 1000.0 : 1.0); }

    void validate() const {
        if (mode != "dynamic" && mode != "static") {
            throw ValidationError("mode must be dynamic or static, got " + mode);
        }
        if (pevs_per_station < 0) {
            throw ValidationError("pevs_per_station must be >= 0");
        }
        if (slots < 1 || !(slot_hours > 0.0)) {
            throw ValidationError("slots must be >= 1 and slot_hours > 0");
        }
        if (!(resolved_mu1() > 0.0) || !(mu2 > 0.0) || !(epsilon > 0.0)) {
            throw ValidationError("mu1, mu2 and epsilon must be positive");
        }
        if (!(exponent > 1.0)) {
            throw ValidationError("exponent L must exceed 1");
        }
        if (!(resolved_rate() > 0.0) || !(efficiency > 0.0) || !(capacity_kwh > 0.0) || initial_soc < 0.0 ||
            initial_soc >= 1.0) {
            throw ValidationError("fleet parameters out of range");
        }
        resolve_case_path(case_name);
        resolve_profile_path(profile);
    }

    MpcOptions mpc_options() const {
        MpcOptions o;
        o.stage1.mu1 = resolved_mu1();
        o.stage1.exponent = exponent;
        o.stage1.epsilon = epsilon;
        o.stage2.mu2 = mu2;
        o.stage2.epsilon = epsilon;
        return o;
    }
};

inline std::string to_string(ScenarioKind k) { return k == ScenarioKind::toy ? "toy" : "fleet"; }

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
    if (s == "fleet") {
        return ScenarioKind::fleet;
    }
    if (s == "toy") {
        return ScenarioKind::toy;
    }
    throw ValidationError("scenario must be fleet or toy, got " + s);
}

/// Resolved configuration; feeding it back through config_from_json reproduces the run.
inline nlohmann::json config_to_json(const RunConfig& c) {
    return {{"case", c.case_name},
            {"profile", c.profile},
            {"scenario", to_string(c.scenario_kind())},
            {"pevs_per_station", c.pevs_per_station},
            {"seed", c.seed},
            {"slots", c.slots},
            {"slot_hours", c.slot_hours},
            {"rate_kw", c.resolved_rate()},
            {"efficiency", c.efficiency},
            {"capacity_kwh", c.capacity_kwh},
            {"initial_soc", c.initial_soc},
            {"mode", c.mode},
            {"mu1", c.resolved_mu1()},
            {"mu2", c.mu2},
            {"exponent_L", c.exponent},
            {"epsilon", c.epsilon},
            {"out", c.out},
            {"oracle_cache", c.oracle_cache}};
}

/// Applies the fields present in `j` on top of `base`; unknown keys are errors.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {}) {
    if (!j.is_object()) {
        throw ValidationError("config must be a JSON object");
    }
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "case") {
                base.case_name = v.get<std::string>();
            } else if (key == "profile") {
                base.profile = v.get<std::string>();
            } else if (key == "scenario") {
                base.scenario = scenario_kind_from_string(v.get<std::string>());
            } else if (key == "pevs_per_station") {
                base.pevs_per_station = v.get<int>();
            } else if (key == "seed") {
                base.seed = v.get<std::uint64_t>();
            } else if (key == "slots") {
                base.slots = v.get<int>();
            } else if (key == "slot_hours") {
                base.slot_hours = v.get<double>();
            } else if (key == "rate_kw") {
                base.rate_kw = v.get<double>();
            } else if (key == "efficiency") {
                base.efficiency = v.get<double>();
            } else if (key == "capacity_kwh") {
                base.capacity_kwh = v.get<double>();
            } else if (key == "initial_soc") {
                base.initial_soc = v.get<double>();
            } else if (key == "mode") {
                base.mode = v.get<std::string>();
            } else if (key == "mu1") {
                base.mu1 = v.get<double>();
            } else if (key == "mu2") {
                base.mu2 = v.get<double>();
            } else if (key == "exponent_L") {
                base.exponent = v.get<double>();
            } else if (key == "epsilon") {
                base.epsilon = v.get<double>();
            } else if (key == "out") {
                base.out = v.get<std::string>();
            } else if (key == "oracle_cache") {
                base.oracle_cache = v.get<std::string>();
            } else {
                throw ValidationError("unknown config key: " + key);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config field has the wrong type: ") + e.what());
    }
    return base;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

inline Scenario build_scenario(const RunConfig& c) {
    c.validate();
    GridCase grid = load_case(resolve_case_path(c.case_name));
    const Profile profile = load_profile_csv(resolve_profile_path(c.profile));
    if (c.scenario_kind() == ScenarioKind::toy) {
        return make_toy_scenario(grid, profile, c.seed, c.resolved_rate());
    }
    FleetOptions fo;
    fo.grid.num_slots = c.slots;
    fo.grid.slot_hours = c.slot_hours;
    fo.capacity_kwh = c.capacity_kwh;
    fo.initial_soc = c.initial_soc;
    fo.rate_kw = c.resolved_rate();
    fo.efficiency = c.efficiency;
    auto fleet = build_fleet(grid, c.pevs_per_station, c.seed, fo);
    if (!fleet.rejected.empty()) {
        throw InfeasibleError("fleet has " + std::to_string(fleet.rejected.size()) +
                              " task(s) that cannot finish in their window: " + fleet.rejected.front());
    }
    return make_scenario(std::move(grid), profile, fo.grid, std::move(fleet.tasks));
}

inline EpisodeReport run_episode(const Scenario& sc, const RunConfig& c) {
    auto rep = c.mode == "static" ? run_static(sc, c.mpc_options()) : run_dynamic(sc, c.mpc_options());
    rep.config = config_to_json(c);
    return rep;
}

inline OracleInstance to_oracle_instance(const Scenario& sc) {
    OracleInstance inst;
    inst.grid = sc.grid;
    inst.time = sc.time;
    inst.tasks = sc.tasks;
    inst.loads = sc.loads;
    inst.price = sc.price;
    return inst;
}

/// max_k |a_k - e^{i phi} b_k| with phi aligning the phases at bus 0.
inline double voltage_distance(const CVector& a, const CVector& b) {
    if (a.size() != b.size() || a.size() == 0) {
        throw DomainError("voltage vectors differ in size");
    }
    Complex rot{1.0, 0.0};
    if (std::abs(a(0)) > 0.0 && std::abs(b(0)) > 0.0) {
        rot = (a(0) / std::abs(a(0))) / (b(0) / std::abs(b(0)));
    }
    return (a - rot * b).cwiseAbs().maxCoeff();
}

struct OracleComparison {
    double oracle_cost = 0.0;
    double pipeline_cost = 0.0;
    double relative_gap = 0.0;       // (pipeline - oracle) / |oracle|
    double max_voltage_error = 0.0;  // over slots, p.u.
    double relaxation_bound = 0.0;   // plain relaxation over the full period
    bool same_schedule = false;
    OracleResult oracle;
    EpisodeReport report;
    double oracle_seconds = 0.0;
    double pipeline_seconds = 0.0;
};

/// Runs the oracle and the static two-stage pipeline on the same toy scenario.
inline OracleComparison compare_with_oracle(const Scenario& sc, const MpcOptions& opt,
                                            const std::string& cache_dir = {}) {
    OracleComparison out;
    const auto t0 = std::chrono::steady_clock::now();
    const auto inst = to_oracle_instance(sc);
    out.oracle = cache_dir.empty() ? oracle_solve(inst) : oracle_solve_cached(inst, cache_dir);
    const auto t1 = std::chrono::steady_clock::now();
    out.report = run_static(sc, opt);
    const auto t2 = std::chrono::steady_clock::now();
    out.oracle_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.pipeline_seconds = std::chrono::duration<double>(t2 - t1).count();
    out.oracle_cost = out.oracle.cost;
    out.pipeline_cost = out.report.total_cost();
    out.relative_gap = (out.pipeline_cost - out.oracle_cost) / std::max(1e-12, std::abs(out.oracle_cost));
    out.same_schedule = out.report.schedule.values == out.oracle.tau.values;
    for (int t = 1; t <= sc.time.num_slots; ++t) {
        out.max_voltage_error = std::max(
            out.max_voltage_error, voltage_distance(out.report.slots[t - 1].voltage, out.oracle.slots[t - 1].voltage));
    }
    HorizonProblem hp;
    hp.grid = &sc.grid;
    hp.time = sc.time;
    hp.first_slot = 1;
    hp.last_slot = sc.time.num_slots;
    hp.tasks = sc.tasks;
    for (const auto& t : sc.tasks) {
        hp.remaining_kwh.push_back(t.energy_demand());
    }
    hp.loads = sc.loads;
    hp.price = sc.price;
    const auto model = build_sdr(hp);
    const auto sol = detail::solve_or_throw(model.program, stage_solver_options(), "relaxation bound");
    out.relaxation_bound = extract_point(hp, model, sol).total_cost();
    return out;
}

/// Column order: binary variables, mu1, mu2, stage-1 objective, stage-2 objective, mean step time.
inline void write_summary_table(std::ostream& os, const std::vector<std::pair<std::string, EpisodeReport>>& rows) {
    os << std::left << std::setw(22) << "run" << std::right << std::setw(10) << "binary" << std::setw(10) << "mu1"
       << std::setw(8) << "mu2" << std::setw(16) << "stage1_obj" << std::setw(16) << "stage2_obj" << std::setw(14)
       << "mean_step_s" << '\n';
    for (const auto& [name, rep] : rows) {
        const double mu1 = rep.config.value("mu1", 0.0);
        const double mu2 = rep.config.value("mu2", 0.0);
        os << std::left << std::setw(22) << name << std::right << std::setw(10) << rep.binary_variables
           << std::setw(10) << std::defaultfloat << std::setprecision(4) << mu1 << std::setw(8) << mu2 << std::fixed
           << std::setprecision(3) << std::setw(16) << rep.stage1_objective << std::setw(16) << rep.stage2_objective
           << std::setprecision(4) << std::setw(14) << rep.mean_step_seconds() << std::defaultfloat << '\n';
    }
}

inline void write_summary_csv(std::ostream& os, const std::string& name, const EpisodeReport& rep) {
    os << "run,binary_variables,mu1,mu2,stage1_objective,stage2_objective,mean_step_seconds,total_cost,"
          "generation_cost,charging_cost,fallbacks,all_completed\n";
    os << std::setprecision(12) << name << ',' << rep.binary_variables << ',' << rep.config.value("mu1", 0.0) << ','
       << rep.config.value("mu2", 0.0) << ',' << rep.stage1_objective << ',' << rep.stage2_objective << ','
       << rep.mean_step_seconds() << ',' << rep.total_cost() << ',' << rep.generation_cost << ','
       << rep.charging_cost << ',' << rep.fallback_count << ',' << (rep.all_completed() ? 1 : 0) << '\n';
}

/// Writes report.json, schedule.csv, generation.csv and summary.csv into `dir`.
inline void write_artifacts(const std::string& dir, const GridCase& grid, const EpisodeReport& rep) {
    std::filesystem::create_directories(dir);
    const auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
    std::ofstream(path("report.json")) << std::setw(2) << to_json(rep) << '\n';
    std::ofstream sched(path("schedule.csv"));
    write_schedule_csv(sched, rep);
    std::ofstream gen(path("generation.csv"));
    write_generation_csv(gen, grid, rep);
    std::ofstream summary(path("summary.csv"));
    write_summary_csv(summary, rep.mode, rep);
}

struct ReportComparison {
    double dynamic_cost = 0.0;
    double static_cost = 0.0;
    double gap = 0.0;           // dynamic - static
    double relative_gap = 0.0;  // gap / |static|
    std::vector<double> dynamic_slot_cost;
    std::vector<double> static_slot_cost;
    int dynamic_completed = 0;
    int static_completed = 0;
    int tasks = 0;
};

/// Fields that must agree for two reports to describe the same scenario.
inline constexpr const char* kScenarioKeys[] = {"case",        "profile",      "scenario",    "pevs_per_station",
                                                "seed",        "slots",        "slot_hours",  "rate_kw",
                                                "efficiency",  "capacity_kwh", "initial_soc"};

/// Compares two report JSON documents. Throws ValidationError if their scenarios differ.
inline ReportComparison compare_reports(const nlohmann::json& a, const nlohmann::json& b) {
    for (const auto* key : kScenarioKeys) {
        const auto& ca = a.at("config");
        const auto& cb = b.at("config");
        if (ca.value(key, nlohmann::json()) != cb.value(key, nlohmann::json())) {
            throw ValidationError(std::string("reports come from different scenarios (") + key + " differs)");
        }
    }
    // order as (dynamic, static) when the modes say so
    const bool swap = a.value("mode", "") == "static" && b.value("mode", "") == "dynamic";
    const auto& dyn = swap ? b : a;
    const auto& sta = swap ? a : b;
    ReportComparison r;
    r.dynamic_cost = dyn.at("totals").at("total_cost").get<double>();
    r.static_cost = sta.at("totals").at("total_cost").get<double>();
    r.gap = r.dynamic_cost - r.static_cost;
    r.relative_gap = r.gap / std::max(1e-12, std::abs(r.static_cost));
    for (const auto& s : dyn.at("slots")) {
        r.dynamic_slot_cost.push_back(s.at("generation_cost").get<double>() + s.at("charging_cost").get<double>());
    }
    for (const auto& s : sta.at("slots")) {
        r.static_slot_cost.push_back(s.at("generation_cost").get<double>() + s.at("charging_cost").get<double>());
    }
    for (const auto& t : dyn.at("tasks")) {
        r.dynamic_completed += t.at("completed").get<bool>() ? 1 : 0;
    }
    for (const auto& t : sta.at("tasks")) {
        r.static_completed += t.at("completed").get<bool>() ? 1 : 0;
    }
    r.tasks = static_cast<int>(dyn.at("tasks").size());
    return r;
}

inline void write_comparison(std::ostream& os, const ReportComparison& r) {
    os << std::setprecision(10);
    os << "dynamic total cost: " << r.dynamic_cost << '\n';
    os << "static total cost:  " << r.static_cost << '\n';
    os << "gap (dynamic - static): " << r.gap << " (" << 100.0 * r.relative_gap << " %)\n";
    os << "completed tasks: dynamic " << r.dynamic_completed << '/' << r.tasks << ", static " << r.static_completed
       << '/' << r.tasks << '\n';
    os << "slot,dynamic_cost,static_cost\n";
    const auto n = std::max(r.dynamic_slot_cost.size(), r.static_slot_cost.size());
    for (std::size_t t = 0; t < n; ++t) {
        os << t + 1 << ',' << (t < r.dynamic_slot_cost.size() ? r.dynamic_slot_cost[t] : 0.0) << ','
           << (t < r.static_slot_cost.size() ? r.static_slot_cost[t] : 0.0) << '\n';
    }
}

// ---- invariant checks -------------------------------------------------------

/// Every task delivers at least its demand and overshoots by less than one slot.
inline std::vector<std::string> check_demand_conservation(const Scenario& sc, const EpisodeReport& rep) {
    std::vector<std::string> bad;
    for (const auto& t : rep.tasks) {
        const double slot = t.task.slot_energy(sc.time.slot_hours);
        if (!t.completed() || t.overshoot() >= slot) {
            bad.push_back("task " + std::to_string(t.index) + ": delivered " + std::to_string(t.delivered_kwh) +
                          " kWh for demand " + std::to_string(t.demand_kwh));
        }
        for (int s = 1; s <= rep.schedule.slots(); ++s) {
            if (rep.schedule.at(t.index, s) > 0.5 && !t.task.in_window(s)) {
                bad.push_back("task " + std::to_string(t.index) + " charged outside its window at slot " +
                              std::to_string(s));
            }
        }
    }
    return bad;
}

/// Psi(t) never exceeds the latest departure among tasks known at t.
inline std::vector<std::string> check_horizon_consistency(const Scenario& sc, const EpisodeReport& rep) {
    std::vector<std::string> bad;
    for (const auto& r : rep.slots) {
        int known = r.slot;
        for (const auto& t : sc.tasks) {
            if (t.arrival <= r.slot) {
                known = std::max(known, t.departure);
            }
        }
        if (r.horizon_end > known || r.horizon_end < r.slot) {
            bad.push_back("slot " + std::to_string(r.slot) + ": horizon end " + std::to_string(r.horizon_end));
        }
    }
    return bad;
}

/// Replays the episode with every task arriving after `cut` removed and
/// compares the applied schedules of the surviving tasks over slots 1..cut.
inline bool check_causality(const Scenario& sc, const MpcOptions& opt, int cut, const EpisodeReport& full) {
    Scenario reduced = sc;
    reduced.tasks.clear();
    std::vector<int> kept;
    for (std::size_t i = 0; i < sc.tasks.size(); ++i) {
        if (sc.tasks[i].arrival <= cut) {
            reduced.tasks.push_back(sc.tasks[i]);
            kept.push_back(static_cast<int>(i));
        }
    }
    MpcState st = initial_state(reduced);
    for (int t = 1; t <= cut; ++t) {
        const auto rec = mpc_step(reduced, st, opt);
        if (std::abs(rec.cost() - full.slots[t - 1].cost()) > 1e-9 * (1.0 + std::abs(rec.cost()))) {
            return false;
        }
    }
    for (std::size_t k = 0; k < kept.size(); ++k) {
        for (int t = 1; t <= cut; ++t) {
            if (st.applied.at(static_cast<int>(k), t) != full.schedule.at(kept[k], t)) {
                return false;
            }
        }
    }
    return true;
}

/// Invariant suite over the bundled data. Prints one PASS/FAIL line per check.
inline bool validate_bundled(std::ostream& os) {
    bool all = true;
    const auto report = [&](bool ok, const std::string& what) {
        os << (ok ? "PASS " : "FAIL ") << what << '\n';
        all = all && ok;
    };
    const auto guarded = [&](const std::string& what, const auto& body) {
        try {
            report(body(), what);
        } catch (const std::exception& e) {
            report(false, what + " (" + e.what() + ")");
        }
    };
    for (const auto& entry : std::filesystem::directory_iterator(std::filesystem::path(kDataDir) / "cases")) {
        guarded("case parses: " + entry.path().filename().string(), [&] {
            const auto g = load_case(entry.path().string());
            return g.bus_count() > 0 && g.generator_count() > 0;
        });
    }
    for (const auto& entry : std::filesystem::directory_iterator(std::filesystem::path(kDataDir) / "profiles")) {
        guarded("profile covers 24 slots: " + entry.path().filename().string(), [&] {
            load_profile_csv(entry.path().string()).validate(24);
            return true;
        });
    }
    RunConfig toy;
    toy.case_name = "case3";
    toy.scenario = ScenarioKind::toy;
    guarded("case3 toy: relaxation <= oracle <= pipeline, gap <= 1%", [&] {
        const auto sc = build_scenario(toy);
        const auto cmp = compare_with_oracle(sc, toy.mpc_options());
        const double tol = 1e-6 * (1.0 + std::abs(cmp.oracle_cost));
        return cmp.relaxation_bound <= cmp.oracle_cost + tol && cmp.oracle_cost <= cmp.pipeline_cost + tol &&
               cmp.relative_gap <= 1e-2;
    });
    RunConfig small;
    small.case_name = "case9";
    small.pevs_per_station = 1;
    guarded("case9 dynamic episode: demand conservation, horizon consistency, causality", [&] {
        const auto sc = build_scenario(small);
        const auto rep = run_dynamic(sc, small.mpc_options());
        int cut = 1;
        for (const auto& t : sc.tasks) {
            cut = std::max(cut, t.arrival);
        }
        return check_demand_conservation(sc, rep).empty() && check_horizon_consistency(sc, rep).empty() &&
               check_causality(sc, small.mpc_options(), std::max(1, cut - 1), rep);
    });
    return all;
}

} // namespace evsched

#endif
