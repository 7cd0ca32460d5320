#ifndef EVSCHED_MPC_CONTROLLER_HPP
#define EVSCHED_MPC_CONTROLLER_HPP

// Rolling-horizon scheduling. At slot t only the PEVs already connected are
// known; the two-stage method is solved over [t, Psi(t)] and only the slot-t
// controls are applied. The static counterpart solves one problem over the
// whole period with the full fleet known in advance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsched/grid_model.hpp"
#include "evsched/hermitian.hpp"
#include "evsched/opf_relaxation.hpp"
#include "evsched/scenario.hpp"
#include "evsched/stage1_binary.hpp"
#include "evsched/stage2_rank1.hpp"

namespace evsched {

/// Everything an episode needs: network, time grid, fleet and exogenous series.
struct Scenario {
    GridCase grid;
    TimeGrid time;
    std::vector<ChargingTask> tasks;
    LoadSeries loads;
    std::vector<double> price;  // $/kWh per slot

    void validate() const {
        time.validate();
        if (static_cast<int>(price.size()) < time.num_slots || static_cast<int>(loads.p.size()) < time.num_slots) {
            throw ValidationError("price or load series shorter than the time grid");
        }
        for (const auto& t : tasks) {
            validate_task(t, time);
            if (!grid.has_bus(t.station)) {
                throw ValidationError("task station " + std::to_string(t.station.value) + " is not a bus");
            }
        }
    }
};

inline Scenario make_scenario(GridCase grid, const Profile& profile, const TimeGrid& time,
                              std::vector<ChargingTask> tasks) {
    profile.validate(time.num_slots);
    Scenario sc;
    sc.loads = slot_loads(grid, profile, time);
    sc.price.assign(profile.price.begin(), profile.price.begin() + time.num_slots);
    sc.grid = std::move(grid);
    sc.time = time;
    sc.tasks = std::move(tasks);
    sc.validate();
    return sc;
}

/// Seeded toy scenario on a small network: 2 PEVs at the non-reference buses,
/// 4 to 6 slots, rates large enough to move the dispatch.
inline Scenario make_toy_scenario(const GridCase& grid, const Profile& profile, std::uint64_t seed,
                                  double rate_kw = 10000.0) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    TimeGrid time;
    time.num_slots = uniform(4, 6);
    std::vector<BusId> stations;
    for (std::size_t k = 1; k < grid.bus_count(); ++k) {
        stations.push_back(grid.buses()[k].id);
    }
    if (stations.empty()) {
        stations.push_back(grid.buses().front().id);
    }
    std::vector<ChargingTask> tasks;
    for (int n = 0; n < 2; ++n) {
        const int need = uniform(1, 2);
        const int arrival = uniform(1, time.num_slots - need + 1);
        const int departure = std::min(time.num_slots, arrival + need - 1 + uniform(0, 2));
        const double capacity = need * rate_kw * time.slot_hours;
        tasks.push_back(make_task(stations[n % stations.size()], n + 1, arrival, departure, time, capacity, 0.0,
                                  rate_kw));
    }
    return make_scenario(grid, profile, time, std::move(tasks));
}

struct MpcOptions {
    Stage1Options stage1;
    Stage2Options stage2;
    double completion_tol = 1e-9;  // kWh
};

struct MpcState {
    int slot = 1;
    std::vector<double> remaining_kwh;
    std::vector<double> delivered_kwh;
    std::vector<int> completion_slot;  // 0 until complete
    ChargingSchedule applied;          // binary, full period
    double cumulative_cost = 0.0;
};

inline MpcState initial_state(const Scenario& sc) {
    MpcState st;
    for (const auto& t : sc.tasks) {
        st.remaining_kwh.push_back(t.energy_demand());
    }
    st.delivered_kwh.assign(sc.tasks.size(), 0.0);
    st.completion_slot.assign(sc.tasks.size(), 0);
    st.applied = ChargingSchedule(static_cast<int>(sc.tasks.size()), sc.time.num_slots, ScheduleMode::binary);
    return st;
}

/// C(t): connected tasks with demand left.
inline std::vector<std::size_t> connected_set(const Scenario& sc, const MpcState& st, double tol = 1e-9) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < sc.tasks.size(); ++i) {
        if (sc.tasks[i].in_window(st.slot) && st.remaining_kwh[i] > tol) {
            out.push_back(i);
        }
    }
    return out;
}

/// Psi(t): latest departure in C(t), or t when nobody is connected.
inline int horizon_end(const Scenario& sc, const MpcState& st, const std::vector<std::size_t>& connected) {
    int end = st.slot;
    for (auto i : connected) {
        end = std::max(end, sc.tasks[i].departure);
    }
    return end;
}

struct SlotRecord {
    int slot = 0;
    int horizon_end = 0;
    std::vector<int> connected;  // task indices in C(t)
    std::vector<int> charging;   // task indices charged at t
    int binary_variables = 0;    // tau variables in the horizon problem
    double generation_cost = 0.0;
    double charging_cost = 0.0;
    std::vector<double> pg;  // p.u. per generator
    std::vector<double> qg;
    CVector voltage;
    double rank_residual = 0.0;  // relative, applied slot
    double balance_residual = 0.0;
    // stage diagnostics
    double stage1_objective = 0.0;         // relaxed cost of the applied slot
    double stage2_objective = 0.0;         // stage-2 cost of the applied slot
    double stage1_window_objective = 0.0;  // relaxed cost over the horizon
    double stage2_window_objective = 0.0;  // stage-2 cost over the horizon
    int stage1_iterations = 0;
    int stage2_iterations = 0;
    double stage1_binary_violation = 0.0;  // before rounding
    bool stage1_converged = true;
    bool stage1_monotone = true;
    bool stage2_converged = true;
    bool stage2_monotone = true;
    bool fallback = false;
    bool angle_limits_shed = false;
    double angle_violation = 0.0;  // rad beyond the limit, when shed
    double seconds = 0.0;
    std::vector<Stage1Iterate> stage1_trace;
    std::vector<Stage2Iterate> stage2_trace;
    std::vector<std::string> diagnostics;

    double cost() const { return generation_cost + charging_cost; }
};

struct TaskRecord {
    int index = 0;
    ChargingTask task;
    double demand_kwh = 0.0;
    double delivered_kwh = 0.0;
    int completion_slot = 0;

    bool completed() const { return delivered_kwh >= demand_kwh - 1e-9; }
    double overshoot() const { return delivered_kwh - demand_kwh; }
};

struct EpisodeReport {
    std::string mode;
    std::vector<SlotRecord> slots;
    std::vector<TaskRecord> tasks;
    ChargingSchedule schedule;
    double generation_cost = 0.0;
    double charging_cost = 0.0;
    double stage1_objective = 0.0;
    double stage2_objective = 0.0;
    int binary_variables = 0;
    double total_seconds = 0.0;
    int fallback_count = 0;
    std::vector<std::string> diagnostics;
    nlohmann::json config;

    double total_cost() const { return generation_cost + charging_cost; }
    double mean_step_seconds() const { return slots.empty() ? 0.0 : total_seconds / slots.size(); }
    bool all_completed() const {
        return std::all_of(tasks.begin(), tasks.end(), [](const TaskRecord& t) { return t.completed(); });
    }
};

/// Largest |theta_k - theta_m| - theta_max over lines; 0 when all limits hold.
inline double angle_violation(const GridCase& grid, const CVector& v) {
    double worst = 0.0;
    for (std::size_t l = 0; l < grid.lines().size(); ++l) {
        const auto& line = grid.lines()[l];
        const Complex a = v(static_cast<Eigen::Index>(grid.index_of(line.from)));
        const Complex b = v(static_cast<Eigen::Index>(grid.index_of(line.to)));
        worst = std::max(worst, std::abs(std::arg(a * std::conj(b))) - grid.line_theta_max(l));
    }
    return worst;
}

namespace detail {

/// Nonincreasing up to 1e-8 relative slack.
template <class Seq>
bool monotone(const Seq& trace) {
    for (std::size_t k = 1; k < trace.size(); ++k) {
        const double prev = trace[k - 1].objective;
        if (trace[k].objective > prev + 1e-8 * (1.0 + std::abs(prev))) {
            return false;
        }
    }
    return true;
}

inline HorizonProblem horizon_problem(const Scenario& sc, const std::vector<ChargingTask>& tasks,
                                      const std::vector<double>& remaining, int first, int last) {
    HorizonProblem hp;
    hp.grid = &sc.grid;
    hp.time = sc.time;
    hp.first_slot = first;
    hp.last_slot = last;
    hp.tasks = tasks;
    hp.remaining_kwh = remaining;
    hp.loads = sc.loads;
    hp.price = sc.price;
    return hp;
}

inline int count_binary_variables(const HorizonProblem& hp) {
    int n = 0;
    for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
        const auto [lo, hi] = hp.task_window(i);
        n += std::max(0, hi - lo + 1);
    }
    return n;
}

/// Fills the per-slot physical fields from a stage-2 result at window offset `off`.
inline void fill_slot(const Scenario& sc, const HorizonProblem& hp, const Stage2Result& s2, int off,
                      const ChargingSchedule& tau, SlotRecord& rec) {
    const int slot = hp.first_slot + off;
    rec.generation_cost = s2.point.generation_cost[off];
    rec.charging_cost = s2.point.charging_cost[off];
    rec.pg = s2.point.pg[off];
    rec.qg = s2.point.qg[off];
    rec.voltage = s2.voltages[off];
    rec.rank_residual = s2.relative_residual(off);
    rec.balance_residual =
        recovered_balance_residual(sc.grid, rec.voltage, rec.pg, rec.qg, sc.loads.p[slot - 1], sc.loads.q[slot - 1],
                                   pev_draw_by_bus(sc.grid, hp.tasks, tau, slot));
}

} // namespace detail

/// One MPC step: solve over [t, Psi(t)], apply slot t, advance the state.
inline SlotRecord mpc_step(const Scenario& sc, MpcState& st, const MpcOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const int t = st.slot;
    if (t < 1 || t > sc.time.num_slots) {
        throw DomainError("mpc_step past the end of the period");
    }
    SlotRecord rec;
    rec.slot = t;
    const auto conn = connected_set(sc, st, opt.completion_tol);
    rec.horizon_end = horizon_end(sc, st, conn);
    std::vector<ChargingTask> tasks;
    std::vector<double> remaining;
    for (auto i : conn) {
        rec.connected.push_back(static_cast<int>(i));
        tasks.push_back(sc.tasks[i]);
        remaining.push_back(st.remaining_kwh[i]);
    }
    HorizonProblem hp = detail::horizon_problem(sc, tasks, remaining, t, rec.horizon_end);
    rec.binary_variables = detail::count_binary_variables(hp);

    ChargingSchedule tau(static_cast<int>(tasks.size()), sc.time.num_slots, ScheduleMode::binary);
    try {
        if (!tasks.empty()) {
            const auto s1 = stage1_solve(hp, opt.stage1);
            tau = s1.binary;
            rec.stage1_objective = s1.point.generation_cost[0] + s1.point.charging_cost[0];
            rec.stage1_window_objective = s1.trace.back().cost;
            rec.stage1_iterations = static_cast<int>(s1.trace.size()) - 1;
            rec.stage1_binary_violation = s1.trace.back().binary_violation;
            rec.stage1_converged = s1.converged;
            rec.stage1_monotone = detail::monotone(s1.trace);
            rec.stage1_trace = s1.trace;
            rec.diagnostics.insert(rec.diagnostics.end(), s1.diagnostics.begin(), s1.diagnostics.end());
        }
        auto s2opt = opt.stage2;
        s2opt.penalize_all_slots = false;
        const auto s2 = stage2_solve(hp, tau, s2opt);
        rec.stage2_objective = s2.point.generation_cost[0] + s2.point.charging_cost[0];
        rec.stage2_window_objective = s2.trace.back().cost;
        rec.stage2_iterations = static_cast<int>(s2.trace.size()) - 1;
        rec.stage2_converged = s2.converged;
        rec.stage2_monotone = detail::monotone(s2.trace);
        rec.stage2_trace = s2.trace;
        rec.diagnostics.insert(rec.diagnostics.end(), s2.diagnostics.begin(), s2.diagnostics.end());
        detail::fill_slot(sc, hp, s2, 0, tau, rec);
        if (tasks.empty()) {
            // nothing to schedule: stage 1 reduces to the plain relaxation
            rec.stage1_objective = rec.stage2_objective;
            rec.stage1_window_objective = s2.trace.front().cost;
        }
    } catch (const Error& e) {
        // urgency fallback: charge exactly the deadline-critical tasks at t,
        // solve the single slot with the angle limits shed
        rec.fallback = true;
        rec.diagnostics.push_back(std::string("horizon solve failed (") + e.what() +
                                  "); urgency fallback on deadline-critical tasks");
        std::vector<ChargingTask> single = tasks;
        tau = ChargingSchedule(static_cast<int>(tasks.size()), sc.time.num_slots, ScheduleMode::binary);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const int left = tasks[i].departure - t + 1;
            if (hp.remaining_slots(i) >= left) {
                tau.at(static_cast<int>(i), t) = 1.0;
            }
            single[i].departure = t;
            single[i].arrival = std::min(single[i].arrival, t);
        }
        HorizonProblem one = detail::horizon_problem(sc, single, remaining, t, t);
        auto s2opt = opt.stage2;
        s2opt.penalize_all_slots = true;
        std::optional<Stage2Result> s2;
        try {
            s2 = stage2_solve(one, tau, s2opt);
        } catch (const Error&) {
            one.angle_constraints = false;
            s2 = stage2_solve(one, tau, s2opt);  // propagates if still infeasible
            rec.angle_limits_shed = true;
        }
        rec.stage1_objective = rec.stage2_objective = s2->point.generation_cost[0] + s2->point.charging_cost[0];
        rec.stage1_window_objective = rec.stage2_window_objective = rec.stage2_objective;
        rec.stage2_converged = s2->converged;
        rec.stage2_trace = s2->trace;
        detail::fill_slot(sc, one, *s2, 0, tau, rec);
        if (rec.angle_limits_shed) {
            rec.angle_violation = angle_violation(sc.grid, rec.voltage);
            rec.diagnostics.push_back("angle limits shed; worst excess " + std::to_string(rec.angle_violation) +
                                      " rad");
        }
    }

    // apply slot t
    for (std::size_t k = 0; k < conn.size(); ++k) {
        if (tau.at(static_cast<int>(k), t) > 0.5) {
            const auto i = conn[k];
            const double e = sc.tasks[i].slot_energy(sc.time.slot_hours);
            rec.charging.push_back(static_cast<int>(i));
            st.applied.at(static_cast<int>(i), t) = 1.0;
            st.delivered_kwh[i] += e;
            st.remaining_kwh[i] -= e;
            if (st.remaining_kwh[i] <= opt.completion_tol && st.completion_slot[i] == 0) {
                st.completion_slot[i] = t;
            }
        }
    }
    st.cumulative_cost += rec.cost();
    ++st.slot;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

/// Assembles a report from the slots run so far; also used for partial episodes.
inline EpisodeReport make_report(const Scenario& sc, const MpcState& st, std::string mode,
                                 std::vector<SlotRecord> slots) {
    EpisodeReport rep;
    rep.mode = std::move(mode);
    rep.schedule = st.applied;
    for (const auto& r : slots) {
        rep.generation_cost += r.generation_cost;
        rep.charging_cost += r.charging_cost;
        rep.binary_variables += r.binary_variables;
        rep.total_seconds += r.seconds;
        rep.fallback_count += r.fallback ? 1 : 0;
        rep.stage1_objective += r.stage1_objective;
        rep.stage2_objective += r.stage2_objective;
        for (const auto& d : r.diagnostics) {
            rep.diagnostics.push_back("slot " + std::to_string(r.slot) + ": " + d);
        }
    }
    rep.slots = std::move(slots);
    for (std::size_t i = 0; i < sc.tasks.size(); ++i) {
        TaskRecord tr;
        tr.index = static_cast<int>(i);
        tr.task = sc.tasks[i];
        tr.demand_kwh = sc.tasks[i].energy_demand();
        tr.delivered_kwh = st.delivered_kwh[i];
        tr.completion_slot = st.completion_slot[i];
        if (!tr.completed()) {
            rep.diagnostics.push_back("task " + std::to_string(i) + " incomplete at departure");
        }
        rep.tasks.push_back(tr);
    }
    return rep;
}

/// Rolling-horizon episode over slots 1..T.
inline EpisodeReport run_dynamic(const Scenario& sc, const MpcOptions& opt = {}) {
    sc.validate();
    MpcState st = initial_state(sc);
    std::vector<SlotRecord> slots;
    while (st.slot <= sc.time.num_slots) {
        slots.push_back(mpc_step(sc, st, opt));
    }
    return make_report(sc, st, "dynamic", std::move(slots));
}

/// Full-information counterpart: one two-stage solve over [1, T].
inline EpisodeReport run_static(const Scenario& sc, const MpcOptions& opt = {}) {
    sc.validate();
    const auto t0 = std::chrono::steady_clock::now();
    MpcState st = initial_state(sc);
    HorizonProblem hp = detail::horizon_problem(sc, sc.tasks, st.remaining_kwh, 1, sc.time.num_slots);

    ChargingSchedule tau(static_cast<int>(sc.tasks.size()), sc.time.num_slots, ScheduleMode::binary);
    Stage1Result s1;
    const bool have_tasks = !sc.tasks.empty();
    if (have_tasks) {
        s1 = stage1_solve(hp, opt.stage1);
        tau = s1.binary;
    }
    auto s2opt = opt.stage2;
    s2opt.penalize_all_slots = true;
    const auto s2 = stage2_solve(hp, tau, s2opt);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<SlotRecord> slots;
    for (int t = 1; t <= sc.time.num_slots; ++t) {
        SlotRecord rec;
        rec.slot = t;
        rec.horizon_end = sc.time.num_slots;
        const int off = t - 1;
        for (std::size_t i = 0; i < sc.tasks.size(); ++i) {
            if (sc.tasks[i].in_window(t) && st.remaining_kwh[i] > opt.completion_tol) {
                rec.connected.push_back(static_cast<int>(i));
            }
            if (tau.at(static_cast<int>(i), t) > 0.5) {
                const double e = sc.tasks[i].slot_energy(sc.time.slot_hours);
                rec.charging.push_back(static_cast<int>(i));
                st.applied.at(static_cast<int>(i), t) = 1.0;
                st.delivered_kwh[i] += e;
                st.remaining_kwh[i] -= e;
                if (st.remaining_kwh[i] <= opt.completion_tol && st.completion_slot[i] == 0) {
                    st.completion_slot[i] = t;
                }
            }
        }
        detail::fill_slot(sc, hp, s2, off, tau, rec);
        rec.stage2_objective = rec.cost();
        rec.stage1_objective =
            have_tasks ? s1.point.generation_cost[off] + s1.point.charging_cost[off] : rec.stage2_objective;
        slots.push_back(std::move(rec));
    }
    slots.front().binary_variables = detail::count_binary_variables(hp);
    slots.front().seconds = elapsed;
    auto rep = make_report(sc, st, "static", std::move(slots));
    rep.stage1_objective = have_tasks ? s1.trace.back().cost : s2.trace.front().cost;
    rep.stage2_objective = s2.trace.back().cost;
    auto& first = rep.slots.front();
    first.stage1_window_objective = rep.stage1_objective;
    first.stage2_window_objective = rep.stage2_objective;
    if (have_tasks) {
        first.stage1_iterations = static_cast<int>(s1.trace.size()) - 1;
        first.stage1_binary_violation = s1.trace.back().binary_violation;
        first.stage1_converged = s1.converged;
        first.stage1_monotone = detail::monotone(s1.trace);
        first.stage1_trace = s1.trace;
        for (const auto& d : s1.diagnostics) {
            rep.diagnostics.push_back(d);
        }
    }
    first.stage2_iterations = static_cast<int>(s2.trace.size()) - 1;
    first.stage2_converged = s2.converged;
    first.stage2_monotone = detail::monotone(s2.trace);
    first.stage2_trace = s2.trace;
    for (const auto& d : s2.diagnostics) {
        rep.diagnostics.push_back(d);
    }
    return rep;
}

inline nlohmann::json to_json(const Stage1Iterate& it) {
    return {{"kappa", it.kappa},         {"objective", it.objective}, {"cost", it.cost},
            {"penalty", it.penalty},     {"g", it.g},                 {"g_lin", it.g_lin},
            {"binary_violation", it.binary_violation}, {"solver_iterations", it.solver_iterations}};
}

inline nlohmann::json to_json(const Stage2Iterate& it) {
    return {{"kappa", it.kappa},
            {"objective", it.objective},
            {"cost", it.cost},
            {"surrogate", it.surrogate},
            {"max_surrogate", it.max_surrogate},
            {"max_relative_residual", it.max_relative_residual},
            {"solver_iterations", it.solver_iterations}};
}

inline nlohmann::json to_json(const SlotRecord& r) {
    nlohmann::json j;
    j["slot"] = r.slot;
    j["horizon_end"] = r.horizon_end;
    j["connected"] = r.connected;
    j["charging"] = r.charging;
    j["binary_variables"] = r.binary_variables;
    j["generation_cost"] = r.generation_cost;
    j["charging_cost"] = r.charging_cost;
    j["pg"] = r.pg;
    j["qg"] = r.qg;
    auto& v = j["voltage"] = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.voltage.size(); ++k) {
        v.push_back({r.voltage(k).real(), r.voltage(k).imag()});
    }
    j["rank_residual"] = r.rank_residual;
    j["balance_residual"] = r.balance_residual;
    j["stage1"] = {{"objective", r.stage1_objective},
                   {"window_objective", r.stage1_window_objective},
                   {"iterations", r.stage1_iterations},
                   {"binary_violation", r.stage1_binary_violation},
                   {"converged", r.stage1_converged},
                   {"monotone", r.stage1_monotone},
                   {"trace", nlohmann::json::array()}};
    for (const auto& it : r.stage1_trace) {
        j["stage1"]["trace"].push_back(to_json(it));
    }
    j["stage2"] = {{"objective", r.stage2_objective},
                   {"window_objective", r.stage2_window_objective},
                   {"iterations", r.stage2_iterations},
                   {"converged", r.stage2_converged},
                   {"monotone", r.stage2_monotone},
                   {"trace", nlohmann::json::array()}};
    for (const auto& it : r.stage2_trace) {
        j["stage2"]["trace"].push_back(to_json(it));
    }
    j["fallback"] = r.fallback;
    j["angle_limits_shed"] = r.angle_limits_shed;
    j["angle_violation"] = r.angle_violation;
    j["seconds"] = r.seconds;
    j["diagnostics"] = r.diagnostics;
    return j;
}

inline nlohmann::json to_json(const EpisodeReport& rep) {
    nlohmann::json j;
    j["mode"] = rep.mode;
    j["config"] = rep.config;
    j["totals"] = {{"total_cost", rep.total_cost()},
                   {"generation_cost", rep.generation_cost},
                   {"charging_cost", rep.charging_cost},
                   {"stage1_objective", rep.stage1_objective},
                   {"stage2_objective", rep.stage2_objective},
                   {"binary_variables", rep.binary_variables},
                   {"total_seconds", rep.total_seconds},
                   {"mean_step_seconds", rep.mean_step_seconds()},
                   {"fallback_count", rep.fallback_count},
                   {"all_completed", rep.all_completed()}};
    j["slots"] = nlohmann::json::array();
    for (const auto& r : rep.slots) {
        j["slots"].push_back(to_json(r));
    }
    j["tasks"] = nlohmann::json::array();
    for (const auto& t : rep.tasks) {
        j["tasks"].push_back({{"index", t.index},
                              {"task", task_to_json(t.task)},
                              {"demand_kwh", t.demand_kwh},
                              {"delivered_kwh", t.delivered_kwh},
                              {"completion_slot", t.completion_slot},
                              {"completed", t.completed()}});
    }
    j["diagnostics"] = rep.diagnostics;
    return j;
}

/// task,station,pev,slot_1..slot_T with 0/1 entries.
inline void write_schedule_csv(std::ostream& os, const EpisodeReport& rep) {
    os << "task,station,pev";
    for (int s = 1; s <= rep.schedule.slots(); ++s) {
        os << ",slot_" << s;
    }
    os << '\n';
    for (const auto& t : rep.tasks) {
        os << t.index << ',' << t.task.station.value << ',' << t.task.pev_index;
        for (int s = 1; s <= rep.schedule.slots(); ++s) {
            os << ',' << (rep.schedule.at(t.index, s) > 0.5 ? 1 : 0);
        }
        os << '\n';
    }
}

/// slot,bus,p_mw,q_mvar,v_mag,v_angle_deg; P and Q are generator output at the bus.
inline void write_generation_csv(std::ostream& os, const GridCase& grid, const EpisodeReport& rep) {
    os << "slot,bus,p_mw,q_mvar,v_mag,v_angle_deg\n";
    os << std::setprecision(10);
    for (const auto& r : rep.slots) {
        for (std::size_t k = 0; k < grid.bus_count(); ++k) {
            double p = 0.0;
            double q = 0.0;
            if (const auto g = grid.generator_at(k)) {
                p = r.pg[*g] * grid.base_mva();
                q = r.qg[*g] * grid.base_mva();
            }
            const Complex v = r.voltage(static_cast<Eigen::Index>(k));
            os << r.slot << ',' << grid.buses()[k].id.value << ',' << p << ',' << q << ',' << std::abs(v) << ','
               << std::arg(v) * 180.0 / std::numbers::pi << '\n';
        }
    }
}

} // namespace evsched

#endif
