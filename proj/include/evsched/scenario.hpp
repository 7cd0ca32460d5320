#ifndef EVSCHED_SCENARIO_HPP
#define EVSCHED_SCENARIO_HPP

// Charging tasks, time slotting, residential profiles and fleet generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "evsched/errors.hpp"
#include "evsched/grid_model.hpp"

namespace evsched {

/// Uniform slotting of the charging period. Slots are numbered 1..num_slots.
struct TimeGrid {
    int num_slots = 24;
    double slot_hours = 0.5;
    double start_hour = 18.0;

    void validate() const {
        if (num_slots < 1) {
            throw DomainError("time grid needs at least one slot");
        }
        if (!(slot_hours > 0.0)) {
            throw DomainError("slot duration must be positive");
        }
    }

    /// Wall-clock hour (mod 24) at which a slot starts.
    double slot_start_hour(int slot) const {
        return std::fmod(start_hour + (slot - 1) * slot_hours, 24.0);
    }
};

/// Number of charging slots needed to cover C(1-s0) at u_h * rate * dt per slot.
inline int required_slots(double capacity_kwh, double initial_soc, double efficiency, double rate_kw,
                          double slot_hours) {
    if (!(rate_kw > 0.0) || !(efficiency > 0.0) || !(slot_hours > 0.0)) {
        throw DomainError("charging rate, efficiency and slot length must be positive");
    }
    if (capacity_kwh < 0.0 || initial_soc < 0.0 || initial_soc > 1.0) {
        throw DomainError("capacity must be >= 0 and initial SOC in [0,1]");
    }
    const double need = capacity_kwh * (1.0 - initial_soc) / (efficiency * rate_kw * slot_hours);
    // absorb representation error so that e.g. 80/10 does not become 9
    return static_cast<int>(std::ceil(need - 1e-9 * std::max(1.0, need)));
}

struct ChargingTask {
    BusId station;
    int pev_index = 0;
    int arrival = 1;    // first slot the PEV is plugged in
    int departure = 1;  // last slot it may charge in
    double capacity_kwh = 100.0;
    double initial_soc = 0.2;
    double rate_kw = 20.0;
    double efficiency = 1.0;
    int required = 0;

    int window_length() const { return departure - arrival + 1; }
    double energy_demand() const { return capacity_kwh * (1.0 - initial_soc); }
    double slot_energy(double slot_hours) const { return efficiency * rate_kw * slot_hours; }
    bool in_window(int slot) const { return slot >= arrival && slot <= departure; }

    friend bool operator==(const ChargingTask&, const ChargingTask&) = default;
};

inline ChargingTask make_task(BusId station, int pev_index, int arrival, int departure,
                              const TimeGrid& grid, double capacity_kwh = 100.0,
                              double initial_soc = 0.2, double rate_kw = 20.0,
                              double efficiency = 1.0) {
    ChargingTask t{station, pev_index, arrival, departure, capacity_kwh, initial_soc, rate_kw, efficiency, 0};
    t.required = required_slots(capacity_kwh, initial_soc, efficiency, rate_kw, grid.slot_hours);
    return t;
}

/// Throws ValidationError if the task is not feasible on the given time grid.
inline void validate_task(const ChargingTask& t, const TimeGrid& grid) {
    const auto name = "task (station " + std::to_string(t.station.value) + ", pev " +
                      std::to_string(t.pev_index) + ")";
    if (t.arrival < 1 || t.departure < t.arrival || t.departure > grid.num_slots) {
        throw ValidationError(name + ": window [" + std::to_string(t.arrival) + ", " +
                              std::to_string(t.departure) + "] outside 1.." +
                              std::to_string(grid.num_slots));
    }
    if (t.required > t.window_length()) {
        throw ValidationError(name + ": needs " + std::to_string(t.required) + " slots but window has " +
                              std::to_string(t.window_length()));
    }
}

/// Per-slot residential load shape and charging price.
struct Profile {
    std::vector<double> load_fraction;  // l(t), dimensionless
    std::vector<double> price;          // beta_t, $/kWh

    int slots() const { return static_cast<int>(load_fraction.size()); }

    void validate(int num_slots) const {
        if (static_cast<int>(load_fraction.size()) < num_slots ||
            static_cast<int>(price.size()) < num_slots) {
            throw DomainError("profile covers fewer slots than the time grid");
        }
        for (int t = 0; t < num_slots; ++t) {
            if (!(load_fraction[t] > 0.0)) {
                throw DomainError("load fraction must be positive at slot " + std::to_string(t + 1));
            }
            if (price[t] < 0.0) {
                throw DomainError("price must be non-negative at slot " + std::to_string(t + 1));
            }
        }
    }
};

/// Flat profile: unit load shape, constant price.
inline Profile flat_profile(int slots, double price) {
    return Profile{std::vector<double>(slots, 1.0), std::vector<double>(slots, price)};
}

/// Reads `slot,load_fraction,price` rows.
inline Profile load_profile_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open profile " + path);
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("slot,load_fraction,price", 0) != 0) {
        throw ParseError(path + ": expected header 'slot,load_fraction,price'");
    }
    Profile p;
    int expected = 1;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
            throw ParseError(path + ": malformed row '" + line + "'");
        }
        try {
            if (std::stoi(a) != expected) {
                throw ParseError(path + ": slots must be consecutive from 1");
            }
            p.load_fraction.push_back(std::stod(b));
            p.price.push_back(std::stod(c));
        } catch (const std::logic_error&) {
            throw ParseError(path + ": non-numeric field in '" + line + "'");
        }
        ++expected;
    }
    return p;
}

/// P_l(t) = l(t) * base * T / sum l, which keeps sum_t P_l(t) = T * base.
inline std::vector<double> scale_load(double base, const Profile& profile, const TimeGrid& grid) {
    grid.validate();
    if (profile.slots() < grid.num_slots) {
        throw DomainError("profile covers fewer slots than the time grid");
    }
    double total = 0.0;
    for (int t = 0; t < grid.num_slots; ++t) {
        total += profile.load_fraction[t];
    }
    if (total == 0.0) {
        throw DomainError("load profile sums to zero");
    }
    std::vector<double> out(grid.num_slots);
    for (int t = 0; t < grid.num_slots; ++t) {
        out[t] = profile.load_fraction[t] * base * grid.num_slots / total;
    }
    return out;
}

/// Arrival-time distribution: normal(mean, sd) truncated to [lo, hi) wall-clock hours.
struct ArrivalModel {
    double mean_hour = 20.0;
    double sd_hours = 1.5;
    double earliest = 18.0;
    double latest = 24.0;
};

/// Raw arrival hours, deterministic given the seed.
inline std::vector<double> sample_arrival_hours(int count, std::uint64_t seed,
                                                const ArrivalModel& model = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(model.mean_hour, model.sd_hours);
    std::vector<double> hours;
    hours.reserve(std::max(count, 0));
    while (static_cast<int>(hours.size()) < count) {
        const double h = normal(rng);
        if (h >= model.earliest && h < model.latest) {
            hours.push_back(h);
        }
    }
    return hours;
}

/// Slot in which an arrival at `hour` first becomes visible (next slot boundary).
inline int arrival_slot(double hour, const TimeGrid& grid) {
    const double offset = (hour - grid.start_hour) / grid.slot_hours;
    const int slot = static_cast<int>(std::ceil(offset - 1e-12)) + 1;
    return std::clamp(slot, 1, grid.num_slots);
}

inline std::vector<int> sample_arrivals(int count, std::uint64_t seed, const TimeGrid& grid = {},
                                        const ArrivalModel& model = {}) {
    std::vector<int> slots;
    for (double h : sample_arrival_hours(count, seed, model)) {
        slots.push_back(arrival_slot(h, grid));
    }
    return slots;
}

struct FleetOptions {
    TimeGrid grid;
    ArrivalModel arrivals;
    double capacity_kwh = 100.0;
    double initial_soc = 0.2;
    double rate_kw = 20.0;
    double efficiency = 1.0;
    int slack_min = 2;  // extra slots beyond the minimum charging time
    int slack_max = 6;
};

struct Fleet {
    std::vector<ChargingTask> tasks;
    std::vector<std::string> rejected;  // one diagnostic per rejected task
};

/// pevs_per_station PEVs at every generator bus, arrivals from the truncated normal.
inline Fleet build_fleet(const GridCase& grid_case, int pevs_per_station, std::uint64_t seed,
                         const FleetOptions& opts = {}) {
    if (pevs_per_station < 0) {
        throw DomainError("pevs_per_station must be >= 0");
    }
    opts.grid.validate();
    const int total = pevs_per_station * static_cast<int>(grid_case.generator_count());
    const auto arrivals = sample_arrivals(total, seed, opts.grid, opts.arrivals);
    std::mt19937_64 slack_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<int> slack(opts.slack_min, opts.slack_max);

    Fleet fleet;
    int next = 0;
    for (const auto& gen : grid_case.generators()) {
        for (int n = 0; n < pevs_per_station; ++n) {
            const int ta = arrivals[next++];
            ChargingTask task = make_task(gen.bus, n + 1, ta, ta, opts.grid, opts.capacity_kwh,
                                          opts.initial_soc, opts.rate_kw, opts.efficiency);
            task.departure = std::min(opts.grid.num_slots, ta + task.required + slack(slack_rng));
            try {
                validate_task(task, opts.grid);
                fleet.tasks.push_back(task);
            } catch (const ValidationError& e) {
                fleet.rejected.emplace_back(e.what());
            }
        }
    }
    return fleet;
}

enum class ScheduleMode { relaxed, binary };

/// tau(task, slot); column j is slot j+1.
struct ChargingSchedule {
    Eigen::MatrixXd values;
    ScheduleMode mode = ScheduleMode::relaxed;

    ChargingSchedule() = default;
    ChargingSchedule(int tasks, int slots, ScheduleMode m = ScheduleMode::relaxed)
        : values(Eigen::MatrixXd::Zero(tasks, slots)), mode(m) {}

    double& at(int task, int slot) { return values(task, slot - 1); }
    double at(int task, int slot) const { return values(task, slot - 1); }
    int tasks() const { return static_cast<int>(values.rows()); }
    int slots() const { return static_cast<int>(values.cols()); }

    /// max |tau - round(tau)|
    double binary_violation() const {
        double v = 0.0;
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            const double x = values.data()[i];
            v = std::max(v, std::abs(x - std::round(x)));
        }
        return v;
    }
};

/// Checks window support, [0,1] range and, in binary mode, exact per-task totals.
inline void validate_schedule(const ChargingSchedule& s, const std::vector<ChargingTask>& tasks) {
    if (s.tasks() != static_cast<int>(tasks.size())) {
        throw ValidationError("schedule row count does not match task count");
    }
    for (int i = 0; i < s.tasks(); ++i) {
        double sum = 0.0;
        for (int t = 1; t <= s.slots(); ++t) {
            const double x = s.at(i, t);
            if (x < -1e-12 || x > 1.0 + 1e-12) {
                throw ValidationError("schedule value outside [0,1]");
            }
            if (!tasks[i].in_window(t) && x != 0.0) {
                throw ValidationError("task " + std::to_string(i) + " scheduled outside its window at slot " +
                                      std::to_string(t));
            }
            if (s.mode == ScheduleMode::binary && x != 0.0 && x != 1.0) {
                throw ValidationError("binary schedule holds a fractional value");
            }
            sum += x;
        }
        if (s.mode == ScheduleMode::binary && static_cast<int>(sum) != tasks[i].required) {
            throw ValidationError("task " + std::to_string(i) + " receives " + std::to_string(sum) +
                                  " slots, needs " + std::to_string(tasks[i].required));
        }
    }
}

// --- fleet JSON --------------------------------------------------------------

inline nlohmann::json task_to_json(const ChargingTask& t) {
    return {{"station", t.station.value}, {"pev_index", t.pev_index},     {"arrival", t.arrival},
            {"departure", t.departure},   {"capacity_kwh", t.capacity_kwh}, {"initial_soc", t.initial_soc},
            {"rate_kw", t.rate_kw},       {"efficiency", t.efficiency},   {"required_slots", t.required}};
}

inline ChargingTask task_from_json(const nlohmann::json& j, const TimeGrid& grid) {
    using detail::require;
    const std::string where = "fleet task";
    auto t = make_task(BusId{require<int>(j, "station", where)}, require<int>(j, "pev_index", where),
                       require<int>(j, "arrival", where), require<int>(j, "departure", where), grid,
                       require<double>(j, "capacity_kwh", where), require<double>(j, "initial_soc", where),
                       require<double>(j, "rate_kw", where), require<double>(j, "efficiency", where));
    if (j.contains("required_slots") && j.at("required_slots").get<int>() != t.required) {
        throw ValidationError("fleet task: required_slots disagrees with capacity/rate");
    }
    return t;
}

inline nlohmann::json fleet_to_json(const std::vector<ChargingTask>& tasks) {
    auto arr = nlohmann::json::array();
    for (const auto& t : tasks) {
        arr.push_back(task_to_json(t));
    }
    return arr;
}

inline std::vector<ChargingTask> fleet_from_json(const nlohmann::json& j, const TimeGrid& grid) {
    if (!j.is_array()) {
        throw ParseError("fleet: expected an array of tasks");
    }
    std::vector<ChargingTask> out;
    for (const auto& item : j) {
        out.push_back(task_from_json(item, grid));
        validate_task(out.back(), grid);
    }
    return out;
}

} // namespace evsched

#endif
