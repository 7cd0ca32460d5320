#ifndef EVSCHED_OPF_RELAXATION_HPP
#define EVSCHED_OPF_RELAXATION_HPP

// Gram-matrix relaxation of the per-horizon joint charging / dispatch problem.
// One Hermitian block W(t') = V V^H per slot; the power-flow equations become
// linear in W, and dropping rank(W) = 1 leaves a conic program.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evsched/grid_model.hpp"
#include "evsched/hermitian.hpp"
#include "evsched/scenario.hpp"
#include "evsched/sdp_solver.hpp"

namespace evsched {

/// Per-slot, per-bus residential demand in p.u. Indexed [slot - 1][bus index].
struct LoadSeries {
    std::vector<std::vector<double>> p;
    std::vector<std::vector<double>> q;
};

/// Scales every bus's base load by the profile shape.
inline LoadSeries slot_loads(const GridCase& grid, const Profile& profile, const TimeGrid& time) {
    LoadSeries out;
    out.p.assign(time.num_slots, std::vector<double>(grid.bus_count(), 0.0));
    out.q = out.p;
    for (std::size_t k = 0; k < grid.bus_count(); ++k) {
        const auto& bus = grid.buses()[k];
        const auto p = scale_load(bus.base_load_p, profile, time);
        const auto q = scale_load(bus.base_load_q, profile, time);
        for (int t = 0; t < time.num_slots; ++t) {
            out.p[t][k] = p[t];
            out.q[t][k] = q[t];
        }
    }
    return out;
}

/// PEV draw in p.u. for a rate given in kW.
inline double pev_power_pu(const ChargingTask& task, const GridCase& grid) {
    return task.rate_kw / 1000.0 / grid.base_mva();
}

struct HorizonProblem {
    const GridCase* grid = nullptr;
    TimeGrid time;
    int first_slot = 1;  // t
    int last_slot = 1;   // Psi(t)
    std::vector<ChargingTask> tasks;     // C(t)
    std::vector<double> remaining_kwh;   // remaining demand per task at first_slot
    LoadSeries loads;                    // full-period series
    std::vector<double> price;           // $/kWh per slot (size num_slots)
    bool relax_binary = true;            // tau in [0,1]
    bool enforce_slot_count = false;     // sum_t tau = remaining required slots
    bool angle_constraints = true;
    std::optional<ChargingSchedule> fixed_tau;  // substitutes tau when present

    int window_length() const { return last_slot - first_slot + 1; }

    /// Slots still needed by task i to cover its remaining demand.
    int remaining_slots(std::size_t i) const {
        const auto& t = tasks[i];
        const double per_slot = t.slot_energy(time.slot_hours);
        const double need = remaining_kwh[i] / per_slot;
        return std::max(0, static_cast<int>(std::ceil(need - 1e-9 * std::max(1.0, need))));
    }

    /// Charging slots available to task i inside the window.
    std::pair<int, int> task_window(std::size_t i) const {
        return {std::max(first_slot, tasks[i].arrival), std::min(last_slot, tasks[i].departure)};
    }

    void validate() const {
        if (grid == nullptr) {
            throw DomainError("horizon problem has no grid");
        }
        time.validate();
        if (first_slot < 1 || last_slot < first_slot || last_slot > time.num_slots) {
            throw DomainError("horizon window is empty or outside the time grid");
        }
        if (remaining_kwh.size() != tasks.size()) {
            throw DomainError("remaining demand list does not match the task list");
        }
        if (static_cast<int>(price.size()) < time.num_slots ||
            static_cast<int>(loads.p.size()) < time.num_slots) {
            throw DomainError("price or load series shorter than the time grid");
        }
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].departure > last_slot) {
                throw DomainError("task departs after the horizon end");
            }
        }
        if (fixed_tau) {
            if (fixed_tau->tasks() != static_cast<int>(tasks.size()) || fixed_tau->slots() != time.num_slots) {
                throw DomainError("fixed schedule has the wrong shape");
            }
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                for (int s = 1; s <= time.num_slots; ++s) {
                    const double v = fixed_tau->at(static_cast<int>(i), s);
                    if (v != 0.0 && v != 1.0) {
                        throw DomainError("fixed schedule must be binary");
                    }
                    if (v != 0.0 && (s < task_window(i).first || s > task_window(i).second)) {
                        throw DomainError("fixed schedule charges outside a task window");
                    }
                }
            }
        }
    }
};

/// Assembled relaxation with the indices needed to read solutions back.
struct SdrModel {
    ConicProgram program;
    int first_slot = 1;
    int last_slot = 1;
    std::vector<int> w_block;                 // per window slot
    std::vector<std::vector<int>> pg_var;     // [slot offset][gen]
    std::vector<std::vector<int>> qg_var;
    std::vector<std::vector<int>> tau_var;    // [task][slot offset], -1 outside window
    std::vector<AffineExpr> generation_cost;  // per window slot, $ (quadratic part via epigraph blocks)
    std::vector<AffineExpr> charging_cost;    // per window slot, $
    std::vector<std::string> diagnostics;

    int slot_offset(int slot) const { return slot - first_slot; }
};

/// Builds the relaxation of the horizon problem (rank and integrality dropped).
inline SdrModel build_sdr(const HorizonProblem& hp) {
    hp.validate();
    const GridCase& grid = *hp.grid;
    const int n = static_cast<int>(grid.bus_count());
    const int len = hp.window_length();
    const double dt = hp.time.slot_hours;

    SdrModel model;
    model.first_slot = hp.first_slot;
    model.last_slot = hp.last_slot;
    auto& prog = model.program;

    model.tau_var.assign(hp.tasks.size(), std::vector<int>(len, -1));
    std::vector<char> active(hp.tasks.size(), 1);
    for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
        const auto [lo, hi] = hp.task_window(i);
        if (hi < hp.first_slot) {
            active[i] = 0;
            model.diagnostics.push_back("task " + std::to_string(i) + " departed before slot " +
                                        std::to_string(hp.first_slot) + "; excluded");
            continue;
        }
        if (hp.fixed_tau) {
            continue;
        }
        for (int s = lo; s <= hi; ++s) {
            model.tau_var[i][s - hp.first_slot] =
                prog.add_variable(0.0, 1.0, "tau_" + std::to_string(i) + "_" + std::to_string(s));
        }
    }

    // unique line pairs with the tightest angle bound
    std::map<std::pair<std::size_t, std::size_t>, double> line_theta;
    for (std::size_t l = 0; l < grid.lines().size(); ++l) {
        auto k = grid.index_of(grid.lines()[l].from);
        auto m = grid.index_of(grid.lines()[l].to);
        if (k > m) {
            std::swap(k, m);
        }
        auto [it, fresh] = line_theta.emplace(std::pair{k, m}, grid.line_theta_max(l));
        if (!fresh) {
            it->second = std::min(it->second, grid.line_theta_max(l));
        }
    }

    model.w_block.resize(len);
    model.pg_var.assign(len, {});
    model.qg_var.assign(len, {});
    model.generation_cost.assign(len, {});
    model.charging_cost.assign(len, {});
    for (int off = 0; off < len; ++off) {
        const int slot = hp.first_slot + off;
        const auto tag = "_" + std::to_string(slot);
        const int w = prog.add_block(n, BlockKind::hermitian);
        model.w_block[off] = w;

        for (std::size_t g = 0; g < grid.generator_count(); ++g) {
            const auto& gen = grid.generators()[g];
            const int pg = prog.add_variable(gen.p_min, gen.p_max, "pg" + std::to_string(g) + tag);
            const int qg = prog.add_variable(gen.q_min, gen.q_max, "qg" + std::to_string(g) + tag);
            model.pg_var[off].push_back(pg);
            model.qg_var[off].push_back(qg);
            const double base = grid.base_mva();
            const double q = gen.cost.c2 * base * base;
            if (q > 0.0) {
                // epigraph block e >= q pg^2; its objective entry is recorded as generation cost
                const int before = static_cast<int>(prog.blocks().size());
                prog.add_quadratic_cost(pg, q);
                model.generation_cost[off].add_entry(before, 0, 0, 1.0);
            }
            AffineExpr lin;
            lin.add(pg, gen.cost.c1 * base).add_constant(gen.cost.c0);
            prog.add_objective(lin);
            model.generation_cost[off].append(lin);
        }

        // power balance
        for (int k = 0; k < n; ++k) {
            AffineExpr re;
            AffineExpr im;
            Complex diag_coef{0.0, 0.0};
            for (const auto& nb : grid.neighbors(k)) {
                const Complex yc = std::conj(nb.admittance);
                diag_coef += yc;
                re.add_entry(w, k, static_cast<int>(nb.bus), -yc);
                im.add_entry(w, k, static_cast<int>(nb.bus), Complex{0.0, 1.0} * yc);
            }
            if (diag_coef != Complex{0.0, 0.0}) {
                re.add_entry(w, k, k, diag_coef);
                im.add_entry(w, k, k, Complex{0.0, -1.0} * diag_coef);
            }
            double rhs_p = -hp.loads.p[slot - 1][k];
            const double rhs_q = -hp.loads.q[slot - 1][k];
            if (const auto g = grid.generator_at(k)) {
                re.add(model.pg_var[off][*g], -1.0);
                im.add(model.qg_var[off][*g], -1.0);
            }
            const BusId station = grid.buses()[k].id;
            for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
                if (!active[i] || hp.tasks[i].station != station) {
                    continue;
                }
                const double draw = pev_power_pu(hp.tasks[i], grid);
                if (hp.fixed_tau) {
                    rhs_p -= draw * hp.fixed_tau->at(static_cast<int>(i), slot);
                } else if (const int v = model.tau_var[i][off]; v >= 0) {
                    re.add(v, draw);
                }
            }
            prog.add_constraint(std::move(re), Sense::equal, rhs_p, "balance_p" + std::to_string(k) + tag);
            prog.add_constraint(std::move(im), Sense::equal, rhs_q, "balance_q" + std::to_string(k) + tag);
        }

        // voltage magnitude box on the diagonal
        for (int k = 0; k < n; ++k) {
            const auto& bus = grid.buses()[k];
            const double lo = bus.v_min * bus.v_min;
            const double hi = bus.v_max * bus.v_max;
            const auto name = "vbox" + std::to_string(k) + tag;
            if (lo == hi) {
                prog.add_constraint(AffineExpr{}.add_entry(w, k, k, 1.0), Sense::equal, lo, name);
            } else {
                prog.add_constraint(AffineExpr{}.add_entry(w, k, k, 1.0), Sense::greater_equal, lo, name);
                prog.add_constraint(AffineExpr{}.add_entry(w, k, k, 1.0), Sense::less_equal, hi, name);
            }
        }

        // |angle difference| <= theta_max, i.e. |Im W_km| <= tan(theta) Re W_km
        if (hp.angle_constraints) {
            for (const auto& [km, theta] : line_theta) {
                const int k = static_cast<int>(km.first);
                const int m = static_cast<int>(km.second);
                const double tn = std::tan(theta);
                const auto name = "angle" + std::to_string(k) + "_" + std::to_string(m) + tag;
                prog.add_constraint(AffineExpr{}.add_entry(w, k, m, Complex{-tn, -1.0}), Sense::less_equal, 0.0,
                                    name);
                prog.add_constraint(AffineExpr{}.add_entry(w, k, m, Complex{tn, -1.0}), Sense::greater_equal, 0.0,
                                    name);
            }
        }

        // charging cost for the slot
        for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
            if (!active[i]) {
                continue;
            }
            const double coef = hp.price[slot - 1] * hp.tasks[i].rate_kw * dt;
            if (hp.fixed_tau) {
                model.charging_cost[off].add_constant(coef * hp.fixed_tau->at(static_cast<int>(i), slot));
            } else if (const int v = model.tau_var[i][off]; v >= 0) {
                model.charging_cost[off].add(v, coef);
            }
        }
        prog.add_objective(model.charging_cost[off]);
    }

    // demand completion and (optionally) exact slot counts
    if (!hp.fixed_tau) {
        for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
            if (!active[i]) {
                continue;
            }
            AffineExpr energy;
            AffineExpr count;
            const double per_slot = hp.tasks[i].slot_energy(dt);
            for (int v : model.tau_var[i]) {
                if (v >= 0) {
                    energy.add(v, per_slot);
                    count.add(v, 1.0);
                }
            }
            const auto tag = "_task" + std::to_string(i);
            // an exact count of ceil(demand / per_slot) slots already covers the demand
            if (hp.remaining_kwh[i] > 0.0 && !hp.enforce_slot_count) {
                prog.add_constraint(energy, Sense::greater_equal, hp.remaining_kwh[i], "demand" + tag);
            }
            if (hp.enforce_slot_count) {
                prog.add_constraint(count, Sense::equal, hp.remaining_slots(i), "slot_count" + tag);
            }
        }
    }
    return model;
}

/// Solution of a relaxation read back per slot.
struct SdrPoint {
    std::vector<CMatrix> w;                 // per window slot
    std::vector<std::vector<double>> pg;    // [slot offset][gen]
    std::vector<std::vector<double>> qg;
    ChargingSchedule tau;                   // full-period indexing, relaxed values
    std::vector<double> generation_cost;    // per window slot, true f(P_g)
    std::vector<double> charging_cost;      // per window slot
    double objective = 0.0;                 // solver objective (includes any penalties)

    double total_generation_cost() const {
        double s = 0.0;
        for (double v : generation_cost) {
            s += v;
        }
        return s;
    }
    double total_charging_cost() const {
        double s = 0.0;
        for (double v : charging_cost) {
            s += v;
        }
        return s;
    }
    double total_cost() const { return total_generation_cost() + total_charging_cost(); }
};

inline SdrPoint extract_point(const HorizonProblem& hp, const SdrModel& model, const ConicSolution& sol) {
    const GridCase& grid = *hp.grid;
    const int len = hp.window_length();
    SdrPoint pt;
    pt.objective = sol.objective;
    pt.tau = hp.fixed_tau ? *hp.fixed_tau
                          : ChargingSchedule(static_cast<int>(hp.tasks.size()), hp.time.num_slots);
    for (int off = 0; off < len; ++off) {
        pt.w.push_back(sol.blocks[model.w_block[off]]);
        std::vector<double> pg;
        std::vector<double> qg;
        double gen_cost = 0.0;
        for (std::size_t g = 0; g < grid.generator_count(); ++g) {
            pg.push_back(sol.values[model.pg_var[off][g]]);
            qg.push_back(sol.values[model.qg_var[off][g]]);
            gen_cost += grid.generation_cost(g, pg.back());
        }
        pt.pg.push_back(std::move(pg));
        pt.qg.push_back(std::move(qg));
        pt.generation_cost.push_back(gen_cost);
        if (!hp.fixed_tau) {
            for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
                if (const int v = model.tau_var[i][off]; v >= 0) {
                    pt.tau.at(static_cast<int>(i), hp.first_slot + off) =
                        std::clamp(sol.values[v], 0.0, 1.0);
                }
            }
        }
    }
    for (int off = 0; off < len; ++off) {
        const int slot = hp.first_slot + off;
        double c = 0.0;
        for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
            c += hp.price[slot - 1] * hp.tasks[i].rate_kw * hp.time.slot_hours * pt.tau.at(static_cast<int>(i), slot);
        }
        pt.charging_cost.push_back(c);
    }
    return pt;
}

/// PEV draw per bus (p.u.) for one slot of a schedule.
inline std::vector<double> pev_draw_by_bus(const GridCase& grid, const std::vector<ChargingTask>& tasks,
                                           const ChargingSchedule& tau, int slot) {
    std::vector<double> draw(grid.bus_count(), 0.0);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        draw[grid.index_of(tasks[i].station)] += pev_power_pu(tasks[i], grid) * tau.at(static_cast<int>(i), slot);
    }
    return draw;
}

/// max_k |V_k (sum_m y_km (V_k - V_m))^* - S_k| where S_k is the net injection.
inline double recovered_balance_residual(const GridCase& grid, const CVector& v, const std::vector<double>& pg,
                                         const std::vector<double>& qg, const std::vector<double>& load_p,
                                         const std::vector<double>& load_q, const std::vector<double>& pev_p) {
    const auto n = grid.bus_count();
    if (static_cast<std::size_t>(v.size()) != n || load_p.size() != n || load_q.size() != n || pev_p.size() != n ||
        pg.size() != grid.generator_count() || qg.size() != grid.generator_count()) {
        throw DomainError("recovered_balance_residual: inconsistent dimensions");
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        Complex current{0.0, 0.0};
        for (const auto& nb : grid.neighbors(k)) {
            current += nb.admittance * (v(k) - v(nb.bus));
        }
        const Complex flow = v(k) * std::conj(current);
        Complex inj{-load_p[k] - pev_p[k], -load_q[k]};
        if (const auto g = grid.generator_at(k)) {
            inj += Complex{pg[*g], qg[*g]};
        }
        worst = std::max(worst, std::abs(flow - inj));
    }
    return worst;
}

} // namespace evsched

#endif
