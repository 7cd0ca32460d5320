#ifndef EVSCHED_STAGE1_BINARY_HPP
#define EVSCHED_STAGE1_BINARY_HPP

// Stage 1: drive the relaxed charging variables to {0,1}.
//
// With the slot count fixed at tau_bar = sum of required slots, the convex
// function g(tau) = sum tau^L (L > 1) equals tau_bar exactly at binary points
// and is strictly smaller otherwise, so 1/g - 1/tau_bar >= 0 vanishes only on
// binary schedules. Each iteration replaces g by its tangent at the current
// point (a lower bound, hence 1/g_lin majorizes 1/g) and solves the resulting
// conic program; the penalized objective is nonincreasing along the iterates.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "evsched/opf_relaxation.hpp"
#include "evsched/scenario.hpp"
#include "evsched/sdp_solver.hpp"

namespace evsched {

/// Tolerances used for the penalty iterations; tighter than the defaults so
/// that successive objectives are comparable.
inline SolverOptions stage_solver_options() {
    SolverOptions o;
    o.tol_gap = 1e-8;
    o.tol_feas = 1e-8;
    o.max_iter = 150;
    return o;
}

struct Stage1Options {
    double mu1 = 1.0;
    double exponent = 1.5;  // L
    double epsilon = 1e-4;
    int max_iter = 50;
    double stall_tol = 1e-7;  // stop once no tau moves by more than this
    SolverOptions solver = stage_solver_options();
};

struct Stage1Iterate {
    int kappa = 0;
    double objective = 0.0;  // cost + mu1 * penalty
    double cost = 0.0;       // generation + charging over the window
    double penalty = 0.0;    // 1/g(tau) - 1/tau_bar
    double g = 0.0;
    double g_lin = 0.0;      // tangent model at the previous iterate (= g for kappa 0)
    double binary_violation = 0.0;
    int solver_iterations = 0;
};

struct Stage1Result {
    ChargingSchedule binary;   // full-period indexing
    ChargingSchedule relaxed;  // last continuous iterate
    SdrPoint point;            // last continuous solution
    std::vector<Stage1Iterate> trace;
    int tau_bar = 0;
    bool converged = false;    // penalty below epsilon
    bool stalled = false;      // iterates stopped moving above epsilon
    bool repaired = false;     // rounding needed a count repair
    std::vector<std::string> diagnostics;
};

inline double check_unit(double t) {
    constexpr double tol = 1e-9;
    if (!(t >= -tol && t <= 1.0 + tol)) {
        throw DomainError("charging variable outside [0,1]: " + std::to_string(t));
    }
    return std::clamp(t, 0.0, 1.0);
}

/// g(tau) = sum tau_i^L.
inline double g_value(std::span<const double> tau, double exponent) {
    if (!(exponent > 1.0)) {
        throw DomainError("exponent L must exceed 1");
    }
    double g = 0.0;
    for (double t : tau) {
        g += std::pow(check_unit(t), exponent);
    }
    return g;
}

struct Tangent {
    double value = 0.0;             // g(tau_k)
    std::vector<double> gradient;   // L tau_k^(L-1)
    std::vector<double> point;      // tau_k

    /// g(tau_k) + grad . (tau - tau_k)
    double at(std::span<const double> tau) const {
        if (tau.size() != point.size()) {
            throw DomainError("tangent evaluated at a point of the wrong size");
        }
        double v = value;
        for (std::size_t i = 0; i < tau.size(); ++i) {
            v += gradient[i] * (tau[i] - point[i]);
        }
        return v;
    }
};

inline Tangent g_linearized(std::span<const double> tau_k, double exponent) {
    Tangent t;
    t.value = g_value(tau_k, exponent);
    for (double x : tau_k) {
        const double c = std::clamp(x, 0.0, 1.0);
        t.point.push_back(c);
        t.gradient.push_back(exponent * std::pow(c, exponent - 1.0));
    }
    return t;
}

/// Rounds at 0.5, then restores each task's slot count: the largest relaxed
/// values win, ties go to the earlier slot. Returns true if a repair was needed.
inline bool round_and_repair(const HorizonProblem& hp, const ChargingSchedule& relaxed, ChargingSchedule& out) {
    out = ChargingSchedule(static_cast<int>(hp.tasks.size()), hp.time.num_slots, ScheduleMode::binary);
    bool repaired = false;
    for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
        const int row = static_cast<int>(i);
        const auto [lo, hi] = hp.task_window(i);
        const int need = hp.remaining_slots(i);
        std::vector<int> slots;
        int rounded = 0;
        for (int s = lo; s <= hi; ++s) {
            slots.push_back(s);
            rounded += relaxed.at(row, s) >= 0.5 ? 1 : 0;
        }
        if (rounded == need) {
            for (int s : slots) {
                out.at(row, s) = relaxed.at(row, s) >= 0.5 ? 1.0 : 0.0;
            }
            continue;
        }
        repaired = true;
        std::stable_sort(slots.begin(), slots.end(),
                         [&](int a, int b) { return relaxed.at(row, a) > relaxed.at(row, b); });
        for (int k = 0; k < std::min<int>(need, static_cast<int>(slots.size())); ++k) {
            out.at(row, slots[k]) = 1.0;
        }
    }
    return repaired;
}

namespace detail {

struct TauIndex {
    int task;
    int slot;
    int var;
};

inline std::vector<TauIndex> tau_index(const HorizonProblem& hp, const SdrModel& model) {
    std::vector<TauIndex> idx;
    for (std::size_t i = 0; i < model.tau_var.size(); ++i) {
        for (std::size_t off = 0; off < model.tau_var[i].size(); ++off) {
            if (model.tau_var[i][off] >= 0) {
                idx.push_back({static_cast<int>(i), hp.first_slot + static_cast<int>(off), model.tau_var[i][off]});
            }
        }
    }
    return idx;
}

inline std::vector<double> gather(const std::vector<TauIndex>& idx, const ChargingSchedule& tau) {
    std::vector<double> v;
    v.reserve(idx.size());
    for (const auto& e : idx) {
        v.push_back(tau.at(e.task, e.slot));
    }
    return v;
}

inline ConicSolution solve_or_throw(const ConicProgram& prog, const SolverOptions& opts, const std::string& what) {
    auto sol = solve(prog, opts);
    if (sol.status == SolveStatus::infeasible) {
        throw InfeasibleError(what + ": relaxation is infeasible");
    }
    if (!sol.ok()) {
        throw SolverError(what + ": solver stopped with status " + to_string(sol.status));
    }
    return sol;
}

} // namespace detail

/// Runs the stage-1 penalty iterations on a horizon problem. The problem's
/// relax_binary / enforce_slot_count / fixed_tau settings are overridden.
inline Stage1Result stage1_solve(HorizonProblem hp, const Stage1Options& opt = {}) {
    if (!(opt.mu1 > 0.0) || !(opt.epsilon > 0.0) || opt.max_iter < 0) {
        throw DomainError("stage 1 needs mu1 > 0, epsilon > 0, max_iter >= 0");
    }
    if (!(opt.exponent > 1.0)) {
        throw DomainError("exponent L must exceed 1");
    }
    hp.relax_binary = true;
    hp.enforce_slot_count = true;
    hp.fixed_tau.reset();
    hp.validate();

    Stage1Result res;
    for (std::size_t i = 0; i < hp.tasks.size(); ++i) {
        const auto [lo, hi] = hp.task_window(i);
        const int need = hp.remaining_slots(i);
        if (need > std::max(0, hi - lo + 1)) {
            throw InfeasibleError("task " + std::to_string(i) + " needs " + std::to_string(need) +
                                  " slots but only " + std::to_string(std::max(0, hi - lo + 1)) + " remain");
        }
        res.tau_bar += need;
    }

    // continuous initializer
    SdrModel base = build_sdr(hp);
    res.diagnostics = base.diagnostics;
    auto sol = detail::solve_or_throw(base.program, opt.solver, "stage 1 initializer");
    res.point = extract_point(hp, base, sol);
    const auto idx = detail::tau_index(hp, base);

    auto record = [&](int kappa, double g_lin, int iters) {
        const auto tau = detail::gather(idx, res.point.tau);
        Stage1Iterate it;
        it.kappa = kappa;
        it.g = g_value(tau, opt.exponent);
        it.g_lin = kappa == 0 ? it.g : g_lin;
        it.cost = res.point.total_cost();
        it.penalty = res.tau_bar > 0 ? 1.0 / it.g - 1.0 / res.tau_bar : 0.0;
        it.objective = it.cost + opt.mu1 * it.penalty;
        it.binary_violation = res.point.tau.binary_violation();
        it.solver_iterations = iters;
        res.trace.push_back(it);
        return it;
    };

    auto last = record(0, 0.0, sol.iterations);
    res.converged = res.tau_bar == 0 || last.penalty < opt.epsilon;

    for (int kappa = 1; !res.converged && kappa <= opt.max_iter; ++kappa) {
        const auto tau_k = detail::gather(idx, res.point.tau);
        const auto tan = g_linearized(tau_k, opt.exponent);

        SdrModel model = build_sdr(hp);
        auto& prog = model.program;
        // [[s, 1], [1, g_lin]] >= 0  <=>  s >= 1 / g_lin, g_lin > 0
        const int r = prog.add_block(2, BlockKind::real_symmetric);
        prog.add_constraint(AffineExpr{}.add_entry(r, 1, 0, 1.0), Sense::equal, 1.0, "s1_cone_offdiag");
        AffineExpr glin;
        glin.add_entry(r, 1, 1, 1.0);
        double rhs = tan.value;
        for (std::size_t e = 0; e < idx.size(); ++e) {
            glin.add(idx[e].var, -tan.gradient[e]);
            rhs -= tan.gradient[e] * tan.point[e];
        }
        prog.add_constraint(glin, Sense::equal, rhs, "s1_tangent");
        // every tangent term stays nonnegative
        for (std::size_t e = 0; e < idx.size(); ++e) {
            if (tan.point[e] > 0.0) {
                prog.add_constraint(AffineExpr{}.add(idx[e].var, opt.exponent), Sense::greater_equal,
                                    (opt.exponent - 1.0) * tan.point[e], "s1_trust");
            }
        }
        prog.add_objective(AffineExpr{}.add_entry(r, 0, 0, opt.mu1).add_constant(-opt.mu1 / res.tau_bar));

        sol = detail::solve_or_throw(prog, opt.solver, "stage 1 iteration " + std::to_string(kappa));
        res.point = extract_point(hp, model, sol);
        const auto tau_new = detail::gather(idx, res.point.tau);
        const double g_lin = tan.at(tau_new);
        last = record(kappa, g_lin, sol.iterations);
        res.converged = 1.0 / g_lin - 1.0 / res.tau_bar < opt.epsilon;
        double moved = 0.0;
        for (std::size_t e = 0; e < tau_new.size(); ++e) {
            moved = std::max(moved, std::abs(tau_new[e] - tau_k[e]));
        }
        if (!res.converged && moved <= opt.stall_tol) {
            res.stalled = true;
            res.diagnostics.push_back("stage 1 stalled at iteration " + std::to_string(kappa) + " with penalty " +
                                      std::to_string(last.penalty) + "; mu1 may be too small for the cost scale");
            break;
        }
    }
    if (!res.converged && !res.stalled) {
        res.diagnostics.push_back("stage 1 reached max_iter=" + std::to_string(opt.max_iter) +
                                  " with penalty " + std::to_string(last.penalty));
    }
    res.relaxed = res.point.tau;
    res.repaired = round_and_repair(hp, res.relaxed, res.binary);
    if (res.repaired) {
        res.diagnostics.push_back("rounding changed a slot count; repaired by largest relaxed values");
    }
    return res;
}

} // namespace evsched

#endif
