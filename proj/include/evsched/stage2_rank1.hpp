#ifndef EVSCHED_STAGE2_RANK1_HPP
#define EVSCHED_STAGE2_RANK1_HPP

// Stage 2: with the charging schedule fixed, push the Gram blocks to rank one.
//
// Trace(W) - lambda_max(W) >= 0 vanishes exactly on rank-one PSD matrices.
// lambda_max(W) >= w^H W w for any unit w, so replacing lambda_max by the
// Rayleigh quotient at the current top eigenvector gives a convex upper bound
// that is tight at the current iterate; each iteration solves the conic program
// with that surrogate as a penalty.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "evsched/hermitian.hpp"
#include "evsched/opf_relaxation.hpp"
#include "evsched/sdp_solver.hpp"
#include "evsched/stage1_binary.hpp"

namespace evsched {

struct Stage2Options {
    double mu2 = 10.0;
    double epsilon = 1e-4;  // short-circuit on (Trace - lambda_max) / Trace, then on the surrogate
    int max_iter = 50;
    bool penalize_all_slots = false;  // default: first slot of the window only
    SolverOptions solver = stage_solver_options();
};

struct Stage2Iterate {
    int kappa = 0;
    double objective = 0.0;   // cost + mu2 * sum of true rank residuals
    double cost = 0.0;
    double surrogate = 0.0;   // sum of Trace - w_k^H W w_k over penalized slots (kappa >= 1)
    double max_surrogate = 0.0;
    double max_relative_residual = 0.0;
    int solver_iterations = 0;
};

struct Stage2Result {
    SdrPoint point;
    std::vector<CVector> voltages;          // per window slot, phase reference at the first bus
    std::vector<double> rank_residual;      // per window slot, Trace - lambda_max
    std::vector<double> trace_w;            // per window slot
    std::vector<int> penalized;             // window offsets that carry the penalty
    std::vector<Stage2Iterate> trace;
    bool converged = false;
    bool stalled = false;  // residual stopped decreasing above epsilon
    std::vector<std::string> diagnostics;

    double relative_residual(std::size_t off) const {
        return trace_w[off] > 0.0 ? rank_residual[off] / trace_w[off] : 0.0;
    }
};

/// Trace - w^H W w; the Rayleigh surrogate of Trace - lambda_max at unit w.
inline double rayleigh_surrogate(const CMatrix& w, const CVector& unit) {
    return w.trace().real() - (unit.adjoint() * w * unit)(0, 0).real();
}

/// AffineExpr for Trace(W) - w^H W w on block `blk` (real-valued for Hermitian W).
inline AffineExpr rayleigh_penalty_expr(int blk, const CVector& unit) {
    AffineExpr e;
    const auto n = unit.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            // w^H W w = sum_ij conj(w_i) W_ij w_j
            Complex c = -std::conj(unit(i)) * unit(j);
            if (i == j) {
                c += 1.0;
            }
            if (c != Complex{0.0, 0.0}) {
                e.add_entry(blk, static_cast<int>(i), static_cast<int>(j), c);
            }
        }
    }
    return e;
}

/// Runs stage 2 on a horizon problem whose schedule is fixed to `tau`.
inline Stage2Result stage2_solve(HorizonProblem hp, const ChargingSchedule& tau, const Stage2Options& opt = {}) {
    if (!(opt.mu2 > 0.0) || !(opt.epsilon > 0.0) || opt.max_iter < 0) {
        throw DomainError("stage 2 needs mu2 > 0, epsilon > 0, max_iter >= 0");
    }
    hp.fixed_tau = tau;
    hp.enforce_slot_count = false;
    hp.validate();
    const int len = hp.window_length();

    Stage2Result res;
    if (opt.penalize_all_slots) {
        for (int off = 0; off < len; ++off) {
            res.penalized.push_back(off);
        }
    } else {
        res.penalized.push_back(0);
    }

    auto measure = [&](int kappa, double surrogate, double max_surrogate, int iters) {
        res.rank_residual.assign(len, 0.0);
        res.trace_w.assign(len, 0.0);
        Stage2Iterate it;
        it.kappa = kappa;
        it.cost = res.point.total_cost();
        double penalty = 0.0;
        for (int off = 0; off < len; ++off) {
            res.rank_residual[off] = rank_residual(res.point.w[off]);
            res.trace_w[off] = res.point.w[off].trace().real();
        }
        for (int off : res.penalized) {
            penalty += res.rank_residual[off];
            it.max_relative_residual = std::max(it.max_relative_residual, res.relative_residual(off));
        }
        it.objective = it.cost + opt.mu2 * penalty;
        it.surrogate = kappa == 0 ? penalty : surrogate;
        it.max_surrogate = max_surrogate;
        it.solver_iterations = iters;
        res.trace.push_back(it);
        return it;
    };

    SdrModel base = build_sdr(hp);
    res.diagnostics = base.diagnostics;
    auto sol = detail::solve_or_throw(base.program, opt.solver, "stage 2 initializer");
    res.point = extract_point(hp, base, sol);
    auto last = measure(0, 0.0, 0.0, sol.iterations);
    // already rank one at the penalized slots: no iteration needed
    res.converged = last.max_relative_residual <= opt.epsilon;

    for (int kappa = 1; !res.converged && kappa <= opt.max_iter; ++kappa) {
        SdrModel model = build_sdr(hp);
        std::vector<CVector> dirs;
        for (int off : res.penalized) {
            const auto top = top_eigenpair(res.point.w[off]);
            if (top.degenerate) {
                res.diagnostics.push_back("stage 2 iteration " + std::to_string(kappa) + ": top eigenvalue of slot " +
                                          std::to_string(hp.first_slot + off) +
                                          " is not simple; eigensolver order picks the direction");
            }
            dirs.push_back(top.vector);
            AffineExpr pen = rayleigh_penalty_expr(model.w_block[off], top.vector);
            model.program.add_objective(pen, opt.mu2);
        }
        sol = detail::solve_or_throw(model.program, opt.solver, "stage 2 iteration " + std::to_string(kappa));
        res.point = extract_point(hp, model, sol);
        double surrogate = 0.0;
        double max_surrogate = 0.0;
        for (std::size_t p = 0; p < res.penalized.size(); ++p) {
            const auto& w = res.point.w[res.penalized[p]];
            const double s = rayleigh_surrogate(w, dirs[p]);
            // the surrogate bounds the true residual from above
            if (s < rank_residual(w) - 1e-9 * std::max(1.0, w.trace().real())) {
                throw SolverError("stage 2: Rayleigh surrogate below the rank residual");
            }
            surrogate += s;
            max_surrogate = std::max(max_surrogate, s);
        }
        const double before = last.max_relative_residual;
        last = measure(kappa, surrogate, max_surrogate, sol.iterations);
        res.converged = max_surrogate <= opt.epsilon;
        if (!res.converged && last.max_relative_residual >= 0.999 * before) {
            res.stalled = true;
            res.diagnostics.push_back("stage 2 stalled at iteration " + std::to_string(kappa) +
                                      " with relative rank residual " +
                                      std::to_string(last.max_relative_residual));
            break;
        }
    }
    if (!res.converged && !res.stalled) {
        res.diagnostics.push_back("stage 2 reached max_iter=" + std::to_string(opt.max_iter) +
                                  " with relative rank residual " + std::to_string(last.max_relative_residual));
    }
    for (int off = 0; off < len; ++off) {
        res.voltages.push_back(rank_one_factor(res.point.w[off], 0));
    }
    return res;
}

} // namespace evsched

#endif
