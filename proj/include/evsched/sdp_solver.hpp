#ifndef EVSCHED_SDP_SOLVER_HPP
#define EVSCHED_SDP_SOLVER_HPP

// Primal-dual path-following interior-point solver for linear programs over
// products of Hermitian / real-symmetric PSD cones, the nonnegative orthant
// and free variables.
//
// Modeling layer: ConicProgram holds bounded scalar variables, PSD blocks and
// affine (in)equality rows. solve() compiles it to the standard form
//
//     min <c, x>  s.t.  A x = b,  x in R^f x R+^l x S+^{d_1} x ... x S+^{d_p}
//
// where every n x n Hermitian block becomes a 2n x 2n real symmetric block via
// the [[Re, -Im], [Im, Re]] embedding. Only functionals of the embedded Hermitian
// part are ever constrained, so projecting the returned block back onto the
// embedding structure loses nothing. Search directions are HKM with a Mehrotra
// predictor-corrector; the Schur complement is assembled sparsely and factored
// with a simplicial LDL^T.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "evsched/errors.hpp"
#include "evsched/hermitian.hpp"

namespace evsched {

using Complex = std::complex<double>;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class BlockKind { hermitian, real_symmetric };
enum class Sense { equal, less_equal, greater_equal };

/// Contributes Re(coef * X(row, col)) for a Hermitian block, coef.real() * X(row, col)
/// for a real-symmetric one.
struct BlockTerm {
    int block = 0;
    int row = 0;
    int col = 0;
    Complex coef;
};

struct VarTerm {
    int var = 0;
    double coef = 0.0;
};

struct AffineExpr {
    std::vector<VarTerm> vars;
    std::vector<BlockTerm> entries;
    double constant = 0.0;

    AffineExpr& add(int var, double coef) {
        vars.push_back({var, coef});
        return *this;
    }
    AffineExpr& add_entry(int block, int row, int col, Complex coef) {
        entries.push_back({block, row, col, coef});
        return *this;
    }
    AffineExpr& add_constant(double c) {
        constant += c;
        return *this;
    }
    AffineExpr& append(const AffineExpr& other, double scale = 1.0) {
        for (auto v : other.vars) {
            vars.push_back({v.var, scale * v.coef});
        }
        for (auto e : other.entries) {
            entries.push_back({e.block, e.row, e.col, scale * e.coef});
        }
        constant += scale * other.constant;
        return *this;
    }
};

struct LinearConstraint {
    AffineExpr expr;
    Sense sense = Sense::equal;
    double rhs = 0.0;
    std::string name;
};

struct BlockSpec {
    int dim = 0;
    BlockKind kind = BlockKind::hermitian;
};

struct VariableSpec {
    double lb = -kInf;
    double ub = kInf;
    std::string name;
};

class ConicProgram {
public:
    int add_block(int dim, BlockKind kind = BlockKind::hermitian) {
        if (dim < 1) {
            throw DomainError("PSD block dimension must be >= 1");
        }
        blocks_.push_back({dim, kind});
        return static_cast<int>(blocks_.size()) - 1;
    }

    int add_variable(double lb, double ub, std::string name = {}) {
        if (lb > ub) {
            throw DomainError("variable '" + name + "' has lb > ub");
        }
        vars_.push_back({lb, ub, std::move(name)});
        return static_cast<int>(vars_.size()) - 1;
    }

    void add_constraint(AffineExpr expr, Sense sense, double rhs, std::string name = {}) {
        rows_.push_back({std::move(expr), sense, rhs, std::move(name)});
    }

    void add_objective(const AffineExpr& expr, double scale = 1.0) { objective_.append(expr, scale); }

    /// Adds q * x^2 (q >= 0) through the epigraph [[e, sqrt(q) x], [sqrt(q) x, 1]] >= 0.
    void add_quadratic_cost(int var, double q) {
        if (q < 0.0) {
            throw DomainError("quadratic cost coefficient must be >= 0");
        }
        if (q == 0.0) {
            return;
        }
        const int b = add_block(2, BlockKind::real_symmetric);
        add_constraint(AffineExpr{}.add_entry(b, 1, 1, 1.0), Sense::equal, 1.0, "quad_unit");
        add_constraint(AffineExpr{}.add_entry(b, 1, 0, 1.0).add(var, -std::sqrt(q)), Sense::equal, 0.0,
                       "quad_link");
        objective_.add_entry(b, 0, 0, 1.0);
    }

    const std::vector<BlockSpec>& blocks() const { return blocks_; }
    const std::vector<VariableSpec>& variables() const { return vars_; }
    const std::vector<LinearConstraint>& constraints() const { return rows_; }
    const AffineExpr& objective() const { return objective_; }

    void validate() const {
        auto check = [&](const AffineExpr& e, const std::string& where) {
            for (auto v : e.vars) {
                if (v.var < 0 || v.var >= static_cast<int>(vars_.size())) {
                    throw DomainError(where + ": undeclared variable " + std::to_string(v.var));
                }
            }
            for (const auto& t : e.entries) {
                if (t.block < 0 || t.block >= static_cast<int>(blocks_.size())) {
                    throw DomainError(where + ": undeclared block " + std::to_string(t.block));
                }
                const int d = blocks_[t.block].dim;
                if (t.row < 0 || t.row >= d || t.col < 0 || t.col >= d) {
                    throw DomainError(where + ": block entry out of range");
                }
            }
        };
        check(objective_, "objective");
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            check(rows_[i].expr, "constraint " + std::to_string(i) + " (" + rows_[i].name + ")");
        }
    }

    /// Text dump for cross-checking with external SDP solvers.
    void dump(std::ostream& os) const {
        os << "blocks " << blocks_.size() << "\n";
        for (const auto& b : blocks_) {
            os << "  " << (b.kind == BlockKind::hermitian ? "hermitian " : "symmetric ") << b.dim << "\n";
        }
        os << "variables " << vars_.size() << "\n";
        for (const auto& v : vars_) {
            os << "  " << v.lb << " " << v.ub << " " << v.name << "\n";
        }
        auto expr = [&](const AffineExpr& e) {
            for (auto v : e.vars) {
                os << " x" << v.var << "*" << v.coef;
            }
            for (const auto& t : e.entries) {
                os << " B" << t.block << "[" << t.row << "," << t.col << "]*(" << t.coef.real() << ","
                   << t.coef.imag() << ")";
            }
            if (e.constant != 0.0) {
                os << " +" << e.constant;
            }
        };
        os << "objective";
        expr(objective_);
        os << "\nconstraints " << rows_.size() << "\n";
        for (const auto& r : rows_) {
            os << "  " << r.name << ":";
            expr(r.expr);
            os << (r.sense == Sense::equal ? " = " : r.sense == Sense::less_equal ? " <= " : " >= ") << r.rhs
               << "\n";
        }
    }

private:
    std::vector<BlockSpec> blocks_;
    std::vector<VariableSpec> vars_;
    std::vector<LinearConstraint> rows_;
    AffineExpr objective_;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter, numerical_error };

inline const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::numerical_error: return "numerical_error";
    }
    return "?";
}

struct SolverOptions {
    double tol_gap = 1e-6;   // relative duality gap
    double tol_feas = 1e-6;  // relative primal/dual residual
    double tol_infeas = 1e-8;
    double step_fraction = 0.95;
    int max_iter = 100;
    int stall_window = 8;         // iterations without progress before giving up
    double reduced_factor = 100;  // a stalled iterate within this multiple of the tolerances is accepted
};

/// One interior-point iterate.
struct IterateRecord {
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double complementarity = 0.0;  // <x, z> summed over cones, >= 0 by construction
    double primal_residual = 0.0;
    double dual_residual = 0.0;
};

struct ConicSolution {
    SolveStatus status = SolveStatus::numerical_error;
    std::vector<CMatrix> blocks;
    std::vector<double> values;
    double objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;           // relative
    double max_residual = 0.0;  // worst violation of the declared rows and bounds
    double min_block_eigenvalue = 0.0;
    int iterations = 0;
    bool reduced_accuracy = false;  // stalled, accepted within reduced_factor of the tolerances
    std::vector<IterateRecord> trace;

    bool ok() const { return status == SolveStatus::optimal; }
};

/// Evaluates an affine expression at given variable and block values.
inline double evaluate(const AffineExpr& e, const std::vector<double>& values,
                       const std::vector<CMatrix>& blocks) {
    double s = e.constant;
    for (auto v : e.vars) {
        s += v.coef * values[v.var];
    }
    for (const auto& t : e.entries) {
        s += (t.coef * blocks[t.block](t.row, t.col)).real();
    }
    return s;
}

namespace detail {

struct SymEntry {
    int p;
    int q;  // p >= q
    double a;
};

struct FullEntry {
    int p;
    int q;
    double v;
};

struct BlockRow {
    int row;
    std::vector<SymEntry> entries;
    std::vector<FullEntry> full;
};

struct StdBlock {
    int user_block;
    int dim;
    BlockKind kind;
    std::vector<BlockRow> rows;
    Eigen::MatrixXd c;  // symmetric objective matrix
};

/// Where a user variable lives in the standard form.
struct VarMap {
    enum Kind { fixed, lp, free } kind = fixed;
    double offset = 0.0;
    double sign = 1.0;
    int index = -1;
};

struct StandardForm {
    int m = 0;
    int n_lp = 0;
    int n_free = 0;
    Eigen::VectorXd b;
    Eigen::VectorXd c_lp;
    Eigen::VectorXd c_free;
    double c_const = 0.0;
    Eigen::SparseMatrix<double> a_lp;    // m x n_lp
    Eigen::SparseMatrix<double> a_free;  // m x n_free
    std::vector<StdBlock> blocks;
    std::vector<VarMap> var_map;
    bool trivially_infeasible = false;
    double obj_scale = 1.0;  // user objective = obj_scale * internal objective
};

inline void canonical_push(std::map<std::pair<int, int>, double>& acc, int p, int q, double a) {
    if (a == 0.0) {
        return;
    }
    if (p < q) {
        std::swap(p, q);
    }
    acc[{p, q}] += a;
}

/// Maps a user block term to symmetric-entry coefficients on the standard block.
inline void map_block_term(const BlockSpec& spec, const BlockTerm& t,
                           std::map<std::pair<int, int>, double>& acc, double scale) {
    const double re = scale * t.coef.real();
    const double im = scale * t.coef.imag();
    if (spec.kind == BlockKind::real_symmetric) {
        canonical_push(acc, t.row, t.col, re);
        return;
    }
    const int n = spec.dim;
    const int r = t.row;
    const int c = t.col;
    // Re(coef W_rc) = re * A_rc - im * B_rc with A = (X11 + X22)/2, B = (X21 - X12)/2
    canonical_push(acc, r, c, 0.5 * re);
    canonical_push(acc, n + r, n + c, 0.5 * re);
    if (r != c) {
        canonical_push(acc, n + r, c, -0.5 * im);
        canonical_push(acc, r, n + c, 0.5 * im);
    }
}

inline StandardForm compile(const ConicProgram& prog) {
    prog.validate();
    StandardForm sf;
    const auto& vars = prog.variables();
    const auto& ublocks = prog.blocks();

    std::vector<Eigen::Triplet<double>> lp_trip;
    std::vector<Eigen::Triplet<double>> free_trip;
    std::vector<double> rhs;
    std::vector<double> c_lp;
    std::vector<double> c_free;

    sf.var_map.resize(vars.size());
    std::vector<std::pair<int, double>> range_rows;  // (lp index, width)
    for (std::size_t j = 0; j < vars.size(); ++j) {
        const auto& v = vars[j];
        auto& vm = sf.var_map[j];
        const bool has_lb = std::isfinite(v.lb);
        const bool has_ub = std::isfinite(v.ub);
        if (has_lb && has_ub && v.lb == v.ub) {
            vm = {VarMap::fixed, v.lb, 1.0, -1};
        } else if (has_lb) {
            vm = {VarMap::lp, v.lb, 1.0, sf.n_lp++};
            c_lp.push_back(0.0);
            if (has_ub) {
                range_rows.emplace_back(vm.index, v.ub - v.lb);
            }
        } else if (has_ub) {
            vm = {VarMap::lp, v.ub, -1.0, sf.n_lp++};
            c_lp.push_back(0.0);
        } else {
            vm = {VarMap::free, 0.0, 1.0, sf.n_free++};
            c_free.push_back(0.0);
        }
    }

    sf.blocks.resize(ublocks.size());
    for (std::size_t k = 0; k < ublocks.size(); ++k) {
        auto& sb = sf.blocks[k];
        sb.user_block = static_cast<int>(k);
        sb.kind = ublocks[k].kind;
        sb.dim = ublocks[k].kind == BlockKind::hermitian ? 2 * ublocks[k].dim : ublocks[k].dim;
        sb.c = Eigen::MatrixXd::Zero(sb.dim, sb.dim);
    }

    // Adds the scalar-variable part of an expression to row `row`; returns the constant shift.
    auto add_vars = [&](const AffineExpr& e, int row, bool& touched) {
        double shift = 0.0;
        std::map<int, double> lp_acc;
        std::map<int, double> free_acc;
        for (auto t : e.vars) {
            const auto& vm = sf.var_map[t.var];
            shift += t.coef * vm.offset;
            if (vm.kind == VarMap::lp) {
                lp_acc[vm.index] += t.coef * vm.sign;
            } else if (vm.kind == VarMap::free) {
                free_acc[vm.index] += t.coef;
            }
        }
        for (auto [j, a] : lp_acc) {
            if (a != 0.0) {
                lp_trip.emplace_back(row, j, a);
                touched = true;
            }
        }
        for (auto [j, a] : free_acc) {
            if (a != 0.0) {
                free_trip.emplace_back(row, j, a);
                touched = true;
            }
        }
        return shift;
    };

    auto add_blocks = [&](const AffineExpr& e, int row, bool& touched) {
        std::map<int, std::map<std::pair<int, int>, double>> per_block;
        for (const auto& t : e.entries) {
            map_block_term(ublocks[t.block], t, per_block[t.block], 1.0);
        }
        for (auto& [k, acc] : per_block) {
            BlockRow br{row, {}, {}};
            for (auto [pq, a] : acc) {
                if (a == 0.0) {
                    continue;
                }
                br.entries.push_back({pq.first, pq.second, a});
                if (pq.first == pq.second) {
                    br.full.push_back({pq.first, pq.first, a});
                } else {
                    br.full.push_back({pq.first, pq.second, 0.5 * a});
                    br.full.push_back({pq.second, pq.first, 0.5 * a});
                }
            }
            if (!br.entries.empty()) {
                sf.blocks[k].rows.push_back(std::move(br));
                touched = true;
            }
        }
    };

    int row = 0;
    for (const auto& con : prog.constraints()) {
        bool touched = false;
        const double shift = add_vars(con.expr, row, touched);
        add_blocks(con.expr, row, touched);
        if (con.sense != Sense::equal) {
            const int s = sf.n_lp++;
            c_lp.push_back(0.0);
            lp_trip.emplace_back(row, s, con.sense == Sense::less_equal ? 1.0 : -1.0);
            touched = true;
        }
        const double b = con.rhs - con.expr.constant - shift;
        if (!touched) {
            if (std::abs(b) > 1e-9 * (1.0 + std::abs(con.rhs))) {
                sf.trivially_infeasible = true;
            }
            // drop the row; undo any block rows (none were added)
            continue;
        }
        rhs.push_back(b);
        ++row;
    }
    for (auto [j, width] : range_rows) {
        const int s = sf.n_lp++;
        c_lp.push_back(0.0);
        lp_trip.emplace_back(row, j, 1.0);
        lp_trip.emplace_back(row, s, 1.0);
        rhs.push_back(width);
        ++row;
    }
    sf.m = row;

    // objective
    const auto& obj = prog.objective();
    sf.c_const = obj.constant;
    for (auto t : obj.vars) {
        const auto& vm = sf.var_map[t.var];
        sf.c_const += t.coef * vm.offset;
        if (vm.kind == VarMap::lp) {
            c_lp[vm.index] += t.coef * vm.sign;
        } else if (vm.kind == VarMap::free) {
            c_free[vm.index] += t.coef;
        }
    }
    {
        std::map<int, std::map<std::pair<int, int>, double>> per_block;
        for (const auto& t : obj.entries) {
            map_block_term(ublocks[t.block], t, per_block[t.block], 1.0);
        }
        for (auto& [k, acc] : per_block) {
            auto& c = sf.blocks[k].c;
            for (auto [pq, a] : acc) {
                if (pq.first == pq.second) {
                    c(pq.first, pq.first) += a;
                } else {
                    c(pq.first, pq.second) += 0.5 * a;
                    c(pq.second, pq.first) += 0.5 * a;
                }
            }
        }
    }

    sf.b = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    sf.c_lp = Eigen::Map<Eigen::VectorXd>(c_lp.data(), static_cast<Eigen::Index>(c_lp.size()));
    sf.c_free = Eigen::Map<Eigen::VectorXd>(c_free.data(), static_cast<Eigen::Index>(c_free.size()));
    sf.a_lp.resize(sf.m, sf.n_lp);
    sf.a_lp.setFromTriplets(lp_trip.begin(), lp_trip.end());
    sf.a_free.resize(sf.m, sf.n_free);
    sf.a_free.setFromTriplets(free_trip.begin(), free_trip.end());
    return sf;
}

/// Scales every row to unit max coefficient and the objective to unit max
/// coefficient. Leaves the primal solution unchanged.
inline void equilibrate(StandardForm& sf) {
    Eigen::VectorXd rmax = Eigen::VectorXd::Zero(sf.m);
    auto note = [&](int r, double v) { rmax(r) = std::max(rmax(r), std::abs(v)); };
    for (int j = 0; j < sf.a_lp.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(sf.a_lp, j); it; ++it) {
            note(static_cast<int>(it.row()), it.value());
        }
    }
    for (int j = 0; j < sf.a_free.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(sf.a_free, j); it; ++it) {
            note(static_cast<int>(it.row()), it.value());
        }
    }
    for (const auto& blk : sf.blocks) {
        for (const auto& br : blk.rows) {
            for (const auto& e : br.full) {
                note(br.row, e.v);
            }
        }
    }
    Eigen::VectorXd r(sf.m);
    for (int i = 0; i < sf.m; ++i) {
        r(i) = rmax(i) > 0.0 ? 1.0 / rmax(i) : 1.0;
    }
    sf.b = sf.b.cwiseProduct(r);
    sf.a_lp = r.asDiagonal() * sf.a_lp;
    sf.a_free = r.asDiagonal() * sf.a_free;
    for (auto& blk : sf.blocks) {
        for (auto& br : blk.rows) {
            for (auto& e : br.entries) {
                e.a *= r(br.row);
            }
            for (auto& e : br.full) {
                e.v *= r(br.row);
            }
        }
    }

    double cmax = sf.c_lp.size() ? sf.c_lp.cwiseAbs().maxCoeff() : 0.0;
    if (sf.c_free.size()) {
        cmax = std::max(cmax, sf.c_free.cwiseAbs().maxCoeff());
    }
    for (const auto& blk : sf.blocks) {
        cmax = std::max(cmax, blk.c.cwiseAbs().maxCoeff());
    }
    sf.obj_scale = std::max(1.0, cmax);
    sf.c_lp /= sf.obj_scale;
    sf.c_free /= sf.obj_scale;
    sf.c_const /= sf.obj_scale;
    for (auto& blk : sf.blocks) {
        blk.c /= sf.obj_scale;
    }
}

/// <A_row, G> for every row touching the block (G need not be symmetric).
inline void block_apply(const StdBlock& blk, const Eigen::MatrixXd& g, Eigen::VectorXd& out) {
    for (const auto& br : blk.rows) {
        double s = 0.0;
        for (const auto& e : br.entries) {
            s += e.p == e.q ? e.a * g(e.p, e.p) : 0.5 * e.a * (g(e.p, e.q) + g(e.q, e.p));
        }
        out(br.row) += s;
    }
}

/// sum_row y_row * A_row
inline Eigen::MatrixXd block_adjoint(const StdBlock& blk, const Eigen::VectorXd& y) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(blk.dim, blk.dim);
    for (const auto& br : blk.rows) {
        const double w = y(br.row);
        if (w == 0.0) {
            continue;
        }
        for (const auto& e : br.full) {
            s(e.p, e.q) += w * e.v;
        }
    }
    return s;
}

inline Eigen::MatrixXd sym(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

/// Largest alpha in (0, cap] keeping X + alpha dX PSD.
inline double max_step_psd(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dx) {
    Eigen::LLT<Eigen::MatrixXd> llt(x);
    if (llt.info() != Eigen::Success) {
        return 0.0;
    }
    const Eigen::MatrixXd l_inv_dx = llt.matrixL().solve(dx);
    const Eigen::MatrixXd s = llt.matrixL().solve(l_inv_dx.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(s), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

inline double max_step_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
    double a = kInf;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (dx(i) < 0.0) {
            a = std::min(a, -x(i) / dx(i));
        }
    }
    return a;
}

class InteriorPoint {
public:
    InteriorPoint(const StandardForm& sf, const SolverOptions& opts) : sf_(sf), opts_(opts) {}

    struct Result {
        SolveStatus status;
        int iterations;
        std::vector<IterateRecord> trace;
        bool reduced_accuracy = false;
    };

    Result run();

    Eigen::VectorXd x_lp, z_lp, x_free, y;
    std::vector<Eigen::MatrixXd> xs, zs;
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    double rel_gap = 0.0;

private:
    struct Direction {
        Eigen::VectorXd dy, dx_lp, dz_lp, dx_free;
        std::vector<Eigen::MatrixXd> dxs, dzs;
    };

    void initialize();
    Eigen::VectorXd apply_a(const Eigen::VectorXd& xl, const Eigen::VectorXd& xf,
                            const std::vector<Eigen::MatrixXd>& xb) const;
    bool factor();
    Eigen::VectorXd solve_kkt(const Eigen::VectorXd& rhs) const;
    void direction(const Eigen::VectorXd& rc_lp, const std::vector<Eigen::MatrixXd>& rc_blk, Direction& d) const;

    const StandardForm& sf_;
    SolverOptions opts_;
    int nu_ = 0;

    // residuals at the current iterate
    Eigen::VectorXd rp_, rd_lp_, rd_free_;
    std::vector<Eigen::MatrixXd> rd_blk_, zinv_;

    Eigen::SparseMatrix<double> kkt_;  // lower triangle, regularized
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    bool analyzed_ = false;
};

inline void InteriorPoint::initialize() {
    const int m = sf_.m;
    y = Eigen::VectorXd::Zero(m);
    x_free = Eigen::VectorXd::Zero(sf_.n_free);

    // row norms per cone, used to size the starting point
    Eigen::VectorXd lp_col_norm = Eigen::VectorXd::Zero(sf_.n_lp);
    for (int j = 0; j < sf_.a_lp.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(sf_.a_lp, j); it; ++it) {
            lp_col_norm(j) = std::max(lp_col_norm(j), std::abs(it.value()));
        }
    }
    double bmax = sf_.b.size() ? sf_.b.cwiseAbs().maxCoeff() : 0.0;
    x_lp = Eigen::VectorXd::Constant(sf_.n_lp, std::max(1.0, 1.0 + bmax));
    z_lp = Eigen::VectorXd::Constant(sf_.n_lp, 1.0);
    for (int j = 0; j < sf_.n_lp; ++j) {
        z_lp(j) = std::max({1.0, std::abs(sf_.c_lp(j)), lp_col_norm(j)});
    }
    x_lp = x_lp.cwiseMax(1.0);

    xs.clear();
    zs.clear();
    nu_ = sf_.n_lp;
    for (const auto& blk : sf_.blocks) {
        const double d = blk.dim;
        double xi = std::max(10.0, std::sqrt(d));
        double eta = std::max({10.0, std::sqrt(d), blk.c.norm()});
        for (const auto& br : blk.rows) {
            double fro = 0.0;
            for (const auto& e : br.full) {
                fro += e.v * e.v;
            }
            fro = std::sqrt(fro);
            xi = std::max(xi, d * (1.0 + std::abs(sf_.b(br.row))) / (1.0 + fro));
            eta = std::max(eta, fro);
        }
        xs.push_back(xi * Eigen::MatrixXd::Identity(blk.dim, blk.dim));
        zs.push_back(eta * Eigen::MatrixXd::Identity(blk.dim, blk.dim));
        nu_ += blk.dim;
    }
}

inline Eigen::VectorXd InteriorPoint::apply_a(const Eigen::VectorXd& xl, const Eigen::VectorXd& xf,
                                              const std::vector<Eigen::MatrixXd>& xb) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(sf_.m);
    if (sf_.n_lp) {
        out += sf_.a_lp * xl;
    }
    if (sf_.n_free) {
        out += sf_.a_free * xf;
    }
    for (std::size_t k = 0; k < sf_.blocks.size(); ++k) {
        block_apply(sf_.blocks[k], xb[k], out);
    }
    return out;
}

inline bool InteriorPoint::factor() {
    const int m = sf_.m;
    const int nf = sf_.n_free;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * 8);

    Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
    // LP cone: sum_j (x_j / z_j) a_j a_j^T
    for (int j = 0; j < sf_.a_lp.outerSize(); ++j) {
        const double d = x_lp(j) / z_lp(j);
        for (Eigen::SparseMatrix<double>::InnerIterator it(sf_.a_lp, j); it; ++it) {
            for (Eigen::SparseMatrix<double>::InnerIterator jt(sf_.a_lp, j); jt; ++jt) {
                if (jt.row() > it.row()) {
                    continue;
                }
                const double v = d * it.value() * jt.value();
                if (jt.row() == it.row()) {
                    diag(it.row()) += v;
                } else {
                    trip.emplace_back(it.row(), jt.row(), v);
                }
            }
        }
    }
    // PSD blocks: M_ij = tr(A_i X A_j Z^-1)
    for (std::size_t k = 0; k < sf_.blocks.size(); ++k) {
        const auto& blk = sf_.blocks[k];
        const auto& x = xs[k];
        const auto& zi = zinv_[k];
        const auto nrows = blk.rows.size();
        for (std::size_t a = 0; a < nrows; ++a) {
            const auto& fa = blk.rows[a].full;
            for (std::size_t b = 0; b <= a; ++b) {
                const auto& fb = blk.rows[b].full;
                double v = 0.0;
                for (const auto& e : fa) {
                    for (const auto& f : fb) {
                        v += e.v * f.v * x(e.q, f.p) * zi(f.q, e.p);
                    }
                }
                const int ra = blk.rows[a].row;
                const int rb = blk.rows[b].row;
                if (ra == rb) {
                    diag(ra) += v;
                } else {
                    trip.emplace_back(std::max(ra, rb), std::min(ra, rb), v);
                }
            }
        }
    }
    const double scale = 1.0 + (m ? diag.cwiseAbs().maxCoeff() : 0.0);
    const double reg = 1e-14 * scale;
    for (int i = 0; i < m; ++i) {
        trip.emplace_back(i, i, diag(i) + reg);
    }
    // free variables: [[M, A_f], [A_f^T, -reg]]
    for (int j = 0; j < sf_.a_free.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(sf_.a_free, j); it; ++it) {
            trip.emplace_back(m + j, it.row(), it.value());
        }
        trip.emplace_back(m + j, m + j, -1e-10 * scale);
    }
    kkt_.resize(m + nf, m + nf);
    kkt_.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_) {
        ldlt_.analyzePattern(kkt_);
        analyzed_ = true;
    }
    ldlt_.factorize(kkt_);
    return ldlt_.info() == Eigen::Success;
}

inline Eigen::VectorXd InteriorPoint::solve_kkt(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd sol = ldlt_.solve(rhs);
    // one step of iterative refinement
    const Eigen::VectorXd r = rhs - kkt_.selfadjointView<Eigen::Lower>() * sol;
    sol += ldlt_.solve(r);
    return sol;
}

inline void InteriorPoint::direction(const Eigen::VectorXd& rc_lp, const std::vector<Eigen::MatrixXd>& rc_blk,
                                     Direction& d) const {
    const int m = sf_.m;
    const int nf = sf_.n_free;
    const auto nb = sf_.blocks.size();

    // h = rp - A(Rc) + A(X Rd Z^-1)
    Eigen::VectorXd lp_term(sf_.n_lp);
    for (int j = 0; j < sf_.n_lp; ++j) {
        lp_term(j) = rc_lp(j) - x_lp(j) * rd_lp_(j) / z_lp(j);
    }
    std::vector<Eigen::MatrixXd> blk_term(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        blk_term[k] = rc_blk[k] - xs[k] * rd_blk_[k] * zinv_[k];
    }
    Eigen::VectorXd rhs(m + nf);
    rhs.head(m) = rp_ - apply_a(lp_term, Eigen::VectorXd::Zero(nf), blk_term);
    rhs.tail(nf) = rd_free_;

    const Eigen::VectorXd sol = solve_kkt(rhs);
    d.dy = sol.head(m);
    d.dx_free = sol.tail(nf);

    const Eigen::VectorXd aty = sf_.n_lp ? Eigen::VectorXd(sf_.a_lp.transpose() * d.dy)
                                         : Eigen::VectorXd::Zero(0);
    d.dz_lp = rd_lp_ - aty;
    d.dx_lp.resize(sf_.n_lp);
    for (int j = 0; j < sf_.n_lp; ++j) {
        d.dx_lp(j) = rc_lp(j) - x_lp(j) * d.dz_lp(j) / z_lp(j);
    }
    d.dxs.resize(nb);
    d.dzs.resize(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        d.dzs[k] = rd_blk_[k] - block_adjoint(sf_.blocks[k], d.dy);
        d.dxs[k] = sym(rc_blk[k] - xs[k] * d.dzs[k] * zinv_[k]);
    }
}

inline InteriorPoint::Result InteriorPoint::run() {
    initialize();
    const auto nb = sf_.blocks.size();
    std::vector<IterateRecord> trace;
    const double b_norm = sf_.b.norm();
    double c_norm2 = sf_.c_lp.squaredNorm() + sf_.c_free.squaredNorm();
    for (const auto& blk : sf_.blocks) {
        c_norm2 += blk.c.squaredNorm();
    }
    const double c_norm = std::sqrt(c_norm2);

    rd_blk_.resize(nb);
    zinv_.resize(nb);
    SolveStatus status = SolveStatus::max_iter;
    int iter = 0;
    struct Snapshot {
        double merit = kInf;
        Eigen::VectorXd x_lp, z_lp, x_free, y;
        std::vector<Eigen::MatrixXd> xs, zs;
        double pobj = 0.0, dobj = 0.0, gap = 0.0;
    } best;
    int since_best = 0;
    bool reduced = false;
    auto restore_best = [&] {
        x_lp = best.x_lp;
        z_lp = best.z_lp;
        x_free = best.x_free;
        y = best.y;
        xs = best.xs;
        zs = best.zs;
        primal_obj = best.pobj;
        dual_obj = best.dobj;
        rel_gap = best.gap;
    };
    for (;; ++iter) {
        // residuals
        rp_ = sf_.b - apply_a(x_lp, x_free, xs);
        rd_lp_ = sf_.c_lp - z_lp;
        if (sf_.n_lp) {
            rd_lp_ -= sf_.a_lp.transpose() * y;
        }
        rd_free_ = sf_.c_free;
        if (sf_.n_free) {
            rd_free_ -= sf_.a_free.transpose() * y;
        }
        double dres2 = rd_lp_.squaredNorm() + rd_free_.squaredNorm();
        double gap = x_lp.dot(z_lp);
        double pobj = sf_.c_lp.dot(x_lp) + sf_.c_free.dot(x_free);
        double aty_plus_z2 = (rd_lp_ - sf_.c_lp).squaredNorm() + (rd_free_ - sf_.c_free).squaredNorm();
        for (std::size_t k = 0; k < nb; ++k) {
            rd_blk_[k] = sf_.blocks[k].c - block_adjoint(sf_.blocks[k], y) - zs[k];
            dres2 += rd_blk_[k].squaredNorm();
            aty_plus_z2 += (rd_blk_[k] - sf_.blocks[k].c).squaredNorm();
            gap += (xs[k].cwiseProduct(zs[k])).sum();
            pobj += (sf_.blocks[k].c.cwiseProduct(xs[k])).sum();
        }
        const double by = sf_.b.dot(y);
        primal_obj = pobj + sf_.c_const;
        dual_obj = by + sf_.c_const;
        const double pinf = rp_.norm() / (1.0 + b_norm);
        const double dinf = std::sqrt(dres2) / (1.0 + c_norm);
        rel_gap = std::abs(primal_obj - dual_obj) / (1.0 + std::abs(primal_obj) + std::abs(dual_obj));
        const double mu = nu_ > 0 ? gap / nu_ : 0.0;
        trace.push_back({primal_obj, dual_obj, gap, pinf, dinf});

        if (pinf <= opts_.tol_feas && dinf <= opts_.tol_feas &&
            (rel_gap <= opts_.tol_gap || gap / (1.0 + std::abs(primal_obj)) <= 0.1 * opts_.tol_gap)) {
            status = SolveStatus::optimal;
            break;
        }
        // infeasibility certificates
        if (by > 0.0 && std::sqrt(aty_plus_z2) / by <= opts_.tol_infeas) {
            status = SolveStatus::infeasible;
            break;
        }
        const double cx = pobj;
        if (cx < 0.0) {
            const double ax = (sf_.b - rp_).norm();
            if (ax / -cx <= opts_.tol_infeas) {
                status = SolveStatus::unbounded;
                break;
            }
        }
        if (!std::isfinite(mu) || !std::isfinite(by) || !std::isfinite(pobj)) {
            status = SolveStatus::numerical_error;
            break;
        }
        // progress bookkeeping for stall detection
        const double merit = std::max({pinf / opts_.tol_feas, dinf / opts_.tol_feas,
                                       std::min(rel_gap, gap / (1.0 + std::abs(primal_obj))) / opts_.tol_gap});
        if (std::isfinite(merit) && merit < 0.99 * best.merit) {
            best = {merit, x_lp, z_lp, x_free, y, xs, zs, primal_obj, dual_obj, rel_gap};
            since_best = 0;
        } else if (++since_best >= opts_.stall_window) {
            restore_best();
            if (best.merit <= opts_.reduced_factor) {
                status = SolveStatus::optimal;
                reduced = true;
            } else {
                status = SolveStatus::numerical_error;
            }
            break;
        }
        if (iter >= opts_.max_iter) {
            status = SolveStatus::max_iter;
            break;
        }
        if (std::abs(by) > 1e12 * (1.0 + c_norm) && pinf > opts_.tol_feas) {
            status = SolveStatus::infeasible;
            break;
        }

        for (std::size_t k = 0; k < nb; ++k) {
            Eigen::LLT<Eigen::MatrixXd> llt(zs[k]);
            zinv_[k] = llt.solve(Eigen::MatrixXd::Identity(zs[k].rows(), zs[k].cols()));
            zinv_[k] = sym(zinv_[k]);
        }
        if (!factor()) {
            restore_best();
            status = best.merit <= opts_.reduced_factor ? SolveStatus::optimal : SolveStatus::numerical_error;
            reduced = status == SolveStatus::optimal;
            break;
        }

        // predictor
        Direction aff;
        std::vector<Eigen::MatrixXd> rc_blk(nb);
        for (std::size_t k = 0; k < nb; ++k) {
            rc_blk[k] = -xs[k];
        }
        direction(-x_lp, rc_blk, aff);
        auto step_lengths = [&](const Direction& d, double& ap, double& ad) {
            ap = std::min(1.0, max_step_lp(x_lp, d.dx_lp));
            ad = std::min(1.0, max_step_lp(z_lp, d.dz_lp));
            for (std::size_t k = 0; k < nb; ++k) {
                ap = std::min(ap, max_step_psd(xs[k], d.dxs[k]));
                ad = std::min(ad, max_step_psd(zs[k], d.dzs[k]));
            }
        };
        double ap = 0.0;
        double ad = 0.0;
        step_lengths(aff, ap, ad);
        double gap_aff = (x_lp + ap * aff.dx_lp).dot(z_lp + ad * aff.dz_lp);
        for (std::size_t k = 0; k < nb; ++k) {
            gap_aff += ((xs[k] + ap * aff.dxs[k]).cwiseProduct(zs[k] + ad * aff.dzs[k])).sum();
        }
        const double sigma = std::clamp(std::pow(std::max(gap_aff, 0.0) / std::max(gap, 1e-300), 3.0), 0.0, 1.0);
        const double target = sigma * mu;

        // corrector
        Eigen::VectorXd rc_lp(sf_.n_lp);
        for (int j = 0; j < sf_.n_lp; ++j) {
            rc_lp(j) = target / z_lp(j) - x_lp(j) - aff.dx_lp(j) * aff.dz_lp(j) / z_lp(j);
        }
        for (std::size_t k = 0; k < nb; ++k) {
            rc_blk[k] = target * zinv_[k] - xs[k] - aff.dxs[k] * aff.dzs[k] * zinv_[k];
        }
        Direction dir;
        direction(rc_lp, rc_blk, dir);
        step_lengths(dir, ap, ad);
        const double gamma = opts_.step_fraction;
        ap = std::min(1.0, gamma * ap);
        ad = std::min(1.0, gamma * ad);

        x_lp += ap * dir.dx_lp;
        x_free += ap * dir.dx_free;
        z_lp += ad * dir.dz_lp;
        y += ad * dir.dy;
        for (std::size_t k = 0; k < nb; ++k) {
            xs[k] = sym(xs[k] + ap * dir.dxs[k]);
            zs[k] = sym(zs[k] + ad * dir.dzs[k]);
        }
    }
    return {status, iter, std::move(trace), reduced};
}

} // namespace detail

/// Solves a conic program. Deterministic for identical input.
inline ConicSolution solve(const ConicProgram& prog, const SolverOptions& opts = {}) {
    auto sf = detail::compile(prog);
    detail::equilibrate(sf);
    ConicSolution sol;
    if (sf.trivially_infeasible) {
        sol.status = SolveStatus::infeasible;
        return sol;
    }
    detail::InteriorPoint ip(sf, opts);
    auto res = ip.run();
    sol.status = res.status;
    sol.iterations = res.iterations;
    sol.reduced_accuracy = res.reduced_accuracy;
    sol.trace = std::move(res.trace);
    for (auto& rec : sol.trace) {
        rec.primal_objective *= sf.obj_scale;
        rec.dual_objective *= sf.obj_scale;
        rec.complementarity *= sf.obj_scale;
    }
    sol.objective = sf.obj_scale * ip.primal_obj;
    sol.dual_objective = sf.obj_scale * ip.dual_obj;
    sol.gap = ip.rel_gap;
    if (sol.status == SolveStatus::infeasible || sol.status == SolveStatus::unbounded) {
        return sol;
    }

    // map back to user variables
    const auto& vars = prog.variables();
    sol.values.resize(vars.size());
    for (std::size_t j = 0; j < vars.size(); ++j) {
        const auto& vm = sf.var_map[j];
        switch (vm.kind) {
        case detail::VarMap::fixed: sol.values[j] = vm.offset; break;
        case detail::VarMap::lp: sol.values[j] = vm.offset + vm.sign * ip.x_lp(vm.index); break;
        case detail::VarMap::free: sol.values[j] = ip.x_free(vm.index); break;
        }
    }
    const auto& ublocks = prog.blocks();
    sol.blocks.resize(ublocks.size());
    double min_eig = kInf;
    for (std::size_t k = 0; k < ublocks.size(); ++k) {
        const auto& x = ip.xs[k];
        const int n = ublocks[k].dim;
        if (ublocks[k].kind == BlockKind::hermitian) {
            const Eigen::MatrixXd a = 0.5 * (x.topLeftCorner(n, n) + x.bottomRightCorner(n, n));
            const Eigen::MatrixXd b = 0.5 * (x.bottomLeftCorner(n, n) - x.topRightCorner(n, n));
            CMatrix w(n, n);
            w.real() = detail::sym(a);
            w.imag() = 0.5 * (b - b.transpose());
            sol.blocks[k] = w;
        } else {
            sol.blocks[k] = detail::sym(x).cast<Complex>();
        }
        Eigen::SelfAdjointEigenSolver<CMatrix> es(sol.blocks[k], Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues()(0));
    }
    sol.min_block_eigenvalue = ublocks.empty() ? 0.0 : min_eig;

    double worst = 0.0;
    for (const auto& con : prog.constraints()) {
        const double lhs = evaluate(con.expr, sol.values, sol.blocks);
        double viol = 0.0;
        switch (con.sense) {
        case Sense::equal: viol = std::abs(lhs - con.rhs); break;
        case Sense::less_equal: viol = std::max(0.0, lhs - con.rhs); break;
        case Sense::greater_equal: viol = std::max(0.0, con.rhs - lhs); break;
        }
        worst = std::max(worst, viol);
    }
    for (std::size_t j = 0; j < vars.size(); ++j) {
        worst = std::max({worst, vars[j].lb - sol.values[j], sol.values[j] - vars[j].ub});
    }
    sol.max_residual = worst;
    return sol;
}

/// Objective of the user program at the returned point (projection included).
inline double objective_value(const ConicProgram& prog, const ConicSolution& sol) {
    return evaluate(prog.objective(), sol.values, sol.blocks);
}

} // namespace evsched

#endif
