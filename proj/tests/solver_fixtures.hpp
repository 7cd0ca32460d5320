#ifndef EVSCHED_TESTS_SOLVER_FIXTURES_HPP
#define EVSCHED_TESTS_SOLVER_FIXTURES_HPP

// Hand-built SDP/SOCP/LP instances with closed-form optima. Shared by the
// solver unit tests and the acceptance suite.

#include <cmath>
#include <string>
#include <vector>

#include "evsched/sdp_solver.hpp"

namespace evsched::testing {

struct SolverFixture {
    std::string name;
    ConicProgram program;
    double optimum;
};

inline std::vector<SolverFixture> solver_fixtures() {
    std::vector<SolverFixture> out;
    const Complex i{0.0, 1.0};

    {  // min tr W, W11 = 1 -> 1
        ConicProgram p;
        const int w = p.add_block(2);
        p.add_constraint(AffineExpr{}.add_entry(w, 0, 0, 1.0), Sense::equal, 1.0);
        p.add_objective(AffineExpr{}.add_entry(w, 0, 0, 1.0).add_entry(w, 1, 1, 1.0));
        out.push_back({"trace_unit_corner", p, 1.0});
    }
    {  // smallest eigenvalue of [[2,1],[1,2]] via tr X = 1
        ConicProgram p;
        const int x = p.add_block(2, BlockKind::real_symmetric);
        p.add_constraint(AffineExpr{}.add_entry(x, 0, 0, 1.0).add_entry(x, 1, 1, 1.0), Sense::equal, 1.0);
        p.add_objective(AffineExpr{}.add_entry(x, 0, 0, 2.0).add_entry(x, 1, 1, 2.0).add_entry(x, 1, 0, 2.0));
        out.push_back({"min_eigenvalue_real", p, 1.0});
    }
    {  // smallest eigenvalue of Hermitian [[1, i], [-i, 1]] is 0
        ConicProgram p;
        const int w = p.add_block(2);
        p.add_constraint(AffineExpr{}.add_entry(w, 0, 0, 1.0).add_entry(w, 1, 1, 1.0), Sense::equal, 1.0);
        // Re tr(C W) = W00 + W11 + Re(C01 W10) + Re(C10 W01)
        p.add_objective(AffineExpr{}
                            .add_entry(w, 0, 0, 1.0)
                            .add_entry(w, 1, 1, 1.0)
                            .add_entry(w, 1, 0, i)
                            .add_entry(w, 0, 1, -i));
        out.push_back({"min_eigenvalue_hermitian", p, 0.0});
    }
    {  // 2-node max-cut: min -2 X01, diag X = 1 -> -2
        ConicProgram p;
        const int x = p.add_block(2, BlockKind::real_symmetric);
        p.add_constraint(AffineExpr{}.add_entry(x, 0, 0, 1.0), Sense::equal, 1.0);
        p.add_constraint(AffineExpr{}.add_entry(x, 1, 1, 1.0), Sense::equal, 1.0);
        p.add_objective(AffineExpr{}.add_entry(x, 1, 0, -2.0));
        out.push_back({"maxcut_two_nodes", p, -2.0});
    }
    {  // second-order cone: min t, ||(3,4)|| <= t via the arrow matrix -> 5
        ConicProgram p;
        const int x = p.add_block(3, BlockKind::real_symmetric);
        p.add_constraint(AffineExpr{}.add_entry(x, 0, 0, 1.0).add_entry(x, 1, 1, -1.0), Sense::equal, 0.0);
        p.add_constraint(AffineExpr{}.add_entry(x, 0, 0, 1.0).add_entry(x, 2, 2, -1.0), Sense::equal, 0.0);
        p.add_constraint(AffineExpr{}.add_entry(x, 1, 0, 1.0), Sense::equal, 3.0);
        p.add_constraint(AffineExpr{}.add_entry(x, 2, 0, 1.0), Sense::equal, 4.0);
        p.add_constraint(AffineExpr{}.add_entry(x, 2, 1, 1.0), Sense::equal, 0.0);
        p.add_objective(AffineExpr{}.add_entry(x, 0, 0, 1.0));
        out.push_back({"soc_arrow_norm", p, 5.0});
    }
    {  // convex quadratic: min x^2 - 2x -> -1
        ConicProgram p;
        const int x = p.add_variable(-10.0, 10.0);
        p.add_quadratic_cost(x, 1.0);
        p.add_objective(AffineExpr{}.add(x, -2.0));
        out.push_back({"quadratic_epigraph", p, -1.0});
    }
    {  // rotated cone: min s with s * 4 >= 1 -> 0.25
        ConicProgram p;
        const int r = p.add_block(2, BlockKind::real_symmetric);
        const int g = p.add_variable(0.0, 10.0);
        p.add_constraint(AffineExpr{}.add_entry(r, 1, 0, 1.0), Sense::equal, 1.0);
        p.add_constraint(AffineExpr{}.add_entry(r, 1, 1, 1.0).add(g, -1.0), Sense::equal, 0.0);
        p.add_constraint(AffineExpr{}.add(g, 1.0), Sense::less_equal, 4.0);
        p.add_objective(AffineExpr{}.add_entry(r, 0, 0, 1.0));
        out.push_back({"rotated_cone_reciprocal", p, 0.25});
    }
    {  // free variable: min x, x + y = 1, y in [0, 2] -> -1
        ConicProgram p;
        const int x = p.add_variable(-kInf, kInf);
        const int y = p.add_variable(0.0, 2.0);
        p.add_constraint(AffineExpr{}.add(x, 1.0).add(y, 1.0), Sense::equal, 1.0);
        p.add_objective(AffineExpr{}.add(x, 1.0));
        out.push_back({"free_variable_equality", p, -1.0});
    }
    {  // complex coefficient: min Re((1 - i) W01) with W00 = W11 = 1 -> -sqrt(2)
        ConicProgram p;
        const int w = p.add_block(2);
        p.add_constraint(AffineExpr{}.add_entry(w, 0, 0, 1.0), Sense::equal, 1.0);
        p.add_constraint(AffineExpr{}.add_entry(w, 1, 1, 1.0), Sense::equal, 1.0);
        p.add_objective(AffineExpr{}.add_entry(w, 0, 1, Complex{1.0, -1.0}));
        out.push_back({"hermitian_complex_coefficient", p, -std::sqrt(2.0)});
    }
    {  // Lovasz theta of the 5-cycle: max <J, X>, tr X = 1, X_ij = 0 on edges -> sqrt(5)
        ConicProgram p;
        const int x = p.add_block(5, BlockKind::real_symmetric);
        AffineExpr tr;
        for (int k = 0; k < 5; ++k) {
            tr.add_entry(x, k, k, 1.0);
        }
        p.add_constraint(tr, Sense::equal, 1.0);
        AffineExpr obj;
        for (int a = 0; a < 5; ++a) {
            const int b = (a + 1) % 5;
            p.add_constraint(AffineExpr{}.add_entry(x, std::max(a, b), std::min(a, b), 1.0), Sense::equal, 0.0);
            for (int c = 0; c <= a; ++c) {
                obj.add_entry(x, a, c, a == c ? -1.0 : -2.0);
            }
        }
        p.add_objective(obj);
        out.push_back({"lovasz_theta_c5", p, -std::sqrt(5.0)});
    }
    {  // mixed: min tr W + x, W11 >= 2 - x, x in [0, 1], W 3x3 Hermitian -> 2
        ConicProgram p;
        const int w = p.add_block(3);
        const int x = p.add_variable(0.0, 1.0);
        p.add_constraint(AffineExpr{}.add_entry(w, 1, 1, 1.0).add(x, 1.0), Sense::greater_equal, 2.0);
        p.add_objective(
            AffineExpr{}.add_entry(w, 0, 0, 1.0).add_entry(w, 1, 1, 1.0).add_entry(w, 2, 2, 1.0).add(x, 1.0));
        out.push_back({"mixed_block_and_box", p, 2.0});
    }
    {  // two blocks: min W00 + V00 with Re W01 = 1, |W01| <= sqrt(W00 W11), W11 <= 1, V00 >= W00 - 0.5
        // optimum W00 = 1 (W01 = 1, W11 = 1), V00 = 0.5 -> 1.5
        ConicProgram p;
        const int w = p.add_block(2);
        const int v = p.add_block(1);
        p.add_constraint(AffineExpr{}.add_entry(w, 0, 1, 1.0), Sense::equal, 1.0);
        p.add_constraint(AffineExpr{}.add_entry(w, 1, 1, 1.0), Sense::less_equal, 1.0);
        p.add_constraint(AffineExpr{}.add_entry(v, 0, 0, 1.0).add_entry(w, 0, 0, -1.0), Sense::greater_equal,
                         -0.5);
        p.add_objective(AffineExpr{}.add_entry(w, 0, 0, 1.0).add_entry(v, 0, 0, 1.0));
        out.push_back({"coupled_blocks", p, 1.5});
    }
    return out;
}

} // namespace evsched::testing

#endif
