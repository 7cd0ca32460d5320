#include <gtest/gtest.h>

#include "evsched/bruteforce_oracle.hpp"
#include "evsched/opf_relaxation.hpp"
#include "pipeline_fixtures.hpp"
#include "test_support.hpp"

using namespace evsched;
using namespace evsched::testing;

namespace {

SdrPoint solve_relaxation(const HorizonProblem& hp) {
    const auto model = build_sdr(hp);
    const auto sol = solve(model.program);
    EXPECT_TRUE(sol.ok()) << to_string(sol.status);
    return extract_point(hp, model, sol);
}

} // namespace

TEST(OpfRelaxation, ModelHasOneBusSizedBlockPerSlot) {
    const auto grid = load_case(case_path("case9"));
    const auto hp = horizon(grid, 6, 2, 5);
    const auto model = build_sdr(hp);
    ASSERT_EQ(model.w_block.size(), 4u);
    const auto sol = solve(model.program);
    ASSERT_TRUE(sol.ok());
    for (int b : model.w_block) {
        EXPECT_EQ(sol.blocks[b].rows(), 9);
    }
}

TEST(OpfRelaxation, TwoBusRelaxationMatchesOracle) {
    const auto grid = two_bus();
    const auto hp = horizon(grid, 1, 1, 1);
    const auto pt = solve_relaxation(hp);
    OracleInstance inst{grid, hp.time, {}, hp.loads, hp.price};
    const auto orc = oracle_solve(inst);
    // relaxation bound, tight on a single line
    EXPECT_LE(pt.total_cost(), orc.cost * (1.0 + 1e-6));
    EXPECT_NEAR(pt.total_cost(), orc.cost, 1e-4 * orc.cost);
    EXPECT_LE(rank_residual(pt.w[0]), 1e-6 * pt.w[0].trace().real());
}

TEST(OpfRelaxation, RelaxationBoundsOracleWithChargers) {
    const Case3Fixture fx;
    const auto pt = solve_relaxation(fx.problem());
    const auto orc = oracle_solve(fx.oracle_instance());
    EXPECT_LE(pt.total_cost(), orc.cost * (1.0 + 1e-6));
}

TEST(OpfRelaxation, FixedScheduleChargesPowerAtStationBus) {
    const Case3Fixture fx;
    auto hp = fx.problem();
    ChargingSchedule tau(2, 4, ScheduleMode::binary);
    tau.at(0, 1) = tau.at(0, 4) = 1.0;
    tau.at(1, 2) = tau.at(1, 4) = 1.0;
    auto idle = hp;
    idle.tasks.clear();
    idle.remaining_kwh.clear();
    hp.fixed_tau = tau;
    const auto with = solve_relaxation(hp);
    const auto without = solve_relaxation(idle);
    // 10 MW = 0.1 p.u. per charger plus losses
    EXPECT_GT(with.pg[0][0] - without.pg[0][0], 0.1);
    EXPECT_GT(with.pg[3][0] - without.pg[3][0], 0.2);
    EXPECT_NEAR(with.charging_cost[3], 2 * hp.price[3] * 10000.0 * 0.5, 1e-9);
}

TEST(OpfRelaxation, DemandRowsForceEnergy) {
    const Case3Fixture fx;
    const auto pt = solve_relaxation(fx.problem());
    for (int i = 0; i < 2; ++i) {
        double slots = 0.0;
        for (int t = 1; t <= 4; ++t) {
            slots += pt.tau.at(i, t);
        }
        EXPECT_GE(slots, 2.0 - 1e-6);
    }
    EXPECT_DOUBLE_EQ(pt.tau.at(1, 1), 0.0);  // before arrival
}

TEST(OpfRelaxation, ValidationErrors) {
    const auto grid = two_bus();
    auto hp = horizon(grid, 4, 1, 2, {make_task(BusId{2}, 1, 1, 3, TimeGrid{4, 0.5, 18.0}, 10.0, 0.0, 20.0)});
    EXPECT_THROW(build_sdr(hp), DomainError);  // departs after the window
    hp.last_slot = 3;
    EXPECT_NO_THROW(build_sdr(hp));
    auto frac = hp;
    frac.fixed_tau = ChargingSchedule(1, 4, ScheduleMode::binary);
    frac.fixed_tau->at(0, 1) = 0.5;
    EXPECT_THROW(build_sdr(frac), DomainError);
    auto outside = hp;
    outside.fixed_tau = ChargingSchedule(1, 4, ScheduleMode::binary);
    outside.fixed_tau->at(0, 4) = 1.0;
    EXPECT_THROW(build_sdr(outside), DomainError);
    auto empty = hp;
    empty.first_slot = 3;
    empty.last_slot = 2;
    EXPECT_THROW(build_sdr(empty), DomainError);
    auto mismatch = hp;
    mismatch.remaining_kwh.clear();
    EXPECT_THROW(build_sdr(mismatch), DomainError);
}

TEST(OpfRelaxation, BalanceResidualOfExactPowerFlow) {
    const auto grid = two_bus();
    const auto hp = horizon(grid, 1, 1, 1);
    OracleInstance inst{grid, hp.time, {}, hp.loads, hp.price};
    const auto orc = oracle_solve(inst);
    const auto& d = orc.slots[0];
    EXPECT_LE(recovered_balance_residual(grid, d.voltage, d.pg, d.qg, hp.loads.p[0], hp.loads.q[0], {0.0, 0.0}),
              1e-8);
    EXPECT_THROW(recovered_balance_residual(grid, d.voltage, d.pg, d.qg, hp.loads.p[0], hp.loads.q[0], {0.0}),
                 DomainError);
}
