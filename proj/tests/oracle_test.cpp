#include <filesystem>

#include <gtest/gtest.h>

#include "evsched/bruteforce_oracle.hpp"
#include "pipeline_fixtures.hpp"
#include "test_support.hpp"

using namespace evsched;
using namespace evsched::testing;

namespace {

OracleInstance two_bus_instance(int slots, std::vector<ChargingTask> tasks, double p_min = 0.0) {
    const auto grid = two_bus(p_min);
    const auto hp = horizon(grid, slots, 1, slots);
    return OracleInstance{grid, hp.time, std::move(tasks), hp.loads, hp.price};
}

} // namespace

TEST(Oracle, ForcedScheduleIsReturned) {
    const TimeGrid tg{3, 0.5, 18.0};
    // 30 kWh at 20 kW * 0.5 h fills the whole 3-slot window
    const auto inst = two_bus_instance(3, {make_task(BusId{2}, 1, 1, 3, tg, 30.0, 0.0, 20.0)});
    const auto r = oracle_solve(inst);
    EXPECT_EQ(r.schedules_enumerated, 1u);
    EXPECT_EQ(r.tau.values, Eigen::MatrixXd::Ones(1, 3));
}

TEST(Oracle, DispatchSatisfiesPowerFlowAndLimits) {
    const Case3Fixture fx;
    const auto inst = fx.oracle_instance();
    const auto r = oracle_solve(inst);
    double total = 0.0;
    for (int t = 1; t <= 4; ++t) {
        const auto& d = r.slots[t - 1];
        ASSERT_TRUE(d.feasible);
        const auto draw = pev_draw_by_bus(inst.grid, inst.tasks, r.tau, t);
        EXPECT_LE(recovered_balance_residual(inst.grid, d.voltage, d.pg, d.qg, inst.loads.p[t - 1],
                                             inst.loads.q[t - 1], draw),
                  1e-8);
        for (std::size_t k = 0; k < inst.grid.bus_count(); ++k) {
            EXPECT_GE(std::abs(d.voltage(k)), inst.grid.buses()[k].v_min - 1e-9);
            EXPECT_LE(std::abs(d.voltage(k)), inst.grid.buses()[k].v_max + 1e-9);
        }
        total += d.cost;
        for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
            total += inst.price[t - 1] * inst.tasks[i].rate_kw * inst.time.slot_hours * r.tau.at(i, t);
        }
    }
    EXPECT_NEAR(total, r.cost, 1e-9 * r.cost);
    validate_schedule(r.tau, inst.tasks);
}

TEST(Oracle, PicksCheapestFeasibleSchedule) {
    // same instance with the price of slot 1 raised: charging must leave slot 1
    const Case3Fixture fx;
    auto inst = fx.oracle_instance();
    const auto base = oracle_solve(inst);
    inst.price[0] *= 100.0;
    const auto pricey = oracle_solve(inst);
    EXPECT_EQ(pricey.tau.at(0, 1), 0.0);
    EXPECT_GE(pricey.cost, base.cost);
}

TEST(Oracle, RejectsOversizeInstances) {
    const TimeGrid tg{7, 0.5, 18.0};
    EXPECT_THROW(oracle_solve(two_bus_instance(7, {})), SizeError);
    const TimeGrid small{2, 0.5, 18.0};
    std::vector<ChargingTask> many;
    for (int i = 0; i < 4; ++i) {
        many.push_back(make_task(BusId{2}, i, 1, 2, small, 10.0, 0.0, 20.0));
    }
    EXPECT_THROW(oracle_solve(two_bus_instance(2, many)), SizeError);
    auto big = Case3Fixture{}.oracle_instance();
    big.grid = load_case(case_path("case9"));
    EXPECT_THROW(oracle_solve(big), SizeError);
}

TEST(Oracle, ShortWindowNamesTheTask) {
    const TimeGrid tg{3, 0.5, 18.0};
    auto task = make_task(BusId{2}, 7, 1, 3, tg, 30.0, 0.0, 20.0);
    task.departure = 2;
    try {
        oracle_solve(two_bus_instance(3, {task}));
        FAIL() << "expected InfeasibleError";
    } catch (const InfeasibleError& e) {
        EXPECT_NE(std::string(e.what()).find("task 0"), std::string::npos) << e.what();
    }
}

TEST(Oracle, GridInfeasibilityIsReported) {
    EXPECT_THROW(oracle_solve(two_bus_instance(1, {}, 1.9)), InfeasibleError);
}

TEST(Oracle, CacheRoundTrip) {
    const Case3Fixture fx;
    const auto inst = fx.oracle_instance();
    const auto dir = std::filesystem::temp_directory_path() / "evsched_oracle_cache_test";
    std::filesystem::remove_all(dir);
    const auto first = oracle_solve_cached(inst, dir.string());
    ASSERT_FALSE(std::filesystem::is_empty(dir));
    const auto second = oracle_solve_cached(inst, dir.string());
    EXPECT_DOUBLE_EQ(first.cost, second.cost);
    EXPECT_EQ(first.tau.values, second.tau.values);
    auto other = inst;
    other.price[0] += 0.01;
    EXPECT_NE(oracle_cache_key(inst), oracle_cache_key(other));
    const auto back = oracle_result_from_json(oracle_result_to_json(first));
    EXPECT_EQ(back.slots.size(), first.slots.size());
    EXPECT_LE((back.slots[2].voltage - first.slots[2].voltage).cwiseAbs().maxCoeff(), 1e-15);
}
