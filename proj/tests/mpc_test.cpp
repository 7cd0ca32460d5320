#include <numeric>

#include <gtest/gtest.h>

#include "evsched/bruteforce_oracle.hpp"
#include "evsched/harness.hpp"
#include "evsched/mpc_controller.hpp"
#include "test_support.hpp"

using namespace evsched;
using namespace evsched::testing;

namespace {

MpcOptions toy_options() {
    MpcOptions o;
    o.stage1.mu1 = 1e3;
    return o;
}

Scenario toy(std::uint64_t seed) {
    return make_toy_scenario(load_case(case_path("case3")), load_profile_csv(profile_path("profile2")), seed);
}

double rel_slack(double x) { return 1e-6 * (1.0 + std::abs(x)); }

} // namespace

TEST(Mpc, EmptyFleetDecomposesIntoSlotOpfs) {
    const auto grid = load_case(case_path("case9"));
    const TimeGrid tg{3, 0.5, 18.0};
    const auto sc = make_scenario(grid, load_profile_csv(profile_path("profile1")), tg, {});
    const auto rep = run_dynamic(sc);
    ASSERT_EQ(rep.slots.size(), 3u);
    double sum = 0.0;
    for (int t = 1; t <= 3; ++t) {
        HorizonProblem hp;
        hp.grid = &sc.grid;
        hp.time = tg;
        hp.first_slot = hp.last_slot = t;
        hp.loads = sc.loads;
        hp.price = sc.price;
        const auto model = build_sdr(hp);
        const auto sol = solve(model.program, stage_solver_options());
        ASSERT_TRUE(sol.ok());
        sum += extract_point(hp, model, sol).total_cost();
        EXPECT_EQ(rep.slots[t - 1].horizon_end, t);
        EXPECT_TRUE(rep.slots[t - 1].connected.empty());
        EXPECT_DOUBLE_EQ(rep.slots[t - 1].charging_cost, 0.0);
    }
    EXPECT_NEAR(rep.total_cost(), sum, 1e-6 * sum);
    EXPECT_EQ(rep.binary_variables, 0);
    const auto st = run_static(sc);
    EXPECT_NEAR(st.total_cost(), rep.total_cost(), 1e-6 * sum);
}

TEST(Mpc, DeadlineTightTaskChargesEverySlot) {
    const auto grid = two_bus();
    const TimeGrid tg{3, 0.5, 18.0};
    const auto sc = make_scenario(grid, flat_profile(3, 0.1), tg, {make_task(BusId{2}, 1, 1, 3, tg, 30.0, 0.0, 20.0)});
    const auto rep = run_dynamic(sc);
    for (int t = 1; t <= 3; ++t) {
        EXPECT_EQ(rep.schedule.at(0, t), 1.0);
    }
    EXPECT_EQ(rep.tasks[0].completion_slot, 3);
    EXPECT_TRUE(rep.all_completed());
}

TEST(Mpc, SingleSlotHorizonMatchesStatic) {
    const auto grid = two_bus();
    const TimeGrid tg{1, 0.5, 18.0};
    const auto sc = make_scenario(grid, flat_profile(1, 0.1), tg, {make_task(BusId{2}, 1, 1, 1, tg, 10.0, 0.0, 20.0)});
    const auto dyn = run_dynamic(sc);
    const auto sta = run_static(sc);
    EXPECT_NEAR(dyn.total_cost(), sta.total_cost(), 1e-9 * sta.total_cost());
    EXPECT_EQ(dyn.schedule.values, sta.schedule.values);
}

TEST(Mpc, ToyEpisodesRespectInvariants) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto sc = toy(seed);
        const auto dyn = run_dynamic(sc, toy_options());
        const auto sta = run_static(sc, toy_options());
        EXPECT_EQ(dyn.fallback_count, 0) << seed;
        EXPECT_TRUE(check_demand_conservation(sc, dyn).empty()) << seed;
        EXPECT_TRUE(check_demand_conservation(sc, sta).empty()) << seed;
        EXPECT_TRUE(check_horizon_consistency(sc, dyn).empty()) << seed;
        EXPECT_GE(dyn.total_cost(), sta.total_cost() - rel_slack(sta.total_cost())) << seed;
        validate_schedule(dyn.schedule, sc.tasks);
        validate_schedule(sta.schedule, sc.tasks);
        for (const auto& r : dyn.slots) {
            EXPECT_TRUE(r.stage1_monotone && r.stage2_monotone) << seed << " slot " << r.slot;
        }
    }
}

TEST(Mpc, ScheduleIsCausal) {
    const auto grid = load_case(case_path("case9"));
    const TimeGrid tg{24, 0.5, 18.0};
    FleetOptions fo;
    auto fleet = build_fleet(grid, 1, 5, fo).tasks;
    const auto sc = make_scenario(grid, load_profile_csv(profile_path("profile2")), tg, fleet);
    const auto rep = run_dynamic(sc);
    int latest = 1;
    for (const auto& t : sc.tasks) {
        latest = std::max(latest, t.arrival);
    }
    ASSERT_GT(latest, 1);
    EXPECT_TRUE(check_causality(sc, {}, latest - 1, rep));
}

TEST(Mpc, IsDeterministic) {
    const auto sc = toy(2);
    const auto a = run_dynamic(sc, toy_options());
    const auto b = run_dynamic(sc, toy_options());
    EXPECT_EQ(a.total_cost(), b.total_cost());
    EXPECT_EQ(a.schedule.values, b.schedule.values);
    for (std::size_t t = 0; t < a.slots.size(); ++t) {
        EXPECT_EQ(a.slots[t].voltage, b.slots[t].voltage);
    }
}

TEST(Mpc, ChargingConcentratesInCheapSlots) {
    // flat load, price 3:1 between the first and second half, slack-rich windows
    const auto grid = load_case(case_path("case3"));
    const TimeGrid tg{4, 0.5, 18.0};
    Profile profile{{1.0, 1.0, 1.0, 1.0}, {0.3, 0.3, 0.1, 0.1}};
    const std::vector<ChargingTask> tasks{make_task(BusId{2}, 1, 1, 4, tg, 5000.0, 0.0, 10000.0),
                                          make_task(BusId{3}, 2, 1, 4, tg, 5000.0, 0.0, 10000.0)};
    const auto sc = make_scenario(grid, profile, tg, tasks);
    const auto sta = run_static(sc, toy_options());
    const auto orc = oracle_solve(to_oracle_instance(sc));
    const auto mass = [](const ChargingSchedule& s, int a, int b) {
        double m = 0.0;
        for (int i = 0; i < s.tasks(); ++i) {
            for (int t = a; t <= b; ++t) {
                m += s.at(i, t);
            }
        }
        return m;
    };
    EXPECT_GT(mass(orc.tau, 3, 4), mass(orc.tau, 1, 2));
    EXPECT_GT(mass(sta.schedule, 3, 4), mass(sta.schedule, 1, 2));
    EXPECT_NEAR(sta.total_cost(), orc.cost, 1e-2 * orc.cost);
}

TEST(Mpc, UrgencyFallbackShedsAngleLimits) {
    std::vector<Bus> buses{{BusId{1}, 0.9, 1.1, 0.0, 0.0}, {BusId{2}, 0.9, 1.1, 0.5, 0.1}};
    std::vector<Line> lines{{BusId{1}, BusId{2}, Complex{2.941, -11.765}}};
    std::vector<Generator> gens{{BusId{1}, 0.0, 2.0, -1.0, 1.0, GenCost{0.1, 20.0, 0.0}}};
    // the load alone needs about 0.04 rad across the line
    const GridCase grid(100.0, buses, lines, gens, {{BusId{1}, BusId{2}, 0.01}});
    const TimeGrid tg{2, 0.5, 18.0};
    const auto sc = make_scenario(grid, flat_profile(2, 0.1), tg, {make_task(BusId{2}, 1, 1, 2, tg, 20.0, 0.0, 20.0)});
    const auto rep = run_dynamic(sc);
    EXPECT_EQ(rep.fallback_count, 2);
    for (const auto& r : rep.slots) {
        EXPECT_TRUE(r.fallback);
        EXPECT_TRUE(r.angle_limits_shed);
        EXPECT_GT(r.angle_violation, 0.0);
        EXPECT_LE(r.balance_residual, 1e-4);
    }
    EXPECT_TRUE(rep.all_completed());
}

TEST(Mpc, ReportSerializes) {
    const auto sc = toy(1);
    auto rep = run_dynamic(sc, toy_options());
    const auto j = to_json(rep);
    EXPECT_EQ(j.at("slots").size(), rep.slots.size());
    EXPECT_EQ(j.at("tasks").size(), sc.tasks.size());
    EXPECT_DOUBLE_EQ(j.at("totals").at("total_cost").get<double>(), rep.total_cost());
    std::ostringstream sched, gen;
    write_schedule_csv(sched, rep);
    write_generation_csv(gen, sc.grid, rep);
    const auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
    EXPECT_EQ(lines(sched.str()), 1 + static_cast<long>(sc.tasks.size()));
    EXPECT_EQ(lines(gen.str()), 1 + static_cast<long>(sc.time.num_slots * sc.grid.bus_count()));
}

TEST(Mpc, StepPastTheEndThrows) {
    const auto sc = toy(1);
    MpcState st = initial_state(sc);
    st.slot = sc.time.num_slots + 1;
    EXPECT_THROW(mpc_step(sc, st), DomainError);
}
