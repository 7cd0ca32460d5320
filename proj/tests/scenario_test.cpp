#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "evsched/grid_model.hpp"
#include "evsched/scenario.hpp"
#include "test_support.hpp"

using namespace evsched;
using evsched::testing::case_path;
using evsched::testing::profile_path;

TEST(Scenario, RequiredSlotsUseCeiling) {
    // 100 kWh * 0.8 at 20 kW * 0.5 h = exactly 8 slots
    EXPECT_EQ(required_slots(100.0, 0.2, 1.0, 20.0, 0.5), 8);
    EXPECT_EQ(required_slots(100.0, 0.15, 1.0, 20.0, 0.5), 9);
    EXPECT_EQ(required_slots(0.0, 0.2, 1.0, 20.0, 0.5), 0);
    EXPECT_EQ(required_slots(10.0, 0.0, 0.5, 20.0, 0.5), 2);
    EXPECT_THROW(required_slots(100.0, 0.2, 1.0, 0.0, 0.5), DomainError);
    EXPECT_THROW(required_slots(100.0, 1.2, 1.0, 20.0, 0.5), DomainError);
}

TEST(Scenario, ArrivalSlotsRoundUpToNextBoundary) {
    const TimeGrid g;
    EXPECT_EQ(arrival_slot(18.0, g), 1);
    EXPECT_EQ(arrival_slot(18.1, g), 2);
    EXPECT_EQ(arrival_slot(18.5, g), 2);
    EXPECT_EQ(arrival_slot(23.9, g), 13);
}

TEST(Scenario, ArrivalsAreTruncatedAndDeterministic) {
    const auto a = sample_arrival_hours(500, 7);
    const auto b = sample_arrival_hours(500, 7);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, sample_arrival_hours(500, 8));
    for (double h : a) {
        EXPECT_GE(h, 18.0);
        EXPECT_LT(h, 24.0);
    }
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    EXPECT_NEAR(mean, 20.0, 0.3);
}

TEST(Scenario, ScaledLoadPreservesTotal) {
    const auto profile = load_profile_csv(profile_path("profile2"));
    const TimeGrid g;
    const auto p = scale_load(0.9, profile, g);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 0.9 * 24, 1e-12);
    EXPECT_THROW(scale_load(1.0, flat_profile(3, 0.1), g), DomainError);
}

TEST(Scenario, FleetSizesFollowStationCount) {
    for (const auto& [name, expected] :
         {std::pair{"case9", 126}, std::pair{"case14", 210}, std::pair{"case30", 252}, std::pair{"case57", 294}}) {
        const auto grid = load_case(case_path(name));
        const auto fleet = build_fleet(grid, 42, 1);
        EXPECT_EQ(static_cast<int>(fleet.tasks.size()), expected) << name;
        EXPECT_TRUE(fleet.rejected.empty()) << name;
        for (const auto& t : fleet.tasks) {
            EXPECT_TRUE(grid.generator_at(grid.index_of(t.station)).has_value());
            EXPECT_GE(t.window_length(), t.required);
            EXPECT_LE(t.departure, 24);
            EXPECT_EQ(t.required, 8);
        }
    }
}

TEST(Scenario, FleetIsDeterministicPerSeed) {
    const auto grid = load_case(case_path("case9"));
    EXPECT_EQ(build_fleet(grid, 5, 3).tasks, build_fleet(grid, 5, 3).tasks);
    EXPECT_NE(build_fleet(grid, 5, 3).tasks, build_fleet(grid, 5, 4).tasks);
    EXPECT_TRUE(build_fleet(grid, 0, 3).tasks.empty());
    EXPECT_THROW(build_fleet(grid, -1, 3), DomainError);
}

TEST(Scenario, TaskValidation) {
    const TimeGrid g;
    EXPECT_NO_THROW(validate_task(make_task(BusId{1}, 1, 1, 8, g), g));
    EXPECT_THROW(validate_task(make_task(BusId{1}, 1, 1, 7, g), g), ValidationError);
    EXPECT_THROW(validate_task(make_task(BusId{1}, 1, 20, 25, g), g), ValidationError);
    EXPECT_THROW(validate_task(make_task(BusId{1}, 1, 5, 4, g), g), ValidationError);
}

TEST(Scenario, ScheduleValidation) {
    const TimeGrid g;
    const std::vector<ChargingTask> tasks{make_task(BusId{1}, 1, 3, 12, g)};
    ChargingSchedule s(1, 24, ScheduleMode::binary);
    for (int t = 3; t <= 10; ++t) {
        s.at(0, t) = 1.0;
    }
    EXPECT_NO_THROW(validate_schedule(s, tasks));
    EXPECT_DOUBLE_EQ(s.binary_violation(), 0.0);
    auto early = s;
    early.at(0, 3) = 0.0;
    early.at(0, 2) = 1.0;
    EXPECT_THROW(validate_schedule(early, tasks), ValidationError);
    auto short_by_one = s;
    short_by_one.at(0, 10) = 0.0;
    EXPECT_THROW(validate_schedule(short_by_one, tasks), ValidationError);
    auto fractional = s;
    fractional.at(0, 10) = 0.5;
    EXPECT_THROW(validate_schedule(fractional, tasks), ValidationError);
    fractional.mode = ScheduleMode::relaxed;
    EXPECT_NO_THROW(validate_schedule(fractional, tasks));
    EXPECT_DOUBLE_EQ(fractional.binary_violation(), 0.5);
}

TEST(Scenario, FleetJsonRoundTrip) {
    const auto grid = load_case(case_path("case9"));
    const auto fleet = build_fleet(grid, 3, 11);
    const TimeGrid g;
    EXPECT_EQ(fleet_from_json(fleet_to_json(fleet.tasks), g), fleet.tasks);
    auto j = fleet_to_json(fleet.tasks);
    j[0]["required_slots"] = 3;
    EXPECT_THROW(fleet_from_json(j, g), ValidationError);
    EXPECT_THROW(fleet_from_json(nlohmann::json::object(), g), ParseError);
}

TEST(Scenario, ProfileParsing) {
    const auto p = load_profile_csv(profile_path("profile1"));
    EXPECT_GE(p.slots(), 24);
    EXPECT_NO_THROW(p.validate(24));
    const auto dir = std::filesystem::temp_directory_path() / "evsched_profile_test";
    std::filesystem::create_directories(dir);
    const auto bad_header = dir / "h.csv";
    std::ofstream(bad_header) << "a,b,c\n1,1,0.1\n";
    EXPECT_THROW(load_profile_csv(bad_header.string()), ParseError);
    const auto gap = dir / "g.csv";
    std::ofstream(gap) << "slot,load_fraction,price\n1,1,0.1\n3,1,0.1\n";
    EXPECT_THROW(load_profile_csv(gap.string()), ParseError);
    const auto text = dir / "t.csv";
    std::ofstream(text) << "slot,load_fraction,price\n1,x,0.1\n";
    EXPECT_THROW(load_profile_csv(text.string()), ParseError);
    Profile neg{{1.0, 1.0}, {0.1, -0.1}};
    EXPECT_THROW(neg.validate(2), DomainError);
    EXPECT_THROW(flat_profile(2, 0.1).validate(3), DomainError);
}
