#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "evsched/grid_model.hpp"
#include "test_support.hpp"

using namespace evsched;
using evsched::testing::case_path;

namespace {

nlohmann::json small_case() {
    return nlohmann::json::parse(R"({
      "base_mva": 100,
      "buses": [{"id": 1, "v_min": 0.95, "v_max": 1.05, "base_load_p": 0, "base_load_q": 0},
                {"id": 2, "v_min": 0.95, "v_max": 1.05, "base_load_p": 0.5, "base_load_q": 0.1}],
      "lines": [{"from": 1, "to": 2, "admittance": [1.0, -10.0]}],
      "generators": [{"bus": 1, "p_min": 0, "p_max": 2, "q_min": -1, "q_max": 1, "cost": [0.1, 20, 5]}]
    })");
}

} // namespace

TEST(GridModel, BundledCasesHaveExpectedSizes) {
    struct Expect {
        const char* name;
        std::size_t buses;
        std::size_t gens;
    };
    for (const auto& e : {Expect{"case2", 2, 1}, Expect{"case3", 3, 1}, Expect{"case9", 9, 3},
                          Expect{"case14", 14, 5}, Expect{"case30", 30, 6}, Expect{"case57", 57, 7}}) {
        const auto g = load_case(case_path(e.name));
        EXPECT_EQ(g.bus_count(), e.buses) << e.name;
        EXPECT_EQ(g.generator_count(), e.gens) << e.name;
    }
}

TEST(GridModel, JsonRoundTripPreservesCase) {
    const auto g = load_case(case_path("case9"));
    const auto h = case_from_json(case_to_json(g));
    EXPECT_EQ(g.buses(), h.buses());
    EXPECT_EQ(g.lines(), h.lines());
    EXPECT_EQ(g.generators(), h.generators());
}

TEST(GridModel, GenerationCostUsesMegawatts) {
    const auto g = case_from_json(small_case());
    // 0.1 * 100^2 + 20 * 100 + 5
    EXPECT_DOUBLE_EQ(g.generation_cost(0, 1.0), 3005.0);
    EXPECT_DOUBLE_EQ(g.generation_cost(0, 0.0), 5.0);
}

TEST(GridModel, ParallelLinesAreMerged) {
    auto j = small_case();
    j["lines"].push_back({{"from", 2}, {"to", 1}, {"admittance", {0.5, -2.0}}});
    const auto g = case_from_json(j);
    ASSERT_EQ(g.neighbors(0).size(), 1u);
    EXPECT_EQ(g.neighbors(0)[0].admittance, Complex(1.5, -12.0));
    EXPECT_EQ(g.neighbors(1)[0].admittance, Complex(1.5, -12.0));
    const auto nb = admittance_neighbors(g, BusId{2});
    ASSERT_EQ(nb.size(), 1u);
    EXPECT_EQ(nb[0].first, BusId{1});
}

TEST(GridModel, AngleLimitsDefaultAndOverride) {
    auto j = small_case();
    EXPECT_DOUBLE_EQ(case_from_json(j).line_theta_max(0), std::numbers::pi / 6.0);
    j["angle_limits"] = {{{"from", 2}, {"to", 1}, {"theta_max", 0.2}}};
    EXPECT_DOUBLE_EQ(case_from_json(j).line_theta_max(0), 0.2);
}

TEST(GridModel, LookupAndGeneratorIndex) {
    const auto g = case_from_json(small_case());
    EXPECT_EQ(g.index_of(BusId{2}), 1u);
    EXPECT_THROW(g.index_of(BusId{7}), LookupError);
    EXPECT_EQ(g.generator_at(0), std::optional<std::size_t>(0));
    EXPECT_FALSE(g.generator_at(1).has_value());
}

TEST(GridModel, RejectsMalformedFiles) {
    auto missing = small_case();
    missing["buses"][0].erase("v_min");
    EXPECT_THROW(case_from_json(missing), ParseError);
    auto arity = small_case();
    arity["lines"][0]["admittance"] = {1.0};
    EXPECT_THROW(case_from_json(arity), ParseError);
    auto cost = small_case();
    cost["generators"][0]["cost"] = {1.0, 2.0};
    EXPECT_THROW(case_from_json(cost), ParseError);
    EXPECT_THROW(load_case("/nonexistent/case.json"), ParseError);
}

TEST(GridModel, RejectsInconsistentNetworks) {
    auto dup = small_case();
    dup["buses"][1]["id"] = 1;
    EXPECT_THROW(case_from_json(dup), ValidationError);
    auto loop = small_case();
    loop["lines"][0]["to"] = 1;
    EXPECT_THROW(case_from_json(loop), ValidationError);
    auto dangling = small_case();
    dangling["lines"][0]["to"] = 5;
    EXPECT_THROW(case_from_json(dangling), ValidationError);
    auto bounds = small_case();
    bounds["buses"][0]["v_min"] = 1.2;
    EXPECT_THROW(case_from_json(bounds), ValidationError);
    auto twice = small_case();
    twice["generators"].push_back(twice["generators"][0]);
    EXPECT_THROW(case_from_json(twice), ValidationError);
    auto zero = small_case();
    zero["lines"][0]["admittance"] = {0.0, 0.0};
    EXPECT_THROW(case_from_json(zero), ValidationError);
    auto angle = small_case();
    angle["angle_limits"] = {{{"from", 1}, {"to", 1}, {"theta_max", 0.2}}};
    EXPECT_THROW(case_from_json(angle), ValidationError);
    auto wide = small_case();
    wide["angle_limits"] = {{{"from", 1}, {"to", 2}, {"theta_max", 2.0}}};
    EXPECT_THROW(case_from_json(wide), ValidationError);
}
