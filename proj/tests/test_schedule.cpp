#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "nudiff/rng.hpp"
#include "nudiff/schedule.hpp"

using namespace nudiff;

TEST_CASE("linear schedule endpoints and tables") {
    NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
    CHECK(s.beta[0] == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta[999] == doctest::Approx(0.02).epsilon(1e-12));

    // independent product oracle over the betas
    double prod = 1.0;
    for (int t = 0; t < 1000; t++) {
        const double beta = 1e-4 + (0.02 - 1e-4) * t / 999.0;
        prod *= 1.0 - beta;
        CHECK(std::abs(s.alpha_bar[t] - prod) <= 1e-12 * std::abs(prod));
    }
    // frozen from the product oracle above
    CHECK(s.alpha_bar[999] == doctest::Approx(4.0358e-5).epsilon(1e-3));
}

TEST_CASE("single step schedule") {
    NoiseSchedule s = build_linear_schedule(1, 0.5, 0.5);
    REQUIRE(s.alpha_bar.size() == 1);
    CHECK(s.alpha_bar[0] == doctest::Approx(0.5));
}

TEST_CASE("schedule rejects bad arguments") {
    CHECK_THROWS_AS(build_linear_schedule(0, 1e-4, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.02, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(build_linear_schedule(10, 1e-4, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_linear_schedule(10, std::nan(""), 0.02), std::invalid_argument);
}

TEST_CASE("alpha_bar strictly decreasing") {
    NoiseSchedule s = build_linear_schedule(500, 1e-4, 0.02);
    for (int t = 1; t < 500; t++)
        CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
}

TEST_CASE("uniform stride plan") {
    NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
    TimestepPlan p = build_plan(s, PlanStrategy::UniformStride, 10);
    CHECK(p.steps == std::vector<int>{99, 199, 299, 399, 499, 599, 699, 799, 899, 999});

    TimestepPlan identity = build_plan(s, PlanStrategy::UniformStride, 1000);
    REQUIRE(identity.steps.size() == 1000);
    for (int i = 0; i < 1000; i++)
        CHECK(identity.steps[i] == i);
}

TEST_CASE("quadratic front plan") {
    NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
    TimestepPlan p = build_plan(s, PlanStrategy::QuadraticFront, 10);
    CHECK(p.steps == std::vector<int>{9, 39, 89, 159, 249, 359, 489, 639, 809, 999});
}

TEST_CASE("power tail plan ends at T-1 and is denser near the tail") {
    NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
    TimestepPlan p = build_plan(s, PlanStrategy::PowerTail, 10, 2.0);
    REQUIRE(p.steps.size() == 10);
    CHECK(p.steps.back() == 999);
    // tail gaps must be tighter than front gaps
    CHECK(p.steps[9] - p.steps[8] < p.steps[1] - p.steps[0]);
}

TEST_CASE("plan rejects bad n") {
    NoiseSchedule s = build_linear_schedule(100, 1e-4, 0.02);
    CHECK_THROWS_AS(build_plan(s, PlanStrategy::UniformStride, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_plan(s, PlanStrategy::UniformStride, 101), std::invalid_argument);
}

TEST_CASE("validate_plan reports violations") {
    NoiseSchedule s = build_linear_schedule(100, 1e-4, 0.02);
    TimestepPlan good = build_plan(s, PlanStrategy::UniformStride, 7);
    CHECK(validate_plan(good, s).empty());

    TimestepPlan no_terminal = good;
    no_terminal.steps.pop_back();
    no_terminal.n--;
    auto v1 = validate_plan(no_terminal, s);
    REQUIRE(v1.size() == 1);
    CHECK(v1[0] == "no terminal step");

    TimestepPlan dup = good;
    dup.steps[1] = dup.steps[0];
    auto v2 = validate_plan(dup, s);
    REQUIRE(!v2.empty());
    CHECK(v2[0] == "not strictly increasing");

    TimestepPlan range = good;
    range.steps[0] = -3;
    auto v3 = validate_plan(range, s);
    REQUIRE(!v3.empty());
    CHECK(v3[0].find("out of range") != std::string::npos);
}

TEST_CASE("every strategy and size yields a valid plan") {
    // exhaustive at small T, randomized pairs up to 1000
    for (int T = 1; T <= 128; T++) {
        NoiseSchedule s = build_linear_schedule(T, 1e-4, 0.02);
        for (int n = 1; n <= T; n++) {
            for (auto strat : {PlanStrategy::UniformStride, PlanStrategy::QuadraticFront,
                               PlanStrategy::PowerTail}) {
                TimestepPlan p = build_plan(s, strat, n, 2.0);
                CAPTURE(T);
                CAPTURE(n);
                CHECK(validate_plan(p, s).empty());
                CHECK(static_cast<int>(p.steps.size()) == n);
            }
        }
    }
    Rng rng(42);
    for (int trial = 0; trial < 400; trial++) {
        const int T = 129 + static_cast<int>(rng.uniform_index(872));
        NoiseSchedule s = build_linear_schedule(T, 1e-4, 0.02);
        const int n = 1 + static_cast<int>(rng.uniform_index(T));
        const double expo = 0.5 + 3.0 * rng.uniform();
        for (auto strat : {PlanStrategy::UniformStride, PlanStrategy::QuadraticFront,
                           PlanStrategy::PowerTail}) {
            TimestepPlan p = build_plan(s, strat, n, expo);
            CHECK(validate_plan(p, s).empty());
            CHECK(static_cast<int>(p.steps.size()) == n);
        }
    }
}

TEST_CASE("plans for n and 2n both end at T-1") {
    NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
    for (int n : {5, 10, 50, 200, 500}) {
        for (auto strat : {PlanStrategy::UniformStride, PlanStrategy::QuadraticFront,
                           PlanStrategy::PowerTail}) {
            CHECK(build_plan(s, strat, n).steps.back() == 999);
            CHECK(build_plan(s, strat, 2 * n).steps.back() == 999);
        }
    }
}

TEST_CASE("plan JSON round trip") {
    NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
    TimestepPlan p = build_plan(s, PlanStrategy::PowerTail, 17, 1.5);
    nlohmann::json doc = plan_to_json(p, s);
    CHECK(doc["T"] == 1000);
    CHECK(doc["strategy"] == "power_tail");
    CHECK(doc["n"] == 17);

    NoiseSchedule s2;
    TimestepPlan p2 = plan_from_json(doc, s2);
    CHECK(p2.steps == p.steps);
    CHECK(s2.total_steps == s.total_steps);
    CHECK(s2.beta == s.beta);
}
