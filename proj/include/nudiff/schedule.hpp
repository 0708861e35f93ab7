#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace nudiff {

// Per-timestep beta/alpha/alpha_bar tables of the forward noising process.
// Immutable after construction; safe to share across threads.
struct NoiseSchedule {
    int total_steps = 0;  // T
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::vector<double> beta;       // variance increments, 0 < beta[t] < 1
    std::vector<double> alpha;      // 1 - beta[t]
    std::vector<double> alpha_bar;  // cumulative product of alpha

    // alpha_bar at level t with the boundary convention alpha_bar(-1) = 1,
    // which makes the final sampler step deterministic.
    double alpha_bar_at(int t) const { return t < 0 ? 1.0 : alpha_bar[static_cast<size_t>(t)]; }
};

enum class PlanStrategy {
    UniformStride,    // evenly spaced, classic stride subsequence
    QuadraticFront,   // denser near t = 0
    PowerTail,        // denser near t = T-1, exponent configurable
};

std::string strategy_name(PlanStrategy s);
PlanStrategy strategy_from_name(const std::string& name);

// Ordered subset of timesteps used at inference (and optionally training).
// Strictly increasing, all in [0, T-1], always ends at T-1.
struct TimestepPlan {
    std::vector<int> steps;
    PlanStrategy strategy = PlanStrategy::UniformStride;
    double exponent = 2.0;  // only meaningful for PowerTail
    int n = 0;
};

NoiseSchedule build_linear_schedule(int total_steps, double beta_start, double beta_end);

TimestepPlan build_plan(const NoiseSchedule& schedule, PlanStrategy strategy, int n,
                        double exponent = 2.0);

// One message per violated invariant; empty iff the plan is valid.
std::vector<std::string> validate_plan(const TimestepPlan& plan, const NoiseSchedule& schedule);

// {T, beta_start, beta_end, strategy, n, steps[]} reproducibility document.
nlohmann::json plan_to_json(const TimestepPlan& plan, const NoiseSchedule& schedule);
TimestepPlan plan_from_json(const nlohmann::json& doc, NoiseSchedule& schedule_out);

}  // namespace nudiff
