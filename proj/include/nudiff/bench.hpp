#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nudiff/gmm.hpp"
#include "nudiff/samplers.hpp"
#include "nudiff/training.hpp"

namespace nudiff {

struct BenchRow {
    std::string sampler;
    std::string strategy;
    int n = 0;
    uint64_t denoiser_calls = 0;  // per trajectory
    double wall_time_s = 0.0;     // median over trials of one batch sampling
    double sliced_w2 = 0.0;       // against fresh data draws
    uint64_t seed = 0;
};

struct BenchmarkReport {
    std::vector<BenchRow> rows;
    std::string environment;  // hardware/OS fingerprint
};

std::string environment_fingerprint();

struct InferenceBenchSpec {
    std::vector<PlanStrategy> strategies = {PlanStrategy::UniformStride,
                                            PlanStrategy::QuadraticFront,
                                            PlanStrategy::PowerTail};
    std::vector<int> plan_sizes = {5, 10, 50, 200, 1000};
    SamplerKind kind = SamplerKind::Plms;
    double eta = 0.0;
    double power_exponent = 2.0;
    int trials = 3;
    int points = 2048;  // trajectories per timed run
    int n_proj = 64;
    bool parallel_points = true;  // cells always run sequentially for timing
};

// For each (strategy, n) cell: one discarded warmup plus `trials` timed
// batch samplings; records the median wall time, per-trajectory call count
// and sliced W2 against fresh draws from `data`. trials = 0 yields an empty
// report.
BenchmarkReport run_inference_bench(const NoiseSchedule& schedule, const Denoiser& denoiser,
                                    const ConditionInput& cond, const GaussianMixture& data,
                                    const InferenceBenchSpec& spec, uint64_t seed);

struct TrainingBenchArm {
    std::string name;
    int steps = 0;  // gradient steps until the eval loss crossed the threshold
    double wall_time_s = 0.0;
    double final_loss = 0.0;
    bool reached = false;
};

struct TrainingBenchSpec {
    double loss_threshold = 0.0;
    int max_steps = 20000;
    int eval_every = 100;
    int eval_samples = 2000;
};

struct TrainingBenchResult {
    TrainingBenchArm full;        // trains on all timesteps
    TrainingBenchArm restricted;  // trains on the plan only
    double threshold = 0.0;
};

// Trains two arms from identical initializations until the held-out L_LDM,
// evaluated at the *plan* timesteps for both arms, crosses the threshold.
TrainingBenchResult run_training_bench(const Task& task, const NoiseSchedule& schedule,
                                       const TimestepPlan& plan, const TrainConfig& base,
                                       const TrainingBenchSpec& spec, uint64_t seed);

// header + rows, UTF-8, comma separated, '.' decimal point.
void emit_csv(const BenchmarkReport& report, const std::string& path);
BenchmarkReport parse_csv(const std::string& path);

// Minimal line plots (one polyline per strategy), written beside the CSV.
void write_svg_plot(const BenchmarkReport& report, const std::string& path, bool time_axis);

}  // namespace nudiff
