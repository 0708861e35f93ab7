#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nudiff/exec.hpp"
#include "nudiff/gmm.hpp"
#include "nudiff/mlp.hpp"
#include "nudiff/schedule.hpp"

namespace nudiff {

// Toy data task. Unconditional: plain mixture draws, class 0, no tokens.
// Conditional ("pattern"): the class id is the mixture component and each
// class carries a fixed token sequence standing in for encoded condition
// features.
struct Task {
    GaussianMixture gmm;
    bool conditional = false;
    size_t token_count = 4;
    size_t token_dim = 8;

    size_t dim() const { return gmm.dim(); }
    size_t n_classes() const { return conditional ? gmm.components() : 1; }

    // Deterministic per-class token pattern (data, not parameters).
    Mat tokens_for(int class_id) const;

    struct Sample {
        Vec x0;
        ConditionInput cond;
    };
    Sample draw(Rng& rng) const;
};

struct TrainConfig {
    double lambda_atv = 1e-3;
    int stage1_steps = 2000;
    int stage2_steps = 500;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::optional<TimestepPlan> plan;  // nullopt = FULL (all of 0..T-1)
    uint64_t seed = 0;
    bool augment = true;
    bool atv_on_weights = false;  // penalize A instead of FM

    void validate() const;
};

struct LossBreakdown {
    double l_ldm = 0.0;
    double l_atv = 0.0;
    double l_total = 0.0;
};

double total_loss(double l_ldm, double l_atv, double lambda_atv);

// Squared L2 between eps and the prediction at q_sample(x0, t, eps);
// no gradient path, works with any denoiser (oracles included).
double ldm_loss_value(const Denoiser& denoiser, const Vec& x0, const ConditionInput& cond,
                      int t, const Vec& eps, const NoiseSchedule& schedule);

// Same loss with exact parameter gradients via the model's backward pass.
// lambda_atv adds the attention total-variation term (on FM, or on the
// attention weights when atv_on_weights is set).
std::pair<LossBreakdown, MlpGrads> ldm_loss_with_grads(const MlpDenoiser& model, const Vec& x0,
                                                       const ConditionInput& cond, int t,
                                                       const Vec& eps,
                                                       const NoiseSchedule& schedule,
                                                       double lambda_atv,
                                                       bool atv_on_weights = false);

// Uniform draw over plan.steps, or over 0..T-1 when plan is null.
int sample_timestep_from_plan(const TimestepPlan* plan, const NoiseSchedule& schedule, Rng& rng);

// Momentum-SGD training driver. One instance carries the rng stream and
// optimizer state across stages, so stage 2 with lambda_atv = 0 is literally
// continued stage-1 training.
class Trainer {
public:
    Trainer(MlpDenoiser& model, const Task& task, const NoiseSchedule& schedule,
            TrainConfig cfg);

    // Runs `steps` gradient steps against L_LDM + lambda * L_ATV; returns the
    // per-step batch-mean loss curve. Aborts on non-finite loss.
    std::vector<LossBreakdown> run(int steps, double lambda_atv, Exec exec = Exec::Parallel);

    const TrainConfig& config() const { return cfg_; }

private:
    MlpDenoiser& model_;
    const Task& task_;
    const NoiseSchedule& schedule_;
    TrainConfig cfg_;
    Rng rng_;
    Vec velocity_;
};

// Stage 1: semantic correspondence only (Eq.-(1)-style loss, no ATV term).
std::vector<LossBreakdown> train_stage1(Trainer& trainer, Exec exec = Exec::Parallel);
// Stage 2: adds the ATV refinement term at the configured weight.
std::vector<LossBreakdown> train_stage2(Trainer& trainer, Exec exec = Exec::Parallel);

// Held-out evaluation on a fixed, seeded set of (x0, cond, t, eps) tuples.
LossBreakdown evaluate_model(const MlpDenoiser& model, const Task& task,
                             const NoiseSchedule& schedule, const TimestepPlan* plan,
                             int n_samples, uint64_t seed, bool atv_on_weights = false);

// Held-out L_LDM only, for any denoiser (used to compare against oracles).
double evaluate_ldm(const Denoiser& denoiser, const Task& task, const NoiseSchedule& schedule,
                    const TimestepPlan* plan, int n_samples, uint64_t seed);

void write_loss_curve_csv(const std::vector<LossBreakdown>& curve, const std::string& path);

}  // namespace nudiff
