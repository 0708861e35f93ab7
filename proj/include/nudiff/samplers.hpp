#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "nudiff/denoiser.hpp"
#include "nudiff/exec.hpp"
#include "nudiff/forward.hpp"
#include "nudiff/rng.hpp"
#include "nudiff/schedule.hpp"

namespace nudiff {

enum class SamplerKind { Ancestral, Ddim, Plms };

std::string sampler_name(SamplerKind k);
SamplerKind sampler_from_name(const std::string& name);

struct RepaintParams {
    int jump_len = 2;
    int n_resample = 3;
};

struct SamplerConfig {
    SamplerKind kind = SamplerKind::Ancestral;
    double eta = 0.0;  // DDIM stochasticity, in [0, 1]
    TimestepPlan plan;
    uint64_t seed = 0;
    std::optional<RepaintParams> repaint;
    // batch kernels only need final points; skipping intermediate state
    // recording keeps the timing clean of allocation churn
    bool record_states = true;

    void validate(const NoiseSchedule& schedule) const;
};

struct TrajectoryState {
    int t;  // noise level of x; -1 means clean
    Vec x;
};

struct Trajectory {
    std::vector<TrajectoryState> states;  // (T-1, x_init) first, (-1, clean) last
    double wall_time_s = 0.0;
    uint64_t denoiser_calls = 0;

    const Vec& final_x() const { return states.back().x; }
};

// Known-region conditioning for RePaint. m[i] == 1 marks a known coordinate.
struct InpaintMask {
    std::vector<uint8_t> m;
    Vec known_x0;
};

// Ancestral step over the (possibly non-adjacent) gap t -> t_prev. The
// variance vanishes at the t_prev = -1 boundary, where the output is the
// predicted clean point and the rng is not consulted.
Vec ddpm_step(const Vec& xt, int t, int t_prev, const Vec& eps_hat,
              const NoiseSchedule& schedule, Rng& rng);

// Core DDIM update expressed on alpha_bar levels directly.
Vec ddim_update(const Vec& xt, const Vec& eps_hat, double alpha_bar_t, double alpha_bar_prev,
                double eta, Rng* rng);

Vec ddim_step(const Vec& xt, int t, int t_prev, const Vec& eps_hat, double eta,
              const NoiseSchedule& schedule, Rng& rng);

// Adams-Bashforth weights for orders 1..4, kept as integers over a common
// denominator (each set sums to the denominator exactly).
struct PlmsCoefficients {
    std::vector<long> num;
    long den;
};
const PlmsCoefficients& plms_coefficients(size_t order);

// Combines up to the four newest predictions (newest first) into the
// effective epsilon used by the deterministic update.
Vec plms_combine(const std::deque<Vec>& eps_history);

// One PLMS step; eps_history must already contain the newest prediction and
// is trimmed to the 4-entry window.
Vec plms_step(const Vec& xt, int t, int t_prev, std::deque<Vec>& eps_history,
              const NoiseSchedule& schedule);

Trajectory sample(const SamplerConfig& config, const Denoiser& denoiser,
                  const ConditionInput& cond, const NoiseSchedule& schedule, size_t dim);

Trajectory repaint_sample(const SamplerConfig& config, const Denoiser& denoiser,
                          const ConditionInput& cond, const InpaintMask& mask,
                          const NoiseSchedule& schedule);

// Batch kernels: `count` independent trajectories, one final sample per row.
// Trajectory i runs on the substream mix_seed(config.seed, i), so serial and
// parallel execution agree bit-for-bit.
Mat sample_batch(const SamplerConfig& config, const Denoiser& denoiser,
                 const ConditionInput& cond, const NoiseSchedule& schedule, size_t dim,
                 size_t count, Exec exec = Exec::Parallel);

Mat repaint_batch(const SamplerConfig& config, const Denoiser& denoiser,
                  const ConditionInput& cond, const InpaintMask& mask,
                  const NoiseSchedule& schedule, size_t count, Exec exec = Exec::Parallel);

// CSV rows are the post-step states (one per sampler step); the seed goes in
// the header row.
void write_trajectory_csv(const Trajectory& traj, uint64_t seed, const std::string& path);

}  // namespace nudiff
