#pragma once

#include <utility>

#include "nudiff/linalg.hpp"
#include "nudiff/schedule.hpp"

namespace nudiff {

// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps
Vec q_sample(const Vec& x0, int t, const Vec& eps, const NoiseSchedule& schedule);

// Re-noise a sample from a lower level up to a higher one:
// x_hi = sqrt(ab_hi/ab_lo) * x_lo + sqrt(1 - ab_hi/ab_lo) * z.
// t_lo = -1 means a clean sample (alpha_bar = 1).
Vec q_sample_between(const Vec& x_lo, int t_lo, int t_hi, const Vec& z,
                     const NoiseSchedule& schedule);

struct PosteriorParams {
    Vec mean;
    double variance = 0.0;
};

// Exact reverse posterior q(x_{t-1} | x_t, x0) of the forward chain.
PosteriorParams posterior_mean_variance(const Vec& x0, const Vec& xt, int t,
                                        const NoiseSchedule& schedule);

// Subsequence generalization: posterior of the level-skipping chain
// t -> t_prev, with t_prev = -1 meaning the clean boundary.
PosteriorParams posterior_mean_variance_gap(const Vec& x0, const Vec& xt, int t, int t_prev,
                                            const NoiseSchedule& schedule);

// (signal_scale, noise_std) = (sqrt(alpha_bar_t), sqrt(1 - alpha_bar_t))
std::pair<double, double> marginal_params(int t, const NoiseSchedule& schedule);

}  // namespace nudiff
