#pragma once

#include "nudiff/denoiser.hpp"
#include "nudiff/forward.hpp"
#include "nudiff/linalg.hpp"
#include "nudiff/rng.hpp"
#include "nudiff/schedule.hpp"

namespace nudiff {

// Isotropic Gaussian mixture; the toy stand-in for the data distribution.
struct GaussianMixture {
    std::vector<double> weights;  // positive, normalized to 1
    std::vector<Vec> means;
    std::vector<double> sigmas;  // isotropic stddev per component

    size_t components() const { return weights.size(); }
    size_t dim() const { return means.empty() ? 0 : means[0].size(); }

    void validate() const;

    // Draws x0; if component_out is non-null the chosen component index is
    // stored there (used by class-conditional tasks).
    Vec sample(Rng& rng, int* component_out = nullptr) const;
};

// Exact Bayes-optimal epsilon-predictor for mixture data under the forward
// kernel. Responsibilities are computed with log-sum-exp stabilization.
Vec epsilon_star_gmm(const GaussianMixture& gmm, const Vec& xt, int t,
                     const NoiseSchedule& schedule);

// Posterior mean E[x0 | xt] of the mixture under the forward kernel; the
// responsibilities (normalized, summing to 1) are written to resp_out when
// non-null.
Vec gmm_posterior_x0_mean(const GaussianMixture& gmm, const Vec& xt, int t,
                          const NoiseSchedule& schedule, Vec* resp_out = nullptr);

// Denoiser backed by the analytic mixture oracle. When `conditional` is set,
// predictions condition on cond.class_id by restricting the mixture to that
// component.
class GmmOracleDenoiser : public Denoiser {
public:
    GmmOracleDenoiser(GaussianMixture gmm, const NoiseSchedule& schedule,
                      bool conditional = false);
    Vec predict(const Vec& xt, int t, const ConditionInput& cond) const override;
    const GaussianMixture& mixture() const { return gmm_; }

private:
    GaussianMixture gmm_;
    const NoiseSchedule& schedule_;
    bool conditional_;
    std::vector<GaussianMixture> per_class_;
};

// Analytic oracle for a single full-covariance Gaussian; exercised by the
// inpainting tests where coordinate correlations matter.
class GaussianOracleDenoiser : public Denoiser {
public:
    GaussianOracleDenoiser(Vec mean, Mat cov, const NoiseSchedule& schedule);
    Vec predict(const Vec& xt, int t, const ConditionInput& cond) const override;
    Vec sample(Rng& rng) const;
    const Vec& mean() const { return mean_; }
    const Mat& cov() const { return cov_; }

private:
    Vec mean_;
    Mat cov_;
    Mat chol_;  // Cholesky factor of cov, for sampling
    const NoiseSchedule& schedule_;
};

// Monte-Carlo estimate of the irreducible (Bayes) squared-error loss of the
// optimal predictor, E ||eps - eps*(xt, t)||^2 with t drawn from `plan`
// (or all of 0..T-1 when plan is null).
double mc_bayes_ldm_loss(const GaussianMixture& gmm, const NoiseSchedule& schedule,
                         const TimestepPlan* plan, int n_samples, uint64_t seed);

}  // namespace nudiff
