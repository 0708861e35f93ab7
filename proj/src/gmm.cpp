#include "nudiff/gmm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nudiff {

void GaussianMixture::validate() const {
    if (weights.empty() || weights.size() != means.size() || weights.size() != sigmas.size())
        throw std::invalid_argument("GaussianMixture: inconsistent component counts");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0))
            throw std::invalid_argument("GaussianMixture: weights must be positive");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("GaussianMixture: weights must sum to 1");
    for (double s : sigmas)
        if (!(s > 0.0))
            throw std::invalid_argument("GaussianMixture: sigmas must be > 0");
    const size_t d = means[0].size();
    for (const auto& m : means)
        if (m.size() != d)
            throw std::invalid_argument("GaussianMixture: mean dimension mismatch");
}

Vec GaussianMixture::sample(Rng& rng, int* component_out) const {
    const double u = rng.uniform();
    size_t k = 0;
    double acc = 0.0;
    for (; k < weights.size(); k++) {
        acc += weights[k];
        if (u < acc)
            break;
    }
    if (k == weights.size())
        k--;
    if (component_out)
        *component_out = static_cast<int>(k);
    Vec x = means[k];
    for (auto& xi : x)
        xi += sigmas[k] * rng.normal();
    return x;
}

Vec gmm_posterior_x0_mean(const GaussianMixture& gmm, const Vec& xt, int t,
                          const NoiseSchedule& schedule, Vec* resp_out) {
    if (t < 0 || t >= schedule.total_steps)
        throw std::out_of_range("gmm_posterior_x0_mean: timestep out of range");
    const size_t K = gmm.components();
    const size_t d = xt.size();
    const double ab = schedule.alpha_bar[t];
    const double sqrt_ab = std::sqrt(ab);

    // log responsibilities: log w_k + log N(xt; sqrt_ab*mu_k, s_k^2 I)
    Vec log_r(K);
    Vec marg_var(K);
    double max_log = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < K; k++) {
        const double s2 = ab * gmm.sigmas[k] * gmm.sigmas[k] + (1.0 - ab);
        marg_var[k] = s2;
        double sq = 0.0;
        for (size_t i = 0; i < d; i++) {
            const double diff = xt[i] - sqrt_ab * gmm.means[k][i];
            sq += diff * diff;
        }
        log_r[k] = std::log(gmm.weights[k]) - 0.5 * sq / s2 -
                   0.5 * static_cast<double>(d) * std::log(s2);
        max_log = std::max(max_log, log_r[k]);
    }
    double denom = 0.0;
    for (size_t k = 0; k < K; k++)
        denom += std::exp(log_r[k] - max_log);

    Vec resp(K);
    for (size_t k = 0; k < K; k++)
        resp[k] = std::exp(log_r[k] - max_log) / denom;
    if (resp_out)
        *resp_out = resp;

    // E[x0|xt] = sum_k r_k (mu_k + shrink_k (xt - sqrt_ab mu_k))
    Vec mean(d, 0.0);
    for (size_t k = 0; k < K; k++) {
        const double shrink = sqrt_ab * gmm.sigmas[k] * gmm.sigmas[k] / marg_var[k];
        for (size_t i = 0; i < d; i++)
            mean[i] += resp[k] * (gmm.means[k][i] + shrink * (xt[i] - sqrt_ab * gmm.means[k][i]));
    }
    return mean;
}

Vec epsilon_star_gmm(const GaussianMixture& gmm, const Vec& xt, int t,
                     const NoiseSchedule& schedule) {
    const double ab = schedule.alpha_bar[t];
    const double sqrt_ab = std::sqrt(ab);
    const double noise_std = std::sqrt(1.0 - ab);
    Vec x0_mean = gmm_posterior_x0_mean(gmm, xt, t, schedule);
    Vec eps(xt.size());
    for (size_t i = 0; i < xt.size(); i++)
        eps[i] = (xt[i] - sqrt_ab * x0_mean[i]) / noise_std;
    return eps;
}

GmmOracleDenoiser::GmmOracleDenoiser(GaussianMixture gmm, const NoiseSchedule& schedule,
                                     bool conditional)
    : gmm_(std::move(gmm)), schedule_(schedule), conditional_(conditional) {
    gmm_.validate();
    if (conditional_) {
        for (size_t k = 0; k < gmm_.components(); k++) {
            GaussianMixture single;
            single.weights = {1.0};
            single.means = {gmm_.means[k]};
            single.sigmas = {gmm_.sigmas[k]};
            per_class_.push_back(std::move(single));
        }
    }
}

Vec GmmOracleDenoiser::predict(const Vec& xt, int t, const ConditionInput& cond) const {
    if (conditional_) {
        if (cond.class_id < 0 || cond.class_id >= static_cast<int>(per_class_.size()))
            throw std::out_of_range("GmmOracleDenoiser: class_id out of range");
        return epsilon_star_gmm(per_class_[cond.class_id], xt, t, schedule_);
    }
    return epsilon_star_gmm(gmm_, xt, t, schedule_);
}

GaussianOracleDenoiser::GaussianOracleDenoiser(Vec mean, Mat cov, const NoiseSchedule& schedule)
    : mean_(std::move(mean)), cov_(std::move(cov)), schedule_(schedule) {
    if (cov_.rows != cov_.cols || cov_.rows != mean_.size())
        throw std::invalid_argument("GaussianOracleDenoiser: shape mismatch");
    chol_ = cholesky(cov_);
}

Vec GaussianOracleDenoiser::predict(const Vec& xt, int t, const ConditionInput&) const {
    if (t < 0 || t >= schedule_.total_steps)
        throw std::out_of_range("GaussianOracleDenoiser: timestep out of range");
    const size_t d = mean_.size();
    const double ab = schedule_.alpha_bar[t];
    const double sqrt_ab = std::sqrt(ab);

    // E[x0|xt] = mu + sqrt_ab * Sigma * (ab*Sigma + (1-ab) I)^-1 (xt - sqrt_ab*mu)
    Mat m(d, d);
    for (size_t i = 0; i < d; i++)
        for (size_t j = 0; j < d; j++)
            m(i, j) = ab * cov_(i, j) + (i == j ? 1.0 - ab : 0.0);
    Vec resid(d);
    for (size_t i = 0; i < d; i++)
        resid[i] = xt[i] - sqrt_ab * mean_[i];
    Vec y = cholesky_solve(cholesky(m), resid);
    Vec x0_mean = mean_;
    for (size_t i = 0; i < d; i++) {
        double acc = 0.0;
        for (size_t j = 0; j < d; j++)
            acc += cov_(i, j) * y[j];
        x0_mean[i] += sqrt_ab * acc;
    }

    const double noise_std = std::sqrt(1.0 - ab);
    Vec eps(d);
    for (size_t i = 0; i < d; i++)
        eps[i] = (xt[i] - sqrt_ab * x0_mean[i]) / noise_std;
    return eps;
}

Vec GaussianOracleDenoiser::sample(Rng& rng) const {
    const size_t d = mean_.size();
    Vec z = rng.normal_vec(d);
    Vec x = mean_;
    for (size_t i = 0; i < d; i++)
        for (size_t j = 0; j <= i; j++)
            x[i] += chol_(i, j) * z[j];
    return x;
}

double mc_bayes_ldm_loss(const GaussianMixture& gmm, const NoiseSchedule& schedule,
                         const TimestepPlan* plan, int n_samples, uint64_t seed) {
    Rng rng(seed);
    const size_t d = gmm.dim();
    double acc = 0.0;
    for (int s = 0; s < n_samples; s++) {
        const int t = plan
                          ? plan->steps[rng.uniform_index(plan->steps.size())]
                          : static_cast<int>(rng.uniform_index(schedule.total_steps));
        Vec x0 = gmm.sample(rng);
        Vec eps = rng.normal_vec(d);
        Vec xt = q_sample(x0, t, eps, schedule);
        Vec eps_star = epsilon_star_gmm(gmm, xt, t, schedule);
        double sq = 0.0;
        for (size_t i = 0; i < d; i++) {
            const double diff = eps[i] - eps_star[i];
            sq += diff * diff;
        }
        acc += sq;
    }
    return acc / n_samples;
}

}  // namespace nudiff
