#include "nudiff/forward.hpp"

#include <cmath>
#include <stdexcept>

namespace nudiff {

namespace {

void check_t(int t, const NoiseSchedule& schedule, const char* who) {
    if (t < 0 || t >= schedule.total_steps)
        throw std::out_of_range(std::string(who) + ": timestep out of range");
}

}  // namespace

Vec q_sample(const Vec& x0, int t, const Vec& eps, const NoiseSchedule& schedule) {
    check_t(t, schedule, "q_sample");
    if (eps.size() != x0.size())
        throw std::invalid_argument("q_sample: eps dimension mismatch");
    const double ab = schedule.alpha_bar[t];
    const double sig = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    Vec out(x0.size());
    for (size_t i = 0; i < x0.size(); i++)
        out[i] = sig * x0[i] + noise * eps[i];
    return out;
}

Vec q_sample_between(const Vec& x_lo, int t_lo, int t_hi, const Vec& z,
                     const NoiseSchedule& schedule) {
    check_t(t_hi, schedule, "q_sample_between");
    if (t_lo >= t_hi)
        throw std::invalid_argument("q_sample_between: need t_lo < t_hi");
    const double ratio = schedule.alpha_bar[t_hi] / schedule.alpha_bar_at(t_lo);
    const double sig = std::sqrt(ratio);
    const double noise = std::sqrt(1.0 - ratio);
    Vec out(x_lo.size());
    for (size_t i = 0; i < x_lo.size(); i++)
        out[i] = sig * x_lo[i] + noise * z[i];
    return out;
}

PosteriorParams posterior_mean_variance(const Vec& x0, const Vec& xt, int t,
                                        const NoiseSchedule& schedule) {
    check_t(t, schedule, "posterior_mean_variance");
    return posterior_mean_variance_gap(x0, xt, t, t - 1, schedule);
}

PosteriorParams posterior_mean_variance_gap(const Vec& x0, const Vec& xt, int t, int t_prev,
                                            const NoiseSchedule& schedule) {
    check_t(t, schedule, "posterior_mean_variance_gap");
    if (t_prev >= t)
        throw std::invalid_argument("posterior_mean_variance_gap: need t_prev < t");
    if (x0.size() != xt.size())
        throw std::invalid_argument("posterior_mean_variance_gap: dimension mismatch");

    const double ab_t = schedule.alpha_bar[t];
    const double ab_prev = schedule.alpha_bar_at(t_prev);
    const double alpha_eff = ab_t / ab_prev;  // surviving signal over the gap
    const double beta_eff = 1.0 - alpha_eff;

    const double coef_x0 = std::sqrt(ab_prev) * beta_eff / (1.0 - ab_t);
    const double coef_xt = std::sqrt(alpha_eff) * (1.0 - ab_prev) / (1.0 - ab_t);

    PosteriorParams p;
    p.mean.resize(x0.size());
    for (size_t i = 0; i < x0.size(); i++)
        p.mean[i] = coef_x0 * x0[i] + coef_xt * xt[i];
    p.variance = (1.0 - ab_prev) / (1.0 - ab_t) * beta_eff;
    return p;
}

std::pair<double, double> marginal_params(int t, const NoiseSchedule& schedule) {
    check_t(t, schedule, "marginal_params");
    const double ab = schedule.alpha_bar[t];
    return {std::sqrt(ab), std::sqrt(1.0 - ab)};
}

}  // namespace nudiff
