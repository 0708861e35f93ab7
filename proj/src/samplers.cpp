#include "nudiff/samplers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nudiff {

std::string sampler_name(SamplerKind k) {
    switch (k) {
        case SamplerKind::Ancestral: return "ancestral";
        case SamplerKind::Ddim: return "ddim";
        case SamplerKind::Plms: return "plms";
    }
    throw std::invalid_argument("unknown sampler kind");
}

SamplerKind sampler_from_name(const std::string& name) {
    if (name == "ancestral") return SamplerKind::Ancestral;
    if (name == "ddim") return SamplerKind::Ddim;
    if (name == "plms") return SamplerKind::Plms;
    throw std::invalid_argument("unknown sampler '" + name + "'");
}

void SamplerConfig::validate(const NoiseSchedule& schedule) const {
    if (eta < 0.0 || eta > 1.0)
        throw std::invalid_argument("SamplerConfig: eta must be in [0, 1]");
    auto violations = validate_plan(plan, schedule);
    if (!violations.empty())
        throw std::invalid_argument("SamplerConfig: invalid plan: " + violations.front());
    if (repaint && (repaint->jump_len < 1 || repaint->n_resample < 1))
        throw std::invalid_argument("SamplerConfig: repaint counts must be >= 1");
}

namespace {

Vec predict_x0(const Vec& xt, const Vec& eps_hat, double ab_t) {
    const double sqrt_ab = std::sqrt(ab_t);
    const double noise = std::sqrt(1.0 - ab_t);
    Vec x0(xt.size());
    for (size_t i = 0; i < xt.size(); i++)
        x0[i] = (xt[i] - noise * eps_hat[i]) / sqrt_ab;
    return x0;
}

void check_ordering(int t, int t_prev, const NoiseSchedule& schedule, const char* who) {
    if (t < 0 || t >= schedule.total_steps)
        throw std::out_of_range(std::string(who) + ": t out of range");
    if (t_prev >= t || t_prev < -1)
        throw std::invalid_argument(std::string(who) + ": need -1 <= t_prev < t");
}

}  // namespace

Vec ddpm_step(const Vec& xt, int t, int t_prev, const Vec& eps_hat,
              const NoiseSchedule& schedule, Rng& rng) {
    check_ordering(t, t_prev, schedule, "ddpm_step");
    Vec x0 = predict_x0(xt, eps_hat, schedule.alpha_bar[t]);
    PosteriorParams post = posterior_mean_variance_gap(x0, xt, t, t_prev, schedule);
    if (t_prev < 0 || post.variance <= 0.0)
        return post.mean;  // deterministic terminal step, rng untouched
    const double std_dev = std::sqrt(post.variance);
    for (auto& m : post.mean)
        m += std_dev * rng.normal();
    return post.mean;
}

Vec ddim_update(const Vec& xt, const Vec& eps_hat, double ab_t, double ab_prev, double eta,
                Rng* rng) {
    Vec x0 = predict_x0(xt, eps_hat, ab_t);
    double sigma = 0.0;
    if (eta > 0.0 && ab_prev < 1.0) {
        sigma = eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) *
                std::sqrt(1.0 - ab_t / ab_prev);
    }
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
    const double sqrt_ab_prev = std::sqrt(ab_prev);
    Vec out(xt.size());
    for (size_t i = 0; i < xt.size(); i++)
        out[i] = sqrt_ab_prev * x0[i] + dir * eps_hat[i];
    if (sigma > 0.0) {
        if (!rng)
            throw std::invalid_argument("ddim_update: eta > 0 requires an rng");
        for (auto& o : out)
            o += sigma * rng->normal();
    }
    return out;
}

Vec ddim_step(const Vec& xt, int t, int t_prev, const Vec& eps_hat, double eta,
              const NoiseSchedule& schedule, Rng& rng) {
    check_ordering(t, t_prev, schedule, "ddim_step");
    if (eta < 0.0 || eta > 1.0)
        throw std::invalid_argument("ddim_step: eta must be in [0, 1]");
    return ddim_update(xt, eps_hat, schedule.alpha_bar[t], schedule.alpha_bar_at(t_prev), eta,
                       &rng);
}

const PlmsCoefficients& plms_coefficients(size_t order) {
    static const PlmsCoefficients tables[4] = {
        {{1}, 1},
        {{3, -1}, 2},
        {{23, -16, 5}, 12},
        {{55, -59, 37, -9}, 24},
    };
    if (order < 1 || order > 4)
        throw std::invalid_argument("plms_coefficients: order must be 1..4");
    return tables[order - 1];
}

Vec plms_combine(const std::deque<Vec>& eps_history) {
    if (eps_history.empty())
        throw std::invalid_argument("plms_combine: empty history");
    const size_t order = std::min<size_t>(eps_history.size(), 4);
    const PlmsCoefficients& c = plms_coefficients(order);
    Vec out(eps_history.front().size(), 0.0);
    for (size_t j = 0; j < order; j++) {
        const double w = static_cast<double>(c.num[j]) / static_cast<double>(c.den);
        axpy(w, eps_history[j], out);
    }
    return out;
}

Vec plms_step(const Vec& xt, int t, int t_prev, std::deque<Vec>& eps_history,
              const NoiseSchedule& schedule) {
    check_ordering(t, t_prev, schedule, "plms_step");
    Vec eps_eff = plms_combine(eps_history);
    while (eps_history.size() > 4)
        eps_history.pop_back();
    return ddim_update(xt, eps_eff, schedule.alpha_bar[t], schedule.alpha_bar_at(t_prev), 0.0,
                       nullptr);
}

namespace {

struct Stepper {
    const SamplerConfig& config;
    const NoiseSchedule& schedule;
    Rng& rng;
    std::deque<Vec> history;

    void reset_history() { history.clear(); }

    Vec advance(const Vec& x, int t, int t_prev, const Vec& eps_hat) {
        switch (config.kind) {
            case SamplerKind::Ancestral:
                return ddpm_step(x, t, t_prev, eps_hat, schedule, rng);
            case SamplerKind::Ddim:
                return ddim_step(x, t, t_prev, eps_hat, config.eta, schedule, rng);
            case SamplerKind::Plms:
                history.push_front(eps_hat);
                return plms_step(x, t, t_prev, history, schedule);
        }
        throw std::logic_error("unreachable");
    }
};

}  // namespace

Trajectory sample(const SamplerConfig& config, const Denoiser& denoiser,
                  const ConditionInput& cond, const NoiseSchedule& schedule, size_t dim) {
    config.validate(schedule);
    const auto& steps = config.plan.steps;
    const int n = static_cast<int>(steps.size());

    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(config.seed);
    Trajectory traj;
    traj.states.reserve(config.record_states ? n + 1 : 2);

    Vec x = rng.normal_vec(dim);
    traj.states.push_back({steps.back(), x});

    Stepper stepper{config, schedule, rng, {}};
    for (int i = n - 1; i >= 0; i--) {
        const int t = steps[i];
        const int t_prev = i > 0 ? steps[i - 1] : -1;
        Vec eps_hat = denoiser.predict(x, t, cond);
        traj.denoiser_calls++;
        x = stepper.advance(x, t, t_prev, eps_hat);
        if (config.record_states || i == 0)
            traj.states.push_back({t_prev, x});
    }

    traj.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return traj;
}

Trajectory repaint_sample(const SamplerConfig& config, const Denoiser& denoiser,
                          const ConditionInput& cond, const InpaintMask& mask,
                          const NoiseSchedule& schedule) {
    config.validate(schedule);
    if (!config.repaint)
        throw std::invalid_argument("repaint_sample: config.repaint missing");
    const size_t dim = mask.known_x0.size();
    if (mask.m.size() != dim)
        throw std::invalid_argument("repaint_sample: mask dimension mismatch");
    for (uint8_t b : mask.m)
        if (b > 1)
            throw std::invalid_argument("repaint_sample: mask must be binary");

    const auto& steps = config.plan.steps;
    const int n = static_cast<int>(steps.size());
    const int jump_len = config.repaint->jump_len;
    const int n_resample = config.repaint->n_resample;
    auto level = [&](int pos) { return pos >= 0 ? steps[pos] : -1; };

    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(config.seed);
    Trajectory traj;

    Vec x = rng.normal_vec(dim);
    traj.states.push_back({steps.back(), x});
    Stepper stepper{config, schedule, rng, {}};

    // one step down with known-region compositing at the target level
    auto step_and_composite = [&](int pos, bool record) {
        const int t = level(pos);
        const int t_prev = level(pos - 1);
        Vec eps_hat = denoiser.predict(x, t, cond);
        traj.denoiser_calls++;
        x = stepper.advance(x, t, t_prev, eps_hat);
        Vec x_known;
        if (t_prev >= 0) {
            Vec z = rng.normal_vec(dim);
            x_known = q_sample(mask.known_x0, t_prev, z, schedule);
        } else {
            x_known = mask.known_x0;  // terminal composite is exact
        }
        for (size_t i = 0; i < dim; i++)
            if (mask.m[i])
                x[i] = x_known[i];
        if (record && (config.record_states || t_prev == -1))
            traj.states.push_back({t_prev, x});
    };

    int pos = n - 1;
    while (pos >= 0) {
        const int seg_len = std::min(jump_len, pos + 1);
        const int passes = seg_len == jump_len ? n_resample + 1 : 1;
        for (int pass = 0; pass < passes; pass++) {
            if (pass > 0) {
                // re-noise from below the segment back up to its top level
                Vec z = rng.normal_vec(dim);
                x = q_sample_between(x, level(pos - seg_len), level(pos), z, schedule);
                stepper.reset_history();
            }
            const bool record = pass == passes - 1;
            for (int j = 0; j < seg_len; j++)
                step_and_composite(pos - j, record);
        }
        pos -= seg_len;
    }

    traj.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return traj;
}

namespace {

template <typename MakeRow>
Mat batch_kernel(size_t count, size_t dim, Exec exec, MakeRow&& make_row) {
    Mat out(count, dim);
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 8)
        for (long i = 0; i < static_cast<long>(count); i++) {
            Vec row = make_row(static_cast<size_t>(i));
            std::copy(row.begin(), row.end(), out.row(i));
        }
    } else {
        for (size_t i = 0; i < count; i++) {
            Vec row = make_row(i);
            std::copy(row.begin(), row.end(), out.row(i));
        }
    }
    return out;
}

}  // namespace

Mat sample_batch(const SamplerConfig& config, const Denoiser& denoiser,
                 const ConditionInput& cond, const NoiseSchedule& schedule, size_t dim,
                 size_t count, Exec exec) {
    return batch_kernel(count, dim, exec, [&](size_t i) {
        SamplerConfig c = config;
        c.seed = mix_seed(config.seed, i);
        c.record_states = false;
        return sample(c, denoiser, cond, schedule, dim).final_x();
    });
}

Mat repaint_batch(const SamplerConfig& config, const Denoiser& denoiser,
                  const ConditionInput& cond, const InpaintMask& mask,
                  const NoiseSchedule& schedule, size_t count, Exec exec) {
    return batch_kernel(count, mask.known_x0.size(), exec, [&](size_t i) {
        SamplerConfig c = config;
        c.seed = mix_seed(config.seed, i);
        c.record_states = false;
        return repaint_sample(c, denoiser, cond, mask, schedule).final_x();
    });
}

void write_trajectory_csv(const Trajectory& traj, uint64_t seed, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out << "# seed=" << seed << "\n";
    out << "step_index,t";
    const size_t dim = traj.states.empty() ? 0 : traj.states.back().x.size();
    for (size_t i = 0; i < dim; i++)
        out << ",x" << i;
    out << "\n";
    char buf[64];
    // rows are the post-step states; the initial noise draw is states[0]
    for (size_t s = 1; s < traj.states.size(); s++) {
        out << (s - 1) << "," << traj.states[s].t;
        for (double v : traj.states[s].x) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            out << buf;
        }
        out << "\n";
    }
}

}  // namespace nudiff
