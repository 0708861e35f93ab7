#include "nudiff/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace nudiff {

std::string strategy_name(PlanStrategy s) {
    switch (s) {
        case PlanStrategy::UniformStride: return "uniform_stride";
        case PlanStrategy::QuadraticFront: return "quadratic_front";
        case PlanStrategy::PowerTail: return "power_tail";
    }
    throw std::invalid_argument("unknown strategy");
}

PlanStrategy strategy_from_name(const std::string& name) {
    if (name == "uniform_stride") return PlanStrategy::UniformStride;
    if (name == "quadratic_front") return PlanStrategy::QuadraticFront;
    if (name == "power_tail") return PlanStrategy::PowerTail;
    throw std::invalid_argument("unknown plan strategy '" + name + "'");
}

NoiseSchedule build_linear_schedule(int total_steps, double beta_start, double beta_end) {
    if (total_steps < 1)
        throw std::invalid_argument("build_linear_schedule: total_steps must be >= 1");
    if (!std::isfinite(beta_start) || !std::isfinite(beta_end))
        throw std::invalid_argument("build_linear_schedule: non-finite beta bounds");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument("build_linear_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.total_steps = total_steps;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.resize(total_steps);
    s.alpha.resize(total_steps);
    s.alpha_bar.resize(total_steps);

    double prod = 1.0;
    for (int t = 0; t < total_steps; t++) {
        const double frac = total_steps == 1 ? 0.0 : static_cast<double>(t) / (total_steps - 1);
        s.beta[t] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[t] = 1.0 - s.beta[t];
        prod *= s.alpha[t];
        s.alpha_bar[t] = prod;
    }
    return s;
}

namespace {

// Raw strategy values may collide for small T; deduplicate and pad with the
// largest unused indices so the plan length stays exactly n.
std::vector<int> dedup_and_pad(std::vector<int> raw, int total_steps, int n) {
    std::set<int> chosen(raw.begin(), raw.end());
    int candidate = total_steps - 1;
    while (static_cast<int>(chosen.size()) < n && candidate >= 0) {
        chosen.insert(candidate);
        candidate--;
    }
    return std::vector<int>(chosen.begin(), chosen.end());
}

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace

TimestepPlan build_plan(const NoiseSchedule& schedule, PlanStrategy strategy, int n,
                        double exponent) {
    const int total = schedule.total_steps;
    if (n < 1 || n > total)
        throw std::invalid_argument("build_plan: need 1 <= n <= T");

    std::vector<int> raw(n);
    switch (strategy) {
        case PlanStrategy::UniformStride:
            for (int i = 0; i < n; i++)
                raw[i] = static_cast<int>(ceil_div(static_cast<int64_t>(i + 1) * total, n) - 1);
            break;
        case PlanStrategy::QuadraticFront:
            for (int i = 0; i < n; i++) {
                const int64_t num = static_cast<int64_t>(total) * (i + 1) * (i + 1);
                raw[i] = static_cast<int>(ceil_div(num, static_cast<int64_t>(n) * n) - 1);
            }
            break;
        case PlanStrategy::PowerTail:
            for (int i = 0; i < n; i++) {
                const double frac = 1.0 - static_cast<double>(i + 1) / n;
                const double v = std::ceil((total - 1) * std::pow(frac, exponent));
                int step = total - 1 - static_cast<int>(v);
                raw[i] = std::clamp(step, 0, total - 1);
            }
            break;
    }

    TimestepPlan plan;
    plan.strategy = strategy;
    plan.exponent = exponent;
    plan.steps = dedup_and_pad(std::move(raw), total, n);
    plan.n = static_cast<int>(plan.steps.size());
    return plan;
}

std::vector<std::string> validate_plan(const TimestepPlan& plan, const NoiseSchedule& schedule) {
    std::vector<std::string> violations;
    if (plan.steps.empty()) {
        violations.push_back("plan is empty");
        return violations;
    }
    for (int t : plan.steps) {
        if (t < 0 || t >= schedule.total_steps) {
            violations.push_back("step " + std::to_string(t) + " out of range [0, " +
                                 std::to_string(schedule.total_steps - 1) + "]");
            break;
        }
    }
    for (size_t i = 1; i < plan.steps.size(); i++) {
        if (plan.steps[i] <= plan.steps[i - 1]) {
            violations.push_back("not strictly increasing");
            break;
        }
    }
    if (plan.steps.back() != schedule.total_steps - 1)
        violations.push_back("no terminal step");
    if (plan.n != static_cast<int>(plan.steps.size()))
        violations.push_back("declared length does not match steps");
    return violations;
}

nlohmann::json plan_to_json(const TimestepPlan& plan, const NoiseSchedule& schedule) {
    nlohmann::json doc;
    doc["T"] = schedule.total_steps;
    doc["beta_start"] = schedule.beta_start;
    doc["beta_end"] = schedule.beta_end;
    doc["strategy"] = strategy_name(plan.strategy);
    if (plan.strategy == PlanStrategy::PowerTail)
        doc["exponent"] = plan.exponent;
    doc["n"] = plan.n;
    doc["steps"] = plan.steps;
    return doc;
}

TimestepPlan plan_from_json(const nlohmann::json& doc, NoiseSchedule& schedule_out) {
    schedule_out = build_linear_schedule(doc.at("T").get<int>(),
                                         doc.at("beta_start").get<double>(),
                                         doc.at("beta_end").get<double>());
    TimestepPlan plan;
    plan.strategy = strategy_from_name(doc.at("strategy").get<std::string>());
    plan.exponent = doc.value("exponent", 2.0);
    plan.n = doc.at("n").get<int>();
    plan.steps = doc.at("steps").get<std::vector<int>>();
    auto violations = validate_plan(plan, schedule_out);
    if (!violations.empty())
        throw std::invalid_argument("plan_from_json: invalid plan: " + violations.front());
    return plan;
}

}  // namespace nudiff
