#include "nudiff/bench.hpp"

#include <omp.h>
#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nudiff/metrics.hpp"

namespace nudiff {

std::string environment_fingerprint() {
    utsname u{};
    std::string env = "unknown";
    if (uname(&u) == 0)
        env = std::string(u.sysname) + " " + u.release + " " + u.machine;
    env += "; threads=" + std::to_string(omp_get_max_threads());
    return env;
}

BenchmarkReport run_inference_bench(const NoiseSchedule& schedule, const Denoiser& denoiser,
                                    const ConditionInput& cond, const GaussianMixture& data,
                                    const InferenceBenchSpec& spec, uint64_t seed) {
    BenchmarkReport report;
    report.environment = environment_fingerprint();
    if (spec.trials <= 0 || spec.strategies.empty() || spec.plan_sizes.empty())
        return report;

    const size_t d = data.dim();
    const Exec exec = spec.parallel_points ? Exec::Parallel : Exec::Serial;

    for (PlanStrategy strategy : spec.strategies) {
        for (int n : spec.plan_sizes) {
            if (n < 1 || n > schedule.total_steps)
                throw std::invalid_argument("run_inference_bench: plan size out of range");
            SamplerConfig sc;
            sc.kind = spec.kind;
            sc.eta = spec.eta;
            sc.plan = build_plan(schedule, strategy, n, spec.power_exponent);
            sc.seed = mix_seed(seed, static_cast<uint64_t>(n) * 131 + static_cast<int>(strategy));

            Mat samples;
            std::vector<double> times;
            times.reserve(spec.trials);
            // warmup run, discarded
            sample_batch(sc, denoiser, cond, schedule, d, spec.points, exec);
            for (int trial = 0; trial < spec.trials; trial++) {
                const auto t0 = std::chrono::steady_clock::now();
                samples = sample_batch(sc, denoiser, cond, schedule, d, spec.points, exec);
                times.push_back(
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            }
            std::sort(times.begin(), times.end());
            const double median = times[times.size() / 2];

            Rng data_rng(mix_seed(sc.seed, 0xda7aULL));
            Mat fresh(spec.points, d);
            for (int i = 0; i < spec.points; i++) {
                Vec x = data.sample(data_rng);
                std::copy(x.begin(), x.end(), fresh.row(i));
            }
            const double w2 = sliced_w2({samples, "samples"}, {fresh, "data"}, spec.n_proj,
                                        mix_seed(sc.seed, 0x50ecULL), exec);

            BenchRow row;
            row.sampler = sampler_name(spec.kind);
            row.strategy = strategy_name(strategy);
            row.n = sc.plan.n;
            row.denoiser_calls = static_cast<uint64_t>(sc.plan.n);  // one call per step
            row.wall_time_s = median;
            row.sliced_w2 = w2;
            row.seed = sc.seed;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

namespace {

TrainingBenchArm run_arm(const std::string& name, const Task& task,
                         const NoiseSchedule& schedule, const TimestepPlan& eval_plan,
                         TrainConfig cfg, const TrainingBenchSpec& spec, uint64_t model_seed,
                         uint64_t eval_seed) {
    MlpConfig mc;
    mc.data_dim = task.dim();
    mc.hidden = 64;
    mc.n_classes = task.n_classes();
    mc.total_steps = schedule.total_steps;
    MlpDenoiser model = MlpDenoiser::init(mc, model_seed);
    Trainer trainer(model, task, schedule, cfg);

    TrainingBenchArm arm;
    arm.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    double loss = evaluate_model(model, task, schedule, &eval_plan, spec.eval_samples,
                                 eval_seed).l_ldm;
    int steps = 0;
    while (loss > spec.loss_threshold && steps < spec.max_steps) {
        const int chunk = std::min(spec.eval_every, spec.max_steps - steps);
        trainer.run(chunk, 0.0);
        steps += chunk;
        loss = evaluate_model(model, task, schedule, &eval_plan, spec.eval_samples,
                              eval_seed).l_ldm;
    }
    arm.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    arm.steps = steps;
    arm.final_loss = loss;
    arm.reached = loss <= spec.loss_threshold;
    return arm;
}

}  // namespace

TrainingBenchResult run_training_bench(const Task& task, const NoiseSchedule& schedule,
                                       const TimestepPlan& plan, const TrainConfig& base,
                                       const TrainingBenchSpec& spec, uint64_t seed) {
    TrainingBenchResult result;
    result.threshold = spec.loss_threshold;

    const uint64_t model_seed = mix_seed(seed, 0x0deaULL);
    const uint64_t eval_seed = mix_seed(seed, 0xe0a1ULL);

    TrainConfig full_cfg = base;
    full_cfg.plan.reset();
    full_cfg.seed = mix_seed(seed, 0xf0ULL);
    result.full = run_arm("full", task, schedule, plan, full_cfg, spec, model_seed, eval_seed);

    TrainConfig restricted_cfg = base;
    restricted_cfg.plan = plan;
    restricted_cfg.seed = mix_seed(seed, 0xf0ULL);  // same data stream seed as the full arm
    result.restricted = run_arm("plan_restricted", task, schedule, plan, restricted_cfg, spec,
                                model_seed, eval_seed);
    return result;
}

void emit_csv(const BenchmarkReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("emit_csv: cannot open " + path + " for writing");
    out << "# env=" << report.environment << "\n";
    out << "sampler,strategy,n,denoiser_calls,wall_time_s,sliced_w2,seed\n";
    char buf[128];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), ",%d,%llu,%.17g,%.17g,%llu\n", r.n,
                      static_cast<unsigned long long>(r.denoiser_calls), r.wall_time_s,
                      r.sliced_w2, static_cast<unsigned long long>(r.seed));
        out << r.sampler << "," << r.strategy << buf;
    }
    if (!out)
        throw std::runtime_error("emit_csv: write to " + path + " failed");
}

BenchmarkReport parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("parse_csv: cannot open " + path);
    BenchmarkReport report;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line.rfind("# env=", 0) == 0) {
            report.environment = line.substr(6);
            continue;
        }
        if (line.rfind("sampler,", 0) == 0)
            continue;
        std::stringstream ss(line);
        std::string field;
        BenchRow r;
        std::getline(ss, r.sampler, ',');
        std::getline(ss, r.strategy, ',');
        std::getline(ss, field, ',');
        r.n = std::stoi(field);
        std::getline(ss, field, ',');
        r.denoiser_calls = std::stoull(field);
        std::getline(ss, field, ',');
        r.wall_time_s = std::stod(field);
        std::getline(ss, field, ',');
        r.sliced_w2 = std::stod(field);
        std::getline(ss, field, ',');
        r.seed = std::stoull(field);
        report.rows.push_back(std::move(r));
    }
    return report;
}

void write_svg_plot(const BenchmarkReport& report, const std::string& path, bool time_axis) {
    const int width = 640, height = 420, margin = 60;
    if (report.rows.empty())
        return;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto yval = [&](const BenchRow& r) { return time_axis ? r.wall_time_s : r.sliced_w2; };
    for (const auto& r : report.rows) {
        xmin = std::min(xmin, static_cast<double>(r.n));
        xmax = std::max(xmax, static_cast<double>(r.n));
        ymin = std::min(ymin, yval(r));
        ymax = std::max(ymax, yval(r));
    }
    if (xmax <= xmin)
        xmax = xmin + 1;
    if (ymax <= ymin)
        ymax = ymin + 1;
    auto sx = [&](double x) {
        return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
    };
    auto sy = [&](double y) {
        return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
    };

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_svg_plot: cannot open " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
    std::vector<std::string> strategies;
    for (const auto& r : report.rows)
        if (std::find(strategies.begin(), strategies.end(), r.strategy) == strategies.end())
            strategies.push_back(r.strategy);

    for (size_t s = 0; s < strategies.size(); s++) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : report.rows)
            if (r.strategy == strategies[s])
                pts.push_back({static_cast<double>(r.n), yval(r)});
        std::sort(pts.begin(), pts.end());
        out << "<polyline fill='none' stroke='" << colors[s % 4] << "' stroke-width='2' points='";
        for (auto& [x, y] : pts)
            out << sx(x) << "," << sy(y) << " ";
        out << "'/>\n";
        for (auto& [x, y] : pts)
            out << "<circle cx='" << sx(x) << "' cy='" << sy(y) << "' r='3' fill='"
                << colors[s % 4] << "'/>\n";
        out << "<text x='" << (width - margin + 4) << "' y='" << (margin + 16 * s)
            << "' font-size='11'>" << strategies[s] << "</text>\n";
    }
    out << "<text x='" << width / 2 << "' y='" << height - 12 << "' font-size='12'>plan size n"
        << "</text>\n<text x='14' y='" << height / 2 << "' font-size='12' transform='rotate(-90 14 "
        << height / 2 << ")'>" << (time_axis ? "wall time [s]" : "sliced W2") << "</text>\n";
    out << "</svg>\n";
}

}  // namespace nudiff
