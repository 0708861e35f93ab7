#include "nudiff/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "nudiff/checkpoint.hpp"
#include "nudiff/config.hpp"

namespace nudiff {

namespace {

std::vector<std::string> effective_overrides(const CliOptions& opts) {
    std::vector<std::string> o = opts.overrides;
    if (opts.out_dir)
        o.push_back("output_dir=" + *opts.out_dir);
    if (opts.seed)
        o.push_back("seed=" + std::to_string(*opts.seed));
    return o;
}

// Loads config and runs `body`, mapping failures onto the exit-code contract.
int with_config(const CliOptions& opts, const std::string& command,
                int (*body)(RunConfig&, const CliOptions&)) {
    try {
        RunConfig rc = load_run_config(opts.config_path, effective_overrides(opts));
        return body(rc, opts);
    } catch (const ConfigParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigSemanticError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << command << " failed: " << e.what() << "\n";
        return 4;
    }
}

std::unique_ptr<Denoiser> make_denoiser(const RunConfig& rc) {
    if (rc.denoiser_kind == "mlp") {
        if (rc.checkpoint.empty())
            throw std::runtime_error("sampler.denoiser is 'mlp' but no 'checkpoint' path is set");
        auto model = std::make_unique<MlpDenoiser>(load_checkpoint(rc.checkpoint));
        if (model->cfg.data_dim != rc.task.dim())
            throw std::runtime_error("checkpoint dimension does not match the task");
        return model;
    }
    return std::make_unique<GmmOracleDenoiser>(rc.task.gmm, rc.schedule, rc.task.conditional);
}

ConditionInput default_condition(const RunConfig& rc) {
    ConditionInput cond;
    if (rc.task.conditional) {
        cond.class_id = 0;
        cond.tokens = rc.task.tokens_for(0);
    }
    return cond;
}

void write_training_bench_csv(const TrainingBenchResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out << "# env=" << environment_fingerprint() << "\n";
    out << "arm,steps_to_threshold,wall_time_s,final_loss,reached,threshold\n";
    char buf[160];
    for (const TrainingBenchArm* arm : {&result.full, &result.restricted}) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%.17g,%d,%.17g\n", arm->name.c_str(),
                      arm->steps, arm->wall_time_s, arm->final_loss, arm->reached ? 1 : 0,
                      result.threshold);
        out << buf;
    }
}

int do_train(RunConfig& rc, const CliOptions& opts) {
    MlpDenoiser model = MlpDenoiser::init(rc.model, rc.train.seed);
    Trainer trainer(model, rc.task, rc.schedule, rc.train);

    auto curve = train_stage1(trainer);
    std::filesystem::create_directories(rc.output_dir);
    save_checkpoint(model, rc.output_dir + "/checkpoint_stage1.json");

    auto stage2 = train_stage2(trainer);
    curve.insert(curve.end(), stage2.begin(), stage2.end());

    save_checkpoint(model, rc.output_dir + "/checkpoint.json");
    write_loss_curve_csv(curve, rc.output_dir + "/loss_curve.csv");
    write_manifest(rc.output_dir, "train", rc, effective_overrides(opts));
    std::cout << "trained " << curve.size() << " steps; artifacts in " << rc.output_dir << "\n";
    return 0;
}

int do_sample(RunConfig& rc, const CliOptions& opts) {
    auto denoiser = make_denoiser(rc);
    SamplerConfig sc;
    sc.kind = rc.sampler_kind;
    sc.eta = rc.sampler_eta;
    sc.plan = rc.plan;
    sc.seed = rc.seed;
    Trajectory traj = sample(sc, *denoiser, default_condition(rc), rc.schedule, rc.task.dim());

    std::filesystem::create_directories(rc.output_dir);
    write_trajectory_csv(traj, sc.seed, rc.output_dir + "/trajectory.csv");
    write_manifest(rc.output_dir, "sample", rc, effective_overrides(opts));
    std::cout << "sampled " << (traj.states.size() - 1) << " steps ("
              << traj.denoiser_calls << " denoiser calls) into " << rc.output_dir << "\n";
    return 0;
}

int do_repaint(RunConfig& rc, const CliOptions& opts) {
    if (!rc.inpaint)
        throw ConfigSemanticError("repaint requires an 'inpaint' block (mask, known_x0)");
    auto denoiser = make_denoiser(rc);
    SamplerConfig sc;
    sc.kind = rc.sampler_kind;
    sc.eta = rc.sampler_eta;
    sc.plan = rc.plan;
    sc.seed = rc.seed;
    sc.repaint = rc.repaint ? *rc.repaint : RepaintParams{};

    Trajectory traj = repaint_sample(sc, *denoiser, default_condition(rc), *rc.inpaint,
                                     rc.schedule);
    std::filesystem::create_directories(rc.output_dir);
    write_trajectory_csv(traj, sc.seed, rc.output_dir + "/trajectory.csv");
    write_manifest(rc.output_dir, "repaint", rc, effective_overrides(opts));
    std::cout << "repaint finished (" << traj.denoiser_calls << " denoiser calls); artifacts in "
              << rc.output_dir << "\n";
    return 0;
}

int do_bench(RunConfig& rc, const CliOptions& opts) {
    std::filesystem::create_directories(rc.output_dir);
    if (rc.bench.mode == "training") {
        TrainingBenchSpec spec;
        spec.loss_threshold = rc.bench.threshold;
        spec.max_steps = rc.bench.max_steps;
        spec.eval_every = rc.bench.eval_every;
        spec.eval_samples = rc.bench.eval_samples;
        TrainingBenchResult result =
            run_training_bench(rc.task, rc.schedule, rc.plan, rc.train, spec, rc.seed);
        write_training_bench_csv(result, rc.output_dir + "/training_bench.csv");
        write_manifest(rc.output_dir, "bench", rc, effective_overrides(opts));
        std::cout << "training bench: full=" << result.full.steps
                  << " steps, plan_restricted=" << result.restricted.steps << " steps\n";
        return 0;
    }

    auto denoiser = make_denoiser(rc);
    InferenceBenchSpec spec;
    spec.plan_sizes = rc.bench.plan_sizes;
    spec.kind = sampler_from_name(rc.bench.sampler_kind);
    spec.eta = rc.sampler_eta;
    spec.trials = rc.bench.trials;
    spec.points = rc.bench.points;
    spec.n_proj = rc.bench.n_proj;
    BenchmarkReport report =
        run_inference_bench(rc.schedule, *denoiser, default_condition(rc), rc.task.gmm, spec,
                            rc.seed);
    emit_csv(report, rc.output_dir + "/bench.csv");
    if (rc.bench.plots) {
        write_svg_plot(report, rc.output_dir + "/bench_w2.svg", false);
        write_svg_plot(report, rc.output_dir + "/bench_time.svg", true);
    }
    write_manifest(rc.output_dir, "bench", rc, effective_overrides(opts));
    std::cout << "bench wrote " << report.rows.size() << " rows to " << rc.output_dir
              << "/bench.csv\n";
    return 0;
}

}  // namespace

int cmd_validate(const CliOptions& opts) {
    try {
        load_run_config(opts.config_path, effective_overrides(opts));
        std::cout << "config ok\n";
        return 0;
    } catch (const ConfigParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigSemanticError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "validate failed: " << e.what() << "\n";
        return 4;
    }
}

int cmd_train(const CliOptions& opts) { return with_config(opts, "train", do_train); }
int cmd_sample(const CliOptions& opts) { return with_config(opts, "sample", do_sample); }
int cmd_repaint(const CliOptions& opts) { return with_config(opts, "repaint", do_repaint); }
int cmd_bench(const CliOptions& opts) { return with_config(opts, "bench", do_bench); }

}  // namespace nudiff
