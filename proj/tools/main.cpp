#include <cstdint>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nudiff/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nudiff - diffusion engine and benchmark for non-uniform timestep plans"};
    app.require_subcommand(1);

    nudiff::CliOptions opts;
    std::string out_dir;
    uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", opts.config_path, "path to the run config JSON")->required();
        sub->add_option("--set", opts.overrides,
                        "override config entries as key.path=value (repeatable, last wins)");
        if (with_out) {
            sub->add_option("--out", out_dir, "output directory (overrides output_dir)")
                ->each([&](const std::string& v) { opts.out_dir = v; });
            sub->add_option("--seed", seed, "seed (overrides config seed)")
                ->each([&](const std::string& v) { opts.seed = std::stoull(v); });
        }
    };

    CLI::App* validate = app.add_subcommand("validate", "check a config and exit");
    add_common(validate, false);
    CLI::App* train = app.add_subcommand("train", "two-stage training run");
    add_common(train, true);
    CLI::App* sample = app.add_subcommand("sample", "draw one trajectory");
    add_common(sample, true);
    CLI::App* repaint = app.add_subcommand("repaint", "masked inference");
    add_common(repaint, true);
    CLI::App* bench = app.add_subcommand("bench", "efficiency benchmark grid");
    add_common(bench, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    if (validate->parsed())
        return nudiff::cmd_validate(opts);
    if (train->parsed())
        return nudiff::cmd_train(opts);
    if (sample->parsed())
        return nudiff::cmd_sample(opts);
    if (repaint->parsed())
        return nudiff::cmd_repaint(opts);
    if (bench->parsed())
        return nudiff::cmd_bench(opts);
    return 2;
}
