#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "json.hpp"

// Drives the real binary end to end through std::system.

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NUDIFF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string write_config(const std::string& name, const nlohmann::json& doc) {
    const std::string path = "/tmp/" + name;
    std::ofstream out(path);
    out << doc.dump(2);
    return path;
}

nlohmann::json base_config(const std::string& out_dir) {
    return nlohmann::json{
        {"schedule", {{"T", 1000}, {"beta_start", 1e-4}, {"beta_end", 0.02}}},
        {"plan", {{"strategy", "uniform_stride"}, {"n", 40}}},
        {"task",
         {{"type", "gmm"},
          {"weights", {0.5, 0.5}},
          {"means", {{-1.5, 0.0}, {1.5, 0.0}}},
          {"sigmas", {0.5, 0.5}}}},
        {"seed", 7},
        {"output_dir", out_dir},
    };
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("validate: exit 0 on a good config") {
    const std::string cfg = write_config("cli_good.json", base_config("/tmp/cli_out_v"));
    CHECK(run_cli("validate --config " + cfg) == 0);
}

TEST_CASE("validate: exit 2 on malformed JSON") {
    const std::string path = "/tmp/cli_malformed.json";
    {
        std::ofstream out(path);
        out << "{ nope";
    }
    CHECK(run_cli("validate --config " + path) == 2);
    CHECK(run_cli("validate --config /tmp/does_not_exist.json") == 2);
}

TEST_CASE("validate: exit 3 on semantic errors") {
    nlohmann::json doc = base_config("/tmp/cli_out_s");
    doc["plan"]["n"] = 5000;
    const std::string cfg = write_config("cli_semantic.json", doc);
    CHECK(run_cli("validate --config " + cfg) == 3);

    // a --set override can introduce the same failure
    const std::string good = write_config("cli_good2.json", base_config("/tmp/cli_out_s2"));
    CHECK(run_cli("validate --config " + good + " --set plan.n=5000") == 3);
    CHECK(run_cli("validate --config " + good + " --set plan.n=25") == 0);
}

TEST_CASE("sample: writes trajectory with one row per step plus manifest") {
    const std::string out_dir = "/tmp/cli_out_sample";
    std::system(("rm -rf " + out_dir).c_str());
    const std::string cfg = write_config("cli_sample.json", base_config(out_dir));
    REQUIRE(run_cli("sample --config " + cfg) == 0);

    const std::string traj = slurp(out_dir + "/trajectory.csv");
    int lines = 0;
    for (char c : traj)
        if (c == '\n')
            lines++;
    CHECK(lines == 42);  // "# seed" + header + 40 steps

    nlohmann::json manifest = nlohmann::json::parse(slurp(out_dir + "/manifest.json"));
    CHECK(manifest["command"] == "sample");
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["config"]["plan"]["n"] == 40);

    // reruns with the same config and seed reproduce the trajectory exactly
    const std::string out2 = "/tmp/cli_out_sample2";
    std::system(("rm -rf " + out2).c_str());
    REQUIRE(run_cli("sample --config " + cfg + " --out " + out2) == 0);
    CHECK(slurp(out2 + "/trajectory.csv") == traj);
}

TEST_CASE("repaint: all-ones mask pins the output to known_x0") {
    const std::string out_dir = "/tmp/cli_out_repaint";
    std::system(("rm -rf " + out_dir).c_str());
    nlohmann::json doc = base_config(out_dir);
    doc["plan"]["n"] = 20;
    doc["inpaint"] = {{"mask", {1, 1}}, {"known_x0", {0.25, -1.5}}};
    const std::string cfg = write_config("cli_repaint.json", doc);
    REQUIRE(run_cli("repaint --config " + cfg) == 0);

    // last CSV row must be exactly the known point
    const std::string traj = slurp(out_dir + "/trajectory.csv");
    const size_t last_nl = traj.find_last_of('\n', traj.size() - 2);
    const std::string last = traj.substr(last_nl + 1);
    CHECK(last.find(",0.25,") != std::string::npos);
    CHECK(last.find("-1.5") != std::string::npos);

    // missing inpaint block is a semantic failure
    nlohmann::json no_mask = base_config(out_dir);
    const std::string cfg2 = write_config("cli_repaint2.json", no_mask);
    CHECK(run_cli("repaint --config " + cfg2) == 3);
}

TEST_CASE("bench: default grid emits strategies x sizes rows") {
    const std::string out_dir = "/tmp/cli_out_bench";
    std::system(("rm -rf " + out_dir).c_str());
    nlohmann::json doc = base_config(out_dir);
    // tiny grid to keep the smoke test quick; the full default grid is the
    // acceptance suite's job
    doc["bench"] = {{"plan_sizes", {5, 10}}, {"trials", 1}, {"points", 64}, {"n_proj", 8},
                    {"plots", true}};
    const std::string cfg = write_config("cli_bench.json", doc);
    REQUIRE(run_cli("bench --config " + cfg) == 0);

    const std::string csv = slurp(out_dir + "/bench.csv");
    int rows = -2;  // env + header
    for (size_t pos = 0; (pos = csv.find('\n', pos)) != std::string::npos; pos++)
        rows++;
    CHECK(rows == 3 * 2);  // three strategies, two sizes
    CHECK(slurp(out_dir + "/bench_w2.svg").find("<svg") == 0);
    CHECK(slurp(out_dir + "/bench_time.svg").find("<svg") == 0);
}

TEST_CASE("train: writes checkpoints, loss curve and manifest; mlp sampling works") {
    const std::string out_dir = "/tmp/cli_out_train";
    std::system(("rm -rf " + out_dir).c_str());
    nlohmann::json doc = base_config(out_dir);
    doc["train"] = {{"stage1_steps", 30}, {"stage2_steps", 10}, {"batch_size", 4},
                    {"hidden", 16}, {"time_dim", 8}, {"cond_dim", 4}};
    const std::string cfg = write_config("cli_train.json", doc);
    REQUIRE(run_cli("train --config " + cfg) == 0);

    const std::string curve = slurp(out_dir + "/loss_curve.csv");
    int rows = -1;
    for (size_t pos = 0; (pos = curve.find('\n', pos)) != std::string::npos; pos++)
        rows++;
    CHECK(rows == 40);

    // the config file itself must be untouched
    nlohmann::json reread = nlohmann::json::parse(slurp(cfg));
    CHECK(reread == doc);

    // sample from the trained checkpoint
    nlohmann::json doc2 = base_config(out_dir + "_s");
    doc2["train"] = doc["train"];
    doc2["sampler"] = {{"kind", "plms"}, {"denoiser", "mlp"}};
    doc2["checkpoint"] = out_dir + "/checkpoint.json";
    const std::string cfg2 = write_config("cli_train_sample.json", doc2);
    CHECK(run_cli("sample --config " + cfg2) == 0);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("sample") == 2);  // missing --config
    CHECK(run_cli("frobnicate --config /tmp/x.json") == 2);
}
