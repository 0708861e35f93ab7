#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "nudiff/bench.hpp"
#include "nudiff/samplers.hpp"
#include "nudiff/training.hpp"

namespace nudiff {

// Malformed JSON or unreadable file -> CLI exit 2.
struct ConfigParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Schema or cross-field violation -> CLI exit 3. Messages name the key.
struct ConfigSemanticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BenchOptions {
    std::string mode = "inference";  // or "training"
    std::vector<int> plan_sizes = {5, 10, 50, 200, 1000};
    int trials = 3;
    int points = 2048;
    int n_proj = 64;
    std::string sampler_kind = "plms";
    bool plots = false;
    // training mode
    double threshold = 1.0;
    int max_steps = 20000;
    int eval_every = 100;
    int eval_samples = 2000;
};

struct RunConfig {
    nlohmann::json raw;  // resolved document, overrides applied

    NoiseSchedule schedule;
    TimestepPlan plan;
    Task task;
    TrainConfig train;
    MlpConfig model;
    SamplerKind sampler_kind = SamplerKind::Ancestral;
    double sampler_eta = 0.0;
    std::string denoiser_kind = "oracle";  // or "mlp" (loaded from `checkpoint`)
    std::optional<RepaintParams> repaint;
    std::optional<InpaintMask> inpaint;
    BenchOptions bench;
    std::string output_dir = "out";
    std::string checkpoint;  // path used when denoiser_kind == "mlp"
    uint64_t seed = 0;
};

// Parses, applies --set overrides (key.path=value, last writer wins), and
// validates. Never modifies the file.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

// Validation of an already-loaded document (exposed for tests).
RunConfig validate_run_config(nlohmann::json doc);

nlohmann::json apply_override(nlohmann::json doc, const std::string& assignment);

// FNV-1a over the canonical dump; stable across runs.
std::string config_hash(const nlohmann::json& doc);

void write_manifest(const std::string& output_dir, const std::string& command,
                    const RunConfig& config, const std::vector<std::string>& overrides);

}  // namespace nudiff
