#pragma once

#include <optional>
#include <string>
#include <vector>

namespace nudiff {

struct CliOptions {
    std::string config_path;
    std::vector<std::string> overrides;       // --set key.path=value
    std::optional<std::string> out_dir;       // --out
    std::optional<uint64_t> seed;             // --seed
};

// Exit codes: 0 ok, 2 parse error, 3 semantic error, 4 runtime failure.
int cmd_validate(const CliOptions& opts);
int cmd_train(const CliOptions& opts);
int cmd_sample(const CliOptions& opts);
int cmd_repaint(const CliOptions& opts);
int cmd_bench(const CliOptions& opts);

}  // namespace nudiff
