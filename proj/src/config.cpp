#include "nudiff/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace nudiff {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigSemanticError("unknown key '" + where + it.key() + "'");
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw ConfigSemanticError("missing key '" + where + key + "'");
    return *it;
}

double get_number(const json& obj, const std::string& key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number())
        throw ConfigSemanticError("'" + where + key + "' must be a number");
    return v.get<double>();
}

double get_number_or(const json& obj, const std::string& key, const std::string& where,
                     double fallback) {
    if (!obj.contains(key))
        return fallback;
    return get_number(obj, key, where);
}

int get_int(const json& obj, const std::string& key, const std::string& where) {
    const json& v = require(obj, key, where);
    if (!v.is_number_integer())
        throw ConfigSemanticError("'" + where + key + "' must be an integer");
    return v.get<int>();
}

int get_int_or(const json& obj, const std::string& key, const std::string& where, int fallback) {
    if (!obj.contains(key))
        return fallback;
    return get_int(obj, key, where);
}

bool get_bool_or(const json& obj, const std::string& key, const std::string& where,
                 bool fallback) {
    if (!obj.contains(key))
        return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean())
        throw ConfigSemanticError("'" + where + key + "' must be a boolean");
    return v.get<bool>();
}

std::string get_string_or(const json& obj, const std::string& key, const std::string& where,
                          const std::string& fallback) {
    if (!obj.contains(key))
        return fallback;
    const json& v = obj.at(key);
    if (!v.is_string())
        throw ConfigSemanticError("'" + where + key + "' must be a string");
    return v.get<std::string>();
}

GaussianMixture parse_mixture(const json& t) {
    const json& weights = require(t, "weights", "task.");
    const json& means = require(t, "means", "task.");
    const json& sigmas = require(t, "sigmas", "task.");
    if (!weights.is_array() || !means.is_array() || !sigmas.is_array())
        throw ConfigSemanticError("'task.weights/means/sigmas' must be arrays");
    if (weights.size() != means.size() || weights.size() != sigmas.size() || weights.empty())
        throw ConfigSemanticError("'task.weights', 'task.means', 'task.sigmas' lengths differ");

    GaussianMixture g;
    double sum = 0.0;
    for (const auto& w : weights) {
        if (!w.is_number() || w.get<double>() <= 0.0)
            throw ConfigSemanticError("'task.weights' entries must be positive numbers");
        g.weights.push_back(w.get<double>());
        sum += w.get<double>();
    }
    for (auto& w : g.weights)
        w /= sum;  // stored normalized
    size_t dim = 0;
    for (const auto& m : means) {
        if (!m.is_array() || m.empty())
            throw ConfigSemanticError("'task.means' entries must be non-empty arrays");
        Vec mean;
        for (const auto& x : m) {
            if (!x.is_number())
                throw ConfigSemanticError("'task.means' entries must be numeric");
            mean.push_back(x.get<double>());
        }
        if (dim == 0)
            dim = mean.size();
        else if (mean.size() != dim)
            throw ConfigSemanticError("'task.means' entries have inconsistent dimension");
        g.means.push_back(std::move(mean));
    }
    for (const auto& s : sigmas) {
        if (!s.is_number() || !(s.get<double>() > 0.0))
            throw ConfigSemanticError("'task.sigmas' entries must be > 0");
        g.sigmas.push_back(s.get<double>());
    }
    g.validate();
    return g;
}

}  // namespace

RunConfig validate_run_config(json doc) {
    if (!doc.is_object())
        throw ConfigSemanticError("config root must be an object");
    reject_unknown_keys(doc, "", {"schedule", "plan", "task", "train", "sampler", "bench",
                                  "inpaint", "output_dir", "checkpoint", "seed"});

    RunConfig rc;
    rc.raw = doc;

    // schedule
    const json& sched = require(doc, "schedule", "");
    reject_unknown_keys(sched, "schedule.", {"T", "beta_start", "beta_end"});
    const int T = get_int(sched, "T", "schedule.");
    const double beta_start = get_number(sched, "beta_start", "schedule.");
    const double beta_end = get_number(sched, "beta_end", "schedule.");
    if (T < 1)
        throw ConfigSemanticError("'schedule.T' must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ConfigSemanticError("'schedule.beta_start'/'schedule.beta_end' must satisfy 0 < start <= end < 1");
    rc.schedule = build_linear_schedule(T, beta_start, beta_end);

    // plan
    const json& plan = require(doc, "plan", "");
    reject_unknown_keys(plan, "plan.", {"strategy", "n", "exponent"});
    const std::string strat = get_string_or(plan, "strategy", "plan.", "");
    if (strat.empty())
        throw ConfigSemanticError("missing key 'plan.strategy'");
    PlanStrategy strategy;
    try {
        strategy = strategy_from_name(strat);
    } catch (const std::invalid_argument&) {
        throw ConfigSemanticError("'plan.strategy' must be uniform_stride, quadratic_front or power_tail");
    }
    const int n = get_int(plan, "n", "plan.");
    if (n < 1 || n > T)
        throw ConfigSemanticError("'plan.n' must satisfy 1 <= n <= schedule.T");
    const double exponent = get_number_or(plan, "exponent", "plan.", 2.0);
    if (!(exponent > 0.0))
        throw ConfigSemanticError("'plan.exponent' must be > 0");
    rc.plan = build_plan(rc.schedule, strategy, n, exponent);

    // task
    const json& task = require(doc, "task", "");
    reject_unknown_keys(task, "task.", {"type", "weights", "means", "sigmas", "token_count"});
    const std::string type = get_string_or(task, "type", "task.", "");
    if (type != "gmm" && type != "pattern")
        throw ConfigSemanticError("'task.type' must be 'gmm' or 'pattern'");
    rc.task.gmm = parse_mixture(task);
    rc.task.conditional = type == "pattern";
    rc.task.token_count = static_cast<size_t>(get_int_or(task, "token_count", "task.", 4));
    if (rc.task.token_count < 1)
        throw ConfigSemanticError("'task.token_count' must be >= 1");

    // seed / output
    if (!doc.contains("seed") || !doc.at("seed").is_number_integer())
        throw ConfigSemanticError("missing or non-integer key 'seed'");
    rc.seed = doc.at("seed").get<uint64_t>();
    rc.output_dir = get_string_or(doc, "output_dir", "", "out");
    rc.checkpoint = get_string_or(doc, "checkpoint", "", "");

    // train (optional block)
    const json train = doc.contains("train") ? doc.at("train") : json::object();
    reject_unknown_keys(train, "train.",
                        {"lambda_atv", "stage1_steps", "stage2_steps", "batch_size",
                         "learning_rate", "momentum", "plan_restricted", "augment",
                         "atv_on_weights", "hidden", "time_dim", "cond_dim", "seed"});
    rc.train.lambda_atv = get_number_or(train, "lambda_atv", "train.", 1e-3);
    rc.train.stage1_steps = get_int_or(train, "stage1_steps", "train.", 2000);
    rc.train.stage2_steps = get_int_or(train, "stage2_steps", "train.", 500);
    rc.train.batch_size = get_int_or(train, "batch_size", "train.", 32);
    rc.train.learning_rate = get_number_or(train, "learning_rate", "train.", 1e-3);
    rc.train.momentum = get_number_or(train, "momentum", "train.", 0.9);
    rc.train.augment = get_bool_or(train, "augment", "train.", true);
    rc.train.atv_on_weights = get_bool_or(train, "atv_on_weights", "train.", false);
    rc.train.seed = train.contains("seed") ? train.at("seed").get<uint64_t>() : rc.seed;
    if (get_bool_or(train, "plan_restricted", "train.", false))
        rc.train.plan = rc.plan;
    try {
        rc.train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigSemanticError(std::string("train: ") + e.what());
    }

    rc.model.data_dim = rc.task.dim();
    rc.model.hidden = static_cast<size_t>(get_int_or(train, "hidden", "train.", 128));
    rc.model.time_dim = static_cast<size_t>(get_int_or(train, "time_dim", "train.", 16));
    rc.model.cond_dim = static_cast<size_t>(get_int_or(train, "cond_dim", "train.", 8));
    rc.model.n_classes = rc.task.n_classes();
    rc.model.total_steps = T;
    rc.task.token_dim = rc.model.cond_dim;
    try {
        rc.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigSemanticError(std::string("train: ") + e.what());
    }

    // sampler (optional block)
    const json sampler = doc.contains("sampler") ? doc.at("sampler") : json::object();
    reject_unknown_keys(sampler, "sampler.", {"kind", "eta", "denoiser", "repaint"});
    const std::string kind = get_string_or(sampler, "kind", "sampler.", "ancestral");
    try {
        rc.sampler_kind = sampler_from_name(kind);
    } catch (const std::invalid_argument&) {
        throw ConfigSemanticError("'sampler.kind' must be ancestral, ddim or plms");
    }
    rc.sampler_eta = get_number_or(sampler, "eta", "sampler.", 0.0);
    if (rc.sampler_eta < 0.0 || rc.sampler_eta > 1.0)
        throw ConfigSemanticError("'sampler.eta' must be in [0, 1]");
    rc.denoiser_kind = get_string_or(sampler, "denoiser", "sampler.", "oracle");
    if (rc.denoiser_kind != "oracle" && rc.denoiser_kind != "mlp")
        throw ConfigSemanticError("'sampler.denoiser' must be 'oracle' or 'mlp'");
    if (sampler.contains("repaint")) {
        const json& rp = sampler.at("repaint");
        reject_unknown_keys(rp, "sampler.repaint.", {"jump_len", "n_resample"});
        RepaintParams params;
        params.jump_len = get_int_or(rp, "jump_len", "sampler.repaint.", 2);
        params.n_resample = get_int_or(rp, "n_resample", "sampler.repaint.", 3);
        if (params.jump_len < 1 || params.n_resample < 1)
            throw ConfigSemanticError("'sampler.repaint' counts must be >= 1");
        rc.repaint = params;
    }

    // inpaint (optional block, used by the repaint command)
    if (doc.contains("inpaint")) {
        const json& ip = doc.at("inpaint");
        reject_unknown_keys(ip, "inpaint.", {"mask", "known_x0"});
        const json& mask = require(ip, "mask", "inpaint.");
        const json& known = require(ip, "known_x0", "inpaint.");
        if (!mask.is_array() || !known.is_array() || mask.size() != known.size())
            throw ConfigSemanticError("'inpaint.mask' and 'inpaint.known_x0' must be arrays of equal length");
        if (mask.size() != rc.task.dim())
            throw ConfigSemanticError("'inpaint.mask' length must equal the task dimension");
        InpaintMask im;
        for (const auto& b : mask) {
            if (!b.is_number_integer() || (b.get<int>() != 0 && b.get<int>() != 1))
                throw ConfigSemanticError("'inpaint.mask' entries must be 0 or 1");
            im.m.push_back(static_cast<uint8_t>(b.get<int>()));
        }
        for (const auto& x : known) {
            if (!x.is_number())
                throw ConfigSemanticError("'inpaint.known_x0' entries must be numeric");
            im.known_x0.push_back(x.get<double>());
        }
        rc.inpaint = std::move(im);
    }

    // bench (optional block)
    const json bench = doc.contains("bench") ? doc.at("bench") : json::object();
    reject_unknown_keys(bench, "bench.",
                        {"mode", "plan_sizes", "trials", "points", "n_proj", "sampler_kind",
                         "plots", "threshold", "max_steps", "eval_every", "eval_samples"});
    rc.bench.mode = get_string_or(bench, "mode", "bench.", "inference");
    if (rc.bench.mode != "inference" && rc.bench.mode != "training")
        throw ConfigSemanticError("'bench.mode' must be 'inference' or 'training'");
    if (bench.contains("plan_sizes")) {
        rc.bench.plan_sizes.clear();
        for (const auto& v : bench.at("plan_sizes")) {
            if (!v.is_number_integer())
                throw ConfigSemanticError("'bench.plan_sizes' must be integers");
            const int size = v.get<int>();
            if (size < 1 || size > T)
                throw ConfigSemanticError("'bench.plan_sizes' entries must be in [1, schedule.T]");
            rc.bench.plan_sizes.push_back(size);
        }
    } else {
        for (int size : rc.bench.plan_sizes)
            if (size > T)
                throw ConfigSemanticError("'bench.plan_sizes' default grid needs schedule.T >= 1000");
    }
    rc.bench.trials = get_int_or(bench, "trials", "bench.", 3);
    rc.bench.points = get_int_or(bench, "points", "bench.", 2048);
    rc.bench.n_proj = get_int_or(bench, "n_proj", "bench.", 64);
    rc.bench.sampler_kind = get_string_or(bench, "sampler_kind", "bench.", "plms");
    rc.bench.plots = get_bool_or(bench, "plots", "bench.", false);
    rc.bench.threshold = get_number_or(bench, "threshold", "bench.", 1.0);
    rc.bench.max_steps = get_int_or(bench, "max_steps", "bench.", 20000);
    rc.bench.eval_every = get_int_or(bench, "eval_every", "bench.", 100);
    rc.bench.eval_samples = get_int_or(bench, "eval_samples", "bench.", 2000);
    if (rc.bench.trials < 0 || rc.bench.points < 1 || rc.bench.n_proj < 1)
        throw ConfigSemanticError("'bench.trials/points/n_proj' out of range");
    try {
        sampler_from_name(rc.bench.sampler_kind);
    } catch (const std::invalid_argument&) {
        throw ConfigSemanticError("'bench.sampler_kind' must be ancestral, ddim or plms");
    }

    return rc;
}

nlohmann::json apply_override(nlohmann::json doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigSemanticError("override '" + assignment + "' is not key.path=value");
    const std::string keypath = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    std::string pointer;
    size_t start = 0;
    while (start <= keypath.size()) {
        const size_t dot = keypath.find('.', start);
        const std::string part = keypath.substr(start, dot == std::string::npos ? std::string::npos
                                                                                : dot - start);
        if (part.empty())
            throw ConfigSemanticError("override '" + assignment + "' has an empty key segment");
        pointer += "/" + part;
        if (dot == std::string::npos)
            break;
        start = dot + 1;
    }

    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;  // plain strings need no quotes
    }
    doc[json::json_pointer(pointer)] = parsed;
    return doc;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in)
        throw ConfigParseError("cannot open config file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigParseError(std::string("config parse error: ") + e.what());
    }
    for (const auto& o : overrides)
        doc = apply_override(std::move(doc), o);
    return validate_run_config(std::move(doc));
}

std::string config_hash(const nlohmann::json& doc) {
    const std::string dump = doc.dump();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_manifest(const std::string& output_dir, const std::string& command,
                    const RunConfig& config, const std::vector<std::string>& overrides) {
    std::filesystem::create_directories(output_dir);
    nlohmann::json doc;
    doc["command"] = command;
    doc["config_hash"] = config_hash(config.raw);
    doc["seed"] = config.seed;
    doc["overrides"] = overrides;
    doc["config"] = config.raw;
    std::ofstream out(output_dir + "/manifest.json");
    if (!out)
        throw std::runtime_error("cannot write manifest in " + output_dir);
    out << doc.dump(2) << "\n";
}

}  // namespace nudiff
