#include "nudiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace nudiff {

static const char* kB64Chars =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        uint32_t v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64Chars[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64Chars[v & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    int lookup[256];
    std::fill(std::begin(lookup), std::end(lookup), -1);
    for (int i = 0; i < 64; i++)
        lookup[static_cast<unsigned char>(kB64Chars[i])] = i;

    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    uint32_t v = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r')
            continue;
        const int x = lookup[static_cast<unsigned char>(c)];
        if (x < 0)
            throw std::invalid_argument("base64_decode: invalid character");
        v = (v << 6) | static_cast<uint32_t>(x);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((v >> bits) & 0xff));
        }
    }
    return out;
}

namespace {

constexpr int kFormatVersion = 1;

std::vector<unsigned char> params_to_le_bytes(const Vec& theta) {
    std::vector<unsigned char> bytes(theta.size() * 8);
    for (size_t i = 0; i < theta.size(); i++) {
        uint64_t u;
        std::memcpy(&u, &theta[i], 8);
        if constexpr (std::endian::native == std::endian::big)
            u = __builtin_bswap64(u);
        std::memcpy(bytes.data() + i * 8, &u, 8);
    }
    return bytes;
}

Vec le_bytes_to_params(const std::vector<unsigned char>& bytes) {
    if (bytes.size() % 8 != 0)
        throw std::invalid_argument("checkpoint: parameter blob not a multiple of 8 bytes");
    Vec theta(bytes.size() / 8);
    for (size_t i = 0; i < theta.size(); i++) {
        uint64_t u;
        std::memcpy(&u, bytes.data() + i * 8, 8);
        if constexpr (std::endian::native == std::endian::big)
            u = __builtin_bswap64(u);
        std::memcpy(&theta[i], &u, 8);
    }
    return theta;
}

}  // namespace

void save_checkpoint(const MlpDenoiser& model, const std::string& path) {
    nlohmann::json doc;
    doc["format_version"] = kFormatVersion;
    doc["model"] = {
        {"data_dim", model.cfg.data_dim},   {"hidden", model.cfg.hidden},
        {"time_dim", model.cfg.time_dim},   {"cond_dim", model.cfg.cond_dim},
        {"n_classes", model.cfg.n_classes}, {"total_steps", model.cfg.total_steps},
    };
    nlohmann::json segments = nlohmann::json::array();
    for (const auto& [name, rows, cols] : model.segment_shapes())
        segments.push_back({{"name", name}, {"rows", rows}, {"cols", cols}});
    doc["segments"] = segments;
    auto bytes = params_to_le_bytes(model.flatten_params());
    doc["params"] = base64_encode(bytes.data(), bytes.size());

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_checkpoint: cannot open " + path + " for writing");
    out << doc.dump(2) << "\n";
}

MlpDenoiser load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    if (doc.at("format_version").get<int>() != kFormatVersion)
        throw std::runtime_error("load_checkpoint: unsupported format version");

    MlpConfig cfg;
    const auto& m = doc.at("model");
    cfg.data_dim = m.at("data_dim").get<size_t>();
    cfg.hidden = m.at("hidden").get<size_t>();
    cfg.time_dim = m.at("time_dim").get<size_t>();
    cfg.cond_dim = m.at("cond_dim").get<size_t>();
    cfg.n_classes = m.at("n_classes").get<size_t>();
    cfg.total_steps = m.at("total_steps").get<int>();

    MlpDenoiser model = MlpDenoiser::zeros(cfg);
    const auto expected = model.segment_shapes();
    const auto& segments = doc.at("segments");
    if (segments.size() != expected.size())
        throw std::runtime_error("load_checkpoint: segment list mismatch");
    for (size_t i = 0; i < expected.size(); i++) {
        const auto& [name, rows, cols] = expected[i];
        if (segments[i].at("name").get<std::string>() != name ||
            segments[i].at("rows").get<size_t>() != rows ||
            segments[i].at("cols").get<size_t>() != cols)
            throw std::runtime_error("load_checkpoint: segment '" + name + "' mismatch");
    }
    Vec theta = le_bytes_to_params(base64_decode(doc.at("params").get<std::string>()));
    model.unflatten_params(theta);
    return model;
}

}  // namespace nudiff
