#pragma once

#include <string>

#include "nudiff/mlp.hpp"

namespace nudiff {

// Checkpoint document: layer shapes plus the flat parameter vector as a
// little-endian float64 base64 blob, with a format-version field.
void save_checkpoint(const MlpDenoiser& model, const std::string& path);
MlpDenoiser load_checkpoint(const std::string& path);

std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

}  // namespace nudiff
