#pragma once

#include <filesystem>
#include <json.hpp>

#include "ntssl/autodiff.hpp"
#include "ntssl/encoder.hpp"

namespace ntssl {

/// On disk: one line of JSON manifest (format tag, encoder config, config
/// echo, and per-tensor name/shape/offset/count), a newline, then the raw
/// parameter values as little-endian f64 in manifest order.
struct Checkpoint {
  EncoderConfig encoder;
  ad::ParamStore params;
  nlohmann::json config_echo = nlohmann::json::object();
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ntssl
