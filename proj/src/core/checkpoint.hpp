#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "model.hpp"

namespace dressswap {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Order of the 16 regression outputs, recorded in every checkpoint header.
inline constexpr const char* kOutputLayout =
    "deepfashion-v1 interleaved x1,y1,...,x8,y8 (left collar, right collar, left sleeve, "
    "right sleeve, left waistline, right waistline, left hem, right hem) in 100x100 "
    "model-space pixels";

struct Checkpoint {
  ModelConfig config;
  ParameterSet<float> params;
  nlohmann::json metadata = nlohmann::json::object();
};

// Layout: "DSWCKPT\0", u32 version, u64 header length, header JSON, then each
// trainable parameter as little-endian float32 in declared order. BN running
// buffers live in the header.
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

// Size of everything before the first parameter blob.
std::size_t checkpoint_header_size(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dressswap
