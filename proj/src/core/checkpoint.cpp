#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dressswap {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'W', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kPreamble = sizeof kMagic + 4 + 8;

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(const std::string& bytes, std::size_t at) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return value;
}

struct Preamble {
  std::uint32_t version;
  std::uint64_t header_length;
};

Preamble read_preamble(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    fail(ErrorCode::format, "not a checkpoint file (bad magic)");
  }
  if (bytes.size() < kPreamble) fail(ErrorCode::format, "truncated checkpoint preamble");
  Preamble p{get_le<std::uint32_t>(bytes, 8), get_le<std::uint64_t>(bytes, 12)};
  if (p.version != kCheckpointVersion) {
    fail(ErrorCode::format, "checkpoint version " + std::to_string(p.version) +
                                " is not supported (expected " +
                                std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() - kPreamble < p.header_length) {
    fail(ErrorCode::format, "truncated checkpoint header");
  }
  return p;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  validate_config(checkpoint.config);
  check_parameters(checkpoint.config, checkpoint.params);

  nlohmann::json header;
  header["format"] = "dressswap-checkpoint";
  header["model"] = nlohmann::json::parse(config_to_json(checkpoint.config));
  header["output_layout"] = kOutputLayout;
  header["metadata"] = checkpoint.metadata;
  nlohmann::json params = nlohmann::json::array();
  nlohmann::json buffers = nlohmann::json::object();
  for (const auto& slot : parameter_layout(checkpoint.config)) {
    const auto& value = checkpoint.params.at(slot.name);
    if (slot.trainable) {
      params.push_back({{"name", slot.name}, {"shape", slot.shape}});
    } else {
      std::vector<double> values(value.data().begin(), value.data().end());
      buffers[slot.name] = values;
    }
  }
  header["parameters"] = std::move(params);
  header["buffers"] = std::move(buffers);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + 4 * checkpoint.params.trainable_count());
  for (const auto& slot : parameter_layout(checkpoint.config)) {
    if (!slot.trainable) continue;
    for (float v : checkpoint.params.at(slot.name).data()) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  return out;
}

std::size_t checkpoint_header_size(const std::string& bytes) {
  return kPreamble + read_preamble(bytes).header_length;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  const Preamble pre = read_preamble(bytes);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPreamble, pre.header_length));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  try {
    if (header.at("output_layout").get<std::string>() != kOutputLayout) {
      fail(ErrorCode::format, "checkpoint output layout differs from this build's convention");
    }
    ck.config = config_from_json(header.at("model").dump());
    ck.metadata = header.at("metadata");
    const auto& declared = header.at("parameters");
    const auto& buffers = header.at("buffers");
    std::size_t offset = kPreamble + pre.header_length;
    std::size_t next_declared = 0;
    for (const auto& slot : parameter_layout(ck.config)) {
      TensorF value(slot.shape);
      if (!slot.trainable) {
        const auto values = buffers.at(slot.name).get<std::vector<double>>();
        if (values.size() != value.size()) {
          fail(ErrorCode::shape_mismatch, "buffer " + slot.name + " has " +
                                              std::to_string(values.size()) + " values, expected " +
                                              std::to_string(value.size()));
        }
        for (std::size_t i = 0; i < values.size(); ++i) value[i] = static_cast<float>(values[i]);
        ck.params.add(slot.name, std::move(value), false);
        continue;
      }
      if (next_declared >= declared.size()) {
        fail(ErrorCode::shape_mismatch, "checkpoint header does not declare " + slot.name);
      }
      const auto& entry = declared[next_declared++];
      if (entry.at("name").get<std::string>() != slot.name) {
        fail(ErrorCode::shape_mismatch, "checkpoint declares " + entry.at("name").get<std::string>() +
                                            " where the model expects " + slot.name);
      }
      require_shape(entry.at("shape").get<Shape>(), slot.shape, "checkpoint parameter " + slot.name);
      const std::size_t need = 4 * value.size();
      if (bytes.size() - offset < need) {
        fail(ErrorCode::format, "truncated checkpoint: parameter " + slot.name + " needs " +
                                    std::to_string(need) + " bytes, " +
                                    std::to_string(bytes.size() - offset) + " remain");
      }
      for (std::size_t i = 0; i < value.size(); ++i) {
        value[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset + 4 * i));
      }
      offset += need;
      ck.params.add(slot.name, std::move(value), true);
    }
    if (next_declared != declared.size()) {
      fail(ErrorCode::shape_mismatch, "checkpoint declares parameters the model does not have");
    }
    if (offset != bytes.size()) {
      fail(ErrorCode::format, "checkpoint has " + std::to_string(bytes.size() - offset) +
                                  " trailing bytes");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("corrupt checkpoint header: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace dressswap
