#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "image.hpp"
#include "tensor.hpp"

namespace dressswap {

enum class Visibility { visible = 0, occluded = 1, cutoff = 2 };
enum class ClothesType { upper = 1, lower = 2, full_body = 3 };

const char* visibility_name(Visibility v);
const char* clothes_type_name(ClothesType t);

// Landmark slots per clothes type: upper 6, lower 4, full body 8.
std::size_t landmark_slots(ClothesType type);

struct Landmark {
  double x = 0.0;
  double y = 0.0;
  Visibility visibility = Visibility::visible;
  friend bool operator==(const Landmark&, const Landmark&) = default;
};

// Full-body slot order: left collar, right collar, left sleeve, right sleeve,
// left waistline, right waistline, left hem, right hem.
inline constexpr std::array<const char*, 8> kLandmarkNames{
    "left_collar",    "right_collar",    "left_sleeve", "right_sleeve",
    "left_waistline", "right_waistline", "left_hem",    "right_hem"};

struct AnnotatedSample {
  std::string image;  // relative paths resolve against the manifest directory
  std::size_t width = 0;
  std::size_t height = 0;
  ClothesType clothes_type = ClothesType::full_body;
  std::vector<Landmark> landmarks;  // stored in slot order, never permuted
  friend bool operator==(const AnnotatedSample&, const AnnotatedSample&) = default;
};

struct Manifest {
  std::vector<AnnotatedSample> samples;
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

// One JSON object per line with keys image, width, height, clothes_type,
// landmarks ([x, y, visibility] triples).
std::string serialize_manifest(const Manifest& manifest);
Manifest parse_manifest(const std::string& text);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

std::filesystem::path resolve_image(const AnnotatedSample& sample,
                                    const std::filesystem::path& manifest_dir);

// Throws io naming the first sample whose image file is missing.
void validate_manifest(const Manifest& manifest, const std::filesystem::path& manifest_dir);

// Positional annotation layout. Defaults match the landmark benchmark list
// file: "image_name clothes_type [variation_type] (visibility x y)*".
struct ImportLayout {
  int header_lines = -1;  // -1: skip a leading count line and "image_name" header
  bool has_variation_type = false;
  std::map<int, Visibility> visibility_codes{
      {0, Visibility::visible}, {1, Visibility::occluded}, {2, Visibility::cutoff}};
  std::map<int, ClothesType> clothes_codes{
      {1, ClothesType::upper}, {2, ClothesType::lower}, {3, ClothesType::full_body}};
  bool strict = false;
};

ImportLayout parse_import_layout(const std::string& json_text);

struct ImportIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ImportResult {
  Manifest manifest;
  std::size_t parsed = 0;
  std::vector<ImportIssue> skipped;
};

// `image_dir` is probed for image dimensions; `path_prefix` is prepended to
// each image name in the emitted manifest.
ImportResult import_deepfashion(const std::filesystem::path& annotations,
                                const std::filesystem::path& image_dir,
                                const ImportLayout& layout,
                                const std::filesystem::path& path_prefix = {});

// Full-body samples whose 8 landmarks are all visible.
Manifest filter_trainable(const Manifest& manifest);

struct ScaledLandmarks {
  std::array<double, 16> target{};  // interleaved x1, y1, ..., x8, y8
  std::size_t clamped = 0;
};

// x' = x * side / W, y' = y * side / H, clamped to [0, side).
ScaledLandmarks scale_landmarks(const std::vector<Landmark>& landmarks, std::size_t width,
                                std::size_t height, std::size_t side = 100);

struct PreparedSample {
  Tensor image;  // [3, side, side], values in [0,1]
  std::array<double, 16> target{};
  std::size_t clamped = 0;
};

PreparedSample prepare_sample(const AnnotatedSample& sample,
                              const std::filesystem::path& manifest_dir,
                              std::size_t side = 100);

struct SyntheticOptions {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::size_t width = 128;
  std::size_t height = 192;
};

// Garment vertex roles along the outline in clockwise screen order.
inline constexpr std::array<std::size_t, 8> kOutlineOrder{0, 1, 3, 5, 7, 6, 4, 2};

struct SyntheticGarment {
  std::vector<Point> landmarks;  // slot order
  Rgb body, stripe, background;
};

// Deterministic garment geometry and palette for one sample.
SyntheticGarment synth_garment(std::uint64_t seed, std::size_t index, std::size_t width,
                               std::size_t height);
ImageRGB render_garment(const SyntheticGarment& garment, std::uint64_t seed, std::size_t index,
                        std::size_t width, std::size_t height);

// Writes images/synth_NNNNN.png and manifest.jsonl under `out_dir`.
Manifest generate_synthetic(const SyntheticOptions& options, const std::filesystem::path& out_dir);

}  // namespace dressswap
