#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rng.hpp"

namespace dressswap {

namespace fs = std::filesystem;

const char* visibility_name(Visibility v) {
  switch (v) {
    case Visibility::visible: return "visible";
    case Visibility::occluded: return "occluded";
    case Visibility::cutoff: return "cutoff";
  }
  return "unknown";
}

const char* clothes_type_name(ClothesType t) {
  switch (t) {
    case ClothesType::upper: return "upper";
    case ClothesType::lower: return "lower";
    case ClothesType::full_body: return "full_body";
  }
  return "unknown";
}

std::size_t landmark_slots(ClothesType type) {
  switch (type) {
    case ClothesType::upper: return 6;
    case ClothesType::lower: return 4;
    case ClothesType::full_body: return 8;
  }
  return 0;
}

namespace {

ClothesType clothes_type_from_name(const std::string& name) {
  for (auto t : {ClothesType::upper, ClothesType::lower, ClothesType::full_body}) {
    if (name == clothes_type_name(t)) return t;
  }
  fail(ErrorCode::format, "unknown clothes_type '" + name + "'");
}

Visibility visibility_from_code(int code) {
  if (code < 0 || code > 2) {
    fail(ErrorCode::format, "visibility code " + std::to_string(code) + " out of range");
  }
  return static_cast<Visibility>(code);
}

std::string read_text(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, std::string("cannot open ") + what + " " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::ordered_json sample_to_json(const AnnotatedSample& s) {
  nlohmann::ordered_json j;
  j["image"] = s.image;
  j["width"] = s.width;
  j["height"] = s.height;
  j["clothes_type"] = clothes_type_name(s.clothes_type);
  auto arr = nlohmann::ordered_json::array();
  for (const auto& lm : s.landmarks) {
    arr.push_back({lm.x, lm.y, static_cast<int>(lm.visibility)});
  }
  j["landmarks"] = std::move(arr);
  return j;
}

AnnotatedSample sample_from_json(const nlohmann::json& j) {
  AnnotatedSample s;
  s.image = j.at("image").get<std::string>();
  s.width = j.at("width").get<std::size_t>();
  s.height = j.at("height").get<std::size_t>();
  s.clothes_type = clothes_type_from_name(j.at("clothes_type").get<std::string>());
  for (const auto& t : j.at("landmarks")) {
    if (!t.is_array() || t.size() != 3) {
      fail(ErrorCode::format, "landmark entries must be [x, y, visibility]");
    }
    s.landmarks.push_back(
        {t[0].get<double>(), t[1].get<double>(), visibility_from_code(t[2].get<int>())});
  }
  return s;
}

}  // namespace

std::string serialize_manifest(const Manifest& manifest) {
  std::string out;
  for (const auto& s : manifest.samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(const std::string& text) {
  Manifest manifest;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      manifest.samples.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::format,
           "manifest line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(e.code(), "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return manifest;
}

Manifest read_manifest(const fs::path& path) {
  return parse_manifest(read_text(path, "manifest"));
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write manifest " + path.string());
  out << serialize_manifest(manifest);
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

fs::path resolve_image(const AnnotatedSample& sample, const fs::path& manifest_dir) {
  const fs::path p(sample.image);
  return p.is_absolute() ? p : manifest_dir / p;
}

void validate_manifest(const Manifest& manifest, const fs::path& manifest_dir) {
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const auto path = resolve_image(manifest.samples[i], manifest_dir);
    if (!fs::is_regular_file(path)) {
      fail(ErrorCode::io, "manifest sample " + std::to_string(i) + ": image " +
                              path.string() + " does not exist");
    }
  }
}

ImportLayout parse_import_layout(const std::string& json_text) {
  ImportLayout layout;
  try {
    const auto j = nlohmann::json::parse(json_text);
    if (!j.is_object()) fail(ErrorCode::format, "import layout must be a JSON object");
    static const std::set<std::string> known{"header_lines", "has_variation_type", "strict",
                                             "visibility", "clothes_type"};
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) fail(ErrorCode::format, "unknown import layout key '" + key + "'");
    }
    auto check_names = [&](const char* section, std::initializer_list<const char*> names) {
      if (!j.contains(section)) return;
      if (!j[section].is_object()) {
        fail(ErrorCode::format, std::string("'") + section + "' must be an object");
      }
      for (const auto& [key, value] : j[section].items()) {
        if (std::none_of(names.begin(), names.end(), [&](const char* n) { return key == n; })) {
          fail(ErrorCode::format, std::string("unknown ") + section + " name '" + key + "'");
        }
      }
    };
    check_names("visibility", {"visible", "occluded", "cutoff"});
    check_names("clothes_type", {"upper", "lower", "full_body"});
    if (j.contains("header_lines")) layout.header_lines = j.at("header_lines").get<int>();
    if (j.contains("has_variation_type")) {
      layout.has_variation_type = j.at("has_variation_type").get<bool>();
    }
    if (j.contains("strict")) layout.strict = j.at("strict").get<bool>();
    if (j.contains("visibility")) {
      layout.visibility_codes.clear();
      for (auto v : {Visibility::visible, Visibility::occluded, Visibility::cutoff}) {
        if (j["visibility"].contains(visibility_name(v))) {
          layout.visibility_codes[j["visibility"][visibility_name(v)].get<int>()] = v;
        }
      }
    }
    if (j.contains("clothes_type")) {
      layout.clothes_codes.clear();
      for (auto t : {ClothesType::upper, ClothesType::lower, ClothesType::full_body}) {
        if (j["clothes_type"].contains(clothes_type_name(t))) {
          layout.clothes_codes[j["clothes_type"][clothes_type_name(t)].get<int>()] = t;
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::format, std::string("malformed import layout: ") + e.what());
  }
  return layout;
}

namespace {

bool is_count_line(const std::vector<std::string>& tokens) {
  return tokens.size() == 1 &&
         std::all_of(tokens[0].begin(), tokens[0].end(), [](char c) { return std::isdigit(c); });
}

int parse_int(const std::string& token, const char* what) {
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || token.empty()) {
    fail(ErrorCode::format, std::string("bad ") + what + " '" + token + "'");
  }
  return value;
}

double parse_real(const std::string& token, const char* what) {
  std::size_t used = 0;
  double value = 0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || token.empty() || !std::isfinite(value)) {
    fail(ErrorCode::format, std::string("bad ") + what + " '" + token + "'");
  }
  return value;
}

AnnotatedSample parse_record(const std::vector<std::string>& tokens, const ImportLayout& layout,
                             const fs::path& image_dir, const fs::path& prefix) {
  const std::size_t fixed = layout.has_variation_type ? 3 : 2;
  if (tokens.size() < fixed) fail(ErrorCode::format, "too few fields");
  AnnotatedSample s;
  const int type_code = parse_int(tokens[1], "clothes type");
  const auto type_it = layout.clothes_codes.find(type_code);
  if (type_it == layout.clothes_codes.end()) {
    fail(ErrorCode::format, "unknown clothes type code " + std::to_string(type_code));
  }
  s.clothes_type = type_it->second;
  if (layout.has_variation_type) parse_int(tokens[2], "variation type");

  const std::size_t slots = landmark_slots(s.clothes_type);
  const std::size_t triplets = (tokens.size() - fixed) / 3;
  if ((tokens.size() - fixed) % 3 != 0 || triplets < slots) {
    fail(ErrorCode::format, "expected " + std::to_string(slots) + " landmark triplets, got " +
                                std::to_string(tokens.size() - fixed) + " trailing fields");
  }
  for (std::size_t k = 0; k < triplets; ++k) {
    const std::size_t base = fixed + 3 * k;
    const int vis_code = parse_int(tokens[base], "visibility");
    const double x = parse_real(tokens[base + 1], "x coordinate");
    const double y = parse_real(tokens[base + 2], "y coordinate");
    if (k >= slots) {
      // Some list files pad short records to 8 slots with zeros.
      if (vis_code != 0 || x != 0.0 || y != 0.0) {
        fail(ErrorCode::format, "unexpected landmark beyond slot " + std::to_string(slots));
      }
      continue;
    }
    const auto vis_it = layout.visibility_codes.find(vis_code);
    if (vis_it == layout.visibility_codes.end()) {
      fail(ErrorCode::format, "unknown visibility code " + std::to_string(vis_code));
    }
    s.landmarks.push_back({x, y, vis_it->second});
  }
  const ImageSize size = probe_image(image_dir / tokens[0]);
  s.width = size.width;
  s.height = size.height;
  s.image = (prefix / tokens[0]).generic_string();
  return s;
}

}  // namespace

ImportResult import_deepfashion(const fs::path& annotations, const fs::path& image_dir,
                                const ImportLayout& layout, const fs::path& path_prefix) {
  std::ifstream in(annotations);
  if (!in) fail(ErrorCode::io, "cannot open annotation file " + annotations.string());
  ImportResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    for (std::string tok; ls >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (layout.header_lines >= 0) {
      if (line_no <= static_cast<std::size_t>(layout.header_lines)) continue;
    } else if ((line_no == 1 && is_count_line(tokens)) || tokens[0] == "image_name") {
      continue;
    }
    try {
      result.manifest.samples.push_back(parse_record(tokens, layout, image_dir, path_prefix));
      ++result.parsed;
    } catch (const Error& e) {
      if (layout.strict) {
        fail(e.code(), annotations.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      result.skipped.push_back({line_no, e.what()});
    }
  }
  if (result.parsed == 0) {
    fail(ErrorCode::format, "no valid records in " + annotations.string());
  }
  return result;
}

Manifest filter_trainable(const Manifest& manifest) {
  Manifest out;
  for (const auto& s : manifest.samples) {
    if (s.clothes_type != ClothesType::full_body || s.landmarks.size() != 8) continue;
    const bool all_visible = std::all_of(s.landmarks.begin(), s.landmarks.end(), [](const auto& l) {
      return l.visibility == Visibility::visible;
    });
    if (all_visible) out.samples.push_back(s);
  }
  return out;
}

ScaledLandmarks scale_landmarks(const std::vector<Landmark>& landmarks, std::size_t width,
                                std::size_t height, std::size_t side) {
  if (landmarks.size() != 8) {
    fail(ErrorCode::invalid_argument,
         "expected 8 landmarks, got " + std::to_string(landmarks.size()));
  }
  if (width == 0 || height == 0) {
    fail(ErrorCode::invalid_argument, "image dimensions must be positive");
  }
  const double s = static_cast<double>(side);
  const double upper = std::nextafter(s, 0.0);
  ScaledLandmarks out;
  for (std::size_t k = 0; k < 8; ++k) {
    const double x = landmarks[k].x * s / static_cast<double>(width);
    const double y = landmarks[k].y * s / static_cast<double>(height);
    if (!std::isfinite(x) || !std::isfinite(y)) {
      fail(ErrorCode::numeric, "landmark " + std::to_string(k) + " is not finite");
    }
    const double cx = std::clamp(x, 0.0, upper);
    const double cy = std::clamp(y, 0.0, upper);
    out.clamped += (cx != x) + (cy != y);
    out.target[2 * k] = cx;
    out.target[2 * k + 1] = cy;
  }
  return out;
}

PreparedSample prepare_sample(const AnnotatedSample& sample, const fs::path& manifest_dir,
                              std::size_t side) {
  const fs::path path = resolve_image(sample, manifest_dir);
  ImageRGB image;
  try {
    image = decode_image(path);
  } catch (const Error& e) {
    fail(e.code(), "cannot prepare " + path.string() + ": " + e.what());
  }
  if (image.width() != sample.width || image.height() != sample.height) {
    fail(ErrorCode::format, "image " + path.string() + " is " + std::to_string(image.width()) +
                                "x" + std::to_string(image.height()) + " but the manifest says " +
                                std::to_string(sample.width) + "x" +
                                std::to_string(sample.height));
  }
  const auto scaled = scale_landmarks(sample.landmarks, sample.width, sample.height, side);
  return PreparedSample{resize_bilinear(to_tensor(image), side, side), scaled.target,
                        scaled.clamped};
}

namespace {

double snap(double v) { return std::round(v * 8.0) / 8.0; }

std::uint8_t channel(Rng& rng) { return static_cast<std::uint8_t>(rng.below(256)); }

int linf(const Rgb& a, const Rgb& b) {
  return std::max({std::abs(a.r - b.r), std::abs(a.g - b.g), std::abs(a.b - b.b)});
}

Rgb far_color(Rng& rng, const Rgb& avoid) {
  for (;;) {
    const Rgb c{channel(rng), channel(rng), channel(rng)};
    if (linf(c, avoid) >= 64) return c;
  }
}

constexpr int kBackgroundNoise = 12;

}  // namespace

SyntheticGarment synth_garment(std::uint64_t seed, std::size_t index, std::size_t width,
                               std::size_t height) {
  Rng rng(derive_seed(seed, index));
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  const double cx = w * rng.uniform(0.42, 0.58);
  const double collar_y = h * rng.uniform(0.10, 0.18);
  const double collar_half = w * rng.uniform(0.08, 0.14);
  const double sleeve_y = collar_y + h * rng.uniform(0.06, 0.12);
  const double sleeve_half = w * rng.uniform(0.25, 0.36);
  const double waist_y = h * rng.uniform(0.42, 0.52);
  const double waist_half = w * rng.uniform(0.12, 0.20);
  const double hem_y = h * rng.uniform(0.80, 0.92);
  const double hem_half = w * rng.uniform(0.20, 0.34);

  const std::array<std::pair<double, double>, 4> rows{{{collar_y, collar_half},
                                                       {sleeve_y, sleeve_half},
                                                       {waist_y, waist_half},
                                                       {hem_y, hem_half}}};
  SyntheticGarment g;
  for (const auto& [row_y, half] : rows) {
    for (double side : {-1.0, 1.0}) {
      const double x = cx + side * half + w * rng.uniform(-0.02, 0.02);
      const double y = row_y + h * rng.uniform(-0.01, 0.01);
      g.landmarks.push_back({snap(std::clamp(x, 1.0, w - 1.0)), snap(std::clamp(y, 1.0, h - 1.0))});
    }
  }
  g.background = {channel(rng), channel(rng), channel(rng)};
  g.body = far_color(rng, g.background);
  g.stripe = far_color(rng, g.background);
  return g;
}

ImageRGB render_garment(const SyntheticGarment& garment, std::uint64_t seed, std::size_t index,
                        std::size_t width, std::size_t height) {
  Rng rng(derive_seed(seed ^ 0x5a5a5a5aULL, index));
  ImageRGB image(width, height);
  auto jitter = [&](std::uint8_t v) {
    const int d = static_cast<int>(rng.below(2 * kBackgroundNoise + 1)) - kBackgroundNoise;
    return static_cast<std::uint8_t>(std::clamp(v + d, 0, 255));
  };
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const Rgb& b = garment.background;
      image.set(x, y, {jitter(b.r), jitter(b.g), jitter(b.b)});
    }
  }
  Polygon outline;
  for (std::size_t slot : kOutlineOrder) outline.points.push_back(garment.landmarks[slot]);
  const PixelMask mask = rasterize(outline, width, height);
  const std::size_t period = 6 + rng.below(9);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (!mask.at(x, y)) continue;
      image.set(x, y, ((x + y) / period) % 2 ? garment.stripe : garment.body);
    }
  }
  return image;
}

Manifest generate_synthetic(const SyntheticOptions& options, const fs::path& out_dir) {
  if (options.count == 0) fail(ErrorCode::invalid_argument, "synthetic count must be >= 1");
  if (options.width < 8 || options.height < 8) {
    fail(ErrorCode::invalid_argument, "synthetic images must be at least 8x8");
  }
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) fail(ErrorCode::io, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

  Manifest manifest;
  for (std::size_t i = 0; i < options.count; ++i) {
    const auto garment = synth_garment(options.seed, i, options.width, options.height);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%05zu.png", i);
    const std::string rel = std::string("images/") + name;
    encode_png(out_dir / rel,
               render_garment(garment, options.seed, i, options.width, options.height));
    AnnotatedSample s{rel, options.width, options.height, ClothesType::full_body, {}};
    for (const auto& p : garment.landmarks) s.landmarks.push_back({p.x, p.y, Visibility::visible});
    manifest.samples.push_back(std::move(s));
  }
  write_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace dressswap
