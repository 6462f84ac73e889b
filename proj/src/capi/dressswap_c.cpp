#include "dressswap/dressswap.h"

#include <atomic>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "trainer.hpp"

namespace fs = std::filesystem;
using namespace dressswap;

struct ds_image {
  ImageRGB image;
};

struct ds_model {
  Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;
std::atomic<bool> g_deterministic{false};

ds_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return DS_ERR_INVALID_ARGUMENT;
    case ErrorCode::shape_mismatch: return DS_ERR_SHAPE_MISMATCH;
    case ErrorCode::io: return DS_ERR_IO;
    case ErrorCode::format: return DS_ERR_FORMAT;
    case ErrorCode::numeric: return DS_ERR_NUMERIC;
    case ErrorCode::state: return DS_ERR_STATE;
  }
  return DS_ERR_INTERNAL;
}

template <typename Fn>
ds_status guarded(Fn&& fn) noexcept {
  g_last_error.clear();
  try {
    fn();
    return DS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown exception";
  }
  return DS_ERR_INTERNAL;
}

void require(const void* ptr, const char* name) {
  if (ptr == nullptr) fail(ErrorCode::invalid_argument, std::string(name) + " is NULL");
}

std::vector<Point> to_points(const ds_landmarks& lm) {
  std::vector<Point> pts;
  for (const auto& p : lm.points) pts.push_back({p.x, p.y});
  return pts;
}

void from_points(const std::vector<Point>& pts, ds_landmarks* out) {
  if (out == nullptr) return;
  if (pts.size() != DS_LANDMARK_COUNT) {
    fail(ErrorCode::invalid_argument, "expected 8 landmarks, got " + std::to_string(pts.size()));
  }
  for (std::size_t k = 0; k < DS_LANDMARK_COUNT; ++k) out->points[k] = {pts[k].x, pts[k].y};
}

ds_rect to_rect(const PixelRect& r) { return {r.x0, r.y0, r.x1, r.y1}; }

fs::path parent_of(const char* path) {
  const fs::path p = fs::path(path).parent_path();
  return p.empty() ? fs::path(".") : p;
}

}  // namespace

extern "C" {

const char* ds_version(void) { return "1.0.0"; }

const char* ds_status_name(ds_status status) {
  switch (status) {
    case DS_OK: return "ok";
    case DS_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case DS_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case DS_ERR_IO: return "io";
    case DS_ERR_FORMAT: return "format";
    case DS_ERR_NUMERIC: return "numeric";
    case DS_ERR_STATE: return "state";
    case DS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ds_last_error(void) { return g_last_error.c_str(); }

void ds_set_deterministic(int enabled) { g_deterministic = enabled != 0; }
int ds_is_deterministic(void) { return g_deterministic ? 1 : 0; }

ds_status ds_image_load(const char* path, ds_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new ds_image{decode_image(path)};
  });
}

ds_status ds_image_save_png(const ds_image* image, const char* path) {
  return guarded([&] {
    require(image, "image");
    require(path, "path");
    encode_png(path, image->image);
  });
}

ds_status ds_image_create(size_t width, size_t height, const uint8_t* rgb, ds_image** out) {
  return guarded([&] {
    require(rgb, "rgb");
    require(out, "out");
    if (width == 0 || height == 0) fail(ErrorCode::invalid_argument, "image must be at least 1x1");
    *out = new ds_image{ImageRGB(width, height, std::vector<uint8_t>(rgb, rgb + 3 * width * height))};
  });
}

size_t ds_image_width(const ds_image* image) { return image ? image->image.width() : 0; }
size_t ds_image_height(const ds_image* image) { return image ? image->image.height() : 0; }
const uint8_t* ds_image_data(const ds_image* image) {
  return image ? image->image.bytes().data() : nullptr;
}
void ds_image_free(ds_image* image) { delete image; }

ds_status ds_landmarks_read(const char* path, ds_landmarks* out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    from_points(read_landmark_file(path).landmarks, out);
  });
}

ds_status ds_landmarks_write(const char* path, const ds_landmarks* image_space,
                             const ds_landmarks* model_space, size_t width, size_t height) {
  return guarded([&] {
    require(path, "path");
    require(image_space, "image_space");
    LandmarkDocument doc;
    doc.landmarks = to_points(*image_space);
    if (model_space != nullptr) doc.model_landmarks = to_points(*model_space);
    doc.image_width = width;
    doc.image_height = height;
    write_landmark_file(path, doc);
  });
}

ds_status ds_render_overlay(const ds_image* image, const ds_landmarks* landmarks, ds_image** out) {
  return guarded([&] {
    require(image, "image");
    require(landmarks, "landmarks");
    require(out, "out");
    *out = new ds_image{overlay_landmarks(image->image, to_points(*landmarks))};
  });
}

ds_status ds_swap(const ds_image* source, const ds_landmarks* source_landmarks,
                  const ds_image* dest, const ds_landmarks* dest_landmarks, ds_image** out,
                  ds_swap_info* info) {
  return guarded([&] {
    require(source, "source");
    require(source_landmarks, "source_landmarks");
    require(dest, "dest");
    require(dest_landmarks, "dest_landmarks");
    require(out, "out");
    SwapResult r = swap_garment(source->image, to_points(*source_landmarks), dest->image,
                                to_points(*dest_landmarks));
    if (info != nullptr) {
      *info = ds_swap_info{to_rect(r.source_bbox), to_rect(r.dest_bbox), r.composited};
    }
    *out = new ds_image{std::move(r.image)};
  });
}

ds_status ds_synth(size_t count, uint64_t seed, size_t width, size_t height, const char* out_dir) {
  return guarded([&] {
    require(out_dir, "out_dir");
    generate_synthetic(SyntheticOptions{count, seed, width, height}, out_dir);
  });
}

ds_status ds_import(const char* annotations, const char* image_dir, const char* layout_path,
                    const char* out_manifest, ds_message_fn on_skip, void* user,
                    ds_import_summary* summary) {
  return guarded([&] {
    require(annotations, "annotations");
    require(image_dir, "image_dir");
    require(out_manifest, "out_manifest");
    ImportLayout layout;
    if (layout_path != nullptr) {
      std::ifstream in(layout_path);
      if (!in) fail(ErrorCode::io, std::string("cannot open layout ") + layout_path);
      std::stringstream ss;
      ss << in.rdbuf();
      layout = parse_import_layout(ss.str());
    }
    const fs::path prefix =
        fs::relative(fs::absolute(image_dir), fs::absolute(parent_of(out_manifest)));
    const ImportResult result = import_deepfashion(annotations, image_dir, layout, prefix);
    if (on_skip != nullptr) {
      for (const auto& issue : result.skipped) {
        const std::string msg = "line " + std::to_string(issue.line) + ": " + issue.message;
        on_skip(msg.c_str(), user);
      }
    }
    write_manifest(out_manifest, result.manifest);
    if (summary != nullptr) *summary = ds_import_summary{result.parsed, result.skipped.size()};
  });
}

ds_status ds_filter(const char* in_manifest, const char* out_manifest, size_t* kept,
                    size_t* total) {
  return guarded([&] {
    require(in_manifest, "in_manifest");
    require(out_manifest, "out_manifest");
    const Manifest in = read_manifest(in_manifest);
    Manifest out = filter_trainable(in);
    // Keep image paths valid relative to the new manifest location.
    const fs::path from = fs::absolute(parent_of(in_manifest));
    const fs::path to = fs::absolute(parent_of(out_manifest));
    if (from.lexically_normal() != to.lexically_normal()) {
      for (auto& s : out.samples) {
        if (!fs::path(s.image).is_absolute()) {
          s.image = fs::relative(from / s.image, to).generic_string();
        }
      }
    }
    write_manifest(out_manifest, out);
    if (kept != nullptr) *kept = out.samples.size();
    if (total != nullptr) *total = in.samples.size();
  });
}

void ds_train_options_default(ds_train_options* options) {
  if (options == nullptr) return;
  const TrainConfig d;
  *options = ds_train_options{d.batch_size, d.epochs, d.split_fraction, d.seed,
                              DS_OPTIMIZER_ADAM, d.learning_rate, d.momentum};
}

ds_status ds_train(const char* manifest, const ds_train_options* options,
                   const char* out_checkpoint, const char* report_csv_path, ds_epoch_fn on_epoch,
                   void* user, ds_train_summary* summary) {
  return guarded([&] {
    require(manifest, "manifest");
    require(options, "options");
    require(out_checkpoint, "out_checkpoint");
    TrainConfig config;
    config.batch_size = options->batch_size;
    config.epochs = options->epochs;
    config.split_fraction = options->split_fraction;
    config.seed = options->seed;
    config.learning_rate = options->learning_rate;
    config.momentum = options->momentum;
    switch (options->optimizer) {
      case DS_OPTIMIZER_ADAM: config.optimizer = OptimizerKind::adam; break;
      case DS_OPTIMIZER_SGD: config.optimizer = OptimizerKind::sgd; break;
      default: fail(ErrorCode::invalid_argument, "unknown optimizer");
    }
    validate_train_config(config);

    const Manifest m = read_manifest(manifest);
    if (m.samples.empty()) fail(ErrorCode::invalid_argument, "manifest is empty");
    const std::size_t trainable = filter_trainable(m).samples.size();
    if (trainable != m.samples.size()) {
      fail(ErrorCode::invalid_argument,
           std::to_string(m.samples.size() - trainable) +
               " samples are not full-body with 8 visible landmarks; run filter first");
    }
    const PreparedSet data = prepare_manifest(m, parent_of(manifest));
    const ModelConfig model = default_model();
    TrainResult result = train(config, model, data, [&](const EpochStats& s) {
      if (on_epoch != nullptr) on_epoch(s.epoch, s.train_mse, s.val_mse, user);
    });

    Checkpoint ck{model, std::move(result.params), nlohmann::json::object()};
    ck.metadata["seed"] = config.seed;
    ck.metadata["epochs"] = config.epochs;
    ck.metadata["batch_size"] = config.batch_size;
    ck.metadata["split_fraction"] = config.split_fraction;
    ck.metadata["optimizer"] = config.optimizer == OptimizerKind::adam ? "adam" : "sgd";
    ck.metadata["learning_rate"] = config.learning_rate;
    ck.metadata["deterministic"] = ds_is_deterministic() != 0;
    ck.metadata["train_size"] = result.report.train_size;
    ck.metadata["val_size"] = result.report.val_size;
    ck.metadata["initial_val_mse"] = result.report.initial_val_mse;
    ck.metadata["final_val_mse"] = result.report.epochs.back().val_mse;
    save_checkpoint(out_checkpoint, ck);
    if (report_csv_path != nullptr) write_report_csv(report_csv_path, result.report);
    if (summary != nullptr) {
      const auto& last = result.report.epochs.back();
      *summary = ds_train_summary{result.report.initial_val_mse, last.train_mse,
                                  last.val_mse,                 result.report.wall_seconds,
                                  result.report.parameter_count, result.report.train_size,
                                  result.report.val_size};
    }
  });
}

ds_status ds_model_load(const char* checkpoint, ds_model** out) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    *out = new ds_model{load_checkpoint(checkpoint)};
  });
}

size_t ds_model_parameter_count(const ds_model* model) {
  return model ? model->checkpoint.params.trainable_count() : 0;
}

void ds_model_free(ds_model* model) { delete model; }

ds_status ds_model_detect(const ds_model* model, const ds_image* image, ds_landmarks* image_space,
                          ds_landmarks* model_space) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    const Detection d =
        detect_landmarks(model->checkpoint.config, model->checkpoint.params, image->image);
    from_points(d.image_space, image_space);
    from_points(d.model_space, model_space);
  });
}

ds_status ds_model_evaluate(const ds_model* model, const char* manifest, ds_eval_result* out) {
  return guarded([&] {
    require(model, "model");
    require(manifest, "manifest");
    require(out, "out");
    const Manifest m = read_manifest(manifest);
    const Manifest usable = filter_trainable(m);
    if (usable.samples.empty()) {
      fail(ErrorCode::invalid_argument, "manifest has no full-body samples with 8 visible landmarks");
    }
    const PreparedSet data = prepare_manifest(usable, parent_of(manifest));
    const EvalResult r = evaluate(model->checkpoint.params, model->checkpoint.config, data);
    out->mse = r.mse;
    for (std::size_t k = 0; k < DS_LANDMARK_COUNT; ++k) out->landmark_error[k] = r.landmark_error[k];
    out->samples = data.size();
  });
}

}  // extern "C"
