// Command-line front end. Talks to the library only through dressswap.h.
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <dressswap/dressswap.h>

namespace {

using nlohmann::ordered_json;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Failure {
  ds_status status;
  std::string message;
};

void check(ds_status status) {
  if (status != DS_OK) throw Failure{status, ds_last_error()};
}

void log_config(const ordered_json& config) {
  std::fprintf(stderr, "%s\n", ordered_json{{"config", config}}.dump().c_str());
}

void print_result(const ordered_json& result) { std::printf("%s\n", result.dump(2).c_str()); }

ordered_json landmarks_json(const ds_landmarks& lm) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : lm.points) arr.push_back({p.x, p.y});
  return arr;
}

ordered_json rect_json(const ds_rect& r) { return {r.x0, r.y0, r.x1, r.y1}; }

// Frees a handle when the command returns or throws.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  ~Handle() { Free(ptr); }
};
using Image = Handle<ds_image, ds_image_free>;
using Model = Handle<ds_model, ds_model_free>;

struct Globals {
  std::uint64_t seed = 0;
  bool deterministic = false;
};

ordered_json base_config(const char* command, const Globals& g) {
  return {{"command", command}, {"seed", g.seed}, {"deterministic", g.deterministic}};
}

// ---- subcommands ---------------------------------------------------------

struct SynthArgs {
  std::size_t count = 0;
  std::string out;
  std::size_t width = 128;
  std::size_t height = 192;
};

void run_synth(const SynthArgs& a, const Globals& g) {
  auto cfg = base_config("synth", g);
  cfg["count"] = a.count;
  cfg["out"] = a.out;
  cfg["width"] = a.width;
  cfg["height"] = a.height;
  log_config(cfg);
  check(ds_synth(a.count, g.seed, a.width, a.height, a.out.c_str()));
  print_result({{"images", a.count}, {"manifest", a.out + "/manifest.jsonl"}});
}

struct ImportArgs {
  std::string annotations, images, layout, out;
};

void run_import(const ImportArgs& a, const Globals& g) {
  auto cfg = base_config("import", g);
  cfg["annotations"] = a.annotations;
  cfg["images"] = a.images;
  cfg["layout"] = a.layout.empty() ? ordered_json() : ordered_json(a.layout);
  cfg["out"] = a.out;
  log_config(cfg);
  auto on_skip = [](const char* message, void*) {
    std::fprintf(stderr, "%s\n", ordered_json{{"skipped", message}}.dump().c_str());
  };
  ds_import_summary summary{};
  check(ds_import(a.annotations.c_str(), a.images.c_str(),
                  a.layout.empty() ? nullptr : a.layout.c_str(), a.out.c_str(), on_skip, nullptr,
                  &summary));
  print_result({{"parsed", summary.parsed}, {"skipped", summary.skipped}, {"manifest", a.out}});
}

struct FilterArgs {
  std::string in, out;
};

void run_filter(const FilterArgs& a, const Globals& g) {
  auto cfg = base_config("filter", g);
  cfg["in"] = a.in;
  cfg["out"] = a.out;
  log_config(cfg);
  std::size_t kept = 0, total = 0;
  check(ds_filter(a.in.c_str(), a.out.c_str(), &kept, &total));
  print_result({{"kept", kept}, {"total", total}, {"manifest", a.out}});
}

struct TrainArgs {
  std::string manifest, out, report;
  std::size_t epochs = 50;
  std::size_t batch = 20;
  double split = 0.85;
  std::string optimizer = "adam";
  double lr = 1e-3;
  double momentum = 0.9;
};

void run_train(const TrainArgs& a, const Globals& g) {
  ds_train_options opt;
  ds_train_options_default(&opt);
  opt.epochs = a.epochs;
  opt.batch_size = a.batch;
  opt.split_fraction = a.split;
  opt.seed = g.seed;
  opt.optimizer = a.optimizer == "sgd" ? DS_OPTIMIZER_SGD : DS_OPTIMIZER_ADAM;
  opt.learning_rate = a.lr;
  opt.momentum = a.momentum;

  auto cfg = base_config("train", g);
  cfg["manifest"] = a.manifest;
  cfg["epochs"] = a.epochs;
  cfg["batch"] = a.batch;
  cfg["split"] = a.split;
  cfg["optimizer"] = a.optimizer;
  cfg["lr"] = a.lr;
  if (a.optimizer == "sgd") cfg["momentum"] = a.momentum;
  cfg["out"] = a.out;
  cfg["report"] = a.report.empty() ? ordered_json() : ordered_json(a.report);
  log_config(cfg);

  auto on_epoch = [](std::size_t epoch, double train_mse, double val_mse, void*) {
    std::fprintf(stderr, "%s\n",
                 ordered_json{{"epoch", epoch}, {"train_mse", train_mse}, {"val_mse", val_mse}}
                     .dump()
                     .c_str());
  };
  ds_train_summary s{};
  check(ds_train(a.manifest.c_str(), &opt, a.out.c_str(),
                 a.report.empty() ? nullptr : a.report.c_str(), on_epoch, nullptr, &s));
  print_result({{"checkpoint", a.out},
                {"parameters", s.parameter_count},
                {"train_size", s.train_size},
                {"val_size", s.val_size},
                {"initial_val_mse", s.initial_val_mse},
                {"final_train_mse", s.final_train_mse},
                {"final_val_mse", s.final_val_mse},
                {"wall_seconds", s.wall_seconds}});
}

struct EvalArgs {
  std::string manifest, model;
};

void run_eval(const EvalArgs& a, const Globals& g) {
  auto cfg = base_config("eval", g);
  cfg["manifest"] = a.manifest;
  cfg["model"] = a.model;
  log_config(cfg);
  Model model;
  check(ds_model_load(a.model.c_str(), &model.ptr));
  ds_eval_result r{};
  check(ds_model_evaluate(model.ptr, a.manifest.c_str(), &r));
  ordered_json per = ordered_json::array();
  for (double e : r.landmark_error) per.push_back(e);
  print_result({{"samples", r.samples}, {"mse", r.mse}, {"landmark_error", per}});
}

struct DetectArgs {
  std::string model, image, out, overlay;
};

void run_detect(const DetectArgs& a, const Globals& g) {
  auto cfg = base_config("detect", g);
  cfg["model"] = a.model;
  cfg["image"] = a.image;
  cfg["out"] = a.out;
  cfg["overlay"] = a.overlay.empty() ? ordered_json() : ordered_json(a.overlay);
  log_config(cfg);
  Model model;
  check(ds_model_load(a.model.c_str(), &model.ptr));
  Image image;
  check(ds_image_load(a.image.c_str(), &image.ptr));
  ds_landmarks image_space{}, model_space{};
  check(ds_model_detect(model.ptr, image.ptr, &image_space, &model_space));
  check(ds_landmarks_write(a.out.c_str(), &image_space, &model_space,
                           ds_image_width(image.ptr), ds_image_height(image.ptr)));
  if (!a.overlay.empty()) {
    Image overlay;
    check(ds_render_overlay(image.ptr, &image_space, &overlay.ptr));
    check(ds_image_save_png(overlay.ptr, a.overlay.c_str()));
  }
  print_result({{"landmarks", landmarks_json(image_space)},
                {"model_landmarks", landmarks_json(model_space)},
                {"out", a.out}});
}

struct SwapArgs {
  std::string source_image, source_landmarks, dest_image, dest_landmarks, out;
};

void run_swap(const SwapArgs& a, const Globals& g) {
  auto cfg = base_config("swap", g);
  cfg["source_image"] = a.source_image;
  cfg["source_landmarks"] = a.source_landmarks;
  cfg["dest_image"] = a.dest_image;
  cfg["dest_landmarks"] = a.dest_landmarks;
  cfg["out"] = a.out;
  log_config(cfg);
  Image src, dst, out;
  ds_landmarks src_lm{}, dst_lm{};
  check(ds_image_load(a.source_image.c_str(), &src.ptr));
  check(ds_image_load(a.dest_image.c_str(), &dst.ptr));
  check(ds_landmarks_read(a.source_landmarks.c_str(), &src_lm));
  check(ds_landmarks_read(a.dest_landmarks.c_str(), &dst_lm));
  ds_swap_info info{};
  check(ds_swap(src.ptr, &src_lm, dst.ptr, &dst_lm, &out.ptr, &info));
  check(ds_image_save_png(out.ptr, a.out.c_str()));
  print_result({{"out", a.out},
                {"source_bbox", rect_json(info.source_bbox)},
                {"dest_bbox", rect_json(info.dest_bbox)},
                {"composited", info.composited}});
}

void print_error(const char* kind, const std::string& status, const std::string& message) {
  std::fprintf(stderr, "%s\n",
               ordered_json{{"error", {{"kind", kind}, {"status", status}, {"message", message}}}}
                   .dump()
                   .c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clothing landmark detection and garment swap"};
  app.set_version_flag("--version", std::string(ds_version()));
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Globals globals;
  app.add_option("--seed", globals.seed, "Seed for data generation, splitting and init")
      ->capture_default_str();
  app.add_flag("--deterministic", globals.deterministic,
               "Require bit-reproducible results (recorded in checkpoints)");

  std::function<void()> action;

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic garment corpus");
  synth_cmd->add_option("--count", synth.count, "Number of images")->required()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--width", synth.width, "Image width")->capture_default_str();
  synth_cmd->add_option("--height", synth.height, "Image height")->capture_default_str();
  synth_cmd->callback([&] { action = [&] { run_synth(synth, globals); }; });

  ImportArgs import;
  auto* import_cmd = app.add_subcommand("import", "Convert a positional annotation list");
  import_cmd->add_option("--annotations", import.annotations, "Annotation list file")
      ->required()->check(CLI::ExistingFile);
  import_cmd->add_option("--images", import.images, "Image root directory")->required()
      ->check(CLI::ExistingDirectory);
  import_cmd->add_option("--layout", import.layout, "Layout JSON")->check(CLI::ExistingFile);
  import_cmd->add_option("--out", import.out, "Output manifest")->required();
  import_cmd->callback([&] { action = [&] { run_import(import, globals); }; });

  FilterArgs filter;
  auto* filter_cmd = app.add_subcommand("filter", "Keep full-body samples with all landmarks visible");
  filter_cmd->add_option("--in", filter.in, "Input manifest")->required()->check(CLI::ExistingFile);
  filter_cmd->add_option("--out", filter.out, "Output manifest")->required();
  filter_cmd->callback([&] { action = [&] { run_filter(filter, globals); }; });

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the landmark regressor");
  train_cmd->add_option("--manifest", train.manifest, "Filtered manifest")->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", train.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", train.batch)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--split", train.split, "Training fraction")->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--optimizer", train.optimizer)->capture_default_str()
      ->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--lr", train.lr)->capture_default_str();
  train_cmd->add_option("--momentum", train.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--report", train.report, "CSV report path");
  train_cmd->callback([&] { action = [&] { run_train(train, globals); }; });

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a manifest");
  eval_cmd->add_option("--manifest", eval.manifest)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--model", eval.model)->required()->check(CLI::ExistingFile);
  eval_cmd->callback([&] { action = [&] { run_eval(eval, globals); }; });

  DetectArgs detect;
  auto* detect_cmd = app.add_subcommand("detect", "Predict the 8 landmarks of one image");
  detect_cmd->add_option("--model", detect.model)->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("--image", detect.image)->required()->check(CLI::ExistingFile);
  detect_cmd->add_option("--out", detect.out, "Landmark JSON")->required();
  detect_cmd->add_option("--overlay", detect.overlay, "PNG with the landmarks drawn");
  detect_cmd->callback([&] { action = [&] { run_detect(detect, globals); }; });

  SwapArgs swap;
  auto* swap_cmd = app.add_subcommand("swap", "Paste the source garment onto the destination");
  swap_cmd->add_option("--source-image", swap.source_image)->required()->check(CLI::ExistingFile);
  swap_cmd->add_option("--source-landmarks", swap.source_landmarks)->required()
      ->check(CLI::ExistingFile);
  swap_cmd->add_option("--dest-image", swap.dest_image)->required()->check(CLI::ExistingFile);
  swap_cmd->add_option("--dest-landmarks", swap.dest_landmarks)->required()
      ->check(CLI::ExistingFile);
  swap_cmd->add_option("--out", swap.out, "Output PNG")->required();
  swap_cmd->callback([&] { action = [&] { run_swap(swap, globals); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    print_error("usage", "invalid_argument", e.what());
    return kExitUsage;
  }

  ds_set_deterministic(globals.deterministic ? 1 : 0);
  try {
    action();
  } catch (const Failure& f) {
    print_error("runtime", ds_status_name(f.status), f.message);
    return kExitRuntime;
  }
  return 0;
}
