/*
 * dressswap C API.
 *
 * Every fallible call returns a ds_status. On failure a one-line description
 * is available from ds_last_error() on the same thread until the next call.
 * Objects are opaque handles released with their matching *_free function;
 * passing NULL to a *_free function is a no-op.
 */
#ifndef DRESSSWAP_H
#define DRESSSWAP_H

#include <stddef.h>
#include <stdint.h>

#if defined(DS_BUILDING_LIBRARY)
#define DS_API __attribute__((visibility("default")))
#else
#define DS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ds_status {
  DS_OK = 0,
  DS_ERR_INVALID_ARGUMENT = 1,
  DS_ERR_SHAPE_MISMATCH = 2,
  DS_ERR_IO = 3,
  DS_ERR_FORMAT = 4,
  DS_ERR_NUMERIC = 5,
  DS_ERR_STATE = 6,
  DS_ERR_INTERNAL = 99
} ds_status;

#define DS_LANDMARK_COUNT 8

DS_API const char* ds_version(void);
DS_API const char* ds_status_name(ds_status status);
DS_API const char* ds_last_error(void);

/* All kernels run single-threaded, so results are always bit-reproducible;
 * the flag is recorded in checkpoint metadata. */
DS_API void ds_set_deterministic(int enabled);
DS_API int ds_is_deterministic(void);

/* ---- images ------------------------------------------------------------ */

typedef struct ds_image ds_image;

/* PNG or JPEG. */
DS_API ds_status ds_image_load(const char* path, ds_image** out);
DS_API ds_status ds_image_save_png(const ds_image* image, const char* path);
/* Copies width*height*3 interleaved RGB bytes. */
DS_API ds_status ds_image_create(size_t width, size_t height, const uint8_t* rgb,
                                 ds_image** out);
DS_API size_t ds_image_width(const ds_image* image);
DS_API size_t ds_image_height(const ds_image* image);
DS_API const uint8_t* ds_image_data(const ds_image* image);
DS_API void ds_image_free(ds_image* image);

/* ---- landmarks ----------------------------------------------------------- */

typedef struct ds_point {
  double x;
  double y;
} ds_point;

/* Slot order: left collar, right collar, left sleeve, right sleeve,
 * left waistline, right waistline, left hem, right hem. */
typedef struct ds_landmarks {
  ds_point points[DS_LANDMARK_COUNT];
} ds_landmarks;

/* {"landmarks": [[x,y],...8], "order": "deepfashion-v1"}; extra keys ignored. */
DS_API ds_status ds_landmarks_read(const char* path, ds_landmarks* out);
/* model_space may be NULL; width/height of 0 are omitted. */
DS_API ds_status ds_landmarks_write(const char* path, const ds_landmarks* image_space,
                                    const ds_landmarks* model_space, size_t width,
                                    size_t height);

/* Draws each landmark as a 3x3 square in a fixed per-slot colour. */
DS_API ds_status ds_render_overlay(const ds_image* image, const ds_landmarks* landmarks,
                                   ds_image** out);

/* ---- garment swap ---------------------------------------------------------- */

typedef struct ds_rect {
  int64_t x0, y0, x1, y1; /* half-open */
} ds_rect;

typedef struct ds_swap_info {
  ds_rect source_bbox;
  ds_rect dest_bbox;
  size_t composited;
} ds_swap_info;

/* info may be NULL. */
DS_API ds_status ds_swap(const ds_image* source, const ds_landmarks* source_landmarks,
                         const ds_image* dest, const ds_landmarks* dest_landmarks,
                         ds_image** out, ds_swap_info* info);

/* ---- dataset ---------------------------------------------------------------- */

DS_API ds_status ds_synth(size_t count, uint64_t seed, size_t width, size_t height,
                          const char* out_dir);

typedef void (*ds_message_fn)(const char* message, void* user);

typedef struct ds_import_summary {
  size_t parsed;
  size_t skipped;
} ds_import_summary;

/* layout_path may be NULL for the default positional layout. Skipped lines are
 * reported through on_skip (may be NULL). Image paths in the written manifest
 * are relative to its directory. */
DS_API ds_status ds_import(const char* annotations, const char* image_dir,
                           const char* layout_path, const char* out_manifest,
                           ds_message_fn on_skip, void* user, ds_import_summary* summary);

DS_API ds_status ds_filter(const char* in_manifest, const char* out_manifest, size_t* kept,
                           size_t* total);

/* ---- training --------------------------------------------------------------- */

typedef enum ds_optimizer { DS_OPTIMIZER_ADAM = 0, DS_OPTIMIZER_SGD = 1 } ds_optimizer;

typedef struct ds_train_options {
  size_t batch_size;
  size_t epochs;
  double split_fraction;
  uint64_t seed;
  ds_optimizer optimizer;
  double learning_rate;
  double momentum; /* sgd only */
} ds_train_options;

DS_API void ds_train_options_default(ds_train_options* options);

typedef void (*ds_epoch_fn)(size_t epoch, double train_mse, double val_mse, void* user);

typedef struct ds_train_summary {
  double initial_val_mse;
  double final_train_mse;
  double final_val_mse;
  double wall_seconds;
  size_t parameter_count;
  size_t train_size;
  size_t val_size;
} ds_train_summary;

/* Trains the default regressor on a filtered manifest. report_csv and
 * on_epoch may be NULL. */
DS_API ds_status ds_train(const char* manifest, const ds_train_options* options,
                          const char* out_checkpoint, const char* report_csv,
                          ds_epoch_fn on_epoch, void* user, ds_train_summary* summary);

/* ---- inference ---------------------------------------------------------------- */

typedef struct ds_model ds_model;

DS_API ds_status ds_model_load(const char* checkpoint, ds_model** out);
DS_API size_t ds_model_parameter_count(const ds_model* model);
DS_API void ds_model_free(ds_model* model);

/* model_space is the raw 100x100 prediction clamped to [0,100); image_space
 * rescales it to the image. Either output may be NULL. */
DS_API ds_status ds_model_detect(const ds_model* model, const ds_image* image,
                                 ds_landmarks* image_space, ds_landmarks* model_space);

typedef struct ds_eval_result {
  double mse;
  double landmark_error[DS_LANDMARK_COUNT];
  size_t samples;
} ds_eval_result;

DS_API ds_status ds_model_evaluate(const ds_model* model, const char* manifest,
                                   ds_eval_result* out);

#ifdef __cplusplus
}
#endif

#endif /* DRESSSWAP_H */
