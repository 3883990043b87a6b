/* C interface to the fieldfuse library. All functions return FF_OK on
 * success; on failure ff_last_error() describes the problem on the calling
 * thread until the next failing call. */
#ifndef FIELDFUSE_FIELDFUSE_H
#define FIELDFUSE_FIELDFUSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef FIELDFUSE_BUILDING_LIBRARY
#    define FF_API __declspec(dllexport)
#  else
#    define FF_API __declspec(dllimport)
#  endif
#else
#  define FF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ff_status {
  FF_OK = 0,
  FF_ERR_INVALID_ARGUMENT = 1,
  FF_ERR_PARSE = 2,
  FF_ERR_IO = 3,
  FF_ERR_NOT_ENOUGH_POSES = 4,
  FF_ERR_DEGENERATE_GEOMETRY = 5,
  FF_ERR_CONTRACT_VIOLATION = 6,
  FF_ERR_BACKEND_FAILURE = 7,
  FF_ERR_INTERNAL = 100
} ff_status;

typedef struct ff_scene ff_scene;
typedef struct ff_image ff_image;

FF_API const char* ff_version(void);
FF_API const char* ff_status_string(ff_status status);
FF_API const char* ff_last_error(void);

/* Scenes */
FF_API ff_status ff_scene_load(const char* path, ff_scene** out);
FF_API ff_status ff_scene_parse(const char* text, const char* base_dir, ff_scene** out);
FF_API void ff_scene_free(ff_scene* scene);

/* Serialized text; release with ff_string_free. */
FF_API ff_status ff_scene_serialize(const ff_scene* scene, char** out);
FF_API void ff_string_free(char* s);

FF_API ff_status ff_scene_set_seed(ff_scene* scene, uint64_t seed);
/* A strategy name or "all". */
FF_API ff_status ff_scene_set_strategy(ff_scene* scene, const char* strategy);
FF_API ff_status ff_scene_set_gamma(ff_scene* scene, double gamma);
FF_API ff_status ff_scene_set_tau(ff_scene* scene, double tau);
FF_API ff_status ff_scene_set_budget(ff_scene* scene, int budget);
FF_API ff_status ff_scene_set_output(ff_scene* scene, const char* dir);

/* Runs render, register, blend, evaluate, sweep-gamma or sweep-rho. threads
 * <= 0 uses every core. artifact_count may be NULL. */
FF_API ff_status ff_run(const ff_scene* scene, const char* command, int threads, int* artifact_count);

/* Images: row-major, interleaved channels, values in [0, 1]. */
FF_API ff_status ff_image_create(int width, int height, int channels, const double* data, ff_image** out);
FF_API void ff_image_free(ff_image* image);
FF_API int ff_image_width(const ff_image* image);
FF_API int ff_image_height(const ff_image* image);
FF_API int ff_image_channels(const ff_image* image);
FF_API const double* ff_image_data(const ff_image* image);

/* Renders a registered field (in the reference frame) or any named field. */
FF_API ff_status ff_render_field(const ff_scene* scene, const char* field, const char* camera,
                                 ff_image** out);
/* Blends the registered fields with the scene's blend settings. */
FF_API ff_status ff_blend(const ff_scene* scene, const char* camera, ff_image** out);

FF_API ff_status ff_psnr(const ff_image* a, const ff_image* b, double* out);
FF_API ff_status ff_ssim(const ff_image* a, const ff_image* b, double* out);

/* 4x4 row-major similarity transforms. out receives rotation error in
 * degrees, translation error and |log scale ratio|. */
FF_API ff_status ff_registration_error(const double estimate[16], const double truth[16], double out[3]);

#ifdef __cplusplus
}
#endif

#endif
