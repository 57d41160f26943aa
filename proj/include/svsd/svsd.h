/* Copyright 2026  The svsd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
 * WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
 * MERCHANTABLITY OR NON-INFRINGEMENT.
 * See the Apache 2 License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SVSD_SVSD_H_
#define SVSD_SVSD_H_

/* C interface of the svsd library: singing voice separation and detection
 * with a shared U-Net. All functions return a status code; on failure
 * svsd_last_error() describes the problem (per thread). Strings returned
 * through char** must be released with svsd_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SVSD_API __declspec(dllexport)
#elif defined(SVSD_BUILDING_LIBRARY)
#define SVSD_API __attribute__((visibility("default")))
#else
#define SVSD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum svsd_status {
  SVSD_OK = 0,
  SVSD_ERR_INVALID_ARGUMENT = 1,
  SVSD_ERR_IO = 2,
  SVSD_ERR_FORMAT = 3,
  SVSD_ERR_SHAPE = 4,
  SVSD_ERR_NUMERIC = 5,
  SVSD_ERR_STATE = 6,
  SVSD_ERR_INTERNAL = 99
} svsd_status;

typedef struct svsd_model svsd_model;

SVSD_API const char *svsd_version(void);
SVSD_API const char *svsd_status_name(svsd_status status);
/* Message of the last failed call on this thread; "" if none. */
SVSD_API const char *svsd_last_error(void);
SVSD_API void svsd_string_free(char *s);

/* ---- models ------------------------------------------------------------- */

SVSD_API svsd_status svsd_model_load(const char *checkpoint_path, svsd_model **out);
SVSD_API void svsd_model_free(svsd_model *model);
/* Network configuration and training iteration as JSON. */
SVSD_API svsd_status svsd_model_info(const svsd_model *model, char **out_json);

/* Separates a mono clip. vocals_out and accompaniment_out must each hold
 * `count` samples; results are at the input sample rate. */
SVSD_API svsd_status svsd_separate(const svsd_model *model, const double *samples,
                                   size_t count, int sample_rate,
                                   int griffin_lim_iterations, double *vocals_out,
                                   double *accompaniment_out);

/* Vocal probability per spectrogram frame (hop 256 at 22050 Hz). Call with
 * probs_out == NULL to query the frame count. */
SVSD_API svsd_status svsd_detect(const svsd_model *model, const double *samples,
                                 size_t count, int sample_rate, double *probs_out,
                                 size_t capacity, size_t *frames_out);

/* Writes <out_dir>/vocals.wav and <out_dir>/accompaniment.wav. */
SVSD_API svsd_status svsd_separate_file(const svsd_model *model, const char *input_wav,
                                        const char *out_dir, int griffin_lim_iterations);
/* Writes a CSV with header frame,seconds,probability. */
SVSD_API svsd_status svsd_detect_file(const svsd_model *model, const char *input_wav,
                                      const char *activity_csv);

/* ---- workflows ------------------------------------------------------------ */

/* Trains from a JSON run configuration. `summary_json` (optional) receives
 * the best metrics and iteration counts. Progress rows go to stderr when
 * verbose is non-zero. */
SVSD_API svsd_status svsd_train(const char *config_json, int verbose, char **summary_json);

/* Evaluates on the test partition of a corpus directory. With a baseline
 * model, significance tests are added. With out_dir set, report.json and
 * excerpts.csv are written there. */
SVSD_API svsd_status svsd_evaluate(const svsd_model *model, const char *corpus_dir,
                                   const svsd_model *baseline, int separation_metrics,
                                   const char *out_dir, char **report_json);

/* Injects noise into the vocal estimate where only silent-vocal excerpts
 * are scored. corpus_dir may be NULL (a built-in synthetic track is used);
 * model may be NULL (estimates are references with cross leakage). */
SVSD_API svsd_status svsd_flaw_demo(const char *corpus_dir, const svsd_model *model,
                                    uint64_t seed, char **report_json);

/* Profiles each corpus directory; writes bias.csv and bias_summary.json to
 * out_dir when given. */
SVSD_API svsd_status svsd_profile_bias(const char *const *corpus_dirs,
                                       const char *const *names, size_t count,
                                       const char *out_dir, char **summary_json);

/* Generates a synthetic corpus from a JSON spec (missing keys use
 * defaults). */
SVSD_API svsd_status svsd_synth(const char *spec_json, uint64_t seed, const char *out_dir);

#ifdef __cplusplus
}
#endif

#endif  // SVSD_SVSD_H_
