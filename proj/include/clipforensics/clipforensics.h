// Copyright 2026 The clipforensics Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLIPFORENSICS_H
#define CLIPFORENSICS_H

/*
 * C interface to the detector library. Every handle is opaque and owned by
 * the caller; release it with the matching *_free / *_close function.
 * Functions return a cfx_status; on failure cfx_last_error() describes the
 * problem for the calling thread. Strings handed out through char** are
 * allocated by the library and released with cfx_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CFX_BUILDING_LIBRARY)
#define CFX_API __declspec(dllexport)
#else
#define CFX_API __declspec(dllimport)
#endif
#else
#define CFX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool. */
typedef enum cfx_status {
  CFX_OK = 0,
  CFX_ERR_INTERNAL = 1,
  CFX_ERR_CONFIG = 2,  /* invalid configuration or arguments */
  CFX_ERR_DATA = 3,    /* malformed or insufficient input data */
  CFX_ERR_BACKEND = 4  /* encoder, cache or codec failure */
} cfx_status;

typedef struct cfx_session cfx_session;
typedef struct cfx_model cfx_model;
typedef struct cfx_spectrum cfx_spectrum;
typedef struct cfx_report cfx_report;

CFX_API const char* cfx_version(void);
CFX_API const char* cfx_status_name(cfx_status status);
/* Message of the last failure on this thread; "" after a success. */
CFX_API const char* cfx_last_error(void);
CFX_API void cfx_string_free(char* text);

/* Command-line style overrides applied on top of a config file. NULL or
 * zero fields leave the file's value alone. */
typedef struct cfx_overrides {
  const char* cache;        /* embedding cache path */
  const char* backend;      /* model export JSON */
  const char* out_dir;
  uint64_t seed;
  int has_seed;
  int cache_only;           /* non-zero forces cache-only mode */
} cfx_overrides;

CFX_API cfx_status cfx_session_open(const char* config_path, const cfx_overrides* overrides,
                                    cfx_session** out);
CFX_API void cfx_session_close(cfx_session* session);
/* Effective config as canonical JSON. */
CFX_API cfx_status cfx_session_config_json(cfx_session* session, char** out);
/* Content-addressed output directory for a protocol, created on demand. */
CFX_API cfx_status cfx_session_run_dir(cfx_session* session, const char* protocol, char** out);

/* Embeds every record of the reference ("refset"), evaluation ("eval") or
 * both ("all") manifests into the cache and flushes it. */
CFX_API cfx_status cfx_session_embed(cfx_session* session, const char* which, size_t* embedded);
/* Reference set for run `run` of the configured sampling plan, as JSON. */
CFX_API cfx_status cfx_session_refset(cfx_session* session, int run, char** json);
CFX_API cfx_status cfx_session_train(cfx_session* session, int run, cfx_model** out);
/* Scores of the evaluation manifest as an "id,score" CSV. */
CFX_API cfx_status cfx_session_score(cfx_session* session, const cfx_model* model, char** csv);
/* Per-generator metrics of a model on the evaluation manifest (JSON). */
CFX_API cfx_status cfx_session_evaluate(cfx_session* session, const cfx_model* model, char** json);

CFX_API cfx_status cfx_session_sweep_size(cfx_session* session, char** json, char** csv);
/* Uses the config's robustness grid, a JPEG quality grid when absent. */
CFX_API cfx_status cfx_session_sweep_robust(cfx_session* session, char** json, char** csv);
CFX_API cfx_status cfx_session_fewshot(cfx_session* session, char** json);

CFX_API cfx_status cfx_model_load(const char* path, cfx_model** out);
CFX_API cfx_status cfx_model_save(const cfx_model* model, const char* path);
CFX_API cfx_status cfx_model_to_json(const cfx_model* model, char** json);
CFX_API int cfx_model_feature_dim(const cfx_model* model);
/* Probability-like score in [0,1]; above 0.5 means fake. */
CFX_API cfx_status cfx_model_score(const cfx_model* model, const float* features, size_t dim, double* score);
CFX_API void cfx_model_free(cfx_model* model);

/* Mean noise-residual power spectrum over images. `generator` filters the
 * manifest (NULL keeps all). decimate > 1 subsamples with an anti-alias
 * filter before the transform. */
CFX_API cfx_status cfx_spectrum_from_manifest(const char* manifest_path, const char* generator, int side,
                                              int decimate, cfx_spectrum** out);
CFX_API cfx_status cfx_spectrum_from_files(const char* const* paths, size_t count, int side, int decimate,
                                           cfx_spectrum** out);
CFX_API cfx_status cfx_spectrum_peaks(const cfx_spectrum* spectrum, double k, char** json);
/* Writes <stem>.pgm, <stem>.f32 and <stem>.json. */
CFX_API cfx_status cfx_spectrum_export(const cfx_spectrum* spectrum, const char* stem);
CFX_API int cfx_spectrum_side(const cfx_spectrum* spectrum);
CFX_API void cfx_spectrum_free(cfx_spectrum* spectrum);

/* Table of methods over the generators of one evaluation manifest. */
CFX_API cfx_status cfx_report_new(const char* eval_manifest, cfx_report** out);
/* Adds a method from an "id,score" CSV; unknown ids are counted in
 * *skipped (may be NULL) and otherwise ignored. */
CFX_API cfx_status cfx_report_add_scores(cfx_report* report, const char* method, const char* csv_path,
                                         size_t* skipped);
/* layout: "csv", "json" or "markdown"; metric: "auc", "ap" or "acc". */
CFX_API cfx_status cfx_report_render(const cfx_report* report, const char* layout, const char* metric,
                                     char** out);
CFX_API void cfx_report_free(cfx_report* report);

/* Writes a self-contained synthetic experiment into dir and returns the
 * path of its config. kind "embeddings" needs no encoder; kind "rasters"
 * needs a model export JSON. */
CFX_API cfx_status cfx_make_toy(const char* dir, const char* kind, uint64_t seed, const char* backend,
                                char** config_path);

#ifdef __cplusplus
}
#endif

#endif
