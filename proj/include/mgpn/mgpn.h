/*
 * Copyright 2026 The MGPN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MGPN_MGPN_H_
#define MGPN_MGPN_H_

/*
 * C interface to the moment retrieval library.
 *
 * Every fallible call returns an mgpn_status. On failure a description is
 * available from mgpn_last_error() (per thread, valid until the next call
 * on that thread). Strings returned through char** are heap-allocated and
 * released with mgpn_string_free(). Handles are released with their
 * matching *_free function; passing NULL to any *_free is a no-op.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MGPN_API __declspec(dllexport)
#else
#define MGPN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mgpn_status {
  MGPN_OK = 0,
  MGPN_ERR_USAGE = 1,  /* bad argument or configuration */
  MGPN_ERR_DATA = 2,   /* unreadable, malformed or inconsistent input */
  MGPN_ERR_VERIFY = 3  /* a numerical check failed */
} mgpn_status;

typedef struct mgpn_config mgpn_config;
typedef struct mgpn_dataset mgpn_dataset;
typedef struct mgpn_model mgpn_model;

MGPN_API const char* mgpn_last_error(void);
MGPN_API void mgpn_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

MGPN_API mgpn_status mgpn_config_new(mgpn_config** out);
/* require_all != 0: every documented key must be present in the file. */
MGPN_API mgpn_status mgpn_config_load(const char* path, int require_all, mgpn_config** out);
MGPN_API mgpn_status mgpn_config_set(mgpn_config* cfg, const char* key, const char* value);
MGPN_API mgpn_status mgpn_config_get(const mgpn_config* cfg, const char* key, char** out);
/* "key = value" lines for every key. */
MGPN_API mgpn_status mgpn_config_to_string(const mgpn_config* cfg, char** out);
MGPN_API void mgpn_config_free(mgpn_config* cfg);

/* ---- synthetic data --------------------------------------------------- */

typedef struct mgpn_synth_spec {
  int num_samples;
  int num_train; /* first num_train records go to train.txt, the rest to test.txt */
  int clips;     /* T_V */
  int feature_dim;
  int vocab_size;
  int query_len_min;
  int query_len_max;
  double span_frac_min;
  double span_frac_max;
  double noise_std;
  uint64_t seed;
  int word_dim;
} mgpn_synth_spec;

MGPN_API void mgpn_synth_spec_default(mgpn_synth_spec* spec);
MGPN_API mgpn_status mgpn_synth_data(const mgpn_synth_spec* spec, const char* out_dir);

/* ---- datasets --------------------------------------------------------- */

/* Reads <dir>/<split>.txt, vocab.txt, glove.txt and features/. Word
 * dimension and query truncation come from cfg (model.word_dim,
 * model.L_max). */
MGPN_API mgpn_status mgpn_dataset_open(const char* dir, const char* split,
                                       const mgpn_config* cfg, mgpn_dataset** out);
MGPN_API int mgpn_dataset_size(const mgpn_dataset* ds);
MGPN_API int mgpn_dataset_feature_dim(const mgpn_dataset* ds);
MGPN_API void mgpn_dataset_free(mgpn_dataset* ds);

/* ---- training --------------------------------------------------------- */

typedef void (*mgpn_log_fn)(const char* line, void* user);

/* Initializes a model from cfg (seed train.seed), writes init.mgpc, trains
 * for train.epochs epochs, then writes final.mgpc and train.log into
 * train.checkpoint_dir. Each "epoch N loss X" line is also passed to log. */
MGPN_API mgpn_status mgpn_train(const mgpn_config* cfg, const mgpn_dataset* train,
                                mgpn_log_fn log, void* user);

/* ---- models ----------------------------------------------------------- */

/* Freshly initialized model. feature_dim overrides model.feature_dim when
 * positive. */
MGPN_API mgpn_status mgpn_model_create(const mgpn_config* cfg, int feature_dim, uint64_t seed,
                                       mgpn_model** out);
MGPN_API mgpn_status mgpn_model_load(const char* path, mgpn_model** out);
MGPN_API mgpn_status mgpn_model_save(const mgpn_model* model, const char* path);
MGPN_API void mgpn_model_free(mgpn_model* model);
MGPN_API uint64_t mgpn_model_param_count(const mgpn_model* model);
/* Per-module element counts followed by the total. */
MGPN_API mgpn_status mgpn_model_param_report(const mgpn_model* model, char** out);
/* The configuration stored with the model. */
MGPN_API mgpn_status mgpn_model_config(const mgpn_model* model, mgpn_config** out);

/* ---- evaluation and inference ----------------------------------------- */

/* eval_cfg supplies eval.* settings; NULL uses the model's. table receives
 * the metric table, dump (may be NULL) the prediction dump. */
MGPN_API mgpn_status mgpn_evaluate(const mgpn_model* model, const mgpn_dataset* ds,
                                   const mgpn_config* eval_cfg, char** table, char** dump);

/* Top-k spans ("rank score start end" lines) for one query against the
 * features of video_id inside dataset directory dir. */
MGPN_API mgpn_status mgpn_predict(const mgpn_model* model, const char* dir,
                                  const char* video_id, const char* query, double duration,
                                  int k, double nms_threshold, char** out);
/* Same for record `index` of an opened dataset; the first output line
 * echoes the record. */
MGPN_API mgpn_status mgpn_predict_sample(const mgpn_model* model, const mgpn_dataset* ds,
                                         int index, int k, double nms_threshold, char** out);

/* T rows of '.'/'#' (valid = '#') then "N_A = n". scheme: "sparse"/"dense". */
MGPN_API mgpn_status mgpn_render_grid(int T, const char* scheme, char** out);

/* Finite-difference check of the full network on a random tiny batch
 * (cfg supplies model.T, model.C, model.groups, model.L_max as the query
 * length and the remaining architecture). Returns MGPN_ERR_VERIFY when the
 * max relative error exceeds tolerance. */
MGPN_API mgpn_status mgpn_grad_check(const mgpn_config* cfg, double epsilon, uint64_t seed,
                                     double tolerance, double* max_error, char** report);

#ifdef __cplusplus
}
#endif

#endif /* MGPN_MGPN_H_ */
