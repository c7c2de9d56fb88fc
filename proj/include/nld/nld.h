/*
 * Copyright 2026 The NLD Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the Neural Langevin Dynamics library.
 *
 * Objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns an nld_status; on
 * failure nld_last_error() describes the error on the calling thread until
 * the next call on that thread. Structured inputs and outputs are JSON
 * strings; strings returned through `char**` are released with
 * nld_string_free.
 */

#ifndef NLD_NLD_H
#define NLD_NLD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NLD_API __declspec(dllexport)
#else
#define NLD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nld_status {
  NLD_OK = 0,
  NLD_ERR_INVALID_ARGUMENT = 1,
  NLD_ERR_SHAPE_MISMATCH = 2,
  NLD_ERR_NON_SCALAR_ROOT = 3,
  NLD_ERR_LENGTH_MISMATCH = 4,
  NLD_ERR_NOT_CONVERGED = 5,
  NLD_ERR_CHOLESKY_FAILURE = 6,
  NLD_ERR_NON_FINITE = 7,
  NLD_ERR_SINGULAR_DIFFUSION = 8,
  NLD_ERR_TOO_MANY_SKIPS = 9,
  NLD_ERR_NON_PD_HESSIAN = 10,
  NLD_ERR_UNASSIGNED_SAMPLE = 11,
  NLD_ERR_DEGENERATE_POINTS = 12,
  NLD_ERR_CONFIG = 13,
  NLD_ERR_IO = 14,
  NLD_ERR_INTERNAL = 99
} nld_status;

typedef struct nld_dataset nld_dataset;
typedef struct nld_model nld_model;
typedef struct nld_report nld_report;

/* Message for the last failed call on this thread ("" if none). */
NLD_API const char* nld_last_error(void);
NLD_API const char* nld_status_name(nld_status status);
NLD_API const char* nld_version(void);
NLD_API void nld_string_free(char* s);

/* ---- datasets --------------------------------------------------------- */

/* Samples `n_sequences` sequences of `length` steps from Experiment 1 or 2.
 * `emission_seed` fixes the emission means, `seed` the walks and emission
 * noise, so datasets sharing an emission seed come from the same chain. */
NLD_API nld_status nld_dataset_generate(int experiment, size_t n_sequences, size_t length, uint64_t emission_seed,
                                        uint64_t seed, nld_dataset** out);
/* Reads a dataset directory (or its dataset.jsonl). */
NLD_API nld_status nld_dataset_load(const char* path, nld_dataset** out);
/* Writes header.json and dataset.jsonl into `dir`. */
NLD_API nld_status nld_dataset_save(const nld_dataset* dataset, const char* dir);
NLD_API size_t nld_dataset_size(const nld_dataset* dataset);
NLD_API int nld_dataset_has_states(const nld_dataset* dataset);
NLD_API void nld_dataset_free(nld_dataset* dataset);

/* ---- models ----------------------------------------------------------- */

/* Fresh model from a training-config JSON object (architecture, constants,
 * optimiser settings); NULL selects the defaults. Initial weights derive from
 * the config's seed. */
NLD_API nld_status nld_model_create(const char* config_json, nld_model** out);
NLD_API nld_status nld_model_load(const char* checkpoint_path, nld_model** out);
/* `extra_json` (may be NULL) is merged into the checkpoint's top level. */
NLD_API nld_status nld_model_save(const nld_model* model, const char* checkpoint_path, const char* extra_json);
NLD_API void nld_model_free(nld_model* model);
/* JSON with mode, dims, gamma, beta, mass and the full config. */
NLD_API nld_status nld_model_info(const nld_model* model, char** out_json);

/* Trains with the settings of the config the model was created from;
 * writes the per-epoch history CSV to `history_csv_path` when not NULL. */
NLD_API nld_status nld_model_train(nld_model* model, const nld_dataset* dataset, const char* history_csv_path);

/* Adds `delta` to the energy network's output bias. */
NLD_API nld_status nld_model_shift_energy(nld_model* model, double delta);

/* Overdamped/underdamped/baseline prior drift at a full state. */
NLD_API nld_status nld_model_prior_drift(const nld_model* model, const double* state, size_t state_dim, double t,
                                         double* out_drift);
NLD_API nld_status nld_model_energy(const nld_model* model, const double* z, size_t dim, double* out_energy);

/* ---- analysis --------------------------------------------------------- */

/* Minima, Hessians and the three weight estimators. `options_json` may be
 * NULL or an object with n_starts, merge_tol, flow_step, flow_tol,
 * flow_max_iters, n_samples, burn_in, thin, dt, seed. */
NLD_API nld_status nld_analyze(const nld_model* model, const char* options_json, nld_report** out);
NLD_API nld_status nld_report_json(const nld_report* report, char** out_json);
NLD_API size_t nld_report_num_minima(const nld_report* report);
/* which: 0 = sampling, 1 = zeroth order, 2 = second order. Copies up to
 * `capacity` entries and returns the number of minima. */
NLD_API size_t nld_report_weights(const nld_report* report, int which, double* out, size_t capacity);
NLD_API void nld_report_free(nld_report* report);

/* Segments every sequence against the report's minima. Writes
 * seq_<index>.csv (step,predicted_label,true_label) into `out_dir` and
 * returns a JSON summary with per-sequence accuracies and their mean and
 * standard deviation (null when the dataset has no ground truth). */
NLD_API nld_status nld_segment(const nld_model* model, const nld_report* report, const nld_dataset* dataset,
                               const char* out_dir, const char* options_json, char** out_summary_json);

/* Landscape grid CSV plus `<csv>.json` sidecar. `options_json` keys:
 * kind ("energy" | "drift"), plane ("native" | "minima"), bounds
 * [u_min, u_max, v_min, v_max] (optional), resolution [nu, nv]. The
 * "minima" plane needs a report with at least three minima. */
NLD_API nld_status nld_export_landscape(const nld_model* model, const nld_report* report, const char* options_json,
                                        const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif /* NLD_NLD_H */
