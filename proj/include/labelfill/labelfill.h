// Copyright 2026 The labelfill Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef LABELFILL_LABELFILL_H_
#define LABELFILL_LABELFILL_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define LF_API __declspec(dllexport)
#else
#define LF_API __attribute__((visibility("default")))
#endif

/* Status codes double as process exit codes. */
typedef enum lf_status {
  LF_OK = 0,
  LF_ERR_INTERNAL = 1,
  LF_ERR_USAGE = 2,
  LF_ERR_DATA = 3,
  LF_ERR_NUMERIC = 4,
  LF_ERR_IO = 5
} lf_status;

/* Variant modifiers for lf_train and lf_eval. */
enum {
  LF_VARIANT_NO_TV_DISTILL = 1, /* no trust mask on the teacher or the distillation loss */
  LF_VARIANT_NO_CE = 2          /* drop the cross-entropy term */
};

typedef struct lf_context lf_context;
typedef struct lf_tensor lf_tensor;

typedef void (*lf_log_fn)(const char* line, void* user);

LF_API const char* lf_version(void);

/* Message and category of the last failure on the calling thread. */
LF_API const char* lf_last_error(void);
LF_API const char* lf_last_error_kind(void);

/* Releases strings returned through char** out-parameters. */
LF_API void lf_free_string(char* s);

LF_API lf_status lf_context_new(lf_context** out);
LF_API lf_status lf_context_from_json(const char* json, lf_context** out);
LF_API lf_status lf_context_from_file(const char* path, lf_context** out);
LF_API void lf_context_free(lf_context* ctx);

LF_API lf_status lf_context_set_seed(lf_context* ctx, uint64_t seed);
LF_API lf_status lf_context_set_output(lf_context* ctx, const char* dir);
LF_API lf_status lf_context_set_threads(lf_context* ctx, int threads);
/* Applies an RFC 7386 merge patch to the configuration. */
LF_API lf_status lf_context_patch(lf_context* ctx, const char* json_patch);
LF_API lf_status lf_context_config(const lf_context* ctx, char** json_out);
LF_API void lf_context_set_logger(lf_context* ctx, lf_log_fn fn, void* user);

/* Commands write artifacts under the configured output directory and
   return a JSON summary through `summary` (may be NULL). */
LF_API lf_status lf_ingest(lf_context* ctx, char** summary);
LF_API lf_status lf_simulate(lf_context* ctx, char** summary);
LF_API lf_status lf_fuse(lf_context* ctx, const char* method, char** summary);
LF_API lf_status lf_train(lf_context* ctx, const char* variant, int flags, char** summary);
/* A NULL or empty checkpoint evaluates the runs written by lf_train. */
LF_API lf_status lf_eval(lf_context* ctx, const char* variant, int flags, const char* checkpoint,
                         char** summary);
LF_API lf_status lf_sweep(lf_context* ctx, char** summary);
LF_API lf_status lf_bound(lf_context* ctx, char** summary);
LF_API lf_status lf_report(lf_context* ctx, char** summary);

/* Two-class posterior bounds for R raters of whom C dissent. */
LF_API lf_status lf_pgt_lower_bound(size_t raters, size_t dissent, double p_min, double p_max, double* out);
LF_API lf_status lf_pgt_exact(size_t raters, size_t dissent, double p_min, double p_max, double* out);

/* Read access to .lft tensor files; byte tensors are widened to double. */
LF_API lf_status lf_tensor_load(const char* path, lf_tensor** out);
LF_API void lf_tensor_free(lf_tensor* t);
LF_API size_t lf_tensor_ndim(const lf_tensor* t);
LF_API size_t lf_tensor_dim(const lf_tensor* t, size_t axis);
LF_API size_t lf_tensor_size(const lf_tensor* t);
LF_API lf_status lf_tensor_copy(const lf_tensor* t, double* out, size_t capacity);

#ifdef __cplusplus
}
#endif

#endif /* LABELFILL_LABELFILL_H_ */
