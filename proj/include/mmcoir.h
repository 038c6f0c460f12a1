// Copyright 2026 The mmcoir Authors
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


#ifndef MMCOIR_H_
#define MMCOIR_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define MMCOIR_API __attribute__((visibility("default")))
#else
#define MMCOIR_API
#endif

typedef enum mmcoir_status {
  MMCOIR_OK = 0,
  MMCOIR_INVALID_ARGUMENT = 1,
  MMCOIR_IO_ERROR = 2,
  MMCOIR_MALFORMED_ROW = 3,
  MMCOIR_EMPTY_ITEM = 4,
  MMCOIR_IMAGE_READ_ERROR = 5,
  MMCOIR_PROTOCOL_ERROR = 6,
  MMCOIR_TRANSPORT_ERROR = 7,
  MMCOIR_DIM_MISMATCH = 8,
  MMCOIR_CACHE_CORRUPT = 9,
  MMCOIR_DEGENERATE_BATCH = 10,
  MMCOIR_NON_FINITE_LOSS = 11,
  MMCOIR_DUPLICATE_ID = 12,
  MMCOIR_EMPTY_POOL = 13,
  MMCOIR_CORRUPT_INDEX = 14,
  MMCOIR_EMPTY_CORPUS = 15,
  MMCOIR_GUARD_EXHAUSTED = 16,
  MMCOIR_TEMPLATE_UNKNOWN = 17,
  MMCOIR_EMPTY_GENERATION = 18,
  MMCOIR_CONFIG_ERROR = 19,
  MMCOIR_NOT_FOUND = 20,
  MMCOIR_INTERNAL = 21
} mmcoir_status;

typedef enum mmcoir_row_kind { MMCOIR_ROWS_TRAIN = 0, MMCOIR_ROWS_EVAL = 1 } mmcoir_row_kind;

typedef struct mmcoir_engine mmcoir_engine;
typedef struct mmcoir_index mmcoir_index;
typedef struct mmcoir_service mmcoir_service;

MMCOIR_API const char* mmcoir_version(void);
/* CamelCase name of a status, e.g. "CorruptIndex". */
MMCOIR_API const char* mmcoir_status_name(mmcoir_status status);
/* Last failure on the calling thread as "error=<Name> message=<text>"; empty
 * after a successful call. Valid until the next call on this thread. */
MMCOIR_API const char* mmcoir_last_error(void);
/* Frees strings returned through char** out-parameters. */
MMCOIR_API void mmcoir_string_free(char* s);

/* Engine: configuration plus backend settings. config_path may be NULL for
 * defaults; use_env != 0 applies MMCOIR_DATA_ROOT, MMCOIR_BACKEND_URL and
 * MMCOIR_SEED on top of the file. */
MMCOIR_API mmcoir_status mmcoir_engine_create(const char* config_path, int use_env, mmcoir_engine** out);
MMCOIR_API void mmcoir_engine_destroy(mmcoir_engine* engine);
/* Overrides one field by dotted path ("backend.dim", "seed"). The value is
 * read as JSON when it parses, else as a string. Unknown fields and type
 * errors fail here; range and consistency checks run when an operation uses
 * the engine, so related fields may be set in any order. */
MMCOIR_API mmcoir_status mmcoir_engine_set(mmcoir_engine* engine, const char* key, const char* value);
MMCOIR_API mmcoir_status mmcoir_engine_config_json(const mmcoir_engine* engine, char** out);
/* Creates <run_root>/<UTC timestamp>-<fingerprint> holding config.json. */
MMCOIR_API mmcoir_status mmcoir_engine_make_run_dir(const mmcoir_engine* engine, char** out_path);

MMCOIR_API mmcoir_status mmcoir_ingest(const mmcoir_engine* engine, mmcoir_row_kind kind, const char* input,
                                       const char* dataset_tag, const char* task_tag, int lenient,
                                       const char* out_dir, size_t* rows, size_t* rejects);
MMCOIR_API mmcoir_status mmcoir_length_report(const mmcoir_engine* engine, const char* const* train_files,
                                              size_t n_train, const char* eval_file, const char* eval_task,
                                              const char* out_dir);
MMCOIR_API mmcoir_status mmcoir_embed(const mmcoir_engine* engine, mmcoir_row_kind kind, const char* input,
                                      const char* task_tag, const char* out_dir, size_t* count);
/* Writes head.bin and loss.csv; *summary_json receives
 * {"steps","final_loss","head_fingerprint","head_path"}. */
MMCOIR_API mmcoir_status mmcoir_train(const mmcoir_engine* engine, const char* const* train_files, size_t n_files,
                                      const char* task_tag, const char* out_dir, char** summary_json);
MMCOIR_API mmcoir_status mmcoir_index_build(const mmcoir_engine* engine, mmcoir_row_kind kind, const char* input,
                                            const char* corpus_tag, const char* task_tag, const char* head_path,
                                            const char* out_path, size_t* count);
/* request_json uses the /v1/search body schema. */
MMCOIR_API mmcoir_status mmcoir_search(const mmcoir_engine* engine, const char* index_path, const char* head_path,
                                       const char* request_json, char** response_json);
MMCOIR_API mmcoir_status mmcoir_eval(const mmcoir_engine* engine, const char* manifest, const char* head_path,
                                     const char* out_dir, char** report_csv);
MMCOIR_API mmcoir_status mmcoir_ablate_len(const mmcoir_engine* engine, const char* manifest, const char* head_path,
                                           const char* out_dir, char** report_csv);
/* generation_endpoint may be NULL to only build prompts. *summary_json
 * receives {"prompts","generations","guard_violations"}. */
MMCOIR_API mmcoir_status mmcoir_rag(const mmcoir_engine* engine, const char* const* train_files, size_t n_train,
                                    const char* train_task, const char* eval_file, const char* eval_task,
                                    const char* head_path, const char* out_dir, const char* generation_endpoint,
                                    int extract_fence, char** summary_json);
/* kind: "planted-feature" or "planted-position"; seed may be NULL. */
MMCOIR_API mmcoir_status mmcoir_gen_fixtures(const char* kind, const char* out_dir, const uint64_t* seed);

MMCOIR_API mmcoir_status mmcoir_index_load(const char* path, mmcoir_index** out);
MMCOIR_API void mmcoir_index_destroy(mmcoir_index* index);
MMCOIR_API size_t mmcoir_index_size(const mmcoir_index* index);
MMCOIR_API size_t mmcoir_index_dim(const mmcoir_index* index);
/* Exact top-k. ids and scores must hold k entries; *n_hits receives the
 * number written. */
MMCOIR_API mmcoir_status mmcoir_index_search(const mmcoir_index* index, const float* query, size_t dim, size_t k,
                                             uint64_t* ids, double* scores, size_t* n_hits);

MMCOIR_API mmcoir_status mmcoir_service_create(const mmcoir_engine* engine, const char* const* corpus_tags,
                                               const char* const* index_paths, size_t n_corpora,
                                               const char* head_path, mmcoir_service** out);
/* Serves on a background thread; port 0 picks a free port. */
MMCOIR_API mmcoir_status mmcoir_service_start(mmcoir_service* service, const char* host, int port, int* bound_port);
/* Serves on the calling thread until mmcoir_service_stop. */
MMCOIR_API mmcoir_status mmcoir_service_run(mmcoir_service* service, const char* host, int port);
MMCOIR_API void mmcoir_service_stop(mmcoir_service* service);
MMCOIR_API void mmcoir_service_destroy(mmcoir_service* service);

#ifdef __cplusplus
}
#endif

#endif  // MMCOIR_H_
