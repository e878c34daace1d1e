// Copyright 2026 The allin Authors.
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

/* C interface to the allin library. All functions return an allin_status;
 * on failure allin_last_error() describes the problem for the calling
 * thread. Strings returned through char** are owned by the caller and must
 * be released with allin_string_free. */
#ifndef ALLIN_ALLIN_H
#define ALLIN_ALLIN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ALLIN_API __declspec(dllexport)
#else
#define ALLIN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum allin_status {
  ALLIN_OK = 0,
  ALLIN_ERR_DIMENSION = 1,
  ALLIN_ERR_PARSE = 2,
  ALLIN_ERR_SCHEMA = 3,
  ALLIN_ERR_INDEX = 4,
  ALLIN_ERR_CONFIG = 5,
  ALLIN_ERR_VERSION = 6,
  ALLIN_ERR_SHAPE = 7,
  ALLIN_ERR_IO = 8,
  ALLIN_ERR_INTERNAL = 9,
  ALLIN_ERR_NULL_ARGUMENT = 10
} allin_status;

typedef struct allin_dataset allin_dataset;
typedef struct allin_checkpoint allin_checkpoint;

ALLIN_API const char* allin_version(void);
ALLIN_API const char* allin_status_name(allin_status status);
/* Message of the last failed call on this thread; "" if none. */
ALLIN_API const char* allin_last_error(void);
ALLIN_API void allin_string_free(char* s);
/* FNV-1a 64 of a canonical config text, as printed by every command. */
ALLIN_API uint64_t allin_config_hash(const char* text);

/* Datasets */
ALLIN_API allin_status allin_dataset_load(const char* path, allin_dataset** out);
ALLIN_API allin_status allin_dataset_parse(const char* json, allin_dataset** out);
ALLIN_API allin_status allin_dataset_save(const allin_dataset* ds, const char* path);
ALLIN_API allin_status allin_dataset_num_graphs(const allin_dataset* ds, size_t* out);
ALLIN_API allin_status allin_dataset_feature_dim(const allin_dataset* ds, size_t* out);
/* Violations of every graph as a JSON array of {graph, field, message}. */
ALLIN_API allin_status allin_dataset_validate(const allin_dataset* ds, char** violations_json);
ALLIN_API void allin_dataset_free(allin_dataset* ds);

/* Checkpoints */
ALLIN_API allin_status allin_checkpoint_load(const char* path, allin_checkpoint** out);
ALLIN_API allin_status allin_checkpoint_num_heads(const allin_checkpoint* ckpt, size_t* out);
ALLIN_API allin_status allin_checkpoint_encoder_hash(const allin_checkpoint* ckpt, uint64_t* out);
ALLIN_API void allin_checkpoint_free(allin_checkpoint* ckpt);

/* Commands. Each writes a JSON result document to *result_json. */

/* suite: comma-separated check names or "all". *all_passed is 1 iff every
 * applicable check passed. */
ALLIN_API allin_status allin_verify(const char* suite, uint64_t seed, int with_time,
                                    int* all_passed, char** result_json);

/* Trains from a config document; paths inside resolve against base_dir.
 * overrides_json may be NULL or an object with any of
 * {"epochs", "seed", "threads"}. */
ALLIN_API allin_status allin_train(const char* config_json, const char* base_dir,
                                   const char* overrides_json, char** result_json);

/* options_json: {"head", "epochs", "batch_size", "learning_rate", "seed",
 * "eval_avg_draws", "out", "metrics_out"}, all optional. */
ALLIN_API allin_status allin_transfer(const char* ckpt_path, const char* data_path,
                                      const char* options_json, char** result_json);

/* options_json: {"n", "h", "c", "mode", "repeat", "seed", "force"}. */
ALLIN_API allin_status allin_bench(const char* options_json, char** result_json);

/* ckpt_path may be NULL. options_json: {"dump_operators", "dump_embeddings",
 * "seed", "encoder", "out"}. */
ALLIN_API allin_status allin_encode(const char* data_path, const char* ckpt_path,
                                    const char* options_json, char** result_json);

/* options_json: {"graphs", "nodes", "feature_dim", "map", "seed", "map_seed",
 * "name"}. Writes the dataset to out_path. */
ALLIN_API allin_status allin_synth(const char* options_json, const char* out_path,
                                   char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* ALLIN_ALLIN_H */
