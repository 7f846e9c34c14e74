/* Copyright 2026 The CGRU Authors
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef CGRU_CGRU_H_
#define CGRU_CGRU_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CGRU_API __declspec(dllexport)
#else
#define CGRU_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cgru_status {
  CGRU_OK = 0,
  CGRU_ERR_USAGE = 1,    /* bad argument or precondition */
  CGRU_ERR_CONFIG = 2,   /* unknown key, bad value, failed validation */
  CGRU_ERR_IO = 3,       /* missing file, unwritable directory, locked run */
  CGRU_ERR_FORMAT = 4,   /* malformed checkpoint or CSV */
  CGRU_ERR_SHAPE = 5,    /* incompatible dimensions */
  CGRU_ERR_NUMERIC = 6,  /* non-finite values */
  CGRU_ERR_PHASE = 7,    /* a pipeline phase failed or lacks an input */
  CGRU_ERR_INTERNAL = 8
} cgru_status;

typedef struct cgru_config cgru_config_t;
typedef struct cgru_network cgru_network_t;

/* Message for the last non-OK status returned on this thread. */
CGRU_API const char* cgru_last_error_message(void);
CGRU_API const char* cgru_version(void);

/* Configuration. Keys are dotted (section.name). */
CGRU_API cgru_status cgru_config_create(cgru_config_t** out);
CGRU_API void cgru_config_destroy(cgru_config_t* cfg);
/* Replaces cfg's values with defaults overlaid by the file at path. */
CGRU_API cgru_status cgru_config_load_file(cgru_config_t* cfg, const char* path);
CGRU_API cgru_status cgru_config_set(cgru_config_t* cfg, const char* key, const char* value);
/* Parses "key=value". */
CGRU_API cgru_status cgru_config_override(cgru_config_t* cfg, const char* assignment);
/* Writes the value as text into buf (NUL-terminated); *needed receives the
 * required size including the terminator. */
CGRU_API cgru_status cgru_config_get(const cgru_config_t* cfg, const char* key, char* buf, size_t buf_size,
                                     size_t* needed);
CGRU_API cgru_status cgru_config_validate(const cgru_config_t* cfg);
/* 64 hex characters plus terminator. */
CGRU_API cgru_status cgru_config_hash(const cgru_config_t* cfg, char out[65]);

/* Networks (checkpoint files). */
CGRU_API cgru_status cgru_network_load(const char* path, cgru_network_t** out);
CGRU_API cgru_status cgru_network_save(const cgru_network_t* net, const char* path);
CGRU_API void cgru_network_destroy(cgru_network_t* net);
CGRU_API size_t cgru_network_param_count(const cgru_network_t* net);
CGRU_API size_t cgru_network_input_dim(const cgru_network_t* net);
CGRU_API size_t cgru_network_output_dim(const cgru_network_t* net);
CGRU_API size_t cgru_network_cond_dim(const cgru_network_t* net);
/* input: rows x input_dim row-major; cond: rows x cond_dim or NULL;
 * output: rows x output_dim. */
CGRU_API cgru_status cgru_network_forward(const cgru_network_t* net, const double* input, size_t rows,
                                          const double* cond, double* output);

/* Pipeline phases; every artifact is written under out_dir. */
CGRU_API cgru_status cgru_run_classifier(const cgru_config_t* cfg, const char* out_dir);
CGRU_API cgru_status cgru_run_pretrain(const cgru_config_t* cfg, const char* out_dir);
CGRU_API cgru_status cgru_run_critic(const cgru_config_t* cfg, const char* out_dir);
/* method: "cgru" or "ddpo". Checkpoint paths may be NULL to use out_dir's. */
CGRU_API cgru_status cgru_run_unlearn(const cgru_config_t* cfg, const char* out_dir, const char* method,
                                      const char* base_ckpt, const char* critic_ckpt, const char* classifier_ckpt);
/* label: "base", "cgru" or "ddpo". */
CGRU_API cgru_status cgru_run_eval(const cgru_config_t* cfg, const char* out_dir, const char* label);
CGRU_API cgru_status cgru_run_full(const cgru_config_t* cfg, const char* out_dir);
/* which: "variance", "unbiasedness", "ablation", "baseline-optimum", "fidelity". */
CGRU_API cgru_status cgru_diag(const cgru_config_t* cfg, const char* out_dir, const char* which);

/* Writes summary.csv in run_dir; *text (may be NULL) receives a malloc'd
 * summary to release with cgru_string_free. */
CGRU_API cgru_status cgru_report(const char* run_dir, char** text);
CGRU_API void cgru_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* CGRU_CGRU_H_ */
