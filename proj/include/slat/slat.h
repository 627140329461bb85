/*
 * C interface to the SLAT remaining-useful-life library.
 *
 * Objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every call returns a slat_status; on failure a
 * human-readable message for the calling thread is available from
 * slat_last_error() until the next call on that thread. Strings returned
 * through char** out-parameters are heap-allocated and must be released
 * with slat_string_free().
 *
 * Configuration is passed as JSON text with optional sections "corpus",
 * "sim", "pipeline", "model" and "train"; NULL or "" selects the defaults.
 */
#ifndef SLAT_SLAT_H
#define SLAT_SLAT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SLAT_BUILDING_LIBRARY)
#    define SLAT_API __declspec(dllexport)
#  else
#    define SLAT_API __declspec(dllimport)
#  endif
#else
#  define SLAT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum slat_status {
    SLAT_OK = 0,
    SLAT_ERR_INVALID_ARGUMENT = 1,
    SLAT_ERR_INVALID_INPUT = 2,
    SLAT_ERR_EMPTY_TRAJECTORY = 3,
    SLAT_ERR_CONFIG = 4,
    SLAT_ERR_IO = 5,
    SLAT_ERR_NON_FINITE = 6,
    SLAT_ERR_DIVERGENCE = 7,
    SLAT_ERR_INTERNAL = 99
} slat_status;

typedef struct slat_corpus slat_corpus;
typedef struct slat_model slat_model;

SLAT_API const char* slat_version(void);
SLAT_API const char* slat_status_name(slat_status status);
SLAT_API const char* slat_last_error(void);
SLAT_API void slat_string_free(char* str);

/* Simulates the four-mode corpus and writes manifest.json plus one CSV per
 * trajectory into out_dir. `seed` overrides corpus.master_seed when
 * `override_seed` is non-zero. */
SLAT_API slat_status slat_generate_corpus(const char* config_json, int override_seed,
                                          uint64_t seed, const char* out_dir);

SLAT_API slat_status slat_corpus_open(const char* dir, slat_corpus** out);
SLAT_API void slat_corpus_free(slat_corpus* corpus);
SLAT_API slat_status slat_corpus_trajectory_count(const slat_corpus* corpus, size_t* out);
/* JSON array of {id, mode, split, length}. */
SLAT_API slat_status slat_corpus_describe(const slat_corpus* corpus, char** json_out);

/* Trains on the corpus training split and returns the best-validation model.
 * `history_csv` (optional) receives epoch,train_loss,val_rmse,seconds. */
SLAT_API slat_status slat_train(const slat_corpus* corpus, const char* config_json,
                                int override_seed, uint64_t seed, slat_model** out,
                                char** history_csv);

/* A freshly initialized, untrained model (config "model" section). */
SLAT_API slat_status slat_model_create(const char* config_json, uint64_t seed, slat_model** out);
SLAT_API slat_status slat_model_load(const char* path, slat_model** out);
SLAT_API slat_status slat_model_save(const slat_model* model, const char* path);
SLAT_API void slat_model_free(slat_model* model);
SLAT_API slat_status slat_model_param_count(const slat_model* model, uint64_t* out);

/* Predicted RUL (clamped to [0, rul_cap]) for the window ending at
 * `end_index` of trajectory `trajectory_id`. */
SLAT_API slat_status slat_model_predict(const slat_model* model, const slat_corpus* corpus,
                                        const char* trajectory_id, size_t end_index,
                                        double* out);

/* Per-mode RMSE on the test split: report JSON and the aligned text table. */
SLAT_API slat_status slat_evaluate(const slat_model* model, const slat_corpus* corpus,
                                   char** report_json, char** report_table);

/* Writes t,true_rul,pred_rul for every window position of one trajectory. */
SLAT_API slat_status slat_rtf_export(const slat_model* model, const slat_corpus* corpus,
                                     const char* trajectory_id, const char* csv_path);

/* kind: "constant-mean" or "linear-window". */
SLAT_API slat_status slat_baseline(const slat_corpus* corpus, const char* kind,
                                   char** report_json, char** report_table);

/* Finite-difference check of every parameter tensor on the tiny model.
 * detail_json (optional) lists per-tensor relative errors. */
SLAT_API slat_status slat_gradcheck(uint64_t seed, double* max_rel_error, char** detail_json);

#ifdef __cplusplus
}
#endif

#endif /* SLAT_SLAT_H */
