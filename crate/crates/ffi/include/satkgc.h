#ifndef SATKGC_H
#define SATKGC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call. Codes 2 to 4 match the CLI exit codes.
 */
typedef enum SatkgcStatus {
  SATKGC_STATUS_OK = 0,
  /*
   Null pointer, non UTF-8 string or out-of-range enum value.
   */
  SATKGC_STATUS_INVALID_ARGUMENT = 1,
  SATKGC_STATUS_CONFIG = 2,
  SATKGC_STATUS_DATA = 3,
  SATKGC_STATUS_NUMERIC = 4,
  /*
   The library panicked; the handle arguments may be in any state.
   */
  SATKGC_STATUS_INTERNAL = 5,
} SatkgcStatus;

typedef enum SatkgcNeighborMode {
  /*
   BRWR
   */
  SATKGC_NEIGHBOR_MODE_INVERSE_DEGREE = 0,
  /*
   RWR
   */
  SATKGC_NEIGHBOR_MODE_UNIFORM = 1,
  /*
   BRWR_P
   */
  SATKGC_NEIGHBOR_MODE_DEGREE_PROPORTIONAL = 2,
} SatkgcNeighborMode;

typedef enum SatkgcBatchMode {
  SATKGC_BATCH_MODE_SAAM = 0,
  SATKGC_BATCH_MODE_RANDOM = 1,
  SATKGC_BATCH_MODE_MIXED = 2,
} SatkgcBatchMode;

typedef struct SatkgcGraph SatkgcGraph;

typedef struct SatkgcModel SatkgcModel;

typedef struct SatkgcStore SatkgcStore;

typedef struct SatkgcSamplerConfig {
  double restart_prob;
  size_t max_triples;
  /*
   A `SatkgcNeighborMode` value.
   */
  uint32_t neighbor_mode;
  uint64_t seed;
} SatkgcSamplerConfig;

typedef struct SatkgcTrainConfig {
  size_t dim;
  size_t batch_size;
  /*
   A `SatkgcBatchMode` value.
   */
  uint32_t mode;
  size_t epochs;
  uint64_t seed;
  double learning_rate;
} SatkgcTrainConfig;

typedef struct SatkgcMetrics {
  size_t queries;
  double mrr;
  double hits1;
  double hits3;
  double hits10;
} SatkgcMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *satkgc_last_error(void);

struct SatkgcSamplerConfig satkgc_sampler_config_default(void);

struct SatkgcTrainConfig satkgc_train_config_default(void);

/*
 Loads a `head TAB relation TAB tail` file. `meta` may be null.

 # Safety
 `train` and `meta` must be null or NUL-terminated strings; `out` must be
 null or writable.
 */
enum SatkgcStatus satkgc_graph_load(const char *train, const char *meta, struct SatkgcGraph **out);

/*
 # Safety
 `g` must be null or a handle from `satkgc_graph_load` not yet freed.
 */
void satkgc_graph_free(struct SatkgcGraph *g);

/*
 # Safety
 `g` must be a live graph handle.
 */
size_t satkgc_graph_num_entities(const struct SatkgcGraph *g);

/*
 # Safety
 `g` must be a live graph handle.
 */
size_t satkgc_graph_num_triples(const struct SatkgcGraph *g);

/*
 Samples one subgraph per training triple.

 # Safety
 `g` must be a live graph handle, `cfg` readable and `out` writable.
 */
enum SatkgcStatus satkgc_store_build(const struct SatkgcGraph *g,
                                     const struct SatkgcSamplerConfig *cfg,
                                     struct SatkgcStore **out);

/*
 # Safety
 `p` must be a NUL-terminated string and `out` writable.
 */
enum SatkgcStatus satkgc_store_read(const char *p, struct SatkgcStore **out);

/*
 # Safety
 `s` must be a live store handle and `p` a NUL-terminated string.
 */
enum SatkgcStatus satkgc_store_write(const struct SatkgcStore *s, const char *p);

/*
 # Safety
 `s` must be a live store handle.
 */
size_t satkgc_store_len(const struct SatkgcStore *s);

/*
 # Safety
 `s` must be null or a store handle not yet freed.
 */
void satkgc_store_free(struct SatkgcStore *s);

/*
 Trains a model. `store` may be null only for random batches.

 # Safety
 `g` must be a live graph handle, `store` null or a live store handle,
 `cfg` readable and `out` writable.
 */
enum SatkgcStatus satkgc_train(const struct SatkgcGraph *g,
                               const struct SatkgcStore *store,
                               const struct SatkgcTrainConfig *cfg,
                               struct SatkgcModel **out);

/*
 # Safety
 `p` must be a NUL-terminated string and `out` writable.
 */
enum SatkgcStatus satkgc_model_read(const char *p, struct SatkgcModel **out);

/*
 # Safety
 `m` must be a live model handle and `p` a NUL-terminated string.
 */
enum SatkgcStatus satkgc_model_write(const struct SatkgcModel *m, const char *p);

/*
 # Safety
 `m` must be null or a model handle not yet freed.
 */
void satkgc_model_free(struct SatkgcModel *m);

/*
 Filtered link prediction on a test file, averaged over both directions.

 # Safety
 `g` and `m` must be live handles, `test` a NUL-terminated string and
 `out` writable.
 */
enum SatkgcStatus satkgc_evaluate(const struct SatkgcGraph *g,
                                  const struct SatkgcModel *m,
                                  const char *test,
                                  struct SatkgcMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SATKGC_H */
