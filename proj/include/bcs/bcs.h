/* C interface to the blind compressed sensing library.
 *
 * Every function returns a bcs_status. On failure the message is available
 * from bcs_last_error() until the next call on the same thread. Objects are
 * opaque; each *_free accepts NULL. Strings returned through char** must be
 * released with bcs_string_free.
 */
#ifndef BCS_BCS_H
#define BCS_BCS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BCS_API __declspec(dllexport)
#else
#define BCS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bcs_status {
  BCS_OK = 0,
  BCS_ERR_CONTRACT = 2,
  BCS_ERR_IO = 3,
  BCS_ERR_NUMERICAL = 4,
  BCS_ERR_NO_FEASIBLE_BLOCK = 5,
  BCS_ERR_EMPTY_BLOCK = 6,
  BCS_ERR_RANK_DEFICIENT = 7,
  BCS_ERR_DIVERGENCE = 8,
  BCS_ERR_INTERNAL = 9
} bcs_status;

typedef enum bcs_inpaint_method { BCS_INPAINT_ALS = 0, BCS_INPAINT_SVT = 1 } bcs_inpaint_method;

typedef struct bcs_matrix bcs_matrix;
typedef struct bcs_measurements bcs_measurements;
typedef struct bcs_learner_config bcs_learner_config;
typedef struct bcs_state bcs_state;
typedef struct bcs_planted bcs_planted;
typedef struct bcs_phase_result bcs_phase_result;
typedef struct bcs_observation bcs_observation;
typedef struct bcs_image bcs_image;
typedef struct bcs_inpaint_result bcs_inpaint_result;

/* Called after every outer learner iteration. */
typedef void (*bcs_progress_fn)(void* user, int iteration, double objective, int64_t blocks);

BCS_API const char* bcs_version(void);
BCS_API const char* bcs_last_error(void);
BCS_API const char* bcs_status_name(bcs_status status);
BCS_API void bcs_string_free(char* s);

/* Dense matrices, column-major. */
BCS_API bcs_status bcs_matrix_create(int64_t rows, int64_t cols, const double* data, bcs_matrix** out);
BCS_API bcs_status bcs_matrix_load(const char* path, bcs_matrix** out);
BCS_API bcs_status bcs_matrix_save(const bcs_matrix* m, const char* path);
BCS_API int64_t bcs_matrix_rows(const bcs_matrix* m);
BCS_API int64_t bcs_matrix_cols(const bcs_matrix* m);
BCS_API const double* bcs_matrix_data(const bcs_matrix* m);
BCS_API void bcs_matrix_free(bcs_matrix* m);
/* 10 log10(peak^2 / MSE) over all entries; peak <= 0 selects max |reference|. */
BCS_API bcs_status bcs_matrix_psnr(const bcs_matrix* reference, const bcs_matrix* estimate, double peak, double* out);

/* Measurements y_i = A_i x_i of the columns of `signals`. */
BCS_API bcs_status bcs_measure_mask_file(const bcs_matrix* signals, const char* path, bcs_measurements** out);
BCS_API bcs_status bcs_measure_random_pixels(const bcs_matrix* signals, double fraction, uint64_t seed,
                                             bcs_measurements** out);
BCS_API bcs_status bcs_measure_random_gaussian(const bcs_matrix* signals, double fraction, uint64_t seed,
                                               bcs_measurements** out);
/* Writes the observed index lists (pixel masks only). */
BCS_API bcs_status bcs_measurements_save_masks(const bcs_measurements* ms, const char* path);
BCS_API int64_t bcs_measurements_count(const bcs_measurements* ms);
BCS_API void bcs_measurements_free(bcs_measurements* ms);

/* Learner settings. Keys: k_max, r, L_init, max_outer_iters, restarts, objective_rel_tol,
 * sac_threshold, sac_every, usage_energy_fraction, seed, reseed_dead_blocks,
 * reseed_rank_deficient, init (random|signals), method (auto|dense|normal|pixel),
 * max_condition, threads. */
BCS_API bcs_status bcs_learner_config_create(bcs_learner_config** out);
BCS_API bcs_status bcs_learner_config_set(bcs_learner_config* cfg, const char* key, const char* value);
BCS_API void bcs_learner_config_free(bcs_learner_config* cfg);

BCS_API bcs_status bcs_learn(const bcs_measurements* ms, const bcs_learner_config* cfg, const bcs_state* resume,
                             bcs_progress_fn progress, void* user, bcs_state** out);
/* Assigns every signal by BOMP against a saved dictionary. */
BCS_API bcs_status bcs_state_from_dictionary(const bcs_measurements* ms, const char* dictionary_path,
                                             bcs_state** out);
BCS_API bcs_status bcs_state_load_checkpoint(const char* dir, bcs_state** out);
BCS_API bcs_status bcs_state_save_checkpoint(const bcs_state* st, const char* dir);
BCS_API bcs_status bcs_state_save_dictionary(const bcs_state* st, const char* path);
BCS_API bcs_status bcs_state_write_assignment_csv(const bcs_state* st, const char* path);
BCS_API bcs_status bcs_state_write_trace_csv(const bcs_state* st, const char* path);
/* D s_i for every signal, as columns. */
BCS_API bcs_status bcs_state_reconstruct(const bcs_state* st, bcs_matrix** out);
BCS_API int bcs_state_iterations(const bcs_state* st);
BCS_API double bcs_state_objective(const bcs_state* st);
BCS_API int64_t bcs_state_blocks(const bcs_state* st);
BCS_API int64_t bcs_state_active_blocks(const bcs_state* st);
BCS_API int64_t bcs_state_warning_count(const bcs_state* st);
BCS_API const char* bcs_state_warning(const bcs_state* st, int64_t index);
BCS_API void bcs_state_free(bcs_state* st);

/* Planted union-of-subspaces data. */
BCS_API bcs_status bcs_planted_generate(int64_t n, int64_t L, int64_t k, int64_t count, uint64_t seed,
                                        bcs_planted** out);
BCS_API bcs_status bcs_planted_signals(const bcs_planted* p, bcs_matrix** out);
BCS_API bcs_status bcs_planted_save_dictionary(const bcs_planted* p, const char* path);
BCS_API bcs_status bcs_planted_write_labels_csv(const bcs_planted* p, const char* path);
/* Ground-truth dictionary, codes and assignment for the given measurements. */
BCS_API bcs_status bcs_planted_state(const bcs_planted* p, const bcs_measurements* ms, bcs_state** out);
/* 10 log10(peak^2 / MSE) of a reconstruction against the planted signals, peak = max |x|. */
BCS_API bcs_status bcs_planted_psnr(const bcs_planted* p, const bcs_matrix* estimate, double* out);
BCS_API void bcs_planted_free(bcs_planted* p);

typedef struct bcs_phase_params {
  int64_t n;
  int64_t L;
  int64_t k;
  int64_t count;
  const double* fractions;
  int64_t num_fractions;
  int trials;
  double threshold_db;
  uint64_t seed;
  int threads;
  /* nonzero: learner r = 2 L k and k_max = k */
  int size_learner;
} bcs_phase_params;

/* Defaults: n=32, L=3, k=4, count=128, fractions 0.1..0.9, 10 trials, 40 dB,
 * size_learner = 1. A NULL learner config in bcs_phase_run means 50 outer
 * iterations with 3 restarts. */
BCS_API void bcs_phase_params_default(bcs_phase_params* params);
BCS_API bcs_status bcs_phase_run(const bcs_phase_params* params, const bcs_learner_config* cfg,
                                 bcs_phase_result** out);
/* Same experiment on a rank-k truncation of a real image: disjoint patch x patch
 * tiles are clustered by the learner (`cluster_cfg`, NULL = defaults with
 * k_max = k), each cluster is cut to its top k singular vectors and clusters
 * with at most k members are dropped. n, L and count in `params` are ignored. */
BCS_API bcs_status bcs_phase_run_image(const bcs_phase_params* params, const bcs_learner_config* cfg,
                                       const bcs_image* image, int64_t patch, const bcs_learner_config* cluster_cfg,
                                       bcs_phase_result** out);
BCS_API bcs_status bcs_phase_write(const bcs_phase_result* r, const char* trials_csv, const char* summary_csv,
                                   const char* dat_path);
BCS_API int64_t bcs_phase_rows(const bcs_phase_result* r);
BCS_API double bcs_phase_fraction(const bcs_phase_result* r, int64_t row);
BCS_API double bcs_phase_frequency(const bcs_phase_result* r, int64_t row);
BCS_API void bcs_phase_free(bcs_phase_result* r);

typedef struct bcs_check_params {
  int64_t max_subset;
  double beta;
  uint64_t seed;
} bcs_check_params;

BCS_API void bcs_check_params_default(bcs_check_params* params);
/* JSON with the uniqueness and Proposition 1 reports; *overall is 1 when every check passed. */
BCS_API bcs_status bcs_check_conditions(const bcs_measurements* ms, const bcs_state* st,
                                        const bcs_check_params* params, char** json, int* overall);

/* Partially observed matrices and the SVT baseline. */
BCS_API bcs_status bcs_observation_load(const char* path, bcs_observation** out);
BCS_API bcs_status bcs_observation_save(const bcs_observation* obs, const char* path);
/* Rank-`rank` Gaussian product with entries observed independently with probability `fraction`. */
BCS_API bcs_status bcs_observation_low_rank_example(int64_t rows, int64_t cols, int64_t rank, double fraction,
                                                    uint64_t seed, bcs_observation** obs, bcs_matrix** truth);
BCS_API int64_t bcs_observation_rows(const bcs_observation* obs);
BCS_API int64_t bcs_observation_cols(const bcs_observation* obs);
BCS_API int64_t bcs_observation_count(const bcs_observation* obs);
BCS_API void bcs_observation_free(bcs_observation* obs);

typedef struct bcs_svt_params {
  double tau;   /* <= 0: 5 sqrt(rows cols) */
  double delta; /* <= 0: 1.2 rows cols / |Omega| */
  int max_iters;
  double tol;
} bcs_svt_params;

BCS_API void bcs_svt_params_default(bcs_svt_params* params);
BCS_API bcs_status bcs_svt_complete(const bcs_observation* obs, const bcs_svt_params* params, bcs_matrix** out,
                                    int* iterations, double* residual);
/* pinv(A~) Y followed by a rank-k SVD; writes the n x k factor D. */
BCS_API bcs_status bcs_factor_completed(const bcs_matrix* completed, const bcs_matrix* union_rows, int64_t k,
                                        bcs_matrix** d, bcs_matrix** s, double* residual);

/* Grayscale images with an optional observation mask. */
BCS_API bcs_status bcs_image_load(const char* path, bcs_image** out);
BCS_API bcs_status bcs_image_save(const bcs_image* img, const char* path);
BCS_API int64_t bcs_image_height(const bcs_image* img);
BCS_API int64_t bcs_image_width(const bcs_image* img);
/* Copy of `img` observed at round(fraction H W) random pixels. */
BCS_API bcs_status bcs_image_mask_random(const bcs_image* img, double fraction, uint64_t seed, bcs_image** out);
/* Mask from a PBM (P4, 1 = observed) or an index list of column-major pixel indices. */
BCS_API bcs_status bcs_image_mask_file(const bcs_image* img, const char* path, bcs_image** out);
BCS_API bcs_status bcs_image_save_mask(const bcs_image* img, const char* path);
BCS_API double bcs_image_psnr(const bcs_image* reference, const bcs_image* estimate);
BCS_API void bcs_image_free(bcs_image* img);

typedef struct bcs_inpaint_params {
  int64_t patch;
  bcs_inpaint_method method;
  int keep_observed;
  double svt_tau;
  double svt_delta;
  int svt_max_iters;
  double svt_tol;
  int threads;
} bcs_inpaint_params;

BCS_API void bcs_inpaint_params_default(bcs_inpaint_params* params);
BCS_API bcs_status bcs_inpaint(const bcs_image* observed, const bcs_learner_config* cfg,
                               const bcs_inpaint_params* params, bcs_progress_fn progress, void* user,
                               bcs_inpaint_result** out);
BCS_API const bcs_image* bcs_inpaint_image(const bcs_inpaint_result* r);
BCS_API const bcs_state* bcs_inpaint_state(const bcs_inpaint_result* r);
/* Metrics JSON; `original` may be NULL, then the PSNR fields are null. */
BCS_API bcs_status bcs_inpaint_metrics_json(const bcs_inpaint_result* r, const bcs_image* original,
                                            const bcs_image* observed, char** json);
BCS_API void bcs_inpaint_free(bcs_inpaint_result* r);

#ifdef __cplusplus
}
#endif

#endif
