/* cvf - consistency violation fault analysis for Dijkstra's K-state token
 * ring: exact state-space rank analysis plus a feedforward surrogate model
 * for ring sizes where exhaustive analysis is infeasible.
 *
 * All functions return a cvf_status int; nonzero is failure and
 * cvf_last_error() describes the most recent failure on the calling thread.
 * Objects returned through out-pointers are owned by the caller and released
 * with the matching _destroy function.
 */
#ifndef CVF_H
#define CVF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CVF_API __declspec(dllexport)
#else
#define CVF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 2..5 double as the CLI exit codes. */
typedef enum cvf_status {
    CVF_OK = 0,
    CVF_ERROR = 1,          /* I/O and unclassified failures */
    CVF_ERR_CONFIG = 2,     /* invalid arguments or configuration */
    CVF_ERR_CAPACITY = 3,   /* state space exceeds the budget */
    CVF_ERR_CYCLIC = 4,     /* cycle among variant states (K too small) */
    CVF_ERR_NUMERIC = 5     /* non-finite loss or numeric failure */
} cvf_status;

CVF_API const char* cvf_version(void);
CVF_API const char* cvf_status_name(int status);
/* Message of the last failing call on this thread; empty string if none. */
CVF_API const char* cvf_last_error(void);

/* ---- ring system ------------------------------------------------------- */

typedef struct cvf_system cvf_system;

CVF_API int cvf_system_create(uint32_t n_nodes, uint32_t k_domain, cvf_system** out);
CVF_API void cvf_system_destroy(cvf_system* sys);
CVF_API int cvf_system_state_count(const cvf_system* sys, uint64_t* out);
/* values must hold n_nodes entries. */
CVF_API int cvf_system_decode(const cvf_system* sys, uint64_t state, uint32_t* values,
                              size_t n_values);
CVF_API int cvf_system_encode(const cvf_system* sys, const uint32_t* values, size_t n_values,
                              uint64_t* out);
/* nodes must hold n_nodes entries; *out_count receives the privilege count. */
CVF_API int cvf_system_privileges(const cvf_system* sys, uint64_t state, uint32_t* nodes,
                                  size_t* out_count);
CVF_API int cvf_system_is_invariant(const cvf_system* sys, uint64_t state, int* out);
CVF_API int cvf_system_apply_move(const cvf_system* sys, uint64_t state, uint32_t node,
                                  uint64_t* out);

/* ---- rank analysis ------------------------------------------------------ */

typedef struct cvf_rank_table cvf_rank_table;

/* state_budget 0 uses the default budget (5e7 states). allow_small_k permits
 * K < N; analysis then fails with CVF_ERR_CYCLIC when convergence breaks. */
CVF_API int cvf_rank_table_compute(const cvf_system* sys, uint64_t state_budget,
                                   int allow_small_k, cvf_rank_table** out);
CVF_API void cvf_rank_table_destroy(cvf_rank_table* table);
/* Either out-pointer may be NULL. ar is the rounded average path length,
 * m the max adjustment parameter; both 0 for invariant states. */
CVF_API int cvf_rank_table_get(const cvf_rank_table* table, uint64_t state, int64_t* ar,
                               int64_t* m);
/* Total path length L and path count C as decimal strings (they outgrow any
 * fixed-width integer). Either buffer may be NULL to skip it. */
CVF_API int cvf_rank_table_path_stats(const cvf_rank_table* table, uint64_t state, char* l_buf,
                                      size_t l_cap, char* c_buf, size_t c_cap);
CVF_API int cvf_rank_table_invariant_count(const cvf_rank_table* table, uint64_t* out);

/* ---- trained model ------------------------------------------------------ */

typedef struct cvf_model cvf_model;

CVF_API int cvf_model_load(const char* path, cvf_model** out);
CVF_API int cvf_model_save(const cvf_model* model, const char* path);
CVF_API void cvf_model_destroy(cvf_model* model);
CVF_API int cvf_model_input_width(const cvf_model* model, size_t* out);
/* features is row-major n_rows x width; predictions has n_rows entries. */
CVF_API int cvf_model_predict(const cvf_model* model, const double* features, size_t width,
                              size_t n_rows, double* predictions);

/* ---- command runners (the CLI maps onto these one to one) --------------- */

typedef struct cvf_analyze_options {
    uint32_t n_nodes;
    uint32_t k_domain;       /* 0 means K = N */
    const char* out_dir;
    const char* metric;      /* "ar" (default when NULL) or "m" */
    int allow_small_k;
    uint64_t state_budget;   /* 0 means the default budget */
} cvf_analyze_options;

typedef struct cvf_dataset_options {
    const char* nodes;        /* "3..7", "3,4,5" or "4" */
    uint32_t input_neurons;   /* 0 means the default of 15 */
    const char* target;       /* "ar" (default when NULL) or "m" */
    const char* out_dir;
    const char* split;        /* "random:0.8" (default when NULL) or "holdout:7" */
    uint64_t seed;
    double pad_value;
    uint64_t state_budget;
} cvf_dataset_options;

typedef struct cvf_train_options {
    const char* data_dir;
    const char* model_out;
    const char* preset;       /* NULL/"", "fnn" (300/32) or "mirrored" (200/64) */
    uint64_t epochs;          /* 0 means take the preset/default */
    uint64_t batch;
    double lr;
    uint32_t workers;         /* 0 means 1 */
    uint64_t seed;
    int no_dropout;
    int no_batchnorm;
    uint64_t val_sample;      /* 0 evaluates on the full test split */
} cvf_train_options;

typedef struct cvf_predict_options {
    const char* model_path;
    uint32_t n_nodes;
    uint32_t k_domain;        /* 0 means K = N */
    const char* out_dir;
    uint64_t state_budget;
} cvf_predict_options;

typedef struct cvf_plot_options {
    const char* in_csv;
    const char* out_svg;
    const char* kind;         /* "counts", "effects" or "comparison" */
} cvf_plot_options;

CVF_API int cvf_run_analyze(const cvf_analyze_options* opts);
CVF_API int cvf_run_dataset(const cvf_dataset_options* opts);
CVF_API int cvf_run_train(const cvf_train_options* opts);
CVF_API int cvf_run_predict(const cvf_predict_options* opts);
CVF_API int cvf_run_plot(const cvf_plot_options* opts);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CVF_H */
