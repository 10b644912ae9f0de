/* C API for the CGRA convolution benchmark core.
 *
 * Opaque handles + integer status codes; every string returned through a
 * char** or char* return value is heap-allocated and must be released with
 * cgra_string_free(). On a nonzero status, cgra_last_error() describes the
 * failure (thread-local).
 */
#ifndef CGRACONV_H
#define CGRACONV_H

#include <stddef.h>

#if defined(_WIN32)
#define CGRA_API __declspec(dllexport)
#else
#define CGRA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct cgra_plan cgra_plan;
typedef struct cgra_result cgra_result;

enum {
  CGRA_OK = 0,
  CGRA_E_ARG = 1,      /* bad argument / unknown strategy */
  CGRA_E_PARSE = 2,    /* assembly syntax error */
  CGRA_E_INVALID = 3,  /* program fails validation */
  CGRA_E_SIM = 4,      /* simulation fault */
  CGRA_E_VERIFY = 5,   /* simulated output differs from the oracle */
  CGRA_E_IO = 6        /* file I/O failure */
};

CGRA_API const char* cgra_last_error(void);
CGRA_API void cgra_string_free(char* s);

/* Host/timing knobs; pass <= 0 to keep a default. */
typedef struct cgra_options {
  long long mem_lat;          /* TimingModel.mem_base_cycles (default 6) */
  long long host_im2col_cpw;  /* im2col cycles per word (default 2) */
  long long launch_overhead;  /* cycles per kernel launch (default 100) */
  unsigned seed;              /* random tensor seed (default 1) */
} cgra_options;

/* ---- kernel plans -------------------------------------------------- */

CGRA_API int cgra_plan_create(const char* strategy, int C, int K, int Ox,
                              int Oy, int Fx, int Fy, cgra_plan** out);
CGRA_API void cgra_plan_destroy(cgra_plan* plan);
CGRA_API int cgra_plan_asm(const cgra_plan* plan, char** out_text);
CGRA_API int cgra_plan_json(const cgra_plan* plan, char** out_json);

/* ---- assembler ----------------------------------------------------- */

/* Parses assembly text and re-emits the canonical form. */
CGRA_API int cgra_asm_canonicalize(const char* text, char** out_text);
/* Validation findings, one per line; empty string when the program is
 * clean. Parse failures return CGRA_E_PARSE. */
CGRA_API int cgra_asm_validate(const char* text, char** out_violations);

/* ---- end-to-end experiment ----------------------------------------- */

/* Generates the plan, simulates it on seeded tensors (or tensors loaded
 * from the optional file paths), verifies against the direct-convolution
 * oracle and computes metrics. Returns CGRA_OK even when verification
 * fails; query cgra_result_matches_oracle. */
CGRA_API int cgra_run(const char* strategy, int C, int K, int Ox, int Oy,
                      int Fx, int Fy, const cgra_options* opts,
                      const char* input_path, const char* weights_path,
                      cgra_result** out);
CGRA_API void cgra_result_destroy(cgra_result* r);
CGRA_API int cgra_result_matches_oracle(const cgra_result* r);
CGRA_API int cgra_result_metrics_json(const cgra_result* r, char** out_json);
CGRA_API int cgra_result_report_json(const cgra_result* r, char** out_json);
CGRA_API int cgra_result_save_output(const cgra_result* r, const char* path);

/* ---- sweeps --------------------------------------------------------- */

/* strategies: comma-separated subset of wp,im2col-ip,conv-op,im2col-op
 * (NULL = all four). mode: "oat" or "joint". Value arrays may be NULL to
 * use the default ranges. format: "csv" or "json". */
CGRA_API int cgra_sweep(const char* strategies, const char* mode,
                        long long mem_cap_bytes, const cgra_options* opts,
                        int threads, const int* O_vals, int nO,
                        const int* C_vals, int nC, const int* K_vals, int nK,
                        const char* format, char** out_table);

#ifdef __cplusplus
}
#endif

#endif /* CGRACONV_H */
