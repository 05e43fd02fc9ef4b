#ifndef CURVLINES_H
#define CURVLINES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CurvStatus {
  CURV_STATUS_OK = 0,
  CURV_STATUS_NULL_POINTER = 1,
  CURV_STATUS_INVALID_UTF8 = 2,
  CURV_STATUS_INVALID_INPUT = 3,
  // The computation ran but recorded errors, or failed outright.
  CURV_STATUS_COMPUTE = 4,
  CURV_STATUS_BUFFER_TOO_SMALL = 5,
  CURV_STATUS_PANIC = 6,
} CurvStatus;

typedef enum CurvClass {
  CURV_CLASS_D1 = 0,
  CURV_CLASS_D2 = 1,
  CURV_CLASS_D3 = 2,
  CURV_CLASS_D12_CASE1 = 3,
  CURV_CLASS_D12_CASE2 = 4,
  CURV_CLASS_D123 = 5,
  CURV_CLASS_DEGENERATE = 6,
} CurvClass;

// Opaque surface handle.
typedef struct CurvSurface CurvSurface;

// A classified umbilic. `a`, `b`, `c` are the cubic coefficients of the
// normal form, `delta` the discriminant of the separatrix cubic.
typedef struct CurvUmbilic {
  double u;
  double v;
  enum CurvClass class_;
  double a;
  double b;
  double c;
  double delta;
} CurvUmbilic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or NULL. Valid until the next call
// into this library on the same thread.
const char *curv_last_error(void);

// Build a Monge patch `z = h(u, v)` over `[u0, u1] x [v0, v1]`.
//
// # Safety
// `h` must be a NUL-terminated string and `out` a valid pointer.
enum CurvStatus curv_surface_monge(const char *h,
                                   double u0,
                                   double u1,
                                   double v0,
                                   double v1,
                                   struct CurvSurface **out);

// # Safety
// `s` must be NULL or a handle from this library not yet freed.
void curv_surface_free(struct CurvSurface *s);

// Fix the family parameter.
//
// # Safety
// `s` must be a live handle.
enum CurvStatus curv_surface_set_lambda(struct CurvSurface *s, double lambda);

// Locate and classify umbilics on a `grid x grid` search grid. Writes up
// to `cap` records to `buf` and the total found to `len`; returns
// `BufferTooSmall` when `len > cap`. `buf` may be NULL when `cap` is 0.
//
// # Safety
// `s` must be a live handle, `buf` valid for `cap` writes and `len` valid.
enum CurvStatus curv_umbilics(const struct CurvSurface *s,
                              size_t grid,
                              struct CurvUmbilic *buf,
                              size_t cap,
                              size_t *len);

// Run a full analysis from a JSON configuration and return the JSON
// report in `out`, to be released with [`curv_string_free`]. When the
// report records computation errors it is still returned, with status
// `Compute`.
//
// # Safety
// `config` must be a NUL-terminated string and `out` a valid pointer.
enum CurvStatus curv_run_json(const char *config, char **out);

// # Safety
// `s` must be NULL or a string returned by this library not yet freed.
void curv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CURVLINES_H */
