/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PRISMINT_H
#define PRISMINT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PRISMINT_OK 0

// A required pointer argument was null.
#define PRISMINT_ERR_NULL_POINTER -1

// The library panicked; the handle arguments should be considered unusable.
#define PRISMINT_ERR_PANIC -2

// An output buffer was shorter than required.
#define PRISMINT_ERR_BUFFER_TOO_SMALL -3

// An enum or index argument was out of range, or a string was not UTF-8.
#define PRISMINT_ERR_INVALID_ARGUMENT -4

#define PRISMINT_VARIANT_REG_JAC 0

#define PRISMINT_VARIANT_REG_NOJAC 1

#define PRISMINT_VARIANT_SHM_JAC 2

#define PRISMINT_VARIANT_SHM_NOJAC 3

#define PRISMINT_PRECISION_F32 0

#define PRISMINT_PRECISION_F64 1

// Mesh handle.
typedef struct PrismintMesh PrismintMesh;

// Execution plan handle.
typedef struct PrismintPlan PrismintPlan;

// Device profile handle.
typedef struct PrismintProfile PrismintProfile;

// Plain-data copy of an execution plan.
typedef struct PrismintPlanInfo {
  int32_t variant;
  uint32_t p;
  size_t n_sh;
  size_t n_q;
  size_t work_group_size;
  size_t n_blocks;
  size_t blocks_per_thread;
  size_t n_parts;
  size_t elems_per_kernel;
  size_t elems_per_work_group;
  size_t n_work_groups;
  size_t shared_scratch_bytes;
  size_t output_bytes;
  size_t input_bytes_jac;
  size_t input_bytes_nojac;
} PrismintPlanInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *prismint_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length. Pass a
// null `buf` to query the length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t prismint_last_error(char *buf, size_t len);

// Doubles per element matrix at order `p`, or 0 for an unsupported order.
size_t prismint_matrix_len(uint32_t p);

// Loads a bundled profile (`"gtx580"`, `"hd5870"`) or a JSON profile file.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
int32_t prismint_profile_load(const char *name, struct PrismintProfile **out);

// # Safety
// `profile` must be null or a handle from [`prismint_profile_load`] not yet freed.
void prismint_profile_free(struct PrismintProfile *profile);

// Structured box mesh of `2 nx ny nz` prisms on the unit cube.
//
// # Safety
// `out` must be writable.
int32_t prismint_mesh_box(size_t nx,
                          size_t ny,
                          size_t nz,
                          double distortion,
                          uint64_t seed,
                          struct PrismintMesh **out);

// Mesh from explicit vertex coordinates: 18 doubles per element (six
// vertices, `x y z` each, bottom triangle first).
//
// # Safety
// `coords` must point to `18 * n_elements` readable doubles; `out` must be writable.
int32_t prismint_mesh_from_vertices(const double *coords,
                                    size_t n_elements,
                                    struct PrismintMesh **out);

// Number of elements, or 0 for a null handle.
//
// # Safety
// `mesh` must be null or a live mesh handle.
size_t prismint_mesh_len(const struct PrismintMesh *mesh);

// # Safety
// `mesh` must be null or a mesh handle not yet freed.
void prismint_mesh_free(struct PrismintMesh *mesh);

// Plans one kernel invocation with at most `n_elements` elements using the
// profile's planning defaults for order `p`.
//
// # Safety
// `profile` must be a live profile handle; `out` must be writable.
int32_t prismint_plan_create(const struct PrismintProfile *profile,
                             uint32_t p,
                             int32_t variant,
                             size_t n_elements,
                             struct PrismintPlan **out);

// # Safety
// `plan` must be a live plan handle; `info` must be writable.
int32_t prismint_plan_info(const struct PrismintPlan *plan, struct PrismintPlanInfo *info);

// # Safety
// `plan` must be null or a plan handle not yet freed.
void prismint_plan_free(struct PrismintPlan *plan);

// Integrates every element of `mesh` with the emulated kernel `variant` and a
// uniform isotropic material. `out` receives `n_elements * prismint_matrix_len(p)`
// doubles; `flops` (optional) the instrumented flop count. `workers` of 0 uses
// all cores.
//
// # Safety
// Handles must be live; `out` must point to `out_len` writable doubles; `flops`
// must be null or writable.
int32_t prismint_integrate(const struct PrismintProfile *profile,
                           const struct PrismintMesh *mesh,
                           uint32_t p,
                           int32_t variant,
                           double young,
                           double poisson,
                           int32_t precision,
                           size_t workers,
                           double *out,
                           size_t out_len,
                           uint64_t *flops);

// Sequential wide-precision matrix of one element, for checking kernel output.
//
// # Safety
// `mesh` must be live; `out` must point to `out_len` writable doubles.
int32_t prismint_integrate_reference(const struct PrismintMesh *mesh,
                                     size_t element,
                                     uint32_t p,
                                     double young,
                                     double poisson,
                                     double *out,
                                     size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRISMINT_H */
