#ifndef HBL_H
#define HBL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum HblGeometry {
  /**
   * `a` is the radius.
   */
  HBL_GEOMETRY_CIRCLE = 0,
  /**
   * `a`, `b` are the semi-axes.
   */
  HBL_GEOMETRY_ELLIPSE = 1,
  HBL_GEOMETRY_KITE = 2,
  HBL_GEOMETRY_SEGMENT = 3,
  HBL_GEOMETRY_PARABOLA = 4,
} HblGeometry;

typedef enum HblOperatorKind {
  HBL_OPERATOR_KIND_SLP = 0,
  HBL_OPERATOR_KIND_DLP = 1,
  HBL_OPERATOR_KIND_ADLP = 2,
  /**
   * `½M + D′ − iηS`.
   */
  HBL_OPERATOR_KIND_CFIE_DIRECT = 3,
  /**
   * `½M + D − iηS`.
   */
  HBL_OPERATOR_KIND_CFIE_INDIRECT = 4,
} HblOperatorKind;

typedef enum HblStatus {
  HBL_STATUS_OK = 0,
  HBL_STATUS_NULL_POINTER = 1,
  HBL_STATUS_INVALID_ARGUMENT = 2,
  HBL_STATUS_DOMAIN = 3,
  HBL_STATUS_CAPACITY = 4,
  HBL_STATUS_SINGULARITY = 5,
  HBL_STATUS_PRECISION = 6,
  HBL_STATUS_NUMERICAL = 7,
  HBL_STATUS_UNSUPPORTED = 8,
  HBL_STATUS_IO = 9,
  HBL_STATUS_PANIC = 10,
} HblStatus;

/**
 * Panel mesh handle.
 */
typedef struct HblMesh HblMesh;

/**
 * Galerkin matrix handle.
 */
typedef struct HblOperator HblOperator;

typedef struct HblComplex {
  double re;
  double im;
} HblComplex;

/**
 * Field-of-values summary in the mass-weighted metric.
 */
typedef struct HblRange {
  double norm;
  double dist;
  double cos_beta;
  double beta;
  double gamma_beta;
  bool contains_origin;
} HblRange;

typedef struct HblSolveResult {
  size_t dof;
  size_t iterations;
  bool converged;
  double final_residual;
  /**
   * NaN unless the mesh is a circle.
   */
  double mie_relative_error;
} HblSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *hbl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hbl_version(void);

/**
 * Mesh with exactly `dof` equal-arc-length panels.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HblStatus hbl_mesh_new(enum HblGeometry geometry,
                            double a,
                            double b,
                            size_t dof,
                            struct HblMesh **out);

/**
 * Mesh with `h ≤ 2π/(ppw·k)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum HblStatus hbl_mesh_for_wavenumber(enum HblGeometry geometry,
                                       double a,
                                       double b,
                                       double k,
                                       double ppw,
                                       struct HblMesh **out);

/**
 * Number of panels, or 0 for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t hbl_mesh_dof(const struct HblMesh *mesh);

/**
 * Panel arc length, or NaN for a null handle.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
double hbl_mesh_h(const struct HblMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a handle from this library not yet freed.
 */
void hbl_mesh_free(struct HblMesh *mesh);

/**
 * Assembles one Galerkin matrix. `eta` is ignored for the layer operators.
 *
 * # Safety
 * `mesh` must be a live handle and `out` valid for writes.
 */
enum HblStatus hbl_assemble(const struct HblMesh *mesh,
                            enum HblOperatorKind kind,
                            double k,
                            double eta,
                            struct HblOperator **out);

/**
 * Matrix dimension, or 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t hbl_operator_dof(const struct HblOperator *op);

/**
 * Copies the matrix row-major into `out`, which holds `len` entries.
 *
 * # Safety
 * `op` must be a live handle and `out` valid for `len` writes.
 */
enum HblStatus hbl_operator_copy_matrix(const struct HblOperator *op,
                                        struct HblComplex *out,
                                        size_t len);

/**
 * # Safety
 * `op` must be null or a handle from this library not yet freed.
 */
void hbl_operator_free(struct HblOperator *op);

/**
 * `L²(Γ)` operator norm.
 *
 * # Safety
 * `op` must be a live handle and `out` valid for writes.
 */
enum HblStatus hbl_operator_norm(const struct HblOperator *op, double *out);

/**
 * `‖A⁻¹‖` in `L²(Γ)`.
 *
 * # Safety
 * `op` must be a live handle and `out` valid for writes.
 */
enum HblStatus hbl_operator_inverse_norm(const struct HblOperator *op, double *out);

/**
 * Distance of the numerical range from the origin.
 *
 * # Safety
 * `op` must be a live handle and `out` valid for writes.
 */
enum HblStatus hbl_operator_range(const struct HblOperator *op, struct HblRange *out);

/**
 * Solves the direct CFIE for the plane wave along `(1, 0)` with GMRES.
 * `maxit = 0` means the number of unknowns. `density` may be null;
 * otherwise it receives `dof` coefficients.
 *
 * # Safety
 * `mesh` must be a live handle, `out` valid for writes and `density` null or
 * valid for `dof` writes.
 */
enum HblStatus hbl_solve_plane_wave(const struct HblMesh *mesh,
                                    double k,
                                    double eta,
                                    double tol,
                                    size_t maxit,
                                    struct HblSolveResult *out,
                                    struct HblComplex *density);

/**
 * `H_n^{(1)}(x)` and its derivative.
 *
 * # Safety
 * `value` and `derivative` must be valid for writes.
 */
enum HblStatus hbl_hankel_h1(int64_t n,
                             double x,
                             struct HblComplex *value,
                             struct HblComplex *derivative);

/**
 * Normal derivative of the total field on the sound-soft disc of radius
 * `a` for incidence along `(1, 0)`, at `count` polar angles.
 *
 * # Safety
 * `thetas` must be valid for `count` reads and `out` for `count` writes.
 */
enum HblStatus hbl_mie_normal_derivative(double k,
                                         double a,
                                         const double *thetas,
                                         size_t count,
                                         struct HblComplex *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HBL_H */
