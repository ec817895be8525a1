#ifndef FICKJACOBS_H
#define FICKJACOBS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Boundary conditions available to `fj_evolve`.
 */
typedef enum FjBoundary {
  FJ_BOUNDARY_NO_FLUX = 0,
  FJ_BOUNDARY_DIRICHLET_ZERO = 1,
} FjBoundary;

/*
 Which per-node table of a map to copy.
 */
typedef enum FjMapColumn {
  FJ_MAP_COLUMN_Y = 0,
  FJ_MAP_COLUMN_X = 1,
  FJ_MAP_COLUMN_POTENTIAL = 2,
  FJ_MAP_COLUMN_DRIFT = 3,
} FjMapColumn;

/*
 Normalization of closed-form solutions.
 */
typedef enum FjPrefactor {
  /*
   The printed time-dependent formula.
   */
  FJ_PREFACTOR_EVOLVED = 0,
  /*
   Rescaled so the `t = 0` value equals the initial condition.
   */
  FJ_PREFACTOR_INITIAL = 1,
} FjPrefactor;

/*
 Status codes returned by every fallible function.
 */
typedef enum FjStatus {
  FJ_STATUS_OK = 0,
  FJ_STATUS_NULL_POINTER = 1,
  FJ_STATUS_INVALID_PARAMETER = 2,
  FJ_STATUS_OUT_OF_DOMAIN = 3,
  FJ_STATUS_OUT_OF_RANGE = 4,
  FJ_STATUS_NON_POSITIVE_AREA = 5,
  FJ_STATUS_NON_POSITIVE_DIFFUSION = 6,
  FJ_STATUS_NON_POSITIVE_TIME = 7,
  FJ_STATUS_NEGATIVE_CURVATURE = 8,
  FJ_STATUS_GRID_TOO_SMALL = 9,
  FJ_STATUS_GRID_MISMATCH = 10,
  FJ_STATUS_QUADRATURE_FAILURE = 11,
  FJ_STATUS_CONVERGENCE_FAILURE = 12,
  FJ_STATUS_SINGULAR_SYSTEM = 13,
  FJ_STATUS_INTEGRITY_ERROR = 14,
  FJ_STATUS_BUFFER_TOO_SMALL = 15,
  FJ_STATUS_PANIC = 99,
} FjStatus;

/*
 Opaque eigenbasis of a map.
 */
typedef struct FjBasis FjBasis;

/*
 Opaque diffusion model.
 */
typedef struct FjDiffusion FjDiffusion;

/*
 Opaque transformed problem on a uniform `y` grid.
 */
typedef struct FjMap FjMap;

/*
 Opaque channel geometry.
 */
typedef struct FjProfile FjProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failure on this thread, or null. Valid until the
 next failing call on the same thread.
 */
const char *fj_last_error_message(void);

/*
 Static name of a status code.
 */
const char *fj_status_name(enum FjStatus status);

/*
 Crate version as a static string.
 */
const char *fj_version(void);

enum FjStatus fj_profile_conical(double lambda, struct FjProfile **profile);

enum FjStatus fj_profile_throat(double alpha, double beta, struct FjProfile **profile);

enum FjStatus fj_profile_sinusoidal(double amplitude,
                                    double gamma,
                                    int64_t cell,
                                    struct FjProfile **profile);

enum FjStatus fj_profile_gaussian_area(double a, double b, double c, struct FjProfile **profile);

/*
 Monotone-cubic profile through `len` samples `(x[i], area[i])`.
 */
enum FjStatus fj_profile_tabulated(const double *x,
                                   const double *area,
                                   size_t len,
                                   struct FjProfile **profile);

void fj_profile_free(struct FjProfile *profile);

/*
 Bounds of the profile's domain; infinite ends are reported as ±inf.
 */
enum FjStatus fj_profile_domain(const struct FjProfile *profile, double *lo, double *hi);

enum FjStatus fj_profile_area(const struct FjProfile *profile, double x, double *area);

/*
 `½A″/A − ¼(A′/A)²` at `x`.
 */
enum FjStatus fj_entropic_potential(const struct FjProfile *profile, double x, double *v);

enum FjStatus fj_diffusion_constant(double d0, struct FjDiffusion **model);

/*
 `D = d0 / √(1 + A′²/(4π A))`.
 */
enum FjStatus fj_diffusion_reguera_rubi(double d0, struct FjDiffusion **model);

/*
 `D = d0 · e^{rate·x}`.
 */
enum FjStatus fj_diffusion_exponential(double d0, double rate, struct FjDiffusion **model);

void fj_diffusion_free(struct FjDiffusion *model);

enum FjStatus fj_diffusion_coefficient(const struct FjDiffusion *model,
                                       const struct FjProfile *profile,
                                       double x,
                                       double *d);

/*
 `y(x) = ∫_{x0}^{x} dz/√D(z)`.
 */
enum FjStatus fj_transform_coordinate(const struct FjDiffusion *model,
                                      const struct FjProfile *profile,
                                      double x,
                                      double x0,
                                      double *y);

/*
 Transformed problem on `n_points` uniform `y` nodes covering `[x_lo, x_hi]`.
 */
enum FjStatus fj_map_build(const struct FjDiffusion *model,
                           const struct FjProfile *profile,
                           double x0,
                           double x_lo,
                           double x_hi,
                           size_t n_points,
                           struct FjMap **map);

void fj_map_free(struct FjMap *map);

/*
 Number of nodes, or 0 for a null handle.
 */
size_t fj_map_len(const struct FjMap *map);

/*
 Copies one per-node table into `buffer`, which must hold `fj_map_len` values.
 */
enum FjStatus fj_map_column(const struct FjMap *map,
                            enum FjMapColumn column,
                            double *buffer,
                            size_t len);

/*
 `x(y)` by inverting the map's table.
 */
enum FjStatus fj_map_invert(const struct FjMap *map, double y, double *x);

/*
 Lowest `n_modes` Dirichlet eigenpairs of the map's Schrödinger operator.
 */
enum FjStatus fj_basis_build(const struct FjMap *map, size_t n_modes, struct FjBasis **basis);

void fj_basis_free(struct FjBasis *basis);

size_t fj_basis_n_modes(const struct FjBasis *basis);

enum FjStatus fj_basis_energies(const struct FjBasis *basis, double *buffer, size_t len);

/*
 Mode `k` on the map's nodes, zero at both ends.
 */
enum FjStatus fj_basis_mode(const struct FjBasis *basis, size_t k, double *buffer, size_t len);

/*
 Projects `c0` (sampled on a uniform grid over the map's `x` range) onto
 the basis and writes `C(t)` on the same grid into `c_out`.
 */
enum FjStatus fj_spectral_propagate(const struct FjBasis *basis,
                                    const struct FjMap *map,
                                    const double *c0,
                                    size_t len,
                                    double t,
                                    double *c_out);

enum FjStatus fj_conical_solution(double lambda,
                                  double d0,
                                  double sigma,
                                  double a0,
                                  enum FjPrefactor prefactor,
                                  double x,
                                  double t,
                                  double *c);

enum FjStatus fj_throat_solution(double alpha,
                                 double beta,
                                 double d0,
                                 double sigma,
                                 double a0,
                                 enum FjPrefactor prefactor,
                                 double x,
                                 double t,
                                 double *c);

enum FjStatus fj_sinusoidal_solution(double amplitude,
                                     double gamma,
                                     double d0,
                                     double sigma,
                                     double a0,
                                     enum FjPrefactor prefactor,
                                     double x,
                                     double t,
                                     double *c);

/*
 Oscillator level `n` of the Gaussian-area channel `e^{a x² + b x + c}`.
 */
enum FjStatus fj_gaussian_channel_solution(double a,
                                           double b,
                                           double d0,
                                           size_t n,
                                           enum FjPrefactor prefactor,
                                           double x,
                                           double t,
                                           double *c);

/*
 Evolves `c0`, sampled on `len` uniform nodes over `[x_lo, x_hi]`, to
 `t_final` with the Crank–Nicolson reference solver and writes the final
 state into `c_out`.
 */
enum FjStatus fj_evolve(const struct FjProfile *profile,
                        const struct FjDiffusion *model,
                        double x_lo,
                        double x_hi,
                        const double *c0,
                        size_t len,
                        double dt,
                        double t_final,
                        enum FjBoundary boundary,
                        size_t startup_steps,
                        double *c_out);

/*
 Trapezoid mass of `len` samples on a uniform grid over `[x_lo, x_hi]`.
 */
enum FjStatus fj_total_mass(double x_lo, double x_hi, const double *c, size_t len, double *mass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FICKJACOBS_H */
