#ifndef LAGFLOW_H
#define LAGFLOW_H

/* This file mirrors crates/ffi/src/lib.rs; regenerate with
 * `cbindgen --crate lagflow-ffi --output include/lagflow.h`. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/*
 * Status codes shared by every fallible call.
 */
typedef enum LagStatus {
  LAG_STATUS_OK = 0,
  LAG_STATUS_NULL_POINTER = 1,
  LAG_STATUS_INVALID_ARGUMENT = 2,
  LAG_STATUS_NON_CONVERGENCE = 3,
  LAG_STATUS_SOLVER_ERROR = 4,
  LAG_STATUS_IO = 5,
  LAG_STATUS_PANIC = 6,
} LagStatus;

/*
 * Model selector for scalar solvers.
 */
typedef enum LagScalarKind {
  LAG_SCALAR_KIND_ALLEN_CAHN = 0,
  LAG_SCALAR_KIND_CAHN_HILLIARD = 1,
  LAG_SCALAR_KIND_THIN_FILM = 2,
} LagScalarKind;

/*
 * Time stencil selector.
 */
typedef enum LagScheme {
  LAG_SCHEME_FIRST_ORDER = 0,
  LAG_SCHEME_HALF_STEP = 1,
  LAG_SCHEME_THREE_LEVEL = 2,
} LagScheme;

/* Opaque handles. */
typedef struct LagGrid LagGrid;
typedef struct LagField LagField;
typedef struct LagScalarSolver LagScalarSolver;
typedef struct LagCoupledSolver LagCoupledSolver;

/*
 * Parameters of the coupled conserved system.
 */
typedef struct LagCoupledParams {
  double eps_u;
  double eps_v;
  double sigma;
  double alpha;
  double beta;
  double gamma;
  double m_u;
  double m_v;
  double s_u;
  double s_v;
} LagCoupledParams;

/*
 * Message of the most recent failure on this thread (empty if none).
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *lag_last_error_message(void);

/*
 * Library version as a static string.
 */
const char *lag_version(void);

LagStatus lag_grid_new(size_t nx, size_t ny, double lx, double ly, LagGrid **out);

void lag_grid_free(LagGrid *grid);

LagStatus lag_field_constant(const LagGrid *grid, double value, LagField **out);

/*
 * Seeded uniform random field on [lo, hi); the counter-based generator
 * makes the result identical across platforms and bindings.
 */
LagStatus lag_field_random(const LagGrid *grid,
                           uint64_t seed,
                           double lo,
                           double hi,
                           bool zero_mean,
                           LagField **out);

LagStatus lag_field_from_values(const LagGrid *grid,
                                const double *values,
                                size_t len,
                                LagField **out);

/*
 * Number of samples held by the field (0 for null).
 */
size_t lag_field_len(const LagField *field);

/*
 * Copies the row-major samples into `out`.
 */
LagStatus lag_field_copy_values(const LagField *field, double *out, size_t len);

void lag_field_free(LagField *field);

/*
 * Creates a fixed-step scalar solver from an initial field. Two-level
 * schemes take their first step with the first-order stencil.
 */
LagStatus lag_scalar_solver_new(LagScalarKind kind,
                                double eps,
                                double mobility,
                                LagScheme scheme,
                                double dt,
                                const LagField *ic,
                                LagScalarSolver **out);

/*
 * Advances `steps` fixed steps. On non-convergence the state is left at the
 * last completed step and LAG_STATUS_NON_CONVERGENCE is returned.
 */
LagStatus lag_scalar_solver_advance(LagScalarSolver *solver, uint64_t steps);

double lag_scalar_solver_time(const LagScalarSolver *solver);

double lag_scalar_solver_eta(const LagScalarSolver *solver);

/*
 * Total free energy of the current state.
 */
double lag_scalar_solver_energy(const LagScalarSolver *solver);

/*
 * Clones the current field into a new handle.
 */
LagStatus lag_scalar_solver_field(const LagScalarSolver *solver, LagField **out);

void lag_scalar_solver_free(LagScalarSolver *solver);

LagStatus lag_coupled_solver_new(LagCoupledParams params,
                                 LagScheme scheme,
                                 double dt,
                                 const LagField *u0,
                                 const LagField *v0,
                                 LagCoupledSolver **out);

LagStatus lag_coupled_solver_advance(LagCoupledSolver *solver, uint64_t steps);

double lag_coupled_solver_time(const LagCoupledSolver *solver);

double lag_coupled_solver_eta(const LagCoupledSolver *solver);

double lag_coupled_solver_energy(const LagCoupledSolver *solver);

/*
 * Clones the current component fields into new handles.
 */
LagStatus lag_coupled_solver_fields(const LagCoupledSolver *solver,
                                    LagField **out_u,
                                    LagField **out_v);

void lag_coupled_solver_free(LagCoupledSolver *solver);

/*
 * Parses a config text and executes it like `lagflow simulate` would,
 * writing outputs under the configured directory.
 */
LagStatus lag_run_config(const char *config_text);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* LAGFLOW_H */
