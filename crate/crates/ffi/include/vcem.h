#ifndef VCEM_H
#define VCEM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum VcemStatus {
  VCEM_STATUS_OK = 0,
  VCEM_STATUS_NULL_POINTER = 1,
  VCEM_STATUS_INVALID_ARGUMENT = 2,
  VCEM_STATUS_CONFIG = 3,
  VCEM_STATUS_RESOURCE_LIMIT = 4,
  VCEM_STATUS_NUMERIC = 5,
  VCEM_STATUS_BUFFER_SIZE = 6,
  VCEM_STATUS_IO = 7,
  VCEM_STATUS_PANIC = 8,
} VcemStatus;

/* Graph-state circuit with sampled coherent errors, stabilizers and noise layout. */
typedef struct VcemProblem VcemProblem;

/* Message for the last failed call on this thread; empty if none. */
const char *vcem_last_error(void);

const char *vcem_version(void);

/* graph: "line:N" or "grid:RxC"; noise: "none", "depol:p=P" or "pauli:m=M,mag=A". */
VcemStatus vcem_problem_new(const char *graph,
                            const char *noise,
                            double coh_mag,
                            uint64_t seed_coh,
                            uint64_t seed_inc,
                            VcemProblem **out);

void vcem_problem_free(VcemProblem *p);

VcemStatus vcem_problem_num_qubits(const VcemProblem *p, size_t *out);

VcemStatus vcem_problem_num_params(const VcemProblem *p, size_t *out);

VcemStatus vcem_problem_epsilons(const VcemProblem *p, double *buf, size_t len);

VcemStatus vcem_cost(const VcemProblem *p, const double *theta, size_t len, double *out);

VcemStatus vcem_gradient(const VcemProblem *p,
                         const double *theta,
                         size_t len,
                         double *value,
                         double *grad);

VcemStatus vcem_delta_cost(const VcemProblem *p, const double *theta, size_t len, double *out);

/* final_cost, iterations and converged may be NULL. */
VcemStatus vcem_optimize(const VcemProblem *p,
                         size_t max_iters,
                         double learning_rate,
                         double grad_tolerance,
                         double *theta_out,
                         size_t len,
                         double *final_cost,
                         size_t *iterations,
                         bool *converged);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* VCEM_H */
