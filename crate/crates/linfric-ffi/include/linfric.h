/* C ABI for the linfric frictional-contact kernels. */

#ifndef LINFRIC_H
#define LINFRIC_H

/* Generated by cbindgen from linfric-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Re-project the tangential force into the end-of-step tangent plane.
#define LINFRIC_CORRECTION_PROJECTION 1

// Rotate the tangential force by the mean particle spin about the normal.
#define LINFRIC_CORRECTION_TWIRL 2

// Outcome of a call. Zero is success; everything else leaves outputs
// untouched and records a message retrievable with `linfric_last_error`.
typedef enum LinfricStatus {
  // The call succeeded.
  LINFRIC_STATUS_OK = 0,
  // A required pointer argument was null.
  LINFRIC_STATUS_NULL_ARG = 1,
  // A parameter or state value violated its domain (non-finite input,
  // stiffness ≤ 0, non-unit normal, force outside the friction limit, ...).
  LINFRIC_STATUS_INVALID_PARAMS = 2,
  // Step inputs contradict each other.
  LINFRIC_STATUS_INCONSISTENT_KINEMATICS = 3,
  // A numerical consistency check failed inside the kernel.
  LINFRIC_STATUS_NUMERICAL = 4,
  // The core panicked; the handle is unchanged but the incident should be
  // reported as a bug.
  LINFRIC_STATUS_PANIC = 5,
} LinfricStatus;

// Opaque handle to one persistent contact.
typedef struct LinfricContact LinfricContact;

// Material/contact parameters. Use `linfric_params_default` unless a custom
// precision tolerance `eps` is required.
typedef struct LinfricParams {
  // Normal stiffness (force/length), > 0.
  double kn;
  // Tangential stiffness (force/length), > 0.
  double kt;
  // Friction coefficient, > 0.
  double mu;
  // Viscous contact damping (force·time/length), ≥ 0; 0 disables damping.
  double nu;
  // Relative precision tolerance for limit bands and branch cuts, > 0.
  double eps;
} LinfricParams;

// Movement inputs for one step at a contact between particles p and q.
//
// `r_p`/`r_q` are contact vectors (contact point minus particle center) and
// `n` is the unit contact normal pointing from p toward q. For a scripted
// relative movement, zero everything except `du_q` and `n`.
typedef struct LinfricKinematics {
  // Translation of particle p over the step.
  double du_p[3];
  // Translation of particle q over the step.
  double du_q[3];
  // Rotation vector of particle p over the step (radians).
  double dtheta_p[3];
  // Rotation vector of particle q over the step (radians).
  double dtheta_q[3];
  // Contact vector of p.
  double r_p[3];
  // Contact vector of q.
  double r_q[3];
  // Unit contact normal, p toward q.
  double n[3];
} LinfricKinematics;

// Everything one step reports. Angles are radians; optional fields are NaN
// when the step did not take the corresponding branch.
typedef struct LinfricResult {
  // Total force exerted on particle p (normal + tangential + damping).
  double force_total[3];
  // Normal force magnitude at step end.
  double fn_end;
  // Tangential force on p at step end.
  double ft_end[3];
  // Whether frictional sliding occurred during the step.
  bool slid;
  // Fraction of the step consumed before first touch (fresh contacts), or NaN.
  double alpha_0;
  // Fraction of the step at which sliding commenced, or NaN.
  double alpha_s;
  // Angle between the onset force and the sliding direction, or NaN.
  double theta_t;
  // Final angle from the sliding direction, or NaN.
  double theta_end;
  // Tangential work increment.
  double dwt;
  // Reversible part of the tangential work increment.
  double dwt_rev;
  // Dissipated part of the tangential work increment (≥ −eps·|dwt|).
  double dwt_irrev;
  // Change of stored normal elastic energy.
  double dwn;
} LinfricResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on the calling thread, NUL-terminated.
// The pointer stays valid until the next failing call on this thread. Never
// null; the string is empty when no failure has been recorded.
const char *linfric_last_error(void);

// Library version as a static NUL-terminated string (e.g. "0.1.0").
const char *linfric_version(void);

// Parameters with the library's default precision tolerance.
struct LinfricParams linfric_params_default(double kn, double kt, double mu, double nu);

// Create an untouched contact with the given unit normal (pointer to three
// doubles, p toward q) and store the handle in `*out`.
//
// # Safety
// `normal` must point to three readable doubles and `out` to a writable
// pointer slot.
enum LinfricStatus linfric_contact_new(const double *normal, struct LinfricContact **out);

// Duplicate a contact, state and work ledger included.
//
// # Safety
// `handle` must be a live handle from this library; `out` must be writable.
enum LinfricStatus linfric_contact_clone(const struct LinfricContact *handle,
                                         struct LinfricContact **out);

// Release a handle. Null is ignored. The handle must not be used afterwards.
//
// # Safety
// `handle` must be null or a live handle from this library, freed only once.
void linfric_contact_free(struct LinfricContact *handle);

// Reset a contact to the untouched state with a new unit normal.
//
// # Safety
// `handle` must be a live handle; `normal` must point to three doubles.
enum LinfricStatus linfric_contact_reset(struct LinfricContact *handle, const double *normal);

// Put a contact into a loaded state: overlap `zeta` and tangential force
// `ft` (pointer to three doubles, in the tangent plane, within the friction
// limit for `zeta`). The stored elastic energies are initialized to match.
//
// # Safety
// `handle` must be a live handle; `params` and `ft` must be readable.
enum LinfricStatus linfric_contact_load(struct LinfricContact *handle,
                                        const struct LinfricParams *params,
                                        double zeta,
                                        const double *ft);

// Read the current overlap; ≤ 0 means not touching.
//
// # Safety
// `handle` must be a live handle; `out` must be writable.
enum LinfricStatus linfric_contact_zeta(const struct LinfricContact *handle, double *out);

// Read the current tangential force into three doubles.
//
// # Safety
// `handle` must be a live handle; `out` must point to three writable doubles.
enum LinfricStatus linfric_contact_tangential_force(const struct LinfricContact *handle,
                                                    double *out);

// Read the current contact normal into three doubles.
//
// # Safety
// `handle` must be a live handle; `out` must point to three writable doubles.
enum LinfricStatus linfric_contact_normal(const struct LinfricContact *handle, double *out);

// Whether the last update ended in frictional sliding.
//
// # Safety
// `handle` must be a live handle; `out` must be writable.
enum LinfricStatus linfric_contact_is_sliding(const struct LinfricContact *handle, bool *out);

// Read the accumulated work ledger. Any output pointer may be null to skip
// that value: `wn` stored normal energy, `wt_rev` stored tangential energy,
// `wt_irrev` total dissipated tangential work.
//
// # Safety
// `handle` must be a live handle; non-null outputs must be writable.
enum LinfricStatus linfric_contact_work(const struct LinfricContact *handle,
                                        double *wn,
                                        double *wt_rev,
                                        double *wt_irrev);

// Advance a contact by one step with the refined kernel.
//
// `zeta_end` is the authoritative end-of-step overlap, `corrections` is a
// bitmask of `LINFRIC_CORRECTION_*` values, `dt` is the step time (≤ 0 or
// NaN skips damping). On success the handle state advances and `*result`
// (when non-null) receives the step report; on failure both are untouched.
//
// # Safety
// `handle` must be a live handle; `params` and `kin` must be readable;
// `result` must be null or writable.
enum LinfricStatus linfric_update(struct LinfricContact *handle,
                                  const struct LinfricParams *params,
                                  const struct LinfricKinematics *kin,
                                  double zeta_end,
                                  uint32_t corrections,
                                  double dt,
                                  struct LinfricResult *result);

// Advance a contact by one step with the conventional single-trial kernel
// (same contract as `linfric_update`).
//
// # Safety
// Same requirements as `linfric_update`.
enum LinfricStatus linfric_update_conventional(struct LinfricContact *handle,
                                               const struct LinfricParams *params,
                                               const struct LinfricKinematics *kin,
                                               double zeta_end,
                                               uint32_t corrections,
                                               double dt,
                                               struct LinfricResult *result);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LINFRIC_H */
