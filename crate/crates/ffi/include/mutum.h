#ifndef MUTUM_H
#define MUTUM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum MutumStatus {
  MUTUM_STATUS_OK = 0,
  MUTUM_STATUS_NULL_POINTER = 1,
  MUTUM_STATUS_INVALID_ARGUMENT = 2,
  MUTUM_STATUS_MALFORMED_COMMAND = 3,
  MUTUM_STATUS_OUT_OF_DOMAIN = 4,
  MUTUM_STATUS_SINGULAR_POINT = 5,
  MUTUM_STATUS_BUFFER_TOO_SMALL = 6,
  MUTUM_STATUS_SIMULATION_FAULT = 7,
  MUTUM_STATUS_INTERNAL = 8,
} MutumStatus;

// Stock robot designs.
typedef enum MutumDesign {
  MUTUM_DESIGN_TOP_PORTS = 0,
  MUTUM_DESIGN_SIDE_PORTS = 1,
  MUTUM_DESIGN_END_PORTS = 2,
} MutumDesign;

// Opaque teleoperation session.
typedef struct MutumSession MutumSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` and returns the
// size needed (including the NUL). Passing a null `buf` just queries the size.
size_t mutum_last_error(char *buf, size_t len);

// Field (T) and row-major gradient (T/m) of a point dipole with moment
// `moment` (A·m²) at `source`, evaluated at `point`. `grad_out` may be null.
enum MutumStatus mutum_dipole_field(const double *moment,
                                    const double *source,
                                    const double *point,
                                    double *b_out,
                                    double *grad_out);

// Torque `m × B` in N·m.
enum MutumStatus mutum_torque(const double *moment, const double *field, double *torque_out);

// Distance travelled per field revolution by a stock design, in metres.
enum MutumStatus mutum_distance_per_revolution(enum MutumDesign design, double *out);

// Melt onset (°C) of a cap with mineral-oil mass fraction `w`, on the
// default melt curve.
enum MutumStatus mutum_melt_onset(double w, double *out);

// Creates a session. `config_json` may be null for defaults, or a JSON
// object with any of `scene`, `design`, `tick_rate`, `substeps`,
// `snapshot_rate`.
enum MutumStatus mutum_session_new(const char *config_json, struct MutumSession **out);

// Releases a session. Null is ignored.
void mutum_session_free(struct MutumSession *session);

// Queues one JSON command; it takes effect at the next tick.
enum MutumStatus mutum_session_submit(struct MutumSession *session, const char *command_json);

// Advances `ticks` control ticks. `snapshots_out` (optional) receives how
// many snapshots fell due.
enum MutumStatus mutum_session_tick(struct MutumSession *session,
                                    uint32_t ticks,
                                    uint32_t *snapshots_out);

// Simulated time in seconds, or NaN for a null handle.
double mutum_session_time(const struct MutumSession *session);

// Writes the current state snapshot as JSON.
enum MutumStatus mutum_session_snapshot(const struct MutumSession *session,
                                        char *buf,
                                        size_t len,
                                        size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MUTUM_H */
