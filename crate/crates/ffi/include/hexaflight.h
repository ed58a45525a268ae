#ifndef HEXAFLIGHT_H
#define HEXAFLIGHT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfCommand {
  HF_COMMAND_ARM = 0,
  HF_COMMAND_DISARM = 1,
  /**
   * `param` is the target altitude in meters, 0 for the default.
   */
  HF_COMMAND_TAKEOFF = 2,
  HF_COMMAND_LAND = 3,
  HF_COMMAND_RETURN_TO_LAUNCH = 4,
  HF_COMMAND_MISSION_START = 5,
  HF_COMMAND_FAILSAFE_RESET = 6,
  /**
   * `param` is the flight mode index as carried in SET_MODE.
   */
  HF_COMMAND_SET_MODE = 7,
} HfCommand;

typedef enum HfStatus {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_ARGUMENT = 2,
  HF_STATUS_IO = 3,
  HF_STATUS_CONFIG = 4,
  HF_STATUS_PROTOCOL = 5,
  HF_STATUS_SIMULATION = 6,
  HF_STATUS_BUFFER_TOO_SMALL = 7,
  HF_STATUS_PANIC = 8,
} HfStatus;

/**
 * Encoder and decoder for one channel of the telemetry protocol.
 */
typedef struct HfCodec HfCodec;

/**
 * A running simulation plus a ground-station uplink channel.
 */
typedef struct HfSim HfSim;

typedef struct HfSizingReport {
  double air_density_kgm3;
  double pack_voltage_v;
  double hover_rpm;
  double hover_throttle_fraction;
  double hover_current_a;
  double hover_power_w;
  double flight_time_min;
  double thrust_to_weight;
  double tolerance_fraction;
} HfSizingReport;

typedef struct HfFrameInfo {
  uint8_t seq;
  uint8_t sys_id;
  uint8_t comp_id;
  uint8_t msg_id;
  size_t payload_len;
} HfFrameInfo;

typedef struct HfLinkStats {
  uint64_t frames_ok;
  uint64_t frames_bad_crc;
  uint64_t frames_dropped;
  uint64_t bytes_seen;
} HfLinkStats;

typedef struct HfVehicleState {
  double time_s;
  double position_ned_m[3];
  double velocity_ned_mps[3];
  /**
   * w, x, y, z; body to NED.
   */
  double attitude_q[4];
  double estimate_position_ned_m[3];
  double battery_voltage_v;
  /**
   * Flight mode index as carried in HEARTBEAT.
   */
  uint32_t mode;
} HfVehicleState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hf_version(void);

/**
 * Length in bytes of the last error message on this thread, without the NUL.
 */
size_t hf_last_error_length(void);

/**
 * Copies the last error message on this thread into `buf` with a trailing
 * NUL, truncating to fit. Returns the number of bytes written excluding the NUL.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null when `cap` is 0.
 */
size_t hf_last_error_message(char *buf, size_t cap);

/**
 * Standard-atmosphere density at `altitude_m` with a temperature offset.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HfStatus hf_air_density(double altitude_m, double temperature_offset_k, double *out);

/**
 * Sizing report for the reference vehicle.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HfStatus hf_sizing_reference(struct HfSizingReport *out);

/**
 * Sizing report for a TOML config with `[environment]` and `[powertrain]` tables.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HfStatus hf_sizing_from_file(const char *path, struct HfSizingReport *out);

/**
 * Codec for the shipped dialect, sending as `sys_id`/`comp_id`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HfStatus hf_codec_new(uint8_t sys_id, uint8_t comp_id, struct HfCodec **out);

/**
 * Codec for a dialect file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HfStatus hf_codec_from_dialect(const char *path,
                                    uint8_t sys_id,
                                    uint8_t comp_id,
                                    struct HfCodec **out);

/**
 * # Safety
 * `codec` must come from `hf_codec_new` or `hf_codec_from_dialect`, or be null.
 */
void hf_codec_free(struct HfCodec *codec);

/**
 * Encodes message `name` with the listed numeric fields set and the rest
 * zeroed. `written` receives the frame length even when the buffer is too small.
 *
 * # Safety
 * `fields` and `values` must hold `count` entries; `buf` must hold `cap` bytes.
 */
enum HfStatus hf_codec_encode(struct HfCodec *codec,
                              const char *name,
                              const char *const *fields,
                              const double *values,
                              size_t count,
                              uint8_t *buf,
                              size_t cap,
                              size_t *written);

/**
 * Feeds received bytes; complete frames queue for `hf_codec_next_frame`.
 *
 * # Safety
 * `data` must hold `len` bytes; `ready` may be null.
 */
enum HfStatus hf_codec_feed(struct HfCodec *codec, const uint8_t *data, size_t len, size_t *ready);

/**
 * Pops the oldest decoded frame. `got` is set to 0 when none is queued.
 * The payload is copied into `payload`; a too-small buffer leaves the frame queued.
 *
 * # Safety
 * `info` and `got` must be valid; `payload` must hold `cap` bytes.
 */
enum HfStatus hf_codec_next_frame(struct HfCodec *codec,
                                  struct HfFrameInfo *info,
                                  uint8_t *payload,
                                  size_t cap,
                                  uint8_t *got);

/**
 * Reads one numeric field (or array element `index`) from a payload.
 *
 * # Safety
 * `payload` must hold `len` bytes; `field` must be NUL-terminated; `out` valid.
 */
enum HfStatus hf_codec_field(const struct HfCodec *codec,
                             uint8_t msg_id,
                             const uint8_t *payload,
                             size_t len,
                             const char *field,
                             size_t index,
                             double *out);

/**
 * Decoder counters: good frames, CRC failures and sequence-gap drops.
 *
 * # Safety
 * `codec` and `out` must be valid.
 */
enum HfStatus hf_codec_stats(const struct HfCodec *codec, struct HfLinkStats *out);

/**
 * Simulation from a scenario file. `seed` overrides the scenario seed when non-null.
 *
 * # Safety
 * `path` must be NUL-terminated; `seed` null or valid; `out` valid.
 */
enum HfStatus hf_sim_from_file(const char *path, const uint64_t *seed, struct HfSim **out);

/**
 * Simulation from scenario TOML text.
 *
 * # Safety
 * `toml` must be NUL-terminated; `seed` null or valid; `out` valid.
 */
enum HfStatus hf_sim_from_toml(const char *toml, const uint64_t *seed, struct HfSim **out);

/**
 * # Safety
 * `sim` must come from `hf_sim_from_file` or `hf_sim_from_toml`, or be null.
 */
void hf_sim_free(struct HfSim *sim);

/**
 * Advances simulated time to `t_s`.
 *
 * # Safety
 * `sim` must be valid.
 */
enum HfStatus hf_sim_run_until(struct HfSim *sim, double t_s);

/**
 * Sends an operator command over the simulated uplink.
 *
 * # Safety
 * `sim` must be valid.
 */
enum HfStatus hf_sim_command(struct HfSim *sim, enum HfCommand command, double param);

/**
 * Sends raw protocol bytes over the simulated uplink.
 *
 * # Safety
 * `sim` must be valid; `data` must hold `len` bytes.
 */
enum HfStatus hf_sim_inject(struct HfSim *sim, const uint8_t *data, size_t len);

/**
 * Truth and estimate snapshot.
 *
 * # Safety
 * `sim` and `out` must be valid.
 */
enum HfStatus hf_sim_state(const struct HfSim *sim, struct HfVehicleState *out);

/**
 * Writes session.tlog, truth.csv and events.log for the run so far.
 *
 * # Safety
 * `sim` must be valid; `dir` NUL-terminated.
 */
enum HfStatus hf_sim_write_outputs(const struct HfSim *sim, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEXAFLIGHT_H */
