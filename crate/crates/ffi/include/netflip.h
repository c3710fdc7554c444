#ifndef NETFLIP_H
#define NETFLIP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call.
 */
typedef enum NfStatus {
  NF_STATUS_OK = 0,
  NF_STATUS_NULL_POINTER = 1,
  NF_STATUS_INVALID_UTF8 = 2,
  NF_STATUS_PARSE = 3,
  NF_STATUS_CONFIG = 4,
  NF_STATUS_INVALID_INPUT = 5,
  NF_STATUS_IO = 6,
  NF_STATUS_SIMULATION = 7,
  NF_STATUS_PANIC = 8,
} NfStatus;

/**
 * Opaque handle to a validated run configuration.
 */
typedef struct NfConfig NfConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *nf_version(void);

/**
 * Message of the calling thread's last failure, or NULL if none.
 */
const char *nf_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` is NULL or a string from this library not yet freed.
 */
void nf_string_free(char *s);

/**
 * The all-defaults configuration.
 *
 * # Safety
 * `out` is writable.
 */
enum NfStatus nf_config_default(struct NfConfig **out);

/**
 * Parses and validates TOML text.
 *
 * # Safety
 * `toml` is a NUL-terminated string; `out` is writable.
 */
enum NfStatus nf_config_from_toml(const char *toml, struct NfConfig **out);

/**
 * Reads, parses and validates a TOML file.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum NfStatus nf_config_load(const char *path, struct NfConfig **out);

/**
 * Releases a config. NULL is ignored.
 *
 * # Safety
 * `cfg` is NULL or a config from this library not yet freed.
 */
void nf_config_free(struct NfConfig *cfg);

/**
 * Hex SHA-256 of the canonical config.
 *
 * # Safety
 * `cfg` is a live config; `out` is writable.
 */
enum NfStatus nf_config_digest(const struct NfConfig *cfg, char **out);

/**
 * Runs one simulation with `seed` and writes the JSON report, the same one
 * `netflip simulate --json` prints.
 *
 * # Safety
 * `cfg` is a live config; `out_json` is writable.
 */
enum NfStatus nf_simulate(const struct NfConfig *cfg, uint64_t seed, char **out_json);

/**
 * Classifies the configured page policy from simulated probe timings and
 * writes the JSON report.
 *
 * # Safety
 * `cfg` is a live config; `out_json` is writable.
 */
enum NfStatus nf_classify(const struct NfConfig *cfg, char **out_json);

/**
 * Frames per second for a bandwidth such as `"500Mbit"`. `decimal_prefixes`
 * selects k = 1000 instead of 1024.
 *
 * # Safety
 * `bandwidth` is a NUL-terminated string; `out` is writable.
 */
enum NfStatus nf_packet_rate(const char *bandwidth,
                             uint32_t frame_bytes,
                             bool decimal_prefixes,
                             double *out);

/**
 * Probability that `k` random addresses do not all fall in distinct banks.
 */
double nf_bank_collision_probability(uint64_t k, uint64_t banks);

/**
 * Chance that a random flip hits a modulus when `fill_fraction` of memory
 * holds keys of `modulus_bits` plus `framing_bits`.
 */
double nf_rsa_modulus_hit_probability(double fill_fraction,
                                      uint32_t modulus_bits,
                                      uint32_t framing_bits);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETFLIP_H */
