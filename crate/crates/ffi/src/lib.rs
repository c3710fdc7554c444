//! C ABI over the netflip library.
//!
//! Conventions:
//!
//! * Fallible functions return an [`NfStatus`]; outputs go through
//!   pointer arguments that are written only on `NF_STATUS_OK`.
//! * After a failure, [`nf_last_error_message`] describes it. The message
//!   belongs to the calling thread and lives until its next failing call.
//! * Strings returned through `char **` are owned by the caller and must be
//!   released with [`nf_string_free`]. Configs from `nf_config_*` must be
//!   released with [`nf_config_free`].
//! * Panics never cross the boundary; they surface as `NF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use netflip::attack::{packet_rate, simulate, Bandwidth, PrefixConvention};
use netflip::classifier::{classify, probe_pair, SimulatedTimingSource};
use netflip::config::{load_config, RunConfig};
use netflip::dram::bank_collision_probability;
use netflip::exploit::{rsa_modulus_hit_probability, KeyLayout};
use netflip::report::Report;
use netflip::Error;

/// Opaque handle to a validated run configuration.
pub struct NfConfig {
    inner: RunConfig,
}

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Config = 4,
    InvalidInput = 5,
    Io = 6,
    Simulation = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NfStatus {
    match e {
        Error::Parse { .. } | Error::Json(_) => NfStatus::Parse,
        Error::Config { .. } | Error::UnknownFunction(_) => NfStatus::Config,
        Error::InvalidInput(_) => NfStatus::InvalidInput,
        Error::Io(_) => NfStatus::Io,
        Error::Ordering { .. } | Error::Misuse(_) | Error::Timing(_) => NfStatus::Simulation,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (NfStatus, String)>) -> NfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("panic: {msg}"));
            NfStatus::Panic
        }
    }
}

fn lib(e: Error) -> (NfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NfStatus, String) {
    (NfStatus::NullPointer, format!("`{what}` is NULL"))
}

/// # Safety
/// `p` is NULL or a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NfStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NfStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

/// # Safety
/// `out` is NULL or writable.
unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), (NfStatus, String)> {
    let c = CString::new(s).map_err(|_| (NfStatus::InvalidInput, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// # Safety
/// `out` is NULL or writable.
unsafe fn put_config(out: *mut *mut NfConfig, inner: RunConfig) {
    *out = Box::into_raw(Box::new(NfConfig { inner }));
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn nf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the calling thread's last failure, or NULL if none.
#[no_mangle]
pub extern "C" fn nf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` is NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The all-defaults configuration.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nf_config_default(out: *mut *mut NfConfig) -> NfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put_config(out, RunConfig::default());
        Ok(())
    })
}

/// Parses and validates TOML text.
///
/// # Safety
/// `toml` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nf_config_from_toml(
    toml: *const c_char,
    out: *mut *mut NfConfig,
) -> NfStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_config(out, RunConfig::from_toml(text).map_err(lib)?);
        Ok(())
    })
}

/// Reads, parses and validates a TOML file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nf_config_load(path: *const c_char, out: *mut *mut NfConfig) -> NfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_config(out, load_config(Path::new(path)).map_err(lib)?);
        Ok(())
    })
}

/// Releases a config. NULL is ignored.
///
/// # Safety
/// `cfg` is NULL or a config from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_config_free(cfg: *mut NfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Hex SHA-256 of the canonical config.
///
/// # Safety
/// `cfg` is a live config; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nf_config_digest(cfg: *const NfConfig, out: *mut *mut c_char) -> NfStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_string(out, cfg.inner.digest().map_err(lib)?)
    })
}

/// Runs one simulation with `seed` and writes the JSON report, the same one
/// `netflip simulate --json` prints.
///
/// # Safety
/// `cfg` is a live config; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn nf_simulate(
    cfg: *const NfConfig,
    seed: u64,
    out_json: *mut *mut c_char,
) -> NfStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let run = RunConfig {
            seed,
            ..cfg.inner.clone()
        };
        let report = simulate(&run.sim_config(), seed).map_err(lib)?;
        let json = Report::new("simulate", &run, &report)
            .and_then(|r| r.to_json())
            .map_err(lib)?;
        put_string(out_json, json)
    })
}

/// Classifies the configured page policy from simulated probe timings and
/// writes the JSON report.
///
/// # Safety
/// `cfg` is a live config; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn nf_classify(cfg: *const NfConfig, out_json: *mut *mut c_char) -> NfStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let c = &cfg.inner;
        let (a, b) = probe_pair(&c.mapping, &c.geometry).map_err(lib)?;
        let mut src = SimulatedTimingSource::new(
            c.mapping.clone(),
            c.geometry.clone(),
            c.policy.clone(),
            c.timing.clone(),
            c.classifier.probe_gap_ns,
        );
        let verdict = classify(&mut src, a, b, &c.classifier).map_err(lib)?;
        let json = Report::new("classify", c, &verdict)
            .and_then(|r| r.to_json())
            .map_err(lib)?;
        put_string(out_json, json)
    })
}

/// Frames per second for a bandwidth such as `"500Mbit"`. `decimal_prefixes`
/// selects k = 1000 instead of 1024.
///
/// # Safety
/// `bandwidth` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn nf_packet_rate(
    bandwidth: *const c_char,
    frame_bytes: u32,
    decimal_prefixes: bool,
    out: *mut f64,
) -> NfStatus {
    guard(|| {
        let b: Bandwidth = str_arg(bandwidth, "bandwidth")?.parse().map_err(lib)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if frame_bytes == 0 {
            return Err((
                NfStatus::InvalidInput,
                "frame_bytes must be positive".into(),
            ));
        }
        let convention = if decimal_prefixes {
            PrefixConvention::Decimal
        } else {
            PrefixConvention::Binary
        };
        *out = packet_rate(b, frame_bytes, convention);
        Ok(())
    })
}

/// Probability that `k` random addresses do not all fall in distinct banks.
#[no_mangle]
pub extern "C" fn nf_bank_collision_probability(k: u64, banks: u64) -> f64 {
    bank_collision_probability(k, banks)
}

/// Chance that a random flip hits a modulus when `fill_fraction` of memory
/// holds keys of `modulus_bits` plus `framing_bits`.
#[no_mangle]
pub extern "C" fn nf_rsa_modulus_hit_probability(
    fill_fraction: f64,
    modulus_bits: u32,
    framing_bits: u32,
) -> f64 {
    rsa_modulus_hit_probability(
        fill_fraction,
        &KeyLayout {
            modulus_bits,
            framing_bits,
        },
    )
}
