//! C ABI over the estimation pipeline.
//!
//! Every object crosses the boundary as an opaque handle created by an
//! `irs_*_new`/`irs_*_generate` style call and released with the matching
//! `irs_*_free`. Fallible calls return an [`IrsStatus`]; on failure the
//! message is available from [`irs_last_error`] on the same thread.
//!
//! Complex buffers use [`IrsComplex`]. Channel matrices are laid out
//! subcarrier-major and column-major within a subcarrier, matching
//! `vec(H_k)` stacked over `k`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use irs_chanest::channel::FrequencyChannel;
use irs_chanest::dictionary::RedundantDictionary;
use irs_chanest::harness::{nmse_db, EstimationSetup, ExperimentConfig};
use irs_chanest::recovery::{reconstruct_spatial, SparseEstimate};
use irs_chanest::sounding::MeasurementSet;
use irs_chanest::Error;
use num_complex::Complex64;

/// Result codes shared by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPlan = 3,
    Shape = 4,
    Config = 5,
    DegenerateSnr = 6,
    UndefinedMetric = 7,
    Format = 8,
    Io = 9,
    Denoiser = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Interleaved complex double, layout-compatible with C99 `double _Complex`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IrsComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for IrsComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Scenario, sounding and recovery parameters.
pub struct IrsSetup(EstimationSetup);
/// Per-subcarrier channel matrices.
pub struct IrsChannel(FrequencyChannel);
/// Pilot observations and the measurement matrix.
pub struct IrsMeasurements(MeasurementSet);
/// Redundant steering dictionary.
pub struct IrsDictionary(RedundantDictionary);
/// Sparse SOMP estimate.
pub struct IrsEstimate(SparseEstimate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> IrsStatus {
    match err {
        Error::InvalidPlan(_) => IrsStatus::InvalidPlan,
        Error::Shape(_) => IrsStatus::Shape,
        Error::Config(_) => IrsStatus::Config,
        Error::DegenerateSnr => IrsStatus::DegenerateSnr,
        Error::UndefinedMetric => IrsStatus::UndefinedMetric,
        Error::Format { .. } => IrsStatus::Format,
        Error::Io { .. } => IrsStatus::Io,
        Error::Denoiser(_) => IrsStatus::Denoiser,
    }
}

struct Fail(IrsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> IrsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IrsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            IrsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    // SAFETY: caller passes a live handle or null.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(IrsStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(
            IrsStatus::NullPointer,
            "output pointer is null".into(),
        ));
    }
    // SAFETY: checked non-null; caller guarantees it is writable.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(p) });
    }
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(Fail(IrsStatus::NullPointer, "`buf` is null".into()));
    }
    if len < src.len() {
        return Err(Fail(
            IrsStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    // SAFETY: `buf` has room for `len >= src.len()` elements.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn irs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn irs_status_string(status: IrsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        IrsStatus::Ok => c"ok",
        IrsStatus::NullPointer => c"null pointer",
        IrsStatus::InvalidArgument => c"invalid argument",
        IrsStatus::InvalidPlan => c"invalid sounding plan",
        IrsStatus::Shape => c"shape mismatch",
        IrsStatus::Config => c"invalid configuration",
        IrsStatus::DegenerateSnr => c"degenerate SNR calibration",
        IrsStatus::UndefinedMetric => c"undefined metric",
        IrsStatus::Format => c"malformed file",
        IrsStatus::Io => c"I/O error",
        IrsStatus::Denoiser => c"denoiser failure",
        IrsStatus::BufferTooSmall => c"buffer too small",
        IrsStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Creates a setup from a preset name: `desk`, `paper` or `paper-large`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_setup_preset(
    name: *const c_char,
    out: *mut *mut IrsSetup,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let name = unsafe { deref(name, "name") }?;
        // SAFETY: non-null and NUL-terminated per the contract.
        let name = unsafe { CStr::from_ptr(name) }.to_string_lossy();
        let setup = match name.as_ref() {
            "desk" => EstimationSetup::desk(),
            "paper" => EstimationSetup::paper(),
            "paper-large" => EstimationSetup::paper_large(),
            other => {
                return Err(Fail(
                    IrsStatus::InvalidArgument,
                    format!("unknown preset `{other}`"),
                ))
            }
        };
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, IrsSetup(setup)) }
    })
}

/// Parses a TOML experiment document.
///
/// # Safety
/// `toml` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_setup_from_toml(
    toml: *const c_char,
    out: *mut *mut IrsSetup,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let text = unsafe { deref(toml, "toml") }?;
        // SAFETY: non-null and NUL-terminated per the contract.
        let text = unsafe { CStr::from_ptr(text) }
            .to_str()
            .map_err(|e| Fail(IrsStatus::InvalidArgument, e.to_string()))?;
        let config = ExperimentConfig::from_toml(text)?;
        let setup = config.setup();
        setup.validate()?;
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, IrsSetup(setup)) }
    })
}

/// Overrides the sounding parameters. Pass NaN for `snr_db` to keep it;
/// `+inf` selects noiseless sounding.
///
/// # Safety
/// `setup` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_setup_set_sounding(
    setup: *mut IrsSetup,
    measurements: usize,
    snr_db: f64,
) -> IrsStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let s = unsafe { setup.as_mut() }
            .ok_or_else(|| Fail(IrsStatus::NullPointer, "`setup` is null".into()))?;
        let mut next = s.0.clone();
        next.sounding.measurements = measurements;
        if !snr_db.is_nan() {
            next.sounding.snr_db = snr_db;
        }
        next.validate()?;
        s.0 = next;
        Ok(())
    })
}

/// Overrides the path count `L` and dictionary oversampling `β`.
///
/// # Safety
/// `setup` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_setup_set_model(
    setup: *mut IrsSetup,
    paths: usize,
    beta: usize,
) -> IrsStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let s = unsafe { setup.as_mut() }
            .ok_or_else(|| Fail(IrsStatus::NullPointer, "`setup` is null".into()))?;
        let mut next = s.0.clone();
        next.scenario.paths = paths;
        next.recovery.beta = beta;
        next.validate()?;
        s.0 = next;
        Ok(())
    })
}

/// # Safety
/// `setup` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_setup_free(setup: *mut IrsSetup) {
    // SAFETY: forwarded from the caller.
    unsafe { free(setup) }
}

/// Draws the channel of `trial` under `master_seed`.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_channel_generate(
    setup: *const IrsSetup,
    master_seed: u64,
    trial: u64,
    out: *mut *mut IrsChannel,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let s = unsafe { deref(setup, "setup") }?;
        s.0.scenario.validate()?;
        let (_, h) = s.0.channel(master_seed, trial);
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, IrsChannel(h)) }
    })
}

/// Builds a channel from `k` column-major `rows × cols` matrices.
///
/// # Safety
/// `data` must point to `k * rows * cols` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_channel_from_data(
    data: *const IrsComplex,
    k: usize,
    rows: usize,
    cols: usize,
    out: *mut *mut IrsChannel,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        unsafe { deref(data, "data") }?;
        let n = k
            .checked_mul(rows)
            .and_then(|v| v.checked_mul(cols))
            .ok_or_else(|| Fail(IrsStatus::InvalidArgument, "dimensions overflow".into()))?;
        // SAFETY: caller guarantees `n` readable values.
        let raw = unsafe { std::slice::from_raw_parts(data, n) };
        let values: Vec<Complex64> = raw.iter().map(|z| Complex64::new(z.re, z.im)).collect();
        let h = FrequencyChannel::from_flat(k, rows, cols, &values)?;
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, IrsChannel(h)) }
    })
}

/// Writes `(K, N_IRS, N_UE)`.
///
/// # Safety
/// `channel` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_channel_dims(
    channel: *const IrsChannel,
    k: *mut usize,
    rows: *mut usize,
    cols: *mut usize,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let h = unsafe { deref(channel, "channel") }?;
        if k.is_null() || rows.is_null() || cols.is_null() {
            return Err(Fail(
                IrsStatus::NullPointer,
                "output pointer is null".into(),
            ));
        }
        let (r, c) = h.0.dims();
        // SAFETY: checked non-null.
        unsafe {
            *k = h.0.subcarriers();
            *rows = r;
            *cols = c;
        }
        Ok(())
    })
}

/// Copies the channel entries into `buf`, which must hold `K·rows·cols` values.
///
/// # Safety
/// `channel` must be a live handle; `buf` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn irs_channel_copy(
    channel: *const IrsChannel,
    buf: *mut IrsComplex,
    len: usize,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let h = unsafe { deref(channel, "channel") }?;
        let flat: Vec<IrsComplex> = h.0.flat().into_iter().map(IrsComplex::from).collect();
        // SAFETY: forwarded from the caller.
        unsafe { copy_out(&flat, buf, len) }
    })
}

/// # Safety
/// `channel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_channel_free(channel: *mut IrsChannel) {
    // SAFETY: forwarded from the caller.
    unsafe { free(channel) }
}

/// Sounds `channel` with the plan and noise of `trial`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_sound(
    setup: *const IrsSetup,
    channel: *const IrsChannel,
    master_seed: u64,
    trial: u64,
    out: *mut *mut IrsMeasurements,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let s = unsafe { deref(setup, "setup") }?;
        // SAFETY: forwarded from the caller.
        let h = unsafe { deref(channel, "channel") }?;
        let m = s.0.measure(&h.0, master_seed, trial)?;
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, IrsMeasurements(m)) }
    })
}

/// Writes `M`, `K` and the calibrated noise power.
///
/// # Safety
/// `meas` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_measurements_info(
    meas: *const IrsMeasurements,
    measurements: *mut usize,
    subcarriers: *mut usize,
    noise_var: *mut f64,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let m = unsafe { deref(meas, "meas") }?;
        if measurements.is_null() || subcarriers.is_null() || noise_var.is_null() {
            return Err(Fail(
                IrsStatus::NullPointer,
                "output pointer is null".into(),
            ));
        }
        // SAFETY: checked non-null.
        unsafe {
            *measurements = m.0.measurements();
            *subcarriers = m.0.observations.len();
            *noise_var = m.0.noise_var;
        }
        Ok(())
    })
}

/// Copies the observations, subcarrier-major (`y_0`, then `y_1`, ...).
///
/// # Safety
/// `meas` must be a live handle; `buf` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn irs_measurements_copy(
    meas: *const IrsMeasurements,
    buf: *mut IrsComplex,
    len: usize,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let m = unsafe { deref(meas, "meas") }?;
        let flat: Vec<IrsComplex> =
            m.0.observations
                .iter()
                .flat_map(|y| y.iter().copied().map(IrsComplex::from))
                .collect();
        // SAFETY: forwarded from the caller.
        unsafe { copy_out(&flat, buf, len) }
    })
}

/// # Safety
/// `meas` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_measurements_free(meas: *mut IrsMeasurements) {
    // SAFETY: forwarded from the caller.
    unsafe { free(meas) }
}

/// Builds the redundant dictionary for `setup`.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_dictionary_new(
    setup: *const IrsSetup,
    out: *mut *mut IrsDictionary,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let s = unsafe { deref(setup, "setup") }?;
        let d = s.0.dictionary()?;
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, IrsDictionary(d)) }
    })
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_dictionary_atoms(dict: *const IrsDictionary) -> usize {
    // SAFETY: caller passes a live handle or null.
    unsafe { dict.as_ref() }.map_or(0, |d| d.0.atoms())
}

/// # Safety
/// `dict` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_dictionary_free(dict: *mut IrsDictionary) {
    // SAFETY: forwarded from the caller.
    unsafe { free(dict) }
}

/// Runs SOMP with the setup's stopping rule.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate(
    setup: *const IrsSetup,
    meas: *const IrsMeasurements,
    dict: *const IrsDictionary,
    out: *mut *mut IrsEstimate,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let s = unsafe { deref(setup, "setup") }?;
        // SAFETY: forwarded from the caller.
        let m = unsafe { deref(meas, "meas") }?;
        // SAFETY: forwarded from the caller.
        let d = unsafe { deref(dict, "dict") }?;
        let est = s.0.estimate(&m.0, &d.0)?;
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, IrsEstimate(est)) }
    })
}

/// Support size, or 0 for a null handle.
///
/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_support_len(est: *const IrsEstimate) -> usize {
    // SAFETY: caller passes a live handle or null.
    unsafe { est.as_ref() }.map_or(0, |e| e.0.support.len())
}

/// Copies the selected atom indices in selection order.
///
/// # Safety
/// `est` must be a live handle; `buf` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_support(
    est: *const IrsEstimate,
    buf: *mut usize,
    len: usize,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let e = unsafe { deref(est, "est") }?;
        // SAFETY: forwarded from the caller.
        unsafe { copy_out(&e.0.support, buf, len) }
    })
}

/// Synthesizes `Ĥ_k = A_R X̂_k A_T^H` from the estimate.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_reconstruct(
    est: *const IrsEstimate,
    dict: *const IrsDictionary,
    out: *mut *mut IrsChannel,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let e = unsafe { deref(est, "est") }?;
        // SAFETY: forwarded from the caller.
        let d = unsafe { deref(dict, "dict") }?;
        let h = reconstruct_spatial(&e.0, &d.0)?;
        // SAFETY: forwarded from the caller.
        unsafe { write_out(out, IrsChannel(h)) }
    })
}

/// # Safety
/// `est` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn irs_estimate_free(est: *mut IrsEstimate) {
    // SAFETY: forwarded from the caller.
    unsafe { free(est) }
}

/// NMSE of `estimate` against `truth` in dB.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn irs_nmse_db(
    truth: *const IrsChannel,
    estimate: *const IrsChannel,
    out: *mut f64,
) -> IrsStatus {
    guard(|| {
        // SAFETY: forwarded from the caller.
        let t = unsafe { deref(truth, "truth") }?;
        // SAFETY: forwarded from the caller.
        let e = unsafe { deref(estimate, "estimate") }?;
        if out.is_null() {
            return Err(Fail(IrsStatus::NullPointer, "`out` is null".into()));
        }
        let v = nmse_db(&t.0, &e.0)?;
        // SAFETY: checked non-null.
        unsafe { *out = v };
        Ok(())
    })
}
