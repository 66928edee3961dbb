//! C ABI over the rftrigger pipeline.
//!
//! Every function returns an [`RftStatus`]; on failure the message is kept
//! per thread and read with [`rft_last_error_message`]. Cubes and score
//! streams cross the boundary as opaque handles that the caller frees.
//! Array outputs follow one convention: the function always stores the
//! required element count, and writes the data only when the supplied
//! capacity suffices (otherwise it returns `RFT_STATUS_BUFFER_TOO_SMALL`).

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use rftrigger::datacube::{bpm_demux, bpm_mux, load_cube, save_cube, ChannelKind, IQCube};
use rftrigger::envelope::DistanceVector;
use rftrigger::fidelity::{dfd, dfd_standardized, dtw_values, Curve};
use rftrigger::motiondetect::{
    detect_intervals_fixed, detect_intervals_pbc, detect_intervals_vw, Mdi, StaLtaConfig,
};
use rftrigger::rfrep::range_doppler_map;
use rftrigger::seqdecode::{
    best_path_decode, run_triggers, Mechanism, ScoreStream, TriggerConfig, TriggerMode,
};
use rftrigger::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RftStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    ShapeMismatch = 3,
    Format = 4,
    Io = 5,
    Domain = 6,
    Numerical = 7,
    Config = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque IQ data cube.
pub struct RftCube(IQCube);

/// Opaque per-step class posterior stream.
pub struct RftScoreStream(ScoreStream);

/// Inclusive step interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RftInterval {
    pub start_step: usize,
    pub end_step: usize,
}

/// STA/LTA thresholds in steps.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RftStaLta {
    pub t1_steps: usize,
    pub t2_steps: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub min_steps: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RftDetector {
    Vw = 0,
    Fixed = 1,
    Pbc = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RftTriggerMode {
    Single = 0,
    Double = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RftMechanism {
    HighThreshold = 0,
    Dwell = 1,
}

/// Trigger parameters; `trigger_class` is a NUL-terminated label.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RftTriggerConfig {
    pub trigger_class: *const c_char,
    pub gamma: f64,
    pub gamma_low: f64,
    pub dwell_fraction: f64,
    pub dwell_requires_classification: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RftTriggerEvent {
    pub interval: RftInterval,
    pub fire_step: usize,
    pub accumulated_score: f64,
    pub mechanism: RftMechanism,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RftStatus {
    match e {
        Error::Format { .. } | Error::Json(_) => RftStatus::Format,
        Error::Io { .. } => RftStatus::Io,
        Error::InvalidInput(_) => RftStatus::InvalidInput,
        Error::ShapeMismatch(_) => RftStatus::ShapeMismatch,
        Error::Domain(_) => RftStatus::Domain,
        Error::Numerical(_) => RftStatus::Numerical,
        Error::Config(_) => RftStatus::Config,
    }
}

/// Failure carried out of a call body.
struct Fail(RftStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RftStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RftStatus::InvalidInput, msg.into())
}

/// Runs `f`, clears the error slot on success and records it on failure.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RftStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RftStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RftStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { slice::from_raw_parts(p, n) })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| invalid("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn emit<T: Copy>(
    data: &[T],
    out: *mut T,
    capacity: usize,
    out_len: *mut usize,
) -> Result<(), Fail> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    unsafe { *out_len = data.len() };
    if data.len() > capacity {
        return Err(Fail(
            RftStatus::BufferTooSmall,
            format!("need {} elements, capacity is {capacity}", data.len()),
        ));
    }
    if !data.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { ptr::copy_nonoverlapping(data.as_ptr(), out, data.len()) };
    }
    Ok(())
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `capacity`. Returns the full message length without the
/// NUL; 0 when the last call succeeded.
#[no_mangle]
pub unsafe extern "C" fn rft_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && capacity > 0 {
                unsafe { *buf = 0 };
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Loads an RFC1 cube file.
#[no_mangle]
pub unsafe extern "C" fn rft_cube_load(path: *const c_char, out: *mut *mut RftCube) -> RftStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        let cube = load_cube(path)?;
        unsafe { store(out, RftCube(cube)) }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rft_cube_save(cube: *const RftCube, path: *const c_char) -> RftStatus {
    guard(|| {
        let cube = unsafe { handle(cube, "cube") }?;
        let path = unsafe { path_arg(path) }?;
        Ok(save_cube(&cube.0, path)?)
    })
}

/// Releases a cube; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rft_cube_free(cube: *mut RftCube) {
    if !cube.is_null() {
        drop(unsafe { Box::from_raw(cube) });
    }
}

/// Fast-time samples, slow-time pulses, channels and whether the channels
/// are virtual (demultiplexed).
#[no_mangle]
pub unsafe extern "C" fn rft_cube_shape(
    cube: *const RftCube,
    n_fast: *mut usize,
    n_slow: *mut usize,
    n_chan: *mut usize,
    is_virtual: *mut bool,
) -> RftStatus {
    guard(|| {
        let c = &unsafe { handle(cube, "cube") }?.0;
        if n_fast.is_null() || n_slow.is_null() || n_chan.is_null() || is_virtual.is_null() {
            return Err(null("shape output"));
        }
        unsafe {
            *n_fast = c.n_fast();
            *n_slow = c.n_slow();
            *n_chan = c.n_chan();
            *is_virtual = c.kind() == ChannelKind::Virtual;
        }
        Ok(())
    })
}

/// BPM demultiplexing of a physical cube into a new virtual cube.
#[no_mangle]
pub unsafe extern "C" fn rft_cube_demux(cube: *const RftCube, out: *mut *mut RftCube) -> RftStatus {
    guard(|| {
        let c = &unsafe { handle(cube, "cube") }?.0;
        let v = bpm_demux(c)?;
        unsafe { store(out, RftCube(v)) }
    })
}

/// BPM multiplexing of a virtual cube into a new physical cube.
#[no_mangle]
pub unsafe extern "C" fn rft_cube_mux(cube: *const RftCube, out: *mut *mut RftCube) -> RftStatus {
    guard(|| {
        let c = &unsafe { handle(cube, "cube") }?.0;
        let p = bpm_mux(c)?;
        unsafe { store(out, RftCube(p)) }
    })
}

/// Linear range-Doppler magnitude of one CPI and channel, row-major
/// `[range_bin][doppler_bin]` with zero Doppler at column `n_doppler / 2`.
#[no_mangle]
pub unsafe extern "C" fn rft_cube_range_doppler(
    cube: *const RftCube,
    cpi_index: usize,
    channel: usize,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
    n_range: *mut usize,
    n_doppler: *mut usize,
) -> RftStatus {
    guard(|| {
        let c = &unsafe { handle(cube, "cube") }?.0;
        if n_range.is_null() || n_doppler.is_null() {
            return Err(null("frame shape output"));
        }
        let frame = range_doppler_map(c, cpi_index, channel)?;
        unsafe {
            *n_range = frame.n_range();
            *n_doppler = frame.n_doppler();
            emit(frame.magnitude.as_slice(), out, capacity, out_len)
        }
    })
}

/// Anchored DTW between two value sequences; infinity when either is empty.
#[no_mangle]
pub unsafe extern "C" fn rft_dtw(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    out: *mut f64,
) -> RftStatus {
    guard(|| {
        let a = unsafe { input(a, n_a, "a") }?;
        let b = unsafe { input(b, n_b, "b") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = dtw_values(a, b) };
        Ok(())
    })
}

unsafe fn curve(t: *const f64, f: *const f64, n: usize) -> Result<Curve, Fail> {
    let t = unsafe { input(t, n, "times") }?;
    let f = unsafe { input(f, n, "values") }?;
    Ok(Curve::new(
        t.iter().copied().zip(f.iter().copied()).collect(),
    )?)
}

/// Discrete Fréchet distance between curves `(t_a, f_a)` and `(t_b, f_b)`;
/// `standardized` rescales both axes jointly before measuring.
#[no_mangle]
pub unsafe extern "C" fn rft_dfd(
    t_a: *const f64,
    f_a: *const f64,
    n_a: usize,
    t_b: *const f64,
    f_b: *const f64,
    n_b: usize,
    standardized: bool,
    out: *mut f64,
) -> RftStatus {
    guard(|| {
        let a = unsafe { curve(t_a, f_a, n_a) }?;
        let b = unsafe { curve(t_b, f_b, n_b) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = if standardized {
            dfd_standardized(&a, &b)
        } else {
            dfd(&a, &b)
        };
        unsafe { *out = d };
        Ok(())
    })
}

/// Motion intervals of a distance vector. `fixed_window_steps` is used by
/// the fixed-window detector and `pbc_threshold` by the threshold-crossing
/// one; the vector is max-normalized first.
#[no_mangle]
pub unsafe extern "C" fn rft_detect_motion(
    values: *const f64,
    n: usize,
    detector: RftDetector,
    sta_lta: *const RftStaLta,
    fixed_window_steps: usize,
    pbc_threshold: f64,
    out: *mut RftInterval,
    capacity: usize,
    out_len: *mut usize,
) -> RftStatus {
    guard(|| {
        let v = unsafe { input(values, n, "values") }?;
        let p = unsafe { handle(sta_lta, "sta_lta") }?;
        let cfg = StaLtaConfig {
            t1_steps: p.t1_steps,
            t2_steps: p.t2_steps,
            sigma1: p.sigma1,
            sigma2: p.sigma2,
            sigma3: p.sigma3,
            min_steps: p.min_steps,
        };
        let dv = DistanceVector::new(v.to_vec(), 1.0)?;
        let det = match detector {
            RftDetector::Vw => detect_intervals_vw(&dv, &cfg)?,
            RftDetector::Fixed => detect_intervals_fixed(&dv, fixed_window_steps as f64, &cfg)?,
            RftDetector::Pbc => detect_intervals_pbc(&dv, pbc_threshold)?,
        };
        let iv: Vec<RftInterval> = det
            .mdis
            .iter()
            .map(|m| RftInterval {
                start_step: m.start_step,
                end_step: m.end_step,
            })
            .collect();
        unsafe { emit(&iv, out, capacity, out_len) }
    })
}

/// Builds a score stream from row-major `n_steps x n_labels` posteriors.
/// `labels[0]` must be `"blank"`; each row must sum to 1.
#[no_mangle]
pub unsafe extern "C" fn rft_scores_new(
    probs: *const f64,
    n_steps: usize,
    n_labels: usize,
    labels: *const *const c_char,
    step_s: f64,
    out: *mut *mut RftScoreStream,
) -> RftStatus {
    guard(|| {
        let total = n_steps
            .checked_mul(n_labels)
            .ok_or_else(|| invalid("posterior size overflows"))?;
        let p = unsafe { input(probs, total, "probs") }?;
        let names = unsafe { input(labels, n_labels, "labels") }?;
        let labels = names
            .iter()
            .map(|&s| {
                if s.is_null() {
                    return Err(null("label"));
                }
                unsafe { CStr::from_ptr(s) }
                    .to_str()
                    .map(str::to_owned)
                    .map_err(|_| invalid("label is not UTF-8"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let rows = if n_labels == 0 {
            Vec::new()
        } else {
            p.chunks(n_labels).map(<[f64]>::to_vec).collect()
        };
        let stream = ScoreStream::new(rows, labels, step_s)?;
        unsafe { store(out, RftScoreStream(stream)) }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rft_scores_free(stream: *mut RftScoreStream) {
    if !stream.is_null() {
        drop(unsafe { Box::from_raw(stream) });
    }
}

/// Greedy best-path decoding as label indices (blank is index 0 and never
/// appears in the output).
#[no_mangle]
pub unsafe extern "C" fn rft_best_path_decode(
    stream: *const RftScoreStream,
    out: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> RftStatus {
    guard(|| {
        let s = &unsafe { handle(stream, "stream") }?.0;
        let idx: Vec<usize> = best_path_decode(s)
            .iter()
            .map(|l| s.class_index(l).unwrap_or(0))
            .collect();
        unsafe { emit(&idx, out, capacity, out_len) }
    })
}

/// Cumulative-score trigger detection over `intervals`.
#[no_mangle]
pub unsafe extern "C" fn rft_trigger(
    stream: *const RftScoreStream,
    intervals: *const RftInterval,
    n_intervals: usize,
    config: *const RftTriggerConfig,
    mode: RftTriggerMode,
    out: *mut RftTriggerEvent,
    capacity: usize,
    out_len: *mut usize,
) -> RftStatus {
    guard(|| {
        let s = &unsafe { handle(stream, "stream") }?.0;
        let iv = unsafe { input(intervals, n_intervals, "intervals") }?;
        let c = unsafe { handle(config, "config") }?;
        if c.trigger_class.is_null() {
            return Err(null("trigger_class"));
        }
        let class = unsafe { CStr::from_ptr(c.trigger_class) }
            .to_str()
            .map_err(|_| invalid("trigger_class is not UTF-8"))?;
        let cfg = TriggerConfig {
            trigger_class: class.to_owned(),
            gamma: c.gamma,
            gamma_low: c.gamma_low,
            dwell_fraction: c.dwell_fraction,
            dwell_requires_classification: c.dwell_requires_classification,
        };
        cfg.validate()?;
        if let Some(bad) = iv.iter().find(|i| i.start_step > i.end_step) {
            return Err(invalid(format!(
                "interval {}..={} is reversed",
                bad.start_step, bad.end_step
            )));
        }
        let mdis: Vec<Mdi> = iv
            .iter()
            .map(|i| Mdi::new(i.start_step, i.end_step, s.step_s()))
            .collect();
        let mode = match mode {
            RftTriggerMode::Single => TriggerMode::Single,
            RftTriggerMode::Double => TriggerMode::Double,
        };
        let events: Vec<RftTriggerEvent> = run_triggers(s, &mdis, &cfg, mode)?
            .iter()
            .map(|e| RftTriggerEvent {
                interval: RftInterval {
                    start_step: e.mdi.start_step,
                    end_step: e.mdi.end_step,
                },
                fire_step: e.fire_step,
                accumulated_score: e.accumulated_score,
                mechanism: match e.mechanism {
                    Mechanism::HighThreshold => RftMechanism::HighThreshold,
                    Mechanism::Dwell => RftMechanism::Dwell,
                },
            })
            .collect();
        unsafe { emit(&events, out, capacity, out_len) }
    })
}
