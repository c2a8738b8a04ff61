//! C ABI for `offscreen-load`.
//!
//! Every function returns an [`OlStatus`]; on failure a description is kept
//! per thread and can be read with [`ol_last_error_message`]. Objects are
//! handed out as opaque pointers and must be released with the matching
//! `*_free` function. Arrays are passed as pointer plus length; a null
//! pointer is accepted only when the length is zero.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use offscreen_load::evaluation::{cv, rmspe};
use offscreen_load::kinematics::{derive_kinematics, KinematicSeries};
use offscreen_load::metrics::{BandSet, LoadMetrics, SampleOwners, Scope};
use offscreen_load::models::{scaling_estimate, FittedModel, ModelKind, ScalingInputs};
use offscreen_load::tracking::{
    build_camera_path, censor, segment_subtracks, CameraPath, CameraWindow, Event, Frame, PlayerTrack,
    Position,
};
use offscreen_load::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidData = 3,
    SchemaMismatch = 4,
    Undefined = 5,
    Io = 6,
    Unsupported = 7,
    Panic = 8,
}

/// Which frames [`ol_load_metrics`] summarises.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OlScope {
    Full = 0,
    Observed = 1,
    Censored = 2,
}

/// Load metrics with the default band edges. Undefined values (a peak with
/// too few samples, density without acceleration samples) are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OlLoadMetrics {
    pub total_distance: f64,
    pub high_speed_distance: f64,
    pub very_high_speed_distance: f64,
    pub time_velocity_band: [f64; 3],
    /// 1, 3, 5 and 10 second windows.
    pub peak_velocity: [f64; 4],
    pub total_acceleration: f64,
    pub acceleration_density: f64,
    pub time_acceleration_band: [f64; 3],
    pub elapsed: f64,
    pub accel_elapsed: f64,
}

impl From<&LoadMetrics> for OlLoadMetrics {
    fn from(m: &LoadMetrics) -> Self {
        OlLoadMetrics {
            total_distance: m.total_distance,
            high_speed_distance: m.high_speed_distance,
            very_high_speed_distance: m.very_high_speed_distance,
            time_velocity_band: m.time_v_band,
            peak_velocity: m.peak_velocity.map(|p| p.unwrap_or(f64::NAN)),
            total_acceleration: m.total_acceleration,
            acceleration_density: m.acceleration_density.unwrap_or(f64::NAN),
            time_acceleration_band: m.time_a_band,
            elapsed: m.elapsed(),
            accel_elapsed: m.accel_elapsed(),
        }
    }
}

/// Camera path interpolated through event locations.
pub struct OlCameraPath(CameraPath);

/// A track together with its smoothed kinematics.
pub struct OlKinematics {
    track: PlayerTrack,
    series: KinematicSeries,
}

/// A fitted model loaded from its JSON file.
pub struct OlModel(FittedModel);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Unsupported(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn status_of(err: &Error) -> OlStatus {
    match err {
        Error::Schema { .. } => OlStatus::SchemaMismatch,
        Error::Undefined(_) => OlStatus::Undefined,
        Error::Io(_) | Error::MissingFile(_) => OlStatus::Io,
        Error::Config(_) | Error::Empty(_) | Error::NonFinite(_) => OlStatus::InvalidArgument,
        _ => OlStatus::InvalidData,
    }
}

fn guard(f: impl FnOnce() -> FfiResult) -> OlStatus {
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (OlStatus::Ok, String::new()),
        Ok(Err(Failure::Null(name))) => (OlStatus::NullPointer, format!("`{name}` is null")),
        Ok(Err(Failure::Arg(m))) => (OlStatus::InvalidArgument, m),
        Ok(Err(Failure::Unsupported(m))) => (OlStatus::Unsupported, m),
        Ok(Err(Failure::Core(e))) => (status_of(&e), e.to_string()),
        Err(_) => (OlStatus::Panic, "internal panic".to_string()),
    };
    LAST_ERROR.with(|l| *l.borrow_mut() = message);
    status
}

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &'static str) -> FfiResult<&'a [T]> {
    if n == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(Failure::Null(name))
    } else {
        Ok(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, name: &'static str) -> FfiResult<&'a mut [T]> {
    if n == 0 {
        Ok(&mut [])
    } else if p.is_null() {
        Err(Failure::Null(name))
    } else {
        Ok(std::slice::from_raw_parts_mut(p, n))
    }
}

unsafe fn reference<'a, T>(p: *const T, name: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn track_from(t: *const f64, x: *const f64, y: *const f64, n: usize) -> FfiResult<PlayerTrack> {
    let (t, x, y) = (slice(t, n, "t")?, slice(x, n, "x")?, slice(y, n, "y")?);
    let track = PlayerTrack {
        game_id: String::new(),
        player_id: String::new(),
        half: 1,
        position: Position::Midfielder,
        frames: (0..n).map(|i| Frame::new(t[i], x[i], y[i])).collect(),
    };
    track.validate()?;
    Ok(track)
}

/// Length in bytes (without the terminating NUL) of the calling thread's
/// last error message.
#[no_mangle]
pub extern "C" fn ol_last_error_length() -> usize {
    LAST_ERROR.with(|l| l.borrow().len())
}

/// Copies the last error message into `buf` as a NUL-terminated string,
/// truncating to `len - 1` bytes. Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ol_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|l| {
        let msg = l.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a camera path from `n` events given as time and location arrays.
///
/// # Safety
/// The arrays must hold `n` values; `path_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_camera_path_new(
    t: *const f64,
    x: *const f64,
    y: *const f64,
    n: usize,
    path_out: *mut *mut OlCameraPath,
) -> OlStatus {
    guard(|| {
        let out = out(path_out, "path_out")?;
        *out = ptr::null_mut();
        let (t, x, y) = (slice(t, n, "t")?, slice(x, n, "x")?, slice(y, n, "y")?);
        let events: Vec<Event> = (0..n)
            .map(|i| Event {
                game_id: String::new(),
                half: 1,
                t: t[i],
                x: x[i],
                y: y[i],
                kind: String::new(),
            })
            .collect();
        let path = build_camera_path(&events)?;
        *out = Box::into_raw(Box::new(OlCameraPath(path)));
        Ok(())
    })
}

/// Camera centre at time `t`.
///
/// # Safety
/// `path` must come from [`ol_camera_path_new`]; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_camera_path_position(
    path: *const OlCameraPath,
    t: f64,
    x_out: *mut f64,
    y_out: *mut f64,
) -> OlStatus {
    guard(|| {
        let path = reference(path, "path")?;
        let (x_out, y_out) = (out(x_out, "x_out")?, out(y_out, "y_out")?);
        if !t.is_finite() {
            return Err(Failure::Arg(format!("time {t} is not finite")));
        }
        (*x_out, *y_out) = path.0.position_at(t);
        Ok(())
    })
}

/// # Safety
/// `path` must be null or come from [`ol_camera_path_new`], and is invalid
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ol_camera_path_free(path: *mut OlCameraPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Marks each of `n` frames visible (1) or censored (0) under a
/// `width` x `height` window following `path`.
///
/// # Safety
/// Arrays must hold `n` values; `visible_out` must hold `n` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ol_censor(
    path: *const OlCameraPath,
    t: *const f64,
    x: *const f64,
    y: *const f64,
    n: usize,
    width: f64,
    height: f64,
    visible_out: *mut u8,
) -> OlStatus {
    guard(|| {
        let path = reference(path, "path")?;
        let window = CameraWindow::new(width, height)?;
        let track = track_from(t, x, y, n)?;
        let dst = slice_mut(visible_out, n, "visible_out")?;
        for (d, v) in dst.iter_mut().zip(censor(&track, &path.0, &window)) {
            *d = v as u8;
        }
        Ok(())
    })
}

/// Smooths a 10 Hz track of `n` frames with a Gaussian kernel of the given
/// bandwidth in seconds.
///
/// # Safety
/// Arrays must hold `n` values; `kin_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_kinematics_new(
    t: *const f64,
    x: *const f64,
    y: *const f64,
    n: usize,
    bandwidth: f64,
    kin_out: *mut *mut OlKinematics,
) -> OlStatus {
    guard(|| {
        let out = out(kin_out, "kin_out")?;
        *out = ptr::null_mut();
        let track = track_from(t, x, y, n)?;
        let series = derive_kinematics(&track, bandwidth)?;
        *out = Box::into_raw(Box::new(OlKinematics { track, series }));
        Ok(())
    })
}

/// Number of speed samples (frames - 1).
///
/// # Safety
/// `kin` must come from [`ol_kinematics_new`].
#[no_mangle]
pub unsafe extern "C" fn ol_kinematics_speed_len(kin: *const OlKinematics, len_out: *mut usize) -> OlStatus {
    guard(|| {
        *out(len_out, "len_out")? = reference(kin, "kin")?.series.speed.len();
        Ok(())
    })
}

/// Number of smoothed acceleration samples (frames - 2, or 0).
///
/// # Safety
/// `kin` must come from [`ol_kinematics_new`].
#[no_mangle]
pub unsafe extern "C" fn ol_kinematics_accel_len(kin: *const OlKinematics, len_out: *mut usize) -> OlStatus {
    guard(|| {
        *out(len_out, "len_out")? = reference(kin, "kin")?.series.accel.len();
        Ok(())
    })
}

unsafe fn copy_series(src: &[f64], dst: *mut f64, cap: usize) -> FfiResult {
    if cap < src.len() {
        return Err(Failure::Arg(format!("buffer holds {cap} values, need {}", src.len())));
    }
    slice_mut(dst, src.len(), "buffer")?.copy_from_slice(src);
    Ok(())
}

/// Copies the speed samples into `buf`, which must hold at least
/// `ol_kinematics_speed_len` values.
///
/// # Safety
/// `buf` must hold `cap` writable values.
#[no_mangle]
pub unsafe extern "C" fn ol_kinematics_speed(kin: *const OlKinematics, buf: *mut f64, cap: usize) -> OlStatus {
    guard(|| copy_series(&reference(kin, "kin")?.series.speed, buf, cap))
}

/// Copies the smoothed acceleration samples into `buf`.
///
/// # Safety
/// `buf` must hold `cap` writable values.
#[no_mangle]
pub unsafe extern "C" fn ol_kinematics_accel(kin: *const OlKinematics, buf: *mut f64, cap: usize) -> OlStatus {
    guard(|| copy_series(&reference(kin, "kin")?.series.accel, buf, cap))
}

/// # Safety
/// `kin` must be null or come from [`ol_kinematics_new`], and is invalid
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ol_kinematics_free(kin: *mut OlKinematics) {
    if !kin.is_null() {
        drop(Box::from_raw(kin));
    }
}

/// Load metrics over the frames selected by `scope`. `visible` gives one
/// byte per frame (nonzero = on camera) and may be null for `Full`.
///
/// # Safety
/// `visible` must be null or hold `n` bytes; `metrics_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_load_metrics(
    kin: *const OlKinematics,
    visible: *const u8,
    n: usize,
    scope: OlScope,
    metrics_out: *mut OlLoadMetrics,
) -> OlStatus {
    guard(|| {
        let kin = reference(kin, "kin")?;
        let dst = out(metrics_out, "metrics_out")?;
        let n_frames = kin.track.len();
        let mask: Vec<bool> = if visible.is_null() {
            if scope != OlScope::Full {
                return Err(Failure::Null("visible"));
            }
            vec![true; n_frames]
        } else {
            if n != n_frames {
                return Err(Failure::Arg(format!("visibility has {n} entries for {n_frames} frames")));
            }
            slice(visible, n, "visible")?.iter().map(|&v| v != 0).collect()
        };
        let subtracks = segment_subtracks(&kin.track, &mask)?;
        let owners = SampleOwners::new(&subtracks, n_frames)?;
        let scope = match scope {
            OlScope::Full => Scope::Full,
            OlScope::Observed => Scope::Observed,
            OlScope::Censored => Scope::Censored,
        };
        let m = LoadMetrics::compute(&kin.series, &owners.scope_mask(scope), &BandSet::default());
        *dst = OlLoadMetrics::from(&m);
        Ok(())
    })
}

/// `observed * censored_time / observed_time`.
///
/// # Safety
/// `estimate_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_scaling_estimate(
    observed_metric: f64,
    observed_time: f64,
    censored_time: f64,
    estimate_out: *mut f64,
) -> OlStatus {
    guard(|| {
        *out(estimate_out, "estimate_out")? = scaling_estimate(ScalingInputs {
            observed_metric,
            observed_time,
            censored_time,
        })?;
        Ok(())
    })
}

/// Root mean square predictive error of `n` predictions.
///
/// # Safety
/// `y` and `yhat` must hold `n` values; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_rmspe(y: *const f64, yhat: *const f64, n: usize, out_value: *mut f64) -> OlStatus {
    guard(|| {
        *out(out_value, "out_value")? = rmspe(slice(y, n, "y")?, slice(yhat, n, "yhat")?)?;
        Ok(())
    })
}

/// RMSPE divided by the mean of `y`.
///
/// # Safety
/// `y` and `yhat` must hold `n` values; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_cv(y: *const f64, yhat: *const f64, n: usize, out_value: *mut f64) -> OlStatus {
    guard(|| {
        *out(out_value, "out_value")? = cv(slice(y, n, "y")?, slice(yhat, n, "yhat")?)?;
        Ok(())
    })
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `model_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_model_from_json(json: *const c_char, model_out: *mut *mut OlModel) -> OlStatus {
    guard(|| {
        let out = out(model_out, "model_out")?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure::Arg(format!("json is not UTF-8: {e}")))?;
        *out = Box::into_raw(Box::new(OlModel(FittedModel::from_json(text)?)));
        Ok(())
    })
}

/// Loads a model file written by the `fit` command.
///
/// # Safety
/// `path` must be a NUL-terminated string; `model_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_model_load(path: *const c_char, model_out: *mut *mut OlModel) -> OlStatus {
    guard(|| {
        let out = out(model_out, "model_out")?;
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Failure::Arg(format!("path is not UTF-8: {e}")))?;
        let file = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.into()),
            _ => Error::Io(e),
        })?;
        *out = Box::into_raw(Box::new(OlModel(FittedModel::read(std::io::BufReader::new(file))?)));
        Ok(())
    })
}

/// Number of input columns a row passed to [`ol_model_predict`] must have.
///
/// # Safety
/// `model` must come from one of the model constructors.
#[no_mangle]
pub unsafe extern "C" fn ol_model_input_count(model: *const OlModel, count_out: *mut usize) -> OlStatus {
    guard(|| {
        *out(count_out, "count_out")? = reference(model, "model")?.0.input_columns.len();
        Ok(())
    })
}

/// Name of input column `index` as a NUL-terminated string, truncated to
/// fit `len` bytes. `name_len_out` receives the full length.
///
/// # Safety
/// `buf` must be null or hold `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ol_model_input_name(
    model: *const OlModel,
    index: usize,
    buf: *mut c_char,
    len: usize,
    name_len_out: *mut usize,
) -> OlStatus {
    guard(|| {
        let model = reference(model, "model")?;
        let name = &model
            .0
            .input_columns
            .get(index)
            .ok_or_else(|| Failure::Arg(format!("column index {index} out of range")))?
            .name;
        if !buf.is_null() && len > 0 {
            let n = name.len().min(len - 1);
            ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        if let Some(l) = name_len_out.as_mut() {
            *l = name.len();
        }
        Ok(())
    })
}

/// Predicts `n_rows` rows given row-major with `n_cols` values each, in
/// the model's input column order. Raw model output, no flooring.
/// Scaling models need per-row bookkeeping and are not supported here.
///
/// # Safety
/// `rows` must hold `n_rows * n_cols` values; `out_values` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn ol_model_predict(
    model: *const OlModel,
    rows: *const f64,
    n_rows: usize,
    n_cols: usize,
    out_values: *mut f64,
) -> OlStatus {
    guard(|| {
        let model = &reference(model, "model")?.0;
        if model.kind == ModelKind::Scaling {
            return Err(Failure::Unsupported("scaling models predict from feature tables only".into()));
        }
        let expected = model.input_columns.len();
        if n_cols != expected {
            return Err(Failure::Arg(format!("model takes {expected} columns, got {n_cols}")));
        }
        let total = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Failure::Arg("row count overflows".into()))?;
        let data = slice(rows, total, "rows")?;
        let matrix: Vec<Vec<f64>> = if n_cols == 0 {
            vec![Vec::new(); n_rows]
        } else {
            data.chunks(n_cols).map(<[f64]>::to_vec).collect()
        };
        let pred = model.predict_matrix(&model.input_columns, &matrix)?;
        slice_mut(out_values, n_rows, "out_values")?.copy_from_slice(&pred);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from a model constructor, and is invalid
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ol_model_free(model: *mut OlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
