//! Per-interval distance and speed, and smoothed acceleration.
//!
//! Sample `k` of both `speed` and `accel` is attributed to frame `k + 1`:
//! speed `k` covers the interval from frame `k` to frame `k + 1`, and accel
//! `k` is the difference of speeds `k + 1` and `k`, located at the frame the
//! two intervals share.

use crate::error::{Error, Result};
use crate::tracking::{PlayerTrack, FRAME_DT};

/// Default smoothing bandwidth in seconds (three samples at 10 Hz).
pub const DEFAULT_BANDWIDTH: f64 = 0.3;

/// Gaussian weights are negligible (< 1e-13 relative) beyond this many
/// bandwidths.
const KERNEL_CUTOFF: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicSeries {
    /// Frame timestamps, one per source frame.
    pub t: Vec<f64>,
    /// Metres moved over each 0.1 s interval.
    pub step: Vec<f64>,
    /// m/s over each interval.
    pub speed: Vec<f64>,
    /// Signed first difference of speed, m/s^2.
    pub accel_raw: Vec<f64>,
    /// `accel_raw` after kernel smoothing.
    pub accel: Vec<f64>,
}

impl KinematicSeries {
    pub fn n_frames(&self) -> usize {
        self.t.len()
    }

    /// Timestamp of speed/accel sample `k`.
    pub fn sample_time(&self, k: usize) -> f64 {
        self.t[k + 1]
    }
}

pub fn derive_kinematics(track: &PlayerTrack, bandwidth: f64) -> Result<KinematicSeries> {
    let frames = &track.frames;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Validation(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if frames.len() < 2 {
        return Err(Error::Validation(format!(
            "kinematics need at least 2 frames, player {} half {} has {}",
            track.player_id,
            track.half,
            frames.len()
        )));
    }
    let step: Vec<f64> = frames.windows(2).map(|w| w[0].distance_to(&w[1])).collect();
    let speed: Vec<f64> = step.iter().map(|s| s / FRAME_DT).collect();
    let accel_raw: Vec<f64> = speed.windows(2).map(|w| (w[1] - w[0]) / FRAME_DT).collect();
    let accel = if accel_raw.is_empty() {
        Vec::new()
    } else {
        let times: Vec<f64> = frames[1..frames.len() - 1].iter().map(|f| f.t).collect();
        nw_smooth(&accel_raw, &times, bandwidth)?
    };
    Ok(KinematicSeries {
        t: frames.iter().map(|f| f.t).collect(),
        step,
        speed,
        accel_raw,
        accel,
    })
}

/// Nadaraya-Watson smoother with a Gaussian kernel.
///
/// `times` must be nondecreasing. Contributions beyond eight bandwidths are
/// skipped.
pub fn nw_smooth(values: &[f64], times: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("nothing to smooth"));
    }
    if values.len() != times.len() {
        return Err(Error::Validation(format!(
            "{} values but {} timestamps",
            values.len(),
            times.len()
        )));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Validation(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Validation("smoothing times must be nondecreasing".into()));
    }

    let radius = KERNEL_CUTOFF * bandwidth;
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(values.len());
    for &tj in times {
        while times[lo] < tj - radius {
            lo += 1;
        }
        while hi < times.len() && times[hi] <= tj + radius {
            hi += 1;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in lo..hi {
            let u = (tj - times[i]) / bandwidth;
            let w = (-0.5 * u * u).exp();
            num += w * values[i];
            den += w;
        }
        out.push(num / den);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::{Frame, Position};

    fn track_x(xs: &[f64]) -> PlayerTrack {
        PlayerTrack {
            game_id: "g".into(),
            player_id: "p".into(),
            half: 1,
            position: Position::Forward,
            frames: xs
                .iter()
                .enumerate()
                .map(|(i, &x)| Frame::new(i as f64 * FRAME_DT, x, 0.0))
                .collect(),
        }
    }

    #[test]
    fn constant_velocity() {
        let k = derive_kinematics(&track_x(&[0.0, 0.4, 0.8]), DEFAULT_BANDWIDTH).unwrap();
        assert_eq!(k.speed.len(), 2);
        assert_eq!(k.accel_raw.len(), 1);
        for s in &k.speed {
            assert!((s - 4.0).abs() < 1e-9);
        }
        assert!(k.accel_raw[0].abs() < 1e-9);
    }

    #[test]
    fn stationary() {
        let k = derive_kinematics(&track_x(&[2.0; 6]), DEFAULT_BANDWIDTH).unwrap();
        assert!(k.speed.iter().all(|&s| s == 0.0));
        assert!(k.accel_raw.iter().all(|&a| a == 0.0));
        assert!(k.accel.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn finite_difference_by_hand() {
        // steps 0.1 m and 0.2 m over 0.1 s: 1 m/s then 2 m/s, so 10 m/s^2
        let k = derive_kinematics(&track_x(&[0.0, 0.1, 0.3]), DEFAULT_BANDWIDTH).unwrap();
        assert!((k.speed[0] - 1.0).abs() < 1e-9);
        assert!((k.speed[1] - 2.0).abs() < 1e-9);
        assert!((k.accel_raw[0] - 10.0).abs() < 1e-9);
        // a single sample smooths to itself
        assert!((k.accel[0] - k.accel_raw[0]).abs() < 1e-12);
        assert_eq!(k.sample_time(0), 0.1);
    }

    #[test]
    fn too_short() {
        assert!(derive_kinematics(&track_x(&[0.0]), DEFAULT_BANDWIDTH).is_err());
        let k = derive_kinematics(&track_x(&[0.0, 1.0]), DEFAULT_BANDWIDTH).unwrap();
        assert!(k.accel.is_empty());
    }

    #[test]
    fn smoothing_constant_sequence() {
        let out = nw_smooth(&[5.0, 5.0, 5.0], &[0.0, 0.1, 0.2], 0.7).unwrap();
        for v in out {
            assert!((v - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_wide_bandwidth_is_uniform_mean() {
        let out = nw_smooth(&[0.0, 1.0, 0.0], &[0.0, 0.1, 0.2], 1e6).unwrap();
        for v in out {
            assert!((v - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn smoothing_kernel_formula() {
        let out = nw_smooth(&[0.0, 1.0, 0.0], &[0.0, 0.1, 0.2], 0.1).unwrap();
        let w = (-0.5f64).exp();
        let expected = 1.0 / (1.0 + 2.0 * w);
        assert!((out[1] - expected).abs() < 1e-12);
        assert!((out[1] - 0.4519).abs() < 1e-4);
    }

    #[test]
    fn smoothing_errors() {
        assert!(matches!(nw_smooth(&[], &[], 0.3), Err(Error::Empty(_))));
        assert!(matches!(
            nw_smooth(&[1.0, f64::NAN], &[0.0, 0.1], 0.3),
            Err(Error::NonFinite(1))
        ));
        assert!(nw_smooth(&[1.0], &[0.0], 0.0).is_err());
        assert!(nw_smooth(&[1.0, 2.0], &[0.0], 0.3).is_err());
    }

    #[test]
    fn tiny_bandwidth_is_identity() {
        let vals = [3.0, -1.0, 7.5, 0.25];
        let times = [0.0, 0.1, 0.2, 0.3];
        let out = nw_smooth(&vals, &times, 1e-6).unwrap();
        for (a, b) in vals.iter().zip(&out) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
