//! External load metrics over arbitrary sample subsets.
//!
//! A metric never sees frames directly: it sees the speed and acceleration
//! samples of a [`KinematicSeries`] selected by a [`SampleMask`]. Masks for
//! the observed and censored portions of a track come from [`SampleOwners`].

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::KinematicSeries;
use crate::tracking::{Subtrack, FRAME_DT};

/// Rolling windows (seconds) for peak velocity.
pub const PEAK_WINDOWS: [u32; 4] = [1, 3, 5, 10];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandKind {
    Velocity,
    Acceleration,
}

/// Half-open interval `[lo, hi)`; `hi` may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub kind: BandKind,
}

impl Band {
    pub fn new(lo: f64, hi: f64, kind: BandKind) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi) {
            return Err(Error::Config(format!("invalid band [{lo}, {hi})")));
        }
        Ok(Self { lo, hi, kind })
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v < self.hi
    }
}

/// Band edges as they appear in configuration: the interior edges of the
/// three velocity bands (the lowest starts at 0, the highest is unbounded)
/// and the three lower edges of the acceleration bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandEdges {
    pub velocity: [f64; 2],
    pub acceleration: [f64; 3],
}

impl Default for BandEdges {
    fn default() -> Self {
        Self {
            velocity: [3.5, 5.7],
            acceleration: [0.65, 1.46, 2.77],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandSet {
    pub velocity: [Band; 3],
    pub acceleration: [Band; 3],
}

impl BandSet {
    pub fn from_edges(edges: &BandEdges) -> Result<Self> {
        let [v1, v2] = edges.velocity;
        let [a0, a1, a2] = edges.acceleration;
        use BandKind::*;
        Ok(Self {
            velocity: [
                Band::new(0.0, v1, Velocity)?,
                Band::new(v1, v2, Velocity)?,
                Band::new(v2, f64::INFINITY, Velocity)?,
            ],
            acceleration: [
                Band::new(a0, a1, Acceleration)?,
                Band::new(a1, a2, Acceleration)?,
                Band::new(a2, f64::INFINITY, Acceleration)?,
            ],
        })
    }
}

impl Default for BandSet {
    fn default() -> Self {
        Self::from_edges(&BandEdges::default()).expect("default edges are valid")
    }
}

/// Selection over the speed samples and acceleration samples of a series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleMask {
    pub speed: Vec<bool>,
    pub accel: Vec<bool>,
}

impl SampleMask {
    pub fn all(kin: &KinematicSeries) -> Self {
        Self {
            speed: vec![true; kin.speed.len()],
            accel: vec![true; kin.accel.len()],
        }
    }

    pub fn none(kin: &KinematicSeries) -> Self {
        Self {
            speed: vec![false; kin.speed.len()],
            accel: vec![false; kin.accel.len()],
        }
    }

    pub fn union(&self, other: &SampleMask) -> SampleMask {
        let or = |a: &[bool], b: &[bool]| a.iter().zip(b).map(|(x, y)| *x || *y).collect();
        SampleMask {
            speed: or(&self.speed, &other.speed),
            accel: or(&self.accel, &other.accel),
        }
    }

    pub fn speed_count(&self) -> usize {
        self.speed.iter().filter(|&&m| m).count()
    }

    pub fn accel_count(&self) -> usize {
        self.accel.iter().filter(|&&m| m).count()
    }
}

/// Which subtrack each kinematic sample belongs to.
///
/// A speed sample is observed only when both of its frames are observed; an
/// acceleration sample only when all three of its frames are. Samples
/// touching a censored frame go to that frame's censored subtrack, preferring
/// the sample's own frame, then the later frame, then the earlier one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleOwners {
    pub speed: Vec<usize>,
    pub accel: Vec<usize>,
    observed: Vec<bool>,
}

impl SampleOwners {
    pub fn new(subtracks: &[Subtrack], n_frames: usize) -> Result<Self> {
        let mut frame_sub = Vec::with_capacity(n_frames);
        for (i, s) in subtracks.iter().enumerate() {
            if s.range.start != frame_sub.len() {
                return Err(Error::Validation("subtracks are not contiguous".into()));
            }
            frame_sub.extend(std::iter::repeat_n(i, s.len()));
        }
        if frame_sub.len() != n_frames {
            return Err(Error::Validation(format!(
                "subtracks cover {} of {} frames",
                frame_sub.len(),
                n_frames
            )));
        }
        let observed: Vec<bool> = subtracks.iter().map(|s| s.observed).collect();
        let censored = |f: usize| !observed[frame_sub[f]];
        let pick = |order: &[usize]| {
            order
                .iter()
                .copied()
                .find(|&f| censored(f))
                .map_or(frame_sub[order[0]], |f| frame_sub[f])
        };
        let speed = (0..n_frames.saturating_sub(1)).map(|i| pick(&[i + 1, i])).collect();
        let accel = (0..n_frames.saturating_sub(2))
            .map(|k| pick(&[k + 1, k + 2, k]))
            .collect();
        Ok(Self {
            speed,
            accel,
            observed,
        })
    }

    pub fn mask_for(&self, subtrack: usize) -> SampleMask {
        SampleMask {
            speed: self.speed.iter().map(|&o| o == subtrack).collect(),
            accel: self.accel.iter().map(|&o| o == subtrack).collect(),
        }
    }

    pub fn scope_mask(&self, scope: Scope) -> SampleMask {
        let keep = |o: &usize| match scope {
            Scope::Observed => self.observed[*o],
            Scope::Censored => !self.observed[*o],
            Scope::Full => true,
        };
        SampleMask {
            speed: self.speed.iter().map(keep).collect(),
            accel: self.accel.iter().map(keep).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Observed,
    Censored,
    Full,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::Observed, Scope::Censored, Scope::Full];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scope::Observed => "observed",
            Scope::Censored => "censored",
            Scope::Full => "full",
        }
    }
}

fn selected<'a>(values: &'a [f64], mask: &'a [bool]) -> impl Iterator<Item = f64> + 'a {
    values.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| *v)
}

pub fn total_distance(kin: &KinematicSeries, mask: &SampleMask) -> f64 {
    selected(&kin.step, &mask.speed).sum()
}

pub fn band_distance(kin: &KinematicSeries, band: &Band, mask: &SampleMask) -> f64 {
    debug_assert_eq!(band.kind, BandKind::Velocity);
    kin.step
        .iter()
        .zip(&kin.speed)
        .zip(&mask.speed)
        .filter(|((_, v), &m)| m && band.contains(**v))
        .map(|((s, _), _)| *s)
        .sum()
}

/// Seconds spent in `band`: 0.1 s per selected sample of `series` inside it.
/// Pass speeds for velocity bands and absolute accelerations for
/// acceleration bands.
pub fn band_time(series: &[f64], band: &Band, mask: &[bool]) -> f64 {
    selected(series, mask).filter(|v| band.contains(*v)).count() as f64 * FRAME_DT
}

pub fn accel_band_time(kin: &KinematicSeries, band: &Band, mask: &SampleMask) -> f64 {
    selected(&kin.accel, &mask.accel)
        .filter(|a| band.contains(a.abs()))
        .count() as f64
        * FRAME_DT
}

/// Highest mean speed over any run of `window_s` seconds of contiguous
/// selected samples. `None` when no selected run is long enough.
pub fn peak_rolling_velocity(kin: &KinematicSeries, window_s: u32, mask: &SampleMask) -> Option<f64> {
    let w = (window_s as usize) * 10;
    if w == 0 {
        return None;
    }
    let mut best: Option<f64> = None;
    let mut i = 0;
    let n = kin.speed.len();
    while i < n {
        if !mask.speed[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && mask.speed[i] {
            i += 1;
        }
        let run = &kin.speed[start..i];
        if run.len() < w {
            continue;
        }
        let mut sum: f64 = run[..w].iter().sum();
        let mut run_best = sum;
        for j in w..run.len() {
            sum += run[j] - run[j - w];
            run_best = run_best.max(sum);
        }
        let mean = run_best / w as f64;
        best = Some(best.map_or(mean, |b| b.max(mean)));
    }
    best
}

pub fn total_acceleration(kin: &KinematicSeries, mask: &SampleMask) -> f64 {
    selected(&kin.accel, &mask.accel).map(f64::abs).sum()
}

/// Mean absolute acceleration; `None` for an empty selection.
pub fn acceleration_density(kin: &KinematicSeries, mask: &SampleMask) -> Option<f64> {
    let n = mask.accel_count();
    (n > 0).then(|| total_acceleration(kin, mask) / n as f64)
}

/// The full metric suite over one sample selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadMetrics {
    pub total_distance: f64,
    pub high_speed_distance: f64,
    pub very_high_speed_distance: f64,
    pub time_v_band: [f64; 3],
    /// Peak mean speed over the [`PEAK_WINDOWS`] windows.
    pub peak_velocity: [Option<f64>; 4],
    pub total_acceleration: f64,
    pub acceleration_density: Option<f64>,
    pub time_a_band: [f64; 3],
    pub speed_samples: usize,
    pub accel_samples: usize,
}

impl LoadMetrics {
    pub fn compute(kin: &KinematicSeries, mask: &SampleMask, bands: &BandSet) -> Self {
        let [v_low, v_mid, v_high] = &bands.velocity;
        Self {
            total_distance: total_distance(kin, mask),
            high_speed_distance: band_distance(kin, v_mid, mask),
            very_high_speed_distance: band_distance(kin, v_high, mask),
            time_v_band: [v_low, v_mid, v_high].map(|b| band_time(&kin.speed, b, &mask.speed)),
            peak_velocity: PEAK_WINDOWS.map(|w| peak_rolling_velocity(kin, w, mask)),
            total_acceleration: total_acceleration(kin, mask),
            acceleration_density: acceleration_density(kin, mask),
            time_a_band: bands
                .acceleration
                .each_ref()
                .map(|b| accel_band_time(kin, b, mask)),
            speed_samples: mask.speed_count(),
            accel_samples: mask.accel_count(),
        }
    }

    pub fn empty() -> Self {
        Self {
            total_distance: 0.0,
            high_speed_distance: 0.0,
            very_high_speed_distance: 0.0,
            time_v_band: [0.0; 3],
            peak_velocity: [None; 4],
            total_acceleration: 0.0,
            acceleration_density: None,
            time_a_band: [0.0; 3],
            speed_samples: 0,
            accel_samples: 0,
        }
    }

    /// Seconds covered by the selected speed samples.
    pub fn elapsed(&self) -> f64 {
        self.speed_samples as f64 * FRAME_DT
    }

    /// Seconds covered by the selected acceleration samples.
    pub fn accel_elapsed(&self) -> f64 {
        self.accel_samples as f64 * FRAME_DT
    }

    pub fn average_velocity(&self) -> Option<f64> {
        (self.speed_samples > 0).then(|| self.total_distance / self.elapsed())
    }

    /// Combines metrics of disjoint selections, e.g. the two halves of a game.
    /// Peaks take the maximum, so windows never span the two parts.
    pub fn merge(&self, other: &LoadMetrics) -> LoadMetrics {
        let add3 = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let mut peak = self.peak_velocity;
        for (p, q) in peak.iter_mut().zip(other.peak_velocity) {
            *p = match (*p, q) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
        let total_acceleration = self.total_acceleration + other.total_acceleration;
        let accel_samples = self.accel_samples + other.accel_samples;
        LoadMetrics {
            total_distance: self.total_distance + other.total_distance,
            high_speed_distance: self.high_speed_distance + other.high_speed_distance,
            very_high_speed_distance: self.very_high_speed_distance
                + other.very_high_speed_distance,
            time_v_band: add3(self.time_v_band, other.time_v_band),
            peak_velocity: peak,
            total_acceleration,
            acceleration_density: (accel_samples > 0)
                .then(|| total_acceleration / accel_samples as f64),
            time_a_band: add3(self.time_a_band, other.time_a_band),
            speed_samples: self.speed_samples + other.speed_samples,
            accel_samples,
        }
    }

    pub fn value(&self, metric: Metric) -> Option<f64> {
        Some(match metric {
            Metric::TotalDistance => self.total_distance,
            Metric::HighSpeedDistance => self.high_speed_distance,
            Metric::VeryHighSpeedDistance => self.very_high_speed_distance,
            Metric::TimeVelocityLow => self.time_v_band[0],
            Metric::TimeVelocityMid => self.time_v_band[1],
            Metric::TimeVelocityHigh => self.time_v_band[2],
            Metric::TotalAcceleration => self.total_acceleration,
            Metric::AccelerationDensity => return self.acceleration_density,
            Metric::TimeAccelLow => self.time_a_band[0],
            Metric::TimeAccelMid => self.time_a_band[1],
            Metric::TimeAccelHigh => self.time_a_band[2],
        })
    }
}

/// The eleven prediction targets. Peak velocities are reported but not
/// predicted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    TotalDistance,
    HighSpeedDistance,
    VeryHighSpeedDistance,
    #[serde(rename = "time_vband_low")]
    TimeVelocityLow,
    #[serde(rename = "time_vband_mid")]
    TimeVelocityMid,
    #[serde(rename = "time_vband_high")]
    TimeVelocityHigh,
    TotalAcceleration,
    AccelerationDensity,
    #[serde(rename = "time_aband_low")]
    TimeAccelLow,
    #[serde(rename = "time_aband_mid")]
    TimeAccelMid,
    #[serde(rename = "time_aband_high")]
    TimeAccelHigh,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::TotalDistance,
        Metric::HighSpeedDistance,
        Metric::VeryHighSpeedDistance,
        Metric::TimeVelocityLow,
        Metric::TimeVelocityMid,
        Metric::TimeVelocityHigh,
        Metric::TotalAcceleration,
        Metric::AccelerationDensity,
        Metric::TimeAccelLow,
        Metric::TimeAccelMid,
        Metric::TimeAccelHigh,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::TotalDistance => "total_distance",
            Metric::HighSpeedDistance => "high_speed_distance",
            Metric::VeryHighSpeedDistance => "very_high_speed_distance",
            Metric::TimeVelocityLow => "time_vband_low",
            Metric::TimeVelocityMid => "time_vband_mid",
            Metric::TimeVelocityHigh => "time_vband_high",
            Metric::TotalAcceleration => "total_acceleration",
            Metric::AccelerationDensity => "acceleration_density",
            Metric::TimeAccelLow => "time_aband_low",
            Metric::TimeAccelMid => "time_aband_mid",
            Metric::TimeAccelHigh => "time_aband_high",
        }
    }

    /// Row label with units, for printed tables.
    pub fn label(&self, bands: &BandEdges) -> String {
        let [v1, v2] = bands.velocity;
        let [a0, a1, a2] = bands.acceleration;
        match self {
            Metric::TotalDistance => "total distance (m)".into(),
            Metric::HighSpeedDistance => "high speed distance (m)".into(),
            Metric::VeryHighSpeedDistance => "very high speed distance (m)".into(),
            Metric::TimeVelocityLow => format!("time in velocity band [0, {v1}) (s)"),
            Metric::TimeVelocityMid => format!("time in velocity band [{v1}, {v2}) (s)"),
            Metric::TimeVelocityHigh => format!("time in velocity band [{v2}, inf) (s)"),
            Metric::TotalAcceleration => "total acceleration (m/s^2)".into(),
            Metric::AccelerationDensity => "acceleration density (m/s^2)".into(),
            Metric::TimeAccelLow => format!("time in acceleration band [{a0}, {a1}) (s)"),
            Metric::TimeAccelMid => format!("time in acceleration band [{a1}, {a2}) (s)"),
            Metric::TimeAccelHigh => format!("time in acceleration band [{a2}, inf) (s)"),
        }
    }

    /// Whether the metric is computed over acceleration samples rather
    /// than speed samples.
    pub fn on_accel_samples(&self) -> bool {
        matches!(
            self,
            Metric::TotalAcceleration
                | Metric::AccelerationDensity
                | Metric::TimeAccelLow
                | Metric::TimeAccelMid
                | Metric::TimeAccelHigh
        )
    }

    /// Whether game-level values are sums of subtrack values (everything
    /// except density, which is a time-weighted mean).
    pub fn is_summed(&self) -> bool {
        !matches!(self, Metric::AccelerationDensity)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown metric `{s}`")))
    }
}

pub const METRICS_FILE_COLUMNS: [&str; 21] = [
    "game_id",
    "player_id",
    "scope",
    "total_distance",
    "high_speed_distance",
    "very_high_speed_distance",
    "time_vband_low",
    "time_vband_mid",
    "time_vband_high",
    "peak_velocity_1s",
    "peak_velocity_3s",
    "peak_velocity_5s",
    "peak_velocity_10s",
    "total_acceleration",
    "acceleration_density",
    "time_aband_low",
    "time_aband_mid",
    "time_aband_high",
    "elapsed",
    "accel_elapsed",
    "average_velocity",
];

/// One row of the metrics file.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub game_id: String,
    pub player_id: String,
    pub scope: Scope,
    pub metrics: LoadMetrics,
}

pub fn write_metrics<W: Write>(writer: W, rows: &[MetricsRow]) -> Result<()> {
    fn opt(v: Option<f64>) -> String {
        v.map(|v| v.to_string()).unwrap_or_default()
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_FILE_COLUMNS)?;
    for r in rows {
        let m = &r.metrics;
        let mut rec = vec![
            r.game_id.clone(),
            r.player_id.clone(),
            r.scope.as_str().to_string(),
            m.total_distance.to_string(),
            m.high_speed_distance.to_string(),
            m.very_high_speed_distance.to_string(),
        ];
        rec.extend(m.time_v_band.iter().map(f64::to_string));
        rec.extend(m.peak_velocity.iter().map(|p| opt(*p)));
        rec.push(m.total_acceleration.to_string());
        rec.push(opt(m.acceleration_density));
        rec.extend(m.time_a_band.iter().map(f64::to_string));
        rec.push(m.elapsed().to_string());
        rec.push(m.accel_elapsed().to_string());
        rec.push(opt(m.average_velocity()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
