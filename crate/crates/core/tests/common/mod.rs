//! Helpers shared by the integration tests: corpus construction and
//! brute-force reference computations that avoid the library's own code
//! paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

use offscreen_load::dataset::{assemble, PlayerGame};
use offscreen_load::features::{build_feature_set, FeatureSet};
use offscreen_load::metrics::BandEdges;
use offscreen_load::synth::generate_corpus;
use offscreen_load::tracking::{Event, PlayerTrack};
use offscreen_load::RunConfig;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn group_events(events: &[Event]) -> BTreeMap<(String, u8), Vec<Event>> {
    let mut out: BTreeMap<(String, u8), Vec<Event>> = BTreeMap::new();
    for e in events {
        out.entry((e.game_id.clone(), e.half)).or_default().push(e.clone());
    }
    out
}

pub fn build_corpus(cfg: &RunConfig) -> Vec<PlayerGame> {
    let corpus = generate_corpus(&cfg.synth_config()).expect("synthetic corpus");
    let events = group_events(&corpus.events);
    assemble(corpus.tracks, &events, &cfg.assembly()).expect("assembly")
}

pub fn build_features(cfg: &RunConfig, corpus: &[PlayerGame]) -> FeatureSet {
    build_feature_set(corpus, &cfg.band_set().unwrap()).expect("features")
}

/// A small, fast configuration: `games` games of `half_length` seconds.
pub fn small_config(seed: u64, games: usize, half_length: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.seed = seed;
    cfg.synth.games = games;
    cfg.synth.half_length = half_length;
    cfg
}

/// Alternating visible/hidden runs with geometric lengths (mean `mean_run`).
pub fn block_mask(n: usize, mean_run: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut state = rng.random_bool(0.5);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        out.push(state);
        if rng.random_bool(1.0 / mean_run) {
            state = !state;
        }
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which samples a scope selects, from a per-frame visibility mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleScope {
    Full,
    Observed,
    Censored,
}

/// Reference values of every load metric, recomputed sample by sample.
#[derive(Clone, Debug)]
pub struct OracleMetrics {
    pub total_distance: f64,
    pub band_distance: [f64; 3],
    pub time_v_band: [f64; 3],
    pub peak: [Option<f64>; 4],
    pub total_acceleration: f64,
    pub acceleration_density: Option<f64>,
    pub time_a_band: [f64; 3],
    pub speed_samples: usize,
    pub accel_samples: usize,
}

/// Nadaraya-Watson with a Gaussian kernel summed over every sample.
pub fn smooth_all(values: &[f64], times: &[f64], h: f64) -> Vec<f64> {
    times
        .iter()
        .map(|&t0| {
            let (mut num, mut den) = (0.0, 0.0);
            for (v, t) in values.iter().zip(times) {
                let w = (-0.5 * ((t0 - t) / h).powi(2)).exp();
                num += w * v;
                den += w;
            }
            num / den
        })
        .collect()
}

pub fn oracle_metrics(
    track: &PlayerTrack,
    visible: &[bool],
    scope: OracleScope,
    bands: &BandEdges,
    bandwidth: f64,
) -> OracleMetrics {
    let f = &track.frames;
    let n = f.len();
    let mut step = Vec::new();
    let mut speed = Vec::new();
    for k in 0..n - 1 {
        let d = (f[k + 1].x - f[k].x).hypot(f[k + 1].y - f[k].y);
        step.push(d);
        speed.push(d / 0.1);
    }
    let mut raw = Vec::new();
    let mut times = Vec::new();
    for k in 0..speed.len().saturating_sub(1) {
        raw.push((speed[k + 1] - speed[k]) / 0.1);
        times.push(f[k + 1].t);
    }
    let accel = smooth_all(&raw, &times, bandwidth);

    let take = |frames: &[usize]| {
        let obs = frames.iter().all(|&i| visible[i]);
        match scope {
            OracleScope::Full => true,
            OracleScope::Observed => obs,
            OracleScope::Censored => !obs,
        }
    };
    let speed_sel: Vec<bool> = (0..speed.len()).map(|k| take(&[k, k + 1])).collect();
    let accel_sel: Vec<bool> = (0..accel.len()).map(|k| take(&[k, k + 1, k + 2])).collect();

    let [v1, v2] = bands.velocity;
    let v_edges = [0.0, v1, v2, f64::INFINITY];
    let [a0, a1, a2] = bands.acceleration;
    let a_edges = [a0, a1, a2, f64::INFINITY];

    let mut m = OracleMetrics {
        total_distance: 0.0,
        band_distance: [0.0; 3],
        time_v_band: [0.0; 3],
        peak: [None; 4],
        total_acceleration: 0.0,
        acceleration_density: None,
        time_a_band: [0.0; 3],
        speed_samples: 0,
        accel_samples: 0,
    };
    let mut v_counts = [0usize; 3];
    for k in 0..speed.len() {
        if !speed_sel[k] {
            continue;
        }
        m.speed_samples += 1;
        m.total_distance += step[k];
        for b in 0..3 {
            if speed[k] >= v_edges[b] && speed[k] < v_edges[b + 1] {
                m.band_distance[b] += step[k];
                v_counts[b] += 1;
            }
        }
    }
    let mut a_counts = [0usize; 3];
    for k in 0..accel.len() {
        if !accel_sel[k] {
            continue;
        }
        let a = accel[k].abs();
        m.accel_samples += 1;
        m.total_acceleration += a;
        for b in 0..3 {
            if a >= a_edges[b] && a < a_edges[b + 1] {
                a_counts[b] += 1;
            }
        }
    }
    for b in 0..3 {
        m.time_v_band[b] = v_counts[b] as f64 * 0.1;
        m.time_a_band[b] = a_counts[b] as f64 * 0.1;
    }
    if m.accel_samples > 0 {
        m.acceleration_density = Some(m.total_acceleration / m.accel_samples as f64);
    }
    for (slot, secs) in [1usize, 3, 5, 10].iter().enumerate() {
        let w = secs * 10;
        let mut best: Option<f64> = None;
        for s in 0..speed.len() {
            if s + w > speed.len() || !speed_sel[s..s + w].iter().all(|&b| b) {
                continue;
            }
            let mean = speed[s..s + w].iter().sum::<f64>() / w as f64;
            best = Some(best.map_or(mean, |b: f64| b.max(mean)));
        }
        m.peak[slot] = best;
    }
    m
}

/// Solves `X'X b = X'y` by Gauss-Jordan elimination with partial pivoting.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != col {
                let factor = a[r][col];
                let pivot_row = a[col].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                    *v -= factor * pv;
                }
            }
        }
    }
    a.iter().map(|r| r[p]).collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
