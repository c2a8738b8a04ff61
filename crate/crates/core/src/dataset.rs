//! Assembly of censored player-games from raw tracks and events.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{derive_kinematics, KinematicSeries};
use crate::metrics::{BandSet, LoadMetrics, MetricsRow, SampleMask, SampleOwners, Scope};
use crate::tracking::{
    build_camera_path, censor, censor_random, segment_subtracks, CameraWindow, Event,
    PlayerTrack, Position, Subtrack,
};

/// How frames are hidden.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Censoring {
    /// Window following the event-interpolated camera path.
    #[default]
    Camera,
    /// Each frame hidden independently with probability `p`.
    Random { p: f64 },
}

#[derive(Clone, Debug)]
pub struct AssemblyOptions {
    pub window: CameraWindow,
    pub bandwidth: f64,
    pub censoring: Censoring,
    pub seed: u64,
}

/// One player-half after censoring.
#[derive(Clone, Debug)]
pub struct HalfRecord {
    pub track: PlayerTrack,
    pub kin: KinematicSeries,
    pub subtracks: Vec<Subtrack>,
    pub owners: SampleOwners,
}

impl HalfRecord {
    pub fn new(track: PlayerTrack, visibility: &[bool], bandwidth: f64) -> Result<Self> {
        let kin = derive_kinematics(&track, bandwidth)?;
        let subtracks = segment_subtracks(&track, visibility)?;
        let owners = SampleOwners::new(&subtracks, track.len())?;
        Ok(Self {
            track,
            kin,
            subtracks,
            owners,
        })
    }

    pub fn metrics(&self, scope: Scope, bands: &BandSet) -> LoadMetrics {
        LoadMetrics::compute(&self.kin, &self.owners.scope_mask(scope), bands)
    }

    /// Kinematic samples owned by subtrack `idx`, as a standalone series.
    pub fn subtrack_series(&self, idx: usize) -> KinematicSeries {
        let (sr, ar) = self.owned_ranges(idx);
        let t = if sr.is_empty() {
            Vec::new()
        } else {
            self.kin.t[sr.start..=sr.end].to_vec()
        };
        KinematicSeries {
            t,
            step: self.kin.step[sr.clone()].to_vec(),
            speed: self.kin.speed[sr].to_vec(),
            accel_raw: self.kin.accel_raw[ar.clone()].to_vec(),
            accel: self.kin.accel[ar].to_vec(),
        }
    }

    /// Speed and accel sample ranges owned by subtrack `idx`. Ownership is
    /// monotone in the sample index, so these are contiguous.
    pub fn owned_ranges(&self, idx: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let range = |owners: &[usize]| {
            let lo = owners.partition_point(|&o| o < idx);
            let hi = owners.partition_point(|&o| o <= idx);
            lo..hi
        };
        (range(&self.owners.speed), range(&self.owners.accel))
    }

    pub fn subtrack_metrics(&self, idx: usize, bands: &BandSet) -> LoadMetrics {
        let kin = self.subtrack_series(idx);
        LoadMetrics::compute(&kin, &SampleMask::all(&kin), bands)
    }

    pub fn censored_frames(&self) -> usize {
        self.subtracks.iter().filter(|s| !s.observed).map(Subtrack::len).sum()
    }
}

/// Both halves of one player's game.
#[derive(Clone, Debug)]
pub struct PlayerGame {
    pub game_id: String,
    pub player_id: String,
    pub position: Position,
    pub halves: Vec<HalfRecord>,
}

impl PlayerGame {
    pub fn metrics(&self, scope: Scope, bands: &BandSet) -> LoadMetrics {
        self.halves
            .iter()
            .map(|h| h.metrics(scope, bands))
            .fold(LoadMetrics::empty(), |acc, m| acc.merge(&m))
    }

    pub fn total_frames(&self) -> usize {
        self.halves.iter().map(|h| h.track.len()).sum()
    }

    pub fn censored_frames(&self) -> usize {
        self.halves.iter().map(HalfRecord::censored_frames).sum()
    }

    /// Censored share of playing time, by frame count.
    pub fn censored_fraction(&self) -> f64 {
        let total = self.total_frames();
        if total == 0 {
            0.0
        } else {
            self.censored_frames() as f64 / total as f64
        }
    }

    /// `(half index, subtrack index)` of every censored subtrack, in order.
    pub fn censored_subtracks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.halves.iter().enumerate().flat_map(|(h, rec)| {
            rec.subtracks
                .iter()
                .enumerate()
                .filter(|(_, s)| !s.observed)
                .map(move |(i, _)| (h, i))
        })
    }
}

/// Stable 64-bit mix used to derive independent per-item seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Censors every track and groups halves into player-games, ordered by
/// `(game_id, player_id)`.
pub fn assemble(
    tracks: Vec<PlayerTrack>,
    events: &BTreeMap<(String, u8), Vec<Event>>,
    opts: &AssemblyOptions,
) -> Result<Vec<PlayerGame>> {
    opts.window.validate()?;
    if let Censoring::Random { p } = opts.censoring {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("censoring probability {p} outside [0, 1]")));
        }
    }
    let mut paths = BTreeMap::new();
    if opts.censoring == Censoring::Camera {
        for (key, evs) in events {
            paths.insert(key.clone(), build_camera_path(evs)?);
        }
    }

    let halves: Vec<HalfRecord> = tracks
        .into_par_iter()
        .enumerate()
        .map(|(i, track)| {
            let visibility = match &opts.censoring {
                Censoring::Camera => {
                    let key = (track.game_id.clone(), track.half);
                    let path = paths.get(&key).ok_or_else(|| {
                        Error::Validation(format!(
                            "no events for game {} half {}",
                            track.game_id, track.half
                        ))
                    })?;
                    censor(&track, path, &opts.window)
                }
                Censoring::Random { p } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, i as u64));
                    censor_random(track.len(), *p, &mut rng)
                }
            };
            HalfRecord::new(track, &visibility, opts.bandwidth)
        })
        .collect::<Result<_>>()?;

    let mut games: BTreeMap<(String, String), PlayerGame> = BTreeMap::new();
    for half in halves {
        let key = (half.track.game_id.clone(), half.track.player_id.clone());
        let pg = games.entry(key).or_insert_with(|| PlayerGame {
            game_id: half.track.game_id.clone(),
            player_id: half.track.player_id.clone(),
            position: half.track.position,
            halves: Vec::new(),
        });
        if pg.position != half.track.position {
            return Err(Error::Validation(format!(
                "player {} changes position between halves",
                pg.player_id
            )));
        }
        pg.halves.push(half);
    }
    let mut out: Vec<PlayerGame> = games.into_values().collect();
    for pg in &mut out {
        pg.halves.sort_by_key(|h| h.track.half);
    }
    Ok(out)
}

/// Observed, censored and full metrics for every player-game.
pub fn metrics_rows(corpus: &[PlayerGame], bands: &BandSet) -> Vec<MetricsRow> {
    corpus
        .par_iter()
        .flat_map_iter(|pg| {
            Scope::ALL.map(|scope| MetricsRow {
                game_id: pg.game_id.clone(),
                player_id: pg.player_id.clone(),
                scope,
                metrics: pg.metrics(scope, bands),
            })
        })
        .collect()
}

/// All subtracks in corpus order.
pub fn all_subtracks(corpus: &[PlayerGame]) -> Vec<Subtrack> {
    corpus
        .iter()
        .flat_map(|pg| pg.halves.iter().flat_map(|h| h.subtracks.iter().cloned()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::DEFAULT_BANDWIDTH;
    use crate::metrics::Metric;
    use crate::tracking::{Frame, FRAME_DT};

    fn zigzag_track(n: usize) -> PlayerTrack {
        PlayerTrack {
            game_id: "g".into(),
            player_id: "p".into(),
            half: 1,
            position: Position::Midfielder,
            frames: (0..n)
                .map(|i| {
                    let t = i as f64 * FRAME_DT;
                    Frame::new(t, 10.0 + 8.0 * (t / 3.0).sin() + 0.3 * t, 5.0 * (t / 2.0).cos())
                })
                .collect(),
        }
    }

    #[test]
    fn subtrack_metrics_sum_to_censored_scope() {
        let track = zigzag_track(400);
        let vis: Vec<bool> = (0..400).map(|i| (i / 37) % 2 == 0 || i % 11 == 0).collect();
        let rec = HalfRecord::new(track, &vis, DEFAULT_BANDWIDTH).unwrap();
        let bands = BandSet::default();
        let censored = rec.metrics(Scope::Censored, &bands);
        let mut sum = LoadMetrics::empty();
        for (i, s) in rec.subtracks.iter().enumerate() {
            if !s.observed {
                sum = sum.merge(&rec.subtrack_metrics(i, &bands));
            }
        }
        for m in Metric::ALL {
            let a = censored.value(m).unwrap();
            let b = sum.value(m).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{m}: {a} vs {b}");
        }
        assert_eq!(censored.speed_samples, sum.speed_samples);
    }

    #[test]
    fn fully_observed_has_no_censored_time() {
        let track = zigzag_track(50);
        let rec = HalfRecord::new(track, &[true; 50], DEFAULT_BANDWIDTH).unwrap();
        let pg = PlayerGame {
            game_id: "g".into(),
            player_id: "p".into(),
            position: Position::Midfielder,
            halves: vec![rec],
        };
        assert_eq!(pg.censored_fraction(), 0.0);
        assert_eq!(pg.censored_subtracks().count(), 0);
    }

    #[test]
    fn seeds_differ_per_stream() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}
