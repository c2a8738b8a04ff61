//! Synthetic match generator.
//!
//! Each player follows an elastic pull towards a home spot that shifts with
//! the ball, plus an Ornstein-Uhlenbeck wander and occasional sprints. The
//! ball is passed between players at Poisson times and every pass is
//! recorded as an event at the carrier's location. With a positive camera
//! bias, players near the latest event move faster, so on-camera play is
//! more intense than off-camera play.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::derive_seed;
use crate::error::{Error, Result};
use crate::tracking::{write_events, write_frames, Event, Frame, PlayerTrack, Position, FRAME_DT};

/// Per-position multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionScales {
    pub defender: f64,
    pub midfielder: f64,
    pub forward: f64,
}

impl PositionScales {
    pub fn get(&self, p: Position) -> f64 {
        match p {
            Position::Defender => self.defender,
            Position::Midfielder => self.midfielder,
            Position::Forward => self.forward,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub games: usize,
    pub players_per_side: usize,
    pub pitch_length: f64,
    pub pitch_width: f64,
    /// Seconds per half.
    pub half_length: f64,
    /// Home spot along the pitch as a fraction of its length, for a side
    /// attacking towards increasing x.
    pub home_depth: PositionScales,
    /// Scales the wander of each position class.
    pub mobility: PositionScales,
    /// Typical jogging speed (m/s) of the wander process.
    pub mean_speed: f64,
    /// Sprint starts per player-second.
    pub sprint_rate: f64,
    pub sprint_speed: f64,
    /// Mean sprint length in seconds.
    pub sprint_duration: f64,
    /// Passes per second.
    pub event_rate: f64,
    /// Speed boost `1 + b` for players near the latest event.
    pub camera_bias: f64,
    pub bias_radius: f64,
    /// Hard limit on frame-to-frame speed.
    pub speed_cap: f64,
    /// Multiplies all movement; 0 gives stationary players.
    pub speed_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            games: 18,
            players_per_side: 10,
            pitch_length: 105.0,
            pitch_width: 68.0,
            half_length: 600.0,
            home_depth: PositionScales {
                defender: 0.22,
                midfielder: 0.42,
                forward: 0.62,
            },
            mobility: PositionScales {
                defender: 0.85,
                midfielder: 1.15,
                forward: 1.0,
            },
            mean_speed: 1.6,
            sprint_rate: 0.02,
            sprint_speed: 7.0,
            sprint_duration: 2.5,
            event_rate: 0.5,
            camera_bias: 0.0,
            bias_radius: 20.0,
            speed_cap: 9.5,
            speed_scale: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pitch_length", self.pitch_length),
            ("pitch_width", self.pitch_width),
            ("half_length", self.half_length),
            ("mean_speed", self.mean_speed),
            ("sprint_rate", self.sprint_rate),
            ("sprint_speed", self.sprint_speed),
            ("sprint_duration", self.sprint_duration),
            ("event_rate", self.event_rate),
            ("bias_radius", self.bias_radius),
            ("speed_cap", self.speed_cap),
            ("mobility.defender", self.mobility.defender),
            ("mobility.midfielder", self.mobility.midfielder),
            ("mobility.forward", self.mobility.forward),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("synth.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("camera_bias", self.camera_bias),
            ("speed_scale", self.speed_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("synth.{name} must be nonnegative, got {v}")));
            }
        }
        for p in Position::ALL {
            let d = self.home_depth.get(p);
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::Config(format!("synth.home_depth for {p} must lie in [0, 1]")));
            }
        }
        if self.games == 0 {
            return Err(Error::Config("synth.games must be at least 1".into()));
        }
        if self.players_per_side < 3 {
            return Err(Error::Config("synth.players_per_side must be at least 3".into()));
        }
        if self.event_rate * FRAME_DT >= 1.0 || self.sprint_rate * FRAME_DT >= 1.0 {
            return Err(Error::Config("synth rates must stay below one per frame".into()));
        }
        if self.half_length < 1.0 {
            return Err(Error::Config("synth.half_length must be at least 1 s".into()));
        }
        Ok(())
    }

    /// Position classes of one side: 40% defenders, 20% forwards, the rest
    /// midfielders.
    pub fn formation(&self) -> Vec<Position> {
        let n = self.players_per_side;
        let def = ((n as f64) * 0.4).round() as usize;
        let fwd = ((n as f64) * 0.2).round().max(1.0) as usize;
        let mid = n - def - fwd;
        std::iter::repeat_n(Position::Defender, def)
            .chain(std::iter::repeat_n(Position::Midfielder, mid))
            .chain(std::iter::repeat_n(Position::Forward, fwd))
            .collect()
    }
}

/// Generated tracks (both sides, both halves) and pass events.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub tracks: Vec<PlayerTrack>,
    pub events: Vec<Event>,
}

impl SynthCorpus {
    /// Writes `frames.csv` and `events.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_frames(BufWriter::new(File::create(dir.join("frames.csv"))?), &self.tracks)?;
        write_events(BufWriter::new(File::create(dir.join("events.csv"))?), &self.events)?;
        Ok(())
    }
}

pub fn game_id(index: usize) -> String {
    format!("g{:02}", index + 1)
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let games: Vec<(Vec<PlayerTrack>, Vec<Event>)> = (0..cfg.games)
        .into_par_iter()
        .map(|g| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, g as u64));
            let mut tracks = Vec::new();
            let mut events = Vec::new();
            for half in 1..=2u8 {
                let (t, e) = simulate_half(cfg, &game_id(g), g, half, &mut rng);
                tracks.extend(t);
                events.extend(e);
            }
            (tracks, events)
        })
        .collect();
    let mut corpus = SynthCorpus {
        tracks: Vec::new(),
        events: Vec::new(),
    };
    for (t, e) in games {
        corpus.tracks.extend(t);
        corpus.events.extend(e);
    }
    corpus
        .tracks
        .sort_by(|a, b| (&a.game_id, &a.player_id, a.half).cmp(&(&b.game_id, &b.player_id, b.half)));
    Ok(corpus)
}

struct Agent {
    id: String,
    position: Position,
    home: (f64, f64),
    pos: (f64, f64),
    vel: (f64, f64),
    wander: (f64, f64),
    sprint: Option<(f64, (f64, f64))>,
    frames: Vec<Frame>,
}

/// Relaxation time of velocity towards its target (s).
const VELOCITY_TAU: f64 = 0.6;
/// Wander mean-reversion rate (1/s).
const WANDER_THETA: f64 = 0.4;
/// Pull towards the home spot (1/s).
const HOME_PULL: f64 = 0.06;
/// Fraction of the ball's offset from the centre spot followed by anchors.
const BALL_FOLLOW: (f64, f64) = (0.45, 0.3);
/// Width (m) and strength (1/s) of the touchline push.
const WALL_MARGIN: f64 = 5.0;
const WALL_PUSH: f64 = 1.0;
/// Spread (rad) of sprint directions around the way back to the anchor.
const SPRINT_SPREAD: f64 = 0.8;
/// Decay length (m) for choosing the next ball carrier.
const PASS_LENGTH: f64 = 15.0;

fn mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn simulate_half(
    cfg: &SynthConfig,
    game: &str,
    game_index: usize,
    half: u8,
    rng: &mut ChaCha8Rng,
) -> (Vec<PlayerTrack>, Vec<Event>) {
    let (len, wid) = (cfg.pitch_length, cfg.pitch_width);
    let centre = (len / 2.0, wid / 2.0);
    let n_frames = (cfg.half_length / FRAME_DT).round() as usize;
    let formation = cfg.formation();

    let mut agents = Vec::new();
    for (side, prefix) in [(0usize, "H".to_string()), (1, format!("V{:02}", game_index + 1))] {
        // sides swap ends at half time
        let direction = if (side == 0) == (half == 1) { 1.0 } else { -1.0 };
        for role in Position::ALL {
            let members: Vec<usize> = (0..formation.len()).filter(|&i| formation[i] == role).collect();
            for (k, &i) in members.iter().enumerate() {
                let depth = cfg.home_depth.get(role) * len;
                let x = if direction > 0.0 { depth } else { len - depth };
                let y = wid * (k as f64 + 1.0) / (members.len() as f64 + 1.0);
                agents.push(Agent {
                    id: format!("{prefix}{:02}", i + 1),
                    position: role,
                    home: (x, y),
                    pos: (x, y),
                    vel: (0.0, 0.0),
                    wander: (0.0, 0.0),
                    sprint: None,
                    frames: Vec::with_capacity(n_frames),
                });
            }
        }
    }

    let mut carrier = rng.random_range(0..agents.len());
    let mut events = vec![Event {
        game_id: game.to_string(),
        half,
        t: 0.0,
        x: mm(centre.0),
        y: mm(centre.1),
        kind: "kickoff".into(),
    }];
    let mut last_event = centre;
    let dt = FRAME_DT;
    let wander_sd = cfg.mean_speed * (2.0 * WANDER_THETA * dt).sqrt();
    let max_step = (cfg.speed_cap * dt - 0.002).max(0.0);

    for step in 0..n_frames {
        let t = step as f64 * dt;
        for a in agents.iter_mut() {
            a.frames.push(Frame::new(t, mm(a.pos.0), mm(a.pos.1)));
        }
        if step > 0 && rng.random_bool(cfg.event_rate * dt) {
            let from = agents[carrier].pos;
            events.push(Event {
                game_id: game.to_string(),
                half,
                t,
                x: mm(from.0),
                y: mm(from.1),
                kind: "pass".into(),
            });
            last_event = (mm(from.0), mm(from.1));
            let weights: Vec<f64> = agents
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if i == carrier {
                        0.0
                    } else {
                        let d = (a.pos.0 - from.0).hypot(a.pos.1 - from.1);
                        (-d / PASS_LENGTH).exp()
                    }
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (i, w) in weights.iter().enumerate() {
                if u < *w || i + 1 == weights.len() {
                    carrier = i;
                    break;
                }
                u -= w;
            }
        }
        let ball = agents[carrier].pos;
        let shift = (
            BALL_FOLLOW.0 * (ball.0 - centre.0),
            BALL_FOLLOW.1 * (ball.1 - centre.1),
        );

        for a in agents.iter_mut() {
            let mobility = cfg.mobility.get(a.position);
            a.wander.0 += -WANDER_THETA * a.wander.0 * dt + wander_sd * mobility * gauss(rng);
            a.wander.1 += -WANDER_THETA * a.wander.1 * dt + wander_sd * mobility * gauss(rng);

            let anchor = (a.home.0 + shift.0, a.home.1 + shift.1);
            let mut target = (
                HOME_PULL * (anchor.0 - a.pos.0) + a.wander.0,
                HOME_PULL * (anchor.1 - a.pos.1) + a.wander.1,
            );
            // soft touchlines keep players off the clamp
            target.0 += WALL_PUSH * ((WALL_MARGIN - a.pos.0).max(0.0) - (a.pos.0 - (len - WALL_MARGIN)).max(0.0));
            target.1 += WALL_PUSH * ((WALL_MARGIN - a.pos.1).max(0.0) - (a.pos.1 - (wid - WALL_MARGIN)).max(0.0));
            match a.sprint {
                Some((left, dir)) if left > 0.0 => {
                    target = (dir.0 * cfg.sprint_speed, dir.1 * cfg.sprint_speed);
                    a.sprint = Some((left - dt, dir));
                }
                _ => {
                    a.sprint = None;
                    if rng.random_bool(cfg.sprint_rate * dt) {
                        let angle = (anchor.1 - a.pos.1).atan2(anchor.0 - a.pos.0)
                            + SPRINT_SPREAD * gauss(rng);
                        let duration = -cfg.sprint_duration * (1.0 - rng.random::<f64>()).ln();
                        a.sprint = Some((duration, (angle.cos(), angle.sin())));
                    }
                }
            }
            a.vel.0 += (target.0 - a.vel.0) * dt / VELOCITY_TAU;
            a.vel.1 += (target.1 - a.vel.1) * dt / VELOCITY_TAU;

            let near = (a.pos.0 - last_event.0).hypot(a.pos.1 - last_event.1) <= cfg.bias_radius;
            let boost = if near { 1.0 + cfg.camera_bias } else { 1.0 };
            let mut dx = a.vel.0 * dt * boost * cfg.speed_scale;
            let mut dy = a.vel.1 * dt * boost * cfg.speed_scale;
            let d = dx.hypot(dy);
            if d > max_step {
                dx *= max_step / d;
                dy *= max_step / d;
            }
            a.pos = ((a.pos.0 + dx).clamp(0.0, len), (a.pos.1 + dy).clamp(0.0, wid));
        }
    }

    let tracks = agents
        .into_iter()
        .map(|a| PlayerTrack {
            game_id: game.to_string(),
            player_id: a.id,
            half,
            position: a.position,
            frames: a.frames,
        })
        .collect();
    (tracks, events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            games: 2,
            half_length: 60.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_formation() {
        let f = SynthConfig::default().formation();
        assert_eq!(f.iter().filter(|p| **p == Position::Defender).count(), 4);
        assert_eq!(f.iter().filter(|p| **p == Position::Midfielder).count(), 4);
        assert_eq!(f.iter().filter(|p| **p == Position::Forward).count(), 2);
    }

    #[test]
    fn tracks_are_valid_and_capped() {
        let c = generate_corpus(&small()).unwrap();
        assert_eq!(c.tracks.len(), 2 * 2 * 20);
        for t in &c.tracks {
            t.validate().unwrap();
            assert_eq!(t.len(), 600);
            for w in t.frames.windows(2) {
                assert!(w[0].distance_to(&w[1]) / FRAME_DT <= 9.5);
            }
        }
        assert!(c.events.iter().any(|e| e.kind == "kickoff"));
    }

    #[test]
    fn stationary_when_speed_scale_zero() {
        let c = generate_corpus(&SynthConfig {
            speed_scale: 0.0,
            ..small()
        })
        .unwrap();
        for t in &c.tracks {
            assert!(t.frames.iter().all(|f| f.x == t.frames[0].x && f.y == t.frames[0].y));
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(generate_corpus(&small()).unwrap(), generate_corpus(&small()).unwrap());
        let other = generate_corpus(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(generate_corpus(&small()).unwrap(), other);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate_corpus(&SynthConfig {
            event_rate: 0.0,
            ..small()
        })
        .is_err());
        assert!(generate_corpus(&SynthConfig {
            camera_bias: -0.1,
            ..small()
        })
        .is_err());
    }
}
