//! Frame and event ingestion, the simulated broadcast camera, censoring and
//! subtrack segmentation.
//!
//! All tracks are sampled at 10 Hz. Timestamps are carried as `f64` seconds
//! but validated against an integer tick grid (`t * 10`), so spacing checks
//! are exact.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::str::FromStr;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling interval in seconds.
pub const FRAME_DT: f64 = 0.1;

const TICK_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl Frame {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }

    /// Index of the frame on the 10 Hz grid.
    pub fn tick(&self) -> i64 {
        (self.t / FRAME_DT).round() as i64
    }

    pub fn distance_to(&self, other: &Frame) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Defender,
    Midfielder,
    Forward,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Defender, Position::Midfielder, Position::Forward];

    pub fn as_str(&self) -> &'static str {
        match self {
            Position::Defender => "defender",
            Position::Midfielder => "midfielder",
            Position::Forward => "forward",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Position {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "defender" => Ok(Position::Defender),
            "midfielder" => Ok(Position::Midfielder),
            "forward" => Ok(Position::Forward),
            "goalkeeper" | "keeper" => Err(Error::Validation(
                "goalkeepers must be excluded before ingestion".into(),
            )),
            other => Err(Error::Validation(format!("unknown position label `{other}`"))),
        }
    }
}

/// A uniformly sampled position sequence for one player in one half.
#[derive(Clone, Debug, PartialEq)]
pub struct PlayerTrack {
    pub game_id: String,
    pub player_id: String,
    pub half: u8,
    pub position: Position,
    pub frames: Vec<Frame>,
}

impl PlayerTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Track duration counted as frames x 0.1 s.
    pub fn elapsed(&self) -> f64 {
        self.frames.len() as f64 * FRAME_DT
    }

    /// Checks the ordering and constant 0.1 s spacing invariants.
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.half, 1 | 2) {
            return Err(Error::Validation(format!(
                "half must be 1 or 2, got {} for player {}",
                self.half, self.player_id
            )));
        }
        let gap = |detail: String| Error::Gap {
            game_id: self.game_id.clone(),
            player_id: self.player_id.clone(),
            half: self.half,
            detail,
        };
        for (i, f) in self.frames.iter().enumerate() {
            if !(f.t >= 0.0) || !f.x.is_finite() || !f.y.is_finite() {
                return Err(Error::Validation(format!(
                    "frame {i} of player {} half {} has invalid values",
                    self.player_id, self.half
                )));
            }
            if (f.t / FRAME_DT - f.tick() as f64).abs() > TICK_TOLERANCE {
                return Err(gap(format!("t={} is not on the 0.1 s grid", f.t)));
            }
        }
        for pair in self.frames.windows(2) {
            if pair[1].tick() - pair[0].tick() != 1 {
                return Err(gap(format!("t={} followed by t={}", pair[0].t, pair[1].t)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub game_id: String,
    pub half: u8,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub kind: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Piecewise-linear camera centre through event locations, constant outside
/// the knot range.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraPath {
    knots: Vec<Knot>,
}

impl CameraPath {
    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn position_at(&self, t: f64) -> (f64, f64) {
        let knots = &self.knots;
        let first = knots[0];
        let last = knots[knots.len() - 1];
        if t <= first.t {
            return (first.x, first.y);
        }
        if t >= last.t {
            return (last.x, last.y);
        }
        // first knot strictly after t; 1 <= idx < len here
        let idx = knots.partition_point(|k| k.t <= t);
        let (a, b) = (knots[idx - 1], knots[idx]);
        let w = (t - a.t) / (b.t - a.t);
        (a.x + w * (b.x - a.x), a.y + w * (b.y - a.y))
    }
}

/// Builds the camera path by linear interpolation between event locations.
///
/// Events are sorted by time. Repeated timestamps with identical locations are
/// collapsed; repeated timestamps with different locations are rejected.
pub fn build_camera_path(events: &[Event]) -> Result<CameraPath> {
    if events.is_empty() {
        return Err(Error::Empty("camera path needs at least one event"));
    }
    let mut sorted: Vec<&Event> = events.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));

    let mut knots: Vec<Knot> = Vec::with_capacity(sorted.len());
    for e in sorted {
        if !e.t.is_finite() || !e.x.is_finite() || !e.y.is_finite() {
            return Err(Error::Validation(format!("non-finite event at t={}", e.t)));
        }
        if let Some(prev) = knots.last() {
            if prev.t == e.t {
                if prev.x == e.x && prev.y == e.y {
                    continue;
                }
                return Err(Error::ConflictingEvents {
                    t: e.t,
                    x1: prev.x,
                    y1: prev.y,
                    x2: e.x,
                    y2: e.y,
                });
            }
        }
        knots.push(Knot { t: e.t, x: e.x, y: e.y });
    }
    Ok(CameraPath { knots })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraWindow {
    pub width: f64,
    pub height: f64,
}

impl Default for CameraWindow {
    fn default() -> Self {
        Self {
            width: 40.0,
            height: 40.0,
        }
    }
}

impl CameraWindow {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        let w = Self { width, height };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width > 0.0 && self.height > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "camera window must be positive, got {}x{}",
                self.width, self.height
            )))
        }
    }

    /// Closed-boundary containment test relative to the window centre.
    pub fn contains(&self, center: (f64, f64), x: f64, y: f64) -> bool {
        (x - center.0).abs() <= self.width / 2.0 && (y - center.1).abs() <= self.height / 2.0
    }
}

/// Per-frame visibility of `track` under a window following `path`.
pub fn censor(track: &PlayerTrack, path: &CameraPath, window: &CameraWindow) -> Vec<bool> {
    track
        .frames
        .iter()
        .map(|f| window.contains(path.position_at(f.t), f.x, f.y))
        .collect()
}

/// Censors each frame independently with probability `p`, regardless of
/// where the player is. Used to produce data that is missing completely at
/// random.
pub fn censor_random<R: rand::Rng + ?Sized>(n_frames: usize, p: f64, rng: &mut R) -> Vec<bool> {
    (0..n_frames).map(|_| !rng.random_bool(p)).collect()
}

/// A maximal run of equally visible frames within a track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subtrack {
    pub subtrack_id: String,
    pub game_id: String,
    pub player_id: String,
    pub half: u8,
    pub observed: bool,
    /// Frame indices in the parent track.
    pub range: Range<usize>,
    pub exit_point: Option<(f64, f64)>,
    pub entry_point: Option<(f64, f64)>,
    pub elapsed: f64,
    pub gap_distance: Option<f64>,
}

impl Subtrack {
    pub fn frames<'a>(&self, track: &'a PlayerTrack) -> &'a [Frame] {
        &track.frames[self.range.clone()]
    }

    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Splits a track into maximal runs of equal visibility.
///
/// Exit and entry points are filled only for censored runs, from the
/// observed frames immediately before and after the run.
pub fn segment_subtracks(track: &PlayerTrack, mask: &[bool]) -> Result<Vec<Subtrack>> {
    if mask.len() != track.frames.len() {
        return Err(Error::Validation(format!(
            "visibility mask has {} entries for {} frames",
            mask.len(),
            track.frames.len()
        )));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < mask.len() {
        let observed = mask[start];
        let end = mask[start..]
            .iter()
            .position(|&m| m != observed)
            .map_or(mask.len(), |off| start + off);

        let (exit_point, entry_point) = if observed {
            (None, None)
        } else {
            let exit = start.checked_sub(1).map(|i| track.frames[i]);
            let entry = track.frames.get(end).copied();
            (exit.map(|f| (f.x, f.y)), entry.map(|f| (f.x, f.y)))
        };
        let gap_distance = match (exit_point, entry_point) {
            (Some(a), Some(b)) => Some((b.0 - a.0).hypot(b.1 - a.1)),
            _ => None,
        };
        out.push(Subtrack {
            subtrack_id: format!(
                "{}:{}:{}:{}",
                track.game_id,
                track.player_id,
                track.half,
                out.len()
            ),
            game_id: track.game_id.clone(),
            player_id: track.player_id.clone(),
            half: track.half,
            observed,
            range: start..end,
            exit_point,
            entry_point,
            elapsed: (end - start) as f64 * FRAME_DT,
            gap_distance,
        });
        start = end;
    }
    Ok(out)
}

/// Rebuilds the per-frame visibility mask from a segmentation.
pub fn mask_from_subtracks(subtracks: &[Subtrack]) -> Vec<bool> {
    subtracks
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.observed, s.len()))
        .collect()
}

#[derive(Debug, Deserialize)]
struct FrameRow {
    game_id: String,
    player_id: String,
    half: u8,
    position: String,
    t: f64,
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
struct EventRow {
    game_id: String,
    half: u8,
    t: f64,
    x: f64,
    y: f64,
    kind: String,
}

const FRAME_COLUMNS: [&str; 7] = ["game_id", "player_id", "half", "position", "t", "x", "y"];
const EVENT_COLUMNS: [&str; 6] = ["game_id", "half", "t", "x", "y", "kind"];

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, required: &[&str]) -> Result<()> {
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let missing: Vec<String> = required
        .iter()
        .filter(|c| !header.iter().any(|h| h == *c))
        .map(|c| c.to_string())
        .collect();
    if missing.is_empty() {
        return Ok(());
    }
    let extra = header
        .into_iter()
        .filter(|h| !required.contains(&h.as_str()))
        .collect();
    Err(Error::Schema { missing, extra })
}

fn row_line(err: &csv::Error) -> u64 {
    err.position().map_or(0, |p| p.line())
}

fn parse_err(err: csv::Error) -> Error {
    Error::Parse {
        line: row_line(&err),
        message: err.to_string(),
    }
}

/// Parses a frames file into one validated track per (game, player, half),
/// ordered by those keys.
pub fn parse_frames<R: Read>(reader: R) -> Result<Vec<PlayerTrack>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &FRAME_COLUMNS)?;
    let mut groups: BTreeMap<(String, String, u8), PlayerTrack> = BTreeMap::new();
    for row in rdr.deserialize::<FrameRow>() {
        let row = row.map_err(parse_err)?;
        let position: Position = row.position.parse()?;
        let key = (row.game_id.clone(), row.player_id.clone(), row.half);
        let track = groups.entry(key).or_insert_with(|| PlayerTrack {
            game_id: row.game_id,
            player_id: row.player_id,
            half: row.half,
            position,
            frames: Vec::new(),
        });
        if track.position != position {
            return Err(Error::Validation(format!(
                "player {} listed as both {} and {}",
                track.player_id, track.position, position
            )));
        }
        track.frames.push(Frame::new(row.t, row.x, row.y));
    }
    let mut tracks: Vec<PlayerTrack> = groups.into_values().collect();
    for track in &mut tracks {
        track.frames.sort_by(|a, b| a.t.total_cmp(&b.t));
        track.validate()?;
    }
    Ok(tracks)
}

/// Parses an events file grouped by (game, half).
pub fn parse_events<R: Read>(reader: R) -> Result<BTreeMap<(String, u8), Vec<Event>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &EVENT_COLUMNS)?;
    let mut groups: BTreeMap<(String, u8), Vec<Event>> = BTreeMap::new();
    for row in rdr.deserialize::<EventRow>() {
        let row = row.map_err(parse_err)?;
        groups
            .entry((row.game_id.clone(), row.half))
            .or_default()
            .push(Event {
                game_id: row.game_id,
                half: row.half,
                t: row.t,
                x: row.x,
                y: row.y,
                kind: row.kind,
            });
    }
    Ok(groups)
}

pub fn write_frames<W: Write>(writer: W, tracks: &[PlayerTrack]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FRAME_COLUMNS)?;
    for track in tracks {
        let half = track.half.to_string();
        for f in &track.frames {
            w.write_record([
                track.game_id.as_str(),
                track.player_id.as_str(),
                half.as_str(),
                track.position.as_str(),
                &format!("{:.1}", f.t),
                &f.x.to_string(),
                &f.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(writer: W, events: &[Event]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENT_COLUMNS)?;
    for e in events {
        w.write_record([
            e.game_id.as_str(),
            &e.half.to_string(),
            &format!("{:.1}", e.t),
            &e.x.to_string(),
            &e.y.to_string(),
            e.kind.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_subtracks<W: Write>(writer: W, subtracks: &[Subtrack]) -> Result<()> {
    fn opt(v: Option<f64>) -> String {
        v.map(|v| v.to_string()).unwrap_or_default()
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "subtrack_id",
        "game_id",
        "player_id",
        "half",
        "observed",
        "first_frame",
        "frames",
        "elapsed",
        "exit_x",
        "exit_y",
        "entry_x",
        "entry_y",
        "gap_distance",
    ])?;
    for s in subtracks {
        w.write_record([
            s.subtrack_id.clone(),
            s.game_id.clone(),
            s.player_id.clone(),
            s.half.to_string(),
            u8::from(s.observed).to_string(),
            s.range.start.to_string(),
            s.len().to_string(),
            format!("{:.1}", s.elapsed),
            opt(s.exit_point.map(|p| p.0)),
            opt(s.exit_point.map(|p| p.1)),
            opt(s.entry_point.map(|p| p.0)),
            opt(s.entry_point.map(|p| p.1)),
            opt(s.gap_distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track_from_xy(xy: &[(f64, f64)]) -> PlayerTrack {
        PlayerTrack {
            game_id: "g".into(),
            player_id: "p".into(),
            half: 1,
            position: Position::Midfielder,
            frames: xy
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| Frame::new(i as f64 * FRAME_DT, x, y))
                .collect(),
        }
    }

    fn ev(t: f64, x: f64, y: f64) -> Event {
        Event {
            game_id: "g".into(),
            half: 1,
            t,
            x,
            y,
            kind: "pass".into(),
        }
    }

    #[test]
    fn parse_minimal_track() {
        let csv = "game_id,player_id,half,position,t,x,y\n\
                   g1,p1,1,defender,0.0,1.0,2.0\n\
                   g1,p1,1,defender,0.1,1.5,2.0\n";
        let tracks = parse_frames(csv.as_bytes()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].frames.len(), 2);
        assert_eq!(tracks[0].position, Position::Defender);
    }

    #[test]
    fn parse_rejects_gap() {
        let csv = "game_id,player_id,half,position,t,x,y\n\
                   g1,p1,1,defender,0.0,1.0,2.0\n\
                   g1,p1,1,defender,0.3,1.5,2.0\n";
        match parse_frames(csv.as_bytes()) {
            Err(Error::Gap { player_id, half, .. }) => {
                assert_eq!(player_id, "p1");
                assert_eq!(half, 1);
            }
            other => panic!("expected gap error, got {other:?}"),
        }
    }

    #[test]
    fn parse_groups_players_and_halves() {
        let mut csv = String::from("game_id,player_id,half,position,t,x,y\n");
        for p in ["a", "b"] {
            for h in [1, 2] {
                for t in ["0.0", "0.1", "0.2"] {
                    csv.push_str(&format!("g,{p},{h},forward,{t},0,0\n"));
                }
            }
        }
        assert_eq!(parse_frames(csv.as_bytes()).unwrap().len(), 4);
    }

    #[test]
    fn parse_sorts_unordered_rows() {
        let csv = "game_id,player_id,half,position,t,x,y\n\
                   g1,p1,2,forward,0.2,3,0\n\
                   g1,p1,2,forward,0.0,1,0\n\
                   g1,p1,2,forward,0.1,2,0\n";
        let tracks = parse_frames(csv.as_bytes()).unwrap();
        let xs: Vec<f64> = tracks[0].frames.iter().map(|f| f.x).collect();
        assert_eq!(xs, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn parse_reports_line_of_malformed_row() {
        let csv = "game_id,player_id,half,position,t,x,y\n\
                   g1,p1,1,defender,0.0,1.0,2.0\n\
                   g1,p1,1,defender,0.1,abc,2.0\n";
        match parse_frames(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_unknown_position() {
        let csv = "game_id,player_id,half,position,t,x,y\ng1,p1,1,striker,0.0,1.0,2.0\n";
        assert!(matches!(parse_frames(csv.as_bytes()), Err(Error::Validation(_))));
        let csv = "game_id,player_id,half,position,t,x,y\ng1,p1,1,goalkeeper,0.0,1.0,2.0\n";
        assert!(matches!(parse_frames(csv.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn camera_path_interpolates() {
        let path = build_camera_path(&[ev(0.0, 0.0, 0.0), ev(10.0, 10.0, 0.0)]).unwrap();
        assert_eq!(path.position_at(5.0), (5.0, 0.0));

        let path = build_camera_path(&[ev(3.0, 20.0, 30.0)]).unwrap();
        assert_eq!(path.position_at(-4.0), (20.0, 30.0));
        assert_eq!(path.position_at(3.0), (20.0, 30.0));
        assert_eq!(path.position_at(1e4), (20.0, 30.0));

        let path = build_camera_path(&[
            ev(0.0, 0.0, 0.0),
            ev(4.0, 8.0, 0.0),
            ev(8.0, 8.0, 8.0),
        ])
        .unwrap();
        assert_eq!(path.position_at(6.0), (8.0, 4.0));
        assert_eq!(path.position_at(4.0), (8.0, 0.0));
    }

    #[test]
    fn camera_path_duplicates() {
        let path = build_camera_path(&[ev(1.0, 2.0, 3.0), ev(1.0, 2.0, 3.0), ev(0.0, 0.0, 0.0)])
            .unwrap();
        assert_eq!(path.knots().len(), 2);
        assert!(matches!(
            build_camera_path(&[ev(1.0, 2.0, 3.0), ev(1.0, 2.0, 4.0)]),
            Err(Error::ConflictingEvents { .. })
        ));
        assert!(matches!(build_camera_path(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn window_boundary_is_closed() {
        let path = build_camera_path(&[ev(0.0, 50.0, 50.0)]).unwrap();
        let w = CameraWindow::default();
        let track = track_from_xy(&[(69.9, 50.0), (70.1, 50.0), (70.0, 70.0), (30.0, 30.0)]);
        assert_eq!(censor(&track, &path, &w), vec![true, false, true, true]);
        assert!(CameraWindow::new(0.0, 40.0).is_err());
    }

    #[test]
    fn segments_runs() {
        let track = track_from_xy(&[(0.0, 0.0); 5]);
        let subs = segment_subtracks(&track, &[true, true, false, false, true]).unwrap();
        let lens: Vec<usize> = subs.iter().map(Subtrack::len).collect();
        let flags: Vec<bool> = subs.iter().map(|s| s.observed).collect();
        assert_eq!(lens, vec![2, 2, 1]);
        assert_eq!(flags, vec![true, false, true]);
        assert!((subs[1].elapsed - 0.2).abs() < 1e-12);

        let all = segment_subtracks(&track, &[true; 5]).unwrap();
        assert_eq!(all.len(), 1);
        assert!(all[0].observed);
        assert!(segment_subtracks(&track, &[true; 4]).is_err());
    }

    #[test]
    fn gap_distance_from_boundary_frames() {
        let track = track_from_xy(&[(0.0, 0.0), (9.0, 9.0), (3.0, 4.0)]);
        let subs = segment_subtracks(&track, &[true, false, true]).unwrap();
        assert_eq!(subs[1].exit_point, Some((0.0, 0.0)));
        assert_eq!(subs[1].entry_point, Some((3.0, 4.0)));
        assert_eq!(subs[1].gap_distance, Some(5.0));

        let subs = segment_subtracks(&track, &[false, false, true]).unwrap();
        assert_eq!(subs[0].exit_point, None);
        assert_eq!(subs[0].gap_distance, None);
    }

    #[test]
    fn zero_length_censored_run_is_kept() {
        let track = track_from_xy(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let subs = segment_subtracks(&track, &[true, false, true]).unwrap();
        assert_eq!(subs.len(), 3);
        assert_eq!(subs[1].gap_distance, Some(0.0));
    }
}
