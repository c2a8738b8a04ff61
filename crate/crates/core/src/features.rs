//! Predictor construction at subtrack and game level, standardization and
//! interaction expansion.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::dataset::{HalfRecord, PlayerGame};
use crate::error::{Error, Result};
use crate::metrics::{BandSet, LoadMetrics, Metric, Scope};
use crate::tracking::{Position, Subtrack, FRAME_DT};

/// Samples in a two second boundary window at 10 Hz.
pub const BOUNDARY_SAMPLES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Subtrack,
    Game,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::Subtrack, Level::Game];

    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Subtrack => "subtrack",
            Level::Game => "game",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Indicator,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    /// Indicators are recognised by name: `is_*` and `*_imputed`.
    pub fn from_name(name: &str) -> Self {
        let kind = if name.starts_with("is_") || name.ends_with("_imputed") {
            ColumnKind::Indicator
        } else {
            ColumnKind::Numeric
        };
        Self {
            name: name.to_string(),
            kind,
        }
    }
}

fn columns(names: &[&str]) -> Vec<Column> {
    names.iter().map(|n| Column::from_name(n)).collect()
}

/// Name of the game-level observed counterpart of a target.
pub fn observed_column(metric: Metric) -> String {
    format!("observed_{}", metric.name())
}

const OBSERVED_BLOCK: [&str; 11] = [
    "observed_acceleration_density",
    "observed_total_acceleration",
    "observed_average_velocity",
    "observed_high_speed_distance",
    "observed_very_high_speed_distance",
    "observed_time_vband_low",
    "observed_time_vband_mid",
    "observed_time_vband_high",
    "observed_time_aband_low",
    "observed_time_aband_mid",
    "observed_time_aband_high",
];

pub fn subtrack_columns() -> Vec<Column> {
    let mut names = vec![
        "is_midfielder",
        "is_forward",
        "offscreen_time",
        "offscreen_distance",
        "pre_velocity",
        "post_velocity",
        "pre_abs_accel",
        "post_abs_accel",
    ];
    names.extend(OBSERVED_BLOCK);
    names.extend(["gap_imputed", "pre_imputed", "post_imputed"]);
    columns(&names)
}

pub fn game_columns() -> Vec<Column> {
    let mut names = vec![
        "is_midfielder",
        "is_forward",
        "censored_total_time",
        "censored_fraction",
        "observed_total_distance",
    ];
    names.extend(OBSERVED_BLOCK);
    columns(&names)
}

/// One row of a feature table: identifiers, bookkeeping used by the
/// estimators and the report, the predictor values and every target.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub game_id: String,
    pub player_id: String,
    /// Empty at game level.
    pub subtrack_id: String,
    pub position: Position,
    /// Censored share of the player-game's frames.
    pub censored_fraction: f64,
    /// Observed speed-sample seconds of the player-game.
    pub observed_time: f64,
    /// Observed acceleration-sample seconds of the player-game.
    pub observed_accel_time: f64,
    /// Censored speed-sample seconds of this row's scope.
    pub censored_time: f64,
    /// Censored acceleration-sample seconds of this row's scope; the weight
    /// for averaging density estimates.
    pub censored_accel_time: f64,
    pub values: Vec<f64>,
    /// Indexed like [`Metric::ALL`].
    pub targets: Vec<Option<f64>>,
}

impl FeatureRow {
    pub fn target(&self, metric: Metric) -> Option<f64> {
        self.targets[metric as usize]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub level: Level,
    pub columns: Vec<Column>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    /// Rows whose game is in `games`, in table order.
    pub fn filter_games(&self, games: &[String]) -> FeatureTable {
        FeatureTable {
            level: self.level,
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| games.contains(&r.game_id))
                .cloned()
                .collect(),
        }
    }
}

fn position_indicators(position: Position) -> [f64; 2] {
    [
        f64::from(position == Position::Midfielder),
        f64::from(position == Position::Forward),
    ]
}

fn observed_block(obs: &LoadMetrics) -> Vec<f64> {
    vec![
        obs.acceleration_density.unwrap_or(0.0),
        obs.total_acceleration,
        obs.average_velocity().unwrap_or(0.0),
        obs.high_speed_distance,
        obs.very_high_speed_distance,
        obs.time_v_band[0],
        obs.time_v_band[1],
        obs.time_v_band[2],
        obs.time_a_band[0],
        obs.time_a_band[1],
        obs.time_a_band[2],
    ]
}

fn targets(m: &LoadMetrics) -> Vec<Option<f64>> {
    Metric::ALL.iter().map(|&t| m.value(t)).collect()
}

/// Mean speed and mean |accel| over a boundary window, or `None` when the
/// window holds no speed samples.
fn window_stats(speed: &[f64], accel: &[f64], fallback_accel: f64) -> Option<(f64, f64)> {
    if speed.is_empty() {
        return None;
    }
    let v = speed.iter().sum::<f64>() / speed.len() as f64;
    let a = if accel.is_empty() {
        fallback_accel
    } else {
        accel.iter().map(|a| a.abs()).sum::<f64>() / accel.len() as f64
    };
    Some((v, a))
}

/// Subtrack-level predictors for censored subtrack `idx` of `half`.
///
/// The boundary windows cover up to two seconds of the neighbouring observed
/// subtracks. When a neighbour has no observed speed samples (track edge,
/// or a single observed frame) the window falls back to the player's
/// game-level observed average speed and density, and the side's
/// `*_imputed` flag is set.
pub fn subtrack_features(
    half: &HalfRecord,
    idx: usize,
    game_observed: &LoadMetrics,
    position: Position,
) -> Vec<f64> {
    let sub: &Subtrack = &half.subtracks[idx];
    debug_assert!(!sub.observed);
    let avg_v = game_observed.average_velocity().unwrap_or(0.0);
    let density = game_observed.acceleration_density.unwrap_or(0.0);
    let kin = &half.kin;

    let pre = idx.checked_sub(1).and_then(|p| {
        let (sr, ar) = half.owned_ranges(p);
        let s0 = sr.end.saturating_sub(BOUNDARY_SAMPLES).max(sr.start);
        let a0 = ar.end.saturating_sub(BOUNDARY_SAMPLES).max(ar.start);
        window_stats(&kin.speed[s0..sr.end], &kin.accel[a0..ar.end], density)
    });
    let post = (idx + 1 < half.subtracks.len())
        .then(|| {
            let (sr, ar) = half.owned_ranges(idx + 1);
            let s1 = (sr.start + BOUNDARY_SAMPLES).min(sr.end);
            let a1 = (ar.start + BOUNDARY_SAMPLES).min(ar.end);
            window_stats(&kin.speed[sr.start..s1], &kin.accel[ar.start..a1], density)
        })
        .flatten();

    let (pre_v, pre_a) = pre.unwrap_or((avg_v, density));
    let (post_v, post_a) = post.unwrap_or((avg_v, density));

    let mut values = position_indicators(position).to_vec();
    values.extend([
        sub.elapsed,
        sub.gap_distance.unwrap_or(0.0),
        pre_v,
        post_v,
        pre_a,
        post_a,
    ]);
    values.extend(observed_block(game_observed));
    values.extend([
        f64::from(sub.gap_distance.is_none()),
        f64::from(pre.is_none()),
        f64::from(post.is_none()),
    ]);
    values
}

/// Game-level predictors. Fails when the player was never observed.
pub fn game_features(pg: &PlayerGame, observed: &LoadMetrics) -> Result<Vec<f64>> {
    if observed.speed_samples == 0 {
        return Err(Error::Validation(format!(
            "player {} in game {} is never on camera",
            pg.player_id, pg.game_id
        )));
    }
    let censored_time = pg.censored_frames() as f64 * FRAME_DT;
    let mut values = position_indicators(pg.position).to_vec();
    values.extend([censored_time, pg.censored_fraction(), observed.total_distance]);
    values.extend(observed_block(observed));
    Ok(values)
}

struct PlayerGameRows {
    game: Option<FeatureRow>,
    subtracks: Vec<FeatureRow>,
}

fn player_game_rows(pg: &PlayerGame, bands: &BandSet) -> Result<PlayerGameRows> {
    let observed = pg.metrics(Scope::Observed, bands);
    let censored = pg.metrics(Scope::Censored, bands);
    if observed.speed_samples == 0 {
        warn!(
            "skipping player {} in game {}: never on camera",
            pg.player_id, pg.game_id
        );
        return Ok(PlayerGameRows {
            game: None,
            subtracks: Vec::new(),
        });
    }
    let censored_fraction = pg.censored_fraction();
    let game = FeatureRow {
        game_id: pg.game_id.clone(),
        player_id: pg.player_id.clone(),
        subtrack_id: String::new(),
        position: pg.position,
        censored_fraction,
        observed_time: observed.elapsed(),
        observed_accel_time: observed.accel_elapsed(),
        censored_time: censored.elapsed(),
        censored_accel_time: censored.accel_elapsed(),
        values: game_features(pg, &observed)?,
        targets: targets(&censored),
    };
    let subtracks = pg
        .censored_subtracks()
        .map(|(h, i)| {
            let half = &pg.halves[h];
            let m = half.subtrack_metrics(i, bands);
            FeatureRow {
                game_id: pg.game_id.clone(),
                player_id: pg.player_id.clone(),
                subtrack_id: half.subtracks[i].subtrack_id.clone(),
                position: pg.position,
                censored_fraction,
                observed_time: observed.elapsed(),
                observed_accel_time: observed.accel_elapsed(),
                censored_time: m.elapsed(),
                censored_accel_time: m.accel_elapsed(),
                values: subtrack_features(half, i, &observed, pg.position),
                targets: targets(&m),
            }
        })
        .collect();
    Ok(PlayerGameRows {
        game: Some(game),
        subtracks,
    })
}

/// Subtrack and game feature tables for a whole corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub subtrack: FeatureTable,
    pub game: FeatureTable,
}

impl FeatureSet {
    pub fn table(&self, level: Level) -> &FeatureTable {
        match level {
            Level::Subtrack => &self.subtrack,
            Level::Game => &self.game,
        }
    }

    /// Distinct game ids in sorted order.
    pub fn games(&self) -> Vec<String> {
        let mut g: Vec<String> = self.game.rows.iter().map(|r| r.game_id.clone()).collect();
        g.sort();
        g.dedup();
        g
    }
}

pub fn build_feature_set(corpus: &[PlayerGame], bands: &BandSet) -> Result<FeatureSet> {
    let parts: Vec<PlayerGameRows> = corpus
        .par_iter()
        .map(|pg| player_game_rows(pg, bands))
        .collect::<Result<_>>()?;
    let mut game_rows = Vec::new();
    let mut sub_rows = Vec::new();
    for p in parts {
        game_rows.extend(p.game);
        sub_rows.extend(p.subtracks);
    }
    Ok(FeatureSet {
        subtrack: FeatureTable {
            level: Level::Subtrack,
            columns: subtrack_columns(),
            rows: sub_rows,
        },
        game: FeatureTable {
            level: Level::Game,
            columns: game_columns(),
            rows: game_rows,
        },
    })
}

const META_COLUMNS: [&str; 9] = [
    "game_id",
    "player_id",
    "subtrack_id",
    "position",
    "censored_fraction",
    "observed_time",
    "observed_accel_time",
    "censored_time",
    "censored_accel_time",
];

const TARGET_PREFIX: &str = "target_";

pub fn write_feature_table<W: Write>(writer: W, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = META_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(table.columns.iter().map(|c| c.name.clone()));
    header.extend(Metric::ALL.iter().map(|m| format!("{TARGET_PREFIX}{}", m.name())));
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![
            r.game_id.clone(),
            r.player_id.clone(),
            r.subtrack_id.clone(),
            r.position.as_str().to_string(),
            r.censored_fraction.to_string(),
            r.observed_time.to_string(),
            r.observed_accel_time.to_string(),
            r.censored_time.to_string(),
            r.censored_accel_time.to_string(),
        ];
        rec.extend(r.values.iter().map(f64::to_string));
        rec.extend(r.targets.iter().map(|t| t.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_table<R: Read>(reader: R, level: Level) -> Result<FeatureTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < META_COLUMNS.len() + Metric::ALL.len()
        || header[..META_COLUMNS.len()] != META_COLUMNS
    {
        return Err(Error::Schema {
            missing: META_COLUMNS
                .iter()
                .filter(|m| !header.iter().any(|h| h == *m))
                .map(|s| s.to_string())
                .collect(),
            extra: Vec::new(),
        });
    }
    let n_targets = Metric::ALL.len();
    let target_start = header.len() - n_targets;
    for (m, h) in Metric::ALL.iter().zip(&header[target_start..]) {
        if *h != format!("{TARGET_PREFIX}{}", m.name()) {
            return Err(Error::Schema {
                missing: vec![format!("{TARGET_PREFIX}{}", m.name())],
                extra: vec![h.clone()],
            });
        }
    }
    let columns: Vec<Column> = header[META_COLUMNS.len()..target_start]
        .iter()
        .map(|n| Column::from_name(n))
        .collect();

    let num = |s: &str, line: u64| -> Result<f64> {
        s.parse::<f64>().map_err(|e| Error::Parse {
            line,
            message: format!("`{s}`: {e}"),
        })
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut values = Vec::with_capacity(columns.len());
        for s in rec.iter().skip(META_COLUMNS.len()).take(columns.len()) {
            values.push(num(s, line)?);
        }
        let targets = rec
            .iter()
            .skip(target_start)
            .map(|s| if s.is_empty() { Ok(None) } else { num(s, line).map(Some) })
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            game_id: rec[0].to_string(),
            player_id: rec[1].to_string(),
            subtrack_id: rec[2].to_string(),
            position: rec[3].parse()?,
            censored_fraction: num(&rec[4], line)?,
            observed_time: num(&rec[5], line)?,
            observed_accel_time: num(&rec[6], line)?,
            censored_time: num(&rec[7], line)?,
            censored_accel_time: num(&rec[8], line)?,
            values,
            targets,
        });
    }
    Ok(FeatureTable {
        level,
        columns,
        rows,
    })
}

/// Per-column standardization fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    /// Full schema the scaler was fitted on.
    pub input_columns: Vec<Column>,
    /// Columns kept after dropping constants, in input order.
    pub kept: Vec<ScaledColumn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// Index into `input_columns`.
    pub source: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Fits centring/scaling statistics (sample standard deviation). Indicator
/// columns pass through unscaled. Columns constant on the training rows are
/// dropped.
pub fn fit_scaler(columns: &[Column], rows: &[Vec<f64>]) -> Result<ScalerStats> {
    if rows.is_empty() {
        return Err(Error::Empty("scaler needs at least one training row"));
    }
    let n = rows.len() as f64;
    let mut kept = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let ss = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>();
        let sd = if rows.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            warn!("dropping constant column `{}`", col.name);
            continue;
        }
        let (mean, sd) = match col.kind {
            ColumnKind::Numeric => (mean, sd),
            ColumnKind::Indicator => (0.0, 1.0),
        };
        kept.push(ScaledColumn {
            name: col.name.clone(),
            kind: col.kind,
            source: j,
            mean,
            sd,
        });
    }
    Ok(ScalerStats {
        input_columns: columns.to_vec(),
        kept,
    })
}

pub fn check_schema(expected: &[Column], actual: &[Column]) -> Result<()> {
    if expected == actual {
        return Ok(());
    }
    let names = |cols: &[Column]| cols.iter().map(|c| c.name.clone()).collect::<Vec<_>>();
    let (exp, act) = (names(expected), names(actual));
    Err(Error::Schema {
        missing: exp.iter().filter(|n| !act.contains(n)).cloned().collect(),
        extra: act.iter().filter(|n| !exp.contains(n)).cloned().collect(),
    })
}

impl ScalerStats {
    pub fn kept_columns(&self) -> Vec<Column> {
        self.kept
            .iter()
            .map(|k| Column {
                name: k.name.clone(),
                kind: k.kind,
            })
            .collect()
    }

    pub fn apply(&self, columns: &[Column], rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        check_schema(&self.input_columns, columns)?;
        Ok(rows
            .iter()
            .map(|r| self.kept.iter().map(|k| (r[k.source] - k.mean) / k.sd).collect())
            .collect())
    }

    /// Inverse of [`apply`](Self::apply) for the kept columns.
    pub fn unscale(&self, scaled: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .zip(scaled)
            .map(|(k, v)| v * k.sd + k.mean)
            .collect()
    }
}

/// Appends all pairwise products of `columns`, skipping pairs of two
/// indicators. Product names join the factors with `:`.
pub fn expand_interactions(columns: &[Column], rows: &[Vec<f64>]) -> (Vec<Column>, Vec<Vec<f64>>) {
    let mut pairs = Vec::new();
    for i in 0..columns.len() {
        for j in (i + 1)..columns.len() {
            if columns[i].kind == ColumnKind::Indicator && columns[j].kind == ColumnKind::Indicator {
                continue;
            }
            pairs.push((i, j));
        }
    }
    let mut out_cols = columns.to_vec();
    out_cols.extend(pairs.iter().map(|&(i, j)| Column {
        name: format!("{}:{}", columns[i].name, columns[j].name),
        kind: ColumnKind::Numeric,
    }));
    let out_rows = rows
        .iter()
        .map(|r| {
            let mut v = r.clone();
            v.extend(pairs.iter().map(|&(i, j)| r[i] * r[j]));
            v
        })
        .collect();
    (out_cols, out_rows)
}

/// Targets for `metric`, skipping rows where it is undefined.
pub fn target_rows(table: &FeatureTable, metric: Metric) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in &table.rows {
        if let Some(t) = r.target(metric) {
            x.push(r.values.clone());
            y.push(t);
        }
    }
    (x, y)
}

/// Groups row indices by `(game_id, player_id)`.
pub fn group_by_player_game(table: &FeatureTable) -> BTreeMap<(String, String), Vec<usize>> {
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, r) in table.rows.iter().enumerate() {
        groups
            .entry((r.game_id.clone(), r.player_id.clone()))
            .or_default()
            .push(i);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_column_scales_to_unit() {
        let cols = columns(&["a"]);
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let s = fit_scaler(&cols, &rows).unwrap();
        let scaled = s.apply(&cols, &rows).unwrap();
        let flat: Vec<f64> = scaled.iter().map(|r| r[0]).collect();
        for (a, b) in flat.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardized_column_unchanged() {
        let cols = columns(&["a"]);
        let rows = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let s = fit_scaler(&cols, &rows).unwrap();
        let scaled = s.apply(&cols, &rows).unwrap();
        for (r, o) in scaled.iter().zip(&rows) {
            assert!((r[0] - o[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_columns_dropped_indicators_untouched() {
        let cols = columns(&["a", "is_forward", "c"]);
        let rows = vec![vec![1.0, 0.0, 5.0], vec![2.0, 1.0, 5.0], vec![4.0, 1.0, 5.0]];
        let s = fit_scaler(&cols, &rows).unwrap();
        let names: Vec<&str> = s.kept.iter().map(|k| k.name.as_str()).collect();
        assert_eq!(names, ["a", "is_forward"]);
        let scaled = s.apply(&cols, &rows).unwrap();
        assert_eq!(scaled[1][1], 1.0);
        assert!(fit_scaler(&cols, &[]).is_err());
    }

    #[test]
    fn schema_mismatch_lists_columns() {
        let cols = columns(&["a", "b"]);
        let rows = vec![vec![1.0, 2.0], vec![2.0, 3.0]];
        let s = fit_scaler(&cols, &rows).unwrap();
        let other = columns(&["a", "z"]);
        match s.apply(&other, &rows) {
            Err(Error::Schema { missing, extra }) => {
                assert_eq!(missing, ["b"]);
                assert_eq!(extra, ["z"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interactions_skip_indicator_pairs() {
        let cols = columns(&["a", "b", "is_x", "is_y"]);
        let rows = vec![vec![2.0, 3.0, 1.0, 0.0]];
        let (c, r) = expand_interactions(&cols, &rows);
        // a:b a:is_x a:is_y b:is_x b:is_y
        assert_eq!(c.len(), 4 + 5);
        assert_eq!(c[4].name, "a:b");
        assert_eq!(r[0][4], 6.0);
        assert!(!c.iter().any(|c| c.name == "is_x:is_y"));
    }

    #[test]
    fn column_kinds_from_names() {
        assert_eq!(Column::from_name("is_forward").kind, ColumnKind::Indicator);
        assert_eq!(Column::from_name("pre_imputed").kind, ColumnKind::Indicator);
        assert_eq!(Column::from_name("pre_velocity").kind, ColumnKind::Numeric);
        assert_eq!(subtrack_columns().len(), 22);
        assert_eq!(game_columns().len(), 16);
    }
}
