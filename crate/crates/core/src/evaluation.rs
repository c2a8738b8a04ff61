//! Train/test protocol and error reporting.
//!
//! An experiment runs in three stages that can also be driven separately
//! through files: [`fit_roster`] trains every model on the training games,
//! [`predict_roster`] produces game-level predictions for the test games,
//! and [`assemble_report`] turns predictions and models into an
//! [`EvalReport`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{group_by_player_game, FeatureSet, FeatureTable, Level};
use crate::metrics::{BandEdges, Metric};
use crate::models::{aggregate_to_game, BoostSpec, Booster, FittedModel};
use crate::tracking::Position;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Chronologically ordered games split into a training prefix and a test
/// suffix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub games: Vec<String>,
    pub train: usize,
    pub test: usize,
}

impl SplitPlan {
    /// `games` must already be in chronological order.
    pub fn new(games: Vec<String>, train: usize, test: usize) -> Result<Self> {
        let mut seen = games.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != games.len() {
            return Err(Error::Config("split plan lists a game twice".into()));
        }
        if train == 0 || test == 0 || train + test != games.len() {
            return Err(Error::Config(format!(
                "split {train}/{test} does not cover the {} supplied games",
                games.len()
            )));
        }
        Ok(Self { games, train, test })
    }

    /// Orders games by id (ids are assumed to sort chronologically).
    pub fn chronological(mut games: Vec<String>, train: usize, test: usize) -> Result<Self> {
        games.sort();
        Self::new(games, train, test)
    }

    pub fn train_games(&self) -> &[String] {
        &self.games[..self.train]
    }

    pub fn test_games(&self) -> &[String] {
        &self.games[self.train..]
    }
}

/// Root mean square predictive error.
pub fn rmspe(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Empty("rmspe of no observations"));
    }
    if y.len() != yhat.len() {
        return Err(Error::Validation(format!(
            "{} observations but {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// RMSPE relative to the mean response.
pub fn cv(y: &[f64], yhat: &[f64]) -> Result<f64> {
    let e = rmspe(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if mean == 0.0 {
        return Err(Error::Undefined("CV of a zero-mean response"));
    }
    Ok(e / mean)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelLabel {
    Scaling,
    Base,
    Linear,
    LinearInteractions,
    Tree,
}

impl ModelLabel {
    /// Columns of the results tables, in order.
    pub const TABLE: [ModelLabel; 4] = [
        ModelLabel::Base,
        ModelLabel::Linear,
        ModelLabel::LinearInteractions,
        ModelLabel::Tree,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelLabel::Scaling => "scaling",
            ModelLabel::Base => "base",
            ModelLabel::Linear => "linear",
            ModelLabel::LinearInteractions => "linear_interactions",
            ModelLabel::Tree => "tree",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            ModelLabel::Scaling => "Scaling",
            ModelLabel::Base => "Base model",
            ModelLabel::Linear => "Linear model",
            ModelLabel::LinearInteractions => "Linear model w/ int",
            ModelLabel::Tree => "Boosted trees",
        }
    }
}

impl From<Booster> for ModelLabel {
    fn from(b: Booster) -> Self {
        match b {
            Booster::Linear => ModelLabel::Linear,
            Booster::LinearInteractions => ModelLabel::LinearInteractions,
            Booster::Tree => ModelLabel::Tree,
        }
    }
}

impl FromStr for ModelLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ModelLabel::Scaling,
            ModelLabel::Base,
            ModelLabel::Linear,
            ModelLabel::LinearInteractions,
            ModelLabel::Tree,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| Error::Validation(format!("unknown model `{s}`")))
    }
}

fn parse_level(s: &str) -> Result<Level> {
    Level::ALL
        .into_iter()
        .find(|l| l.as_str() == s)
        .ok_or_else(|| Error::Validation(format!("unknown level `{s}`")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub metric: Metric,
    pub model: ModelLabel,
    pub level: Level,
}

impl CellKey {
    pub fn file_stem(&self) -> String {
        format!(
            "{}__{}__{}",
            self.metric.name(),
            self.model.as_str(),
            self.level.as_str()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub metrics: Vec<Metric>,
    pub boosters: Vec<BoostSpec>,
}

impl Default for Roster {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            boosters: Booster::ALL.iter().map(|&b| BoostSpec::new(b)).collect(),
        }
    }
}

impl Roster {
    /// Every model cell, in report order: scaling, base, then each booster
    /// at subtrack and game level, per metric.
    pub fn cells(&self) -> Vec<(CellKey, Option<&BoostSpec>)> {
        let mut cells = Vec::new();
        for &metric in &self.metrics {
            for model in [ModelLabel::Scaling, ModelLabel::Base] {
                cells.push((
                    CellKey {
                        metric,
                        model,
                        level: Level::Game,
                    },
                    None,
                ));
            }
            for spec in &self.boosters {
                for level in Level::ALL {
                    cells.push((
                        CellKey {
                            metric,
                            model: spec.booster.into(),
                            level,
                        },
                        Some(spec),
                    ));
                }
            }
        }
        cells
    }
}

/// A trained model cell, or the reason it could not be trained.
#[derive(Clone, Debug)]
pub struct FittedCell {
    pub key: CellKey,
    pub model: std::result::Result<FittedModel, String>,
}

/// Fits every roster cell on the training games. Failures are kept per cell.
pub fn fit_roster(features: &FeatureSet, plan: &SplitPlan, roster: &Roster, seed: u64) -> Vec<FittedCell> {
    let train = plan.train_games();
    let sub = features.subtrack.filter_games(train);
    let game = features.game.filter_games(train);
    roster
        .cells()
        .into_par_iter()
        .map(|(key, spec)| {
            let table = match key.level {
                Level::Subtrack => &sub,
                Level::Game => &game,
            };
            let model = match key.model {
                ModelLabel::Scaling => Ok(FittedModel::scaling(key.metric, &game.columns)),
                ModelLabel::Base => {
                    FittedModel::fit_baseline(table, key.metric, seed).map(|o| o.model)
                }
                _ => {
                    let spec = BoostSpec {
                        seed,
                        ..spec.expect("boosted cells carry a spec").clone()
                    };
                    FittedModel::fit_boosted(table, key.metric, &spec).map(|o| o.model)
                }
            };
            FittedCell {
                key,
                model: model.map_err(|e| e.to_string()),
            }
        })
        .collect()
}

/// A game-level prediction for one test player-game.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub key: CellKey,
    pub game_id: String,
    pub player_id: String,
    pub position: Position,
    pub censored_fraction: f64,
    pub y: f64,
    pub yhat: f64,
}

/// Game-level predictions over the test games. Subtrack-level estimates are
/// aggregated per player-game; every estimate is floored at zero. Player-games
/// whose target is undefined are skipped.
pub fn predict_roster(
    cells: &[FittedCell],
    features: &FeatureSet,
    plan: &SplitPlan,
) -> Result<Vec<PredictionRow>> {
    let test = plan.test_games();
    let sub = features.subtrack.filter_games(test);
    let game = features.game.filter_games(test);
    let sub_groups = group_by_player_game(&sub);

    let per_cell: Vec<Result<Vec<PredictionRow>>> = cells
        .par_iter()
        .map(|cell| {
            let Ok(model) = &cell.model else {
                return Ok(Vec::new());
            };
            let metric = cell.key.metric;
            let game_estimates: Vec<Option<f64>> = match cell.key.level {
                Level::Game => model.predict(&game)?.into_iter().map(Some).collect(),
                Level::Subtrack => {
                    let raw = model.predict(&sub)?;
                    game.rows
                        .iter()
                        .map(|r| {
                            let idx = sub_groups
                                .get(&(r.game_id.clone(), r.player_id.clone()))
                                .map(Vec::as_slice)
                                .unwrap_or(&[]);
                            let est: Vec<f64> = idx.iter().map(|&i| raw[i]).collect();
                            let w: Vec<f64> = idx.iter().map(|&i| sub.rows[i].censored_accel_time).collect();
                            aggregate_to_game(&est, &w, metric)
                        })
                        .collect()
                }
            };
            Ok(game
                .rows
                .iter()
                .zip(game_estimates)
                .filter_map(|(r, est)| {
                    let y = r.target(metric)?;
                    Some(PredictionRow {
                        key: cell.key,
                        game_id: r.game_id.clone(),
                        player_id: r.player_id.clone(),
                        position: r.position,
                        censored_fraction: r.censored_fraction,
                        y,
                        yhat: est.unwrap_or(0.0).max(0.0),
                    })
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for rows in per_cell {
        out.extend(rows?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionError {
    pub position: Position,
    pub n: usize,
    pub rmspe: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub metric: Metric,
    pub model: ModelLabel,
    pub level: Level,
    pub n: usize,
    pub rmspe: Option<f64>,
    pub cv: Option<f64>,
    pub mean_y: Option<f64>,
    pub per_position: Vec<PositionError>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub metric: Metric,
    pub model: ModelLabel,
    pub level: Level,
    pub game_id: String,
    pub player_id: String,
    pub position: Position,
    /// Percent of the player-game's frames that were censored.
    pub censored_pct: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTally {
    pub model: ModelLabel,
    pub level: Level,
    /// Predictor and the number of target metrics whose top five include it,
    /// most frequent first.
    pub counts: Vec<(String, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub train_games: Vec<String>,
    pub test_games: Vec<String>,
    pub bands: BandEdges,
    pub cells: Vec<CellReport>,
    pub residuals: Vec<ResidualRecord>,
    pub importance: Vec<ImportanceTally>,
}

fn cell_report(key: CellKey, rows: &[&PredictionRow], error: Option<String>) -> CellReport {
    let mut report = CellReport {
        metric: key.metric,
        model: key.model,
        level: key.level,
        n: rows.len(),
        rmspe: None,
        cv: None,
        mean_y: None,
        per_position: Vec::new(),
        error,
    };
    if report.error.is_some() {
        return report;
    }
    let y: Vec<f64> = rows.iter().map(|r| r.y).collect();
    let yhat: Vec<f64> = rows.iter().map(|r| r.yhat).collect();
    match rmspe(&y, &yhat) {
        Ok(e) => report.rmspe = Some(e),
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    }
    report.mean_y = Some(y.iter().sum::<f64>() / y.len() as f64);
    report.cv = cv(&y, &yhat).ok();
    for pos in Position::ALL {
        let (py, ph): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.position == pos)
            .map(|r| (r.y, r.yhat))
            .unzip();
        if let Ok(e) = rmspe(&py, &ph) {
            report.per_position.push(PositionError {
                position: pos,
                n: py.len(),
                rmspe: e,
            });
        }
    }
    report
}

/// Builds the report from test predictions and the fitted cells (for errors
/// and importance tallies). The base model is reported at both levels.
pub fn assemble_report(
    plan: &SplitPlan,
    bands: &BandEdges,
    cells: &[FittedCell],
    predictions: &[PredictionRow],
) -> EvalReport {
    let mut by_key: BTreeMap<CellKey, Vec<&PredictionRow>> = BTreeMap::new();
    for p in predictions {
        by_key.entry(p.key).or_default().push(p);
    }
    let errors: BTreeMap<CellKey, String> = cells
        .iter()
        .filter_map(|c| c.model.as_ref().err().map(|e| (c.key, e.clone())))
        .collect();
    let mut metrics: Vec<Metric> = cells.iter().map(|c| c.key.metric).collect();
    metrics.dedup();

    let mut report_cells = Vec::new();
    for &metric in &metrics {
        let mut keys = vec![CellKey {
            metric,
            model: ModelLabel::Scaling,
            level: Level::Game,
        }];
        for model in ModelLabel::TABLE {
            for level in Level::ALL {
                keys.push(CellKey {
                    metric,
                    model,
                    level,
                });
            }
        }
        for key in keys {
            // the base model only exists at game level
            let source = if key.model == ModelLabel::Base {
                CellKey {
                    level: Level::Game,
                    ..key
                }
            } else {
                key
            };
            if !cells.iter().any(|c| c.key == source) {
                continue;
            }
            let rows = by_key.get(&source).cloned().unwrap_or_default();
            report_cells.push(cell_report(key, &rows, errors.get(&source).cloned()));
        }
    }

    let residuals = cells
        .iter()
        .flat_map(|c| by_key.get(&c.key).into_iter().flatten())
        .map(|p| ResidualRecord {
            metric: p.key.metric,
            model: p.key.model,
            level: p.key.level,
            game_id: p.game_id.clone(),
            player_id: p.player_id.clone(),
            position: p.position,
            censored_pct: 100.0 * p.censored_fraction,
            residual: p.y - p.yhat,
        })
        .collect();

    let mut tallies: BTreeMap<(ModelLabel, Level), BTreeMap<String, usize>> = BTreeMap::new();
    for c in cells {
        if matches!(c.key.model, ModelLabel::Scaling | ModelLabel::Base) {
            continue;
        }
        if let Ok(model) = &c.model {
            let tally = tallies.entry((c.key.model, c.key.level)).or_default();
            for (name, _) in model.variable_importance().into_iter().take(5) {
                *tally.entry(name).or_default() += 1;
            }
        }
    }
    let importance = tallies
        .into_iter()
        .map(|((model, level), counts)| {
            let mut counts: Vec<(String, usize)> = counts.into_iter().collect();
            counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            ImportanceTally {
                model,
                level,
                counts,
            }
        })
        .collect();

    EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        train_games: plan.train_games().to_vec(),
        test_games: plan.test_games().to_vec(),
        bands: bands.clone(),
        cells: report_cells,
        residuals,
        importance,
    }
}

/// Fits, predicts and reports in one pass.
pub fn run_experiment(
    features: &FeatureSet,
    plan: &SplitPlan,
    roster: &Roster,
    bands: &BandEdges,
    seed: u64,
) -> Result<(EvalReport, Vec<FittedCell>)> {
    let games = features.games();
    for g in &plan.games {
        if !games.contains(g) {
            return Err(Error::Validation(format!("split plan names unknown game `{g}`")));
        }
    }
    let cells = fit_roster(features, plan, roster, seed);
    let predictions = predict_roster(&cells, features, plan)?;
    Ok((assemble_report(plan, bands, &cells, &predictions), cells))
}

/// A point of the residual-versus-censoring plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub censored_pct: f64,
    pub residual: f64,
    pub position: Position,
}

impl EvalReport {
    pub fn cell(&self, metric: Metric, model: ModelLabel, level: Level) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.metric == metric && c.model == model && c.level == level)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: EvalReport = serde_json::from_str(s)?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::FormatVersion(r.format_version));
        }
        Ok(r)
    }
}

pub fn residuals_by_censoring(
    report: &EvalReport,
    metric: Metric,
    model: ModelLabel,
    level: Level,
) -> Result<Vec<ResidualPoint>> {
    // base residuals are recorded once, at game level
    let level = if model == ModelLabel::Base { Level::Game } else { level };
    if report.cell(metric, model, level).is_none() {
        return Err(Error::Validation(format!(
            "report has no cell for {metric} / {} / {}",
            model.as_str(),
            level.as_str()
        )));
    }
    Ok(report
        .residuals
        .iter()
        .filter(|r| r.metric == metric && r.model == model && r.level == level)
        .map(|r| ResidualPoint {
            censored_pct: r.censored_pct,
            residual: r.residual,
            position: r.position,
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Results table for one level: a row per metric, RMSPE and CV per model.
pub fn write_results_table<W: Write>(writer: W, report: &EvalReport, level: Level) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["metric".to_string()];
    for m in ModelLabel::TABLE {
        header.push(format!("{}_rmspe", m.as_str()));
        header.push(format!("{}_cv", m.as_str()));
    }
    w.write_record(&header)?;
    for metric in report_metrics(report) {
        let mut rec = vec![metric.name().to_string()];
        for m in ModelLabel::TABLE {
            let c = report.cell(metric, m, level);
            rec.push(fmt_opt(c.and_then(|c| c.rmspe)));
            rec.push(fmt_opt(c.and_then(|c| c.cv)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_residuals<W: Write>(writer: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "metric",
        "model",
        "level",
        "game_id",
        "player_id",
        "position",
        "censored_pct",
        "residual",
    ])?;
    for r in &report.residuals {
        w.write_record([
            r.metric.name(),
            r.model.as_str(),
            r.level.as_str(),
            &r.game_id,
            &r.player_id,
            r.position.as_str(),
            &r.censored_pct.to_string(),
            &r.residual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn report_metrics(report: &EvalReport) -> Vec<Metric> {
    let mut metrics: Vec<Metric> = report.cells.iter().map(|c| c.metric).collect();
    metrics.dedup();
    metrics
}

/// Plain-text rendering of both results tables plus the per-position
/// breakdown and importance tallies.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let label_width = 44;
    for (level, title) in [
        (Level::Subtrack, "RMSPE and CV, subtrack-level models"),
        (Level::Game, "RMSPE and CV, game-level models"),
    ] {
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:label_width$}", "");
        for m in ModelLabel::TABLE {
            let _ = write!(out, " | {:^21}", m.title());
        }
        let _ = writeln!(out);
        let _ = write!(out, "{:label_width$}", "");
        for _ in ModelLabel::TABLE {
            let _ = write!(out, " | {:>10} {:>10}", "RMSPE", "CV");
        }
        let _ = writeln!(out);
        for metric in report_metrics(report) {
            let _ = write!(out, "{:label_width$}", metric.label(&report.bands));
            for m in ModelLabel::TABLE {
                match report.cell(metric, m, level) {
                    Some(CellReport {
                        rmspe: Some(e),
                        cv,
                        ..
                    }) => {
                        let cv = cv.map_or("-".to_string(), |c| format!("{c:.2}"));
                        let _ = write!(out, " | {:>10} {:>10}", format_sig(*e), cv);
                    }
                    Some(CellReport { error: Some(_), .. }) => {
                        let _ = write!(out, " | {:>10} {:>10}", "failed", "");
                    }
                    _ => {
                        let _ = write!(out, " | {:>10} {:>10}", "-", "-");
                    }
                }
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out, "Scaling estimator (game level)");
    for metric in report_metrics(report) {
        if let Some(c) = report.cell(metric, ModelLabel::Scaling, Level::Game) {
            let mean_resid = {
                let pts: Vec<f64> = report
                    .residuals
                    .iter()
                    .filter(|r| r.metric == metric && r.model == ModelLabel::Scaling)
                    .map(|r| r.residual)
                    .collect();
                (!pts.is_empty()).then(|| pts.iter().sum::<f64>() / pts.len() as f64)
            };
            let _ = writeln!(
                out,
                "{:label_width$} RMSPE {:>10}  mean residual {:>10}",
                metric.label(&report.bands),
                c.rmspe.map_or("-".into(), format_sig),
                mean_resid.map_or("-".into(), format_sig),
            );
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "Per-position RMSPE, total distance");
    for m in ModelLabel::TABLE {
        for level in Level::ALL {
            if let Some(c) = report.cell(Metric::TotalDistance, m, level) {
                let parts: Vec<String> = c
                    .per_position
                    .iter()
                    .map(|p| format!("{} {} (n={})", p.position, format_sig(p.rmspe), p.n))
                    .collect();
                let _ = writeln!(
                    out,
                    "{:>20} {:>8}: {}",
                    m.as_str(),
                    level.as_str(),
                    parts.join(", ")
                );
            }
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "Top-5 predictor tallies");
    for t in &report.importance {
        let top: Vec<String> = t
            .counts
            .iter()
            .take(6)
            .map(|(n, c)| format!("{n} ({c})"))
            .collect();
        let _ = writeln!(
            out,
            "{:>20} {:>8}: {}",
            t.model.as_str(),
            t.level.as_str(),
            top.join(", ")
        );
    }
    out
}

fn format_sig(v: f64) -> String {
    let a = v.abs();
    if a >= 100.0 {
        format!("{v:.1}")
    } else if a >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

const PREDICTION_COLUMNS: [&str; 9] = [
    "metric",
    "model",
    "level",
    "game_id",
    "player_id",
    "position",
    "censored_fraction",
    "y",
    "yhat",
];

pub fn write_predictions<W: Write>(writer: W, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PREDICTION_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.key.metric.name(),
            r.key.model.as_str(),
            r.key.level.as_str(),
            &r.game_id,
            &r.player_id,
            r.position.as_str(),
            &r.censored_fraction.to_string(),
            &r.y.to_string(),
            &r.yhat.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != PREDICTION_COLUMNS {
        return Err(Error::Schema {
            missing: PREDICTION_COLUMNS
                .iter()
                .filter(|c| !header.iter().any(|h| h == *c))
                .map(|s| s.to_string())
                .collect(),
            extra: header
                .iter()
                .filter(|h| !PREDICTION_COLUMNS.contains(&h.as_str()))
                .cloned()
                .collect(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("`{s}`: {e}"),
            })
        };
        out.push(PredictionRow {
            key: CellKey {
                metric: rec[0].parse()?,
                model: rec[1].parse()?,
                level: parse_level(&rec[2])?,
            },
            game_id: rec[3].to_string(),
            player_id: rec[4].to_string(),
            position: rec[5].parse()?,
            censored_fraction: num(&rec[6])?,
            y: num(&rec[7])?,
            yhat: num(&rec[8])?,
        });
    }
    Ok(out)
}

/// Table of model cells written by `fit`: model file or failure per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub split: SplitPlan,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub key: CellKey,
    pub file: Option<String>,
    pub error: Option<String>,
}

/// Feature table for `level` restricted to the plan's test games.
pub fn test_table(features: &FeatureSet, plan: &SplitPlan, level: Level) -> FeatureTable {
    features.table(level).filter_games(plan.test_games())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmspe_cases() {
        assert_eq!(rmspe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmspe(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert!((rmspe(&[1.0, 5.0, 9.0], &[3.5, 7.5, 11.5]).unwrap() - 2.5).abs() < 1e-12);
        assert!(rmspe(&[], &[]).is_err());
    }

    #[test]
    fn cv_cases() {
        assert_eq!(cv(&[2.0, 4.0], &[2.0, 4.0]).unwrap(), 0.0);
        assert!((cv(&[2.0, 2.0], &[3.0, 3.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(cv(&[1.0, -1.0], &[0.0, 0.0]), Err(Error::Undefined(_))));
    }

    #[test]
    fn cv_matches_reported_total_distance_scale() {
        // an RMSPE of 288.2 m against an average of 3524 m per game
        let y = [3524.0; 4];
        let yhat = [3524.0 + 288.2, 3524.0 - 288.2, 3524.0 + 288.2, 3524.0 - 288.2];
        let c = cv(&y, &yhat).unwrap();
        assert!((c - 0.08).abs() < 0.005, "{c}");
    }

    #[test]
    fn split_plan() {
        let games: Vec<String> = (1..=18).map(|i| format!("g{i:02}")).rev().collect();
        let plan = SplitPlan::chronological(games, 13, 5).unwrap();
        assert_eq!(plan.train_games().len(), 13);
        assert_eq!(plan.test_games()[0], "g14");
        assert!(SplitPlan::new(vec!["a".into(), "a".into()], 1, 1).is_err());
        assert!(SplitPlan::new(vec!["a".into(), "b".into()], 2, 1).is_err());
    }

    #[test]
    fn model_labels_parse() {
        for m in ModelLabel::TABLE {
            assert_eq!(m.as_str().parse::<ModelLabel>().unwrap(), m);
        }
    }
}
