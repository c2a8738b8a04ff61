//! File-based pipeline stages behind the command-line tool.
//!
//! Directory layout used by the stages:
//!
//! | stage      | reads                                     | writes |
//! |------------|-------------------------------------------|--------|
//! | simulate   |                                           | `frames.csv`, `events.csv` |
//! | ingest     | `frames.csv`, `events.csv`                | normalised copies, `ingest.json` |
//! | censor     | `frames.csv`, `events.csv`                | `subtracks.csv` |
//! | metrics    | `frames.csv`, `events.csv`                | `metrics.csv` |
//! | features   | `frames.csv`, `events.csv`                | `subtrack_features.csv`, `game_features.csv` |
//! | fit        | feature tables                            | `<cell>.json` per model, `manifest.json` |
//! | predict    | feature tables, model directory           | `predictions.csv` |
//! | report     | `predictions.csv`, model directory        | `report.json`, results tables, `residuals.csv` |
//! | evaluate   | `frames.csv`, `events.csv`                | everything fit, predict and report write |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{all_subtracks, assemble, metrics_rows, PlayerGame};
use crate::error::{Error, Result};
use crate::evaluation::{
    assemble_report, fit_roster, predict_roster, read_predictions, write_predictions, write_residuals,
    write_results_table, EvalReport, FittedCell, ManifestEntry, ModelManifest, SplitPlan,
};
use crate::features::{build_feature_set, read_feature_table, write_feature_table, FeatureSet, Level};
use crate::metrics::write_metrics;
use crate::models::FittedModel;
use crate::synth::generate_corpus;
use crate::tracking::{parse_events, parse_frames, write_events, write_frames, Event, PlayerTrack};

pub const FRAMES_FILE: &str = "frames.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SUBTRACKS_FILE: &str = "subtracks.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUBTRACK_FEATURES_FILE: &str = "subtrack_features.csv";
pub const GAME_FEATURES_FILE: &str = "game_features.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SUBTRACK_RESULTS_FILE: &str = "subtrack_results.csv";
pub const GAME_RESULTS_FILE: &str = "game_results.csv";
pub const RESIDUALS_FILE: &str = "residuals.csv";

/// Opens an input file, reporting a missing file as [`Error::MissingFile`].
pub fn open_input(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub fn create_output(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create_output(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_raw(dir: &Path) -> Result<(Vec<PlayerTrack>, BTreeMap<(String, u8), Vec<Event>>)> {
    let tracks = parse_frames(open_input(&dir.join(FRAMES_FILE))?)?;
    let events = parse_events(open_input(&dir.join(EVENTS_FILE))?)?;
    Ok((tracks, events))
}

/// Reads and censors a data directory into player-games.
pub fn load_corpus(cfg: &RunConfig, dir: &Path) -> Result<Vec<PlayerGame>> {
    let (tracks, events) = read_raw(dir)?;
    if tracks.is_empty() {
        return Err(Error::Empty("frames file has no rows"));
    }
    assemble(tracks, &events, &cfg.assembly())
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    generate_corpus(&cfg.synth_config())?.write_to_dir(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub games: usize,
    pub players: usize,
    pub tracks: usize,
    pub frames: usize,
    pub events: usize,
}

/// Validates a data directory and writes sorted copies plus a summary.
pub fn ingest(input: &Path, out: &Path) -> Result<IngestSummary> {
    let (tracks, events) = read_raw(input)?;
    let mut games: Vec<&str> = tracks.iter().map(|t| t.game_id.as_str()).collect();
    games.sort();
    games.dedup();
    let mut players: Vec<&str> = tracks.iter().map(|t| t.player_id.as_str()).collect();
    players.sort();
    players.dedup();
    let summary = IngestSummary {
        games: games.len(),
        players: players.len(),
        tracks: tracks.len(),
        frames: tracks.iter().map(PlayerTrack::len).sum(),
        events: events.values().map(Vec::len).sum(),
    };
    let mut flat: Vec<Event> = events.into_values().flatten().collect();
    flat.sort_by(|a, b| (&a.game_id, a.half, a.t).partial_cmp(&(&b.game_id, b.half, b.t)).expect("finite times"));
    write_frames(create_output(&out.join(FRAMES_FILE))?, &tracks)?;
    write_events(create_output(&out.join(EVENTS_FILE))?, &flat)?;
    write_text(&out.join("ingest.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(summary)
}

/// Writes every subtrack; returns the number of censored ones.
pub fn censor(cfg: &RunConfig, input: &Path, out: &Path) -> Result<usize> {
    let corpus = load_corpus(cfg, input)?;
    let subtracks = all_subtracks(&corpus);
    crate::tracking::write_subtracks(create_output(&out.join(SUBTRACKS_FILE))?, &subtracks)?;
    Ok(subtracks.iter().filter(|s| !s.observed).count())
}

pub fn metrics(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let corpus = load_corpus(cfg, input)?;
    let rows = metrics_rows(&corpus, &cfg.band_set()?);
    write_metrics(create_output(&out.join(METRICS_FILE))?, &rows)
}

pub fn build_features(cfg: &RunConfig, input: &Path) -> Result<FeatureSet> {
    let corpus = load_corpus(cfg, input)?;
    build_feature_set(&corpus, &cfg.band_set()?)
}

pub fn write_features(set: &FeatureSet, out: &Path) -> Result<()> {
    write_feature_table(create_output(&out.join(SUBTRACK_FEATURES_FILE))?, &set.subtrack)?;
    write_feature_table(create_output(&out.join(GAME_FEATURES_FILE))?, &set.game)
}

pub fn read_features(dir: &Path) -> Result<FeatureSet> {
    Ok(FeatureSet {
        subtrack: read_feature_table(open_input(&dir.join(SUBTRACK_FEATURES_FILE))?, Level::Subtrack)?,
        game: read_feature_table(open_input(&dir.join(GAME_FEATURES_FILE))?, Level::Game)?,
    })
}

pub fn features(cfg: &RunConfig, input: &Path, out: &Path) -> Result<FeatureSet> {
    let set = build_features(cfg, input)?;
    write_features(&set, out)?;
    Ok(set)
}

pub fn write_models(plan: &SplitPlan, cells: &[FittedCell], dir: &Path) -> Result<ModelManifest> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for cell in cells {
        let entry = match &cell.model {
            Ok(model) => {
                let file = format!("{}.json", cell.key.file_stem());
                model.write(create_output(&dir.join(&file))?)?;
                ManifestEntry {
                    key: cell.key,
                    file: Some(file),
                    error: None,
                }
            }
            Err(e) => ManifestEntry {
                key: cell.key,
                file: None,
                error: Some(e.clone()),
            },
        };
        entries.push(entry);
    }
    let manifest = ModelManifest {
        split: plan.clone(),
        entries,
    };
    write_text(&dir.join(MANIFEST_FILE), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(manifest)
}

pub fn read_models(dir: &Path) -> Result<(SplitPlan, Vec<FittedCell>)> {
    let manifest: ModelManifest = serde_json::from_reader(open_input(&dir.join(MANIFEST_FILE))?)?;
    let mut cells = Vec::new();
    for entry in manifest.entries {
        let model = match (entry.file, entry.error) {
            (Some(file), _) => Ok(FittedModel::read(open_input(&dir.join(file))?)?),
            (None, Some(e)) => Err(e),
            (None, None) => Err("no model recorded".to_string()),
        };
        cells.push(FittedCell { key: entry.key, model });
    }
    Ok((manifest.split, cells))
}

pub fn fit(cfg: &RunConfig, features_dir: &Path, models_dir: &Path) -> Result<ModelManifest> {
    let set = read_features(features_dir)?;
    let plan = cfg.split_plan(set.games())?;
    let cells = fit_roster(&set, &plan, &cfg.roster(), cfg.seed);
    write_models(&plan, &cells, models_dir)
}

pub fn predict(features_dir: &Path, models_dir: &Path, out: &Path) -> Result<usize> {
    let set = read_features(features_dir)?;
    let (plan, cells) = read_models(models_dir)?;
    let rows = predict_roster(&cells, &set, &plan)?;
    write_predictions(create_output(&out.join(PREDICTIONS_FILE))?, &rows)?;
    Ok(rows.len())
}

pub fn write_report(report: &EvalReport, out: &Path) -> Result<()> {
    write_text(&out.join(REPORT_FILE), &report.to_json()?)?;
    write_results_table(create_output(&out.join(SUBTRACK_RESULTS_FILE))?, report, Level::Subtrack)?;
    write_results_table(create_output(&out.join(GAME_RESULTS_FILE))?, report, Level::Game)?;
    write_residuals(create_output(&out.join(RESIDUALS_FILE))?, report)
}

pub fn report(cfg: &RunConfig, predictions_dir: &Path, models_dir: &Path, out: &Path) -> Result<EvalReport> {
    let predictions = read_predictions(open_input(&predictions_dir.join(PREDICTIONS_FILE))?)?;
    let (plan, cells) = read_models(models_dir)?;
    let report = assemble_report(&plan, &cfg.bands, &cells, &predictions);
    write_report(&report, out)?;
    Ok(report)
}

/// Runs features, fit, predict and report in one pass without re-reading
/// intermediate files. Writes the same artifacts as the staged commands:
/// feature tables to `out/features`, models to `out/models`, the rest to
/// `out`.
pub fn evaluate(cfg: &RunConfig, input: &Path, out: &Path) -> Result<EvalReport> {
    let set = features(cfg, input, &out.join("features"))?;
    let plan = cfg.split_plan(set.games())?;
    let cells = fit_roster(&set, &plan, &cfg.roster(), cfg.seed);
    write_models(&plan, &cells, &models_dir(out))?;
    let predictions = predict_roster(&cells, &set, &plan)?;
    write_predictions(create_output(&out.join(PREDICTIONS_FILE))?, &predictions)?;
    let report = assemble_report(&plan, &cfg.bands, &cells, &predictions);
    write_report(&report, out)?;
    Ok(report)
}

pub fn models_dir(out: &Path) -> PathBuf {
    out.join("models")
}
