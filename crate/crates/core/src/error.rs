use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("non-uniform timestamps for game {game_id} player {player_id} half {half}: {detail}")]
    Gap {
        game_id: String,
        player_id: String,
        half: u8,
        detail: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("contradictory events at t={t}: ({x1}, {y1}) vs ({x2}, {y2})")]
    ConflictingEvents {
        t: f64,
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
    },

    #[error("design matrix is rank deficient: column `{0}` is collinear with earlier columns")]
    RankDeficient(String),

    #[error("schema mismatch: missing columns {missing:?}, unexpected columns {extra:?}")]
    Schema {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("unsupported model format version {0}")]
    FormatVersion(u32),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
