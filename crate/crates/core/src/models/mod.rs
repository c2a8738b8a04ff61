//! Censored-metric estimators and the model file format.

pub mod boost;
pub mod ols;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    check_schema, expand_interactions, fit_scaler, observed_column, Column, FeatureTable, Level,
    ScalerStats,
};
use crate::metrics::Metric;

pub use boost::{BoostSpec, Booster, Node, Tree};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Inputs of the time-ratio estimator `observed * censored_time / observed_time`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingInputs {
    pub observed_metric: f64,
    pub observed_time: f64,
    pub censored_time: f64,
}

pub fn scaling_estimate(inputs: ScalingInputs) -> Result<f64> {
    if !(inputs.observed_time > 0.0) {
        return Err(Error::Validation(format!(
            "scaling estimate needs positive observed time, got {}",
            inputs.observed_time
        )));
    }
    if inputs.censored_time < 0.0 {
        return Err(Error::Validation("negative censored time".into()));
    }
    Ok(inputs.observed_metric * inputs.censored_time / inputs.observed_time)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Scaling,
    BaselineLm,
    Boosted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelBody {
    Scaling {
        observed_column: String,
    },
    Baseline {
        time_column: String,
        observed_column: String,
        intercept: f64,
        time_coef: f64,
        observed_coef: f64,
        /// Training standard deviations of the two predictors, for ranking.
        time_sd: f64,
        observed_sd: f64,
    },
    Linear {
        feature_names: Vec<String>,
        intercept: f64,
        coefficients: Vec<f64>,
    },
    Trees {
        feature_names: Vec<String>,
        base_score: f64,
        trees: Vec<Tree>,
        gain: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub level: Level,
    pub target: Metric,
    pub spec: Option<BoostSpec>,
    /// Schema of the feature table the model reads.
    pub input_columns: Vec<Column>,
    pub scaler: Option<ScalerStats>,
    pub body: ModelBody,
    pub seed: u64,
    pub train_games: Vec<String>,
    /// Training MSE before boosting and after each round.
    pub loss_history: Vec<f64>,
}

/// A fitted model together with its training residuals.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: FittedModel,
    pub train_residuals: Vec<f64>,
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn column_values(table: &FeatureTable, name: &str, rows: &[usize]) -> Result<Vec<f64>> {
    let j = table.column_index(name).ok_or_else(|| Error::Schema {
        missing: vec![name.to_string()],
        extra: Vec::new(),
    })?;
    Ok(rows.iter().map(|&i| table.rows[i].values[j]).collect())
}

fn train_games(table: &FeatureTable) -> Vec<String> {
    let mut g: Vec<String> = table.rows.iter().map(|r| r.game_id.clone()).collect();
    g.sort();
    g.dedup();
    g
}

impl FittedModel {
    /// The scaling estimator wrapped as a model over a game-level table.
    pub fn scaling(target: Metric, columns: &[Column]) -> Self {
        FittedModel {
            format_version: MODEL_FORMAT_VERSION,
            kind: ModelKind::Scaling,
            level: Level::Game,
            target,
            spec: None,
            input_columns: columns.to_vec(),
            scaler: None,
            body: ModelBody::Scaling {
                observed_column: observed_column(target),
            },
            seed: 0,
            train_games: Vec::new(),
            loss_history: Vec::new(),
        }
    }

    /// Linear regression of the censored metric on censored time and the
    /// observed value of the same metric, over game-level rows.
    pub fn fit_baseline(table: &FeatureTable, target: Metric, seed: u64) -> Result<FitOutcome> {
        if table.level != Level::Game {
            return Err(Error::Validation("baseline model is game level only".into()));
        }
        let rows: Vec<usize> = (0..table.rows.len())
            .filter(|&i| table.rows[i].target(target).is_some())
            .collect();
        let time_column = "censored_total_time".to_string();
        let obs_column = observed_column(target);
        let t = column_values(table, &time_column, &rows)?;
        let x = column_values(table, &obs_column, &rows)?;
        let y: Vec<f64> = rows.iter().filter_map(|&i| table.rows[i].target(target)).collect();
        let c = ols::fit_baseline(&t, &x, &y)?;
        let residuals: Vec<f64> = (0..y.len())
            .map(|i| y[i] - (c.intercept + c.time * t[i] + c.observed * x[i]))
            .collect();
        let loss = residuals.iter().map(|r| r * r).sum::<f64>() / y.len() as f64;
        Ok(FitOutcome {
            model: FittedModel {
                format_version: MODEL_FORMAT_VERSION,
                kind: ModelKind::BaselineLm,
                level: Level::Game,
                target,
                spec: None,
                input_columns: table.columns.clone(),
                scaler: None,
                body: ModelBody::Baseline {
                    time_column,
                    observed_column: obs_column,
                    intercept: c.intercept,
                    time_coef: c.time,
                    observed_coef: c.observed,
                    time_sd: sample_sd(&t),
                    observed_sd: sample_sd(&x),
                },
                seed,
                train_games: train_games(table),
                loss_history: vec![loss],
            },
            train_residuals: residuals,
        })
    }

    /// Gradient-boosted model on every predictor of `table`, trained on rows
    /// where `target` is defined.
    pub fn fit_boosted(table: &FeatureTable, target: Metric, spec: &BoostSpec) -> Result<FitOutcome> {
        spec.validate()?;
        let (x_raw, y) = crate::features::target_rows(table, target);
        if y.is_empty() {
            return Err(Error::Empty("no training rows with a defined target"));
        }
        let scaler = fit_scaler(&table.columns, &x_raw)?;
        let scaled = scaler.apply(&table.columns, &x_raw)?;
        let (names, x) = match spec.booster {
            Booster::LinearInteractions => {
                let (cols, rows) = expand_interactions(&scaler.kept_columns(), &scaled);
                (cols.into_iter().map(|c| c.name).collect::<Vec<_>>(), rows)
            }
            _ => (scaler.kept.iter().map(|k| k.name.clone()).collect(), scaled),
        };
        let (body, loss_history) = match spec.booster {
            Booster::Linear | Booster::LinearInteractions => {
                let fit = boost::boost_linear(&x, &y, spec)?;
                (
                    ModelBody::Linear {
                        feature_names: names,
                        intercept: fit.intercept,
                        coefficients: fit.coefficients,
                    },
                    fit.loss_history,
                )
            }
            Booster::Tree => {
                let fit = boost::boost_trees(&x, &y, spec)?;
                (
                    ModelBody::Trees {
                        feature_names: names,
                        base_score: fit.base_score,
                        trees: fit.trees,
                        gain: fit.gain,
                    },
                    fit.loss_history,
                )
            }
        };
        let model = FittedModel {
            format_version: MODEL_FORMAT_VERSION,
            kind: ModelKind::Boosted,
            level: table.level,
            target,
            spec: Some(spec.clone()),
            input_columns: table.columns.clone(),
            scaler: Some(scaler),
            body,
            seed: spec.seed,
            train_games: train_games(table),
            loss_history,
        };
        let pred = model.predict_design(&x);
        let train_residuals = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        Ok(FitOutcome {
            model,
            train_residuals,
        })
    }

    fn predict_design(&self, x: &[Vec<f64>]) -> Vec<f64> {
        match &self.body {
            ModelBody::Linear {
                intercept,
                coefficients,
                ..
            } => x
                .iter()
                .map(|r| intercept + r.iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>())
                .collect(),
            ModelBody::Trees {
                base_score, trees, ..
            } => x
                .iter()
                .map(|r| base_score + trees.iter().map(|t| t.predict(r)).sum::<f64>())
                .collect(),
            _ => unreachable!("design-space prediction is only defined for boosted bodies"),
        }
    }

    /// Predictions for raw predictor rows laid out as `columns`.
    pub fn predict_matrix(&self, columns: &[Column], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_schema(&self.input_columns, columns)?;
        let col = |name: &str| {
            columns.iter().position(|c| c.name == name).ok_or_else(|| Error::Schema {
                missing: vec![name.to_string()],
                extra: Vec::new(),
            })
        };
        match &self.body {
            ModelBody::Scaling { .. } => Err(Error::Validation(
                "the scaling estimator needs observed and censored times; use `predict`".into(),
            )),
            ModelBody::Baseline {
                time_column,
                observed_column,
                intercept,
                time_coef,
                observed_coef,
                ..
            } => {
                let (jt, jx) = (col(time_column)?, col(observed_column)?);
                Ok(rows
                    .iter()
                    .map(|r| intercept + time_coef * r[jt] + observed_coef * r[jx])
                    .collect())
            }
            ModelBody::Linear { .. } | ModelBody::Trees { .. } => {
                let scaler = self
                    .scaler
                    .as_ref()
                    .ok_or_else(|| Error::Validation("boosted model without scaler".into()))?;
                let scaled = scaler.apply(columns, rows)?;
                let x = match self.spec.as_ref().map(|s| s.booster) {
                    Some(Booster::LinearInteractions) => {
                        expand_interactions(&scaler.kept_columns(), &scaled).1
                    }
                    _ => scaled,
                };
                Ok(self.predict_design(&x))
            }
        }
    }

    /// Raw predictions, one per table row. No range constraints are applied.
    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        if table.level != self.level {
            return Err(Error::Validation(format!(
                "{} model applied to {} table",
                self.level.as_str(),
                table.level.as_str()
            )));
        }
        if let ModelBody::Scaling { observed_column } = &self.body {
            check_schema(&self.input_columns, &table.columns)?;
            let j = table.column_index(observed_column).ok_or_else(|| Error::Schema {
                missing: vec![observed_column.clone()],
                extra: Vec::new(),
            })?;
            return table
                .rows
                .iter()
                .map(|r| {
                    let observed_metric = r.values[j];
                    if !self.target.is_summed() {
                        // a mean carries over unscaled
                        return Ok(observed_metric);
                    }
                    let (observed_time, censored_time) = if self.target.on_accel_samples() {
                        (r.observed_accel_time, r.censored_accel_time)
                    } else {
                        (r.observed_time, r.censored_time)
                    };
                    scaling_estimate(ScalingInputs {
                        observed_metric,
                        observed_time,
                        censored_time,
                    })
                })
                .collect();
        }
        self.predict_matrix(&table.columns, &table.matrix())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: FittedModel = serde_json::from_str(s)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion(model.format_version));
        }
        Ok(model)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)?;
        Self::from_json(&s)
    }

    /// Predictors ranked by importance, most important first: absolute
    /// coefficient on standardized predictors for linear models, total split
    /// gain for trees. Ties keep feature order.
    pub fn variable_importance(&self) -> Vec<(String, f64)> {
        let mut ranked: Vec<(String, f64)> = match &self.body {
            ModelBody::Scaling { observed_column } => vec![(observed_column.clone(), 1.0)],
            ModelBody::Baseline {
                time_column,
                observed_column,
                time_coef,
                observed_coef,
                time_sd,
                observed_sd,
                ..
            } => vec![
                (time_column.clone(), (time_coef * time_sd).abs()),
                (observed_column.clone(), (observed_coef * observed_sd).abs()),
            ],
            ModelBody::Linear {
                feature_names,
                coefficients,
                ..
            } => feature_names
                .iter()
                .cloned()
                .zip(coefficients.iter().map(|c| c.abs()))
                .collect(),
            ModelBody::Trees {
                feature_names, gain, ..
            } => feature_names.iter().cloned().zip(gain.iter().copied()).collect(),
        };
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked
    }
}

/// Combines per-subtrack estimates into a game-level estimate: a sum for
/// summed metrics, a weighted mean for density. `None` when a density has
/// no positive weight.
pub fn aggregate_to_game(estimates: &[f64], weights: &[f64], metric: Metric) -> Option<f64> {
    if metric.is_summed() {
        return Some(estimates.iter().sum());
    }
    let total: f64 = weights.iter().sum();
    (total > 0.0).then(|| {
        estimates
            .iter()
            .zip(weights)
            .map(|(e, w)| e * w)
            .sum::<f64>()
            / total
    })
}
