//! Squared-error gradient boosting with a ridge-regression base learner or
//! depth-limited regression trees.
//!
//! Every round fits the current residuals and adds the fit scaled by the
//! learning rate. Both base learners are exact minimisers of a penalised
//! squared error on the residuals, which keeps the training loss
//! nonincreasing for any learning rate in (0, 1].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Booster {
    Linear,
    LinearInteractions,
    Tree,
}

impl Booster {
    pub const ALL: [Booster; 3] = [Booster::Linear, Booster::LinearInteractions, Booster::Tree];

    pub fn as_str(&self) -> &'static str {
        match self {
            Booster::Linear => "linear",
            Booster::LinearInteractions => "linear_interactions",
            Booster::Tree => "tree",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostSpec {
    pub booster: Booster,
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on linear coefficients or leaf values.
    pub lambda: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl BoostSpec {
    pub fn new(booster: Booster) -> Self {
        Self {
            booster,
            rounds: 300,
            learning_rate: 0.1,
            max_depth: 4,
            lambda: 1.0,
            min_samples_leaf: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("boosting needs at least one round".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("negative L2 penalty {}", self.lambda)));
        }
        if self.booster == Booster::Tree && (self.max_depth == 0 || self.min_samples_leaf == 0) {
            return Err(Error::Config(
                "tree booster needs max_depth >= 1 and min_samples_leaf >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

/// Boosted linear model in the (already scaled) feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Training MSE before the first round and after each round.
    pub loss_history: Vec<f64>,
}

pub fn boost_linear(x: &[Vec<f64>], y: &[f64], spec: &BoostSpec) -> Result<LinearFit> {
    boost_linear_traced(x, y, spec, |_, _| {})
}

/// As [`boost_linear`], calling `trace(round, coefficients)` after every
/// round with the intercept first.
pub fn boost_linear_traced(
    x: &[Vec<f64>],
    y: &[f64],
    spec: &BoostSpec,
    mut trace: impl FnMut(usize, &[f64]),
) -> Result<LinearFit> {
    spec.validate()?;
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("no training rows"));
    }
    let p = x.first().map_or(0, Vec::len);
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let y_vec = DVector::from_column_slice(y);

    let base = mean(y);
    let mut coef = DVector::zeros(p + 1);
    coef[0] = base;
    let mut pred = DVector::from_element(n, base);
    let mut loss_history = vec![mse(y, pred.as_slice())];

    if loss_history[0] == 0.0 {
        tracing::warn!("target has zero variance; fitting a constant");
        return Ok(LinearFit {
            intercept: base,
            coefficients: vec![0.0; p],
            loss_history,
        });
    }

    let mut gram = design.tr_mul(&design);
    for j in 1..=p {
        gram[(j, j)] += spec.lambda;
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::RankDeficient("linear booster design (use a positive L2 penalty)".into())
    })?;

    let mut resid = &y_vec - &pred;
    for round in 0..spec.rounds {
        let grad = design.tr_mul(&resid);
        let step = chol.solve(&grad) * spec.learning_rate;
        coef += &step;
        pred += &design * &step;
        resid = &y_vec - &pred;
        loss_history.push(resid.norm_squared() / n as f64);
        trace(round, coef.as_slice());
    }
    Ok(LinearFit {
        intercept: coef[0],
        coefficients: coef.as_slice()[1..].to_vec(),
        loss_history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree stored as a flat node list; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeFit {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Summed split gain per feature.
    pub gain: Vec<f64>,
    pub loss_history: Vec<f64>,
}

impl TreeFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

const MAX_BINS: usize = 128;

/// Candidate thresholds per feature: midpoints between distinct values, or
/// quantile cut values when there are too many distinct values.
struct Binned {
    thresholds: Vec<Vec<f64>>,
    /// Column-major bin indices.
    bins: Vec<Vec<u8>>,
}

impl Binned {
    fn new(x: &[Vec<f64>], p: usize) -> Self {
        let n = x.len();
        let mut thresholds = Vec::with_capacity(p);
        let mut bins = Vec::with_capacity(p);
        for j in 0..p {
            let mut col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let mut distinct = col.clone();
            distinct.dedup();
            let thr: Vec<f64> = if distinct.len() <= MAX_BINS {
                distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let mut cuts: Vec<f64> = (1..MAX_BINS).map(|k| col[k * n / MAX_BINS]).collect();
                cuts.dedup();
                // the largest value can never be a useful cut
                if cuts.last() == col.last() {
                    cuts.pop();
                }
                cuts
            };
            bins.push(
                x.iter()
                    .map(|r| thr.partition_point(|&t| t < r[j]) as u8)
                    .collect(),
            );
            thresholds.push(thr);
        }
        Self { thresholds, bins }
    }
}

struct TreeBuilder<'a> {
    binned: &'a Binned,
    resid: &'a [f64],
    spec: &'a BoostSpec,
    nodes: Vec<Node>,
    gain: &'a mut [f64],
    /// Leaf value per training sample after growth.
    leaf_of: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    bin: usize,
    gain: f64,
}

impl TreeBuilder<'_> {
    fn score(g: f64, n: f64, lambda: f64) -> f64 {
        g * g / (n + lambda)
    }

    fn best_split(&self, samples: &[u32], g_total: f64) -> Option<BestSplit> {
        let n = samples.len();
        let lambda = self.spec.lambda;
        let min_leaf = self.spec.min_samples_leaf;
        let parent = Self::score(g_total, n as f64, lambda);
        let mut best: Option<BestSplit> = None;
        let mut sums = [0.0f64; MAX_BINS];
        let mut counts = [0usize; MAX_BINS];
        for (j, thr) in self.binned.thresholds.iter().enumerate() {
            if thr.is_empty() {
                continue;
            }
            let nb = thr.len() + 1;
            sums[..nb].fill(0.0);
            counts[..nb].fill(0);
            let col = &self.binned.bins[j];
            for &s in samples {
                let b = col[s as usize] as usize;
                sums[b] += self.resid[s as usize];
                counts[b] += 1;
            }
            let mut gl = 0.0;
            let mut nl = 0;
            for b in 0..thr.len() {
                gl += sums[b];
                nl += counts[b];
                let nr = n - nl;
                if nl < min_leaf {
                    continue;
                }
                if nr < min_leaf {
                    break;
                }
                let gain = Self::score(gl, nl as f64, lambda)
                    + Self::score(g_total - gl, nr as f64, lambda)
                    - parent;
                if gain > best.as_ref().map_or(1e-12, |b| b.gain) {
                    best = Some(BestSplit { feature: j, bin: b, gain });
                }
            }
        }
        best
    }

    fn grow(&mut self, samples: Vec<u32>, depth: usize) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let g_total: f64 = samples.iter().map(|&s| self.resid[s as usize]).sum();
        let split = if depth < self.spec.max_depth && samples.len() >= 2 * self.spec.min_samples_leaf {
            self.best_split(&samples, g_total)
        } else {
            None
        };
        match split {
            Some(best) => {
                self.gain[best.feature] += best.gain;
                let col = &self.binned.bins[best.feature];
                let (l, r): (Vec<u32>, Vec<u32>) =
                    samples.into_iter().partition(|&s| col[s as usize] as usize <= best.bin);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[idx] = Node::Split {
                    feature: best.feature,
                    threshold: self.binned.thresholds[best.feature][best.bin],
                    left,
                    right,
                };
            }
            None => {
                let value = self.spec.learning_rate * g_total
                    / (samples.len() as f64 + self.spec.lambda);
                for &s in &samples {
                    self.leaf_of[s as usize] = value;
                }
                self.nodes[idx] = Node::Leaf { value };
            }
        }
        idx
    }
}

pub fn boost_trees(x: &[Vec<f64>], y: &[f64], spec: &BoostSpec) -> Result<TreeFit> {
    spec.validate()?;
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("no training rows"));
    }
    let p = x.first().map_or(0, Vec::len);
    let base_score = mean(y);
    let mut pred = vec![base_score; n];
    let mut loss_history = vec![mse(y, &pred)];
    let mut gain = vec![0.0; p];
    if loss_history[0] == 0.0 {
        tracing::warn!("target has zero variance; fitting a constant");
        return Ok(TreeFit {
            base_score,
            trees: Vec::new(),
            gain,
            loss_history,
        });
    }
    let binned = Binned::new(x, p);
    let mut trees = Vec::with_capacity(spec.rounds);
    let mut resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
    for _ in 0..spec.rounds {
        let mut builder = TreeBuilder {
            binned: &binned,
            resid: &resid,
            spec,
            nodes: Vec::new(),
            gain: &mut gain,
            leaf_of: vec![0.0; n],
        };
        builder.grow((0..n as u32).collect(), 0);
        let TreeBuilder { nodes, leaf_of, .. } = builder;
        for i in 0..n {
            pred[i] += leaf_of[i];
            resid[i] = y[i] - pred[i];
        }
        loss_history.push(mse(y, &pred));
        trees.push(Tree { nodes });
    }
    Ok(TreeFit {
        base_score,
        trees,
        gain,
        loss_history,
    })
}
