//! Ordinary least squares via Householder QR.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative size of a QR diagonal entry below which its column is treated as
/// a linear combination of the earlier columns.
const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares coefficients for `y ~ design`. `names` label the design
/// columns for rank-deficiency errors.
pub fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>, names: &[&str]) -> Result<DVector<f64>> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(Error::Validation(format!("{n} design rows but {} targets", y.len())));
    }
    if n < p {
        return Err(Error::RankDeficient(names.get(n).map_or("?", |s| *s).to_string()));
    }
    let qr = design.clone().qr();
    let r = qr.r();
    for j in 0..p {
        let col_norm = design.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * col_norm {
            return Err(Error::RankDeficient(names.get(j).map_or("?", |s| *s).to_string()));
        }
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, p).into_owned();
    r.solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::RankDeficient(names.last().map_or("?", |s| *s).to_string()))
}

/// Coefficients of `y = b0 + b1 * t + b2 * x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaselineCoefficients {
    pub intercept: f64,
    pub time: f64,
    pub observed: f64,
}

pub fn fit_baseline(censored_time: &[f64], observed: &[f64], y: &[f64]) -> Result<BaselineCoefficients> {
    let n = y.len();
    if n < 3 {
        return Err(Error::Validation(format!("baseline fit needs at least 3 rows, got {n}")));
    }
    if censored_time.len() != n || observed.len() != n {
        return Err(Error::Validation("baseline inputs differ in length".into()));
    }
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => censored_time[i],
        _ => observed[i],
    });
    let beta = least_squares(
        &design,
        &DVector::from_column_slice(y),
        &["intercept", "censored_time", "observed_metric"],
    )?;
    Ok(BaselineCoefficients {
        intercept: beta[0],
        time: beta[1],
        observed: beta[2],
    })
}
