//! Small numeric helpers shared by the analysis, trace and geo modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Empirical cumulative distribution over a finite sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    /// Like [`Ecdf::new`] but an empty sample yields an empty CDF.
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// F(x) = fraction of samples <= x.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        let n_le = self.sorted.partition_point(|&s| s <= x);
        n_le as f64 / self.sorted.len() as f64
    }

    pub fn at(&self, breakpoints: &[f64]) -> Vec<(f64, f64)> {
        breakpoints.iter().map(|&x| (x, self.eval(x))).collect()
    }

    /// Every distinct sample value with its CDF value, as sorted (x, F(x)) pairs.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = f,
                _ => out.push((x, f)),
            }
        }
        out
    }

    pub fn quantile(&self, q: f64) -> Option<f64> {
        if self.sorted.is_empty() {
            return None;
        }
        let idx = ((q.clamp(0.0, 1.0) * self.sorted.len() as f64).ceil() as usize).max(1) - 1;
        Some(self.sorted[idx.min(self.sorted.len() - 1)])
    }
}

/// Max-min normalization to [0, 1]. A constant vector maps to all ones when
/// its value is positive and to all zeros otherwise.
pub fn max_min_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() {
        return Vec::new();
    }
    if hi == lo {
        let fill = if hi > 0.0 { 1.0 } else { 0.0 };
        return vec![fill; values.len()];
    }
    values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
}

/// Ordinary least squares for a small dense system via normal equations with
/// partial pivoting. `rows` are regressor rows, `y` the responses.
pub(crate) fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let p = rows.first().map(Vec::len).unwrap_or(0);
    if rows.len() < p || p == 0 {
        return Err(Error::RankDeficient);
    }
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    let scale = (0..p).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1.0);
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::RankDeficient);
        }
        a.swap(col, pivot);
        for r in 0..p {
            if r != col {
                let factor = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    let rss = rows
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit: f64 = row.iter().zip(&coef).map(|(x, c)| x * c).sum();
            (yi - fit).powi(2)
        })
        .sum();
    Ok((coef, rss))
}
