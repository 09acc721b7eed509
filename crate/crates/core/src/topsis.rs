//! TOPSIS ranking of alternatives by relative closeness to the ideal point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closeness values closer than this are treated as a tie.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Smaller is better.
    Cost,
    /// Larger is better.
    Benefit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMatrix {
    rows: Vec<Vec<f64>>,
    weights: Vec<f64>,
    directions: Vec<Direction>,
}

impl DecisionMatrix {
    /// `weights = None` gives every criterion the same weight. Weights are
    /// normalized to sum to one.
    pub fn new(
        rows: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
        directions: Vec<Direction>,
    ) -> Result<Self> {
        let n = directions.len();
        if rows.is_empty() || n == 0 {
            return Err(Error::validation(
                "decision matrix",
                "needs at least one row and one criterion",
            ));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::validation(
                "decision matrix",
                "row length differs from criterion count",
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation(
                "decision matrix",
                "entries must be finite",
            ));
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if weights.len() != n {
            return Err(Error::validation(
                "weights",
                format!("expected {n} weights, got {}", weights.len()),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::validation(
                "weights",
                "weights must be finite and positive",
            ));
        }
        let total: f64 = weights.iter().sum();
        Ok(DecisionMatrix {
            rows,
            weights: weights.iter().map(|w| w / total).collect(),
            directions,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopsisResult {
    /// Relative closeness to the ideal, one per alternative.
    pub closeness: Vec<f64>,
    /// Alternative indices, best first.
    pub ranking: Vec<usize>,
    /// Set when every alternative coincides with both ideal and anti-ideal.
    pub degenerate: bool,
}

pub fn topsis_rank(dm: &DecisionMatrix) -> Result<TopsisResult> {
    let m = dm.rows.len();
    let n = dm.weights.len();

    let mut norms = vec![0.0; n];
    for row in &dm.rows {
        for (j, v) in row.iter().enumerate() {
            norms[j] += v * v;
        }
    }
    for (j, norm) in norms.iter_mut().enumerate() {
        *norm = norm.sqrt();
        if *norm == 0.0 {
            return Err(Error::validation(
                format!("criterion {j}"),
                "column is all zeros and cannot be normalized",
            ));
        }
    }

    let weighted: Vec<Vec<f64>> = dm
        .rows
        .iter()
        .map(|row| (0..n).map(|j| dm.weights[j] * row[j] / norms[j]).collect())
        .collect();

    let mut best = vec![0.0; n];
    let mut worst = vec![0.0; n];
    for j in 0..n {
        let (lo, hi) = weighted
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[j]), hi.max(r[j]))
            });
        (best[j], worst[j]) = match dm.directions[j] {
            Direction::Cost => (lo, hi),
            Direction::Benefit => (hi, lo),
        };
    }

    let dist = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut degenerate = true;
    let closeness: Vec<f64> = weighted
        .iter()
        .map(|row| {
            let d_best = dist(row, &best);
            let d_worst = dist(row, &worst);
            if d_best + d_worst == 0.0 {
                0.5
            } else {
                degenerate = false;
                d_worst / (d_best + d_worst)
            }
        })
        .collect();

    let mut ranking: Vec<usize> = (0..m).collect();
    ranking.sort_by(|&a, &b| {
        let (ca, cb) = (closeness[a], closeness[b]);
        if (ca - cb).abs() <= TIE_TOLERANCE {
            a.cmp(&b)
        } else {
            cb.total_cmp(&ca)
        }
    });

    Ok(TopsisResult {
        closeness,
        ranking,
        degenerate,
    })
}

/// Index of the TOPSIS winner among `points`.
pub fn topsis_pick_best<S: AsRef<[f64]>>(
    points: &[S],
    directions: &[Direction],
    weights: Option<Vec<f64>>,
) -> Result<usize> {
    let dm = DecisionMatrix::new(
        points.iter().map(|p| p.as_ref().to_vec()).collect(),
        weights,
        directions.to_vec(),
    )?;
    Ok(topsis_rank(&dm)?.ranking[0])
}
