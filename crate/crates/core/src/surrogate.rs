//! Exact Gaussian-process regression with a squared-exponential ARD kernel.
//!
//! Targets are standardized before fitting and predictions are mapped back
//! to the original scale. Hyperparameters are either fixed by the caller or
//! chosen by maximizing the log marginal likelihood with a seeded
//! multi-start compass search in log space.

use std::f64::consts::{LN_10, LN_2};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const JITTER_FLOOR: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

const EVIDENCE_STARTS: usize = 16;
const EVIDENCE_BUDGET: usize = 200;
const START_LOG_LENGTH: (f64, f64) = (-2.995_732_273_553_991, LN_2); // [0.05, 2]
const START_LOG_SIGNAL: (f64, f64) = (-LN_10, LN_10); // [0.1, 10]
const SEARCH_LOG_LENGTH: (f64, f64) = (-2.0 * LN_10, LN_10); // [0.01, 10]
const SEARCH_LOG_SIGNAL: (f64, f64) = (-2.0 * LN_10, 2.0 * LN_10); // [0.01, 100]

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperParams {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperParams {
    pub fn isotropic(
        dim: usize,
        length_scale: f64,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Self {
        GpHyperParams {
            length_scales: vec![length_scale; dim],
            signal_variance,
            noise_variance,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::validation("gp hyperparameters", msg));
        if self.length_scales.len() != dim {
            return bad(format!(
                "{} length-scales for {dim} input dimensions",
                self.length_scales.len()
            ));
        }
        if self
            .length_scales
            .iter()
            .any(|l| !(l.is_finite() && *l > 0.0))
        {
            return bad("length-scales must be finite and positive".into());
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return bad("signal variance must be finite and positive".into());
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= JITTER_FLOOR) {
            return bad(format!("noise variance must be at least {JITTER_FLOOR}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum HyperMode {
    Fixed(GpHyperParams),
    /// Maximize the log marginal likelihood over length-scales and signal
    /// variance; the noise variance stays at the given value.
    MaximizeEvidence {
        seed: u64,
        noise_variance: f64,
    },
}

impl HyperMode {
    pub fn evidence(seed: u64) -> Self {
        HyperMode::MaximizeEvidence {
            seed,
            noise_variance: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: DMatrix<f64>,
    hyper: GpHyperParams,
    y_mean: f64,
    y_scale: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    log_evidence: f64,
}

fn sq_exp(a: &[f64], b: &[f64], inv_len: &[f64], signal: f64) -> f64 {
    let mut r2 = 0.0;
    for i in 0..a.len() {
        let d = (a[i] - b[i]) * inv_len[i];
        r2 += d * d;
    }
    signal * (-0.5 * r2).exp()
}

struct Factor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

fn factorize(rows: &[&[f64]], hyper: &GpHyperParams) -> Result<Factor> {
    let n = rows.len();
    let inv_len: Vec<f64> = hyper.length_scales.iter().map(|l| 1.0 / l).collect();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = sq_exp(rows[i], rows[j], &inv_len, hyper.signal_variance);
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    let mut jitter = 0.0;
    loop {
        let mut m = gram.clone();
        for i in 0..n {
            m[(i, i)] += hyper.noise_variance + jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(Factor { chol, jitter });
        }
        jitter = if jitter == 0.0 {
            JITTER_FLOOR
        } else {
            jitter * 10.0
        };
        if jitter > JITTER_MAX * 1.000_001 {
            let diag_max = (0..n).map(|i| gram[(i, i)]).fold(f64::MIN, f64::max);
            return Err(Error::Numerical(format!(
                "Cholesky of the {n}x{n} kernel matrix failed with jitter up to {JITTER_MAX:e} \
                 (signal variance {:e}, noise {:e}, max diagonal {diag_max:e}, min length-scale {:e})",
                hyper.signal_variance,
                hyper.noise_variance,
                hyper.length_scales.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
    }
}

fn log_evidence(factor: &Factor, y: &DVector<f64>) -> (DVector<f64>, f64) {
    let alpha = factor.chol.solve(y);
    let n = y.len() as f64;
    let l = factor.chol.l_dirty();
    let log_det_half: f64 = (0..y.len()).map(|i| l[(i, i)].ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    (alpha, lml)
}

/// Fits a GP to `inputs` (one row per point) and `targets`.
pub fn gp_fit(inputs: &[Vec<f64>], targets: &[f64], mode: &HyperMode) -> Result<GpModel> {
    let n = inputs.len();
    if n == 0 {
        return Err(Error::validation("gp", "need at least one training point"));
    }
    if targets.len() != n {
        return Err(Error::validation(
            "gp",
            format!("{n} inputs but {} targets", targets.len()),
        ));
    }
    let dim = inputs[0].len();
    if inputs.iter().any(|r| r.len() != dim) {
        return Err(Error::validation(
            "gp",
            "inputs have inconsistent dimension",
        ));
    }
    if inputs
        .iter()
        .flatten()
        .chain(targets)
        .any(|v| !v.is_finite())
    {
        return Err(Error::validation("gp", "training data must be finite"));
    }

    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let var = targets.iter().map(|t| (t - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_scale = if var.sqrt() > 1e-12 * (1.0 + y_mean.abs()) {
        var.sqrt()
    } else {
        1.0
    };
    let y = DVector::from_iterator(n, targets.iter().map(|t| (t - y_mean) / y_scale));
    let rows: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();

    let hyper = match mode {
        HyperMode::Fixed(h) => {
            h.validate(dim)?;
            h.clone()
        }
        HyperMode::MaximizeEvidence {
            seed,
            noise_variance,
        } => maximize_evidence(&rows, &y, dim, *seed, *noise_variance)?,
    };

    let factor = factorize(&rows, &hyper)?;
    let (alpha, lml) = log_evidence(&factor, &y);
    Ok(GpModel {
        inputs: DMatrix::from_fn(n, dim, |i, j| inputs[i][j]),
        hyper,
        y_mean,
        y_scale,
        chol_l: factor.chol.l(),
        alpha,
        jitter: factor.jitter,
        log_evidence: lml,
    })
}

fn theta_to_hyper(theta: &[f64], noise_variance: f64) -> GpHyperParams {
    let dim = theta.len() - 1;
    GpHyperParams {
        length_scales: theta[..dim].iter().map(|t| t.exp()).collect(),
        signal_variance: theta[dim].exp(),
        noise_variance,
    }
}

fn maximize_evidence(
    rows: &[&[f64]],
    y: &DVector<f64>,
    dim: usize,
    seed: u64,
    noise_variance: f64,
) -> Result<GpHyperParams> {
    let noise_variance = noise_variance.max(JITTER_FLOOR);
    let objective = |theta: &[f64]| -> f64 {
        match factorize(rows, &theta_to_hyper(theta, noise_variance)) {
            Ok(f) => log_evidence(&f, y).1,
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_theta = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..EVIDENCE_STARTS {
        let mut theta: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(START_LOG_LENGTH.0..START_LOG_LENGTH.1))
            .collect();
        theta.push(rng.gen_range(START_LOG_SIGNAL.0..START_LOG_SIGNAL.1));
        let v = objective(&theta);
        if best_theta.is_empty() || v > best {
            best = v;
            best_theta = theta;
        }
    }

    // compass search from the best start
    let bounds = |i: usize| {
        if i < dim {
            SEARCH_LOG_LENGTH
        } else {
            SEARCH_LOG_SIGNAL
        }
    };
    let mut step = 0.5;
    let mut evals = 0;
    'search: while evals < EVIDENCE_BUDGET && step > 1e-3 {
        let mut improved = false;
        for i in 0..=dim {
            for dir in [1.0, -1.0] {
                if evals >= EVIDENCE_BUDGET {
                    break 'search;
                }
                let (lo, hi) = bounds(i);
                let mut trial = best_theta.clone();
                trial[i] = (trial[i] + dir * step).clamp(lo, hi);
                if trial[i] == best_theta[i] {
                    continue;
                }
                evals += 1;
                let v = objective(&trial);
                if v > best {
                    best = v;
                    best_theta = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    if !best.is_finite() {
        return Err(Error::Numerical(
            "no hyperparameter setting gave a positive-definite kernel matrix".into(),
        ));
    }
    Ok(theta_to_hyper(&best_theta, noise_variance))
}

impl GpModel {
    pub fn hyper(&self) -> &GpHyperParams {
        &self.hyper
    }

    pub fn num_points(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    /// Extra diagonal jitter that was needed for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    /// Predictive mean and standard deviation of the latent function at `x`.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let (mu, var) = self.posterior_raw(x);
        (mu, var.max(0.0).sqrt())
    }

    /// Mean and unclipped variance, both on the original target scale.
    pub fn posterior_raw(&self, x: &[f64]) -> (f64, f64) {
        assert_eq!(x.len(), self.dim(), "posterior input has wrong dimension");
        let n = self.num_points();
        let inv_len: Vec<f64> = self.hyper.length_scales.iter().map(|l| 1.0 / l).collect();
        let mut kstar = DVector::zeros(n);
        let mut row = vec![0.0; self.dim()];
        for i in 0..n {
            for (j, r) in row.iter_mut().enumerate() {
                *r = self.inputs[(i, j)];
            }
            kstar[i] = sq_exp(&row, x, &inv_len, self.hyper.signal_variance);
        }
        let mu_std = kstar.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a non-zero diagonal");
        let var_std = self.hyper.signal_variance - v.dot(&v);
        (
            self.y_mean + self.y_scale * mu_std,
            var_std * self.y_scale * self.y_scale,
        )
    }

    pub fn target_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn target_scale(&self) -> f64 {
        self.y_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(dim: usize, l: f64, s: f64, noise: f64) -> HyperMode {
        HyperMode::Fixed(GpHyperParams::isotropic(dim, l, s, noise))
    }

    // Independent oracle: explicit Gauss-Jordan inverse of (K + noise I).
    fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut inv: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
                .unwrap();
            a.swap(c, p);
            inv.swap(c, p);
            let d = a[c][c];
            for j in 0..n {
                a[c][j] /= d;
                inv[c][j] /= d;
            }
            for r in 0..n {
                if r != c {
                    let f = a[r][c];
                    for j in 0..n {
                        a[r][j] -= f * a[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
        inv
    }

    fn oracle_posterior(
        xs: &[Vec<f64>],
        ys: &[f64],
        l: f64,
        s: f64,
        noise: f64,
        x: &[f64],
    ) -> (f64, f64) {
        let n = xs.len();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let yc: Vec<f64> = ys.iter().map(|y| (y - mean) / sd).collect();
        let k = |a: &[f64], b: &[f64]| {
            let r2: f64 = a.iter().zip(b).map(|(p, q)| ((p - q) / l).powi(2)).sum();
            s * (-0.5 * r2).exp()
        };
        let gram: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| k(&xs[i], &xs[j]) + if i == j { noise } else { 0.0 })
                    .collect()
            })
            .collect();
        let inv = invert(gram);
        let ks: Vec<f64> = xs.iter().map(|xi| k(xi, x)).collect();
        let mut mu = 0.0;
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                mu += ks[i] * inv[i][j] * yc[j];
                quad += ks[i] * inv[i][j] * ks[j];
            }
        }
        (mean + sd * mu, sd * sd * (s - quad))
    }

    #[test]
    fn single_point_interpolation() {
        let m = gp_fit(&[vec![0.5]], &[2.0], &fixed(1, 0.3, 1.0, 1e-6)).unwrap();
        let (mu, _) = m.posterior(&[0.5]);
        assert!((mu - 2.0).abs() < 1e-4);
        let m = gp_fit(&[vec![0.5]], &[2.0], &HyperMode::evidence(0)).unwrap();
        assert!((m.posterior(&[0.5]).0 - 2.0).abs() < 1e-4);
    }

    #[test]
    fn constant_targets() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, 0.3]).collect();
        let ys = vec![3.0; 6];
        let m = gp_fit(&xs, &ys, &HyperMode::evidence(4)).unwrap();
        for x in &xs {
            assert!((m.posterior(x).0 - 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sine_interpolation_matches_inverse_oracle() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 4.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        let (l, s, noise) = (0.2, 1.0, 1e-8);
        let m = gp_fit(&xs, &ys, &fixed(1, l, s, noise)).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (mu, sigma) = m.posterior(x);
            let (omu, _) = oracle_posterior(&xs, &ys, l, s, noise, x);
            assert!((mu - y).abs() < 1e-4, "mu {mu} vs {y}");
            assert!((mu - omu).abs() < 1e-8);
            assert!(sigma < 1e-3);
        }
    }

    #[test]
    fn three_point_dense_oracle() {
        let xs = vec![vec![0.1, 0.7], vec![0.4, 0.2], vec![0.9, 0.5]];
        let ys = vec![1.5, -0.3, 2.2];
        let (l, s, noise) = (0.35, 1.7, 1e-3);
        let m = gp_fit(&xs, &ys, &fixed(2, l, s, noise)).unwrap();
        for x in [[0.0, 0.0], [0.5, 0.5], [0.1, 0.7], [1.0, 0.2]] {
            let (mu, var) = m.posterior_raw(&x);
            let (omu, ovar) = oracle_posterior(&xs, &ys, l, s, noise, &x);
            assert!((mu - omu).abs() < 1e-10, "{mu} vs {omu}");
            assert!((var - ovar).abs() < 1e-10, "{var} vs {ovar}");
        }
    }

    #[test]
    fn far_point_reverts_to_prior() {
        let xs = vec![vec![0.0], vec![0.1], vec![0.2]];
        let ys = vec![1.0, 4.0, 2.0];
        let (l, s) = (0.05, 0.8);
        let m = gp_fit(&xs, &ys, &fixed(1, l, s, 1e-6)).unwrap();
        let (mu, sigma) = m.posterior(&[0.2 + 10.0 * l]);
        assert!((mu - m.target_mean()).abs() < 1e-3 * m.target_scale());
        assert!((sigma - m.target_scale() * s.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn duplicate_rows_are_tolerated() {
        let xs = vec![vec![0.3], vec![0.3], vec![0.6]];
        let ys = vec![1.0, 1.0, 0.0];
        let m = gp_fit(&xs, &ys, &fixed(1, 0.2, 1.0, JITTER_FLOOR)).unwrap();
        assert!((m.posterior(&[0.3]).0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(gp_fit(&[], &[], &HyperMode::evidence(0)).is_err());
        assert!(gp_fit(&[vec![0.0]], &[1.0, 2.0], &HyperMode::evidence(0)).is_err());
        assert!(gp_fit(&[vec![0.0]], &[f64::NAN], &HyperMode::evidence(0)).is_err());
        assert!(gp_fit(&[vec![0.0]], &[1.0], &fixed(1, 0.1, 1.0, 0.0)).is_err());
        assert!(gp_fit(&[vec![0.0]], &[1.0], &fixed(2, 0.1, 1.0, 1e-6)).is_err());
    }

    #[test]
    fn evidence_fit_is_deterministic_and_improves_on_starts() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin()).collect();
        let a = gp_fit(&xs, &ys, &HyperMode::evidence(9)).unwrap();
        let b = gp_fit(&xs, &ys, &HyperMode::evidence(9)).unwrap();
        assert_eq!(a.hyper(), b.hyper());
        let naive = gp_fit(&xs, &ys, &fixed(1, 2.0, 0.1, 1e-6)).unwrap();
        assert!(a.log_evidence() >= naive.log_evidence());
    }
}
