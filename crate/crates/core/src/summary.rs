//! Point estimates from a posterior sample and the fit criteria built on them.

use log::info;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bases::BasisMatrix;
use crate::diagnostics::ConvergenceReport;
use crate::model::{log_joint_posterior, Curve, Dataset, Hyperparameters};
use crate::par::*;
use crate::sampler::{cholesky_with_jitter, PosteriorSample};
use crate::{Error, Result};

/// How continuous parameters are summarized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Retained joint state with the highest log posterior.
    #[default]
    Map,
    PosteriorMean,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "map" => Ok(Self::Map),
            "posterior-mean" | "mean" => Ok(Self::PosteriorMean),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEstimates {
    pub beta_hat: DMatrix<f64>,
    pub z_hat: DMatrix<bool>,
    /// Fraction of retained draws with `Z_ki = 1`.
    pub z_frequency: DMatrix<f64>,
    pub sigma2_hat: f64,
    pub tau2_hat: f64,
    /// Log posterior of the selected state (MAP only).
    pub log_posterior: Option<f64>,
    /// `(chain, iteration)` of the selected state (MAP only).
    pub source: Option<(usize, usize)>,
    /// `(curve, basis)` pairs whose indicator was included on an exact tie.
    pub ties: Vec<(usize, usize)>,
}

/// Majority-vote indicators with MAP or posterior-mean continuous parameters.
pub fn map_estimates(
    sample: &PosteriorSample,
    data: &Dataset,
    bases: &[BasisMatrix],
    hyp: &Hyperparameters,
    estimator: Estimator,
) -> Result<PointEstimates> {
    let states: Vec<(usize, usize, &crate::model::ChainState)> = sample
        .chains
        .iter()
        .flat_map(|c| {
            c.iterations
                .iter()
                .zip(&c.states)
                .map(move |(it, s)| (c.chain, *it, s))
        })
        .collect();
    let first = states.first().ok_or(Error::EmptySample)?.2;
    let (m, k) = first.beta.shape();
    let total = states.len();

    let mut counts = DMatrix::<usize>::zeros(m, k);
    for (_, _, s) in &states {
        for (c, z) in counts.iter_mut().zip(s.z.iter()) {
            *c += usize::from(*z);
        }
    }
    let mut ties = Vec::new();
    let z_hat = DMatrix::from_fn(m, k, |i, j| {
        let c = counts[(i, j)];
        if 2 * c == total {
            ties.push((i, j));
        }
        2 * c >= total
    });
    for (i, j) in &ties {
        info!(
            "indicator for curve {} basis {} tied at {}/{total}; included",
            i + 1,
            j + 1,
            total / 2
        );
    }
    let z_frequency = counts.map(|c| c as f64 / total as f64);

    match estimator {
        Estimator::Map => {
            let scores = states
                .par_iter()
                .map(|(_, _, s)| log_joint_posterior(s, data, bases, hyp))
                .collect::<Result<Vec<f64>>>()?;
            let mut best = 0;
            for (idx, score) in scores.iter().enumerate() {
                if *score > scores[best] {
                    best = idx;
                }
            }
            let (chain, iteration, s) = states[best];
            Ok(PointEstimates {
                beta_hat: s.beta.clone(),
                z_hat,
                z_frequency,
                sigma2_hat: s.sigma2,
                tau2_hat: s.tau2,
                log_posterior: Some(scores[best]),
                source: Some((chain, iteration)),
                ties,
            })
        }
        Estimator::PosteriorMean => {
            let n = total as f64;
            let beta_hat = states
                .iter()
                .fold(DMatrix::zeros(m, k), |acc, (_, _, s)| acc + &s.beta)
                / n;
            let sigma2_hat = states.iter().map(|(_, _, s)| s.sigma2).sum::<f64>() / n;
            let tau2_hat = states.iter().map(|(_, _, s)| s.tau2).sum::<f64>() / n;
            Ok(PointEstimates {
                beta_hat,
                z_hat,
                z_frequency,
                sigma2_hat,
                tau2_hat,
                log_posterior: None,
                source: None,
                ties,
            })
        }
    }
}

/// Final average coefficients `ξ_k = Σ_i Ẑ_ki β̂_ki / m`; exactly zero when no
/// curve includes basis `k`.
pub fn xi_hat(z_hat: &DMatrix<bool>, beta_hat: &DMatrix<f64>) -> Vec<f64> {
    let (m, k) = beta_hat.shape();
    (0..k)
        .map(|j| {
            // An empty f64 sum is −0.0, so fold from +0.0.
            let sum = (0..m)
                .filter(|i| z_hat[(*i, j)])
                .fold(0.0, |acc, i| acc + beta_hat[(i, j)]);
            sum / m as f64
        })
        .collect()
}

/// Number of bases with a nonzero final average coefficient.
pub fn k_end(xi: &[f64]) -> usize {
    xi.iter().filter(|x| **x != 0.0).count()
}

fn total_sum_of_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

fn rss(y: &[f64], fitted: &DVector<f64>) -> f64 {
    y.iter().zip(fitted.iter()).map(|(y, f)| (y - f).powi(2)).sum()
}

/// Penalized fit ratio `(n − 1) RSS / ((n − K) TSS)` of one curve.
fn penalized_ratio(curve_index: usize, n: usize, rss: f64, tss: f64, k: usize) -> Result<f64> {
    if n <= k {
        return Err(Error::UndefinedMetric(format!(
            "curve {} has {n} points but {k} selected bases",
            curve_index + 1
        )));
    }
    if !(tss > 0.0) {
        return Err(Error::DegenerateCurve { curve: curve_index });
    }
    Ok((n as f64 - 1.0) * rss / ((n - k) as f64 * tss))
}

/// Single-curve criterion `1 − (n − 1) RSS / ((n − K) TSS)` from its sums.
pub fn metric_from_sums(n: usize, rss: f64, tss: f64, k: usize) -> Result<f64> {
    Ok(1.0 - penalized_ratio(0, n, rss, tss, k)?)
}

/// Adjusted-R²-like criterion of the common curve `B ξ` against every curve,
/// with `K_end` the number of nonzero `ξ_k`.
pub fn metric_global(data: &Dataset, bases: &[BasisMatrix], xi: &[f64]) -> Result<f64> {
    if bases.len() != data.num_curves() {
        return Err(Error::DimensionMismatch(format!(
            "{} curves but {} basis matrices",
            data.num_curves(),
            bases.len()
        )));
    }
    let k = k_end(xi);
    let coef = DVector::from_column_slice(xi);
    let mut total = 0.0;
    for (i, (curve, basis)) in data.curves().iter().zip(bases).enumerate() {
        if basis.num_bases() != xi.len() || basis.num_points() != curve.len() {
            return Err(Error::DimensionMismatch(format!(
                "basis matrix of curve {} does not match",
                i + 1
            )));
        }
        let fitted = basis.values() * &coef;
        total += penalized_ratio(
            i,
            curve.len(),
            rss(&curve.y, &fitted),
            total_sum_of_squares(&curve.y),
            k,
        )?;
    }
    Ok(1.0 - total / data.num_curves() as f64)
}

/// Fitted values `B diag(Z) β` of one curve.
pub fn fitted_values(basis: &BasisMatrix, z: &[bool], beta: &[f64]) -> Result<DVector<f64>> {
    if z.len() != basis.num_bases() || beta.len() != basis.num_bases() {
        return Err(Error::DimensionMismatch(format!(
            "{} bases but {} indicators and {} coefficients",
            basis.num_bases(),
            z.len(),
            beta.len()
        )));
    }
    let coef = DVector::from_iterator(
        beta.len(),
        z.iter().zip(beta).map(|(z, b)| if *z { *b } else { 0.0 }),
    );
    Ok(basis.values() * coef)
}

/// Per-curve criterion with `K_end,i = Σ_k Ẑ_ki`. `index` only labels errors.
pub fn metric_per_curve(
    index: usize,
    curve: &Curve,
    basis: &BasisMatrix,
    z: &[bool],
    beta: &[f64],
) -> Result<f64> {
    if basis.num_points() != curve.len() {
        return Err(Error::DimensionMismatch(format!(
            "basis matrix of curve {} does not match",
            index + 1
        )));
    }
    let fitted = fitted_values(basis, z, beta)?;
    let k = z.iter().filter(|z| **z).count();
    let ratio = penalized_ratio(
        index,
        curve.len(),
        rss(&curve.y, &fitted),
        total_sum_of_squares(&curve.y),
        k,
    )?;
    Ok(1.0 - ratio)
}

fn row<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>, i: usize) -> Vec<T> {
    m.row(i).iter().copied().collect()
}

/// Per-curve criteria and their mean.
pub fn metric_averaged(
    data: &Dataset,
    bases: &[BasisMatrix],
    z_hat: &DMatrix<bool>,
    beta_hat: &DMatrix<f64>,
) -> Result<(Vec<f64>, f64)> {
    let values = data
        .curves()
        .iter()
        .zip(bases)
        .enumerate()
        .map(|(i, (curve, basis))| {
            metric_per_curve(i, curve, basis, &row(z_hat, i), &row(beta_hat, i))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok((values, mean))
}

/// Mean squared pointwise difference between a fit and the true curve.
pub fn mse_vs_truth(truth: &[f64], fitted: &[f64]) -> Result<f64> {
    if truth.len() != fitted.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "true curve has {} points, fit has {}",
            truth.len(),
            fitted.len()
        )));
    }
    Ok(truth
        .iter()
        .zip(fitted)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvScore {
    pub score: f64,
    /// Effective degrees of freedom `tr(S)`.
    pub trace: f64,
}

fn selected_design(basis: &BasisMatrix, z: &[bool]) -> DMatrix<f64> {
    let mut g = basis.values().clone();
    for (k, active) in z.iter().enumerate() {
        if !active {
            g.column_mut(k).fill(0.0);
        }
    }
    g
}

/// Generalized cross-validation score of one curve for the smoother
/// `S = G D⁻¹ Gᵀ`, `G = B diag(Z)`, `D = I/τ² + GᵀG`.
pub fn gcv(y: &[f64], basis: &BasisMatrix, z: &[bool], tau2: f64) -> Result<GcvScore> {
    let n = y.len();
    if basis.num_points() != n || z.len() != basis.num_bases() {
        return Err(Error::DimensionMismatch(format!(
            "basis is {}x{}, curve has {n} points and {} indicators",
            basis.num_points(),
            basis.num_bases(),
            z.len()
        )));
    }
    if !(tau2 > 0.0) {
        return Err(Error::Domain(format!("tau2 = {tau2} must be positive")));
    }
    let g = selected_design(basis, z);
    let k = g.ncols();
    let d = DMatrix::identity(k, k) / tau2 + g.tr_mul(&g);
    let chol = cholesky_with_jitter(d, tau2)?;
    let yv = DVector::from_column_slice(y);
    let fitted = &g * chol.solve(&g.tr_mul(&yv));
    // tr(G D⁻¹ Gᵀ) = ‖L⁻¹ Gᵀ‖²_F
    let half = chol
        .l()
        .solve_lower_triangular(&g.transpose())
        .ok_or(Error::NotPositiveDefinite {
            tau2,
            condition: f64::INFINITY,
        })?;
    let trace = half.norm_squared();
    if trace >= n as f64 {
        return Err(Error::UndefinedGcv { trace, n });
    }
    let nf = n as f64;
    let score = rss(y, &fitted) / nf / (1.0 - trace / nf).powi(2);
    Ok(GcvScore { score, trace })
}

/// Per-curve GCV scores and their mean.
pub fn gcv_all(
    data: &Dataset,
    bases: &[BasisMatrix],
    z_hat: &DMatrix<bool>,
    tau2: f64,
) -> Result<(Vec<GcvScore>, f64)> {
    let scores = data
        .curves()
        .iter()
        .zip(bases)
        .enumerate()
        .map(|(i, (curve, basis))| gcv(&curve.y, basis, &row(z_hat, i), tau2))
        .collect::<Result<Vec<_>>>()?;
    let mean = scores.iter().map(|s| s.score).sum::<f64>() / scores.len() as f64;
    Ok((scores, mean))
}

/// Serializable report of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub estimator: Estimator,
    pub curve_ids: Vec<String>,
    pub beta_hat: Vec<Vec<f64>>,
    pub z_hat: Vec<Vec<bool>>,
    pub z_frequency: Vec<Vec<f64>>,
    pub z_ties: Vec<(usize, usize)>,
    pub xi_hat: Vec<f64>,
    pub sigma2_hat: f64,
    pub tau2_hat: f64,
    pub log_posterior: Option<f64>,
    pub k_end: usize,
    pub metric_global: f64,
    pub metric_per_curve: Vec<f64>,
    pub metric_averaged: f64,
    pub gcv_per_curve: Vec<f64>,
    pub gcv_trace_per_curve: Vec<f64>,
    pub gcv_mean: f64,
    pub retained_draws: usize,
    pub convergence: Option<ConvergenceReport>,
}

fn rows<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| row(m, i)).collect()
}

/// Point estimates, metrics and GCV for a posterior sample.
pub fn summarize(
    sample: &PosteriorSample,
    data: &Dataset,
    bases: &[BasisMatrix],
    hyp: &Hyperparameters,
    estimator: Estimator,
) -> Result<FitSummary> {
    let est = map_estimates(sample, data, bases, hyp, estimator)?;
    let xi = xi_hat(&est.z_hat, &est.beta_hat);
    let global = metric_global(data, bases, &xi)?;
    let (per_curve, averaged) = metric_averaged(data, bases, &est.z_hat, &est.beta_hat)?;
    let (gcv_scores, gcv_mean) = gcv_all(data, bases, &est.z_hat, est.tau2_hat)?;
    Ok(FitSummary {
        estimator,
        curve_ids: data.curves().iter().map(|c| c.id.clone()).collect(),
        beta_hat: rows(&est.beta_hat),
        z_hat: rows(&est.z_hat),
        z_frequency: rows(&est.z_frequency),
        z_ties: est.ties,
        k_end: k_end(&xi),
        xi_hat: xi,
        sigma2_hat: est.sigma2_hat,
        tau2_hat: est.tau2_hat,
        log_posterior: est.log_posterior,
        metric_global: global,
        metric_per_curve: per_curve,
        metric_averaged: averaged,
        gcv_per_curve: gcv_scores.iter().map(|g| g.score).collect(),
        gcv_trace_per_curve: gcv_scores.iter().map(|g| g.trace).collect(),
        gcv_mean,
        retained_draws: sample.len(),
        convergence: None,
    })
}
