//! Gelman–Rubin potential scale reduction over multi-chain draws.

use serde::{Deserialize, Serialize};

use crate::sampler::PosteriorSample;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 1.1;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Classic potential scale reduction factor
/// `sqrt(((n − 1)/n · W + B/n) / W)`, where `W` is the mean within-chain
/// variance and `B` is `n` times the variance of the chain means.
///
/// Chains of unequal length are truncated to the shortest.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "at least two chains are required, got {}",
            chains.len()
        )));
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 2 {
        return Err(Error::InvalidConfig(
            "each chain needs at least two draws".into(),
        ));
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let variances: Vec<f64> = chains.iter().map(|c| sample_variance(c)).collect();
    if let Some(chain) = variances.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateChain { chain: chain + 1 });
    }
    let w = mean(&variances);
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    let b = nf * sample_variance(&means);
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhatEntry {
    pub parameter: String,
    pub rhat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub threshold: f64,
    pub converged: bool,
    pub entries: Vec<RhatEntry>,
}

impl ConvergenceReport {
    pub fn from_entries(entries: Vec<RhatEntry>, threshold: f64) -> Self {
        let converged = entries.iter().all(|e| e.rhat < threshold);
        Self {
            threshold,
            converged,
            entries,
        }
    }

    pub fn max_rhat(&self) -> f64 {
        self.entries.iter().map(|e| e.rhat).fold(f64::NAN, f64::max)
    }

    pub fn failing(&self) -> impl Iterator<Item = &RhatEntry> {
        self.entries.iter().filter(|e| !(e.rhat < self.threshold))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsOptions {
    pub threshold: f64,
    /// Also test the σ² and τ² chains.
    pub include_variances: bool,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            include_variances: false,
        }
    }
}

/// R̂ for every `β_ki` (named `beta[i,k]`, 1-based) and optionally for σ², τ².
pub fn convergence_report(
    sample: &PosteriorSample,
    options: &DiagnosticsOptions,
) -> Result<ConvergenceReport> {
    let first = sample
        .chains
        .first()
        .and_then(|c| c.states.first())
        .ok_or(Error::EmptySample)?;
    let (m, k) = first.beta.shape();
    let mut entries = Vec::with_capacity(m * k + 2);
    for i in 0..m {
        for j in 0..k {
            let traces = sample.traces(|s| s.beta[(i, j)]);
            entries.push(RhatEntry {
                parameter: format!("beta[{},{}]", i + 1, j + 1),
                rhat: gelman_rubin(&traces)?,
            });
        }
    }
    if options.include_variances {
        entries.push(RhatEntry {
            parameter: "sigma2".into(),
            rhat: gelman_rubin(&sample.traces(|s| s.sigma2))?,
        });
        entries.push(RhatEntry {
            parameter: "tau2".into(),
            rhat: gelman_rubin(&sample.traces(|s| s.tau2))?,
        });
    }
    Ok(ConvergenceReport::from_entries(entries, options.threshold))
}
