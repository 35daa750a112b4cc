//! End-to-end fitting of a dataset and GCV scans over the number of bases.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::bases::{BasisKind, BasisMatrix, BasisSystem, Interval, DEFAULT_ORDER};
use crate::diagnostics::{convergence_report, DiagnosticsOptions};
use crate::model::{standardize_curves, Dataset, Hyperparameters};
use crate::par::*;
use crate::sampler::{run_gibbs, GibbsConfig, PosteriorSample};
use crate::summary::{summarize, Estimator, FitSummary};
use crate::{Error, Result};

/// Candidate basis system description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub num_bases: usize,
    /// B-spline order (degree + 1).
    pub order: usize,
    /// Fourier period; the domain length when absent.
    pub period: Option<f64>,
    /// Basis domain; the range of the observed times when absent.
    pub domain: Option<(f64, f64)>,
}

impl BasisSpec {
    pub fn bspline(num_bases: usize) -> Self {
        Self {
            kind: BasisKind::BSpline,
            num_bases,
            order: DEFAULT_ORDER,
            period: None,
            domain: None,
        }
    }

    pub fn fourier(num_bases: usize) -> Self {
        Self {
            kind: BasisKind::Fourier,
            num_bases,
            order: DEFAULT_ORDER,
            period: None,
            domain: None,
        }
    }

    pub fn with_domain(mut self, lower: f64, upper: f64) -> Self {
        self.domain = Some((lower, upper));
        self
    }

    pub fn build(&self, data: &Dataset) -> Result<BasisSystem> {
        let (lower, upper) = self.domain.unwrap_or_else(|| data.time_range());
        let domain = Interval::new(lower, upper)?;
        match self.kind {
            BasisKind::BSpline => {
                if self.period.is_some() {
                    return Err(Error::InvalidConfig(
                        "a period only applies to Fourier bases".into(),
                    ));
                }
                BasisSystem::bspline(domain, self.num_bases, self.order)
            }
            BasisKind::Fourier => match self.period {
                Some(p) => BasisSystem::fourier(domain, self.num_bases, p),
                None => BasisSystem::fourier_on(domain, self.num_bases),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub basis: BasisSpec,
    pub hyperparameters: Hyperparameters,
    pub gibbs: GibbsConfig,
    pub estimator: Estimator,
    pub diagnostics: DiagnosticsOptions,
    /// Divide every curve by its sample standard deviation before fitting.
    pub standardize: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Data the sampler saw (standardized when requested).
    pub data: Dataset,
    pub system: BasisSystem,
    pub bases: Vec<BasisMatrix>,
    pub sample: PosteriorSample,
    pub summary: FitSummary,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.summary
            .convergence
            .as_ref()
            .is_none_or(|c| c.converged)
    }
}

/// Evaluates the basis on every curve's own grid.
pub fn design_matrices(system: &BasisSystem, data: &Dataset) -> Result<Vec<BasisMatrix>> {
    data.curves().iter().map(|c| system.evaluate(&c.t)).collect()
}

pub fn fit_dataset(data: &Dataset, options: &FitOptions) -> Result<FitResult> {
    let data = if options.standardize {
        standardize_curves(data)?
    } else {
        data.clone()
    };
    let system = options.basis.build(&data)?;
    let bases = design_matrices(&system, &data)?;
    let sample = run_gibbs(&data, &bases, &options.hyperparameters, &options.gibbs)?;
    let mut summary = summarize(
        &sample,
        &data,
        &bases,
        &options.hyperparameters,
        options.estimator,
    )?;
    if sample.chains.len() >= 2 {
        let report = convergence_report(&sample, &options.diagnostics)?;
        if !report.converged {
            warn!(
                "{} of {} parameters have R-hat {} (max {:.4})",
                report.failing().count(),
                report.entries.len(),
                report.threshold,
                report.max_rhat()
            );
        }
        summary.convergence = Some(report);
    } else {
        info!("single chain: convergence diagnostics skipped");
    }
    Ok(FitResult {
        data,
        system,
        bases,
        sample,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvScanEntry {
    pub num_bases: usize,
    pub gcv_mean: f64,
    pub metric_global: f64,
    pub k_end: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvScan {
    pub entries: Vec<GcvScanEntry>,
    /// Basis count with the smallest mean GCV.
    pub best: usize,
}

/// Fits the dataset once per basis count and records the mean GCV of each.
///
/// All fits share the sampler seed in `options`.
pub fn gcv_scan(data: &Dataset, options: &FitOptions, counts: &[usize]) -> Result<GcvScan> {
    if counts.is_empty() {
        return Err(Error::InvalidConfig("no basis counts to scan".into()));
    }
    let entries = counts
        .par_iter()
        .map(|&k| {
            let mut opts = options.clone();
            opts.basis.num_bases = k;
            let fit = fit_dataset(data, &opts)?;
            Ok(GcvScanEntry {
                num_bases: k,
                gcv_mean: fit.summary.gcv_mean,
                metric_global: fit.summary.metric_global,
                k_end: fit.summary.k_end,
                converged: fit.converged(),
            })
        })
        .collect::<Vec<Result<GcvScanEntry>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let best = entries
        .iter()
        .min_by(|a, b| a.gcv_mean.total_cmp(&b.gcv_mean))
        .map(|e| e.num_bases)
        .expect("nonempty scan");
    Ok(GcvScan { entries, best })
}
