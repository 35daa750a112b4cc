//! Synthetic studies and the replication harness.
//!
//! Study 1 draws curves from a sparse combination of ten cubic B-splines on
//! `[0, 1]`; study 2 from `cos t + sin 2t` on `[0, 2π]`. Each replication
//! generates a fresh dataset, runs the full sampler and records the fit.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bases::{BasisKind, BasisSystem, Interval, DEFAULT_ORDER};
use crate::diagnostics::DiagnosticsOptions;
use crate::fit::{fit_dataset, BasisSpec, FitOptions};
use crate::model::{Curve, Dataset, Hyperparameters, MuMode};
use crate::par::*;
use crate::rng::{child_seed, stream_rng};
use crate::sampler::GibbsConfig;
use crate::summary::{mse_vs_truth, Estimator, FitSummary};
use crate::{Error, Result};

/// Generating coefficients of study 1; entries 2, 5, 9 and 10 are zero.
pub const STUDY1_COEFFICIENTS: [f64; 10] = [-2.0, 0.0, 1.5, 1.5, 0.0, -1.0, -0.5, -1.0, 0.0, 0.0];

/// `n` equally spaced points from `lower` to `upper`, both included exactly.
pub fn equally_spaced(lower: f64, upper: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lower],
        _ => (0..n)
            .map(|j| {
                if j == n - 1 {
                    upper
                } else {
                    lower + (upper - lower) * (j as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

/// The ten-function cubic B-spline system that generates study 1.
pub fn study1_system() -> BasisSystem {
    BasisSystem::bspline(
        Interval::new(0.0, 1.0).expect("unit interval"),
        STUDY1_COEFFICIENTS.len(),
        DEFAULT_ORDER,
    )
    .expect("valid study basis")
}

/// Noiseless study-1 curve at the given points.
pub fn study1_mean(t: &[f64]) -> Result<Vec<f64>> {
    let b = study1_system().evaluate(t)?;
    let coef = nalgebra::DVector::from_column_slice(&STUDY1_COEFFICIENTS);
    Ok((b.values() * coef).iter().copied().collect())
}

/// Noiseless study-2 curve `cos t + sin 2t`.
pub fn study2_mean(t: &[f64]) -> Vec<f64> {
    t.iter().map(|t| t.cos() + (2.0 * t).sin()).collect()
}

/// Simulated curves sharing one grid, with the true mean curve on that grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
}

fn add_noise<R: Rng + ?Sized>(
    grid: Vec<f64>,
    truth: Vec<f64>,
    sigma: f64,
    m: usize,
    rng: &mut R,
) -> Result<SyntheticData> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise sd must be >= 0, got {sigma}")));
    }
    if m == 0 || grid.len() < 2 {
        return Err(Error::InvalidConfig(
            "need at least one curve and two points".into(),
        ));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let curves = (0..m)
        .map(|i| {
            let y = truth.iter().map(|mu| mu + noise.sample(rng)).collect();
            Curve::new(format!("curve{}", i + 1), grid.clone(), y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticData {
        dataset: Dataset::new(curves)?,
        grid,
        truth,
    })
}

/// `m` curves of `n` points on `[0, 1]` from the sparse B-spline combination.
pub fn generate_study1<R: Rng + ?Sized>(
    sigma: f64,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<SyntheticData> {
    let grid = equally_spaced(0.0, 1.0, n);
    let truth = study1_mean(&grid)?;
    add_noise(grid, truth, sigma, m, rng)
}

/// `m` curves of `n` points on `[0, 2π]` from `cos t + sin 2t`.
pub fn generate_study2<R: Rng + ?Sized>(
    sigma: f64,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<SyntheticData> {
    let grid = equally_spaced(0.0, 2.0 * PI, n);
    let truth = study2_mean(&grid);
    add_noise(grid, truth, sigma, m, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[serde(alias = "study1")]
    Study1Bspline,
    #[serde(alias = "study2")]
    Study2Trig,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "study1" | "study1-bspline" => Ok(Self::Study1Bspline),
            "study2" | "study2-trig" => Ok(Self::Study2Trig),
            other => Err(Error::InvalidConfig(format!("unknown scenario '{other}'"))),
        }
    }
}

impl Scenario {
    pub fn generate<R: Rng + ?Sized>(
        self,
        sigma: f64,
        m: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<SyntheticData> {
        match self {
            Self::Study1Bspline => generate_study1(sigma, m, n, rng),
            Self::Study2Trig => generate_study2(sigma, m, n, rng),
        }
    }

    pub fn domain(self) -> (f64, f64) {
        match self {
            Self::Study1Bspline => (0.0, 1.0),
            Self::Study2Trig => (0.0, 2.0 * PI),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub sigma: f64,
    pub num_curves: usize,
    pub num_points: usize,
    pub basis_kind: BasisKind,
    pub num_bases: usize,
    pub mu: MuMode,
    pub replications: usize,
    pub seed: u64,
    pub gibbs: GibbsConfig,
    pub estimator: Estimator,
    pub diagnostics: DiagnosticsOptions,
}

impl ScenarioSpec {
    /// B-splines, `K = 10`, `μ = 0.1`, `σ = 0.1`, five curves of 100 points.
    pub fn study1() -> Self {
        Self {
            scenario: Scenario::Study1Bspline,
            sigma: 0.1,
            num_curves: 5,
            num_points: 100,
            basis_kind: BasisKind::BSpline,
            num_bases: 10,
            mu: MuMode::Fixed(0.1),
            replications: 100,
            seed: 0,
            gibbs: GibbsConfig::default(),
            estimator: Estimator::Map,
            diagnostics: DiagnosticsOptions::default(),
        }
    }

    /// Fourier, `K = 30`, `μ = 0.04`, `σ = 0.1`, five curves of 100 points.
    pub fn study2() -> Self {
        Self {
            scenario: Scenario::Study2Trig,
            basis_kind: BasisKind::Fourier,
            num_bases: 30,
            mu: MuMode::Fixed(0.04),
            ..Self::study1()
        }
    }

    pub fn fit_options(&self, seed: u64) -> Result<FitOptions> {
        let (lower, upper) = self.scenario.domain();
        let basis = match self.basis_kind {
            BasisKind::BSpline => BasisSpec::bspline(self.num_bases),
            BasisKind::Fourier => BasisSpec::fourier(self.num_bases),
        }
        .with_domain(lower, upper);
        Ok(FitOptions {
            basis,
            hyperparameters: Hyperparameters::new(self.mu)?,
            gibbs: GibbsConfig {
                seed,
                ..self.gibbs.clone()
            },
            estimator: self.estimator,
            diagnostics: self.diagnostics,
            standardize: false,
        })
    }

    /// Seeds of replication `r`: `(data, sampler)`.
    pub fn replication_seeds(&self, r: usize) -> (u64, u64) {
        let base = child_seed(self.seed, r as u64);
        (base, child_seed(base, 1))
    }

    /// Simulated dataset of replication `r`.
    pub fn replication_data(&self, r: usize) -> Result<SyntheticData> {
        let (data_seed, _) = self.replication_seeds(r);
        let mut rng = stream_rng(data_seed, 0);
        self.scenario
            .generate(self.sigma, self.num_curves, self.num_points, &mut rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub data_seed: u64,
    pub sampler_seed: u64,
    pub xi_hat: Vec<f64>,
    pub k_end: usize,
    pub metric_global: f64,
    pub metric_averaged: f64,
    /// Mean squared error of `B ξ` against the true curve.
    pub mse: f64,
    pub gcv_mean: f64,
    pub sigma2_hat: f64,
    pub tau2_hat: f64,
    pub max_rhat: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution5 {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// Values beyond 1.5 interquartile ranges from the quartiles.
    pub outliers: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Distribution5 {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        let fence = 1.5 * (q3 - q1);
        Some(Self {
            min: v[0],
            q1,
            median: quantile(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
            outliers: v.iter().filter(|x| **x < q1 - fence || **x > q3 + fence).count(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    /// 1-based basis index.
    pub basis: usize,
    pub distribution: Distribution5,
    /// Fraction of replications with `ξ_k` exactly zero.
    pub zero_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub spec: ScenarioSpec,
    pub completed: usize,
    pub failed: usize,
    pub failures: Vec<ReplicationFailure>,
    pub coefficients: Vec<CoefficientSummary>,
    pub metric_global: Option<Distribution5>,
    pub metric_averaged: Option<Distribution5>,
    pub mse: Option<Distribution5>,
    pub k_end: Option<Distribution5>,
    /// Fraction of completed replications whose chains all passed R̂.
    pub converged_fraction: f64,
    pub records: Vec<ReplicationRecord>,
}

impl ReplicationReport {
    /// One CSV row per completed replication, `ξ_k` as columns `xi1..xiK`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let k = self.spec.num_bases;
        let mut header: Vec<String> = [
            "replication",
            "data_seed",
            "sampler_seed",
            "k_end",
            "metric_global",
            "metric_averaged",
            "mse",
            "gcv_mean",
            "sigma2_hat",
            "tau2_hat",
            "max_rhat",
            "converged",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((1..=k).map(|j| format!("xi{j}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.replication.to_string(),
                r.data_seed.to_string(),
                r.sampler_seed.to_string(),
                r.k_end.to_string(),
                format!("{:.16e}", r.metric_global),
                format!("{:.16e}", r.metric_averaged),
                format!("{:.16e}", r.mse),
                format!("{:.16e}", r.gcv_mean),
                format!("{:.16e}", r.sigma2_hat),
                format!("{:.16e}", r.tau2_hat),
                r.max_rhat.map(|v| format!("{v:.16e}")).unwrap_or_default(),
                r.converged.to_string(),
            ];
            row.extend(r.xi_hat.iter().map(|x| format!("{x:.16e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits one replication and condenses it to a record.
pub fn run_replication(spec: &ScenarioSpec, r: usize) -> Result<(ReplicationRecord, FitSummary)> {
    let (data_seed, sampler_seed) = spec.replication_seeds(r);
    let synthetic = spec.replication_data(r)?;
    let options = spec.fit_options(sampler_seed)?;
    let fit = fit_dataset(&synthetic.dataset, &options)?;
    let s = &fit.summary;
    let reconstruction = fit.system.evaluate(&synthetic.grid)?.values()
        * nalgebra::DVector::from_column_slice(&s.xi_hat);
    let mse = mse_vs_truth(&synthetic.truth, reconstruction.as_slice())?;
    let record = ReplicationRecord {
        replication: r,
        data_seed,
        sampler_seed,
        xi_hat: s.xi_hat.clone(),
        k_end: s.k_end,
        metric_global: s.metric_global,
        metric_averaged: s.metric_averaged,
        mse,
        gcv_mean: s.gcv_mean,
        sigma2_hat: s.sigma2_hat,
        tau2_hat: s.tau2_hat,
        max_rhat: s.convergence.as_ref().map(|c| c.max_rhat()),
        converged: fit.converged(),
    };
    Ok((record, fit.summary))
}

/// Runs every replication (concurrently when enabled) and aggregates them.
/// Failed replications are counted and skipped.
pub fn run_replications(spec: &ScenarioSpec) -> Result<ReplicationReport> {
    if spec.replications == 0 {
        return Err(Error::InvalidConfig("replications must be positive".into()));
    }
    spec.gibbs.validate()?;
    let outcomes: Vec<Result<ReplicationRecord>> = (0..spec.replications)
        .into_par_iter()
        .map(|r| run_replication(spec, r).map(|(record, _)| record))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(record) => records.push(record),
            Err(e) => {
                warn!("replication {r} failed: {e}");
                failures.push(ReplicationFailure {
                    replication: r,
                    error: e.to_string(),
                });
            }
        }
    }

    let completed = records.len();
    let coefficients = (0..spec.num_bases)
        .filter_map(|k| {
            let values: Vec<f64> = records.iter().map(|r| r.xi_hat[k]).collect();
            Some(CoefficientSummary {
                basis: k + 1,
                distribution: Distribution5::of(&values)?,
                zero_frequency: values.iter().filter(|v| **v == 0.0).count() as f64
                    / completed as f64,
            })
        })
        .collect();
    let collect = |f: fn(&ReplicationRecord) -> f64| {
        Distribution5::of(&records.iter().map(f).collect::<Vec<_>>())
    };
    let converged_fraction = if completed == 0 {
        0.0
    } else {
        records.iter().filter(|r| r.converged).count() as f64 / completed as f64
    };
    Ok(ReplicationReport {
        spec: spec.clone(),
        completed,
        failed: failures.len(),
        failures,
        coefficients,
        metric_global: collect(|r| r.metric_global),
        metric_averaged: collect(|r| r.metric_averaged),
        mse: collect(|r| r.mse),
        k_end: collect(|r| r.k_end as f64),
        converged_fraction,
        records,
    })
}
