//! Settings shared by the subcommands, from flags and an optional TOML file.
//!
//! Every setting is optional on both sides; a flag overrides the file, and the
//! file overrides the built-in default.

use std::path::Path;

use basis_select::bases::{BasisKind, DEFAULT_ORDER};
use basis_select::diagnostics::DiagnosticsOptions;
use basis_select::fit::{BasisSpec, FitOptions};
use basis_select::model::{Hyperparameters, MuMode};
use basis_select::sampler::GibbsConfig;
use basis_select::summary::Estimator;
use basis_select::synth::{Scenario, ScenarioSpec};
use clap::Args;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Candidate basis family: bspline or fourier
    #[arg(long)]
    pub basis: Option<BasisKind>,
    /// Number of candidate basis functions K
    #[arg(long = "num-bases", short = 'K')]
    pub num_bases: Option<usize>,
    /// B-spline order (degree + 1)
    #[arg(long)]
    pub order: Option<usize>,
    /// Fourier period (defaults to the domain length)
    #[arg(long)]
    pub period: Option<f64>,
    /// Fixed prior mean of the inclusion probabilities
    #[arg(long, conflicts_with = "psi")]
    pub mu: Option<f64>,
    /// Upper bound of a uniform prior on the inclusion means (random-mu mode)
    #[arg(long)]
    pub psi: Option<f64>,
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub delta2: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Gibbs iterations per chain
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Fraction of each chain discarded as burn-in
    #[arg(long = "burn-in")]
    pub burn_in: Option<f64>,
    /// Keep every n-th post-burn-in draw
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Point estimator for continuous parameters: map or posterior-mean
    #[arg(long)]
    pub estimator: Option<Estimator>,
    /// R-hat pass mark
    #[arg(long = "rhat-threshold")]
    pub rhat_threshold: Option<f64>,
    /// Also check sigma2 and tau2 chains for convergence
    #[arg(long = "include-variances", num_args = 0..=1, default_missing_value = "true")]
    pub include_variances: Option<bool>,
    /// Divide each curve by its standard deviation before fitting
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// Synthetic scenario: study1 or study2
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// Noise standard deviation of simulated curves
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Number of simulated curves
    #[arg(long)]
    pub curves: Option<usize>,
    /// Points per simulated curve
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
}

macro_rules! merge_fields {
    ($flags:ident, $file:ident; $($f:ident),* $(,)?) => {
        Settings { $($f: $flags.$f.or($file.$f)),* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Flags in `self` win over `file`.
    pub fn over(self, file: Settings) -> Settings {
        let flags = self;
        merge_fields!(flags, file;
            basis, num_bases, order, period, mu, psi, delta1, delta2, lambda1,
            lambda2, iterations, chains, burn_in, thin, seed, estimator,
            rhat_threshold, include_variances, standardize, scenario, sigma,
            curves, points, replications,
        )
    }

    fn mu_mode(&self, default: MuMode) -> MuMode {
        match (self.mu, self.psi) {
            (_, Some(psi)) => MuMode::Random(psi),
            (Some(mu), None) => MuMode::Fixed(mu),
            (None, None) => default,
        }
    }

    pub fn gibbs(&self) -> GibbsConfig {
        let d = GibbsConfig::default();
        GibbsConfig {
            num_iterations: self.iterations.unwrap_or(d.num_iterations),
            num_chains: self.chains.unwrap_or(d.num_chains),
            burn_in_fraction: self.burn_in.unwrap_or(d.burn_in_fraction),
            thinning: self.thin.unwrap_or(d.thinning),
            seed: self.seed.unwrap_or(d.seed),
            extra_inits: Vec::new(),
        }
    }

    pub fn diagnostics(&self) -> DiagnosticsOptions {
        let d = DiagnosticsOptions::default();
        DiagnosticsOptions {
            threshold: self.rhat_threshold.unwrap_or(d.threshold),
            include_variances: self.include_variances.unwrap_or(d.include_variances),
        }
    }

    fn hyperparameters(&self, mu: MuMode) -> basis_select::Result<Hyperparameters> {
        let h = Hyperparameters {
            delta1: self.delta1.unwrap_or(0.0),
            delta2: self.delta2.unwrap_or(0.0),
            lambda1: self.lambda1.unwrap_or(0.0),
            lambda2: self.lambda2.unwrap_or(0.0),
            mu: self.mu_mode(mu),
        };
        h.validate()?;
        Ok(h)
    }

    /// Options for fitting observed data; B-splines with `K = 10`, `μ = 0.1`
    /// unless configured otherwise.
    pub fn fit_options(&self) -> basis_select::Result<FitOptions> {
        let kind = self.basis.unwrap_or(BasisKind::BSpline);
        let basis = BasisSpec {
            kind,
            num_bases: self.num_bases.unwrap_or(10),
            order: self.order.unwrap_or(DEFAULT_ORDER),
            period: self.period,
            domain: None,
        };
        Ok(FitOptions {
            basis,
            hyperparameters: self.hyperparameters(MuMode::Fixed(0.1))?,
            gibbs: self.gibbs(),
            estimator: self.estimator.unwrap_or_default(),
            diagnostics: self.diagnostics(),
            standardize: self.standardize.unwrap_or(false),
        })
    }

    /// Scenario defaults are the preset of the chosen study.
    pub fn scenario_spec(&self) -> basis_select::Result<ScenarioSpec> {
        let preset = match self.scenario.unwrap_or(Scenario::Study1Bspline) {
            Scenario::Study1Bspline => ScenarioSpec::study1(),
            Scenario::Study2Trig => ScenarioSpec::study2(),
        };
        let spec = ScenarioSpec {
            sigma: self.sigma.unwrap_or(preset.sigma),
            num_curves: self.curves.unwrap_or(preset.num_curves),
            num_points: self.points.unwrap_or(preset.num_points),
            basis_kind: self.basis.unwrap_or(preset.basis_kind),
            num_bases: self.num_bases.unwrap_or(preset.num_bases),
            mu: self.hyperparameters(preset.mu)?.mu,
            replications: self.replications.unwrap_or(preset.replications),
            seed: self.seed.unwrap_or(preset.seed),
            gibbs: self.gibbs(),
            estimator: self.estimator.unwrap_or(preset.estimator),
            diagnostics: self.diagnostics(),
            ..preset
        };
        Ok(spec)
    }
}
