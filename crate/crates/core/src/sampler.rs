//! Full-conditional draws and the multi-chain Gibbs sweep.
//!
//! One iteration updates, in order: `σ²`, `τ²`, then for every curve `i` and
//! basis `k` the triple `(μ_ki, Z_ki, θ_ki)` (μ only in random-μ mode), and
//! finally each curve's coefficient block `β_.i`. Indicator updates always see
//! the freshest values of the other indicators.
//!
//! Inverse-gamma laws are written `IG(shape, rate)` with density
//! `∝ x^{-shape-1} exp(-rate / x)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bases::BasisMatrix;
use crate::model::{active_coefficients, ChainState, Dataset, Hyperparameters, MuMode, MuState};
use crate::par::*;
use crate::rng::{stream_rng, SamplerRng};
use crate::{Error, Result};

/// Below this |logit θ| the μ conditional is treated as uniform.
pub const MU_FLAT_EPS: f64 = 1e-10;

/// Relative distance from ψ used when an initial μ would leave `(0, ψ)`.
const MU_CLAMP: f64 = 1e-6;

/// Number of jitter additions tried before a Cholesky failure is reported.
const JITTER_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub num_iterations: usize,
    pub num_chains: usize,
    pub burn_in_fraction: f64,
    pub thinning: usize,
    /// Master seed; chain `c` draws from stream `c + 1`, the shared initial
    /// indicator draw from stream 0.
    pub seed: u64,
    /// Starting states for chains beyond the two built-in ones.
    #[serde(skip)]
    pub extra_inits: Vec<ChainState>,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            num_iterations: 10_000,
            num_chains: 2,
            burn_in_fraction: 0.5,
            thinning: 50,
            seed: 0,
            extra_inits: Vec::new(),
        }
    }
}

impl GibbsConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Iterations discarded as burn-in.
    pub fn burn_in(&self) -> usize {
        (self.num_iterations as f64 * self.burn_in_fraction).floor() as usize
    }

    /// Draws kept per chain after burn-in and thinning.
    pub fn retained_per_chain(&self) -> usize {
        if self.thinning == 0 {
            return 0;
        }
        (self.num_iterations - self.burn_in().min(self.num_iterations)) / self.thinning
    }

    /// Whether iteration `c` (1-based) is kept.
    fn keeps(&self, c: usize) -> bool {
        let burn = self.burn_in();
        c > burn && (c - burn).is_multiple_of(self.thinning)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidConfig(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        if self.num_chains == 0 {
            return Err(Error::InvalidConfig("at least one chain is required".into()));
        }
        if self.num_chains > 2 + self.extra_inits.len() {
            return Err(Error::InvalidConfig(format!(
                "{} chains requested but only {} starting states available",
                self.num_chains,
                2 + self.extra_inits.len()
            )));
        }
        if self.retained_per_chain() == 0 {
            return Err(Error::InvalidConfig(format!(
                "schedule keeps no draws ({} iterations, burn-in {}, thinning {})",
                self.num_iterations, self.burn_in_fraction, self.thinning
            )));
        }
        Ok(())
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// 1-based chain number.
    pub chain: usize,
    pub seed: u64,
    pub init_label: String,
    /// 1-based iteration number of every retained state.
    pub iterations: Vec<usize>,
    pub states: Vec<ChainState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub chains: Vec<ChainDraws>,
}

impl PosteriorSample {
    pub fn states(&self) -> impl Iterator<Item = &ChainState> {
        self.chains.iter().flat_map(|c| c.states.iter())
    }

    pub fn len(&self) -> usize {
        self.chains.iter().map(|c| c.states.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-chain trace of a scalar extracted from each retained state.
    pub fn traces<F: Fn(&ChainState) -> f64>(&self, f: F) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.states.iter().map(&f).collect())
            .collect()
    }
}

/// Indicator pattern for the first chain: independent fair coin flips.
pub fn initial_indicators<R: Rng + ?Sized>(
    num_curves: usize,
    num_bases: usize,
    rng: &mut R,
) -> DMatrix<bool> {
    DMatrix::from_fn(num_curves, num_bases, |_, _| rng.random_bool(0.5))
}

/// Built-in starting state of chain 1 or 2.
///
/// Chain 1: `β ≡ −1, θ ≡ 1/5, σ² = τ² = 1`, indicators `first_draw`.
/// Chain 2: `β ≡ 1, θ ≡ 4/5, σ² = τ² = 5`, indicators the complement of
/// `first_draw`. In random-μ mode μ starts at 1/5 and 4/5 respectively, moved
/// just inside `(0, ψ)` when it would fall outside.
pub fn init_chain(
    chain_index: usize,
    hyp: &Hyperparameters,
    first_draw: &DMatrix<bool>,
) -> Result<ChainState> {
    let (m, k) = first_draw.shape();
    let (beta, theta, var, z, mu0) = match chain_index {
        1 => (-1.0, 0.2, 1.0, first_draw.clone(), 0.2),
        2 => (1.0, 0.8, 5.0, first_draw.map(|z| !z), 0.8),
        other => {
            return Err(Error::InvalidConfig(format!(
                "no built-in starting state for chain {other}"
            )))
        }
    };
    let mu = match hyp.mu {
        MuMode::Fixed(mu) => MuState::Fixed(mu),
        MuMode::Random(psi) => {
            let v = if mu0 < psi { mu0 } else { psi * (1.0 - MU_CLAMP) };
            MuState::Random(DMatrix::from_element(m, k, v))
        }
    };
    Ok(ChainState {
        beta: DMatrix::from_element(m, k, beta),
        z,
        theta: DMatrix::from_element(m, k, theta),
        mu,
        sigma2: var,
        tau2: var,
    })
}

/// Draw from `IG(shape, rate)` as the reciprocal of a Gamma draw.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(
    parameter: &'static str,
    shape: f64,
    rate: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(Error::ImproperConditional {
            parameter,
            shape,
            rate,
        });
    }
    let gamma = Gamma::new(shape, 1.0 / rate).map_err(|_| Error::ImproperConditional {
        parameter,
        shape,
        rate,
    })?;
    let g: f64 = gamma.sample(rng);
    Ok(1.0 / g.max(f64::MIN_POSITIVE))
}

/// `(shape, rate)` of the σ² full conditional given the residual sum of
/// squares `sse` and `Σ β²`.
pub fn sigma2_parameters(
    total_points: usize,
    num_coefficients: usize,
    sse: f64,
    beta_sq: f64,
    tau2: f64,
    hyp: &Hyperparameters,
) -> (f64, f64) {
    let shape = total_points as f64 / 2.0 + num_coefficients as f64 / 2.0 + hyp.delta1;
    let rate = (sse + beta_sq / tau2 + 2.0 * hyp.delta2) / 2.0;
    (shape, rate)
}

/// `(shape, rate)` of the τ² full conditional.
pub fn tau2_parameters(
    num_coefficients: usize,
    beta_sq: f64,
    sigma2: f64,
    hyp: &Hyperparameters,
) -> (f64, f64) {
    let shape = num_coefficients as f64 / 2.0 + hyp.lambda1;
    let rate = (beta_sq / sigma2 + 2.0 * hyp.lambda2) / 2.0;
    (shape, rate)
}

fn beta_sq(state: &ChainState) -> f64 {
    state.beta.iter().map(|b| b * b).sum()
}

pub fn sample_sigma2<R: Rng + ?Sized>(
    state: &ChainState,
    data: &Dataset,
    bases: &[BasisMatrix],
    hyp: &Hyperparameters,
    rng: &mut R,
) -> Result<f64> {
    let sse = crate::model::residual_sum_of_squares(state, data, bases)?;
    let (shape, rate) = sigma2_parameters(
        data.total_points(),
        state.beta.len(),
        sse,
        beta_sq(state),
        state.tau2,
        hyp,
    );
    sample_inverse_gamma("sigma2", shape, rate, rng)
}

pub fn sample_tau2<R: Rng + ?Sized>(
    state: &ChainState,
    hyp: &Hyperparameters,
    rng: &mut R,
) -> Result<f64> {
    let (shape, rate) = tau2_parameters(state.beta.len(), beta_sq(state), state.sigma2, hyp);
    sample_inverse_gamma("tau2", shape, rate, rng)
}

/// Keeps a probability strictly inside `(0, 1)`.
fn open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Draw `θ_ki ~ Beta(μ_ki + Z_ki, 2 − Z_ki − μ_ki)`.
pub fn sample_theta<R: Rng + ?Sized>(mu: f64, z: bool, rng: &mut R) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("mu = {mu} outside (0, 1)")));
    }
    let zf = if z { 1.0 } else { 0.0 };
    let beta = Beta::new(mu + zf, 2.0 - zf - mu)
        .map_err(|e| Error::Domain(format!("beta conditional for theta: {e}")))?;
    Ok(open_unit(beta.sample(rng)))
}

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `P(Z_ki = 1 | rest)` from the prior weight `θ` and the change in residual
/// sum of squares `delta = SSE(Z_ki = 1) − SSE(Z_ki = 0)`, evaluated on the
/// log-odds scale `logit θ − delta / (2σ²)`.
pub fn inclusion_probability(theta: f64, delta: f64, sigma2: f64) -> f64 {
    if theta >= 1.0 {
        return 1.0;
    }
    if theta <= 0.0 {
        return 0.0;
    }
    let log_odds = (theta / (1.0 - theta)).ln() - delta / (2.0 * sigma2);
    logistic(log_odds)
}

/// `SSE(with) − SSE(without)` for one curve, where `excluded` is the residual
/// with basis `k` removed and `contribution` is `β_ki B_k(t_.)`.
fn inclusion_delta(excluded: &[f64], contribution: &[f64]) -> f64 {
    excluded
        .iter()
        .zip(contribution)
        .map(|(e, c)| c * c - 2.0 * e * c)
        .sum()
}

/// Inclusion probability of basis `k` in curve `i` given everything else in
/// `state`, recomputed from scratch.
pub fn z_inclusion_probability(
    state: &ChainState,
    data: &Dataset,
    basis_i: &BasisMatrix,
    k: usize,
    i: usize,
) -> Result<f64> {
    let curve = data.curve(i);
    if basis_i.num_points() != curve.len() || basis_i.num_bases() != state.num_bases() {
        return Err(Error::DimensionMismatch(format!(
            "basis matrix for curve {i} does not match data and state"
        )));
    }
    let mut coef = active_coefficients(state, i);
    coef[k] = 0.0;
    let fitted_without = basis_i.values() * coef;
    let excluded: Vec<f64> = curve
        .y
        .iter()
        .zip(fitted_without.iter())
        .map(|(y, g)| y - g)
        .collect();
    let beta = state.beta[(i, k)];
    let contribution: Vec<f64> = basis_i.values().column(k).iter().map(|b| beta * b).collect();
    let delta = inclusion_delta(&excluded, &contribution);
    Ok(inclusion_probability(state.theta[(i, k)], delta, state.sigma2))
}

pub fn sample_z<R: Rng + ?Sized>(
    state: &ChainState,
    data: &Dataset,
    basis_i: &BasisMatrix,
    k: usize,
    i: usize,
    rng: &mut R,
) -> Result<bool> {
    let p = z_inclusion_probability(state, data, basis_i, k, i)?;
    Ok(rng.random::<f64>() < p)
}

/// Quantile function of the continuous Bernoulli law with parameter `theta`
/// truncated to `(0, psi)`: density `∝ θ^μ (1 − θ)^{1−μ}`, i.e. a truncated
/// exponential with rate `logit θ`.
pub fn truncated_continuous_bernoulli_quantile(theta: f64, psi: f64, u: f64) -> f64 {
    let lambda = (theta / (1.0 - theta)).ln();
    let mu = if lambda.abs() <= MU_FLAT_EPS {
        u * psi
    } else {
        (u * (lambda * psi).exp_m1()).ln_1p() / lambda
    };
    mu.clamp(psi * 1e-12, psi * (1.0 - 1e-12))
}

/// CDF matching [`truncated_continuous_bernoulli_quantile`].
pub fn truncated_continuous_bernoulli_cdf(theta: f64, psi: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= psi {
        return 1.0;
    }
    let lambda = (theta / (1.0 - theta)).ln();
    if lambda.abs() <= MU_FLAT_EPS {
        x / psi
    } else {
        (lambda * x).exp_m1() / (lambda * psi).exp_m1()
    }
}

/// Draw `μ_ki` from its truncated continuous Bernoulli conditional.
pub fn sample_mu<R: Rng + ?Sized>(theta: f64, psi: f64, rng: &mut R) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("theta = {theta} outside (0, 1)")));
    }
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::Domain(format!("psi = {psi} outside (0, 1)")));
    }
    let u: f64 = Open01.sample(rng);
    Ok(truncated_continuous_bernoulli_quantile(theta, psi, u))
}

/// Precision `D = I/τ² + diag(Z) BᵀB diag(Z)` and right-hand side
/// `diag(Z) Bᵀy` of the coefficient block of one curve.
fn beta_system(
    gram: &DMatrix<f64>,
    bty: &DVector<f64>,
    z: impl Fn(usize) -> bool,
    tau2: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let k = gram.nrows();
    let active: Vec<bool> = (0..k).map(z).collect();
    let precision = DMatrix::from_fn(k, k, |r, c| {
        let g = if active[r] && active[c] { gram[(r, c)] } else { 0.0 };
        if r == c {
            g + 1.0 / tau2
        } else {
            g
        }
    });
    let rhs = DVector::from_fn(k, |r, _| if active[r] { bty[r] } else { 0.0 });
    (precision, rhs)
}

/// Cholesky factorization with up to three diagonal jitter additions of
/// `1e-12 · trace(D) / K`.
pub(crate) fn cholesky_with_jitter(
    mut precision: DMatrix<f64>,
    tau2: f64,
) -> Result<Cholesky<f64, Dyn>> {
    let k = precision.nrows();
    let jitter = 1e-12 * precision.trace() / k as f64;
    for attempt in 0..=JITTER_ATTEMPTS {
        if attempt > 0 {
            for d in 0..k {
                precision[(d, d)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(precision.clone()) {
            return Ok(chol);
        }
    }
    let diag = precision.diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
    Err(Error::NotPositiveDefinite {
        tau2,
        condition: hi / lo,
    })
}

fn draw_from_precision<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    rhs: &DVector<f64>,
    sigma2: f64,
    tau2: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = cholesky_with_jitter(precision, tau2)?;
    let mean = chol.solve(rhs);
    let eta = DVector::from_fn(rhs.len(), |_, _| StandardNormal.sample(rng));
    let noise = chol
        .l()
        .tr_solve_lower_triangular(&eta)
        .ok_or(Error::NotPositiveDefinite {
            tau2,
            condition: f64::INFINITY,
        })?;
    Ok(mean + noise * sigma2.sqrt())
}

/// Mean `D⁻¹ Gᵀ y` and precision `D` (covariance `σ² D⁻¹`) of the
/// coefficient block of curve `i`.
pub fn beta_conditional(
    state: &ChainState,
    data: &Dataset,
    basis_i: &BasisMatrix,
    i: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (gram, bty) = curve_moments(basis_i, &data.curve(i).y)?;
    let (precision, rhs) = beta_system(&gram, &bty, |k| state.z[(i, k)], state.tau2);
    let chol = cholesky_with_jitter(precision.clone(), state.tau2)?;
    Ok((chol.solve(&rhs), precision))
}

pub fn sample_beta_block<R: Rng + ?Sized>(
    state: &ChainState,
    data: &Dataset,
    basis_i: &BasisMatrix,
    i: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (gram, bty) = curve_moments(basis_i, &data.curve(i).y)?;
    let (precision, rhs) = beta_system(&gram, &bty, |k| state.z[(i, k)], state.tau2);
    draw_from_precision(precision, &rhs, state.sigma2, state.tau2, rng)
}

fn curve_moments(basis: &BasisMatrix, y: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if basis.num_points() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} rows, curve has {} points",
            basis.num_points(),
            y.len()
        )));
    }
    let b = basis.values();
    let y = DVector::from_column_slice(y);
    Ok((b.tr_mul(b), b.tr_mul(&y)))
}

/// Per-curve quantities that stay fixed for a whole run.
struct CurveDesign<'a> {
    basis: &'a BasisMatrix,
    y: &'a [f64],
    gram: DMatrix<f64>,
    bty: DVector<f64>,
}

impl CurveDesign<'_> {
    fn column(&self, k: usize) -> &[f64] {
        let n = self.basis.num_points();
        &self.basis.values().as_slice()[k * n..(k + 1) * n]
    }
}

/// One chain's mutable state plus cached residuals `y_i − G_i β_.i`.
struct Chain<'a> {
    designs: &'a [CurveDesign<'a>],
    hyp: &'a Hyperparameters,
    state: ChainState,
    residuals: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn new(designs: &'a [CurveDesign<'a>], hyp: &'a Hyperparameters, state: ChainState) -> Self {
        let mut chain = Self {
            designs,
            hyp,
            state,
            residuals: designs.iter().map(|d| vec![0.0; d.y.len()]).collect(),
            scratch: Vec::new(),
        };
        for i in 0..designs.len() {
            chain.refresh_residual(i);
        }
        chain
    }

    fn refresh_residual(&mut self, i: usize) {
        let d = &self.designs[i];
        let coef = active_coefficients(&self.state, i);
        let fitted = d.basis.values() * coef;
        for ((r, y), g) in self.residuals[i].iter_mut().zip(d.y).zip(fitted.iter()) {
            *r = y - g;
        }
    }

    fn sse(&self) -> f64 {
        self.residuals
            .iter()
            .flat_map(|r| r.iter())
            .map(|r| r * r)
            .sum()
    }

    fn sweep(&mut self, rng: &mut SamplerRng) -> Result<()> {
        let hyp = self.hyp;
        let m = self.state.num_curves();
        let num_bases = self.state.num_bases();
        let mk = m * num_bases;
        let total_n: usize = self.designs.iter().map(|d| d.y.len()).sum();

        let bsq = beta_sq(&self.state);
        let (shape, rate) =
            sigma2_parameters(total_n, mk, self.sse(), bsq, self.state.tau2, hyp);
        self.state.sigma2 = sample_inverse_gamma("sigma2", shape, rate, rng)?;

        let (shape, rate) = tau2_parameters(mk, bsq, self.state.sigma2, hyp);
        self.state.tau2 = sample_inverse_gamma("tau2", shape, rate, rng)?;

        for i in 0..m {
            for k in 0..num_bases {
                if let (MuMode::Random(psi), MuState::Random(mu)) = (hyp.mu, &mut self.state.mu) {
                    mu[(i, k)] = sample_mu(self.state.theta[(i, k)], psi, rng)?;
                }
                self.update_indicator(i, k, rng);
                let mu = self.state.mu.get(i, k);
                self.state.theta[(i, k)] = sample_theta(mu, self.state.z[(i, k)], rng)?;
            }
        }

        for i in 0..m {
            let d = &self.designs[i];
            let (precision, rhs) = beta_system(&d.gram, &d.bty, |k| self.state.z[(i, k)], self.state.tau2);
            let draw = draw_from_precision(precision, &rhs, self.state.sigma2, self.state.tau2, rng)?;
            self.state.beta.row_mut(i).copy_from(&draw.transpose());
            self.refresh_residual(i);
        }
        Ok(())
    }

    /// Gibbs update of `Z_ki` using the cached residual of curve `i`.
    fn update_indicator(&mut self, i: usize, k: usize, rng: &mut SamplerRng) {
        let column = self.designs[i].column(k);
        let beta = self.state.beta[(i, k)];
        let was_active = self.state.z[(i, k)];
        let residual = &mut self.residuals[i];

        self.scratch.clear();
        self.scratch.extend(column.iter().map(|b| beta * b));
        if was_active {
            for (r, c) in residual.iter_mut().zip(&self.scratch) {
                *r += c;
            }
        }
        let delta = inclusion_delta(residual, &self.scratch);
        let p = inclusion_probability(self.state.theta[(i, k)], delta, self.state.sigma2);
        let active = rng.random::<f64>() < p;
        if active {
            for (r, c) in residual.iter_mut().zip(&self.scratch) {
                *r -= c;
            }
        }
        self.state.z[(i, k)] = active;
    }
}

fn check_inputs(data: &Dataset, bases: &[BasisMatrix]) -> Result<usize> {
    if bases.len() != data.num_curves() {
        return Err(Error::DimensionMismatch(format!(
            "{} curves but {} basis matrices",
            data.num_curves(),
            bases.len()
        )));
    }
    let k = bases[0].num_bases();
    for (i, (b, c)) in bases.iter().zip(data.curves()).enumerate() {
        if b.num_bases() != k || b.num_points() != c.len() {
            return Err(Error::DimensionMismatch(format!(
                "basis matrix of curve {i} is {}x{}, expected {}x{k}",
                b.num_points(),
                b.num_bases(),
                c.len()
            )));
        }
    }
    Ok(k)
}

fn run_chain(
    designs: &[CurveDesign<'_>],
    hyp: &Hyperparameters,
    config: &GibbsConfig,
    chain: usize,
    start: ChainState,
    init_label: String,
) -> Result<ChainDraws> {
    let stream = chain as u64;
    let mut rng = stream_rng(config.seed, stream);
    let mut runner = Chain::new(designs, hyp, start);
    let mut draws = ChainDraws {
        chain,
        seed: config.seed,
        init_label,
        iterations: Vec::with_capacity(config.retained_per_chain()),
        states: Vec::with_capacity(config.retained_per_chain()),
    };
    for c in 1..=config.num_iterations {
        runner.sweep(&mut rng).map_err(|e| Error::ChainFailed {
            chain,
            iteration: c,
            source: Box::new(e),
        })?;
        if config.keeps(c) {
            draws.iterations.push(c);
            draws.states.push(runner.state.clone());
        }
    }
    Ok(draws)
}

/// Runs every chain of the sampler and returns the retained draws.
///
/// Chains are independent and run concurrently when the `parallel` feature is
/// enabled; the result is identical either way for a given seed.
pub fn run_gibbs(
    data: &Dataset,
    bases: &[BasisMatrix],
    hyp: &Hyperparameters,
    config: &GibbsConfig,
) -> Result<PosteriorSample> {
    config.validate()?;
    hyp.validate()?;
    let num_bases = check_inputs(data, bases)?;
    let m = data.num_curves();

    let mut init_rng = stream_rng(config.seed, 0);
    let first_draw = initial_indicators(m, num_bases, &mut init_rng);
    let mut starts = Vec::with_capacity(config.num_chains);
    for c in 1..=config.num_chains {
        let (state, label) = if c <= 2 {
            (init_chain(c, hyp, &first_draw)?, format!("builtin-{c}"))
        } else {
            let s = config.extra_inits[c - 3].clone();
            s.validate()?;
            if s.beta.shape() != (m, num_bases) {
                return Err(Error::DimensionMismatch(format!(
                    "starting state of chain {c} is not {m}x{num_bases}"
                )));
            }
            (s, format!("custom-{c}"))
        };
        starts.push((c, state, label));
    }

    let designs: Vec<CurveDesign<'_>> = bases
        .iter()
        .zip(data.curves())
        .map(|(basis, curve)| {
            let (gram, bty) = curve_moments(basis, &curve.y)?;
            Ok(CurveDesign {
                basis,
                y: &curve.y,
                gram,
                bty,
            })
        })
        .collect::<Result<_>>()?;

    let chains = starts
        .into_par_iter()
        .map(|(c, state, label)| run_chain(&designs, hyp, config, c, state, label))
        .collect::<Vec<Result<ChainDraws>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSample { chains })
}
