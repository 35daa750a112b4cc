//! Data, hyperparameters and chain state of the hierarchical model
//!
//! ```text
//! y_ij | Z, β, σ²  ~ N(Σ_k Z_ki β_ki B_k(t_ij), σ²)
//! β_ki | σ², τ²    ~ N(0, σ² τ²)
//! Z_ki | θ_ki      ~ Bernoulli(θ_ki)
//! θ_ki | μ_ki      ~ Beta(μ_ki, 1 − μ_ki)
//! μ_ki             ~ U(0, ψ)            (random-μ variant only)
//! τ² ~ IG(λ₁, λ₂),  σ² ~ IG(δ₁, δ₂)
//! ```
//!
//! Coefficient matrices are stored curve-major: row `i` holds curve `i`,
//! column `k` holds basis `k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bases::BasisMatrix;
use crate::{Error, Result};

/// One observed curve: `n` pairs `(t_j, y_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: String,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    pub fn new(id: impl Into<String>, t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if t.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "curve `{id}` has {} points but {} observations",
                t.len(),
                y.len()
            )));
        }
        if t.is_empty() {
            return Err(Error::InvalidConfig(format!("curve `{id}` is empty")));
        }
        if t.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("curve `{id}` has non-finite values")));
        }
        Ok(Self { id, t, y })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// `m >= 1` curves, optionally standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    curves: Vec<Curve>,
    /// Per-curve divisor applied by [`standardize_curves`].
    scales: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InvalidConfig("dataset has no curves".into()));
        }
        Ok(Self {
            curves,
            scales: None,
        })
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn curve(&self, i: usize) -> &Curve {
        &self.curves[i]
    }

    pub fn num_curves(&self) -> usize {
        self.curves.len()
    }

    pub fn total_points(&self) -> usize {
        self.curves.iter().map(Curve::len).sum()
    }

    pub fn scales(&self) -> Option<&[f64]> {
        self.scales.as_deref()
    }

    /// Smallest and largest evaluation point over all curves.
    pub fn time_range(&self) -> (f64, f64) {
        self.curves
            .iter()
            .flat_map(|c| c.t.iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                (lo.min(t), hi.max(t))
            })
    }

    /// Multiplies each curve back by its recorded scale.
    pub fn rescaled(&self) -> Dataset {
        match &self.scales {
            None => self.clone(),
            Some(scales) => Dataset {
                curves: self
                    .curves
                    .iter()
                    .zip(scales)
                    .map(|(c, s)| Curve {
                        id: c.id.clone(),
                        t: c.t.clone(),
                        y: c.y.iter().map(|y| y * s).collect(),
                    })
                    .collect(),
                scales: None,
            },
        }
    }
}

/// Sample standard deviation with the `n − 1` denominator.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Divides each curve by its sample standard deviation and records the scale.
pub fn standardize_curves(data: &Dataset) -> Result<Dataset> {
    let mut curves = Vec::with_capacity(data.num_curves());
    let mut scales = Vec::with_capacity(data.num_curves());
    for (i, c) in data.curves.iter().enumerate() {
        let sd = sample_sd(&c.y);
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::DegenerateCurve { curve: i });
        }
        curves.push(Curve {
            id: c.id.clone(),
            t: c.t.clone(),
            y: c.y.iter().map(|y| y / sd).collect(),
        });
        scales.push(sd);
    }
    Ok(Dataset {
        curves,
        scales: Some(scales),
    })
}

/// Treatment of the prior means `μ_ki` of the inclusion probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum MuMode {
    /// A single hyperparameter shared by every `(k, i)`.
    Fixed(f64),
    /// `μ_ki ~ U(0, ψ)` with the upper bound `ψ` given here.
    Random(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub delta1: f64,
    pub delta2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: MuMode,
}

impl Hyperparameters {
    /// Vague variance priors (`δ₁ = δ₂ = λ₁ = λ₂ = 0`) with the given μ mode.
    pub fn new(mu: MuMode) -> Result<Self> {
        let h = Self {
            delta1: 0.0,
            delta2: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            mu,
        };
        h.validate()?;
        Ok(h)
    }

    /// Fixed `μ = C / K`, where `C` is the prior expected number of selected
    /// bases per curve.
    pub fn from_expected_count(expected: f64, num_bases: usize) -> Result<Self> {
        if !(expected > 0.0 && expected < num_bases as f64) {
            return Err(Error::InvalidConfig(format!(
                "expected basis count C = {expected} must lie in (0, K = {num_bases})"
            )));
        }
        Self::new(MuMode::Fixed(expected / num_bases as f64))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be a nonnegative real, got {v}"
                )));
            }
        }
        let (label, v) = match self.mu {
            MuMode::Fixed(mu) => ("mu", mu),
            MuMode::Random(psi) => ("psi", psi),
        };
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidConfig(format!("{label} must lie in (0, 1), got {v}")));
        }
        Ok(())
    }
}

/// Current value of the `μ_ki`.
#[derive(Debug, Clone, PartialEq)]
pub enum MuState {
    Fixed(f64),
    Random(DMatrix<f64>),
}

impl MuState {
    pub fn get(&self, i: usize, k: usize) -> f64 {
        match self {
            MuState::Fixed(mu) => *mu,
            MuState::Random(m) => m[(i, k)],
        }
    }
}

/// One Gibbs iteration's values of every model quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    /// Partial coefficients `β_ki`, `m × K`.
    pub beta: DMatrix<f64>,
    /// Inclusion indicators `Z_ki`, `m × K`.
    pub z: DMatrix<bool>,
    /// Inclusion probabilities `θ_ki`, `m × K`.
    pub theta: DMatrix<f64>,
    pub mu: MuState,
    pub sigma2: f64,
    pub tau2: f64,
}

impl ChainState {
    pub fn num_curves(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_bases(&self) -> usize {
        self.beta.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Domain(format!("sigma2 = {} is not positive", self.sigma2)));
        }
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return Err(Error::Domain(format!("tau2 = {} is not positive", self.tau2)));
        }
        let shape = self.beta.shape();
        if self.z.shape() != shape || self.theta.shape() != shape {
            return Err(Error::DimensionMismatch(
                "beta, z and theta must share one shape".into(),
            ));
        }
        if let MuState::Random(m) = &self.mu {
            if m.shape() != shape {
                return Err(Error::DimensionMismatch("mu has the wrong shape".into()));
            }
        }
        if self.theta.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::Domain("theta entries must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Number of included bases for curve `i`.
    pub fn active_count(&self, i: usize) -> usize {
        self.z.row(i).iter().filter(|z| **z).count()
    }
}

/// Mean function of curve `i`: `Σ_k Z_ki β_ki B_k(t_j)` at every row of `basis`.
pub fn predict_curve(state: &ChainState, basis: &BasisMatrix, i: usize) -> Result<DVector<f64>> {
    if basis.num_bases() != state.num_bases() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} columns, state has K = {}",
            basis.num_bases(),
            state.num_bases()
        )));
    }
    if i >= state.num_curves() {
        return Err(Error::DimensionMismatch(format!(
            "curve index {i} out of range for m = {}",
            state.num_curves()
        )));
    }
    let coef = active_coefficients(state, i);
    Ok(basis.values() * coef)
}

/// `diag(Z_.i) β_.i` as a column vector.
pub(crate) fn active_coefficients(state: &ChainState, i: usize) -> DVector<f64> {
    DVector::from_iterator(
        state.num_bases(),
        (0..state.num_bases()).map(|k| {
            if state.z[(i, k)] {
                state.beta[(i, k)]
            } else {
                0.0
            }
        }),
    )
}

fn check_layout(state: &ChainState, data: &Dataset, bases: &[BasisMatrix]) -> Result<()> {
    if bases.len() != data.num_curves() || state.num_curves() != data.num_curves() {
        return Err(Error::DimensionMismatch(format!(
            "{} curves, {} basis matrices, state with m = {}",
            data.num_curves(),
            bases.len(),
            state.num_curves()
        )));
    }
    for (i, (b, c)) in bases.iter().zip(data.curves()).enumerate() {
        if b.num_points() != c.len() || b.num_bases() != state.num_bases() {
            return Err(Error::DimensionMismatch(format!(
                "basis matrix of curve {i} is {}x{}, expected {}x{}",
                b.num_points(),
                b.num_bases(),
                c.len(),
                state.num_bases()
            )));
        }
    }
    Ok(())
}

/// Sum of squared residuals over every curve.
pub fn residual_sum_of_squares(
    state: &ChainState,
    data: &Dataset,
    bases: &[BasisMatrix],
) -> Result<f64> {
    check_layout(state, data, bases)?;
    let mut sse = 0.0;
    for (i, (basis, curve)) in bases.iter().zip(data.curves()).enumerate() {
        let fitted = predict_curve(state, basis, i)?;
        sse += curve
            .y
            .iter()
            .zip(fitted.iter())
            .map(|(y, g)| (y - g).powi(2))
            .sum::<f64>();
    }
    Ok(sse)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Log joint posterior density up to an additive constant.
///
/// Sum of the inverse-gamma variance priors, the uniform μ prior (random mode
/// only), the Beta–Bernoulli terms `Σ (μ_ki + Z_ki − 1) logit θ_ki`, the
/// Gaussian slab on β and the Gaussian likelihood. Returns `-inf` when a
/// random `μ_ki` falls outside `(0, ψ)`.
pub fn log_joint_posterior(
    state: &ChainState,
    data: &Dataset,
    bases: &[BasisMatrix],
    hyp: &Hyperparameters,
) -> Result<f64> {
    state.validate()?;
    check_layout(state, data, bases)?;
    let (s2, t2) = (state.sigma2, state.tau2);
    let mk = (state.num_curves() * state.num_bases()) as f64;
    let total_n = data.total_points() as f64;
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut lp = -(hyp.delta1 + 1.0) * s2.ln() - hyp.delta2 / s2;
    lp += -(hyp.lambda1 + 1.0) * t2.ln() - hyp.lambda2 / t2;

    if let (MuMode::Random(psi), MuState::Random(mu)) = (hyp.mu, &state.mu) {
        if mu.iter().any(|m| !(*m > 0.0 && *m < psi)) {
            return Ok(f64::NEG_INFINITY);
        }
        lp -= mk * psi.ln();
    }

    let mut selection = 0.0;
    for i in 0..state.num_curves() {
        for k in 0..state.num_bases() {
            let z = if state.z[(i, k)] { 1.0 } else { 0.0 };
            selection += (state.mu.get(i, k) + z - 1.0) * logit(state.theta[(i, k)]);
        }
    }
    lp += selection;

    let beta_sq: f64 = state.beta.iter().map(|b| b * b).sum();
    lp -= 0.5 * mk * (two_pi * s2 * t2).ln();
    lp -= beta_sq / (2.0 * s2 * t2);

    let sse = residual_sum_of_squares(state, data, bases)?;
    lp -= 0.5 * total_n * (two_pi * s2).ln();
    lp -= sse / (2.0 * s2);
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{BasisSystem, Interval};
    use proptest::prelude::*;

    pub(crate) fn state_with(
        beta: DMatrix<f64>,
        z: DMatrix<bool>,
        theta: f64,
        mu: f64,
        sigma2: f64,
        tau2: f64,
    ) -> ChainState {
        let (m, k) = beta.shape();
        ChainState {
            beta,
            z,
            theta: DMatrix::from_element(m, k, theta),
            mu: MuState::Fixed(mu),
            sigma2,
            tau2,
        }
    }

    fn study1_basis() -> BasisMatrix {
        let sys = BasisSystem::bspline(Interval::new(0.0, 1.0).unwrap(), 10, 4).unwrap();
        let t: Vec<f64> = (0..100).map(|j| j as f64 / 99.0).collect();
        sys.evaluate(&t).unwrap()
    }

    #[test]
    fn prediction_with_no_active_bases_is_zero() {
        let basis = study1_basis();
        let s = state_with(
            DMatrix::from_element(1, 10, 3.0),
            DMatrix::from_element(1, 10, false),
            0.5,
            0.5,
            1.0,
            1.0,
        );
        assert!(predict_curve(&s, &basis, 0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn prediction_scales_single_column() {
        let basis =
            BasisMatrix::from_values(DMatrix::from_element(4, 1, 1.0), vec![0.0; 4]).unwrap();
        let s = state_with(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, true),
            0.5,
            0.5,
            1.0,
            1.0,
        );
        assert_eq!(predict_curve(&s, &basis, 0).unwrap().as_slice(), &[2.0; 4]);
    }

    #[test]
    fn prediction_matches_dot_product_oracle() {
        let basis = study1_basis();
        let coef = [-2.0, 0.0, 1.5, 1.5, 0.0, -1.0, -0.5, -1.0, 0.0, 0.0];
        let pattern = [1, 0, 1, 1, 0, 1, 1, 1, 0, 0];
        let s = state_with(
            DMatrix::from_row_slice(1, 10, &coef),
            DMatrix::from_iterator(1, 10, pattern.iter().map(|p| *p == 1)),
            0.5,
            0.5,
            1.0,
            1.0,
        );
        let got = predict_curve(&s, &basis, 0).unwrap();
        for j in 0..basis.num_points() {
            let mut dot = 0.0;
            for k in 0..10 {
                dot += pattern[k] as f64 * coef[k] * basis.values()[(j, k)];
            }
            assert_close!(got[j], dot, 1e-12);
        }
    }

    #[test]
    fn prediction_rejects_dimension_mismatch() {
        let basis = study1_basis();
        let s = state_with(
            DMatrix::zeros(1, 3),
            DMatrix::from_element(1, 3, true),
            0.5,
            0.5,
            1.0,
            1.0,
        );
        assert!(matches!(
            predict_curve(&s, &basis, 0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn toy_problem() -> (Dataset, Vec<BasisMatrix>, ChainState, Hyperparameters) {
        let t = vec![0.0, 0.3, 0.6, 1.0];
        let y = vec![0.2, -0.4, 1.1, 0.7];
        let data = Dataset::new(vec![Curve::new("a", t.clone(), y).unwrap()]).unwrap();
        let sys = BasisSystem::bspline(Interval::new(0.0, 1.0).unwrap(), 2, 2).unwrap();
        let bases = vec![sys.evaluate(&t).unwrap()];
        let state = ChainState {
            beta: DMatrix::from_row_slice(1, 2, &[0.3, 0.8]),
            z: DMatrix::from_row_slice(1, 2, &[true, false]),
            theta: DMatrix::from_row_slice(1, 2, &[0.35, 0.6]),
            mu: MuState::Fixed(0.2),
            sigma2: 0.7,
            tau2: 1.9,
        };
        let hyp = Hyperparameters {
            delta1: 0.5,
            delta2: 0.25,
            lambda1: 1.0,
            lambda2: 2.0,
            mu: MuMode::Fixed(0.2),
        };
        (data, bases, state, hyp)
    }

    #[test]
    fn theta_difference_matches_term_oracle() {
        let (data, bases, state, hyp) = toy_problem();
        let mut moved = state.clone();
        moved.theta[(0, 0)] = 0.81;
        let a = log_joint_posterior(&state, &data, &bases, &hyp).unwrap();
        let b = log_joint_posterior(&moved, &data, &bases, &hyp).unwrap();
        // Only the (μ + Z − 1) logit θ term moves; μ = 0.2, Z = 1.
        let expected = 0.2 * ((0.81f64 / 0.19).ln() - (0.35f64 / 0.65).ln());
        assert_close!(b - a, expected, 1e-10);
    }

    #[test]
    fn full_density_matches_direct_evaluation() {
        let (data, bases, state, hyp) = toy_problem();
        let lp = log_joint_posterior(&state, &data, &bases, &hyp).unwrap();
        let (s2, t2) = (0.7f64, 1.9f64);
        let two_pi = 2.0 * std::f64::consts::PI;
        let b = bases[0].values();
        let mut sse = 0.0;
        for j in 0..4 {
            let g = 0.3 * b[(j, 0)];
            sse += (data.curve(0).y[j] - g).powi(2);
        }
        let sel = (0.2 + 1.0 - 1.0) * (0.35f64 / 0.65).ln() + (0.2 - 1.0) * (0.6f64 / 0.4).ln();
        let expected = -(1.5) * s2.ln() - 0.25 / s2 - 2.0 * t2.ln() - 2.0 / t2 + sel
            - (two_pi * s2 * t2).ln()
            - (0.09 + 0.64) / (2.0 * s2 * t2)
            - 2.0 * (two_pi * s2).ln()
            - sse / (2.0 * s2);
        assert_close!(lp, expected, 1e-12);
    }

    #[test]
    fn doubling_data_with_empty_model() {
        let (data, bases, mut state, hyp) = toy_problem();
        state.beta.fill(0.0);
        state.z.fill(false);
        let doubled = Dataset::new(vec![Curve::new(
            "a",
            data.curve(0).t.clone(),
            data.curve(0).y.iter().map(|y| 2.0 * y).collect(),
        )
        .unwrap()])
        .unwrap();
        let a = log_joint_posterior(&state, &data, &bases, &hyp).unwrap();
        let b = log_joint_posterior(&state, &doubled, &bases, &hyp).unwrap();
        let sum_sq: f64 = data.curve(0).y.iter().map(|y| y * y).sum();
        assert_close!(b - a, -3.0 * sum_sq / (2.0 * state.sigma2), 1e-12);
    }

    #[test]
    fn nonpositive_variance_is_domain_error() {
        let (data, bases, mut state, hyp) = toy_problem();
        state.sigma2 = 0.0;
        assert!(matches!(
            log_joint_posterior(&state, &data, &bases, &hyp),
            Err(Error::Domain(_))
        ));
        state.sigma2 = 1.0;
        state.tau2 = -1.0;
        assert!(log_joint_posterior(&state, &data, &bases, &hyp).is_err());
    }

    #[test]
    fn random_mu_outside_support_has_zero_density() {
        let (data, bases, mut state, mut hyp) = toy_problem();
        hyp.mu = MuMode::Random(0.6);
        state.mu = MuState::Random(DMatrix::from_row_slice(1, 2, &[0.3, 0.7]));
        let lp = log_joint_posterior(&state, &data, &bases, &hyp).unwrap();
        assert_eq!(lp, f64::NEG_INFINITY);
    }

    #[test]
    fn standardize_uses_sample_sd() {
        let data = Dataset::new(vec![Curve::new("a", vec![0.0, 1.0, 2.0], vec![2.0, 4.0, 6.0])
            .unwrap()])
        .unwrap();
        let s = standardize_curves(&data).unwrap();
        assert_eq!(s.scales().unwrap(), &[2.0]);
        assert_eq!(s.curve(0).y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn standardize_unit_sd_is_identity() {
        let y = vec![-1.0, 0.0, 1.0];
        let data = Dataset::new(vec![Curve::new("a", vec![0.0, 1.0, 2.0], y.clone()).unwrap()])
            .unwrap();
        let s = standardize_curves(&data).unwrap();
        assert_eq!(s.scales().unwrap(), &[1.0]);
        assert_eq!(s.curve(0).y, y);
    }

    #[test]
    fn standardize_rejects_constant_curve() {
        let data = Dataset::new(vec![
            Curve::new("a", vec![0.0, 1.0], vec![1.0, 2.0]).unwrap(),
            Curve::new("b", vec![0.0, 1.0, 2.0], vec![5.0; 3]).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            standardize_curves(&data),
            Err(Error::DegenerateCurve { curve: 1 })
        ));
    }

    #[test]
    fn hyperparameters_validate() {
        assert!(Hyperparameters::new(MuMode::Fixed(0.0)).is_err());
        assert!(Hyperparameters::new(MuMode::Random(1.0)).is_err());
        let h = Hyperparameters::from_expected_count(2.0, 10).unwrap();
        assert_eq!(h.mu, MuMode::Fixed(0.2));
        assert!(Hyperparameters::from_expected_count(11.0, 10).is_err());
    }

    #[test]
    fn curve_rejects_bad_input() {
        assert!(Curve::new("a", vec![0.0], vec![]).is_err());
        assert!(Curve::new("a", vec![], vec![]).is_err());
        assert!(Curve::new("a", vec![f64::NAN], vec![1.0]).is_err());
        assert!(Dataset::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn prediction_is_linear_in_beta(
            coef in proptest::collection::vec(-5.0f64..5.0, 10),
            scale in -3.0f64..3.0,
        ) {
            let basis = study1_basis();
            let z = DMatrix::from_fn(1, 10, |_, k| k % 3 != 1);
            let s = state_with(DMatrix::from_row_slice(1, 10, &coef), z.clone(), 0.5, 0.5, 1.0, 1.0);
            let scaled = state_with(
                DMatrix::from_row_slice(1, 10, &coef) * scale, z, 0.5, 0.5, 1.0, 1.0,
            );
            let a = predict_curve(&s, &basis, 0).unwrap() * scale;
            let b = predict_curve(&scaled, &basis, 0).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn larger_residual_lowers_density(bump in 0.1f64..5.0, j in 0usize..4) {
            let (data, bases, state, hyp) = toy_problem();
            let fitted = predict_curve(&state, &bases[0], 0).unwrap();
            let mut y = data.curve(0).y.clone();
            let r = y[j] - fitted[j];
            y[j] += bump * if r >= 0.0 { 1.0 } else { -1.0 };
            let moved = Dataset::new(vec![Curve::new("a", data.curve(0).t.clone(), y).unwrap()]).unwrap();
            let a = log_joint_posterior(&state, &data, &bases, &hyp).unwrap();
            let b = log_joint_posterior(&state, &moved, &bases, &hyp).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn standardize_round_trips(y in proptest::collection::vec(-100.0f64..100.0, 3..30)) {
            prop_assume!(sample_sd(&y) > 1e-6);
            let t: Vec<f64> = (0..y.len()).map(|j| j as f64).collect();
            let data = Dataset::new(vec![Curve::new("a", t, y.clone()).unwrap()]).unwrap();
            let back = standardize_curves(&data).unwrap().rescaled();
            for (a, b) in back.curve(0).y.iter().zip(&y) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
