//! Prior log-densities for thresholds and structural parameters.
//!
//! Two threshold-prior families are supported:
//!
//! * **sequential**: independent normals on the unconstrained components
//!   `τ*`, mapped to thresholds by `τ₁ = τ*₁`, `τ_c = τ_{c−1} + exp(τ*_c)`;
//! * **induced-Dirichlet**: a Dirichlet density on the category
//!   probabilities implied by `τ` under a standard normal latent response,
//!   pulled back to threshold space with the Jacobian of that map.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{log_abs_det, Matrix};
use crate::model::{category_prob, ItemSpec, ThresholdVector};
use crate::normal;

/// Scaling constant of the logistic approximation to the normal CDF.
pub const LOGISTIC_SCALE: f64 = 1.702;

/// Default standard deviation of the "small variance" sequential prior.
pub const SMALL_SD: f64 = 1.5;
/// Default standard deviation of the "large variance" sequential prior.
pub const LARGE_SD: f64 = 1e5;

// ============================================================================
// Hyperparameter records
// ============================================================================

/// Normal priors on `τ*`. `dispersion` holds variances when `is_variance` is
/// set and standard deviations otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialThresholdPrior {
    pub mu_star: Vec<f64>,
    pub dispersion: Vec<f64>,
    pub is_variance: bool,
}

impl SequentialThresholdPrior {
    pub fn new(mu_star: Vec<f64>, dispersion: Vec<f64>, is_variance: bool) -> Result<Self> {
        if mu_star.len() != dispersion.len() {
            return Err(Error::Dimension(format!(
                "{} means but {} dispersions",
                mu_star.len(),
                dispersion.len()
            )));
        }
        if let Some(bad) = dispersion.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!("dispersion {bad} must be positive")));
        }
        if mu_star.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("non-finite prior mean".into()));
        }
        Ok(Self { mu_star, dispersion, is_variance })
    }

    /// Same normal prior on every component.
    pub fn iid(len: usize, mean: f64, sd: f64) -> Result<Self> {
        Self::new(vec![mean; len], vec![sd; len], false)
    }

    pub fn len(&self) -> usize {
        self.mu_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_star.is_empty()
    }

    pub fn sd(&self) -> Vec<f64> {
        if self.is_variance {
            self.dispersion.iter().map(|v| v.sqrt()).collect()
        } else {
            self.dispersion.clone()
        }
    }

    pub fn variance(&self) -> Vec<f64> {
        if self.is_variance {
            self.dispersion.clone()
        } else {
            self.dispersion.iter().map(|s| s * s).collect()
        }
    }

    /// One draw of the realized thresholds: `τ*` from the normals, then the
    /// sequential map. With very large dispersions the gaps can overflow to
    /// infinity; such draws are returned as they are.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let star: Vec<f64> = self
            .mu_star
            .iter()
            .zip(self.sd())
            .map(|(&m, s)| m + s * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect();
        let mut out = vec![0.0; star.len()];
        seq_values(&star, &mut out);
        out
    }
}

/// Which CDF maps thresholds to category probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfVariant {
    #[default]
    ExactNormal,
    /// `F(t) = logistic(1.702 t)`.
    LogisticApprox,
}

impl CdfVariant {
    #[inline]
    fn cdf(self, t: f64) -> f64 {
        match self {
            Self::ExactNormal => normal::cdf(t),
            Self::LogisticApprox => normal::logistic(LOGISTIC_SCALE * t),
        }
    }

    /// `F(b) − F(a)` computed on the better-conditioned tail.
    #[inline]
    fn interval(self, a: f64, b: f64) -> f64 {
        match self {
            Self::ExactNormal => normal::interval_prob(a, b),
            Self::LogisticApprox => {
                if a + b > 0.0 {
                    self.cdf(-a) - self.cdf(-b)
                } else {
                    self.cdf(b) - self.cdf(a)
                }
            }
        }
    }

    /// `log F'(t)` and its derivative in `t`.
    #[inline]
    fn ln_density_and_slope(self, t: f64) -> (f64, f64) {
        match self {
            Self::ExactNormal => (normal::ln_pdf(t), -t),
            Self::LogisticApprox => {
                let x = LOGISTIC_SCALE * t;
                let s = normal::logistic(x);
                let ln = LOGISTIC_SCALE.ln() - normal::softplus(-x) - normal::softplus(x);
                (ln, LOGISTIC_SCALE * (1.0 - 2.0 * s))
            }
        }
    }

    fn inverse(self, p: f64) -> f64 {
        match self {
            Self::ExactNormal => normal::quantile(p),
            Self::LogisticApprox => (p / (1.0 - p)).ln() / LOGISTIC_SCALE,
        }
    }
}

/// Dirichlet prior on induced category probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducedDirichletPrior {
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub anchor: f64,
    #[serde(default)]
    pub cdf_variant: CdfVariant,
}

impl InducedDirichletPrior {
    pub fn new(alpha: Vec<f64>, anchor: f64, cdf_variant: CdfVariant) -> Result<Self> {
        check_alpha(&alpha)?;
        if !anchor.is_finite() {
            return Err(Error::InvalidParameter("anchor must be finite".into()));
        }
        Ok(Self { alpha, anchor, cdf_variant })
    }

    /// `α = 1` for every category.
    pub fn uniform(n_categories: usize) -> Self {
        Self { alpha: vec![1.0; n_categories], anchor: 0.0, cdf_variant: CdfVariant::ExactNormal }
    }

    pub fn n_categories(&self) -> usize {
        self.alpha.len()
    }

    pub fn lpdf(&self, tau: &ThresholdVector) -> Result<f64> {
        induced_dirichlet_lpdf(tau, &self.alpha, self.anchor, self.cdf_variant)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ThresholdVector> {
        sample_induced(&self.alpha, self.anchor, self.cdf_variant, rng)
    }
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.len() < 2 {
        return Err(Error::InvalidParameter("alpha needs at least two categories".into()));
    }
    if let Some(bad) = alpha.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!("alpha entry {bad} must be positive")));
    }
    Ok(())
}

/// Resolved threshold prior for one item.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdPrior {
    Sequential(SequentialThresholdPrior),
    InducedDirichlet(InducedDirichletPrior),
}

impl ThresholdPrior {
    pub fn is_sequential(&self) -> bool {
        matches!(self, Self::Sequential(_))
    }

    pub fn n_thresholds(&self) -> usize {
        match self {
            Self::Sequential(p) => p.len(),
            Self::InducedDirichlet(p) => p.n_categories() - 1,
        }
    }

    /// One draw of the thresholds this prior implies.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Self::Sequential(p) => Ok(p.sample(rng)),
            Self::InducedDirichlet(p) => p.sample(rng).map(Vec::from),
        }
    }
}

/// Priors on loadings, factor correlations and factor scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuralPriors {
    pub loading_mean: f64,
    pub loading_sd: f64,
    /// LKJ shape on the factor correlation matrix.
    pub lkj_eta: f64,
    /// Half-Cauchy scale on factor standard deviations.
    pub variance_scale: f64,
}

impl Default for StructuralPriors {
    fn default() -> Self {
        Self { loading_mean: 0.0, loading_sd: 10.0, lkj_eta: 1.0, variance_scale: 2.5 }
    }
}

impl StructuralPriors {
    pub fn validate(&self) -> Result<()> {
        if !(self.loading_sd > 0.0) || !(self.lkj_eta > 0.0) || !(self.variance_scale > 0.0) {
            return Err(Error::Config("structural prior scales must be positive".into()));
        }
        if !self.loading_mean.is_finite() {
            return Err(Error::Config("loading prior mean must be finite".into()));
        }
        Ok(())
    }
}

// ============================================================================
// Configuration surface
// ============================================================================

/// A scalar broadcast to every component, or one value per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hyper {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Hyper {
    fn expand(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; len]),
            Self::Vector(v) if v.len() == len => Ok(v.clone()),
            Self::Vector(v) => Err(Error::Config(format!("{what} has {} entries, expected {len}", v.len()))),
        }
    }
}

/// Threshold-prior family as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ThresholdPriorConfig {
    Sequential {
        #[serde(default = "zero_hyper")]
        mean: Hyper,
        dispersion: Hyper,
        #[serde(default)]
        is_variance: bool,
    },
    InducedDirichlet {
        #[serde(default = "one_hyper")]
        alpha: Hyper,
        #[serde(default)]
        anchor: f64,
        #[serde(default)]
        cdf: CdfVariant,
    },
}

fn zero_hyper() -> Hyper {
    Hyper::Scalar(0.0)
}

fn one_hyper() -> Hyper {
    Hyper::Scalar(1.0)
}

impl ThresholdPriorConfig {
    /// `Normal(0, sd)` on every `τ*` component.
    pub fn sequential_sd(sd: f64) -> Self {
        Self::Sequential { mean: Hyper::Scalar(0.0), dispersion: Hyper::Scalar(sd), is_variance: false }
    }

    /// Induced-Dirichlet with unit `α`.
    pub fn joint() -> Self {
        Self::InducedDirichlet { alpha: Hyper::Scalar(1.0), anchor: 0.0, cdf: CdfVariant::ExactNormal }
    }

    pub fn resolve(&self, n_categories: usize) -> Result<ThresholdPrior> {
        match self {
            Self::Sequential { mean, dispersion, is_variance } => {
                let k = n_categories - 1;
                Ok(ThresholdPrior::Sequential(SequentialThresholdPrior::new(
                    mean.expand(k, "sequential mean")?,
                    dispersion.expand(k, "sequential dispersion")?,
                    *is_variance,
                )?))
            }
            Self::InducedDirichlet { alpha, anchor, cdf } => Ok(ThresholdPrior::InducedDirichlet(
                InducedDirichletPrior::new(alpha.expand(n_categories, "alpha")?, *anchor, *cdf)?,
            )),
        }
    }

    /// Short label used in tables and file names.
    pub fn label(&self) -> String {
        match self {
            Self::Sequential { dispersion: Hyper::Scalar(s), is_variance, .. } => {
                let sd = if *is_variance { s.sqrt() } else { *s };
                if sd <= SMALL_SD {
                    "small-variance".into()
                } else if sd >= 1e3 {
                    "large-variance".into()
                } else {
                    format!("sequential-sd{sd}")
                }
            }
            Self::Sequential { .. } => "sequential".into(),
            Self::InducedDirichlet { cdf: CdfVariant::LogisticApprox, .. } => "joint-logistic".into(),
            Self::InducedDirichlet { .. } => "joint".into(),
        }
    }
}

/// Full prior section: a default threshold prior, optional per-item
/// overrides keyed by item id, and the structural priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub thresholds: ThresholdPriorConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub item_thresholds: BTreeMap<String, ThresholdPriorConfig>,
    #[serde(default)]
    pub structural: StructuralPriors,
}

impl PriorConfig {
    pub fn new(thresholds: ThresholdPriorConfig) -> Self {
        Self { thresholds, item_thresholds: BTreeMap::new(), structural: StructuralPriors::default() }
    }

    /// One resolved threshold prior per item, in item order.
    pub fn resolve(&self, items: &[ItemSpec]) -> Result<Vec<ThresholdPrior>> {
        for id in self.item_thresholds.keys() {
            if !items.iter().any(|i| &i.item_id == id) {
                return Err(Error::Config(format!("prior override for unknown item `{id}`")));
            }
        }
        self.structural.validate()?;
        items
            .iter()
            .map(|item| {
                self.item_thresholds
                    .get(&item.item_id)
                    .unwrap_or(&self.thresholds)
                    .resolve(item.n_categories)
                    .map_err(|e| Error::Config(format!("item `{}`: {e}", item.item_id)))
            })
            .collect()
    }
}

// ============================================================================
// Sequential prior
// ============================================================================

/// `τ₁ = τ*₁`, `τ_c = τ_{c−1} + exp(τ*_c)`.
pub fn seq_transform(tau_star: &[f64]) -> Result<ThresholdVector> {
    let mut out = vec![0.0; tau_star.len()];
    seq_values(tau_star, &mut out);
    ThresholdVector::new(out)
}

#[inline]
pub(crate) fn seq_values(x: &[f64], out: &mut [f64]) {
    let mut acc = 0.0;
    for (c, (&xi, o)) in x.iter().zip(out.iter_mut()).enumerate() {
        acc = if c == 0 { xi } else { acc + xi.exp() };
        *o = acc;
    }
}

/// Sum of independent normal log-densities on `τ*`.
pub fn seq_transform_lpdf(tau_star: &[f64], prior: &SequentialThresholdPrior) -> Result<f64> {
    if tau_star.len() != prior.len() {
        return Err(Error::Dimension(format!(
            "{} components for a prior of length {}",
            tau_star.len(),
            prior.len()
        )));
    }
    let sd = prior.sd();
    Ok(tau_star.iter().zip(&prior.mu_star).zip(&sd).map(|((&x, &m), &s)| normal::normal_lpdf(x, m, s)).sum())
}

/// Closed-form moment matching for informative sequential priors.
///
/// Given target means and variances of the thresholds, returns normal
/// hyperparameters on `τ*` (dispersion as variances) such that the gaps
/// `exp(τ*_c)` are lognormal with the required first two moments. The first
/// component is passed through unchanged.
pub fn solve_informative_sequential(e: &[f64], var: &[f64]) -> Result<SequentialThresholdPrior> {
    if e.len() != var.len() || e.is_empty() {
        return Err(Error::Dimension("need equal-length, non-empty mean and variance targets".into()));
    }
    if let Some(v) = var.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Infeasible(format!("variance target {v} is not positive")));
    }
    let mut mu = vec![e[0]];
    let mut v = vec![var[0]];
    for c in 1..e.len() {
        if !(e[c] > e[c - 1]) {
            return Err(Error::Infeasible(format!(
                "E[tau_{}] = {} must exceed E[tau_{}] = {}",
                c + 1,
                e[c],
                c,
                e[c - 1]
            )));
        }
        if !(var[c] > var[c - 1]) {
            return Err(Error::Infeasible(format!(
                "Var[tau_{}] = {} must exceed Var[tau_{}] = {}",
                c + 1,
                var[c],
                c,
                var[c - 1]
            )));
        }
        let delta = e[c] - e[c - 1];
        let vs = ((var[c] - var[c - 1] + delta * delta) / (delta * delta)).ln();
        mu.push(delta.ln() - vs / 2.0);
        v.push(vs);
    }
    SequentialThresholdPrior::new(mu, v, true)
}

// ============================================================================
// Induced-Dirichlet prior
// ============================================================================

/// Category probabilities under a unit-scale normal latent response centred
/// at `anchor`.
pub fn induced_probabilities(tau: &ThresholdVector, anchor: f64) -> Result<Vec<f64>> {
    category_prob(tau.as_slice(), anchor, 1.0)
}

/// Dirichlet log-density of the induced simplex plus `log|det J(τ)|`.
pub fn induced_dirichlet_lpdf(tau: &ThresholdVector, alpha: &[f64], anchor: f64, variant: CdfVariant) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha.len() != tau.len() + 1 {
        return Err(Error::Dimension(format!("{} alphas for {} thresholds", alpha.len(), tau.len())));
    }
    let t = tau.as_slice();
    let mut grad = vec![0.0; t.len()];
    Ok(induced_terms(t, alpha, anchor, variant, &mut grad) + rescaled_jacobian_log_det(alpha.len())?)
}

/// `log|det J(τ)|` of the induced-probability Jacobian: first column of
/// ones, then `∂p/∂τ_c` with `+ρ_c` and `−ρ_c` in rows `c` and `c+1`.
pub fn induced_log_jacobian(tau: &ThresholdVector, anchor: f64, variant: CdfVariant) -> Result<f64> {
    let log_rho: f64 = tau.as_slice().iter().map(|&t| variant.ln_density_and_slope(t - anchor).0).sum();
    Ok(log_rho + rescaled_jacobian_log_det(tau.len() + 1)?)
}

/// `log|det J'|` by LU, where `J'` is the induced-probability Jacobian with
/// each threshold column divided by its density `ρ_c`. `J'` does not depend
/// on `τ`, so `log|det J| = Σ log ρ_c + log|det J'|` and nothing underflows
/// when `ρ_c` is tiny.
pub(crate) fn rescaled_jacobian_log_det(n_categories: usize) -> Result<f64> {
    let c = n_categories;
    let mut j = Matrix::zeros(c, c);
    for k in 0..c {
        j[(k, 0)] = 1.0;
    }
    for m in 0..c - 1 {
        j[(m, m + 1)] = 1.0;
        j[(m + 1, m + 1)] = -1.0;
    }
    log_abs_det(&j)
}

/// Dirichlet log-density of the induced simplex plus `Σ log ρ_c`, with the
/// gradient in `τ` added to `grad`.
pub(crate) fn induced_terms(tau: &[f64], alpha: &[f64], anchor: f64, variant: CdfVariant, grad: &mut [f64]) -> f64 {
    let c = alpha.len();
    let mut total = dirichlet_norm(alpha);
    let mut lo = f64::NEG_INFINITY;
    let mut p_prev = 0.0;
    for k in 0..c {
        let hi = if k + 1 < c { tau[k] - anchor } else { f64::INFINITY };
        let p = variant.interval(lo, hi);
        let a1 = alpha[k] - 1.0;
        if a1 != 0.0 {
            total += a1 * p.ln();
        }
        if k > 0 {
            // threshold k−1 separates categories k−1 and k
            let (ln_rho, slope) = variant.ln_density_and_slope(lo);
            let rho = ln_rho.exp();
            let a0 = alpha[k - 1] - 1.0;
            let mut g = 0.0;
            if a0 != 0.0 {
                g += a0 / p_prev;
            }
            if a1 != 0.0 {
                g -= a1 / p;
            }
            grad[k - 1] += rho * g + slope;
            total += ln_rho;
        }
        lo = hi;
        p_prev = p;
    }
    total
}

/// `ln Γ(Σα) − Σ ln Γ(α_k)`.
fn dirichlet_norm(alpha: &[f64]) -> f64 {
    ln_gamma(alpha.iter().sum()) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
}

/// Dirichlet log-density at a point of the simplex.
pub fn dirichlet_lpdf(p: &[f64], alpha: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    if p.len() != alpha.len() {
        return Err(Error::Dimension("simplex and alpha lengths differ".into()));
    }
    if p.iter().any(|&x| x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("point is not on the simplex".into()));
    }
    Ok(dirichlet_norm(alpha)
        + p.iter().zip(alpha).map(|(&x, &a)| if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() }).sum::<f64>())
}

/// Draws `p ~ Dirichlet(α)` and returns `τ_c = anchor + Φ⁻¹(p₁ + … + p_c)`.
pub fn sample_induced_thresholds<R: Rng + ?Sized>(alpha: &[f64], anchor: f64, rng: &mut R) -> Result<ThresholdVector> {
    sample_induced(alpha, anchor, CdfVariant::ExactNormal, rng)
}

fn sample_induced<R: Rng + ?Sized>(alpha: &[f64], anchor: f64, variant: CdfVariant, rng: &mut R) -> Result<ThresholdVector> {
    check_alpha(alpha)?;
    let gammas = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::InvalidParameter(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let c = alpha.len();
    let mut g = vec![0.0; c];
    for _ in 0..1000 {
        for (gk, dist) in g.iter_mut().zip(&gammas) {
            *gk = dist.sample(rng);
        }
        let total: f64 = g.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        // Lower cumulative sums for the left half, upper sums for the right,
        // so neither tail is computed as 1 − (something close to 1).
        let mut tau = Vec::with_capacity(c - 1);
        let mut lower = 0.0;
        let mut upper = total;
        for k in 0..c - 1 {
            lower += g[k];
            upper -= g[k];
            let t = if lower <= upper {
                variant.inverse(lower / total)
            } else {
                -variant.inverse(upper / total)
            };
            tau.push(anchor + t);
        }
        if tau.iter().all(|t| t.is_finite()) {
            if let Ok(tv) = ThresholdVector::new(tau) {
                return Ok(tv);
            }
        }
    }
    Err(Error::InvalidParameter("could not draw an ordered threshold vector from alpha".into()))
}

// ============================================================================
// Structural priors
// ============================================================================

/// LKJ log-density (unnormalized) of `Ω = LLᵀ` from its Cholesky factor.
pub fn lkj_lpdf(l: &Matrix, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("LKJ shape {eta} must be positive")));
    }
    if !l.is_square() {
        return Err(Error::Dimension("LKJ factor must be square".into()));
    }
    for i in 0..l.rows() {
        let norm: f64 = l.row(i).iter().map(|x| x * x).sum();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("row {i} of correlation factor has squared norm {norm}")));
        }
    }
    Ok(lkj_core(l, eta))
}

#[inline]
pub(crate) fn lkj_core(l: &Matrix, eta: f64) -> f64 {
    if eta == 1.0 {
        return 0.0;
    }
    2.0 * (eta - 1.0) * (0..l.rows()).map(|k| l[(k, k)].ln()).sum::<f64>()
}

/// Half-Cauchy log-density on `(0, ∞)`.
pub fn half_cauchy_lpdf(x: f64, scale: f64) -> Result<f64> {
    if !(x > 0.0) || !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("half-Cauchy needs x > 0 and scale > 0, got {x}, {scale}")));
    }
    Ok(half_cauchy_core(x, scale))
}

#[inline]
pub(crate) fn half_cauchy_core(x: f64, scale: f64) -> f64 {
    let r = x / scale;
    (2.0 / PI).ln() - scale.ln() - (r * r).ln_1p()
}
