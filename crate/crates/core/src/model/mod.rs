//! Measurement model for ordered-categorical indicators.
//!
//! Latent responses follow `y* = ν + Λη + ε` with `η ~ MVN(0, Φ)` and
//! `ε ~ MVN(0, Θ)`; observed codes are the intervals of `y*` cut by each
//! item's thresholds. The factors are marginalized out, and the ordinal
//! likelihood is written as a GHK recursion over uniform nuisance values.

mod likelihood;
mod posterior;

pub use likelihood::{
    augmented_log_likelihood, category_prob, ghk_tmvn, marginal_cov, GhkOutput, UNDERFLOW_FLOOR,
};
pub use posterior::{OrdinalFactorModel, ParamClass, ParamInfo};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Strictly increasing cutpoints for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        for (c, w) in tau.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::Ordering { position: c + 1, left: w[0], right: w[1] });
            }
        }
        if tau.iter().any(|t| t.is_nan()) {
            return Err(Error::InvalidParameter("NaN threshold".into()));
        }
        Ok(Self(tau))
    }

    /// Number of thresholds, `C − 1`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_categories(&self) -> usize {
        self.0.len() + 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Lower and upper cut for 1-based category `code`, with infinite ends.
    #[inline]
    pub fn bounds(&self, code: usize) -> (f64, f64) {
        bounds(&self.0, code)
    }
}

#[inline]
pub(crate) fn bounds(tau: &[f64], code: usize) -> (f64, f64) {
    let lo = if code <= 1 { f64::NEG_INFINITY } else { tau[code - 2] };
    let hi = if code > tau.len() { f64::INFINITY } else { tau[code - 1] };
    (lo, hi)
}

impl TryFrom<Vec<f64>> for ThresholdVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThresholdVector> for Vec<f64> {
    fn from(t: ThresholdVector) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub item_id: String,
    /// Zero-based indices of the factors this item loads on.
    pub factor_indices: Vec<usize>,
    pub n_categories: usize,
    #[serde(default)]
    pub is_reference: bool,
}

impl ItemSpec {
    pub fn n_thresholds(&self) -> usize {
        self.n_categories - 1
    }
}

/// How the latent scale is pinned down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "kebab-case")]
pub enum IdentificationRule {
    /// Reference item loading fixed to 1 per factor; factor variances free.
    ReferenceLoading { residual_variance: f64 },
    /// Factor variances fixed to 1; all loadings free.
    UnitFactorVariance { residual_variance: f64 },
}

impl IdentificationRule {
    pub fn residual_variance(&self) -> f64 {
        match *self {
            Self::ReferenceLoading { residual_variance }
            | Self::UnitFactorVariance { residual_variance } => residual_variance,
        }
    }

    pub fn uses_reference_loading(&self) -> bool {
        matches!(self, Self::ReferenceLoading { .. })
    }
}

impl Default for IdentificationRule {
    fn default() -> Self {
        Self::ReferenceLoading { residual_variance: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_factors: usize,
    pub items: Vec<ItemSpec>,
    #[serde(default)]
    pub identification: IdentificationRule,
    #[serde(default = "one")]
    pub n_groups: usize,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    /// Validates structure and returns the spec.
    pub fn new(n_factors: usize, items: Vec<ItemSpec>, identification: IdentificationRule) -> Result<Self> {
        let spec = Self { n_factors, items, identification, n_groups: 1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_factors == 0 {
            return Err(Error::Model("at least one factor is required".into()));
        }
        if self.n_groups == 0 {
            return Err(Error::Model("n_groups must be positive".into()));
        }
        if !(self.identification.residual_variance() > 0.0) {
            return Err(Error::Model("residual variance must be positive".into()));
        }
        let mut per_factor = vec![0usize; self.n_factors];
        let mut refs = vec![0usize; self.n_factors];
        for item in &self.items {
            if item.n_categories < 2 {
                return Err(Error::Model(format!("item `{}` needs at least 2 categories", item.item_id)));
            }
            if item.factor_indices.is_empty() {
                return Err(Error::Model(format!("item `{}` loads on no factor", item.item_id)));
            }
            for &f in &item.factor_indices {
                if f >= self.n_factors {
                    return Err(Error::Model(format!(
                        "item `{}` references factor {} of {}",
                        item.item_id, f, self.n_factors
                    )));
                }
                per_factor[f] += 1;
                if item.is_reference {
                    refs[f] += 1;
                }
            }
        }
        for f in 0..self.n_factors {
            if per_factor[f] == 0 {
                return Err(Error::Model(format!("factor {f} has no items")));
            }
            if self.identification.uses_reference_loading() && refs[f] != 1 {
                return Err(Error::Model(format!(
                    "factor {f} needs exactly one reference item, found {}",
                    refs[f]
                )));
            }
        }
        Ok(())
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_categories(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.n_categories).collect()
    }

    /// Simple-structure layout: `items_per_factor` items on each factor, the
    /// first item of each block as reference.
    pub fn simple_structure(n_factors: usize, items_per_factor: usize, n_categories: usize) -> Result<Self> {
        let items = (0..n_factors * items_per_factor)
            .map(|i| ItemSpec {
                item_id: format!("item_{}", i + 1),
                factor_indices: vec![i / items_per_factor],
                n_categories,
                is_reference: i % items_per_factor == 0,
            })
            .collect();
        Self::new(n_factors, items, IdentificationRule::default())
    }
}

/// Population or posterior values of the structural parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStructure {
    pub loadings: Matrix,
    pub factor_cov: Matrix,
    /// Diagonal of `Θ`.
    pub residual_var: Vec<f64>,
    pub intercepts: Vec<f64>,
}

impl LatentStructure {
    pub fn implied_cov(&self) -> Result<Matrix> {
        marginal_cov(&self.loadings, &self.factor_cov, &self.residual_var)
    }
}

/// Observed responses, codes `1..=C_i`, one row per respondent.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    n_items: usize,
    codes: Vec<u16>,
    category_counts: Vec<Vec<usize>>,
}

impl DatasetMatrix {
    pub fn new(rows: Vec<Vec<u16>>, n_categories: &[usize]) -> Result<Self> {
        let n_items = n_categories.len();
        let mut counts: Vec<Vec<usize>> = n_categories.iter().map(|&c| vec![0; c]).collect();
        let mut codes = Vec::with_capacity(rows.len() * n_items);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_items {
                return Err(Error::Dimension(format!(
                    "row {} has {} values, expected {}",
                    r + 1,
                    row.len(),
                    n_items
                )));
            }
            for (i, &code) in row.iter().enumerate() {
                if code == 0 || code as usize > n_categories[i] {
                    return Err(Error::InvalidParameter(format!(
                        "row {}, item {}: code {} outside 1..={}",
                        r + 1,
                        i + 1,
                        code,
                        n_categories[i]
                    )));
                }
                counts[i][code as usize - 1] += 1;
                codes.push(code);
            }
        }
        Ok(Self { n_items, codes, category_counts: counts })
    }

    pub fn n_respondents(&self) -> usize {
        if self.n_items == 0 {
            0
        } else {
            self.codes.len() / self.n_items
        }
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[u16] {
        &self.codes[n * self.n_items..(n + 1) * self.n_items]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u16]> {
        self.codes.chunks_exact(self.n_items.max(1))
    }

    /// Per-item counts for each declared category, zeros included.
    pub fn category_counts(&self) -> &[Vec<usize>] {
        &self.category_counts
    }

    /// Items whose observed responses never vary.
    pub fn degenerate_items(&self) -> Vec<usize> {
        self.category_counts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().filter(|&&n| n > 0).count() <= 1)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Nuisance uniforms for the GHK augmentation, `N × I`, all in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    n_items: usize,
    u: Vec<f64>,
}

impl AugmentedState {
    pub fn new(n_items: usize, u: Vec<f64>) -> Result<Self> {
        if n_items == 0 || u.len() % n_items != 0 {
            return Err(Error::Dimension(format!("{} nuisance values for {} items", u.len(), n_items)));
        }
        if let Some(bad) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidParameter(format!("nuisance value {bad} outside (0, 1)")));
        }
        Ok(Self { n_items, u })
    }

    pub fn constant(n_respondents: usize, n_items: usize, value: f64) -> Result<Self> {
        Self::new(n_items, vec![value; n_respondents * n_items])
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.u[n * self.n_items..(n + 1) * self.n_items]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }
}
