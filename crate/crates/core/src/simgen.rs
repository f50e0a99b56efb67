//! Synthetic ordinal datasets from a known factor model.
//!
//! Conditions use a two-factor simple structure with unit loadings, unit
//! factor and residual variances and a factor correlation of 0.23, so every
//! latent response has variance 2. Threshold shapes are defined on that
//! scale:
//!
//! * symmetric: equal category probabilities, `τ_c = √2·Φ⁻¹(c/C)`;
//! * asymmetric: increasing category probabilities. For four categories the
//!   thresholds are `[−2.32, −1.25, −0.25]`; other counts evaluate the
//!   piecewise-linear interpolation of that cumulative curve at `c/C`;
//! * sparse: asymmetric with the first threshold moved to −15, which leaves
//!   the lowest category practically empty.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, Matrix};
use crate::model::{DatasetMatrix, IdentificationRule, ItemSpec, LatentStructure, ModelSpec, ThresholdVector};
use crate::normal;

/// Asymmetric thresholds for four categories.
pub const ASYMMETRIC_4: [f64; 3] = [-2.32, -1.25, -0.25];
/// First threshold of an item with an empty lowest category.
pub const EMPTY_THRESHOLD: f64 = -15.0;
pub const FACTOR_CORRELATION: f64 = 0.23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Symmetric,
    Asymmetric,
    Sparse,
}

impl Shape {
    pub fn label(self) -> &'static str {
        match self {
            Self::Symmetric => "symmetric",
            Self::Asymmetric => "asymmetric",
            Self::Sparse => "sparse",
        }
    }
}

/// Which item of each factor carries the fixed unit loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceIndicator {
    #[default]
    Sparse,
    NonSparse,
}

impl ReferenceIndicator {
    pub fn label(self) -> &'static str {
        match self {
            Self::Sparse => "sparse",
            Self::NonSparse => "non-sparse",
        }
    }
}

fn default_factors() -> usize {
    2
}

fn default_items_per_factor() -> usize {
    6
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimCondition {
    pub shape: Shape,
    pub n_categories: usize,
    pub n_respondents: usize,
    #[serde(default)]
    pub n_sparse_items: usize,
    #[serde(default)]
    pub reference_indicator: ReferenceIndicator,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_factors")]
    pub n_factors: usize,
    #[serde(default = "default_items_per_factor")]
    pub items_per_factor: usize,
}

impl SimCondition {
    pub fn new(shape: Shape, n_categories: usize, n_respondents: usize, n_sparse_items: usize) -> Self {
        Self {
            shape,
            n_categories,
            n_respondents,
            n_sparse_items,
            reference_indicator: ReferenceIndicator::default(),
            seed: 0,
            n_factors: default_factors(),
            items_per_factor: default_items_per_factor(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.n_factors * self.items_per_factor
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_factors == 0 || self.items_per_factor == 0 {
            return bad("a condition needs at least one factor and one item per factor".into());
        }
        if self.n_respondents == 0 {
            return bad("n_respondents must be positive".into());
        }
        if self.n_categories < 2 {
            return bad("n_categories must be at least 2".into());
        }
        if self.n_sparse_items > self.n_items() {
            return bad(format!("{} sparse items exceed {} items", self.n_sparse_items, self.n_items()));
        }
        match self.shape {
            Shape::Sparse => {
                if self.n_sparse_items == 0 {
                    return bad("the sparse shape needs n_sparse_items > 0".into());
                }
                if self.n_categories < 3 {
                    return bad("an empty lowest category needs at least 3 categories".into());
                }
                if self.n_sparse_items % self.n_factors != 0 {
                    return bad(format!(
                        "{} sparse items cannot be split evenly over {} factors",
                        self.n_sparse_items, self.n_factors
                    ));
                }
                if self.reference_indicator == ReferenceIndicator::NonSparse
                    && self.n_sparse_items / self.n_factors == self.items_per_factor
                {
                    return bad("every item is sparse, so no non-sparse reference indicator exists".into());
                }
            }
            _ => {
                if self.n_sparse_items != 0 {
                    return bad(format!("shape `{}` has no sparse items", self.shape.label()));
                }
            }
        }
        Ok(())
    }

    /// Generating parameters of this condition.
    pub fn population(&self) -> Result<PopulationParams> {
        self.validate()?;
        let per = self.items_per_factor;
        let sparse_per = self.n_sparse_items / self.n_factors;
        let regular = match self.shape {
            Shape::Symmetric => condition_thresholds(Shape::Symmetric, self.n_categories)?,
            _ => condition_thresholds(Shape::Asymmetric, self.n_categories)?,
        };
        let empty = condition_thresholds(Shape::Sparse, self.n_categories.max(3))?;
        let sparse: Vec<bool> = (0..self.n_items()).map(|i| i % per < sparse_per).collect();
        let reference_pos = match self.reference_indicator {
            ReferenceIndicator::NonSparse if sparse_per > 0 => sparse_per,
            _ => 0,
        };
        let thresholds = sparse
            .iter()
            .map(|&s| if s { empty.clone() } else { regular.clone() })
            .collect();
        PopulationParams::simple(self.n_factors, per, FACTOR_CORRELATION, thresholds, sparse, reference_pos)
    }
}

/// Generating values for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationParams {
    pub item_ids: Vec<String>,
    /// `I × K` loadings, row per item.
    pub loadings: Vec<Vec<f64>>,
    pub factor_cov: Vec<Vec<f64>>,
    pub residual_var: Vec<f64>,
    pub thresholds: Vec<Vec<f64>>,
    pub sparse: Vec<bool>,
    /// Reference item flag, one item per factor.
    pub reference: Vec<bool>,
}

impl PopulationParams {
    /// Simple structure with `per` items on each of `k` factors, unit
    /// loadings and variances, and item `reference_pos` of each block as the
    /// reference indicator.
    pub fn simple(
        k: usize,
        per: usize,
        correlation: f64,
        thresholds: Vec<Vec<f64>>,
        sparse: Vec<bool>,
        reference_pos: usize,
    ) -> Result<Self> {
        let n = k * per;
        if thresholds.len() != n || sparse.len() != n || reference_pos >= per {
            return Err(Error::Dimension(format!("simple structure of {n} items is inconsistent")));
        }
        let loadings = (0..n)
            .map(|i| (0..k).map(|f| if i / per == f { 1.0 } else { 0.0 }).collect())
            .collect();
        let factor_cov = (0..k).map(|a| (0..k).map(|b| if a == b { 1.0 } else { correlation }).collect()).collect();
        let p = Self {
            item_ids: (1..=n).map(|i| format!("item_{i}")).collect(),
            loadings,
            factor_cov,
            residual_var: vec![1.0; n],
            thresholds,
            sparse,
            reference: (0..n).map(|i| i % per == reference_pos).collect(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Twelve four-category items on two factors; the second item of each
    /// factor has an empty lowest category.
    pub fn study1() -> Self {
        let sparse: Vec<bool> = (0..12).map(|i| i % 6 == 1).collect();
        let thresholds = sparse
            .iter()
            .map(|&s| {
                let mut t = ASYMMETRIC_4.to_vec();
                if s {
                    t[0] = EMPTY_THRESHOLD;
                }
                t
            })
            .collect();
        Self::simple(2, 6, FACTOR_CORRELATION, thresholds, sparse, 0).expect("fixed layout is valid")
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factor_cov.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_items();
        let k = self.n_factors();
        if self.loadings.len() != n
            || self.residual_var.len() != n
            || self.thresholds.len() != n
            || self.sparse.len() != n
            || self.reference.len() != n
            || self.loadings.iter().any(|r| r.len() != k)
            || self.factor_cov.iter().any(|r| r.len() != k)
        {
            return Err(Error::Dimension("population parameter arrays disagree in size".into()));
        }
        for t in &self.thresholds {
            ThresholdVector::new(t.clone())?;
        }
        for (i, (t, &s)) in self.thresholds.iter().zip(&self.sparse).enumerate() {
            if s && t.first() != Some(&EMPTY_THRESHOLD) {
                return Err(Error::InvalidParameter(format!(
                    "sparse item {} must have first threshold {EMPTY_THRESHOLD}",
                    i + 1
                )));
            }
        }
        cholesky_lower(&Matrix::from_rows(&self.factor_cov)?)?;
        Ok(())
    }

    pub fn latent_structure(&self) -> Result<LatentStructure> {
        Ok(LatentStructure {
            loadings: Matrix::from_rows(&self.loadings)?,
            factor_cov: Matrix::from_rows(&self.factor_cov)?,
            residual_var: self.residual_var.clone(),
            intercepts: vec![0.0; self.n_items()],
        })
    }

    /// Model matching this population: items load where the population
    /// loading is non-zero and the reference flags pick the fixed loadings.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let items = (0..self.n_items())
            .map(|i| ItemSpec {
                item_id: self.item_ids[i].clone(),
                factor_indices: (0..self.n_factors()).filter(|&f| self.loadings[i][f] != 0.0).collect(),
                n_categories: self.thresholds[i].len() + 1,
                is_reference: self.reference[i],
            })
            .collect();
        let residual = self.residual_var.first().copied().unwrap_or(1.0);
        if self.residual_var.iter().any(|&v| v != residual) {
            return Err(Error::Model("the model fixes one residual variance for all items".into()));
        }
        ModelSpec::new(self.n_factors(), items, IdentificationRule::ReferenceLoading { residual_variance: residual })
    }

    /// True values keyed by reported parameter name, under reference-loading
    /// identification.
    pub fn truth(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (i, id) in self.item_ids.iter().enumerate() {
            for (f, &l) in self.loadings[i].iter().enumerate() {
                if l != 0.0 {
                    out.insert(format!("lambda.f{}.{id}", f + 1), l);
                }
            }
            for (c, &t) in self.thresholds[i].iter().enumerate() {
                out.insert(format!("tau.{id}.{}", c + 1), t);
            }
        }
        for a in 0..self.n_factors() {
            for b in a..self.n_factors() {
                out.insert(format!("phi.f{}.f{}", a + 1, b + 1), self.factor_cov[a][b]);
            }
        }
        out
    }

    /// Category probabilities each item's thresholds imply.
    pub fn implied_probabilities(&self) -> Result<Vec<Vec<f64>>> {
        let sigma = self.latent_structure()?.implied_cov()?;
        (0..self.n_items())
            .map(|i| {
                crate::model::category_prob(&self.thresholds[i], 0.0, sigma[(i, i)].sqrt())
            })
            .collect()
    }
}

/// Thresholds realizing a named shape on the latent scale of variance 2.
pub fn condition_thresholds(shape: Shape, n_categories: usize) -> Result<Vec<f64>> {
    let c = n_categories;
    if c < 2 {
        return Err(Error::Config(format!("no threshold shape for {c} categories")));
    }
    let scale = std::f64::consts::SQRT_2;
    match shape {
        Shape::Symmetric => Ok((1..c).map(|j| scale * normal::quantile(j as f64 / c as f64)).collect()),
        Shape::Asymmetric if c == 4 => Ok(ASYMMETRIC_4.to_vec()),
        Shape::Asymmetric => {
            let mut knots = vec![0.0];
            knots.extend(ASYMMETRIC_4.iter().map(|t| normal::cdf(t / scale)));
            knots.push(1.0);
            Ok((1..c)
                .map(|j| {
                    let x = 4.0 * j as f64 / c as f64;
                    let lo = (x.floor() as usize).min(3);
                    let p = knots[lo] + (x - lo as f64) * (knots[lo + 1] - knots[lo]);
                    scale * normal::quantile(p)
                })
                .collect())
        }
        Shape::Sparse => {
            if c < 3 {
                return Err(Error::Config("an empty lowest category needs at least 3 categories".into()));
            }
            let mut t = condition_thresholds(Shape::Asymmetric, c)?;
            t[0] = EMPTY_THRESHOLD;
            Ok(t)
        }
    }
}

/// Draws `n` respondents: `η ~ N(0, Φ)`, `ε ~ N(0, Θ)`, `y* = Λη + ε`, and
/// code `1 + #{c : τ_c < y*}` per item.
pub fn generate_dataset(params: &PopulationParams, n: usize, seed: u64) -> Result<DatasetMatrix> {
    params.validate()?;
    let k = params.n_factors();
    let n_items = params.n_items();
    let l_phi = cholesky_lower(&Matrix::from_rows(&params.factor_cov)?)?;
    let theta_sd: Vec<f64> = params.residual_var.iter().map(|v| v.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; k];
    let mut eta = vec![0.0; k];
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for a in 0..k {
            eta[a] = (0..=a).map(|b| l_phi[(a, b)] * z[b]).sum();
        }
        let row = (0..n_items)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                let y = params.loadings[i].iter().zip(&eta).map(|(l, h)| l * h).sum::<f64>() + theta_sd[i] * e;
                1 + params.thresholds[i].iter().filter(|&&t| t < y).count() as u16
            })
            .collect();
        rows.push(row);
    }
    let cats: Vec<usize> = params.thresholds.iter().map(|t| t.len() + 1).collect();
    DatasetMatrix::new(rows, &cats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_four() {
        let t = condition_thresholds(Shape::Symmetric, 4).unwrap();
        let s = std::f64::consts::SQRT_2;
        assert_relative_eq!(t[0], s * -0.674_489_750_196_081_7, epsilon = 1e-12);
        assert_relative_eq!(t[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(t[2], s * 0.674_489_750_196_081_7, epsilon = 1e-12);
    }

    #[test]
    fn asymmetric_and_sparse_four() {
        assert_eq!(condition_thresholds(Shape::Asymmetric, 4).unwrap(), vec![-2.32, -1.25, -0.25]);
        assert_eq!(condition_thresholds(Shape::Sparse, 4).unwrap(), vec![-15.0, -1.25, -0.25]);
    }

    #[test]
    fn shapes_imply_valid_probabilities() {
        let sd = std::f64::consts::SQRT_2;
        for c in 3..=6 {
            for shape in [Shape::Symmetric, Shape::Asymmetric, Shape::Sparse] {
                let t = condition_thresholds(shape, c).unwrap();
                let p = crate::model::category_prob(&t, 0.0, sd).unwrap();
                assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
                for (j, &pj) in p.iter().enumerate() {
                    if shape == Shape::Sparse && j == 0 {
                        // Φ(−15/√2) ≈ 1.4e−26 on the variance-2 scale
                        assert!(pj < 1e-25, "{pj}");
                    } else {
                        assert!(pj > 0.01, "{shape:?} C={c}: {p:?}");
                    }
                }
                if shape == Shape::Asymmetric {
                    assert!(p.windows(2).all(|w| w[0] < w[1]), "C={c}: {p:?}");
                }
                if shape == Shape::Symmetric {
                    for pj in &p {
                        assert_relative_eq!(*pj, 1.0 / c as f64, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn undefined_combinations_fail() {
        assert!(condition_thresholds(Shape::Sparse, 2).is_err());
        assert!(condition_thresholds(Shape::Symmetric, 1).is_err());
        let mut c = SimCondition::new(Shape::Sparse, 4, 150, 0);
        assert!(c.validate().is_err());
        c.n_sparse_items = 3;
        assert!(c.validate().is_err());
        c.n_sparse_items = 12;
        c.reference_indicator = ReferenceIndicator::NonSparse;
        assert!(c.validate().is_err());
        assert!(SimCondition::new(Shape::Asymmetric, 4, 150, 2).validate().is_err());
    }

    #[test]
    fn sparse_items_and_reference_flag() {
        let mut c = SimCondition::new(Shape::Sparse, 4, 150, 6);
        let p = c.population().unwrap();
        let sparse: Vec<usize> = (0..12).filter(|&i| p.sparse[i]).collect();
        assert_eq!(sparse, vec![0, 1, 2, 6, 7, 8]);
        let spec = p.model_spec().unwrap();
        let refs: Vec<usize> = (0..12).filter(|&i| spec.items[i].is_reference).collect();
        assert_eq!(refs, vec![0, 6]);
        c.reference_indicator = ReferenceIndicator::NonSparse;
        let spec = c.population().unwrap().model_spec().unwrap();
        let refs: Vec<usize> = (0..12).filter(|&i| spec.items[i].is_reference).collect();
        assert_eq!(refs, vec![3, 9]);
    }

    #[test]
    fn empty_category_stays_empty() {
        let p = PopulationParams::study1();
        let d = generate_dataset(&p, 150, 11).unwrap();
        for i in 0..12 {
            let zero = d.category_counts()[i][0] == 0;
            assert_eq!(zero, p.sparse[i], "item {}", i + 1);
        }
    }

    #[test]
    fn study1_category_proportions() {
        let target = [0.05, 0.14, 0.24, 0.57];
        let n = 150.0;
        let p = PopulationParams::study1();
        let d = generate_dataset(&p, 150, 2024).unwrap();
        for i in (0..12).filter(|&i| !p.sparse[i]) {
            for (c, &pc) in target.iter().enumerate() {
                let obs = d.category_counts()[i][c] as f64 / n;
                let se = (pc * (1.0 - pc) / n).sqrt();
                assert!((obs - pc).abs() < 3.0 * se, "item {} cat {}: {obs}", i + 1, c + 1);
            }
        }
    }

    fn kendall_tau_b(x: &[u16], y: &[u16]) -> f64 {
        let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                let dx = (x[i] as i32 - x[j] as i32).signum();
                let dy = (y[i] as i32 - y[j] as i32).signum();
                match (dx, dy) {
                    (0, 0) => {}
                    (0, _) => tx += 1,
                    (_, 0) => ty += 1,
                    _ if dx == dy => conc += 1,
                    _ => disc += 1,
                }
            }
        }
        let s = (conc - disc) as f64;
        s / (((conc + disc + tx) as f64) * ((conc + disc + ty) as f64)).sqrt()
    }

    #[test]
    fn same_factor_items_associate() {
        let p = PopulationParams::study1();
        let n = 3000;
        let d = generate_dataset(&p, n, 5).unwrap();
        let a: Vec<u16> = d.rows().map(|r| r[2]).collect();
        let b: Vec<u16> = d.rows().map(|r| r[3]).collect();
        let nf = n as f64;
        let se = (2.0 * (2.0 * nf + 5.0) / (9.0 * nf * (nf - 1.0))).sqrt();
        assert!(kendall_tau_b(&a, &b) > 3.0 * se);
    }

    #[test]
    fn reproducible_per_seed() {
        let c = SimCondition::new(Shape::Symmetric, 5, 80, 0);
        let p = c.population().unwrap();
        assert_eq!(generate_dataset(&p, 80, 9).unwrap(), generate_dataset(&p, 80, 9).unwrap());
        assert_ne!(generate_dataset(&p, 80, 9).unwrap(), generate_dataset(&p, 80, 10).unwrap());
    }

    #[test]
    fn truth_names_match_model() {
        use crate::model::OrdinalFactorModel;
        use crate::priors::{InducedDirichletPrior, StructuralPriors, ThresholdPrior};
        let p = PopulationParams::study1();
        let d = generate_dataset(&p, 20, 1).unwrap();
        let priors = (0..12).map(|_| ThresholdPrior::InducedDirichlet(InducedDirichletPrior::uniform(4))).collect();
        let m = OrdinalFactorModel::new(p.model_spec().unwrap(), d, priors, StructuralPriors::default()).unwrap();
        let truth = p.truth();
        for info in m.params() {
            assert!(truth.contains_key(&info.name), "{}", info.name);
        }
        assert_eq!(truth["phi.f1.f2"], 0.23);
        assert_eq!(truth["tau.item_2.1"], -15.0);
    }
}
