use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_adjoint, cholesky_lower, Matrix};
use crate::priors::{
    half_cauchy_core, induced_terms, lkj_core, rescaled_jacobian_log_det, seq_values, StructuralPriors,
    ThresholdPrior,
};
use crate::sampler::LogDensity;
use crate::transforms::{corr_cholesky_forward, corr_cholesky_pullback, ordered_forward, ordered_pullback};
use crate::transforms::{ConstraintKind, TransformLayout};
use crate::transforms;

use super::likelihood::{ghk_backward, ghk_forward, GhkWork};
use super::{DatasetMatrix, ModelSpec, ThresholdVector};

/// Parameter families used when summarizing draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamClass {
    Loading,
    FactorVariance,
    FactorCovariance,
    Threshold,
}

impl ParamClass {
    pub fn label(self) -> &'static str {
        match self {
            Self::Loading => "loadings",
            Self::FactorVariance => "factor variances",
            Self::FactorCovariance => "factor covariance",
            Self::Threshold => "thresholds",
        }
    }
}

/// Name and location of one reported (constrained) parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub class: ParamClass,
    /// Item index for loadings and thresholds.
    pub item: Option<usize>,
    /// 1-based threshold position within its item.
    pub position: Option<usize>,
}

/// Joint posterior over structural parameters, thresholds and the GHK
/// nuisance values for one group.
///
/// Unconstrained layout: free loadings, log factor SDs (reference-loading
/// identification only), factor partial correlations, thresholds item by
/// item, then the logit of `u`, respondent-major.
#[derive(Debug, Clone)]
pub struct OrdinalFactorModel {
    spec: ModelSpec,
    data: DatasetMatrix,
    priors: Vec<ThresholdPrior>,
    structural: StructuralPriors,
    free_loadings: Vec<(usize, usize)>,
    fixed_loadings: Vec<(usize, usize)>,
    free_sd: bool,
    n_cpc: usize,
    sd_offset: usize,
    cpc_offset: usize,
    tau_offsets: Vec<usize>,
    n_theta: usize,
    residual: f64,
    log_det_consts: Vec<f64>,
    layout: TransformLayout,
    params: Vec<ParamInfo>,
}

impl OrdinalFactorModel {
    pub fn new(
        spec: ModelSpec,
        data: DatasetMatrix,
        priors: Vec<ThresholdPrior>,
        structural: StructuralPriors,
    ) -> Result<Self> {
        spec.validate()?;
        structural.validate()?;
        let n_items = spec.n_items();
        if data.n_items() != n_items {
            return Err(Error::Dimension(format!("data has {} items, model has {n_items}", data.n_items())));
        }
        if priors.len() != n_items {
            return Err(Error::Dimension(format!("{} threshold priors for {n_items} items", priors.len())));
        }
        for (item, (declared, counts)) in spec.items.iter().zip(data.category_counts()).enumerate() {
            if counts.len() != declared.n_categories {
                return Err(Error::Dimension(format!(
                    "item {} declares {} categories, data built with {}",
                    item + 1,
                    declared.n_categories,
                    counts.len()
                )));
            }
        }
        let k = spec.n_factors;
        let reference = spec.identification.uses_reference_loading();
        let mut layout = TransformLayout::new();
        let mut free_loadings = Vec::new();
        let mut fixed_loadings = Vec::new();
        for (i, item) in spec.items.iter().enumerate() {
            for &f in &item.factor_indices {
                if reference && item.is_reference {
                    fixed_loadings.push((i, f));
                } else {
                    free_loadings.push((i, f));
                }
            }
        }
        layout.push("lambda", ConstraintKind::Unconstrained, free_loadings.len());
        let sd_offset = layout.len();
        if reference {
            layout.push("factor_sd", ConstraintKind::Positive, k);
        }
        let cpc_offset = layout.len();
        let n_cpc = k * (k - 1) / 2;
        if n_cpc > 0 {
            layout.push("factor_corr", ConstraintKind::CorrCholesky { k }, 0);
        }
        let mut tau_offsets = Vec::with_capacity(n_items);
        let mut log_det_consts = Vec::with_capacity(n_items);
        for (item, prior) in spec.items.iter().zip(&priors) {
            let c = item.n_categories;
            tau_offsets.push(layout.len());
            match prior {
                ThresholdPrior::Sequential(p) => {
                    if p.len() != c - 1 {
                        return Err(Error::Dimension(format!(
                            "item `{}`: sequential prior of length {} for {} thresholds",
                            item.item_id,
                            p.len(),
                            c - 1
                        )));
                    }
                    layout.push(format!("tau_star.{}", item.item_id), ConstraintKind::Unconstrained, c - 1);
                    log_det_consts.push(0.0);
                }
                ThresholdPrior::InducedDirichlet(p) => {
                    if p.n_categories() != c {
                        return Err(Error::Dimension(format!(
                            "item `{}`: {} alphas for {c} categories",
                            item.item_id,
                            p.n_categories()
                        )));
                    }
                    layout.push(format!("tau.{}", item.item_id), ConstraintKind::Ordered, c - 1);
                    log_det_consts.push(rescaled_jacobian_log_det(c)?);
                }
            }
        }
        let n_theta = layout.len();
        layout.push("u", ConstraintKind::UnitInterval, data.n_respondents() * n_items);

        let mut params = Vec::new();
        for &(i, f) in &free_loadings {
            params.push(ParamInfo {
                name: format!("lambda.f{}.{}", f + 1, spec.items[i].item_id),
                class: ParamClass::Loading,
                item: Some(i),
                position: None,
            });
        }
        if reference {
            for f in 0..k {
                params.push(ParamInfo {
                    name: format!("phi.f{}.f{}", f + 1, f + 1),
                    class: ParamClass::FactorVariance,
                    item: None,
                    position: None,
                });
            }
        }
        for a in 0..k {
            for b in (a + 1)..k {
                params.push(ParamInfo {
                    name: format!("phi.f{}.f{}", a + 1, b + 1),
                    class: ParamClass::FactorCovariance,
                    item: None,
                    position: None,
                });
            }
        }
        for (i, item) in spec.items.iter().enumerate() {
            for c in 1..item.n_categories {
                params.push(ParamInfo {
                    name: format!("tau.{}.{}", item.item_id, c),
                    class: ParamClass::Threshold,
                    item: Some(i),
                    position: Some(c),
                });
            }
        }

        Ok(Self {
            residual: spec.identification.residual_variance(),
            spec,
            data,
            priors,
            structural,
            free_loadings,
            fixed_loadings,
            free_sd: reference,
            n_cpc,
            sd_offset,
            cpc_offset,
            tau_offsets,
            n_theta,
            log_det_consts,
            layout,
            params,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn data(&self) -> &DatasetMatrix {
        &self.data
    }

    pub fn layout(&self) -> &TransformLayout {
        &self.layout
    }

    /// Reported parameters, in the order of [`Self::constrain`].
    pub fn params(&self) -> &[ParamInfo] {
        &self.params
    }

    /// Number of structural and threshold coordinates (everything but `u`).
    pub fn n_structural(&self) -> usize {
        self.n_theta
    }

    /// Unconstrained threshold coordinates of one item.
    pub fn threshold_range(&self, item: usize) -> std::ops::Range<usize> {
        let start = self.tau_offsets[item];
        start..start + self.spec.items[item].n_thresholds()
    }

    fn thresholds_into(&self, x: &[f64], item: usize, out: &mut [f64]) -> f64 {
        let xi = &x[self.threshold_range(item)];
        match self.priors[item] {
            ThresholdPrior::Sequential(_) => {
                seq_values(xi, out);
                0.0
            }
            ThresholdPrior::InducedDirichlet(_) => ordered_forward(xi, out),
        }
    }

    /// Structural pieces at `x`: `(Λ, factor SDs, L_Ω, Φ)`.
    fn structure(&self, x: &[f64]) -> (Matrix, Vec<f64>, Matrix, Matrix, f64) {
        let k = self.spec.n_factors;
        let mut lam = Matrix::zeros(self.spec.n_items(), k);
        for (&(i, f), &v) in self.free_loadings.iter().zip(x) {
            lam[(i, f)] = v;
        }
        for &(i, f) in &self.fixed_loadings {
            lam[(i, f)] = 1.0;
        }
        let mut log_jac = 0.0;
        let sd: Vec<f64> = if self.free_sd {
            let xs = &x[self.sd_offset..self.sd_offset + k];
            log_jac += xs.iter().sum::<f64>();
            xs.iter().map(|v| v.exp()).collect()
        } else {
            vec![1.0; k]
        };
        let mut l_omega = Matrix::identity(k);
        if self.n_cpc > 0 {
            log_jac += corr_cholesky_forward(&x[self.cpc_offset..self.cpc_offset + self.n_cpc], &mut l_omega);
        }
        let omega = l_omega.matmul(&l_omega.transpose()).expect("square");
        let mut phi = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                phi[(a, b)] = sd[a] * omega[(a, b)] * sd[b];
            }
        }
        (lam, sd, l_omega, phi, log_jac)
    }

    /// Constrained reported parameters at `x`, matching [`Self::params`].
    pub fn constrain(&self, x: &[f64]) -> Vec<f64> {
        let (_, sd, _, phi, _) = self.structure(x);
        let k = self.spec.n_factors;
        let mut out = Vec::with_capacity(self.params.len());
        out.extend_from_slice(&x[..self.free_loadings.len()]);
        if self.free_sd {
            out.extend(sd.iter().map(|s| s * s));
        }
        for a in 0..k {
            for b in (a + 1)..k {
                out.push(phi[(a, b)]);
            }
        }
        for (i, item) in self.spec.items.iter().enumerate() {
            let mut tau = vec![0.0; item.n_thresholds()];
            self.thresholds_into(x, i, &mut tau);
            out.extend(tau);
        }
        out
    }

    /// Thresholds of every item at `x`.
    pub fn thresholds(&self, x: &[f64]) -> Result<Vec<ThresholdVector>> {
        (0..self.spec.n_items())
            .map(|i| {
                let mut tau = vec![0.0; self.spec.items[i].n_thresholds()];
                self.thresholds_into(x, i, &mut tau);
                ThresholdVector::new(tau)
            })
            .collect()
    }

    /// Uniform draw in `[-2, 2]` for every unconstrained coordinate, with
    /// free loadings drawn from `[0, 2]`.
    pub fn random_init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.free_loadings.len();
        (0..self.dim()).map(|i| if i < n { rng.random_range(0.0..=2.0) } else { rng.random_range(-2.0..=2.0) }).collect()
    }

    /// Log posterior (up to a constant) and its gradient in unconstrained
    /// coordinates. Returns `-inf` when the point is numerically invalid;
    /// the gradient is then unspecified.
    pub fn log_posterior_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n_items = self.spec.n_items();
        let k = self.spec.n_factors;
        let sp = &self.structural;

        let (lam, sd, l_omega, phi, mut lp) = self.structure(x);

        // structural priors
        let n_free = self.free_loadings.len();
        for c in 0..n_free {
            let z = (x[c] - sp.loading_mean) / sp.loading_sd;
            lp += -0.5 * z * z;
            grad[c] -= z / sp.loading_sd;
        }
        if self.free_sd {
            for f in 0..k {
                let s = sd[f];
                lp += half_cauchy_core(s, sp.variance_scale);
                // d/dlog s of [log-Jacobian + log p(s)]
                let r = s / sp.variance_scale;
                grad[self.sd_offset + f] += 1.0 - 2.0 * r * r / (1.0 + r * r);
            }
        }
        lp += lkj_core(&l_omega, sp.lkj_eta);

        // thresholds and their priors
        let mut tau = Vec::new();
        let mut tau_offsets = Vec::with_capacity(n_items);
        for i in 0..n_items {
            let range = self.threshold_range(i);
            let xi = &x[range.clone()];
            let start = tau.len();
            tau_offsets.push(start);
            tau.resize(start + xi.len(), 0.0);
            let t = &mut tau[start..];
            match &self.priors[i] {
                ThresholdPrior::Sequential(p) => {
                    seq_values(xi, t);
                    let sds = p.sd();
                    for (c, ((&v, &m), &s)) in xi.iter().zip(&p.mu_star).zip(&sds).enumerate() {
                        let z = (v - m) / s;
                        lp += -0.5 * z * z - s.ln();
                        grad[range.start + c] -= z / s;
                    }
                }
                ThresholdPrior::InducedDirichlet(p) => {
                    lp += ordered_forward(xi, t);
                    for g in &mut grad[range.start + 1..range.end] {
                        *g += 1.0;
                    }
                    let mut tbar = vec![0.0; xi.len()];
                    lp += induced_terms(t, &p.alpha, p.anchor, p.cdf_variant, &mut tbar);
                    lp += self.log_det_consts[i];
                    ordered_pullback(xi, &tbar, &mut grad[range]);
                }
            }
        }
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }

        // likelihood
        let mut sigma = Matrix::zeros(n_items, n_items);
        let lp_mat = lam.matmul(&phi).expect("conformable");
        for i in 0..n_items {
            for j in 0..=i {
                let mut s = 0.0;
                for f in 0..k {
                    s += lp_mat[(i, f)] * lam[(j, f)];
                }
                sigma[(i, j)] = s;
                sigma[(j, i)] = s;
            }
            sigma[(i, i)] += self.residual;
        }
        let l = match cholesky_lower(&sigma) {
            Ok(l) => l,
            Err(_) => return f64::NEG_INFINITY,
        };
        let mut work = GhkWork::new(n_items);
        let mut l_bar = Matrix::zeros(n_items, n_items);
        let mut tau_bar = vec![0.0; tau.len()];
        let mut u = vec![0.0; n_items];
        let mut u_bar = vec![0.0; n_items];
        for n in 0..self.data.n_respondents() {
            let base = self.n_theta + n * n_items;
            for (i, ui) in u.iter_mut().enumerate() {
                lp += transforms::unit_forward(x[base + i], ui);
            }
            let row = self.data.row(n);
            let ll = ghk_forward(row, None, &l, &tau, &tau_offsets, &u, &mut work);
            if ll == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            lp += ll;
            u_bar.iter_mut().for_each(|v| *v = 0.0);
            ghk_backward(row, &l, &tau_offsets, &u, &mut work, &mut l_bar, &mut tau_bar, &mut u_bar);
            for i in 0..n_items {
                let ui = u[i];
                grad[base + i] += u_bar[i] * ui * (1.0 - ui) + (1.0 - 2.0 * ui);
            }
        }
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }

        // thresholds: pull τ̄ back through each item's map
        for i in 0..n_items {
            let range = self.threshold_range(i);
            let tb = &tau_bar[tau_offsets[i]..tau_offsets[i] + range.len()];
            let xi = &x[range.clone()];
            ordered_pullback(xi, tb, &mut grad[range]);
        }

        // structure: L̄ → G = ∂/∂Σ → Λ̄, Φ̄
        let g = cholesky_adjoint(&l, &mut l_bar);
        let g_lam = g.matmul(&lam).expect("conformable"); // I×K
        let lam_bar = g_lam.matmul(&phi).expect("conformable");
        for (c, &(i, f)) in self.free_loadings.iter().enumerate() {
            grad[c] += 2.0 * lam_bar[(i, f)];
        }
        let phi_bar = lam.transpose().matmul(&g_lam).expect("conformable"); // K×K, symmetric
        let mut omega = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                omega[(a, b)] = phi[(a, b)] / (sd[a] * sd[b]);
            }
        }
        if self.free_sd {
            for f in 0..k {
                let mut s = 0.0;
                for b in 0..k {
                    s += phi_bar[(f, b)] * omega[(f, b)] * sd[b];
                }
                // ∂/∂log sd = sd · ∂/∂sd
                grad[self.sd_offset + f] += 2.0 * s * sd[f];
            }
        }
        if self.n_cpc > 0 {
            let mut omega_bar = Matrix::zeros(k, k);
            for a in 0..k {
                for b in 0..k {
                    omega_bar[(a, b)] = sd[a] * phi_bar[(a, b)] * sd[b];
                }
            }
            let mut lo_bar = omega_bar.matmul(&l_omega).expect("conformable");
            for a in 0..k {
                for b in 0..k {
                    lo_bar[(a, b)] = if b <= a { 2.0 * lo_bar[(a, b)] } else { 0.0 };
                }
                if sp.lkj_eta != 1.0 {
                    lo_bar[(a, a)] += 2.0 * (sp.lkj_eta - 1.0) / l_omega[(a, a)];
                }
            }
            corr_cholesky_pullback(
                &x[self.cpc_offset..self.cpc_offset + self.n_cpc],
                &lo_bar,
                &mut grad[self.cpc_offset..self.cpc_offset + self.n_cpc],
            );
        }
        lp
    }

    /// Value only.
    pub fn log_posterior(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.log_posterior_and_gradient(x, &mut g)
    }
}

impl LogDensity for OrdinalFactorModel {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.log_posterior_and_gradient(x, grad)
    }

    /// Free loadings start positive. With a reference loading fixed at +1, a
    /// factor whose other loadings all turn negative is a separate local
    /// mode (the factor variance collapses toward zero to fit it), which
    /// random-sign starting values regularly fall into.
    fn nonnegative_init(&self) -> std::ops::Range<usize> {
        0..self.free_loadings.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use crate::model::{augmented_log_likelihood, AugmentedState, IdentificationRule, ItemSpec};
    use crate::priors::{InducedDirichletPrior, SequentialThresholdPrior};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(priors: impl Fn(usize) -> ThresholdPrior, n_factors: usize, per: usize, c: usize, n: usize) -> OrdinalFactorModel {
        let spec = ModelSpec::simple_structure(n_factors, per, c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rows: Vec<Vec<u16>> =
            (0..n).map(|_| (0..spec.n_items()).map(|_| rng.random_range(1..=c as u16)).collect()).collect();
        let data = DatasetMatrix::new(rows, &spec.n_categories()).unwrap();
        let pr = (0..spec.n_items()).map(&priors).collect();
        OrdinalFactorModel::new(spec, data, pr, StructuralPriors { lkj_eta: 2.0, ..Default::default() }).unwrap()
    }

    fn fd_check(model: &OrdinalFactorModel, seed: u64, points: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = model.dim();
        let mut grad = vec![0.0; d];
        for _ in 0..points {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f0 = model.log_posterior_and_gradient(&x, &mut grad);
            assert!(f0.is_finite());
            for c in 0..d {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let fd = (model.log_posterior(&xp) - model.log_posterior(&xm)) / (2.0 * h);
                let err = (grad[c] - fd).abs() / fd.abs().max(1.0);
                assert!(err < 1e-5, "coordinate {c}: analytic {} vs fd {fd}", grad[c]);
            }
        }
    }

    #[test]
    fn gradient_two_item_sequential() {
        let m = toy(|_| ThresholdPrior::Sequential(SequentialThresholdPrior::iid(2, 0.0, 1.5).unwrap()), 1, 2, 3, 5);
        fd_check(&m, 1, 20);
    }

    #[test]
    fn gradient_two_factor_induced_dirichlet() {
        let m = toy(
            |i| {
                ThresholdPrior::InducedDirichlet(
                    InducedDirichletPrior::new(
                        vec![1.0 + i as f64, 2.0, 1.5, 1.0],
                        0.1,
                        if i % 2 == 0 { crate::priors::CdfVariant::ExactNormal } else { crate::priors::CdfVariant::LogisticApprox },
                    )
                    .unwrap(),
                )
            },
            2,
            2,
            4,
            6,
        );
        fd_check(&m, 2, 5);
    }

    #[test]
    fn gradient_three_factors_unit_variance() {
        let mut spec = ModelSpec::simple_structure(3, 2, 3).unwrap();
        spec.identification = IdentificationRule::UnitFactorVariance { residual_variance: 0.51 };
        spec.items[1].factor_indices.push(2);
        let data = DatasetMatrix::new(vec![vec![1, 2, 3, 1, 2, 3], vec![3, 3, 1, 2, 2, 1]], &spec.n_categories()).unwrap();
        let priors =
            (0..6).map(|_| ThresholdPrior::Sequential(SequentialThresholdPrior::iid(2, 0.0, 1.5).unwrap())).collect();
        let m = OrdinalFactorModel::new(spec, data, priors, StructuralPriors { lkj_eta: 1.5, ..Default::default() }).unwrap();
        fd_check(&m, 3, 5);
    }

    #[test]
    fn likelihood_part_matches_augmented_log_likelihood() {
        let m = toy(|_| ThresholdPrior::Sequential(SequentialThresholdPrior::iid(2, 0.0, 1.5).unwrap()), 1, 2, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let empty = OrdinalFactorModel::new(
            m.spec.clone(),
            DatasetMatrix::new(vec![], &m.spec.n_categories()).unwrap(),
            m.priors.clone(),
            m.structural.clone(),
        )
        .unwrap();
        let prior_part = empty.log_posterior(&x[..empty.dim()]);
        let u: Vec<f64> = x[m.n_theta..].iter().map(|&v| normal::logistic(v)).collect();
        let jac: f64 = u.iter().map(|&v| (v * (1.0 - v)).ln()).sum();
        let (lam, _, _, phi, _) = m.structure(&x);
        let sigma = super::super::marginal_cov(&lam, &phi, &[1.0, 1.0]).unwrap();
        let l = cholesky_lower(&sigma).unwrap();
        let ll = augmented_log_likelihood(&l, &m.thresholds(&x).unwrap(), &AugmentedState::new(2, u).unwrap(), &m.data)
            .unwrap();
        approx::assert_relative_eq!(m.log_posterior(&x), prior_part + jac + ll, epsilon = 1e-10);
    }

    #[test]
    fn parameter_names_and_constrained_values() {
        let spec = ModelSpec::simple_structure(2, 3, 4).unwrap();
        let data = DatasetMatrix::new(vec![vec![1, 2, 3, 4, 4, 4]], &spec.n_categories()).unwrap();
        let priors = (0..6).map(|_| ThresholdPrior::InducedDirichlet(InducedDirichletPrior::uniform(4))).collect();
        let m = OrdinalFactorModel::new(spec, data, priors, StructuralPriors::default()).unwrap();
        let names: Vec<&str> = m.params().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(&names[..4], &["lambda.f1.item_2", "lambda.f1.item_3", "lambda.f2.item_5", "lambda.f2.item_6"]);
        assert_eq!(&names[4..7], &["phi.f1.f1", "phi.f2.f2", "phi.f1.f2"]);
        assert_eq!(names[7], "tau.item_1.1");
        assert_eq!(names.len(), 4 + 3 + 18);
        assert_eq!(m.dim(), 4 + 2 + 1 + 18 + 6);
        let mut x = vec![0.0; m.dim()];
        x[4] = 0.5f64.ln();
        x[6] = 0.3f64.atanh();
        let v = m.constrain(&x);
        approx::assert_relative_eq!(v[4], 0.25, epsilon = 1e-14);
        approx::assert_relative_eq!(v[6], 0.5 * 0.3, epsilon = 1e-14);
        assert_eq!(&v[7..10], &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_mismatched_priors() {
        let spec = ModelSpec::simple_structure(1, 2, 3).unwrap();
        let data = DatasetMatrix::new(vec![], &spec.n_categories()).unwrap();
        let priors = vec![ThresholdPrior::InducedDirichlet(InducedDirichletPrior::uniform(4)); 2];
        assert!(OrdinalFactorModel::new(spec, data, priors, StructuralPriors::default()).is_err());
    }

    #[test]
    fn vanishing_interval_gives_negative_infinity() {
        let spec = ModelSpec::new(
            1,
            vec![ItemSpec { item_id: "a".into(), factor_indices: vec![0], n_categories: 2, is_reference: true }],
            IdentificationRule::default(),
        )
        .unwrap();
        let data = DatasetMatrix::new(vec![vec![1]], &[2]).unwrap();
        let priors = vec![ThresholdPrior::Sequential(SequentialThresholdPrior::iid(1, 0.0, 1e5).unwrap())];
        let m = OrdinalFactorModel::new(spec, data, priors, StructuralPriors::default()).unwrap();
        let x = vec![0.0, -200.0, 0.0];
        assert_eq!(m.log_posterior(&x), f64::NEG_INFINITY);
    }
}
