//! Bijections between constrained parameters and the unconstrained sampling
//! space, with log-Jacobian terms and their gradients.
//!
//! | kind            | map                                        | log-Jacobian                  |
//! |-----------------|--------------------------------------------|-------------------------------|
//! | ordered         | `τ₁ = x₁`, `τ_c = τ_{c−1} + exp(x_c)`      | `Σ_{c≥2} x_c`                 |
//! | unit-interval   | `logistic(x)`                              | `log σ + log(1 − σ)`          |
//! | positive        | `exp(x)`                                   | `x`                           |
//! | corr-Cholesky   | canonical partial correlations `tanh(y)`   | to `Ω = LLᵀ`, see below       |
//! | unconstrained   | identity                                   | 0                             |
//!
//! The correlation block maps `K(K−1)/2` reals to the Cholesky factor of a
//! correlation matrix. Its log-Jacobian is taken all the way to the
//! off-diagonal entries of `Ω`: for the partial correlation `z` in column `k`
//! (1-based), the term is `((K − k − 1)/2 + 1)·log(1 − z²)`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Unconstrained,
    Ordered,
    UnitInterval,
    Positive,
    /// Cholesky factor of a `K×K` correlation matrix.
    CorrCholesky { k: usize },
}

impl ConstraintKind {
    /// Number of unconstrained coordinates for a block whose constrained
    /// value has `len` entries (for `CorrCholesky`, `len` is ignored).
    pub fn free_dim(self, len: usize) -> usize {
        match self {
            Self::CorrCholesky { k } => k * k.saturating_sub(1) / 2,
            _ => len,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub kind: ConstraintKind,
    /// Unconstrained dimension.
    pub dim: usize,
    pub offset: usize,
}

impl Block {
    /// Length of the constrained value (`K²` row-major for a correlation factor).
    pub fn constrained_len(&self) -> usize {
        match self.kind {
            ConstraintKind::CorrCholesky { k } => k * k,
            _ => self.dim,
        }
    }
}

/// Contiguous, non-overlapping blocks of a flat unconstrained vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransformLayout {
    blocks: Vec<Block>,
    len: usize,
}

impl TransformLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block; `len` is the constrained length except for
    /// correlation factors, where the dimension follows from `k`.
    pub fn push(&mut self, name: impl Into<String>, kind: ConstraintKind, len: usize) -> &Block {
        let dim = kind.free_dim(len);
        self.blocks.push(Block { name: name.into(), kind, dim, offset: self.len });
        self.len += dim;
        self.blocks.last().expect("just pushed")
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Total unconstrained length.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Constrained value of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct Constrained {
    pub name: String,
    pub values: Vec<f64>,
}

/// Maps a flat unconstrained vector to named constrained values and the
/// total log-Jacobian.
pub fn to_constrained(flat: &[f64], layout: &TransformLayout) -> Result<(Vec<Constrained>, f64)> {
    if flat.len() != layout.len() {
        return Err(Error::Dimension(format!("{} values for a layout of length {}", flat.len(), layout.len())));
    }
    let mut log_jac = 0.0;
    let mut out = Vec::with_capacity(layout.blocks.len());
    for b in &layout.blocks {
        let x = &flat[b.offset..b.offset + b.dim];
        let mut values = vec![0.0; b.constrained_len()];
        log_jac += match b.kind {
            ConstraintKind::Unconstrained => {
                values.copy_from_slice(x);
                0.0
            }
            ConstraintKind::Ordered => ordered_forward(x, &mut values),
            ConstraintKind::UnitInterval => x.iter().zip(&mut values).map(|(&xi, v)| unit_forward(xi, v)).sum(),
            ConstraintKind::Positive => {
                for (v, &xi) in values.iter_mut().zip(x) {
                    *v = xi.exp();
                }
                x.iter().sum()
            }
            ConstraintKind::CorrCholesky { k } => {
                let mut l = Matrix::zeros(k, k);
                let lj = corr_cholesky_forward(x, &mut l);
                values.copy_from_slice(l.as_slice());
                lj
            }
        };
        out.push(Constrained { name: b.name.clone(), values });
    }
    Ok((out, log_jac))
}

/// Inverse of [`to_constrained`]. Values are matched to blocks by name.
pub fn to_unconstrained(params: &[Constrained], layout: &TransformLayout) -> Result<Vec<f64>> {
    let mut flat = vec![0.0; layout.len()];
    for b in &layout.blocks {
        let v = params
            .iter()
            .find(|p| p.name == b.name)
            .ok_or_else(|| Error::Constraint { block: b.name.clone(), reason: "missing".into() })?;
        if v.values.len() != b.constrained_len() {
            return Err(Error::Constraint {
                block: b.name.clone(),
                reason: format!("expected {} values, got {}", b.constrained_len(), v.values.len()),
            });
        }
        let x = &mut flat[b.offset..b.offset + b.dim];
        let fail = |reason: String| Error::Constraint { block: b.name.clone(), reason };
        match b.kind {
            ConstraintKind::Unconstrained => x.copy_from_slice(&v.values),
            ConstraintKind::Ordered => ordered_inverse(&v.values, x).map_err(fail)?,
            ConstraintKind::UnitInterval => {
                for (xi, &u) in x.iter_mut().zip(&v.values) {
                    if !(u > 0.0 && u < 1.0) {
                        return Err(fail(format!("{u} outside (0, 1)")));
                    }
                    *xi = (u / (1.0 - u)).ln();
                }
            }
            ConstraintKind::Positive => {
                for (xi, &p) in x.iter_mut().zip(&v.values) {
                    if !(p > 0.0) {
                        return Err(fail(format!("{p} is not positive")));
                    }
                    *xi = p.ln();
                }
            }
            ConstraintKind::CorrCholesky { k } => {
                let l = Matrix::from_rows(&v.values.chunks(k).map(<[f64]>::to_vec).collect::<Vec<_>>())
                    .map_err(|e| fail(e.to_string()))?;
                corr_cholesky_inverse(&l, x).map_err(fail)?;
            }
        }
    }
    Ok(flat)
}

// ============================================================================
// Ordered vectors
// ============================================================================

/// Writes the ordered vector into `out` and returns `Σ_{c≥2} x_c`.
#[inline]
pub fn ordered_forward(x: &[f64], out: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    let mut lj = 0.0;
    for (c, (&xi, o)) in x.iter().zip(out.iter_mut()).enumerate() {
        if c == 0 {
            acc = xi;
        } else {
            acc += xi.exp();
            lj += xi;
        }
        *o = acc;
    }
    lj
}

/// Chain rule through the ordered map: adds `∂f/∂x` to `x_bar` given
/// `∂f/∂τ`. The log-Jacobian gradient is not included.
#[inline]
pub fn ordered_pullback(x: &[f64], tau_bar: &[f64], x_bar: &mut [f64]) {
    let mut suffix = 0.0;
    for c in (0..x.len()).rev() {
        suffix += tau_bar[c];
        x_bar[c] += if c == 0 { suffix } else { x[c].exp() * suffix };
    }
}

pub fn ordered_inverse(tau: &[f64], x: &mut [f64]) -> std::result::Result<(), String> {
    for (c, t) in tau.iter().enumerate() {
        if !t.is_finite() {
            return Err(format!("non-finite value at position {}", c + 1));
        }
        x[c] = if c == 0 {
            *t
        } else {
            let gap = t - tau[c - 1];
            if !(gap > 0.0) {
                return Err(format!("not strictly increasing at position {}", c + 1));
            }
            gap.ln()
        };
    }
    Ok(())
}

// ============================================================================
// Unit interval
// ============================================================================

/// Writes `logistic(x)` and returns `log σ + log(1 − σ)`.
#[inline]
pub fn unit_forward(x: f64, out: &mut f64) -> f64 {
    // log σ(x) + log σ(−x) = −|x| − 2·log(1 + e^{−|x|})
    let e = (-x.abs()).exp();
    let r = 1.0 / (1.0 + e);
    *out = if x >= 0.0 { r } else { e * r };
    -x.abs() - 2.0 * e.ln_1p()
}

// ============================================================================
// Correlation Cholesky factors
// ============================================================================

/// Fills the lower-triangular `l` (`K×K`) from `K(K−1)/2` unconstrained
/// values, ordered row by row. Returns the log-Jacobian to `Ω`.
pub fn corr_cholesky_forward(y: &[f64], l: &mut Matrix) -> f64 {
    let k = l.rows();
    let mut lj = 0.0;
    let mut idx = 0;
    l[(0, 0)] = 1.0;
    for i in 1..k {
        let mut w: f64 = 1.0;
        for j in 0..i {
            let z = y[idx].tanh();
            idx += 1;
            let one_m_z2 = 1.0 - z * z;
            l[(i, j)] = z * w.sqrt();
            w *= one_m_z2;
            lj += ((k - j - 2) as f64 / 2.0 + 1.0) * log_one_minus_tanh2(y[idx - 1]);
        }
        l[(i, i)] = w.sqrt();
        for j in (i + 1)..k {
            l[(i, j)] = 0.0;
        }
    }
    lj
}

/// `log(1 − tanh²y) = log 4 − 2·softplus(2|y|) + 2|y|`, stable for large `|y|`.
#[inline]
fn log_one_minus_tanh2(y: f64) -> f64 {
    let a = 2.0 * y.abs();
    4f64.ln() + a - 2.0 * normal::softplus(a)
}

/// Reverse pass through [`corr_cholesky_forward`]: given `∂f/∂L` (lower
/// triangle), adds `∂f/∂y` to `y_bar`, including the log-Jacobian gradient.
pub fn corr_cholesky_pullback(y: &[f64], l_bar: &Matrix, y_bar: &mut [f64]) {
    let k = l_bar.rows();
    let mut idx = 0;
    let mut w = vec![0.0; k + 1];
    let mut z = vec![0.0; k];
    for i in 1..k {
        let base = idx;
        w[0] = 1.0;
        for j in 0..i {
            z[j] = y[base + j].tanh();
            w[j + 1] = w[j] * (1.0 - z[j] * z[j]);
        }
        // w_i feeds L_ii = sqrt(w_i); walk back through w_{j+1} = w_j(1 − z_j²)
        let mut w_bar = if w[i] > 0.0 { l_bar[(i, i)] / (2.0 * w[i].sqrt()) } else { 0.0 };
        for j in (0..i).rev() {
            let sw = w[j].sqrt();
            let z_bar = l_bar[(i, j)] * sw - w_bar * w[j] * 2.0 * z[j];
            let coef = (k - j - 2) as f64 / 2.0 + 1.0;
            y_bar[base + j] += z_bar * (1.0 - z[j] * z[j]) - 2.0 * coef * z[j];
            w_bar = w_bar * (1.0 - z[j] * z[j]) + if sw > 0.0 { l_bar[(i, j)] * z[j] / (2.0 * sw) } else { 0.0 };
        }
        idx += i;
    }
}

pub fn corr_cholesky_inverse(l: &Matrix, y: &mut [f64]) -> std::result::Result<(), String> {
    let k = l.rows();
    if !l.is_square() {
        return Err("correlation factor is not square".into());
    }
    let mut idx = 0;
    for i in 0..k {
        let norm: f64 = l.row(i).iter().map(|v| v * v).sum();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(format!("row {} has squared norm {norm}", i + 1));
        }
        if !(l[(i, i)] > 0.0) || l.row(i)[i + 1..].iter().any(|&v| v != 0.0) {
            return Err(format!("row {} is not a valid lower-triangular row", i + 1));
        }
        let mut w: f64 = 1.0;
        for j in 0..i {
            let z = l[(i, j)] / w.sqrt();
            if !(z.abs() < 1.0) {
                return Err(format!("partial correlation {z} at ({}, {}) outside (-1, 1)", i + 1, j + 1));
            }
            y[idx] = z.atanh();
            idx += 1;
            w *= 1.0 - z * z;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::log_abs_det;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layout() -> TransformLayout {
        let mut l = TransformLayout::new();
        l.push("tau", ConstraintKind::Ordered, 3);
        l.push("u", ConstraintKind::UnitInterval, 2);
        l.push("sd", ConstraintKind::Positive, 2);
        l.push("omega", ConstraintKind::CorrCholesky { k: 3 }, 0);
        l.push("lambda", ConstraintKind::Unconstrained, 2);
        l
    }

    #[test]
    fn layout_offsets_are_contiguous() {
        let l = layout();
        let mut next = 0;
        for b in l.blocks() {
            assert_eq!(b.offset, next);
            next += b.dim;
        }
        assert_eq!(l.len(), next);
        assert_eq!(l.block("omega").unwrap().dim, 3);
    }

    #[test]
    fn ordered_zero_example() {
        let mut l = TransformLayout::new();
        l.push("tau", ConstraintKind::Ordered, 3);
        let (c, lj) = to_constrained(&[0.0; 3], &l).unwrap();
        assert_eq!(c[0].values, vec![0.0, 1.0, 2.0]);
        assert_eq!(lj, 0.0);
    }

    #[test]
    fn unit_interval_zero_example() {
        let mut l = TransformLayout::new();
        l.push("u", ConstraintKind::UnitInterval, 1);
        let (c, lj) = to_constrained(&[0.0], &l).unwrap();
        assert_eq!(c[0].values, vec![0.5]);
        assert_relative_eq!(lj, 0.25f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn round_trip_at_random_points() {
        let l = layout();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..l.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (c, _) = to_constrained(&x, &l).unwrap();
            let back = to_unconstrained(&c, &l).unwrap();
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn violations_name_the_block() {
        let l = layout();
        let (mut c, _) = to_constrained(&vec![0.1; l.len()], &l).unwrap();
        c[0].values = vec![0.0, 0.0, 1.0];
        match to_unconstrained(&c, &l) {
            Err(Error::Constraint { block, .. }) => assert_eq!(block, "tau"),
            other => panic!("{other:?}"),
        }
        let (mut c, _) = to_constrained(&vec![0.1; l.len()], &l).unwrap();
        c[2].values[1] = -1.0;
        assert!(matches!(to_unconstrained(&c, &l), Err(Error::Constraint { block, .. }) if block == "sd"));
        assert!(to_constrained(&[0.0], &l).is_err());
    }

    /// Central-difference Jacobian of the map from unconstrained values to
    /// the free constrained coordinates.
    fn fd_log_det(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> f64 {
        let n = x.len();
        let h = 1e-6;
        let mut j = Matrix::zeros(n, n);
        for c in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            for r in 0..n {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        log_abs_det(&j).unwrap()
    }

    #[test]
    fn ordered_log_jacobian_matches_numerical() {
        let x = [0.3, -0.7, 1.1, 0.2];
        let mut out = [0.0; 4];
        let lj = ordered_forward(&x, &mut out);
        let fd = fd_log_det(
            |x| {
                let mut o = vec![0.0; x.len()];
                ordered_forward(x, &mut o);
                o
            },
            &x,
        );
        assert_relative_eq!(lj, fd, epsilon = 1e-6);
    }

    #[test]
    fn unit_and_positive_log_jacobians_match_numerical() {
        for x in [-3.0, -0.4, 0.0, 2.5] {
            let mut u = 0.0;
            let lj = unit_forward(x, &mut u);
            let h = 1e-6;
            let fd = ((normal::logistic(x + h) - normal::logistic(x - h)) / (2.0 * h)).ln();
            assert_relative_eq!(lj, fd, epsilon = 1e-6);
            let fd = (((x + h).exp() - (x - h).exp()) / (2.0 * h)).ln();
            assert_relative_eq!(x, fd, epsilon = 1e-6);
        }
    }

    fn omega_offdiag(y: &[f64], k: usize) -> Vec<f64> {
        let mut l = Matrix::zeros(k, k);
        corr_cholesky_forward(y, &mut l);
        let omega = l.matmul(&l.transpose()).unwrap();
        let mut v = Vec::new();
        for i in 1..k {
            for j in 0..i {
                v.push(omega[(i, j)]);
            }
        }
        v
    }

    #[test]
    fn corr_cholesky_log_jacobian_matches_numerical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 2..=5 {
            for _ in 0..5 {
                let y: Vec<f64> = (0..k * (k - 1) / 2).map(|_| rng.random_range(-1.5..1.5)).collect();
                let mut l = Matrix::zeros(k, k);
                let lj = corr_cholesky_forward(&y, &mut l);
                assert_relative_eq!(lj, fd_log_det(|y| omega_offdiag(y, k), &y), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn corr_cholesky_rows_have_unit_norm() {
        let y = [0.4, -2.0, 0.9, 1.3, -0.2, 0.1];
        let mut l = Matrix::zeros(4, 4);
        corr_cholesky_forward(&y, &mut l);
        for i in 0..4 {
            let n: f64 = l.row(i).iter().map(|v| v * v).sum();
            assert_relative_eq!(n, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn corr_cholesky_pullback_matches_finite_differences() {
        let k = 4;
        let y = [0.4, -1.0, 0.9, 1.3, -0.2, 0.1];
        // f = Σ W ⊙ L + log-Jacobian
        let w: Vec<f64> = (0..k * k).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let f = |y: &[f64]| {
            let mut l = Matrix::zeros(k, k);
            let lj = corr_cholesky_forward(y, &mut l);
            lj + l.as_slice().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut lbar = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                lbar[(i, j)] = w[i * k + j];
            }
        }
        let mut g = vec![0.0; y.len()];
        corr_cholesky_pullback(&y, &lbar, &mut g);
        for c in 0..y.len() {
            let h = 1e-6;
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[c] += h;
            ym[c] -= h;
            assert_relative_eq!(g[c], (f(&yp) - f(&ym)) / (2.0 * h), epsilon = 1e-7);
        }
    }

    #[test]
    fn ordered_pullback_matches_finite_differences() {
        let x = [0.5, -0.3, 0.8];
        let w = [1.0, -2.0, 0.5];
        let f = |x: &[f64]| {
            let mut o = [0.0; 3];
            ordered_forward(x, &mut o);
            o.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut g = [0.0; 3];
        ordered_pullback(&x, &w, &mut g);
        for c in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            assert_relative_eq!(g[c], (f(&xp) - f(&xm)) / (2.0 * h), epsilon = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn ordered_output_is_increasing(x in proptest::collection::vec(-8.0f64..8.0, 1..8)) {
            let mut out = vec![0.0; x.len()];
            ordered_forward(&x, &mut out);
            for w in out.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }

        #[test]
        fn unit_interval_round_trip(x in -15.0f64..15.0) {
            let mut u = 0.0;
            unit_forward(x, &mut u);
            prop_assert!(u > 0.0 && u < 1.0);
            prop_assert!(((u / (1.0 - u)).ln() - x).abs() < 1e-9 * (1.0 + x.abs()));
        }

        #[test]
        fn corr_cholesky_round_trip(y in proptest::collection::vec(-3.0f64..3.0, 6)) {
            let mut l = Matrix::zeros(4, 4);
            corr_cholesky_forward(&y, &mut l);
            let mut back = vec![0.0; 6];
            corr_cholesky_inverse(&l, &mut back).unwrap();
            for (a, b) in y.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
