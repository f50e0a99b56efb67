use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::normal;

use super::{bounds, AugmentedState, DatasetMatrix, ThresholdVector};

/// Interval probabilities below this value make the log-density `-inf`.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// `ΛΦΛᵀ + Θ` with `Θ` given by its diagonal.
pub fn marginal_cov(loadings: &Matrix, factor_cov: &Matrix, residual_var: &[f64]) -> Result<Matrix> {
    let (n_items, k) = (loadings.rows(), loadings.cols());
    if factor_cov.rows() != k || factor_cov.cols() != k {
        return Err(Error::Dimension(format!(
            "loadings have {k} factors but factor covariance is {}x{}",
            factor_cov.rows(),
            factor_cov.cols()
        )));
    }
    if residual_var.len() != n_items {
        return Err(Error::Dimension(format!(
            "{} residual variances for {n_items} items",
            residual_var.len()
        )));
    }
    if let Some(bad) = residual_var.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter(format!("residual variance {bad} is not positive")));
    }
    let lp = loadings.matmul(factor_cov)?;
    let mut sigma = Matrix::zeros(n_items, n_items);
    for i in 0..n_items {
        for j in 0..=i {
            let mut s = 0.0;
            for f in 0..k {
                s += lp[(i, f)] * loadings[(j, f)];
            }
            sigma[(i, j)] = s;
            sigma[(j, i)] = s;
        }
        sigma[(i, i)] += residual_var[i];
    }
    Ok(sigma)
}

/// Category probabilities implied by cutting `Normal(mu, sigma)` at `tau`.
pub fn category_prob(tau: &[f64], mu: f64, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("scale {sigma} must be positive")));
    }
    let tau = ThresholdVector::new(tau.to_vec())?;
    let c = tau.n_categories();
    Ok((1..=c)
        .map(|code| {
            let (lo, hi) = tau.bounds(code);
            normal::interval_prob((lo - mu) / sigma, (hi - mu) / sigma)
        })
        .collect())
}

/// Result of one GHK pass over a response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GhkOutput {
    /// Latent standard scores drawn inside each response interval.
    pub z: Vec<f64>,
    /// Conditional interval probabilities.
    pub d: Vec<f64>,
    /// `Σ log d`, or `-inf` when some `d` is below [`UNDERFLOW_FLOOR`].
    pub log_density: f64,
}

/// GHK recursion for one respondent.
///
/// At step `k` the conditional mean is `μ_k + Σ_{j<k} L[k,j]·z_j`; the
/// response interval is standardized by `L[k,k]`, `d_k` is its probability
/// and `z_k` is the quantile at relative position `u_k` inside it.
pub fn ghk_tmvn(
    y: &[u16],
    mu: &[f64],
    l: &Matrix,
    thresholds: &[ThresholdVector],
    u: &[f64],
) -> Result<GhkOutput> {
    let k = y.len();
    if mu.len() != k || l.rows() != k || l.cols() != k || thresholds.len() != k || u.len() != k {
        return Err(Error::Dimension(format!("GHK inputs disagree on dimension {k}")));
    }
    if let Some(bad) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::InvalidParameter(format!("nuisance value {bad} outside (0, 1)")));
    }
    for (i, (&code, t)) in y.iter().zip(thresholds).enumerate() {
        if code == 0 || code as usize > t.n_categories() {
            return Err(Error::InvalidParameter(format!("item {}: code {code} out of range", i + 1)));
        }
    }
    let mut tau = Vec::new();
    let mut offsets = Vec::with_capacity(k);
    for t in thresholds {
        offsets.push(tau.len());
        tau.extend_from_slice(t.as_slice());
    }
    let mut work = GhkWork::new(k);
    let log_density = ghk_forward(y, Some(mu), l, &tau, &offsets, u, &mut work);
    Ok(GhkOutput { z: work.z, d: work.d, log_density })
}

/// `Σ_n Σ_i log d_ni` over the dataset with `μ = 0`.
pub fn augmented_log_likelihood(
    l: &Matrix,
    thresholds: &[ThresholdVector],
    u: &AugmentedState,
    data: &DatasetMatrix,
) -> Result<f64> {
    let k = data.n_items();
    if thresholds.len() != k || l.rows() != k {
        return Err(Error::Dimension("thresholds or Cholesky factor do not match items".into()));
    }
    if data.n_respondents() == 0 {
        return Ok(0.0);
    }
    if u.as_slice().len() != data.n_respondents() * k {
        return Err(Error::Dimension("nuisance state does not match dataset".into()));
    }
    let mut tau = Vec::new();
    let mut offsets = Vec::with_capacity(k);
    for t in thresholds {
        offsets.push(tau.len());
        tau.extend_from_slice(t.as_slice());
    }
    let mut work = GhkWork::new(k);
    let mut total = 0.0;
    for n in 0..data.n_respondents() {
        let ll = ghk_forward(data.row(n), None, l, &tau, &offsets, u.row(n), &mut work);
        if ll == f64::NEG_INFINITY {
            return Ok(ll);
        }
        total += ll;
    }
    Ok(total)
}

/// Per-respondent scratch, reused across rows.
pub(crate) struct GhkWork {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub z: Vec<f64>,
    pub d: Vec<f64>,
    pub zbar: Vec<f64>,
}

impl GhkWork {
    pub fn new(k: usize) -> Self {
        Self { a: vec![0.0; k], b: vec![0.0; k], z: vec![0.0; k], d: vec![0.0; k], zbar: vec![0.0; k] }
    }
}

/// Forward recursion. Stores standardized bounds, scores and interval
/// probabilities in `w`; returns `Σ log d` or `-inf` on underflow.
pub(crate) fn ghk_forward(
    codes: &[u16],
    mu: Option<&[f64]>,
    l: &Matrix,
    tau: &[f64],
    offsets: &[usize],
    u: &[f64],
    w: &mut GhkWork,
) -> f64 {
    let k = codes.len();
    let mut total = 0.0;
    // Σ log d is accumulated as a running product to avoid one logarithm per
    // item; flushing below 1e-4 keeps `prod · d` normal for any d ≥ 1e-300
    let mut prod = 1.0;
    for i in 0..k {
        let lrow = l.row(i);
        let mut m = mu.map_or(0.0, |m| m[i]);
        for j in 0..i {
            m += lrow[j] * w.z[j];
        }
        let item_tau = &tau[offsets[i]..offsets.get(i + 1).copied().unwrap_or(tau.len())];
        let (lo, hi) = bounds(item_tau, codes[i] as usize);
        let lkk = lrow[i];
        let a = (lo - m) / lkk;
        let b = (hi - m) / lkk;
        let (z, d) = normal::truncated_inverse(a, b, u[i]);
        w.a[i] = a;
        w.b[i] = b;
        w.z[i] = z;
        w.d[i] = d;
        if !(d >= UNDERFLOW_FLOOR) || !z.is_finite() {
            return f64::NEG_INFINITY;
        }
        prod *= d;
        if prod < 1e-4 {
            total += prod.ln();
            prod = 1.0;
        }
    }
    total + prod.ln()
}

/// Reverse pass of [`ghk_forward`] for `Σ log d`: accumulates adjoints of
/// the Cholesky factor (lower triangle), the thresholds and the nuisance row.
pub(crate) fn ghk_backward(
    codes: &[u16],
    l: &Matrix,
    offsets: &[usize],
    u: &[f64],
    w: &mut GhkWork,
    lbar: &mut Matrix,
    taubar: &mut [f64],
    ubar: &mut [f64],
) {
    let k = codes.len();
    w.zbar[..k].iter_mut().for_each(|v| *v = 0.0);
    for i in (0..k).rev() {
        let (a, b, z, d, ui) = (w.a[i], w.b[i], w.z[i], w.d[i], u[i]);
        let lkk = l[(i, i)];
        // dz/dν = 1/φ(z), with ν = Φ(a) + d·u
        let nubar = w.zbar[i] / normal::pdf(z);
        let inv_d = 1.0 / d;
        let abar = if a.is_finite() { normal::pdf(a) * (nubar * (1.0 - ui) - inv_d) } else { 0.0 };
        let bbar = if b.is_finite() { normal::pdf(b) * (nubar * ui + inv_d) } else { 0.0 };
        ubar[i] += nubar * d;
        let code = codes[i] as usize;
        let off = offsets[i];
        if a.is_finite() {
            taubar[off + code - 2] += abar / lkk;
        }
        if b.is_finite() {
            taubar[off + code - 1] += bbar / lkk;
        }
        let mut lkk_bar = 0.0;
        if a.is_finite() {
            lkk_bar -= abar * a;
        }
        if b.is_finite() {
            lkk_bar -= bbar * b;
        }
        lbar[(i, i)] += lkk_bar / lkk;
        let mbar = -(abar + bbar) / lkk;
        if mbar != 0.0 {
            let lrow = l.row(i);
            for j in 0..i {
                lbar[(i, j)] += mbar * w.z[j];
                w.zbar[j] += mbar * lrow[j];
            }
        }
    }
}
