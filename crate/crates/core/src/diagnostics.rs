//! Convergence diagnostics and posterior summaries.
//!
//! Both `split_rhat` and `ess` work on chains split in half. A chain of odd
//! length loses its middle draw. Quantiles use linear interpolation between
//! order statistics: for sorted draws `x[0..n]`, position `h = (n − 1)·p`
//! gives `x[⌊h⌋] + (h − ⌊h⌋)·(x[⌊h⌋+1] − x[⌊h⌋])`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sampler::PosteriorDraws;

/// R̂ at or above this value counts as not converged.
pub const RHAT_THRESHOLD: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    /// `None` when the within-chain variance is zero.
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
    pub ci_width: f64,
}

impl ParamSummary {
    /// Converged by the R̂ < 1.1 rule; an undefined R̂ is not converged.
    pub fn converged(&self) -> bool {
        self.rhat.is_some_and(|r| r < RHAT_THRESHOLD)
    }
}

fn split(chains: &[Vec<f64>]) -> Option<Vec<&[f64]>> {
    let n = chains.iter().map(Vec::len).min()?;
    let half = n / 2;
    if half < 2 {
        return None;
    }
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let c = &c[..n];
        out.push(&c[..half]);
        out.push(&c[n - half..]);
    }
    Some(out)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Within-chain variance `W`, the pooled estimate `var⁺`, and the split
/// sequences themselves.
struct Pooled<'a> {
    seqs: Vec<&'a [f64]>,
    means: Vec<f64>,
    w: f64,
    var_plus: f64,
}

fn pooled(chains: &[Vec<f64>]) -> Option<Pooled<'_>> {
    let seqs = split(chains)?;
    let n = seqs[0].len() as f64;
    let means: Vec<f64> = seqs.iter().map(|s| mean(s)).collect();
    let w = seqs.iter().zip(&means).map(|(s, &m)| sample_var(s, m)).sum::<f64>() / seqs.len() as f64;
    if !(w > 0.0) || !w.is_finite() {
        return None;
    }
    let b = n * sample_var(&means, mean(&means));
    let var_plus = (n - 1.0) / n * w + b / n;
    Some(Pooled { seqs, means, w, var_plus })
}

/// Split potential scale reduction factor. `None` when any chain has fewer
/// than four draws or the within-chain variance vanishes.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let p = pooled(chains)?;
    Some((p.var_plus / p.w).sqrt())
}

/// Effective sample size from the split-chain autocorrelation, truncated by
/// Geyer's initial monotone sequence and capped at the total draw count.
pub fn ess(chains: &[Vec<f64>]) -> Option<f64> {
    let p = pooled(chains)?;
    let m = p.seqs.len();
    let n = p.seqs[0].len();
    let nf = n as f64;
    let total = (m * n) as f64;

    // mean over sequences of the lag-t autocovariance (divisor n)
    let acov = |t: usize| -> f64 {
        let mut s = 0.0;
        for (seq, &mu) in p.seqs.iter().zip(&p.means) {
            let mut a = 0.0;
            for i in 0..n - t {
                a += (seq[i] - mu) * (seq[i + t] - mu);
            }
            s += a / nf;
        }
        s / m as f64
    };
    let rho = |t: usize| 1.0 - (p.w * (nf - 1.0) / nf - acov(t)) / p.var_plus;

    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        t += 2;
    }
    let tau = tau.max(1.0 / total.log10());
    Some((total / tau).min(total))
}

/// Sample quantile at probability `p` by linear interpolation between order
/// statistics of the already-sorted `sorted`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(draws: &[f64], p: f64) -> f64 {
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Summary of one parameter from its per-chain draws.
pub fn summarize_param(name: &str, chains: &[Vec<f64>]) -> ParamSummary {
    let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
    let m = mean(&all);
    let sd = if all.len() > 1 { sample_var(&all, m).sqrt() } else { 0.0 };
    all.sort_by(f64::total_cmp);
    let q025 = quantile_sorted(&all, 0.025);
    let q975 = quantile_sorted(&all, 0.975);
    ParamSummary {
        name: name.to_string(),
        mean: m,
        sd,
        q025,
        q50: quantile_sorted(&all, 0.5),
        q975,
        rhat: split_rhat(chains),
        ess: ess(chains),
        ci_width: q975 - q025,
    }
}

/// Summaries of every parameter in `draws`, in name order.
pub fn summarize(draws: &PosteriorDraws) -> Vec<ParamSummary> {
    (0..draws.n_params())
        .into_par_iter()
        .map(|p| summarize_param(&draws.names[p], &draws.param(p)))
        .collect()
}

/// Closed-interval coverage: the boundaries count as covered.
pub fn coverage_flag(summary: &ParamSummary, truth: f64) -> bool {
    summary.q025 <= truth && truth <= summary.q975
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn rhat_hand_case() {
        // halves [1,2] and [3,4]: W = 0.5, B = 2·var(1.5, 3.5) = 4,
        // var⁺ = 0.5·0.5 + 4/2 = 2.25, R̂ = √4.5
        let r = split_rhat(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert_relative_eq!(r, 4.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rhat_near_one_for_one_stream() {
        let x = normals(1, 4000);
        let chains = vec![x[..2000].to_vec(), x[2000..].to_vec()];
        let r = split_rhat(&chains).unwrap();
        assert!((r - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn rhat_flags_disjoint_chains() {
        let a = normals(2, 1000);
        let b: Vec<f64> = normals(3, 1000).iter().map(|v| v + 10.0).collect();
        assert!(split_rhat(&[a, b]).unwrap() > 3.0);
    }

    #[test]
    fn constant_chains_are_undefined() {
        let c = vec![vec![2.0; 100], vec![2.0; 100]];
        assert!(split_rhat(&c).is_none());
        assert!(ess(&c).is_none());
        let s = summarize_param("x", &c);
        assert!(!s.converged());
        assert_eq!(s.ci_width, 0.0);
    }

    #[test]
    fn too_short_chains_are_undefined() {
        assert!(split_rhat(&[vec![1.0, 2.0, 3.0]]).is_none());
    }

    #[test]
    fn ess_of_iid_draws() {
        let x = normals(4, 4000);
        let chains: Vec<Vec<f64>> = x.chunks(1000).map(<[f64]>::to_vec).collect();
        let e = ess(&chains).unwrap();
        assert!((e - 4000.0).abs() < 0.15 * 4000.0, "{e}");
        assert!(e <= 4000.0);
    }

    #[test]
    fn ess_of_ar1() {
        let phi: f64 = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut v = Vec::with_capacity(5000);
                let mut x: f64 = StandardNormal.sample(&mut rng);
                x /= (1.0 - phi * phi).sqrt();
                for _ in 0..5000 {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    x = phi * x + e;
                    v.push(x);
                }
                v
            })
            .collect();
        let n = 20000.0;
        let expected = n * (1.0 - phi) / (1.0 + phi);
        let e = ess(&chains).unwrap();
        assert!((e - expected).abs() < 0.25 * expected, "{e} vs {expected}");
    }

    #[test]
    fn quantile_rule() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_relative_eq!(quantile(&x, 0.025), 3.475, epsilon = 1e-12);
        assert_relative_eq!(quantile(&x, 0.5), 50.5, epsilon = 1e-12);
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 100.0);
    }

    #[test]
    fn normal_ci_width() {
        let x = normals(6, 100_000);
        let s = summarize_param("z", &[x]);
        assert!((s.ci_width - 3.92).abs() < 0.05, "{}", s.ci_width);
        assert!((s.q50 - s.mean).abs() < 0.02);
    }

    #[test]
    fn coverage_is_closed() {
        let s = summarize_param("x", &[vec![0.0, 1.0, 2.0, 3.0, 4.0]]);
        assert!(coverage_flag(&s, s.q50));
        assert!(coverage_flag(&s, s.q025));
        assert!(coverage_flag(&s, s.q975));
        assert!(!coverage_flag(&s, 1e6));
    }

    #[test]
    fn normal_theory_intervals_cover_nominally() {
        // 1000 replications of a regression slope with known noise: the
        // 95% interval from the sampling distribution should cover ~95%
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n_rep = 1000;
        let mut hits = 0;
        for _ in 0..n_rep {
            let xs: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
            let sxx: f64 = {
                let m = mean(&xs);
                xs.iter().map(|x| (x - m) * (x - m)).sum()
            };
            let beta = 0.7;
            let ys: Vec<f64> = xs.iter().map(|x| beta * x + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            let mx = mean(&xs);
            let my = mean(&ys);
            let b: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
            let se = 1.0 / sxx.sqrt();
            // posterior under a flat prior and known σ = 1
            let post: Vec<f64> = (0..400).map(|_| b + se * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            if coverage_flag(&summarize_param("b", &[post]), beta) {
                hits += 1;
            }
        }
        let rate = hits as f64 / n_rep as f64;
        let se = (0.95 * 0.05 / n_rep as f64).sqrt();
        assert!((rate - 0.95).abs() < 4.0 * se + 0.01, "{rate}");
    }

    proptest! {
        #[test]
        fn rhat_affine_invariant(a in 0.1f64..10.0, b in -100.0f64..100.0, seed in 0u64..1000) {
            let x = normals(seed, 400);
            let chains: Vec<Vec<f64>> = x.chunks(100).map(<[f64]>::to_vec).collect();
            let y: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|v| a * v + b).collect()).collect();
            let r1 = split_rhat(&chains).unwrap();
            let r2 = split_rhat(&y).unwrap();
            prop_assert!((r1 - r2).abs() < 1e-12);
        }

        #[test]
        fn ess_positive_and_capped(seed in 0u64..1000, drift in 0.0f64..1.0) {
            let x: Vec<f64> = normals(seed, 400).iter().enumerate().map(|(i, v)| v + drift * i as f64 / 100.0).collect();
            let chains: Vec<Vec<f64>> = x.chunks(200).map(<[f64]>::to_vec).collect();
            let e = ess(&chains).unwrap();
            prop_assert!(e > 0.0 && e <= 400.0);
            // var⁺/W ≥ (n − 1)/n with half-chains of n = 100 draws
            let r = split_rhat(&chains).unwrap();
            prop_assert!(r >= (0.99f64).sqrt() - 1e-12);
        }
    }
}
