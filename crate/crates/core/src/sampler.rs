//! Hamiltonian Monte Carlo with step-size and diagonal-metric adaptation.
//!
//! Two trajectory rules are available: a static trajectory whose leapfrog
//! count is jittered uniformly over `[L/2, 3L/2]`, and the multinomial
//! no-U-turn sampler with generalized U-turn checks across subtrees.
//!
//! Warmup follows the usual windowed scheme: a fast initial buffer where
//! only the step size adapts, a sequence of doubling slow windows that each
//! end with a metric update, and a terminal fast buffer. The step size is
//! tuned by dual averaging and frozen once warmup ends.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy error above which a trajectory is flagged divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// A differentiable log-density in unconstrained coordinates.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log-density. A
    /// non-finite return marks the point as outside the support.
    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Coordinates whose random initial values are drawn from `[0, r]`
    /// instead of `[−r, r]`.
    fn nonnegative_init(&self) -> std::ops::Range<usize> {
        0..0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algorithm {
    /// Static trajectory, leapfrog count jittered over `[L/2, 3L/2]`.
    Hmc { n_leapfrog: usize },
    /// Multinomial no-U-turn sampler.
    Nuts { max_depth: usize },
}

impl Default for Algorithm {
    fn default() -> Self {
        Self::Nuts { max_depth: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Uniform in `[-radius, radius]` per coordinate, retried until finite.
    #[default]
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// Total iterations per chain, warmup included.
    pub iterations: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub init: InitStrategy,
    pub init_radius: f64,
    pub max_init_attempts: usize,
    /// Run chains on the rayon pool; off means sequential.
    pub parallel: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            iterations: 2000,
            warmup: 1000,
            target_accept: 0.8,
            algorithm: Algorithm::default(),
            seed: 1,
            init: InitStrategy::Random,
            init_radius: 2.0,
            max_init_attempts: 100,
            parallel: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        if self.warmup >= self.iterations {
            return Err(Error::Config(format!(
                "warmup ({}) must be smaller than iterations ({})",
                self.warmup, self.iterations
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config("target_accept must lie in (0, 1)".into()));
        }
        match self.algorithm {
            Algorithm::Hmc { n_leapfrog: 0 } => return Err(Error::Config("n_leapfrog must be positive".into())),
            Algorithm::Nuts { max_depth: 0 } => return Err(Error::Config("max_depth must be positive".into())),
            _ => {}
        }
        if !(self.init_radius >= 0.0) || self.max_init_attempts == 0 {
            return Err(Error::Config("init_radius must be >= 0 and max_init_attempts > 0".into()));
        }
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        self.iterations - self.warmup
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// Row-major `[iteration][parameter]`, constrained scale.
    pub values: Vec<f64>,
    pub divergent: Vec<bool>,
    pub accept_stat: Vec<f64>,
    pub n_leapfrog: Vec<usize>,
    /// Step size used at each post-warmup iteration.
    pub step_size: Vec<f64>,
    pub warmup_divergences: usize,
    pub inv_metric: Vec<f64>,
}

/// Draws from all chains with parameter names.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    /// Post-warmup iterations per chain.
    pub fn n_draws(&self) -> usize {
        self.chains.first().map_or(0, |c| c.divergent.len())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// One parameter's draws, split by chain.
    pub fn param(&self, p: usize) -> Vec<Vec<f64>> {
        let k = self.n_params();
        self.chains.iter().map(|c| c.values.iter().skip(p).step_by(k).copied().collect()).collect()
    }

    pub fn value(&self, chain: usize, iter: usize, p: usize) -> f64 {
        self.chains[chain].values[iter * self.n_params() + p]
    }

    pub fn n_divergent(&self) -> usize {
        self.chains.iter().map(|c| c.divergent.iter().filter(|&&d| d).count()).sum()
    }
}

/// Runs `config.n_chains` chains on `model` and maps each kept draw through
/// `constrain`. Chain `c` uses ChaCha8 stream `c` of `config.seed`, so the
/// output is identical whether chains run in parallel or not.
pub fn run_chains<M, F>(
    model: &M,
    names: Vec<String>,
    constrain: F,
    config: &SamplerConfig,
    init: Option<&[f64]>,
) -> Result<PosteriorDraws>
where
    M: LogDensity + ?Sized,
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    config.validate()?;
    if let Some(x) = init {
        if x.len() != model.dim() {
            return Err(Error::Dimension(format!("initial point has {} values, model {}", x.len(), model.dim())));
        }
    }
    let run = |c: usize| run_chain(model, &constrain, names.len(), config, c, init);
    let chains: Vec<Result<ChainDraws>> = if config.parallel {
        (0..config.n_chains).into_par_iter().map(run).collect()
    } else {
        (0..config.n_chains).map(run).collect()
    };
    Ok(PosteriorDraws { names, chains: chains.into_iter().collect::<Result<_>>()? })
}

/// RNG for one chain: stream `chain` of the base seed.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

// ============================================================================
// Phase-space state and integrator
// ============================================================================

#[derive(Clone)]
struct State {
    q: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

impl State {
    fn at<M: LogDensity + ?Sized>(model: &M, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let logp = model.log_density_and_gradient(&q, &mut grad);
        Self { q, grad, logp }
    }

    fn is_valid(&self) -> bool {
        self.logp.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
}

fn kinetic(p: &[f64], inv_metric: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
}

fn hamiltonian(s: &State, p: &[f64], inv_metric: &[f64]) -> f64 {
    let h = -s.logp + kinetic(p, inv_metric);
    if h.is_nan() {
        f64::INFINITY
    } else {
        h
    }
}

fn leapfrog<M: LogDensity + ?Sized>(model: &M, s: &mut State, p: &mut [f64], inv_metric: &[f64], eps: f64) {
    for (pi, g) in p.iter_mut().zip(&s.grad) {
        *pi += 0.5 * eps * g;
    }
    for ((qi, pi), m) in s.q.iter_mut().zip(p.iter()).zip(inv_metric) {
        *qi += eps * m * pi;
    }
    s.logp = model.log_density_and_gradient(&s.q, &mut s.grad);
    if !s.logp.is_finite() {
        s.logp = f64::NEG_INFINITY;
        return;
    }
    for (pi, g) in p.iter_mut().zip(&s.grad) {
        *pi += 0.5 * eps * g;
    }
}

fn sample_momentum<R: Rng + ?Sized>(rng: &mut R, inv_metric: &[f64]) -> Vec<f64> {
    inv_metric
        .iter()
        .map(|m| {
            let z: f64 = rng.sample(StandardNormal);
            z / m.sqrt()
        })
        .collect()
}

/// Largest `|H − H₀|` along a deterministic leapfrog trajectory.
pub fn trajectory_energy_error<M: LogDensity + ?Sized>(
    model: &M,
    q: &[f64],
    p: &[f64],
    inv_metric: &[f64],
    step_size: f64,
    n_steps: usize,
) -> f64 {
    let mut s = State::at(model, q.to_vec());
    let mut p = p.to_vec();
    let h0 = hamiltonian(&s, &p, inv_metric);
    let mut worst: f64 = 0.0;
    for _ in 0..n_steps {
        leapfrog(model, &mut s, &mut p, inv_metric, step_size);
        worst = worst.max((hamiltonian(&s, &p, inv_metric) - h0).abs());
    }
    worst
}

// ============================================================================
// Transitions
// ============================================================================

struct Transition {
    accept_stat: f64,
    n_leapfrog: usize,
    divergent: bool,
}

fn hmc_transition<M: LogDensity + ?Sized, R: Rng + ?Sized>(
    model: &M,
    s: &mut State,
    inv_metric: &[f64],
    eps: f64,
    base_steps: usize,
    rng: &mut R,
) -> Transition {
    let lo = (base_steps / 2).max(1);
    let hi = (base_steps + base_steps / 2).max(lo);
    let steps = rng.random_range(lo..=hi);
    let mut p = sample_momentum(rng, inv_metric);
    let h0 = hamiltonian(s, &p, inv_metric);
    let mut prop = s.clone();
    let mut divergent = false;
    let mut taken = 0;
    for _ in 0..steps {
        leapfrog(model, &mut prop, &mut p, inv_metric, eps);
        taken += 1;
        if hamiltonian(&prop, &p, inv_metric) - h0 > DIVERGENCE_THRESHOLD {
            divergent = true;
            break;
        }
    }
    let (accept_stat, accepted) = if divergent {
        (0.0, false)
    } else {
        let log_ratio = h0 - hamiltonian(&prop, &p, inv_metric);
        let a = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
        (a, rng.random::<f64>() < a)
    };
    if accepted {
        *s = prop;
    }
    Transition { accept_stat, n_leapfrog: taken, divergent }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn u_turn_free(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

/// Mutable trajectory state shared by the tree builder.
struct Nuts<'a, M: ?Sized> {
    model: &'a M,
    inv_metric: &'a [f64],
    eps: f64,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

/// Endpoint momenta and summed momentum of a subtree.
struct Edge {
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
    rho: Vec<f64>,
    log_sum_weight: f64,
}

impl<M: LogDensity + ?Sized> Nuts<'_, M> {
    fn sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(self.inv_metric).map(|(p, m)| p * m).collect()
    }

    /// Builds a subtree of `2^depth` leapfrog steps in direction `sign`,
    /// continuing from `(z, p)`. Returns the proposal and edge data, or
    /// `None` if the subtree diverged or turned back on itself.
    fn build<R: Rng + ?Sized>(
        &mut self,
        depth: usize,
        z: &mut State,
        p: &mut Vec<f64>,
        sign: f64,
        rng: &mut R,
    ) -> Option<(State, Edge)> {
        if depth == 0 {
            leapfrog(self.model, z, p, self.inv_metric, sign * self.eps);
            self.n_leapfrog += 1;
            let h = hamiltonian(z, p, self.inv_metric);
            if h - self.h0 > DIVERGENCE_THRESHOLD {
                self.divergent = true;
            }
            let w = self.h0 - h;
            self.sum_metro_prob += if w > 0.0 { 1.0 } else { w.exp() };
            if self.divergent {
                return None;
            }
            let ps = self.sharp(p);
            let edge = Edge {
                p_sharp_beg: ps.clone(),
                p_sharp_end: ps,
                p_beg: p.clone(),
                p_end: p.clone(),
                rho: p.clone(),
                log_sum_weight: w,
            };
            return Some((z.clone(), edge));
        }
        let (left_prop, left) = self.build(depth - 1, z, p, sign, rng)?;
        let (right_prop, right) = self.build(depth - 1, z, p, sign, rng)?;
        let lsw = log_sum_exp(left.log_sum_weight, right.log_sum_weight);
        let accept = right.log_sum_weight - lsw;
        let prop = if accept >= 0.0 || rng.random::<f64>() < accept.exp() { right_prop } else { left_prop };
        let rho = add(&left.rho, &right.rho);
        let mut persist = u_turn_free(&left.p_sharp_beg, &right.p_sharp_end, &rho);
        persist &= u_turn_free(&left.p_sharp_beg, &right.p_sharp_beg, &add(&left.rho, &right.p_beg));
        persist &= u_turn_free(&left.p_sharp_end, &right.p_sharp_end, &add(&right.rho, &left.p_end));
        if !persist {
            return None;
        }
        Some((
            prop,
            Edge {
                p_sharp_beg: left.p_sharp_beg,
                p_sharp_end: right.p_sharp_end,
                p_beg: left.p_beg,
                p_end: right.p_end,
                rho,
                log_sum_weight: lsw,
            },
        ))
    }
}

fn nuts_transition<M: LogDensity + ?Sized, R: Rng + ?Sized>(
    model: &M,
    s: &mut State,
    inv_metric: &[f64],
    eps: f64,
    max_depth: usize,
    rng: &mut R,
) -> Transition {
    let p0 = sample_momentum(rng, inv_metric);
    let h0 = hamiltonian(s, &p0, inv_metric);
    let mut nuts = Nuts { model, inv_metric, eps, h0, n_leapfrog: 0, sum_metro_prob: 0.0, divergent: false };
    let ps0 = nuts.sharp(&p0);

    // Backward (bck) and forward (fwd) ends of the whole trajectory.
    let mut z_fwd = s.clone();
    let mut z_bck = s.clone();
    let mut p_fwd = p0.clone();
    let mut p_bck = p0.clone();
    let (mut ps_fwd_end, mut ps_bck_end) = (ps0.clone(), ps0);
    let (mut p_fwd_end, mut p_bck_end) = (p0.clone(), p0.clone());
    let mut rho = p0;
    let mut log_sum_weight = 0.0;
    let mut sample = s.clone();

    for depth in 0..max_depth {
        let forward = rng.random::<f64>() > 0.5;
        let (z, p, sign) = if forward { (&mut z_fwd, &mut p_fwd, 1.0) } else { (&mut z_bck, &mut p_bck, -1.0) };
        let Some((prop, sub)) = nuts.build(depth, z, p, sign, rng) else {
            break;
        };
        let accept = sub.log_sum_weight - log_sum_weight;
        if accept >= 0.0 || rng.random::<f64>() < accept.exp() {
            sample = prop;
        }
        log_sum_weight = log_sum_exp(log_sum_weight, sub.log_sum_weight);

        // Orient the old tree and the new subtree as (bck-side, fwd-side).
        let (rho_bck, rho_fwd, ps_bck_inner, ps_fwd_inner, p_bck_inner, p_fwd_inner);
        if forward {
            rho_bck = rho.clone();
            rho_fwd = sub.rho.clone();
            ps_bck_inner = ps_fwd_end.clone();
            ps_fwd_inner = sub.p_sharp_beg.clone();
            p_bck_inner = p_fwd_end.clone();
            p_fwd_inner = sub.p_beg.clone();
            ps_fwd_end = sub.p_sharp_end;
            p_fwd_end = sub.p_end;
        } else {
            rho_bck = sub.rho.clone();
            rho_fwd = rho.clone();
            ps_bck_inner = sub.p_sharp_beg.clone();
            ps_fwd_inner = ps_bck_end.clone();
            p_bck_inner = sub.p_beg.clone();
            p_fwd_inner = p_bck_end.clone();
            ps_bck_end = sub.p_sharp_end;
            p_bck_end = sub.p_end;
        }
        rho = add(&rho_bck, &rho_fwd);
        // `*_end` hold the outermost momenta on each side; in the backward
        // direction the subtree's "end" is its outermost point.
        let mut persist = u_turn_free(&ps_bck_end, &ps_fwd_end, &rho);
        persist &= u_turn_free(&ps_bck_end, &ps_fwd_inner, &add(&rho_bck, &p_fwd_inner));
        persist &= u_turn_free(&ps_bck_inner, &ps_fwd_end, &add(&rho_fwd, &p_bck_inner));
        if !persist {
            break;
        }
    }
    *s = sample;
    let accept_stat = if nuts.n_leapfrog > 0 { nuts.sum_metro_prob / nuts.n_leapfrog as f64 } else { 0.0 };
    Transition { accept_stat, n_leapfrog: nuts.n_leapfrog, divergent: nuts.divergent }
}

// ============================================================================
// Adaptation
// ============================================================================

/// Dual-averaging step-size adaptation.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
}

impl DualAveraging {
    pub fn new(step_size: f64, target: f64) -> Self {
        Self { mu: (10.0 * step_size).ln(), target, counter: 0.0, s_bar: 0.0, x_bar: 0.0, gamma: 0.05, t0: 10.0, kappa: 0.75 }
    }

    pub fn restart(&mut self, step_size: f64) {
        *self = Self::new(step_size, self.target);
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        let a = if accept_stat.is_finite() { accept_stat.min(1.0) } else { 0.0 };
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - a);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let w = self.counter.powf(-self.kappa);
        self.x_bar = w * x + (1.0 - w) * self.x_bar;
        x.exp()
    }

    /// Step size to use after adaptation ends.
    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Warmup schedule: initial buffer, doubling slow windows, terminal buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSchedule {
    /// Iteration indices (0-based) at which a slow window ends.
    pub window_ends: Vec<usize>,
    pub init_buffer: usize,
    pub term_buffer: usize,
}

impl WindowSchedule {
    pub fn new(warmup: usize) -> Self {
        let (mut init, mut term, mut base) = (75, 50, 25);
        if warmup < 20 {
            return Self { window_ends: Vec::new(), init_buffer: warmup, term_buffer: 0 };
        }
        if init + term + base > warmup {
            init = (0.15 * warmup as f64) as usize;
            term = (0.1 * warmup as f64) as usize;
            base = warmup - init - term;
        }
        let last = warmup - term;
        let mut ends = Vec::new();
        let mut start = init;
        let mut size = base;
        while start < last {
            let mut end = start + size;
            if end + 2 * size > last {
                end = last;
            }
            ends.push(end - 1);
            start = end;
            size *= 2;
        }
        Self { window_ends: ends, init_buffer: init, term_buffer: term }
    }

    fn in_slow_window(&self, iter: usize, warmup: usize) -> bool {
        !self.window_ends.is_empty() && iter >= self.init_buffer && iter < warmup - self.term_buffer
    }
}

/// Running mean and variance (Welford).
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Self { n: 0.0, mean: vec![0.0; d], m2: vec![0.0; d] }
    }

    fn add(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    /// Regularized variance, shrunk toward `1e-3`.
    fn metric(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|s| (n / (n + 5.0)) * (s / (n - 1.0)) + 1e-3 * (5.0 / (n + 5.0)))
            .collect()
    }
}

/// Doubles or halves the step size until one leapfrog step's acceptance
/// crosses 0.8.
fn heuristic_step_size<M: LogDensity + ?Sized, R: Rng + ?Sized>(
    model: &M,
    s: &State,
    inv_metric: &[f64],
    mut eps: f64,
    rng: &mut R,
) -> f64 {
    let p0 = sample_momentum(rng, inv_metric);
    let h0 = hamiltonian(s, &p0, inv_metric);
    let trial = |eps: f64| {
        let mut z = s.clone();
        let mut p = p0.clone();
        leapfrog(model, &mut z, &mut p, inv_metric, eps);
        let dh = h0 - hamiltonian(&z, &p, inv_metric);
        if dh.is_nan() {
            f64::NEG_INFINITY
        } else {
            dh
        }
    };
    let direction = if trial(eps) > 0.8f64.ln() { 1 } else { -1 };
    for _ in 0..100 {
        eps = if direction == 1 { 2.0 * eps } else { 0.5 * eps };
        if !(1e-10..=1e5).contains(&eps) {
            break;
        }
        let dh = trial(eps);
        if (direction == 1 && !(dh > 0.8f64.ln())) || (direction == -1 && dh > 0.8f64.ln()) {
            break;
        }
    }
    eps.clamp(1e-10, 1e5)
}

/// Finds a starting point with finite density and gradient.
pub fn initialize<M: LogDensity + ?Sized, R: Rng + ?Sized>(
    model: &M,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = model.dim();
    let mut grad = vec![0.0; d];
    if config.init == InitStrategy::Zero {
        let q = vec![0.0; d];
        let lp = model.log_density_and_gradient(&q, &mut grad);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(q);
        }
        return Err(Error::Sampler("log density is not finite at the zero initial point".into()));
    }
    let r = config.init_radius;
    let positive = model.nonnegative_init();
    for _ in 0..config.max_init_attempts {
        let q: Vec<f64> = (0..d)
            .map(|i| match (r > 0.0, positive.contains(&i)) {
                (false, _) => 0.0,
                (true, false) => rng.random_range(-r..=r),
                (true, true) => rng.random_range(0.0..=r),
            })
            .collect();
        let lp = model.log_density_and_gradient(&q, &mut grad);
        if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok(q);
        }
    }
    Err(Error::Sampler(format!(
        "no initial point with finite log density after {} attempts in [-{r}, {r}]",
        config.max_init_attempts
    )))
}

fn run_chain<M, F>(
    model: &M,
    constrain: &F,
    n_params: usize,
    config: &SamplerConfig,
    chain: usize,
    init: Option<&[f64]>,
) -> Result<ChainDraws>
where
    M: LogDensity + ?Sized,
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut rng = chain_rng(config.seed, chain);
    let q0 = match init {
        Some(x) => x.to_vec(),
        None => initialize(model, config, &mut rng)?,
    };
    let mut state = State::at(model, q0);
    if !state.is_valid() {
        return Err(Error::Sampler(format!("chain {chain}: initial point has non-finite log density")));
    }
    let d = model.dim();
    let mut inv_metric = vec![1.0; d];
    let mut eps = heuristic_step_size(model, &state, &inv_metric, 1.0, &mut rng);
    let mut da = DualAveraging::new(eps, config.target_accept);
    let schedule = WindowSchedule::new(config.warmup);
    let mut welford = Welford::new(d);
    let mut next_window = 0;

    let n_keep = config.n_draws();
    let mut out = ChainDraws {
        values: Vec::with_capacity(n_keep * n_params),
        divergent: Vec::with_capacity(n_keep),
        accept_stat: Vec::with_capacity(n_keep),
        n_leapfrog: Vec::with_capacity(n_keep),
        step_size: Vec::with_capacity(n_keep),
        warmup_divergences: 0,
        inv_metric: Vec::new(),
    };

    for iter in 0..config.iterations {
        let t = match config.algorithm {
            Algorithm::Hmc { n_leapfrog } => hmc_transition(model, &mut state, &inv_metric, eps, n_leapfrog, &mut rng),
            Algorithm::Nuts { max_depth } => nuts_transition(model, &mut state, &inv_metric, eps, max_depth, &mut rng),
        };
        if iter < config.warmup {
            if t.divergent {
                out.warmup_divergences += 1;
            }
            eps = da.update(t.accept_stat);
            if schedule.in_slow_window(iter, config.warmup) {
                welford.add(&state.q);
                if next_window < schedule.window_ends.len() && iter == schedule.window_ends[next_window] {
                    inv_metric = welford.metric();
                    welford = Welford::new(d);
                    next_window += 1;
                    eps = heuristic_step_size(model, &state, &inv_metric, eps, &mut rng);
                    da.restart(eps);
                }
            }
            if iter + 1 == config.warmup {
                eps = da.final_step_size();
            }
            continue;
        }
        let v = constrain(&state.q);
        debug_assert_eq!(v.len(), n_params);
        out.values.extend_from_slice(&v);
        out.divergent.push(t.divergent);
        out.accept_stat.push(t.accept_stat);
        out.n_leapfrog.push(t.n_leapfrog);
        out.step_size.push(eps);
    }
    out.inv_metric = inv_metric;
    Ok(out)
}
