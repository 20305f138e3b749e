//! Monte Carlo estimators and scaling fits.
//!
//! Every estimate records its seed and is a pure function of
//! `(seed, parameters)`; trial `t` always uses stream `t` of its domain.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::leq_strong_raw;
use crate::parallel::Executor;
use crate::rng::StreamKey;
use crate::zproc::{box_min_z, sample_pair};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Results with fewer successes than this are flagged and left out of fits.
pub const LOW_COUNT_FLOOR: u64 = 20;

/// Largest `n` the comparability estimator accepts without `force`.
pub const NAIVE_MC_CAP: usize = 64;

/// Wilson score interval at the 95% level.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let hi = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    (lo, hi)
}

/// Point estimate of a probability with its Wilson interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub n: usize,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Seconds; excluded from data files so that they stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl EstimateResult {
    pub fn from_counts(n: usize, successes: u64, trials: u64, seed: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials);
        Self {
            n,
            trials,
            successes,
            p_hat: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_low,
            ci_high,
            seed,
            wall_time: 0.0,
        }
    }

    /// Fewer than [`LOW_COUNT_FLOOR`] successes.
    pub fn low_count(&self) -> bool {
        self.successes < LOW_COUNT_FLOOR
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    /// Delta-method variance of `ln p̂`: `(1 − p̂) / (trials · p̂)`.
    pub fn ln_variance(&self) -> f64 {
        (1.0 - self.p_hat) / (self.trials as f64 * self.p_hat)
    }

    fn timed(mut self, start: Instant) -> Self {
        self.wall_time = start.elapsed().as_secs_f64();
        self
    }
}

/// Fraction of uniform pairs `(π, τ)` with `π ≤ τ`.
pub fn estimate_comparability(n: usize, trials: u64, seed: u64, exec: &Executor) -> Result<EstimateResult> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let start = Instant::now();
    let successes = count_comparable(n, 0, trials, StreamKey::new(seed), exec);
    Ok(EstimateResult::from_counts(n, successes, trials, seed).timed(start))
}

fn count_comparable(n: usize, first: u64, count: u64, key: StreamKey, exec: &Executor) -> u64 {
    let key = key.domain("comparability");
    exec.blocks(first, count, |lo, hi| {
        let (mut p, mut t) = (vec![0u32; n], vec![0u32; n]);
        let mut scratch = Vec::with_capacity(n + 1);
        (lo..hi)
            .filter(|&trial| {
                sample_pair(&mut p, &mut t, &mut key.trial(trial));
                leq_strong_raw(&p, &t, &mut scratch)
            })
            .count() as u64
    })
    .into_iter()
    .sum()
}

/// Trials per round of the adaptive estimator.
pub const ADAPTIVE_ROUND: u64 = 1 << 20;

/// Runs rounds of [`ADAPTIVE_ROUND`] trials until at least `min_successes`
/// are observed or `max_trials` is spent. Round boundaries are fixed, so
/// the stopping point is reproducible.
pub fn estimate_comparability_until(
    n: usize,
    min_successes: u64,
    max_trials: u64,
    seed: u64,
    exec: &Executor,
) -> Result<EstimateResult> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    let start = Instant::now();
    let key = StreamKey::new(seed);
    let (mut successes, mut trials) = (0, 0);
    while successes < min_successes && trials < max_trials {
        let take = ADAPTIVE_ROUND.min(max_trials - trials);
        successes += count_comparable(n, trials, take, key, exec);
        trials += take;
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("max_trials must be positive".into()));
    }
    Ok(EstimateResult::from_counts(n, successes, trials, seed).timed(start))
}

/// Per-trial `min Z` over the box `[x,⌊5x/4⌋] × [y,⌊5y/4⌋]`.
pub fn box_minima(n: usize, x: usize, y: usize, trials: u64, seed: u64, exec: &Executor) -> Result<Vec<i64>> {
    if n < 2 || x == 0 || y == 0 || 2 * x > n || 2 * y > n {
        return Err(Error::OutOfBounds(format!(
            "need 1 <= x, y <= n/2, got x={x} y={y} n={n}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let key = StreamKey::new(seed).domain("box-persistence");
    Ok(exec.map_trials(trials, |trial| {
        let (mut p, mut t) = (vec![0u32; n], vec![0u32; n]);
        sample_pair(&mut p, &mut t, &mut key.trial(trial));
        box_min_z(&p, &t, x, y)
    }))
}

/// `P(min_{box} Z(a, b) ≥ −c_log · ln n)`.
pub fn estimate_box_persistence(
    n: usize,
    x: usize,
    y: usize,
    c_log: f64,
    trials: u64,
    seed: u64,
    exec: &Executor,
) -> Result<EstimateResult> {
    if !(c_log >= 0.0) {
        return Err(Error::InvalidParameter(format!("c_log must be >= 0, got {c_log}")));
    }
    let start = Instant::now();
    let minima = box_minima(n, x, y, trials, seed, exec)?;
    Ok(box_persistence_from_minima(n, &minima, c_log, seed).timed(start))
}

/// Thresholds precomputed minima, so several levels share one set of trials.
pub fn box_persistence_from_minima(n: usize, minima: &[i64], c_log: f64, seed: u64) -> EstimateResult {
    let level = -c_log * (n as f64).ln();
    let successes = minima.iter().filter(|&&m| m as f64 >= level).count() as u64;
    EstimateResult::from_counts(n, successes, minima.len() as u64, seed)
}

/// Weighted least-squares fit of `−ln p̂(n) ≈ α (ln n)² + β ln n + γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub alpha_se: f64,
    pub beta_se: f64,
    pub gamma_se: f64,
    /// `(n, observed − fitted)` for every point used.
    pub residuals: Vec<(usize, f64)>,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    pub chi_square: f64,
    /// Polynomial-decay submodel `−ln p̂ ≈ β ln n + γ`.
    pub sub_beta: f64,
    pub sub_gamma: f64,
    pub sub_chi_square: f64,
    /// Small-sample corrected AIC of the full model (None when undefined).
    pub aicc_full: Option<f64>,
    pub aicc_sub: Option<f64>,
    /// "log-squared" or "polynomial", by AICc; informational only.
    pub preferred: String,
    /// Sizes left out: zero estimates, certain events or low counts.
    pub excluded: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub include_low_count: bool,
}

struct Wls {
    coef: Vec<f64>,
    se: Vec<f64>,
    chi_square: f64,
    r_squared: f64,
    fitted: Vec<f64>,
}

/// Weighted least squares with known variances; standard errors are
/// inflated by the Birge ratio when the fit is worse than the noise.
fn wls(design: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Wls> {
    let m = y.len();
    let k = design[0].len();
    let a = DMatrix::from_fn(m, k, |i, j| design[i][j] * w[i].sqrt());
    let b = DVector::from_fn(m, |i, _| y[i] * w[i].sqrt());
    let normal = a.transpose() * &a;
    let cov = normal
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("design matrix is singular".into()))?;
    let svd = a.clone().svd(true, true);
    let coef = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Degenerate(format!("least squares failed: {e}")))?;
    let fitted: Vec<f64> = (0..m).map(|i| (0..k).map(|j| design[i][j] * coef[j]).sum()).collect();
    let chi_square: f64 = (0..m).map(|i| w[i] * (y[i] - fitted[i]).powi(2)).sum();
    let wsum: f64 = w.iter().sum();
    let ybar = (0..m).map(|i| w[i] * y[i]).sum::<f64>() / wsum;
    let tss: f64 = (0..m).map(|i| w[i] * (y[i] - ybar).powi(2)).sum();
    let r_squared = if tss > 0.0 { (1.0 - chi_square / tss).clamp(0.0, 1.0) } else { 1.0 };
    let dof = m.saturating_sub(k);
    let birge = if dof > 0 { (chi_square / dof as f64).max(1.0) } else { 1.0 };
    let se = (0..k).map(|j| (cov[(j, j)] * birge).sqrt()).collect();
    Ok(Wls {
        coef: coef.iter().copied().collect(),
        se,
        chi_square,
        r_squared,
        fitted,
    })
}

fn aicc(chi_square: f64, points: usize, params: usize) -> Option<f64> {
    let denom = points as i64 - params as i64 - 1;
    (denom > 0).then(|| {
        chi_square + 2.0 * params as f64 + 2.0 * (params * (params + 1)) as f64 / denom as f64
    })
}

/// Fits the log-squared decay model to estimates over a grid of sizes.
pub fn fit_scaling(results: &[EstimateResult], opts: &FitOptions) -> Result<ScalingFit> {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        let usable = r.p_hat > 0.0 && r.p_hat < 1.0 && (opts.include_low_count || !r.low_count());
        if usable {
            used.push(r);
        } else {
            tracing::warn!(n = r.n, successes = r.successes, "excluding point from scaling fit");
            excluded.push(r.n);
        }
    }
    let mut sizes: Vec<usize> = used.iter().map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 {
        return Err(Error::Degenerate(format!(
            "scaling fit needs at least 4 distinct sizes, got {}",
            sizes.len()
        )));
    }
    let y: Vec<f64> = used.iter().map(|r| -r.p_hat.ln()).collect();
    let w: Vec<f64> = used.iter().map(|r| 1.0 / r.ln_variance()).collect();
    let full: Vec<Vec<f64>> = used
        .iter()
        .map(|r| {
            let l = (r.n as f64).ln();
            vec![l * l, l, 1.0]
        })
        .collect();
    let sub: Vec<Vec<f64>> = used.iter().map(|r| vec![(r.n as f64).ln(), 1.0]).collect();
    let f = wls(&full, &y, &w)?;
    let s = wls(&sub, &y, &w)?;
    let m = y.len();
    let aicc_full = aicc(f.chi_square, m, 3);
    let aicc_sub = aicc(s.chi_square, m, 2);
    let preferred = match (aicc_full, aicc_sub) {
        (Some(a), Some(b)) if a < b => "log-squared",
        (None, Some(_)) => "polynomial",
        (Some(_), None) => "log-squared",
        _ => "polynomial",
    };
    Ok(ScalingFit {
        alpha: f.coef[0],
        beta: f.coef[1],
        gamma: f.coef[2],
        alpha_se: f.se[0],
        beta_se: f.se[1],
        gamma_se: f.se[2],
        residuals: used.iter().zip(&y).zip(&f.fitted).map(|((r, yi), fi)| (r.n, yi - fi)).collect(),
        r_squared: f.r_squared,
        chi_square: f.chi_square,
        sub_beta: s.coef[0],
        sub_gamma: s.coef[1],
        sub_chi_square: s.chi_square,
        aicc_full,
        aicc_sub,
        preferred: preferred.to_string(),
        excluded,
    })
}

/// Increment law of a discrete sheet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SheetMode {
    /// i.i.d. standard normal increments.
    Gaussian,
    /// `ζ = B − B'` for independent `Bernoulli(p)`: `±1` with probability
    /// `p(1 − p)` each. Increments are divided by `√(2p(1 − p))` so the
    /// sheet has unit-variance increments like the Gaussian one.
    Zeta { p: f64 },
}

impl SheetMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SheetMode::Gaussian => Ok(()),
            SheetMode::Zeta { p } if p > 0.0 && p <= 0.5 => Ok(()),
            SheetMode::Zeta { p } => Err(Error::InvalidParameter(format!("zeta mode needs p in (0, 1/2], got {p}"))),
        }
    }

    /// Variance of a raw increment before normalization.
    pub fn raw_variance(&self) -> f64 {
        match *self {
            SheetMode::Gaussian => 1.0,
            SheetMode::Zeta { p } => 2.0 * p * (1.0 - p),
        }
    }

    /// `p = 1/m²`, the default sparsity for a grid of side `m`.
    pub fn zeta_default(m: usize) -> Self {
        SheetMode::Zeta { p: 1.0 / (m * m) as f64 }
    }

    pub fn label(&self) -> String {
        match *self {
            SheetMode::Gaussian => "gaussian".into(),
            SheetMode::Zeta { p } => format!("zeta(p={p})"),
        }
    }
}

/// Increment sampler for a sheet mode.
#[derive(Clone, Copy)]
enum Increments {
    Gaussian,
    Zeta { q: f64, scale: f64 },
}

impl Increments {
    fn new(mode: SheetMode) -> Self {
        match mode {
            SheetMode::Gaussian => Increments::Gaussian,
            SheetMode::Zeta { p } => Increments::Zeta {
                q: p * (1.0 - p),
                scale: 1.0 / (2.0 * p * (1.0 - p)).sqrt(),
            },
        }
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Increments::Gaussian => rng.sample(StandardNormal),
            Increments::Zeta { q, scale } => {
                let u: f64 = rng.random();
                if u < q {
                    scale
                } else if u < 2.0 * q {
                    -scale
                } else {
                    0.0
                }
            }
        }
    }
}

/// Whether `min_{a,b ≤ m} G(a, b) ≥ −threshold` for one sheet, generating
/// increments row by row and stopping at the first violation.
fn sheet_survives<R: Rng + ?Sized>(m: usize, threshold: f64, inc: Increments, col: &mut [f64], rng: &mut R) -> bool {
    col.fill(0.0);
    for _ in 0..m {
        let mut row = 0.0;
        for c in col.iter_mut() {
            row += inc.draw(rng);
            *c += row;
            if *c < -threshold {
                return false;
            }
        }
    }
    true
}

/// `P(min_{a,b ≤ m} G(a, b) ≥ −threshold)` for a discrete sheet.
pub fn sheet_persistence(
    m: usize,
    threshold: f64,
    trials: u64,
    seed: u64,
    mode: SheetMode,
    exec: &Executor,
) -> Result<EstimateResult> {
    if m == 0 {
        return Err(Error::InvalidSize(0));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    mode.validate()?;
    let start = Instant::now();
    let successes = count_sheet_survivors(m, threshold, 0, trials, StreamKey::new(seed), mode, exec);
    Ok(EstimateResult::from_counts(m, successes, trials, seed).timed(start))
}

fn count_sheet_survivors(
    m: usize,
    threshold: f64,
    first: u64,
    count: u64,
    key: StreamKey,
    mode: SheetMode,
    exec: &Executor,
) -> u64 {
    let key = key.domain(&format!("sheet-{}", mode.label()));
    let inc = Increments::new(mode);
    exec.blocks(first, count, |lo, hi| {
        let mut col = vec![0.0; m];
        (lo..hi)
            .filter(|&t| sheet_survives(m, threshold, inc, &mut col, &mut key.trial(t)))
            .count() as u64
    })
    .into_iter()
    .sum()
}

/// Sheet persistence in rounds until `min_successes` or `max_trials`.
pub fn sheet_persistence_until(
    m: usize,
    threshold: f64,
    min_successes: u64,
    max_trials: u64,
    seed: u64,
    mode: SheetMode,
    exec: &Executor,
) -> Result<EstimateResult> {
    if m == 0 {
        return Err(Error::InvalidSize(0));
    }
    mode.validate()?;
    let start = Instant::now();
    let key = StreamKey::new(seed);
    let (mut successes, mut trials) = (0, 0);
    while successes < min_successes && trials < max_trials {
        let take = ADAPTIVE_ROUND.min(max_trials - trials);
        successes += count_sheet_survivors(m, threshold, trials, take, key, mode, exec);
        trials += take;
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("max_trials must be positive".into()));
    }
    Ok(EstimateResult::from_counts(m, successes, trials, seed).timed(start))
}

/// `G(m, m) / (m σ)` for independent sheets, `σ²` the raw increment variance.
pub fn sheet_corner_sample(m: usize, trials: u64, seed: u64, mode: SheetMode, exec: &Executor) -> Result<Vec<f64>> {
    mode.validate()?;
    let key = StreamKey::new(seed).domain(&format!("sheet-corner-{}", mode.label()));
    let inc = Increments::new(mode);
    Ok(exec.map_trials(trials, |t| {
        let mut rng = key.trial(t);
        (0..m * m).map(|_| inc.draw(&mut rng)).sum::<f64>() / m as f64
    }))
}

/// How a sheet persistence probability was estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SheetMethod {
    /// Independent sheets, counting survivors.
    Naive { trials: u64 },
    /// Row-by-row particle splitting: `runs` independent populations of
    /// `particles` sheets each.
    Splitting { particles: usize, runs: usize },
}

/// Sheet persistence estimate with an uncertainty on the log scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetEstimate {
    pub m: usize,
    pub threshold: f64,
    pub mode: SheetMode,
    pub method: SheetMethod,
    pub p_hat: f64,
    /// Standard error of `ln p̂`.
    pub ln_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Sheets that survived every row: successes for the naive method,
    /// final-stage survivors summed over runs for splitting.
    pub successes: u64,
    pub seed: u64,
    #[serde(skip)]
    pub wall_time: f64,
}

impl SheetEstimate {
    pub fn from_naive(r: &EstimateResult, threshold: f64, mode: SheetMode) -> Self {
        Self {
            m: r.n,
            threshold,
            mode,
            method: SheetMethod::Naive { trials: r.trials },
            p_hat: r.p_hat,
            ln_se: if r.p_hat > 0.0 { r.ln_variance().sqrt() } else { f64::INFINITY },
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            successes: r.successes,
            seed: r.seed,
            wall_time: r.wall_time,
        }
    }
}

/// Naive estimate, or splitting when naive sampling would need more than
/// `max_trials` to see `min_successes`.
pub fn sheet_estimate(
    m: usize,
    threshold: f64,
    method: SheetMethod,
    seed: u64,
    mode: SheetMode,
    exec: &Executor,
) -> Result<SheetEstimate> {
    match method {
        SheetMethod::Naive { trials } => {
            let r = sheet_persistence(m, threshold, trials, seed, mode, exec)?;
            Ok(SheetEstimate::from_naive(&r, threshold, mode))
        }
        SheetMethod::Splitting { particles, runs } => {
            sheet_persistence_splitting(m, threshold, particles, runs, seed, mode, exec)
        }
    }
}

/// One splitting run; returns `(ln of the product of survival fractions,
/// survivors at the last row)`.
fn splitting_run<R: Rng + ?Sized>(m: usize, threshold: f64, particles: usize, inc: Increments, rng: &mut R) -> (f64, u64) {
    let mut pop = vec![0.0f64; particles * m];
    let mut next = vec![0.0f64; particles * m];
    let mut alive = Vec::with_capacity(particles);
    let mut ln_p = 0.0;
    for row in 0..m {
        alive.clear();
        for (i, col) in pop.chunks_exact_mut(m).enumerate() {
            let mut acc = 0.0;
            let mut ok = true;
            for c in col.iter_mut() {
                acc += inc.draw(rng);
                *c += acc;
                if *c < -threshold {
                    ok = false;
                    break;
                }
            }
            if ok {
                alive.push(i);
            }
        }
        if alive.is_empty() {
            return (f64::NEG_INFINITY, 0);
        }
        ln_p += (alive.len() as f64 / particles as f64).ln();
        if row + 1 == m {
            return (ln_p, alive.len() as u64);
        }
        // Multinomial resampling keeps the product of fractions unbiased.
        for dst in next.chunks_exact_mut(m) {
            let src = alive[rng.random_range(0..alive.len())];
            dst.copy_from_slice(&pop[src * m..(src + 1) * m]);
        }
        std::mem::swap(&mut pop, &mut next);
    }
    (ln_p, particles as u64)
}

/// Sheet persistence by row-by-row splitting. The sheet is Markov in its
/// row index (the state is the current row of partial sums), so survival
/// of all `m` rows factors into per-row conditional survival fractions.
/// Each run's product is unbiased; runs are averaged and the spread
/// between runs gives the standard error.
pub fn sheet_persistence_splitting(
    m: usize,
    threshold: f64,
    particles: usize,
    runs: usize,
    seed: u64,
    mode: SheetMode,
    exec: &Executor,
) -> Result<SheetEstimate> {
    if m == 0 {
        return Err(Error::InvalidSize(0));
    }
    if particles < 2 || runs < 2 {
        return Err(Error::InvalidParameter("splitting needs at least 2 particles and 2 runs".into()));
    }
    mode.validate()?;
    let start = Instant::now();
    let key = StreamKey::new(seed).domain(&format!("sheet-split-{}", mode.label()));
    let inc = Increments::new(mode);
    let per_run = exec.map_trials(runs as u64, |r| splitting_run(m, threshold, particles, inc, &mut key.trial(r)));
    let values: Vec<f64> = per_run.iter().map(|(l, _)| l.exp()).collect();
    let successes = per_run.iter().map(|(_, s)| s).sum();
    let k = runs as f64;
    let p_hat = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - p_hat).powi(2)).sum::<f64>() / (k - 1.0) / k;
    let ln_se = if p_hat > 0.0 { var.sqrt() / p_hat } else { f64::INFINITY };
    let (ci_low, ci_high) = if p_hat > 0.0 {
        (p_hat * (-Z95 * ln_se).exp(), (p_hat * (Z95 * ln_se).exp()).min(1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(SheetEstimate {
        m,
        threshold,
        mode,
        method: SheetMethod::Splitting { particles, runs },
        p_hat,
        ln_se,
        ci_low,
        ci_high,
        successes,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Slope of `−ln p̂` against `(ln m)²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiFit {
    pub psi_hat: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub sizes: Vec<usize>,
}

pub fn psi_fit(results: &[SheetEstimate]) -> Result<PsiFit> {
    let used: Vec<&SheetEstimate> = results.iter().filter(|r| r.p_hat > 0.0 && r.p_hat < 1.0).collect();
    let mut sizes: Vec<usize> = used.iter().map(|r| r.m).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::Degenerate(format!("psi fit needs at least 3 grid sizes, got {}", sizes.len())));
    }
    if sizes[sizes.len() - 1] < 4 * sizes[0] {
        return Err(Error::Degenerate("psi fit needs grid sizes spanning at least two octaves".into()));
    }
    let design: Vec<Vec<f64>> = used
        .iter()
        .map(|r| {
            let l = (r.m as f64).ln();
            vec![l * l, 1.0]
        })
        .collect();
    let y: Vec<f64> = used.iter().map(|r| -r.p_hat.ln()).collect();
    let w: Vec<f64> = used.iter().map(|r| 1.0 / (r.ln_se * r.ln_se).max(f64::MIN_POSITIVE)).collect();
    let f = wls(&design, &y, &w)?;
    Ok(PsiFit {
        psi_hat: f.coef[0],
        stderr: f.se[0],
        intercept: f.coef[1],
        r_squared: f.r_squared,
        sizes,
    })
}

/// Row sums of the normalized correlation kernel of the sheet sampled at
/// geometric points `ρ^i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiShao {
    pub rho: u64,
    pub index_range: u64,
    /// `sup_{(i,j)} Σ_{(a,b)} ρ^{−|i−a|/2 − |j−b|/2}` over `[−R, R]²`.
    pub supremum_over_ij: f64,
    /// `((1 + ρ^{−1/2}) / (1 − ρ^{−1/2}))²`.
    pub closed_form: f64,
    /// The closed form as `(numerator, denominator)` when `ρ` is a square.
    pub closed_form_exact: Option<(u64, u64)>,
    /// `closed_form ≤ 5/4`.
    pub bound_satisfied: bool,
}

pub fn li_shao_sum(rho: u64, index_range: u64) -> Result<LiShao> {
    if rho < 2 {
        return Err(Error::InvalidParameter(format!("rho must be >= 2, got {rho}")));
    }
    if index_range < 1 {
        return Err(Error::InvalidParameter("index_range must be >= 1".into()));
    }
    let r = index_range as i64;
    let decay = (rho as f64).powf(-0.5);
    // The kernel factorizes, so each row sum is a product of 1-D sums.
    let one_d = |i: i64| -> f64 { (-r..=r).map(|a| decay.powi((i - a).unsigned_abs() as i32)).sum() };
    let sums: Vec<f64> = (-r..=r).map(one_d).collect();
    let best = sums.iter().cloned().fold(f64::MIN, f64::max);
    let supremum_over_ij = best * best;
    let closed_form = ((1.0 + decay) / (1.0 - decay)).powi(2);
    let root = (rho as f64).sqrt().round() as u64;
    let closed_form_exact = (root * root == rho).then(|| {
        let (num, den) = ((root + 1) * (root + 1), (root - 1) * (root - 1));
        let g = num_integer::gcd(num, den);
        (num / g, den / g)
    });
    let bound_satisfied = match closed_form_exact {
        Some((num, den)) => 4 * num <= 5 * den,
        None => closed_form <= 1.25,
    };
    Ok(LiShao {
        rho,
        index_range,
        supremum_over_ij,
        closed_form,
        closed_form_exact,
        bound_satisfied,
    })
}

/// Kolmogorov–Smirnov distance between a sample and the standard normal.
pub fn ks_standard_normal(sample: &[f64]) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
