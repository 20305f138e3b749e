//! Hypergeometric laws of box counts.
//!
//! For a uniform permutation matrix the number of ones in a box of height
//! `h` and width `w` is `HyperGeom(n, w, h)`. This module provides the exact
//! pmf (big rationals up to `N = 1000`, Loader's saddle-point form above),
//! moments, an urn sampler, the Bernstein-type tail bound, the law of a box
//! count conditioned on its surrounding frame, and the comparison between a
//! corner count of a permutation and a Binomial count of i.i.d. Bernoulli
//! entries.

use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::parallel::Executor;
use crate::perm::sample_into;
use crate::rng::StreamKey;
use crate::zproc::{count_in, Rectangle};

/// Largest population evaluated with exact rational arithmetic.
pub const EXACT_PMF_CAP: u64 = 1000;

/// `HyperGeom(N, B, A)`: red objects among `B` draws without replacement
/// from `N` objects of which `A` are red.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperGeomParams {
    pub population: u64,
    pub draws: u64,
    pub successes: u64,
}

impl HyperGeomParams {
    pub fn new(population: u64, draws: u64, successes: u64) -> Result<Self> {
        if draws > population || successes > population {
            return Err(Error::InvalidParameter(format!(
                "HyperGeom(N={population}, B={draws}, A={successes}) needs A, B <= N"
            )));
        }
        Ok(Self {
            population,
            draws,
            successes,
        })
    }

    /// Inclusive support `[max(0, A + B − N), min(A, B)]`.
    pub fn support(&self) -> (u64, u64) {
        let lo = (self.successes + self.draws).saturating_sub(self.population);
        (lo, self.successes.min(self.draws))
    }

    pub fn in_support(&self, k: u64) -> bool {
        let (lo, hi) = self.support();
        (lo..=hi).contains(&k)
    }

    /// `C(A, k) C(N − A, B − k) / C(N, B)`, exactly.
    pub fn pmf_exact(&self, k: u64) -> BigRational {
        if !self.in_support(k) {
            return BigRational::zero();
        }
        let num = binomial(self.successes, k) * binomial(self.population - self.successes, self.draws - k);
        BigRational::new(BigInt::from(num), BigInt::from(binomial(self.population, self.draws)))
    }

    /// Floating pmf: exact rational for `N ≤ 1000`, Loader's form above.
    pub fn pmf(&self, k: u64) -> f64 {
        if !self.in_support(k) {
            return 0.0;
        }
        if self.population <= EXACT_PMF_CAP {
            return self.pmf_exact(k).to_f64().unwrap_or(0.0);
        }
        self.ln_pmf(k).exp()
    }

    /// `ln P(ξ = k)` via saddle-point binomial terms; relative error of the
    /// exponentiated value is far below `1e−10`.
    pub fn ln_pmf(&self, k: u64) -> f64 {
        if !self.in_support(k) {
            return f64::NEG_INFINITY;
        }
        let n = self.population as f64;
        let (r, b, drawn) = (self.successes, self.population - self.successes, self.draws);
        if drawn == 0 || drawn == self.population {
            return 0.0;
        }
        let p = drawn as f64 / n;
        let q = (self.population - drawn) as f64 / n;
        ln_dbinom_raw(k as f64, r as f64, p, q) + ln_dbinom_raw((drawn - k) as f64, b as f64, p, q)
            - ln_dbinom_raw(drawn as f64, n, p, q)
    }

    pub fn pmf_table(&self) -> Vec<(u64, f64)> {
        let (lo, hi) = self.support();
        (lo..=hi).map(|k| (k, self.pmf(k))).collect()
    }

    pub fn moments(&self) -> Result<Moments> {
        let (n, b, a) = (
            BigInt::from(self.population),
            BigInt::from(self.draws),
            BigInt::from(self.successes),
        );
        if self.population < 2 {
            return Err(Error::Degenerate(format!(
                "variance of HyperGeom needs N >= 2, got N = {}",
                self.population
            )));
        }
        let mean = BigRational::new(&a * &b, n.clone());
        let variance = BigRational::new(
            &a * &b * (&n - &a) * (&n - &b),
            &n * &n * (&n - BigInt::one()),
        );
        Ok(Moments { mean, variance })
    }

    pub fn mean_f64(&self) -> f64 {
        self.successes as f64 * self.draws as f64 / self.population as f64
    }

    /// One draw by simulating the urn: `B` sequential draws without
    /// replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let mut red = self.successes;
        let mut left = self.population;
        let mut got = 0;
        for _ in 0..self.draws {
            if rng.random_range(0..left) < red {
                red -= 1;
                got += 1;
            }
            left -= 1;
        }
        got
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Moments {
    pub mean: BigRational,
    pub variance: BigRational,
}

impl Moments {
    pub fn mean_f64(&self) -> f64 {
        self.mean.to_f64().unwrap_or(f64::NAN)
    }

    pub fn variance_f64(&self) -> f64 {
        self.variance.to_f64().unwrap_or(f64::NAN)
    }
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

// Saddle-point evaluation of binomial probabilities (Loader 2000).

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln n! − ln(√(2πn) (n/e)^n)`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let mut ln_fact = 0.0;
        let mut i = 2.0;
        while i <= n {
            ln_fact += f64::ln(i);
            i += 1.0;
        }
        if n == 0.0 {
            // limit used by the binomial terms below
            return 0.0;
        }
        return ln_fact - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np − x`, accurate when `x ≈ np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

/// `ln P(Binomial(n, p) = x)` with `q = 1 − p` passed separately.
fn ln_dbinom_raw(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0.0 {
        if n == 0.0 {
            return 0.0;
        }
        return if p < 0.1 { -bd0(n, n * q) - n * p } else { n * q.ln() };
    }
    if x == n {
        return if q < 0.1 { -bd0(n, n * p) - n * q } else { n * p.ln() };
    }
    if x < 0.0 || x > n {
        return f64::NEG_INFINITY;
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / n).ln_1p();
    lc - 0.5 * lf
}

/// `ln P(Binomial(trials, p) = k)`.
pub fn ln_binomial_pmf(k: u64, trials: u64, p: f64) -> f64 {
    if k > trials {
        return f64::NEG_INFINITY;
    }
    ln_dbinom_raw(k as f64, trials as f64, p, 1.0 - p)
}

/// A tail bound together with whether it is proven for the parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub value: f64,
    pub proven: bool,
}

/// `2 exp(−(1/16) min{t²/(ab/n), t})` for `X ~ HyperGeom(n, b, a)` with
/// `a ≤ b ≤ 3n/4`.
///
/// Outside that regime the call fails unless `force` is set, in which case
/// the formula is evaluated and flagged as unproven.
pub fn bernstein_bound(params: &HyperGeomParams, t: f64, force: bool) -> Result<TailBound> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let (n, b, a) = (params.population, params.draws, params.successes);
    let proven = a <= b && 4 * b <= 3 * n;
    if !proven && !force {
        return Err(Error::Regime(format!(
            "need a <= b <= 3n/4, got a={a} b={b} n={n}"
        )));
    }
    let scale = a as f64 * b as f64 / n as f64;
    let exponent = if scale == 0.0 { t } else { (t * t / scale).min(t) };
    Ok(TailBound {
        value: 2.0 * (-exponent / 16.0).exp(),
        proven,
    })
}

/// Empirical law of an integer statistic compared with a reference pmf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub samples: u64,
    /// Total variation distance between the histogram and the pmf.
    pub tv_distance: f64,
    /// Pearson statistic over bins with expected count >= 5 (tails pooled).
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub histogram: Vec<(u64, u64)>,
}

impl GofReport {
    pub fn compare(values: &[u64], law: &HyperGeomParams) -> Self {
        let samples = values.len() as u64;
        let (lo, hi) = law.support();
        let top = values.iter().copied().max().unwrap_or(0).max(hi);
        let mut counts = vec![0u64; top as usize + 1];
        for &v in values {
            counts[v as usize] += 1;
        }
        let pmf: Vec<f64> = (0..=top).map(|k| law.pmf(k)).collect();
        let total = samples as f64;
        let tv = 0.5
            * counts
                .iter()
                .zip(&pmf)
                .map(|(&c, &p)| (c as f64 / total - p).abs())
                .sum::<f64>();

        // Pool adjacent cells until each expects at least 5 observations.
        let mut bins: Vec<(f64, f64)> = Vec::new();
        let mut pending = (0.0, 0.0);
        for k in 0..=top as usize {
            pending.0 += counts[k] as f64;
            pending.1 += pmf[k] * total;
            if pending.1 >= 5.0 {
                bins.push(pending);
                pending = (0.0, 0.0);
            }
        }
        if pending.0 > 0.0 || pending.1 > 0.0 {
            match bins.last_mut() {
                Some(last) => {
                    last.0 += pending.0;
                    last.1 += pending.1;
                }
                None => bins.push(pending),
            }
        }
        let chi_square: f64 = bins
            .iter()
            .filter(|(_, e)| *e > 0.0)
            .map(|(o, e)| (o - e) * (o - e) / e)
            .sum();
        let dof = bins.len().saturating_sub(1);
        let p_value = if dof == 0 {
            1.0
        } else {
            ChiSquared::new(dof as f64).map_or(f64::NAN, |d| 1.0 - d.cdf(chi_square))
        };
        let histogram = counts
            .iter()
            .enumerate()
            .filter(|&(k, &c)| c > 0 || (lo..=hi).contains(&(k as u64)))
            .map(|(k, &c)| (k as u64, c))
            .collect();
        Self {
            samples,
            tv_distance: tv,
            chi_square,
            dof,
            p_value,
            histogram,
        }
    }
}

/// Law of `|P_B|` for a box `B = (a1,a2] × (b1,b2]` of a uniform
/// permutation matrix: `HyperGeom(n, b2 − b1, a2 − a1)`.
pub fn box_count_law(n: usize, rect: &Rectangle) -> Result<HyperGeomParams> {
    rect.check_within(n)?;
    HyperGeomParams::new(n as u64, rect.width() as u64, rect.height() as u64)
}

/// Samples `trials` permutations and compares the histogram of box counts
/// with [`box_count_law`].
pub fn box_count_law_check(
    n: usize,
    rect: &Rectangle,
    trials: u64,
    key: StreamKey,
    exec: &Executor,
) -> Result<GofReport> {
    let law = box_count_law(n, rect)?;
    let key = key.domain("box-count");
    let values = exec.map_trials(trials, |t| {
        let mut p = vec![0u32; n];
        sample_into(&mut p, &mut key.trial(t));
        count_in(&p, rect)
    });
    Ok(GofReport::compare(&values, &law))
}

/// Counts of ones in the three frame pieces around `[x1] × [y1]` inside
/// `[x2] × [y2]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameCounts {
    /// `(0, x1] × (y1, y2]`
    pub m1: u64,
    /// `(x1, x2] × (0, y1]`
    pub m2: u64,
    /// `(x1, x2] × (y1, y2]`
    pub m3: u64,
}

/// Corners of a frame: `0 ≤ x1 ≤ x2 ≤ n`, `0 ≤ y1 ≤ y2 ≤ n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    pub x1: usize,
    pub x2: usize,
    pub y1: usize,
    pub y2: usize,
}

impl Frame {
    pub fn new(n: usize, x1: usize, x2: usize, y1: usize, y2: usize) -> Result<Self> {
        if x1 > x2 || y1 > y2 || x2 > n || y2 > n {
            return Err(Error::OutOfBounds(format!(
                "frame needs x1 <= x2 <= n and y1 <= y2 <= n, got ({x1},{x2},{y1},{y2}) with n={n}"
            )));
        }
        Ok(Self { x1, x2, y1, y2 })
    }

    pub fn counts(&self, p: &[u32]) -> FrameCounts {
        FrameCounts {
            m1: count_in(p, &Rectangle { a1: 0, a2: self.x1, b1: self.y1, b2: self.y2 }),
            m2: count_in(p, &Rectangle { a1: self.x1, a2: self.x2, b1: 0, b2: self.y1 }),
            m3: count_in(p, &Rectangle { a1: self.x1, a2: self.x2, b1: self.y1, b2: self.y2 }),
        }
    }

    /// `|P_{[x1]×[y1]}|`
    pub fn inner_count(&self, p: &[u32]) -> u64 {
        count_in(p, &Rectangle::prefix(self.x1, self.y1))
    }

    /// Whether the frame cells of `p` are exactly `ones` (1-based cells).
    pub fn matches_pattern(&self, p: &[u32], ones: &[(usize, usize)]) -> bool {
        (1..=self.x2).all(|row| {
            let col = p[row - 1] as usize;
            let in_frame = if row <= self.x1 {
                col > self.y1 && col <= self.y2
            } else {
                col <= self.y2
            };
            let wanted = ones.iter().find(|&&(r, _)| r == row).map(|&(_, c)| c);
            match wanted {
                Some(c) => in_frame && col == c,
                None => !in_frame,
            }
        })
    }

    pub fn pattern_counts(&self, ones: &[(usize, usize)]) -> Result<FrameCounts> {
        let mut f = FrameCounts { m1: 0, m2: 0, m3: 0 };
        for &(r, c) in ones {
            match (r <= self.x1, c <= self.y1) {
                _ if r == 0 || c == 0 || r > self.x2 || c > self.y2 => {
                    return Err(Error::OutOfBounds(format!("cell ({r},{c}) is outside [x2]x[y2]")))
                }
                (true, true) => {
                    return Err(Error::OutOfBounds(format!("cell ({r},{c}) is inside [x1]x[y1]")))
                }
                (true, false) => f.m1 += 1,
                (false, true) => f.m2 += 1,
                (false, false) => f.m3 += 1,
            }
        }
        Ok(f)
    }
}

/// Law of `|P_{[x1]×[y1]}|` given the frame pattern:
/// `HyperGeom(n − (x2 − x1) − (y2 − y1) + m3, y1 − m2, x1 − m1)`.
pub fn frame_conditional_params(n: usize, frame: &Frame, f: &FrameCounts) -> Result<HyperGeomParams> {
    let (x1, x2, y1, y2) = (frame.x1 as i64, frame.x2 as i64, frame.y1 as i64, frame.y2 as i64);
    let (m1, m2, m3) = (f.m1 as i64, f.m2 as i64, f.m3 as i64);
    if m1 > x1 || m2 > y1 || m3 > (x2 - x1).min(y2 - y1) {
        return Err(Error::Infeasible(format!("frame counts {f:?} exceed the frame pieces")));
    }
    let population = n as i64 - (x2 - x1) - (y2 - y1) + m3;
    let draws = y1 - m2;
    let successes = x1 - m1;
    if population < 0 || draws > population || successes > population {
        return Err(Error::Infeasible(format!(
            "frame counts {f:?} leave HyperGeom({population}, {draws}, {successes})"
        )));
    }
    HyperGeomParams::new(population as u64, draws as u64, successes as u64)
}

/// Result of conditioning on a frame pattern by rejection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCheck {
    pub law: HyperGeomParams,
    pub trials: u64,
    pub accepted: u64,
    pub report: GofReport,
}

/// Samples permutations until at least `min_accepted` match the frame
/// pattern `ones`, then compares the inner counts of the accepted ones with
/// [`frame_conditional_params`].
///
/// Trials run in fixed chunks; the stopping point depends only on the
/// chunk boundaries, so the outcome does not depend on the worker count.
pub fn frame_conditional_check(
    n: usize,
    frame: &Frame,
    ones: &[(usize, usize)],
    min_accepted: u64,
    max_trials: u64,
    key: StreamKey,
    exec: &Executor,
) -> Result<FrameCheck> {
    let counts = frame.pattern_counts(ones)?;
    let law = frame_conditional_params(n, frame, &counts)?;
    let key = key.domain("frame");
    const CHUNK: u64 = 1 << 18;
    let mut accepted = Vec::new();
    let mut trials = 0;
    while (accepted.len() as u64) < min_accepted && trials < max_trials {
        let take = CHUNK.min(max_trials - trials);
        let block = exec.blocks(trials, take, |lo, hi| {
            let mut p = vec![0u32; n];
            (lo..hi)
                .filter_map(|t| {
                    sample_into(&mut p, &mut key.trial(t));
                    frame.matches_pattern(&p, ones).then(|| frame.inner_count(&p))
                })
                .collect::<Vec<_>>()
        });
        accepted.extend(block.into_iter().flatten());
        trials += take;
    }
    let report = GofReport::compare(&accepted, &law);
    Ok(FrameCheck {
        law,
        trials,
        accepted: accepted.len() as u64,
        report,
    })
}

/// `⌊n^{7/12}⌋`, the side of the corner block compared with i.i.d. entries.
pub fn corner_side(n: u64) -> u64 {
    let mut side = (n as f64).powf(7.0 / 12.0).floor() as u64;
    // exact integer correction: side^12 <= n^7 < (side+1)^12
    let n7 = BigUint::from(n).pow(7);
    while BigUint::from(side + 1).pow(12) <= n7 {
        side += 1;
    }
    while side > 0 && BigUint::from(side).pow(12) > n7 {
        side -= 1;
    }
    side
}

/// Largest `k` with `k ≤ n^{1/5}`.
pub fn count_cap(n: u64) -> u64 {
    let mut k = (n as f64).powf(0.2).floor() as u64;
    while (k + 1).pow(5) <= n {
        k += 1;
    }
    while k > 0 && k.pow(5) > n {
        k -= 1;
    }
    k
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliRatio {
    pub n: u64,
    /// Corner side `⌊n^{7/12}⌋`.
    pub side: u64,
    pub k: u64,
    /// `P(HyperGeom(n, N, N) = k) / P(Binomial(N², 1/n) = k)`.
    pub ratio: f64,
    /// Whether the ratio was evaluated in exact rational arithmetic.
    pub exact_arithmetic: bool,
    /// The reduced fraction, when it is short enough to print.
    pub exact: Option<String>,
    /// `k ≤ n^{1/5}`; outside it the ratio carries no guarantee.
    pub in_regime: bool,
}

const MAX_EXACT_TEXT: usize = 256;

/// Threshold on `N²` below which [`bernoulli_ratio`] uses exact arithmetic.
pub const EXACT_RATIO_CAP: u64 = 100_000;

/// Likelihood ratio between the corner count of a uniform permutation and
/// the matching Binomial count.
pub fn bernoulli_ratio(n: u64, k: u64) -> Result<BernoulliRatio> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let side = corner_side(n);
    let in_regime = k <= count_cap(n);
    if side * side <= EXACT_RATIO_CAP {
        let exact = bernoulli_ratio_exact(n, side, k);
        let ratio = exact.to_f64().unwrap_or(f64::NAN);
        // Reducing and printing fractions of ~10⁵ digits costs seconds and
        // cannot fit the text limit anyway.
        let bits = exact.numer().bits() + exact.denom().bits();
        let text = (bits <= 8 * MAX_EXACT_TEXT as u64)
            .then(|| exact.reduced().to_string())
            .filter(|t| t.len() <= MAX_EXACT_TEXT);
        return Ok(BernoulliRatio {
            n,
            side,
            k,
            ratio,
            exact_arithmetic: true,
            exact: text,
            in_regime,
        });
    }
    Ok(BernoulliRatio {
        n,
        side,
        k,
        ratio: bernoulli_ratio_log(n, side, k).exp(),
        exact_arithmetic: false,
        exact: None,
        in_regime,
    })
}

/// The ratio as an unreduced fraction.
pub(crate) fn bernoulli_ratio_exact(n: u64, side: u64, k: u64) -> BigRational {
    let hyper = HyperGeomParams {
        population: n,
        draws: side,
        successes: side,
    }
    .pmf_exact(k);
    let cells = side * side;
    if k > cells {
        return BigRational::zero();
    }
    // C(N², k) (n − 1)^{N² − k} / n^{N²}
    let num = BigInt::from(binomial(cells, k) * BigUint::from(n - 1).pow((cells - k) as u32));
    let den = BigInt::from(BigUint::from(n).pow(cells as u32));
    if num.is_zero() {
        return BigRational::zero();
    }
    // Unreduced: hyper · den / num.
    BigRational::new_raw(hyper.numer() * den, hyper.denom() * num)
}

pub(crate) fn bernoulli_ratio_log(n: u64, side: u64, k: u64) -> f64 {
    let hyper = HyperGeomParams {
        population: n,
        draws: side,
        successes: side,
    };
    hyper.ln_pmf(k) - ln_binomial_pmf(k, side * side, 1.0 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn hg(n: u64, b: u64, a: u64) -> HyperGeomParams {
        HyperGeomParams::new(n, b, a).unwrap()
    }

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    /// Enumerates all draws of `B` objects out of `N` with `A` red.
    fn enumerate_pmf(p: &HyperGeomParams) -> Vec<Ratio<u64>> {
        let n = p.population as usize;
        let mut hist = vec![0u64; n + 1];
        let mut total = 0u64;
        for mask in 0u64..(1 << n) {
            if mask.count_ones() as u64 != p.draws {
                continue;
            }
            let red = (mask & ((1 << p.successes) - 1)).count_ones() as usize;
            hist[red] += 1;
            total += 1;
        }
        hist.into_iter().map(|c| Ratio::new(c, total)).collect()
    }

    #[test]
    fn pmf_small_example_and_enumeration() {
        assert_eq!(hg(4, 2, 2).pmf_exact(1), rat(2, 3));
        for (n, b, a) in [(4, 2, 2), (7, 3, 4), (10, 4, 5), (9, 9, 2), (8, 0, 3)] {
            let p = hg(n, b, a);
            let brute = enumerate_pmf(&p);
            for (k, want) in brute.iter().enumerate() {
                let got = p.pmf_exact(k as u64);
                assert_eq!(got, rat(*want.numer() as i64, *want.denom() as i64), "{p:?} k={k}");
            }
        }
    }

    #[test]
    fn pmf_normalizes_exactly() {
        for n in [1u64, 2, 5, 17, 64, 200] {
            for b in [0, n / 3, n / 2, n] {
                for a in [0, 1, n / 4, n] {
                    let p = hg(n, b, a);
                    let (lo, hi) = p.support();
                    let total: BigRational = (lo..=hi).map(|k| p.pmf_exact(k)).sum();
                    assert_eq!(total, BigRational::one(), "{p:?}");
                    if lo > 0 {
                        assert!(p.pmf_exact(lo - 1).is_zero());
                    }
                    assert!(p.pmf_exact(hi + 1).is_zero());
                }
            }
        }
    }

    #[test]
    fn moments_examples() {
        let m = hg(10, 4, 5).moments().unwrap();
        assert_eq!(m.mean, rat(2, 1));
        assert_eq!(m.variance, rat(2, 3));
        assert_eq!(hg(10, 4, 10).moments().unwrap().variance, BigRational::zero());
        assert!(hg(1, 1, 1).moments().is_err());
    }

    #[test]
    fn moments_match_pmf() {
        let p = hg(60, 25, 18);
        let m = p.moments().unwrap();
        let (lo, hi) = p.support();
        let mean: BigRational = (lo..=hi).map(|k| p.pmf_exact(k) * BigInt::from(k)).sum();
        let second: BigRational = (lo..=hi).map(|k| p.pmf_exact(k) * BigInt::from(k * k)).sum();
        assert_eq!(mean, m.mean);
        assert_eq!(&second - &mean * &mean, m.variance);
    }

    #[test]
    fn saddle_point_agrees_with_exact() {
        let mut worst: f64 = 0.0;
        for (n, b, a) in [(50, 20, 10), (200, 100, 30), (1000, 300, 600), (997, 13, 500), (1000, 1, 1)] {
            let p = hg(n, b, a);
            let (lo, hi) = p.support();
            for k in lo..=hi {
                let exact = p.pmf_exact(k).to_f64().unwrap();
                if exact < 1e-300 {
                    continue;
                }
                let approx = p.ln_pmf(k).exp();
                worst = worst.max(((approx - exact) / exact).abs());
            }
        }
        assert!(worst < 1e-10, "worst relative error {worst}");
    }

    #[test]
    fn large_population_normalizes() {
        let p = hg(1_000_000, 3162, 3162);
        let (lo, hi) = p.support();
        let total: f64 = (lo..=hi).map(|k| p.pmf(k)).sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn sampler_edges() {
        let mut rng = StreamKey::new(1).trial(0);
        assert_eq!(hg(10, 0, 5).sample(&mut rng), 0);
        assert_eq!(hg(10, 10, 5).sample(&mut rng), 5);
        assert_eq!(hg(10, 4, 0).sample(&mut rng), 0);
    }

    #[test]
    fn bernstein_values() {
        // ab/n = 1, t = 4: min{16, 4} / 16 = 1/4
        let p = hg(100, 10, 10);
        let b = bernstein_bound(&p, 4.0, false).unwrap();
        assert!(b.proven);
        assert!((b.value - 2.0 * (-0.25f64).exp()).abs() < 1e-15);
        let tiny = bernstein_bound(&p, 1e-9, false).unwrap();
        assert!((tiny.value - 2.0).abs() < 1e-9);
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let v = bernstein_bound(&p, i as f64 * 0.25, false).unwrap().value;
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn bernstein_regime_gate() {
        // b > 3n/4
        let p = hg(100, 80, 10);
        assert!(matches!(bernstein_bound(&p, 1.0, false), Err(Error::Regime(_))));
        let forced = bernstein_bound(&p, 1.0, true).unwrap();
        assert!(!forced.proven);
        // a > b
        assert!(bernstein_bound(&hg(100, 10, 20), 1.0, false).is_err());
        assert!(bernstein_bound(&hg(100, 10, 10), 0.0, false).is_err());
    }

    #[test]
    fn full_square_box_is_degenerate() {
        let r = box_count_law_check(30, &Rectangle::prefix(30, 30), 500, StreamKey::new(2), &Executor::new(1)).unwrap();
        assert_eq!(r.tv_distance, 0.0);
        assert_eq!(r.histogram, vec![(30, 500)]);
    }

    #[test]
    fn box_law_symmetric_in_dimensions() {
        let a = box_count_law(100, &Rectangle::prefix(20, 30)).unwrap();
        let b = box_count_law(100, &Rectangle::prefix(30, 20)).unwrap();
        assert_eq!(a, hg(100, 30, 20));
        for k in 0..=20 {
            assert_eq!(a.pmf_exact(k), b.pmf_exact(k));
        }
    }

    #[test]
    fn frame_params_examples() {
        let f = Frame::new(10, 3, 5, 3, 5).unwrap();
        let p = frame_conditional_params(10, &f, &FrameCounts { m1: 1, m2: 0, m3: 1 }).unwrap();
        assert_eq!(p, hg(7, 3, 2));
        let empty = Frame::new(10, 4, 4, 6, 6).unwrap();
        let p = frame_conditional_params(10, &empty, &FrameCounts { m1: 0, m2: 0, m3: 0 }).unwrap();
        assert_eq!(p, hg(10, 6, 4));
        assert!(matches!(
            frame_conditional_params(10, &f, &FrameCounts { m1: 4, m2: 0, m3: 0 }),
            Err(Error::Infeasible(_))
        ));
        assert!(Frame::new(10, 5, 3, 0, 0).is_err());
    }

    /// Exhaustive check of the conditional law on `S_6`.
    #[test]
    fn frame_law_exhaustive_small() {
        let n = 6;
        let frame = Frame::new(n, 2, 4, 3, 4).unwrap();
        let mut by_pattern: std::collections::HashMap<Vec<(usize, usize)>, Vec<u64>> = Default::default();
        for p in crate::perm::permutations_lex(n) {
            let s = p.as_slice();
            let pattern: Vec<(usize, usize)> = (1..=frame.x2)
                .filter_map(|r| {
                    let c = s[r - 1] as usize;
                    let inside = if r <= frame.x1 { c > frame.y1 && c <= frame.y2 } else { c <= frame.y2 };
                    inside.then_some((r, c))
                })
                .collect();
            assert!(frame.matches_pattern(s, &pattern));
            by_pattern.entry(pattern).or_default().push(frame.inner_count(s));
        }
        for (pattern, values) in by_pattern {
            let law = frame_conditional_params(n, &frame, &frame.pattern_counts(&pattern).unwrap()).unwrap();
            let total = values.len() as u64;
            for k in 0..=3u64 {
                let c = values.iter().filter(|&&v| v == k).count() as i64;
                assert_eq!(rat(c, total as i64), law.pmf_exact(k), "pattern {pattern:?} k={k}");
            }
        }
    }

    #[test]
    fn corner_side_and_cap() {
        assert_eq!(corner_side(10_000), 215);
        assert_eq!(corner_side(1_000_000), 3162);
        assert_eq!(corner_side(16), 5);
        assert_eq!(count_cap(1_000_000), 15);
        assert_eq!(count_cap(10_000), 6);
        assert_eq!(count_cap(32), 2);
    }

    #[test]
    fn ratio_exact_and_log_routes_agree() {
        for k in 0..=6 {
            let exact = bernoulli_ratio_exact(10_000, 215, k).to_f64().unwrap();
            let log = bernoulli_ratio_log(10_000, 215, k).exp();
            assert!(((exact - log) / exact).abs() < 1e-10, "k={k}: {exact} vs {log}");
        }
    }

    #[test]
    fn ratio_frozen_values() {
        // 60-digit evaluation of the defining binomial expressions.
        let r = bernoulli_ratio(10_000, 0).unwrap();
        assert!(r.exact_arithmetic);
        assert!((r.ratio - 0.903_503_713_112_571_3).abs() < 1e-12);
        let r = bernoulli_ratio(1_000_000, 0).unwrap();
        assert!(!r.exact_arithmetic);
        assert!((r.ratio - 0.968_776_329_933_743_1).abs() < 1e-10);
        let r = bernoulli_ratio(1_000_000, 15).unwrap();
        assert!(r.in_regime);
        assert!((r.ratio - 0.996_804_141_755_265_2).abs() < 1e-10);
        assert!(!bernoulli_ratio(1_000_000, 16).unwrap().in_regime);
        // small n is far from 1 and only reported
        let r = bernoulli_ratio(16, 0).unwrap();
        assert!((r.ratio - 0.530_979_110_784_063_7).abs() < 1e-12);
        assert!(r.exact.is_some());
    }

    #[test]
    fn ratio_closer_to_one_at_larger_n() {
        let small = bernoulli_ratio(10_000, 0).unwrap().ratio;
        let large = bernoulli_ratio(1_000_000, 0).unwrap().ratio;
        assert!((large - 1.0).abs() < (small - 1.0).abs());
    }
}
