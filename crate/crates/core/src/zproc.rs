//! The prefix-difference field `Z(a, b) = X(a, b) − Y(a, b)` of a pair
//! `(π, τ)` and rectangle statistics of a single permutation matrix.
//!
//! `π ≤ τ` is exactly the event that `Z` stays non-negative everywhere.
//! Rectangles are half-open, `(a1, a2] × (b1, b2]`. Centering terms
//! `|A| / n` are exact rationals; floating point appears only in Monte Carlo
//! summaries.

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Executor;
use crate::perm::{dominance_rows, sample_into, Permutation, DOMINANCE_TABLE_CAP};
use crate::rng::StreamKey;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZTable {
    n: usize,
    z: Vec<i32>,
}

impl ZTable {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> i32 {
        self.z[a * (self.n + 1) + b]
    }

    /// Smallest entry and the first `(a, b)` in row-major order attaining it.
    pub fn min_with_argmin(&self) -> (i32, (usize, usize)) {
        let w = self.n + 1;
        let (idx, &min) = self
            .z
            .iter()
            .enumerate()
            .min_by_key(|&(i, &v)| (v, i))
            .expect("table is never empty");
        (min, (idx / w, idx % w))
    }

    pub fn check_invariants(&self) -> bool {
        let n = self.n;
        for k in 0..=n {
            if self.get(k, 0) != 0 || self.get(0, k) != 0 || self.get(k, n) != 0 || self.get(n, k) != 0 {
                return false;
            }
        }
        (0..=n).all(|a| {
            (0..=n).all(|b| {
                let bound = a.min(b).min(n - a).min(n - b) as i32;
                self.get(a, b).abs() <= bound
            })
        })
    }

    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            z: self.z.iter().map(|v| -v).collect(),
        }
    }
}

/// Full table of `Z(a, b)` for `0 ≤ a, b ≤ n`, in `O(n²)`.
pub fn z_table(p: &Permutation, t: &Permutation) -> Result<ZTable> {
    if p.len() != t.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: t.len(),
        });
    }
    let n = p.len();
    if n > DOMINANCE_TABLE_CAP {
        return Err(Error::TooLarge {
            what: "dense Z table",
            n,
            cap: DOMINANCE_TABLE_CAP,
        });
    }
    let w = n + 1;
    let mut z = vec![0i32; w * w];
    dominance_rows(p, |a, row| {
        for (dst, &x) in z[a * w..(a + 1) * w].iter_mut().zip(row) {
            *dst = x as i32;
        }
    });
    dominance_rows(t, |a, row| {
        for (dst, &y) in z[a * w..(a + 1) * w].iter_mut().zip(row) {
            *dst -= y as i32;
        }
    });
    Ok(ZTable { n, z })
}

/// `Z(a, b) ≥ 0` for all `a, b`.
pub fn persistence_holds(zt: &ZTable) -> bool {
    zt.z.iter().all(|&v| v >= 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rectangle {
    pub a1: usize,
    pub a2: usize,
    pub b1: usize,
    pub b2: usize,
}

impl Rectangle {
    pub fn new(a1: usize, a2: usize, b1: usize, b2: usize) -> Result<Self> {
        if a1 > a2 || b1 > b2 {
            return Err(Error::OutOfBounds(format!(
                "rectangle ({a1},{a2}] x ({b1},{b2}] has a reversed side"
            )));
        }
        Ok(Self { a1, a2, b1, b2 })
    }

    /// `(0, a] × (0, b]`.
    pub fn prefix(a: usize, b: usize) -> Self {
        Self { a1: 0, a2: a, b1: 0, b2: b }
    }

    pub fn area(&self) -> u64 {
        ((self.a2 - self.a1) * (self.b2 - self.b1)) as u64
    }

    pub fn height(&self) -> usize {
        self.a2 - self.a1
    }

    pub fn width(&self) -> usize {
        self.b2 - self.b1
    }

    pub fn check_within(&self, n: usize) -> Result<()> {
        if self.a2 > n || self.b2 > n {
            return Err(Error::OutOfBounds(format!(
                "rectangle ({},{}] x ({},{}] exceeds [0,{n}]^2",
                self.a1, self.a2, self.b1, self.b2
            )));
        }
        Ok(())
    }
}

/// Number of ones of `M_p` inside `r`, without bounds checks.
#[inline]
pub(crate) fn count_in(p: &[u32], r: &Rectangle) -> u64 {
    p[r.a1..r.a2]
        .iter()
        .filter(|&&v| v as usize > r.b1 && v as usize <= r.b2)
        .count() as u64
}

/// `X(r)`, or `X̃(r) = X(r) − |r| / n` when `centered`.
pub fn rect_sum(p: &Permutation, r: &Rectangle, centered: bool) -> Result<Ratio<i64>> {
    let n = p.len();
    r.check_within(n)?;
    let count = Ratio::from_integer(count_in(p.as_slice(), r) as i64);
    Ok(if centered {
        count - Ratio::new(r.area() as i64, n as i64)
    } else {
        count
    })
}

/// `Z(r) = X(r) − Y(r)`.
pub fn z_rect(p: &Permutation, t: &Permutation, r: &Rectangle) -> Result<i64> {
    if p.len() != t.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: t.len(),
        });
    }
    r.check_within(p.len())?;
    Ok(count_in(p.as_slice(), r) as i64 - count_in(t.as_slice(), r) as i64)
}

/// Checks `Z(a,b) = Z(x,y) + Z((0,x]×(y,b]) + Z((x,a]×(0,y]) + Z((x,a]×(y,b])`.
pub fn decompose_check(
    p: &Permutation,
    t: &Permutation,
    x: usize,
    y: usize,
    a: usize,
    b: usize,
) -> Result<bool> {
    let n = p.len();
    if x > a || y > b || a > n || b > n {
        return Err(Error::OutOfBounds(format!(
            "need x <= a <= n and y <= b <= n, got x={x} a={a} y={y} b={b} n={n}"
        )));
    }
    let whole = z_rect(p, t, &Rectangle::prefix(a, b))?;
    let parts = [
        Rectangle::prefix(x, y),
        Rectangle::new(0, x, y, b)?,
        Rectangle::new(x, a, 0, y)?,
        Rectangle::new(x, a, y, b)?,
    ];
    let mut sum = 0;
    for r in &parts {
        sum += z_rect(p, t, r)?;
    }
    Ok(whole == sum)
}

/// `⌊5k/4⌋` capped at `n`: the far end of the box starting at `k`.
#[inline]
pub fn box_end(k: usize, n: usize) -> usize {
    (5 * k / 4).min(n)
}

/// Mean and standard error of i.i.d. per-trial values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl Summary {
    pub const EMPTY: Summary = Summary {
        trials: 0,
        mean: 0.0,
        m2: 0.0,
    };

    pub fn from_values(values: &[f64]) -> Self {
        values.iter().fold(Self::EMPTY, |s, &v| s.push(v))
    }

    pub fn push(self, v: f64) -> Self {
        let trials = self.trials + 1;
        let delta = v - self.mean;
        let mean = self.mean + delta / trials as f64;
        Self {
            trials,
            mean,
            m2: self.m2 + delta * (v - mean),
        }
    }

    /// Count-weighted combination of two summaries.
    pub fn merge(self, other: Self) -> Self {
        if self.trials == 0 {
            return other;
        }
        if other.trials == 0 {
            return self;
        }
        let trials = self.trials + other.trials;
        let delta = other.mean - self.mean;
        let w = other.trials as f64 / trials as f64;
        Self {
            trials,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.trials as f64 * w,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.trials < 2 {
            0.0
        } else {
            self.m2 / (self.trials - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            (self.variance() / self.trials as f64).sqrt()
        }
    }
}

fn check_stat_params(n: usize, x: usize, y: usize, trials: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    if x == 0 || y == 0 || x > n || y > n {
        return Err(Error::OutOfBounds(format!("need 1 <= x, y <= n, got x={x} y={y} n={n}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    Ok(())
}

/// `max_{(a,b) ∈ [x,⌊5x/4⌋]×[y,⌊5y/4⌋]} |X̃((x,a]×(y,b])|` for one permutation.
pub fn max_rect_deviation(p: &[u32], x: usize, y: usize) -> f64 {
    let n = p.len();
    let (xe, ye) = (box_end(x, n), box_end(y, n));
    let (h, w) = (xe - x, ye - y);
    if h == 0 || w == 0 {
        return 0.0;
    }
    // grid[i][j] = #{ rows in (x, x+i] with values in (y, y+j] }
    let mut grid = vec![0i64; (h + 1) * (w + 1)];
    for (i, &v) in p[x..xe].iter().enumerate() {
        let v = v as usize;
        if v > y && v <= ye {
            grid[(i + 1) * (w + 1) + (v - y)] += 1;
        }
    }
    let n_i = n as i64;
    let mut best = 0i64;
    for i in 1..=h {
        let mut run = 0i64;
        for j in 1..=w {
            run += grid[i * (w + 1) + j];
            let cell = grid[(i - 1) * (w + 1) + j] + run;
            grid[i * (w + 1) + j] = cell;
            // n·X̃ is an integer
            best = best.max((n_i * cell - (i * j) as i64).abs());
        }
    }
    best as f64 / n as f64
}

/// Running maxima `r[k] = max_{b ∈ [y, y+k]} |X̃((0,x]×(y,b])|` for
/// `k = 0..=b_hi−y`.
pub fn strip_running_max(p: &[u32], x: usize, y: usize, b_hi: usize) -> Vec<f64> {
    let n = p.len();
    let b_hi = b_hi.min(n).max(y);
    let mut hist = vec![0i64; b_hi - y + 1];
    for &v in &p[..x] {
        let v = v as usize;
        if v > y && v <= b_hi {
            hist[v - y] += 1;
        }
    }
    let n_i = n as i64;
    let mut count = 0i64;
    let mut best = 0i64;
    hist.iter()
        .enumerate()
        .map(|(k, &c)| {
            count += c;
            best = best.max((n_i * count - (x * k) as i64).abs());
            best as f64 / n as f64
        })
        .collect()
}

/// `max_{b ∈ [y,⌊5y/4⌋]} |X̃((0,x]×(y,b])|` for one permutation.
pub fn max_strip_deviation(p: &[u32], x: usize, y: usize) -> f64 {
    *strip_running_max(p, x, y, box_end(y, p.len()))
        .last()
        .expect("strip range is never empty")
}

fn per_trial_stat(
    key: StreamKey,
    n: usize,
    trials: u64,
    exec: &Executor,
    stat: impl Fn(&[u32]) -> f64 + Sync + Send,
) -> Summary {
    let values = exec.map_trials(trials, |t| {
        let mut buf = vec![0u32; n];
        sample_into(&mut buf, &mut key.trial(t));
        stat(&buf)
    });
    Summary::from_values(&values)
}

/// Monte Carlo mean of [`max_rect_deviation`] over uniform permutations.
pub fn max_rect_stat(
    key: StreamKey,
    n: usize,
    x: usize,
    y: usize,
    trials: u64,
    exec: &Executor,
) -> Result<Summary> {
    check_stat_params(n, x, y, trials)?;
    Ok(per_trial_stat(key.domain("max-rect"), n, trials, exec, |p| {
        max_rect_deviation(p, x, y)
    }))
}

/// Monte Carlo mean of [`max_strip_deviation`] over uniform permutations.
pub fn max_strip_stat(
    key: StreamKey,
    n: usize,
    x: usize,
    y: usize,
    trials: u64,
    exec: &Executor,
) -> Result<Summary> {
    check_stat_params(n, x, y, trials)?;
    Ok(per_trial_stat(key.domain("max-strip"), n, trials, exec, |p| {
        max_strip_deviation(p, x, y)
    }))
}

/// `√(xy/n) + ln n`, the scale of the rectangle maximum.
pub fn rect_normalizer(n: usize, x: usize, y: usize) -> f64 {
    ((x * y) as f64 / n as f64).sqrt() + (n as f64).ln()
}

/// `√(xy/n) + 1`, the scale of the strip maximum.
pub fn strip_normalizer(n: usize, x: usize, y: usize) -> f64 {
    ((x * y) as f64 / n as f64).sqrt() + 1.0
}

/// `min_{(a,b) ∈ [x,⌊5x/4⌋]×[y,⌊5y/4⌋]} Z(a, b)` for one pair.
pub fn box_min_z(p: &[u32], t: &[u32], x: usize, y: usize) -> i64 {
    let n = p.len();
    let (xe, ye) = (box_end(x, n), box_end(y, n));
    // z[k] = Z(x, y + k) for k = 0..=ye−y
    let mut z = vec![0i64; ye - y + 1];
    let mut below = 0i64;
    for (&pv, &tv) in p[..x].iter().zip(&t[..x]) {
        for (v, s) in [(pv as usize, 1i64), (tv as usize, -1i64)] {
            if v <= y {
                below += s;
            } else if v <= ye {
                z[v - y] += s;
            }
        }
    }
    let mut acc = below;
    for v in z.iter_mut() {
        acc += *v;
        *v = acc;
    }
    let mut min = *z.iter().min().expect("non-empty");
    for a in x..xe {
        let (pv, tv) = (p[a] as usize, t[a] as usize);
        let len = z.len();
        let lo = (pv.max(y) - y).min(len);
        let hi = (tv.max(y) - y).min(len);
        // +1 on b ≥ p(a+1), −1 on b ≥ t(a+1)
        if lo < hi {
            for v in &mut z[lo..hi] {
                *v += 1;
            }
        } else if hi < lo {
            for v in &mut z[hi..lo] {
                *v -= 1;
            }
        }
        min = min.min(*z.iter().min().expect("non-empty"));
    }
    min
}

/// Uniform pair `(π, τ)` drawn into reusable buffers.
#[inline]
pub(crate) fn sample_pair<R: Rng + ?Sized>(p: &mut [u32], t: &mut [u32], rng: &mut R) {
    sample_into(p, rng);
    sample_into(t, rng);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::is_leq_strong;
    use crate::perm::{permutations_lex, sample_uniform};

    fn perm(v: &[u32]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    fn pair(key: StreamKey, trial: u64, n: usize) -> (Permutation, Permutation) {
        let mut rng = key.trial(trial);
        (sample_uniform(n, &mut rng).unwrap(), sample_uniform(n, &mut rng).unwrap())
    }

    #[test]
    fn z_table_examples() {
        let p = sample_uniform(10, &mut StreamKey::new(1).trial(0)).unwrap();
        assert!(z_table(&p, &p).unwrap().z.iter().all(|&v| v == 0));

        let z = z_table(&Permutation::identity(2).unwrap(), &Permutation::reverse(2).unwrap()).unwrap();
        assert_eq!(z.get(1, 1), 1);

        let z = z_table(&Permutation::identity(3).unwrap(), &Permutation::reverse(3).unwrap()).unwrap();
        for a in 0..=3 {
            for b in 0..=3 {
                assert_eq!(z.get(a, b) as usize, a.min(b) - (a + b).saturating_sub(3));
            }
        }
        assert!(persistence_holds(&z));
        assert!(z_table(&perm(&[1]), &perm(&[1, 2])).is_err());
    }

    #[test]
    fn persistence_equals_criterion_on_s4() {
        let all: Vec<_> = permutations_lex(4).collect();
        for p in &all {
            for t in &all {
                let zt = z_table(p, t).unwrap();
                assert!(zt.check_invariants());
                assert_eq!(persistence_holds(&zt), is_leq_strong(p, t).unwrap().leq);
            }
        }
    }

    #[test]
    fn antisymmetry_and_invariants() {
        let key = StreamKey::new(8);
        for trial in 0..200 {
            let (p, t) = pair(key, trial, 30);
            let zpt = z_table(&p, &t).unwrap();
            assert!(zpt.check_invariants());
            assert_eq!(zpt.negated(), z_table(&t, &p).unwrap());
        }
    }

    #[test]
    fn argmin_is_row_major_first() {
        let (p, t) = pair(StreamKey::new(12), 3, 20);
        let zt = z_table(&p, &t).unwrap();
        let (min, (a, b)) = zt.min_with_argmin();
        assert_eq!(zt.get(a, b), min);
        for aa in 0..=20 {
            for bb in 0..=20 {
                let v = zt.get(aa, bb);
                assert!(v >= min);
                if v == min {
                    assert!((aa, bb) >= (a, b));
                }
            }
        }
    }

    #[test]
    fn rect_sum_examples() {
        let p = sample_uniform(9, &mut StreamKey::new(2).trial(0)).unwrap();
        let full = Rectangle::prefix(9, 9);
        assert_eq!(rect_sum(&p, &full, false).unwrap(), Ratio::from_integer(9));
        assert_eq!(rect_sum(&p, &full, true).unwrap(), Ratio::from_integer(0));
        let id = Permutation::identity(4).unwrap();
        let r = Rectangle::new(1, 3, 1, 3).unwrap();
        assert_eq!(rect_sum(&id, &r, false).unwrap(), Ratio::from_integer(2));
        assert_eq!(rect_sum(&id, &r, true).unwrap(), Ratio::new(1, 1));
        assert!(rect_sum(&id, &Rectangle::prefix(5, 1), false).is_err());
        assert!(Rectangle::new(3, 2, 0, 1).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let key = StreamKey::new(4);
        let (p, t) = pair(key, 0, 50);
        assert!(decompose_check(&p, &t, 20, 30, 20, 30).unwrap());
        for trial in 0..200u64 {
            let mut rng = key.trial(1000 + trial);
            let a = rng.random_range(0..=50);
            let b = rng.random_range(0..=50);
            let x = rng.random_range(0..=a);
            let y = rng.random_range(0..=b);
            assert!(decompose_check(&p, &t, x, y, a, b).unwrap());
        }
        let (p, t) = pair(key, 1, 8);
        for x in [0, 2, 4, 6] {
            for y in [0, 2, 4, 6] {
                for a in [x, x + 1, 8] {
                    for b in [y, y + 2, 8] {
                        assert!(decompose_check(&p, &t, x, y, a, b).unwrap());
                    }
                }
            }
        }
        assert!(decompose_check(&p, &t, 5, 0, 4, 4).is_err());
    }

    #[test]
    fn single_point_grid_is_zero() {
        let p = sample_uniform(16, &mut StreamKey::new(3).trial(0)).unwrap();
        assert_eq!(max_rect_deviation(p.as_slice(), 1, 1), 0.0);
        let s = max_rect_stat(StreamKey::new(3), 16, 1, 1, 50, &Executor::new(1)).unwrap();
        assert_eq!(s.mean, 0.0);
    }

    /// Brute force over every rectangle with `rect_sum`.
    #[test]
    fn rect_deviation_matches_brute_force() {
        let key = StreamKey::new(21);
        for trial in 0..30 {
            let n = 40;
            let p = sample_uniform(n, &mut key.trial(trial)).unwrap();
            for (x, y) in [(4, 8), (12, 12), (16, 5), (20, 20)] {
                let mut best = Ratio::from_integer(0i64);
                for a in x..=box_end(x, n) {
                    for b in y..=box_end(y, n) {
                        let r = Rectangle::new(x, a, y, b).unwrap();
                        let v = rect_sum(&p, &r, true).unwrap();
                        let v = if v < Ratio::from_integer(0) { -v } else { v };
                        best = best.max(v);
                    }
                }
                let expect = *best.numer() as f64 / *best.denom() as f64;
                assert!((max_rect_deviation(p.as_slice(), x, y) - expect).abs() < 1e-12);

                let mut sbest = Ratio::from_integer(0i64);
                for b in y..=box_end(y, n) {
                    let v = rect_sum(&p, &Rectangle::new(0, x, y, b).unwrap(), true).unwrap();
                    sbest = sbest.max(if v < Ratio::from_integer(0) { -v } else { v });
                }
                let expect = *sbest.numer() as f64 / *sbest.denom() as f64;
                assert!((max_strip_deviation(p.as_slice(), x, y) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_strip_is_zero() {
        let p = sample_uniform(32, &mut StreamKey::new(6).trial(0)).unwrap();
        assert_eq!(max_strip_deviation(p.as_slice(), 10, 32), 0.0);
        let s = max_strip_stat(StreamKey::new(6), 32, 10, 32, 20, &Executor::new(1)).unwrap();
        assert_eq!(s.mean, 0.0);
    }

    #[test]
    fn strip_running_max_is_monotone() {
        let key = StreamKey::new(10);
        for trial in 0..100 {
            let p = sample_uniform(200, &mut key.trial(trial)).unwrap();
            let r = strip_running_max(p.as_slice(), 60, 40, 120);
            assert_eq!(r.len(), 81);
            assert!(r.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn box_min_matches_table() {
        let key = StreamKey::new(13);
        for trial in 0..100 {
            let (p, t) = pair(key, trial, 60);
            let zt = z_table(&p, &t).unwrap();
            for (x, y) in [(4, 4), (10, 25), (30, 30), (17, 3)] {
                let mut m = i64::MAX;
                for a in x..=box_end(x, 60) {
                    for b in y..=box_end(y, 60) {
                        m = m.min(zt.get(a, b) as i64);
                    }
                }
                assert_eq!(box_min_z(p.as_slice(), t.as_slice(), x, y), m);
            }
        }
    }

    #[test]
    fn summary_merge_matches_sequential() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 113) as f64 / 7.0).collect();
        let whole = Summary::from_values(&v);
        let merged = Summary::from_values(&v[..333]).merge(Summary::from_values(&v[333..]));
        assert_eq!(whole.trials, merged.trials);
        assert!((whole.mean - merged.mean).abs() < 1e-12);
        assert!((whole.m2 - merged.m2).abs() < 1e-8);
    }

    #[test]
    fn stat_parameter_errors() {
        let exec = Executor::new(1);
        assert!(max_rect_stat(StreamKey::new(1), 10, 0, 2, 5, &exec).is_err());
        assert!(max_rect_stat(StreamKey::new(1), 10, 11, 2, 5, &exec).is_err());
        assert!(max_strip_stat(StreamKey::new(1), 10, 2, 2, 0, &exec).is_err());
    }
}
