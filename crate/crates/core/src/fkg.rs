//! Exact checks of positive correlation for events that are monotone in the
//! strong order.
//!
//! Events on `S_n` are bitsets indexed by lexicographic rank; events on
//! `S_n × S_n` are indexed by `rank(π) · n! + rank(τ)`. All probabilities
//! are exact rationals.

use std::fmt;

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::order::{cover_graph, CoverGraph};
use crate::parallel::Executor;
use crate::perm::{factorial, Permutation};
use crate::rng::StreamKey;
use crate::zproc::z_table;

/// Largest `n` for events on `S_n`.
pub const UPSET_CAP: usize = 6;
/// Largest `n` for events on `S_n × S_n`.
pub const PRODUCT_CAP: usize = 4;
/// Largest `n` for the exhaustive corner-event computation.
pub const CORNER_CAP: usize = 5;

pub type Exact = Ratio<i128>;

#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }

    #[inline]
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn count(&self) -> u64 {
        self.0.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    fn and_count(&self, other: &Self) -> u64 {
        self.0.iter().zip(&other.0).map(|(a, b)| u64::from((a & b).count_ones())).sum()
    }
}

fn check_upset_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    if n > UPSET_CAP {
        return Err(Error::TooLarge { what: "up-set", n, cap: UPSET_CAP });
    }
    Ok(())
}

/// Increasing subset of `S_n`: closed under moving up in the strong order.
#[derive(Clone, PartialEq, Eq)]
pub struct UpSet {
    n: usize,
    members: Bits,
}

impl UpSet {
    pub fn empty(n: usize) -> Result<Self> {
        check_upset_size(n)?;
        Ok(Self { n, members: Bits::new(factorial(n) as usize) })
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::generated_by(n, &[Permutation::identity(n)?])
    }

    /// Upward closure of `generators`, following cover relations.
    pub fn generated_by(n: usize, generators: &[Permutation]) -> Result<Self> {
        let mut up = Self::empty(n)?;
        for g in generators {
            if g.len() != n {
                return Err(Error::SizeMismatch { left: n, right: g.len() });
            }
        }
        let graph = cover_graph(n);
        let mut stack: Vec<usize> = generators.iter().map(Permutation::lex_rank).collect();
        while let Some(u) = stack.pop() {
            if up.members.get(u) {
                continue;
            }
            up.members.set(u);
            stack.extend(graph.successors[u].iter().map(|&v| v as usize));
        }
        Ok(up)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        p.len() == self.n && self.members.get(p.lex_rank())
    }

    pub fn len(&self) -> u64 {
        self.members.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact uniform probability.
    pub fn probability(&self) -> Exact {
        Exact::new(self.len() as i128, factorial(self.n) as i128)
    }

    /// Every cover successor of a member is a member.
    pub fn check_closure(&self) -> bool {
        let graph = cover_graph(self.n);
        (0..graph.perms.len())
            .filter(|&u| self.members.get(u))
            .all(|u| graph.successors[u].iter().all(|&v| self.members.get(v as usize)))
    }

    /// Members in lexicographic order.
    pub fn members(&self) -> Vec<Permutation> {
        let graph = cover_graph(self.n);
        (0..graph.perms.len())
            .filter(|&u| self.members.get(u))
            .map(|u| graph.perms[u].clone())
            .collect()
    }

    /// Minimal members.
    pub fn generators(&self) -> Vec<Permutation> {
        let graph = cover_graph(self.n);
        let mut covered = Bits::new(graph.perms.len());
        for u in (0..graph.perms.len()).filter(|&u| self.members.get(u)) {
            for &v in &graph.successors[u] {
                covered.set(v as usize);
            }
        }
        (0..graph.perms.len())
            .filter(|&u| self.members.get(u) && !covered.get(u))
            .map(|u| graph.perms[u].clone())
            .collect()
    }
}

impl fmt::Debug for UpSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.generators().iter().map(|p| format!("[{p}]")).collect();
        write!(f, "UpSet(n={}, size={}, generated by {})", self.n, self.len(), gens.join(" "))
    }
}

/// Upward closure of a random seed of one to three permutations.
///
/// Seeds are drawn uniformly from `S_n`; their closure is usually a proper,
/// non-trivial up-set since a random permutation sits mid-order.
pub fn random_upset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UpSet> {
    check_upset_size(n)?;
    let total = factorial(n) as usize;
    let graph = cover_graph(n);
    let k = rng.random_range(1..=3);
    let seed: Vec<Permutation> = (0..k).map(|_| graph.perms[rng.random_range(0..total)].clone()).collect();
    UpSet::generated_by(n, &seed)
}

/// Outcome of one correlation check: `lhs = P(A ∩ B)`, `rhs = P(A) P(B)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Correlation {
    pub lhs: Exact,
    pub rhs: Exact,
}

impl Correlation {
    fn from_counts(both: u64, a: u64, b: u64, total: u64) -> Self {
        let total = total as i128;
        Self {
            lhs: Exact::new(both as i128, total),
            rhs: Exact::new(a as i128 * b as i128, total * total),
        }
    }

    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }

    pub fn margin(&self) -> Exact {
        self.lhs - self.rhs
    }
}

pub fn fkg_check(a: &UpSet, b: &UpSet) -> Result<Correlation> {
    if a.n != b.n {
        return Err(Error::SizeMismatch { left: a.n, right: b.n });
    }
    Ok(Correlation::from_counts(
        a.members.and_count(&b.members),
        a.len(),
        b.len(),
        factorial(a.n),
    ))
}

/// `P(Aᶜ ∩ Bᶜ) − P(Aᶜ) P(Bᶜ) = P(A ∩ B) − P(A) P(B)`, evaluated exactly.
pub fn complement_identity(a: &UpSet, b: &UpSet) -> Result<bool> {
    let direct = fkg_check(a, b)?;
    let total = factorial(a.n);
    let (ca, cb) = (total - a.len(), total - b.len());
    let both = total + a.members.and_count(&b.members) - a.len() - b.len();
    let comp = Correlation::from_counts(both, ca, cb, total);
    Ok(comp.margin() == direct.margin())
}

/// Summary of correlation checks over random up-set pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct FkgSweep {
    pub n: usize,
    pub pairs: u64,
    pub violations: u64,
    pub complement_failures: u64,
    /// Pair index and outcome with the smallest `lhs − rhs`, preferring
    /// pairs in which neither event is all of `S_n`.
    pub extremal: (u64, Correlation),
    pub extremal_sets: (UpSet, UpSet),
}

/// Checks `pairs` random up-set pairs; pair `i` is drawn from stream `i`.
pub fn fkg_sweep(n: usize, pairs: u64, seed: u64, exec: &Executor) -> Result<FkgSweep> {
    check_upset_size(n)?;
    if pairs == 0 {
        return Err(Error::InvalidParameter("pairs must be positive".into()));
    }
    let key = StreamKey::new(seed).domain("fkg-upsets");
    let outcomes = exec.map_trials(pairs, |i| {
        let mut rng = key.trial(i);
        let a = random_upset(n, &mut rng).expect("size checked");
        let b = random_upset(n, &mut rng).expect("size checked");
        let c = fkg_check(&a, &b).expect("same size");
        let identity = complement_identity(&a, &b).expect("same size");
        let total = factorial(n);
        let nontrivial = [&a, &b].iter().all(|e| e.len() < total);
        (c, identity, nontrivial)
    });
    let violations = outcomes.iter().filter(|(c, _, _)| !c.holds()).count() as u64;
    let complement_failures = outcomes.iter().filter(|(_, ok, _)| !ok).count() as u64;
    // A full event correlates with anything at margin zero; report the
    // tightest pair of proper events when there is one.
    let (idx, (worst, _, _)) = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(_, (x, _, xn)), (_, (y, _, yn))| yn.cmp(xn).then(x.margin().cmp(&y.margin())))
        .expect("pairs > 0");
    let mut rng = key.trial(idx as u64);
    let a = random_upset(n, &mut rng)?;
    let b = random_upset(n, &mut rng)?;
    Ok(FkgSweep {
        n,
        pairs,
        violations,
        complement_failures,
        extremal: (idx as u64, worst),
        extremal_sets: (a, b),
    })
}

/// How a product event moves with each coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Increasing in `π`, decreasing in `τ`.
    UpDown,
    /// Decreasing in `π`, increasing in `τ`, e.g. `{π ≤ τ}` and `{Z(a, b) ≥ 0}`.
    DownUp,
}

/// Event on `S_n × S_n` with a declared, verified monotonicity.
#[derive(Clone)]
pub struct ProductEvent {
    n: usize,
    orientation: Orientation,
    members: Bits,
}

impl ProductEvent {
    /// Tabulates `pred` over all pairs and verifies the declared
    /// monotonicity along every cover relation in each coordinate.
    pub fn new(
        n: usize,
        orientation: Orientation,
        pred: impl Fn(&Permutation, &Permutation) -> bool,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize(0));
        }
        if n > PRODUCT_CAP {
            return Err(Error::TooLarge { what: "product event", n, cap: PRODUCT_CAP });
        }
        let graph = cover_graph(n);
        let m = graph.perms.len();
        let mut members = Bits::new(m * m);
        for (i, p) in graph.perms.iter().enumerate() {
            for (j, t) in graph.perms.iter().enumerate() {
                if pred(p, t) {
                    members.set(i * m + j);
                }
            }
        }
        let event = Self { n, orientation, members };
        if let Some((i, j)) = event.monotonicity_violation(&graph) {
            return Err(Error::InvalidParameter(format!(
                "event is not {orientation:?}-monotone: fails moving from ({}, {})",
                graph.perms[i], graph.perms[j]
            )));
        }
        Ok(event)
    }

    /// `{ min Z ≥ 0 over a ∈ rows, b ∈ cols }`, rows and columns inclusive.
    pub fn z_nonnegative(n: usize, rows: (usize, usize), cols: (usize, usize)) -> Result<Self> {
        if rows.0 > rows.1 || cols.0 > cols.1 || rows.1 > n || cols.1 > n {
            return Err(Error::OutOfBounds(format!("window {rows:?} x {cols:?} outside 0..={n}")));
        }
        Self::new(n, Orientation::DownUp, |p, t| {
            let z = z_table(p, t).expect("same size");
            (rows.0..=rows.1).all(|a| (cols.0..=cols.1).all(|b| z.get(a, b) >= 0))
        })
    }

    /// The whole space.
    pub fn everything(n: usize, orientation: Orientation) -> Result<Self> {
        Self::new(n, orientation, |_, _| true)
    }

    /// First member pair from which a cover move in the monotone direction
    /// leaves the event.
    fn monotonicity_violation(&self, graph: &CoverGraph) -> Option<(usize, usize)> {
        let m = graph.perms.len();
        for i in 0..m {
            for j in 0..m {
                if !self.members.get(i * m + j) {
                    continue;
                }
                // Increasing coordinate: covers of a member stay inside.
                let ok = match self.orientation {
                    Orientation::UpDown => graph.successors[i].iter().all(|&u| self.members.get(u as usize * m + j)),
                    Orientation::DownUp => graph.successors[j].iter().all(|&v| self.members.get(i * m + v as usize)),
                };
                if !ok {
                    return Some((i, j));
                }
            }
        }
        // Decreasing coordinate: covers of a non-member stay outside.
        for i in 0..m {
            for j in 0..m {
                if self.members.get(i * m + j) {
                    continue;
                }
                let ok = match self.orientation {
                    Orientation::UpDown => graph.successors[j].iter().all(|&v| !self.members.get(i * m + v as usize)),
                    Orientation::DownUp => graph.successors[i].iter().all(|&u| !self.members.get(u as usize * m + j)),
                };
                if !ok {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn len(&self) -> u64 {
        self.members.count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn probability(&self) -> Exact {
        let total = factorial(self.n) as i128;
        Exact::new(self.len() as i128, total * total)
    }
}

impl fmt::Debug for ProductEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProductEvent(n={}, {:?}, size={})", self.n, self.orientation, self.len())
    }
}

/// Exact `P(A ∩ B)` against `P(A) P(B)` for two events of equal orientation.
pub fn fkg_product_check(a: &ProductEvent, b: &ProductEvent) -> Result<Correlation> {
    if a.n != b.n {
        return Err(Error::SizeMismatch { left: a.n, right: b.n });
    }
    if a.orientation != b.orientation {
        return Err(Error::InvalidParameter("events have opposite monotonicity".into()));
    }
    let total = factorial(a.n);
    Ok(Correlation::from_counts(
        a.members.and_count(&b.members),
        a.len(),
        b.len(),
        total * total,
    ))
}

/// Exact probabilities of the four corner events
/// `{min Z ≥ 0 over a quadrant}` with side `N = ⌈n/2⌉`, quadrants
/// `[0, N]` and `[n − N, n]` in each coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CornerEvents {
    pub n: usize,
    /// Top-left, bottom-left, top-right, bottom-right.
    pub probabilities: [Exact; 4],
    pub comparable: Exact,
}

impl CornerEvents {
    pub fn all_equal(&self) -> bool {
        self.probabilities.iter().all(|p| *p == self.probabilities[0])
    }

    /// `P(π ≤ τ) ≥ ∏ P(E_j)`.
    pub fn product_bound_holds(&self) -> bool {
        self.comparable >= self.probabilities.iter().product::<Exact>()
    }

    /// Each corner event contains `{π ≤ τ}`.
    pub fn containment_holds(&self) -> bool {
        self.probabilities.iter().all(|p| *p >= self.comparable)
    }
}

pub fn corner_events_equal(n: usize, exec: &Executor) -> Result<CornerEvents> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    if n > CORNER_CAP {
        return Err(Error::TooLarge { what: "corner events", n, cap: CORNER_CAP });
    }
    let half = n.div_ceil(2);
    let low = (0, half);
    let high = (n - half, n);
    let quadrants = [(low, low), (high, low), (low, high), (high, high)];
    let graph = cover_graph(n);
    // Rows of the pair table are independent; sum counts per first permutation.
    let per_row = exec.map_items(&graph.perms, |p| {
        let mut counts = [0u64; 5];
        for t in &graph.perms {
            let z = z_table(p, t).expect("same size");
            let mut all = true;
            for (k, (rows, cols)) in quadrants.iter().enumerate() {
                let ok = (rows.0..=rows.1).all(|a| (cols.0..=cols.1).all(|b| z.get(a, b) >= 0));
                counts[k] += u64::from(ok);
                all &= ok;
            }
            counts[4] += u64::from(all);
        }
        counts
    });
    let mut totals = [0u64; 5];
    for row in per_row {
        for (t, c) in totals.iter_mut().zip(row) {
            *t += c;
        }
    }
    let total = factorial(n) as i128;
    let prob = |c: u64| Exact::new(c as i128, total * total);
    Ok(CornerEvents {
        n,
        probabilities: [prob(totals[0]), prob(totals[1]), prob(totals[2]), prob(totals[3])],
        comparable: prob(totals[4]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::is_leq_strong;
    use crate::perm::permutations_lex;

    fn perm(v: &[u32]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn trivial_upsets() {
        let e = UpSet::generated_by(4, &[]).unwrap();
        assert!(e.is_empty());
        assert_eq!(UpSet::full(4).unwrap().len(), 24);
        let top = UpSet::generated_by(4, &[Permutation::reverse(4).unwrap()]).unwrap();
        assert_eq!(top.len(), 1);
        assert!(UpSet::empty(7).is_err());
    }

    #[test]
    fn closure_matches_order_definition() {
        let g = [perm(&[2, 1, 3, 4]), perm(&[1, 3, 4, 2])];
        let up = UpSet::generated_by(4, &g).unwrap();
        for q in permutations_lex(4) {
            let expected = g.iter().any(|p| is_leq_strong(p, &q).unwrap().leq);
            assert_eq!(up.contains(&q), expected, "{q}");
        }
        assert_eq!(up.generators(), vec![g[1].clone(), g[0].clone()]);
    }

    #[test]
    fn random_upsets_are_closed() {
        let key = StreamKey::new(1);
        for n in 1..=5 {
            for i in 0..50 {
                let up = random_upset(n, &mut key.trial(i)).unwrap();
                assert!(up.check_closure());
                assert!(!up.is_empty());
            }
        }
    }

    #[test]
    fn fkg_trivial_cases() {
        let key = StreamKey::new(2);
        let a = random_upset(5, &mut key.trial(0)).unwrap();
        let c = fkg_check(&a, &a).unwrap();
        assert!(c.holds());
        let full = UpSet::full(5).unwrap();
        assert_eq!(fkg_check(&full, &a).unwrap().margin(), Exact::from_integer(0));
        assert!(fkg_check(&a, &UpSet::full(4).unwrap()).is_err());
    }

    #[test]
    fn sweep_is_clean_and_worker_independent() {
        let a = fkg_sweep(4, 60, 3, &Executor::new(1)).unwrap();
        let b = fkg_sweep(4, 60, 3, &Executor::new(4)).unwrap();
        assert_eq!(a.violations, 0);
        assert_eq!(a.complement_failures, 0);
        assert_eq!(a, b);
    }

    #[test]
    fn product_event_monotonicity_is_verified() {
        let ok = ProductEvent::new(3, Orientation::DownUp, |p, t| is_leq_strong(p, t).unwrap().leq);
        assert!(ok.is_ok());
        let wrong = ProductEvent::new(3, Orientation::UpDown, |p, t| is_leq_strong(p, t).unwrap().leq);
        assert!(wrong.is_err());
        // Not monotone at all: a single pair.
        let id = Permutation::identity(3).unwrap();
        let bad = ProductEvent::new(3, Orientation::DownUp, |p, t| *p == id && *t == id);
        assert!(bad.is_err());
        assert!(ProductEvent::everything(5, Orientation::DownUp).is_err());
    }

    #[test]
    fn product_checks() {
        for n in 2..=4usize {
            let h = n.div_ceil(2);
            let e1 = ProductEvent::z_nonnegative(n, (0, h), (0, h)).unwrap();
            assert!(fkg_product_check(&e1, &e1).unwrap().holds());
            let all = ProductEvent::everything(n, Orientation::DownUp).unwrap();
            assert_eq!(fkg_product_check(&all, &e1).unwrap().margin(), Exact::from_integer(0));
        }
        for a in 1..=4 {
            for b in 1..=4 {
                for c in 1..=4 {
                    for d in 1..=4 {
                        let x = ProductEvent::z_nonnegative(4, (a, a), (b, b)).unwrap();
                        let y = ProductEvent::z_nonnegative(4, (c, c), (d, d)).unwrap();
                        assert!(fkg_product_check(&x, &y).unwrap().holds(), "({a},{b}) ({c},{d})");
                    }
                }
            }
        }
    }

    #[test]
    fn corner_values() {
        let exec = Executor::new(2);
        let expected = [(2, 3, 4), (3, 19, 36), (4, 308, 576), (5, 5316, 14400)];
        for &(n, num, den) in &expected {
            let c = corner_events_equal(n, &exec).unwrap();
            assert!(c.all_equal(), "n={n}: {c:?}");
            assert_eq!(c.probabilities[0], Exact::new(num, den));
            assert!(c.containment_holds());
            assert!(c.product_bound_holds());
        }
        let c = corner_events_equal(3, &exec).unwrap();
        assert_eq!(c.comparable, Exact::new(19, 36));
        assert!(corner_events_equal(6, &exec).is_err());
    }
}
