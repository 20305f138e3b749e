//! Strong and weak Bruhat order on `S_n`.
//!
//! The production test is the prefix-count criterion: `π ≤ τ` iff
//! `X_τ(a, b) ≤ X_π(a, b)` for all `a, b ≤ n`. Cover-graph reachability is
//! kept as an exponential-time oracle for small `n`.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Executor;
use crate::perm::{factorial, permutations_lex, Permutation};

/// Largest `n` accepted by [`reachability_leq`].
pub const REACHABILITY_CAP: usize = 8;
/// Default cap for [`exact_comparability_count`].
pub const EXACT_DEFAULT_CAP: usize = 6;
/// Hard cap for [`exact_comparability_count`] with the override set.
pub const EXACT_OVERRIDE_CAP: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparabilityVerdict {
    pub leq: bool,
    /// First `(a, b)` in row-major order where the criterion fails.
    pub witness: Option<(usize, usize)>,
}

fn check_sizes(p: &Permutation, t: &Permutation) -> Result<()> {
    if p.len() != t.len() {
        return Err(Error::SizeMismatch {
            left: p.len(),
            right: t.len(),
        });
    }
    Ok(())
}

/// Strong Bruhat comparison `p ≤ t`.
///
/// Rows are added one at a time while `z[b] = Z(a, b)` is kept for every
/// column. Adding row `a` changes `z` only on the columns between `p(a)` and
/// `t(a)`, and only a decrease (when `t(a) < p(a)`) can create a violation,
/// so the scan stops at the first negative entry.
pub fn is_leq_strong(p: &Permutation, t: &Permutation) -> Result<ComparabilityVerdict> {
    check_sizes(p, t)?;
    let mut z = vec![0i32; p.len() + 1];
    Ok(scan_strong(p.as_slice(), t.as_slice(), &mut z))
}

/// Allocation-free variant of [`is_leq_strong`] for hot loops. `scratch` is
/// resized as needed; sizes must already agree.
#[inline]
pub fn leq_strong_raw(p: &[u32], t: &[u32], scratch: &mut Vec<i32>) -> bool {
    debug_assert_eq!(p.len(), t.len());
    scratch.clear();
    scratch.resize(p.len() + 1, 0);
    scan_strong(p, t, scratch).leq
}

#[inline]
fn scan_strong(p: &[u32], t: &[u32], z: &mut [i32]) -> ComparabilityVerdict {
    for (row, (&pa, &ta)) in p.iter().zip(t).enumerate() {
        let (pa, ta) = (pa as usize, ta as usize);
        if pa < ta {
            for v in &mut z[pa..ta] {
                *v += 1;
            }
        } else if ta < pa {
            for (b, v) in z[ta..pa].iter_mut().enumerate() {
                *v -= 1;
                if *v < 0 {
                    return ComparabilityVerdict {
                        leq: false,
                        witness: Some((row + 1, ta + b)),
                    };
                }
            }
        }
    }
    ComparabilityVerdict {
        leq: true,
        witness: None,
    }
}

/// Set of value pairs `(x, y)`, `x < y`, with `y` appearing before `x`.
fn value_inversions(p: &Permutation) -> Vec<Vec<bool>> {
    let n = p.len();
    let pos = p.inverse();
    let mut inv = vec![vec![false; n + 1]; n + 1];
    for x in 1..=n {
        for y in x + 1..=n {
            inv[x][y] = pos.image(y) < pos.image(x);
        }
    }
    inv
}

/// Right weak order: the value-inversion set of `p` is contained in that of `t`.
pub fn is_leq_weak(p: &Permutation, t: &Permutation) -> Result<bool> {
    check_sizes(p, t)?;
    let (ip, it) = (value_inversions(p), value_inversions(t));
    Ok(ip
        .iter()
        .zip(&it)
        .all(|(rp, rt)| rp.iter().zip(rt).all(|(&a, &b)| !a || b)))
}

/// Strong-order covers of `p`: swap positions `i < j` with `p(i) < p(j)`
/// when no position strictly between holds a value strictly between them.
pub fn covering_successors(p: &Permutation) -> Vec<Permutation> {
    let s = p.as_slice();
    let n = s.len();
    let mut out = Vec::new();
    for i in 0..n {
        // Smallest value above s[i] seen so far between i and j.
        let mut ceiling = u32::MAX;
        for j in i + 1..n {
            if s[j] > s[i] && s[j] < ceiling {
                let mut q = s.to_vec();
                q.swap(i, j);
                out.push(Permutation::from_vec_unchecked(q));
                ceiling = s[j];
            }
        }
    }
    out
}

/// Cover graph of `S_n` indexed by lexicographic rank.
pub(crate) struct CoverGraph {
    pub(crate) perms: Vec<Permutation>,
    pub(crate) successors: Vec<Vec<u32>>,
}

impl CoverGraph {
    fn build(n: usize) -> Self {
        let perms: Vec<_> = permutations_lex(n).collect();
        let successors = perms
            .iter()
            .map(|p| covering_successors(p).iter().map(|q| q.lex_rank() as u32).collect())
            .collect();
        Self { perms, successors }
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.perms.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.successors[u] {
                if !std::mem::replace(&mut seen[v as usize], true) {
                    queue.push_back(v as usize);
                }
            }
        }
        seen
    }
}

pub(crate) fn cover_graph(n: usize) -> Arc<CoverGraph> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<CoverGraph>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("cover graph cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(CoverGraph::build(n)))
        .clone()
}

/// Oracle: `t` is reachable from `p` along strong-order covers.
pub fn reachability_leq(p: &Permutation, t: &Permutation) -> Result<bool> {
    check_sizes(p, t)?;
    let n = p.len();
    if n > REACHABILITY_CAP {
        return Err(Error::TooLarge {
            what: "cover-graph reachability",
            n,
            cap: REACHABILITY_CAP,
        });
    }
    if p == t {
        return Ok(true);
    }
    let graph = cover_graph(n);
    let (start, goal) = (p.lex_rank(), t.lex_rank());
    let goal_len = t.inversion_count();
    let mut seen = vec![false; graph.perms.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &graph.successors[u] {
            let v = v as usize;
            if v == goal {
                return Ok(true);
            }
            // Covers raise length by one; nothing past goal's length can lead back.
            if !seen[v] && graph.perms[v].inversion_count() < goal_len {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    Ok(false)
}

/// Exact number of ordered pairs `(π, τ) ∈ S_n²` with `π ≤ τ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactCount {
    pub n: usize,
    pub comparable_pairs: u64,
    pub total_pairs: u64,
}

impl ExactCount {
    pub fn probability(&self) -> f64 {
        self.comparable_pairs as f64 / self.total_pairs as f64
    }

    pub fn ratio(&self) -> num_rational::Ratio<u64> {
        num_rational::Ratio::new(self.comparable_pairs, self.total_pairs)
    }
}

/// Counts comparable pairs by running the prefix-count test on all of
/// `S_n × S_n`. The outer permutation is split across workers.
pub fn exact_comparability_count(n: usize, allow_seven: bool, exec: &Executor) -> Result<ExactCount> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    let cap = if allow_seven { EXACT_OVERRIDE_CAP } else { EXACT_DEFAULT_CAP };
    if n > cap {
        return Err(Error::TooLarge {
            what: "exhaustive comparability count",
            n,
            cap,
        });
    }
    let perms: Vec<Vec<u32>> = permutations_lex(n).map(Permutation::into_vec).collect();
    let per_outer = exec.map_items(&perms, |p| {
        let mut scratch = Vec::with_capacity(n + 1);
        perms.iter().filter(|t| leq_strong_raw(p, t, &mut scratch)).count() as u64
    });
    let total = factorial(n) * factorial(n);
    Ok(ExactCount {
        n,
        comparable_pairs: per_outer.into_iter().sum(),
        total_pairs: total,
    })
}

/// Second route to the same count through cover-graph closures.
pub fn exact_count_by_closure(n: usize) -> Result<ExactCount> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    if n > 5 {
        return Err(Error::TooLarge {
            what: "cover-closure count",
            n,
            cap: 5,
        });
    }
    let graph = cover_graph(n);
    let comparable = (0..graph.perms.len())
        .map(|s| graph.reachable_from(s).iter().filter(|&&r| r).count() as u64)
        .sum();
    Ok(ExactCount {
        n,
        comparable_pairs: comparable,
        total_pairs: factorial(n) * factorial(n),
    })
}
