//! Permutations of `[n]`, their prefix-count tables and symmetries.
//!
//! A permutation is stored in one-line notation with 1-based values:
//! `map[i] = π(i + 1)`. The permutation matrix `M_π(i, j) = [π(i) = j]` is
//! never materialized; everything is phrased in terms of prefix counts
//! `X(a, b) = #{ i ≤ a : π(i) ≤ b }`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` for which [`DominanceTable`] is materialized in full.
pub const DOMINANCE_TABLE_CAP: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Permutation {
    map: Vec<u32>,
}

impl Permutation {
    /// Validates one-line notation.
    pub fn new(map: Vec<u32>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::InvalidSize(0));
        }
        let mut seen = vec![false; n + 1];
        for (i, &v) in map.iter().enumerate() {
            let v = v as usize;
            if v == 0 || v > n {
                return Err(Error::NotAPermutation {
                    n,
                    reason: format!("value {v} at position {} is outside 1..={n}", i + 1),
                });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::NotAPermutation {
                    n,
                    reason: format!("value {v} repeated at position {}", i + 1),
                });
            }
        }
        Ok(Self { map })
    }

    /// Caller guarantees `map` is a bijection of `1..=n`.
    pub(crate) fn from_vec_unchecked(map: Vec<u32>) -> Self {
        debug_assert!(Self::new(map.clone()).is_ok());
        Self { map }
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize(0));
        }
        Ok(Self::from_vec_unchecked((1..=n as u32).collect()))
    }

    /// `i ↦ n + 1 − i`, the Bruhat maximum.
    pub fn reverse(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize(0));
        }
        Ok(Self::from_vec_unchecked((1..=n as u32).rev().collect()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `π(i)` for `1 ≤ i ≤ n`.
    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.map[i - 1] as usize
    }

    /// One-line notation, `as_slice()[i] = π(i + 1)`.
    #[inline]
    pub fn as_slice(&self) -> &[u32] {
        &self.map
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| v as usize == i + 1)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v as usize - 1] = i as u32 + 1;
        }
        Self::from_vec_unchecked(inv)
    }

    /// Number of pairs `i < j` with `π(i) > π(j)`, in `O(n log n)`.
    pub fn inversion_count(&self) -> u64 {
        let n = self.len();
        let mut fenwick = vec![0u32; n + 1];
        let mut inversions = 0u64;
        for (seen, &v) in self.map.iter().enumerate() {
            // values already placed that are <= v
            let mut le = 0u64;
            let mut k = v as usize;
            while k > 0 {
                le += u64::from(fenwick[k]);
                k &= k - 1;
            }
            inversions += seen as u64 - le;
            let mut k = v as usize;
            while k <= n {
                fenwick[k] += 1;
                k += k & k.wrapping_neg();
            }
        }
        inversions
    }

    pub fn symmetry(&self, kind: Symmetry) -> Self {
        let n = self.len() as u32;
        let map = match kind {
            Symmetry::RowReverse => self.map.iter().rev().copied().collect(),
            Symmetry::ColumnReverse => self.map.iter().map(|&v| n + 1 - v).collect(),
            Symmetry::Transpose => return self.inverse(),
            Symmetry::FullReverse => self.map.iter().rev().map(|&v| n + 1 - v).collect(),
        };
        Self::from_vec_unchecked(map)
    }

    pub fn dominance_table(&self) -> Result<DominanceTable> {
        DominanceTable::new(self)
    }

    /// Lexicographic rank in `S_n` (identity has rank 0).
    pub fn lex_rank(&self) -> usize {
        let n = self.len();
        let mut rank = 0usize;
        let mut used = vec![false; n + 1];
        for (i, &v) in self.map.iter().enumerate() {
            let smaller_unused = (1..v as usize).filter(|&u| !used[u]).count();
            rank = rank * (n - i) + smaller_unused;
            used[v as usize] = true;
        }
        rank
    }
}

/// Uniform random permutation of `[n]` by an unbiased Fisher–Yates shuffle.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    let mut map: Vec<u32> = (1..=n as u32).collect();
    shuffle_in_place(&mut map, rng);
    Ok(Permutation::from_vec_unchecked(map))
}

/// Fisher–Yates on an existing buffer, so hot loops can reuse allocations.
#[inline]
pub fn shuffle_in_place<T, R: Rng + ?Sized>(values: &mut [T], rng: &mut R) {
    for i in (1..values.len()).rev() {
        let j = rng.random_range(0..=i);
        values.swap(i, j);
    }
}

/// Fills `buf` with a uniform permutation of `1..=buf.len()` in one-line notation.
#[inline]
pub fn sample_into<R: Rng + ?Sized>(buf: &mut [u32], rng: &mut R) {
    for (i, v) in buf.iter_mut().enumerate() {
        *v = i as u32 + 1;
    }
    shuffle_in_place(buf, rng);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    /// `i ↦ π(n + 1 − i)`: reverses the rows of the matrix.
    RowReverse,
    /// `i ↦ n + 1 − π(i)`: reverses the columns.
    ColumnReverse,
    /// `π⁻¹`.
    Transpose,
    /// `i ↦ n + 1 − π(n + 1 − i)`: rotation by a half turn.
    FullReverse,
}

impl Symmetry {
    pub const ALL: [Symmetry; 4] = [
        Symmetry::RowReverse,
        Symmetry::ColumnReverse,
        Symmetry::Transpose,
        Symmetry::FullReverse,
    ];
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Space-separated one-line notation, e.g. `"2 1 3"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut map = Vec::new();
        for (index, token) in s.split_whitespace().enumerate() {
            let v: u32 = token.parse().map_err(|e: std::num::ParseIntError| Error::Parse {
                index: index + 1,
                token: token.to_string(),
                reason: e.to_string(),
            })?;
            map.push(v);
        }
        let n = map.len();
        if n == 0 {
            return Err(Error::InvalidSize(0));
        }
        let mut seen = vec![false; n + 1];
        for (index, &v) in map.iter().enumerate() {
            let reason = if v == 0 || v as usize > n {
                format!("is outside 1..={n}")
            } else if std::mem::replace(&mut seen[v as usize], true) {
                "repeats an earlier value".to_string()
            } else {
                continue;
            };
            return Err(Error::Parse {
                index: index + 1,
                token: v.to_string(),
                reason,
            });
        }
        Ok(Self { map })
    }
}

impl TryFrom<Vec<u32>> for Permutation {
    type Error = Error;
    fn try_from(map: Vec<u32>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<Permutation> for Vec<u32> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

/// All of `S_n` in lexicographic order of one-line notation.
pub fn permutations_lex(n: usize) -> LexPermutations {
    LexPermutations {
        next: (n > 0).then(|| (1..=n as u32).collect()),
    }
}

pub struct LexPermutations {
    next: Option<Vec<u32>>,
}

impl Iterator for LexPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lex(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation::from_vec_unchecked(current))
    }
}

fn next_lex(v: &mut [u32]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a larger suffix element");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Prefix counts `counts[a][b] = #{ i ≤ a : π(i) ≤ b }` for `0 ≤ a, b ≤ n`.
///
/// Row and column 0 are explicit zeros. Entries are stored in the narrowest
/// unsigned width that holds `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DominanceTable {
    n: usize,
    counts: Counts,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Counts {
    U8(Vec<u8>),
    U16(Vec<u16>),
    U32(Vec<u32>),
}

impl DominanceTable {
    pub fn new(p: &Permutation) -> Result<Self> {
        let n = p.len();
        if n > DOMINANCE_TABLE_CAP {
            return Err(Error::TooLarge {
                what: "dense dominance table (use dominance_rows)",
                n,
                cap: DOMINANCE_TABLE_CAP,
            });
        }
        let counts = if n <= u8::MAX as usize {
            Counts::U8(build(p, |x| x as u8))
        } else if n <= u16::MAX as usize {
            Counts::U16(build(p, |x| x as u16))
        } else {
            Counts::U32(build(p, |x| x))
        };
        Ok(Self { n, counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> u32 {
        let idx = a * (self.n + 1) + b;
        match &self.counts {
            Counts::U8(v) => u32::from(v[idx]),
            Counts::U16(v) => u32::from(v[idx]),
            Counts::U32(v) => v[idx],
        }
    }

    /// Bytes per stored entry.
    pub fn entry_width(&self) -> usize {
        match self.counts {
            Counts::U8(_) => 1,
            Counts::U16(_) => 2,
            Counts::U32(_) => 4,
        }
    }

    /// Checks the structural invariants of a prefix-count table.
    pub fn check_invariants(&self) -> bool {
        let n = self.n;
        for a in 0..=n {
            if self.get(a, 0) != 0 || self.get(0, a) != 0 {
                return false;
            }
            if self.get(a, n) != a as u32 || self.get(n, a) != a as u32 {
                return false;
            }
        }
        for a in 1..=n {
            for b in 1..=n {
                let c = self.get(a, b);
                let da = c.wrapping_sub(self.get(a - 1, b));
                let db = c.wrapping_sub(self.get(a, b - 1));
                if da > 1 || db > 1 {
                    return false;
                }
            }
        }
        true
    }
}

fn build<T: Copy + Default>(p: &Permutation, cast: impl Fn(u32) -> T) -> Vec<T> {
    let n = p.len();
    let w = n + 1;
    let mut out = vec![T::default(); w * w];
    let mut row = vec![0u32; w];
    for a in 1..=n {
        for v in &mut row[p.image(a)..] {
            *v += 1;
        }
        for (dst, &src) in out[a * w..(a + 1) * w].iter_mut().zip(&row) {
            *dst = cast(src);
        }
    }
    out
}

/// Streams the rows of the prefix-count table without materializing it:
/// `f(a, row)` sees `row[b] = X(a, b)` for `a = 1..=n`, in `O(n)` memory.
pub fn dominance_rows(p: &Permutation, mut f: impl FnMut(usize, &[u32])) {
    let n = p.len();
    let mut row = vec![0u32; n + 1];
    for a in 1..=n {
        for v in &mut row[p.image(a)..] {
            *v += 1;
        }
        f(a, &row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use proptest::prelude::*;

    fn perm(v: &[u32]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    fn brute_inversions(p: &Permutation) -> u64 {
        let s = p.as_slice();
        let mut c = 0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                c += u64::from(s[i] > s[j]);
            }
        }
        c
    }

    #[test]
    fn rejects_non_permutations() {
        assert_eq!(Permutation::new(vec![]), Err(Error::InvalidSize(0)));
        assert!(Permutation::new(vec![1, 1]).is_err());
        assert!(Permutation::new(vec![0, 1]).is_err());
        assert!(Permutation::new(vec![1, 3]).is_err());
    }

    #[test]
    fn sample_size_one_and_zero() {
        let mut rng = StreamKey::new(1).trial(0);
        assert_eq!(sample_uniform(1, &mut rng).unwrap(), perm(&[1]));
        assert_eq!(sample_uniform(0, &mut rng), Err(Error::InvalidSize(0)));
    }

    #[test]
    fn sampling_is_deterministic_per_trial() {
        let key = StreamKey::new(2024);
        let a = sample_uniform(50, &mut key.trial(17)).unwrap();
        let b = sample_uniform(50, &mut key.trial(17)).unwrap();
        let c = sample_uniform(50, &mut key.trial(18)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dominance_identity_and_reverse() {
        let id = Permutation::identity(3).unwrap().dominance_table().unwrap();
        let rev = Permutation::reverse(3).unwrap().dominance_table().unwrap();
        for a in 0..=3 {
            for b in 0..=3 {
                assert_eq!(id.get(a, b) as usize, a.min(b));
                assert_eq!(rev.get(a, b) as usize, (a + b).saturating_sub(3));
            }
        }
    }

    #[test]
    fn dominance_small_example() {
        let t = perm(&[2, 1, 3]).dominance_table().unwrap();
        assert_eq!(t.get(1, 1), 0);
        assert_eq!(t.get(2, 1), 1);
        assert_eq!(t.get(2, 2), 2);
    }

    #[test]
    fn dominance_width_tracks_n() {
        let mut rng = StreamKey::new(3).trial(0);
        assert_eq!(sample_uniform(255, &mut rng).unwrap().dominance_table().unwrap().entry_width(), 1);
        assert_eq!(sample_uniform(256, &mut rng).unwrap().dominance_table().unwrap().entry_width(), 2);
    }

    #[test]
    fn dominance_rows_match_table() {
        let p = sample_uniform(40, &mut StreamKey::new(5).trial(1)).unwrap();
        let t = p.dominance_table().unwrap();
        dominance_rows(&p, |a, row| {
            for (b, &v) in row.iter().enumerate() {
                assert_eq!(v, t.get(a, b));
            }
        });
    }

    #[test]
    fn dominance_invariants_on_random_permutations() {
        let key = StreamKey::new(99);
        for t in 0..1000u64 {
            let n = 1 + (t as usize * 37) % 256;
            let p = sample_uniform(n, &mut key.trial(t)).unwrap();
            let d = p.dominance_table().unwrap();
            assert!(d.check_invariants(), "n = {n}, trial {t}");
        }
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(Permutation::identity(6).unwrap().inversion_count(), 0);
        assert_eq!(Permutation::reverse(9).unwrap().inversion_count(), 36);
        assert_eq!(perm(&[2, 3, 1]).inversion_count(), 2);
    }

    #[test]
    fn symmetry_examples() {
        let id = Permutation::identity(3).unwrap();
        assert_eq!(id.symmetry(Symmetry::Transpose), id);
        assert_eq!(perm(&[2, 3, 1]).symmetry(Symmetry::Transpose), perm(&[3, 1, 2]));
        assert_eq!(id.symmetry(Symmetry::FullReverse), id);
    }

    #[test]
    fn full_reverse_is_composition_on_s3() {
        for p in permutations_lex(3) {
            let composed = p.symmetry(Symmetry::RowReverse).symmetry(Symmetry::ColumnReverse);
            let n = p.len();
            let explicit: Vec<u32> = (1..=n).map(|i| (n + 1 - p.image(n + 1 - i)) as u32).collect();
            assert_eq!(p.symmetry(Symmetry::FullReverse), composed);
            assert_eq!(p.symmetry(Symmetry::FullReverse).as_slice(), &explicit[..]);
        }
    }

    #[test]
    fn lex_enumeration_and_rank() {
        let all: Vec<_> = permutations_lex(4).collect();
        assert_eq!(all.len(), 24);
        for (i, p) in all.iter().enumerate() {
            assert_eq!(p.lex_rank(), i);
        }
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn parse_and_display() {
        let p: Permutation = "2 1 3".parse().unwrap();
        assert_eq!(p, perm(&[2, 1, 3]));
        assert_eq!(p.to_string(), "2 1 3");
        match "2 x 3".parse::<Permutation>() {
            Err(Error::Parse { index, token, .. }) => {
                assert_eq!(index, 2);
                assert_eq!(token, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
        match "1 2 2".parse::<Permutation>() {
            Err(Error::Parse { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
        match "1 4 2".parse::<Permutation>() {
            Err(Error::Parse { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_perm(max_n: usize) -> impl Strategy<Value = Permutation> {
        (1..=max_n)
            .prop_flat_map(|n| Just((1..=n as u32).collect::<Vec<_>>()).prop_shuffle())
            .prop_map(|v| Permutation::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn involutions(p in arb_perm(60)) {
            for kind in [Symmetry::RowReverse, Symmetry::ColumnReverse, Symmetry::Transpose] {
                prop_assert_eq!(p.symmetry(kind).symmetry(kind), p.clone());
            }
        }

        #[test]
        fn inversions_complement_under_column_reverse(p in arb_perm(80)) {
            let n = p.len() as u64;
            prop_assert_eq!(p.inversion_count() + p.symmetry(Symmetry::ColumnReverse).inversion_count(), n * (n - 1) / 2);
            prop_assert_eq!(p.inversion_count(), brute_inversions(&p));
        }

        #[test]
        fn second_difference_recovers_matrix(p in arb_perm(40)) {
            let d = p.dominance_table().unwrap();
            let n = p.len();
            for a in 1..=n {
                for b in 1..=n {
                    let diff = d.get(a, b) as i64 - d.get(a - 1, b) as i64 - d.get(a, b - 1) as i64
                        + d.get(a - 1, b - 1) as i64;
                    prop_assert_eq!(diff, i64::from(p.image(a) == b));
                }
            }
        }

        #[test]
        fn display_parse_roundtrip(p in arb_perm(30)) {
            prop_assert_eq!(p.to_string().parse::<Permutation>().unwrap(), p);
        }
    }
}
