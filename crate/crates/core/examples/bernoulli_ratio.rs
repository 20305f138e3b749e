//! How closely the corner count of a uniform permutation matches a
//! Binomial(N², 1/n) count, with N = ⌊n^{7/12}⌋ and k ≤ n^{1/5}.
//!
//! `cargo run --example bernoulli_ratio`

use bruhat::dist::{bernoulli_ratio, corner_side, count_cap};

fn main() -> bruhat::Result<()> {
    for n in [16u64, 10_000, 1_000_000, 100_000_000] {
        let cap = count_cap(n);
        println!("n = {n}: N = {}, k ≤ {cap}", corner_side(n));
        let mut worst = 0.0f64;
        for k in 0..=cap {
            let r = bernoulli_ratio(n, k)?;
            worst = worst.max((r.ratio - 1.0).abs());
            let route = if r.exact_arithmetic { "exact" } else { "log" };
            println!("  k = {k:>2}: {:.6} ({route})", r.ratio);
        }
        println!("  max |ratio − 1| = {worst:.5}");
    }
    Ok(())
}
