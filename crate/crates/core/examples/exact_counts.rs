//! Exhaustive counts of comparable pairs in S_n.
//!
//! `cargo run --example exact_counts`

use bruhat::order::{exact_comparability_count, exact_count_by_closure};
use bruhat::Executor;

fn main() -> bruhat::Result<()> {
    let exec = Executor::available();
    println!("{:>2} {:>10} {:>12} {:>20} {:>10}", "n", "pairs", "of", "probability", "closure");
    for n in 1..=6 {
        let c = exact_comparability_count(n, false, &exec)?;
        let closure = if n <= 5 {
            if exact_count_by_closure(n)? == c { "agrees" } else { "DIFFERS" }
        } else {
            "-"
        };
        println!(
            "{n:>2} {:>10} {:>12} {:>20} {closure:>10}",
            c.comparable_pairs,
            c.total_pairs,
            format!("{} ≈ {:.5}", c.ratio(), c.probability()),
        );
    }
    Ok(())
}
