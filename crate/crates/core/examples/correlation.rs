//! Positive correlation of increasing events in the strong order, and the
//! four corner events whose intersection is {π ≤ τ}.
//!
//! `cargo run --example correlation`

use bruhat::fkg::{corner_events_equal, fkg_check, fkg_product_check, fkg_sweep, random_upset, Exact, ProductEvent};
use bruhat::{Executor, StreamKey};

fn main() -> bruhat::Result<()> {
    let exec = Executor::available();
    let mut rng = StreamKey::new(8).trial(0);
    let a = random_upset(5, &mut rng)?;
    let b = random_upset(5, &mut rng)?;
    let c = fkg_check(&a, &b)?;
    println!("A = {a:?}\nB = {b:?}");
    println!("P(A∩B) = {} ≥ P(A)P(B) = {}: {}", c.lhs, c.rhs, c.holds());

    for n in 3..=5 {
        let s = fkg_sweep(n, 200, 8, &exec)?;
        println!("n = {n}: {} random pairs, {} violations, smallest margin {}", s.pairs, s.violations, s.extremal.1.margin());
    }

    println!();
    for n in 2..=5 {
        let c = corner_events_equal(n, &exec)?;
        let prod: Exact = c.probabilities.iter().product();
        println!(
            "n = {n}: P(E_1..E_4) = {:?}, P(π ≤ τ) = {} ≥ ∏ = {prod}: {}",
            c.probabilities.map(|p| p.to_string()),
            c.comparable,
            c.product_bound_holds()
        );
    }

    let e1 = ProductEvent::z_nonnegative(4, (0, 2), (0, 2))?;
    let e4 = ProductEvent::z_nonnegative(4, (2, 4), (2, 4))?;
    let c = fkg_product_check(&e1, &e4)?;
    println!("\nn = 4 product space: P(E_1 ∩ E_4) = {} ≥ {}: {}", c.lhs, c.rhs, c.holds());
    Ok(())
}
