//! Comparing permutations in the strong and weak orders.
//!
//! `cargo run --example compare -- "3 1 2" "3 2 1"`

use bruhat::order::{covering_successors, is_leq_weak, reachability_leq};
use bruhat::{is_leq_strong, Permutation, Symmetry};

fn main() -> bruhat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (p, t): (Permutation, Permutation) = match args.as_slice() {
        [a, b] => (a.parse()?, b.parse()?),
        _ => ("2 4 1 3".parse()?, "4 2 3 1".parse()?),
    };

    let v = is_leq_strong(&p, &t)?;
    println!("π = [{p}], τ = [{t}]");
    println!("strong: π ≤ τ is {}", v.leq);
    if let Some((a, b)) = v.witness {
        println!("  first failing prefix count at (a, b) = ({a}, {b})");
    }
    println!("weak:   π ≤ τ is {}", is_leq_weak(&p, &t)?);
    if p.len() <= 8 {
        println!("cover-graph oracle agrees: {}", reachability_leq(&p, &t)? == v.leq);
    }

    println!("\nlengths: ℓ(π) = {}, ℓ(τ) = {}", p.inversion_count(), t.inversion_count());
    println!("covers of π:");
    for q in covering_successors(&p) {
        println!("  [{q}]");
    }

    // Reversing rows reverses the order; transposing preserves it.
    let rr = |q: &Permutation| q.symmetry(Symmetry::RowReverse);
    let tr = |q: &Permutation| q.symmetry(Symmetry::Transpose);
    println!("\nrow-reverse: rr(τ) ≤ rr(π) is {}", is_leq_strong(&rr(&t), &rr(&p))?.leq);
    println!("transpose:   πᵀ ≤ τᵀ is {}", is_leq_strong(&tr(&p), &tr(&t))?.leq);
    Ok(())
}
