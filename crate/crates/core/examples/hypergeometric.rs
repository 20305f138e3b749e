//! Exact hypergeometric laws of box counts, the Bernstein-type tail bound
//! and the conditional law inside a frame.
//!
//! `cargo run --example hypergeometric`

use bruhat::dist::{
    bernstein_bound, box_count_law, box_count_law_check, frame_conditional_check, Frame, HyperGeomParams,
};
use bruhat::{Executor, Rectangle, StreamKey};

fn main() -> bruhat::Result<()> {
    let exec = Executor::available();
    let n = 100;
    let rect = Rectangle::new(0, 20, 0, 30)?;
    let law = box_count_law(n, &rect)?;
    let m = law.moments()?;
    println!("points of a uniform permutation of {n} in a 20×30 box ~ {law:?}");
    println!("  mean {} , variance {} (exact)", m.mean, m.variance);
    println!("  P(count = 6) = {} ≈ {:.6}", law.pmf_exact(6), law.pmf(6));
    let gof = box_count_law_check(n, &rect, 100_000, StreamKey::new(1), &exec)?;
    println!("  100000 samples: TV {:.4}, chi² p-value {:.3}", gof.tv_distance, gof.p_value);

    println!("\ntail bound 2·exp(−min(t²/(ab/n), t)/16) vs exact two-sided tail, n=400 a=100 b=200:");
    let law = HyperGeomParams::new(400, 200, 100)?;
    let mean = law.mean_f64();
    for mult in [1.0, 2.0, 4.0, 8.0] {
        let t = mult * mean.sqrt();
        let exact: f64 = law
            .pmf_table()
            .iter()
            .filter(|(k, _)| (*k as f64 - mean).abs() >= t)
            .map(|(_, p)| p)
            .sum::<f64>()
            .max(0.0);
        let bound = bernstein_bound(&law, t, false)?;
        println!("  t = {t:>6.2}: tail {exact:.3e}  bound {:.3e}", bound.value);
    }

    println!("\nconditioning on the frame around [10]×[10] at n = 60 (one point at (11, 11)):");
    let frame = Frame::new(60, 10, 12, 10, 12)?;
    let check = frame_conditional_check(60, &frame, &[(11, 11)], 20_000, 1 << 26, StreamKey::new(2), &exec)?;
    println!(
        "  law {:?}; {} of {} samples accepted; TV {:.4}",
        check.law, check.accepted, check.trials, check.report.tv_distance
    );
    Ok(())
}
