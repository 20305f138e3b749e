//! Monte Carlo estimates of P(π ≤ τ) and the log-squared decay fit.
//!
//! `cargo run --example scaling_fit`

use bruhat::estimate::{estimate_comparability_until, fit_scaling, FitOptions};
use bruhat::Executor;

fn main() -> bruhat::Result<()> {
    let exec = Executor::available();
    let mut results = Vec::new();
    for n in [4, 6, 8, 12, 16, 24, 32, 48] {
        let r = estimate_comparability_until(n, 200, 1 << 30, 7, &exec)?;
        println!(
            "n = {n:>2}: p̂ = {:.4e}  [{:.4e}, {:.4e}]  ({} of {} trials, {:.1}s)",
            r.p_hat, r.ci_low, r.ci_high, r.successes, r.trials, r.wall_time
        );
        results.push(r);
    }
    let fit = fit_scaling(&results, &FitOptions::default())?;
    println!("\n−ln p̂ ≈ {:.4}(ln n)² + {:.4} ln n + {:.4}", fit.alpha, fit.beta, fit.gamma);
    println!("α = {:.4} ± {:.4}, weighted r² = {:.5}", fit.alpha, fit.alpha_se, fit.r_squared);
    println!(
        "polynomial submodel: −ln p̂ ≈ {:.4} ln n + {:.4}; AICc {:?} vs {:?} → {}",
        fit.sub_beta, fit.sub_gamma, fit.aicc_full, fit.aicc_sub, fit.preferred
    );
    Ok(())
}
