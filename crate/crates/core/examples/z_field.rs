//! The field Z(a, b) = X(a, b) − Y(a, b) of a pair and statistics of the
//! centred prefix counts of a single permutation.
//!
//! `cargo run --example z_field`

use bruhat::perm::sample_uniform;
use bruhat::zproc::{
    box_min_z, decompose_check, max_rect_stat, max_strip_stat, rect_normalizer, strip_normalizer, z_table,
};
use bruhat::{Executor, StreamKey};

fn main() -> bruhat::Result<()> {
    let mut rng = StreamKey::new(4).trial(0);
    let p = sample_uniform(8, &mut rng)?;
    let t = sample_uniform(8, &mut rng)?;
    let z = z_table(&p, &t)?;
    println!("π = [{p}], τ = [{t}]\nZ(a, b):");
    for a in 0..=8 {
        let row: Vec<String> = (0..=8).map(|b| format!("{:>3}", z.get(a, b))).collect();
        println!("  {}", row.join(""));
    }
    let (min, (a, b)) = z.min_with_argmin();
    println!("min Z = {min} at ({a}, {b}); π ≤ τ: {}", min >= 0);
    println!("rectangle decomposition at (3,2)→(7,6) adds up: {}", decompose_check(&p, &t, 3, 2, 7, 6)?);

    let n = 400;
    let p = sample_uniform(n, &mut rng)?;
    let t = sample_uniform(n, &mut rng)?;
    println!("\nn = {n}: min Z over [100,125]×[160,200] = {}", box_min_z(p.as_slice(), t.as_slice(), 100, 160));

    let exec = Executor::available();
    let key = StreamKey::new(5);
    println!("\nmaximal deviations at n = 1024 (500 trials):");
    for (x, y) in [(64, 64), (64, 512), (512, 512)] {
        let r = max_rect_stat(key, 1024, x, y, 500, &exec)?;
        let s = max_strip_stat(key, 1024, x, y, 500, &exec)?;
        println!(
            "  x={x:>3} y={y:>3}: rect {:.3} (/{:.2} = {:.3}), strip {:.3} (/{:.2} = {:.3})",
            r.mean,
            rect_normalizer(1024, x, y),
            r.mean / rect_normalizer(1024, x, y),
            s.mean,
            strip_normalizer(1024, x, y),
            s.mean / strip_normalizer(1024, x, y)
        );
    }
    Ok(())
}
