//! Monte Carlo estimate of P(max over a grid of |Y(t)| < eps), the effect of
//! doubling the grid, and the scaling fit of log(-log p) on log|log eps|.
//!
//! `cargo run --release --example sup_simulation -- 200000 4` sets the
//! sample count and worker count.

use laplace_entropy::sim::{build_grid, scaling_fit, simulate_refinement, SimConfig};

fn main() -> laplace_entropy::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples = args.next().and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let workers = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let config = SimConfig {
        epsilons: vec![0.5, 0.4, 0.3, 0.25, 0.2, 0.15],
        samples,
        seed: 2024,
        grid: build_grid(0.15, 128)?,
        workers,
    };
    let r = simulate_refinement(&config)?;
    println!("grid {} points (jitter {:e}), refined {} points", r.coarse.grid_points, r.coarse.jitter, r.fine.grid_points);
    for ((c, f), s) in r.coarse.rows.iter().zip(&r.fine.rows).zip(&r.shift) {
        println!(
            "eps {:<5} p_hat {:.5} [{:.5}, {:.5}]  refined {:.5}  shift {:+.2e}",
            c.epsilon, c.p_hat, c.ci_lo, c.ci_hi, f.p_hat, s
        );
    }
    let fit = scaling_fit(&r.coarse.rows)?;
    println!("slope {:.3}, 95% CI ({:.3}, {:.3})", fit.slope, fit.slope_ci.0, fit.slope_ci.1);
    Ok(())
}
