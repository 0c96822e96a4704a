//! Simulated probability that |Y| stays below eps on the design points,
//! against the determinant bound and, for one point, the exact normal value.

use laplace_entropy::sim::simulate_delta_probability;
use statrs::function::erf::erf;

fn main() -> laplace_entropy::Result<()> {
    let sigma2 = (1.0 - (-16.0f64).exp()) / 16.0;
    println!("one point, eps 0.1: exact {:.6}", erf(0.1 / (2.0 * sigma2).sqrt()));
    for m in 1..=3 {
        for eps in [0.3, 0.1] {
            let r = simulate_delta_probability(m, eps, 200_000, 7, 2)?;
            let row = &r.result.rows[0];
            println!(
                "m {m}, eps {eps}: p_hat {:.5} [{:.5}, {:.5}], bound {:.4}, consistent {}",
                row.p_hat, row.ci_lo, row.ci_hi, r.analytic_bound, r.consistent
            );
        }
    }
    Ok(())
}
