//! Upper bounds on log P(sup |Y| < eps): the analytic bound at the optimal
//! number of design levels and the bound using a computed det Sigma.

use laplace_entropy::smallball::{optimal_m_log, smallball_log_upper, Provenance};

fn main() -> laplace_entropy::Result<()> {
    println!("{:>10} {:>4} {:>16} {:>16}", "log eps", "m", "log bound", "-|log eps|^3/432");
    for k in 1..=8 {
        let log_eps = -12.0 * k as f64 - 5.0;
        let o = optimal_m_log(log_eps)?;
        println!("{log_eps:>10} {:>4} {:>16.4} {:>16.4}", o.m, o.log_bound, o.continuous_bound);
    }
    for eps in [0.1, 1e-3] {
        for m in 1..=3 {
            let a = smallball_log_upper(eps, m, Provenance::AnalyticDet, 1024)?;
            let c = smallball_log_upper(eps, m, Provenance::ComputedDet, 1024)?;
            println!(
                "eps {eps:e}, m {m}: analytic {:.3}, computed {:.3} (log det Sigma {:.3})",
                a.log_prob_bound,
                c.log_prob_bound,
                c.log_det_sigma.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
