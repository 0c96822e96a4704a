//! Exact checks behind the small-ball lower bound on det Sigma: the
//! difference-determinant inequality, the permanent/determinant bounds on
//! the Cauchy matrix and the ratio bound for the design points.

use laplace_entropy::smallball::{
    delta_sequence, det_sigma, det_sigma_lower, det_sigma_threshold, lemma1_trials, lemma2_verify,
    ratio_bound_check,
};
use laplace_entropy::linalg::bigfloat::to_scientific;

fn main() -> laplace_entropy::Result<()> {
    let t = lemma1_trials(100, 5, 1)?;
    println!("difference-determinant bound: {} / {} random 5x5 pairs, smallest gap {:e}", t.holds, t.trials, t.min_gap);

    for m in 1..=3 {
        let d = delta_sequence(m)?;
        let ratio = ratio_bound_check(&d);
        let r = lemma2_verify(m)?;
        println!("m = {m}: {} points, min delta {}", d.n(), d.min());
        println!("  ratio bound symbolic {} / high precision {}", ratio.symbolic_holds, ratio.high_precision_holds);
        println!("  per = {} <= 1: {}", r.permanent.decimal, r.permanent_le_one);
        println!("  det = {} >= {}: {}", r.determinant.decimal, r.determinant_threshold, r.determinant_ge_threshold);
        let lower = det_sigma_lower(m)?;
        let direct = det_sigma(m, 1024)?;
        println!(
            "  det Sigma >= {} (rigorous), computed {} +/- {}",
            lower.value,
            to_scientific(&direct.value, 12),
            to_scientific(&direct.error_bound, 3)
        );
    }
    println!("lower bound exceeds exp(-16 m^3) from m = {:?}", det_sigma_threshold(8)?);
    Ok(())
}
