//! Evaluate a completely monotone function given by an atomic mixing measure,
//! check complete monotonicity numerically and compare two mixtures in L^p.

use laplace_entropy::measure::{
    complete_monotonicity_check, laplace_eval, lp_distance, mixture_density_eval, random_measure,
    BaseMeasure, LpParams, MixingMeasure,
};

fn main() -> laplace_entropy::Result<()> {
    let mu = MixingMeasure::new([(0.5, 0.3), (2.0, 0.5), (7.5, 0.2)])?;
    println!("mu = {}", mu.to_json_string()?);
    for t in [0.0, 0.1, 0.5, 1.0, 5.0] {
        println!(
            "f({t:>4}) = {:.12}   f'({t:>4}) = {:.12}",
            laplace_eval(&mu, t)?,
            mixture_density_eval(&mu, t)?
        );
    }

    let grid: Vec<f64> = (5..80).map(|k| k as f64 * 0.05).collect();
    let report = complete_monotonicity_check(&mu, 4, &grid, 0.05)?;
    println!("completely monotone to order 4 on the grid: {}", report.passed);

    let nu = BaseMeasure::LebesgueUnitInterval;
    let other = random_measure(11, 4, 1.0)?;
    for p in [1.0, 2.0, f64::INFINITY] {
        let d = lp_distance(&mu, &other, &nu, &LpParams::new(p, 24)?)?;
        println!("L^{p} distance to a random mixture: {:.6e} (+/- {:.1e})", d.value, d.error_bound);
    }
    Ok(())
}
