//! Build an epsilon-bracket [lower, upper] around a mixture, verify it and
//! compare the bracket count over random measures with the counting bound.

use laplace_entropy::bracket::{
    build_bracket, empirical_bracket_count, realization_count_bound, remainder_bounds_check,
    BracketConfig,
};
use laplace_entropy::measure::{laplace_eval, random_measure, BaseMeasure, MixingMeasure};

fn main() -> laplace_entropy::Result<()> {
    let nu = BaseMeasure::LebesgueUnitInterval;
    let mu = MixingMeasure::new([(0.05, 0.2), (1.5, 0.5), (40.0, 0.3)])?;

    for (eps, p) in [(0.2, 1.0), (0.1, 2.0)] {
        let config = BracketConfig::lebesgue_default(eps, p)?;
        let pair = build_bracket(&mu, &config, &nu)?;
        println!(
            "eps {eps}, p {p}: gamma {:.3e}, {} blocks, degree {}, width {:.4e}, id {}",
            config.gamma,
            config.m,
            config.taylor_degree,
            pair.width.value,
            pair.fingerprint()
        );
        for t in [0.0, 0.01, 0.2, 0.9] {
            println!(
                "  t = {t:<5} {:.6} <= {:.6} <= {:.6}",
                pair.lower_value(t),
                laplace_eval(&mu, t)?,
                pair.upper_value(t)
            );
        }
        let c = pair.verify_containment(&mu, 10_000);
        println!("  containment: {} violations in {} points", c.violations, c.points);
        let r = remainder_bounds_check(&mu, &config, 8)?;
        println!(
            "  Taylor remainder {:.2e} <= {:.2e}, tail {:.2e} <= {:.2e}",
            r.max_taylor_remainder, r.taylor_bound, r.max_tail, r.tail_bound
        );
    }

    let config = BracketConfig::lebesgue_default(0.1, 2.0)?;
    let measures: Vec<MixingMeasure> = (0..200).map(|s| random_measure(s, 3, 1.0)).collect::<Result<_, _>>()?;
    let count = empirical_bracket_count(&measures, &config, &nu)?;
    println!(
        "{count} distinct brackets for 200 measures; log of the counting bound = {:.1}",
        realization_count_bound(&config)
    );
    Ok(())
}
