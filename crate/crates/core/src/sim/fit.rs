use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::sampler::SimRow;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitPoint {
    pub epsilon: f64,
    /// `log |log eps|`.
    pub x: f64,
    /// `log(-log p_hat)`.
    pub y: f64,
}

/// Least-squares line through `log(-log p_hat)` against `log |log eps|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// 95% t-interval for the slope.
    pub slope_ci: (f64, f64),
    pub points: Vec<FitPoint>,
}

impl ScalingFit {
    /// Whether the whole slope interval lies above 1.
    pub fn superlinear(&self) -> bool {
        self.slope_ci.0 > 1.0
    }
}

/// Fits the rows with `0 < hits < samples`; at least four are needed.
pub fn scaling_fit(rows: &[SimRow]) -> Result<ScalingFit> {
    let usable: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.hits > 0 && r.hits < r.samples)
        .map(|r| (r.epsilon, r.p_hat))
        .collect();
    scaling_fit_points(&usable)
}

/// Fits `(eps, p_hat)` pairs directly; both must lie in `(0, 1)`.
pub fn scaling_fit_points(data: &[(f64, f64)]) -> Result<ScalingFit> {
    if data.len() < 4 {
        return invalid(format!(
            "scaling fit needs at least 4 estimates strictly between 0 and 1, got {}",
            data.len()
        ));
    }
    let mut points = Vec::with_capacity(data.len());
    for &(epsilon, p) in data {
        if !(epsilon > 0.0 && epsilon < 1.0 && p > 0.0 && p < 1.0) {
            return invalid(format!("unusable point (eps = {epsilon}, p = {p})"));
        }
        points.push(FitPoint {
            epsilon,
            x: (-epsilon.ln()).ln(),
            y: (-p.ln()).ln(),
        });
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / k;
    let my = points.iter().map(|p| p.y).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.x - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.x - mx) * (p.y - my)).sum();
    if !(sxx > 0.0) {
        return invalid("scaling fit needs at least two distinct epsilons");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.y - intercept - slope * p.x).powi(2))
        .sum();
    let dof = k - 2.0;
    let slope_std_error = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Ok(ScalingFit {
        slope,
        intercept,
        slope_std_error,
        slope_ci: (slope - t * slope_std_error, slope + t * slope_std_error),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: [f64; 6] = [0.5, 0.4, 0.3, 0.25, 0.2, 0.15];

    #[test]
    fn recovers_cubic_law() {
        let data: Vec<(f64, f64)> = EPS
            .iter()
            .map(|&e: &f64| (e, (-(-e.ln()).powi(3) / 432.0).exp()))
            .collect();
        let fit = scaling_fit_points(&data).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12, "{}", fit.slope);
        assert!(fit.slope_std_error < 1e-12);
    }

    #[test]
    fn recovers_linear_law() {
        let data: Vec<(f64, f64)> = EPS.iter().map(|&e| (e, e)).collect();
        let fit = scaling_fit_points(&data).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_too_few_points() {
        let rows: Vec<SimRow> = EPS
            .iter()
            .map(|&e| SimRow {
                epsilon: e,
                hits: 0,
                samples: 1000,
                p_hat: 0.0,
                ci_lo: 0.0,
                ci_hi: 0.0,
            })
            .collect();
        assert!(scaling_fit(&rows).is_err());
    }
}
