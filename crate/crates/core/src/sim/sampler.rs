use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{factor_covariance, points_hash, CovarianceFactor, SimGrid};
use crate::error::{invalid, Result};
use crate::smallball::{delta_sequence, smallball_log_upper, Provenance, MAX_COMPUTED_M};

/// Samples per random substream. Chunk `c` draws from stream `c` of the
/// generator seeded with the run seed, so results do not depend on how chunks
/// are spread over workers.
pub const CHUNK_SIZE: u64 = 8192;
/// Smallest sample count accepted.
pub const MIN_SAMPLES: u64 = 1000;
/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    pub grid: SimGrid,
    pub workers: usize,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        validate_common(&self.epsilons, self.samples, self.workers)
    }
}

fn validate_common(epsilons: &[f64], samples: u64, workers: usize) -> Result<()> {
    if epsilons.is_empty() {
        return invalid("at least one epsilon is required");
    }
    if epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return invalid("epsilons must be positive and finite");
    }
    if epsilons.windows(2).any(|w| w[0] <= w[1]) {
        return invalid("epsilons must be strictly decreasing");
    }
    if samples < MIN_SAMPLES {
        return invalid(format!("at least {MIN_SAMPLES} samples are required, got {samples}"));
    }
    if workers == 0 {
        return invalid("workers must be at least 1");
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub epsilon: f64,
    pub hits: u64,
    pub samples: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl SimRow {
    fn new(epsilon: f64, hits: u64, samples: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(hits, samples);
        Self {
            epsilon,
            hits,
            samples,
            p_hat: hits as f64 / samples as f64,
            ci_lo,
            ci_hi,
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub rows: Vec<SimRow>,
    pub grid_hash: String,
    pub grid_points: usize,
    pub seed: u64,
    pub samples: u64,
    pub jitter: f64,
    /// Samples whose events were not nested across the epsilon list.
    pub nesting_violations: u64,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(hits: u64, samples: u64) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits >= samples { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Normal variates by Box-Muller, consumed in pairs.
struct Normals {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Normals {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Drops a pending spare so that every sample starts on a fresh pair.
    fn reset(&mut self) {
        self.spare = None;
    }
}

/// Per-chunk tallies: hits per epsilon on the full point set and on the
/// masked subset, plus nesting violations.
#[derive(Clone, Debug, Default)]
struct Tally {
    full: Vec<u64>,
    masked: Vec<u64>,
    violations: u64,
}

fn count_nested(max: f64, epsilons: &[f64], hits: &mut [u64]) -> bool {
    let mut nested = true;
    let mut prev = true;
    for (k, &e) in epsilons.iter().enumerate() {
        let hit = max < e;
        if hit {
            hits[k] += 1;
            nested &= prev;
        }
        prev = hit;
    }
    nested
}

fn run_chunk(
    factor: &CovarianceFactor,
    mask: Option<&[bool]>,
    epsilons: &[f64],
    seed: u64,
    chunk: u64,
    count: u64,
) -> Tally {
    let n = factor.dim();
    let mut normals = Normals::new(seed, chunk);
    let mut z = vec![0.0; n];
    let mut tally = Tally {
        full: vec![0; epsilons.len()],
        masked: vec![0; epsilons.len()],
        violations: 0,
    };
    let cutoff = epsilons[0];
    for _ in 0..count {
        normals.reset();
        let mut max_full = 0.0f64;
        let mut max_masked = 0.0f64;
        for i in 0..n {
            z[i] = normals.next();
            let row = factor.row(i);
            let mut y = 0.0;
            for (l, zj) in row.iter().zip(&z[..=i]) {
                y += l * zj;
            }
            let a = y.abs();
            max_full = max_full.max(a);
            if mask.is_none_or(|m| m[i]) {
                max_masked = max_masked.max(a);
            }
            // Nothing more can be counted once every event has failed; without
            // a mask both maxima coincide.
            if max_masked >= cutoff {
                break;
            }
        }
        let ok_full = count_nested(max_full, epsilons, &mut tally.full);
        let ok_masked = mask.is_none() || count_nested(max_masked, epsilons, &mut tally.masked);
        if !(ok_full && ok_masked) {
            tally.violations += 1;
        }
    }
    tally
}

fn run(
    factor: &CovarianceFactor,
    mask: Option<&[bool]>,
    epsilons: &[f64],
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<Tally> {
    let chunks = samples.div_ceil(CHUNK_SIZE);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let count = CHUNK_SIZE.min(samples - c * CHUNK_SIZE);
                run_chunk(factor, mask, epsilons, seed, c, count)
            })
            .collect::<Vec<_>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::Error::InvalidArgument(format!("thread pool: {e}")))?;
    let tallies = pool.install(work);
    let mut total = Tally {
        full: vec![0; epsilons.len()],
        masked: vec![0; epsilons.len()],
        violations: 0,
    };
    for t in tallies {
        for k in 0..epsilons.len() {
            total.full[k] += t.full[k];
            total.masked[k] += t.masked[k];
        }
        total.violations += t.violations;
    }
    Ok(total)
}

fn result_from(hits: &[u64], epsilons: &[f64], points: &[f64], config_seed: u64, samples: u64, jitter: f64, violations: u64) -> SimResult {
    SimResult {
        rows: epsilons
            .iter()
            .zip(hits)
            .map(|(&e, &h)| SimRow::new(e, h, samples))
            .collect(),
        grid_hash: points_hash(points),
        grid_points: points.len(),
        seed: config_seed,
        samples,
        jitter,
        nesting_violations: violations,
    }
}

/// Estimates `P(max_grid |Y(t)| < eps)` for every `eps` in one pass over the
/// samples.
pub fn simulate_sup_probability(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let factor = factor_covariance(&config.grid.points)?;
    let t = run(&factor, None, &config.epsilons, config.samples, config.seed, config.workers)?;
    Ok(result_from(
        &t.full,
        &config.epsilons,
        &config.grid.points,
        config.seed,
        config.samples,
        factor.jitter,
        t.violations,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementReport {
    pub coarse: SimResult,
    pub fine: SimResult,
    /// `p_hat(fine) - p_hat(coarse)` per epsilon; never positive.
    pub shift: Vec<f64>,
}

/// Runs the grid and its refinement on common random numbers: samples are
/// drawn on the refined grid and the coarse estimate uses the original
/// points only.
pub fn simulate_refinement(config: &SimConfig) -> Result<RefinementReport> {
    config.validate()?;
    let fine_grid = config.grid.refine();
    let mask: Vec<bool> = fine_grid
        .points
        .iter()
        .map(|p| config.grid.points.contains(p))
        .collect();
    let factor = factor_covariance(&fine_grid.points)?;
    let t = run(&factor, Some(&mask), &config.epsilons, config.samples, config.seed, config.workers)?;
    let coarse = result_from(&t.masked, &config.epsilons, &config.grid.points, config.seed, config.samples, factor.jitter, t.violations);
    let fine = result_from(&t.full, &config.epsilons, &fine_grid.points, config.seed, config.samples, factor.jitter, t.violations);
    let shift = coarse
        .rows
        .iter()
        .zip(&fine.rows)
        .map(|(c, f)| f.p_hat - c.p_hat)
        .collect();
    Ok(RefinementReport { coarse, fine, shift })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaSimResult {
    pub m: u32,
    pub result: SimResult,
    /// `min(1, eps^n det(Sigma)^(-1/2))`.
    pub analytic_bound: f64,
    /// `p_hat <= analytic_bound + 3 * (ci_hi - ci_lo)`.
    pub consistent: bool,
}

/// Estimates `P(max_i |Y(delta_i)| < eps)` on the design points of
/// `delta_sequence(m)`.
pub fn simulate_delta_probability(
    m: u32,
    epsilon: f64,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<DeltaSimResult> {
    if m == 0 || m > MAX_COMPUTED_M {
        return invalid(format!("delta simulation supports m in 1..={MAX_COMPUTED_M}, got {m}"));
    }
    validate_common(&[epsilon], samples, workers)?;
    let d = delta_sequence(m)?;
    let points: Vec<f64> = d.values.iter().map(|&v| v as f64).collect();
    let factor = factor_covariance(&points)?;
    let t = run(&factor, None, &[epsilon], samples, seed, workers)?;
    let result = result_from(&t.full, &[epsilon], &points, seed, samples, factor.jitter, t.violations);
    let analytic_bound = if epsilon >= 1.0 {
        1.0
    } else {
        let bound = smallball_log_upper(epsilon, m, Provenance::ComputedDet, 1024)?;
        bound.log_prob_bound.exp().min(1.0)
    };
    let row = &result.rows[0];
    Ok(DeltaSimResult {
        m,
        consistent: row.p_hat <= analytic_bound + 3.0 * row.ci_width(),
        analytic_bound,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::build_grid;

    fn config(eps: Vec<f64>, samples: u64, workers: usize) -> SimConfig {
        SimConfig {
            epsilons: eps,
            samples,
            seed: 42,
            grid: build_grid(0.25, 32).unwrap(),
            workers,
        }
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
        let (lo, hi) = wilson_interval(500, 1000);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        assert!(hi - lo < 0.07);
    }

    #[test]
    fn normals_have_unit_moments() {
        let mut g = Normals::new(3, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| g.next()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.01);
    }

    #[test]
    fn extreme_epsilons() {
        let r = simulate_sup_probability(&config(vec![10.0, 1e-6], 2000, 1)).unwrap();
        assert_eq!(r.rows[0].p_hat, 1.0);
        assert_eq!(r.rows[1].p_hat, 0.0);
    }

    #[test]
    fn nesting_and_determinism() {
        let a = simulate_sup_probability(&config(vec![0.5, 0.25], 20_000, 1)).unwrap();
        let b = simulate_sup_probability(&config(vec![0.5, 0.25], 20_000, 3)).unwrap();
        assert_eq!(a, b);
        assert!(a.rows[0].hits >= a.rows[1].hits);
        assert_eq!(a.nesting_violations, 0);
    }

    #[test]
    fn refinement_never_increases() {
        let r = simulate_refinement(&config(vec![0.6, 0.5, 0.4], 10_000, 2)).unwrap();
        for (c, f) in r.coarse.rows.iter().zip(&r.fine.rows) {
            assert!(f.hits <= c.hits);
        }
        // The coarse projection uses the same per-sample draws as the fine grid;
        // its estimate is a valid estimate for the coarse grid itself.
        let direct = simulate_sup_probability(&config(vec![0.6, 0.5, 0.4], 10_000, 2)).unwrap();
        for (c, d) in r.coarse.rows.iter().zip(&direct.rows) {
            assert!((c.p_hat - d.p_hat).abs() < 3.0 * (c.ci_width() + d.ci_width()));
        }
    }

    #[test]
    fn validation() {
        assert!(simulate_sup_probability(&config(vec![0.2, 0.3], 2000, 1)).is_err());
        assert!(simulate_sup_probability(&config(vec![0.2], 10, 1)).is_err());
        assert!(simulate_sup_probability(&config(vec![0.2], 2000, 0)).is_err());
        assert!(simulate_delta_probability(4, 0.1, 2000, 1, 1).is_err());
    }

    #[test]
    fn delta_large_epsilon() {
        let r = simulate_delta_probability(1, 5.0, 5000, 1, 1).unwrap();
        assert_eq!(r.result.rows[0].p_hat, 1.0);
        assert!(r.consistent);
    }
}
