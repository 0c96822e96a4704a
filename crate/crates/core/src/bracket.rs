//! Explicit epsilon-brackets for completely monotone functions.
//!
//! On the dyadic block `[2^(i-1) gamma, 2^i gamma)` the function is replaced by
//! the degree-`N` Taylor polynomial of `exp(-t x)` integrated over the atoms
//! with `x < 2^(2-i) |log eps| / gamma`. The coefficients are rounded outward
//! onto the grid `eps / 2^(n+2)`, and constant slacks absorb the Taylor
//! remainder, the truncated tail and floating-point error.

use std::collections::HashSet;
use std::f64::consts::E;

use astro_float_num::{BigFloat, RoundingMode};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::bigfloat::{consts, to_f64};
use crate::measure::{lp_distance, BaseMeasure, Evaluate, LpDistance, LpParams, MixingMeasure};
use crate::quadrature::{compensated_horner, NeumaierSum};

/// Relative allowance for rounding in coefficients and polynomial evaluation.
const FLOAT_SLACK_RELATIVE: f64 = 1e-11;
const FLOAT_SLACK_ABSOLUTE: f64 = 1e-15;
/// Relative distance to a grid point below which a coefficient counts as on
/// the grid.
const TIE_TOLERANCE: f64 = 1e-12;
/// Default quadrature nodes per panel when verifying bracket widths.
pub const VERIFY_QUADRATURE_POINTS: usize = 24;

/// `N` with `4 e^2 |log eps| - 1 <= N < 4 e^2 |log eps|`.
pub fn select_taylor_degree(epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    let x = 4.0 * E * E * (-epsilon.ln());
    Ok(x.ceil() as usize - 1)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return invalid(format!("epsilon must lie in (0, 1/4), got {epsilon}"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketConfig {
    pub epsilon: f64,
    pub p: f64,
    pub gamma: f64,
    /// Number of dyadic blocks; the upper edge is `2^m gamma`.
    pub m: u32,
    pub taylor_degree: usize,
}

impl BracketConfig {
    /// Validates the parameters and the mass condition
    /// `nu([gamma, 2^m gamma]) >= 1 - 4^-p eps^p`.
    pub fn new(epsilon: f64, p: f64, gamma: f64, m: u32, nu: &BaseMeasure) -> Result<Self> {
        check_epsilon(epsilon)?;
        if p.is_nan() || p < 1.0 {
            return invalid(format!("p must be >= 1, got {p}"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return invalid(format!("gamma must be positive and finite, got {gamma}"));
        }
        if m == 0 || m > 1000 {
            return invalid(format!("m must lie in 1..=1000, got {m}"));
        }
        let config = Self {
            epsilon,
            p,
            gamma,
            m,
            taylor_degree: select_taylor_degree(epsilon)?,
        };
        let upper = config.upper_edge();
        if !upper.is_finite() {
            return invalid("2^m gamma overflows");
        }
        let inside = nu.mass_in(gamma, next_up(upper));
        let required = 1.0 - outside_budget(epsilon, p);
        if inside < required - 1e-15 {
            return Err(Error::InvalidMeasure(format!(
                "nu([{gamma}, {upper}]) = {inside} is below the required {required}"
            )));
        }
        Ok(config)
    }

    /// `gamma = 4^-p eps^p`, `m = ceil(log2(1 / gamma))` for Lebesgue measure on
    /// `[0, 1]`.
    pub fn lebesgue_default(epsilon: f64, p: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if p.is_infinite() {
            return invalid("p = inf is not attainable for Lebesgue measure: the region below gamma has positive mass");
        }
        let gamma = outside_budget(epsilon, p);
        let m = (1.0 / gamma).log2().ceil().max(1.0) as u32;
        Self::new(epsilon, p, gamma, m, &BaseMeasure::LebesgueUnitInterval)
    }

    /// For an atomic base measure: `gamma` is the smallest positive atom and
    /// `m` the least integer with `2^m gamma` above the largest atom.
    pub fn atomic_default(epsilon: f64, p: f64, nu: &BaseMeasure) -> Result<Self> {
        let BaseMeasure::Atomic(pts) = nu else {
            return invalid("atomic_default needs an atomic base measure");
        };
        let Some(gamma) = pts.iter().map(|a| a.0).find(|&x| x > 0.0) else {
            return Err(Error::InvalidMeasure(
                "base measure has no positive atoms".to_string(),
            ));
        };
        let top = pts.last().map(|a| a.0).unwrap_or(gamma);
        let mut m = 1u32;
        while gamma * 2f64.powi(m as i32) <= top {
            m += 1;
        }
        Self::new(epsilon, p, gamma, m, nu)
    }

    pub fn upper_edge(&self) -> f64 {
        self.gamma * 2f64.powi(self.m as i32)
    }

    pub fn log_epsilon_abs(&self) -> f64 {
        -self.epsilon.ln()
    }

    /// Left edge `2^(i-1) gamma` of block `i`.
    pub fn block_start(&self, i: u32) -> f64 {
        self.gamma * 2f64.powi(i as i32 - 1)
    }

    /// The scale `2^i gamma` of block `i`.
    pub fn block_scale(&self, i: u32) -> f64 {
        self.gamma * 2f64.powi(i as i32)
    }

    /// Block containing `t`, if `gamma <= t < 2^m gamma`.
    pub fn block_of(&self, t: f64) -> Option<u32> {
        if !(t >= self.gamma && t < self.upper_edge()) {
            return None;
        }
        let mut i = ((t / self.gamma).log2().floor() as i64 + 1).clamp(1, self.m as i64) as u32;
        while i > 1 && t < self.block_start(i) {
            i -= 1;
        }
        while i < self.m && t >= self.block_scale(i) {
            i += 1;
        }
        Some(i)
    }

    /// Quantization grid `eps / 2^(n+2)`.
    pub fn grid(&self, n: usize) -> f64 {
        quantization_grid(self.epsilon, n)
    }

    /// The Taylor remainder allowance `eps^(4 e^2)`.
    pub fn taylor_slack(&self) -> f64 {
        self.epsilon.powf(4.0 * E * E)
    }

    /// The truncated-tail allowance `eps^2`.
    pub fn tail_slack(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    fn check_block(&self, i: u32) -> Result<()> {
        if i == 0 || i > self.m {
            return invalid(format!("block index {i} outside 1..={}", self.m));
        }
        Ok(())
    }
}

fn outside_budget(epsilon: f64, p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        (epsilon / 4.0).powf(p)
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_finite() && x > 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        x
    }
}

pub fn quantization_grid(epsilon: f64, n: usize) -> f64 {
    epsilon / 2f64.powi(n as i32 + 2)
}

/// `(4 |log eps|)^n / n!`, the a-priori bound on the n-th coefficient.
pub fn coefficient_bound(epsilon: f64, n: usize) -> f64 {
    let four_l = 4.0 * (-epsilon.ln());
    (1..=n).fold(1.0, |acc, k| acc * four_l / k as f64)
}

/// Whether the atom contributes to block `i`: `2^i gamma x < 4 |log eps|`.
fn kept(config: &BracketConfig, i: u32, x: f64) -> bool {
    config.block_scale(i) * x < 4.0 * config.log_epsilon_abs()
}

/// `a_n = (2^i gamma)^n / n! * sum_{x < 2^(2-i) |log eps| / gamma} w x^n` for
/// `n = 0..=N`, so that the block polynomial is `sum (-1)^n a_n u^n` with
/// `u = t / (2^i gamma)`.
pub fn truncated_moment_coeffs(
    mu: &MixingMeasure,
    config: &BracketConfig,
    i: u32,
) -> Result<Vec<f64>> {
    config.check_block(i)?;
    let n_max = config.taylor_degree;
    let mut sums = vec![NeumaierSum::default(); n_max + 1];
    let scale = config.block_scale(i);
    for atom in mu.atoms().iter().filter(|a| kept(config, i, a.location)) {
        let y = scale * atom.location;
        let mut term = atom.weight;
        for (n, s) in sums.iter_mut().enumerate() {
            s.add(term);
            term *= y / (n + 1) as f64;
        }
    }
    Ok(sums
        .iter()
        .enumerate()
        .map(|(n, s)| s.value().clamp(0.0, coefficient_bound(config.epsilon, n)))
        .collect())
}

/// Coefficients rounded onto the grid `eps / 2^(n+2)`, stored as integer
/// numbers of grid steps.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct QuantizedCoefficients {
    pub b_steps: Vec<i128>,
    pub c_steps: Vec<i128>,
}

impl QuantizedCoefficients {
    pub fn b(&self, epsilon: f64) -> Vec<f64> {
        scale_steps(&self.b_steps, epsilon)
    }

    pub fn c(&self, epsilon: f64) -> Vec<f64> {
        scale_steps(&self.c_steps, epsilon)
    }
}

fn scale_steps(steps: &[i128], epsilon: f64) -> Vec<f64> {
    steps
        .iter()
        .enumerate()
        .map(|(n, &k)| k as f64 * quantization_grid(epsilon, n))
        .collect()
}

/// Outward rounding of `a` so that `sum (-1)^n b_n u^n` dominates and
/// `sum (-1)^n c_n u^n` is dominated by `sum (-1)^n a_n u^n` for `u >= 0`:
/// `b` rounds up at even `n` and down at odd `n`, `c` the other way round.
/// Values within a relative `1e-12` of a grid point are taken as on the grid.
pub fn quantize_coefficients(a: &[f64], epsilon: f64) -> Result<QuantizedCoefficients> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let mut b_steps = Vec::with_capacity(a.len());
    let mut c_steps = Vec::with_capacity(a.len());
    for (n, &an) in a.iter().enumerate() {
        if !an.is_finite() {
            return invalid(format!("coefficient {n} is not finite"));
        }
        let r = an / quantization_grid(epsilon, n);
        if r.abs() >= 1e38 {
            return invalid(format!(
                "coefficient {n} spans too many grid steps; epsilon is too small"
            ));
        }
        let nearest = r.round();
        let (up, down) = if (r - nearest).abs() <= TIE_TOLERANCE * r.abs().max(1.0) {
            (nearest, nearest)
        } else {
            (r.ceil(), r.floor())
        };
        let (b, c) = if n % 2 == 0 { (up, down) } else { (down, up) };
        b_steps.push(b as i128);
        c_steps.push(c as i128);
    }
    Ok(QuantizedCoefficients { b_steps, c_steps })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockPolynomial {
    pub block_index: u32,
    pub quantized: QuantizedCoefficients,
    /// `(-1)^n b_n`, ready for Horner evaluation in `u = t / (2^i gamma)`.
    #[serde(skip)]
    upper_coeffs: Vec<f64>,
    #[serde(skip)]
    lower_coeffs: Vec<f64>,
}

impl BlockPolynomial {
    fn new(block_index: u32, quantized: QuantizedCoefficients, epsilon: f64) -> Self {
        let signed = |v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .enumerate()
                .map(|(n, x)| if n % 2 == 0 { x } else { -x })
                .collect()
        };
        Self {
            block_index,
            upper_coeffs: signed(quantized.b(epsilon)),
            lower_coeffs: signed(quantized.c(epsilon)),
            quantized,
        }
    }

    pub fn upper(&self, u: f64) -> f64 {
        compensated_horner(&self.upper_coeffs, u)
    }

    pub fn lower(&self, u: f64) -> f64 {
        compensated_horner(&self.lower_coeffs, u)
    }

    fn coefficient_mass(&self) -> f64 {
        self.upper_coeffs
            .iter()
            .chain(&self.lower_coeffs)
            .map(|c| c.abs())
            .sum()
    }
}

/// Upper and lower envelopes built from quantized block polynomials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketPair {
    pub config: BracketConfig,
    pub blocks: Vec<BlockPolynomial>,
    /// Subtracted from the lower envelope on `[gamma, 2^m gamma)`.
    pub slack_lower: f64,
    /// Added to the upper envelope on `[gamma, 2^m gamma)`.
    pub slack_upper: f64,
    /// The part of both slacks reserved for floating-point error.
    pub float_slack: f64,
    /// Verified `L^p(nu)` distance between the envelopes.
    pub width: LpDistance,
}

impl BracketPair {
    pub fn upper_value(&self, t: f64) -> f64 {
        match self.config.block_of(t) {
            Some(i) => {
                let u = t / self.config.block_scale(i);
                self.blocks[i as usize - 1].upper(u) + self.slack_upper
            }
            None => 1.0,
        }
    }

    pub fn lower_value(&self, t: f64) -> f64 {
        match self.config.block_of(t) {
            Some(i) => {
                let u = t / self.config.block_scale(i);
                self.blocks[i as usize - 1].lower(u) - self.slack_lower
            }
            None => 0.0,
        }
    }

    pub fn upper(&self) -> Envelope<'_> {
        Envelope {
            pair: self,
            upper: true,
        }
    }

    pub fn lower(&self) -> Envelope<'_> {
        Envelope {
            pair: self,
            upper: false,
        }
    }

    /// Integer fingerprint: the b and c step counts of every block.
    pub fn id(&self) -> Vec<i128> {
        self.blocks
            .iter()
            .flat_map(|b| b.quantized.b_steps.iter().chain(&b.quantized.c_steps).copied())
            .collect()
    }

    /// 64-bit FNV-1a digest of [`Self::id`], rendered as hex.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for k in self.id() {
            for byte in k.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("{h:016x}")
    }

    fn breakpoints(&self) -> Vec<f64> {
        (0..=self.config.m).map(|k| self.config.gamma * 2f64.powi(k as i32)).collect()
    }

    /// Checks `lower <= f <= upper` at `points` evaluation points spread
    /// uniformly over `[0, 1]` and log-uniformly over `[gamma / 4, 4 Gamma]`.
    pub fn verify_containment(&self, mu: &MixingMeasure, points: usize) -> ContainmentReport {
        let grid = containment_grid(&self.config, points);
        let mut report = ContainmentReport {
            points: grid.len(),
            violations: 0,
            min_upper_margin: f64::INFINITY,
            min_lower_margin: f64::INFINITY,
            first_violation: None,
        };
        for t in grid {
            let f = mu.value(t);
            let up = self.upper_value(t) - f;
            let lo = f - self.lower_value(t);
            report.min_upper_margin = report.min_upper_margin.min(up);
            report.min_lower_margin = report.min_lower_margin.min(lo);
            if up < 0.0 || lo < 0.0 {
                report.violations += 1;
                report.first_violation.get_or_insert(t);
            }
        }
        report
    }
}

pub struct Envelope<'a> {
    pair: &'a BracketPair,
    upper: bool,
}

impl Evaluate for Envelope<'_> {
    fn value(&self, t: f64) -> f64 {
        if self.upper {
            self.pair.upper_value(t)
        } else {
            self.pair.lower_value(t)
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.pair.breakpoints()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub points: usize,
    pub violations: usize,
    pub min_upper_margin: f64,
    pub min_lower_margin: f64,
    pub first_violation: Option<f64>,
}

impl ContainmentReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn containment_grid(config: &BracketConfig, points: usize) -> Vec<f64> {
    let half = points / 2;
    let rest = points - half;
    let mut grid: Vec<f64> = (0..half)
        .map(|k| k as f64 / (half.max(2) - 1) as f64)
        .collect();
    let lo = (config.gamma / 4.0).ln();
    let hi = (4.0 * config.upper_edge()).ln();
    grid.extend((0..rest).map(|k| (lo + (hi - lo) * k as f64 / (rest.max(2) - 1) as f64).exp()));
    grid
}

/// Builds the bracket and verifies its `L^p(nu)` width against `eps`.
pub fn build_bracket(
    mu: &MixingMeasure,
    config: &BracketConfig,
    nu: &BaseMeasure,
) -> Result<BracketPair> {
    build_bracket_with(mu, config, nu, VERIFY_QUADRATURE_POINTS)
}

pub fn build_bracket_with(
    mu: &MixingMeasure,
    config: &BracketConfig,
    nu: &BaseMeasure,
    quadrature_points: usize,
) -> Result<BracketPair> {
    let mut blocks = Vec::with_capacity(config.m as usize);
    for i in 1..=config.m {
        let a = truncated_moment_coeffs(mu, config, i)?;
        let q = quantize_coefficients(&a, config.epsilon)?;
        blocks.push(BlockPolynomial::new(i, q, config.epsilon));
    }
    let grid_mass: f64 = (0..=config.taylor_degree).map(|n| config.grid(n)).sum();
    let float_slack = blocks
        .iter()
        .map(|b| FLOAT_SLACK_RELATIVE * (b.coefficient_mass() + grid_mass))
        .fold(0.0, f64::max)
        + FLOAT_SLACK_ABSOLUTE;
    let mut pair = BracketPair {
        config: config.clone(),
        blocks,
        slack_lower: config.taylor_slack() + float_slack,
        slack_upper: config.taylor_slack() + config.tail_slack() + float_slack,
        float_slack,
        width: LpDistance {
            value: f64::NAN,
            error_bound: f64::NAN,
            grid_supremum: false,
        },
    };
    let params = LpParams::new(config.p, quadrature_points)?;
    let width = lp_distance(&pair.upper(), &pair.lower(), nu, &params)?;
    if !(width.value + width.error_bound <= config.epsilon) {
        return Err(Error::Verification(format!(
            "bracket width {} (+/- {}) exceeds epsilon {}",
            width.value, width.error_bound, config.epsilon
        )));
    }
    pair.width = width;
    Ok(pair)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RemainderReport {
    pub points: usize,
    /// Largest `|f - p_i - r_i|` seen.
    pub max_taylor_remainder: f64,
    /// Largest tail `r_i` seen.
    pub max_tail: f64,
    pub taylor_bound: f64,
    pub tail_bound: f64,
}

/// Evaluates, in high precision on `points_per_block` points of every block,
/// the Taylor remainder `q_i = f - p_i - r_i` and the truncated tail `r_i`, and
/// checks `|q_i| <= eps^(4 e^2) + 1e-15` and `r_i <= eps^2`.
pub fn remainder_bounds_check(
    mu: &MixingMeasure,
    config: &BracketConfig,
    points_per_block: usize,
) -> Result<RemainderReport> {
    if points_per_block == 0 {
        return invalid("remainder check needs at least one point per block");
    }
    let l = config.log_epsilon_abs();
    // Taylor terms reach e^(4L) while the remainder is near eps^(4e^2).
    let prec = 128 + (50.0 * l) as usize;
    let rm = RoundingMode::ToEven;
    let mut cc = consts();
    let taylor_bound = config.taylor_slack() + 1e-15;
    let tail_bound = config.tail_slack() * (1.0 + 1e-12);
    let mut report = RemainderReport {
        points: 0,
        max_taylor_remainder: 0.0,
        max_tail: 0.0,
        taylor_bound,
        tail_bound,
    };
    for i in 1..=config.m {
        let start = config.block_start(i);
        let width = config.block_scale(i) - start;
        for k in 0..points_per_block {
            let t = start + width * k as f64 / points_per_block as f64;
            let tb = BigFloat::from_f64(t, prec);
            let mut remainder = BigFloat::new(prec);
            let mut tail = BigFloat::new(prec);
            for atom in mu.atoms() {
                let w = BigFloat::from_f64(atom.weight, prec);
                let y = tb.mul(&BigFloat::from_f64(atom.location, prec), prec, rm);
                let e = y.neg().exp(prec, rm, &mut cc);
                if kept(config, i, atom.location) {
                    // e^-y minus its degree-N Taylor polynomial.
                    let mut term = BigFloat::from_u8(1, prec);
                    let mut poly = BigFloat::new(prec);
                    for n in 0..=config.taylor_degree {
                        poly = poly.add(&term, prec, rm);
                        term = term
                            .mul(&y, prec, rm)
                            .div(&BigFloat::from_u64(n as u64 + 1, prec), prec, rm)
                            .neg();
                    }
                    let q = e.sub(&poly, prec, rm).mul(&w, prec, rm);
                    remainder = remainder.add(&q, prec, rm);
                } else {
                    tail = tail.add(&e.mul(&w, prec, rm), prec, rm);
                }
            }
            let q = to_f64(&remainder).abs();
            let r = to_f64(&tail);
            report.points += 1;
            report.max_taylor_remainder = report.max_taylor_remainder.max(q);
            report.max_tail = report.max_tail.max(r);
            if q > taylor_bound {
                return Err(Error::Verification(format!(
                    "Taylor remainder {q:e} exceeds {taylor_bound:e} at t = {t}"
                )));
            }
            if r > tail_bound {
                return Err(Error::Verification(format!(
                    "truncated tail {r:e} exceeds {tail_bound:e} at t = {t}"
                )));
            }
        }
    }
    Ok(report)
}

/// Natural log of the realization-count bound
/// `2 m sum_{n=0}^{N} log(2^(n+1) eps^-1 (4 |log eps|)^n / n! + 1)`.
pub fn realization_count_bound(config: &BracketConfig) -> f64 {
    let l = config.log_epsilon_abs();
    let mut ln_fact = 0.0;
    let mut total = NeumaierSum::default();
    for n in 0..=config.taylor_degree {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let x = (n as f64 + 1.0) * std::f64::consts::LN_2 + l + n as f64 * (4.0 * l).ln() - ln_fact;
        // log(e^x + 1) without overflow.
        total.add(x.max(0.0) + (-x.abs()).exp().ln_1p());
    }
    2.0 * config.m as f64 * total.value()
}

/// Number of distinct bracket fingerprints over `measures`.
pub fn empirical_bracket_count(
    measures: &[MixingMeasure],
    config: &BracketConfig,
    nu: &BaseMeasure,
) -> Result<usize> {
    if measures.is_empty() {
        return invalid("empirical_bracket_count needs at least one measure");
    }
    let ids: Vec<Vec<i128>> = measures
        .par_iter()
        .map(|mu| build_bracket(mu, config, nu).map(|b| b.id()))
        .collect::<Result<_>>()?;
    Ok(ids.into_iter().collect::<HashSet<_>>().len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::random_measure;

    fn lebesgue() -> BaseMeasure {
        BaseMeasure::LebesgueUnitInterval
    }

    #[test]
    fn taylor_degree_examples() {
        assert_eq!(select_taylor_degree(0.1).unwrap(), 68);
        assert_eq!(select_taylor_degree(0.2).unwrap(), 47);
        assert_eq!(select_taylor_degree(0.24999).unwrap(), 40);
        assert!(select_taylor_degree(0.25).is_err());
        assert!(select_taylor_degree(0.0).is_err());
    }

    #[test]
    fn taylor_degree_interval() {
        for k in 1..200 {
            let eps = 0.25 * (k as f64 / 200.0);
            let n = select_taylor_degree(eps).unwrap() as f64;
            let x = 4.0 * E * E * (-eps.ln());
            assert!(x - 1.0 <= n && n < x, "eps={eps}");
        }
    }

    #[test]
    fn moment_coefficient_examples() {
        let config = BracketConfig::new(0.1, 2.0, 1.0, 3, &BaseMeasure::atomic([(1.0, 1.0)]).unwrap()).unwrap();
        let origin = MixingMeasure::dirac(0.0, 1.0).unwrap();
        for i in 1..=3 {
            let a = truncated_moment_coeffs(&origin, &config, i).unwrap();
            assert_eq!(a[0], 1.0);
            assert!(a[1..].iter().all(|&x| x == 0.0));
        }
        let far = MixingMeasure::dirac(100.0, 1.0).unwrap();
        assert!(truncated_moment_coeffs(&far, &config, 1).unwrap().iter().all(|&x| x == 0.0));

        let one = MixingMeasure::dirac(1.0, 1.0).unwrap();
        let a = truncated_moment_coeffs(&one, &config, 1).unwrap();
        let mut want = 1.0;
        for (n, &an) in a.iter().enumerate() {
            assert!((an - want).abs() <= 1e-15 * want.max(1e-300), "n={n}");
            want *= 2.0 / (n + 1) as f64;
        }
        assert!(truncated_moment_coeffs(&one, &config, 4).is_err());
    }

    #[test]
    fn quantization_examples() {
        let q = quantize_coefficients(&[0.3], 0.1).unwrap();
        assert_eq!((q.b_steps[0], q.c_steps[0]), (12, 12));
        assert!((q.b(0.1)[0] - 0.3).abs() < 1e-15);
        let q = quantize_coefficients(&[0.31], 0.1).unwrap();
        assert!((q.b(0.1)[0] - 0.325).abs() < 1e-15);
        assert!((q.c(0.1)[0] - 0.3).abs() < 1e-15);
        let q = quantize_coefficients(&[0.0, 0.31], 0.1).unwrap();
        assert!((q.b(0.1)[1] - 0.3).abs() < 1e-15);
        assert!((q.c(0.1)[1] - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn lebesgue_defaults() {
        let c = BracketConfig::lebesgue_default(0.1, 2.0).unwrap();
        assert!((c.gamma - 0.01 / 16.0).abs() < 1e-18);
        assert_eq!(c.m, (16.0f64 / 0.01).log2().ceil() as u32);
        assert!(c.upper_edge() >= 1.0);
        assert!(BracketConfig::lebesgue_default(0.1, f64::INFINITY).is_err());
        // Too little mass inside [gamma, Gamma].
        assert!(BracketConfig::new(0.1, 2.0, 0.5, 1, &lebesgue()).is_err());
    }

    #[test]
    fn block_lookup() {
        let c = BracketConfig::lebesgue_default(0.1, 1.0).unwrap();
        assert_eq!(c.block_of(c.gamma), Some(1));
        assert_eq!(c.block_of(2.0 * c.gamma), Some(2));
        assert_eq!(c.block_of(c.gamma * 0.999), None);
        assert_eq!(c.block_of(c.upper_edge()), None);
        for i in 1..=c.m {
            assert_eq!(c.block_of(c.block_scale(i) * 0.999_999), Some(i));
        }
    }

    #[test]
    fn constant_function_is_bracketed() {
        let mu = MixingMeasure::dirac(0.0, 1.0).unwrap();
        let c = BracketConfig::lebesgue_default(0.1, 2.0).unwrap();
        let pair = build_bracket(&mu, &c, &lebesgue()).unwrap();
        assert!(pair.verify_containment(&mu, 2000).passed());
        assert!(pair.width.value <= 0.1);
    }

    #[test]
    fn random_measure_is_bracketed() {
        let mu = random_measure(7, 5, 1.0).unwrap();
        let c = BracketConfig::lebesgue_default(0.1, 2.0).unwrap();
        assert!((c.gamma - 0.01 / 16.0).abs() < 1e-18);
        let pair = build_bracket(&mu, &c, &lebesgue()).unwrap();
        let report = pair.verify_containment(&mu, 10_000);
        assert!(report.passed(), "{report:?}");
        assert!(pair.width.value + pair.width.error_bound <= 0.1);
    }

    #[test]
    fn equal_quantization_gives_equal_ids() {
        let c = BracketConfig::lebesgue_default(0.2, 1.0).unwrap();
        let a = MixingMeasure::dirac(0.0, 1.0).unwrap();
        let b = MixingMeasure::new([(0.0, 1.0 - 1e-15)]).unwrap();
        let pa = build_bracket(&a, &c, &lebesgue()).unwrap();
        let pb = build_bracket(&b, &c, &lebesgue()).unwrap();
        assert_eq!(pa.id(), pb.id());
        assert_eq!(pa.fingerprint(), pb.fingerprint());
    }

    #[test]
    fn remainder_examples() {
        let c = BracketConfig::lebesgue_default(0.1, 2.0).unwrap();
        let r = remainder_bounds_check(&MixingMeasure::dirac(0.0, 1.0).unwrap(), &c, 16).unwrap();
        assert_eq!(r.max_taylor_remainder, 0.0);
        assert_eq!(r.max_tail, 0.0);
        // Above every cutoff: 4 |log eps| / gamma.
        let x = 4.0 * 10f64.ln() / c.gamma * 1.01;
        let r = remainder_bounds_check(&MixingMeasure::dirac(x, 1.0).unwrap(), &c, 16).unwrap();
        assert_eq!(r.max_taylor_remainder, 0.0);
        assert!(r.max_tail <= 0.01);
    }

    #[test]
    fn realization_count_examples() {
        let mut c = BracketConfig::lebesgue_default(0.1, 1.0).unwrap();
        c.m = 1;
        let l = 10f64.ln();
        let direct: f64 = (0..=68)
            .map(|n| {
                let fact: f64 = (1..=n).map(|k| k as f64).product();
                (2f64.powi(n + 1) * 10.0 * (4.0 * l).powi(n) / fact + 1.0).ln()
            })
            .sum();
        assert!((realization_count_bound(&c) - 2.0 * direct).abs() < 1e-10 * direct);
        let one = realization_count_bound(&c);
        c.m = 2;
        assert_eq!(realization_count_bound(&c), 2.0 * one);
    }

    #[test]
    fn realization_count_is_quadratic_in_log_eps() {
        let ratios: Vec<f64> = (2..=8)
            .map(|k| {
                let eps = 10f64.powi(-k);
                let mut c = BracketConfig::lebesgue_default(eps, 1.0).unwrap();
                c.m = 1;
                realization_count_bound(&c) / (eps.ln() * eps.ln())
            })
            .collect();
        let last = ratios[ratios.len() - 1];
        let prev = ratios[ratios.len() - 2];
        assert!(last.is_finite() && last > 0.0);
        assert!((last - prev).abs() / last < 0.05, "{ratios:?}");
    }

    #[test]
    fn count_examples() {
        let c = BracketConfig::lebesgue_default(0.2, 1.0).unwrap();
        let mu = random_measure(1, 3, 1.0).unwrap();
        assert_eq!(empirical_bracket_count(std::slice::from_ref(&mu), &c, &lebesgue()).unwrap(), 1);
        let other = random_measure(2, 3, 1.0).unwrap();
        let once = empirical_bracket_count(&[mu.clone(), other.clone()], &c, &lebesgue()).unwrap();
        let twice =
            empirical_bracket_count(&[mu.clone(), other.clone(), mu, other], &c, &lebesgue()).unwrap();
        assert_eq!(once, twice);
        assert!(empirical_bracket_count(&[], &c, &lebesgue()).is_err());
    }
}
