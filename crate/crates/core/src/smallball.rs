//! Small-ball upper bounds for the process with covariance
//! `E Y(t) Y(s) = (1 - exp(-t - s)) / (t + s)`.
//!
//! The bound comes from the finite-dimensional marginal at the design points
//! `delta_{mp+q} = 4^(p+m) (m+q)`, `0 <= p < m`, `1 <= q <= m`:
//! `P(max_i |Y(delta_i)| < eps) <= eps^n det(Sigma)^(-1/2)` with `n = m^2`.
//! `Sigma = a - b` where `a` is the Cauchy matrix `1 / (delta_i + delta_j)` and
//! `b_ij = exp(-delta_i - delta_j) a_ij`.

use std::collections::HashSet;

use astro_float_num::{BigFloat, RoundingMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::bigfloat::{
    self, consts, from_rational_directed, ln_abs_f64, log10_abs_f64,
    to_scientific, unit_roundoff, BigFloatMatrix, ExactValue, HighPrecisionDet,
    DEFAULT_PRECISION_BITS,
};
use crate::linalg::rational::{det_exact, permanent_exact, RationalMatrix, MAX_PERMANENT_DIM};

/// Largest `m` accepted by [`delta_sequence`].
pub const MAX_M: u32 = 8;
/// Largest `m` for which permanents and computed determinants are attempted.
pub const MAX_COMPUTED_M: u32 = 3;
/// Mantissa bits kept by the dyadic upper bounds for `exp(-x)`.
const DYADIC_BITS: u64 = 300;

/// The design points `delta_1 < ... < delta_{m^2}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeltaSequence {
    pub m: u32,
    pub values: Vec<u64>,
}

impl DeltaSequence {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> u64 {
        self.values[0]
    }
}

pub fn delta_sequence(m: u32) -> Result<DeltaSequence> {
    if m == 0 || m > MAX_M {
        return invalid(format!("m must lie in 1..={MAX_M}, got {m}"));
    }
    let m64 = m as u64;
    let values = (0..m64)
        .flat_map(|p| (1..=m64).map(move |q| 4u64.pow((p + m64) as u32) * (m64 + q)))
        .collect();
    Ok(DeltaSequence { m, values })
}

/// `a_ij = 1 / (d_i + d_j)`.
pub fn cauchy_matrix(d: &[u64]) -> RationalMatrix {
    RationalMatrix::from_fn(d.len(), |i, j| {
        BigRational::new(BigInt::one(), BigInt::from(d[i]) + BigInt::from(d[j]))
    })
}

/// `prod_{i<j} (d_j - d_i)^2 / prod_{i,j} (d_i + d_j)`.
pub fn cauchy_det_product(d: &[u64]) -> Result<BigRational> {
    if d.is_empty() {
        return invalid("empty sequence");
    }
    if d.iter().collect::<HashSet<_>>().len() != d.len() {
        return invalid("Cauchy determinant product needs distinct values");
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for (i, &x) in d.iter().enumerate() {
        for (j, &y) in d.iter().enumerate() {
            den *= BigInt::from(x) + BigInt::from(y);
            if i < j {
                let diff = BigInt::from(y) - BigInt::from(x);
                num *= &diff * &diff;
            }
        }
    }
    Ok(BigRational::new(num, den))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioBoundReport {
    pub m: u32,
    pub min_delta: u64,
    /// `m 4^m`; the bound needs `min delta >= m 4^m`.
    pub required_min_delta: u64,
    pub symbolic_holds: bool,
    /// `-log` of the largest ratio, `2 min delta`.
    pub max_ratio_exponent: u64,
    /// `-log` of the bound, `2 m 4^m`.
    pub bound_exponent: u64,
    /// Exact gap `2 min delta - 2 m 4^m = 2 * 4^m`.
    pub margin_exponent: u64,
    /// The comparison `exp(-2 min delta) <= exp(-2 m 4^m)` redone in big floats.
    pub high_precision_holds: bool,
}

/// Checks `max_{k,l} b_kl / a_kl = exp(-2 min delta) <= exp(-2 m 4^m)`.
pub fn ratio_bound_check(d: &DeltaSequence) -> RatioBoundReport {
    let m = d.m as u64;
    let four_m = 4u64.pow(d.m);
    let min_delta = d.min();
    let required = m * four_m;
    let bits = 256;
    let mut cc = consts();
    let rm = RoundingMode::ToEven;
    let lhs = BigFloat::from_u64(2 * min_delta, bits).neg().exp(bits, rm, &mut cc);
    let rhs = BigFloat::from_u64(2 * required, bits).neg().exp(bits, rm, &mut cc);
    RatioBoundReport {
        m: d.m,
        min_delta,
        required_min_delta: required,
        symbolic_holds: min_delta >= required,
        max_ratio_exponent: 2 * min_delta,
        bound_exponent: 2 * required,
        margin_exponent: 2 * (min_delta - required.min(min_delta)),
        high_precision_holds: lhs <= rhs,
    }
}

/// Rounds a positive rational up to a dyadic rational with `DYADIC_BITS`
/// significant bits.
fn round_up_dyadic(q: &BigRational) -> BigRational {
    debug_assert!(q.is_positive());
    let nb = q.numer().bits() as i64;
    let db = q.denom().bits() as i64;
    // 2^(nb-db-1) < q < 2^(nb-db+1); scale so the integer part has ~DYADIC_BITS bits.
    let shift = DYADIC_BITS as i64 - (nb - db);
    let scaled = if shift >= 0 {
        q * BigRational::from_integer(BigInt::one() << shift as u64)
    } else {
        q / BigRational::from_integer(BigInt::one() << (-shift) as u64)
    };
    let top = scaled.ceil().to_integer();
    if shift >= 0 {
        BigRational::new(top, BigInt::one() << shift as u64)
    } else {
        BigRational::from_integer(top << (-shift) as u64)
    }
}

/// A dyadic rational `>= exp(-x)` for rational `x >= 0`.
///
/// With `y = x / 2^s <= 1/2`, `exp(-y) <= 1 / sum_{k<=K} y^k / k!`; the
/// reciprocal is rounded up and squared `s` times, rounding up each time.
pub fn exp_neg_upper(x: &BigRational) -> Result<BigRational> {
    if x.is_negative() {
        return invalid("exp_neg_upper needs x >= 0");
    }
    if x.is_zero() {
        return Ok(BigRational::one());
    }
    let mut s = 0u32;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut y = x.clone();
    while y > half {
        y /= BigInt::from(2);
        s += 1;
    }
    let mut sum = BigRational::zero();
    let mut term = BigRational::one();
    for k in 1..=60u32 {
        sum += &term;
        term = term * &y / BigInt::from(k);
    }
    let mut v = round_up_dyadic(&sum.recip());
    for _ in 0..s {
        v = round_up_dyadic(&(&v * &v));
    }
    Ok(v)
}

/// `det(a) - sum_k max_l (b_kl / a_kl) per(a)`, a lower bound on `det(a - b)`
/// whenever `0 < b < a` entrywise.
pub fn lemma1_bound(a: &RationalMatrix, b: &RationalMatrix) -> Result<BigRational> {
    let n = a.dim();
    if b.dim() != n {
        return invalid("a and b must have the same dimension");
    }
    if n > MAX_PERMANENT_DIM {
        return invalid(format!("dimension {n} exceeds {MAX_PERMANENT_DIM}"));
    }
    let mut row_max_sum = BigRational::zero();
    for k in 0..n {
        let mut best = BigRational::zero();
        for l in 0..n {
            let (akl, bkl) = (a.get(k, l), b.get(k, l));
            if !(bkl.is_positive() && bkl < akl) {
                return invalid(format!("entry ({k}, {l}) violates 0 < b < a"));
            }
            let r = bkl / akl;
            if r > best {
                best = r;
            }
        }
        row_max_sum += best;
    }
    Ok(det_exact(a)? - row_max_sum * permanent_exact(a)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma1Check {
    pub bound: ExactValue,
    pub det_difference: ExactValue,
    pub holds: bool,
}

/// Evaluates both sides of the lemma exactly.
pub fn lemma1_check(a: &RationalMatrix, b: &RationalMatrix) -> Result<Lemma1Check> {
    let bound = lemma1_bound(a, b)?;
    let diff = a.map(|i, j, x| x - b.get(i, j));
    let det = det_exact(&diff)?;
    Ok(Lemma1Check {
        holds: det >= bound,
        bound: ExactValue::new(&bound),
        det_difference: ExactValue::new(&det),
    })
}

/// A random pair `0 < b < a` with `a_ij = k / den` and `b_ij = a_ij * r / den`.
pub fn random_dominated_pair(rng: &mut impl Rng, n: usize) -> (RationalMatrix, RationalMatrix) {
    let den = 997i64;
    let a = RationalMatrix::from_fn(n, |_, _| {
        BigRational::new(BigInt::from(rng.gen_range(1..=den)), BigInt::from(den))
    });
    let b = a.map(|_, _, x| {
        x * BigRational::new(BigInt::from(rng.gen_range(1..den)), BigInt::from(den))
    });
    (a, b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma1Trials {
    pub trials: usize,
    pub dim: usize,
    pub seed: u64,
    pub holds: usize,
    /// Smallest `det(a - b) - bound` seen, as a float.
    pub min_gap: f64,
}

impl Lemma1Trials {
    pub fn passed(&self) -> bool {
        self.holds == self.trials
    }
}

/// Runs [`lemma1_check`] on `trials` random pairs of dimension `dim`.
pub fn lemma1_trials(trials: usize, dim: usize, seed: u64) -> Result<Lemma1Trials> {
    if dim == 0 || dim > MAX_PERMANENT_DIM {
        return invalid(format!("dim must lie in 1..={MAX_PERMANENT_DIM}, got {dim}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holds = 0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..trials {
        let (a, b) = random_dominated_pair(&mut rng, dim);
        let bound = lemma1_bound(&a, &b)?;
        let det = det_exact(&a.map(|i, j, x| x - b.get(i, j)))?;
        let gap = &det - &bound;
        if !gap.is_negative() {
            holds += 1;
        }
        min_gap = min_gap.min(gap.to_f64().unwrap_or(f64::NAN));
    }
    Ok(Lemma1Trials {
        trials,
        dim,
        seed,
        holds,
        min_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma2Report {
    pub m: u32,
    pub n: usize,
    pub permanent: ExactValue,
    pub determinant: ExactValue,
    /// `det_exact` agrees with the Cauchy product formula.
    pub cauchy_identity_holds: bool,
    pub permanent_le_one: bool,
    /// `n! (max a)^n`.
    pub coarse_permanent_bound: ExactValue,
    pub coarse_chain_holds: bool,
    /// `(240 e)^(-2 m^3)`, rounded up.
    pub determinant_threshold: String,
    pub log10_determinant: f64,
    pub log10_threshold: f64,
    pub determinant_ge_threshold: bool,
}

impl Lemma2Report {
    pub fn passed(&self) -> bool {
        self.cauchy_identity_holds
            && self.permanent_le_one
            && self.coarse_chain_holds
            && self.determinant_ge_threshold
    }
}

/// Upper bound on `(240 e)^(-2 m^3)` at `bits` precision.
fn lemma2_threshold_upper(m: u32, bits: usize) -> BigFloat {
    let mut cc = consts();
    let rm = RoundingMode::ToEven;
    let p = bits + 64;
    let k = 2 * (m as u64).pow(3);
    let log = BigFloat::from_u64(240, p)
        .ln(p, rm, &mut cc)
        .add(&BigFloat::from_u8(1, p), p, rm)
        .mul(&BigFloat::from_u64(k, p), p, rm)
        .neg();
    let v = log.exp(p, rm, &mut cc);
    // Guard against the last-place error of exp and ln.
    let guard = BigFloat::from_u8(1, p).add(&unit_roundoff(bits), p, RoundingMode::Up);
    v.mul(&guard, bits, RoundingMode::Up)
}

/// Exact permanent and determinant of the Cauchy matrix of `delta_sequence(m)`
/// checked against `per <= n! (max a)^n <= 1` and `det >= (240 e)^(-2 m^3)`.
pub fn lemma2_verify(m: u32) -> Result<Lemma2Report> {
    if m == 0 || m > MAX_COMPUTED_M {
        return invalid(format!("lemma2_verify supports m in 1..={MAX_COMPUTED_M}, got {m}"));
    }
    let d = delta_sequence(m)?;
    let n = d.n();
    let a = cauchy_matrix(&d.values);
    let per = permanent_exact(&a)?;
    let det = det_exact(&a)?;
    let product = cauchy_det_product(&d.values)?;
    let max_a = BigRational::new(BigInt::one(), BigInt::from(2 * d.min()));
    let fact: BigInt = (1..=n as u64).map(BigInt::from).product();
    let coarse = BigRational::from_integer(fact) * num_traits::pow(max_a, n);
    let bits = DEFAULT_PRECISION_BITS;
    let threshold = lemma2_threshold_upper(m, bits);
    let det_down = from_rational_directed(&det, bits, RoundingMode::Down);
    let mut cc = consts();
    Ok(Lemma2Report {
        m,
        n,
        cauchy_identity_holds: det == product,
        permanent_le_one: per <= BigRational::one(),
        coarse_chain_holds: per <= coarse && coarse <= BigRational::one(),
        coarse_permanent_bound: ExactValue::new(&coarse),
        log10_determinant: log10_abs_f64(&det_down, &mut cc),
        log10_threshold: log10_abs_f64(&threshold, &mut cc),
        determinant_threshold: to_scientific(&threshold, 20),
        determinant_ge_threshold: det_down >= threshold,
        permanent: ExactValue::new(&per),
        determinant: ExactValue::new(&det),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DetSigmaLower {
    pub m: u32,
    /// `(240 e)^(-2 m^3) - m^2 exp(-2 m 4^m)`, in scientific notation.
    pub value: String,
    pub positive: bool,
    /// `ln` of the value when positive.
    pub log_value: Option<f64>,
    /// `-16 m^3`.
    pub log_target: f64,
    /// Whether the value is at least `exp(-16 m^3)`.
    pub ge_target: bool,
    #[serde(skip)]
    pub big: BigFloat,
}

const DET_SIGMA_BITS: usize = 1024;

/// `(240 e)^(-2 m^3) - m^2 exp(-2 m 4^m)` in high precision, compared with
/// `exp(-16 m^3)`.
pub fn det_sigma_lower(m: u32) -> Result<DetSigmaLower> {
    if m == 0 || m > MAX_M {
        return invalid(format!("m must lie in 1..={MAX_M}, got {m}"));
    }
    let p = DET_SIGMA_BITS;
    let rm = RoundingMode::ToEven;
    let mut cc = consts();
    let m3 = (m as u64).pow(3);
    let lead = BigFloat::from_u64(240, p)
        .ln(p, rm, &mut cc)
        .add(&BigFloat::from_u8(1, p), p, rm)
        .mul(&BigFloat::from_u64(2 * m3, p), p, rm)
        .neg()
        .exp(p, rm, &mut cc);
    let m2 = (m as u64).pow(2);
    let correction = BigFloat::from_u64(2 * m as u64 * 4u64.pow(m), p)
        .neg()
        .exp(p, rm, &mut cc)
        .mul(&BigFloat::from_u64(m2, p), p, rm);
    let value = lead.sub(&correction, p, rm);
    let target = BigFloat::from_u64(16 * m3, p).neg().exp(p, rm, &mut cc);
    let positive = value.is_positive();
    Ok(DetSigmaLower {
        m,
        value: to_scientific(&value, 20),
        positive,
        log_value: positive.then(|| ln_abs_f64(&value, &mut cc)),
        log_target: -16.0 * m3 as f64,
        ge_target: value >= target,
        big: value,
    })
}

/// Smallest `m <= max_m` from which `det_sigma_lower(k) >= exp(-16 k^3)` holds
/// for every `k` up to `max_m`.
pub fn det_sigma_threshold(max_m: u32) -> Result<Option<u32>> {
    let mut threshold = None;
    for m in (1..=max_m).rev() {
        if det_sigma_lower(m)?.ge_target {
            threshold = Some(m);
        } else {
            break;
        }
    }
    Ok(threshold)
}

/// Whether `m^2 exp(-2 m 4^m) < (240 e)^(-2 m^3) / 1000`, i.e. the correction
/// term is negligible next to the leading term.
pub fn correction_negligible(m: u32) -> Result<bool> {
    let p = DET_SIGMA_BITS;
    let rm = RoundingMode::ToEven;
    let mut cc = consts();
    let m3 = (m as u64).pow(3);
    let lead_log = BigFloat::from_u64(240, p)
        .ln(p, rm, &mut cc)
        .add(&BigFloat::from_u8(1, p), p, rm)
        .mul(&BigFloat::from_u64(2 * m3, p), p, rm)
        .neg()
        .sub(&BigFloat::from_u64(1000, p).ln(p, rm, &mut cc), p, rm);
    let corr_log = BigFloat::from_u64((m as u64).pow(2), p)
        .ln(p, rm, &mut cc)
        .sub(&BigFloat::from_u64(2 * m as u64 * 4u64.pow(m), p), p, rm);
    Ok(corr_log < lead_log)
}

/// `Sigma_ij = (1 - exp(-delta_i - delta_j)) / (delta_i + delta_j)` at `bits`
/// precision, each entry with an error bound of `4u` relative.
pub fn sigma_matrix(d: &DeltaSequence, bits: usize) -> Result<BigFloatMatrix> {
    let rm = RoundingMode::ToEven;
    let mut cc = consts();
    let four_u = unit_roundoff(bits).mul(&BigFloat::from_u8(4, 128), 128, RoundingMode::Up);
    let p = bits + 64;
    BigFloatMatrix::from_fn(d.n(), bits, |i, j| {
        let x = BigFloat::from_u64(d.values[i] + d.values[j], p);
        let v = BigFloat::from_u8(1, p)
            .sub(&x.neg().exp(p, rm, &mut cc), p, rm)
            .div(&x, bits, rm);
        let e = v.abs().mul(&four_u, 128, RoundingMode::Up);
        (v, e)
    })
}

/// `det Sigma` with a certified error bound; precision doubles as needed.
pub fn det_sigma(m: u32, precision_bits: usize) -> Result<HighPrecisionDet> {
    if m == 0 || m > MAX_COMPUTED_M {
        return invalid(format!("computed determinants support m in 1..={MAX_COMPUTED_M}, got {m}"));
    }
    let d = delta_sequence(m)?;
    bigfloat::det_highprec_adaptive(precision_bits, |bits| sigma_matrix(&d, bits))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ComputedDet,
    AnalyticDet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallBallBound {
    pub epsilon: f64,
    pub log_epsilon: f64,
    pub m: u32,
    pub n: usize,
    /// Natural log of the probability bound.
    pub log_prob_bound: f64,
    pub provenance: Provenance,
    /// `ln det Sigma` (certified lower end) for computed bounds.
    pub log_det_sigma: Option<f64>,
    pub precision_bits: Option<usize>,
}

/// `n log eps - log det(Sigma) / 2` (computed) or `m^2 log eps + 8 m^3`
/// (analytic).
pub fn smallball_log_upper(
    epsilon: f64,
    m: u32,
    mode: Provenance,
    precision_bits: usize,
) -> Result<SmallBallBound> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    smallball_log_upper_log(epsilon.ln(), m, mode, precision_bits)
}

/// As [`smallball_log_upper`] with `log eps` given directly, so that tiny
/// `eps` stay representable.
pub fn smallball_log_upper_log(
    log_epsilon: f64,
    m: u32,
    mode: Provenance,
    precision_bits: usize,
) -> Result<SmallBallBound> {
    if !(log_epsilon < 0.0 && log_epsilon.is_finite()) {
        return invalid(format!("log epsilon must be negative and finite, got {log_epsilon}"));
    }
    if m == 0 {
        return invalid("m must be at least 1");
    }
    let n = (m as usize).pow(2);
    let mut out = SmallBallBound {
        epsilon: log_epsilon.exp(),
        log_epsilon,
        m,
        n,
        log_prob_bound: 0.0,
        provenance: mode,
        log_det_sigma: None,
        precision_bits: None,
    };
    match mode {
        Provenance::AnalyticDet => {
            let mf = m as f64;
            out.log_prob_bound = mf * mf * log_epsilon + 8.0 * mf * mf * mf;
        }
        Provenance::ComputedDet => {
            let det = det_sigma(m, precision_bits)?;
            let lower = det.lower();
            if !lower.is_positive() {
                return Err(Error::Precision(
                    "determinant lower bound is not positive".to_string(),
                ));
            }
            let mut cc = consts();
            let log_det = ln_abs_f64(&lower, &mut cc);
            out.log_det_sigma = Some(log_det);
            out.precision_bits = Some(det.precision_bits);
            out.log_prob_bound = n as f64 * log_epsilon - 0.5 * log_det;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalM {
    pub log_epsilon: f64,
    pub m: u32,
    /// `m^2 log eps + 8 m^3` at the integer minimizer.
    pub log_bound: f64,
    /// `-|log eps|^3 / 432`, the value at the continuous minimizer.
    pub continuous_bound: f64,
    /// Every scanned `m` with its bound.
    pub scan: Vec<(u32, f64)>,
}

/// Minimizes `m^2 log eps + 8 m^3` over `1 <= m <= ceil(|log eps| / 6)`.
pub fn optimal_m_log(log_epsilon: f64) -> Result<OptimalM> {
    if !(log_epsilon.is_finite() && log_epsilon <= -12.0) {
        return invalid(format!(
            "optimal m needs eps <= exp(-12), got log eps = {log_epsilon}"
        ));
    }
    let l = -log_epsilon;
    let top = (l / 6.0).ceil() as u32;
    let scan: Vec<(u32, f64)> = (1..=top)
        .map(|m| {
            let mf = m as f64;
            (m, mf * mf * log_epsilon + 8.0 * mf * mf * mf)
        })
        .collect();
    let &(m, log_bound) = scan
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("scan range is nonempty");
    Ok(OptimalM {
        log_epsilon,
        m,
        log_bound,
        continuous_bound: -l * l * l / 432.0,
        scan,
    })
}

pub fn optimal_m(epsilon: f64) -> Result<OptimalM> {
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    optimal_m_log(epsilon.ln())
}

/// `(1 - exp(-(s + t))) / (s + t)`, equal to 1 at `s + t = 0`.
pub fn kernel_y(s: f64, t: f64) -> f64 {
    let u = s + t;
    if u < 1e-8 {
        1.0 - u / 2.0 + u * u / 6.0 - u * u * u / 24.0
    } else {
        -(-u).exp_m1() / u
    }
}

/// `(ts - 1) / log(ts)` for `s, t` in `(0, 1]`, equal to 1 at `ts = 1`.
pub fn kernel_x(s: f64, t: f64) -> f64 {
    let w = s.ln() + t.ln();
    if w.abs() < 1e-8 {
        1.0 + w / 2.0 + w * w / 6.0 + w * w * w / 24.0
    } else {
        w.exp_m1() / w
    }
}

/// Exact rational `a` and the rigorous dyadic upper bound on
/// `b = exp(-delta_i - delta_j) a` for `delta_sequence(m)`.
pub fn cauchy_pair_upper(m: u32) -> Result<(RationalMatrix, RationalMatrix)> {
    let d = delta_sequence(m)?;
    let a = cauchy_matrix(&d.values);
    let mut cache = std::collections::HashMap::new();
    let mut b_rows = Vec::with_capacity(d.n());
    for i in 0..d.n() {
        let mut row = Vec::with_capacity(d.n());
        for j in 0..d.n() {
            let x = d.values[i] + d.values[j];
            let e = match cache.get(&x) {
                Some(e) => Clone::clone(e),
                None => {
                    let e = exp_neg_upper(&BigRational::from_integer(BigInt::from(x)))?;
                    cache.insert(x, e.clone());
                    e
                }
            };
            row.push(e * a.get(i, j));
        }
        b_rows.push(row);
    }
    Ok((a, RationalMatrix::from_rows(b_rows)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::bigfloat::{det_highprec, from_rational, to_f64};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_sequence(1).unwrap().values, vec![8]);
        assert_eq!(delta_sequence(2).unwrap().values, vec![48, 64, 192, 256]);
        let d3 = delta_sequence(3).unwrap();
        assert_eq!((d3.values[0], d3.values[8]), (256, 6144));
        assert!(delta_sequence(0).is_err());
        assert!(delta_sequence(9).is_err());
        for m in 1..=MAX_M {
            let d = delta_sequence(m).unwrap();
            assert_eq!(d.n(), (m * m) as usize);
            assert!(d.values.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(d.min(), 4u64.pow(m) * (m as u64 + 1));
        }
    }

    #[test]
    fn cauchy_examples() {
        let a1 = cauchy_matrix(&delta_sequence(1).unwrap().values);
        assert_eq!(*a1.get(0, 0), q(1, 16));
        let a2 = cauchy_matrix(&delta_sequence(2).unwrap().values);
        assert_eq!(*a2.get(0, 1), q(1, 112));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a2.get(i, j), a2.get(j, i));
                assert!(a2.get(i, j).is_positive());
            }
        }
        assert_eq!(cauchy_det_product(&[1, 2]).unwrap(), q(1, 72));
        assert_eq!(cauchy_det_product(&[8]).unwrap(), q(1, 16));
        assert!(cauchy_det_product(&[3, 3]).is_err());
        let d2 = delta_sequence(2).unwrap();
        assert_eq!(cauchy_det_product(&d2.values).unwrap(), det_exact(&a2).unwrap());
    }

    #[test]
    fn ratio_examples() {
        for (m, min, exp) in [(1, 8, 8), (2, 48, 32), (3, 256, 384)] {
            let r = ratio_bound_check(&delta_sequence(m).unwrap());
            assert_eq!(r.min_delta, min);
            assert_eq!(r.bound_exponent, 2 * (m as u64) * 4u64.pow(m));
            assert_eq!(r.max_ratio_exponent, 2 * min);
            assert!(r.symbolic_holds && r.high_precision_holds);
            assert_eq!(r.margin_exponent, 2 * 4u64.pow(m));
            let _ = exp;
        }
    }

    #[test]
    fn dyadic_exponential_is_an_upper_bound() {
        let mut cc = consts();
        for x in [0u64, 1, 2, 16, 96, 512, 12288] {
            let up = exp_neg_upper(&BigRational::from_integer(x.into())).unwrap();
            let exact = BigFloat::from_u64(x, 2048).neg().exp(2048, RoundingMode::ToEven, &mut cc);
            let up_f = from_rational(&up, 2048);
            assert!(up_f >= exact, "x={x}");
            let rel = to_f64(&up_f.sub(&exact, 2048, RoundingMode::ToEven).div(&exact, 128, RoundingMode::ToEven));
            assert!(rel < 1e-60, "x={x} rel={rel}");
        }
        let half = exp_neg_upper(&q(1, 2)).unwrap();
        assert!((half.to_f64().unwrap() - (-0.5f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn lemma1_examples() {
        let a = RationalMatrix::from_ratios(&[&[(2, 1), (1, 1)], &[(1, 1), (2, 1)]]).unwrap();
        let b = RationalMatrix::from_ratios(&[&[(1, 1), (1, 2)], &[(1, 2), (1, 1)]]).unwrap();
        assert_eq!(lemma1_bound(&a, &b).unwrap(), q(-2, 1));
        let c = lemma1_check(&a, &b).unwrap();
        assert_eq!(c.det_difference.exact, "3/4");
        assert!(c.holds);
        assert!(lemma1_bound(&b, &a).is_err());

        let det_a = det_exact(&a).unwrap();
        let mut prev = lemma1_bound(&a, &b).unwrap();
        for k in 1..6 {
            let scale = BigRational::new(BigInt::one(), BigInt::from(10).pow(k));
            let small = a.map(|_, _, x| x * &scale);
            let bound = lemma1_bound(&a, &small).unwrap();
            assert!(bound > prev && bound < det_a);
            prev = bound;
        }
        assert!((&det_a - &prev).to_f64().unwrap() <= 1e-4);
    }

    #[test]
    fn lemma1_on_cauchy_pair_is_positive() {
        let (a, b) = cauchy_pair_upper(2).unwrap();
        let c = lemma1_check(&a, &b).unwrap();
        assert!(c.holds);
        assert!(lemma1_bound(&a, &b).unwrap().is_positive());
    }

    #[test]
    fn lemma1_random_trials() {
        for dim in 1..=4 {
            let r = lemma1_trials(20, dim, dim as u64).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn lemma2_small_cases() {
        for m in 1..=2 {
            let r = lemma2_verify(m).unwrap();
            assert!(r.passed(), "{r:?}");
        }
        let r = lemma2_verify(1).unwrap();
        assert_eq!(r.permanent.exact, "1/16");
        assert_eq!(r.determinant.exact, "1/16");
        assert!((10f64.powf(r.log10_threshold) - 2.35e-6).abs() < 1e-8);
        assert!(lemma2_verify(4).is_err());
    }

    #[test]
    fn det_sigma_lower_examples() {
        let one = det_sigma_lower(1).unwrap();
        let direct = (240.0 * std::f64::consts::E).powi(-2) - (-8.0f64).exp();
        assert_eq!(one.positive, direct > 0.0);
        assert!((to_f64(&one.big) - direct).abs() < 1e-15);
        let three = det_sigma_lower(3).unwrap();
        assert!(three.positive && three.ge_target);
        let lead = -54.0 * (240f64.ln() + 1.0);
        assert!((three.log_value.unwrap() - lead).abs() < 1e-9);
        assert_eq!(det_sigma_threshold(MAX_M).unwrap(), Some(3));
    }

    #[test]
    fn correction_term_is_negligible_from_three() {
        assert!(!correction_negligible(2).unwrap());
        for m in 3..=MAX_M {
            assert!(correction_negligible(m).unwrap(), "m={m}");
        }
    }

    #[test]
    fn sigma_scalar_case() {
        let d = det_highprec(&sigma_matrix(&delta_sequence(1).unwrap(), 256).unwrap()).unwrap();
        let want = -(-16f64).exp_m1() / 16.0;
        assert!((to_f64(&d.value) - want).abs() < 1e-17);
        let b = smallball_log_upper(0.3, 1, Provenance::ComputedDet, 1024).unwrap();
        assert!((b.log_prob_bound - (0.3f64.ln() - 0.5 * want.ln())).abs() < 1e-13);
    }

    #[test]
    fn sigma_minors_are_positive() {
        for m in 1..=MAX_COMPUTED_M {
            let full = sigma_matrix(&delta_sequence(m).unwrap(), 1024).unwrap();
            for k in 1..=full.dim() {
                let d = det_highprec(&full.leading(k)).unwrap();
                assert!(d.lower().is_positive(), "m={m} k={k}");
            }
        }
    }

    #[test]
    fn computed_bound_below_analytic() {
        for m in 1..=MAX_COMPUTED_M {
            for eps in [0.3, 0.1, 1e-3] {
                let c = smallball_log_upper(eps, m, Provenance::ComputedDet, 1024).unwrap();
                let a = smallball_log_upper(eps, m, Provenance::AnalyticDet, 1024).unwrap();
                let holds = det_sigma_lower(m).unwrap().ge_target;
                if holds {
                    assert!(c.log_prob_bound <= a.log_prob_bound + 1e-9);
                }
            }
        }
        assert!(smallball_log_upper(0.1, 4, Provenance::ComputedDet, 1024).is_err());
    }

    #[test]
    fn analytic_and_optimal_examples() {
        let b = smallball_log_upper_log(-24.0, 2, Provenance::AnalyticDet, 64).unwrap();
        assert_eq!(b.log_prob_bound, -32.0);
        let o = optimal_m_log(-24.0).unwrap();
        assert_eq!((o.m, o.log_bound), (2, -32.0));
        let o = optimal_m_log(-120.0).unwrap();
        assert_eq!((o.m, o.log_bound), (10, -4000.0));
        assert_eq!(o.continuous_bound, -4000.0);
        assert!(optimal_m(0.5).is_err());
        assert!(optimal_m(1e-12).is_ok());
    }

    #[test]
    fn optimum_tracks_continuous_value() {
        for k in 1..=20 {
            let l = 12.0 * k as f64;
            let o = optimal_m_log(-l).unwrap();
            assert_eq!(o.log_bound, o.continuous_bound);
            // Between the e^{-12k} points the integer optimum trails the
            // continuous one by at most the curvature over half a step.
            let mid = optimal_m_log(-(l + 6.0)).unwrap();
            let lm = l + 6.0;
            let gap = mid.log_bound - mid.continuous_bound;
            assert!(gap >= 0.0 && gap <= 0.25 * 48.0 * lm / 12.0, "k={k} gap={gap}");
        }
        let ratio = |k: u32| optimal_m_log(-12.0 * k as f64).unwrap().log_bound / (12.0 * k as f64).powi(3);
        assert!((ratio(50) + 1.0 / 432.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_y(0.0, 0.0), 1.0);
        assert!((kernel_y(1.0, 1.0) - 0.432_332_358_381_693_6).abs() < 1e-15);
        assert_eq!(kernel_x(1.0, 1.0), 1.0);
        let e1 = (-1.0f64).exp();
        assert!((kernel_x(e1, e1) - kernel_y(1.0, 1.0)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn kernels_agree_under_change_of_variables(s in 0.0f64..50.0, t in 0.0f64..50.0) {
            prop_assert!((kernel_x((-s).exp(), (-t).exp()) - kernel_y(s, t)).abs() <= 1e-14);
            prop_assert_eq!(kernel_y(s, t), kernel_y(t, s));
        }

        #[test]
        fn cauchy_identity_random(mut d in proptest::collection::btree_set(1u64..1000, 1..=7)) {
            let d: Vec<u64> = std::mem::take(&mut d).into_iter().collect();
            prop_assert_eq!(cauchy_det_product(&d).unwrap(), det_exact(&cauchy_matrix(&d)).unwrap());
        }
    }
}
