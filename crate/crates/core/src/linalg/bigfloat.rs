//! Precision-tracked big-float arithmetic and determinants with a running
//! forward error bound.

use astro_float_num::{BigFloat, Consts, RoundingMode, Sign, Word};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::rational::RationalMatrix;
use crate::error::{invalid, Error, Result};

/// Default working precision for determinant work.
pub const DEFAULT_PRECISION_BITS: usize = 1024;
/// Cap for automatic precision doubling.
pub const MAX_PRECISION_BITS: usize = 8192;
/// Precision used to carry error bounds (always rounded upwards).
const ERROR_BITS: usize = 128;

const NEAREST: RoundingMode = RoundingMode::ToEven;
const UP: RoundingMode = RoundingMode::Up;

pub fn consts() -> Consts {
    Consts::new().expect("allocating big-float constant cache")
}

/// `2^(1-p)`: bound on the relative error of one correctly rounded operation.
pub fn unit_roundoff(precision_bits: usize) -> BigFloat {
    let mut u = BigFloat::from_u8(1, ERROR_BITS);
    u.set_exponent(2 - precision_bits as i32);
    u
}

pub fn from_bigint(z: &BigInt, p: usize) -> BigFloat {
    let (sign, words) = z.to_u64_digits();
    if words.is_empty() {
        return BigFloat::new(p);
    }
    let s = if sign == num_bigint::Sign::Minus {
        Sign::Neg
    } else {
        Sign::Pos
    };
    let words: Vec<Word> = words.into_iter().map(|w| w as Word).collect();
    let exact = BigFloat::from_words(&words, s, (64 * words.len()) as i32);
    let mut out = exact;
    out.set_precision(p.max(64), NEAREST)
        .expect("big-float precision within range");
    out
}

/// Nearest big float to `q` at precision `p` (relative error at most `3u`).
pub fn from_rational(q: &BigRational, p: usize) -> BigFloat {
    let num = from_bigint(q.numer(), p + 64);
    let den = from_bigint(q.denom(), p + 64);
    num.div(&den, p, NEAREST)
}

/// Big float rounded in the given direction from `q`.
pub fn from_rational_directed(q: &BigRational, p: usize, rm: RoundingMode) -> BigFloat {
    // Numerator and denominator are converted exactly when they fit; when they
    // do not, the extra guard words keep the error far below one final ulp and
    // the directed division dominates.
    let bits = q.numer().bits().max(q.denom().bits()) as usize + 64;
    let num = from_bigint(q.numer(), bits);
    let den = from_bigint(q.denom(), bits);
    num.div(&den, p, rm)
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Nearest `f64` (underflows to zero, overflows to infinity).
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    if x.is_zero() {
        return 0.0;
    }
    let (m, _, s, e, _) = x.as_raw_parts().expect("finite big float");
    let top = *m.last().unwrap();
    let next = if m.len() >= 2 { m[m.len() - 2] } else { 0 };
    // Fold the next word in as a sticky bit so the u64 -> f64 rounding is right.
    let mant = (top as f64) + if next != 0 { 0.25 } else { 0.0 };
    let v = ldexp(mant, e as i64 - 64);
    if s == Sign::Neg {
        -v
    } else {
        v
    }
}

/// `ln|x|` as `f64`, computed in big-float arithmetic so that values far below
/// the `f64` range are handled.
pub fn ln_abs_f64(x: &BigFloat, cc: &mut Consts) -> f64 {
    let p = x.precision().unwrap_or(128).max(128);
    to_f64(&x.abs().ln(p, NEAREST, cc))
}

/// `log10|x|` as `f64`.
pub fn log10_abs_f64(x: &BigFloat, cc: &mut Consts) -> f64 {
    ln_abs_f64(x, cc) / std::f64::consts::LN_10
}

/// Decimal scientific notation with `digits` significant digits.
pub fn to_scientific(x: &BigFloat, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let mut cc = consts();
    let p = x.precision().unwrap_or(128);
    let s = x
        .format(astro_float_num::Radix::Dec, NEAREST, &mut cc)
        .unwrap_or_else(|_| format!("{x}"));
    let _ = p;
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.as_str()),
    };
    let (mantissa, exp) = match body.split_once('e') {
        Some((m, e)) => (m, e.parse::<i64>().unwrap_or(0)),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let mut all: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes())
        .map(|b| b - b'0')
        .collect();
    // Position of the decimal point relative to the start of `all`.
    let mut point = int_part.len() as i64 + exp;
    let lead = all.iter().position(|&d| d != 0).unwrap_or(0);
    all.drain(..lead);
    point -= lead as i64;
    let mut kept: Vec<u8> = all.iter().copied().take(digits).collect();
    kept.resize(digits, 0);
    if all.len() > digits && all[digits] >= 5 {
        let mut i = digits;
        loop {
            if i == 0 {
                kept.insert(0, 1);
                kept.truncate(digits);
                point += 1;
                break;
            }
            i -= 1;
            if kept[i] == 9 {
                kept[i] = 0;
            } else {
                kept[i] += 1;
                break;
            }
        }
    }
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push((b'0' + kept[0]) as char);
    if digits > 1 {
        out.push('.');
        out.extend(kept[1..].iter().map(|d| (b'0' + d) as char));
    }
    out.push_str(&format!("e{}", point - 1));
    out
}

/// An exact rational as it appears in reports: a rounded decimal next to the
/// exact `num/den` text.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ExactValue {
    pub decimal: String,
    pub exact: String,
}

impl ExactValue {
    pub fn new(q: &BigRational) -> Self {
        let bits = 128;
        Self {
            decimal: to_scientific(&from_rational(q, bits), 20),
            exact: super::rational::exact_string(q),
        }
    }
}

/// `exp(x)` at precision `p`.
pub fn exp(x: &BigFloat, p: usize, cc: &mut Consts) -> BigFloat {
    x.exp(p, NEAREST, cc)
}

/// A square matrix of big floats at a fixed precision, each entry carrying an
/// absolute error bound relative to the exact matrix it represents.
#[derive(Clone, Debug)]
pub struct BigFloatMatrix {
    n: usize,
    precision_bits: usize,
    entries: Vec<BigFloat>,
    errors: Vec<BigFloat>,
}

impl BigFloatMatrix {
    /// Entries are taken as exact.
    pub fn new(n: usize, precision_bits: usize, entries: Vec<BigFloat>) -> Result<Self> {
        let errors = vec![BigFloat::new(ERROR_BITS); entries.len()];
        Self::with_errors(n, precision_bits, entries, errors)
    }

    pub fn with_errors(
        n: usize,
        precision_bits: usize,
        entries: Vec<BigFloat>,
        errors: Vec<BigFloat>,
    ) -> Result<Self> {
        if precision_bits < 64 {
            return invalid(format!("precision must be at least 64 bits, got {precision_bits}"));
        }
        if entries.len() != n * n || errors.len() != n * n {
            return invalid("matrix must be square");
        }
        Ok(Self {
            n,
            precision_bits,
            entries,
            errors,
        })
    }

    pub fn from_f64(rows: &[&[f64]], precision_bits: usize) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("matrix must be square");
        }
        let entries = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| BigFloat::from_f64(v, precision_bits)))
            .collect();
        Self::new(n, precision_bits, entries)
    }

    /// Rounds each rational entry to nearest, recording the rounding error.
    pub fn from_rational(m: &RationalMatrix, precision_bits: usize) -> Result<Self> {
        let u = unit_roundoff(precision_bits);
        let three_u = u.mul(&BigFloat::from_u8(3, ERROR_BITS), ERROR_BITS, UP);
        let mut entries = Vec::with_capacity(m.dim() * m.dim());
        let mut errors = Vec::with_capacity(m.dim() * m.dim());
        for q in m.entries() {
            let v = from_rational(q, precision_bits);
            errors.push(v.abs().mul(&three_u, ERROR_BITS, UP));
            entries.push(v);
        }
        Self::with_errors(m.dim(), precision_bits, entries, errors)
    }

    pub fn from_fn(
        n: usize,
        precision_bits: usize,
        mut f: impl FnMut(usize, usize) -> (BigFloat, BigFloat),
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(n * n);
        let mut errors = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (v, e) = f(i, j);
                entries.push(v);
                errors.push(e);
            }
        }
        Self::with_errors(n, precision_bits, entries, errors)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn precision_bits(&self) -> usize {
        self.precision_bits
    }

    pub fn get(&self, i: usize, j: usize) -> &BigFloat {
        &self.entries[i * self.n + j]
    }

    pub fn error(&self, i: usize, j: usize) -> &BigFloat {
        &self.errors[i * self.n + j]
    }

    /// Leading `k x k` principal submatrix.
    pub fn leading(&self, k: usize) -> Self {
        let k = k.min(self.n);
        let mut entries = Vec::with_capacity(k * k);
        let mut errors = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                entries.push(self.get(i, j).clone());
                errors.push(self.error(i, j).clone());
            }
        }
        Self {
            n: k,
            precision_bits: self.precision_bits,
            entries,
            errors,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HighPrecisionDet {
    pub value: BigFloat,
    /// Bound on `|value - det(exact matrix)|`.
    pub error_bound: BigFloat,
    pub precision_bits: usize,
}

impl HighPrecisionDet {
    /// `value - error_bound`, a certified lower bound on the determinant.
    pub fn lower(&self) -> BigFloat {
        self.value
            .sub(&self.error_bound, self.precision_bits, RoundingMode::Down)
    }

    /// `value + error_bound`.
    pub fn upper(&self) -> BigFloat {
        self.value.add(&self.error_bound, self.precision_bits, UP)
    }

    /// Whether the exact determinant lies within the reported bound of `x`.
    pub fn contains(&self, x: &BigFloat) -> bool {
        let diff = self.value.sub(x, self.precision_bits + 64, NEAREST).abs();
        diff <= self.error_bound
    }
}

/// `|x| u` when `x` came out of a rounded operation, zero when it is exact.
fn rounding(x: &BigFloat, u: &BigFloat) -> BigFloat {
    if x.inexact() {
        x.abs().mul(u, ERROR_BITS, UP)
    } else {
        BigFloat::new(ERROR_BITS)
    }
}

/// Determinant by partially pivoted elimination at the matrix precision.
///
/// Every entry carries an absolute error bound that is propagated through each
/// elimination step (including the rounding of that step), so the reported
/// bound reflects cancellation as it happens rather than a worst-case
/// condition estimate. Fails with [`Error::Precision`] when a pivot or the final
/// value cannot be separated from its error bound.
pub fn det_highprec(m: &BigFloatMatrix) -> Result<HighPrecisionDet> {
    let n = m.n;
    let p = m.precision_bits;
    if p < 64 {
        return invalid("precision must be at least 64 bits");
    }
    let u = unit_roundoff(p);
    let one = BigFloat::from_u8(1, ERROR_BITS);
    if n == 0 {
        return Ok(HighPrecisionDet {
            value: BigFloat::from_u8(1, p),
            error_bound: BigFloat::new(ERROR_BITS),
            precision_bits: p,
        });
    }
    let mut a: Vec<Vec<BigFloat>> = (0..n).map(|i| m.entries[i * n..(i + 1) * n].to_vec()).collect();
    let mut e: Vec<Vec<BigFloat>> = (0..n).map(|i| m.errors[i * n..(i + 1) * n].to_vec()).collect();
    let mut negate = false;
    let mut pivots = Vec::with_capacity(n);
    let mut pivot_rel = Vec::with_capacity(n);

    for k in 0..n {
        let best = (k..n)
            .max_by(|&x, &y| {
                a[x][k]
                    .abs()
                    .partial_cmp(&a[y][k].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if best != k {
            a.swap(best, k);
            e.swap(best, k);
            negate = !negate;
        }
        let piv = a[k][k].clone();
        let piv_err = e[k][k].clone();
        let piv_abs = piv.abs();
        if piv.is_zero() && piv_err.is_zero() {
            return Ok(HighPrecisionDet {
                value: BigFloat::new(p),
                error_bound: BigFloat::new(ERROR_BITS),
                precision_bits: p,
            });
        }
        if piv_abs <= piv_err {
            return Err(Error::Precision(format!(
                "pivot {k} is not separated from its error bound at {p} bits"
            )));
        }
        // |piv| - err, rounded down so the divisions below over-estimate.
        let piv_floor = piv_abs.sub(&piv_err, ERROR_BITS, RoundingMode::Down);
        pivot_rel.push(piv_err.div(&piv_floor, ERROR_BITS, UP));
        pivots.push(piv.clone());

        for i in k + 1..n {
            if a[i][k].is_zero() && e[i][k].is_zero() {
                continue;
            }
            let l = a[i][k].div(&piv, p, NEAREST);
            let l_abs = l.abs();
            // err(l) <= (err(a_ik) + |l| err(piv)) / (|piv| - err(piv)) + |l| u
            let l_err = e[i][k]
                .add(&l_abs.mul(&piv_err, ERROR_BITS, UP), ERROR_BITS, UP)
                .div(&piv_floor, ERROR_BITS, UP)
                .add(&rounding(&l, &u), ERROR_BITS, UP);
            for j in k + 1..n {
                let prod = l.mul(&a[k][j], p, NEAREST);
                let new = a[i][j].sub(&prod, p, NEAREST);
                let akj_abs = a[k][j].abs();
                let err = e[i][j]
                    .add(&l_abs.mul(&e[k][j], ERROR_BITS, UP), ERROR_BITS, UP)
                    .add(&akj_abs.mul(&l_err, ERROR_BITS, UP), ERROR_BITS, UP)
                    .add(&l_err.mul(&e[k][j], ERROR_BITS, UP), ERROR_BITS, UP)
                    .add(&rounding(&prod, &u), ERROR_BITS, UP)
                    .add(&rounding(&new, &u), ERROR_BITS, UP);
                a[i][j] = new;
                e[i][j] = err;
            }
            a[i][k] = BigFloat::new(p);
            e[i][k] = BigFloat::new(ERROR_BITS);
        }
    }

    let mut det = pivots[0].clone();
    for piv in &pivots[1..] {
        det = det.mul(piv, p, NEAREST);
    }
    if negate {
        det = det.neg();
    }
    // Each computed pivot is within a relative r_k of the exact pivot and the
    // product adds n - 1 roundings, so with F = (1+u)^n prod(1 + r_k):
    // |det - det*| <= |det| (1+u)^n (F - 1).
    // F - 1 is tiny, so it is formed with enough bits to keep it.
    let gp = p + ERROR_BITS;
    let one_plus_u = one.add(&u, gp, UP);
    let mut growth = BigFloat::from_u8(1, gp);
    for r in &pivot_rel {
        growth = growth.mul(&one.add(r, gp, UP), gp, UP);
        growth = growth.mul(&one_plus_u, gp, UP);
    }
    let excess = growth.sub(&one, ERROR_BITS, UP);
    let magnitude = det.abs().mul(&one_plus_u.powi(n, gp, UP), ERROR_BITS, UP);
    let error_bound = magnitude.mul(&excess, ERROR_BITS, UP);
    if !det.is_zero() && error_bound >= det.abs() {
        return Err(Error::Precision(format!(
            "determinant error bound exceeds its magnitude at {p} bits"
        )));
    }
    Ok(HighPrecisionDet {
        value: det,
        error_bound,
        precision_bits: p,
    })
}

/// Runs `build(bits)` and [`det_highprec`], doubling the precision on
/// precision failures up to [`MAX_PRECISION_BITS`].
pub fn det_highprec_adaptive(
    start_bits: usize,
    mut build: impl FnMut(usize) -> Result<BigFloatMatrix>,
) -> Result<HighPrecisionDet> {
    let mut bits = start_bits.max(64);
    loop {
        match det_highprec(&build(bits)?) {
            Err(Error::Precision(msg)) if bits < MAX_PRECISION_BITS => {
                let _ = msg;
                bits = (bits * 2).min(MAX_PRECISION_BITS);
            }
            other => return other,
        }
    }
}

/// Compares an exact rational with a big float without rounding ambiguity.
pub fn rational_ge(q: &BigRational, x: &BigFloat, p: usize) -> bool {
    if q.is_negative() {
        return x.is_negative() && from_rational_directed(q, p, RoundingMode::Down) >= *x;
    }
    if q.is_zero() {
        return !x.is_positive();
    }
    from_rational_directed(q, p, RoundingMode::Down) >= *x
}
