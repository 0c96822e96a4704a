use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{invalid, Result};

/// Largest dimension accepted by [`det_exact`].
pub const MAX_DET_DIM: usize = 64;
/// Largest dimension accepted by [`permanent_exact`] (2^n subsets).
pub const MAX_PERMANENT_DIM: usize = 14;

/// A square matrix of exact rationals, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    n: usize,
    entries: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("matrix must be square");
        }
        Ok(Self {
            n,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> BigRational) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Self { n, entries }
    }

    /// Builds a matrix from `(numerator, denominator)` pairs.
    pub fn from_ratios(rows: &[&[(i64, i64)]]) -> Result<Self> {
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let mut r = Vec::with_capacity(row.len());
            for &(num, den) in row.iter() {
                if den == 0 {
                    return invalid("zero denominator");
                }
                r.push(BigRational::new(num.into(), den.into()));
            }
            out.push(r);
        }
        Self::from_rows(out)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| {
            if i == j {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[BigRational] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.entries
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, &BigRational) -> BigRational) -> Self {
        Self::from_fn(self.n, |i, j| f(i, j, self.get(i, j)))
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.n {
            self.entries.swap(a * self.n + j, b * self.n + j);
        }
    }

    pub fn permute(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(self.n, |i, j| self.get(rows[i], cols[j]).clone())
    }

    /// Rows rescaled to integers: returns the integer matrix and the product
    /// of the row scale factors (`A = diag(1/d_i) * Z`).
    fn integer_rows(&self) -> (Vec<Vec<BigInt>>, BigInt) {
        let mut total = BigInt::one();
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let lcm = row
                .iter()
                .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
            rows.push(
                row.iter()
                    .map(|q| q.numer() * (&lcm / q.denom()))
                    .collect(),
            );
            total *= lcm;
        }
        (rows, total)
    }
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|q| q.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Exact determinant by fraction-free (Bareiss) elimination on the
/// row-scaled integer matrix.
pub fn det_exact(m: &RationalMatrix) -> Result<BigRational> {
    let n = m.dim();
    if n > MAX_DET_DIM {
        return invalid(format!("det_exact supports n <= {MAX_DET_DIM}, got {n}"));
    }
    if n == 0 {
        return Ok(BigRational::one());
    }
    let (mut a, scale) = m.integer_rows();
    let mut negate = false;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(k, i);
                    negate = !negate;
                }
                None => return Ok(BigRational::zero()),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    let mut det = a[n - 1][n - 1].clone();
    if negate {
        det = -det;
    }
    Ok(BigRational::new(det, scale))
}

/// Exact permanent by inclusion-exclusion over column subsets, visiting the
/// subsets in Gray-code order so each step updates the row sums by one column.
pub fn permanent_exact(m: &RationalMatrix) -> Result<BigRational> {
    let n = m.dim();
    if n > MAX_PERMANENT_DIM {
        return invalid(format!(
            "permanent_exact supports n <= {MAX_PERMANENT_DIM}, got {n}"
        ));
    }
    if n == 0 {
        return Ok(BigRational::one());
    }
    let (a, scale) = m.integer_rows();
    let mut row_sums = vec![BigInt::zero(); n];
    let mut in_set = vec![false; n];
    let mut total = BigInt::zero();
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let col = k.trailing_zeros() as usize;
        gray ^= 1 << col;
        in_set[col] = !in_set[col];
        for (i, s) in row_sums.iter_mut().enumerate() {
            if in_set[col] {
                *s += &a[i][col];
            } else {
                *s -= &a[i][col];
            }
        }
        let prod = row_sums.iter().fold(BigInt::one(), |acc, s| acc * s);
        // (-1)^(n - |S|)
        if (n as u32 - gray.count_ones()).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    Ok(BigRational::new(total, scale))
}

/// Reference determinant by cofactor expansion along the first row.
pub fn det_cofactor(m: &RationalMatrix) -> BigRational {
    fn rec(m: &RationalMatrix, rows: &[usize], cols: &[usize]) -> BigRational {
        if rows.is_empty() {
            return BigRational::one();
        }
        let r = rows[0];
        let mut acc = BigRational::zero();
        for (k, &c) in cols.iter().enumerate() {
            let entry = m.get(r, c);
            if entry.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let minor = rec(m, &rows[1..], &rest);
            if k % 2 == 0 {
                acc += entry * minor;
            } else {
                acc -= entry * minor;
            }
        }
        acc
    }
    let idx: Vec<usize> = (0..m.dim()).collect();
    rec(m, &idx, &idx)
}

/// Reference permanent by summing over all permutations.
pub fn permanent_naive(m: &RationalMatrix) -> BigRational {
    fn rec(m: &RationalMatrix, row: usize, used: &mut [bool]) -> BigRational {
        if row == m.dim() {
            return BigRational::one();
        }
        let mut acc = BigRational::zero();
        for c in 0..m.dim() {
            if !used[c] && !m.get(row, c).is_zero() {
                used[c] = true;
                acc += m.get(row, c) * rec(m, row + 1, used);
                used[c] = false;
            }
        }
        acc
    }
    rec(m, 0, &mut vec![false; m.dim()])
}

/// Renders a rational as `num/den` (or just `num` for integers).
pub fn exact_string(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Whether every entry is strictly positive.
pub fn all_positive(m: &RationalMatrix) -> bool {
    m.entries().iter().all(|q| q.is_positive())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> RationalMatrix {
        RationalMatrix::from_fn(n, |_, _| q(rng.gen_range(-9..=9), rng.gen_range(1..=7)))
    }

    #[test]
    fn det_examples() {
        assert_eq!(det_exact(&RationalMatrix::identity(3)).unwrap(), q(1, 1));
        let m = RationalMatrix::from_ratios(&[&[(1, 2), (1, 3)], &[(1, 3), (1, 4)]]).unwrap();
        assert_eq!(det_exact(&m).unwrap(), q(1, 72));
        let m = RationalMatrix::from_ratios(&[
            &[(1, 2), (3, 1), (5, 7)],
            &[(2, 1), (0, 1), (1, 9)],
            &[(1, 2), (3, 1), (5, 7)],
        ])
        .unwrap();
        assert_eq!(det_exact(&m).unwrap(), q(0, 1));
        assert_eq!(det_exact(&RationalMatrix::identity(0)).unwrap(), q(1, 1));
    }

    #[test]
    fn det_needs_pivoting() {
        let m = RationalMatrix::from_ratios(&[&[(0, 1), (1, 1)], &[(1, 1), (0, 1)]]).unwrap();
        assert_eq!(det_exact(&m).unwrap(), q(-1, 1));
    }

    #[test]
    fn permanent_examples() {
        let ones = RationalMatrix::from_ratios(&[&[(1, 1), (1, 1)], &[(1, 1), (1, 1)]]).unwrap();
        assert_eq!(permanent_exact(&ones).unwrap(), q(2, 1));
        for n in 0..6 {
            assert_eq!(permanent_exact(&RationalMatrix::identity(n)).unwrap(), q(1, 1));
        }
        let m = RationalMatrix::from_ratios(&[&[(1, 2), (1, 3)], &[(1, 3), (1, 4)]]).unwrap();
        assert_eq!(permanent_exact(&m).unwrap(), q(17, 72));
        assert!(permanent_exact(&RationalMatrix::identity(15)).is_err());
    }

    #[test]
    fn permanent_of_all_ones_is_factorial() {
        let m = RationalMatrix::from_fn(7, |_, _| q(1, 1));
        assert_eq!(permanent_exact(&m).unwrap(), q(5040, 1));
    }

    #[test]
    fn cross_check_against_definitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let n = rng.gen_range(1..=6);
            let m = random_matrix(&mut rng, n);
            assert_eq!(permanent_exact(&m).unwrap(), permanent_naive(&m));
            if n <= 4 {
                assert_eq!(det_exact(&m).unwrap(), det_cofactor(&m));
            }
        }
    }

    #[test]
    fn det_block_diagonal_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (p, r) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let a = random_matrix(&mut rng, p);
            let b = random_matrix(&mut rng, r);
            let block = RationalMatrix::from_fn(p + r, |i, j| match (i < p, j < p) {
                (true, true) => a.get(i, j).clone(),
                (false, false) => b.get(i - p, j - p).clone(),
                _ => BigRational::zero(),
            });
            assert_eq!(
                det_exact(&block).unwrap(),
                det_exact(&a).unwrap() * det_exact(&b).unwrap()
            );
        }
    }

    proptest! {
        #[test]
        fn row_swap_flips_determinant_sign(seed in 0u64..1000, n in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, n);
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            prop_assume!(a != b);
            let mut swapped = m.clone();
            swapped.swap_rows(a, b);
            prop_assert_eq!(det_exact(&swapped).unwrap(), -det_exact(&m).unwrap());
        }

        #[test]
        fn permanent_is_permutation_invariant(seed in 0u64..1000, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, n);
            let mut rows: Vec<usize> = (0..n).collect();
            let mut cols: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                rows.swap(i, rng.gen_range(0..=i));
                cols.swap(i, rng.gen_range(0..=i));
            }
            prop_assert_eq!(permanent_exact(&m.permute(&rows, &cols)).unwrap(), permanent_exact(&m).unwrap());
        }
    }
}
