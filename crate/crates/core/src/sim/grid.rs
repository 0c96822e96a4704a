use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::smallball::kernel_y;

/// Diagonal jitters tried in order until the Cholesky factorization succeeds.
pub const JITTER_SCHEDULE: [f64; 10] = [0.0, 1e-16, 1e-15, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

/// Evaluation points for the discretized supremum: `0` followed by `count`
/// log-spaced points on `[eps_min^2, t_max]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimGrid {
    pub points: Vec<f64>,
    pub t_max: f64,
    pub count: usize,
}

/// `t_max = 2 / eps_min^2`, so that `Var Y(t_max) <= eps_min^2 / 4`.
pub fn build_grid(epsilon_min: f64, count: usize) -> Result<SimGrid> {
    if !(epsilon_min > 0.0 && epsilon_min < 1.0) {
        return invalid(format!("epsilon_min must lie in (0, 1), got {epsilon_min}"));
    }
    if count < 16 {
        return invalid(format!("grid needs at least 16 points, got {count}"));
    }
    let lo = epsilon_min * epsilon_min;
    // Nudged up a few ulps so rounding in eps^2 cannot push Var Y(t_max) over.
    let t_max = 2.0 / lo * (1.0 + 4.0 * f64::EPSILON);
    let (a, b) = (lo.ln(), t_max.ln());
    let mut points = Vec::with_capacity(count + 1);
    points.push(0.0);
    for k in 0..count {
        points.push((a + (b - a) * k as f64 / (count - 1) as f64).exp());
    }
    points[count] = t_max;
    Ok(SimGrid {
        points,
        t_max,
        count,
    })
}

impl SimGrid {
    /// The grid with a geometric midpoint inserted between consecutive
    /// positive points; every original point is kept.
    pub fn refine(&self) -> SimGrid {
        let mut points = vec![0.0];
        let positive = &self.points[1..];
        for w in positive.windows(2) {
            points.push(w[0]);
            points.push((w[0] * w[1]).sqrt());
        }
        points.push(self.t_max);
        SimGrid {
            count: points.len() - 1,
            points,
            t_max: self.t_max,
        }
    }

    /// 64-bit FNV-1a digest of the point bit patterns.
    pub fn hash(&self) -> String {
        points_hash(&self.points)
    }
}

pub(crate) fn points_hash(points: &[f64]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for p in points {
        for byte in p.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    format!("{h:016x}")
}

/// Lower-triangular `L` (packed by rows) with `L L^T = K + jitter I`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceFactor {
    n: usize,
    packed: Vec<f64>,
    pub jitter: f64,
}

impl CovarianceFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row `i` of `L`, entries `0..=i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.row(i)[j]
        }
    }
}

fn cholesky(gram: &[f64], n: usize, jitter: f64) -> std::result::Result<Vec<f64>, (usize, f64)> {
    let mut packed = vec![0.0; n * (n + 1) / 2];
    let idx = |i: usize, j: usize| i * (i + 1) / 2 + j;
    for i in 0..n {
        for j in 0..=i {
            let mut s = gram[i * n + j];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= packed[idx(i, k)] * packed[idx(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err((i, s));
                }
                packed[idx(i, i)] = s.sqrt();
            } else {
                packed[idx(i, j)] = s / packed[idx(j, j)];
            }
        }
    }
    Ok(packed)
}

/// Cholesky factor of the kernel Gram matrix on `points`, escalating the
/// diagonal jitter through [`JITTER_SCHEDULE`].
pub fn factor_covariance(points: &[f64]) -> Result<CovarianceFactor> {
    let n = points.len();
    if n == 0 {
        return invalid("covariance needs at least one point");
    }
    if points.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return invalid("grid points must be finite and nonnegative");
    }
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = kernel_y(points[i], points[j]);
        }
    }
    let mut last = (0, 0.0);
    for &jitter in &JITTER_SCHEDULE {
        match cholesky(&gram, n, jitter) {
            Ok(packed) => return Ok(CovarianceFactor { n, packed, jitter }),
            Err(fail) => last = fail,
        }
    }
    Err(Error::Factorization(format!(
        "Cholesky failed at jitter {:e}: pivot {} (t = {}) reached {:e}; dimension {n}",
        JITTER_SCHEDULE[JITTER_SCHEDULE.len() - 1],
        last.0,
        points[last.0],
        last.1
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = build_grid(0.2, 128).unwrap();
        assert_eq!(g.points.len(), 129);
        assert_eq!(g.points[0], 0.0);
        assert!((g.t_max - 50.0).abs() < 1e-12);
        assert_eq!(*g.points.last().unwrap(), g.t_max);
        assert!(kernel_y(g.t_max, g.t_max) <= 0.01);
        assert!(g.points.windows(2).all(|w| w[0] < w[1]));
        let g2 = build_grid(0.2, 256).unwrap();
        assert_eq!(g2.points[1], g.points[1]);
        assert_eq!(g2.t_max, g.t_max);
        assert!(build_grid(0.2, 15).is_err());
    }

    #[test]
    fn refinement_keeps_points() {
        let g = build_grid(0.3, 32).unwrap();
        let r = g.refine();
        assert_eq!(r.points.len(), 2 * g.points.len() - 2);
        assert!(g.points.iter().all(|p| r.points.contains(p)));
        assert!(r.points.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(g.hash(), r.hash());
    }

    #[test]
    fn factor_examples() {
        let f = factor_covariance(&[0.0]).unwrap();
        assert_eq!(f.get(0, 0), 1.0);
        let f = factor_covariance(&[0.0, 1.0]).unwrap();
        assert_eq!(f.jitter, 0.0);
        assert!((f.get(1, 0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn reconstruction() {
        let g = build_grid(0.2, 64).unwrap();
        let f = factor_covariance(&g.points).unwrap();
        let n = f.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| f.get(i, k) * f.get(j, k)).sum();
                let mut want = kernel_y(g.points[i], g.points[j]);
                if i == j {
                    want += f.jitter;
                }
                worst = worst.max((s - want).abs());
            }
        }
        assert!(worst <= 1e-10 + f.jitter, "worst {worst}, jitter {}", f.jitter);
    }
}
