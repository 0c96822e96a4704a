//! Bounded completely monotone functions represented through their mixing
//! measures, `f(t) = sum_i w_i exp(-t x_i)`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{neumaier_sum, GaussLegendre, NeumaierSum};

/// Slack allowed on total masses (`<= 1` membership and `= 1` normalisation).
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Relative tolerance for the alternating-difference check.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;

/// Largest derivative order accepted by [`complete_monotonicity_check`].
pub const MAX_DIFFERENCE_ORDER: usize = 10;

/// Number of dyadic panels `[2^-k-1, 2^-k)` used to resolve boundary layers at
/// the origin when integrating against Lebesgue measure on `[0, 1]`.
const DYADIC_PANELS: i32 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// A finite atomic measure on `[0, inf)` with total mass at most one.
///
/// Atoms are kept sorted by strictly increasing location; atoms supplied at the
/// same location are merged and zero-weight atoms are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureDocument", into = "MeasureDocument")]
pub struct MixingMeasure {
    atoms: Vec<Atom>,
    total_mass: f64,
}

/// On-disk form: `{"atoms": [[location, weight], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureDocument {
    pub atoms: Vec<(f64, f64)>,
}

impl TryFrom<MeasureDocument> for MixingMeasure {
    type Error = Error;

    fn try_from(doc: MeasureDocument) -> Result<Self> {
        MixingMeasure::new(doc.atoms)
    }
}

impl From<MixingMeasure> for MeasureDocument {
    fn from(m: MixingMeasure) -> Self {
        MeasureDocument {
            atoms: m.atoms.iter().map(|a| (a.location, a.weight)).collect(),
        }
    }
}

impl MixingMeasure {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut raw: Vec<Atom> = Vec::new();
        for (location, weight) in atoms {
            if !location.is_finite() || location < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "atom location {location} is not a finite nonnegative number"
                )));
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "atom weight {weight} is not a finite nonnegative number"
                )));
            }
            if weight > 0.0 {
                raw.push(Atom { location, weight });
            }
        }
        raw.sort_by(|a, b| a.location.total_cmp(&b.location));
        let mut atoms: Vec<Atom> = Vec::with_capacity(raw.len());
        for atom in raw {
            match atoms.last_mut() {
                Some(last) if last.location == atom.location => last.weight += atom.weight,
                _ => atoms.push(atom),
            }
        }
        let total_mass = neumaier_sum(atoms.iter().map(|a| a.weight));
        if total_mass > 1.0 + MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "total mass {total_mass} exceeds 1"
            )));
        }
        Ok(Self { atoms, total_mass })
    }

    /// The Dirac measure at `location` with the given weight.
    pub fn dirac(location: f64, weight: f64) -> Result<Self> {
        Self::new([(location, weight)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - 1.0).abs() <= MASS_TOLERANCE
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    /// `f(t)` without the domain check; `t` must be nonnegative.
    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        let mut acc = NeumaierSum::default();
        for a in &self.atoms {
            acc.add(a.weight * (-t * a.location).exp());
        }
        acc.value()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return invalid(format!("evaluation point {t} must be nonnegative"));
    }
    Ok(())
}

/// The Laplace transform `f(t) = sum_i w_i exp(-t x_i)`.
pub fn laplace_eval(mu: &MixingMeasure, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(mu.eval_unchecked(t))
}

/// The scale-mixture density `p(t) = -f'(t) = sum_i w_i x_i exp(-t x_i)`.
pub fn mixture_density_eval(mu: &MixingMeasure, t: f64) -> Result<f64> {
    check_time(t)?;
    if !mu.is_probability() {
        return Err(Error::InvalidMeasure(format!(
            "density requires a probability mixing measure, total mass is {}",
            mu.total_mass
        )));
    }
    let mut acc = NeumaierSum::default();
    for a in &mu.atoms {
        acc.add(a.weight * a.location * (-t * a.location).exp());
    }
    Ok(acc.value())
}

/// One alternating difference that fell below the tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub t: f64,
    pub order: usize,
    pub signed_difference: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub passed: bool,
    pub order: usize,
    pub step: f64,
    /// For each order `k = 1..=order`, the minimum over the grid of
    /// `(-1)^k nabla_h^k f(t)`.
    pub min_signed_difference: Vec<f64>,
    pub violations: Vec<MonotonicityViolation>,
}

/// Checks `(-1)^k nabla_h^k f(t) >= -tol` for `k <= order` at each grid point,
/// using backward differences on `t, t - h, ..., t - k h`.
pub fn complete_monotonicity_check(
    mu: &MixingMeasure,
    order: usize,
    grid: &[f64],
    step: f64,
) -> Result<MonotonicityReport> {
    if order == 0 || order > MAX_DIFFERENCE_ORDER {
        return invalid(format!(
            "difference order must be in 1..={MAX_DIFFERENCE_ORDER}, got {order}"
        ));
    }
    if !(step > 0.0 && step.is_finite()) {
        return invalid(format!("difference step must be positive, got {step}"));
    }
    let reach = order as f64 * step;
    if let Some(&t) = grid.iter().find(|&&t| !(t > reach)) {
        return invalid(format!(
            "grid point {t} is too close to 0 for order {order} with step {step}"
        ));
    }

    let mut binom = vec![vec![1.0f64]];
    for k in 1..=order {
        let prev = &binom[k - 1];
        let mut row = vec![1.0; k + 1];
        for j in 1..k {
            row[j] = prev[j - 1] + prev[j];
        }
        binom.push(row);
    }

    let mut min_signed = vec![f64::INFINITY; order];
    let mut violations = Vec::new();
    for &t in grid {
        let values: Vec<f64> = (0..=order)
            .map(|j| mu.eval_unchecked(t - j as f64 * step))
            .collect();
        for k in 1..=order {
            // (-1)^k nabla^k f(t) = sum_j (-1)^(k+j) C(k,j) f(t - j h)
            let mut acc = NeumaierSum::default();
            let mut scale = 0.0;
            for j in 0..=k {
                let term = binom[k][j] * values[j];
                scale += term.abs();
                acc.add(if (k + j) % 2 == 0 { term } else { -term });
            }
            let signed = acc.value();
            let tolerance = MONOTONICITY_TOLERANCE * scale;
            min_signed[k - 1] = min_signed[k - 1].min(signed);
            if signed < -tolerance {
                violations.push(MonotonicityViolation {
                    t,
                    order: k,
                    signed_difference: signed,
                    tolerance,
                });
            }
        }
    }
    Ok(MonotonicityReport {
        passed: violations.is_empty(),
        order,
        step,
        min_signed_difference: min_signed,
        violations,
    })
}

/// A real function on `[0, inf)` that can be integrated against a base measure.
pub trait Evaluate {
    fn value(&self, t: f64) -> f64;

    /// Points where the function may fail to be smooth; quadrature panels are
    /// aligned with them.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl Evaluate for MixingMeasure {
    fn value(&self, t: f64) -> f64 {
        self.eval_unchecked(t)
    }
}

/// The probability measure `nu` defining the `L^p(nu)` norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum BaseMeasure {
    LebesgueUnitInterval,
    Atomic(Vec<(f64, f64)>),
}

impl BaseMeasure {
    /// A normalized atomic base measure; points must be nonnegative and the
    /// masses must sum to one.
    pub fn atomic(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for (x, w) in points {
            if !x.is_finite() || x < 0.0 || !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "base measure atom ({x}, {w}) must have finite nonnegative entries"
                )));
            }
            if w > 0.0 {
                pts.push((x, w));
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mass = neumaier_sum(pts.iter().map(|p| p.1));
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "base measure must have total mass 1, got {mass}"
            )));
        }
        Ok(BaseMeasure::Atomic(pts))
    }

    /// Loads an atomic base measure from the mixing-measure JSON layout.
    pub fn load_atomic(path: impl AsRef<Path>) -> Result<Self> {
        let doc: MeasureDocument = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::atomic(doc.atoms)
    }

    /// `nu([a, b))`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        match self {
            BaseMeasure::LebesgueUnitInterval => (b.min(1.0) - a.max(0.0)).max(0.0),
            BaseMeasure::Atomic(pts) => {
                neumaier_sum(pts.iter().filter(|p| p.0 >= a && p.0 < b).map(|p| p.1))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpParams {
    /// Exponent in `[1, inf]`; `f64::INFINITY` selects the supremum norm.
    pub p: f64,
    pub quadrature_points_per_block: usize,
}

impl Default for LpParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            quadrature_points_per_block: 16,
        }
    }
}

impl LpParams {
    pub fn new(p: f64, quadrature_points_per_block: usize) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return invalid(format!("L^p exponent must be >= 1, got {p}"));
        }
        if quadrature_points_per_block == 0 {
            return invalid("quadrature needs at least one node per block");
        }
        Ok(Self {
            p,
            quadrature_points_per_block,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LpDistance {
    pub value: f64,
    /// Shift between the composite rule and its once-refined version; zero for
    /// atomic base measures where the sum is exact.
    pub error_bound: f64,
    /// Set when `p = inf` on a continuous base measure: the value is a maximum
    /// over quadrature nodes rather than a true supremum.
    pub grid_supremum: bool,
}

/// `||f - g||_{L^p(nu)}`.
pub fn lp_distance(
    f: &dyn Evaluate,
    g: &dyn Evaluate,
    nu: &BaseMeasure,
    params: &LpParams,
) -> Result<LpDistance> {
    let params = LpParams::new(params.p, params.quadrature_points_per_block)?;
    let p = params.p;
    let diff = |t: f64| (f.value(t) - g.value(t)).abs();
    match nu {
        BaseMeasure::Atomic(pts) => {
            let value = if p.is_infinite() {
                pts.iter().map(|&(x, _)| diff(x)).fold(0.0, f64::max)
            } else {
                neumaier_sum(pts.iter().map(|&(x, w)| w * diff(x).powf(p))).powf(1.0 / p)
            };
            Ok(LpDistance {
                value,
                error_bound: 0.0,
                grid_supremum: false,
            })
        }
        BaseMeasure::LebesgueUnitInterval => {
            let panels = unit_interval_panels(&[f.breakpoints(), g.breakpoints()]);
            let rule = GaussLegendre::new(params.quadrature_points_per_block);
            if p.is_infinite() {
                let mut sup = 0.0f64;
                for w in panels.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    sup = sup.max(diff(a));
                    let half = 0.5 * (b - a);
                    let mid = 0.5 * (a + b);
                    for x in &rule.nodes {
                        sup = sup.max(diff(mid + half * x));
                    }
                }
                sup = sup.max(diff(1.0));
                return Ok(LpDistance {
                    value: sup,
                    error_bound: 0.0,
                    grid_supremum: true,
                });
            }
            let mut coarse = NeumaierSum::default();
            let mut fine = NeumaierSum::default();
            for w in panels.windows(2) {
                let (a, b) = (w[0], w[1]);
                let m = 0.5 * (a + b);
                coarse.add(rule.integrate(a, b, |t| diff(t).powf(p)));
                fine.add(rule.integrate(a, m, |t| diff(t).powf(p)));
                fine.add(rule.integrate(m, b, |t| diff(t).powf(p)));
            }
            let fine_value = fine.value().max(0.0).powf(1.0 / p);
            let coarse_value = coarse.value().max(0.0).powf(1.0 / p);
            Ok(LpDistance {
                value: fine_value,
                error_bound: (fine_value - coarse_value).abs(),
                grid_supremum: false,
            })
        }
    }
}

/// Panel boundaries on `[0, 1]`: a dyadic mesh graded towards the origin
/// merged with the functions' own breakpoints.
fn unit_interval_panels(extra: &[Vec<f64>]) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=DYADIC_PANELS).map(|k| 2f64.powi(-k)).collect();
    pts.push(0.0);
    for list in extra {
        pts.extend(list.iter().copied().filter(|&x| x > 0.0 && x < 1.0));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// A reproducible random mixing measure: between 1 and `max_atoms` atoms with
/// log-uniform locations in `[1e-3, 1e3]` and exponential-normalized weights
/// scaled to `mass`.
pub fn random_measure(seed: u64, max_atoms: usize, mass: f64) -> Result<MixingMeasure> {
    if max_atoms == 0 {
        return invalid("random_measure needs max_atoms >= 1");
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return invalid(format!("mass must lie in (0, 1], got {mass}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=max_atoms);
    let mut atoms = Vec::with_capacity(count);
    for _ in 0..count {
        let location = 10f64.powf(rng.gen_range(-3.0..=3.0));
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        atoms.push((location, -u.ln()));
    }
    let total = neumaier_sum(atoms.iter().map(|a| a.1));
    for a in &mut atoms {
        a.1 = a.1 / total * mass;
    }
    MixingMeasure::new(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(loc: f64) -> MixingMeasure {
        MixingMeasure::dirac(loc, 1.0).unwrap()
    }

    #[test]
    fn laplace_eval_examples() {
        assert_eq!(laplace_eval(&unit(0.0), 5.0).unwrap(), 1.0);
        let half = laplace_eval(&unit(1.0), 2f64.ln()).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
        let two = MixingMeasure::new([(1.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(laplace_eval(&two, 0.0).unwrap(), 1.0);
        assert!(laplace_eval(&two, -1.0).is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(mixture_density_eval(&unit(1.0), 0.0).unwrap(), 1.0);
        assert_eq!(mixture_density_eval(&unit(2.0), 0.0).unwrap(), 2.0);
        let v = mixture_density_eval(&unit(1.0), 2f64.ln()).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let sub = MixingMeasure::dirac(1.0, 0.5).unwrap();
        assert!(mixture_density_eval(&sub, 0.0).is_err());
    }

    #[test]
    fn canonical_form_merges_and_sorts() {
        let m = MixingMeasure::new([(2.0, 0.25), (1.0, 0.25), (2.0, 0.25), (3.0, 0.0)]).unwrap();
        assert_eq!(
            m.atoms(),
            &[
                Atom { location: 1.0, weight: 0.25 },
                Atom { location: 2.0, weight: 0.5 }
            ]
        );
        assert_eq!(m.total_mass(), 0.75);
        assert!(MixingMeasure::new([(1.0, 0.7), (2.0, 0.7)]).is_err());
        assert!(MixingMeasure::new([(-1.0, 0.1)]).is_err());
        assert!(MixingMeasure::new([(f64::NAN, 0.1)]).is_err());
    }

    #[test]
    fn json_layout() {
        let m = MixingMeasure::from_json_str(r#"{"atoms": [[2.0, 0.5], [0.5, 0.25]]}"#).unwrap();
        assert_eq!(m.atoms()[0].location, 0.5);
        assert_eq!(m.to_json_string().unwrap(), r#"{"atoms":[[0.5,0.25],[2.0,0.5]]}"#);
        assert!(MixingMeasure::from_json_str(r#"{"atoms": [[1.0, 2.0]]}"#).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        let r = complete_monotonicity_check(&unit(1.0), 3, &[1.0, 2.0], 0.01).unwrap();
        assert!(r.passed);
        let r = complete_monotonicity_check(&unit(0.0), 5, &[1.0], 0.1).unwrap();
        assert!(r.passed);
        assert!(r.min_signed_difference.iter().all(|&d| d == 0.0));
        assert!(complete_monotonicity_check(&unit(1.0), 4, &[0.03], 0.01).is_err());
        assert!(complete_monotonicity_check(&unit(1.0), 11, &[5.0], 0.01).is_err());
    }

    #[test]
    fn lp_distance_examples() {
        let nu = BaseMeasure::LebesgueUnitInterval;
        let params = LpParams::default();
        let f = random_measure(3, 4, 1.0).unwrap();
        assert_eq!(lp_distance(&f, &f, &nu, &params).unwrap().value, 0.0);

        let one = unit(0.0);
        let half = MixingMeasure::dirac(0.0, 0.5).unwrap();
        let d = lp_distance(&one, &half, &nu, &params).unwrap();
        assert!((d.value - 0.5).abs() < 1e-14);

        let zero = MixingMeasure::new([(0.0, 0.0)]).unwrap();
        let d = lp_distance(&unit(1.0), &zero, &nu, &params).unwrap();
        let want = ((1.0 - (-2.0f64).exp()) / 2.0).sqrt();
        assert!((d.value - want).abs() < 1e-14, "{} vs {want}", d.value);
        assert!((want - 0.657520).abs() < 1e-6);
        assert!(d.error_bound < 1e-12);
    }

    #[test]
    fn lp_distance_atomic_and_sup() {
        let nu = BaseMeasure::atomic([(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let zero = MixingMeasure::new([(0.0, 0.0)]).unwrap();
        let d = lp_distance(&unit(1.0), &zero, &nu, &LpParams::new(1.0, 4).unwrap()).unwrap();
        assert!((d.value - 0.5 * (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        let d = lp_distance(
            &unit(1.0),
            &zero,
            &BaseMeasure::LebesgueUnitInterval,
            &LpParams::new(f64::INFINITY, 8).unwrap(),
        )
        .unwrap();
        assert!(d.grid_supremum);
        assert_eq!(d.value, 1.0);
        assert!(BaseMeasure::atomic([(0.0, 0.4)]).is_err());
        assert!(LpParams::new(0.5, 4).is_err());
    }

    #[test]
    fn lp_distance_resolves_steep_boundary_layer() {
        // exp(-1000 t) has L^1 norm (1 - e^-1000)/1000 on [0, 1].
        let zero = MixingMeasure::new([(0.0, 0.0)]).unwrap();
        let d = lp_distance(
            &unit(1000.0),
            &zero,
            &BaseMeasure::LebesgueUnitInterval,
            &LpParams::new(1.0, 16).unwrap(),
        )
        .unwrap();
        assert!((d.value - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn random_measure_contract() {
        let a = random_measure(1, 5, 1.0).unwrap();
        assert!(a.is_probability());
        assert!(a.atoms().len() <= 5);
        assert_eq!(a, random_measure(1, 5, 1.0).unwrap());
        let b = random_measure(2, 1, 0.5).unwrap();
        assert_eq!(b.atoms().len(), 1);
        assert!((b.atoms()[0].weight - 0.5).abs() < 1e-15);
        for a in a.atoms() {
            assert!((1e-3..=1e3).contains(&a.location));
        }
    }

    #[test]
    fn random_measures_are_completely_monotone() {
        for seed in 0..120 {
            let mu = random_measure(seed, 6, 1.0).unwrap();
            let grid = [0.05, 0.1, 0.37, 1.0, 2.5, 10.0];
            let r = complete_monotonicity_check(&mu, 4, &grid, 0.01).unwrap();
            assert!(r.passed, "seed {seed}: {:?}", r.violations);
        }
    }

    proptest! {
        #[test]
        fn laplace_eval_is_bounded_and_nonincreasing(seed in 0u64..10_000, mut ts in prop::collection::vec(0.0f64..50.0, 2..20)) {
            let mu = random_measure(seed, 6, 1.0).unwrap();
            ts.sort_by(f64::total_cmp);
            let vals: Vec<f64> = ts.iter().map(|&t| laplace_eval(&mu, t).unwrap()).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15);
            }
            for v in &vals {
                prop_assert!(*v >= 0.0 && *v <= 1.0 + MASS_TOLERANCE);
            }
            prop_assert_eq!(laplace_eval(&mu, 0.0).unwrap(), mu.total_mass());
        }

        #[test]
        fn lp_distance_is_a_metric(s1 in 0u64..500, s2 in 0u64..500, s3 in 0u64..500, p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
            let nu = BaseMeasure::LebesgueUnitInterval;
            let params = LpParams::new(p, 12).unwrap();
            let f = random_measure(s1, 4, 1.0).unwrap();
            let g = random_measure(s2, 4, 0.7).unwrap();
            let h = random_measure(s3, 4, 0.3).unwrap();
            let fg = lp_distance(&f, &g, &nu, &params).unwrap();
            let gf = lp_distance(&g, &f, &nu, &params).unwrap();
            let gh = lp_distance(&g, &h, &nu, &params).unwrap();
            let fh = lp_distance(&f, &h, &nu, &params).unwrap();
            let tol = 1e-12 + fg.error_bound + gh.error_bound + fh.error_bound;
            prop_assert!((fg.value - gf.value).abs() <= tol);
            prop_assert!(fh.value <= fg.value + gh.value + tol);
        }
    }
}
