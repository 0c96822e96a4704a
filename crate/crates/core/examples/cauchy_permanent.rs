//! Exact Cauchy determinants and permanents, and a high-precision determinant
//! of an ill-conditioned matrix with a rigorous error bound.

use laplace_entropy::linalg::bigfloat::{from_rational, to_scientific};
use laplace_entropy::linalg::{det_exact, det_highprec, permanent_exact, BigFloatMatrix, RationalMatrix};
use num_rational::BigRational;
use laplace_entropy::smallball::{cauchy_det_product, cauchy_matrix, delta_sequence};

fn main() -> laplace_entropy::Result<()> {
    let d = delta_sequence(2)?;
    println!("delta sequence (m = 2): {:?}", d.values);
    let c = cauchy_matrix(&d.values);
    let closed = cauchy_det_product(&d.values)?;
    let elim = det_exact(&c)?;
    println!("closed form == elimination: {}", closed == elim);
    println!("det = {closed}");
    println!("per = {}", permanent_exact(&c)?);

    let n = 12;
    let hilbert = RationalMatrix::from_fn(n, |i, j| BigRational::new(1.into(), ((i + j + 1) as i64).into()));
    let exact = det_exact(&hilbert)?;
    println!("Hilbert {n} exact det = {}", to_scientific(&from_rational(&exact, 256), 20));
    for bits in [128, 256, 512] {
        let m = BigFloatMatrix::from_rational(&hilbert, bits)?;
        match det_highprec(&m) {
            Ok(det) => println!(
                "  {bits:>3} bits: {} +/- {}, contains exact: {}",
                to_scientific(&det.value, 20),
                to_scientific(&det.error_bound, 3),
                det.contains(&from_rational(&exact, bits + 64))
            ),
            Err(e) => println!("  {bits:>3} bits: {e}"),
        }
    }
    Ok(())
}
