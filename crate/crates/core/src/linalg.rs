//! Small dense helpers over `nalgebra` used by the spectral code.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type CMatrix = DMatrix<Complex64>;
pub(crate) type CVector = DVector<Complex64>;

pub(crate) fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// All eigenvalues of a complex square matrix.
pub(crate) fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![m[(0, 0)]]),
        2 => {
            // closed form keeps full accuracy for the common 2x2 case
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5).powu(2) + b * c;
            let s = disc.sqrt();
            let l1 = half_tr + s;
            let l2 = half_tr - s;
            // recompute the smaller root from the determinant to avoid cancellation
            let det = a * d - b * c;
            let (big, small) = if l1.norm() >= l2.norm() { (l1, l2) } else { (l2, l1) };
            let small = if big.norm() > 0.0 { det / big } else { small };
            Ok(vec![big, small])
        }
        _ => {
            let schur = Schur::try_new(m.clone(), 1e-15, 100_000)
                .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
            let (_, t) = schur.unpack();
            Ok((0..n).map(|k| t[(k, k)]).collect())
        }
    }
}

/// Eigenvalues sorted by decreasing modulus.
pub(crate) fn eigenvalues_by_modulus(m: &CMatrix) -> Result<Vec<Complex64>> {
    let mut ev = eigenvalues(m)?;
    ev.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(ev)
}

pub(crate) fn spectral_radius(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Unit vector spanning (numerically) the kernel of `m`: the right singular
/// vector of the smallest singular value.
pub(crate) fn null_vector(m: &CMatrix) -> Result<CVector> {
    let n = m.nrows();
    if n == 1 {
        return Ok(CVector::from_element(1, Complex64::new(1.0, 0.0)));
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not return right singular vectors".into()))?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("nonempty");
    Ok(v_t.row(k).transpose().map(|z| z.conj()))
}

/// Right and left eigenvectors of a simple eigenvalue `lambda`, polished by
/// two steps of inverse iteration.
pub(crate) fn eigenvector_pair(m: &CMatrix, lambda: Complex64) -> Result<(CVector, CVector)> {
    let n = m.nrows();
    let id = CMatrix::identity(n, n);
    let shifted = m - id * lambda;
    let right = polish(&shifted, null_vector(&shifted)?);
    let shifted_t = shifted.transpose();
    let left = polish(&shifted_t, null_vector(&shifted_t)?);
    Ok((right, left))
}

fn polish(shifted: &CMatrix, mut v: CVector) -> CVector {
    let n = shifted.nrows();
    if n == 1 {
        return v;
    }
    let scale = shifted.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let nudged = shifted + CMatrix::identity(n, n) * Complex64::new(scale * 1e-13, 0.0);
    let lu = nudged.lu();
    for _ in 0..2 {
        match lu.solve(&v) {
            Some(w) if w.iter().all(|z| z.is_finite()) => {
                let nrm = w.norm();
                if nrm > 0.0 {
                    v = w / Complex64::new(nrm, 0.0);
                }
            }
            _ => break,
        }
    }
    v
}
