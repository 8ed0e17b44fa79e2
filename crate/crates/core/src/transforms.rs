//! Fourier and Laplace transforms of the jump matrix, convolution powers,
//! Perron data and the leading spectral decomposition of the Fourier
//! transform.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::process::{self, JumpMeasure, LatticeVector, ProcessSpec};
use crate::{fd, sections, walk};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Minimum modulus gap between the leading eigenvalue and the rest.
pub const GAP_THRESHOLD: f64 = 1e-8;

/// `mu_hat(theta)_{ij} = sum_x e^{i x.theta} mu_ij(x)`.
pub fn fourier(spec: &ProcessSpec, theta: &[f64]) -> ComplexMatrix {
    let p = spec.states();
    DMatrix::from_fn(p, p, |i, j| {
        spec.jump(i, j)
            .iter()
            .map(|(x, w)| Complex64::from_polar(w, x.dot(theta)))
            .sum()
    })
}

/// `L mu(c)_{ij} = sum_x e^{c.x} mu_ij(x)`.
pub fn laplace(spec: &ProcessSpec, c: &[f64]) -> DMatrix<f64> {
    let p = spec.states();
    DMatrix::from_fn(p, p, |i, j| spec.jump(i, j).iter().map(|(x, w)| w * x.dot(c).exp()).sum())
}

/// Laplace transform at the complex point `c + i theta`.
pub fn laplace_complex(spec: &ProcessSpec, c: &[f64], theta: &[f64]) -> ComplexMatrix {
    let p = spec.states();
    DMatrix::from_fn(p, p, |i, j| {
        spec.jump(i, j)
            .iter()
            .map(|(x, w)| Complex64::from_polar(w * x.dot(c).exp(), x.dot(theta)))
            .sum()
    })
}

/// Default cap on convolution powers: larger boxes in higher dimension.
pub fn default_power_cap(d: usize) -> usize {
    if d == 1 {
        10_000
    } else {
        2_000
    }
}

/// `n`-th convolution power of the jump matrix, row-major `p x p`.
pub fn convolution_power(spec: &ProcessSpec, n: usize) -> Result<Vec<JumpMeasure>> {
    convolution_power_capped(spec, n, default_power_cap(spec.dim()))
}

pub fn convolution_power_capped(spec: &ProcessSpec, n: usize, cap: usize) -> Result<Vec<JumpMeasure>> {
    if n > cap {
        return Err(Error::Resource(format!("convolution power {n} exceeds cap {cap}")));
    }
    let p = spec.states();
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        let mut prop = walk::Propagator::new(spec, i, 0.0);
        for _ in 0..n {
            prop.step();
        }
        for layer in prop.layers() {
            out.push(JumpMeasure::from_atoms(
                layer.cells().into_iter().map(|(x, w)| (LatticeVector::new(x), w)),
            )?);
        }
    }
    Ok(out)
}

/// Perron root with positive right/left eigenvectors of a nonnegative
/// irreducible matrix. `right` has max entry 1 and `left . right = 1`.
#[derive(Clone, Debug, Serialize)]
pub struct PerronTriple {
    pub rho: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

pub fn perron_triple(m: &DMatrix<f64>) -> Result<PerronTriple> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::Precondition("Perron data needs a nonempty square matrix".into()));
    }
    if m.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Precondition("matrix has negative or non-finite entries".into()));
    }
    let adj: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] > 0.0).collect()).collect();
    if !process::strongly_connected(&adj) {
        return Err(Error::Precondition("matrix is reducible".into()));
    }
    if n == 1 {
        return Ok(PerronTriple {
            rho: m[(0, 0)],
            right: vec![1.0],
            left: vec![1.0],
        });
    }
    let cm = linalg::to_complex(m);
    // The Perron root is the eigenvalue of largest real part.
    let rho = linalg::eigenvalues(&cm)?
        .into_iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let (r, l) = linalg::eigenvector_pair(&cm, Complex64::new(rho, 0.0))?;
    let mut right = positive_part(&r)?;
    let mut left = positive_part(&l)?;
    let mx = right.iter().cloned().fold(0.0, f64::max);
    right.iter_mut().for_each(|v| *v /= mx);
    let dot: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    left.iter_mut().for_each(|v| *v /= dot);

    let rv = DVector::from_vec(right.clone());
    let lv = DVector::from_vec(left.clone());
    // Rayleigh-type refinement of the root from both vectors
    let rho = (lv.transpose() * m * &rv)[(0, 0)] / lv.dot(&rv);
    let scale = rho.abs().max(f64::MIN_POSITIVE);
    let res_r = (m * &rv - &rv * rho).amax() / scale;
    let res_l = (lv.transpose() * m - lv.transpose() * rho).amax() / (scale * lv.amax());
    if res_r > 1e-10 || res_l > 1e-10 {
        return Err(Error::Numeric(format!(
            "Perron eigenvector residuals too large (right {res_r:e}, left {res_l:e})"
        )));
    }
    Ok(PerronTriple { rho, right, left })
}

fn positive_part(v: &linalg::CVector) -> Result<Vec<f64>> {
    // fix the complex phase using the entry of largest modulus
    let (k, _) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .expect("nonempty");
    let phase = v[k] / v[k].norm();
    let out: Vec<f64> = v.iter().map(|z| (z / phase).re).collect();
    if out.iter().any(|&x| x <= 0.0) {
        return Err(Error::Numeric(format!("Perron vector is not positive: {out:?}")));
    }
    Ok(out)
}

/// `mu_hat(theta) = k proj + rem` with `proj` the spectral projection onto the
/// leading eigenvalue.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub k: Complex64,
    pub proj: ComplexMatrix,
    pub rem: ComplexMatrix,
    /// `|k|` minus the largest modulus of the remaining eigenvalues.
    pub gap: f64,
}

pub fn decompose(m: &ComplexMatrix) -> Result<SpectralDecomposition> {
    let n = m.nrows();
    let ev = linalg::eigenvalues_by_modulus(m)?;
    let k = ev[0];
    let gap = if n > 1 { k.norm() - ev[1].norm() } else { k.norm() };
    if n > 1 && gap <= GAP_THRESHOLD {
        return Err(Error::Numeric(format!(
            "leading eigenvalue not separated (gap {gap:e} <= {GAP_THRESHOLD:e}); decomposition unavailable"
        )));
    }
    let (r, l) = linalg::eigenvector_pair(m, k)?;
    let denom = (l.transpose() * &r)[(0, 0)];
    let proj = &r * l.transpose() / denom;
    let rem = m - &proj * k;
    Ok(SpectralDecomposition { k, proj, rem, gap })
}

pub fn leading_decomposition(spec: &ProcessSpec, theta: &[f64]) -> Result<SpectralDecomposition> {
    decompose(&fourier(spec, theta))
}

/// Eigenvalue of largest modulus of `mu_hat(theta)`.
pub fn leading_eigenvalue(spec: &ProcessSpec, theta: &[f64]) -> Result<Complex64> {
    Ok(linalg::eigenvalues_by_modulus(&fourier(spec, theta))?[0])
}

/// Result of scanning the spectral radius of `mu_hat` over the torus.
#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub grid_points: usize,
    pub excluded_radius: f64,
    pub max_radius: f64,
    pub argmax: Vec<f64>,
}

/// Periodic torus grid `theta_k = pi - 2 pi k / n`, `k = 0..n`; contains `pi`
/// and, for odd `n`, not `0`.
pub fn torus_axis(n: usize) -> Vec<f64> {
    (0..n).map(|k| PI - 2.0 * PI * k as f64 / n as f64).collect()
}

/// Max spectral radius of `mu_hat(theta)` over the `n^d` torus grid minus the
/// closed ball of radius `2 pi / n` around 0.
pub fn spectral_scan(spec: &ProcessSpec, n: usize) -> ScanReport {
    let d = spec.dim();
    let axis = torus_axis(n);
    let excluded = 2.0 * PI / n as f64;
    let total = n.pow(d as u32);
    let best = (0..total)
        .into_par_iter()
        .filter_map(|flat| {
            let mut rem = flat;
            let mut theta = vec![0.0; d];
            for t in (0..d).rev() {
                theta[t] = axis[rem % n];
                rem /= n;
            }
            let r2: f64 = theta.iter().map(|v| v * v).sum();
            if r2.sqrt() <= excluded {
                return None;
            }
            let rad = linalg::spectral_radius(&fourier(spec, &theta)).unwrap_or(f64::NAN);
            Some((rad, theta))
        })
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 > a.1) { b } else { a });
    let (max_radius, argmax) = best.unwrap_or((0.0, vec![0.0; d]));
    ScanReport {
        grid_points: n,
        excluded_radius: excluded,
        max_radius,
        argmax,
    }
}

/// Finite-difference derivatives of the leading Fourier eigenvalue at 0
/// compared with `i m` and `-sigma`.
#[derive(Clone, Debug)]
pub struct KDerivativeCheck {
    pub gradient: DVector<Complex64>,
    pub hessian: DMatrix<Complex64>,
    pub gradient_residual: f64,
    pub hessian_residual: f64,
}

pub fn k_derivative_check(spec: &ProcessSpec) -> Result<KDerivativeCheck> {
    let d = spec.dim();
    let moments = process::moments(spec)?;
    let sigma = sections::energy_matrix(spec)?;
    let k = |theta: &[f64]| leading_eigenvalue(spec, theta);
    let zero = vec![0.0; d];
    let gradient = fd::gradient(&k, &zero)?;
    let hessian = fd::hessian(&k, &zero)?;
    let expected_grad = moments.global_drift.map(|v| Complex64::new(0.0, v));
    let expected_hess = sigma.matrix().map(|v| Complex64::new(-v, 0.0));
    Ok(KDerivativeCheck {
        gradient_residual: (&gradient - expected_grad).norm(),
        hessian_residual: (&hessian - expected_hess).norm(),
        gradient,
        hessian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fourier_examples() {
        let f = fourier(&catalog::w2(), &[0.0]);
        assert!((f[(0, 0)] - c(0.7, 0.0)).norm() < 1e-15);
        assert!((f[(1, 0)] - c(0.3, 0.0)).norm() < 1e-15);
        let f = fourier(&catalog::w1(), &[PI]);
        assert!((f[(0, 0)] - c(-0.4, 0.0)).norm() < 1e-15);
        let f = fourier(&catalog::w2(), &[PI]);
        let expected = [(-0.7, 0.3), (0.3, -0.1)];
        assert!((f[(0, 0)] - c(expected[0].0, 0.0)).norm() < 1e-15);
        assert!((f[(0, 1)] - c(expected[0].1, 0.0)).norm() < 1e-15);
        assert!((f[(1, 0)] - c(expected[1].0, 0.0)).norm() < 1e-15);
        assert!((f[(1, 1)] - c(expected[1].1, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn laplace_examples() {
        assert!((laplace(&catalog::w1(), &[0.0])[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((laplace(&catalog::w1(), &[0.4f64.ln()])[(0, 0)] - 1.0).abs() < 1e-15);
        let l = laplace(&catalog::w2(), &[(40.0f64 / 49.0).ln()]);
        assert!((l[(0, 0)] - 4.0 / 7.0).abs() < 1e-15);
        assert!((l[(0, 1)] - 0.3).abs() < 1e-15);
        assert!((l[(1, 1)] - 0.79).abs() < 1e-15);
        let spec = catalog::w3();
        let z = laplace_complex(&spec, &[0.0, 0.0], &[0.3, -0.2]);
        assert!((z - fourier(&spec, &[0.3, -0.2])).norm() < 1e-15);
    }

    #[test]
    fn convolution_power_examples() {
        let spec = catalog::w2();
        let id = convolution_power(&spec, 0).unwrap();
        assert_eq!(id[0], JumpMeasure::dirac(vec![0], 1.0));
        assert!(id[1].is_empty() && id[2].is_empty());
        assert_eq!(convolution_power(&spec, 1).unwrap(), spec.jumps());

        let sq = convolution_power(&catalog::w1(), 2).unwrap();
        for (x, w) in [(-2, 0.04), (-1, 0.12), (0, 0.29), (1, 0.30), (2, 0.25)] {
            assert!((sq[0].get(&LatticeVector::new(vec![x])) - w).abs() < 1e-15);
        }
        assert!(matches!(convolution_power_capped(&spec, 11, 10), Err(Error::Resource(_))));
    }

    #[test]
    fn perron_examples() {
        let t = perron_triple(&DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.7])).unwrap();
        assert!((t.rho - 1.0).abs() < 1e-14);
        assert!((t.right[0] - 1.0).abs() < 1e-14 && (t.right[1] - 1.0).abs() < 1e-14);
        assert!((t.left[0] - 0.5).abs() < 1e-14 && (t.left[1] - 0.5).abs() < 1e-14);

        let t = perron_triple(&DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!((t.rho, t.right[0], t.left[0]), (2.0, 1.0, 1.0));

        let t = perron_triple(&DMatrix::from_row_slice(2, 2, &[4.0 / 7.0, 0.3, 0.3, 0.79])).unwrap();
        assert!((t.rho - 1.0).abs() < 1e-14);
        assert!((t.right[0] - 0.7).abs() < 1e-14);
        assert!((t.right[1] - 1.0).abs() < 1e-14);

        let reducible = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(perron_triple(&reducible), Err(Error::Precondition(_))));
    }

    #[test]
    fn perron_on_periodic_matrix() {
        // cyclic permutation: eigenvalues are cube roots of unity
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0.0]);
        let t = perron_triple(&m).unwrap();
        assert!((t.rho - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decomposition_examples() {
        let dec = leading_decomposition(&catalog::w2(), &[0.0]).unwrap();
        assert!((dec.k - c(1.0, 0.0)).norm() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                assert!((dec.proj[(i, j)] - c(0.5, 0.0)).norm() < 1e-12);
                let r = if i == j { 0.2 } else { -0.2 };
                assert!((dec.rem[(i, j)] - c(r, 0.0)).norm() < 1e-12);
            }
        }
        let dec = leading_decomposition(&catalog::w1(), &[0.1]).unwrap();
        let expected = c(0.3, 0.0) + Complex64::from_polar(0.2, -0.1) + Complex64::from_polar(0.5, 0.1);
        assert!((dec.k - expected).norm() < 1e-15);
        assert!((dec.proj[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(dec.rem[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn decomposition_refuses_clustered_spectrum() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        assert!(matches!(decompose(&m), Err(Error::Numeric(_))));
    }

    #[test]
    fn scan_examples() {
        let r = spectral_scan(&catalog::w1(), 401);
        assert!(r.max_radius < 1.0 - 1e-4);
        let r = spectral_scan(&catalog::w2(), 401);
        assert!(r.max_radius < 1.0);
        let r = spectral_scan(&catalog::simple_periodic(), 401);
        assert!((r.max_radius - 1.0).abs() < 1e-10);
        assert!((r.argmax[0] - PI).abs() < 1e-12);
        let ev = linalg::eigenvalues_by_modulus(&fourier(&catalog::w2(), &[PI])).unwrap();
        assert!((ev[0].re + 0.8243).abs() < 1e-4 && (ev[1].re - 0.0243).abs() < 1e-4);
    }

    #[test]
    fn k_derivatives() {
        let chk = k_derivative_check(&catalog::w1()).unwrap();
        assert!((chk.gradient[0] - c(0.0, 0.3)).norm() < 1e-9);
        assert!((chk.hessian[(0, 0)] - c(-0.7, 0.0)).norm() < 1e-6);
        for spec in [catalog::w1(), catalog::w2(), catalog::w3()] {
            let chk = k_derivative_check(&spec).unwrap();
            assert!(chk.gradient_residual < 1e-6, "{chk:?}");
            assert!(chk.hessian_residual < 1e-6, "{chk:?}");
        }
    }
}
