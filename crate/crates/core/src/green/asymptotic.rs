use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::boundary;
use crate::error::{Error, Result};
use crate::process::{self, ProcessSpec};

/// Power applied to `|m_c(u)|` in the asymptotic constant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub enum MExponent {
    /// `(d - 3) / 2`; reduces to the renewal constant `1 / |m|` for `d = 1`.
    #[default]
    Derived,
    /// `(d - 1) / 3`, kept for comparison.
    Printed,
    Custom(f64),
}

impl MExponent {
    pub fn value(self, d: usize) -> f64 {
        let d = d as f64;
        match self {
            MExponent::Derived => (d - 3.0) / 2.0,
            MExponent::Printed => (d - 1.0) / 3.0,
            MExponent::Custom(e) => e,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticCoefficient {
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub m_c_norm: f64,
    /// Orthogonal `R_u` with `R_u u = e_1`.
    pub rotation: DMatrix<f64>,
    /// `R_u H_rho(c) R_u^T`.
    pub sigma_u: DMatrix<f64>,
    /// `sigma_u` without its first row and column.
    pub sigma_u_1: DMatrix<f64>,
    /// `1 pi_c`, the spectral projection of the transformed chain at 0.
    pub proj0: DMatrix<f64>,
    pub phi: Vec<f64>,
    pub chi: DMatrix<f64>,
    pub m_exponent: f64,
}

impl AsymptoticCoefficient {
    pub fn chi(&self, i: usize, j: usize) -> f64 {
        self.chi[(i, j)]
    }
}

/// Rotation in the plane of `u` and `e_1` sending `u` to `e_1`.
pub fn rotation_to_e1(u: &[f64]) -> DMatrix<f64> {
    let d = u.len();
    if d == 1 {
        return DMatrix::from_element(1, 1, if u[0] < 0.0 { -1.0 } else { 1.0 });
    }
    let mut w = DVector::from_column_slice(u);
    w[0] = 0.0;
    let s = w.norm();
    let mut r = DMatrix::identity(d, d);
    if s < 1e-15 {
        if u[0] < 0.0 {
            r[(0, 0)] = -1.0;
            r[(1, 1)] = -1.0;
        }
        return r;
    }
    w /= s;
    let cos = u[0];
    let mut e1 = DVector::zeros(d);
    e1[0] = 1.0;
    r += (&e1 * e1.transpose() + &w * w.transpose()) * (cos - 1.0);
    r += (&e1 * w.transpose() - &w * e1.transpose()) * s;
    r
}

pub fn asymptotic_coefficient(spec: &ProcessSpec, u: &[f64], exponent: MExponent) -> Result<AsymptoticCoefficient> {
    let d = spec.dim();
    let p = spec.states();
    let bp = boundary::boundary_point(spec, u)?;
    let doob = boundary::doob_transform(spec, &bp.c)?;
    let (_, grad, hess) = boundary::rho_derivatives(spec, &bp.c)?;
    let m_c_norm = grad.norm();
    let rotation = rotation_to_e1(u);
    let sigma_u = &rotation * &hess * rotation.transpose();
    let sigma_u_1 = sigma_u.view((1, 1), (d - 1, d - 1)).into_owned();
    let det = if d == 1 {
        1.0
    } else {
        let sym = (&sigma_u_1 + sigma_u_1.transpose()) * 0.5;
        if sym.clone().cholesky().is_none() {
            return Err(Error::Numeric(format!("sigma_u^(1) is not positive-definite for u = {u:?}")));
        }
        sym.determinant()
    };
    let pi_c = process::stationary_distribution(&doob.transformed)?;
    let proj0 = DMatrix::from_fn(p, p, |_, j| pi_c[j]);
    let m_exponent = exponent.value(d);
    let scale = (2.0 * PI).powf(-(d as f64 - 1.0) / 2.0) * m_c_norm.powf(m_exponent) / det.sqrt();
    let phi = doob.phi;
    let chi = DMatrix::from_fn(p, p, |i, j| scale * phi[i] / phi[j] * proj0[(i, j)]);
    Ok(AsymptoticCoefficient {
        u: u.to_vec(),
        c: bp.c,
        m_c_norm,
        rotation,
        sigma_u,
        sigma_u_1,
        proj0,
        phi,
        chi,
        m_exponent,
    })
}

/// `chi_ij(x/|x|) |x|^{-(d-1)/2} exp(-c(x/|x|) . x)`.
pub fn asymptotic_green(spec: &ProcessSpec, i: usize, x: &[i64], j: usize, exponent: MExponent) -> Result<f64> {
    super::check_target(spec, i, x, j)?;
    let norm = x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Precondition("asymptotic Green function needs x != 0".into()));
    }
    let u: Vec<f64> = x.iter().map(|&v| v as f64 / norm).collect();
    let coef = asymptotic_coefficient(spec, &u, exponent)?;
    let cx: f64 = coef.c.iter().zip(x).map(|(c, &v)| c * v as f64).sum();
    Ok(coef.chi(i, j) * norm.powf(-(spec.dim() as f64 - 1.0) / 2.0) * (-cx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn rotation_properties() {
        for u in [vec![0.6, 0.8], vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, -1.0], vec![0.48, 0.6, 0.64]] {
            let r = rotation_to_e1(&u);
            let d = u.len();
            assert!((&r * r.transpose() - DMatrix::<f64>::identity(d, d)).amax() < 1e-12);
            let ru = &r * DVector::from_column_slice(&u);
            assert!((ru[0] - 1.0).abs() < 1e-12 && ru.rows(1, d - 1).amax() < 1e-12);
        }
        // vectors orthogonal to u and e_1 are fixed
        let r = rotation_to_e1(&[0.48, 0.6, 0.64]);
        let v = DVector::from_vec(vec![0.0, 0.64, -0.6]);
        assert!((&r * &v - &v).amax() < 1e-12);
        assert_eq!(rotation_to_e1(&[-1.0])[(0, 0)], -1.0);
    }

    #[test]
    fn coefficient_examples() {
        let w1 = catalog::w1();
        let a = asymptotic_coefficient(&w1, &[1.0], MExponent::Derived).unwrap();
        assert!((a.chi(0, 0) - 10.0 / 3.0).abs() < 1e-10);
        let a = asymptotic_coefficient(&w1, &[-1.0], MExponent::Derived).unwrap();
        assert!((a.c[0] - 0.4f64.ln()).abs() < 1e-12);
        assert!((a.chi(0, 0) - 10.0 / 3.0).abs() < 1e-10);

        let a = asymptotic_coefficient(&catalog::w3(), &[1.0, 0.0], MExponent::Derived).unwrap();
        assert!((a.sigma_u_1[(0, 0)] - 0.3).abs() < 1e-12);
        let want = 1.0 / (2.0 * PI * 0.2 * 0.3).sqrt();
        assert!((a.chi(0, 0) - want).abs() < 1e-9, "{}", a.chi(0, 0));
        let printed = asymptotic_coefficient(&catalog::w3(), &[1.0, 0.0], MExponent::Printed).unwrap();
        assert!((printed.chi(0, 0) / a.chi(0, 0) - 0.2f64.powf(1.0 / 3.0 + 0.5)).abs() < 1e-9);
    }

    #[test]
    fn asymptotic_examples() {
        let w1 = catalog::w1();
        assert!((asymptotic_green(&w1, 0, &[7], 0, MExponent::Derived).unwrap() - 10.0 / 3.0).abs() < 1e-10);
        let v = asymptotic_green(&w1, 0, &[-4], 0, MExponent::Derived).unwrap();
        assert!((v - 10.0 / 3.0 * 0.4f64.powi(4)).abs() < 1e-10);
        let v = asymptotic_green(&catalog::w3(), 0, &[25, 0], 0, MExponent::Derived).unwrap();
        assert!((v - 1.0 / (2.0 * PI * 0.06).sqrt() / 5.0).abs() < 1e-9, "{v}");
        assert!((v - 0.325734).abs() < 2e-6);
        assert!(matches!(asymptotic_green(&w1, 0, &[0], 0, MExponent::Derived), Err(Error::Precondition(_))));
    }

    #[test]
    fn chi_positive_on_w2() {
        let a = asymptotic_coefficient(&catalog::w2(), &[-1.0], MExponent::Derived).unwrap();
        assert!(a.chi.iter().all(|&v| v > 0.0));
        assert!((a.proj0.row(0) - a.proj0.row(1)).amax() < 1e-15);
    }
}
