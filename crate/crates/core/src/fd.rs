//! Fourth-order central differences with one Richardson step across two
//! step sizes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Result;

pub const STEPS: (f64, f64) = (1e-3, 1e-4);

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(k, h) in moves {
        y[k] += h;
    }
    y
}

fn richardson(coarse: Complex64, fine: Complex64, h1: f64, h2: f64) -> Complex64 {
    let (a, b) = (h1.powi(4), h2.powi(4));
    (fine * a - coarse * b) / (a - b)
}

/// Gradient of `f` at `x`.
pub fn gradient<F>(f: &F, x: &[f64]) -> Result<DVector<Complex64>>
where
    F: Fn(&[f64]) -> Result<Complex64>,
{
    let d = x.len();
    let one = |k: usize, h: f64| -> Result<Complex64> {
        let second = |h: f64| -> Result<Complex64> {
            Ok((f(&shifted(x, &[(k, h)]))? - f(&shifted(x, &[(k, -h)]))?) / (2.0 * h))
        };
        Ok((second(h)? * 4.0 - second(2.0 * h)?) / 3.0)
    };
    let mut g = DVector::zeros(d);
    for k in 0..d {
        g[k] = richardson(one(k, STEPS.0)?, one(k, STEPS.1)?, STEPS.0, STEPS.1);
    }
    Ok(g)
}

/// Hessian of `f` at `x`, symmetrized.
pub fn hessian<F>(f: &F, x: &[f64]) -> Result<DMatrix<Complex64>>
where
    F: Fn(&[f64]) -> Result<Complex64>,
{
    let d = x.len();
    let f0 = f(x)?;
    let entry = |k: usize, l: usize, h: f64| -> Result<Complex64> {
        let second = |h: f64| -> Result<Complex64> {
            if k == l {
                Ok((f(&shifted(x, &[(k, h)]))? - f0 * 2.0 + f(&shifted(x, &[(k, -h)]))?) / (h * h))
            } else {
                let pp = f(&shifted(x, &[(k, h), (l, h)]))?;
                let pm = f(&shifted(x, &[(k, h), (l, -h)]))?;
                let mp = f(&shifted(x, &[(k, -h), (l, h)]))?;
                let mm = f(&shifted(x, &[(k, -h), (l, -h)]))?;
                Ok((pp - pm - mp + mm) / (4.0 * h * h))
            }
        };
        Ok((second(h)? * 4.0 - second(2.0 * h)?) / 3.0)
    };
    let mut hess = DMatrix::zeros(d, d);
    for k in 0..d {
        for l in k..d {
            let v = richardson(entry(k, l, STEPS.0)?, entry(k, l, STEPS.1)?, STEPS.0, STEPS.1);
            hess[(k, l)] = v;
            hess[(l, k)] = v;
        }
    }
    Ok(hess)
}

pub fn real_gradient<F>(f: &F, x: &[f64]) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let g = gradient(&|y: &[f64]| f(y).map(|v| Complex64::new(v, 0.0)), x)?;
    Ok(g.map(|z| z.re))
}

pub fn real_hessian<F>(f: &F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let h = hessian(&|y: &[f64]| f(y).map(|v| Complex64::new(v, 0.0)), x)?;
    Ok(h.map(|z| z.re))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let f = |x: &[f64]| -> Result<f64> { Ok(x[0].exp() * x[1] + x[0] * x[0] * x[1] * x[1]) };
        let x = [0.3, -0.7];
        let g = real_gradient(&f, &x).unwrap();
        let h = real_hessian(&f, &x).unwrap();
        let e = 0.3f64.exp();
        assert!((g[0] - (e * -0.7 + 2.0 * 0.3 * 0.49)).abs() < 1e-9);
        assert!((g[1] - (e + 2.0 * 0.09 * -0.7)).abs() < 1e-9);
        assert!((h[(0, 0)] - (e * -0.7 + 2.0 * 0.49)).abs() < 1e-6);
        assert!((h[(0, 1)] - (e + 4.0 * 0.3 * -0.7)).abs() < 1e-6);
        assert!((h[(1, 1)] - 2.0 * 0.09).abs() < 1e-6);
    }
}
