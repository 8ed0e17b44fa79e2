//! The spectral radius map `rho(c)` of the Laplace transform, the boundary
//! of `{rho <= 1}`, the direction-to-boundary map `c(u)` and Doob transforms.
//!
//! Exact derivatives come from the tilted process: for any `c`, conjugating
//! `L mu(c)` by its Perron vector and dividing by `rho(c)` yields a
//! stochastic jump matrix whose drift and energy matrix, multiplied by
//! `rho(c)`, are the gradient and Hessian of `rho` at `c`. The solvers use
//! those; [`rho_eval`] uses finite differences and serves as the
//! independent cross-check.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::process::{self, JumpMeasure, ProcessSpec, DRIFT_TOL};
use crate::transforms::{self, PerronTriple};
use crate::{fd, sections};

#[derive(Clone, Debug)]
pub struct RhoEvaluation {
    pub c: Vec<f64>,
    pub rho: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

pub fn spectral_radius(spec: &ProcessSpec, c: &[f64]) -> Result<f64> {
    Ok(transforms::perron_triple(&transforms::laplace(spec, c))?.rho)
}

/// Perron root of `L mu(c)` with finite-difference gradient and Hessian.
pub fn rho_eval(spec: &ProcessSpec, c: &[f64]) -> Result<RhoEvaluation> {
    check_dim(spec, c.len())?;
    let f = |y: &[f64]| spectral_radius(spec, y);
    Ok(RhoEvaluation {
        c: c.to_vec(),
        rho: f(c)?,
        grad: fd::real_gradient(&f, c)?,
        hess: fd::real_hessian(&f, c)?,
    })
}

fn check_dim(spec: &ProcessSpec, len: usize) -> Result<()> {
    if len != spec.dim() {
        return Err(Error::Precondition(format!("vector has length {len}, expected {}", spec.dim())));
    }
    Ok(())
}

/// Stochastic process obtained by exponential tilting at `c` and
/// conjugation by the Perron vector of `L mu(c)`.
#[derive(Clone, Debug)]
pub struct Tilt {
    pub c: Vec<f64>,
    pub rho: f64,
    /// Right Perron vector of `L mu(c)`, max entry 1.
    pub phi: Vec<f64>,
    pub process: ProcessSpec,
    /// Largest deviation of a row mass from 1 before row renormalization.
    pub stochastic_residual: f64,
}

pub fn tilt(spec: &ProcessSpec, c: &[f64]) -> Result<Tilt> {
    check_dim(spec, c.len())?;
    let PerronTriple { rho, right: phi, .. } = transforms::perron_triple(&transforms::laplace(spec, c))?;
    let p = spec.states();
    let mut rows: Vec<Vec<(crate::LatticeVector, f64)>> = vec![Vec::new(); p * p];
    let mut residual: f64 = 0.0;
    for i in 0..p {
        let mut row_mass = 0.0;
        for j in 0..p {
            for (x, w) in spec.jump(i, j).iter() {
                let v = phi[j] / (rho * phi[i]) * x.dot(c).exp() * w;
                row_mass += v;
                rows[i * p + j].push((x.clone(), v));
            }
        }
        residual = residual.max((row_mass - 1.0).abs());
        for j in 0..p {
            rows[i * p + j].iter_mut().for_each(|(_, v)| *v /= row_mass);
        }
    }
    let jumps = rows.into_iter().map(JumpMeasure::from_atoms).collect::<Result<Vec<_>>>()?;
    Ok(Tilt {
        c: c.to_vec(),
        rho,
        phi,
        process: ProcessSpec::new(spec.dim(), p, jumps)?,
        stochastic_residual: residual,
    })
}

/// `(rho, grad rho, Hessian rho)` at `c` from the tilted process.
pub fn rho_derivatives(spec: &ProcessSpec, c: &[f64]) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let t = tilt(spec, c)?;
    let drift = process::moments(&t.process)?.global_drift;
    let sigma = sections::energy_matrix(&t.process)?.into_inner();
    Ok((t.rho, drift * t.rho, sigma * t.rho))
}

#[derive(Clone, Debug)]
pub struct DoobTransform {
    pub c: Vec<f64>,
    pub rho: f64,
    /// `phi_c`, normalized to max entry 1.
    pub phi: Vec<f64>,
    pub transformed: ProcessSpec,
    pub stochastic_residual: f64,
}

/// Doob transform `(phi_j / phi_i) e^{c.x} mu_ij(x)` at a boundary point.
pub fn doob_transform(spec: &ProcessSpec, c: &[f64]) -> Result<DoobTransform> {
    let t = tilt(spec, c)?;
    if (t.rho - 1.0).abs() >= 1e-8 {
        return Err(Error::Precondition(format!(
            "c = {c:?} is not on the boundary of {{rho <= 1}} (rho = {})",
            t.rho
        )));
    }
    Ok(DoobTransform {
        c: t.c,
        rho: t.rho,
        phi: t.phi,
        transformed: t.process,
        stochastic_residual: t.stochastic_residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Solver {
    /// Damped Newton on the KKT system, falling back to [`Solver::Nested`].
    Auto,
    Kkt,
    /// Inner convex minimization of `rho(c) - lambda u.c`, outer root find on
    /// `lambda`, then a KKT polish.
    Nested,
}

#[derive(Clone, Debug)]
pub struct BoundaryOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub solver: Solver,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions {
            max_iter: 200,
            tol: 1e-12,
            solver: Solver::Auto,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryPoint {
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    /// Drift of the Doob transform at `c`, equal to `grad rho(c)`.
    pub m_c: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub solver: Solver,
    pub kkt_residual: f64,
}

fn require_non_centered(spec: &ProcessSpec) -> Result<DVector<f64>> {
    let m = process::moments(spec)?.global_drift;
    if m.norm() <= DRIFT_TOL {
        return Err(Error::Precondition(
            "non-centered assumption (Assumption 2) fails: the global drift is zero".into(),
        ));
    }
    Ok(m)
}

fn check_unit(spec: &ProcessSpec, u: &[f64]) -> Result<DVector<f64>> {
    check_dim(spec, u.len())?;
    let u = DVector::from_column_slice(u);
    if (u.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("direction has norm {}, expected 1", u.norm())));
    }
    Ok(u)
}

fn kkt_residual(g: &DVector<f64>, rho: f64, lambda: f64, u: &DVector<f64>) -> f64 {
    let r = g - u * lambda;
    (r.norm_squared() + (rho - 1.0).powi(2)).sqrt()
}

struct Iterate {
    c: DVector<f64>,
    lambda: f64,
    iterations: usize,
    residual: f64,
}

fn kkt_newton(spec: &ProcessSpec, u: &DVector<f64>, mut c: DVector<f64>, mut lambda: f64, opts: &BoundaryOptions) -> Result<Iterate> {
    let d = spec.dim();
    let (mut rho, mut g, mut h) = rho_derivatives(spec, c.as_slice())?;
    let mut res = kkt_residual(&g, rho, lambda, u);
    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(Iterate { c, lambda, iterations: it, residual: res });
        }
        let mut jac = DMatrix::zeros(d + 1, d + 1);
        jac.view_mut((0, 0), (d, d)).copy_from(&h);
        for k in 0..d {
            jac[(k, d)] = -u[k];
            jac[(d, k)] = g[k];
        }
        let mut rhs = DVector::zeros(d + 1);
        rhs.rows_mut(0, d).copy_from(&(u * lambda - &g));
        rhs[d] = 1.0 - rho;
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numeric("singular KKT matrix".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-10 {
            let lam_new = lambda + t * step[d];
            let c_new = &c + step.rows(0, d) * t;
            if lam_new > 0.0 {
                if let Ok((r2, g2, h2)) = rho_derivatives(spec, c_new.as_slice()) {
                    let res2 = kkt_residual(&g2, r2, lam_new, u);
                    if res2.is_finite() && res2 < (1.0 - 1e-4 * t) * res {
                        c = c_new;
                        lambda = lam_new;
                        rho = r2;
                        g = g2;
                        h = h2;
                        res = res2;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if res <= 1e-10 {
                return Ok(Iterate { c, lambda, iterations: it, residual: res });
            }
            return Err(Error::Numeric(format!(
                "KKT Newton stalled at c = {:?} (residual {res:e})",
                c.as_slice()
            )));
        }
    }
    if res <= opts.tol.max(1e-10) {
        return Ok(Iterate { c, lambda, iterations: opts.max_iter, residual: res });
    }
    Err(Error::Numeric(format!(
        "KKT Newton did not converge in {} iterations; last iterate c = {:?}, residual {res:e}",
        opts.max_iter,
        c.as_slice()
    )))
}

/// Damped Newton minimization of `rho(c) - shift.c`.
fn minimize_shifted(spec: &ProcessSpec, shift: &DVector<f64>, mut c: DVector<f64>, max_iter: usize) -> Result<(DVector<f64>, f64)> {
    let obj = |rho: f64, c: &DVector<f64>| rho - shift.dot(c);
    let (mut rho, mut g, mut h) = rho_derivatives(spec, c.as_slice())?;
    for _ in 0..max_iter {
        let grad = &g - shift;
        if grad.norm() <= 1e-14 * (1.0 + shift.norm()) {
            return Ok((c, rho));
        }
        let step = h
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("Hessian of rho is not positive-definite".into()))?
            .solve(&(-&grad));
        let f0 = obj(rho, &c);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let c_new = &c + &step * t;
            if let Ok((r2, g2, h2)) = rho_derivatives(spec, c_new.as_slice()) {
                if obj(r2, &c_new) <= f0 + 1e-4 * t * slope {
                    c = c_new;
                    rho = r2;
                    g = g2;
                    h = h2;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            // at the floating-point floor of the objective
            return Ok((c, rho));
        }
    }
    Ok((c, rho))
}

/// Minimizer of `rho` (an interior point of `{rho <= 1}` for a non-centered process).
pub fn rho_minimizer(spec: &ProcessSpec) -> Result<(Vec<f64>, f64)> {
    let d = spec.dim();
    let (c, rho) = minimize_shifted(spec, &DVector::zeros(d), DVector::zeros(d), 200)?;
    Ok((c.as_slice().to_vec(), rho))
}

fn nested(spec: &ProcessSpec, u: &DVector<f64>, opts: &BoundaryOptions) -> Result<Iterate> {
    let d = spec.dim();
    let (c_min, rho_min) = minimize_shifted(spec, &DVector::zeros(d), DVector::zeros(d), opts.max_iter)?;
    if rho_min >= 1.0 {
        return Err(Error::Numeric(format!("min rho = {rho_min} is not below 1")));
    }
    let solve_at = |lambda: f64, warm: &DVector<f64>| -> Result<(DVector<f64>, f64)> {
        minimize_shifted(spec, &(u * lambda), warm.clone(), opts.max_iter)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut warm = c_min;
    let mut iterations = 0;
    loop {
        let (c, rho) = solve_at(hi, &warm)?;
        iterations += 1;
        if rho > 1.0 {
            break;
        }
        lo = hi;
        warm = c;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numeric("could not bracket the boundary multiplier".into()));
        }
    }
    let mut lambda = 0.5 * (lo + hi);
    let mut c = warm.clone();
    for _ in 0..opts.max_iter {
        iterations += 1;
        let (c_new, rho) = solve_at(lambda, &c)?;
        c = c_new;
        let h = rho - 1.0;
        if h.abs() <= 1e-13 || hi - lo <= 1e-15 * hi {
            break;
        }
        if h > 0.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        // Newton in lambda: d rho / d lambda = lambda u^T H^{-1} u at the inner optimum
        let (_, _, hess) = rho_derivatives(spec, c.as_slice())?;
        let newton = hess
            .cholesky()
            .map(|ch| lambda * u.dot(&ch.solve(u)))
            .filter(|s| *s > 0.0)
            .map(|s| lambda - h / s);
        lambda = match newton {
            Some(l) if l > lo && l < hi => l,
            _ => 0.5 * (lo + hi),
        };
    }
    let (rho, g, _) = rho_derivatives(spec, c.as_slice())?;
    Ok(Iterate {
        residual: kkt_residual(&g, rho, lambda, u),
        c,
        lambda,
        iterations,
    })
}

/// Boundary point `c(u)` whose Doob drift points along the unit vector `u`.
pub fn boundary_point(spec: &ProcessSpec, u: &[f64]) -> Result<BoundaryPoint> {
    boundary_point_with(spec, u, &BoundaryOptions::default())
}

pub fn boundary_point_with(spec: &ProcessSpec, u: &[f64], opts: &BoundaryOptions) -> Result<BoundaryPoint> {
    let m = require_non_centered(spec)?;
    let uv = check_unit(spec, u)?;
    let d = spec.dim();
    let kkt_start = || kkt_newton(spec, &uv, DVector::zeros(d), m.norm(), opts);
    let via_nested = || -> Result<Iterate> {
        let it = nested(spec, &uv, opts)?;
        let polished = kkt_newton(spec, &uv, it.c.clone(), it.lambda, opts)?;
        Ok(Iterate {
            iterations: it.iterations + polished.iterations,
            ..polished
        })
    };
    let (it, used) = match opts.solver {
        Solver::Kkt => (kkt_start()?, Solver::Kkt),
        Solver::Nested => (via_nested()?, Solver::Nested),
        Solver::Auto => match kkt_start() {
            Ok(it) => (it, Solver::Kkt),
            Err(_) => (via_nested()?, Solver::Nested),
        },
    };
    let (_, g, _) = rho_derivatives(spec, it.c.as_slice())?;
    Ok(BoundaryPoint {
        u: u.to_vec(),
        c: it.c.as_slice().to_vec(),
        m_c: g.as_slice().to_vec(),
        lambda: it.lambda,
        iterations: it.iterations,
        solver: used,
        kkt_residual: it.residual,
    })
}

/// `n` quasi-uniform unit directions in `R^d` (both signs for `d = 1`).
pub fn directions(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        1 => (0..n).map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            // spherical Fibonacci lattice on the first three axes, padded with zeros
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    let mut v = vec![0.0; d];
                    v[0] = r * a.cos();
                    v[1] = r * a.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

/// Direction of the finite-difference gradient of `rho` at `c`.
pub fn gamma_fd(spec: &ProcessSpec, c: &[f64]) -> Result<Vec<f64>> {
    let f = |y: &[f64]| spectral_radius(spec, y);
    let g = fd::real_gradient(&f, c)?;
    let n = g.norm();
    Ok((g / n).as_slice().to_vec())
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub point: BoundaryPoint,
    /// `|Gamma(c(u)) - u|` with `Gamma` from finite differences.
    pub roundtrip_residual: f64,
    /// Distance to the previous point of the trace.
    pub step: f64,
}

pub fn boundary_trace(spec: &ProcessSpec, n_directions: usize) -> Result<Vec<TraceEntry>> {
    require_non_centered(spec)?;
    let dirs = directions(spec.dim(), n_directions);
    let solved: Vec<(BoundaryPoint, f64)> = dirs
        .par_iter()
        .map(|u| {
            let bp = boundary_point(spec, u)?;
            let gam = gamma_fd(spec, &bp.c)?;
            let res = gam.iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            Ok((bp, res))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(solved.len());
    let mut prev: Option<Vec<f64>> = None;
    for (bp, res) in solved {
        let step = prev
            .as_ref()
            .map(|q| q.iter().zip(&bp.c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .unwrap_or(0.0);
        prev = Some(bp.c.clone());
        out.push(TraceEntry {
            point: bp,
            roundtrip_residual: res,
            step,
        });
    }
    Ok(out)
}
