//! Fourier inversion of the resolvent `(I - mu_hat)^{-1}` on a uniform grid.
//!
//! The default scheme shifts the contour to `c + i theta` with `c` the
//! minimizer of `rho`: there `rho(c) < 1`, the integrand is analytic and
//! periodic, and the trapezoid rule converges geometrically in `M`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use super::{check_target, require_transient, GreenEstimate, Method};
use crate::boundary;
use crate::error::{Error, Result};
use crate::process::ProcessSpec;
use crate::transforms;

#[derive(Clone, Debug, PartialEq)]
pub enum ResolventScheme {
    /// Shifted contour through the minimizer of `rho` (or the given point).
    Tilted { shift: Option<Vec<f64>> },
    /// `G_t` for damping factors `t < 1`, extrapolated to `t = 1`.
    Damped { schedule: Vec<f64> },
    /// The `t = 1` integral on a midpoint grid; `d >= 2` only.
    Undamped,
}

impl ResolventScheme {
    pub fn default_damping() -> Self {
        ResolventScheme::Damped {
            schedule: vec![0.9, 0.95, 0.975, 0.9875],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            ResolventScheme::Tilted { .. } => "tilted",
            ResolventScheme::Damped { .. } => "damped",
            ResolventScheme::Undamped => "undamped",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ResolventOptions {
    /// Grid points per axis; even.
    pub grid: usize,
    pub scheme: ResolventScheme,
    /// Relative tolerance for the grid-halving check.
    pub tol: f64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions {
            grid: 1024,
            scheme: ResolventScheme::Tilted { shift: None },
            tol: 1e-6,
        }
    }
}

/// Column `j` of `(I - t L mu(c + i theta))^{-1}` on the grid
/// `theta_k = 2 pi (k + offset) / M` in every axis.
struct Grid {
    m: usize,
    d: usize,
    p: usize,
    offset: f64,
    /// `values[k * p + i]`, `k` the row-major grid index.
    values: Vec<Complex64>,
    /// Sum over the grid of `max_i |values|`, for the roundoff floor.
    abs_sum: f64,
}

impl Grid {
    fn build(spec: &ProcessSpec, c: &[f64], t: f64, j: usize, m: usize, offset: f64) -> Result<Grid> {
        let (d, p) = (spec.dim(), spec.states());
        let total = m
            .checked_pow(d as u32)
            .filter(|&n| n.saturating_mul(p) <= 1 << 28)
            .ok_or_else(|| Error::Resource(format!("grid {m}^{d} is too large")))?;
        let axis: Vec<f64> = (0..m).map(|k| 2.0 * PI * (k as f64 + offset) / m as f64).collect();
        let cols: Vec<Result<Vec<Complex64>>> = (0..total)
            .into_par_iter()
            .map(|k| {
                let mut theta = vec![0.0; d];
                let mut r = k;
                for a in (0..d).rev() {
                    theta[a] = axis[r % m];
                    r /= m;
                }
                let mut a = transforms::laplace_complex(spec, c, &theta) * Complex64::new(-t, 0.0);
                for q in 0..p {
                    a[(q, q)] += 1.0;
                }
                let mut rhs = nalgebra::DVector::zeros(p);
                rhs[j] = Complex64::new(1.0, 0.0);
                let col = a
                    .lu()
                    .solve(&rhs)
                    .filter(|v| v.iter().all(|z| z.is_finite()))
                    .ok_or_else(|| Error::Numeric(format!("I - mu_hat is singular at theta = {theta:?}")))?;
                Ok(col.iter().cloned().collect())
            })
            .collect();
        let mut values = Vec::with_capacity(total * p);
        let mut abs_sum = 0.0;
        for col in cols {
            let col = col?;
            abs_sum += col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            values.extend(col);
        }
        Ok(Grid { m, d, p, offset, values, abs_sum })
    }

    /// `(1 / n^d) sum_k F(theta_k) e^{-i theta_k . x}` over every `stride`-th point.
    fn invert(&self, i: usize, x: &[i64], stride: usize) -> Complex64 {
        let (m, d) = (self.m, self.d);
        let n = m / stride;
        let phases: Vec<Vec<Complex64>> = x
            .iter()
            .map(|&xa| {
                (0..n)
                    .map(|k| {
                        let theta = 2.0 * PI * ((k * stride) as f64 + self.offset) / m as f64;
                        // reduce the angle before evaluating to keep large |x| accurate
                        let ang = (theta * xa as f64).rem_euclid(2.0 * PI);
                        Complex64::from_polar(1.0, -ang)
                    })
                    .collect()
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; d];
        loop {
            let mut k = 0usize;
            let mut ph = Complex64::new(1.0, 0.0);
            for a in 0..d {
                k = k * m + idx[a] * stride;
                ph *= phases[a][idx[a]];
            }
            acc += self.values[k * self.p + i] * ph;
            let mut a = d;
            loop {
                if a == 0 {
                    return acc / (n as f64).powi(d as i32);
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    fn roundoff(&self) -> f64 {
        16.0 * f64::EPSILON * self.abs_sum / (self.m as f64).powi(self.d as i32) * (self.m as f64).log2().max(1.0)
    }
}

fn check_grid(m: usize) -> Result<()> {
    if m < 4 || m % 2 != 0 {
        return Err(Error::Precondition(format!("grid size must be even and at least 4, got {m}")));
    }
    Ok(())
}

/// Resolvent-based value of `G((0,i),(x,j))`.
pub fn green_resolvent(spec: &ProcessSpec, i: usize, x: &[i64], j: usize, opts: &ResolventOptions) -> Result<GreenEstimate> {
    Ok(green_resolvent_many(spec, j, &[(i, x.to_vec())], opts)?.remove(0))
}

/// Values at several `(i, x)` sharing the target state `j`; the grid is built once.
pub fn green_resolvent_many(spec: &ProcessSpec, j: usize, sources: &[(usize, Vec<i64>)], opts: &ResolventOptions) -> Result<Vec<GreenEstimate>> {
    require_transient(spec)?;
    for (i, x) in sources {
        check_target(spec, *i, x, j)?;
    }
    check_grid(opts.grid)?;
    let m = opts.grid;
    let out = match &opts.scheme {
        ResolventScheme::Tilted { shift } => {
            let c = match shift {
                Some(c) => {
                    if c.len() != spec.dim() {
                        return Err(Error::Precondition("contour shift has the wrong dimension".into()));
                    }
                    let rho = boundary::spectral_radius(spec, c)?;
                    if rho >= 1.0 {
                        return Err(Error::Precondition(format!("contour shift has rho = {rho} >= 1")));
                    }
                    c.clone()
                }
                None => boundary::rho_minimizer(spec)?.0,
            };
            let grid = Grid::build(spec, &c, 1.0, j, m, 0.0)?;
            sources
                .iter()
                .map(|(i, x)| {
                    let scale = (-x.iter().zip(&c).map(|(&a, b)| a as f64 * b).sum::<f64>()).exp();
                    let full = grid.invert(*i, x, 1).re * scale;
                    let half = grid.invert(*i, x, 2).re * scale;
                    let floor = grid.roundoff() * scale;
                    let diff = (full - half).abs();
                    if diff > 10.0 * opts.tol * full.abs().max(floor) {
                        return Err(resolution_error(m, diff, full));
                    }
                    Ok(estimate(full, diff + floor, json!({"scheme": opts.scheme.name(), "grid": m, "shift": c})))
                })
                .collect::<Result<Vec<_>>>()?
        }
        ResolventScheme::Damped { schedule } => {
            if schedule.len() < 2 || schedule.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
                return Err(Error::Precondition("damping schedule needs at least two factors in (0, 1)".into()));
            }
            let zero = vec![0.0; spec.dim()];
            let grids = schedule
                .iter()
                .map(|&t| Grid::build(spec, &zero, t, j, m, 0.0))
                .collect::<Result<Vec<_>>>()?;
            sources
                .iter()
                .map(|(i, x)| {
                    let vals: Vec<f64> = grids.iter().map(|g| g.invert(*i, x, 1).re).collect();
                    let hs: Vec<f64> = schedule.iter().map(|t| 1.0 - t).collect();
                    let (value, incr) = neville_at_zero(&hs, &vals);
                    let floor = grids.iter().map(Grid::roundoff).fold(0.0, f64::max);
                    Ok(estimate(value, incr + floor, json!({"scheme": opts.scheme.name(), "grid": m, "schedule": schedule})))
                })
                .collect::<Result<Vec<_>>>()?
        }
        ResolventScheme::Undamped => {
            if spec.dim() < 2 {
                return Err(Error::Precondition("the undamped resolvent integral needs d >= 2".into()));
            }
            let zero = vec![0.0; spec.dim()];
            let fine = Grid::build(spec, &zero, 1.0, j, m, 0.5)?;
            let coarse = Grid::build(spec, &zero, 1.0, j, m / 2, 0.5)?;
            sources
                .iter()
                .map(|(i, x)| {
                    let full = fine.invert(*i, x, 1).re;
                    let half = coarse.invert(*i, x, 1).re;
                    Ok(estimate(full, (full - half).abs() + fine.roundoff(), json!({"scheme": opts.scheme.name(), "grid": m})))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(out)
}

fn estimate(value: f64, error: f64, params: serde_json::Value) -> GreenEstimate {
    GreenEstimate {
        value,
        method: Method::Resolvent,
        error,
        converged: true,
        params,
    }
}

fn resolution_error(m: usize, diff: f64, value: f64) -> Error {
    Error::Numeric(format!(
        "resolvent grid M = {m} too coarse: halving the grid changes the value by {diff:e} (value {value:e})"
    ))
}

/// Polynomial extrapolation of `(h_k, v_k)` to `h = 0`; returns the value and
/// the size of the last correction.
fn neville_at_zero(h: &[f64], v: &[f64]) -> (f64, f64) {
    let n = h.len();
    let mut p = v.to_vec();
    let mut last = 0.0;
    for level in 1..n {
        for k in 0..n - level {
            let (a, b) = (h[k], h[k + level]);
            let next = (b * p[k] - a * p[k + 1]) / (b - a);
            if k == 0 {
                last = (next - p[0]).abs();
            }
            p[k] = next;
        }
    }
    (p[0], last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn w1_matches_closed_form() {
        let w1 = catalog::w1();
        let opts = ResolventOptions::default();
        for (x, want) in [(0, 10.0 / 3.0), (5, 10.0 / 3.0), (-3, 10.0 / 3.0 * 0.064)] {
            let g = green_resolvent(&w1, 0, &[x], 0, &opts).unwrap();
            assert!((g.value - want).abs() < 1e-10, "x = {x}: {g:?}");
            assert!(g.error < 1e-8);
        }
    }

    #[test]
    fn neville_exact_on_polynomials() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let v: Vec<f64> = h.iter().map(|x| 2.0 - 3.0 * x + x * x).collect();
        let (val, _) = neville_at_zero(&h, &v);
        assert!((val - 2.0).abs() < 1e-12);
    }

    #[test]
    fn damped_scheme_runs_and_reports_error() {
        let opts = ResolventOptions {
            grid: 1024,
            scheme: ResolventScheme::default_damping(),
            tol: 1e-6,
        };
        let g = green_resolvent(&catalog::w1(), 0, &[5], 0, &opts).unwrap();
        assert!(g.error > 0.0 && (g.value - 10.0 / 3.0).abs() < 0.2);
    }

    #[test]
    fn undamped_needs_two_dimensions() {
        let opts = ResolventOptions {
            scheme: ResolventScheme::Undamped,
            ..Default::default()
        };
        assert!(matches!(green_resolvent(&catalog::w1(), 0, &[1], 0, &opts), Err(Error::Precondition(_))));
    }

    #[test]
    fn coarse_grid_is_detected() {
        let opts = ResolventOptions {
            grid: 8,
            ..Default::default()
        };
        assert!(matches!(green_resolvent(&catalog::w1(), 0, &[3], 0, &opts), Err(Error::Numeric(_))));
    }
}
