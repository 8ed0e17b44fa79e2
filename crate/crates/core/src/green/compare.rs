use rayon::prelude::*;
use serde::Serialize;

use super::{
    asymptotic_green, green_mc_many, green_resolvent_many, green_series_many, Horizon, McOptions, MExponent,
    Method, ResolventOptions,
};
use crate::boundary;
use crate::error::{Error, Result};
use crate::process::ProcessSpec;

#[derive(Clone, Debug)]
pub enum CompareMethod {
    Series(Horizon),
    Resolvent(ResolventOptions),
    MonteCarlo(McOptions),
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub r: f64,
    pub x: Vec<i64>,
    pub method: Method,
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub asym: f64,
    pub ratio: f64,
}

/// `|G_c((0,i),(x,j)) - (phi_j / phi_i) e^{c.x} G((0,i),(x,j))|` from two series runs.
#[derive(Clone, Debug, Serialize)]
pub struct DoobResidual {
    pub r: f64,
    pub x: Vec<i64>,
    pub green: f64,
    pub green_transformed: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub i: usize,
    pub j: usize,
    pub rows: Vec<CompareRow>,
    pub doob: Vec<DoobResidual>,
}

/// Coordinate-wise rounding with ties toward `+inf`.
pub fn nearest_lattice_point(v: &[f64]) -> Vec<i64> {
    v.iter().map(|a| (a + 0.5).floor() as i64).collect()
}

pub fn compare(
    spec: &ProcessSpec,
    u: &[f64],
    radii: &[f64],
    i: usize,
    j: usize,
    methods: &[CompareMethod],
    exponent: MExponent,
    doob_horizon: Option<Horizon>,
) -> Result<Comparison> {
    let bp = boundary::boundary_point(spec, u)?;
    let points: Vec<Vec<i64>> = radii
        .iter()
        .map(|&r| nearest_lattice_point(&u.iter().map(|a| a * r).collect::<Vec<_>>()))
        .collect();
    if points.iter().any(|x| x.iter().all(|&v| v == 0)) {
        return Err(Error::Precondition("a radius rounds to the origin".into()));
    }
    let asym: Vec<f64> = points
        .par_iter()
        .map(|x| asymptotic_green(spec, i, x, j, exponent))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for method in methods {
        let estimates = match method {
            CompareMethod::Series(h) => {
                let targets: Vec<_> = points.iter().map(|x| (x.clone(), j)).collect();
                green_series_many(spec, i, &targets, *h)?
            }
            CompareMethod::Resolvent(o) => {
                let sources: Vec<_> = points.iter().map(|x| (i, x.clone())).collect();
                green_resolvent_many(spec, j, &sources, o)?
            }
            CompareMethod::MonteCarlo(o) => {
                let targets: Vec<_> = points.iter().map(|x| (x.clone(), j)).collect();
                green_mc_many(spec, i, &targets, o)?
            }
        };
        for (k, est) in estimates.into_iter().enumerate() {
            rows.push(CompareRow {
                r: radii[k],
                x: points[k].clone(),
                method: est.method,
                value: est.value,
                error: est.error,
                converged: est.converged,
                asym: asym[k],
                ratio: est.value / asym[k],
            });
        }
    }
    let doob = match doob_horizon {
        None => Vec::new(),
        Some(h) => {
            let t = boundary::doob_transform(spec, &bp.c)?;
            let targets: Vec<_> = points.iter().map(|x| (x.clone(), j)).collect();
            let (g, gc) = rayon::join(
                || green_series_many(spec, i, &targets, h),
                || green_series_many(&t.transformed, i, &targets, h),
            );
            let (g, gc) = (g?, gc?);
            radii
                .iter()
                .zip(&points)
                .zip(g.iter().zip(&gc))
                .map(|((&r, x), (g, gc))| {
                    let cx: f64 = bp.c.iter().zip(x).map(|(c, &v)| c * v as f64).sum();
                    DoobResidual {
                        r,
                        x: x.clone(),
                        green: g.value,
                        green_transformed: gc.value,
                        residual: (gc.value - t.phi[j] / t.phi[i] * cx.exp() * g.value).abs(),
                    }
                })
                .collect()
        }
    };
    Ok(Comparison {
        u: u.to_vec(),
        c: bp.c,
        i,
        j,
        rows,
        doob,
    })
}
