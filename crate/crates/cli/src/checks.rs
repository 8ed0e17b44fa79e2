//! The invariant battery behind `madd checks`.

use madd_core::green::{self, Horizon, McOptions, ResolventOptions, ResolventScheme};
use madd_core::{boundary, fd, process, sections, transforms, MExponent, ProcessSpec, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, r: Result<(bool, String)>) -> CheckOutcome {
    let (passed, detail) = r.unwrap_or_else(|e| (false, e.to_string()));
    CheckOutcome {
        check: name.to_string(),
        passed,
        detail,
    }
}

fn scan_size(d: usize) -> usize {
    match d {
        1 => 401,
        2 => 101,
        _ => 21,
    }
}

fn grid_size(d: usize) -> usize {
    match d {
        1 => 1024,
        2 => 256,
        _ => 32,
    }
}

pub fn run_checks(spec: &ProcessSpec) -> Vec<CheckOutcome> {
    let d = spec.dim();
    let p = spec.states();
    let mut out = Vec::new();

    let report = process::validate(spec);
    out.push(outcome(
        "assumptions",
        Ok((report.all_ok(), format!("{report:?}"))),
    ));
    if !report.all_ok() {
        // later checks presuppose an irreducible, aperiodic, non-centered process
        return out;
    }

    out.push(outcome(
        "k_derivatives",
        transforms::k_derivative_check(spec).map(|c| {
            let ok = c.gradient_residual < 1e-6 && c.hessian_residual < 1e-6;
            (ok, format!("gradient residual {:e}, hessian residual {:e}", c.gradient_residual, c.hessian_residual))
        }),
    ));

    out.push(outcome(
        "rho_derivatives",
        (|| {
            let r = boundary::rho_eval(spec, &vec![0.0; d])?;
            let m = process::moments(spec)?.global_drift;
            let sigma = sections::energy_matrix(spec)?.into_inner();
            let (eg, eh) = ((&r.grad - m).amax(), (&r.hess - sigma).amax());
            Ok((eg < 1e-6 && eh < 1e-6, format!("|grad - m| = {eg:e}, |H - sigma| = {eh:e}")))
        })(),
    ));

    out.push(outcome("spectral_scan", {
        let s = transforms::spectral_scan(spec, scan_size(d));
        Ok((
            s.max_radius < 1.0 - 1e-9,
            format!("max radius {} at {:?} on {}^{d} points", s.max_radius, s.argmax, s.grid_points),
        ))
    }));

    let trace = boundary::boundary_trace(spec, if d == 1 { 2 } else { 16 });
    let m_hat = process::moments(spec).map(|m| {
        let n = m.global_drift.norm();
        m.global_drift / n
    });
    out.push(outcome(
        "hennequin",
        (|| {
            let trace = trace.clone()?;
            let m_hat = m_hat.clone()?;
            let mut worst: f64 = 0.0;
            let mut ok = true;
            for e in &trace {
                worst = worst.max(e.roundtrip_residual);
                let along: f64 = e.point.u.iter().zip(m_hat.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let cu: f64 = e.point.c.iter().zip(&e.point.u).map(|(a, b)| a * b).sum();
                if along > 1e-9 && cu <= 0.0 {
                    ok = false;
                }
            }
            Ok((ok && worst < 1e-8, format!("max |Gamma(c(u)) - u| = {worst:e} over {} directions", trace.len())))
        })(),
    ));

    out.push(outcome(
        "doob_transform",
        (|| {
            let trace = trace.clone()?;
            let (mut rows, mut drift) = (0.0f64, 0.0f64);
            for e in &trace {
                let t = boundary::doob_transform(spec, &e.point.c)?;
                rows = rows.max(t.stochastic_residual);
                let f = |y: &[f64]| boundary::spectral_radius(spec, y);
                let g = fd::real_gradient(&f, &e.point.c)?;
                let m_c = process::moments(&t.transformed)?.global_drift;
                drift = drift.max((g - m_c).amax());
                sections::energy_matrix(&t.transformed)?;
            }
            Ok((rows < 1e-12 && drift < 1e-6, format!("row residual {rows:e}, |m_c - grad rho| = {drift:e}")))
        })(),
    ));

    let dirs = boundary::directions(d, if d == 1 { 2 } else { 4 });
    let mut targets_j = vec![0];
    if p > 1 {
        targets_j.push(p - 1);
    }
    out.push(outcome(
        "doob_conjugation",
        (|| {
            let mut worst: f64 = 0.0;
            for u in &dirs {
                for &j in &targets_j {
                    let cmp = green::compare(
                        spec,
                        u,
                        &[1.0, 3.0, 5.0],
                        0,
                        j,
                        &[],
                        MExponent::Derived,
                        Some(Horizon::Tolerance { tol: 1e-8, max_steps: 5000 }),
                    )?;
                    worst = cmp.doob.iter().map(|r| r.residual).fold(worst, f64::max);
                }
            }
            Ok((worst < 1e-6, format!("max residual {worst:e}")))
        })(),
    ));

    out.push(outcome(
        "method_agreement",
        (|| {
            let mut lines = Vec::new();
            let mut ok = true;
            let mut points = vec![vec![0i64; d]];
            points.extend(dirs.iter().map(|u| green::nearest_lattice_point(&u.iter().map(|a| 3.0 * a).collect::<Vec<_>>())));
            let res_opts = ResolventOptions {
                grid: grid_size(d),
                scheme: ResolventScheme::Tilted { shift: None },
                tol: 1e-6,
            };
            let radius = points.iter().map(|x| x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()).fold(0.0, f64::max);
            let mc_opts = McOptions {
                n_paths: 20_000,
                horizon: green::suggested_horizon(spec, radius)?,
                seed: 1,
            };
            for &j in &targets_j {
                let targets: Vec<_> = points.iter().map(|x| (x.clone(), j)).collect();
                let sources: Vec<_> = points.iter().map(|x| (0, x.clone())).collect();
                let s = green::green_series_many(spec, 0, &targets, Horizon::Tolerance { tol: 1e-8, max_steps: 5000 })?;
                let r = green::green_resolvent_many(spec, j, &sources, &res_opts)?;
                let m = green::green_mc_many(spec, 0, &targets, &mc_opts)?;
                for k in 0..points.len() {
                    let dr = (s[k].value - r[k].value).abs();
                    let dm = (s[k].value - m[k].value).abs();
                    let good = dr <= s[k].error + r[k].error && dm <= 3.0 * m[k].error;
                    ok &= good;
                    if !good {
                        lines.push(format!(
                            "x = {:?}, j = {}: series {} resolvent {} mc {} +- {}",
                            points[k],
                            j + 1,
                            s[k].value,
                            r[k].value,
                            m[k].value,
                            m[k].error
                        ));
                    }
                }
            }
            let detail = if lines.is_empty() { format!("{} points agree", 2 * points.len()) } else { lines.join("; ") };
            Ok((ok, detail))
        })(),
    ));
    out
}
