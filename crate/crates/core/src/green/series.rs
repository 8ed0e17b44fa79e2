use serde_json::json;

use super::{check_target, require_transient, GreenEstimate, Method};
use crate::error::{Error, Result};
use crate::process::ProcessSpec;
use crate::walk::Propagator;
use crate::{boundary, transforms};

const TAIL_WINDOW: usize = 10;
const PRUNE_2D: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    /// Sum the terms `n = 0..=N`.
    Steps(usize),
    /// Stop once the estimated error is below `tol` times the value.
    Tolerance { tol: f64, max_steps: usize },
}

impl Horizon {
    fn max_steps(self) -> usize {
        match self {
            Horizon::Steps(n) => n,
            Horizon::Tolerance { max_steps, .. } => max_steps,
        }
    }
}

/// Tail estimate from the decay of the last terms, `None` when they do not decay.
fn tail_bound(terms: &[f64]) -> Option<f64> {
    if terms.len() < TAIL_WINDOW + 1 {
        return None;
    }
    let last = &terms[terms.len() - TAIL_WINDOW - 1..];
    if last.iter().all(|&t| t == 0.0) {
        // zero window after the target was hit: mass left for good
        return terms.iter().any(|&t| t > 0.0).then_some(0.0);
    }
    let mut ratio: f64 = 0.0;
    for w in last.windows(2) {
        if w[0] <= 0.0 {
            return None;
        }
        ratio = ratio.max(w[1] / w[0]);
    }
    if ratio >= 1.0 {
        return None;
    }
    // term ratios creep up towards their limit, so the plain geometric tail
    // slightly underestimates; doubling it keeps the estimate on the safe side
    Some(2.0 * last[TAIL_WINDOW] * ratio / (1.0 - ratio))
}

struct Tracker {
    x: Vec<i64>,
    j: usize,
    sum: f64,
    terms: Vec<f64>,
    /// Bound on the visits lost with pruned mass.
    pruned: f64,
}

impl Tracker {
    fn error(&self, steps: usize) -> Option<f64> {
        let tail = tail_bound(&self.terms)?;
        Some(tail + self.pruned + steps as f64 * 4.0 * f64::EPSILON * self.sum)
    }
}

/// Upper bound on `G((y,k),(x,j))` from the minimizer `c` of `rho`:
/// `P_k(Z_n = x - y, J_n = j) <= e^{c.(y-x)} (phi_k / phi_j) rho^n`, and
/// `G((y,k),(x,j)) <= G((x,j),(x,j)) <= 1 / (1 - rho)`.
struct VisitBound {
    c: Vec<f64>,
    rho: f64,
    phi: Vec<f64>,
}

impl VisitBound {
    fn new(spec: &ProcessSpec) -> Result<VisitBound> {
        let (c, rho) = boundary::rho_minimizer(spec)?;
        if !(rho < 1.0) {
            return Err(Error::Numeric(format!("min rho = {rho} is not below 1")));
        }
        let phi = transforms::perron_triple(&transforms::laplace(spec, &c))?.right;
        Ok(VisitBound { c, rho, phi })
    }

    fn visits(&self, k: usize, y: &[i64], x: &[i64], j: usize) -> f64 {
        let e: f64 = self.c.iter().zip(y.iter().zip(x)).map(|(c, (&a, &b))| c * (a - b) as f64).sum();
        (self.phi[k] / self.phi[j] * e.exp()).min(1.0) / (1.0 - self.rho)
    }
}

/// `sum_{n <= N} (mu^{*n})_{ij}(x)`.
pub fn green_series(spec: &ProcessSpec, i: usize, x: &[i64], j: usize, horizon: Horizon) -> Result<GreenEstimate> {
    Ok(green_series_many(spec, i, &[(x.to_vec(), j)], horizon)?.remove(0))
}

/// Series values for several targets `(x, j)` from one propagation started at `(0, i)`.
pub fn green_series_many(spec: &ProcessSpec, i: usize, targets: &[(Vec<i64>, usize)], horizon: Horizon) -> Result<Vec<GreenEstimate>> {
    require_transient(spec)?;
    for (x, j) in targets {
        check_target(spec, i, x, *j)?;
    }
    if let Horizon::Tolerance { tol, .. } = horizon {
        if !(tol > 0.0) {
            return Err(Error::Precondition("series tolerance must be positive".into()));
        }
    }
    let prune = if spec.dim() == 1 { 0.0 } else { PRUNE_2D };
    let mut walk = Propagator::new(spec, i, prune);
    let mut trackers: Vec<Tracker> = targets
        .iter()
        .map(|(x, j)| Tracker {
            x: x.clone(),
            j: *j,
            sum: 0.0,
            terms: Vec::new(),
            pruned: 0.0,
        })
        .collect();
    let bound = if prune > 0.0 { Some(VisitBound::new(spec)?) } else { None };
    let record = |walk: &Propagator, trackers: &mut [Tracker]| {
        for t in trackers.iter_mut() {
            let a = walk.mass_at(&t.x, t.j);
            t.sum += a;
            t.terms.push(a);
            if let Some(b) = &bound {
                t.pruned += walk
                    .last_pruned()
                    .iter()
                    .map(|(k, y, m)| m * b.visits(*k, y, &t.x, t.j))
                    .sum::<f64>();
            }
        }
    };
    record(&walk, &mut trackers);
    let max_steps = horizon.max_steps();
    let mut reached = false;
    while walk.steps() < max_steps {
        walk.step();
        record(&walk, &mut trackers);
        if let Horizon::Tolerance { tol, .. } = horizon {
            if walk.steps() % TAIL_WINDOW == 0 {
                let done = trackers.iter().all(|t| {
                    t.sum > 0.0
                        && t.error(walk.steps())
                            .is_some_and(|e| e <= tol * t.sum)
                });
                if done {
                    reached = true;
                    break;
                }
            }
        }
    }
    let steps = walk.steps();
    Ok(trackers
        .into_iter()
        .map(|t| {
            let err = t.error(steps);
            let converged = match horizon {
                Horizon::Steps(_) => err.is_some(),
                Horizon::Tolerance { tol, .. } => reached || (t.sum > 0.0 && err.is_some_and(|e| e <= tol * t.sum)),
            };
            GreenEstimate {
                value: t.sum,
                method: Method::Series,
                error: err.unwrap_or(f64::INFINITY),
                converged,
                params: json!({
                    "steps": steps,
                    "prune": prune,
                    "pruned_mass": walk.pruned_mass(),
                    "tolerance": match horizon { Horizon::Tolerance { tol, .. } => Some(tol), _ => None },
                }),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn skip_free_values() {
        let w1 = catalog::w1();
        let g = green_series(&w1, 0, &[5], 0, Horizon::Steps(500)).unwrap();
        assert!((g.value - 10.0 / 3.0).abs() < 1e-4, "{g:?}");
        assert!(g.converged && g.error < 1e-10);
        let g = green_series(&w1, 0, &[-3], 0, Horizon::Steps(500)).unwrap();
        assert!((g.value - 10.0 / 3.0 * 0.4f64.powi(3)).abs() < 1e-4);
    }

    #[test]
    fn diagonal_at_least_one() {
        for spec in [catalog::w1(), catalog::w2(), catalog::w3()] {
            for i in 0..spec.states() {
                let x = vec![0; spec.dim()];
                assert!(green_series(&spec, i, &x, i, Horizon::Steps(50)).unwrap().value >= 1.0);
            }
        }
    }

    #[test]
    fn tolerance_mode_stops_early() {
        let g = green_series(&catalog::w1(), 0, &[2], 0, Horizon::Tolerance { tol: 1e-10, max_steps: 5000 }).unwrap();
        assert!(g.converged);
        assert!(g.params["steps"].as_u64().unwrap() < 5000);
        assert!((g.value - 10.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn short_horizon_is_flagged() {
        let g = green_series(&catalog::w1(), 0, &[30], 0, Horizon::Tolerance { tol: 1e-12, max_steps: 20 }).unwrap();
        assert!(!g.converged);
    }

    #[test]
    fn centered_rejected() {
        assert!(matches!(
            green_series(&catalog::simple_periodic(), 0, &[0], 0, Horizon::Steps(10)),
            Err(Error::Precondition(_))
        ));
    }
}
