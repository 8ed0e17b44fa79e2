//! Visit counting along simulated paths.
//!
//! Path `k` draws from `ChaCha8Rng` seeded with `seed` on stream `k`, so the
//! result does not depend on how paths are spread over threads. Counts are
//! accumulated as integers, which makes the reduction order irrelevant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::{check_target, require_transient, GreenEstimate, Method};
use crate::error::{Error, Result};
use crate::process::{self, ProcessSpec};
use crate::sections;

const CHUNK: usize = 1024;

#[derive(Clone, Debug)]
pub struct McOptions {
    pub n_paths: usize,
    /// Steps per path; visits at times `0..=horizon` are counted.
    pub horizon: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            n_paths: 100_000,
            horizon: 500,
            seed: 1,
        }
    }
}

/// Path length after which the walk sits, along its drift, six standard
/// deviations beyond distance `radius`; visits to targets within `radius`
/// later than that are negligible.
pub fn suggested_horizon(spec: &ProcessSpec, radius: f64) -> Result<usize> {
    let m = process::moments(spec)?.global_drift.norm();
    if m <= crate::process::DRIFT_TOL {
        return Err(Error::Precondition("non-centered assumption (Assumption 2) fails: zero drift".into()));
    }
    let sigma = sections::energy_matrix(spec)?.into_inner();
    let s = sigma.symmetric_eigenvalues().max();
    let root = (6.0 * s.sqrt() + (36.0 * s + 4.0 * m * radius.max(0.0)).sqrt()) / (2.0 * m);
    Ok((root * root).ceil() as usize)
}

/// Per-state cumulative transition table.
struct Sampler {
    cdf: Vec<Vec<f64>>,
    moves: Vec<Vec<(usize, Vec<i64>)>>,
}

impl Sampler {
    fn new(spec: &ProcessSpec) -> Sampler {
        let p = spec.states();
        let mut cdf = vec![Vec::new(); p];
        let mut moves = vec![Vec::new(); p];
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                for (x, w) in spec.jump(i, j).iter() {
                    acc += w;
                    cdf[i].push(acc);
                    moves[i].push((j, x.coords().to_vec()));
                }
            }
            // rows sum to one up to rounding; make the last bucket absorb it
            if let Some(last) = cdf[i].last_mut() {
                *last = f64::INFINITY;
            }
        }
        Sampler { cdf, moves }
    }

    fn draw(&self, state: usize, u: f64) -> &(usize, Vec<i64>) {
        let k = self.cdf[state].partition_point(|&c| c <= u);
        &self.moves[state][k]
    }
}

fn dist_inf(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// States and positions of one path of `steps` steps from `(0, i)`, using stream 0 of `seed`.
pub fn sample_path(spec: &ProcessSpec, i: usize, steps: usize, seed: u64) -> Result<Vec<(usize, Vec<i64>)>> {
    check_target(spec, i, &vec![0; spec.dim()], i)?;
    let sampler = Sampler::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut state = i;
    let mut pos = vec![0i64; spec.dim()];
    let mut out = vec![(state, pos.clone())];
    for _ in 0..steps {
        let (next, dx) = sampler.draw(state, rng.random::<f64>());
        state = *next;
        pos.iter_mut().zip(dx).for_each(|(a, b)| *a += b);
        out.push((state, pos.clone()));
    }
    Ok(out)
}

pub fn green_mc(spec: &ProcessSpec, i: usize, x: &[i64], j: usize, opts: &McOptions) -> Result<GreenEstimate> {
    Ok(green_mc_many(spec, i, &[(x.to_vec(), j)], opts)?.remove(0))
}

/// Monte Carlo estimates for several targets from the same paths.
pub fn green_mc_many(spec: &ProcessSpec, i: usize, targets: &[(Vec<i64>, usize)], opts: &McOptions) -> Result<Vec<GreenEstimate>> {
    require_transient(spec)?;
    for (x, j) in targets {
        check_target(spec, i, x, *j)?;
    }
    if opts.n_paths < 2 {
        return Err(Error::Precondition("Monte Carlo needs at least two paths".into()));
    }
    let d = spec.dim();
    let max_jump = spec.max_jump();
    let horizon = opts.horizon as i64;
    let origin = vec![0i64; d];
    // targets out of reach within the horizon are exactly zero
    let live: Vec<usize> = (0..targets.len())
        .filter(|&t| dist_inf(&targets[t].0, &origin) <= horizon.saturating_mul(max_jump))
        .collect();
    let sampler = Sampler::new(spec);
    let n_chunks = opts.n_paths.div_ceil(CHUNK);
    let partial: Vec<(Vec<u64>, Vec<u128>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut sum = vec![0u64; live.len()];
            let mut sq = vec![0u128; live.len()];
            let mut visits = vec![0u64; live.len()];
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(opts.n_paths);
            let mut pos = vec![0i64; d];
            for path in start..end {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(path as u64);
                pos.iter_mut().for_each(|v| *v = 0);
                let mut state = i;
                visits.iter_mut().for_each(|v| *v = 0);
                for n in 0..=opts.horizon {
                    let mut nearest = i64::MAX;
                    for (slot, &t) in live.iter().enumerate() {
                        let (tx, tj) = &targets[t];
                        let dist = dist_inf(tx, &pos);
                        if dist == 0 && *tj == state {
                            visits[slot] += 1;
                        }
                        nearest = nearest.min(dist);
                    }
                    let remaining = (opts.horizon - n) as i64;
                    if n == opts.horizon || nearest > remaining.saturating_mul(max_jump) {
                        break;
                    }
                    let (next, dx) = sampler.draw(state, rng.random::<f64>());
                    state = *next;
                    for a in 0..d {
                        pos[a] += dx[a];
                    }
                }
                for s in 0..live.len() {
                    sum[s] += visits[s];
                    sq[s] += visits[s] as u128 * visits[s] as u128;
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = vec![0u64; live.len()];
    let mut sq = vec![0u128; live.len()];
    for (s, q) in partial {
        for k in 0..live.len() {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let n = opts.n_paths as f64;
    let params = json!({"n_paths": opts.n_paths, "horizon": opts.horizon, "seed": opts.seed});
    let mut out: Vec<GreenEstimate> = (0..targets.len())
        .map(|_| GreenEstimate {
            value: 0.0,
            method: Method::MonteCarlo,
            error: 0.0,
            converged: true,
            params: params.clone(),
        })
        .collect();
    for (k, &t) in live.iter().enumerate() {
        let mean = sum[k] as f64 / n;
        let var = ((sq[k] as f64 - sum[k] as f64 * mean) / (n - 1.0)).max(0.0);
        // a sample with no visits still leaves an uncertainty of order 1/n
        let se = (var / n).sqrt().max(1.0 / n);
        out[t].value = mean;
        out[t].error = se;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn w1_visits() {
        let g = green_mc(&catalog::w1(), 0, &[5], 0, &McOptions { n_paths: 20_000, horizon: 500, seed: 7 }).unwrap();
        assert!((g.value - 10.0 / 3.0).abs() < 4.0 * g.error, "{g:?}");
        assert!(g.error < 0.05);
    }

    #[test]
    fn horizon_rule() {
        // W1: drift 0.3, energy 0.7, radius 5
        let n = suggested_horizon(&catalog::w1(), 5.0).unwrap();
        assert!((300..330).contains(&n), "{n}");
        let n2 = suggested_horizon(&catalog::w2(), 3.0).unwrap();
        assert!(n2 > 2000, "{n2}");
    }

    #[test]
    fn reproducible() {
        let o = McOptions { n_paths: 3000, horizon: 100, seed: 42 };
        let a = green_mc(&catalog::w2(), 0, &[2], 1, &o).unwrap();
        let b = green_mc(&catalog::w2(), 0, &[2], 1, &o).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.error.to_bits(), b.error.to_bits());
    }

    #[test]
    fn unreachable_is_zero() {
        let g = green_mc(&catalog::w3(), 0, &[50, 0], 0, &McOptions { n_paths: 100, horizon: 20, seed: 1 }).unwrap();
        assert_eq!(g.value, 0.0);
        assert_eq!(g.error, 0.0);
    }

    #[test]
    fn path_moves_by_atoms() {
        let path = sample_path(&catalog::w1(), 0, 50, 9).unwrap();
        assert_eq!(path.len(), 51);
        for w in path.windows(2) {
            assert!((w[1].1[0] - w[0].1[0]).abs() <= 1);
        }
    }

    #[test]
    fn origin_counts_time_zero() {
        let g = green_mc(&catalog::w1(), 0, &[0], 0, &McOptions { n_paths: 100, horizon: 10, seed: 3 }).unwrap();
        assert!(g.value >= 1.0);
    }
}
