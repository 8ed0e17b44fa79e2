//! Cycle-lattice decision procedure for irreducibility and aperiodicity of
//! the full chain on `Z^d x {1..p}`.
//!
//! Every closed walk decomposes into simple cycles of the jump graph, and in
//! a strongly connected graph every simple cycle can be spliced into a walk
//! through a fixed base state. Hence, with `A` the set of (length,
//! displacement) vectors of labelled simple cycles:
//!
//! * the chain is irreducible iff the displacements of `A` generate `Z^d` as
//!   a group and positively span `R^d` (otherwise a half-space is never left);
//! * under irreducibility the period is the positive generator of
//!   `span_Z(A) ∩ (Z x {0})`, read off a Hermite normal form.

use crate::process::ProcessSpec;

const MAX_LABELLED_CYCLES: usize = 200_000;

#[derive(Clone, Debug)]
pub(crate) struct CycleAnalysis {
    pub cycle_count: usize,
    pub truncated: bool,
    pub generates_lattice: bool,
    /// Index of the displacement lattice in `Z^d` (0 when rank-deficient).
    pub lattice_index: i128,
    pub positively_spanning: bool,
    pub period: Option<u64>,
}

/// Simple cycles of a directed graph (self-loops included) as vertex
/// sequences, each rooted at its smallest vertex.
pub(crate) fn simple_cycles(adj: &[Vec<bool>], limit: usize) -> (Vec<Vec<usize>>, bool) {
    let n = adj.len();
    let mut out = Vec::new();
    let mut truncated = false;
    for start in 0..n {
        let mut path = vec![start];
        let mut on_path = vec![false; n];
        on_path[start] = true;
        // explicit DFS stack of next-neighbour cursors
        let mut cursor = vec![start];
        while let Some(&v) = path.last() {
            let c = cursor.last_mut().unwrap();
            if *c >= n {
                on_path[v] = false;
                path.pop();
                cursor.pop();
                continue;
            }
            let w = *c;
            *c += 1;
            if !adj[v][w] || w < start {
                continue;
            }
            if w == start {
                if out.len() >= limit {
                    truncated = true;
                    return (out, truncated);
                }
                out.push(path.clone());
            } else if !on_path[w] {
                on_path[w] = true;
                path.push(w);
                cursor.push(start);
            }
        }
    }
    (out, truncated)
}

pub(crate) fn analyze(spec: &ProcessSpec) -> CycleAnalysis {
    let d = spec.dim();
    let (cycles, mut truncated) = simple_cycles(&spec.adjacency(), MAX_LABELLED_CYCLES);

    // (displacement..., length) vectors of labelled cycles
    let mut labelled: Vec<Vec<i128>> = Vec::new();
    'outer: for cyc in &cycles {
        let edges: Vec<(usize, usize)> = (0..cyc.len()).map(|k| (cyc[k], cyc[(k + 1) % cyc.len()])).collect();
        let choices: Vec<Vec<Vec<i64>>> = edges
            .iter()
            .map(|&(a, b)| spec.jump(a, b).iter().map(|(x, _)| x.coords().to_vec()).collect())
            .collect();
        let mut idx = vec![0usize; edges.len()];
        loop {
            if labelled.len() >= MAX_LABELLED_CYCLES {
                truncated = true;
                break 'outer;
            }
            let mut v = vec![0i128; d + 1];
            for (e, &k) in idx.iter().enumerate() {
                for (t, &c) in choices[e][k].iter().enumerate() {
                    v[t] += c as i128;
                }
            }
            v[d] = edges.len() as i128;
            labelled.push(v);
            // odometer increment
            let mut e = 0;
            loop {
                if e == idx.len() {
                    break;
                }
                idx[e] += 1;
                if idx[e] < choices[e].len() {
                    break;
                }
                idx[e] = 0;
                e += 1;
            }
            if e == idx.len() {
                break;
            }
        }
    }

    let disp: Vec<Vec<i128>> = labelled.iter().map(|v| v[..d].to_vec()).collect();
    let hnf_disp = hermite_rows(&disp, d);
    let lattice_index = if hnf_disp.len() == d {
        hnf_disp.iter().enumerate().map(|(k, r)| r[k].abs()).product()
    } else {
        0
    };
    let generates_lattice = lattice_index == 1;
    let positively_spanning = positively_spans(&disp, d);

    let hnf_full = hermite_rows(&labelled, d + 1);
    let period = hnf_full
        .iter()
        .find(|r| r[..d].iter().all(|&v| v == 0) && r[d] != 0)
        .map(|r| r[d].unsigned_abs() as u64);

    CycleAnalysis {
        cycle_count: labelled.len(),
        truncated,
        generates_lattice,
        lattice_index,
        positively_spanning,
        period,
    }
}

/// Row echelon (Hermite-style) basis of the integer lattice spanned by `rows`.
/// Returned rows have strictly increasing pivot columns and positive pivots.
pub(crate) fn hermite_rows(rows: &[Vec<i128>], ncols: usize) -> Vec<Vec<i128>> {
    let mut work: Vec<Vec<i128>> = rows.iter().filter(|r| r.iter().any(|&v| v != 0)).cloned().collect();
    let mut basis = Vec::new();
    for col in 0..ncols {
        // gcd-reduce column `col` over all remaining rows
        loop {
            let nz: Vec<usize> = (0..work.len()).filter(|&k| work[k][col] != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            let piv = *nz.iter().min_by_key(|&&k| work[k][col].abs()).unwrap();
            let pivot_row = work[piv].clone();
            for &k in &nz {
                if k == piv {
                    continue;
                }
                let q = work[k][col].div_euclid(pivot_row[col]);
                for (a, b) in work[k].iter_mut().zip(&pivot_row) {
                    *a -= q * b;
                }
            }
        }
        if let Some(k) = (0..work.len()).find(|&k| work[k][col] != 0) {
            let mut r = work.swap_remove(k);
            if r[col] < 0 {
                r.iter_mut().for_each(|v| *v = -*v);
            }
            basis.push(r);
        }
        work.retain(|r| r.iter().any(|&v| v != 0));
    }
    basis
}

/// Whether the cone generated by `vecs` is all of `R^d`.
///
/// Assuming the vectors span `R^d`, the cone is proper iff some facet normal
/// (orthogonal to `d - 1` independent generators) sees every generator on one
/// side.
pub(crate) fn positively_spans(vecs: &[Vec<i128>], d: usize) -> bool {
    let mut uniq: Vec<Vec<i128>> = vecs.iter().filter(|v| v.iter().any(|&c| c != 0)).cloned().collect();
    uniq.sort();
    uniq.dedup();
    if hermite_rows(&uniq, d).len() < d {
        return false;
    }
    let one_sided = |normal: &[i128]| {
        let dots: Vec<i128> = uniq.iter().map(|v| v.iter().zip(normal).map(|(a, b)| a * b).sum()).collect();
        dots.iter().all(|&s| s >= 0) || dots.iter().all(|&s| s <= 0)
    };
    if d == 1 {
        return !one_sided(&[1]);
    }
    let mut subset = Vec::with_capacity(d - 1);
    !any_subset(&uniq, d - 1, 0, &mut subset, &mut |rows| {
        let normal = generalized_cross(rows, d);
        normal.iter().any(|&c| c != 0) && one_sided(&normal)
    })
}

fn any_subset<'a>(
    items: &'a [Vec<i128>],
    k: usize,
    from: usize,
    chosen: &mut Vec<&'a [i128]>,
    pred: &mut dyn FnMut(&[&[i128]]) -> bool,
) -> bool {
    if chosen.len() == k {
        return pred(chosen);
    }
    for t in from..items.len() {
        chosen.push(&items[t]);
        if any_subset(items, k, t + 1, chosen, pred) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Vector orthogonal to `d - 1` rows in `Z^d` via signed cofactors.
fn generalized_cross(rows: &[&[i128]], d: usize) -> Vec<i128> {
    (0..d)
        .map(|col| {
            let minor: Vec<Vec<i128>> = rows
                .iter()
                .map(|r| r.iter().enumerate().filter(|&(c, _)| c != col).map(|(_, &v)| v).collect())
                .collect();
            let sign = if col % 2 == 0 { 1 } else { -1 };
            sign * det(&minor)
        })
        .collect()
}

fn det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    match n {
        0 => 1,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<i128>> = m[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|&(k, _)| k != c).map(|(_, &v)| v).collect())
                    .collect();
                let s = if c % 2 == 0 { 1 } else { -1 };
                s * m[0][c] * det(&minor)
            })
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_cycles_of_triangle_with_loop() {
        let adj = vec![
            vec![true, true, false],
            vec![false, false, true],
            vec![true, false, false],
        ];
        let (cycles, truncated) = simple_cycles(&adj, 100);
        assert!(!truncated);
        assert_eq!(cycles, vec![vec![0], vec![0, 1, 2]]);
    }

    #[test]
    fn hermite_detects_index_two() {
        let rows = vec![vec![-1, 0], vec![1, 2]];
        let h = hermite_rows(&rows, 2);
        assert_eq!(h.len(), 2);
        assert_eq!(h[0][0].abs() * h[1][1].abs(), 2);
    }

    #[test]
    fn hermite_unimodular() {
        let rows = vec![vec![2, 1], vec![3, 2], vec![4, 4]];
        let h = hermite_rows(&rows, 2);
        assert_eq!(h[0][0] * h[1][1], 1);
    }

    #[test]
    fn cone_checks() {
        assert!(positively_spans(&[vec![1], vec![-1]], 1));
        assert!(!positively_spans(&[vec![1], vec![0]], 1));
        assert!(positively_spans(&[vec![1, 0], vec![0, 1], vec![-1, -1]], 2));
        assert!(!positively_spans(&[vec![1, 0], vec![0, 1], vec![-1, 1]], 2));
        assert!(!positively_spans(&[vec![1, 0], vec![-1, 0]], 2));
    }
}
