//! Finite-support Markov-additive processes on `Z^d x {1..p}`.
//!
//! A process is described by its jump matrix: for every ordered pair of
//! modulating states `(i, j)` a finite sub-probability measure on `Z^d`
//! giving the law of the additive increment on a transition `i -> j`.
//! Rows of the matrix of total masses form the transition matrix of the
//! Markovian part.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cycles;
use crate::error::{Error, Result};
use crate::transforms;

/// Tolerance for row-stochasticity and stationary-vector checks.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Below this Euclidean norm the global drift is treated as zero.
pub const DRIFT_TOL: f64 = 1e-10;

/// A displacement in `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LatticeVector(Vec<i64>);

impl LatticeVector {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticeVector(coords)
    }

    pub fn zero(d: usize) -> Self {
        LatticeVector(vec![0; d])
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_inf(&self) -> i64 {
        self.0.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(&a, b)| a as f64 * b).sum()
    }

    pub fn sub(&self, other: &LatticeVector) -> LatticeVector {
        LatticeVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl From<Vec<i64>> for LatticeVector {
    fn from(v: Vec<i64>) -> Self {
        LatticeVector(v)
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Finite sub-probability measure on `Z^d`. Zero-mass atoms are never stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JumpMeasure {
    atoms: BTreeMap<LatticeVector, f64>,
}

impl JumpMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a measure, merging repeated displacements. Masses must be
    /// finite and non-negative.
    pub fn from_atoms<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (LatticeVector, f64)>,
    {
        let mut out = BTreeMap::new();
        for (x, w) in atoms {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::schema("prob", format!("mass {w} at {x} is not a finite non-negative number")));
            }
            *out.entry(x).or_insert(0.0) += w;
        }
        out.retain(|_, w| *w > 0.0);
        Ok(JumpMeasure { atoms: out })
    }

    /// Dirac mass `w` at `x` (empty if `w == 0`).
    pub fn dirac(x: impl Into<LatticeVector>, w: f64) -> Self {
        Self::from_atoms([(x.into(), w)]).expect("finite non-negative mass")
    }

    pub fn mass(&self) -> f64 {
        self.atoms.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeVector, f64)> {
        self.atoms.iter().map(|(x, &w)| (x, w))
    }

    pub fn get(&self, x: &LatticeVector) -> f64 {
        self.atoms.get(x).copied().unwrap_or(0.0)
    }
}

/// Jump matrix of a Markov-additive process.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessSpec {
    d: usize,
    p: usize,
    jumps: Vec<JumpMeasure>,
}

impl ProcessSpec {
    /// `jumps` is the row-major `p x p` jump matrix (0-based states).
    pub fn new(d: usize, p: usize, jumps: Vec<JumpMeasure>) -> Result<Self> {
        if d == 0 {
            return Err(Error::schema("d", "dimension must be positive"));
        }
        if p == 0 {
            return Err(Error::schema("p", "number of modulating states must be positive"));
        }
        if jumps.len() != p * p {
            return Err(Error::schema("jumps", format!("expected {} entries, got {}", p * p, jumps.len())));
        }
        for (k, m) in jumps.iter().enumerate() {
            for (x, _) in m.iter() {
                if x.dim() != d {
                    return Err(Error::schema(
                        "dx",
                        format!("atom {x} of jump ({}, {}) has length {}, expected {d}", k / p + 1, k % p + 1, x.dim()),
                    ));
                }
            }
        }
        for i in 0..p {
            let mass: f64 = (0..p).map(|j| jumps[i * p + j].mass()).sum();
            if (mass - 1.0).abs() > STRUCTURAL_TOL {
                return Err(Error::RowMass { row: i + 1, mass });
            }
        }
        Ok(ProcessSpec { d, p, jumps })
    }

    /// Convenience constructor from `(from, to, atoms)` triples with 0-based states.
    pub fn from_entries<I, A>(d: usize, p: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, A)>,
        A: IntoIterator<Item = (Vec<i64>, f64)>,
    {
        let mut raw: Vec<Vec<(LatticeVector, f64)>> = vec![Vec::new(); p * p];
        for (i, j, atoms) in entries {
            if i >= p || j >= p {
                return Err(Error::schema("from/to", format!("state pair ({}, {}) out of range 1..={p}", i + 1, j + 1)));
            }
            raw[i * p + j].extend(atoms.into_iter().map(|(x, w)| (LatticeVector::new(x), w)));
        }
        let jumps = raw.into_iter().map(JumpMeasure::from_atoms).collect::<Result<Vec<_>>>()?;
        Self::new(d, p, jumps)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn states(&self) -> usize {
        self.p
    }

    pub fn jump(&self, i: usize, j: usize) -> &JumpMeasure {
        &self.jumps[i * self.p + j]
    }

    pub fn jumps(&self) -> &[JumpMeasure] {
        &self.jumps
    }

    /// Transition matrix of the Markovian part (row masses of the jump matrix).
    pub fn markov_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |i, j| self.jump(i, j).mass())
    }

    /// Largest sup-norm of an atom in the support.
    pub fn max_jump(&self) -> i64 {
        self.jumps
            .iter()
            .flat_map(|m| m.iter().map(|(x, _)| x.norm_inf()))
            .max()
            .unwrap_or(0)
    }

    /// Adjacency of the Markovian part: `i -> j` iff the jump measure is nonempty.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        (0..self.p)
            .map(|i| (0..self.p).map(|j| !self.jump(i, j).is_empty()).collect())
            .collect()
    }
}

pub(crate) fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return false;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let edge = if forward { adj[v][w] } else { adj[w][v] };
                if edge && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// First and second order structural data of a process.
#[derive(Clone, Debug)]
pub struct MomentData {
    pub pi: DVector<f64>,
    /// Row-major `p x p`; entry `(i, j)` is `sum_x x mu_ij(x)`.
    pub local_drifts: Vec<DVector<f64>>,
    /// Row-major `p x p`; entry `(i, j)` is `sum_x x x^T mu_ij(x)`.
    pub second_moments: Vec<DMatrix<f64>>,
    pub global_drift: DVector<f64>,
}

impl MomentData {
    pub fn local_drift(&self, i: usize, j: usize) -> &DVector<f64> {
        let p = self.pi.len();
        &self.local_drifts[i * p + j]
    }

    pub fn second_moment(&self, i: usize, j: usize) -> &DMatrix<f64> {
        let p = self.pi.len();
        &self.second_moments[i * p + j]
    }
}

/// Stationary distribution of the Markovian part.
pub fn stationary_distribution(spec: &ProcessSpec) -> Result<DVector<f64>> {
    if !strongly_connected(&spec.adjacency()) {
        return Err(Error::Precondition("Markovian part is reducible; no unique stationary distribution".into()));
    }
    let p = spec.states();
    let pm = spec.markov_matrix();
    // (P^T - I) pi^T = 0, last equation replaced by sum(pi) = 1.
    let mut a = pm.transpose() - DMatrix::identity(p, p);
    let mut b = DVector::zeros(p);
    for k in 0..p {
        a[(p - 1, k)] = 1.0;
    }
    b[p - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numeric("singular system for the stationary distribution".into()))?;
    if pi.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numeric(format!("stationary vector has non-positive entries: {pi:?}")));
    }
    let residual = (pi.transpose() * &pm - pi.transpose()).amax();
    if residual > STRUCTURAL_TOL {
        return Err(Error::Numeric(format!("stationary residual {residual:e} above tolerance")));
    }
    Ok(pi)
}

pub fn moments(spec: &ProcessSpec) -> Result<MomentData> {
    let pi = stationary_distribution(spec)?;
    let (d, p) = (spec.dim(), spec.states());
    let mut local_drifts = Vec::with_capacity(p * p);
    let mut second_moments = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let mut m = DVector::zeros(d);
            let mut s = DMatrix::zeros(d, d);
            for (x, w) in spec.jump(i, j).iter() {
                let v = DVector::from_vec(x.to_f64());
                m += &v * w;
                s += &v * v.transpose() * w;
            }
            local_drifts.push(m);
            second_moments.push(s);
        }
    }
    let mut global_drift = DVector::zeros(d);
    for i in 0..p {
        for j in 0..p {
            global_drift += &local_drifts[i * p + j] * pi[i];
        }
    }
    Ok(MomentData {
        pi,
        local_drifts,
        second_moments,
        global_drift,
    })
}

/// Outcome of the structural assumption checks.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub rows_stochastic: bool,
    pub markov_irreducible: bool,
    pub full_chain_irreducible: bool,
    pub aperiodic: bool,
    pub non_centered: bool,
    /// Gcd of the return times to a fixed state, when returns exist.
    pub period: Option<u64>,
    /// Max spectral radius of the Fourier transform on a coarse torus grid
    /// away from 0; below 1 certifies aperiodicity on that grid.
    pub spectral_max: Option<f64>,
    pub cycle_count: usize,
    pub cycles_truncated: bool,
    pub diagnostics: Vec<String>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.rows_stochastic && self.markov_irreducible && self.full_chain_irreducible && self.aperiodic && self.non_centered
    }
}

/// Coarse grid sizes for the spectral cross-check; larger dimensions skip it.
fn certificate_grid(d: usize) -> Option<usize> {
    match d {
        1 => Some(201),
        2 => Some(61),
        3 => Some(17),
        _ => None,
    }
}

pub fn validate(spec: &ProcessSpec) -> ValidationReport {
    let p = spec.states();
    let mut diagnostics = Vec::new();
    let rows_stochastic = (0..p).all(|i| {
        let mass: f64 = (0..p).map(|j| spec.jump(i, j).mass()).sum();
        (mass - 1.0).abs() <= STRUCTURAL_TOL
    });
    let markov_irreducible = strongly_connected(&spec.adjacency());
    if !markov_irreducible {
        diagnostics.push("jump graph of the Markovian part is not strongly connected".into());
    }

    let analysis = cycles::analyze(spec);
    if analysis.truncated {
        diagnostics.push(format!(
            "cycle enumeration truncated at {} labelled cycles; cone test used the enumerated subset",
            analysis.cycle_count
        ));
    }
    let full_chain_irreducible = markov_irreducible && analysis.generates_lattice && analysis.positively_spanning;
    if markov_irreducible && !analysis.generates_lattice {
        diagnostics.push(format!(
            "cycle displacements generate a sublattice of index {} in Z^{}",
            analysis.lattice_index,
            spec.dim()
        ));
    }
    if markov_irreducible && !analysis.positively_spanning {
        diagnostics.push("cycle displacements lie in a closed half-space; some directions are unreachable".into());
    }
    let aperiodic = full_chain_irreducible && analysis.period == Some(1);
    if let Some(g) = analysis.period {
        if g != 1 {
            diagnostics.push(format!("return times to a fixed state have gcd {g}"));
        }
    } else if markov_irreducible {
        diagnostics.push("no zero-displacement closed walk exists".into());
    }

    let non_centered = match moments(spec) {
        Ok(m) => {
            let n = m.global_drift.norm();
            if n <= DRIFT_TOL {
                diagnostics.push("global drift vanishes (centered process)".into());
            }
            n > DRIFT_TOL
        }
        Err(e) => {
            diagnostics.push(format!("moments unavailable: {e}"));
            false
        }
    };

    let spectral_max = if full_chain_irreducible {
        certificate_grid(spec.dim()).map(|n| transforms::spectral_scan(spec, n).max_radius)
    } else {
        None
    };
    if let Some(r) = spectral_max {
        let spectral_ok = r < 1.0 - 1e-9;
        if spectral_ok != aperiodic {
            diagnostics.push(format!(
                "spectral scan max {r:.12} disagrees with the cycle-lattice verdict (aperiodic = {aperiodic})"
            ));
        }
    }

    ValidationReport {
        rows_stochastic,
        markov_irreducible,
        full_chain_irreducible,
        aperiodic,
        non_centered,
        period: analysis.period,
        spectral_max,
        cycle_count: analysis.cycle_count,
        cycles_truncated: analysis.truncated,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_mass_atoms_are_stripped() {
        let m = JumpMeasure::from_atoms([(LatticeVector::new(vec![1]), 0.0), (LatticeVector::new(vec![2]), 0.5)]).unwrap();
        assert_eq!(m.len(), 1);
        assert!(JumpMeasure::dirac(vec![0], 0.0).is_empty());
    }

    #[test]
    fn duplicate_atoms_merge() {
        let m = JumpMeasure::from_atoms([(vec![1].into(), 0.25), (vec![1].into(), 0.25)]).unwrap();
        assert_eq!(m.len(), 1);
        assert_abs_diff_eq!(m.mass(), 0.5);
    }

    #[test]
    fn negative_mass_rejected() {
        assert!(JumpMeasure::from_atoms([(LatticeVector::new(vec![1]), -0.1)]).is_err());
    }

    #[test]
    fn row_mass_error_names_row() {
        let err = ProcessSpec::from_entries(1, 2, [
            (0, 0, vec![(vec![1], 0.5), (vec![0], 0.5)]),
            (1, 1, vec![(vec![0], 0.9)]),
        ])
        .unwrap_err();
        assert_eq!(err, Error::RowMass { row: 2, mass: 0.9 });
    }

    #[test]
    fn dimension_mismatch_is_schema_error() {
        let err = ProcessSpec::from_entries(2, 1, [(0, 0, vec![(vec![1], 1.0)])]).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_distribution(&catalog::w1()).unwrap();
        assert_abs_diff_eq!(pi[0], 1.0, epsilon = 1e-15);
        let pi = stationary_distribution(&catalog::w2()).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-14);
        let pi = stationary_distribution(&catalog::sublattice()).unwrap();
        for (a, b) in pi.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn stationary_rejects_reducible_part() {
        let spec = ProcessSpec::from_entries(1, 2, [
            (0, 0, vec![(vec![1], 0.5)]),
            (0, 1, vec![(vec![0], 0.5)]),
            (1, 1, vec![(vec![1], 1.0)]),
        ])
        .unwrap();
        assert!(matches!(stationary_distribution(&spec), Err(Error::Precondition(_))));
    }

    #[test]
    fn moment_examples() {
        let m = moments(&catalog::w1()).unwrap();
        assert_abs_diff_eq!(m.global_drift[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m.second_moment(0, 0)[(0, 0)], 0.7, epsilon = 1e-15);

        let m = moments(&catalog::w2()).unwrap();
        assert_abs_diff_eq!(m.global_drift[0], 0.15, epsilon = 1e-14);

        let m = moments(&catalog::w3()).unwrap();
        assert_abs_diff_eq!(m.global_drift[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.global_drift[1], 0.0, epsilon = 1e-15);
        let s = m.second_moment(0, 0);
        assert_abs_diff_eq!(s[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(1, 1)], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn validate_examples() {
        for spec in [catalog::w1(), catalog::w2(), catalog::w3()] {
            let r = validate(&spec);
            assert!(r.all_ok(), "{r:?}");
            assert_eq!(r.period, Some(1));
            assert!(r.spectral_max.unwrap() < 1.0);
        }
        let r = validate(&catalog::sublattice());
        assert!(r.markov_irreducible);
        assert!(!r.full_chain_irreducible);

        let r = validate(&catalog::simple_periodic());
        assert!(r.full_chain_irreducible);
        assert!(!r.aperiodic);
        assert_eq!(r.period, Some(2));
        assert!(!r.non_centered);
    }

    #[test]
    fn one_sided_walk_is_not_irreducible() {
        let spec = ProcessSpec::from_entries(1, 1, [(0, 0, vec![(vec![0], 0.5), (vec![1], 0.5)])]).unwrap();
        let r = validate(&spec);
        assert!(!r.full_chain_irreducible);
    }
}
