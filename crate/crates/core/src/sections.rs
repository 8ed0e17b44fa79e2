//! Changes of section and the energy matrix.
//!
//! A change of section `g` (one real `d`-vector per modulating state) moves
//! every atom `x` of `mu_ij` to `x + g_j - g_i` without touching its mass.
//! The appropriate section makes every row's summed drift equal to the
//! global drift; the energy matrix is the pi-weighted second moment of the
//! appropriately sectioned jumps.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::process::{self, JumpMeasure, LatticeVector, ProcessSpec};

/// Atom merge tolerance for shifted supports.
const MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SectionMatrix(DMatrix<f64>);

impl SectionMatrix {
    pub fn new(g: DMatrix<f64>) -> Self {
        SectionMatrix(g)
    }

    pub fn zeros(p: usize, d: usize) -> Self {
        SectionMatrix(DMatrix::zeros(p, d))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.0.row(i).transpose()
    }
}

/// Measure on `R^d` with finitely many atoms.
pub type RealMeasure = Vec<(DVector<f64>, f64)>;

#[derive(Clone, Debug)]
pub struct SectionedProcess {
    pub base: ProcessSpec,
    pub section: SectionMatrix,
    /// Row-major `p x p`.
    pub shifted_jumps: Vec<RealMeasure>,
}

impl SectionedProcess {
    pub fn jump(&self, i: usize, j: usize) -> &RealMeasure {
        &self.shifted_jumps[i * self.base.states() + j]
    }

    pub fn markov_matrix(&self) -> DMatrix<f64> {
        let p = self.base.states();
        DMatrix::from_fn(p, p, |i, j| self.jump(i, j).iter().map(|(_, w)| w).sum())
    }

    pub fn fourier(&self, theta: &[f64]) -> DMatrix<Complex64> {
        let p = self.base.states();
        let th = DVector::from_column_slice(theta);
        DMatrix::from_fn(p, p, |i, j| {
            self.jump(i, j).iter().map(|(x, w)| Complex64::from_polar(*w, x.dot(&th))).sum()
        })
    }

    /// `sum_j sum_x x mu^g_ij(x)` for every row `i`.
    pub fn row_drifts(&self) -> Vec<DVector<f64>> {
        let (p, d) = (self.base.states(), self.base.dim());
        (0..p)
            .map(|i| {
                (0..p).fold(DVector::zeros(d), |acc, j| {
                    self.jump(i, j).iter().fold(acc, |a, (x, w)| a + x * *w)
                })
            })
            .collect()
    }

    pub fn global_drift(&self) -> Result<DVector<f64>> {
        let pi = process::stationary_distribution(&self.base)?;
        Ok(self
            .row_drifts()
            .into_iter()
            .enumerate()
            .fold(DVector::zeros(self.base.dim()), |acc, (i, m)| acc + m * pi[i]))
    }

    /// Undo the shift, snapping supports back onto the lattice.
    pub fn unsection(&self) -> Result<ProcessSpec> {
        let p = self.base.states();
        let back = apply_real(self, &SectionMatrix(-self.section.matrix()));
        let mut jumps = Vec::with_capacity(p * p);
        for m in back {
            let mut atoms = Vec::with_capacity(m.len());
            for (x, w) in m {
                let snapped: Vec<i64> = x.iter().map(|v| v.round() as i64).collect();
                if x.iter().zip(&snapped).any(|(v, s)| (v - *s as f64).abs() > 1e-9) {
                    return Err(Error::Numeric(format!("shifted atom {x:?} does not return to the lattice")));
                }
                atoms.push((LatticeVector::new(snapped), w));
            }
            jumps.push(JumpMeasure::from_atoms(atoms)?);
        }
        ProcessSpec::new(self.base.dim(), p, jumps)
    }
}

fn check_dims(spec: &ProcessSpec, g: &SectionMatrix) -> Result<()> {
    let (r, c) = g.matrix().shape();
    if r != spec.states() || c != spec.dim() {
        return Err(Error::Precondition(format!(
            "section matrix is {r}x{c}, expected {}x{}",
            spec.states(),
            spec.dim()
        )));
    }
    Ok(())
}

fn merge(mut atoms: RealMeasure) -> RealMeasure {
    let mut out: RealMeasure = Vec::with_capacity(atoms.len());
    atoms.sort_by(|a, b| a.0.as_slice().partial_cmp(b.0.as_slice()).unwrap());
    for (x, w) in atoms {
        match out.last_mut() {
            Some((y, v)) if (&x - &*y).amax() <= MERGE_TOL => *v += w,
            _ => out.push((x, w)),
        }
    }
    out
}

fn apply_real(sp: &SectionedProcess, g: &SectionMatrix) -> Vec<RealMeasure> {
    let p = sp.base.states();
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let shift = g.row(j) - g.row(i);
            out.push(merge(sp.jump(i, j).iter().map(|(x, w)| (x + &shift, *w)).collect()));
        }
    }
    out
}

pub fn apply_section(spec: &ProcessSpec, g: &SectionMatrix) -> Result<SectionedProcess> {
    check_dims(spec, g)?;
    let p = spec.states();
    let mut shifted = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            let shift = g.row(j) - g.row(i);
            shifted.push(merge(
                spec.jump(i, j)
                    .iter()
                    .map(|(x, w)| (DVector::from_vec(x.to_f64()) + &shift, w))
                    .collect(),
            ));
        }
    }
    Ok(SectionedProcess {
        base: spec.clone(),
        section: g.clone(),
        shifted_jumps: shifted,
    })
}

/// Solves `(I - P) g = M - 1 m` with the last row of `g` pinned to zero.
pub fn appropriate_section(spec: &ProcessSpec) -> Result<SectionMatrix> {
    let moments = process::moments(spec)?;
    let (p, d) = (spec.states(), spec.dim());
    if p == 1 {
        return Ok(SectionMatrix::zeros(1, d));
    }
    let a = DMatrix::identity(p, p) - spec.markov_matrix();
    let mut rhs = DMatrix::zeros(p, d);
    for i in 0..p {
        let row_sum = (0..p).fold(DVector::zeros(d), |acc, j| acc + moments.local_drift(i, j));
        rhs.set_row(i, &(row_sum - &moments.global_drift).transpose());
    }
    // kernel is span(1): drop the last unknown and the (dependent) last equation
    let reduced = a.view((0, 0), (p - 1, p - 1)).into_owned();
    let reduced_rhs = rhs.rows(0, p - 1).into_owned();
    let sol = reduced
        .lu()
        .solve(&reduced_rhs)
        .ok_or_else(|| Error::Numeric("singular reduced system for the appropriate section".into()))?;
    let mut g = DMatrix::zeros(p, d);
    g.rows_mut(0, p - 1).copy_from(&sol);
    let residual = (&a * &g - &rhs).amax();
    let scale = rhs.amax().max(1.0);
    if residual > 1e-10 * scale {
        return Err(Error::Numeric(format!("section system inconsistent (residual {residual:e})")));
    }
    Ok(SectionMatrix(g))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyMatrix(DMatrix<f64>);

impl EnergyMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Energy matrix from an explicit section (which should be appropriate).
pub fn energy_matrix_with(spec: &ProcessSpec, g: &SectionMatrix) -> Result<EnergyMatrix> {
    let pi = process::stationary_distribution(spec)?;
    let sp = apply_section(spec, g)?;
    let (p, d) = (spec.states(), spec.dim());
    let mut sigma = DMatrix::zeros(d, d);
    for i in 0..p {
        for j in 0..p {
            for (x, w) in sp.jump(i, j) {
                sigma += x * x.transpose() * (pi[i] * w);
            }
        }
    }
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    if sigma.clone().cholesky().is_none() {
        return Err(Error::Numeric(
            "energy matrix is not positive-definite (support lies in a hyperplane)".into(),
        ));
    }
    Ok(EnergyMatrix(sigma))
}

pub fn energy_matrix(spec: &ProcessSpec) -> Result<EnergyMatrix> {
    energy_matrix_with(spec, &appropriate_section(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn zero_section_is_identity() {
        let spec = catalog::w2();
        let sp = apply_section(&spec, &SectionMatrix::zeros(2, 1)).unwrap();
        assert_eq!(sp.unsection().unwrap(), spec);
        assert_eq!(sp.shifted_jumps[1][0].0[0], 0.0);
    }

    #[test]
    fn w2_section_moves_off_diagonal_atoms() {
        let spec = catalog::w2();
        let g = SectionMatrix::new(DMatrix::from_row_slice(2, 1, &[11.0 / 6.0, 0.0]));
        let sp = apply_section(&spec, &g).unwrap();
        assert!((sp.jump(0, 1)[0].0[0] + 11.0 / 6.0).abs() < 1e-15);
        assert!((sp.jump(1, 0)[0].0[0] - 11.0 / 6.0).abs() < 1e-15);
        assert_eq!(sp.jump(0, 0)[0].0[0], 1.0);
        assert_eq!(sp.jump(1, 1).len(), 2);
    }

    #[test]
    fn constant_section_changes_nothing() {
        let spec = catalog::w2();
        let g = SectionMatrix::new(DMatrix::from_row_slice(2, 1, &[1.0, 1.0]));
        let sp = apply_section(&spec, &g).unwrap();
        let plain = apply_section(&spec, &SectionMatrix::zeros(2, 1)).unwrap();
        assert_eq!(sp.shifted_jumps, plain.shifted_jumps);
    }

    #[test]
    fn appropriate_section_examples() {
        assert_eq!(appropriate_section(&catalog::w1()).unwrap(), SectionMatrix::zeros(1, 1));
        assert_eq!(appropriate_section(&catalog::w3()).unwrap(), SectionMatrix::zeros(1, 2));
        let g = appropriate_section(&catalog::w2()).unwrap();
        assert!((g.matrix()[(0, 0)] - 11.0 / 6.0).abs() < 1e-13);
        assert_eq!(g.matrix()[(1, 0)], 0.0);
        let sp = apply_section(&catalog::w2(), &g).unwrap();
        for row in sp.row_drifts() {
            assert!((row[0] - 0.15).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_examples() {
        assert!((energy_matrix(&catalog::w1()).unwrap().matrix()[(0, 0)] - 0.7).abs() < 1e-15);
        let w2 = energy_matrix(&catalog::w2()).unwrap();
        assert!((w2.matrix()[(0, 0)] - (0.55 + 0.3 * 121.0 / 36.0)).abs() < 1e-13);
        let lazy = ProcessSpec::from_entries(1, 1, [(0, 0, vec![(vec![-1], 0.25), (vec![0], 0.5), (vec![1], 0.25)])]).unwrap();
        assert!((energy_matrix(&lazy).unwrap().matrix()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_support_is_rejected() {
        // every jump on the x-axis
        let spec = ProcessSpec::from_entries(2, 1, [(0, 0, vec![(vec![1, 0], 0.5), (vec![-1, 0], 0.5)])]).unwrap();
        assert!(matches!(energy_matrix(&spec), Err(Error::Numeric(_))));
    }

    #[test]
    fn mismatched_section_dims() {
        let r = apply_section(&catalog::w2(), &SectionMatrix::zeros(3, 1));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
