//! Small reference processes with known closed-form behaviour.

use crate::process::ProcessSpec;

/// Lazy skip-free walk on `Z`: `0.2 δ_{-1} + 0.3 δ_0 + 0.5 δ_{+1}`.
pub fn w1() -> ProcessSpec {
    ProcessSpec::from_entries(1, 1, [(0, 0, vec![(vec![-1], 0.2), (vec![0], 0.3), (vec![1], 0.5)])])
        .expect("valid reference process")
}

/// Two-state modulated walk on `Z` with global drift 0.15.
pub fn w2() -> ProcessSpec {
    ProcessSpec::from_entries(1, 2, [
        (0, 0, vec![(vec![1], 0.7)]),
        (0, 1, vec![(vec![0], 0.3)]),
        (1, 0, vec![(vec![0], 0.3)]),
        (1, 1, vec![(vec![-1], 0.4), (vec![0], 0.3)]),
    ])
    .expect("valid reference process")
}

/// Planar nearest-neighbour walk with drift `(0.2, 0)`.
pub fn w3() -> ProcessSpec {
    ProcessSpec::from_entries(2, 1, [(0, 0, vec![
        (vec![1, 0], 0.4),
        (vec![-1, 0], 0.2),
        (vec![0, 1], 0.15),
        (vec![0, -1], 0.15),
        (vec![0, 0], 0.1),
    ])])
    .expect("valid reference process")
}

/// Three-state planar process whose cycle displacements only generate an
/// index-2 sublattice: irreducible Markovian part, reducible full chain.
pub fn sublattice() -> ProcessSpec {
    ProcessSpec::from_entries(2, 3, [
        (0, 0, vec![(vec![-1, 0], 0.75)]),
        (0, 1, vec![(vec![1, 1], 0.25)]),
        (1, 2, vec![(vec![0, 1], 1.0)]),
        (2, 0, vec![(vec![0, 0], 1.0)]),
    ])
    .expect("valid reference process")
}

/// Simple symmetric walk `0.5 δ_{-1} + 0.5 δ_{+1}`: period 2, centered.
pub fn simple_periodic() -> ProcessSpec {
    ProcessSpec::from_entries(1, 1, [(0, 0, vec![(vec![-1], 0.5), (vec![1], 0.5)])]).expect("valid reference process")
}

pub fn by_name(name: &str) -> Option<ProcessSpec> {
    match name {
        "w1" => Some(w1()),
        "w2" => Some(w2()),
        "w3" => Some(w3()),
        "sublattice" => Some(sublattice()),
        "simple-periodic" => Some(simple_periodic()),
        _ => None,
    }
}
