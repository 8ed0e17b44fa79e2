//! Markov-additive processes on `Z^d x {1..p}`: transforms, spectral
//! radius boundary, Doob transforms and Green function asymptotics.
//!
//! ```
//! use madd_core::{catalog, green, MExponent};
//!
//! let w1 = catalog::w1();
//! let g = green::green_series(&w1, 0, &[5], 0, green::Horizon::Steps(500)).unwrap();
//! assert!((g.value - 10.0 / 3.0).abs() < 1e-4);
//! let a = green::asymptotic_green(&w1, 0, &[5], 0, MExponent::Derived).unwrap();
//! assert!((a - 10.0 / 3.0).abs() < 1e-9);
//! ```

pub mod boundary;
pub mod catalog;
mod cycles;
pub mod error;
pub mod fd;
pub mod green;
pub mod io;
mod linalg;
pub mod process;
pub mod sections;
pub mod transforms;
mod walk;

pub use nalgebra;
pub use boundary::{BoundaryPoint, DoobTransform, RhoEvaluation};
pub use error::{Error, Result};
pub use green::{AsymptoticCoefficient, GreenEstimate, MExponent, Method};
pub use process::{JumpMeasure, LatticeVector, MomentData, ProcessSpec, ValidationReport};
pub use sections::{EnergyMatrix, SectionMatrix, SectionedProcess};
pub use transforms::{ComplexMatrix, PerronTriple, ScanReport, SpectralDecomposition};
