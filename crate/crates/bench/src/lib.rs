//! Benchmark inputs shared by the criterion targets.

use madd_core::{catalog, ProcessSpec};

/// The three reference processes with their names.
pub fn reference_specs() -> Vec<(&'static str, ProcessSpec)> {
    vec![("w1", catalog::w1()), ("w2", catalog::w2()), ("w3", catalog::w3())]
}
