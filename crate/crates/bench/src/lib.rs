//! Fixtures shared by the benchmarks in `benches/`.

use gwlimits_core::{OffspringLaw, Rational, Tree};

pub fn binary() -> OffspringLaw<Rational> {
    OffspringLaw::from_strs(&["1/2", "0", "1/2"]).expect("valid law")
}

/// Subcritical power-law tail, `p(k) ∝ k^{-3}` for `k ≥ 1`.
pub fn heavy() -> OffspringLaw<f64> {
    OffspringLaw::with_tail(vec![0.5], None, 3.0, 1.0).expect("valid law")
}

/// The complete binary tree of the given height.
pub fn complete_binary(height: usize) -> Tree {
    let mut t = Tree::leaf();
    for _ in 0..height {
        t = Tree::from_children(&[t.clone(), t]);
    }
    t
}
