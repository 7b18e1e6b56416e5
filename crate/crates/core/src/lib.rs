//! Galton–Watson trees conditioned on the number of vertices whose out-degree
//! lies in a set `A`, and their local limits.

pub mod degree_set;
pub mod derived;
pub mod error;
pub mod limit;
pub mod offspring;
pub mod probe;
pub mod projection;
pub mod sampler;
pub mod scalar;
pub mod series;
pub mod tree;
pub mod walk;

pub use degree_set::DegreeSet;
pub use error::{Error, Result};
pub use offspring::{AnyLaw, Classification, OffspringLaw, PStar, TiltDomain, TiltResult, Verdict};
pub use scalar::{Backend, Rational, Scalar};
pub use tree::{DegreeTag, NodeLabel, TPlusEvent, Tree, WindowedTree};
pub use derived::{DerivedLawBundle, Pmf, Regime};
pub use limit::{LimitKind, LimitLaw};
pub use walk::{DeltaOrder, LaWalk, Lattice, WalkTable};
pub use sampler::{SampleConfig, Target};
