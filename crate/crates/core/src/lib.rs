//! Dyadic-lattice analytics for porous sets: free-cube decompositions,
//! Carleson packing constants, well-sparse witnesses, Dyn'kin sums,
//! weighted-measure enclosures and codimension estimates, all at finite depth
//! with exact rational arithmetic.

pub mod analysis;
pub mod error;
pub mod families;
pub mod gamma;
pub mod interval;
pub mod inverse;
pub mod lattice;
pub mod random;
pub mod rational;
pub mod sets;
pub mod sparse;

pub use error::{Error, Result};
pub use families::{CubeFamily, FreeDecomposition, Provenance};
pub use gamma::{embedding_check, gamma_carleson, gamma_witness, EmbeddingQuery, GammaReport};
pub use interval::Interval;
pub use inverse::{chain, check_parent_closed, invert, InverseReport};
pub use lattice::{AxisBox, DyadicCube, Relation};
pub use rational::Rational;
pub use sets::{corner_set, SetModel, Status};
pub use sparse::{build_witness, carleson_constant, verify_witness, CarlesonReport, SparseWitness};
