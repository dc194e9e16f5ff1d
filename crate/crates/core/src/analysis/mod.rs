//! Porosity scans, Dyn'kin and `D_E` sums, weighted-measure enclosures and
//! codimension estimates.

pub mod codim;
pub mod measure;
pub mod porosity;
pub mod sums;
pub mod weighted;

pub use codim::{alpha_range, codim_estimate, CodimEstimate};
pub use measure::{mu_cube, mu_enclosure, mu_enclosure_with, MeasureEnclosure, MuOptions};
pub use porosity::{largest_free_cube, porosity_scan, PorosityReport};
pub use sums::{de_sum, dynkin_sum, multiplicity_check, sum_sweep, SumReport};
pub use weighted::{weighted_carleson_sum, WeightedCarlesonReport};
