//! Frobenius gauges over truncated Witt vectors of finite fields.

pub mod bundles;
pub mod cris;
pub mod derham;
pub mod error;
pub mod field;
pub mod gauge;
pub mod json;
pub mod linalg;
pub mod phi_crystal;
pub mod report;
pub mod semisolve;
pub mod span;
pub mod witt;
pub mod zip_display;

pub use error::{Error, Result};
pub use field::{FqElem, Field};
pub use witt::{witt_structure_polynomials, IntPoly, StructurePolynomials, WittElem, WittRing};
pub use linalg::{Mat, SemilinearMap, WnModule};
pub use gauge::{Gauge, GaugeMorphism};
pub use phi_crystal::{DieudonneModule, PhiGauge, VirtualCrystal};
