//! Mean-field equation `-Delta u = rho (h e^u / int h e^u - 1)` on the flat
//! unit square torus: spectral calculus, Green function, the associated
//! functional, minimizers and blow-up diagnostics as `rho -> 8 pi`.

pub mod blowup;
pub mod error;
pub mod field;
pub mod functional;
pub mod green;
pub mod grid;
pub mod krylov;
pub mod prescribed;
pub mod quadrature;
pub mod snapshot;
pub mod solver;
pub mod spectral;
pub mod testfn;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use grid::{Point, TorusGrid};
pub use prescribed::PrescribedFunction;
