//! Critical Gagliardo–Nirenberg, Trudinger–Moser and Brezis–Gallouët–Wainger
//! inequalities on homogeneous groups: constants, ground states, empirical
//! verification and the Heisenberg model.

pub mod constants;
pub mod discretization;
pub mod error;
pub mod ground_state;
pub mod group_model;
pub mod heisenberg;
pub mod quadrature;
pub mod rational_line;
pub mod scalar;
pub mod spectral;
pub mod verifier;

pub use error::{Error, Result};

/// Double-precision instances of the generic types.
pub type Grid = discretization::PeriodicGrid<f64>;
pub type Field = discretization::Field<f64>;
pub type Operator = spectral::SpectralOperator<f64>;
pub type Params = constants::GNParams<f64>;
