//! Reeb-graph averaging and large-deviation tools for small-noise planar
//! Hamiltonian systems observed on intermediate time scales.

pub mod action;
pub mod coeffs;
pub mod field;
pub mod grid;
pub mod ldp;
pub mod ode;
pub mod oracle;
pub mod poly;
pub mod quad;
pub mod reeb;
pub mod sde;
