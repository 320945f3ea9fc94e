//! Limited-view photoacoustic tomography in two dimensions.
//!
//! The crate simulates wave boundary data for indicator phantoms on an
//! elliptical domain, learns an extension operator that maps data observed on
//! part of the boundary to the unobserved part, and reconstructs the initial
//! pressure with the universal back-projection formula.
//!
//! Pipeline: [`geometry`] discretizes the boundary, [`phantoms`] describes the
//! initial pressure, [`forward`] computes the boundary traces, [`extension`]
//! learns and applies the data extension, [`inversion`] back-projects and
//! [`metrics`] scores the result. [`io`] persists everything in a small
//! binary container.

pub mod error;
pub mod extension;
pub mod forward;
pub mod geometry;
pub mod inversion;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod phantoms;
pub mod quadrature;
mod vec2;

pub use error::{Error, Result};
pub use vec2::Vec2;
