//! Time-critical dynamic influence diagrams.
//!
//! Condensed models are validated and parsed in [`model`], unrolled into
//! slice-indexed influence diagrams by [`deploy`], solved exactly by
//! [`solve`], simplified by [`abstraction`], and ranked under time pressure
//! by [`metareason`].

pub mod abstraction;
pub mod deploy;
pub mod generate;
pub mod json;
pub mod metareason;
pub mod model;
pub mod numfmt;
pub mod solve;
