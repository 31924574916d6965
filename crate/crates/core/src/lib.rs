//! Linear bilevel programming through single-level reformulations.
//!
//! The follower's LP is replaced by its KKT conditions ([`reform`]); the
//! complementarity pairs are then either linearized with big-M constants and
//! solved as a MILP ([`milp`]), or resolved exactly by enumerating all
//! complementarity patterns ([`oracle`]). The [`tuner`] module runs the common
//! trial-and-error procedure for choosing the constants and checks what it
//! accepts against the exact answer; [`genlab`] generates random instances and
//! measures how often that procedure is fooled.

pub mod error;
pub mod fmt;
pub mod genlab;
pub mod lp;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod reform;
pub mod settings;
pub mod tuner;

pub use error::{Error, Result};
pub use settings::{Settings, SimplexOptions};
