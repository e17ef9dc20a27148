//! Negative dependence of finite point processes.
//!
//! Builds mixed sampled processes (a random number `tau` of iid points
//! dropped into a finite partition) and finite determinantal processes,
//! computes their exact joint count laws, and checks negative association,
//! ultra log-concavity, the (strong) Rayleigh property and the Poisson
//! comparison bounds that follow from them.

pub mod closure;
pub mod dependence_check;
pub mod discrete_laws;
pub mod error;
pub mod harness;
pub mod multiaffine;
pub mod numeric;
pub mod ordering;
pub mod pointproc;
pub mod sturm;

pub use error::{Error, Result};
