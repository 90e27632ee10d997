//! Invertible randomness extractors assembled into wiretap encode/decode
//! protocols, with an exact brute-force verification harness.
//!
//! The crate is organized as a pipeline of small modules:
//!
//! * [`gf`] — finite-field arithmetic and linear algebra;
//! * [`dists`] — exact rational probability distributions (statistical
//!   distance, entropies, conditioning, pushforwards, duality);
//! * [`expander`] — labeled regular graphs, walks, and spectral estimation;
//! * [`sfext`] — the random-walk symbol-fixing extractor, its perfect
//!   inverter, and the modular-rounding variants;
//! * [`linext`] — strong linear seeded extractors with coset-sampling
//!   inversion;
//! * [`affext`] — affine extractors and the invertible composed construction;
//! * [`wiretap`] — wiretap protocols and their exact resilience verification;
//! * [`channels`] — error-correcting-code composition and general
//!   (side-channel) adversaries;
//! * [`netsim`] — linear network-coding simulation with edge wiretapping;
//! * [`cli`] — the `wiretap-kit` command-line front end.
//!
//! Everything that the verifiers measure is computed in exact big-rational
//! arithmetic; floating point appears only in entropy values, spectral
//! estimates, and rate formulas, where irrational values are unavoidable.

pub mod affext;
pub mod channels;
pub mod dists;
pub mod error;
pub mod expander;
pub mod linext;
pub mod netsim;
pub mod sfext;
pub mod gf;
pub mod wiretap;

pub use error::{Error, Result};
