//! Effective constructions over two presentations of the reals.
//!
//! * [`exact`]: exact rationals, closed rational intervals and
//!   precision-indexed interval streams (the extensional reals).
//! * [`digits`]: signed binary digit sequences (the intensional reals),
//!   including the normalizer.
//! * [`kk`]: Kleene-Kreisel functionals of type level at most 2, their
//!   `n`-th approximations, the finite sets `X^k_n` and Grilliot moduli.
//! * [`embed`]: embeddings of type-1 and type-2 functionals into both real
//!   hierarchies, with partial inverses.
//! * [`lemma`]: the approximation lemma at type 1 and extension of
//!   functionals from closed sets.

pub mod digits;
pub mod embed;
mod error;
pub mod exact;
pub mod kk;
pub mod lemma;

pub use error::{Error, Result};
