//! Local differential privacy for dense text representations.
//!
//! Each user z-scores their embedding vector, encodes every coordinate as a
//! sign/integer/fraction fixed-point code, concatenates the codes into one
//! bit vector and randomizes it before release. The server only ever sees
//! randomized bits and trains a small classifier on them.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. File formats, orchestration and the CLI live in the `ldprepr`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bits;
pub mod codec;
mod error;
pub mod ldp;
pub mod model;
pub mod rng;

pub use bits::BitVector;
pub use codec::{CodecLayout, EmbeddingVector};
pub use error::{Error, Result};
pub use rng::RngSeed;
