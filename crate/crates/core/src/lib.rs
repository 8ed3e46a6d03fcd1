//! Nonstationary convolution kernels for discrete linguistic structures.
//!
//! The crate compares tuple paths and labeled trees with convolution
//! kernels whose tuple similarity is gated by one binary weight per edge
//! label, builds approximate k-nearest-neighbor graphs with kernelized
//! locality-sensitive hashing, classifies with k-NN votes, and learns the
//! binary weights by stochastic coordinate descent on a 1-NN loss.
//!
//! ```
//! use nskernel::corpus::{PathStructure, Structure, TupleLabel};
//! use nskernel::kernels::{KernelConfig, KernelEngine, SigmaMap};
//!
//! let path = |tuples: &[(&str, &str)]| -> Structure {
//!     PathStructure::new(tuples.iter().map(|(e, n)| TupleLabel::edge(e, n)).collect())
//!         .unwrap()
//!         .into()
//! };
//! let a = path(&[("arg0", "ras"), ("arg1", "raf")]);
//! let b = path(&[("arg0", "ras"), ("arg1", "mek")]);
//!
//! let baseline = KernelEngine::baseline(KernelConfig::default()).unwrap();
//! assert!((baseline.structure_kernel(&a, &b) - 0.64).abs() < 1e-12);
//!
//! // Switching off `arg0` removes the only shared tuple.
//! let skip = baseline.with_sigma(SigmaMap::new().with("arg0", 0));
//! assert_eq!(skip.structure_kernel(&a, &b), 0.0);
//! ```

pub mod corpus;
pub mod error;
pub mod kernels;
pub mod klsh;
pub mod learn;
pub mod neighbors;
pub mod rng_stream;
pub mod stats;
pub mod symbol;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/structures.md")]
    mod structures {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/nonstationary.md")]
    mod nonstationary {}
    #[doc = include_str!("../../../book/src/hashing.md")]
    mod hashing {}
    #[doc = include_str!("../../../book/src/neighbors.md")]
    mod neighbors {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
}
