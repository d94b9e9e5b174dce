//! Knowledge graphs over action classes, and a graph convolutional network
//! that regresses classifier weights for unseen classes from seen ones.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: dense/sparse matrices, Adam, finite-difference oracle.
//! * [`graph`]: cosine top-N adjacency (fully connected or bipartite) and
//!   symmetric normalisation `D̂^{-1/2}(I + A)D̂^{-1/2}`.
//! * [`lexicon`]: embedding tables, verb/noun decomposition of action
//!   phrases, split manifests and random splits.
//! * [`gcn`]: the network itself, analytic backprop, training and fusion.
//! * [`pipeline`]: graph assembly per experiment, targets, baselines,
//!   metrics and end-to-end runs.
//!
//! Shipped class lists, split manifests and lexicon tables are embedded and
//! available through [`lexicon::shipped`].

pub mod error;
pub mod gcn;
pub mod graph;
pub mod lexicon;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod selfcheck;

pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
