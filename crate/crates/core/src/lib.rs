//! pnix: sparsity-aware Boolean retrieval over an inverted index.
//!
//! Queries are directed acyclic graphs of `and`/`or`/`not` operators over term
//! leaves, so shared sub-expressions are written (and evaluated) once. The
//! evaluator represents every intermediate result as a [`pn::PNResponse`]: a
//! materialized doc-id set plus a polarity flag saying whether the set *is*
//! the result or its complement. Negation becomes a flag flip, and the cost of
//! every operator depends on the operand sets only — the universe is touched
//! at most once, at the very end.
//!
//! The crate also ships:
//!
//! - [`circuit`]: a gadget library that lowers arithmetic constraints
//!   (weighted sums, thresholds, bit-sliced field comparisons) to query dags
//!   via ripple-carry adders and magnitude comparators;
//! - [`baselines`]: reference evaluators (per-document oracle, naive
//!   term-at-a-time, simulated document-at-a-time over unrolled trees) and the
//!   circuit-value-problem reduction, used as ground truth;
//! - [`mod@bench`]: synthetic corpus generation and the scaling experiments
//!   that separate the engine from the baselines.
//!
//! Core types are generic over the unsigned integer used for document ids
//! (see [`DocInt`]); [`DocId`] is the concrete width used by the CLI and the
//! benchmark harness.

use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_traits::{PrimInt, Unsigned};

pub mod baselines;
pub mod bench;
pub mod circuit;
pub mod dag;
pub mod eval;
pub mod index;
pub mod pn;

pub use dag::{DagError, NodeId, NormalizedDag, QueryDag, QueryNode};
pub use eval::{compute_pn, EvalOptions, EvalReport};
pub use index::{build_index, IndexBuilder, IndexError, InvertedIndex, PostingList};
pub use pn::{CostCounters, PNResponse, Polarity};

/// Unsigned integer type usable as a document identifier.
///
/// Document ids are dense, so the index only needs the type to cover its
/// universe size; merge kernels, the evaluator, and the baselines are generic
/// over it.
pub trait DocInt:
    PrimInt + Unsigned + Hash + Debug + Display + Send + Sync + 'static
{
}

impl<T> DocInt for T where
    T: PrimInt + Unsigned + Hash + Debug + Display + Send + Sync + 'static
{
}

/// Document id width used by the CLI and the benchmark harness.
pub type DocId = u32;

/// Inverted index over [`DocId`].
pub type Index32 = InvertedIndex<u32>;

/// Inverted index for universes beyond `u32::MAX` documents.
pub type Index64 = InvertedIndex<u64>;

/// Widens a doc id to `u64`.
#[inline]
pub fn doc_to_u64<D: DocInt>(d: D) -> u64 {
    d.to_u64().expect("doc id fits in u64")
}

/// Narrows a `u64` to the doc id type.
///
/// Panics when the value does not fit; callers validate universe bounds up
/// front (see [`IndexError::UniverseOverflow`]).
#[inline]
pub fn doc_from_u64<D: DocInt>(v: u64) -> D {
    D::from(v).expect("doc id out of range for the doc id type")
}
