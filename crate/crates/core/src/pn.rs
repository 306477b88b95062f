//! The positive/negative response algebra.
//!
//! A [`PNResponse`] is a materialized doc-id set `S` plus a [`Polarity`]:
//! `Pos` means the value it denotes is `S` itself, `Neg` means it is `U \ S`
//! for whatever universe `U` the caller evaluates under. Negation flips the
//! flag in O(1); conjunction and disjunction reduce to one sorted-list merge
//! per node, chosen by the operand polarities:
//!
//! | l ∧ r       | result            | | l ∨ r       | result            |
//! |-------------|-------------------| |-------------|-------------------|
//! | POS ∧ POS   | ⟨L ∩ R, POS⟩      | | POS ∨ POS   | ⟨L ∪ R, POS⟩      |
//! | POS ∧ NEG   | ⟨L \ R, POS⟩      | | POS ∨ NEG   | ⟨R \ L, NEG⟩      |
//! | NEG ∧ POS   | ⟨R \ L, POS⟩      | | NEG ∨ POS   | ⟨L \ R, NEG⟩      |
//! | NEG ∧ NEG   | ⟨L ∪ R, NEG⟩      | | NEG ∨ NEG   | ⟨L ∩ R, NEG⟩      |
//!
//! Every output set is a subset of `L ∪ R`, so no operation ever introduces
//! doc ids that were not present in its operands, and none of them reads the
//! universe size. That is the whole sparsity argument: intermediate work is
//! bounded by the active posting lists, not the collection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::index::PostingList;
use crate::{doc_from_u64, DocInt};

/// Interpretation flag of a [`PNResponse`] set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    /// The set is the denoted value.
    Pos,
    /// The denoted value is the universe minus the set.
    Neg,
}

impl Polarity {
    pub fn flipped(self) -> Polarity {
        match self {
            Polarity::Pos => Polarity::Neg,
            Polarity::Neg => Polarity::Pos,
        }
    }
}

/// Instrumentation for one evaluation.
///
/// `element_touches` counts doc ids consumed from operand sets by the merge
/// kernels plus leaf materializations; output writes track reads within a
/// constant factor and are not double-counted, which keeps the per-node bound
/// at `2 · |U_active|`. The final complement against the universe (NEG root
/// only) is charged to `finalization_touches`, never to `element_touches`.
///
/// Counters live in the evaluation context, not in globals, so concurrent
/// evaluations never share instrumentation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    /// Doc ids read from operand sets.
    pub element_touches: u64,
    /// Dag nodes evaluated.
    pub node_visits: u64,
    /// Largest materialized set produced for any single node.
    pub max_materialized: u64,
    /// Cost of materializing `U \ S_root` when the root is negative.
    pub finalization_touches: u64,
}

impl CostCounters {
    /// Folds counters from a sub-computation into this one.
    pub fn absorb(&mut self, other: &CostCounters) {
        self.element_touches += other.element_touches;
        self.node_visits += other.node_visits;
        self.max_materialized = self.max_materialized.max(other.max_materialized);
        self.finalization_touches += other.finalization_touches;
    }

    pub(crate) fn note_set(&mut self, len: usize) {
        self.max_materialized = self.max_materialized.max(len as u64);
    }
}

/// Materialized doc-id set plus its interpretation flag.
///
/// The set is shared behind an `Arc` so that flipping polarity — and handing
/// one child's response to several parents — never copies doc ids.
#[derive(Clone, Debug, PartialEq)]
pub struct PNResponse<D> {
    set: Arc<PostingList<D>>,
    polarity: Polarity,
}

impl<D: DocInt> PNResponse<D> {
    pub fn new(set: PostingList<D>, polarity: Polarity) -> Self {
        PNResponse {
            set: Arc::new(set),
            polarity,
        }
    }

    pub fn pos(set: PostingList<D>) -> Self {
        Self::new(set, Polarity::Pos)
    }

    pub fn neg(set: PostingList<D>) -> Self {
        Self::new(set, Polarity::Neg)
    }

    pub fn set(&self) -> &PostingList<D> {
        &self.set
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    /// Materializes the denoted set under a concrete universe.
    pub fn semantics(&self, universe_size: u64) -> PostingList<D> {
        match self.polarity {
            Polarity::Pos => (*self.set).clone(),
            Polarity::Neg => complement(&self.set, universe_size),
        }
    }
}

/// Sorted-merge union of two strictly ascending slices.
pub fn set_union<D: DocInt>(a: &[D], b: &[D], counters: &mut CostCounters) -> PostingList<D> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    counters.element_touches += (a.len() + b.len()) as u64;
    counters.note_set(out.len());
    PostingList::from_sorted(out)
}

/// Sorted-merge intersection; stops as soon as either side is exhausted.
pub fn set_intersect<D: DocInt>(a: &[D], b: &[D], counters: &mut CostCounters) -> PostingList<D> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    counters.element_touches += (i + j) as u64;
    counters.note_set(out.len());
    PostingList::from_sorted(out)
}

/// Sorted-merge difference `a \ b`.
pub fn set_difference<D: DocInt>(a: &[D], b: &[D], counters: &mut CostCounters) -> PostingList<D> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    counters.element_touches += (a.len() + j) as u64;
    counters.note_set(out.len());
    PostingList::from_sorted(out)
}

/// Negation: flip the flag, share the set. Zero element touches.
pub fn pn_not<D: DocInt>(c: &PNResponse<D>) -> PNResponse<D> {
    PNResponse {
        set: Arc::clone(&c.set),
        polarity: c.polarity.flipped(),
    }
}

/// Conjunction of two responses (case table in the module docs).
pub fn pn_and<D: DocInt>(
    l: &PNResponse<D>,
    r: &PNResponse<D>,
    counters: &mut CostCounters,
) -> PNResponse<D> {
    use Polarity::{Neg, Pos};
    match (l.polarity, r.polarity) {
        (Pos, Pos) => PNResponse::pos(set_intersect(l.set(), r.set(), counters)),
        (Pos, Neg) => PNResponse::pos(set_difference(l.set(), r.set(), counters)),
        (Neg, Pos) => PNResponse::pos(set_difference(r.set(), l.set(), counters)),
        // De Morgan: (U \ L) ∩ (U \ R) = U \ (L ∪ R)
        (Neg, Neg) => PNResponse::neg(set_union(l.set(), r.set(), counters)),
    }
}

/// Disjunction of two responses (case table in the module docs).
pub fn pn_or<D: DocInt>(
    l: &PNResponse<D>,
    r: &PNResponse<D>,
    counters: &mut CostCounters,
) -> PNResponse<D> {
    use Polarity::{Neg, Pos};
    match (l.polarity, r.polarity) {
        (Pos, Pos) => PNResponse::pos(set_union(l.set(), r.set(), counters)),
        // L ∪ (U \ R) = U \ (R \ L)
        (Pos, Neg) => PNResponse::neg(set_difference(r.set(), l.set(), counters)),
        (Neg, Pos) => PNResponse::neg(set_difference(l.set(), r.set(), counters)),
        // De Morgan: (U \ L) ∪ (U \ R) = U \ (L ∩ R)
        (Neg, Neg) => PNResponse::neg(set_intersect(l.set(), r.set(), counters)),
    }
}

/// Complement of a sorted set against the universe `[0, universe_size)`.
pub fn complement<D: DocInt>(set: &[D], universe_size: u64) -> PostingList<D> {
    let mut out = Vec::with_capacity((universe_size as usize).saturating_sub(set.len()));
    let mut next = set.iter().copied().peekable();
    for v in 0..universe_size {
        let d = doc_from_u64::<D>(v);
        if next.peek() == Some(&d) {
            next.next();
        } else {
            out.push(d);
        }
    }
    PostingList::from_sorted(out)
}

/// Opt-in re-polarization: when the materialized set covers more than half of
/// the universe, flip to the smaller complement representation. Costs one
/// universe scan, so no core operation applies it by default.
pub fn shrink<D: DocInt>(
    r: &PNResponse<D>,
    universe_size: u64,
    counters: &mut CostCounters,
) -> PNResponse<D> {
    if (r.set.len() as u64) * 2 > universe_size {
        counters.element_touches += universe_size;
        let comp = complement(r.set(), universe_size);
        counters.note_set(comp.len());
        PNResponse::new(comp, r.polarity.flipped())
    } else {
        r.clone()
    }
}
