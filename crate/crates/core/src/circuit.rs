//! Lowers arithmetic and threshold constraints to query dags.
//!
//! The building blocks are classic digital-logic gadgets expressed with
//! `and`/`or`/`not` over term leaves: XOR, full adders chained into
//! ripple-carry adders, magnitude comparators with shared equality prefixes,
//! popcount-based thresholds, and bit-sliced field/constant comparisons.
//! The [`DagBuilder`] hash-conses every requested node and folds constants,
//! so repeated gadgets share structure instead of duplicating it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dag::{NodeId, NormalizedDag, QueryDag, QueryNode};

/// Default cap on adder widths in [`DagBuilder::weighted_sum_gt`].
pub const DEFAULT_MAX_SUM_WIDTH: u32 = 32;

/// Weights above this are rejected; keeps products inside `u64` arithmetic.
pub const MAX_WEIGHT: u64 = 1 << 30;

#[derive(thiserror::Error, Debug)]
pub enum CircuitError {
    #[error("weighted sum needs {needed} result bits but the maximum width is {max}")]
    WidthOverflow { needed: u32, max: u32 },
    #[error("constant {constant} does not fit in {width} bits")]
    ConstantWidth { constant: u64, width: u32 },
    #[error("bit width {0} exceeds 64")]
    WidthTooLarge(u32),
    #[error("weighted term {term:?} has zero weight")]
    ZeroWeight { term: String },
    #[error("weight {weight} of term {term:?} is too large (max {MAX_WEIGHT})")]
    WeightTooLarge { term: String, weight: u64 },
    #[error("weighted sum requires at least one term on each side")]
    EmptySide,
}

/// A term with the integer weight it contributes to a weighted sum.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: u64,
}

impl WeightedTerm {
    pub fn new(term: impl Into<String>, weight: u64) -> Self {
        WeightedTerm {
            term: term.into(),
            weight,
        }
    }
}

/// Little-endian vector of dag nodes interpreted as the bits of an unsigned
/// number; per document, bit `i` is set iff the document satisfies `bits[i]`.
#[derive(Clone, Debug)]
pub struct BitVec {
    bits: Vec<NodeId>,
}

impl BitVec {
    pub fn from_bits(bits: Vec<NodeId>) -> Self {
        BitVec { bits }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[NodeId] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> Option<NodeId> {
        self.bits.get(i).copied()
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Shape {
    Term(String),
    True,
    False,
    Not(NodeId),
    // children stored sorted, matching the CSE canonicalization
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
}

/// Accumulates a dag bottom-up. Structurally identical requests return the
/// same node id (hash-consing), children always exist before parents (so the
/// result is acyclic by construction), and trivial identities over constants
/// and equal operands are folded on the spot.
#[derive(Default)]
pub struct DagBuilder {
    nodes: Vec<QueryNode>,
    cache: HashMap<Shape, NodeId>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of nodes created so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn intern(&mut self, shape: Shape) -> NodeId {
        if let Some(&id) = self.cache.get(&shape) {
            return id;
        }
        let node = match &shape {
            Shape::Term(t) => QueryNode::Term(t.clone()),
            Shape::True => QueryNode::ConstTrue,
            Shape::False => QueryNode::ConstFalse,
            Shape::Not(c) => QueryNode::Not(*c),
            Shape::And(a, b) => QueryNode::And(vec![*a, *b]),
            Shape::Or(a, b) => QueryNode::Or(vec![*a, *b]),
        };
        let id = NodeId::new(self.nodes.len() as u32);
        self.nodes.push(node);
        self.cache.insert(shape, id);
        id
    }

    fn check(&self, id: NodeId) {
        assert!(
            id.index() < self.nodes.len(),
            "node id {id} does not belong to this builder"
        );
    }

    fn is_true(&self, id: NodeId) -> bool {
        self.nodes[id.index()] == QueryNode::ConstTrue
    }

    fn is_false(&self, id: NodeId) -> bool {
        self.nodes[id.index()] == QueryNode::ConstFalse
    }

    pub fn term(&mut self, t: &str) -> NodeId {
        self.intern(Shape::Term(t.to_string()))
    }

    pub fn const_true(&mut self) -> NodeId {
        self.intern(Shape::True)
    }

    pub fn const_false(&mut self) -> NodeId {
        self.intern(Shape::False)
    }

    pub fn const_bool(&mut self, v: bool) -> NodeId {
        if v {
            self.const_true()
        } else {
            self.const_false()
        }
    }

    pub fn not(&mut self, a: NodeId) -> NodeId {
        self.check(a);
        if self.is_true(a) {
            return self.const_false();
        }
        if self.is_false(a) {
            return self.const_true();
        }
        if let QueryNode::Not(inner) = self.nodes[a.index()] {
            return inner;
        }
        self.intern(Shape::Not(a))
    }

    pub fn and(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.check(a);
        self.check(b);
        if a == b {
            return a;
        }
        if self.is_false(a) || self.is_false(b) {
            return self.const_false();
        }
        if self.is_true(a) {
            return b;
        }
        if self.is_true(b) {
            return a;
        }
        self.intern(Shape::And(a.min(b), a.max(b)))
    }

    pub fn or(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.check(a);
        self.check(b);
        if a == b {
            return a;
        }
        if self.is_true(a) || self.is_true(b) {
            return self.const_true();
        }
        if self.is_false(a) {
            return b;
        }
        if self.is_false(b) {
            return a;
        }
        self.intern(Shape::Or(a.min(b), a.max(b)))
    }

    /// Exclusive or: `(a ∧ ¬b) ∨ (¬a ∧ b)`.
    pub fn xor(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let not_b = self.not(b);
        let not_a = self.not(a);
        let left = self.and(a, not_b);
        let right = self.and(not_a, b);
        self.or(left, right)
    }

    /// One-bit adder: returns `(sum, carry_out)` with
    /// `sum = a ⊕ b ⊕ carry_in` and `carry_out = majority(a, b, carry_in)`
    /// expressed as `(a ∧ b) ∨ (carry_in ∧ (a ⊕ b))` so the XOR is shared.
    pub fn full_adder(&mut self, a: NodeId, b: NodeId, carry_in: NodeId) -> (NodeId, NodeId) {
        let a_xor_b = self.xor(a, b);
        let sum = self.xor(a_xor_b, carry_in);
        let ab = self.and(a, b);
        let cin_prop = self.and(carry_in, a_xor_b);
        let carry_out = self.or(ab, cin_prop);
        (sum, carry_out)
    }

    /// Ripple-carry addition. Narrower operands are zero-extended; the result
    /// is one bit wider than the wider operand (the final carry).
    pub fn add(&mut self, x: &BitVec, y: &BitVec) -> BitVec {
        let width = x.width().max(y.width());
        let zero = self.const_false();
        let mut bits = Vec::with_capacity(width + 1);
        let mut carry = zero;
        for i in 0..width {
            let a = x.bit(i).unwrap_or(zero);
            let b = y.bit(i).unwrap_or(zero);
            let (sum, carry_out) = self.full_adder(a, b, carry);
            bits.push(sum);
            carry = carry_out;
        }
        bits.push(carry);
        BitVec::from_bits(bits)
    }

    /// Magnitude comparator: true per document iff `value(x) > value(y)`.
    ///
    /// Scans from the most significant bit down, reusing one running
    /// equality-prefix node per position:
    /// `gt = ⋁_i (x_i ∧ ¬y_i ∧ ⋀_{j>i} (x_j ≡ y_j))`.
    pub fn compare_gt(&mut self, x: &BitVec, y: &BitVec) -> NodeId {
        let width = x.width().max(y.width());
        let zero = self.const_false();
        let mut gt = self.const_false();
        let mut eq_prefix = self.const_true();
        for i in (0..width).rev() {
            let a = x.bit(i).unwrap_or(zero);
            let b = y.bit(i).unwrap_or(zero);
            let not_b = self.not(b);
            let a_gt_b = self.and(a, not_b);
            let here = self.and(a_gt_b, eq_prefix);
            gt = self.or(gt, here);
            let bit_eq = {
                let x = self.xor(a, b);
                self.not(x)
            };
            eq_prefix = self.and(eq_prefix, bit_eq);
        }
        gt
    }

    /// Bits of a compile-time constant, wired as constant nodes.
    pub fn constant_bits(&mut self, value: u64, width: u32) -> BitVec {
        let bits = (0..width)
            .map(|i| self.const_bool(value >> i & 1 == 1))
            .collect();
        BitVec::from_bits(bits)
    }

    /// The weighted indicator of a term: bit `i` of the product
    /// `weight · 1(term ∈ d)` is the term node where bit `i` of the weight is
    /// set, and constant false elsewhere.
    fn weighted_indicator(&mut self, wt: &WeightedTerm) -> BitVec {
        let ind = self.term(&wt.term);
        let zero = self.const_false();
        let width = bit_length(wt.weight);
        let bits = (0..width)
            .map(|i| if wt.weight >> i & 1 == 1 { ind } else { zero })
            .collect();
        BitVec::from_bits(bits)
    }

    /// Sums a list of bit vectors with a balanced tree of ripple-carry adders.
    fn adder_tree(&mut self, mut operands: Vec<BitVec>) -> BitVec {
        if operands.is_empty() {
            return self.constant_bits(0, 1);
        }
        while operands.len() > 1 {
            let mut next = Vec::with_capacity(operands.len().div_ceil(2));
            let mut it = operands.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(self.add(&a, &b)),
                    None => next.push(a),
                }
            }
            operands = next;
        }
        operands.pop().expect("nonempty")
    }

    /// Net-positive filter: true per document iff
    /// `Σ_{t ∈ good} w_t · 1(t ∈ d) > Σ_{t ∈ bad} w_t · 1(t ∈ d)`.
    ///
    /// Each side is a tree of ripple-carry adders over the weighted
    /// indicators, and the two sums feed one magnitude comparator. The worst
    /// case sum of either side must fit in `max_width` bits.
    pub fn weighted_sum_gt(
        &mut self,
        good: &[WeightedTerm],
        bad: &[WeightedTerm],
        max_width: u32,
    ) -> Result<NodeId, CircuitError> {
        if good.is_empty() || bad.is_empty() {
            return Err(CircuitError::EmptySide);
        }
        for side in [good, bad] {
            let mut total = 0u64;
            for wt in side {
                if wt.weight == 0 {
                    return Err(CircuitError::ZeroWeight { term: wt.term.clone() });
                }
                if wt.weight >= MAX_WEIGHT {
                    return Err(CircuitError::WeightTooLarge {
                        term: wt.term.clone(),
                        weight: wt.weight,
                    });
                }
                total += wt.weight;
            }
            let needed = bit_length(total);
            if needed > max_width {
                return Err(CircuitError::WidthOverflow { needed, max: max_width });
            }
        }
        let good_sum = {
            let products = good.iter().map(|wt| self.weighted_indicator(wt)).collect();
            self.adder_tree(products)
        };
        let bad_sum = {
            let products = bad.iter().map(|wt| self.weighted_indicator(wt)).collect();
            self.adder_tree(products)
        };
        Ok(self.compare_gt(&good_sum, &bad_sum))
    }

    /// Threshold counter: true per document iff at least `k` of `inputs`
    /// hold. Built as an adder-tree popcount compared against `k - 1`.
    pub fn count_at_least(&mut self, inputs: &[NodeId], k: u64) -> NodeId {
        if k == 0 {
            return self.const_true();
        }
        if k > inputs.len() as u64 {
            return self.const_false();
        }
        let ones: Vec<BitVec> = inputs.iter().map(|&i| BitVec::from_bits(vec![i])).collect();
        let count = self.adder_tree(ones);
        let threshold = self.constant_bits(k - 1, count.width() as u32);
        self.compare_gt(&count, &threshold)
    }

    /// Bit-sliced field comparison: true per document iff the value indexed
    /// as `field#BIT<i>` tokens exceeds `constant`.
    pub fn field_gt_const(
        &mut self,
        field: &str,
        constant: u64,
        width: u32,
    ) -> Result<NodeId, CircuitError> {
        if width > 64 {
            return Err(CircuitError::WidthTooLarge(width));
        }
        if width < 64 && constant >= 1 << width {
            return Err(CircuitError::ConstantWidth { constant, width });
        }
        let bits = (0..width)
            .map(|i| self.term(&format!("{field}#BIT{i}")))
            .collect();
        let value = BitVec::from_bits(bits);
        let rhs = self.constant_bits(constant, width);
        Ok(self.compare_gt(&value, &rhs))
    }

    /// Extracts the dag rooted at `root`. The node store may contain nodes
    /// unreachable from `root` (dead carry bits, other gadgets); run
    /// [`NormalizedDag::prune`] to drop them.
    pub fn finish(&self, root: NodeId) -> NormalizedDag {
        self.check(root);
        NormalizedDag::new_unchecked(QueryDag::new(self.nodes.clone(), root))
    }
}

fn bit_length(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// Constraint DSL accepted by the CLI: gadget leaves plus Boolean combinators
/// so a constraint can wrap a topic disjunction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    WeightedSumGt {
        good: Vec<WeightedTerm>,
        bad: Vec<WeightedTerm>,
    },
    CountAtLeast {
        terms: Vec<String>,
        k: u64,
    },
    FieldGtConst {
        field: String,
        #[serde(rename = "const")]
        constant: u64,
        width: u32,
    },
    And {
        children: Vec<Constraint>,
    },
    Or {
        children: Vec<Constraint>,
    },
    Not {
        child: Box<Constraint>,
    },
    Term {
        term: String,
    },
    True,
    False,
}

impl Constraint {
    pub fn parse(text: &str) -> Result<Constraint, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Compiles a constraint into a pruned normalized dag.
pub fn compile_constraint(
    constraint: &Constraint,
    max_sum_width: u32,
) -> Result<NormalizedDag, CircuitError> {
    let mut b = DagBuilder::new();
    let root = lower(&mut b, constraint, max_sum_width)?;
    Ok(b.finish(root).prune())
}

fn lower(
    b: &mut DagBuilder,
    constraint: &Constraint,
    max_sum_width: u32,
) -> Result<NodeId, CircuitError> {
    Ok(match constraint {
        Constraint::WeightedSumGt { good, bad } => b.weighted_sum_gt(good, bad, max_sum_width)?,
        Constraint::CountAtLeast { terms, k } => {
            let inputs: Vec<NodeId> = terms.iter().map(|t| b.term(t)).collect();
            b.count_at_least(&inputs, *k)
        }
        Constraint::FieldGtConst { field, constant, width } => {
            b.field_gt_const(field, *constant, *width)?
        }
        Constraint::And { children } => {
            let mut acc = b.const_true();
            for c in children {
                let child = lower(b, c, max_sum_width)?;
                acc = b.and(acc, child);
            }
            acc
        }
        Constraint::Or { children } => {
            let mut acc = b.const_false();
            for c in children {
                let child = lower(b, c, max_sum_width)?;
                acc = b.or(acc, child);
            }
            acc
        }
        Constraint::Not { child } => {
            let c = lower(b, child, max_sum_width)?;
            b.not(c)
        }
        Constraint::Term { term } => b.term(term),
        Constraint::True => b.const_true(),
        Constraint::False => b.const_false(),
    })
}
