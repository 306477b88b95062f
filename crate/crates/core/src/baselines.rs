//! Reference evaluators and reductions used as ground truth.
//!
//! - [`eval_oracle`]: per-document brute force straight off the set
//!   semantics; the arbiter every engine is checked against.
//! - [`eval_naive_taat`]: bottom-up materialization of absolute result sets,
//!   charging a full universe scan for every negation.
//! - [`unroll_to_tree`] + [`eval_tree_iterative`]: a simulated
//!   document-at-a-time engine. Stateful iterators cannot share a node, so
//!   the dag is first unrolled into a tree (exponential for re-convergent
//!   queries); evaluation is then memo-free, with negation handled by
//!   match-all-style complement materialization. Costs are modeled with the
//!   same counters as the engine, at the set level.
//! - [`cvp_reduce`]: maps a Boolean circuit with fixed inputs to a one-document
//!   index and an equivalent query dag, so circuit evaluation and retrieval
//!   decide each other.

use serde::{Deserialize, Serialize};

use crate::dag::{DagError, NodeId, QueryDag, QueryNode};
use crate::index::{InvertedIndex, PostingList};
use crate::pn::{complement, set_intersect, set_union, CostCounters};
use crate::{doc_from_u64, DocInt};

/// Node budget above which [`unroll_to_tree`] refuses to materialize.
pub const DEFAULT_EXPANSION_LIMIT: u64 = 1 << 22;

/// Element-touch budget for [`eval_tree_iterative`].
pub const DEFAULT_WORK_LIMIT: u64 = 1 << 29;

#[derive(thiserror::Error, Debug)]
pub enum BaselineError {
    #[error("tree expansion needs {node_count} nodes, over the limit of {limit}")]
    ExpansionLimitExceeded { node_count: u64, limit: u64 },
    #[error("evaluation work {touches} exceeded the limit of {limit} element touches")]
    WorkLimitExceeded { touches: u64, limit: u64 },
    #[error("input dag is not a tree: node {0} has multiple parents")]
    NotATree(NodeId),
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// Per-document truth evaluation of the dag semantics. Ground truth for
/// everything else in the crate.
pub fn eval_oracle<D: DocInt>(
    dag: &QueryDag,
    index: &InvertedIndex<D>,
) -> Result<PostingList<D>, DagError> {
    let order = dag.topo_order()?;
    if dag.root().index() >= dag.len() {
        return Err(DagError::InvalidRoot(dag.root()));
    }
    let mut truth = vec![false; dag.len()];
    let mut out = Vec::new();
    for v in 0..index.universe_size() {
        let doc = doc_from_u64::<D>(v);
        for &id in &order {
            truth[id.index()] = match dag.node(id) {
                QueryNode::Term(t) => index.lookup(t).binary_search(&doc).is_ok(),
                QueryNode::ConstTrue => true,
                QueryNode::ConstFalse => false,
                QueryNode::Not(c) => !truth[c.index()],
                QueryNode::And(cs) => cs.iter().all(|c| truth[c.index()]),
                QueryNode::Or(cs) => cs.iter().any(|c| truth[c.index()]),
            };
        }
        if truth[dag.root().index()] {
            out.push(doc);
        }
    }
    Ok(PostingList::from_sorted(out))
}

/// Naive term-at-a-time evaluation: memoized bottom-up materialization of the
/// absolute set for every node. Negation (and the empty conjunction)
/// materializes against the universe, which is exactly the cost the counters
/// expose.
pub fn eval_naive_taat<D: DocInt>(
    dag: &QueryDag,
    index: &InvertedIndex<D>,
) -> Result<(PostingList<D>, CostCounters), DagError> {
    let order = dag.topo_order()?;
    let universe = index.universe_size();
    let mut counters = CostCounters::default();
    let mut memo: Vec<Option<PostingList<D>>> = vec![None; dag.len()];
    for &id in &order {
        let set = {
            let get = |c: &NodeId| memo[c.index()].as_ref().expect("child first");
            match dag.node(id) {
                QueryNode::Term(t) => {
                    let list = index.lookup(t);
                    counters.element_touches += list.len() as u64;
                    PostingList::from_sorted(list.to_vec())
                }
                QueryNode::ConstTrue => {
                    counters.element_touches += universe;
                    complement(&[], universe)
                }
                QueryNode::ConstFalse => PostingList::new(),
                QueryNode::Not(c) => {
                    counters.element_touches += universe;
                    complement(get(c), universe)
                }
                QueryNode::And(cs) => match cs.split_first() {
                    None => {
                        counters.element_touches += universe;
                        complement(&[], universe)
                    }
                    Some((first, rest)) => {
                        let mut acc = get(first).clone();
                        for c in rest {
                            acc = set_intersect(&acc, get(c), &mut counters);
                        }
                        acc
                    }
                },
                QueryNode::Or(cs) => {
                    let mut acc = PostingList::new();
                    for c in cs {
                        acc = set_union(&acc, get(c), &mut counters);
                    }
                    acc
                }
            }
        };
        counters.note_set(set.len());
        counters.node_visits += 1;
        memo[id.index()] = Some(set);
    }
    let result = memo[dag.root().index()].take().expect("root evaluated");
    Ok((result, counters))
}

/// Nodes a full tree expansion of `dag` would need (each shared node copied
/// once per path from the root), computed without materializing anything.
/// Saturates at `u64::MAX`.
pub fn unrolled_node_count(dag: &QueryDag) -> Result<u64, DagError> {
    let order = dag.topo_order()?;
    let mut counts = vec![0u64; dag.len()];
    for &id in &order {
        let children: u64 = dag
            .node(id)
            .children()
            .iter()
            .fold(0u64, |acc, c| acc.saturating_add(counts[c.index()]));
        counts[id.index()] = children.saturating_add(1);
    }
    Ok(counts[dag.root().index()])
}

/// Duplicates every shared node per parent path, producing the tree an
/// iterator-based engine would actually instantiate. Refuses (with the
/// counted size) when the expansion exceeds `limit` nodes.
pub fn unroll_to_tree(dag: &QueryDag, limit: u64) -> Result<(QueryDag, u64), BaselineError> {
    let count = unrolled_node_count(dag)?;
    if count > limit {
        return Err(BaselineError::ExpansionLimitExceeded {
            node_count: count,
            limit,
        });
    }
    let mut nodes: Vec<QueryNode> = Vec::with_capacity(count as usize);
    let root = copy_subtree(dag, dag.root(), &mut nodes);
    Ok((QueryDag::new(nodes, root), count))
}

fn copy_subtree(dag: &QueryDag, id: NodeId, out: &mut Vec<QueryNode>) -> NodeId {
    let node = match dag.node(id) {
        QueryNode::Term(t) => QueryNode::Term(t.clone()),
        QueryNode::ConstTrue => QueryNode::ConstTrue,
        QueryNode::ConstFalse => QueryNode::ConstFalse,
        QueryNode::Not(c) => QueryNode::Not(copy_subtree(dag, *c, out)),
        QueryNode::And(cs) => {
            QueryNode::And(cs.iter().map(|&c| copy_subtree(dag, c, out)).collect())
        }
        QueryNode::Or(cs) => QueryNode::Or(cs.iter().map(|&c| copy_subtree(dag, c, out)).collect()),
    };
    out.push(node);
    NodeId::new(out.len() as u32 - 1)
}

/// Memo-free recursive evaluation of a tree-shaped dag, simulating a
/// document-at-a-time iterator stack at the set level. Negation materializes
/// the complement (the match-all-docs behavior), charged against the
/// universe. Aborts once `work_limit` element touches are spent.
pub fn eval_tree_iterative<D: DocInt>(
    tree: &QueryDag,
    index: &InvertedIndex<D>,
    work_limit: u64,
) -> Result<(PostingList<D>, CostCounters), BaselineError> {
    tree.validate()?;
    // every node must have at most one parent
    let mut parent_seen = vec![false; tree.len()];
    for node in tree.nodes() {
        for &c in node.children() {
            if parent_seen[c.index()] {
                return Err(BaselineError::NotATree(c));
            }
            parent_seen[c.index()] = true;
        }
    }
    let mut counters = CostCounters::default();
    let result = eval_subtree(tree, tree.root(), index, work_limit, &mut counters)?;
    Ok((result, counters))
}

fn eval_subtree<D: DocInt>(
    tree: &QueryDag,
    id: NodeId,
    index: &InvertedIndex<D>,
    work_limit: u64,
    counters: &mut CostCounters,
) -> Result<PostingList<D>, BaselineError> {
    let universe = index.universe_size();
    counters.node_visits += 1;
    let set = match tree.node(id) {
        QueryNode::Term(t) => {
            let list = index.lookup(t);
            counters.element_touches += list.len() as u64;
            PostingList::from_sorted(list.to_vec())
        }
        QueryNode::ConstTrue => {
            counters.element_touches += universe;
            complement(&[], universe)
        }
        QueryNode::ConstFalse => PostingList::new(),
        QueryNode::Not(c) => {
            let child = eval_subtree(tree, *c, index, work_limit, counters)?;
            counters.element_touches += universe;
            complement(&child, universe)
        }
        QueryNode::And(cs) => {
            let mut acc: Option<PostingList<D>> = None;
            for &c in cs {
                let child = eval_subtree(tree, c, index, work_limit, counters)?;
                acc = Some(match acc {
                    None => child,
                    Some(a) => set_intersect(&a, &child, counters),
                });
            }
            acc.unwrap_or_else(|| {
                counters.element_touches += universe;
                complement(&[], universe)
            })
        }
        QueryNode::Or(cs) => {
            let mut acc = PostingList::new();
            for &c in cs {
                let child = eval_subtree(tree, c, index, work_limit, counters)?;
                acc = set_union(&acc, &child, counters);
            }
            acc
        }
    };
    if counters.element_touches > work_limit {
        return Err(BaselineError::WorkLimitExceeded {
            touches: counters.element_touches,
            limit: work_limit,
        });
    }
    counters.note_set(set.len());
    Ok(set)
}

#[derive(thiserror::Error, Debug)]
pub enum CircuitInstanceError {
    #[error("circuit has no gates")]
    Empty,
    #[error("gate {gate} references operand {operand}, which does not precede it")]
    OperandOutOfOrder { gate: usize, operand: usize },
    #[error("output gate {output} is out of range")]
    OutputOutOfRange { output: usize },
    #[error("gate {gate:?} duplicated")]
    DuplicateGate { gate: String },
    #[error("gate {gate:?} has wrong operand count")]
    Arity { gate: String },
    #[error("gate {gate:?} references unknown operand {operand:?}")]
    UnknownOperand { gate: String, operand: String },
    #[error("unknown gate kind {0:?}")]
    UnknownKind(String),
    #[error("input gate {0:?} is missing its value")]
    MissingValue(String),
    #[error("output references unknown gate {0:?}")]
    UnknownOutput(String),
    #[error("circuit syntax error: {0}")]
    Syntax(#[from] serde_json::Error),
}

/// One gate of a [`CircuitInstance`]; operand indices always point at earlier
/// gates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Gate {
    Input(bool),
    And(Vec<usize>),
    Or(Vec<usize>),
    Not(usize),
}

impl Gate {
    fn operands(&self) -> &[usize] {
        match self {
            Gate::And(ops) | Gate::Or(ops) => ops,
            Gate::Not(op) => std::slice::from_ref(op),
            Gate::Input(_) => &[],
        }
    }
}

/// A Boolean circuit with fixed input values: gates in dependency order plus
/// a designated output gate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitInstance {
    gates: Vec<Gate>,
    output: usize,
}

impl CircuitInstance {
    pub fn new(gates: Vec<Gate>, output: usize) -> Result<Self, CircuitInstanceError> {
        if gates.is_empty() {
            return Err(CircuitInstanceError::Empty);
        }
        if output >= gates.len() {
            return Err(CircuitInstanceError::OutputOutOfRange { output });
        }
        for (i, gate) in gates.iter().enumerate() {
            for &op in gate.operands() {
                if op >= i {
                    return Err(CircuitInstanceError::OperandOutOfOrder { gate: i, operand: op });
                }
            }
        }
        Ok(CircuitInstance { gates, output })
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn output(&self) -> usize {
        self.output
    }

    /// Direct gate-level simulation.
    pub fn simulate(&self) -> bool {
        let mut values: Vec<bool> = Vec::with_capacity(self.gates.len());
        for gate in &self.gates {
            let v = match gate {
                Gate::Input(b) => *b,
                Gate::Not(op) => !values[*op],
                Gate::And(ops) => ops.iter().all(|&o| values[o]),
                Gate::Or(ops) => ops.iter().any(|&o| values[o]),
            };
            values.push(v);
        }
        values[self.output]
    }

    /// Parses the JSON format mirroring the dag wire format, with
    /// `{"kind": "input", "value": true|false}` leaves.
    pub fn parse(text: &str) -> Result<Self, CircuitInstanceError> {
        let wire: WireCircuit = serde_json::from_str(text)?;
        if wire.nodes.is_empty() {
            return Err(CircuitInstanceError::Empty);
        }
        let mut ids = std::collections::HashMap::new();
        for (i, node) in wire.nodes.iter().enumerate() {
            if ids.insert(node.id.as_str(), i).is_some() {
                return Err(CircuitInstanceError::DuplicateGate { gate: node.id.clone() });
            }
        }
        let mut gates = Vec::with_capacity(wire.nodes.len());
        for w in &wire.nodes {
            let resolve = |c: &String| {
                ids.get(c.as_str()).copied().ok_or_else(|| CircuitInstanceError::UnknownOperand {
                    gate: w.id.clone(),
                    operand: c.clone(),
                })
            };
            let children = w.children.as_deref().unwrap_or(&[]);
            let gate = match w.kind.as_str() {
                "input" => {
                    if !children.is_empty() {
                        return Err(CircuitInstanceError::Arity { gate: w.id.clone() });
                    }
                    Gate::Input(w.value.ok_or_else(|| CircuitInstanceError::MissingValue(w.id.clone()))?)
                }
                "not" => {
                    if children.len() != 1 {
                        return Err(CircuitInstanceError::Arity { gate: w.id.clone() });
                    }
                    Gate::Not(resolve(&children[0])?)
                }
                "and" => Gate::And(children.iter().map(resolve).collect::<Result<_, _>>()?),
                "or" => Gate::Or(children.iter().map(resolve).collect::<Result<_, _>>()?),
                other => return Err(CircuitInstanceError::UnknownKind(other.to_string())),
            };
            gates.push(gate);
        }
        let output = *ids
            .get(wire.root.as_str())
            .ok_or(CircuitInstanceError::UnknownOutput(wire.root.clone()))?;
        CircuitInstance::new(gates, output)
    }

    pub fn to_wire_json(&self) -> String {
        let nodes = self
            .gates
            .iter()
            .enumerate()
            .map(|(i, gate)| {
                let name = |o: &usize| format!("g{o}");
                let (kind, value, children) = match gate {
                    Gate::Input(b) => ("input", Some(*b), None),
                    Gate::Not(op) => ("not", None, Some(vec![name(op)])),
                    Gate::And(ops) => ("and", None, Some(ops.iter().map(name).collect())),
                    Gate::Or(ops) => ("or", None, Some(ops.iter().map(name).collect())),
                };
                WireGate {
                    id: format!("g{i}"),
                    kind: kind.to_string(),
                    value,
                    children,
                }
            })
            .collect();
        let wire = WireCircuit {
            root: format!("g{}", self.output),
            nodes,
        };
        serde_json::to_string_pretty(&wire).expect("circuit serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct WireCircuit {
    root: String,
    nodes: Vec<WireGate>,
}

#[derive(Serialize, Deserialize)]
struct WireGate {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<String>>,
}

/// The circuit-value-problem reduction: a one-document universe whose only
/// token is `TRUE`, and a query dag that retrieves that document iff the
/// circuit outputs true. True inputs become `TRUE` leaves; false inputs
/// become `¬TRUE` (the empty set).
pub fn cvp_reduce<D: DocInt>(circuit: &CircuitInstance) -> (InvertedIndex<D>, QueryDag) {
    let mut index = InvertedIndex::from_postings(
        1,
        [("TRUE".to_string(), PostingList::from_sorted(vec![doc_from_u64(0)]))],
    )
    .expect("one-document index is valid");
    index.set_doc_keys(vec!["d_true".to_string()]);

    let mut nodes: Vec<QueryNode> = Vec::new();
    let mut true_leaf: Option<NodeId> = None;
    let mut false_node: Option<NodeId> = None;
    let mut map: Vec<NodeId> = Vec::with_capacity(circuit.gates.len());
    for gate in &circuit.gates {
        let id = match gate {
            Gate::Input(true) => *true_leaf.get_or_insert_with(|| {
                nodes.push(QueryNode::Term("TRUE".to_string()));
                NodeId::new(nodes.len() as u32 - 1)
            }),
            Gate::Input(false) => {
                if let Some(id) = false_node {
                    id
                } else {
                    let t = *true_leaf.get_or_insert_with(|| {
                        nodes.push(QueryNode::Term("TRUE".to_string()));
                        NodeId::new(nodes.len() as u32 - 1)
                    });
                    nodes.push(QueryNode::Not(t));
                    let id = NodeId::new(nodes.len() as u32 - 1);
                    false_node = Some(id);
                    id
                }
            }
            Gate::Not(op) => {
                nodes.push(QueryNode::Not(map[*op]));
                NodeId::new(nodes.len() as u32 - 1)
            }
            Gate::And(ops) => {
                nodes.push(QueryNode::And(ops.iter().map(|&o| map[o]).collect()));
                NodeId::new(nodes.len() as u32 - 1)
            }
            Gate::Or(ops) => {
                nodes.push(QueryNode::Or(ops.iter().map(|&o| map[o]).collect()));
                NodeId::new(nodes.len() as u32 - 1)
            }
        };
        map.push(id);
    }
    let dag = QueryDag::new(nodes, map[circuit.output]);
    (index, dag)
}
