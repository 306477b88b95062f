//! Query dags: the operator-graph query language, its JSON wire format, and
//! the structural transformations (validation, normalization to binary
//! operators, common-subexpression elimination, pruning).
//!
//! Dags are immutable after construction; every transformation returns a new
//! dag. Node ids are dense integers internally and strings on the wire.

use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

/// Dense node identifier, unique within one dag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn new(i: u32) -> Self {
        NodeId(i)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(thiserror::Error, Debug)]
pub enum DagError {
    #[error("cycle detected involving nodes {0:?}")]
    CycleDetected(Vec<NodeId>),
    #[error("node {node} references missing child {child}")]
    DanglingChild { node: NodeId, child: NodeId },
    #[error("root node {0} is out of range")]
    InvalidRoot(NodeId),
    #[error("dag has no nodes")]
    Empty,
    #[error("arity violation at node {0:?}")]
    ArityViolation(String),
    #[error("duplicate node id {0:?}")]
    DuplicateId(String),
    #[error("unknown node kind {0:?}")]
    UnknownKind(String),
    #[error("node {node:?} references unknown child id {child:?}")]
    UnknownChildId { node: String, child: String },
    #[error("root references unknown node id {0:?}")]
    UnknownRootId(String),
    #[error("term node {0:?} is missing its term")]
    MissingTerm(String),
    #[error("and/or nodes must have exactly two children after normalization (node {0})")]
    NotBinary(NodeId),
    #[error("query dag syntax error: {0}")]
    Syntax(#[from] serde_json::Error),
}

/// One operator or leaf in a query dag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryNode {
    Term(String),
    And(Vec<NodeId>),
    Or(Vec<NodeId>),
    Not(NodeId),
    ConstTrue,
    ConstFalse,
}

impl QueryNode {
    pub fn children(&self) -> &[NodeId] {
        match self {
            QueryNode::And(c) | QueryNode::Or(c) => c,
            QueryNode::Not(c) => std::slice::from_ref(c),
            _ => &[],
        }
    }
}

/// An acyclic operator graph with a designated root. Shared nodes express
/// reused sub-expressions; `and`/`or` may have any arity until
/// [`QueryDag::normalize`] rewrites them to binary form.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryDag {
    nodes: Vec<QueryNode>,
    root: NodeId,
}

impl QueryDag {
    /// Wraps raw nodes without checking invariants; call
    /// [`QueryDag::validate`] to establish them.
    pub fn new(nodes: Vec<QueryNode>, root: NodeId) -> Self {
        QueryDag { nodes, root }
    }

    pub fn nodes(&self) -> &[QueryNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &QueryNode {
        &self.nodes[id.index()]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Distinct terms referenced by leaves, sorted.
    pub fn terms(&self) -> Vec<&str> {
        let mut terms: Vec<&str> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                QueryNode::Term(t) => Some(t.as_str()),
                _ => None,
            })
            .collect();
        terms.sort_unstable();
        terms.dedup();
        terms
    }

    /// Checks that the root exists, every child reference resolves, and the
    /// graph is acyclic. Accepts exactly the dags on which [`topo_order`]
    /// succeeds.
    ///
    /// [`topo_order`]: QueryDag::topo_order
    pub fn validate(&self) -> Result<(), DagError> {
        if self.nodes.is_empty() {
            return Err(DagError::Empty);
        }
        if self.root.index() >= self.nodes.len() {
            return Err(DagError::InvalidRoot(self.root));
        }
        self.topo_order().map(|_| ())
    }

    /// Topological order with children before parents, deterministic via a
    /// smallest-id-first tie-break.
    pub fn topo_order(&self) -> Result<Vec<NodeId>, DagError> {
        let n = self.nodes.len();
        let mut pending_children = vec![0usize; n];
        let mut parents: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for &child in node.children() {
                if child.index() >= n {
                    return Err(DagError::DanglingChild {
                        node: NodeId(i as u32),
                        child,
                    });
                }
                pending_children[i] += 1;
                parents[child.index()].push(i as u32);
            }
        }
        let mut ready: BinaryHeap<std::cmp::Reverse<u32>> = (0..n as u32)
            .filter(|&i| pending_children[i as usize] == 0)
            .map(std::cmp::Reverse)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(std::cmp::Reverse(i)) = ready.pop() {
            order.push(NodeId(i));
            for &p in &parents[i as usize] {
                pending_children[p as usize] -= 1;
                if pending_children[p as usize] == 0 {
                    ready.push(std::cmp::Reverse(p));
                }
            }
        }
        if order.len() < n {
            let stuck: Vec<NodeId> = (0..n)
                .filter(|&i| pending_children[i] > 0)
                .map(|i| NodeId(i as u32))
                .collect();
            return Err(DagError::CycleDetected(stuck));
        }
        Ok(order)
    }

    /// Rewrites to binary form: k-ary `and`/`or` (k ≥ 3) become left-leaning
    /// chains, unary ones collapse to their child, empty conjunction becomes
    /// `true` and empty disjunction `false`. Semantics are preserved and node
    /// count grows at most linearly.
    pub fn normalize(&self) -> Result<NormalizedDag, DagError> {
        self.validate()?;
        let order = self.topo_order()?;
        let mut out: Vec<QueryNode> = Vec::with_capacity(self.nodes.len());
        let mut map: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        for id in order {
            let mapped = |c: NodeId, map: &[Option<NodeId>]| map[c.index()].expect("child precedes parent");
            let new_id = match &self.nodes[id.index()] {
                QueryNode::Term(t) => push(&mut out, QueryNode::Term(t.clone())),
                QueryNode::ConstTrue => push(&mut out, QueryNode::ConstTrue),
                QueryNode::ConstFalse => push(&mut out, QueryNode::ConstFalse),
                QueryNode::Not(c) => {
                    let c = mapped(*c, &map);
                    push(&mut out, QueryNode::Not(c))
                }
                QueryNode::And(cs) => binarize(&mut out, cs, &map, true),
                QueryNode::Or(cs) => binarize(&mut out, cs, &map, false),
            };
            map[id.index()] = Some(new_id);
        }
        let root = map[self.root.index()].expect("root mapped");
        Ok(NormalizedDag(QueryDag { nodes: out, root }))
    }

    /// Drops nodes unreachable from the root, renumbering the rest in their
    /// original relative order. Root semantics are unchanged.
    pub fn prune(&self) -> QueryDag {
        let n = self.nodes.len();
        let mut keep = vec![false; n];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id.index() >= n || keep[id.index()] {
                continue;
            }
            keep[id.index()] = true;
            stack.extend_from_slice(self.nodes[id.index()].children());
        }
        let mut map: Vec<Option<NodeId>> = vec![None; n];
        let mut out = Vec::new();
        for i in 0..n {
            if keep[i] {
                map[i] = Some(NodeId(out.len() as u32));
                out.push(self.nodes[i].clone());
            }
        }
        for node in &mut out {
            remap_children(node, &map);
        }
        let root = map[self.root.index()].expect("root is reachable");
        QueryDag { nodes: out, root }
    }

    /// Structural equality modulo node-id renaming, over the part reachable
    /// from the roots (child order preserved).
    pub fn structurally_equal(&self, other: &QueryDag) -> bool {
        self.canonical_nodes() == other.canonical_nodes()
    }

    /// Reachable nodes renamed in a deterministic depth-first preorder; equal
    /// outputs mean isomorphic dags.
    fn canonical_nodes(&self) -> Vec<QueryNode> {
        let mut map: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut order: Vec<NodeId> = Vec::new();
        // iterative preorder, children visited in listed order
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id.index() >= self.nodes.len() || map[id.index()].is_some() {
                continue;
            }
            map[id.index()] = Some(NodeId(order.len() as u32));
            order.push(id);
            let children = self.nodes[id.index()].children();
            for &c in children.iter().rev() {
                stack.push(c);
            }
        }
        order
            .into_iter()
            .map(|old| {
                let mut node = self.nodes[old.index()].clone();
                remap_children(&mut node, &map);
                node
            })
            .collect()
    }

    /// Parses the JSON wire format.
    pub fn parse(text: &str) -> Result<QueryDag, DagError> {
        let wire: WireDag = serde_json::from_str(text)?;
        if wire.nodes.is_empty() {
            return Err(DagError::Empty);
        }
        let mut ids: HashMap<&str, u32> = HashMap::with_capacity(wire.nodes.len());
        for (i, node) in wire.nodes.iter().enumerate() {
            if ids.insert(&node.id, i as u32).is_some() {
                return Err(DagError::DuplicateId(node.id.clone()));
            }
        }
        let resolve = |node: &WireNode, child: &str| -> Result<NodeId, DagError> {
            ids.get(child).map(|&i| NodeId(i)).ok_or_else(|| DagError::UnknownChildId {
                node: node.id.clone(),
                child: child.to_string(),
            })
        };
        let mut nodes = Vec::with_capacity(wire.nodes.len());
        for w in &wire.nodes {
            let children = w.children.as_deref().unwrap_or(&[]);
            let node = match w.kind.as_str() {
                "term" => {
                    if !children.is_empty() {
                        return Err(DagError::ArityViolation(w.id.clone()));
                    }
                    let term = w.term.clone().ok_or_else(|| DagError::MissingTerm(w.id.clone()))?;
                    QueryNode::Term(term)
                }
                "true" | "false" => {
                    if !children.is_empty() {
                        return Err(DagError::ArityViolation(w.id.clone()));
                    }
                    if w.kind == "true" {
                        QueryNode::ConstTrue
                    } else {
                        QueryNode::ConstFalse
                    }
                }
                "not" => {
                    if children.len() != 1 {
                        return Err(DagError::ArityViolation(w.id.clone()));
                    }
                    QueryNode::Not(resolve(w, &children[0])?)
                }
                "and" | "or" => {
                    let cs = children
                        .iter()
                        .map(|c| resolve(w, c))
                        .collect::<Result<Vec<_>, _>>()?;
                    if w.kind == "and" {
                        QueryNode::And(cs)
                    } else {
                        QueryNode::Or(cs)
                    }
                }
                other => return Err(DagError::UnknownKind(other.to_string())),
            };
            nodes.push(node);
        }
        let root = ids
            .get(wire.root.as_str())
            .map(|&i| NodeId(i))
            .ok_or(DagError::UnknownRootId(wire.root))?;
        Ok(QueryDag { nodes, root })
    }

    /// Serializes to the JSON wire format, emitting nodes in topological
    /// order (children before parents) with fresh sequential ids.
    pub fn to_wire_json(&self) -> Result<String, DagError> {
        let order = self.topo_order()?;
        let mut names: Vec<Option<String>> = vec![None; self.nodes.len()];
        for (pos, id) in order.iter().enumerate() {
            names[id.index()] = Some(format!("n{pos}"));
        }
        let name = |id: NodeId, names: &[Option<String>]| names[id.index()].clone().expect("named");
        let nodes = order
            .iter()
            .map(|&id| {
                let (kind, term, children) = match &self.nodes[id.index()] {
                    QueryNode::Term(t) => ("term", Some(t.clone()), None),
                    QueryNode::ConstTrue => ("true", None, None),
                    QueryNode::ConstFalse => ("false", None, None),
                    QueryNode::Not(c) => ("not", None, Some(vec![name(*c, &names)])),
                    QueryNode::And(cs) => (
                        "and",
                        None,
                        Some(cs.iter().map(|&c| name(c, &names)).collect()),
                    ),
                    QueryNode::Or(cs) => (
                        "or",
                        None,
                        Some(cs.iter().map(|&c| name(c, &names)).collect()),
                    ),
                };
                WireNode {
                    id: name(id, &names),
                    kind: kind.to_string(),
                    term,
                    children,
                }
            })
            .collect();
        let wire = WireDag {
            root: name(self.root, &names),
            nodes,
        };
        Ok(serde_json::to_string_pretty(&wire).expect("wire dag serializes"))
    }
}

fn push(out: &mut Vec<QueryNode>, node: QueryNode) -> NodeId {
    out.push(node);
    NodeId(out.len() as u32 - 1)
}

fn binarize(
    out: &mut Vec<QueryNode>,
    children: &[NodeId],
    map: &[Option<NodeId>],
    is_and: bool,
) -> NodeId {
    let mapped: Vec<NodeId> = children
        .iter()
        .map(|c| map[c.index()].expect("child precedes parent"))
        .collect();
    match mapped.len() {
        0 => push(out, if is_and { QueryNode::ConstTrue } else { QueryNode::ConstFalse }),
        1 => mapped[0],
        _ => {
            let mut acc = mapped[0];
            for &c in &mapped[1..] {
                let node = if is_and {
                    QueryNode::And(vec![acc, c])
                } else {
                    QueryNode::Or(vec![acc, c])
                };
                acc = push(out, node);
            }
            acc
        }
    }
}

fn remap_children(node: &mut QueryNode, map: &[Option<NodeId>]) {
    match node {
        QueryNode::And(cs) | QueryNode::Or(cs) => {
            for c in cs {
                *c = map[c.index()].expect("kept child");
            }
        }
        QueryNode::Not(c) => *c = map[c.index()].expect("kept child"),
        _ => {}
    }
}

/// A [`QueryDag`] whose `and`/`or` nodes all have exactly two children.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedDag(QueryDag);

impl NormalizedDag {
    /// Validates that `dag` is already binary and acyclic.
    pub fn try_from_dag(dag: QueryDag) -> Result<Self, DagError> {
        dag.validate()?;
        for (i, node) in dag.nodes.iter().enumerate() {
            if let QueryNode::And(cs) | QueryNode::Or(cs) = node {
                if cs.len() != 2 {
                    return Err(DagError::NotBinary(NodeId(i as u32)));
                }
            }
        }
        Ok(NormalizedDag(dag))
    }

    pub(crate) fn new_unchecked(dag: QueryDag) -> Self {
        NormalizedDag(dag)
    }

    pub fn as_dag(&self) -> &QueryDag {
        &self.0
    }

    pub fn into_dag(self) -> QueryDag {
        self.0
    }

    /// Common-subexpression elimination: structurally identical subgraphs
    /// (with `and`/`or` children compared order-insensitively) collapse to a
    /// single shared node. Never increases the node count; idempotent.
    pub fn cse(&self) -> NormalizedDag {
        #[derive(PartialEq, Eq, Hash)]
        enum Key {
            Term(String),
            True,
            False,
            Not(NodeId),
            And(NodeId, NodeId),
            Or(NodeId, NodeId),
        }
        let dag = &self.0;
        let order = dag.topo_order().expect("normalized dag is acyclic");
        let mut canon: Vec<Option<NodeId>> = vec![None; dag.nodes.len()];
        let mut cache: HashMap<Key, NodeId> = HashMap::new();
        let mut out: Vec<QueryNode> = Vec::new();
        for id in order {
            let c = |i: NodeId| canon[i.index()].expect("child precedes parent");
            let (key, node) = match &dag.nodes[id.index()] {
                QueryNode::Term(t) => (Key::Term(t.clone()), QueryNode::Term(t.clone())),
                QueryNode::ConstTrue => (Key::True, QueryNode::ConstTrue),
                QueryNode::ConstFalse => (Key::False, QueryNode::ConstFalse),
                QueryNode::Not(x) => (Key::Not(c(*x)), QueryNode::Not(c(*x))),
                QueryNode::And(cs) => {
                    let (a, b) = (c(cs[0]), c(cs[1]));
                    let (lo, hi) = (a.min(b), a.max(b));
                    (Key::And(lo, hi), QueryNode::And(vec![lo, hi]))
                }
                QueryNode::Or(cs) => {
                    let (a, b) = (c(cs[0]), c(cs[1]));
                    let (lo, hi) = (a.min(b), a.max(b));
                    (Key::Or(lo, hi), QueryNode::Or(vec![lo, hi]))
                }
            };
            let new_id = *cache.entry(key).or_insert_with(|| push(&mut out, node));
            canon[id.index()] = Some(new_id);
        }
        let root = canon[dag.root.index()].expect("root mapped");
        NormalizedDag(QueryDag { nodes: out, root })
    }

    pub fn prune(&self) -> NormalizedDag {
        NormalizedDag(self.0.prune())
    }
}

#[derive(Serialize, Deserialize)]
struct WireDag {
    root: String,
    nodes: Vec<WireNode>,
}

#[derive(Serialize, Deserialize)]
struct WireNode {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    term: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<String>>,
}
