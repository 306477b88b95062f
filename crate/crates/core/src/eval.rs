//! Bottom-up evaluation of normalized query dags against an inverted index.
//!
//! [`compute_pn`] walks the dag in topological order, memoizing one
//! [`PNResponse`] per node so shared sub-expressions are computed exactly
//! once, then finalizes: a positive root is returned as-is, a negative root
//! costs the single complement against the universe. With default options
//! every intermediate set is a subset of `U_active` (the union of the posting
//! lists the query references), which is the sparsity guarantee the counters
//! in the returned [`EvalReport`] certify.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::dag::{NodeId, NormalizedDag, QueryDag, QueryNode};
use crate::index::{InvertedIndex, PostingList};
use crate::pn::{complement, pn_and, pn_not, pn_or, CostCounters, PNResponse, Polarity};
use crate::DocInt;

/// Evaluation knobs.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    /// Emit a negative response for terms covering more than half the
    /// universe, bounding every leaf materialization at `|U|/2`. Off by
    /// default: it trades the literal `S_v ⊆ U_active` invariant for a
    /// `Σ |S_leaf|` bound.
    pub adaptive_leaf_polarity: bool,
    /// Evaluate independent nodes concurrently. Results are bit-identical to
    /// sequential evaluation.
    pub parallel: bool,
    /// Populate counters, `u_active_size`, and per-node set sizes in the
    /// report. When off those fields are zeroed/empty.
    pub collect_counters: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            adaptive_leaf_polarity: false,
            parallel: false,
            collect_counters: true,
        }
    }
}

/// Result of one evaluation: the final (always positive) doc-id set plus the
/// instrumentation backing the complexity claims.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport<D> {
    pub result: PostingList<D>,
    pub counters: CostCounters,
    /// Size of the union of all posting lists referenced by the query.
    pub u_active_size: u64,
    /// Materialized set size per evaluated node (post-CSE node ids).
    pub per_node_set_sizes: BTreeMap<u32, u64>,
}

/// Evaluates `dag` against `index`.
///
/// Runs CSE and pruning first, so the compute-once guarantee holds even for
/// syntactically duplicated input; memoization keys (and the node ids in the
/// report) refer to the deduplicated dag. Absent terms evaluate to the empty
/// positive response; constants evaluate universe-free (`true` = ⟨∅, NEG⟩,
/// `false` = ⟨∅, POS⟩).
pub fn compute_pn<D: DocInt>(
    dag: &NormalizedDag,
    index: &InvertedIndex<D>,
    opts: EvalOptions,
) -> EvalReport<D> {
    let work = dag.cse().prune();
    let order = work
        .as_dag()
        .topo_order()
        .expect("normalized dags are acyclic");
    let nodes = work.as_dag().nodes();
    let mut memo: Vec<Option<PNResponse<D>>> = vec![None; nodes.len()];
    let mut counters = CostCounters::default();

    if opts.parallel {
        for wave in schedule_waves(nodes, &order) {
            let results: Vec<(NodeId, PNResponse<D>, CostCounters)> = wave
                .par_iter()
                .map(|&id| {
                    let mut c = CostCounters::default();
                    let r = eval_node(&nodes[id.index()], &memo, index, opts, &mut c);
                    (id, r, c)
                })
                .collect();
            for (id, r, c) in results {
                counters.absorb(&c);
                counters.node_visits += 1;
                memo[id.index()] = Some(r);
            }
        }
    } else {
        for id in &order {
            let r = eval_node(&nodes[id.index()], &memo, index, opts, &mut counters);
            counters.node_visits += 1;
            memo[id.index()] = Some(r);
        }
    }

    let root = memo[work.as_dag().root().index()]
        .as_ref()
        .expect("root evaluated");
    let result = finalize(root, index.universe_size(), &mut counters);

    if opts.collect_counters {
        let per_node_set_sizes = memo
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().map(|r| (i as u32, r.set().len() as u64)))
            .collect();
        EvalReport {
            result,
            counters,
            u_active_size: u_active_size(work.as_dag(), index),
            per_node_set_sizes,
        }
    } else {
        EvalReport {
            result,
            counters: CostCounters::default(),
            u_active_size: 0,
            per_node_set_sizes: BTreeMap::new(),
        }
    }
}

fn eval_node<D: DocInt>(
    node: &QueryNode,
    memo: &[Option<PNResponse<D>>],
    index: &InvertedIndex<D>,
    opts: EvalOptions,
    counters: &mut CostCounters,
) -> PNResponse<D> {
    let get = |id: NodeId| memo[id.index()].as_ref().expect("child evaluated first");
    match node {
        QueryNode::Term(t) => leaf_response(index, t, opts, counters),
        QueryNode::ConstTrue => PNResponse::neg(PostingList::new()),
        QueryNode::ConstFalse => PNResponse::pos(PostingList::new()),
        QueryNode::Not(c) => pn_not(get(*c)),
        QueryNode::And(cs) => {
            debug_assert_eq!(cs.len(), 2);
            pn_and(get(cs[0]), get(cs[1]), counters)
        }
        QueryNode::Or(cs) => {
            debug_assert_eq!(cs.len(), 2);
            pn_or(get(cs[0]), get(cs[1]), counters)
        }
    }
}

/// Response for a term leaf. Default is ⟨I(t), POS⟩; with adaptive polarity
/// a term covering more than half the universe is complemented up front.
pub fn leaf_response<D: DocInt>(
    index: &InvertedIndex<D>,
    term: &str,
    opts: EvalOptions,
    counters: &mut CostCounters,
) -> PNResponse<D> {
    let list = index.lookup(term);
    let universe = index.universe_size();
    if opts.adaptive_leaf_polarity && (list.len() as u64) * 2 > universe {
        let comp = complement(list, universe);
        counters.element_touches += universe;
        counters.note_set(comp.len());
        PNResponse::neg(comp)
    } else {
        counters.element_touches += list.len() as u64;
        counters.note_set(list.len());
        PNResponse::pos(PostingList::from_sorted(list.to_vec()))
    }
}

/// Resolves a root response into the final positive set. Positive roots are
/// returned as-is; negative roots pay for one complement against the
/// universe, charged to `finalization_touches`.
pub fn finalize<D: DocInt>(
    root: &PNResponse<D>,
    universe_size: u64,
    counters: &mut CostCounters,
) -> PostingList<D> {
    match root.polarity() {
        Polarity::Pos => root.set().clone(),
        Polarity::Neg => {
            counters.finalization_touches += universe_size;
            complement(root.set(), universe_size)
        }
    }
}

/// Groups nodes into dependency levels: every node's children live in an
/// earlier wave, so each wave can run in parallel.
fn schedule_waves(nodes: &[QueryNode], order: &[NodeId]) -> Vec<Vec<NodeId>> {
    let mut level = vec![0usize; nodes.len()];
    let mut waves: Vec<Vec<NodeId>> = Vec::new();
    for &id in order {
        let l = nodes[id.index()]
            .children()
            .iter()
            .map(|c| level[c.index()] + 1)
            .max()
            .unwrap_or(0);
        level[id.index()] = l;
        if waves.len() <= l {
            waves.resize_with(l + 1, Vec::new);
        }
        waves[l].push(id);
    }
    waves
}

fn u_active_size<D: DocInt>(dag: &QueryDag, index: &InvertedIndex<D>) -> u64 {
    let terms: BTreeSet<&str> = dag.terms().into_iter().collect();
    let mut all: Vec<D> = Vec::new();
    for t in terms {
        all.extend_from_slice(index.lookup(t));
    }
    all.sort_unstable();
    all.dedup();
    all.len() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::QueryDag;
    use crate::index::build_index;

    fn norm(nodes: Vec<QueryNode>, root: u32) -> NormalizedDag {
        QueryDag::new(nodes, NodeId::new(root)).normalize().unwrap()
    }

    fn term(t: &str) -> QueryNode {
        QueryNode::Term(t.to_string())
    }

    #[test]
    fn single_leaf() {
        let idx = build_index::<u32>(&[("0", &["a", "b"]), ("1", &["b"])]).unwrap();
        let dag = norm(vec![term("b")], 0);
        let report = compute_pn(&dag, &idx, EvalOptions::default());
        assert_eq!(report.result.as_slice(), &[0, 1]);
        assert_eq!(report.counters.finalization_touches, 0);
        assert_eq!(report.u_active_size, 2);
    }

    #[test]
    fn cvp_style_not_true() {
        let idx = build_index::<u32>(&[("d_true", &["TRUE"])]).unwrap();
        let dag = norm(vec![term("TRUE"), QueryNode::Not(NodeId::new(0))], 1);
        let report = compute_pn(&dag, &idx, EvalOptions::default());
        assert_eq!(report.result.as_slice(), &[] as &[u32]);

        let dag = norm(vec![term("TRUE")], 0);
        let report = compute_pn(&dag, &idx, EvalOptions::default());
        assert_eq!(report.result.as_slice(), &[0]);
    }

    #[test]
    fn disjunctive_negation_worked_example() {
        // OR(a, NOT b) with I(a)={1}, I(b)={1,2}, |U|=4
        let idx = build_index::<u32>(&[
            ("0", &[] as &[&str]),
            ("1", &["a", "b"]),
            ("2", &["b"]),
            ("3", &[]),
        ])
        .unwrap();
        let dag = norm(
            vec![term("a"), term("b"), QueryNode::Not(NodeId::new(1)), QueryNode::Or(vec![NodeId::new(0), NodeId::new(2)])],
            3,
        );
        let report = compute_pn(&dag, &idx, EvalOptions::default());
        assert_eq!(report.result.as_slice(), &[0, 1, 3]);
        // the intermediate is ⟨{2}, NEG⟩: one element materialized at the root
        assert_eq!(report.per_node_set_sizes.values().max(), Some(&2));
        assert_eq!(report.counters.finalization_touches, 4);
        // element touches stay within the active lists: 1 + 2 + merge(2+1)
        assert!(report.counters.element_touches <= 6);
    }

    #[test]
    fn constants_are_universe_free() {
        let idx = build_index::<u32>(&[("0", &["x"]), ("1", &["x"])]).unwrap();
        let t = norm(vec![QueryNode::ConstTrue], 0);
        let report = compute_pn(&t, &idx, EvalOptions::default());
        assert_eq!(report.result.as_slice(), &[0, 1]);
        assert_eq!(report.counters.element_touches, 0);
        assert_eq!(report.counters.finalization_touches, 2);

        let f = norm(vec![QueryNode::ConstFalse], 0);
        let report = compute_pn(&f, &idx, EvalOptions::default());
        assert_eq!(report.result.as_slice(), &[] as &[u32]);
        assert_eq!(report.counters.finalization_touches, 0);
    }

    #[test]
    fn absent_terms_are_empty_positive() {
        let idx = build_index::<u32>(&[("0", &["x"])]).unwrap();
        let mut c = CostCounters::default();
        let r = leaf_response(&idx, "missing", EvalOptions::default(), &mut c);
        assert_eq!(r.polarity(), Polarity::Pos);
        assert!(r.set().is_empty());
        assert_eq!(c.element_touches, 0);
    }

    #[test]
    fn adaptive_leaf_flips_dense_terms() {
        let idx = build_index::<u32>(&[("0", &["b"]), ("1", &["b"])]).unwrap();
        let opts = EvalOptions {
            adaptive_leaf_polarity: true,
            ..EvalOptions::default()
        };
        let mut c = CostCounters::default();
        let r = leaf_response(&idx, "b", opts, &mut c);
        assert_eq!(r.polarity(), Polarity::Neg);
        assert!(r.set().is_empty());

        let mut c = CostCounters::default();
        let r = leaf_response(&idx, "b", EvalOptions::default(), &mut c);
        assert_eq!(r.polarity(), Polarity::Pos);
        assert_eq!(r.set().as_slice(), &[0, 1]);
    }

    #[test]
    fn adaptive_leaf_bounds_stopword_materialization() {
        // stopword covering 90% of a 10^4-doc corpus
        let mut b = crate::index::IndexBuilder::<u32>::new();
        for d in 0..10_000u32 {
            if d < 9_000 {
                b.add_doc(&format!("d{d}"), ["the"]).unwrap();
            } else {
                b.add_doc(&format!("d{d}"), ["rare"]).unwrap();
            }
        }
        let idx = b.finish();
        let opts = EvalOptions {
            adaptive_leaf_polarity: true,
            ..EvalOptions::default()
        };
        let mut c = CostCounters::default();
        let r = leaf_response(&idx, "the", opts, &mut c);
        assert_eq!(r.polarity(), Polarity::Neg);
        assert_eq!(r.set().len(), 1_000);
    }

    #[test]
    fn adaptive_polarity_shrinks_intermediates_end_to_end() {
        // AND(stopword, rare) over a corpus where the stopword covers 90%
        let mut b = crate::index::IndexBuilder::<u32>::new();
        for d in 0..10_000u32 {
            let mut tokens = vec![];
            if d < 9_000 {
                tokens.push("the");
            }
            if d % 100 == 0 {
                tokens.push("rare");
            }
            b.add_doc(&format!("d{d}"), tokens).unwrap();
        }
        let idx = b.finish();
        let dag = norm(
            vec![term("the"), term("rare"), QueryNode::And(vec![NodeId::new(0), NodeId::new(1)])],
            2,
        );
        let dense = compute_pn(&dag, &idx, EvalOptions::default());
        let adaptive = compute_pn(
            &dag,
            &idx,
            EvalOptions {
                adaptive_leaf_polarity: true,
                ..EvalOptions::default()
            },
        );
        assert_eq!(dense.result, adaptive.result);
        assert_eq!(dense.counters.max_materialized, 9_000);
        assert!(adaptive.counters.max_materialized <= 1_000);
    }

    #[test]
    fn u64_universe_evaluates() {
        let idx = crate::index::InvertedIndex::<u64>::from_postings(
            6,
            [
                ("a".to_string(), PostingList::from_sorted(vec![1u64, 4])),
                ("b".to_string(), PostingList::from_sorted(vec![1u64, 2, 5])),
            ],
        )
        .unwrap();
        let dag = norm(
            vec![term("a"), term("b"), QueryNode::Not(NodeId::new(1)), QueryNode::Or(vec![NodeId::new(0), NodeId::new(2)])],
            3,
        );
        let report = compute_pn(&dag, &idx, EvalOptions::default());
        assert_eq!(report.result.as_slice(), &[0u64, 1, 3, 4]);
    }

    #[test]
    fn finalize_cases() {
        let mut c = CostCounters::default();
        let neg = PNResponse::neg(PostingList::from_sorted(vec![2u32]));
        assert_eq!(finalize(&neg, 4, &mut c).as_slice(), &[0, 1, 3]);
        assert_eq!(c.finalization_touches, 4);

        let pos = PNResponse::pos(PostingList::from_sorted(vec![0u32, 1]));
        let mut c = CostCounters::default();
        assert_eq!(finalize(&pos, 4, &mut c).as_slice(), &[0, 1]);
        assert_eq!(c.finalization_touches, 0);

        let empty_neg = PNResponse::neg(PostingList::<u32>::new());
        let mut c = CostCounters::default();
        assert_eq!(finalize(&empty_neg, 5, &mut c).as_slice(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn shared_nodes_visited_once() {
        // diamond AND(or, NOT(or)) with the OR shared
        let dag = QueryDag::new(
            vec![
                term("t1"),
                term("t2"),
                QueryNode::Or(vec![NodeId::new(0), NodeId::new(1)]),
                QueryNode::Not(NodeId::new(2)),
                QueryNode::And(vec![NodeId::new(2), NodeId::new(3)]),
            ],
            NodeId::new(4),
        )
        .normalize()
        .unwrap();
        let idx = build_index::<u32>(&[("0", &["t1"]), ("1", &["t2"])]).unwrap();
        let report = compute_pn(&dag, &idx, EvalOptions::default());
        assert_eq!(report.counters.node_visits, 5);
        assert_eq!(report.result.as_slice(), &[] as &[u32]);
    }

    #[test]
    fn syntactic_duplicates_still_computed_once() {
        // same subexpression spelled twice; internal CSE merges it
        let dag = QueryDag::new(
            vec![
                term("t1"),
                term("t1"),
                QueryNode::Not(NodeId::new(0)),
                QueryNode::Not(NodeId::new(1)),
                QueryNode::And(vec![NodeId::new(2), NodeId::new(3)]),
            ],
            NodeId::new(4),
        )
        .normalize()
        .unwrap();
        let idx = build_index::<u32>(&[("0", &["t1"])]).unwrap();
        let report = compute_pn(&dag, &idx, EvalOptions::default());
        // t1, not, and(x,x) = 3 post-CSE nodes
        assert_eq!(report.counters.node_visits, 3);
    }

    #[test]
    fn parallel_matches_sequential() {
        let idx = build_index::<u32>(&[
            ("0", &["a"]),
            ("1", &["a", "b"]),
            ("2", &["b", "c"]),
            ("3", &["c"]),
        ])
        .unwrap();
        let dag = QueryDag::new(
            vec![
                term("a"),
                term("b"),
                term("c"),
                QueryNode::Or(vec![NodeId::new(0), NodeId::new(1)]),
                QueryNode::Not(NodeId::new(2)),
                QueryNode::And(vec![NodeId::new(3), NodeId::new(4)]),
            ],
            NodeId::new(5),
        )
        .normalize()
        .unwrap();
        let seq = compute_pn(&dag, &idx, EvalOptions::default());
        let par = compute_pn(
            &dag,
            &idx,
            EvalOptions {
                parallel: true,
                ..EvalOptions::default()
            },
        );
        assert_eq!(seq, par);
    }
}
