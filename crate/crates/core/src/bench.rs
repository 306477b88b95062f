//! Synthetic corpora and the desk-scale experiments that make the engine's
//! complexity separations measurable.
//!
//! Everything here is seeded: corpus generation derives one RNG per term (or
//! field) from the base seed, so runs are reproducible bit-for-bit. Verdicts
//! are computed from the cost counters; wall-clock time is reported but never
//! judged.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    eval_naive_taat, eval_oracle, eval_tree_iterative, unroll_to_tree, unrolled_node_count,
    BaselineError, CircuitInstance, Gate, DEFAULT_EXPANSION_LIMIT,
};
use crate::circuit::{CircuitError, DagBuilder, WeightedTerm, DEFAULT_MAX_SUM_WIDTH};
use crate::dag::{DagError, NodeId, NormalizedDag, QueryDag, QueryNode};
use crate::eval::{compute_pn, EvalOptions};
use crate::index::{CorpusDoc, IndexError, InvertedIndex, PostingList};
use crate::{doc_from_u64, doc_to_u64, DocInt};

/// Element-touch budget for the simulated document-at-a-time baseline inside
/// experiments. Exceeding it is a reported outcome, not a failure.
pub const DEFAULT_WORK_LIMIT: u64 = 1 << 28;

#[derive(thiserror::Error, Debug)]
pub enum BenchError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("invalid experiment parameters: {0}")]
    InvalidParams(String),
    #[error("unknown experiment {0:?} (expected disjunctive-negation, xor-chain, or net-positive)")]
    UnknownExperiment(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Dag(#[from] DagError),
}

/// Distribution of a synthetic numeric field value.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ValueDist {
    Uniform { lo: u64, hi: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermSpec {
    pub term: String,
    /// Independent per-document inclusion probability.
    pub density: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NumericFieldSpec {
    pub field: String,
    pub width: u32,
    pub dist: ValueDist,
}

/// Specification of a synthetic corpus; deterministic given `seed`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub universe_size: u64,
    pub term_specs: Vec<TermSpec>,
    pub numeric_fields: Vec<NumericFieldSpec>,
    pub seed: u64,
}

impl CorpusSpec {
    fn validate(&self) -> Result<(), BenchError> {
        for t in &self.term_specs {
            if !(0.0..=1.0).contains(&t.density) {
                return Err(BenchError::InvalidSpec(format!(
                    "density {} for term {:?} outside [0, 1]",
                    t.density, t.term
                )));
            }
        }
        for f in &self.numeric_fields {
            if f.width == 0 || f.width > 64 {
                return Err(BenchError::InvalidSpec(format!(
                    "field {:?} width {} outside [1, 64]",
                    f.field, f.width
                )));
            }
            let ValueDist::Uniform { lo, hi } = f.dist;
            if lo > hi || (f.width < 64 && hi >= 1 << f.width) {
                return Err(BenchError::InvalidSpec(format!(
                    "field {:?} range [{lo}, {hi}] does not fit width {}",
                    f.field, f.width
                )));
            }
        }
        Ok(())
    }
}

fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn sample_term_list<D: DocInt>(universe_size: u64, density: f64, seed: u64) -> PostingList<D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    for d in 0..universe_size {
        if rng.random_bool(density) {
            docs.push(doc_from_u64(d));
        }
    }
    PostingList::from_sorted(docs)
}

fn sample_field_values(universe_size: u64, dist: &ValueDist, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ValueDist::Uniform { lo, hi } = *dist;
    (0..universe_size).map(|_| rng.random_range(lo..=hi)).collect()
}

fn corpus_doc_key(d: u64) -> String {
    format!("d{d:08}")
}

/// Generates the inverted index for a corpus spec directly (no document
/// materialization). Identical to building from [`gen_corpus_docs`] output.
pub fn gen_corpus<D: DocInt>(spec: &CorpusSpec) -> Result<InvertedIndex<D>, BenchError> {
    spec.validate()?;
    let mut postings: Vec<(String, PostingList<D>)> = Vec::new();
    for t in &spec.term_specs {
        let list = sample_term_list(spec.universe_size, t.density, derive_seed(spec.seed, &t.term));
        // empty lists are omitted, matching what building from documents yields
        if !list.is_empty() {
            postings.push((t.term.clone(), list));
        }
    }
    for f in &spec.numeric_fields {
        let values = sample_field_values(spec.universe_size, &f.dist, derive_seed(spec.seed, &f.field));
        for bit in 0..f.width {
            let docs: Vec<D> = values
                .iter()
                .enumerate()
                .filter(|(_, v)| *v >> bit & 1 == 1)
                .map(|(d, _)| doc_from_u64(d as u64))
                .collect();
            if !docs.is_empty() {
                postings.push((format!("{}#BIT{bit}", f.field), PostingList::from_sorted(docs)));
            }
        }
    }
    let mut index = InvertedIndex::from_postings(spec.universe_size, postings)?;
    index.set_doc_keys((0..spec.universe_size).map(corpus_doc_key).collect());
    Ok(index)
}

/// Materializes the corpus as documents (for JSONL emission); inverting these
/// through the index builder reproduces [`gen_corpus`] exactly.
pub fn gen_corpus_docs(spec: &CorpusSpec) -> Result<Vec<CorpusDoc>, BenchError> {
    spec.validate()?;
    let mut tokens: Vec<Vec<String>> = vec![Vec::new(); spec.universe_size as usize];
    for t in &spec.term_specs {
        let list = sample_term_list::<u64>(spec.universe_size, t.density, derive_seed(spec.seed, &t.term));
        for &d in list.iter() {
            tokens[d as usize].push(t.term.clone());
        }
    }
    for f in &spec.numeric_fields {
        let values = sample_field_values(spec.universe_size, &f.dist, derive_seed(spec.seed, &f.field));
        for (d, v) in values.iter().enumerate() {
            tokens[d].extend(crate::index::bit_tokens(&f.field, *v));
        }
    }
    Ok(tokens
        .into_iter()
        .enumerate()
        .map(|(d, tokens)| CorpusDoc {
            id: corpus_doc_key(d as u64),
            tokens,
        })
        .collect())
}

/// Index with exact-size posting lists (ids sampled without replacement),
/// for sweeps that must hold list sizes fixed while the universe grows.
pub fn index_with_fixed_lists<D: DocInt>(
    universe_size: u64,
    lists: &[(&str, u64)],
    seed: u64,
) -> Result<InvertedIndex<D>, BenchError> {
    let mut postings = Vec::new();
    for (term, size) in lists {
        if *size > universe_size {
            return Err(BenchError::InvalidParams(format!(
                "list size {size} exceeds universe {universe_size}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, term));
        let mut docs: Vec<D> = rand::seq::index::sample(&mut rng, universe_size as usize, *size as usize)
            .into_iter()
            .map(|d| doc_from_u64(d as u64))
            .collect();
        docs.sort_unstable();
        postings.push((term.to_string(), PostingList::from_sorted(docs)));
    }
    Ok(InvertedIndex::from_postings(universe_size, postings)?)
}

/// Random normalized dag over the given terms: generated bottom-up so
/// children always precede parents (acyclic by construction), with a mix of
/// leaves, negations, and binary operators.
pub fn random_dag(rng: &mut ChaCha8Rng, max_nodes: usize, terms: &[String]) -> NormalizedDag {
    let target = rng.random_range(1..=max_nodes.max(1));
    let mut nodes: Vec<QueryNode> = Vec::with_capacity(target);
    for i in 0..target {
        let roll: f64 = rng.random();
        let node = if i == 0 || roll < 0.30 {
            QueryNode::Term(terms[rng.random_range(0..terms.len())].clone())
        } else if roll < 0.35 {
            if rng.random_bool(0.5) {
                QueryNode::ConstTrue
            } else {
                QueryNode::ConstFalse
            }
        } else if roll < 0.50 {
            QueryNode::Not(NodeId::new(rng.random_range(0..i) as u32))
        } else {
            let a = NodeId::new(rng.random_range(0..i) as u32);
            let b = NodeId::new(rng.random_range(0..i) as u32);
            if roll < 0.75 {
                QueryNode::And(vec![a, b])
            } else {
                QueryNode::Or(vec![a, b])
            }
        };
        nodes.push(node);
    }
    let root = NodeId::new(nodes.len() as u32 - 1);
    QueryDag::new(nodes, root)
        .normalize()
        .expect("generated dags are acyclic")
}

/// Random circuit instance with fixed input values, gates in dependency order.
pub fn random_circuit(rng: &mut ChaCha8Rng, max_gates: usize) -> CircuitInstance {
    let target = rng.random_range(1..=max_gates.max(1));
    let mut gates: Vec<Gate> = Vec::with_capacity(target);
    for i in 0..target {
        let roll: f64 = rng.random();
        let gate = if i == 0 || roll < 0.30 {
            Gate::Input(rng.random_bool(0.5))
        } else if roll < 0.50 {
            Gate::Not(rng.random_range(0..i))
        } else {
            let a = rng.random_range(0..i);
            let b = rng.random_range(0..i);
            if roll < 0.75 {
                Gate::And(vec![a, b])
            } else {
                Gate::Or(vec![a, b])
            }
        };
        gates.push(gate);
    }
    let output = gates.len() - 1;
    CircuitInstance::new(gates, output).expect("generated circuits are well-formed")
}

/// Left-leaning exclusive-or chain over `terms`, built with sharing: each
/// level references the previous level's node twice.
pub fn xor_chain(builder: &mut DagBuilder, terms: &[String]) -> NodeId {
    let mut acc = builder.term(&terms[0]);
    for t in &terms[1..] {
        let leaf = builder.term(t);
        acc = builder.xor(acc, leaf);
    }
    acc
}

/// One experiment configuration row: parameters, counter-derived metrics, and
/// informational wall time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub params: BTreeMap<String, u64>,
    pub metrics: BTreeMap<String, u64>,
    pub wall_ms: f64,
}

impl BenchRow {
    fn new() -> Self {
        BenchRow {
            params: BTreeMap::new(),
            metrics: BTreeMap::new(),
            wall_ms: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn verdict(name: &str, pass: bool, detail: String) -> Verdict {
    Verdict {
        name: name.to_string(),
        pass,
        detail,
    }
}

/// Machine-readable experiment report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub experiment: String,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    pub verdicts: Vec<Verdict>,
}

impl BenchReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV: one line per row, parameter columns then metric columns.
    pub fn to_csv(&self) -> String {
        let mut param_cols: Vec<&str> = Vec::new();
        let mut metric_cols: Vec<&str> = Vec::new();
        for row in &self.rows {
            for k in row.params.keys() {
                if !param_cols.contains(&k.as_str()) {
                    param_cols.push(k);
                }
            }
            for k in row.metrics.keys() {
                if !metric_cols.contains(&k.as_str()) {
                    metric_cols.push(k);
                }
            }
        }
        param_cols.sort_unstable();
        metric_cols.sort_unstable();
        let mut out = String::from("experiment");
        for c in param_cols.iter().chain(metric_cols.iter()) {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",wall_ms\n");
        for row in &self.rows {
            out.push_str(&self.experiment);
            for c in &param_cols {
                out.push(',');
                if let Some(v) = row.params.get(*c) {
                    out.push_str(&v.to_string());
                }
            }
            for c in &metric_cols {
                out.push(',');
                if let Some(v) = row.metrics.get(*c) {
                    out.push_str(&v.to_string());
                }
            }
            out.push_str(&format!(",{:.3}\n", row.wall_ms));
        }
        out
    }

    /// Equality of everything reproducible: wall times are excluded.
    pub fn deterministic_eq(&self, other: &BenchReport) -> bool {
        self.experiment == other.experiment
            && self.seed == other.seed
            && self.verdicts == other.verdicts
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.params == b.params && a.metrics == b.metrics)
    }
}

/// Universe sweep for `A ∨ ¬B` with fixed posting-list sizes.
#[derive(Clone, Debug)]
pub struct DisjunctiveNegationParams {
    pub universe_sizes: Vec<u64>,
    /// One entry per universe size; must all be equal (the sweep is only
    /// meaningful when the active lists stay fixed).
    pub list_sizes: Vec<u64>,
    pub seed: u64,
}

impl Default for DisjunctiveNegationParams {
    fn default() -> Self {
        DisjunctiveNegationParams {
            universe_sizes: vec![10_000, 100_000, 1_000_000],
            list_sizes: vec![1_000; 3],
            seed: 42,
        }
    }
}

/// The universal-scan separation: element touches of the engine stay flat
/// across the universe sweep while both baselines scale with the universe.
pub fn exp_disjunctive_negation(
    params: &DisjunctiveNegationParams,
) -> Result<BenchReport, BenchError> {
    if params.universe_sizes.is_empty() {
        return Err(BenchError::InvalidParams("empty universe sweep".into()));
    }
    if params.list_sizes.len() != params.universe_sizes.len() {
        return Err(BenchError::InvalidParams(
            "need one list size per universe size".into(),
        ));
    }
    if params.list_sizes.windows(2).any(|w| w[0] != w[1]) {
        return Err(BenchError::InvalidParams(
            "posting-list sizes must stay fixed across the universe sweep".into(),
        ));
    }
    let list_size = params.list_sizes[0];

    let mut rows = Vec::new();
    for &u in &params.universe_sizes {
        let index = index_with_fixed_lists::<u64>(
            u,
            &[("a", list_size), ("b", list_size)],
            derive_seed(params.seed, &format!("u{u}")),
        )?;
        // A ∨ ¬B
        let dag = QueryDag::new(
            vec![
                QueryNode::Term("a".into()),
                QueryNode::Term("b".into()),
                QueryNode::Not(NodeId::new(1)),
                QueryNode::Or(vec![NodeId::new(0), NodeId::new(2)]),
            ],
            NodeId::new(3),
        );
        let norm = dag.normalize()?;

        let start = Instant::now();
        let pn = compute_pn(&norm, &index, EvalOptions::default());
        let pn_wall = start.elapsed().as_secs_f64() * 1e3;

        let (taat_result, taat) = eval_naive_taat(&dag, &index)?;
        let (tree, _) = unroll_to_tree(&dag, DEFAULT_EXPANSION_LIMIT)
            .expect("A ∨ ¬B is already a tree");
        let (daat_result, daat) = match eval_tree_iterative(&tree, &index, u64::MAX) {
            Ok(r) => r,
            Err(e) => return Err(BenchError::InvalidParams(format!("baseline failed: {e}"))),
        };

        let mut row = BenchRow::new();
        row.params.insert("universe_size".into(), u);
        row.params.insert("list_size".into(), list_size);
        row.metrics.insert("pn_element_touches".into(), pn.counters.element_touches);
        row.metrics.insert("pn_finalization_touches".into(), pn.counters.finalization_touches);
        row.metrics.insert("taat_element_touches".into(), taat.element_touches);
        row.metrics.insert("daat_element_touches".into(), daat.element_touches);
        row.metrics.insert("result_size".into(), pn.result.len() as u64);
        let agree = pn.result == taat_result && pn.result == daat_result;
        row.metrics.insert("engines_agree".into(), agree as u64);
        row.wall_ms = pn_wall;
        rows.push(row);
    }

    let ratio = |k: &str, rows: &[BenchRow]| {
        let vals: Vec<u64> = rows.iter().map(|r| r.metrics[k]).collect();
        let min = *vals.iter().min().unwrap();
        let max = *vals.iter().max().unwrap();
        (min.max(1), max)
    };
    let sweep_ratio = {
        let min = params.universe_sizes.iter().min().unwrap();
        let max = params.universe_sizes.iter().max().unwrap();
        (*max as f64) / (*min as f64)
    };
    let (pn_min, pn_max) = ratio("pn_element_touches", &rows);
    let (taat_min, taat_max) = ratio("taat_element_touches", &rows);
    let (daat_min, daat_max) = ratio("daat_element_touches", &rows);
    let pn_flat = (pn_max as f64) < 2.0 * (pn_min as f64);
    let taat_grows = (taat_max as f64) >= sweep_ratio / 2.0 * (taat_min as f64);
    let daat_grows = (daat_max as f64) >= sweep_ratio / 2.0 * (daat_min as f64);
    let agree = rows.iter().all(|r| r.metrics["engines_agree"] == 1);

    let verdicts = vec![
        verdict(
            "pn_touches_flat",
            pn_flat,
            format!("engine touches {pn_min}..{pn_max} over a {sweep_ratio:.0}x universe sweep"),
        ),
        verdict(
            "taat_touches_grow",
            taat_grows,
            format!("naive TAAT touches {taat_min}..{taat_max}"),
        ),
        verdict(
            "daat_touches_grow",
            daat_grows,
            format!("simulated DAAT touches {daat_min}..{daat_max}"),
        ),
        verdict("engines_agree", agree, "all evaluators returned identical sets".into()),
    ];

    Ok(BenchReport {
        experiment: "disjunctive-negation".into(),
        seed: params.seed,
        rows,
        verdicts,
    })
}

/// Depth sweep for the re-convergent XOR chain.
#[derive(Clone, Debug)]
pub struct XorChainParams {
    pub depths: Vec<u32>,
    pub universe_size: u64,
    pub list_size: u64,
    pub seed: u64,
    pub expansion_limit: u64,
    pub work_limit: u64,
}

impl Default for XorChainParams {
    fn default() -> Self {
        XorChainParams {
            depths: vec![1, 2, 4, 8, 12, 20],
            universe_size: 100_000,
            list_size: 1_000,
            seed: 42,
            expansion_limit: DEFAULT_EXPANSION_LIMIT,
            work_limit: DEFAULT_WORK_LIMIT,
        }
    }
}

/// The tree-expansion separation: unrolling the chain explodes exponentially
/// while the engine's node visits stay linear in depth.
pub fn exp_xor_chain(params: &XorChainParams) -> Result<BenchReport, BenchError> {
    if params.depths.is_empty() {
        return Err(BenchError::InvalidParams("empty depth sweep".into()));
    }
    let max_depth = *params.depths.iter().max().unwrap();
    let terms: Vec<String> = (0..=max_depth).map(|i| format!("t{i}")).collect();
    let lists: Vec<(&str, u64)> = terms.iter().map(|t| (t.as_str(), params.list_size)).collect();
    let index = index_with_fixed_lists::<u64>(params.universe_size, &lists, params.seed)?;

    let mut rows = Vec::new();
    for &depth in &params.depths {
        let mut builder = DagBuilder::new();
        let root = xor_chain(&mut builder, &terms[..=depth as usize]);
        let dag = builder.finish(root).prune();

        let start = Instant::now();
        let pn = compute_pn(&dag, &index, EvalOptions::default());
        let pn_wall = start.elapsed().as_secs_f64() * 1e3;

        let oracle = eval_oracle(dag.as_dag(), &index)?;
        let unrolled = unrolled_node_count(dag.as_dag())?;

        let mut row = BenchRow::new();
        row.params.insert("depth".into(), depth as u64);
        row.params.insert("universe_size".into(), params.universe_size);
        row.metrics.insert("dag_nodes".into(), dag.as_dag().len() as u64);
        row.metrics.insert("pn_node_visits".into(), pn.counters.node_visits);
        row.metrics.insert("pn_element_touches".into(), pn.counters.element_touches);
        row.metrics.insert("result_size".into(), pn.result.len() as u64);
        row.metrics.insert("unrolled_nodes".into(), unrolled);
        row.metrics.insert("pn_equals_oracle".into(), (pn.result == oracle) as u64);

        match unroll_to_tree(dag.as_dag(), params.expansion_limit) {
            Ok((tree, _)) => {
                row.metrics.insert("unroll_exceeded".into(), 0);
                match eval_tree_iterative(&tree, &index, params.work_limit) {
                    Ok((result, counters)) => {
                        row.metrics.insert("baseline_completed".into(), 1);
                        row.metrics.insert("baseline_element_touches".into(), counters.element_touches);
                        row.metrics.insert("baseline_equals_pn".into(), (result == pn.result) as u64);
                    }
                    Err(BaselineError::WorkLimitExceeded { touches, .. }) => {
                        row.metrics.insert("baseline_completed".into(), 0);
                        row.metrics.insert("baseline_element_touches".into(), touches);
                    }
                    Err(e) => return Err(BenchError::InvalidParams(format!("baseline failed: {e}"))),
                }
            }
            Err(BaselineError::ExpansionLimitExceeded { .. }) => {
                row.metrics.insert("unroll_exceeded".into(), 1);
                row.metrics.insert("baseline_completed".into(), 0);
            }
            Err(e) => return Err(BenchError::InvalidParams(format!("unroll failed: {e}"))),
        }
        row.wall_ms = pn_wall;
        rows.push(row);
    }

    let exponential = rows.iter().all(|r| {
        let d = r.params["depth"] as u32;
        r.metrics["unrolled_nodes"] >= 1u64 << d.min(63)
    });
    let linear = rows.iter().all(|r| {
        let d = r.params["depth"];
        r.metrics["pn_node_visits"] <= 8 * d + 8
    });
    let oracle_ok = rows.iter().all(|r| r.metrics["pn_equals_oracle"] == 1);
    let baseline_ok = rows
        .iter()
        .filter(|r| r.metrics.get("baseline_completed") == Some(&1))
        .all(|r| r.metrics["baseline_equals_pn"] == 1);
    let completed = rows
        .iter()
        .filter(|r| r.metrics.get("baseline_completed") == Some(&1))
        .count();

    let verdicts = vec![
        verdict(
            "unroll_exponential",
            exponential,
            "unrolled node count >= 2^depth at every depth".into(),
        ),
        verdict(
            "pn_visits_linear",
            linear,
            "engine node visits <= 8*depth + 8 at every depth".into(),
        ),
        verdict("pn_equals_oracle", oracle_ok, "engine matched brute force at every depth".into()),
        verdict(
            "baseline_agrees_where_complete",
            baseline_ok,
            format!("baseline completed {completed}/{} depths and agreed on all of them", rows.len()),
        ),
    ];

    Ok(BenchReport {
        experiment: "xor-chain".into(),
        seed: params.seed,
        rows,
        verdicts,
    })
}

/// Weighted net-positive constraint joined with a topic disjunction.
#[derive(Clone, Debug)]
pub struct NetPositiveParams {
    pub universe_size: u64,
    pub topic_term_count: usize,
    pub topic_density: f64,
    pub weighted_density: f64,
    pub good_weights: Vec<u64>,
    pub bad_weights: Vec<u64>,
    pub seed: u64,
    pub max_sum_width: u32,
}

impl Default for NetPositiveParams {
    fn default() -> Self {
        NetPositiveParams {
            universe_size: 10_000,
            topic_term_count: 24,
            topic_density: 0.05,
            weighted_density: 0.35,
            good_weights: vec![5, 4, 3, 2, 1],
            bad_weights: vec![5, 4, 3, 2, 1],
            seed: 42,
            max_sum_width: DEFAULT_MAX_SUM_WIDTH,
        }
    }
}

impl NetPositiveParams {
    pub fn good_terms(&self) -> Vec<WeightedTerm> {
        self.good_weights
            .iter()
            .enumerate()
            .map(|(i, &w)| WeightedTerm::new(format!("good{i}"), w))
            .collect()
    }

    pub fn bad_terms(&self) -> Vec<WeightedTerm> {
        self.bad_weights
            .iter()
            .enumerate()
            .map(|(i, &w)| WeightedTerm::new(format!("bad{i}"), w))
            .collect()
    }

    pub fn topic_terms(&self) -> Vec<String> {
        (0..self.topic_term_count).map(|i| format!("topic{i:02}")).collect()
    }

    pub fn corpus_spec(&self) -> CorpusSpec {
        let mut term_specs: Vec<TermSpec> = self
            .topic_terms()
            .into_iter()
            .map(|term| TermSpec { term, density: self.topic_density })
            .collect();
        for wt in self.good_terms().iter().chain(self.bad_terms().iter()) {
            term_specs.push(TermSpec {
                term: wt.term.clone(),
                density: self.weighted_density,
            });
        }
        CorpusSpec {
            universe_size: self.universe_size,
            term_specs,
            numeric_fields: vec![],
            seed: self.seed,
        }
    }
}

/// Number of DNF clauses a static tree expansion of the constraint would
/// need: one clause per satisfying containment pattern of the weighted
/// terms, distributed over every topic alternative. Computed by enumerating
/// the `2^(g+b)` patterns, never materialized.
pub fn dnf_clause_count(good: &[u64], bad: &[u64], topic_terms: u64) -> u64 {
    let g = good.len();
    let b = bad.len();
    assert!(g + b <= 24, "pattern enumeration is exponential in the term count");
    let mut satisfying = 0u64;
    for mask in 0u32..1 << (g + b) {
        let good_sum: u64 = good
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &w)| w)
            .sum();
        let bad_sum: u64 = bad
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> (g + i) & 1 == 1)
            .map(|(_, &w)| w)
            .sum();
        if good_sum > bad_sum {
            satisfying += 1;
        }
    }
    satisfying * topic_terms
}

/// Integer-arithmetic ground truth for the net-positive experiment: per
/// document, sum the weights of the matching terms on each side and compare,
/// then require at least one topic term.
pub fn weighted_net_positive_oracle<D: DocInt>(
    index: &InvertedIndex<D>,
    good: &[WeightedTerm],
    bad: &[WeightedTerm],
    topic_terms: &[String],
) -> PostingList<D> {
    let n = index.universe_size() as usize;
    let mut good_sum = vec![0u64; n];
    let mut bad_sum = vec![0u64; n];
    let mut topic = vec![false; n];
    for wt in good {
        for &d in index.lookup(&wt.term) {
            good_sum[doc_to_u64(d) as usize] += wt.weight;
        }
    }
    for wt in bad {
        for &d in index.lookup(&wt.term) {
            bad_sum[doc_to_u64(d) as usize] += wt.weight;
        }
    }
    for t in topic_terms {
        for &d in index.lookup(t) {
            topic[doc_to_u64(d) as usize] = true;
        }
    }
    let docs = (0..n)
        .filter(|&d| topic[d] && good_sum[d] > bad_sum[d])
        .map(|d| doc_from_u64(d as u64))
        .collect();
    PostingList::from_sorted(docs)
}

/// The compiled-arithmetic experiment: the constraint circuit stays a few
/// hundred nodes and evaluates exactly, where a DNF expansion would need
/// tens of thousands of clauses.
pub fn exp_net_positive(params: &NetPositiveParams) -> Result<BenchReport, BenchError> {
    let index = gen_corpus::<u64>(&params.corpus_spec())?;
    let good = params.good_terms();
    let bad = params.bad_terms();
    let topics = params.topic_terms();

    let mut builder = DagBuilder::new();
    let constraint = builder.weighted_sum_gt(&good, &bad, params.max_sum_width)?;
    let mut topic_node = builder.const_false();
    for t in &topics {
        let leaf = builder.term(t);
        topic_node = builder.or(topic_node, leaf);
    }
    let root = builder.and(topic_node, constraint);
    let dag = builder.finish(root).prune();

    let start = Instant::now();
    let pn = compute_pn(&dag, &index, EvalOptions::default());
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let oracle = weighted_net_positive_oracle(&index, &good, &bad, &topics);
    let clauses = dnf_clause_count(&params.good_weights, &params.bad_weights, topics.len() as u64);
    let node_count = dag.as_dag().len() as u64;

    let mut row = BenchRow::new();
    row.params.insert("universe_size".into(), params.universe_size);
    row.params.insert("topic_terms".into(), topics.len() as u64);
    row.params.insert("weighted_terms".into(), (good.len() + bad.len()) as u64);
    row.metrics.insert("dag_nodes".into(), node_count);
    row.metrics.insert("dnf_clauses".into(), clauses);
    row.metrics.insert("pn_element_touches".into(), pn.counters.element_touches);
    row.metrics.insert("pn_node_visits".into(), pn.counters.node_visits);
    row.metrics.insert("result_size".into(), pn.result.len() as u64);
    row.metrics.insert("oracle_equal".into(), (pn.result == oracle) as u64);
    row.wall_ms = wall_ms;

    let verdicts = vec![
        verdict(
            "dag_node_count_in_range",
            (100..=2000).contains(&node_count),
            format!("compiled constraint dag has {node_count} nodes"),
        ),
        verdict(
            "dnf_explodes",
            clauses >= 10_000,
            format!("equivalent DNF needs {clauses} clauses"),
        ),
        verdict(
            "oracle_equal",
            pn.result == oracle,
            format!("engine returned {} docs, oracle {}", pn.result.len(), oracle.len()),
        ),
    ];

    Ok(BenchReport {
        experiment: "net-positive".into(),
        seed: params.seed,
        rows: vec![row],
        verdicts,
    })
}

/// Runs an experiment by CLI name with its default parameters.
pub fn run_experiment(name: &str, seed: Option<u64>) -> Result<BenchReport, BenchError> {
    match name {
        "disjunctive-negation" => {
            let mut p = DisjunctiveNegationParams::default();
            if let Some(s) = seed {
                p.seed = s;
            }
            exp_disjunctive_negation(&p)
        }
        "xor-chain" => {
            let mut p = XorChainParams::default();
            if let Some(s) = seed {
                p.seed = s;
            }
            exp_xor_chain(&p)
        }
        "net-positive" => {
            let mut p = NetPositiveParams::default();
            if let Some(s) = seed {
                p.seed = s;
            }
            exp_net_positive(&p)
        }
        other => Err(BenchError::UnknownExperiment(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::IndexBuilder;

    #[test]
    fn density_extremes() {
        let spec = CorpusSpec {
            universe_size: 50,
            term_specs: vec![
                TermSpec { term: "all".into(), density: 1.0 },
                TermSpec { term: "none".into(), density: 0.0 },
            ],
            numeric_fields: vec![],
            seed: 7,
        };
        let idx = gen_corpus::<u32>(&spec).unwrap();
        assert_eq!(idx.lookup("all").len(), 50);
        assert_eq!(idx.lookup("none").len(), 0);
    }

    #[test]
    fn density_within_binomial_bounds() {
        // |U| = 1e5, p = 0.01: mean 1000, sigma = sqrt(1e5 * 0.01 * 0.99) ~ 31.5
        let spec = CorpusSpec {
            universe_size: 100_000,
            term_specs: vec![TermSpec { term: "t".into(), density: 0.01 }],
            numeric_fields: vec![],
            seed: 11,
        };
        let idx = gen_corpus::<u32>(&spec).unwrap();
        let size = idx.lookup("t").len() as f64;
        assert!((size - 1000.0).abs() <= 3.0 * 31.5, "list size {size} outside 3 sigma");
    }

    #[test]
    fn invalid_density_rejected() {
        let spec = CorpusSpec {
            universe_size: 10,
            term_specs: vec![TermSpec { term: "t".into(), density: 1.5 }],
            numeric_fields: vec![],
            seed: 0,
        };
        assert!(matches!(gen_corpus::<u32>(&spec), Err(BenchError::InvalidSpec(_))));
    }

    #[test]
    fn docs_and_direct_generation_agree() {
        let spec = CorpusSpec {
            universe_size: 300,
            term_specs: vec![
                TermSpec { term: "a".into(), density: 0.3 },
                TermSpec { term: "b".into(), density: 0.6 },
            ],
            numeric_fields: vec![NumericFieldSpec {
                field: "v".into(),
                width: 6,
                dist: ValueDist::Uniform { lo: 0, hi: 63 },
            }],
            seed: 99,
        };
        let direct = gen_corpus::<u32>(&spec).unwrap();
        let docs = gen_corpus_docs(&spec).unwrap();
        let mut builder = IndexBuilder::<u32>::new();
        for doc in &docs {
            builder.add_doc(&doc.id, doc.tokens.clone()).unwrap();
        }
        let via_docs = builder.finish();
        assert_eq!(direct, via_docs);
        assert_eq!(direct.to_bytes(), via_docs.to_bytes());
    }

    #[test]
    fn fixed_lists_have_exact_sizes() {
        let idx = index_with_fixed_lists::<u32>(10_000, &[("a", 100), ("b", 100)], 1).unwrap();
        assert_eq!(idx.lookup("a").len(), 100);
        assert_eq!(idx.lookup("b").len(), 100);
        assert!(index_with_fixed_lists::<u32>(10, &[("a", 100)], 1).is_err());
    }

    #[test]
    fn disjunctive_negation_guard_rejects_scaling_lists() {
        let params = DisjunctiveNegationParams {
            universe_sizes: vec![1_000, 10_000],
            list_sizes: vec![100, 1_000],
            seed: 1,
        };
        assert!(matches!(
            exp_disjunctive_negation(&params),
            Err(BenchError::InvalidParams(_))
        ));
    }

    #[test]
    fn disjunctive_negation_small_sweep_passes() {
        let params = DisjunctiveNegationParams {
            universe_sizes: vec![1_000, 100_000],
            list_sizes: vec![100, 100],
            seed: 5,
        };
        let report = exp_disjunctive_negation(&params).unwrap();
        assert!(report.all_pass(), "{}", report.to_json());
    }

    #[test]
    fn single_size_sweep_is_vacuously_flat() {
        let params = DisjunctiveNegationParams {
            universe_sizes: vec![1_000],
            list_sizes: vec![100],
            seed: 5,
        };
        let report = exp_disjunctive_negation(&params).unwrap();
        assert!(report.verdicts.iter().find(|v| v.name == "pn_touches_flat").unwrap().pass);
    }

    #[test]
    fn xor_chain_small_depths() {
        let params = XorChainParams {
            depths: vec![1, 2, 4, 6],
            universe_size: 2_000,
            list_size: 100,
            seed: 3,
            expansion_limit: DEFAULT_EXPANSION_LIMIT,
            work_limit: DEFAULT_WORK_LIMIT,
        };
        let report = exp_xor_chain(&params).unwrap();
        assert!(report.all_pass(), "{}", report.to_json());
        // shallow depths must actually complete the baseline
        assert!(report.rows.iter().all(|r| r.metrics["baseline_completed"] == 1));
    }

    #[test]
    fn unrolled_xor_work_grows_exponentially() {
        // depth 14 vs depth 1, measured by counters on the unrolled trees
        let universe = 256u64;
        let list_size = 16u64;
        let terms: Vec<String> = (0..=14).map(|i| format!("t{i}")).collect();
        let lists: Vec<(&str, u64)> = terms.iter().map(|t| (t.as_str(), list_size)).collect();
        let index = index_with_fixed_lists::<u32>(universe, &lists, 77).unwrap();

        let touches_at = |depth: usize| {
            let mut b = DagBuilder::new();
            let root = xor_chain(&mut b, &terms[..=depth]);
            let dag = b.finish(root).prune();
            let (tree, _) = unroll_to_tree(dag.as_dag(), DEFAULT_EXPANSION_LIMIT).unwrap();
            let (result, counters) = eval_tree_iterative(&tree, &index, u64::MAX).unwrap();
            let pn = compute_pn(&dag, &index, EvalOptions::default());
            assert_eq!(result, pn.result, "baseline disagrees at depth {depth}");
            counters.element_touches
        };
        let shallow = touches_at(1);
        let deep = touches_at(14);
        // per-instance cost is roughly level-independent, so the ideal ratio
        // is (2^14 - 1) times a constant near one; assert with the same
        // half-slack the scaling verdicts use
        assert!(
            deep >= (1u64 << 13) * shallow.max(1),
            "depth-14 work {deep} is not ~2^14 times depth-1 work {shallow}"
        );
        assert!(deep >= (1u64 << 14) * list_size, "depth-14 work {deep} below 2^14 * L");
    }

    #[test]
    fn dnf_count_matches_hand_enumeration() {
        // good = {2}, bad = {1, 1}: satisfying patterns are a, ab, ac -> 3
        assert_eq!(dnf_clause_count(&[2], &[1, 1], 1), 3);
        assert_eq!(dnf_clause_count(&[2], &[1, 1], 10), 30);
        // default weights: (1024 - 76 ties) / 2 = 474 per topic alternative
        assert_eq!(dnf_clause_count(&[5, 4, 3, 2, 1], &[5, 4, 3, 2, 1], 1), 474);
    }

    #[test]
    fn net_positive_small_corpus() {
        let params = NetPositiveParams {
            universe_size: 500,
            seed: 13,
            ..NetPositiveParams::default()
        };
        let report = exp_net_positive(&params).unwrap();
        let oracle_verdict = report.verdicts.iter().find(|v| v.name == "oracle_equal").unwrap();
        assert!(oracle_verdict.pass, "{}", report.to_json());
    }

    #[test]
    fn reports_are_reproducible() {
        let params = DisjunctiveNegationParams {
            universe_sizes: vec![1_000, 10_000],
            list_sizes: vec![50, 50],
            seed: 21,
        };
        let a = exp_disjunctive_negation(&params).unwrap();
        let b = exp_disjunctive_negation(&params).unwrap();
        assert!(a.deterministic_eq(&b));
    }

    #[test]
    fn unknown_experiment_rejected() {
        assert!(matches!(
            run_experiment("warp-drive", None),
            Err(BenchError::UnknownExperiment(_))
        ));
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let params = DisjunctiveNegationParams {
            universe_sizes: vec![1_000, 10_000],
            list_sizes: vec![50, 50],
            seed: 21,
        };
        let report = exp_disjunctive_negation(&params).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("experiment,"));
    }
}
