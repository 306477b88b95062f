//! pnix command line: index building, dag evaluation, constraint
//! compilation, and the benchmark experiments.
//!
//! Exit codes: 0 success, 1 usage/validation/I-O error, 2 empty result under
//! `--fail-empty`. Everything on stdout is machine-parseable (JSON or id
//! lines); diagnostics go to stderr.

use std::fs;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use pnix::bench::run_experiment;
use pnix::circuit::{compile_constraint, Constraint, DEFAULT_MAX_SUM_WIDTH};
use pnix::{compute_pn, DocId, EvalOptions, InvertedIndex, QueryDag};

#[derive(Parser)]
#[command(name = "pnix", version, about = "Boolean retrieval over query dags")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inverted index maintenance.
    Index {
        #[command(subcommand)]
        cmd: IndexCmd,
    },
    /// Query evaluation.
    Query {
        #[command(subcommand)]
        cmd: QueryCmd,
    },
    /// Compile a constraint file into a query dag.
    Compile {
        /// Constraint DSL (JSON).
        constraint: PathBuf,
        /// Where to write the compiled dag (wire-format JSON).
        dag_out: PathBuf,
        /// Maximum bit width of compiled sums.
        #[arg(long, default_value_t = DEFAULT_MAX_SUM_WIDTH)]
        max_sum_width: u32,
    },
    /// Benchmark experiments.
    Bench {
        #[command(subcommand)]
        cmd: BenchCmd,
    },
}

#[derive(Subcommand)]
enum IndexCmd {
    /// Build an index file from a JSONL corpus ({"id","tokens"} per line).
    Build {
        corpus: PathBuf,
        index_out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputMode {
    /// Newline-delimited external doc keys (ascending doc id order).
    Ids,
    /// The match count only.
    Count,
    /// Full evaluation report as JSON.
    Report,
}

#[derive(Subcommand)]
enum QueryCmd {
    /// Evaluate a wire-format dag against an index file.
    Eval {
        index: PathBuf,
        dag: PathBuf,
        /// Complement high-frequency leaves up front.
        #[arg(long)]
        adaptive_polarity: bool,
        /// Evaluate independent nodes concurrently.
        #[arg(long)]
        parallel: bool,
        #[arg(long, value_enum, default_value_t = OutputMode::Ids)]
        output: OutputMode,
        /// Shorthand for --output report.
        #[arg(long)]
        report: bool,
        /// Include per-node set sizes in the report.
        #[arg(long)]
        per_node_sizes: bool,
        /// Exit with status 2 when the result is empty.
        #[arg(long)]
        fail_empty: bool,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Run one experiment: disjunctive-negation, xor-chain, or net-positive.
    Run {
        experiment: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the full report as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // usage errors exit 1; status 2 is reserved for --fail-empty
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::from(0);
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Index { cmd } => match cmd {
            IndexCmd::Build { corpus, index_out } => cmd_index_build(&corpus, &index_out),
        },
        Command::Query { cmd } => match cmd {
            QueryCmd::Eval {
                index,
                dag,
                adaptive_polarity,
                parallel,
                output,
                report,
                per_node_sizes,
                fail_empty,
            } => {
                let mode = if report { OutputMode::Report } else { output };
                cmd_query_eval(
                    &index,
                    &dag,
                    EvalOptions {
                        adaptive_leaf_polarity: adaptive_polarity,
                        parallel,
                        collect_counters: true,
                    },
                    mode,
                    per_node_sizes,
                    fail_empty,
                )
            }
        },
        Command::Compile {
            constraint,
            dag_out,
            max_sum_width,
        } => cmd_compile(&constraint, &dag_out, max_sum_width),
        Command::Bench { cmd } => match cmd {
            BenchCmd::Run {
                experiment,
                seed,
                output,
                csv,
            } => cmd_bench_run(&experiment, seed, output.as_deref(), csv.as_deref()),
        },
    }
}

fn cmd_index_build(corpus: &PathBuf, index_out: &PathBuf) -> anyhow::Result<u8> {
    let file = fs::File::open(corpus).with_context(|| format!("opening corpus {}", corpus.display()))?;
    let index: InvertedIndex<DocId> = pnix::index::read_corpus_jsonl(BufReader::new(file))
        .with_context(|| format!("reading corpus {}", corpus.display()))?;
    index
        .save(index_out)
        .with_context(|| format!("writing index {}", index_out.display()))?;
    println!(
        "{}",
        serde_json::json!({
            "universe_size": index.universe_size(),
            "term_count": index.term_count(),
        })
    );
    Ok(0)
}

fn cmd_query_eval(
    index_path: &PathBuf,
    dag_path: &PathBuf,
    opts: EvalOptions,
    mode: OutputMode,
    per_node_sizes: bool,
    fail_empty: bool,
) -> anyhow::Result<u8> {
    let index = InvertedIndex::<DocId>::load(index_path)
        .with_context(|| format!("loading index {}", index_path.display()))?;
    let text = fs::read_to_string(dag_path)
        .with_context(|| format!("reading dag {}", dag_path.display()))?;
    let dag = QueryDag::parse(&text).with_context(|| format!("parsing dag {}", dag_path.display()))?;
    dag.validate()
        .with_context(|| format!("validating dag {}", dag_path.display()))?;
    let normalized = dag.normalize()?;
    let report = compute_pn(&normalized, &index, opts);

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match mode {
        OutputMode::Ids => {
            for &d in report.result.iter() {
                match index.doc_key(d) {
                    Some(key) => writeln!(out, "{key}")?,
                    None => writeln!(out, "{d}")?,
                }
            }
        }
        OutputMode::Count => writeln!(out, "{}", report.result.len())?,
        OutputMode::Report => {
            let mut json = serde_json::json!({
                "count": report.result.len(),
                "result": report.result.as_slice(),
                "counters": report.counters,
                "u_active_size": report.u_active_size,
            });
            if per_node_sizes {
                json["per_node_set_sizes"] =
                    serde_json::to_value(&report.per_node_set_sizes)?;
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&json)?)?;
        }
    }
    if fail_empty && report.result.is_empty() {
        return Ok(2);
    }
    Ok(0)
}

fn cmd_compile(constraint: &PathBuf, dag_out: &PathBuf, max_sum_width: u32) -> anyhow::Result<u8> {
    let text = fs::read_to_string(constraint)
        .with_context(|| format!("reading constraint {}", constraint.display()))?;
    let parsed = Constraint::parse(&text)
        .with_context(|| format!("parsing constraint {}", constraint.display()))?;
    let dag = compile_constraint(&parsed, max_sum_width)?;
    fs::write(dag_out, dag.as_dag().to_wire_json()?)
        .with_context(|| format!("writing dag {}", dag_out.display()))?;
    println!("{}", serde_json::json!({ "node_count": dag.as_dag().len() }));
    Ok(0)
}

fn cmd_bench_run(
    experiment: &str,
    seed: Option<u64>,
    output: Option<&std::path::Path>,
    csv: Option<&std::path::Path>,
) -> anyhow::Result<u8> {
    let report = run_experiment(experiment, seed)?;
    if let Some(path) = output {
        fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = csv {
        fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "{}",
        serde_json::json!({
            "experiment": report.experiment,
            "seed": report.seed,
            "verdicts": report.verdicts,
            "all_pass": report.all_pass(),
        })
    );
    if report.all_pass() {
        Ok(0)
    } else {
        eprintln!("error: experiment {experiment} has failing verdicts");
        Ok(1)
    }
}
