//! The `levt` command line.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::constraints::{
    load_dictionary, load_frequency_list, read_constraints_jsonl, write_constraints_jsonl, BpeCodes, ConstraintRecord,
    Extractor, DEFAULT_FREQ_TOP_K,
};
use crate::decoder::{decode, DecodeConfig, Mode, DEFAULT_MAX_ITERATIONS, DEFAULT_MAX_LENGTH};
use crate::eval::synthetic::SyntheticTask;
use crate::eval::{
    bench_throughput, bootstrap_significance, render_table, BenchItem, BenchOptions, EvalReport, MatchLevel,
    DEFAULT_BOOTSTRAP_SAMPLES,
};
use crate::policy::{AdversarialPolicy, IdentityPolicy, OraclePolicy, Policy, RandomPolicy};
use crate::state::{ConstraintList, MaskEntry, Token};

#[derive(Debug, Parser)]
#[command(name = "levt", version, about = "Lexically constrained edit-based decoding")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match dictionary terms against a tokenized corpus and write constraints as JSONL.
    Extract(ExtractArgs),
    /// Decode every source sentence under one constraint mode.
    Decode(DecodeArgs),
    /// Score hypotheses: Term%, BLEU, order rate, optional bootstrap p-value.
    Eval(EvalArgs),
    /// Measure sentences per second for each mode.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Tokenized source sentences, one per line.
    #[arg(long)]
    pub source: PathBuf,
    /// Reference translations; keeps only terms whose target occurs in the reference.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Tab-separated `source<TAB>target` phrase pairs.
    #[arg(long)]
    pub dict: PathBuf,
    /// Word frequency list, most frequent first.
    #[arg(long)]
    pub freq_list: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FREQ_TOP_K)]
    pub freq_top_k: usize,
    /// Keep this fraction of dictionary entries.
    #[arg(long)]
    pub sample: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// BPE merge codes used to segment target phrases.
    #[arg(long)]
    pub bpe: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub source: PathBuf,
    /// Constraints JSONL; not read in baseline mode.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long, default_value = "no-ins")]
    pub mode: Mode,
    /// `oracle:REFS`, `random[:SEED]`, `adversarial` or `identity`.
    #[arg(long, default_value = "identity")]
    pub policy: PolicySpec,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_LENGTH)]
    pub max_length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write every intermediate state as JSONL.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub hyps: PathBuf,
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Match constraints on joined words instead of subword tokens.
    #[arg(long)]
    pub word_level: bool,
    /// Add-one smoothing for the 2- to 4-gram precisions.
    #[arg(long)]
    pub smooth: bool,
    /// Paired bootstrap test of system A against system B.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub bootstrap: Option<Vec<PathBuf>>,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Generate this many synthetic sentences.
    #[arg(long, conflicts_with = "source")]
    pub synthetic: Option<usize>,
    #[arg(long, requires = "constraints")]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Modes to compare, comma separated.
    #[arg(long = "mode", value_delimiter = ',', default_values_t = Mode::ALL)]
    pub modes: Vec<Mode>,
    /// `random[:SEED]` or `identity`.
    #[arg(long, default_value = "random")]
    pub policy: PolicySpec,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long = "max-iters", default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Oracle(PathBuf),
    Random(Option<u64>),
    Adversarial,
    Identity,
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("oracle", Some(path)) if !path.is_empty() => Ok(PolicySpec::Oracle(path.into())),
            ("oracle", _) => Err("oracle policy needs a reference file: oracle:PATH".into()),
            ("random", None) => Ok(PolicySpec::Random(None)),
            ("random", Some(seed)) => {
                seed.parse().map(|s| PolicySpec::Random(Some(s))).map_err(|_| format!("bad random seed {seed:?}"))
            }
            ("adversarial", None) => Ok(PolicySpec::Adversarial),
            ("identity", None) => Ok(PolicySpec::Identity),
            _ => Err(format!("unknown policy {s:?} (expected oracle:PATH, random[:SEED], adversarial or identity)")),
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(args) => cmd_extract(&args),
        Command::Decode(args) => cmd_decode(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Bench(args) => cmd_bench(&args),
    }
}

fn read_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(|l| l.split_whitespace().map(String::from).collect()).collect())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_constraints(path: &Path, expected: usize) -> Result<Vec<ConstraintRecord>> {
    let records = read_constraints_jsonl(path)?;
    ensure!(
        records.len() == expected,
        "{} has {} constraint records for {} sentences",
        path.display(),
        records.len(),
        expected
    );
    Ok(records)
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let mut dict = load_dictionary(&args.dict)?;
    if let Some(path) = &args.freq_list {
        dict = dict.filter_frequent(&load_frequency_list(path)?, args.freq_top_k);
    }
    if let Some(fraction) = args.sample {
        ensure!((0.0..=1.0).contains(&fraction), "--sample must be in [0, 1], got {fraction}");
        dict = dict.sample(fraction, args.seed);
    }
    let codes = args.bpe.as_ref().map(BpeCodes::load).transpose()?;
    let sources = read_lines(&args.source)?;
    let references = args.reference.as_deref().map(read_lines).transpose()?;
    if let Some(refs) = &references {
        ensure!(refs.len() == sources.len(), "{} sources but {} references", sources.len(), refs.len());
    }

    let extractor = Extractor::new(&dict, codes.as_ref());
    let records: Vec<ConstraintRecord> = sources
        .iter()
        .enumerate()
        .map(|(i, src)| {
            let reference = references.as_ref().map(|r| r[i].as_slice());
            extractor.extract(i, src, reference).to_record()
        })
        .collect();
    let mut out = open_output(args.output.as_deref())?;
    write_constraints_jsonl(&mut out, &records)?;
    out.flush()?;

    let with = records.iter().filter(|r| !r.constraints.is_empty()).count();
    let total: usize = records.iter().map(|r| r.constraints.len()).sum();
    let avg = if with == 0 { 0.0 } else { total as f64 / with as f64 };
    eprintln!(
        "{} sentences, {} with constraints, {} constraints, {:.2} per constrained sentence ({} dictionary entries)",
        records.len(),
        with,
        total,
        avg,
        dict.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    sentence: usize,
    iteration: usize,
    tokens: &'a [Token],
    mask: &'a [Option<MaskEntry>],
}

fn corpus_vocab(sources: &[Vec<String>]) -> Result<Arc<[Token]>> {
    let words: BTreeSet<&str> = sources.iter().flatten().map(String::as_str).collect();
    ensure!(!words.is_empty(), "random policy needs a non-empty source corpus for its vocabulary");
    Ok(words.into_iter().map(Token::word).collect())
}

pub fn cmd_decode(args: &DecodeArgs) -> Result<()> {
    let sources = read_lines(&args.source)?;
    let constraints: Vec<ConstraintList> = if args.mode.inserts_constraints() {
        let path =
            args.constraints.as_deref().with_context(|| format!("--constraints is required in {} mode", args.mode))?;
        read_constraints(path, sources.len())?.iter().map(|r| r.constraint_list()).collect::<Result<_, _>>()?
    } else {
        vec![ConstraintList::default(); sources.len()]
    };

    let references = match &args.policy {
        PolicySpec::Oracle(path) => {
            let refs = read_lines(path)?;
            ensure!(refs.len() == sources.len(), "{} sources but {} references", sources.len(), refs.len());
            refs
        }
        _ => Vec::new(),
    };
    let vocab = match args.policy {
        PolicySpec::Random(_) => Some(corpus_vocab(&sources)?),
        _ => None,
    };
    let make_policy = |i: usize| -> Box<dyn Policy> {
        match &args.policy {
            PolicySpec::Oracle(_) => Box::new(OraclePolicy::from_words(&references[i])),
            PolicySpec::Random(seed) => Box::new(RandomPolicy::new(
                seed.unwrap_or(args.seed).wrapping_add(i as u64),
                vocab.clone().expect("vocabulary built for random policy"),
            )),
            PolicySpec::Adversarial => Box::new(AdversarialPolicy),
            PolicySpec::Identity => Box::new(IdentityPolicy),
        }
    };

    let config = DecodeConfig {
        mode: args.mode,
        max_iterations: args.max_iterations,
        max_length: args.max_length,
        keep_trace: args.trace.is_some(),
        strip_boundaries: true,
    };
    let mut out = open_output(args.output.as_deref())?;
    let mut trace = args.trace.as_deref().map(|p| open_output(Some(p))).transpose()?;
    for (i, src) in sources.iter().enumerate() {
        let mut policy = make_policy(i);
        let result = decode(src, &constraints[i], &mut policy, &config)
            .with_context(|| format!("decoding sentence {}", i + 1))?;
        writeln!(out, "{}", result.line())?;
        if let (Some(t), Some(states)) = (trace.as_mut(), result.trace.as_ref()) {
            for s in states {
                let line = TraceLine { sentence: i, iteration: s.iteration(), tokens: s.tokens(), mask: s.mask() };
                serde_json::to_writer(&mut *t, &line)?;
                t.write_all(b"\n")?;
            }
        }
    }
    out.flush()?;
    if let Some(t) = trace.as_mut() {
        t.flush()?;
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let hyps = read_lines(&args.hyps)?;
    let refs = read_lines(&args.refs)?;
    ensure!(hyps.len() == refs.len(), "{} hypotheses but {} references", hyps.len(), refs.len());
    let sets = args
        .constraints
        .as_deref()
        .map(|p| read_constraints(p, hyps.len()).map(|rs| rs.iter().map(ConstraintRecord::phrases).collect::<Vec<_>>()))
        .transpose()?;
    let level = if args.word_level { MatchLevel::Word } else { MatchLevel::Subword };
    let mut report = EvalReport::compute(&hyps, &refs, sets.as_deref(), level, args.smooth)?;
    if let Some(pair) = &args.bootstrap {
        let a = read_lines(&pair[0])?;
        let b = read_lines(&pair[1])?;
        ensure!(a.len() == refs.len() && b.len() == refs.len(), "bootstrap systems must match the references in size");
        report.p_value = Some(bootstrap_significance(&a, &b, &refs, args.samples, args.seed)?);
    }

    let mut out = io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
    } else {
        let name = args.hyps.file_name().map_or_else(|| "hyps".into(), |n| n.to_string_lossy().into_owned());
        write!(out, "{}", render_table(&[(name, report.clone())]))?;
        if let Some(o) = report.order_rate {
            writeln!(out, "order rate: {:.2}%", o * 100.0)?;
        }
        if let Some(p) = report.p_value {
            writeln!(out, "bootstrap p-value: {p:.4} ({} samples)", args.samples)?;
        }
    }
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    ensure!(!args.modes.is_empty(), "no modes to benchmark");
    let items: Vec<BenchItem> = match (&args.source, args.synthetic) {
        (Some(src), _) => {
            let sources = read_lines(src)?;
            let path = args.constraints.as_deref().context("--source needs --constraints")?;
            read_constraints(path, sources.len())?
                .iter()
                .zip(sources)
                .map(|(r, source)| Ok(BenchItem { source, constraints: r.constraint_list()? }))
                .collect::<Result<_>>()?
        }
        (None, n) => SyntheticTask::generate(n.unwrap_or(1000), args.seed).bench_items(),
    };
    let sources: Vec<Vec<String>> = items.iter().map(|i| i.source.clone()).collect();
    let vocab = corpus_vocab(&sources)?;
    let seed = match args.policy {
        PolicySpec::Random(s) => s.unwrap_or(args.seed),
        PolicySpec::Identity => 0,
        _ => bail!("bench supports the random and identity policies"),
    };
    let random = matches!(args.policy, PolicySpec::Random(_));
    let options = BenchOptions {
        repetitions: args.repetitions,
        workers: args.workers,
        max_iterations: args.max_iterations,
        max_length: DEFAULT_MAX_LENGTH,
    };
    let report = bench_throughput(
        &args.modes,
        &items,
        |i| -> Box<dyn Policy> {
            if random {
                Box::new(RandomPolicy::new(seed.wrapping_add(i as u64), vocab.clone()))
            } else {
                Box::new(IdentityPolicy)
            }
        },
        &options,
    )?;
    let mut out = io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
    } else {
        writeln!(
            out,
            "{} sentences, {} repetitions, {} worker(s)",
            report.sentences, report.repetitions, report.workers
        )?;
        write!(out, "{}", report.render())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_specs() {
        assert_eq!("oracle:refs.txt".parse::<PolicySpec>(), Ok(PolicySpec::Oracle("refs.txt".into())));
        assert_eq!("random".parse::<PolicySpec>(), Ok(PolicySpec::Random(None)));
        assert_eq!("random:7".parse::<PolicySpec>(), Ok(PolicySpec::Random(Some(7))));
        assert_eq!("adversarial".parse::<PolicySpec>(), Ok(PolicySpec::Adversarial));
        assert!("oracle".parse::<PolicySpec>().is_err());
        assert!("random:x".parse::<PolicySpec>().is_err());
        assert!("beam".parse::<PolicySpec>().is_err());
    }

    #[test]
    fn argument_parsing() {
        let cli = Cli::try_parse_from(["levt", "decode", "--source", "s.txt", "--mode", "no-del", "--max-iters", "5"])
            .unwrap();
        match cli.command {
            Command::Decode(a) => {
                assert_eq!(a.mode, Mode::NoDelete);
                assert_eq!(a.max_iterations, 5);
                assert_eq!(a.policy, PolicySpec::Identity);
            }
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from(["levt", "bench", "--mode", "baseline,no-ins", "--synthetic", "10"]).unwrap();
        match cli.command {
            Command::Bench(a) => assert_eq!(a.modes, [Mode::Baseline, Mode::NoInsert]),
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from(["levt", "extract", "--source", "s", "--dict", "d"]).unwrap();
        match cli.command {
            Command::Extract(a) => assert_eq!(a.freq_top_k, 500),
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["levt", "decode", "--source", "s", "--mode", "fast"]).is_err());
    }
}
