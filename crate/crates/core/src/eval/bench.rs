use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::EvalError;
use crate::decoder::{decode, DecodeConfig, Mode, DEFAULT_MAX_ITERATIONS, DEFAULT_MAX_LENGTH};
use crate::error::EditError;
use crate::policy::Policy;
use crate::state::ConstraintList;

#[derive(Debug, Clone)]
pub struct BenchItem {
    pub source: Vec<String>,
    pub constraints: ConstraintList,
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub repetitions: usize,
    /// 1 decodes on the calling thread.
    pub workers: usize,
    pub max_iterations: usize,
    pub max_length: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            repetitions: 3,
            workers: 1,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_length: DEFAULT_MAX_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeSpeed {
    pub mode: Mode,
    /// Sentences per second of every repetition, in run order.
    pub runs: Vec<f64>,
    pub median: f64,
    /// `1 - median / baseline median`; positive means slower.
    pub overhead: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub sentences: usize,
    pub repetitions: usize,
    pub workers: usize,
    pub modes: Vec<ModeSpeed>,
}

impl BenchReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSpeed> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<10} {:>14} {:>9}  runs\n", "Mode", "sent/sec", "overhead");
        for m in &self.modes {
            let runs: Vec<String> = m.runs.iter().map(|r| format!("{r:.1}")).collect();
            out.push_str(&format!(
                "{:<10} {:>14.2} {:>8.2}%  {}\n",
                m.mode.name(),
                m.median,
                m.overhead * 100.0,
                runs.join(" ")
            ));
        }
        out
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn run_once<F>(
    corpus: &[BenchItem],
    make_policy: &F,
    config: &DecodeConfig,
    pool: Option<&rayon::ThreadPool>,
) -> Result<f64, EditError>
where
    F: Fn(usize) -> Box<dyn Policy> + Sync,
{
    let decode_one = |(i, item): (usize, &BenchItem)| -> Result<usize, EditError> {
        let mut policy = make_policy(i);
        let r = decode(&item.source, &item.constraints, &mut policy, config)?;
        Ok(r.output.len())
    };
    let start = Instant::now();
    let tokens: usize = match pool {
        None => corpus.iter().enumerate().map(decode_one).sum::<Result<usize, _>>()?,
        Some(pool) => pool.install(|| corpus.par_iter().enumerate().map(decode_one).sum::<Result<usize, _>>())?,
    };
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(tokens);
    Ok(corpus.len() as f64 / elapsed.max(1e-9))
}

/// Decodes the corpus `repetitions` times per mode and reports the median
/// sentences per second.
///
/// `make_policy(i)` builds the policy for sentence `i`; it runs inside the
/// timed region, as does constraint insertion. Modes are interleaved and
/// their order rotated between repetitions, after one untimed warm-up pass.
pub fn bench_throughput<F>(
    modes: &[Mode],
    corpus: &[BenchItem],
    make_policy: F,
    options: &BenchOptions,
) -> Result<BenchReport, EvalError>
where
    F: Fn(usize) -> Box<dyn Policy> + Sync,
{
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    if options.repetitions < 3 {
        return Err(EvalError::TooFewRepetitions(options.repetitions));
    }
    let workers = options.workers.max(1);
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| EditError::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };
    let configs: Vec<DecodeConfig> = modes
        .iter()
        .map(|&mode| DecodeConfig {
            mode,
            max_iterations: options.max_iterations,
            max_length: options.max_length,
            ..Default::default()
        })
        .collect();

    for config in &configs {
        run_once(corpus, &make_policy, config, pool.as_ref())?;
    }
    let mut runs = vec![Vec::with_capacity(options.repetitions); modes.len()];
    for rep in 0..options.repetitions {
        for k in 0..modes.len() {
            let m = (k + rep) % modes.len();
            runs[m].push(run_once(corpus, &make_policy, &configs[m], pool.as_ref())?);
        }
    }

    let medians: Vec<f64> = runs.iter().map(|r| median(r)).collect();
    let base =
        modes.iter().position(|&m| m == Mode::Baseline).map_or(medians.first().copied().unwrap_or(1.0), |i| medians[i]);
    let modes = modes
        .iter()
        .zip(runs)
        .zip(medians)
        .map(|((&mode, runs), median)| ModeSpeed { mode, runs, median, overhead: 1.0 - median / base })
        .collect();
    Ok(BenchReport { sentences: corpus.len(), repetitions: options.repetitions, workers, modes })
}
