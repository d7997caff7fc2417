//! Monte-Carlo harness: synthetic universes, per-trial filling runs with
//! exact ground truth, and cross-trial accuracy metrics for the corrected
//! counter against the Papapetrou baseline.
//!
//! Everything is deterministic in `(configuration, base_seed)`: trial `i`
//! derives its own seed as `base_seed + i` (wrapping), used both for the
//! filter's hash family and for the stream generator, and aggregation is a
//! sequential reduction in trial order regardless of how many threads ran
//! the trials.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::CorrectedCounter;
use crate::fpp::approx_fpp;

/// Synthetic stream description. `p_smax` is the nominal probability that a
/// fresh stream element is not yet in the filter when the filter reaches
/// `s_max`; it fixes the universe size via `|E| = round(s_max/(1 - p_smax))`.
/// `p_smax = 1` means a stream of distinct elements (no replacement).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniverseSpec {
    s_max: u64,
    p_smax: f64,
    universe_size: Option<u64>,
}

impl UniverseSpec {
    pub fn new(s_max: u64, p_smax: f64) -> Result<Self> {
        if s_max < 1 {
            return Err(Error::InvalidParameters("s_max must be >= 1".into()));
        }
        if !(p_smax > 0.0 && p_smax <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "p_smax must lie in (0, 1], got {p_smax}"
            )));
        }
        let universe_size = if p_smax == 1.0 {
            None
        } else {
            let size = (s_max as f64 / (1.0 - p_smax)).round() as u64;
            if size <= s_max {
                return Err(Error::InvalidParameters(format!(
                    "universe of {size} elements cannot exceed s_max = {s_max} \
                     distinct insertions"
                )));
            }
            Some(size)
        };
        Ok(Self {
            s_max,
            p_smax,
            universe_size,
        })
    }

    pub fn s_max(&self) -> u64 {
        self.s_max
    }

    pub fn p_smax(&self) -> f64 {
        self.p_smax
    }

    /// True iff elements are drawn i.i.d. from a finite universe.
    pub fn replacement(&self) -> bool {
        self.universe_size.is_some()
    }

    /// `|E|` in replacement mode, `None` for a distinct stream.
    pub fn universe_size(&self) -> Option<u64> {
        self.universe_size
    }
}

/// Lazy element stream: 8-byte identifiers, deterministic in the seed.
///
/// The universe is the contiguous id range starting at a random base, so
/// identifiers are distinct by construction; replacement mode draws i.i.d.
/// uniform offsets into that range, distinct mode walks it sequentially.
pub struct ElementStream {
    rng: ChaCha12Rng,
    base: u64,
    universe_size: Option<u64>,
    emitted: u64,
}

impl ElementStream {
    pub fn new(spec: &UniverseSpec, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let base = rng.next_u64();
        Self {
            rng,
            base,
            universe_size: spec.universe_size(),
            emitted: 0,
        }
    }

    /// The next element id. Never exhausts: a distinct stream keeps
    /// counting, a replacement stream keeps drawing.
    pub fn next_id(&mut self) -> u64 {
        let id = match self.universe_size {
            None => self.base.wrapping_add(self.emitted),
            Some(size) => self.base.wrapping_add(self.rng.random_range(0..size)),
        };
        self.emitted += 1;
        id
    }
}

/// A snapshot taken when the counter first reaches a checkpoint state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointRecord {
    pub s: u64,
    /// Exact distinct count presented so far (the true n_s).
    pub true_n: u64,
    /// Total elements presented so far, duplicates included.
    pub stream_len: u64,
    pub corrected_mean: f64,
    pub corrected_std: f64,
    pub papapetrou: f64,
}

/// Feed one filter from one stream until the counter reaches `stop_s`,
/// snapshotting at each checkpoint. `checkpoints` must be strictly
/// increasing with the last value at most `stop_s`.
pub fn run_trial(
    m: u64,
    k: u32,
    seed: u64,
    spec: &UniverseSpec,
    checkpoints: &[u64],
    stop_s: u64,
) -> Result<Vec<CheckpointRecord>> {
    validate_checkpoints(checkpoints, stop_s)?;
    if let Some(size) = spec.universe_size() {
        if stop_s >= size {
            return Err(Error::InvalidParameters(format!(
                "stop_s = {stop_s} is unreachable: only {size} distinct elements exist"
            )));
        }
    }
    let mut counter = CorrectedCounter::new(m, k, seed)?;
    let mut stream = ElementStream::new(spec, seed);
    let mut seen: HashSet<u64> = HashSet::new();
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0usize;
    let mut stream_len = 0u64;
    while counter.s() < stop_s {
        if counter.ones() == m {
            return Err(Error::StreamExhausted {
                reached: counter.s(),
                needed: stop_s,
            });
        }
        if let Some(size) = spec.universe_size() {
            if seen.len() as u64 == size {
                return Err(Error::StreamExhausted {
                    reached: counter.s(),
                    needed: stop_s,
                });
            }
        }
        let id = stream.next_id();
        stream_len += 1;
        seen.insert(id);
        let counted = counter.insert(&id.to_le_bytes())?;
        if counted
            && next_checkpoint < checkpoints.len()
            && counter.s() == checkpoints[next_checkpoint]
        {
            let estimate = counter.estimate();
            records.push(CheckpointRecord {
                s: counter.s(),
                true_n: seen.len() as u64,
                stream_len,
                corrected_mean: estimate.mean,
                corrected_std: estimate.std_dev.expect("corrected estimates carry a std"),
                papapetrou: counter.papapetrou()?,
            });
            next_checkpoint += 1;
        }
    }
    Ok(records)
}

fn validate_checkpoints(checkpoints: &[u64], stop_s: u64) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidParameters("no checkpoints given".into()));
    }
    for pair in checkpoints.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidParameters(
                "checkpoints must be strictly increasing".into(),
            ));
        }
    }
    if checkpoints[0] < 1 {
        return Err(Error::InvalidParameters("checkpoints must be >= 1".into()));
    }
    if *checkpoints.last().unwrap() > stop_s {
        return Err(Error::InvalidParameters(format!(
            "last checkpoint exceeds stop_s = {stop_s}"
        )));
    }
    Ok(())
}

/// One aggregate row: one estimator at one checkpoint across all trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub estimator: &'static str,
    pub s: u64,
    pub trials: u64,
    /// Mean biased error (estimate minus true n_s) and its sample std.
    pub mbe: f64,
    pub mbe_std: f64,
    pub mae: f64,
    pub mae_std: f64,
    pub rmse: f64,
    pub mean_true_n: f64,
    pub std_true_n: f64,
    /// sqrt(V(N_s)) as reported in-stream by the corrected counter.
    pub predicted_std: f64,
    pub mean_stream_len: f64,
}

/// Run `trials` independent trials and aggregate per-checkpoint metrics for
/// the corrected counter and the Papapetrou baseline (two rows per
/// checkpoint, corrected first).
pub fn run_experiment(
    m: u64,
    k: u32,
    spec: &UniverseSpec,
    trials: u64,
    checkpoints: &[u64],
    stop_s: u64,
    base_seed: u64,
) -> Result<Vec<MetricsRow>> {
    if trials < 2 {
        return Err(Error::InvalidParameters(
            "aggregation requires at least 2 trials".into(),
        ));
    }
    let per_trial: Vec<Vec<CheckpointRecord>> = with_thread_cap(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| run_trial(m, k, base_seed.wrapping_add(i), spec, checkpoints, stop_s))
            .collect::<Result<_>>()
    })?;
    let mut rows = Vec::with_capacity(checkpoints.len() * 2);
    for (ci, &s) in checkpoints.iter().enumerate() {
        let records: Vec<&CheckpointRecord> =
            per_trial.iter().map(|trial| &trial[ci]).collect();
        let true_n: Vec<f64> = records.iter().map(|r| r.true_n as f64).collect();
        let stream_len: Vec<f64> = records.iter().map(|r| r.stream_len as f64).collect();
        let predicted_std = mean(&records.iter().map(|r| r.corrected_std).collect::<Vec<_>>());
        for (estimator, estimates) in [
            (
                "corrected",
                records.iter().map(|r| r.corrected_mean).collect::<Vec<_>>(),
            ),
            (
                "papapetrou",
                records.iter().map(|r| r.papapetrou).collect::<Vec<_>>(),
            ),
        ] {
            let errors: Vec<f64> = estimates
                .iter()
                .zip(&true_n)
                .map(|(est, truth)| est - truth)
                .collect();
            let abs_errors: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
            rows.push(MetricsRow {
                estimator,
                s,
                trials,
                mbe: mean(&errors),
                mbe_std: sample_std(&errors),
                mae: mean(&abs_errors),
                mae_std: sample_std(&abs_errors),
                rmse: mean(&errors.iter().map(|e| e * e).collect::<Vec<_>>()).sqrt(),
                mean_true_n: mean(&true_n),
                std_true_n: sample_std(&true_n),
                predicted_std,
                mean_stream_len: mean(&stream_len),
            });
        }
    }
    Ok(rows)
}

/// The batch-start comparison: each trial feeds the same distinct stream to
/// a batch-started filter (first `b` elements inserted at once) and to a
/// plain one-by-one filter with the same hash seed, both to `stop_s`.
/// Returns the two mean counting errors `mean(n_s - s)` at `s = stop_s`,
/// batch arm first.
pub fn run_batch_experiment(
    m: u64,
    k: u32,
    b: u64,
    trials: u64,
    stop_s: u64,
    base_seed: u64,
) -> Result<(f64, f64)> {
    if b >= stop_s {
        return Err(Error::InvalidParameters(format!(
            "batch size {b} must be below stop_s = {stop_s}"
        )));
    }
    if trials < 1 {
        return Err(Error::InvalidParameters("at least one trial required".into()));
    }
    let spec = UniverseSpec::new(stop_s, 1.0)?;
    let errors: Vec<(f64, f64)> = with_thread_cap(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let seed = base_seed.wrapping_add(i);

                let mut batch_counter = CorrectedCounter::new(m, k, seed)?;
                let mut stream = ElementStream::new(&spec, seed);
                let mut seen: HashSet<u64> = HashSet::new();
                let first: Vec<[u8; 8]> = (0..b)
                    .map(|_| {
                        let id = stream.next_id();
                        seen.insert(id);
                        id.to_le_bytes()
                    })
                    .collect();
                batch_counter.start_batch(first.iter())?;
                while batch_counter.s() < stop_s {
                    if batch_counter.ones() == m {
                        return Err(Error::StreamExhausted {
                            reached: batch_counter.s(),
                            needed: stop_s,
                        });
                    }
                    let id = stream.next_id();
                    seen.insert(id);
                    batch_counter.insert(&id.to_le_bytes())?;
                }
                let batch_error = seen.len() as f64 - stop_s as f64;

                let mut one_counter = CorrectedCounter::new(m, k, seed)?;
                let mut replay = ElementStream::new(&spec, seed);
                let mut seen_one: HashSet<u64> = HashSet::new();
                while one_counter.s() < stop_s {
                    if one_counter.ones() == m {
                        return Err(Error::StreamExhausted {
                            reached: one_counter.s(),
                            needed: stop_s,
                        });
                    }
                    let id = replay.next_id();
                    seen_one.insert(id);
                    one_counter.insert(&id.to_le_bytes())?;
                }
                let one_error = seen_one.len() as f64 - stop_s as f64;
                Ok((batch_error, one_error))
            })
            .collect::<Result<_>>()
    })?;
    let batch_mean = mean(&errors.iter().map(|e| e.0).collect::<Vec<_>>());
    let one_mean = mean(&errors.iter().map(|e| e.1).collect::<Vec<_>>());
    Ok((batch_mean, one_mean))
}

/// Accuracy curves past the sizing capacity: a distinct-stream experiment
/// checkpointed at `s_values`, valid while the model keeps `t < 0.5` at the
/// deepest state.
pub fn overload_sweep(
    m: u64,
    k: u32,
    trials: u64,
    s_values: &[u64],
    base_seed: u64,
) -> Result<Vec<MetricsRow>> {
    validate_checkpoints(s_values, u64::MAX)?;
    let deepest = *s_values.last().unwrap();
    let t = approx_fpp(m, k, deepest);
    if t >= 0.5 {
        return Err(Error::InvalidParameters(format!(
            "overload sweep to s = {deepest} leaves the model's range (t = {t:.3})"
        )));
    }
    let spec = UniverseSpec::new(deepest, 1.0)?;
    run_experiment(m, k, &spec, trials, s_values, deepest, base_seed)
}

pub fn csv_header() -> &'static str {
    "estimator,s,trials,mbe,mbe_std,mae,mae_std,rmse,mean_true_n,std_true_n,predicted_std,mean_stream_len"
}

/// One data line of the fixed 12-column schema, without the newline.
pub fn csv_row(row: &MetricsRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        row.estimator,
        row.s,
        row.trials,
        fmt_f64(row.mbe),
        fmt_f64(row.mbe_std),
        fmt_f64(row.mae),
        fmt_f64(row.mae_std),
        fmt_f64(row.rmse),
        fmt_f64(row.mean_true_n),
        fmt_f64(row.std_true_n),
        fmt_f64(row.predicted_std),
        fmt_f64(row.mean_stream_len),
    )
}

/// CSV with the fixed 12-column schema, floats as 17-significant-digit
/// binary64, LF line endings.
pub fn write_csv<W: Write>(rows: &[MetricsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", csv_header())?;
    for row in rows {
        writeln!(out, "{}", csv_row(row))?;
    }
    Ok(())
}

/// One JSON object per row, mirroring the CSV columns 1:1.
pub fn write_json_lines<W: Write>(rows: &[MetricsRow], mut out: W) -> std::io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        writeln!(out)?;
    }
    Ok(())
}

/// 17 significant digits: lossless for binary64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n-1 denominator).
fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mu = mean(values);
    (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Run `f` under the `BFCE_THREADS` cap when the variable holds a positive
/// integer; otherwise on the global pool. Results are identical either way,
/// only wall time changes.
fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var("BFCE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap.map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build()) {
        Some(Ok(pool)) => pool.install(f),
        _ => f(),
    }
}
