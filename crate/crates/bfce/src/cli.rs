use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bfce::error::Error;
use bfce::estimator::predicted_correction;
use bfce::fpp::{approx_fpp, exact_fpp};
use bfce::sim::{self, fmt_f64, UniverseSpec};
use bfce::sizing;
use bfce::CorrectedCounter;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    let text = match &cli.command {
        Command::Size(args) => cmd_size(args, cli.format)?,
        Command::Fpp(args) => cmd_fpp(args, cli.format)?,
        Command::Estimate(args) => cmd_estimate(args, cli.seed, cli.format)?,
        Command::Simulate(args) => cmd_simulate(args, cli.seed, cli.format)?,
        Command::BatchSim(args) => cmd_batch_sim(args, cli.seed, cli.format)?,
        Command::Overload(args) => cmd_overload(args, cli.seed, cli.format)?,
    };
    match cli.out.as_str() {
        "-" => {
            let stdout = io::stdout();
            let mut handle = stdout.lock();
            handle.write_all(text.as_bytes())?;
            handle.flush()?;
        }
        path => {
            let mut file = File::create(path)?;
            file.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

/// Bloom-filter cardinality estimation: sizing, false-positive models,
/// stream counting, and Monte-Carlo experiments.
#[derive(Parser)]
#[command(name = "bfce", version)]
struct Cli {
    /// Base seed for hashing and synthetic streams.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output path, or "-" for standard output.
    #[arg(long, global = true, default_value = "-")]
    out: String,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

#[derive(Subcommand)]
enum Command {
    /// Choose filter parameters for a capacity target.
    Size(SizeArgs),
    /// Evaluate the false-positive models at one filter state.
    Fpp(FppArgs),
    /// Count distinct newline-delimited tokens from a stream.
    Estimate(EstimateArgs),
    /// Monte-Carlo accuracy experiment against exact ground truth.
    Simulate(SimulateArgs),
    /// Compare batch-start filling against one-by-one filling.
    BatchSim(BatchSimArgs),
    /// Accuracy sweep past the capacity the filter was sized for.
    Overload(OverloadArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("target").required(true).multiple(false))]
struct SizeArgs {
    /// Capacity target: the filling state the filter must support.
    #[arg(long)]
    smax: u64,

    /// Size for this false-positive rate at capacity (classical rule).
    #[arg(long, value_parser = parse_open_unit, group = "target")]
    fpp: Option<f64>,

    /// Size for this cumulative mean counting error at capacity.
    #[arg(long, value_parser = parse_positive, group = "target")]
    error_budget: Option<f64>,

    /// Keep this bit count and choose only the hash count.
    #[arg(long, group = "target")]
    m: Option<u64>,
}

#[derive(Args)]
struct FppArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    k: u32,
    /// Number of distinct elements in the filter.
    #[arg(long)]
    n: u64,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    k: u32,
    /// Insert the first N distinct tokens as one initial batch.
    #[arg(long, value_name = "N")]
    batch_first: Option<u64>,
    /// Read tokens from this file instead of standard input.
    #[arg(long = "in", value_name = "FILE")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    trials: u64,
    /// Probability that a fresh element is new to the filter at stop-s;
    /// 1 means a duplicate-free stream.
    #[arg(long, value_parser = parse_half_open_unit)]
    p_smax: f64,
    /// Filling state at which each trial stops.
    #[arg(long)]
    stop_s: u64,
    /// Comma-separated snapshot states; default every 500 plus stop-s.
    #[arg(long, value_parser = parse_checkpoints)]
    checkpoints: Option<CheckpointList>,
}

#[derive(Args)]
struct BatchSimArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    k: u32,
    /// Size of the initial batch.
    #[arg(long)]
    b: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    stop_s: u64,
}

#[derive(Args)]
struct OverloadArgs {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    trials: u64,
    /// Deepest filling state to sweep to.
    #[arg(long)]
    max_s: u64,
    /// Comma-separated snapshot states; default every 500 plus max-s.
    #[arg(long, value_parser = parse_checkpoints)]
    checkpoints: Option<CheckpointList>,
}

#[derive(Clone)]
struct CheckpointList(Vec<u64>);

fn parse_checkpoints(raw: &str) -> Result<CheckpointList, String> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err("empty checkpoint entry".into());
        }
        out.push(part.parse::<u64>().map_err(|e| e.to_string())?);
    }
    Ok(CheckpointList(out))
}

fn parse_open_unit(raw: &str) -> Result<f64, String> {
    let value: f64 = raw.parse().map_err(|e| format!("{e}"))?;
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn parse_half_open_unit(raw: &str) -> Result<f64, String> {
    let value: f64 = raw.parse().map_err(|e| format!("{e}"))?;
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err("must lie in (0, 1]".into())
    }
}

fn parse_positive(raw: &str) -> Result<f64, String> {
    let value: f64 = raw.parse().map_err(|e| format!("{e}"))?;
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err("must be a positive finite number".into())
    }
}

fn default_checkpoints(stop_s: u64) -> Vec<u64> {
    let mut points: Vec<u64> = (1..)
        .map(|i| i * 500)
        .take_while(|&point| point < stop_s)
        .collect();
    points.push(stop_s);
    points
}

enum Cell {
    U64(u64),
    F64(f64),
    MaybeF64(Option<f64>),
}

fn render_table(columns: &[(&str, Cell)], format: Format) -> String {
    match format {
        Format::Csv => {
            let header: Vec<&str> = columns.iter().map(|(name, _)| *name).collect();
            let row: Vec<String> = columns
                .iter()
                .map(|(_, cell)| match cell {
                    Cell::U64(v) => v.to_string(),
                    Cell::F64(v) => fmt_f64(*v),
                    Cell::MaybeF64(Some(v)) => fmt_f64(*v),
                    Cell::MaybeF64(None) => String::new(),
                })
                .collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
        Format::JsonLines => {
            let mut object = serde_json::Map::new();
            for (name, cell) in columns {
                let value = match cell {
                    Cell::U64(v) => serde_json::json!(v),
                    Cell::F64(v) => serde_json::json!(v),
                    Cell::MaybeF64(v) => serde_json::json!(v),
                };
                object.insert((*name).to_string(), value);
            }
            format!("{}\n", serde_json::Value::Object(object))
        }
    }
}

fn cmd_size(args: &SizeArgs, format: Format) -> Result<String, Error> {
    let (m, k) = if let Some(target) = args.fpp {
        sizing::classical_size(args.smax, target)?
    } else if let Some(budget) = args.error_budget {
        sizing::size_for_error_budget(args.smax, budget)?
    } else {
        let m = args.m.expect("clap guarantees one target");
        (m, sizing::k_opt_cumulative(m, args.smax)?)
    };
    let (expected_correction, _) = predicted_correction(m, k, 1, args.smax);
    Ok(render_table(
        &[
            ("m", Cell::U64(m)),
            ("k", Cell::U64(u64::from(k))),
            ("fpp_at_smax", Cell::F64(approx_fpp(m, k, args.smax))),
            ("expected_correction", Cell::F64(expected_correction)),
            (
                "mean_error_upper_bound",
                Cell::F64(sizing::mean_error_upper_bound(m, k, args.smax)?),
            ),
        ],
        format,
    ))
}

fn cmd_fpp(args: &FppArgs, format: Format) -> Result<String, Error> {
    bfce::FppModel::approximate(args.m, args.k)?;
    let exact = match exact_fpp(args.m, args.k, args.n) {
        Ok(value) => Some(value),
        Err(Error::ExactFppOutOfRange { .. }) => None,
        Err(other) => return Err(other),
    };
    Ok(render_table(
        &[
            ("m", Cell::U64(args.m)),
            ("k", Cell::U64(u64::from(args.k))),
            ("n", Cell::U64(args.n)),
            ("approx_fpp", Cell::F64(approx_fpp(args.m, args.k, args.n))),
            ("exact_fpp", Cell::MaybeF64(exact)),
        ],
        format,
    ))
}

fn cmd_estimate(
    args: &EstimateArgs,
    seed: u64,
    format: Format,
) -> Result<String, Box<dyn std::error::Error>> {
    let mut counter = CorrectedCounter::new(args.m, args.k, seed)?;
    let mut reader: Box<dyn BufRead> = match &args.input {
        Some(path) => Box::new(BufReader::new(File::open(path)?)),
        None => Box::new(BufReader::new(io::stdin())),
    };

    let mut token = Vec::new();
    let next_token = |reader: &mut dyn BufRead, token: &mut Vec<u8>| -> io::Result<bool> {
        loop {
            token.clear();
            if reader.read_until(b'\n', token)? == 0 {
                return Ok(false);
            }
            if token.last() == Some(&b'\n') {
                token.pop();
            }
            if !token.is_empty() {
                return Ok(true);
            }
        }
    };

    if let Some(batch) = args.batch_first {
        let mut first: HashSet<Vec<u8>> = HashSet::new();
        while (first.len() as u64) < batch && next_token(&mut reader, &mut token)? {
            first.insert(token.clone());
        }
        counter.start_batch(first.iter())?;
    }
    while next_token(&mut reader, &mut token)? {
        counter.insert(&token)?;
    }

    let estimate = counter.estimate();
    Ok(render_table(
        &[
            ("s", Cell::U64(counter.s())),
            ("corrected_mean", Cell::F64(estimate.mean)),
            (
                "corrected_std",
                Cell::F64(estimate.std_dev.expect("default model always yields a std")),
            ),
            ("swamidass", Cell::F64(counter.swamidass()?)),
            ("papapetrou", Cell::F64(counter.papapetrou()?)),
        ],
        format,
    ))
}

fn cmd_simulate(args: &SimulateArgs, seed: u64, format: Format) -> Result<String, Error> {
    let spec = UniverseSpec::new(args.stop_s, args.p_smax)?;
    let checkpoints = match &args.checkpoints {
        Some(list) => list.0.clone(),
        None => default_checkpoints(args.stop_s),
    };
    let rows = sim::run_experiment(
        args.m,
        args.k,
        &spec,
        args.trials,
        &checkpoints,
        args.stop_s,
        seed,
    )?;
    Ok(render_rows(&rows, format))
}

fn cmd_batch_sim(args: &BatchSimArgs, seed: u64, format: Format) -> Result<String, Error> {
    let (batch_error, one_error) =
        sim::run_batch_experiment(args.m, args.k, args.b, args.trials, args.stop_s, seed)?;
    Ok(render_table(
        &[
            ("batch_mean_error", Cell::F64(batch_error)),
            ("one_by_one_mean_error", Cell::F64(one_error)),
        ],
        format,
    ))
}

fn cmd_overload(args: &OverloadArgs, seed: u64, format: Format) -> Result<String, Error> {
    let checkpoints = match &args.checkpoints {
        Some(list) => list.0.clone(),
        None => default_checkpoints(args.max_s),
    };
    let rows = sim::overload_sweep(args.m, args.k, args.trials, &checkpoints, seed)?;
    let mut text = String::new();
    match format {
        Format::Csv => {
            text.push_str(sim::csv_header());
            text.push_str(",fpp_at_s\n");
            for row in &rows {
                let t = approx_fpp(args.m, args.k, row.s);
                text.push_str(&format!("{},{}\n", sim::csv_row(row), fmt_f64(t)));
            }
        }
        Format::JsonLines => {
            for row in &rows {
                let mut value = serde_json::to_value(row).expect("rows are plain data");
                let t = approx_fpp(args.m, args.k, row.s);
                value["fpp_at_s"] = serde_json::json!(t);
                text.push_str(&format!("{value}\n"));
            }
        }
    }
    Ok(text)
}

fn render_rows(rows: &[sim::MetricsRow], format: Format) -> String {
    let mut buf = Vec::new();
    match format {
        Format::Csv => sim::write_csv(rows, &mut buf).expect("writing to memory"),
        Format::JsonLines => sim::write_json_lines(rows, &mut buf).expect("writing to memory"),
    }
    String::from_utf8(buf).expect("output is UTF-8")
}
