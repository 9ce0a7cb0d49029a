//! Command-line interface.
//!
//! Exit statuses: 0 success, 1 I/O failure, 2 usage error, 3 validation
//! failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{ModelError, ReportError};
use crate::harness::{
    divisor_sizes, estimate_recall, sweep, EstimateConfig, SweepConfig, SweepGrid, DEFAULT_TRIALS,
};
use crate::model::{
    expected_recall_size, fragment_stats, recall_limit_batch_inf, recall_limit_order_inf,
    recall_probability, recall_probability_exact, ModelParams,
};
use crate::report::{
    render_fragments_curve, render_outcome, render_summary, render_sweep_grid, render_sweep_long,
    ReportFormat, DEFAULT_PRECISION,
};
use crate::rng::cell_seed;
use crate::sim::simulate_trial;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Mean absolute error threshold, in percent of Q, at full trial counts.
pub const VALIDATE_THRESHOLD_PCT: f64 = 2.5;
/// Threshold for quick runs with fewer than [`DEFAULT_TRIALS`] trials per cell.
pub const VALIDATE_QUICK_THRESHOLD_PCT: f64 = 6.0;
/// Checkpoints must fall within this many standard errors.
pub const CHECKPOINT_SIGMAS: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(
    name = "fragrecall",
    version,
    about = "Batch fragmentation and product recall sizing under FIFO assignment"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads for simulations (defaults to the rayon default)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Decimal places for reals in reports
    #[arg(long, global = true, default_value_t = DEFAULT_PRECISION)]
    pub precision: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the closed-form fragmentation and recall model
    #[command(version)]
    Analytic(ModelArgs),
    /// Estimate the recall size of one configuration by Monte Carlo
    #[command(version)]
    Simulate(SimulateArgs),
    /// Analytic (and simulated) recall over an order size x batch size grid
    #[command(version)]
    Sweep(SweepArgs),
    /// Compare model and simulation on the reference grid
    #[command(version)]
    Validate(ValidateArgs),
    /// Expected fragment count as a function of the batch size
    #[command(version)]
    Fragments(FragmentsArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(short = 'O', long)]
    pub order_size: u64,
    #[arg(short = 'B', long)]
    pub batch_size: u64,
    #[arg(short = 'Q', long)]
    pub quantity: u64,
    /// Batch crisis probability, as a fraction (0.15) or a percentage (15%)
    #[arg(short = 'p', long, value_parser = parse_probability)]
    pub crisis_prob: f64,
    /// key = value file with defaults for any long flag
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(short = 'n', long, default_value_t = DEFAULT_TRIALS)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the summary here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the full outcome of the first trial
    #[arg(long)]
    pub dump_trial: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(short = 'Q', long)]
    pub quantity: u64,
    #[arg(short = 'p', long, value_parser = parse_probability, required_unless_present = "crisis_probs", conflicts_with = "crisis_probs")]
    pub crisis_prob: Option<f64>,
    /// Comma-separated probabilities; writes one file per probability
    #[arg(long, value_parser = parse_probability, value_delimiter = ',')]
    pub crisis_probs: Option<Vec<f64>>,
    /// Order sizes a:b (default 1:Q)
    #[arg(long, value_parser = parse_range)]
    pub order_range: Option<RangeInclusive<u64>>,
    /// Batch sizes a:b (default 1:2Q)
    #[arg(long, value_parser = parse_range)]
    pub batch_range: Option<RangeInclusive<u64>>,
    #[arg(short = 'n', long, default_value_t = DEFAULT_TRIALS)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = ReportFormat::LongCsv)]
    pub format: ReportFormat,
    /// Skip the Monte Carlo simulation
    #[arg(long)]
    pub analytic_only: bool,
    /// Keep only order sizes dividing Q
    #[arg(long)]
    pub divisors_only: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(short = 'Q', long, default_value_t = 50)]
    pub quantity: u64,
    #[arg(short = 'p', long, value_parser = parse_probability, default_value = "0.15")]
    pub crisis_prob: f64,
    /// Order sizes a:b (default 1:Q)
    #[arg(long, value_parser = parse_range)]
    pub order_range: Option<RangeInclusive<u64>>,
    /// Batch sizes a:b (default 1:2Q)
    #[arg(long, value_parser = parse_range)]
    pub batch_range: Option<RangeInclusive<u64>>,
    #[arg(short = 'n', long, default_value_t = DEFAULT_TRIALS)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub divisors_only: bool,
    /// Also write the validation grid as long CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FragmentsArgs {
    #[arg(short = 'O', long)]
    pub order_size: u64,
    #[arg(long, value_parser = parse_range)]
    pub batch_range: RangeInclusive<u64>,
    /// Write the curve here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `0.15` or `15%` into a probability in `[0, 1]`.
pub fn parse_probability(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.strip_suffix('%') {
        Some(pct) => pct.trim().parse::<f64>().map(|v| v / 100.0),
        None => s.parse::<f64>(),
    }
    .map_err(|e| format!("invalid probability `{s}`: {e}"))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(format!("probability `{s}` is outside [0, 1]"));
    }
    Ok(value)
}

/// Parses `a:b` into the inclusive range `a..=b`, with `1 <= a <= b`.
pub fn parse_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("range `{s}` must look like a:b"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<u64>()
            .map_err(|e| format!("invalid bound `{v}`: {e}"))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a == 0 {
        return Err("range bounds must be positive".into());
    }
    if a > b {
        return Err(format!("range `{s}` is reversed"));
    }
    Ok(a..=b)
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => Self::Io(e.to_string()),
            other => Self::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

const SHORT_FLAGS: &[(&str, &str)] = &[
    ("order-size", "-O"),
    ("batch-size", "-B"),
    ("quantity", "-Q"),
    ("crisis-prob", "-p"),
    ("trials", "-n"),
];

const BOOL_KEYS: &[&str] = &["analytic-only", "divisors-only", "dump-trial"];

/// Splices `key = value` lines from a `--config` file in front of the
/// explicit flags. Keys already given on the command line are skipped so
/// flags take precedence.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strs: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let Some(pos) = strs
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    else {
        return Ok(args);
    };
    let path = match strs[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => strs
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| CliError::Usage("--config needs a path".into()))?,
    };
    let path = PathBuf::from(path);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;

    let given = |key: &str| {
        let long = format!("--{key}");
        let short = SHORT_FLAGS.iter().find(|(k, _)| *k == key).map(|(_, s)| *s);
        strs.iter().any(|a| {
            *a == long
                || a.starts_with(&format!("{long}="))
                || short.is_some_and(|s| a == s || (a.starts_with(s) && a.len() > 2))
        })
    };

    let mut injected = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key == "config" {
            return Err(CliError::Usage(
                "nested config files are not supported".into(),
            ));
        }
        if given(&key) {
            continue;
        }
        if BOOL_KEYS.contains(&key.as_str()) {
            match value {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!(
                        "{}:{}: `{key}` expects true or false, got `{other}`",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        } else {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }

    // Subcommand name sits at index 1 or later; inject right after it so the
    // injected flags parse as subcommand flags.
    let sub_pos = strs
        .iter()
        .position(|a| {
            ["analytic", "simulate", "sweep", "validate", "fragments"].contains(&a.as_str())
        })
        .ok_or_else(|| CliError::Usage("--config requires a subcommand".into()))?;
    let mut out = args;
    let tail = out.split_off(sub_pos + 1);
    out.extend(injected);
    out.extend(tail);
    Ok(out)
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Regular output goes to `out`, diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report_error(e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if !(1..=15).contains(&cli.precision) {
        return report_error(CliError::Usage(format!(
            "precision {} is outside [1, 15]",
            cli.precision
        )));
    }

    let result = match cli.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, out)),
            Err(e) => Err(CliError::Usage(e.to_string())),
        },
        None => dispatch(&cli, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => report_error(e),
    }
}

fn report_error(e: CliError) -> i32 {
    match e {
        CliError::Usage(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        CliError::Io(msg) => {
            eprintln!("error: {msg}");
            EXIT_IO
        }
    }
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<i32, CliError> {
    let precision = cli.precision;
    let written = match &cli.command {
        Command::Analytic(args) => cmd_analytic(args, precision, out),
        Command::Simulate(args) => cmd_simulate(args, precision, out),
        Command::Sweep(args) => cmd_sweep(args, precision, out),
        Command::Validate(args) => return cmd_validate(args, precision, out),
        Command::Fragments(args) => cmd_fragments(args, precision, out),
    };
    written.map(|()| EXIT_OK)
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::Io(format!("stdout: {e}"))
}

fn model_params(args: &ModelArgs) -> Result<ModelParams, CliError> {
    Ok(ModelParams::new(
        args.order_size,
        args.batch_size,
        args.quantity,
        args.crisis_prob,
    )?)
}

fn cmd_analytic(
    args: &ModelArgs,
    precision: usize,
    out: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let params = model_params(args)?;
    let stats = fragment_stats(&params);
    let text = format!(
        "order_size: {o}\nbatch_size: {b}\ntotal_quantity: {q}\ncrisis_prob: {p}\n\
         fr_min: {fmin}\nfr_max: {fmax}\n\
         p_fr_min: {pmin:.precision$} ({pmin_r})\np_fr_max: {pmax:.precision$} ({pmax_r})\n\
         expected_fragments: {ef:.precision$} ({ef_r})\n\
         recall_probability: {rp:.precision$}\nrecall_probability_exact: {rpx:.precision$}\n\
         expected_recall_size: {rs:.precision$}\n\
         limit_batch_size_infinite: {lb:.precision$}\nlimit_order_size_infinite: {lo:.precision$}\n",
        o = params.order_size(),
        b = params.batch_size(),
        q = params.total_quantity(),
        p = params.crisis_prob(),
        fmin = stats.fr_min,
        fmax = stats.fr_max,
        pmin = stats.p_fr_min_f64(),
        pmin_r = stats.p_fr_min,
        pmax = stats.p_fr_max_f64(),
        pmax_r = stats.p_fr_max,
        ef = stats.expected_fragments_f64(),
        ef_r = stats.expected_fragments,
        rp = recall_probability(&params),
        rpx = recall_probability_exact(&params),
        rs = expected_recall_size(&params),
        lb = recall_limit_batch_inf(params.total_quantity(), params.crisis_prob())?,
        lo = recall_limit_order_inf(params.total_quantity())?,
    );
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn cmd_simulate(
    args: &SimulateArgs,
    precision: usize,
    out: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let params = model_params(&args.model)?;
    let config = EstimateConfig::new(params, args.trials, args.seed)?;
    if args.dump_trial {
        let outcome = simulate_trial(&config.trial(0))?;
        writeln!(out, "# trial 0").map_err(stdout_err)?;
        out.write_all(render_outcome(&outcome).as_bytes())
            .map_err(stdout_err)?;
    }
    let estimate = estimate_recall(&config);
    let summary = render_summary(&estimate, expected_recall_size(&params), precision);
    match &args.out {
        Some(path) => fs::write(path, summary).map_err(io_err(path)),
        None => out.write_all(summary.as_bytes()).map_err(stdout_err),
    }
}

fn axis(range: &Option<RangeInclusive<u64>>, default_end: u64) -> Vec<u64> {
    range.clone().unwrap_or(1..=default_end).collect()
}

fn order_axis(
    range: &Option<RangeInclusive<u64>>,
    quantity: u64,
    divisors_only: bool,
) -> Result<Vec<u64>, CliError> {
    let sizes = axis(range, quantity);
    if divisors_only {
        let kept = divisor_sizes(quantity, &sizes);
        if kept.is_empty() {
            return Err(CliError::Usage(
                "no order size in range divides the quantity".into(),
            ));
        }
        return Ok(kept);
    }
    Ok(sizes)
}

fn render_grid(
    grid: &SweepGrid,
    format: ReportFormat,
    precision: usize,
) -> Result<String, CliError> {
    match format {
        ReportFormat::LongCsv => Ok(render_sweep_long(grid, precision)),
        ReportFormat::GridCsv => Ok(render_sweep_grid(grid, precision)),
        ReportFormat::SummaryText => Err(CliError::Usage(
            "sweep output must be long-csv or grid-csv".into(),
        )),
    }
}

/// `grid.csv` becomes `grid_p0.15.csv`.
fn per_probability_path(path: &Path, p: f64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_p{p}.{}", ext.to_string_lossy()),
        None => format!("{stem}_p{p}"),
    };
    path.with_file_name(name)
}

fn cmd_sweep(
    args: &SweepArgs,
    precision: usize,
    out: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let orders = order_axis(&args.order_range, args.quantity, args.divisors_only)?;
    let batches = axis(&args.batch_range, 2 * args.quantity);
    let jobs: Vec<(f64, PathBuf)> = match (&args.crisis_probs, args.crisis_prob) {
        (Some(probs), _) => probs
            .iter()
            .map(|&p| (p, per_probability_path(&args.out, p)))
            .collect(),
        (None, Some(p)) => vec![(p, args.out.clone())],
        (None, None) => {
            return Err(CliError::Usage(
                "--crisis-prob or --crisis-probs is required".into(),
            ))
        }
    };
    if args.format == ReportFormat::SummaryText {
        return Err(CliError::Usage(
            "sweep output must be long-csv or grid-csv".into(),
        ));
    }

    for (p, path) in jobs {
        let config = if args.analytic_only {
            SweepConfig::analytic(args.quantity, p, orders.clone(), batches.clone())
        } else {
            SweepConfig::simulated(
                args.quantity,
                p,
                orders.clone(),
                batches.clone(),
                args.trials,
                args.seed,
            )
        };
        let grid = sweep(&config)?;
        let text = render_grid(&grid, args.format, precision)?;
        fs::write(&path, text).map_err(io_err(&path))?;
        match grid.mean_abs_error_pct {
            Some(err) => writeln!(
                out,
                "crisis_prob={p} cells={} mean_abs_error_pct={err:.precision$} -> {}",
                grid.cells.len(),
                path.display()
            ),
            None => writeln!(
                out,
                "crisis_prob={p} cells={} -> {}",
                grid.cells.len(),
                path.display()
            ),
        }
        .map_err(stdout_err)?;
    }
    Ok(())
}

fn cmd_validate(
    args: &ValidateArgs,
    precision: usize,
    out: &mut (dyn Write + Send),
) -> Result<i32, CliError> {
    let q = args.quantity;
    let orders = order_axis(&args.order_range, q, args.divisors_only)?;
    let batches = axis(&args.batch_range, 2 * q);
    let threshold = if args.trials >= DEFAULT_TRIALS {
        VALIDATE_THRESHOLD_PCT
    } else {
        VALIDATE_QUICK_THRESHOLD_PCT
    };

    let w =
        |out: &mut (dyn Write + Send), s: String| out.write_all(s.as_bytes()).map_err(stdout_err);
    w(
        out,
        format!(
            "validation: total_quantity={q} crisis_prob={} n_trials={} base_seed={} cells={}\n",
            args.crisis_prob,
            args.trials,
            args.seed,
            orders.len() * batches.len()
        ),
    )?;

    let mut pass = true;
    for order_size in [1, q] {
        let params = ModelParams::new(order_size, 1, q, args.crisis_prob)?;
        let config = EstimateConfig::new(params, args.trials, cell_seed(args.seed, order_size, 1))?;
        let est = estimate_recall(&config);
        let analytic = expected_recall_size(&params);
        let ok = est.covers(analytic, CHECKPOINT_SIGMAS);
        pass &= ok;
        w(
            out,
            format!(
                "checkpoint O={order_size} B=1: analytic={analytic:.precision$} simulated={:.precision$} std_error={:.precision$} {}\n",
                est.mean_recall,
                est.std_error,
                verdict(ok)
            ),
        )?;
    }

    let grid = sweep(&SweepConfig::simulated(
        q,
        args.crisis_prob,
        orders,
        batches,
        args.trials,
        args.seed,
    ))?;
    let err = grid.mean_abs_error_pct.unwrap_or(f64::NAN);
    let ok = err <= threshold;
    pass &= ok;
    w(
        out,
        format!(
            "mean_abs_error_pct: {err:.precision$} (threshold {threshold}) {}\n",
            verdict(ok)
        ),
    )?;
    if let Some(path) = &args.out {
        fs::write(path, render_sweep_long(&grid, precision)).map_err(io_err(path))?;
    }
    w(out, format!("result: {}\n", verdict(pass)))?;
    Ok(if pass { EXIT_OK } else { EXIT_VALIDATION })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_fragments(
    args: &FragmentsArgs,
    precision: usize,
    out: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    if args.order_size == 0 {
        return Err(ModelError::ZeroOrderSize.into());
    }
    let text = render_fragments_curve(args.order_size, args.batch_range.clone(), precision)?;
    match &args.out {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => out.write_all(text.as_bytes()).map_err(stdout_err),
    }
}
