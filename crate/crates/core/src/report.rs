//! Plain-text and CSV serialization of estimates, grids and curves.
//!
//! All output is UTF-8 with `\n` line endings. Reals are printed fixed-point
//! with the report precision. Metadata lines start with `#` so CSV readers
//! can skip them. Output depends only on the inputs, so identical runs give
//! byte-identical files.

use std::fmt::{self, Write as _};
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{ModelError, ReportError};
use crate::harness::{SweepGrid, TrialEstimate};
use crate::model::{expected_fragments, ratio_to_f64, ModelParams};
use crate::sim::FulfillmentOutcome;

pub const DEFAULT_PRECISION: usize = 6;

pub const LONG_CSV_HEADER: &str =
    "order_size,batch_size,analytic_recall,sim_mean,abs_error,ci95_half_width";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    GridCsv,
    LongCsv,
    SummaryText,
}

impl ReportFormat {
    fn name(self) -> &'static str {
        match self {
            Self::GridCsv => "grid-csv",
            Self::LongCsv => "long-csv",
            Self::SummaryText => "summary-text",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid-csv" => Ok(Self::GridCsv),
            "long-csv" => Ok(Self::LongCsv),
            "summary-text" => Ok(Self::SummaryText),
            other => Err(format!(
                "unknown format `{other}` (expected grid-csv, long-csv or summary-text)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportSpec {
    pub output_path: PathBuf,
    pub format: ReportFormat,
    precision: usize,
}

impl ReportSpec {
    pub fn new(
        output_path: impl Into<PathBuf>,
        format: ReportFormat,
        precision: usize,
    ) -> Result<Self, ReportError> {
        check_precision(precision)?;
        Ok(Self {
            output_path: output_path.into(),
            format,
            precision,
        })
    }

    pub fn precision(&self) -> usize {
        self.precision
    }
}

fn check_precision(precision: usize) -> Result<(), ReportError> {
    if (1..=15).contains(&precision) {
        Ok(())
    } else {
        Err(ReportError::Precision(precision))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sweep_footer(grid: &SweepGrid, precision: usize) -> String {
    let error = grid
        .mean_abs_error_pct
        .map_or_else(|| "NA".to_string(), |e| format!("{e:.precision$}"));
    format!(
        "# total_quantity={},crisis_prob={},n_trials={},base_seed={},mean_abs_error_pct={},error_basis=percent_of_total_quantity\n",
        grid.total_quantity, grid.crisis_prob, grid.n_trials, grid.base_seed, error
    )
}

pub fn render_sweep_long(grid: &SweepGrid, precision: usize) -> String {
    let mut out = String::with_capacity(64 * (grid.cells.len() + 2));
    out.push_str(LONG_CSV_HEADER);
    out.push('\n');
    for c in &grid.cells {
        let _ = write!(
            out,
            "{},{},{:.precision$},",
            c.order_size, c.batch_size, c.analytic_recall
        );
        match c.simulated {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{:.precision$},{:.precision$},{:.precision$}",
                    s.mean, s.abs_error, s.ci95_half_width
                );
            }
            None => out.push_str(",,\n"),
        }
    }
    out.push_str(&sweep_footer(grid, precision));
    out
}

/// One order size x batch size matrix per metric, each introduced by a
/// `# metric=<name>` line.
pub fn render_sweep_grid(grid: &SweepGrid, precision: usize) -> String {
    type Metric = fn(&crate::harness::SweepCell) -> Option<f64>;
    let mut metrics: Vec<(&str, Metric)> = vec![("analytic_recall", |c| Some(c.analytic_recall))];
    if grid.is_simulated() {
        metrics.push(("sim_mean", |c| c.simulated.map(|s| s.mean)));
        metrics.push(("abs_error", |c| c.simulated.map(|s| s.abs_error)));
        metrics.push(("ci95_half_width", |c| {
            c.simulated.map(|s| s.ci95_half_width)
        }));
    }

    let mut out = String::new();
    for (name, metric) in metrics {
        let _ = writeln!(out, "# metric={name}");
        out.push_str("order_size/batch_size");
        for b in &grid.batch_sizes {
            let _ = write!(out, ",{b}");
        }
        out.push('\n');
        for row in grid.rows() {
            let _ = write!(out, "{}", row[0].order_size);
            for cell in row {
                match metric(cell) {
                    Some(v) => {
                        let _ = write!(out, ",{v:.precision$}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
    out.push_str(&sweep_footer(grid, precision));
    out
}

pub fn write_sweep(grid: &SweepGrid, spec: &ReportSpec) -> Result<(), ReportError> {
    let text = match spec.format {
        ReportFormat::LongCsv => render_sweep_long(grid, spec.precision),
        ReportFormat::GridCsv => render_sweep_grid(grid, spec.precision),
        ReportFormat::SummaryText => return Err(ReportError::UnsupportedFormat("summary-text")),
    };
    write_file(&spec.output_path, &text)
}

/// Expected fragment count of an order across a range of batch sizes.
pub fn render_fragments_curve(
    order_size: u64,
    batch_range: RangeInclusive<u64>,
    precision: usize,
) -> Result<String, ReportError> {
    check_precision(precision)?;
    if batch_range.is_empty() {
        return Err(ModelError::EmptyAxis("batch size").into());
    }
    let mut out = String::from("batch_size,expected_fragments\n");
    for b in batch_range {
        let params = ModelParams::unbounded(order_size, b, order_size.max(1), 0.0)?;
        let _ = writeln!(
            out,
            "{b},{:.precision$}",
            ratio_to_f64(expected_fragments(&params))
        );
    }
    Ok(out)
}

pub fn write_fragments_curve(
    order_size: u64,
    batch_range: RangeInclusive<u64>,
    spec: &ReportSpec,
) -> Result<(), ReportError> {
    if spec.format == ReportFormat::SummaryText {
        return Err(ReportError::UnsupportedFormat("summary-text"));
    }
    let text = render_fragments_curve(order_size, batch_range, spec.precision)?;
    write_file(&spec.output_path, &text)
}

/// Human-readable comparison of a Monte Carlo estimate with the analytic
/// recall size.
pub fn render_summary(estimate: &TrialEstimate, analytic: f64, precision: usize) -> String {
    let p = &estimate.params;
    let deviation = (estimate.mean_recall - analytic).abs();
    let deviation_pct = 100.0 * deviation / p.total_quantity() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "params: order_size={} batch_size={} total_quantity={} crisis_prob={}",
        p.order_size(),
        p.batch_size(),
        p.total_quantity(),
        p.crisis_prob()
    );
    let _ = writeln!(
        out,
        "trials: {} base_seed={}",
        estimate.n_trials, estimate.base_seed
    );
    let _ = writeln!(out, "analytic_recall: {analytic:.precision$}");
    let _ = writeln!(out, "simulated_mean: {:.precision$}", estimate.mean_recall);
    let _ = writeln!(out, "std_error: {:.precision$}", estimate.std_error);
    let _ = writeln!(
        out,
        "ci95: [{:.precision$}, {:.precision$}]",
        estimate.mean_recall - estimate.ci95_half_width,
        estimate.mean_recall + estimate.ci95_half_width
    );
    let _ = writeln!(
        out,
        "ci98: [{:.precision$}, {:.precision$}]",
        estimate.mean_recall - estimate.ci98_half_width,
        estimate.mean_recall + estimate.ci98_half_width
    );
    let _ = writeln!(out, "deviation: {deviation:.precision$}");
    let _ = writeln!(
        out,
        "deviation_pct_of_total_quantity: {deviation_pct:.precision$}"
    );
    out
}

pub fn write_summary(
    estimate: &TrialEstimate,
    analytic: f64,
    spec: &ReportSpec,
) -> Result<(), ReportError> {
    if spec.format != ReportFormat::SummaryText {
        return Err(ReportError::UnsupportedFormat(spec.format.name()));
    }
    write_file(
        &spec.output_path,
        &render_summary(estimate, analytic, spec.precision),
    )
}

/// Structured dump of one trial: batches, then orders with their fragments.
pub fn render_outcome(outcome: &FulfillmentOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "initial_consumption: {}", outcome.initial_consumption);
    let _ = writeln!(out, "batches: {}", outcome.batches.len());
    for b in &outcome.batches {
        let _ = writeln!(
            out,
            "  batch {} size={} consumed={} in_crisis={}",
            b.id, b.size, b.consumed, b.in_crisis
        );
    }
    let _ = writeln!(out, "orders: {}", outcome.orders.len());
    for o in &outcome.orders {
        let fragments: Vec<String> = o
            .fragments
            .iter()
            .map(|f| format!("b{}:{}", f.batch_id, f.quantity))
            .collect();
        let _ = writeln!(
            out,
            "  order {} size={} fragments=[{}] recalled={}",
            o.id,
            o.size,
            fragments.join(" "),
            outcome.recalled_order_ids.contains(&o.id)
        );
    }
    let _ = writeln!(out, "recalled_quantity: {}", outcome.recalled_quantity);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{estimate_recall, sweep, EstimateConfig, SweepConfig};
    use crate::model::expected_recall_size;
    use crate::sim::{simulate_trial, TrialConfig};

    #[test]
    fn format_names_round_trip() {
        for f in [
            ReportFormat::GridCsv,
            ReportFormat::LongCsv,
            ReportFormat::SummaryText,
        ] {
            assert_eq!(f.to_string().parse::<ReportFormat>().unwrap(), f);
        }
        assert!("xlsx".parse::<ReportFormat>().is_err());
    }

    #[test]
    fn precision_bounds() {
        assert!(ReportSpec::new("x", ReportFormat::LongCsv, 0).is_err());
        assert!(ReportSpec::new("x", ReportFormat::LongCsv, 16).is_err());
        assert!(ReportSpec::new("x", ReportFormat::LongCsv, 15).is_ok());
    }

    #[test]
    fn single_analytic_cell() {
        let grid = sweep(&SweepConfig::analytic(50, 0.15, vec![1], vec![1])).unwrap();
        let text = render_sweep_long(&grid, 6);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], LONG_CSV_HEADER);
        assert_eq!(lines[1], "1,1,7.500000,,,");
        assert_eq!(
            lines[2],
            "# total_quantity=50,crisis_prob=0.15,n_trials=0,base_seed=0,mean_abs_error_pct=NA,error_basis=percent_of_total_quantity"
        );
        assert_eq!(lines.len(), 3);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn grid_matrix_layout() {
        let grid = sweep(&SweepConfig::simulated(
            10,
            0.2,
            vec![1, 5],
            vec![2, 3, 4],
            50,
            1,
        ))
        .unwrap();
        let text = render_sweep_grid(&grid, 3);
        let blocks = text.lines().filter(|l| l.starts_with("# metric=")).count();
        assert_eq!(blocks, 4);
        assert!(text.contains("order_size/batch_size,2,3,4\n"));
        let analytic_rows: Vec<&str> = text.lines().skip(2).take(2).collect();
        assert!(analytic_rows[0].starts_with("1,2.000,2.000,2.000"));
        assert_eq!(analytic_rows[1].split(',').count(), 4);
    }

    #[test]
    fn fragments_curve_values() {
        let text = render_fragments_curve(10, 1..=20, 6).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[1], "1,10.000000");
        assert_eq!(rows[4], "4,3.250000");
        assert_eq!(rows[10], "10,1.900000");
        let far = render_fragments_curve(10, 1_000_000..=1_000_000, 6).unwrap();
        assert_eq!(far.lines().nth(1).unwrap(), "1000000,1.000009");
        #[allow(clippy::reversed_empty_ranges)]
        let reversed = render_fragments_curve(10, 5..=4, 6);
        assert!(reversed.is_err());
    }

    #[test]
    fn zero_probability_summary() {
        let params = ModelParams::new(5, 3, 50, 0.0).unwrap();
        let est = estimate_recall(&EstimateConfig::new(params, 100, 4).unwrap());
        let text = render_summary(&est, expected_recall_size(&params), 6);
        assert!(text.contains("analytic_recall: 0.000000\n"));
        assert!(text.contains("simulated_mean: 0.000000\n"));
        assert!(text.contains("ci95: [0.000000, 0.000000]\n"));
        assert!(text.contains("deviation: 0.000000\n"));
    }

    #[test]
    fn summary_deviation_field() {
        let params = ModelParams::new(1, 1, 50, 0.15).unwrap();
        let est = estimate_recall(&EstimateConfig::new(params, 1000, 4).unwrap());
        let text = render_summary(&est, 7.5, 6);
        assert!(text.contains("analytic_recall: 7.500000\n"));
        let expected = format!("deviation: {:.6}\n", (est.mean_recall - 7.5).abs());
        assert!(text.contains(&expected));
    }

    #[test]
    fn writers_check_format_and_path() {
        let dir = tempfile::tempdir().unwrap();
        let grid = sweep(&SweepConfig::analytic(50, 0.15, vec![1], vec![1])).unwrap();
        let summary =
            ReportSpec::new(dir.path().join("g.txt"), ReportFormat::SummaryText, 6).unwrap();
        assert!(matches!(
            write_sweep(&grid, &summary),
            Err(ReportError::UnsupportedFormat(_))
        ));

        let missing =
            ReportSpec::new(dir.path().join("no/such/dir.csv"), ReportFormat::LongCsv, 6).unwrap();
        assert!(matches!(
            write_sweep(&grid, &missing),
            Err(ReportError::Io { .. })
        ));

        let ok = ReportSpec::new(dir.path().join("g.csv"), ReportFormat::LongCsv, 6).unwrap();
        write_sweep(&grid, &ok).unwrap();
        assert_eq!(
            fs::read_to_string(&ok.output_path).unwrap(),
            render_sweep_long(&grid, 6)
        );
    }

    #[test]
    fn outcome_dump() {
        let params = ModelParams::new(4, 6, 12, 1.0).unwrap();
        let outcome = simulate_trial(&TrialConfig::new(params, 0, 1).unwrap()).unwrap();
        let text = render_outcome(&outcome);
        assert!(text.contains("  order 1 size=4 fragments=[b0:2 b1:2] recalled=true\n"));
        assert!(text.ends_with("recalled_quantity: 12\n"));
    }
}
