//! CSV output: `#` comment header with the config echo, then long-format rows.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiment::AggregateResult;

pub const COLUMNS: [&str; 7] = ["experiment", "algorithm", "seed", "x_unit", "x", "metric", "value"];

/// 12 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Writes the result. Config lines are `# key = value`, environment
/// lines `#@ key = value`.
pub fn write_csv<W: Write>(result: &AggregateResult, mut out: W) -> Result<()> {
    for line in result.config.to_toml().lines() {
        writeln!(out, "# {line}")?;
    }
    for (k, v) in &result.env_description {
        writeln!(out, "#@ {k} = {v}")?;
    }
    writeln!(out, "#@ diverged_seeds = {:?}", result.diverged_seeds())?;
    let truncated: u64 = result.runs.iter().map(|r| r.truncated_episodes).sum();
    if truncated > 0 {
        writeln!(out, "#@ truncated_episodes = {truncated}")?;
    }

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(COLUMNS).map_err(csv_error)?;
    let exp = result.config.experiment.name();
    let alg = result.config.algorithm.name();
    let unit = result.x_unit;
    for run in &result.runs {
        let seed = run.seed.to_string();
        for (x, values) in &run.points {
            let x = x.to_string();
            for (metric, v) in result.config.metrics.iter().zip(values) {
                w.write_record([exp, alg, &seed, unit, &x, metric, &format_value(*v)])
                    .map_err(csv_error)?;
            }
        }
    }
    for (label, pick) in [("mean", 0usize), ("stderr", 1)] {
        for metric in &result.config.metrics {
            for p in result.curve(metric) {
                let v = if pick == 0 { p.mean } else { p.stderr };
                w.write_record([exp, alg, label, unit, &p.x.to_string(), metric, &format_value(v)])
                    .map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &AggregateResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(result, std::io::BufWriter::new(file))
}

/// One data row of an emitted CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub experiment: String,
    pub algorithm: String,
    /// A seed number, `mean` or `stderr`.
    pub seed: String,
    pub x_unit: String,
    pub x: u64,
    pub metric: String,
    pub value: f64,
}

/// A parsed CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCsv {
    pub config: ExperimentConfig,
    pub rows: Vec<CsvRow>,
}

impl ParsedCsv {
    /// `(x, value)` pairs of the rows with this seed label and metric.
    pub fn series(&self, seed: &str, metric: &str) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.seed == seed && r.metric == metric)
            .map(|r| (r.x, r.value))
            .collect()
    }
}

/// Reads back a file written by [`write_csv`], including its config.
pub fn read_csv(text: &str) -> Result<ParsedCsv> {
    let mut echo = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            echo.push_str(rest);
            echo.push('\n');
        }
    }
    let config = ExperimentConfig::parse(&echo, &[])?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().ne(COLUMNS) {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let num = |i: usize| -> Result<&str> { rec.get(i).ok_or_else(|| Error::Parse("short row".into())) };
        rows.push(CsvRow {
            experiment: num(0)?.to_string(),
            algorithm: num(1)?.to_string(),
            seed: num(2)?.to_string(),
            x_unit: num(3)?.to_string(),
            x: num(4)?
                .parse()
                .map_err(|_| Error::Parse(format!("bad x `{}`", &rec[4])))?,
            metric: num(5)?.to_string(),
            value: num(6)?
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{}`", &rec[6])))?,
        });
    }
    Ok(ParsedCsv { config, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::run_experiment;

    fn result(extra: &str) -> AggregateResult {
        let cfg = ExperimentConfig::parse(&format!("experiment = \"gridworld\"\nB = 40\n{extra}"), &[]).unwrap();
        run_experiment(&cfg, 1).unwrap()
    }

    #[test]
    fn header_only_without_checkpoints() {
        let mut res = result("K = 1");
        res.runs.iter_mut().for_each(|r| r.points.clear());
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec![COLUMNS.join(",")]);
    }

    #[test]
    fn round_trip_recovers_mean_curve_and_config() {
        let res = result("K = 3\nseeds = 3\nmetrics = [\"sup_error\", \"weight_norm\"]");
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let parsed = read_csv(&text).unwrap();
        assert_eq!(parsed.config, res.config);
        for metric in ["sup_error", "weight_norm"] {
            let expected: Vec<(u64, f64)> = res
                .curve(metric)
                .iter()
                .map(|p| (p.x, format_value(p.mean).parse().unwrap()))
                .collect();
            assert_eq!(parsed.series("mean", metric), expected);
            assert_eq!(parsed.series("stderr", metric).len(), 3);
        }
        assert!(parsed.rows.iter().any(|r| r.seed == "2"));
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_value(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(format_value(0.0), "0.00000000000e0");
    }
}
