//! Multi-seed experiment driver.
//!
//! Sweeps node counts and compression settings over a base scenario, fans
//! independent runs out across a rayon pool, and writes two CSV artifacts:
//!
//! - `results.csv` — one [`ResultRow`] per (seed × node_count × class ×
//!   setting), header first, RFC 4180 quoting.
//! - `summary.csv` — per (node_count × class × setting): mean delivery ratio
//!   and latency over seeds with Student-t 95% confidence half-widths.
//!
//! Outputs are byte-deterministic: run seeds derive from the scenario's base
//! seed plus the seed index (so adding node counts never reshuffles existing
//! runs), rows are sorted before writing, and every float is rounded to six
//! significant digits before it is written *or* aggregated — the summary is
//! exactly recomputable from `results.csv` alone.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::sim::scenario::{run, ScenarioConfig, ScenarioError};
use crate::sim::ContentClass;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("matrix invalid: {0}")]
    MatrixInvalid(String),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Which compression settings a matrix sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompressionSweep {
    Off,
    On,
    Both,
}

impl CompressionSweep {
    pub fn settings(self) -> &'static [bool] {
        match self {
            CompressionSweep::Off => &[false],
            CompressionSweep::On => &[true],
            CompressionSweep::Both => &[false, true],
        }
    }
}

pub const DEFAULT_NODE_COUNTS: [usize; 8] = [10, 30, 50, 70, 90, 110, 130, 150];
pub const DEFAULT_SEEDS: u32 = 100;

/// A full sweep: every (node_count × compression setting × seed) cell runs
/// the base scenario with only those three fields changed.
#[derive(Debug, Clone)]
pub struct ExperimentMatrix {
    pub scenario: ScenarioConfig,
    pub node_counts: Vec<usize>,
    pub compression: CompressionSweep,
    /// Number of seeds per cell; run seed = scenario.seed + seed index.
    pub seeds: u32,
    pub output_dir: PathBuf,
}

impl ExperimentMatrix {
    pub fn new(scenario: ScenarioConfig, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentMatrix {
            scenario,
            node_counts: DEFAULT_NODE_COUNTS.to_vec(),
            compression: CompressionSweep::Both,
            seeds: DEFAULT_SEEDS,
            output_dir: output_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds == 0 {
            return Err(ExperimentError::MatrixInvalid("seeds must be ≥ 1".into()));
        }
        if self.node_counts.is_empty() {
            return Err(ExperimentError::MatrixInvalid(
                "node_counts must be nonempty".into(),
            ));
        }
        for &n in &self.node_counts {
            let mut probe = self.scenario.clone();
            probe.nodes.people = n;
            probe.validate()?;
        }
        Ok(())
    }
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_name: String,
    pub seed: u64,
    pub node_count: usize,
    pub content_class: ContentClass,
    pub compression_on: bool,
    pub created: u64,
    pub delivered: u64,
    pub delivery_ratio: f64,
    pub mean_latency_s: f64,
    pub bits_transmitted: u64,
    pub mean_compression_ratio: f64,
}

pub const RESULTS_HEADER: [&str; 11] = [
    "scenario_name",
    "seed",
    "node_count",
    "content_class",
    "compression_on",
    "created",
    "delivered",
    "delivery_ratio",
    "mean_latency_s",
    "bits_transmitted",
    "mean_compression_ratio",
];

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario_name: String,
    pub node_count: usize,
    pub content_class: ContentClass,
    pub compression_on: bool,
    pub seeds: u32,
    pub mean_delivery_ratio: f64,
    pub ci95_delivery_ratio: f64,
    pub mean_latency_s: f64,
    pub ci95_latency_s: f64,
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "scenario_name",
    "node_count",
    "content_class",
    "compression_on",
    "seeds",
    "mean_delivery_ratio",
    "ci95_delivery_ratio",
    "mean_latency_s",
    "ci95_latency_s",
];

/// Round to six significant digits and render with Rust's shortest-roundtrip
/// float display, so `parse(format(x))` gives back exactly the written value.
pub fn format_sig6(x: f64) -> String {
    sig6(x).to_string()
}

/// The six-significant-digit value that `format_sig6` writes.
pub fn sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(5 - exp);
    (x * scale).round() / scale
}

/// Run every cell of the matrix. Rows come back sorted by
/// (node_count, compression_on, seed, class) regardless of worker timing.
pub fn run_matrix(matrix: &ExperimentMatrix) -> Result<Vec<ResultRow>, ExperimentError> {
    matrix.validate()?;
    let classes: Vec<ContentClass> = ContentClass::ALL
        .into_iter()
        .filter(|c| matrix.scenario.workloads.iter().any(|w| w.content_class == *c))
        .collect();

    let mut cells = Vec::new();
    for &node_count in &matrix.node_counts {
        for &on in matrix.compression.settings() {
            for k in 0..matrix.seeds {
                cells.push((node_count, on, matrix.scenario.seed + u64::from(k)));
            }
        }
    }

    let mut rows: Vec<ResultRow> = cells
        .par_iter()
        .map(|&(node_count, on, seed)| {
            let mut config = matrix.scenario.clone();
            config.nodes.people = node_count;
            config.compression.enabled = on;
            config.seed = seed;
            let metrics = run(&config)?;
            Ok(classes
                .iter()
                .map(|&class| {
                    let m = metrics.class(class);
                    ResultRow {
                        scenario_name: config.name.clone(),
                        seed,
                        node_count,
                        content_class: class,
                        compression_on: on,
                        created: m.created,
                        delivered: m.delivered,
                        delivery_ratio: sig6(m.delivery_ratio()),
                        mean_latency_s: sig6(m.mean_latency_s()),
                        bits_transmitted: m.bits_transmitted,
                        mean_compression_ratio: sig6(m.mean_compression_ratio()),
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?
        .into_iter()
        .flatten()
        .collect();

    rows.sort_by(|a, b| {
        (a.node_count, a.compression_on, a.seed, a.content_class).cmp(&(
            b.node_count,
            b.compression_on,
            b.seed,
            b.content_class,
        ))
    });
    Ok(rows)
}

/// Collapse rows into per-(node_count × class × setting) means with Student-t
/// 95% confidence half-widths over seeds.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut buckets: std::collections::BTreeMap<(usize, ContentClass, bool), Vec<&ResultRow>> =
        std::collections::BTreeMap::new();
    for row in rows {
        buckets
            .entry((row.node_count, row.content_class, row.compression_on))
            .or_default()
            .push(row);
    }
    buckets
        .into_iter()
        .map(|((node_count, class, on), members)| {
            let name = members[0].scenario_name.clone();
            let n = members.len();
            let (dr_mean, dr_ci) =
                mean_ci95(members.iter().map(|r| r.delivery_ratio).collect::<Vec<_>>());
            let (lat_mean, lat_ci) =
                mean_ci95(members.iter().map(|r| r.mean_latency_s).collect::<Vec<_>>());
            SummaryRow {
                scenario_name: name,
                node_count,
                content_class: class,
                compression_on: on,
                seeds: n as u32,
                mean_delivery_ratio: sig6(dr_mean),
                ci95_delivery_ratio: sig6(dr_ci),
                mean_latency_s: sig6(lat_mean),
                ci95_latency_s: sig6(lat_ci),
            }
        })
        .collect()
}

fn mean_ci95(values: Vec<f64>) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid dof")
        .inverse_cdf(0.975);
    (mean, t * se)
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    out.push_str(&RESULTS_HEADER.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.scenario_name),
            r.seed,
            r.node_count,
            r.content_class,
            r.compression_on,
            r.created,
            r.delivered,
            format_sig6(r.delivery_ratio),
            format_sig6(r.mean_latency_s),
            r.bits_transmitted,
            format_sig6(r.mean_compression_ratio),
        ));
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(&SUMMARY_HEADER.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.scenario_name),
            r.node_count,
            r.content_class,
            r.compression_on,
            r.seeds,
            format_sig6(r.mean_delivery_ratio),
            format_sig6(r.ci95_delivery_ratio),
            format_sig6(r.mean_latency_s),
            format_sig6(r.ci95_latency_s),
        ));
    }
    out
}

/// RFC 4180: quote only when the field contains a comma, quote, or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Paths produced by [`execute`].
#[derive(Debug, Clone)]
pub struct MatrixOutput {
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
    pub rows: Vec<ResultRow>,
}

/// Run the whole matrix and write `results.csv` + `summary.csv`.
pub fn execute(matrix: &ExperimentMatrix) -> Result<MatrixOutput, ExperimentError> {
    let rows = run_matrix(matrix)?;
    let summary = summarize(&rows);
    fs::create_dir_all(&matrix.output_dir).map_err(|source| ExperimentError::Io {
        path: matrix.output_dir.clone(),
        source,
    })?;
    let results_path = matrix.output_dir.join("results.csv");
    let summary_path = matrix.output_dir.join("summary.csv");
    write_file(&results_path, results_csv(&rows).as_bytes())?;
    write_file(&summary_path, summary_csv(&summary).as_bytes())?;
    Ok(MatrixOutput {
        results_path,
        summary_path,
        rows,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    Ok(())
}
