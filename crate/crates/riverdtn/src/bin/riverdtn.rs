//! Experiment driver CLI.
//!
//! `riverdtn run` sweeps node counts × compression settings × seeds over a
//! scenario file and writes `results.csv` + `summary.csv`; `riverdtn validate`
//! checks a scenario and prints the resolved effective config; `riverdtn
//! codec` exposes the bundle wire codec and payload compression for golden-
//! vector maintenance.
//!
//! Exit codes: 0 success, 2 invalid config or malformed input, 3 I/O failure.
//! Set `RIVERDTN_LOG` (e.g. `info`, `debug`) for logging.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use riverdtn::bundle::{deserialize_bundle, serialize_bundle, Bundle, EndpointId, PayloadBlock};
use riverdtn::compression::{compress_bundle, CompressionSetting};
use riverdtn::experiment::{
    execute, summarize, CompressionSweep, ExperimentError, ExperimentMatrix, format_sig6,
    DEFAULT_NODE_COUNTS, DEFAULT_SEEDS,
};
use riverdtn::sim::scenario::{calibration_report, ScenarioConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "riverdtn", version, about = "DTN compression experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix and write results.csv + summary.csv.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Node counts to sweep, comma-separated.
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<usize>>,
        /// Compression settings to sweep.
        #[arg(long, value_enum, default_value_t = SweepArg::Both)]
        compression: SweepArg,
        /// Seeds per cell; run seed = scenario seed + index.
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        seeds: u32,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Validate a scenario file and print the resolved effective config.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Bundle wire-codec utilities.
    Codec {
        #[command(subcommand)]
        command: CodecCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    On,
    Off,
    Both,
}

impl From<SweepArg> for CompressionSweep {
    fn from(v: SweepArg) -> Self {
        match v {
            SweepArg::On => CompressionSweep::On,
            SweepArg::Off => CompressionSweep::Off,
            SweepArg::Both => CompressionSweep::Both,
        }
    }
}

#[derive(Subcommand)]
enum CodecCommand {
    /// Build a serialized bundle from a JSON description and a payload file.
    Encode {
        /// JSON bundle description (see `BundleDesc` fields).
        #[arg(long)]
        desc: PathBuf,
        /// Raw payload bytes.
        #[arg(long)]
        payload: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretty-print a serialized bundle.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Deflate a serialized bundle's payload and print the report.
    Compress {
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write the compressed bundle; omit to only print the report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Deflate effort level 1..=9.
        #[arg(long, default_value_t = 6)]
        level: u32,
    },
}

/// JSON shape accepted by `codec encode`. Omitted EIDs default to the null
/// endpoint `dtn:none`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleDesc {
    destination: Option<String>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    report_to: Option<String>,
    #[serde(default)]
    custodian: Option<String>,
    #[serde(default)]
    creation_time: u64,
    #[serde(default)]
    creation_seq: u64,
    #[serde(default = "default_lifetime")]
    lifetime_s: u64,
}

fn default_lifetime() -> u64 {
    86_400
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("RIVERDTN_LOG")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            nodes,
            compression,
            seeds,
            jobs,
            out,
        } => cmd_run(&scenario, nodes, compression.into(), seeds, jobs, out),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Codec { command } => match command {
            CodecCommand::Encode { desc, payload, out } => cmd_encode(&desc, &payload, &out),
            CodecCommand::Decode { input } => cmd_decode(&input),
            CodecCommand::Compress { input, out, level } => {
                cmd_compress(&input, out.as_deref(), level)
            }
        },
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, ExitCode> {
    fs::read(path).map_err(|e| {
        eprintln!("error: reading {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), ExitCode> {
    fs::write(path, bytes).map_err(|e| {
        eprintln!("error: writing {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    let text = String::from_utf8(read_file(path)?).map_err(|e| {
        eprintln!("error: {}: not UTF-8: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    ScenarioConfig::from_json(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn cmd_run(
    scenario_path: &Path,
    nodes: Option<Vec<usize>>,
    compression: CompressionSweep,
    seeds: u32,
    jobs: usize,
    out: PathBuf,
) -> ExitCode {
    let scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if jobs > 0 {
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let mut matrix = ExperimentMatrix::new(scenario, out);
    matrix.node_counts = nodes.unwrap_or_else(|| DEFAULT_NODE_COUNTS.to_vec());
    matrix.compression = compression;
    matrix.seeds = seeds;
    log::info!(
        "matrix: {} node counts × {:?} × {} seeds",
        matrix.node_counts.len(),
        matrix.compression,
        matrix.seeds
    );
    match execute(&matrix) {
        Ok(output) => {
            println!("wrote {}", output.results_path.display());
            println!("wrote {}", output.summary_path.display());
            for s in summarize(&output.rows) {
                println!(
                    "{} nodes={} class={} compression={} delivery_ratio={} ±{}",
                    s.scenario_name,
                    s.node_count,
                    s.content_class,
                    if s.compression_on { "on" } else { "off" },
                    format_sig6(s.mean_delivery_ratio),
                    format_sig6(s.ci95_delivery_ratio),
                );
            }
            ExitCode::SUCCESS
        }
        Err(ExperimentError::Io { path, source }) => {
            eprintln!("error: writing {}: {source}", path.display());
            ExitCode::from(EXIT_IO)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn cmd_validate(scenario_path: &Path) -> ExitCode {
    let scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Err(e) = scenario.validate() {
        eprintln!("invalid: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match calibration_report(&scenario) {
        Ok(rows) => {
            for (class, bytes, ratio) in rows {
                println!(
                    "calibration: {class} {bytes} B deflate ratio {}",
                    format_sig6(ratio)
                );
            }
        }
        Err(e) => {
            eprintln!("invalid: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    println!("valid: effective config follows");
    println!(
        "{}",
        serde_json::to_string_pretty(&scenario).expect("config serializes")
    );
    ExitCode::SUCCESS
}

fn parse_eid(field: &str, value: Option<&str>) -> Result<EndpointId, ExitCode> {
    match value {
        None => Ok(EndpointId::null()),
        Some(text) => {
            let (scheme, ssp) = text.split_once(':').ok_or_else(|| {
                eprintln!("error: {field}: EID `{text}` has no scheme separator");
                ExitCode::from(EXIT_CONFIG)
            })?;
            EndpointId::new(scheme, ssp).map_err(|e| {
                eprintln!("error: {field}: {e}");
                ExitCode::from(EXIT_CONFIG)
            })
        }
    }
}

fn cmd_encode(desc_path: &Path, payload_path: &Path, out: &Path) -> ExitCode {
    let run = || -> Result<ExitCode, ExitCode> {
        let desc_bytes = read_file(desc_path)?;
        let desc: BundleDesc = serde_json::from_slice(&desc_bytes).map_err(|e| {
            eprintln!("error: {}: {e}", desc_path.display());
            ExitCode::from(EXIT_CONFIG)
        })?;
        let payload = read_file(payload_path)?;
        let bundle = Bundle::new(
            &parse_eid("destination", desc.destination.as_deref())?,
            &parse_eid("source", desc.source.as_deref())?,
            &parse_eid("report_to", desc.report_to.as_deref())?,
            &parse_eid("custodian", desc.custodian.as_deref())?,
            desc.creation_time,
            desc.creation_seq,
            desc.lifetime_s,
            PayloadBlock::plain(payload),
        )
        .map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        })?;
        write_out(out, &serialize_bundle(&bundle))?;
        println!("wrote {} ({} bytes)", out.display(), bundle.serialized_len());
        Ok(ExitCode::SUCCESS)
    };
    run().unwrap_or_else(|code| code)
}

fn decode_input(path: &Path) -> Result<Bundle, ExitCode> {
    let bytes = read_file(path)?;
    deserialize_bundle(&bytes).map_err(|e| {
        // BundleError::Malformed carries the byte position of the failure.
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn cmd_decode(input: &Path) -> ExitCode {
    let bundle = match decode_input(input) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let p = &bundle.primary;
    println!("version:       {}", p.version);
    println!("flags:         {:#x}", p.flags);
    println!("destination:   {}", p.destination());
    println!("source:        {}", p.source());
    println!("report_to:     {}", p.report_to());
    println!("custodian:     {}", p.custodian());
    println!("creation_time: {}", p.creation_time);
    println!("creation_seq:  {}", p.creation_seq);
    println!("lifetime_s:    {}", p.lifetime_s);
    println!("dictionary:    {} bytes", p.dictionary.len());
    println!(
        "payload:       {} bytes{}",
        bundle.payload.data.len(),
        if bundle.payload.is_deflate() { " (deflate)" } else { "" }
    );
    ExitCode::SUCCESS
}

fn cmd_compress(input: &Path, out: Option<&Path>, level: u32) -> ExitCode {
    let bundle = match decode_input(input) {
        Ok(b) => b,
        Err(code) => return code,
    };
    let setting = match CompressionSetting::new(true, level) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match compress_bundle(bundle, &setting) {
        Ok((compressed, report)) => {
            println!(
                "original {} B, compressed {} B, ratio {}{}",
                report.original_bytes,
                report.compressed_bytes,
                format_sig6(report.ratio),
                if compressed.payload.is_deflate() { "" } else { " (kept uncompressed: no gain)" }
            );
            if let Some(path) = out {
                if let Err(code) = write_out(path, &serialize_bundle(&compressed)) {
                    return code;
                }
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
