//! `chromashift`: every stage of the pipeline from the command line.
//!
//! Results go to files and a JSON summary to stdout. Failures print one
//! JSON line `{"error": {"code": ..., "message": ...}}` to stderr and exit
//! non-zero.

mod commands;
mod values;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chromashift::colorimetry::ClipPolicy;

#[derive(Parser, Debug)]
#[command(name = "chromashift", version, about = "Power-saving illuminant shifts that stay below the adaptation threshold")]
pub struct Cli {
    /// Worker threads for parallel stages (default: all cores). Results do
    /// not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pool the pixel colors of an image corpus into a histogram CSV.
    Histogram {
        corpus: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = chromashift::power::DEFAULT_BINS)]
        bins: u32,
    },
    /// Relative power over a u'v' grid plus its break-even contour.
    Landscape {
        /// Histogram CSV.
        hist: PathBuf,
        /// Display power: `default`, `r,g,b[,static]` or a JSON file.
        params: String,
        /// Directory for landscape.csv, landscape.png and boundary.csv.
        out: PathBuf,
        /// Grid JSON (u_min, u_max, v_min, v_max, nu, nv).
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "clamp")]
        clip: Clip,
    },
    /// Fit the psychometric function to the calibration records.
    FitCalibration { jsonl: PathBuf },
    /// Fit k1 and k2 with profile-likelihood intervals.
    FitAdaptation {
        jsonl: PathBuf,
        /// Schedule JSON for blocks without a schedule record.
        schedule: Option<PathBuf>,
        /// Psychometric slope; with --x0 replaces the calibration fit.
        #[arg(long, requires = "x0")]
        k: Option<f64>,
        #[arg(long, requires = "k", allow_negative_numbers = true)]
        x0: Option<f64>,
        /// Grid JSON (k1_min, k1_max, k1_step, k2_min, k2_max, k2_step).
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Simulate an observer running the study protocol; writes JSON lines.
    Simulate {
        /// True constants: `k1,k2` or a JSON file.
        truth: String,
        /// Schedule JSON.
        schedule: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        blocks: u32,
        /// Calibration trials before the first block.
        #[arg(long, default_value_t = 70)]
        calibration: usize,
        #[arg(long, default_value_t = 400.0)]
        k: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        /// Constants used to place the stimuli.
        #[arg(long, default_value = "0.1,0.7")]
        prior: String,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fastest ramp keeping the gap within the allowance; writes a schedule.
    Optimize {
        /// Constants: `k1,k2` or a JSON file.
        params: String,
        /// Allowance in u'v' or with a `jnd` suffix.
        delta_t: String,
        t_max: f64,
        #[arg(long, default_value = "linear@1.47")]
        trajectory: String,
        /// Schedule JSON to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Savings against allowance for every candidate trajectory.
    Pareto {
        hist: PathBuf,
        out: PathBuf,
        #[arg(long, default_value = "default")]
        display: String,
        /// Optimization config JSON (t_max, delta_t, candidates).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "0jnd:6jnd:0.5jnd")]
        delta_t: String,
        #[arg(long, value_enum, default_value = "clamp")]
        clip: Clip,
    },
    /// Savings over allowance and time limit for one trajectory.
    Heatmap {
        hist: PathBuf,
        out: PathBuf,
        #[arg(long, default_value = "default")]
        display: String,
        #[arg(long, default_value = "linear@1.47")]
        trajectory: String,
        /// Constants (default: the fitted values of a study trajectory).
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value = "1jnd:6jnd:1jnd")]
        delta_t: String,
        #[arg(long, default_value = "60:600:30")]
        t_max: String,
        /// Also write a grayscale raster, rows by allowance.
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "clamp")]
        clip: Clip,
    },
    /// Apply a deployment schedule to a numbered frame sequence.
    Shift {
        input: PathBuf,
        output: PathBuf,
        /// Deployment schedule JSON.
        schedule: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value = "default")]
        display: String,
        #[arg(long, value_enum, default_value = "clamp")]
        clip: Clip,
        /// Per-frame report CSV (default: <output>/report.csv).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the study service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Session directory; sessions are kept in memory without it.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Sensitivity and ROC points from yes/no detection responses.
    Sdt {
        jsonl: PathBuf,
        /// ROC points CSV.
        #[arg(long)]
        roc: Option<PathBuf>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum Clip {
    Clamp,
    Project,
}

impl From<Clip> for ClipPolicy {
    fn from(c: Clip) -> Self {
        match c {
            Clip::Clamp => ClipPolicy::Clamp,
            Clip::Project => ClipPolicy::Project,
        }
    }
}

fn error_line(code: &str, message: &str) -> String {
    serde_json::json!({ "error": { "code": code, "message": message } }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            // Keep the explanation, drop the usage hint after the blank line.
            let text: Vec<&str> = msg.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
            let text = text.join(" ");
            eprintln!("{}", error_line("usage", text.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", error_line("threads", &e.to_string()));
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(commands::error_code(&e), &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
