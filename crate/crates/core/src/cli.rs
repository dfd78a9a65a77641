// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 1 for usage errors, 2 for data errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checks::{run_theory_checks, SuiteParams};
use crate::error::{Error, Result};
use crate::io::{
    ingest_timeseries, read_json, read_matrix, read_series, write_json, write_result, write_series, IngestParams,
    SeriesFormat, TruthFile,
};
use crate::metrics::{abs_k_error, benchmark, format_csv, format_table, hausdorff_one_sided, BenchmarkPlan};
use crate::segmentation::{detect, ChangePointSet, DetectParams, DetectionResult, TauPolicy};
use crate::simulate::{Model1Config, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "rdpg-cpd", version, about = "Change point detection for sequences of networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Packed,
    Jsonl,
}

impl From<FormatArg> for SeriesFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Packed => SeriesFormat::PackedBinary,
            FormatArg::Jsonl => SeriesFormat::EdgeJsonl,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a labelled network series.
    Simulate {
        /// 1, 2, 3, 4 or model1 (model1 needs --config).
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.3)]
        eps: f64,
        /// JSON model configuration for `--scenario model1`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth JSON; defaults to `<out>.truth.json`.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Detect change points in a network series.
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        d: usize,
        /// Number of random intervals.
        #[arg(long = "M", visible_alias = "intervals", default_value_t = 120)]
        m: usize,
        /// AUTO or a positive threshold.
        #[arg(long, default_value = "AUTO")]
        tau: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Result JSON; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Compare estimated change points with the truth.
    Evaluate {
        /// Result or truth JSON file, or an inline list such as 48,105.
        #[arg(long)]
        est: String,
        #[arg(long)]
        truth: String,
    },
    /// Run a benchmark plan and write JSON, CSV and a text table.
    Benchmark {
        #[arg(long)]
        plan: PathBuf,
        /// Overrides the plan's trial count.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSON; the CSV and table go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a correlation network series from node activity traces.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        bins: usize,
        #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
        threshold: f64,
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Run the exact theory verification suite.
    CheckTheory {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        /// Write the reports as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = err.render().ansi().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            if err.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn format_for(path: &Path, explicit: Option<FormatArg>) -> SeriesFormat {
    explicit.map_or_else(|| SeriesFormat::from_path(path), SeriesFormat::from)
}

fn parse_tau(text: &str) -> Result<TauPolicy> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(TauPolicy::Auto);
    }
    match text.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(TauPolicy::Fixed(v)),
        _ => Err(Error::invalid(format!("--tau must be AUTO or a positive number, got {text:?}"))),
    }
}

fn parse_scenario(name: &str, n: usize, rho: f64, eps: f64, config: Option<&Path>) -> Result<Scenario> {
    Ok(match name {
        "1" => Scenario::Scenario1 { n, rho },
        "2" => Scenario::Scenario2 { n, eps },
        "3" => Scenario::Scenario3 { n },
        "4" => Scenario::Scenario4 { n, eps },
        "model1" => {
            let path = config.ok_or_else(|| Error::invalid("--scenario model1 needs --config"))?;
            let config: Model1Config = read_json(path)?;
            Scenario::Model1 { config }
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown scenario {other:?}; expected 1, 2, 3, 4 or model1"
            )))
        }
    })
}

/// Change points from a result file, a truth file, a bare JSON list, or an
/// inline comma-separated list.
fn load_points(arg: &str) -> Result<Vec<usize>> {
    let path = Path::new(arg);
    if path.is_file() {
        let value: serde_json::Value = read_json(path)?;
        let points = if value.is_array() {
            value
        } else {
            value
                .get("points")
                .cloned()
                .ok_or_else(|| Error::format(arg, "JSON has no \"points\" field"))?
        };
        return Ok(serde_json::from_value::<ChangePointSet>(points)?.locations());
    }
    let trimmed = arg.trim().trim_start_matches(['{', '[']).trim_end_matches(['}', ']']);
    if trimmed.trim().is_empty() {
        return Ok(Vec::new());
    }
    let locations = trimmed
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("{arg:?} is neither a file nor a list of time indices")))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(ChangePointSet::from_locations(&locations)?.locations())
}

#[derive(Serialize)]
struct Evaluation {
    abs_k_error: usize,
    d_est_given_true: crate::metrics::ExtReal,
    d_true_given_est: crate::metrics::ExtReal,
}

fn print_json<T: Serialize>(stdout: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn say(stdout: &mut dyn Write, text: &str) -> Result<()> {
    writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Simulate {
            scenario,
            n,
            rho,
            eps,
            config,
            seed,
            out,
            truth,
            format,
        } => {
            let scenario = parse_scenario(&scenario, n, rho, eps, config.as_deref())?;
            let labeled = scenario.generate(seed)?;
            write_series(&out, &labeled.series, format_for(&out, format))?;
            let truth_path = truth.unwrap_or_else(|| {
                let mut name = out.clone().into_os_string();
                name.push(".truth.json");
                PathBuf::from(name)
            });
            write_json(
                &truth_path,
                &TruthFile {
                    points: labeled.truth.clone(),
                    scenario,
                    seed,
                },
            )?;
            say(
                stdout,
                &format!(
                    "wrote T = {}, n = {} to {}; change points {:?} to {}",
                    labeled.series.len(),
                    labeled.series.n(),
                    out.display(),
                    labeled.truth.locations(),
                    truth_path.display()
                ),
            )?;
        }
        Command::Detect {
            input,
            d,
            m,
            tau,
            seed,
            out,
            format,
        } => {
            let tau = parse_tau(&tau)?;
            let series = read_series(&input, format_for(&input, format))?;
            let result: DetectionResult = detect(
                &series,
                &DetectParams {
                    d,
                    intervals: m,
                    seed,
                    tau,
                },
            )?;
            match out {
                Some(path) => {
                    write_result(&path, &result)?;
                    say(
                        stdout,
                        &format!(
                            "change points {:?} (tau = {:.6}); result written to {}",
                            result.points.locations(),
                            result.tau,
                            path.display()
                        ),
                    )?;
                }
                None => print_json(stdout, &result)?,
            }
        }
        Command::Evaluate { est, truth } => {
            let est = load_points(&est)?;
            let truth = load_points(&truth)?;
            let est_set = ChangePointSet::from_locations(&est)?;
            let truth_set = ChangePointSet::from_locations(&truth)?;
            let eval = Evaluation {
                abs_k_error: abs_k_error(&est_set, &truth_set),
                d_est_given_true: hausdorff_one_sided(&est, &truth),
                d_true_given_est: hausdorff_one_sided(&truth, &est),
            };
            say(stdout, &format!("|K^-K|   = {}", eval.abs_k_error))?;
            say(stdout, &format!("d(C^|C)  = {}", eval.d_est_given_true))?;
            say(stdout, &format!("d(C|C^)  = {}", eval.d_true_given_est))?;
        }
        Command::Benchmark {
            plan,
            trials,
            seed,
            out,
        } => {
            let mut plan: BenchmarkPlan = read_json(&plan)?;
            if let Some(trials) = trials {
                plan.trials = trials;
            }
            let records = benchmark(&plan, seed)?;
            write_json(&out, &records)?;
            let csv = sibling(&out, "csv");
            std::fs::write(&csv, format_csv(&records)).map_err(|e| Error::io(&csv, e))?;
            let table = format_table(&records);
            let txt = sibling(&out, "txt");
            std::fs::write(&txt, &table).map_err(|e| Error::io(&txt, e))?;
            write!(stdout, "{table}").map_err(|e| Error::io("<stdout>", e))?;
        }
        Command::Ingest {
            input,
            bins,
            threshold,
            subsample,
            seed,
            out,
            format,
        } => {
            let rows = read_matrix(&input)?;
            let series = ingest_timeseries(
                &rows,
                &IngestParams {
                    bins,
                    threshold,
                    subsample,
                    seed,
                },
            )?;
            write_series(&out, &series, format_for(&out, format))?;
            say(
                stdout,
                &format!("wrote T = {}, n = {} to {}", series.len(), series.n(), out.display()),
            )?;
        }
        Command::CheckTheory {
            seed,
            trials,
            instances,
            out,
        } => {
            let reports = run_theory_checks(&SuiteParams {
                seed,
                instances,
                trials,
                ..SuiteParams::default()
            })?;
            let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(0);
            for r in &reports {
                let verdict = if r.passed { "PASS" } else { "FAIL" };
                say(stdout, &format!("{verdict}  {:<width$}  {}", r.name, r.detail))?;
            }
            if let Some(path) = out {
                write_json(&path, &reports)?;
            }
            if reports.iter().any(|r| !r.passed) {
                return Ok(EXIT_DATA);
            }
        }
    }
    Ok(EXIT_OK)
}
