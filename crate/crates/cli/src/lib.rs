//! `fbcode`: closed-form BLER, Monte Carlo sweeps, LightCode training,
//! evaluation, probes and throughput benchmarks.
//!
//! Every command resolves its config as defaults, then `--config` (a JSON
//! file or any artifact this tool wrote), then explicit flags. The resolved
//! config is embedded in the output, so `--config <artifact>` reruns it.
//! `--workers`, `--out` and `--format` never change results and are not part
//! of the config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmd;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use cmd::bench::{run_bench, BenchConfig};
use cmd::eval::{evaluate, EvalConfig};
use cmd::formula::{formula_table, FormulaConfig};
use cmd::probe::{linear_notes, linear_table, power_notes, power_table, run_probe, ProbeConfig, ProbeOutput};
use cmd::simulate::{simulate, unresolved_note, SimulateConfig, SweepOutput};
use cmd::train::{run_training, TrainCommandConfig};
use config::resolve;
pub use error::{CliError, Result};
use output::{emit, preamble, Format, Table, TOOL};

#[derive(Debug, Parser)]
#[command(name = "fbcode", version, about = "Feedback channel codes: formulas, simulation and LightCode")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config, or an artifact written by this tool.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (the checkpoint path for `train`); stdout otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form block error probabilities.
    Formula(FormulaFlags),
    /// Monte Carlo BLER of SK, GN, PowerBlast or a LightCode checkpoint.
    Simulate(SimulateFlags),
    /// Train, calibrate and save a LightCode model.
    Train(TrainFlags),
    /// Monte Carlo BLER of a LightCode checkpoint.
    Eval(EvalFlags),
    /// Linear or power-distribution probe of a LightCode encoder.
    Probe(ProbeFlags),
    /// Encoder/decoder throughput.
    Bench(BenchFlags),
}

#[derive(Debug, Args, Serialize)]
pub struct FormulaFlags {
    /// sk, gn, pb, pam or compose.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[arg(long = "K", alias = "k")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long = "D", alias = "d")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Forward SNR grid in dB: `v`, `a,b,c` or `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<String>,
    /// lmmse or mvue.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// consistent or as-printed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<String>,
    /// Sub-block BLER for `compose`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Sub-block count for `compose`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateFlags {
    /// sk, gn, pb or lightcode.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[arg(long = "K", alias = "k")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long = "D", alias = "d")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Forward SNR grid in dB.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<String>,
    /// `noiseless` or the feedback SNR in dB.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fb: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_errors: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_trials: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// unbiased or raw.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<String>,
    /// Checkpoint for `--scheme lightcode`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFlags {
    /// desk or full.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[arg(long = "K", alias = "k")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long = "D", alias = "d")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Training forward SNR in dB.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_ff: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fb: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batches_per_epoch: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calib_samples: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fb: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_errors: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_trials: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// linear or power.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// per-symbol or pooled.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchFlags {
    /// lightcode or pb.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[arg(long = "K", alias = "k")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long = "D", alias = "d")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn sweep_text(command: &str, config: &impl Serialize, out: &SweepOutput, format: Format) -> String {
    let mut s = preamble(command, config, format);
    match format {
        Format::Csv => {
            if let Some(note) = unresolved_note(out) {
                s.push_str(&note);
            }
            s.push_str(&out.to_csv());
        }
        Format::Json => s.push_str(&out.to_json_lines()),
    }
    s
}

fn warn_unresolved(out: &SweepOutput, stderr: &mut dyn Write) {
    if out.unresolved() > 0 {
        let _ = writeln!(
            stderr,
            "warning: {} point(s) saw fewer than 10 errors; raise --max-trials",
            out.unresolved()
        );
    }
}

/// Runs one invocation. `args` includes the program name. Help and version
/// requests print to `stdout` and succeed.
pub fn run_from<I, A>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = A>,
    A: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write!(stdout, "{}", e.render()).map_err(CliError::from)
                }
                _ => {
                    let msg = e.render().to_string();
                    Err(CliError::Usage(msg.trim_start_matches("error: ").trim_end().to_string()))
                }
            };
        }
    };
    run(cli, stdout, stderr)
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let Common {
        config,
        out,
        workers,
        format,
    } = cli.common;
    let file = config.as_deref();
    let out = out.as_deref();
    let workers = workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(CliError::usage("--workers must be >= 1"));
    }
    match cli.command {
        Command::Formula(flags) => {
            let cfg: FormulaConfig = resolve(file, &flags)?;
            let text = preamble("formula", &cfg, format) + &formula_table(&cfg)?.render(format);
            emit(out, stdout, &text)
        }
        Command::Simulate(flags) => {
            let cfg: SimulateConfig = resolve(file, &flags)?;
            let res = simulate(&cfg, workers)?;
            warn_unresolved(&res, stderr);
            emit(out, stdout, &sweep_text("simulate", &cfg, &res, format))
        }
        Command::Eval(flags) => {
            let cfg: EvalConfig = resolve(file, &flags)?;
            let res = evaluate(&cfg, workers)?;
            warn_unresolved(&res, stderr);
            emit(out, stdout, &sweep_text("eval", &cfg, &res, format))
        }
        Command::Train(flags) => {
            let cfg: TrainCommandConfig = resolve(file, &flags)?;
            let path = out.ok_or_else(|| CliError::usage("train needs --out <checkpoint>"))?;
            let summary = run_training(&cfg, path, |epoch, lr, loss| {
                let _ = writeln!(stderr, "epoch {epoch} lr {lr:.3e} loss {loss:.6}");
            })?;
            let mut t = Table::new(&["parameters", "initial_loss", "final_loss", "energy", "checkpoint", "loss_csv"]);
            t.push(vec![
                json!(summary.parameters),
                json!(summary.initial_loss),
                json!(summary.final_loss),
                json!(summary.energy),
                json!(summary.checkpoint.display().to_string()),
                json!(summary.loss_csv.display().to_string()),
            ]);
            let text = preamble("train", &cfg, format) + &t.render(format);
            emit(None, stdout, &text)
        }
        Command::Probe(flags) => {
            let cfg: ProbeConfig = resolve(file, &flags)?;
            let mut text = preamble("probe", &cfg, format);
            match run_probe(&cfg)? {
                ProbeOutput::Linear(res) => {
                    if format == Format::Csv {
                        text.push_str(&linear_notes(&res));
                    }
                    if res.low_sample {
                        let _ = writeln!(stderr, "warning: probe fits use fewer samples than recommended");
                    }
                    text.push_str(&linear_table(&res).render(format));
                }
                ProbeOutput::Power(rep) => {
                    if format == Format::Csv {
                        text.push_str(&power_notes(&rep));
                    }
                    text.push_str(&power_table(&rep).render(format));
                }
            }
            emit(out, stdout, &text)
        }
        Command::Bench(flags) => {
            let cfg: BenchConfig = resolve(file, &flags)?;
            let report = run_bench(&cfg)?;
            let doc = json!({ "tool": TOOL, "command": "bench", "config": cfg, "report": report });
            let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
            emit(out, stdout, &text)
        }
    }
}

