use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use robustbf::bladrbf::CommGraph;
use robustbf::experiment::{self, CheckOptions, Suite};

#[derive(Parser)]
#[command(name = "robustbf", version, about = "Worst-case sum-rate beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every cell of an experiment grid.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `run.out_dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the configured seed list by this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the grid over an SNR axis and write per-ε plot data.
    SweepSnr {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated SNR values in dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        snr: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Self-check battery: gradients, convexity, cuts or consensus.
    Check {
        suite: String,
        /// Probe a sign-flipped g (convexity suite negative control).
        #[arg(long)]
        inject_fault: bool,
        /// Edge-list file for the consensus suite.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the channel realizations of a seed as text dumps.
    DumpChannels {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> anyhow::Result<experiment::ExperimentConfig> {
    experiment::load_config(path).with_context(|| format!("loading {}", path.display()))
}

fn out_dir(cfg: &experiment::ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| cfg.base_dir.join(&cfg.run.out_dir))
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let stdout = std::io::stdout();
    let mut so = stdout.lock();
    let code = match cli.cmd {
        Cmd::Run { config, out, seed } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.run.seeds = vec![s];
            }
            let dir = out_dir(&cfg, out);
            let o = experiment::cmd_run(&cfg, &dir, &mut so)?;
            if o.diverged > 0 {
                eprintln!("{} cell(s) diverged", o.diverged);
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Cmd::SweepSnr { config, snr, out } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg, out);
            let o = experiment::cmd_sweep_snr(&cfg, &snr, &dir, &mut so)?;
            if o.diverged > 0 {
                eprintln!("{} cell(s) diverged", o.diverged);
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Cmd::Check {
            suite,
            inject_fault,
            graph,
            seed,
        } => {
            let suite: Suite = suite.parse()?;
            if inject_fault && suite != Suite::Convexity {
                anyhow::bail!("--inject-fault only applies to the convexity suite");
            }
            let graph = match graph {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    Some(CommGraph::parse(&text)?)
                }
                None => None,
            };
            let rep = experiment::run_check(
                suite,
                &CheckOptions {
                    inject_fault,
                    graph,
                    seed,
                },
            )?;
            so.write_all(rep.to_json_lines().as_bytes())?;
            if rep.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Cmd::DumpChannels { config, seed, out } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg, out);
            experiment::cmd_dump_channels(&cfg, seed, &dir, &mut so)?;
            ExitCode::SUCCESS
        }
    };
    so.flush()?;
    Ok(code)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
