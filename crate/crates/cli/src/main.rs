use std::path::PathBuf;
use std::process::ExitCode;

use agmec_core::harness::{self, SimConfig, Variation};
use agmec_core::par::ExecMode;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

/// Air-ground cooperative MEC with multi-objective kernel reinforcement learning.
#[derive(Parser)]
#[command(name = "agmec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured seed and write per-seed CSVs and summaries.
    Run {
        #[command(flatten)]
        common: Common,
        /// Continue the checkpointed run found in this run directory.
        #[arg(long, value_name = "DIR", conflicts_with = "config")]
        resume: Option<PathBuf>,
    },
    /// Compare config variations over the seed list.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `label:key=value,key=value`; give at least two.
        #[arg(long = "vary", value_name = "SPEC", required = true)]
        variations: Vec<String>,
        /// Also write each run's files under `<out-dir>/<label>/seed_<s>`.
        #[arg(long)]
        write_runs: bool,
    },
    /// Time the kernel and network agents per slot on the same env seed.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        warmup: u64,
        #[arg(long, default_value_t = 2000)]
        measured: u64,
    },
}

#[derive(Args)]
struct Common {
    /// Flat TOML config; keys not listed keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single seed (replaces the config's seed list).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["kernel", "dnn"])]
    agent: Option<String>,
    #[arg(long)]
    timeslots: Option<u64>,
    #[arg(long)]
    n_step: Option<usize>,
    #[arg(long)]
    we: Option<f64>,
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run independent seeds on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn resolve(&self) -> Result<SimConfig> {
        let base = match &self.config {
            Some(p) => SimConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => SimConfig::default(),
        };
        let mut overrides = Vec::new();
        if let Some(s) = self.seed {
            overrides.push(format!("seeds=[{s}]"));
        }
        if let Some(a) = &self.agent {
            overrides.push(format!("agent={a}"));
        }
        if let Some(t) = self.timeslots {
            overrides.push(format!("timeslots={t}"));
        }
        if let Some(n) = self.n_step {
            overrides.push(format!("n_step={n}"));
        }
        if let Some(w) = self.we {
            overrides.push(format!("w_e={w:?}"));
        }
        if let Some(w) = self.wd {
            overrides.push(format!("w_d={w:?}"));
        }
        if let Some(d) = &self.out_dir {
            overrides.push(format!("out_dir={:?}", d.display().to_string()));
        }
        overrides.extend(self.set.iter().cloned());
        Ok(base.with_overrides(&overrides)?)
    }

    fn mode(&self) -> ExecMode {
        if self.sequential {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, resume: Some(dir) } => {
            if common.config.is_some() || !common.set.is_empty() {
                anyhow::bail!("--resume takes its configuration from the checkpoint");
            }
            let trace = harness::resume_in_dir(&dir)?;
            println!("resumed {}: {} more slots", dir.display(), trace.points.len());
        }
        Command::Run { common, resume: None } => {
            let cfg = common.resolve()?;
            let traces = harness::run_all_seeds(&cfg, common.mode())?;
            for tr in &traces {
                let (e, d) = tr.long_term(0.2);
                println!(
                    "seed {}: long-term energy {e:.6} J, long-term backlog {d:.1} bits ({})",
                    tr.seed,
                    cfg.out_dir.join(format!("seed_{}", tr.seed)).display()
                );
            }
        }
        Command::Sweep { common, variations, write_runs } => {
            let cfg = common.resolve()?;
            let vars = variations.iter().map(|v| Variation::parse(v)).collect::<Result<Vec<_>, _>>()?;
            let table = harness::sweep(&cfg, &vars, common.mode(), write_runs)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            std::fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml())?;
            std::fs::write(cfg.out_dir.join("sweep.csv"), table.to_csv()?)?;
            print!("{}", table.render());
        }
        Command::Bench { common, warmup, measured } => {
            let cfg = common.resolve()?;
            let report = harness::timing_benchmark(&cfg, cfg.seeds[0], warmup, measured)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            std::fs::write(cfg.out_dir.join("bench.json"), serde_json::to_string_pretty(&report)?)?;
            print!("{}", report.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
