use std::path::{Path, PathBuf};

use super::config::SimConfig;
use super::output::{run_files, truncate_after, write_summary, RunWriter};
use super::sim::{SlotRecord, Simulation};
use super::trace::RunTrace;
use crate::par::{self, ExecMode};
use crate::Result;

/// Steps `sim` to its horizon, handing every record to `sink`.
pub fn drive(sim: &mut Simulation, trace: &mut RunTrace, mut sink: impl FnMut(&Simulation, &SlotRecord) -> Result<()>) -> Result<()> {
    while !sim.is_done() {
        let rec = sim.step()?;
        trace.points.push((&rec).into());
        sink(sim, &rec)?;
    }
    Ok(())
}

/// One seeded run with no files written.
pub fn run_in_memory(config: &SimConfig, seed: u64) -> Result<RunTrace> {
    let mut sim = Simulation::new(config, seed)?;
    let mut trace = RunTrace::new(seed, config.agent);
    trace.points.reserve(config.timeslots as usize);
    drive(&mut sim, &mut trace, |_, _| Ok(()))?;
    Ok(trace)
}

pub fn checkpoint_path(dir: &Path) -> PathBuf {
    dir.join("checkpoint.json")
}

fn finish(dir: &Path, sim: &Simulation, trace: &RunTrace) -> Result<()> {
    let sizes: Vec<[usize; 2]> = sim
        .agents()
        .iter()
        .map(|a| match a {
            super::AnyAgent::Kernel(k) => k.dictionary_sizes(),
            super::AnyAgent::Dnn(d) => [d.replay().len(); 2],
        })
        .collect();
    write_summary(dir, sim.config(), trace, &sizes, sim.slot())
}

fn drive_to_dir(mut sim: Simulation, dir: &Path, append: bool) -> Result<RunTrace> {
    let mut writer = RunWriter::open(dir, sim.config(), append)?;
    let every = sim.config().checkpoint_every;
    let mut trace = RunTrace::new(sim.seed(), sim.kind());
    drive(&mut sim, &mut trace, |sim, rec| {
        writer.write(rec)?;
        if every > 0 && rec.t % every == 0 {
            writer.flush()?;
            sim.save_checkpoint(&checkpoint_path(dir))?;
        }
        Ok(())
    })?;
    writer.flush()?;
    finish(dir, &sim, &trace)?;
    Ok(trace)
}

/// One seeded run writing config.toml, metrics.csv, trajectory.csv,
/// timing.csv and summary.txt into `dir`.
pub fn run_to_dir(config: &SimConfig, seed: u64, dir: &Path) -> Result<RunTrace> {
    let sim = Simulation::new(config, seed)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    drive_to_dir(sim, dir, false)
}

/// Continues the run checkpointed in `dir`, discarding any rows written
/// after the checkpoint. The returned trace covers the resumed slots only.
pub fn resume_in_dir(dir: &Path) -> Result<RunTrace> {
    let sim = Simulation::load_checkpoint(&checkpoint_path(dir))?;
    for f in run_files(dir) {
        truncate_after(&f, sim.slot())?;
    }
    drive_to_dir(sim, dir, true)
}

/// Runs every seed of `config`, each into `out_dir/seed_<s>`, in parallel
/// when `mode` allows.
pub fn run_all_seeds(config: &SimConfig, mode: ExecMode) -> Result<Vec<RunTrace>> {
    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(config.out_dir.join("config.toml"), config.to_toml())?;
    par::map(mode, config.seeds.clone(), |seed| {
        run_to_dir(config, seed, &config.out_dir.join(format!("seed_{seed}")))
    })
    .into_iter()
    .collect()
}
