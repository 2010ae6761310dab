use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::run::{run_in_memory, run_to_dir};
use super::trace::RunTrace;
use crate::par::{self, ExecMode};
use crate::{Error, Result};

/// A named set of `key=value` overrides applied on top of the base config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub label: String,
    pub overrides: Vec<String>,
}

impl Variation {
    /// Parses `label:key=value,key=value`, or `key=value,...` (the overrides
    /// double as the label).
    pub fn parse(spec: &str) -> Result<Self> {
        let (label, body) = match spec.split_once(':') {
            Some((l, b)) => (l.trim().to_string(), b),
            None => (spec.trim().to_string(), spec),
        };
        let overrides: Vec<String> = body.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        if overrides.is_empty() {
            return Err(Error::config("variation", format!("`{spec}` lists no overrides")));
        }
        Ok(Self { label, overrides })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variation: String,
    pub seed: u64,
    pub long_term_energy_j: f64,
    pub long_term_backlog_bits: f64,
    pub final_avg_energy_j: f64,
    pub final_avg_backlog_bits: f64,
    pub long_term_uav_x_m: f64,
}

impl SweepRow {
    fn from_trace(variation: &str, trace: &RunTrace) -> Self {
        let (e, d) = trace.long_term(0.2);
        let last = trace.last().copied();
        Self {
            variation: variation.to_string(),
            seed: trace.seed,
            long_term_energy_j: e,
            long_term_backlog_bits: d,
            final_avg_energy_j: last.map_or(0.0, |p| p.avg_energy_j),
            final_avg_backlog_bits: last.map_or(0.0, |p| p.avg_backlog_bits),
            long_term_uav_x_m: trace.mean_position(trace.final_fraction(0.2).len()).0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn labels(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.variation.as_str()) {
                out.push(&r.variation);
            }
        }
        out
    }

    pub fn for_variation(&self, label: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.variation == label).collect()
    }

    /// Seed means of (long-term energy, long-term backlog) for `label`.
    pub fn mean(&self, label: &str) -> (f64, f64) {
        let rows = self.for_variation(label);
        let n = rows.len().max(1) as f64;
        (
            rows.iter().map(|r| r.long_term_energy_j).sum::<f64>() / n,
            rows.iter().map(|r| r.long_term_backlog_bits).sum::<f64>() / n,
        )
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["variation", "seed", "long_term_energy_j", "long_term_backlog_bits", "final_avg_energy_j", "final_avg_backlog_bits", "long_term_uav_x_m"])?;
        for r in &self.rows {
            w.write_record([
                r.variation.clone(),
                r.seed.to_string(),
                r.long_term_energy_j.to_string(),
                r.long_term_backlog_bits.to_string(),
                r.final_avg_energy_j.to_string(),
                r.final_avg_backlog_bits.to_string(),
                r.long_term_uav_x_m.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Human-readable comparison: per-seed rows then a mean row per variation.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<28} {:>6} {:>16} {:>18} {:>10}", "variation", "seed", "long-term E (J)", "long-term D (bits)", "uav x (m)");
        for label in self.labels() {
            for r in self.for_variation(label) {
                let _ = writeln!(
                    s,
                    "{:<28} {:>6} {:>16.6} {:>18.1} {:>10.1}",
                    r.variation, r.seed, r.long_term_energy_j, r.long_term_backlog_bits, r.long_term_uav_x_m
                );
            }
            let (e, d) = self.mean(label);
            let _ = writeln!(s, "{:<28} {:>6} {:>16.6} {:>18.1}", label, "mean", e, d);
        }
        s
    }
}

/// Runs every variation over the config's seed list. When `write_runs` is
/// set, each run also gets its own directory under `out_dir/<label>/`.
pub fn sweep(config: &SimConfig, variations: &[Variation], mode: ExecMode, write_runs: bool) -> Result<SweepTable> {
    if variations.len() < 2 {
        return Err(Error::config("variation", "a sweep needs at least two variations"));
    }
    let configs: Vec<(String, SimConfig)> = variations
        .iter()
        .map(|v| Ok((v.label.clone(), config.with_overrides(&v.overrides)?)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| configs[i].1.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let rows = par::map(mode, jobs, |(i, seed)| {
        let (label, cfg) = &configs[i];
        let trace = if write_runs {
            let dir = config.out_dir.join(sanitize(label)).join(format!("seed_{seed}"));
            run_to_dir(cfg, seed, &dir)?
        } else {
            run_in_memory(cfg, seed)?
        };
        Ok(SweepRow::from_trace(label, &trace))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}
