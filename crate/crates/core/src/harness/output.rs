//! Per-run CSV files and the summary report.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{AgentKind, SimConfig};
use super::sim::SlotRecord;
use super::trace::RunTrace;
use crate::Result;

pub const METRICS_SCHEMA: &str = "# agmec-metrics v1";
pub const TRAJECTORY_SCHEMA: &str = "# agmec-trajectory v1";
pub const TIMING_SCHEMA: &str = "# agmec-timing v1";

pub fn metrics_header(num_agents: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "E_t_J", "D_t_bits", "avgE_J", "avgD_bits", "uav_x_m", "uav_y_m"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..num_agents).map(|m| format!("a{m}")));
    h.extend((0..num_agents).map(|m| format!("explored{m}")));
    h.extend(["t_decide_s", "t_learn_s", "dict_e_sizes", "dict_d_sizes"].map(String::from));
    h
}

/// The two per-agent learner columns: dictionary sizes for kernel runs,
/// training losses for network runs (empty before training starts).
fn learner_columns(kind: AgentKind, r: &SlotRecord) -> [String; 2] {
    std::array::from_fn(|k| {
        let cells: Vec<String> = match kind {
            AgentKind::Kernel => r.reports.iter().map(|x| x.sizes[k].to_string()).collect(),
            AgentKind::Dnn => r
                .reports
                .iter()
                .map(|x| x.signal.map(|s| s[k].to_string()).unwrap_or_default())
                .collect(),
        };
        if cells.iter().all(String::is_empty) {
            String::new()
        } else {
            cells.join(";")
        }
    })
}

pub fn metrics_row(kind: AgentKind, r: &SlotRecord, with_timing: bool) -> Vec<String> {
    let mut row = vec![
        r.t.to_string(),
        r.energy_j.to_string(),
        r.backlog_bits.to_string(),
        r.avg_energy_j.to_string(),
        r.avg_backlog_bits.to_string(),
        r.uav[0].to_string(),
        r.uav[1].to_string(),
    ];
    row.extend(r.actions.iter().map(usize::to_string));
    row.extend(r.explored.iter().map(|&e| u8::from(e).to_string()));
    let (d, l) = if with_timing { (r.t_decide_s, r.t_learn_s) } else { (0.0, 0.0) };
    row.push(d.to_string());
    row.push(l.to_string());
    row.extend(learner_columns(kind, r));
    row
}

struct CsvFile {
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvFile {
    fn open(path: &Path, schema: &str, header: &[String], append: bool) -> Result<Self> {
        let fresh = !append || !path.exists();
        let mut file = OpenOptions::new().create(true).append(!fresh).write(true).truncate(fresh).open(path)?;
        if fresh {
            writeln!(file, "{schema}")?;
        }
        let mut inner = csv::Writer::from_writer(BufWriter::new(file));
        if fresh {
            inner.write_record(header)?;
        }
        Ok(Self { inner })
    }

    fn row(&mut self, cells: &[String]) -> Result<()> {
        self.inner.write_record(cells)?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// metrics.csv, trajectory.csv and timing.csv for one run.
pub struct RunWriter {
    kind: AgentKind,
    with_timing: bool,
    metrics: CsvFile,
    trajectory: CsvFile,
    timing: CsvFile,
}

impl RunWriter {
    /// Creates the files, or appends to existing ones when `append` is set.
    pub fn open(dir: &Path, config: &SimConfig, append: bool) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let header = metrics_header(config.num_ues() + 1);
        Ok(Self {
            kind: config.agent,
            with_timing: config.metrics_timing,
            metrics: CsvFile::open(&dir.join("metrics.csv"), METRICS_SCHEMA, &header, append)?,
            trajectory: CsvFile::open(&dir.join("trajectory.csv"), TRAJECTORY_SCHEMA, &["t", "x", "y"].map(String::from), append)?,
            timing: CsvFile::open(&dir.join("timing.csv"), TIMING_SCHEMA, &["t", "t_decide_s", "t_learn_s"].map(String::from), append)?,
        })
    }

    pub fn write(&mut self, r: &SlotRecord) -> Result<()> {
        self.metrics.row(&metrics_row(self.kind, r, self.with_timing))?;
        self.trajectory.row(&[r.t.to_string(), r.uav[0].to_string(), r.uav[1].to_string()])?;
        self.timing.row(&[r.t.to_string(), r.t_decide_s.to_string(), r.t_learn_s.to_string()])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.metrics.flush()?;
        self.trajectory.flush()?;
        self.timing.flush()
    }
}

/// Drops data rows whose slot number exceeds `last_t`, keeping comments and
/// the header. Used before appending after a resume.
pub fn truncate_after(path: &Path, last_t: u64) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let text = std::fs::read_to_string(path)?;
    let mut out = String::with_capacity(text.len());
    let mut header_seen = false;
    for line in text.lines() {
        let keep = if line.starts_with('#') {
            true
        } else if !header_seen {
            header_seen = true;
            true
        } else {
            line.split(',').next().and_then(|t| t.parse::<u64>().ok()).is_some_and(|t| t <= last_t)
        };
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn run_files(dir: &Path) -> [PathBuf; 3] {
    ["metrics.csv", "trajectory.csv", "timing.csv"].map(|f| dir.join(f))
}

/// summary.txt: config hash, final and long-term averages, timing.
pub fn write_summary(dir: &Path, config: &SimConfig, trace: &RunTrace, sizes: &[[usize; 2]], audit_slots: u64) -> Result<()> {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
    kv("config_sha256", config.hash_hex());
    kv("agent", config.agent.to_string());
    kv("seed", trace.seed.to_string());
    kv("slots", trace.points.len().to_string());
    if let Some(p) = trace.last() {
        kv("final_avg_energy_j", p.avg_energy_j.to_string());
        kv("final_avg_backlog_bits", p.avg_backlog_bits.to_string());
    }
    let (e, d) = trace.long_term(0.2);
    kv("long_term_energy_j", e.to_string());
    kv("long_term_backlog_bits", d.to_string());
    let (x, y) = trace.mean_position(trace.final_fraction(0.2).len());
    kv("long_term_uav_x_m", x.to_string());
    kv("long_term_uav_y_m", y.to_string());
    let decide = super::trace::MeanStd::of(trace.points.iter().map(|p| p.t_decide_s));
    let learn = super::trace::MeanStd::of(trace.points.iter().map(|p| p.t_learn_s));
    kv("mean_t_decide_s", decide.mean.to_string());
    kv("mean_t_learn_s", learn.mean.to_string());
    kv("mean_t_slot_s", (decide.mean + learn.mean).to_string());
    let fmt_sizes = |k: usize| sizes.iter().map(|s| s[k].to_string()).collect::<Vec<_>>().join(";");
    let label = if config.agent == AgentKind::Kernel { "dictionary" } else { "replay" };
    kv(&format!("final_{label}_sizes_e"), fmt_sizes(0));
    kv(&format!("final_{label}_sizes_d"), fmt_sizes(1));
    kv("bit_audit", format!("balanced over {audit_slots} slots"));
    std::fs::write(dir.join("summary.txt"), s)?;
    Ok(())
}
