use std::path::Path;

use agmec_core::harness::{resume_in_dir, run_in_memory, run_to_dir, sweep, AgentKind, SimConfig, Simulation, Variation};
use agmec_core::par::ExecMode;
use agmec_core::Error;

fn short(kind: AgentKind, slots: u64) -> SimConfig {
    SimConfig::default()
        .with_overrides(&[format!("agent={kind}"), format!("timeslots={slots}")])
        .unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

/// Data rows of a CSV file written with a leading `#` schema line.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let data = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, data)
}

#[test]
fn same_seed_gives_identical_files() {
    for kind in [AgentKind::Kernel, AgentKind::Dnn] {
        let cfg = short(kind, 150);
        let dir = tempfile::tempdir().unwrap();
        run_to_dir(&cfg, 4, &dir.path().join("a")).unwrap();
        run_to_dir(&cfg, 4, &dir.path().join("b")).unwrap();
        for f in ["metrics.csv", "trajectory.csv"] {
            assert_eq!(read(&dir.path().join("a").join(f)), read(&dir.path().join("b").join(f)), "{kind} {f}");
        }
        run_to_dir(&cfg, 5, &dir.path().join("c")).unwrap();
        assert_ne!(read(&dir.path().join("a/metrics.csv")), read(&dir.path().join("c/metrics.csv")));
    }
}

#[test]
fn csv_parses_back_and_averages_recompute() {
    let cfg = short(AgentKind::Kernel, 400);
    let dir = tempfile::tempdir().unwrap();
    let trace = run_to_dir(&cfg, 1, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("# agmec-metrics v1"));

    let (header, data) = rows(&dir.path().join("metrics.csv"));
    assert_eq!(header[..7], ["t", "E_t_J", "D_t_bits", "avgE_J", "avgD_bits", "uav_x_m", "uav_y_m"]);
    assert_eq!(header.last().unwrap(), "dict_d_sizes");
    assert_eq!(header.len(), 7 + 6 + 6 + 4);
    assert_eq!(data.len(), 400);

    let (mut se, mut sd) = (0.0, 0.0);
    for (i, (row, p)) in data.iter().zip(&trace.points).enumerate() {
        let f = |k: usize| row[k].parse::<f64>().unwrap();
        // Lossless: every float survives the text roundtrip exactly.
        assert_eq!(row[0].parse::<u64>().unwrap(), i as u64 + 1);
        assert_eq!((f(1), row[2].parse::<u64>().unwrap(), f(3), f(4)), (p.energy_j, p.backlog_bits, p.avg_energy_j, p.avg_backlog_bits));
        assert_eq!((f(5), f(6)), (p.x, p.y));
        se += f(1);
        sd += f(2);
        let n = (i + 1) as f64;
        assert!((se / n - f(3)).abs() <= 1e-9 * f(3).abs().max(1e-12), "row {i}");
        assert!((sd / n - f(4)).abs() <= 1e-9 * f(4).abs().max(1.0), "row {i}");
    }
    // Timing columns are zero unless asked for; timing.csv keeps the real values.
    assert!(data.iter().all(|r| r[19] == "0" && r[20] == "0"));
    let (_, timing) = rows(&dir.path().join("timing.csv"));
    assert!(timing.iter().any(|r| r[1].parse::<f64>().unwrap() > 0.0));

    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains(&format!("config_sha256 = {}", cfg.hash_hex())));
    assert!(summary.contains("bit_audit = balanced over 400 slots"));
}

#[test]
fn timing_columns_when_requested() {
    let cfg = short(AgentKind::Kernel, 20).set("metrics_timing", true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&cfg, 0, dir.path()).unwrap();
    let (_, data) = rows(&dir.path().join("metrics.csv"));
    assert!(data.iter().all(|r| r[19].parse::<f64>().unwrap() > 0.0));
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    for kind in [AgentKind::Kernel, AgentKind::Dnn] {
        let cfg = short(kind, 250).set("checkpoint_every", 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let whole = dir.path().join("whole");
        run_to_dir(&cfg, 3, &whole).unwrap();
        // The last checkpoint is at slot 200; rows 201..250 get rewritten.
        let resumed = dir.path().join("resumed");
        std::fs::create_dir_all(&resumed).unwrap();
        for f in ["metrics.csv", "trajectory.csv", "timing.csv", "checkpoint.json", "config.toml"] {
            std::fs::copy(whole.join(f), resumed.join(f)).unwrap();
        }
        let tail = resume_in_dir(&resumed).unwrap();
        assert_eq!(tail.points.len(), 50);
        assert_eq!(read(&whole.join("metrics.csv")), read(&resumed.join("metrics.csv")), "{kind}");
        assert_eq!(read(&whole.join("trajectory.csv")), read(&resumed.join("trajectory.csv")));
    }
}

#[test]
fn checkpoint_roundtrip_in_memory() {
    let cfg = short(AgentKind::Kernel, 120);
    let dir = tempfile::tempdir().unwrap();
    let mut a = Simulation::new(&cfg, 9).unwrap();
    for _ in 0..60 {
        a.step().unwrap();
    }
    let path = dir.path().join("ck.json");
    a.save_checkpoint(&path).unwrap();
    let mut b = Simulation::load_checkpoint(&path).unwrap();
    while !a.is_done() {
        let (ra, rb) = (a.step().unwrap(), b.step().unwrap());
        assert_eq!((ra.t, ra.energy_j, ra.backlog_bits, ra.actions), (rb.t, rb.energy_j, rb.backlog_bits, rb.actions));
    }
    assert!(b.is_done());

    let mut text: serde_json::Value = serde_json::from_slice(&read(&path)).unwrap();
    text["version"] = 99.into();
    std::fs::write(&path, text.to_string()).unwrap();
    assert!(matches!(Simulation::load_checkpoint(&path), Err(Error::Contract(_))));
}

#[test]
fn single_slot_fires_no_update() {
    let rec = Simulation::new(&short(AgentKind::Kernel, 1), 0).unwrap().step().unwrap();
    assert_eq!(rec.t, 1);
    assert!(rec.reports.iter().all(|r| !r.updated && r.signal.is_none()));
    let trace = run_in_memory(&short(AgentKind::Kernel, 1), 0).unwrap();
    assert_eq!(trace.points.len(), 1);
}

#[test]
fn agent_kind_does_not_perturb_environment_streams() {
    let mut k = Simulation::new(&short(AgentKind::Kernel, 50), 7).unwrap();
    let mut d = Simulation::new(&short(AgentKind::Dnn, 50), 7).unwrap();
    for _ in 0..50 {
        let (rk, rd) = (k.step().unwrap(), d.step().unwrap());
        // Production does not depend on actions, so it must agree slot by slot.
        assert_eq!(rk.outcome.produced_bits, rd.outcome.produced_bits);
    }
    let env_rng = |s: &Simulation| serde_json::to_value(s).unwrap()["env_rng"].clone();
    assert_eq!(env_rng(&k), env_rng(&d));
}

#[test]
fn identical_variations_give_identical_rows() {
    let cfg = short(AgentKind::Kernel, 80).set("seeds", "[0, 1]").unwrap();
    let vars = [Variation::parse("a:n_step=3").unwrap(), Variation::parse("b:n_step=3").unwrap()];
    let table = sweep(&cfg, &vars, ExecMode::Parallel, false).unwrap();
    let (a, b) = (table.for_variation("a"), table.for_variation("b"));
    assert_eq!(a.len(), 2);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.seed, x.long_term_energy_j, x.long_term_backlog_bits), (y.seed, y.long_term_energy_j, y.long_term_backlog_bits));
    }
    assert!(sweep(&cfg, &vars[..1], ExecMode::Sequential, false).is_err());
}

#[test]
fn parallel_and_sequential_fanout_agree() {
    let cfg = short(AgentKind::Kernel, 60).set("seeds", "[0, 1, 2]").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let seq = agmec_core::harness::run_all_seeds(&cfg.set("out_dir", format!("'{}'", dir.path().join("s").display())).unwrap(), ExecMode::Sequential).unwrap();
    let par = agmec_core::harness::run_all_seeds(&cfg.set("out_dir", format!("'{}'", dir.path().join("p").display())).unwrap(), ExecMode::Parallel).unwrap();
    for (a, b) in seq.iter().zip(&par) {
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.last().unwrap().avg_backlog_bits, b.last().unwrap().avg_backlog_bits);
    }
    for s in 0..3 {
        let f = format!("seed_{s}/metrics.csv");
        assert_eq!(read(&dir.path().join("s").join(&f)), read(&dir.path().join("p").join(&f)));
    }
    let cfg = cfg.set("parallel_agents", true).unwrap();
    let a = run_in_memory(&cfg, 0).unwrap();
    let b = run_in_memory(&cfg.set("parallel_agents", false).unwrap(), 0).unwrap();
    assert_eq!(a.last().unwrap().avg_energy_j, b.last().unwrap().avg_energy_j);
}

#[test]
fn config_rejections_name_the_key() {
    let key = |r: Result<SimConfig, Error>| match r {
        Err(Error::Config { key, .. }) => key,
        other => panic!("expected a config error, got {other:?}"),
    };
    assert_eq!(key(SimConfig::from_toml_str("bogus_key = 1")), "bogus_key");
    assert_eq!(key(SimConfig::default().with_overrides(&["gamma=1.5"])), "gamma");
    assert_eq!(key(SimConfig::default().with_overrides(&["timeslots=-3"])), "timeslots");
    // ue_x_m fixes the UE count; the first list that disagrees is named.
    assert_eq!(key(SimConfig::default().with_overrides(&["ue_x_m=[1, 2]"])), "ue_y_m");
    assert_eq!(key(SimConfig::default().set("n_step", 0)), "n_step");
}
