//! End-to-end orchestration: predicate -> Parisi cache -> instance ->
//! engine -> diagnostics, with explicit seeds everywhere and
//! machine-readable outputs.

use crate::analysis::{self, MomentTolerances};
use crate::engine::{self, RunConfig, RunHistories, RunResult};
use crate::error::{Error, Result};
use crate::instance::{sample_index_regular, CspInstance};
use crate::parisi::{self, MinimizeConfig, ParisiSolution, SdeStats};
use crate::predicate::Predicate;
use crate::rng::derive_seed;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Built-in name (maxcut2, nae3, xor4even) or a truth-table file path.
    pub predicate: String,
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    /// Parisi piece count k.
    pub pieces: usize,
    pub eta: f64,
    pub seed_instance: u64,
    pub seed_engine: u64,
    pub seed_rounding: u64,
    /// Seed for the SDE calibration paths; config-level so that different
    /// engine seeds share identical nonlinearity constants.
    pub seed_sde: u64,
    pub sde_paths: usize,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    /// 0 = rayon default.
    pub threads: usize,
    pub record_history: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            predicate: "maxcut2".into(),
            n: 1 << 12,
            d: 128,
            delta: 0.1,
            pieces: 3,
            eta: 0.05,
            seed_instance: 1,
            seed_engine: 2,
            seed_rounding: 3,
            seed_sde: 4,
            sde_paths: 100_000,
            out_dir: PathBuf::from("out"),
            cache_dir: PathBuf::from("cache"),
            threads: 0,
            record_history: false,
        }
    }
}

impl ExperimentConfig {
    /// Flat `key = value` format; unknown keys are rejected.
    pub fn from_text(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", idx + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("{key}: {e}"));
        match key {
            "predicate" => self.predicate = value.to_string(),
            "n" => self.n = value.parse().map_err(|e| bad(&e))?,
            "d" => self.d = value.parse().map_err(|e| bad(&e))?,
            "delta" => self.delta = value.parse().map_err(|e| bad(&e))?,
            "pieces" => self.pieces = value.parse().map_err(|e| bad(&e))?,
            "eta" => self.eta = value.parse().map_err(|e| bad(&e))?,
            "seed_instance" => self.seed_instance = value.parse().map_err(|e| bad(&e))?,
            "seed_engine" => self.seed_engine = value.parse().map_err(|e| bad(&e))?,
            "seed_rounding" => self.seed_rounding = value.parse().map_err(|e| bad(&e))?,
            "seed_sde" => self.seed_sde = value.parse().map_err(|e| bad(&e))?,
            "sde_paths" => self.sde_paths = value.parse().map_err(|e| bad(&e))?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "cache_dir" => self.cache_dir = PathBuf::from(value),
            "threads" => self.threads = value.parse().map_err(|e| bad(&e))?,
            "record_history" => self.record_history = value.parse().map_err(|e| bad(&e))?,
            other => return Err(Error::Parse(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn resolve_predicate(&self) -> Result<Predicate> {
        let path = Path::new(&self.predicate);
        if path.is_file() {
            Predicate::from_text(&std::fs::read_to_string(path)?)
        } else {
            Predicate::by_name(&self.predicate)
        }
    }

    pub fn validate(&self, pred: &Predicate) -> Result<()> {
        let r = pred.arity();
        if self.d == 0 || self.d % r != 0 {
            return Err(Error::Divisibility(format!("r = {r} must divide d = {}", self.d)));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::BadParameter(format!("delta {} outside (0, 0.5]", self.delta)));
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(Error::BadParameter(format!("eta {} outside (0, 0.5)", self.eta)));
        }
        if self.n < r {
            return Err(Error::BadParameter(format!("n = {} below arity {r}", self.n)));
        }
        if self.sde_paths < 1_000 {
            return Err(Error::BadParameter("need at least 1000 SDE paths".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!(
            "{}-n{}-d{}-delta{}-s{}",
            self.predicate.replace(['/', '\\'], "_"),
            self.n,
            self.d,
            self.delta,
            self.seed_engine
        )
    }

    fn minimize_config(&self, pred: &Predicate) -> MinimizeConfig {
        let xi = pred.mixture();
        let mut mc = MinimizeConfig::for_mixture(&xi);
        mc.eta = self.eta;
        mc.grid = parisi::GridConfig::for_mixture(&xi, self.delta);
        mc
    }
}

/// Everything a pipeline run produces, plus where it was written.
#[derive(Debug, Serialize)]
pub struct PipelineOutcome {
    pub fraction: f64,
    pub alg_estimate: f64,
    pub e_f: f64,
    pub csv_line: String,
    pub result_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub histories_path: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
pub struct ResultDoc {
    pub version: String,
    pub config: ExperimentConfig,
    pub alg_estimate: f64,
    pub parisi_warning: bool,
    pub run: RunResult,
    pub wall_clock_ms: u64,
}

pub const CSV_HEADER: &str = "predicate,n,d,delta,fraction,alg_estimate,E_f";

/// Resolves (solving on a cache miss) the Parisi solution and its SDE
/// calibration for this configuration.
pub fn prepare_solution(
    cfg: &ExperimentConfig,
    pred: &Predicate,
) -> Result<(Arc<ParisiSolution>, SdeStats, Vec<f64>)> {
    let xi = pred.mixture();
    if xi.is_zero() {
        return Err(Error::DegeneratePredicate);
    }
    let mc = cfg.minimize_config(pred);
    let sol = parisi::solve_or_load(&cfg.cache_dir, &xi, cfg.pieces, &mc)?;
    if sol.warning {
        return Err(Error::NonConvergence);
    }
    let stats = parisi::simulate_sde(&sol, cfg.delta, cfg.sde_paths, cfg.seed_sde)?;
    let consts = parisi::nonlinearity_constants(&sol, &stats, cfg.delta, pred.arity())?;
    Ok((sol, stats, consts))
}

fn run_engine(
    cfg: &ExperimentConfig,
    pred: &Predicate,
    inst: &CspInstance,
    sol: &ParisiSolution,
    consts: &[f64],
) -> Result<RunResult> {
    let mut rc = RunConfig::new(cfg.delta, cfg.seed_engine);
    rc.round_seed = cfg.seed_rounding;
    rc.record_history = cfg.record_history;
    engine::run(inst, pred, sol, consts, &rc)
}

/// Full pipeline: reject linear predicates, resolve the Parisi cache,
/// generate the instance, run the engine, write result/report files and
/// return the one-line CSV summary.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutcome> {
    let start = std::time::Instant::now();
    let pred = cfg.resolve_predicate()?;
    cfg.validate(&pred)?;
    if pred.flags().has_linear {
        return Err(Error::LinearPredicate);
    }
    install_threads(cfg.threads);
    let (sol, _stats, consts) = prepare_solution(cfg, &pred)?;
    let inst = sample_index_regular(cfg.n, cfg.d, pred.arity(), cfg.seed_instance)?;
    let run = run_engine(cfg, &pred, &inst, &sol, &consts)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    let label = cfg.label();
    let result_path = cfg.out_dir.join(format!("result-{label}.json"));
    let report_path = cfg.out_dir.join(format!("report-{label}.json"));
    let histories_path = run
        .histories
        .as_ref()
        .map(|_| cfg.out_dir.join(format!("histories-{label}.bin")));

    let report = diagnostic_report(&run, &pred, cfg.delta)?;
    let outcome = PipelineOutcome {
        fraction: run.satisfying_fraction,
        alg_estimate: sol.functional_value,
        e_f: pred.mean(),
        csv_line: csv_line(cfg, run.satisfying_fraction, sol.functional_value, pred.mean()),
        result_path: Some(result_path.clone()),
        report_path: Some(report_path.clone()),
        histories_path: histories_path.clone(),
    };
    if let (Some(path), Some(hist)) = (&histories_path, &run.histories) {
        write_histories(path, hist)?;
    }
    let doc = ResultDoc {
        version: crate::VERSION.to_string(),
        config: cfg.clone(),
        alg_estimate: sol.functional_value,
        parisi_warning: sol.warning,
        run,
        wall_clock_ms: start.elapsed().as_millis() as u64,
    };
    std::fs::write(&result_path, serde_json::to_vec_pretty(&doc).map_err(json_err)?)?;
    std::fs::write(&report_path, serde_json::to_vec_pretty(&report).map_err(json_err)?)?;
    Ok(outcome)
}

pub fn csv_line(cfg: &ExperimentConfig, fraction: f64, alg: f64, e_f: f64) -> String {
    format!(
        "{},{},{},{},{:.6},{:.6},{:.6}",
        cfg.predicate, cfg.n, cfg.d, cfg.delta, fraction, alg, e_f
    )
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Format(e.to_string())
}

/// Validates and describes a run without touching the filesystem.
pub fn dry_run(cfg: &ExperimentConfig) -> Result<String> {
    let pred = cfg.resolve_predicate()?;
    cfg.validate(&pred)?;
    if pred.flags().has_linear {
        return Err(Error::LinearPredicate);
    }
    let xi = pred.mixture();
    let mc = cfg.minimize_config(&pred);
    let levels = (1.0 / cfg.delta).floor() as usize;
    Ok(format!(
        "predicate {} (r={}, E[f]={}), xi weights {:?}\n\
         instance: n={} d={} (alpha={}), m={} clauses, seed {}\n\
         parisi: k={} pieces, eta={}, grid dt={:.2e} dx={:.2e} x_max={:.3}, cache {}\n\
         engine: delta={} ({} iterations), seeds engine={} rounding={}, history={}\n\
         outputs under {}",
        cfg.predicate,
        pred.arity(),
        pred.mean(),
        xi.weights(),
        cfg.n,
        cfg.d,
        cfg.d / pred.arity(),
        cfg.n * cfg.d / pred.arity(),
        cfg.seed_instance,
        cfg.pieces,
        cfg.eta,
        mc.grid.dt,
        mc.grid.dx,
        mc.grid.x_max,
        cfg.cache_dir.display(),
        cfg.delta,
        levels,
        cfg.seed_engine,
        cfg.seed_rounding,
        cfg.record_history,
        cfg.out_dir.display(),
    ))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum SweepAxis {
    D,
    Delta,
    N,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<SweepAxis> {
        match s {
            "d" => Ok(SweepAxis::D),
            "delta" => Ok(SweepAxis::Delta),
            "n" => Ok(SweepAxis::N),
            other => Err(Error::Parse(format!("axis must be d, delta or n, got {other:?}"))),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub csv_line: String,
    pub fraction: Option<f64>,
    pub error: Option<String>,
}

/// One pipeline run per axis value; per-row seeds derive from the base
/// seeds and the value. Failures are recorded per row.
pub fn run_sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::BadParameter("empty sweep value list".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = base.clone();
        match axis {
            SweepAxis::D => cfg.d = value as usize,
            SweepAxis::Delta => cfg.delta = value,
            SweepAxis::N => cfg.n = value as usize,
        }
        let salt = value.to_bits();
        cfg.seed_instance = derive_seed(base.seed_instance, salt);
        cfg.seed_engine = derive_seed(base.seed_engine, salt);
        cfg.seed_rounding = derive_seed(base.seed_rounding, salt);
        match run_pipeline(&cfg) {
            Ok(out) => rows.push(SweepRow {
                value,
                csv_line: out.csv_line,
                fraction: Some(out.fraction),
                error: None,
            }),
            Err(e) => rows.push(SweepRow {
                value,
                csv_line: format!("{},{},{},{},FAILED,,", cfg.predicate, cfg.n, cfg.d, cfg.delta),
                fraction: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct ReportEntry {
    pub name: String,
    pub level: Option<usize>,
    pub value: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct DiagReport {
    pub version: String,
    pub entries: Vec<ReportEntry>,
    pub pass: bool,
}

/// Per-level statistics compared against their state-evolution predictions.
pub fn diagnostic_report(run: &RunResult, pred: &Predicate, delta: f64) -> Result<DiagReport> {
    let xi = pred.mixture();
    let r = pred.arity();
    let mut entries = Vec::new();
    let tol = MomentTolerances::default();
    for (idx, &var) in run.stats.var_u_dir.iter().enumerate() {
        let level = idx + 1;
        let nu = analysis::nu(&xi, delta, level, r)?;
        entries.push(ReportEntry {
            name: "var_u_dir".into(),
            level: Some(level),
            value: var,
            predicted: nu,
            tolerance: tol.var_rel * nu,
            pass: (var - nu).abs() <= tol.var_rel * nu,
        });
    }
    for (idx, &z2) in run.stats.mean_z2_dir.iter().enumerate() {
        let level = idx + 1;
        let predicted = (level as f64 + 1.0) * delta;
        entries.push(ReportEntry {
            name: "mean_z2_dir".into(),
            level: Some(level),
            value: z2,
            predicted,
            tolerance: 0.05 * predicted,
            pass: (z2 - predicted).abs() <= 0.05 * predicted,
        });
    }
    if run.config.record_history {
        let decomp = engine::value_decomposition(run, pred)?;
        entries.push(ReportEntry {
            name: "value_decomposition_gap".into(),
            level: None,
            value: decomp.gap,
            predicted: 0.0,
            tolerance: 10.0 * (run.config.r as f64) / run.config.d as f64,
            pass: decomp.gap <= 10.0 * (run.config.r as f64) / run.config.d as f64,
        });
    }
    if let Some(hist) = &run.histories {
        let report = analysis::moment_report(hist, run.config.levels, &xi, delta, r, &tol)?;
        for row in report.directed.iter().chain(report.node.iter()) {
            entries.push(ReportEntry {
                name: "u_fourth_moment".into(),
                level: Some(row.level),
                value: row.moments[3],
                predicted: row.predicted[3],
                tolerance: tol.m4_rel * row.predicted[3],
                pass: (row.moments[3] - row.predicted[3]).abs() <= tol.m4_rel * row.predicted[3],
            });
        }
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(DiagReport { version: crate::VERSION.to_string(), entries, pass })
}

const HIST_MAGIC: &[u8; 8] = b"CSPMPHS1";

pub fn write_histories(path: &Path, hist: &RunHistories) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(HIST_MAGIC)?;
    let write_vec = |w: &mut dyn Write, v: &[f64]| -> Result<()> {
        w.write_all(&(v.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(v.len() * 8);
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    };
    let write_nested = |w: &mut dyn Write, vv: &[Vec<f64>]| -> Result<()> {
        w.write_all(&(vv.len() as u64).to_le_bytes())?;
        for v in vv {
            write_vec(w, v)?;
        }
        Ok(())
    };
    write_nested(&mut w, &hist.node_u)?;
    write_nested(&mut w, &hist.node_a)?;
    write_nested(&mut w, &hist.dir_u)?;
    let write_ids = |w: &mut dyn Write, ids: &[u32]| -> Result<()> {
        w.write_all(&(ids.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(ids.len() * 4);
        for x in ids {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    };
    write_ids(&mut w, &hist.dir_sample)?;
    write_ids(&mut w, &hist.dir_sample_vars)?;
    write_vec(&mut w, &hist.z0)?;
    w.flush()?;
    Ok(())
}

pub fn read_histories(path: &Path) -> Result<RunHistories> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != HIST_MAGIC {
        return Err(Error::Format("bad histories magic".into()));
    }
    let read_u64 = |r: &mut dyn Read| -> Result<u64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    };
    let read_vec = |r: &mut dyn Read| -> Result<Vec<f64>> {
        let n = read_u64(r)? as usize;
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let read_nested = |r: &mut dyn Read| -> Result<Vec<Vec<f64>>> {
        let n = read_u64(r)? as usize;
        (0..n).map(|_| read_vec(r)).collect()
    };
    let node_u = read_nested(&mut r)?;
    let node_a = read_nested(&mut r)?;
    let dir_u = read_nested(&mut r)?;
    let mut read_ids = |r: &mut dyn Read| -> Result<Vec<u32>> {
        let n = read_u64(r)? as usize;
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf)?;
        Ok(buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let dir_sample = read_ids(&mut r)?;
    let dir_sample_vars = read_ids(&mut r)?;
    let z0 = read_vec(&mut r)?;
    Ok(RunHistories { node_u, node_a, dir_u, dir_sample, dir_sample_vars, z0 })
}

pub fn install_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.n = 512;
        cfg.d = 32;
        cfg.delta = 0.25;
        cfg.pieces = 1;
        cfg.sde_paths = 2_000;
        cfg.out_dir = dir.join("out");
        cfg.cache_dir = dir.join("cache");
        cfg
    }

    #[test]
    fn config_round_trip_and_overrides() {
        let text = "predicate = nae3\nn = 4096\nd = 96\ndelta = 0.05\n# comment\npieces = 2\n";
        let mut cfg = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(cfg.predicate, "nae3");
        assert_eq!(cfg.n, 4096);
        assert_eq!(cfg.d, 96);
        cfg.set("d", "192").unwrap();
        assert_eq!(cfg.d, 192);
        assert!(cfg.set("bogus", "1").is_err());
        assert!(ExperimentConfig::from_text("nonsense").is_err());
    }

    #[test]
    fn validation_catches_divisibility() {
        let pred = Predicate::nae3().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.d = 128; // not divisible by 3
        assert!(cfg.validate(&pred).is_err());
        cfg.d = 129;
        cfg.validate(&pred).unwrap();
        cfg.delta = 0.7;
        assert!(cfg.validate(&pred).is_err());
    }

    #[test]
    fn dry_run_touches_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let plan = dry_run(&cfg).unwrap();
        assert!(plan.contains("maxcut2"));
        assert!(!cfg.out_dir.exists());
        assert!(!cfg.cache_dir.exists());
    }

    #[test]
    fn linear_predicate_exits_early() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        let pred_path = dir.path().join("linear.pred");
        std::fs::write(&pred_path, "2\n1 0 1 0\n").unwrap();
        cfg.predicate = pred_path.to_string_lossy().into_owned();
        assert!(matches!(run_pipeline(&cfg), Err(Error::LinearPredicate)));
    }

    #[test]
    fn pipeline_produces_deterministic_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let out1 = run_pipeline(&cfg).unwrap();
        let bytes1 = std::fs::read(out1.result_path.as_ref().unwrap()).unwrap();
        let out2 = run_pipeline(&cfg).unwrap();
        let bytes2 = std::fs::read(out2.result_path.as_ref().unwrap()).unwrap();
        let scrub = |bytes: &[u8]| {
            let mut doc: serde_json::Value = serde_json::from_slice(bytes).unwrap();
            doc["wall_clock_ms"] = 0.into();
            doc["run"]["elapsed_ms"] = 0.into();
            serde_json::to_string(&doc).unwrap()
        };
        assert_eq!(scrub(&bytes1), scrub(&bytes2));
        assert_eq!(out1.csv_line, out2.csv_line);
        assert!(out1.csv_line.starts_with("maxcut2,512,32,0.25,"));
    }

    #[test]
    fn sweep_rejects_empty_and_derives_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        assert!(run_sweep(&cfg, SweepAxis::D, &[]).is_err());
        let rows = run_sweep(&cfg, SweepAxis::D, &[16.0, 32.0]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn histories_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let hist = RunHistories {
            node_u: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            node_a: vec![vec![0.5, 0.25], vec![0.1, 0.2]],
            dir_u: vec![vec![9.0], vec![8.0]],
            dir_sample: vec![0, 7],
            dir_sample_vars: vec![0, 1],
            z0: vec![0.1, -0.2],
        };
        let path = dir.path().join("hist.bin");
        write_histories(&path, &hist).unwrap();
        let back = read_histories(&path).unwrap();
        assert_eq!(back.node_u, hist.node_u);
        assert_eq!(back.node_a, hist.node_a);
        assert_eq!(back.dir_u, hist.dir_u);
        assert_eq!(back.dir_sample, hist.dir_sample);
        assert_eq!(back.z0, hist.z0);
    }
}
