use clap::{Args, Parser, Subcommand};
use cspmp::analysis::MomentTolerances;
use cspmp::engine::RunConfig;
use cspmp::error::Error;
use cspmp::instance::{sample_index_regular, CspInstance};
use cspmp::parisi::{self, MinimizeConfig};
use cspmp::pipeline::{self, ExperimentConfig, SweepAxis, CSV_HEADER};
use cspmp::predicate::Predicate;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "cspmp", version, about = "Message-passing optimizer for sparse random CSPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a predicate: Fourier table, mixture weights, flags.
    Predicate {
        /// Built-in name or truth-table file
        #[arg(long)]
        predicate: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an index-regular instance file.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve (or load) the Parisi table for a predicate.
    Parisi {
        #[arg(long)]
        predicate: String,
        #[arg(long, default_value_t = 3)]
        pieces: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value_t = 4)]
        sde_seed: u64,
    },
    /// Run the engine on an existing instance file.
    Run {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        predicate: String,
        #[arg(long)]
        parisi_cache: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        rounding_seed: u64,
        #[arg(long, default_value_t = 3)]
        pieces: usize,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 4)]
        sde_seed: u64,
        #[arg(long)]
        record_history: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        histories: Option<PathBuf>,
    },
    /// Recompute the diagnostic report from a result file.
    Diag {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        histories: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline from a config file (plus overrides).
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Validate and print the plan without touching files.
        #[arg(long)]
        dry_run: bool,
    },
    /// One pipeline run per axis value, aggregated into a CSV table.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    predicate: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    pieces: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seed_instance: Option<u64>,
    #[arg(long)]
    seed_engine: Option<u64>,
    #[arg(long)]
    seed_rounding: Option<u64>,
    #[arg(long)]
    seed_sde: Option<u64>,
    #[arg(long)]
    sde_paths: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    record_history: Option<bool>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.predicate {
            cfg.predicate = v.clone();
        }
        if let Some(v) = self.n {
            cfg.n = v;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.pieces {
            cfg.pieces = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.seed_instance {
            cfg.seed_instance = v;
        }
        if let Some(v) = self.seed_engine {
            cfg.seed_engine = v;
        }
        if let Some(v) = self.seed_rounding {
            cfg.seed_rounding = v;
        }
        if let Some(v) = self.seed_sde {
            cfg.seed_sde = v;
        }
        if let Some(v) = self.sde_paths {
            cfg.sde_paths = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = &self.cache_dir {
            cfg.cache_dir = v.clone();
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        if let Some(v) = self.record_history {
            cfg.record_history = v;
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::LinearPredicate | Error::DegeneratePredicate => 3,
        Error::NonConvergence => 4,
        Error::NanAtIteration(_) => 5,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn load_config(path: &Option<PathBuf>, overrides: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_text(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Ok(dir) = std::env::var("CSPMP_CACHE_DIR") {
        cfg.cache_dir = PathBuf::from(dir);
    }
    if let Ok(t) = std::env::var("CSPMP_THREADS") {
        cfg.threads = t.parse().map_err(|e| Error::Parse(format!("CSPMP_THREADS: {e}")))?;
    }
    overrides.apply(&mut cfg);
    Ok(cfg)
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Predicate { predicate, out } => {
            let pred = resolve_predicate(&predicate)?;
            let xi = pred.mixture();
            let doc = serde_json::json!({
                "r": pred.arity(),
                "mean": pred.mean(),
                "fourier": pred.fourier_coeffs(),
                "mixture_weights": xi.weights(),
                "flags": pred.flags(),
                "text": pred.to_text(),
            });
            let rendered = serde_json::to_string_pretty(&doc).unwrap();
            match out {
                Some(path) => std::fs::write(path, rendered)?,
                None => println!("{rendered}"),
            }
            Ok(())
        }
        Command::Gen { n, d, r, seed, out } => {
            let inst = sample_index_regular(n, d, r, seed)?;
            std::fs::write(&out, inst.to_text())?;
            println!(
                "wrote {} ({} clauses, {} repeated-variable)",
                out.display(),
                inst.m(),
                inst.repeated_variable_clauses()
            );
            Ok(())
        }
        Command::Parisi { predicate, pieces, delta, paths, eta, cache, sde_seed } => {
            let pred = resolve_predicate(&predicate)?;
            let xi = pred.mixture();
            let mut mc = MinimizeConfig::for_mixture(&xi);
            mc.eta = eta;
            mc.grid = parisi::GridConfig::for_mixture(&xi, delta);
            let sol = parisi::solve_or_load(&cache, &xi, pieces, &mc)?;
            if sol.warning {
                return Err(Error::NonConvergence);
            }
            let stats = parisi::simulate_sde(&sol, delta, paths, sde_seed)?;
            let consts = parisi::nonlinearity_constants(&sol, &stats, delta, pred.arity())?;
            println!(
                "alg_estimate = {:.6} (k = {pieces}, eta = {eta})",
                sol.functional_value
            );
            println!("energy integral = {:.6}", parisi::alg_energy_estimate(&sol, &stats, eta));
            println!("nonlinearity constants: {consts:?}");
            Ok(())
        }
        Command::Run {
            instance,
            predicate,
            parisi_cache,
            delta,
            seed,
            rounding_seed,
            pieces,
            eta,
            paths,
            sde_seed,
            record_history,
            out,
            histories,
        } => {
            let pred = resolve_predicate(&predicate)?;
            let inst = CspInstance::from_text(&std::fs::read_to_string(&instance)?)?;
            let mut cfg = ExperimentConfig::default();
            cfg.predicate = predicate;
            cfg.n = inst.n();
            cfg.d = inst.degree().unwrap_or(0);
            cfg.delta = delta;
            cfg.pieces = pieces;
            cfg.eta = eta;
            cfg.sde_paths = paths;
            cfg.seed_sde = sde_seed;
            cfg.cache_dir = parisi_cache;
            let (sol, _stats, consts) = pipeline::prepare_solution(&cfg, &pred)?;
            let mut rc = RunConfig::new(delta, seed);
            rc.round_seed = rounding_seed;
            rc.record_history = record_history;
            let result = cspmp::engine::run(&inst, &pred, &sol, &consts, &rc)?;
            if let (Some(path), Some(hist)) = (&histories, &result.histories) {
                pipeline::write_histories(path, hist)?;
            }
            println!("satisfying_fraction = {:.6}", result.satisfying_fraction);
            std::fs::write(
                &out,
                serde_json::to_vec_pretty(&result).map_err(|e| Error::Format(e.to_string()))?,
            )?;
            Ok(())
        }
        Command::Diag { result, histories, out } => {
            let doc: pipeline::ResultDoc =
                serde_json::from_slice(&std::fs::read(&result)?)
                    .map_err(|e| Error::Format(e.to_string()))?;
            let pred = doc.config.resolve_predicate()?;
            let mut run = doc.run;
            if let Some(path) = histories {
                run.histories = Some(pipeline::read_histories(&path)?);
            }
            let report = pipeline::diagnostic_report(&run, &pred, doc.config.delta)?;
            std::fs::write(
                &out,
                serde_json::to_vec_pretty(&report).map_err(|e| Error::Format(e.to_string()))?,
            )?;
            let _ = MomentTolerances::default();
            println!("report pass = {}", report.pass);
            Ok(())
        }
        Command::Pipeline { config, overrides, dry_run } => {
            let cfg = load_config(&config, &overrides)?;
            if dry_run {
                println!("{}", pipeline::dry_run(&cfg)?);
                return Ok(());
            }
            let out = pipeline::run_pipeline(&cfg)?;
            println!("{CSV_HEADER}");
            println!("{}", out.csv_line);
            Ok(())
        }
        Command::Sweep { config, overrides, axis, values, out } => {
            let cfg = load_config(&config, &overrides)?;
            let axis: SweepAxis = axis.parse()?;
            let rows = pipeline::run_sweep(&cfg, axis, &values)?;
            let mut table = String::from(CSV_HEADER);
            table.push('\n');
            let mut failures = 0;
            for row in &rows {
                table.push_str(&row.csv_line);
                table.push('\n');
                if let Some(err) = &row.error {
                    failures += 1;
                    eprintln!("value {}: {err}", row.value);
                }
            }
            match out {
                Some(path) => std::fs::write(path, &table)?,
                None => print!("{table}"),
            }
            if failures > 0 {
                return Err(Error::BadParameter(format!("{failures} sweep rows failed")));
            }
            Ok(())
        }
    }
}

fn resolve_predicate(spec: &str) -> Result<Predicate, Error> {
    let path = std::path::Path::new(spec);
    if path.is_file() {
        Predicate::from_text(&std::fs::read_to_string(path)?)
    } else {
        Predicate::by_name(spec)
    }
}
