use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use lsvgd::experiment::{
    self, compare_runs, generate_data, io, reference, run_experiment, ExperimentConfig, Manifest,
    Method, Problem,
};
use lsvgd::Error;

/// Relative output paths are resolved against this directory when set.
const OUTPUT_ROOT_VAR: &str = "LSVGD_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "lsvgd", about = "SVGD with locally refined neural surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic observation file of a PDE problem.
    GenerateData {
        #[command(flatten)]
        source: ConfigSource,
        /// Output file (defaults to the config's data-file).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        noise_std: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one experiment.
    Run {
        #[command(flatten)]
        source: ConfigSource,
        /// Replay the config stored in a run manifest.
        #[arg(long, conflicts_with_all = ["config", "problem"])]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score finished runs against a reference sample file.
    Compare {
        #[arg(long)]
        reference: PathBuf,
        /// Directory for comparison.csv and mmd_curves.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Draw reference posterior samples.
    Reference {
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, value_enum, default_value = "svgd")]
        kind: ReferenceKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// SVGD iterations, or grid cells per axis.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
    /// Print the version string.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceKind {
    /// Long direct SVGD run (double banana only).
    Svgd,
    /// Resampling from a dense grid of exact posterior values.
    Grid,
}

#[derive(Args)]
struct ConfigSource {
    /// JSON config; missing fields take the problem defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    data_file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    DoubleBanana,
    HeatSource,
    Diffusion,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    PriorDnn,
    Ldnn,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    i_max: Option<usize>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    master_step: Option<f64>,
    #[arg(long)]
    design_count: Option<usize>,
    /// Derive every seed from one base value.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reference_file: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn config_err(e: Error) -> Failure {
    Failure::Config(e.to_string())
}

fn name_of<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

fn output_root(path: PathBuf) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path,
    }
}

impl ConfigSource {
    /// The config file (if any) with the command-line fields laid over it.
    fn resolve(&self, patch: Map<String, Value>) -> Result<ExperimentConfig, Failure> {
        let mut value = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
            }
            None => json!({}),
        };
        let mut top = Map::new();
        if let Some(p) = self.problem {
            top.insert("problem".into(), json!(name_of(p)));
        }
        if let Some(m) = self.method {
            top.insert("method".into(), json!(name_of(m)));
        }
        if value.get("method").is_none() && !top.contains_key("method") {
            top.insert("method".into(), json!(Method::Ldnn.name()));
        }
        if let Some(d) = &self.data_file {
            top.insert("data-file".into(), json!(d));
        }
        top.extend(patch);
        experiment::config::merge(&mut value, Value::Object(top));
        ExperimentConfig::from_value(value).map_err(config_err)
    }
}

impl Overrides {
    fn patch(&self) -> Map<String, Value> {
        let mut top = Map::new();
        let mut refinement = Map::new();
        let put = |m: &mut Map<String, Value>, k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        };
        put(&mut top, "particles", self.particles.map(|v| json!(v)));
        put(&mut top, "iterations", self.iterations.map(|v| json!(v)));
        put(&mut top, "master-step", self.master_step.map(|v| json!(v)));
        put(&mut top, "reference-file", self.reference_file.as_ref().map(|v| json!(v)));
        put(&mut top, "output-dir", self.output_dir.as_ref().map(|v| json!(v)));
        if let Some(s) = self.seed {
            top.insert("seeds".into(), json!(experiment::Seeds::from_base(s)));
        }
        if let Some(c) = self.design_count {
            top.insert("design".into(), json!({ "count": c }));
        }
        put(&mut refinement, "q", self.q.map(|v| json!(v)));
        put(&mut refinement, "radius", self.radius.map(|v| json!(v)));
        put(&mut refinement, "tol", self.tol.map(|v| json!(v)));
        put(&mut refinement, "rho", self.rho.map(|v| json!(v)));
        put(&mut refinement, "i-max", self.i_max.map(|v| json!(v)));
        put(&mut refinement, "inner-steps", self.inner_steps.map(|v| json!(v)));
        if !refinement.is_empty() {
            top.insert("refinement".into(), Value::Object(refinement));
        }
        top
    }
}

fn cmd_generate_data(
    source: &ConfigSource,
    out: Option<PathBuf>,
    noise_std: Option<f64>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let mut patch = Map::new();
    if let Some(s) = noise_std {
        patch.insert("noise-std".into(), json!(s));
    }
    let mut cfg = source.resolve(patch)?;
    if let Some(s) = seed {
        cfg.seeds.data = s;
    }
    cfg.validate().map_err(config_err)?;
    let out = out
        .or_else(|| cfg.data_file.clone())
        .ok_or_else(|| Failure::Config("give --out or a data-file in the config".into()))?;
    let out = output_root(out);
    let data = generate_data(&cfg, &out)?;
    println!("wrote {} ({} observations)", out.display(), data.observations.len());
    Ok(())
}

fn cmd_run(
    source: &ConfigSource,
    manifest: Option<PathBuf>,
    overrides: &Overrides,
) -> Result<(), Failure> {
    let mut cfg = match manifest {
        Some(path) => {
            let m = Manifest::load(&path).map_err(config_err)?;
            let mut value = serde_json::to_value(&m.config).expect("serializable");
            experiment::config::merge(&mut value, Value::Object(overrides.patch()));
            ExperimentConfig::from_value(value).map_err(config_err)?
        }
        None => source.resolve(overrides.patch())?,
    };
    cfg.output_dir = output_root(cfg.output_dir);
    cfg.validate()?;
    let out = run_experiment(&cfg)?;
    println!(
        "{} {}: {} iterations, {} online / {} offline evaluations, {:.1}s",
        cfg.problem.name(),
        cfg.method.name(),
        cfg.total_iterations(),
        out.budget.online,
        out.budget.offline,
        out.wall_time
    );
    if let Some(v) = out.final_mmd() {
        println!("final mmd {v:.6}");
    }
    if let Some(v) = out.final_rel_k() {
        println!("final rel(k) {v:.6}");
    }
    println!("posterior mean {:?}", out.posterior_mean);
    println!("results in {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_compare(reference: &Path, out: &Path, runs: &[PathBuf]) -> Result<(), Failure> {
    let cmp = compare_runs(runs, reference)?;
    let out = output_root(out.to_path_buf());
    cmp.write(&out)?;
    println!("{:<40} {:>10} {:>12} {:>8} {:>8} {:>9}", "run", "method", "final mmd", "online", "offline", "time [s]");
    for r in &cmp.rows {
        println!(
            "{:<40} {:>10} {:>12.6} {:>8} {:>8} {:>9.2}",
            r.run, r.method, r.final_mmd, r.online_evals, r.offline_evals, r.wall_time_s
        );
    }
    Ok(())
}

fn cmd_reference(
    source: &ConfigSource,
    kind: ReferenceKind,
    out: &Path,
    samples: usize,
    resolution: Option<usize>,
    seed: u64,
) -> Result<(), Failure> {
    let cfg = source.resolve(Map::new())?;
    let points = match (cfg.problem, kind) {
        (Problem::DoubleBanana, ReferenceKind::Svgd) => {
            reference::double_banana_reference(samples, resolution.unwrap_or(2000), cfg.master_step, seed)?
        }
        (Problem::DoubleBanana, ReferenceKind::Grid) => {
            reference::double_banana_grid_reference(resolution.unwrap_or(800), samples, seed)?
        }
        (Problem::HeatSource, ReferenceKind::Grid) => {
            let problem = experiment::build_problem(&cfg)?;
            reference::grid_reference(
                problem.model.as_ref(),
                &problem.prior,
                &problem.likelihood,
                resolution.unwrap_or(100),
                samples,
                seed,
            )?
        }
        (p, _) => {
            return Err(Failure::Config(format!(
                "no {} reference for {}",
                name_of(kind),
                p.name()
            )))
        }
    };
    let out = output_root(out.to_path_buf());
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    io::write_particles(&out, 0, &points)?;
    println!("wrote {} samples to {}", points.rows(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenerateData { source, out, noise_std, seed } => {
            cmd_generate_data(&source, out, noise_std, seed)
        }
        Command::Run { source, manifest, overrides } => cmd_run(&source, manifest, &overrides),
        Command::Compare { reference, out, runs } => cmd_compare(&reference, &out, &runs),
        Command::Reference { source, kind, out, samples, resolution, seed } => {
            cmd_reference(&source, kind, &out, samples, resolution, seed)
        }
        Command::Version => {
            println!("{}", experiment::VERSION);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
