//! `lpdim` command-line driver.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lpdim::graphcoh::{self, Graph};
use lpdim::graphings::{self, Graphing};
use lpdim::homdim::{self, DimEstimate, EstimateOptions};
use lpdim::relation::Model;
use lpdim::sofic::{self, SoficApprox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{build_spec, ExperimentConfig, Representation, Task};

pub const SCHEMA_VERSION: u32 = 1;

/// An error tagged with the subsystem that raised it.
#[derive(Debug)]
pub struct Failure {
    pub module: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(module: &'static str, message: impl Into<String>) -> Self {
        Self { module, message: message.into() }
    }
}

impl From<lpdim::Error> for Failure {
    fn from(e: lpdim::Error) -> Self {
        Self::new(e.module(), e.to_string())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.module, self.message)
    }
}

#[derive(Parser, Debug)]
#[command(name = "lpdim", version, about = "Finite-scale l^p dimension and graphing cohomology experiments")]
struct Cli {
    /// Overrides the seed of a config or of generated inputs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving report.json (and per_scale.csv for estimates).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check every invariant of a model file.
    Validate { model: PathBuf },
    /// Bracket the dimension of a representation.
    Dim { config: PathBuf },
    /// Bracket the first l^2 Betti-type invariant of the model's graphing.
    C1 { config: PathBuf },
    /// Graph cohomology tools.
    Coh {
        #[command(subcommand)]
        action: CohAction,
    },
    /// Graphing tools; the graphing is a model file with `morphisms`.
    Graphing {
        #[command(subcommand)]
        action: GraphingAction,
    },
    /// Defects of a sofic approximation against a model.
    Quality {
        model: PathBuf,
        sofic: PathBuf,
        #[arg(long, default_value_t = 3)]
        word_length: usize,
    },
}

#[derive(Subcommand, Debug)]
enum CohAction {
    /// Split an edge function into cycle and cut parts.
    Hodge {
        graph: PathBuf,
        /// JSON array of edge values; random when omitted.
        #[arg(long)]
        values: Option<PathBuf>,
    },
    /// Solve the grounded Laplacian by Neumann series.
    Neumann {
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        grounded: Vec<usize>,
        /// JSON array right-hand side; random on free vertices when omitted.
        #[arg(long)]
        rhs: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Spectral margin of the grounded averaging operator.
    Margin {
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        grounded: Vec<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum GraphingAction {
    /// Exact cost, both formulas, and the exact c1.
    Cost { graphing: PathBuf },
    /// Transfer spanning identity between the generator graphing and the morphisms.
    TransferCheck {
        graphing: PathBuf,
        /// Compare against the morphisms of another file on the same relation.
        #[arg(long)]
        against: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new("cli", e.to_string()))?;
    }
    let seed = cli.seed;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Validate { model } => validate(&model),
        Command::Dim { config } => estimate(&config, Task::Dim, seed, out),
        Command::C1 { config } => estimate(&config, Task::C1, seed, out),
        Command::Coh { action } => {
            let report = coh(action, seed.unwrap_or(0))?;
            output::emit(&envelope("coh", None, report), None, out)
        }
        Command::Graphing { action } => {
            let report = graphing(action)?;
            output::emit(&envelope("graphing", None, report), None, out)
        }
        Command::Quality { model, sofic: path, word_length } => {
            let model = Model::load(&model)?;
            let sigma = SoficApprox::load(&path)?;
            let q = sofic::quality_report(&sigma, &model, word_length)?;
            let report = json!({"d": sigma.d(), "word_length": word_length, "quality": q});
            output::emit(&envelope("quality", None, report), None, out)
        }
    }
}

fn envelope(task: &str, config: Option<Value>, result: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "software": {"name": "lpdim", "version": env!("CARGO_PKG_VERSION")},
        "task": task,
        "config": config,
        "result": result,
    })
}

fn validate(path: &Path) -> Result<(), Failure> {
    let model = Model::load(path)?;
    let graphing = Graphing::from_model(&model);
    let cost = graphings::cost(&graphing)?;
    println!(
        "ok: {} atoms, {} orbits, {} generators, generating = {}, cost = {}",
        model.num_atoms(),
        model.rel().blocks().len(),
        model.generators().len(),
        model.generates(),
        cost.exact
    );
    Ok(())
}

fn estimate(path: &Path, expected: Task, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if cfg.task != expected {
        return Err(Failure::new("config", format!("`task`: config is for {:?}, command expects {:?}", cfg.task, expected)));
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let model = Model::load(cfg.resolve(base, &cfg.model))?;
    let sigmas = cfg.sigmas(base, &model)?;
    let opts = EstimateOptions {
        samples: cfg.samples,
        seed: cfg.seed,
        sampler: cfg.sampler.clone(),
        rho: cfg.rho,
    };
    let (est, extra): (DimEstimate, Value) = match expected {
        Task::Dim => {
            let rep = cfg
                .representation
                .as_ref()
                .ok_or_else(|| Failure::new("config", "`representation`: required for dim"))?;
            let spec = build_spec(&model, rep)?;
            let est = homdim::estimate_dim(&spec, &sigmas, &cfg.grid, &opts)?;
            (est, json!({"exact_dimension": spec.exact_dimension().to_string()}))
        }
        _ => {
            if cfg.representation.as_ref().is_some_and(|r| *r != Representation::EdgeQuotient) {
                return Err(Failure::new("config", "`representation`: c1 always uses the edge quotient"));
            }
            let g = Graphing::from_model(&model);
            let est = graphings::c1_estimate(&model, &g, &sigmas, &cfg.grid, &opts)?;
            let c1 = graphings::c1_exact_finite(&g);
            let cost = graphings::cost(&g)?;
            (est, json!({"c1_exact": c1.exact.to_string(), "cost": cost.exact.to_string(), "generates": c1.generates}))
        }
    };
    let result = json!({
        "upper": est.upper,
        "lower": est.lower,
        "support_bound": est.support_bound,
        "span_upper": est.span_upper,
        "covering_upper": est.covering_upper,
        "alpha_hat": est.alpha_hat,
        "exact": extra,
        "scales": sigmas.iter().map(SoficApprox::d).collect::<Vec<_>>(),
        "diagnostics": est.diagnostics,
        "per_scale": est.per_scale,
    });
    let task = if expected == Task::Dim { "dim" } else { "c1" };
    let config = serde_json::to_value(&cfg).map_err(|e| Failure::new("config", e.to_string()))?;
    let out = out.map(Path::to_path_buf).or_else(|| cfg.output.as_ref().map(|o| cfg.resolve(base, o)));
    output::emit(&envelope(task, Some(config), result), Some(&est.per_scale), out.as_deref())
}

fn read_vector(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::new("model", format!("{}: {e}", path.display())))
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn coh(action: CohAction, seed: u64) -> Result<Value, Failure> {
    match action {
        CohAction::Hodge { graph, values } => {
            let g = Graph::load(&graph)?;
            let f = match values {
                Some(p) => read_vector(&p)?,
                None => random_vector(g.num_edges(), seed),
            };
            let (cycle, cut) = graphcoh::hodge_project(&g, &f)?;
            let boundary = graphcoh::boundary(&g, &cycle)?;
            Ok(json!({
                "vertices": g.num_vertices(),
                "edges": g.num_edges(),
                "input": f,
                "cycle_part": cycle,
                "cut_part": cut,
                "orthogonality": graphcoh::edge_pairing(&cycle, &cut).abs(),
                "cycle_boundary": boundary.iter().fold(0.0f64, |a, b| a.max(b.abs())),
                "cycle_space_dim": graphcoh::cycle_space_basis(&g).len(),
            }))
        }
        CohAction::Neumann { graph, grounded, rhs, p, tol } => {
            let g = Graph::load(&graph)?;
            let b = match rhs {
                Some(path) => read_vector(&path)?,
                None => {
                    let mut b = random_vector(g.num_vertices(), seed);
                    for &v in &grounded {
                        if v < b.len() {
                            b[v] = 0.0;
                        }
                    }
                    b
                }
            };
            let sol = graphcoh::neumann_inverse(&g, &grounded, &b, p, tol)?;
            Ok(json!({
                "vertices": g.num_vertices(),
                "grounded": grounded,
                "p": p,
                "tol": tol,
                "rhs": b,
                "solution": sol.h,
                "iterations": sol.iterations,
                "last_increment": sol.last_increment,
            }))
        }
        CohAction::Margin { graph, grounded } => {
            let g = Graph::load(&graph)?;
            let margin = graphcoh::amenability_margin(&g, &grounded)?;
            Ok(json!({"vertices": g.num_vertices(), "grounded": grounded, "margin": margin}))
        }
    }
}

fn graphing(action: GraphingAction) -> Result<Value, Failure> {
    match action {
        GraphingAction::Cost { graphing } => {
            let model = Model::load(&graphing)?;
            let g = Graphing::from_model(&model);
            let cost = graphings::cost(&g)?;
            let c1 = graphings::c1_exact_finite(&g);
            Ok(json!({
                "cost": cost.exact.to_string(),
                "cost_value": cost.value,
                "c1_exact": c1.exact.to_string(),
                "c1_value": c1.value,
                "generates": c1.generates,
                "c1_of_relation": graphings::c1_of_relation(model.rel()).to_string(),
            }))
        }
        GraphingAction::TransferCheck { graphing, against } => {
            let model = Model::load(&graphing)?;
            let (a, b) = match against {
                Some(p) => {
                    let other = Model::load(&p)?;
                    (Graphing::from_model(&model), Graphing::from_model(&other))
                }
                None => (Graphing::from_generators(&model), Graphing::from_model(&model)),
            };
            let checks = graphings::transfer_check(&a, &b)?;
            let holds = checks.iter().all(|c| c.holds);
            Ok(json!({"holds": holds, "per_orbit": checks}))
        }
    }
}
