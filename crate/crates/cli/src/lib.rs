//! Command-line front end: reads a JSON config, runs one command and writes
//! `summary.json` and `nodes.csv`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use thiserror::Error;

use robust_snell::decomposition::{flat_off_check, universal_decompose, Decomposition};
use robust_snell::oracle::crosscheck;
use robust_snell::priors::DensityProcess;
use robust_snell::random::{random_instance, Limits};
use robust_snell::snell::{
    certificate_for, extract_optimal_prior, robust_expectation, solve_with_tolerance, u_alpha, u_star,
    verify_value_identities,
};
use robust_snell::{EventTree, NodeIdx, SnellSolution, StoppingRule};

pub use config::{Model, RunConfig};
pub use output::{g17, NodeRow, NODE_COLUMNS};

pub const THREADS_ENV: &str = "ROBUST_SNELL_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] robust_snell::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("could not encode output: {0}")]
    Encode(String),
}

impl CliError {
    /// 2 invalid config, 3 size guard, 4 unattained supremum, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use robust_snell::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidTree(_) | E::InvalidPriors(_) | E::InvalidInput(_) | E::FloorMismatch { .. }) => 2,
            CliError::Core(E::SizeGuard { .. }) => 3,
            CliError::Core(E::Unattained { .. }) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "robust-snell",
    version,
    about = "Optimal stopping under multiple priors on event trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for summary.json and nodes.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Values, ε-optimal and optimal rules, optimal prior and certificate.
    Solve(Common),
    /// Engine against brute-force enumeration.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Additional seeded random instances to cross-check.
        #[arg(long, default_value_t = 0)]
        random: usize,
    },
    /// Universal supermartingale decomposition and diagnostics.
    Decompose(Common),
    /// Knock-in barrier put under drift ambiguity (needs a `crr` block).
    Price(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(c) | Command::Decompose(c) | Command::Price(c) => c,
            Command::Oracle { common, .. } => common,
        }
    }
}

/// In-memory results of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub summary: Value,
    pub rows: Vec<NodeRow>,
}

impl Outputs {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let io = |path: PathBuf| move |source| CliError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let json = output::to_json_bytes(&self.summary).map_err(|e| CliError::Encode(e.to_string()))?;
        let csv = output::to_csv_bytes(&self.rows).map_err(|e| CliError::Encode(e.to_string()))?;
        let summary = dir.join("summary.json");
        fs::write(&summary, json).map_err(io(summary.clone()))?;
        let nodes = dir.join("nodes.csv");
        fs::write(&nodes, csv).map_err(io(nodes.clone()))?;
        Ok(())
    }
}

fn ids(tree: &EventTree, nodes: impl IntoIterator<Item = NodeIdx>) -> Vec<String> {
    nodes.into_iter().map(|n| tree.id(n).to_string()).collect()
}

fn node_rows(
    model: &Model,
    solution: &SnellSolution,
    star: &StoppingRule,
    z: Option<&DensityProcess>,
    dec: Option<&Decomposition>,
) -> Vec<NodeRow> {
    let tree = &model.tree;
    tree.nodes()
        .map(|n| NodeRow {
            node_id: tree.id(n).to_string(),
            time: tree.time(n),
            parent_id: tree.parent(n).map(|p| tree.id(p).to_string()),
            q: tree.parent(n).map(|_| tree.q(n)),
            state_s: tree.state(n, "S"),
            state_hit: tree.state(n, "hit"),
            y: model.payoff[n],
            r: solution.r[n],
            r_plus: solution.r_plus[n],
            stop: solution.in_stop_region(n),
            u_star_stop: star.is_stop(n),
            argmax_extreme: solution.argmax_extreme[n.index()],
            z_star: z.map(|z| z.z(n)),
            m: dec.map(|d| d.m[n]),
            c: dec.map(|d| d.c[n]),
            k: dec.map(|d| d.k[n]),
            a_q: dec.map(|d| d.a_q[n]),
        })
        .collect()
}

fn common_summary(command: &str, model: &Model, solution: &SnellSolution) -> Map<String, Value> {
    let tree = &model.tree;
    let root = tree.root();
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("mode".into(), serde_json::to_value(model.priors.mode()).expect("mode"));
    m.insert("v".into(), json!(tree.id(model.v)));
    m.insert("tolerance".into(), json!(model.tolerance));
    m.insert("seed".into(), json!(model.seed));
    m.insert("nodes".into(), json!(tree.len()));
    m.insert("horizon".into(), json!(tree.horizon()));
    m.insert("R_root".into(), json!(solution.r[root]));
    m.insert("R_plus_root".into(), json!(solution.r_plus[root]));
    m.insert("R_v".into(), json!(solution.r[model.v]));
    m.insert("R_plus_v".into(), json!(solution.r_plus[model.v]));
    m.insert("attained".into(), json!(solution.attained));
    m
}

fn solve_command(model: &Model) -> Result<Outputs, CliError> {
    let tree = &model.tree;
    let s = solve_with_tolerance(tree, &model.payoff, &model.priors, model.tolerance)?;
    let star = u_star(tree, &s, model.v);
    let z = extract_optimal_prior(&s, tree, &model.priors, model.v)?;
    let cert = certificate_for(tree, &model.payoff, &s, &star, &z)?;
    let dec = universal_decompose(tree, &s, &model.priors);

    let mut alphas = Vec::new();
    for &a in &model.alphas {
        let rule = u_alpha(tree, &s, &model.payoff, model.v, a)?;
        let value = robust_expectation(tree, &model.priors, &model.payoff, &rule, model.v)?;
        alphas.push(json!({"alpha": a, "stops": ids(tree, rule.stop_nodes()), "value": value}));
    }
    let mut prior = Map::new();
    for n in star.continuation_nodes(tree) {
        prior.insert(tree.id(n).to_string(), json!(z.ratio(n)));
    }
    let identities = match verify_value_identities(tree, &model.payoff, &model.priors, &s) {
        Ok(checks) => Value::Array(
            checks
                .iter()
                .map(|c| {
                    json!({
                        "name": c.name,
                        "passed": c.passed,
                        "worst_deviation": c.worst_deviation,
                        "detail": c.detail,
                    })
                })
                .collect(),
        ),
        Err(robust_snell::Error::SizeGuard { .. }) => Value::Null,
        Err(e) => return Err(e.into()),
    };

    let mut m = common_summary("solve", model, &s);
    m.insert("U_star_stops".into(), json!(ids(tree, star.stop_nodes())));
    m.insert("U_alpha".into(), Value::Array(alphas));
    m.insert("optimal_prior".into(), Value::Object(prior));
    m.insert(
        "certificate".into(),
        json!({
            "cond1": cert.cond1,
            "cond2": cert.cond2,
            "optimal": cert.optimal,
            "value": cert.value,
            "R_v": cert.r_v,
        }),
    );
    m.insert("stop_region".into(), json!(ids(tree, s.stop_nodes())));
    m.insert("identities".into(), identities);
    Ok(Outputs {
        summary: Value::Object(m),
        rows: node_rows(model, &s, &star, Some(&z), Some(&dec)),
    })
}

fn oracle_command(model: &Model, config: &RunConfig, random: usize) -> Result<Outputs, CliError> {
    let tree = &model.tree;
    let rep = crosscheck(tree, &model.payoff, &model.priors)?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut random_dev = 0.0f64;
    let mut random_nodes = 0usize;
    for _ in 0..random {
        let f = random_instance(&mut rng, Limits::default(), config.mode);
        let r = crosscheck(&f.tree, &f.payoff, &f.priors)?;
        random_dev = random_dev.max(r.max_deviation());
        random_nodes += r.nodes_checked();
    }
    let s = &rep.solution;
    let star = u_star(tree, s, model.v);
    let mut m = common_summary("oracle", model, s);
    m.insert("max_deviation".into(), json!(rep.max_deviation().max(random_dev)));
    m.insert("max_deviation_R".into(), json!(rep.max_deviation_r));
    m.insert("max_deviation_R_plus".into(), json!(rep.max_deviation_r_plus));
    m.insert("nodes_checked".into(), json!(rep.nodes_checked() + random_nodes));
    m.insert("brute_R_root".into(), json!(rep.brute_r[tree.root()]));
    m.insert("random_instances".into(), json!(random));
    m.insert("random_max_deviation".into(), json!(random_dev));
    Ok(Outputs {
        summary: Value::Object(m),
        rows: node_rows(model, s, &star, None, None),
    })
}

fn decompose_command(model: &Model) -> Result<Outputs, CliError> {
    let tree = &model.tree;
    let s = solve_with_tolerance(tree, &model.payoff, &model.priors, model.tolerance)?;
    let star = u_star(tree, &s, model.v);
    let dec = universal_decompose(tree, &s, &model.priors);
    let d = &dec.diagnostics;
    let mut premise = Map::new();
    for n in tree.nodes() {
        if let Some(p) = &d.premise.nodes[n.index()] {
            premise.insert(
                tree.id(n).to_string(),
                json!({
                    "dimension": p.dimension,
                    "full_slice": p.full_slice,
                    "scaling_closed": p.scaling_closed,
                }),
            );
        }
    }
    let mut m = common_summary("decompose", model, &s);
    m.insert("X0".into(), json!(dec.x0));
    m.insert("C_increasing".into(), json!(d.c_increasing));
    m.insert("min_delta_C".into(), json!(d.min_delta_c));
    m.insert("min_delta_A_q".into(), json!(d.min_delta_a_q));
    m.insert(
        "universal_martingale_residual".into(),
        json!(d.universal_martingale_residual),
    );
    m.insert("reconstruction_error".into(), json!(d.reconstruction_error));
    m.insert("flat_off".into(), json!(flat_off_check(&dec, tree, &star)));
    m.insert("U_star_stops".into(), json!(ids(tree, star.stop_nodes())));
    m.insert("premise".into(), json!({"holds": d.premise.holds, "nodes": premise}));
    Ok(Outputs {
        summary: Value::Object(m),
        rows: node_rows(model, &s, &star, None, Some(&dec)),
    })
}

fn price_command(model: &Model) -> Result<Outputs, CliError> {
    let params = model
        .crr
        .as_ref()
        .ok_or_else(|| CliError::Config("price needs a crr block".into()))?;
    let tree = &model.tree;
    let s = solve_with_tolerance(tree, &model.payoff, &model.priors, model.tolerance)?;
    let star = u_star(tree, &s, model.v);
    let mut summary = Map::new();
    for n in tree.nodes() {
        if let Some(d) = &s.optimal_density[n.index()] {
            summary.insert(tree.id(n).to_string(), json!(d[0] * tree.q(tree.children(n)[0])));
        }
    }
    let mut m = common_summary("price", model, &s);
    m.insert("H_S".into(), json!(s.r[tree.root()]));
    m.insert("exercise_boundary".into(), json!(ids(tree, s.stop_nodes())));
    m.insert("optimal_prior_summary".into(), Value::Object(summary));
    m.insert(
        "crr".into(),
        serde_json::to_value(params).map_err(|e| CliError::Encode(e.to_string()))?,
    );
    Ok(Outputs {
        summary: Value::Object(m),
        rows: node_rows(model, &s, &star, None, None),
    })
}

/// Runs one command on a parsed config without touching the filesystem.
pub fn execute(command: &Command, config: &RunConfig) -> Result<Outputs, CliError> {
    let model = config.model()?;
    match command {
        Command::Solve(_) => solve_command(&model),
        Command::Oracle { random, .. } => oracle_command(&model, config, *random),
        Command::Decompose(_) => decompose_command(&model),
        Command::Price(_) => price_command(&model),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
    {
        // Already initialised when called twice in one process; keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    let common = cli.command.common();
    let result = fs::read_to_string(&common.config)
        .map_err(|source| CliError::Io {
            path: common.config.clone(),
            source,
        })
        .and_then(|text| {
            RunConfig::from_json(&text).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", common.config.display())),
                other => other,
            })
        })
        .and_then(|config| execute(&cli.command, &config))
        .and_then(|out| out.write(&common.out));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("robust-snell: {e}");
            e.exit_code()
        }
    }
}
