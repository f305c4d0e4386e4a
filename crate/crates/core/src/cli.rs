//! The `relloc` experiment runner.
//!
//! ```text
//! relloc analyze|simulate|compare|sweep [--config <file>] [--key value ...] --out <dir>
//! ```
//!
//! Configuration is a flat `key = value` file; any key can also be given on
//! the command line as `--key value` (or `--key=value`), which wins over the
//! file. `--graph-file <path>` is shorthand for `graph.family = file` plus
//! `graph.path`. Recognized keys:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `graph.family` | `cycle` | `cycle`, `path`, `complete`, `torus`, `erdos_renyi`, `file` |
//! | `graph.n` | `160` | node count (cycle, path, complete, erdos_renyi) |
//! | `graph.rows`, `graph.cols` | | torus dimensions |
//! | `graph.p` | | Erdős–Rényi edge probability |
//! | `graph.seed` | `seed` | Erdős–Rényi seed |
//! | `graph.path` | | edge-list file for `file` |
//! | `sigma`, `nu` | `1`, `20` | noise and prior standard deviations |
//! | `x0` | `0` | prior mean: one value for every node or a comma list |
//! | `tau` | `1/(d_max + γ)` | step size |
//! | `tau_baseline` | `tau` | baseline step size |
//! | `enforce_assumption` | `true` | reject `tau > 1/(d_max + γ)` |
//! | `epsilon` | `0.01` | stopping-time tolerance |
//! | `horizon` | `6000` | last iteration index `T` |
//! | `trials` | `100` | Monte Carlo realizations |
//! | `samples` | `5` | per-realization curves written (at most 20) |
//! | `seed` | `1` | base RNG seed |
//! | `out` | | output directory (same as `--out`) |
//! | `sweep.family` | `graph.family` | comma list of families for `sweep` |
//! | `sweep.n` | `10,40,160,640` | comma list of sizes for `sweep` (torus: perfect squares) |
//! | `sweep.epsilon` | `epsilon` | comma list of tolerances for `sweep` |
//!
//! Every CSV starts with `# `-prefixed lines recording the resolved
//! configuration, then a header row. Floats are written with 17 significant
//! digits so files parse back to the exact in-memory values.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{
    alpha, asymptotic_mse, closed_form_mse, q_spectrum, stopping_time_bound, stopping_time_exact,
    tightest_intermediate_bound, MseCurve,
};
use crate::error::Error;
use crate::graph::{
    build_complete, build_cycle, build_erdos_renyi, build_path, build_torus_grid, Graph,
};
use crate::montecarlo::{EmpiricalCurve, MonteCarlo, MAX_RETAINED};
use crate::problem::ProblemSpec;
use crate::solver::{default_tau, SolverConfig};

pub const THREADS_ENV: &str = "RELLOC_THREADS";

pub const USAGE: &str = "usage: relloc <analyze|simulate|compare|sweep> [--config <file>] [--graph-file <path>] [--key value ...] --out <dir>";

const KNOWN_KEYS: &[&str] = &[
    "graph.family",
    "graph.n",
    "graph.rows",
    "graph.cols",
    "graph.p",
    "graph.seed",
    "graph.path",
    "sigma",
    "nu",
    "x0",
    "tau",
    "tau_baseline",
    "enforce_assumption",
    "epsilon",
    "horizon",
    "trials",
    "samples",
    "seed",
    "out",
    "sweep.family",
    "sweep.n",
    "sweep.epsilon",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Numerical failures keep their own class; anything else is blamed on `field`.
    fn from_core(field: &str, e: Error) -> Self {
        match e {
            Error::NumericalFailure(_) => CliError::Numerical(e),
            other => CliError::config(field, other.to_string()),
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Simulate,
    Compare,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "analyze" => Ok(Command::Analyze),
            "simulate" => Ok(Command::Simulate),
            "compare" => Ok(Command::Compare),
            "sweep" => Ok(Command::Sweep),
            other => Err(CliError::config("command", format!("unknown command `{other}`\n{USAGE}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFamily {
    Cycle,
    Path,
    Complete,
    Torus,
    ErdosRenyi,
    File,
}

impl GraphFamily {
    pub fn name(self) -> &'static str {
        match self {
            GraphFamily::Cycle => "cycle",
            GraphFamily::Path => "path",
            GraphFamily::Complete => "complete",
            GraphFamily::Torus => "torus",
            GraphFamily::ErdosRenyi => "erdos_renyi",
            GraphFamily::File => "file",
        }
    }
}

impl FromStr for GraphFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cycle" => Ok(GraphFamily::Cycle),
            "path" => Ok(GraphFamily::Path),
            "complete" => Ok(GraphFamily::Complete),
            "torus" => Ok(GraphFamily::Torus),
            "erdos_renyi" => Ok(GraphFamily::ErdosRenyi),
            "file" => Ok(GraphFamily::File),
            other => Err(format!("unknown graph family `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub family: GraphFamily,
    pub n: usize,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub p: Option<f64>,
    pub seed: u64,
    pub path: Option<PathBuf>,
}

impl GraphConfig {
    /// Builds the configured graph.
    pub fn build(&self) -> Result<Graph, CliError> {
        self.build_with(self.family, self.n)
    }

    /// Builds a graph of `family` with `n` nodes, reusing the other settings.
    fn build_with(&self, family: GraphFamily, n: usize) -> Result<Graph, CliError> {
        let built = match family {
            GraphFamily::Cycle => build_cycle(n),
            GraphFamily::Path => build_path(n),
            GraphFamily::Complete => build_complete(n),
            GraphFamily::Torus => {
                let rows = self.rows.ok_or_else(|| CliError::config("graph.rows", "required for torus"))?;
                let cols = self.cols.ok_or_else(|| CliError::config("graph.cols", "required for torus"))?;
                build_torus_grid(rows, cols)
            }
            GraphFamily::ErdosRenyi => {
                let p = self.p.ok_or_else(|| CliError::config("graph.p", "required for erdos_renyi"))?;
                build_erdos_renyi(n, p, self.seed)
            }
            GraphFamily::File => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| CliError::config("graph.path", "required for file"))?;
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::config("graph.path", format!("{}: {e}", path.display())))?;
                return Graph::from_edge_list(&text).map_err(|e| CliError::from_core("graph.path", e));
            }
        };
        let field = match family {
            GraphFamily::Torus => "graph.rows",
            GraphFamily::ErdosRenyi => "graph.p",
            _ => "graph.n",
        };
        built.map_err(|e| CliError::from_core(field, e))
    }

    fn describe(&self, family: GraphFamily, g: &Graph) -> String {
        format!("{}(N={}, M={})", family.name(), g.node_count(), g.edge_count())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorMean {
    Constant(f64),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub families: Vec<GraphFamily>,
    pub sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub sigma: f64,
    pub nu: f64,
    pub x0: PriorMean,
    pub tau: Option<f64>,
    pub tau_baseline: Option<f64>,
    pub enforce_assumption: bool,
    pub epsilon: f64,
    pub horizon: usize,
    pub trials: usize,
    pub samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub sweep: SweepConfig,
    /// Trial parallelism cap; taken from `RELLOC_THREADS`, never from files.
    pub threads: Option<usize>,
    raw: BTreeMap<String, String>,
}

/// Raw `key = value` settings before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses a config file body. Blank lines and `#` comments are ignored;
    /// repeated keys are an error.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(&format!("line {}", i + 1), format!("expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            if raw.entries.contains_key(key) {
                return Err(CliError::config(key, format!("repeated on line {}", i + 1)));
            }
            raw.set(key, value.trim())?;
        }
        Ok(raw)
    }

    /// Sets `key`, replacing any earlier value. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::config(key, "unknown key"));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Result<Option<f64>, CliError> {
        match self.value::<f64>(key)?.or(default) {
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                Err(CliError::config(key, format!("must be a positive number, got {v}")))
            }
            other => Ok(other),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse()
                    .map_err(|_| CliError::config(key, format!("cannot parse list item `{item}`")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Validates and fills defaults.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let family = match self.get("graph.family") {
            None => GraphFamily::Cycle,
            Some(s) => s.parse().map_err(|m: String| CliError::config("graph.family", m))?,
        };
        let seed: u64 = self.value("seed")?.unwrap_or(1);
        let graph = GraphConfig {
            family,
            n: self.value("graph.n")?.unwrap_or(160),
            rows: self.value("graph.rows")?,
            cols: self.value("graph.cols")?,
            p: self.value("graph.p")?,
            seed: self.value("graph.seed")?.unwrap_or(seed),
            path: self.get("graph.path").map(PathBuf::from),
        };
        let sigma = self.positive("sigma", Some(1.0))?.unwrap();
        let nu = self.positive("nu", Some(20.0))?.unwrap();
        let x0 = match self.get("x0") {
            None => PriorMean::Constant(0.0),
            Some(_) => {
                let values: Vec<f64> = self.list("x0")?.unwrap();
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::config("x0", "values must be finite"));
                }
                if values.len() == 1 {
                    PriorMean::Constant(values[0])
                } else {
                    PriorMean::Values(values)
                }
            }
        };
        let epsilon = self.positive("epsilon", Some(0.01))?.unwrap();
        let enforce_assumption = match self.get("enforce_assumption") {
            None | Some("true") => true,
            Some("false") => false,
            Some(other) => {
                return Err(CliError::config(
                    "enforce_assumption",
                    format!("expected true or false, got `{other}`"),
                ))
            }
        };
        let sweep = SweepConfig {
            families: match self.get("sweep.family") {
                None => vec![family],
                Some(v) => v
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|m: String| CliError::config("sweep.family", m)))
                    .collect::<Result<_, _>>()?,
            },
            sizes: self.list("sweep.n")?.unwrap_or_else(|| vec![10, 40, 160, 640]),
            epsilons: self.list("sweep.epsilon")?.unwrap_or_else(|| vec![epsilon]),
        };
        if sweep.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(CliError::config("sweep.epsilon", "all values must be positive"));
        }
        if let Some(p) = graph.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(CliError::config("graph.p", format!("must lie in (0, 1], got {p}")));
            }
        }
        let samples: usize = self.value("samples")?.unwrap_or(5);
        if samples > MAX_RETAINED {
            return Err(CliError::config("samples", format!("at most {MAX_RETAINED}")));
        }
        Ok(ExperimentConfig {
            graph,
            sigma,
            nu,
            x0,
            tau: self.positive("tau", None)?,
            tau_baseline: self.positive("tau_baseline", None)?,
            enforce_assumption,
            epsilon,
            horizon: self.value("horizon")?.unwrap_or(6000),
            trials: self.value("trials")?.unwrap_or(100),
            samples,
            seed,
            out: self.get("out").map(PathBuf::from),
            sweep,
            threads: None,
            raw: self.entries.clone(),
        })
    }
}

impl ExperimentConfig {
    /// Reads `RELLOC_THREADS` into [`threads`](Self::threads).
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            let k: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| CliError::config(THREADS_ENV, format!("expected a positive integer, got `{v}`")))?;
            self.threads = Some(k);
        }
        Ok(())
    }

    fn prior_mean(&self, n: usize) -> Result<Vec<f64>, CliError> {
        match &self.x0 {
            PriorMean::Constant(c) => Ok(vec![*c; n]),
            PriorMean::Values(v) if v.len() == n => Ok(v.clone()),
            PriorMean::Values(v) => Err(CliError::config(
                "x0",
                format!("{} values given for {n} nodes", v.len()),
            )),
        }
    }

    fn gamma(&self) -> f64 {
        crate::problem::gamma(self.sigma, self.nu)
    }

    fn solver_config(&self, g: &Graph, warnings: &mut Vec<String>) -> Result<SolverConfig, CliError> {
        let gamma = self.gamma();
        let tau = self.tau.unwrap_or_else(|| default_tau(g, gamma));
        let mut cfg = SolverConfig::new(tau, gamma)
            .map_err(|e| CliError::from_core("tau", e))?
            .with_enforcement(self.enforce_assumption);
        if let Some(tb) = self.tau_baseline {
            cfg = cfg.with_tau_baseline(tb).map_err(|e| CliError::from_core("tau_baseline", e))?;
        }
        cfg.check(g).map_err(|e| CliError::from_core("tau", e))?;
        if !cfg.assumption_holds(g) {
            warnings.push(format!(
                "tau = {tau} exceeds 1/(d_max + gamma) = {}; convergence is not guaranteed",
                default_tau(g, gamma)
            ));
        }
        Ok(cfg)
    }

    fn problem(&self, g: Graph) -> Result<ProblemSpec, CliError> {
        let x0 = self.prior_mean(g.node_count())?;
        ProblemSpec::new(g, x0, self.nu, self.sigma).map_err(|e| CliError::from_core("x0", e))
    }

    /// `# `-prefixed lines describing the resolved configuration.
    fn header(&self, command: Command, extra: &[(&str, String)]) -> String {
        let mut out = format!("# relloc {}\n", command.name());
        let mut resolved = self.raw.clone();
        resolved.remove("out");
        let defaults = [
            ("graph.family", self.graph.family.name().to_string()),
            ("sigma", fmt_f64(self.sigma)),
            ("nu", fmt_f64(self.nu)),
            ("epsilon", fmt_f64(self.epsilon)),
            ("horizon", self.horizon.to_string()),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("enforce_assumption", self.enforce_assumption.to_string()),
        ];
        for (k, v) in defaults {
            resolved.entry(k.to_string()).or_insert(v);
        }
        for (k, v) in &resolved {
            let _ = writeln!(out, "# {k} = {v}");
        }
        for (k, v) in extra {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}

/// Splits `args` (without the program name) into a command and its configuration.
pub fn parse_args<S: AsRef<str>>(args: &[S]) -> Result<(Command, ExperimentConfig), CliError> {
    let mut it = args.iter().map(AsRef::as_ref);
    let command: Command = it
        .next()
        .ok_or_else(|| CliError::config("command", format!("missing command\n{USAGE}")))?
        .parse()?;
    let mut config_file = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    while let Some(arg) = it.next() {
        let flag = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::config(arg, format!("expected a `--key` flag\n{USAGE}")))?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::config(flag, "missing value"))?;
                (flag.to_string(), v.to_string())
            }
        };
        if key == "config" {
            config_file = Some(PathBuf::from(value));
        } else if key == "graph-file" {
            overrides.push(("graph.family".into(), "file".into()));
            overrides.push(("graph.path".into(), value));
        } else {
            overrides.push((key, value));
        }
    }
    let mut raw = match &config_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    for (k, v) in &overrides {
        raw.set(k, v)?;
    }
    Ok((command, raw.resolve()?))
}

/// Files written and warnings raised by a command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Runs `command` writing into `config.out`.
pub fn execute(command: Command, config: &ExperimentConfig) -> Result<Report, CliError> {
    let out = config
        .out
        .clone()
        .ok_or_else(|| CliError::config("out", "an output directory is required (--out)"))?;
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    match command {
        Command::Analyze => cmd_analyze(config, &out),
        Command::Simulate => cmd_simulate(config, &out),
        Command::Compare => cmd_compare(config, &out),
        Command::Sweep => cmd_sweep(config, &out),
    }
}

/// Theory quantities shared by several commands.
struct Theory {
    curve: MseCurve,
    h_inf: f64,
    alpha: f64,
    t_eps: usize,
    intermediate: f64,
    bound: f64,
}

fn theory(config: &ExperimentConfig, g: &Graph, cfg: &SolverConfig, horizon: usize) -> Result<Theory, CliError> {
    let spectrum = g.spectrum().map_err(CliError::Numerical)?;
    let qs = q_spectrum(&spectrum, cfg.tau, cfg.gamma).map_err(|e| CliError::from_core("tau", e))?;
    let curve = closed_form_mse(&qs, config.sigma, config.nu, horizon)
        .map_err(|e| CliError::from_core("sigma", e))?;
    let a = alpha(cfg.tau, cfg.gamma);
    let t_eps = stopping_time_exact(&qs, config.sigma, config.nu, config.epsilon)
        .map_err(|e| CliError::from_core("epsilon", e))?;
    Ok(Theory {
        curve,
        h_inf: asymptotic_mse(&spectrum, config.sigma, cfg.gamma),
        alpha: a,
        t_eps,
        intermediate: tightest_intermediate_bound(a, config.epsilon),
        bound: stopping_time_bound(a, config.epsilon),
    })
}

fn summary_lines(command: Command, description: &str, cfg: &SolverConfig, th: &Theory, epsilon: f64) -> Vec<(String, String)> {
    vec![
        ("command".into(), command.name().into()),
        ("graph".into(), description.into()),
        ("gamma".into(), fmt_f64(cfg.gamma)),
        ("tau".into(), fmt_f64(cfg.tau)),
        ("alpha".into(), fmt_f64(th.alpha)),
        ("epsilon".into(), fmt_f64(epsilon)),
        ("H_inf".into(), fmt_f64(th.h_inf)),
        ("t_eps_exact".into(), th.t_eps.to_string()),
        ("intermediate_bound".into(), fmt_f64(th.intermediate)),
        ("universal_bound".into(), fmt_f64(th.bound)),
    ]
}

fn render_summary(lines: &[(String, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn cmd_analyze(config: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::default();
    let g = config.graph.build()?;
    let description = config.graph.describe(config.graph.family, &g);
    // The curve does not depend on x0, but a malformed one is still an error.
    config.prior_mean(g.node_count())?;
    let cfg = config.solver_config(&g, &mut report.warnings)?;
    let th = theory(config, &g, &cfg, config.horizon)?;
    let threshold = (1.0 + config.epsilon) * th.h_inf;

    let mut csv = config.header(Command::Analyze, &[("graph.resolved", description.clone())]);
    csv.push_str("t,H_t,H_inf,threshold\n");
    for (t, h) in th.curve.values.iter().enumerate() {
        let _ = writeln!(csv, "{t},{},{},{}", fmt_f64(*h), fmt_f64(th.h_inf), fmt_f64(threshold));
    }
    report.files.push(write_atomic(&out.join("theory.csv"), &csv)?);
    let summary = render_summary(&summary_lines(Command::Analyze, &description, &cfg, &th, config.epsilon));
    report.files.push(write_atomic(&out.join("summary.txt"), &summary)?);
    Ok(report)
}

pub fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::default();
    let g = config.graph.build()?;
    let description = config.graph.describe(config.graph.family, &g);
    let cfg = config.solver_config(&g, &mut report.warnings)?;
    let th = theory(config, &g, &cfg, config.horizon)?;
    let spec = config.problem(g)?;

    let empirical = if config.trials == 0 {
        report
            .warnings
            .push("trials = 0: writing closed-form columns only".to_string());
        None
    } else {
        let mc = MonteCarlo::new(config.horizon, config.trials, config.seed)
            .retain(config.samples)
            .threads(config.threads);
        Some(
            mc.empirical_mse(&spec, &cfg, crate::solver::Algorithm::Regularized)
                .map_err(|e| CliError::from_core("tau", e))?,
        )
    };

    let mut csv = config.header(Command::Simulate, &[("graph.resolved", description)]);
    let mut columns = vec!["t".to_string(), "H_t".to_string()];
    if let Some(e) = &empirical {
        columns.push("mean".into());
        columns.push("stderr".into());
        columns.extend(sample_columns("sample", e));
    }
    csv.push_str(&columns.join(","));
    csv.push('\n');
    for (t, h) in th.curve.values.iter().enumerate() {
        let mut row = vec![t.to_string(), fmt_f64(*h)];
        if let Some(e) = &empirical {
            row.push(fmt_f64(e.mean[t]));
            row.push(fmt_f64(e.stderr[t]));
            row.extend(sample_cells(e, t));
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    report.files.push(write_atomic(&out.join("empirical.csv"), &csv)?);
    Ok(report)
}

pub fn cmd_compare(config: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::default();
    if config.trials == 0 {
        return Err(CliError::config("trials", "compare needs at least one trial"));
    }
    let g = config.graph.build()?;
    let description = config.graph.describe(config.graph.family, &g);
    let cfg = config.solver_config(&g, &mut report.warnings)?;
    cfg.check_baseline(&g).map_err(|e| CliError::from_core("tau_baseline", e))?;
    let th = theory(config, &g, &cfg, 0)?;
    let spec = config.problem(g)?;
    let mc = MonteCarlo::new(config.horizon, config.trials, config.seed)
        .retain(config.samples)
        .threads(config.threads);
    let (reg, base) = mc
        .compare_algorithms(&spec, &cfg)
        .map_err(|e| CliError::from_core("tau", e))?;

    let mut csv = config.header(Command::Compare, &[("graph.resolved", description.clone())]);
    let mut columns: Vec<String> = [
        "t",
        "mean_regularized",
        "stderr_regularized",
        "mean_baseline",
        "stderr_baseline",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    columns.extend(sample_columns("regularized_sample", &reg));
    columns.extend(sample_columns("baseline_sample", &base));
    csv.push_str(&columns.join(","));
    csv.push('\n');
    for t in 0..=config.horizon {
        let mut row = vec![
            t.to_string(),
            fmt_f64(reg.mean[t]),
            fmt_f64(reg.stderr[t]),
            fmt_f64(base.mean[t]),
            fmt_f64(base.stderr[t]),
        ];
        row.extend(sample_cells(&reg, t));
        row.extend(sample_cells(&base, t));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    report.files.push(write_atomic(&out.join("compare.csv"), &csv)?);

    let (base_t, base_min) = base.argmin();
    let (reg_t, reg_min) = reg.argmin();
    let mut lines = summary_lines(Command::Compare, &description, &cfg, &th, config.epsilon);
    lines.extend([
        ("tau_baseline".to_string(), fmt_f64(cfg.baseline_tau())),
        ("trials".to_string(), config.trials.to_string()),
        ("horizon".to_string(), config.horizon.to_string()),
        ("baseline_min_t".to_string(), base_t.to_string()),
        ("baseline_min_value".to_string(), fmt_f64(base_min)),
        ("baseline_final_value".to_string(), fmt_f64(base.mean[config.horizon])),
        ("regularized_min_t".to_string(), reg_t.to_string()),
        ("regularized_min_value".to_string(), fmt_f64(reg_min)),
        ("regularized_final_value".to_string(), fmt_f64(reg.mean[config.horizon])),
    ]);
    report.files.push(write_atomic(&out.join("summary.txt"), &render_summary(&lines))?);
    Ok(report)
}

/// One `sweep.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub family: GraphFamily,
    pub nodes: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub epsilon: f64,
    pub tau: f64,
    pub alpha: f64,
    pub h_inf: f64,
    pub t_eps: usize,
    pub intermediate_bound: f64,
    pub bound: f64,
}

/// Theory for every `(family, n, epsilon)` in the sweep, in that nesting order.
pub fn sweep_rows(config: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<Vec<SweepRow>, CliError> {
    let mut graphs = Vec::new();
    for &family in &config.sweep.families {
        for &n in &config.sweep.sizes {
            let g = match family {
                GraphFamily::File => {
                    return Err(CliError::config("sweep.family", "file graphs cannot be swept"))
                }
                GraphFamily::Torus => {
                    let side = (n as f64).sqrt().round() as usize;
                    if side * side != n {
                        return Err(CliError::config("sweep.n", format!("torus sizes must be perfect squares, got {n}")));
                    }
                    let mut gc = config.graph.clone();
                    gc.rows = Some(side);
                    gc.cols = Some(side);
                    gc.build_with(family, n)
                        .map_err(|_| CliError::config("sweep.n", format!("cannot build a {side}x{side} torus")))?
                }
                _ => config.graph.build_with(family, n)?,
            };
            let cfg = config.solver_config(&g, warnings)?;
            graphs.push((family, g, cfg));
        }
    }
    let per_graph: Vec<Result<Vec<SweepRow>, CliError>> = graphs
        .par_iter()
        .map(|(family, g, cfg)| {
            let spectrum = g.spectrum().map_err(CliError::Numerical)?;
            let qs = q_spectrum(&spectrum, cfg.tau, cfg.gamma).map_err(|e| CliError::from_core("tau", e))?;
            let a = alpha(cfg.tau, cfg.gamma);
            let h_inf = asymptotic_mse(&spectrum, config.sigma, cfg.gamma);
            config
                .sweep
                .epsilons
                .iter()
                .map(|&eps| {
                    Ok(SweepRow {
                        family: *family,
                        nodes: g.node_count(),
                        edges: g.edge_count(),
                        max_degree: g.max_degree(),
                        epsilon: eps,
                        tau: cfg.tau,
                        alpha: a,
                        h_inf,
                        t_eps: stopping_time_exact(&qs, config.sigma, config.nu, eps)
                            .map_err(|e| CliError::from_core("sweep.epsilon", e))?,
                        intermediate_bound: tightest_intermediate_bound(a, eps),
                        bound: stopping_time_bound(a, eps),
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_graph {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn cmd_sweep(config: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let mut report = Report::default();
    let rows = sweep_rows(config, &mut report.warnings)?;
    let mut csv = config.header(Command::Sweep, &[]);
    csv.push_str("family,N,M,d_max,epsilon,tau,alpha,H_inf,t_eps,intermediate_bound,bound\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.family.name(),
            r.nodes,
            r.edges,
            r.max_degree,
            fmt_f64(r.epsilon),
            fmt_f64(r.tau),
            fmt_f64(r.alpha),
            fmt_f64(r.h_inf),
            r.t_eps,
            fmt_f64(r.intermediate_bound),
            fmt_f64(r.bound),
        );
    }
    report.files.push(write_atomic(&out.join("sweep.csv"), &csv)?);
    Ok(report)
}

fn sample_columns(prefix: &str, curve: &EmpiricalCurve) -> Vec<String> {
    let k = curve.realization_samples.as_ref().map_or(0, Vec::len);
    (0..k).map(|i| format!("{prefix}_{i}")).collect()
}

fn sample_cells(curve: &EmpiricalCurve, t: usize) -> Vec<String> {
    curve
        .realization_samples
        .iter()
        .flatten()
        .map(|c| fmt_f64(c[t]))
        .collect()
}

/// 17 significant digits in scientific notation; parses back bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// A parsed CSV written by this module.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    /// Header comment lines with the `# ` prefix removed.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut comments = Vec::new();
        let mut lines = text.lines();
        let header = loop {
            match lines.next() {
                Some(l) if l.starts_with('#') => {
                    comments.push(l.trim_start_matches('#').trim_start().to_string())
                }
                Some(l) => break l,
                None => return Err("no header row".into()),
            }
        };
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != columns.len() {
                return Err(format!("row {} has {} fields, expected {}", i + 1, row.len(), columns.len()));
            }
            rows.push(row);
        }
        Ok(Self { comments, columns, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }

    pub fn column_str(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Parses `key = value` lines of a `summary.txt`.
pub fn parse_summary(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
