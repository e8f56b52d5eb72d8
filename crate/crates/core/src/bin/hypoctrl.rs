#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hypoctrl::config::ExperimentConfig;
use hypoctrl::estimator::{monte_carlo, select_weight, InitPolicy, McSetup};
use hypoctrl::hypo::{h1_rank_check, lag_graph, probe_states, RANK_TOL};
use hypoctrl::models::{benchmark, model_by_id, Benchmark};
use hypoctrl::simulate::{read_observations_csv, simulate, write_csv};
use hypoctrl::{Error, ModelSpec, Params, Result, Vector};

#[derive(Parser, Debug)]
#[command(name = "hypoctrl", version, about = "Simulate and fit partially observed hypoelliptic SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a trajectory and write it as CSV (plus a JSON sidecar).
    Simulate(SimulateArgs),
    /// Estimate parameters from an observation CSV.
    Estimate(EstimateArgs),
    /// Monte Carlo benchmark: simulate, estimate, aggregate.
    Mc(McArgs),
    /// Report noise-propagation lags and the rank condition.
    CheckHypo(CheckArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model id (cyclic, fhn, synaptic, ou).
    #[arg(long)]
    model: Option<String>,
    /// Parameter values, `name=value,...`.
    #[arg(long)]
    params: Option<String>,
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Initial state, `v1,v2,...`.
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    common: Common,
    /// Observation CSV with a `t` column.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Columns holding the observations, by name or 0-based index.
    #[arg(long)]
    obs_cols: Option<String>,
    #[arg(long)]
    w_grid: Option<String>,
    /// Starting parameters, `name=value,...`.
    #[arg(long)]
    init: Option<String>,
    /// Known initial state; without it the initial state is profiled.
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
    #[arg(long)]
    profile_z0: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    w_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
    #[arg(long)]
    profile_z0: bool,
    /// Full JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table CSV (stdout when absent).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Leave wall-clock columns out of the table.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    z0: Option<String>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Mc(a) => cmd_mc(a),
        Command::CheckHypo(a) => cmd_check_hypo(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("expected name=value, got `{item}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("`{}` is not a number", v.trim())))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Input(format!("`{s}` is not a number"))))
        .collect()
}

struct Context {
    cfg: ExperimentConfig,
    model: ModelSpec,
    bench: Option<Benchmark>,
    params_given: BTreeMap<String, f64>,
    seed: u64,
}

fn context(common: &Common) -> Result<Context> {
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let id = common
        .model
        .clone()
        .or_else(|| cfg.model.clone())
        .ok_or_else(|| Error::Input("--model is required".into()))?;
    let model = model_by_id(&id, &cfg.constants)?;
    let mut params_given = cfg.params.clone();
    if let Some(p) = &common.params {
        params_given.extend(parse_kv(p)?);
    }
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    Ok(Context { bench: benchmark(&id), cfg, model, params_given, seed })
}

impl Context {
    /// Given values over the built-in defaults; zero allowed for positive entries.
    fn true_params(&self) -> Result<Params> {
        self.model.layout().params_from_map_closed(&self.params_given, self.bench.as_ref().map(|b| &b.truth))
    }

    fn z0(&self, flag: &Option<String>, section: &Option<Vec<f64>>) -> Result<Vector> {
        let d = self.model.dims().d();
        let v = match (flag, section) {
            (Some(s), _) => Vector::from_vec(parse_list(s)?),
            (None, Some(v)) => Vector::from_vec(v.clone()),
            (None, None) => self.bench.as_ref().map(|b| b.z0.clone()).unwrap_or_else(|| Vector::zeros(d)),
        };
        if v.len() != d {
            return Err(Error::Input(format!("z0 must have {d} entries, got {}", v.len())));
        }
        Ok(v)
    }

    fn t_and_n(&self, t: Option<f64>, n: Option<usize>, st: Option<f64>, sn: Option<usize>) -> Result<(f64, usize)> {
        let t = t.or(st).or(self.bench.as_ref().map(|b| b.t_end)).unwrap_or(10.0);
        let n = n.or(sn).or(self.bench.as_ref().map(|b| b.n)).unwrap_or(1000);
        if n == 0 {
            return Err(Error::Input("n must be >= 1".into()));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Input(format!("T must be > 0, got {t}")));
        }
        Ok((t, n))
    }

    fn weights(&self, flag: &Option<String>, section: &Option<Vec<f64>>) -> Result<Vec<f64>> {
        let w = match (flag, section) {
            (Some(s), _) => parse_list(s)?,
            (None, Some(v)) => v.clone(),
            (None, None) => self
                .bench
                .as_ref()
                .map(|b| b.weights.clone())
                .ok_or_else(|| Error::Input("--w-grid is required".into()))?,
        };
        if w.is_empty() {
            return Err(Error::Input("weight grid is empty".into()));
        }
        Ok(w)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => {
            let mut f = create(p)?;
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> std::result::Result<(), Failure> {
    let ctx = context(&a.common)?;
    let sec = &ctx.cfg.simulate;
    let (t_end, n) = ctx.t_and_n(a.t_end, a.n, sec.t_end, sec.n)?;
    let psi = ctx.true_params()?;
    let z0 = ctx.z0(&a.z0, &sec.z0)?;
    let traj = simulate(ctx.model.as_ref(), &psi, &z0, t_end, n, ctx.seed)?;
    let out = a.out.clone().or_else(|| sec.out.clone());
    match &out {
        Some(p) => {
            let mut f = create(p)?;
            write_csv(&traj, &mut f)?;
            f.flush().map_err(Error::from)?;
            let sidecar = json!({
                "model": ctx.model.id(),
                "params": ctx.model.layout().to_map(&psi),
                "constants": ctx.cfg.constants,
                "T": t_end,
                "n": n,
                "dt": traj.dt(),
                "seed": ctx.seed,
                "z0": z0.as_slice(),
                "csv": p.file_name().map(|s| s.to_string_lossy().into_owned()),
            });
            write_json(&sidecar, Some(&p.with_extension("json")))?;
        }
        None => {
            let stdout = io::stdout();
            write_csv(&traj, stdout.lock())?;
        }
    }
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> std::result::Result<(), Failure> {
    let ctx = context(&a.common)?;
    let sec = &ctx.cfg.estimate;
    let data = a
        .data
        .clone()
        .or_else(|| sec.data.clone())
        .ok_or_else(|| Error::Input("--data is required".into()))?;
    let file = File::open(&data).map_err(|e| Error::Input(format!("cannot open {}: {e}", data.display())))?;
    let cols: Option<Vec<String>> = match (&a.obs_cols, &sec.obs_cols) {
        (Some(s), _) => Some(s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect()),
        (None, Some(v)) => Some(v.clone()),
        (None, None) => None,
    };
    let obs = read_observations_csv(file, cols.as_deref())?;
    let d_o = ctx.model.dims().d_o;
    if obs.observations.first().map(|y| y.len()) != Some(d_o) {
        return Err(Error::Input(format!(
            "model `{}` observes {d_o} column(s); data provides {:?}",
            ctx.model.id(),
            obs.columns
        ))
        .into());
    }
    let dt = obs.dt()?;
    let weights = ctx.weights(&a.w_grid, &sec.w_grid)?;

    let mut init_map = ctx.params_given.clone();
    init_map.extend(sec.init.clone());
    if let Some(s) = &a.init {
        init_map.extend(parse_kv(s)?);
    }
    if init_map.is_empty() && ctx.bench.is_some() {
        log::warn!("no starting parameters given; starting from the built-in reference values");
    }
    let init = ctx.model.layout().params_from_map(&init_map, ctx.bench.as_ref().map(|b| &b.truth))?;

    let profile = a.profile_z0 || sec.profile_z0.unwrap_or(false) || (a.z0.is_none() && sec.z0.is_none());
    let z0 = if profile { None } else { Some(ctx.z0(&a.z0, &sec.z0)?) };
    let opts = ctx.cfg.estimator_options();
    let result = select_weight(ctx.model.as_ref(), &obs.observations, dt, &weights, &init, &opts, z0.as_ref())?;
    let out = a.out.clone().or_else(|| sec.out.clone());
    write_json(&result, out.as_deref())?;
    Ok(())
}

fn cmd_mc(a: McArgs) -> std::result::Result<(), Failure> {
    let ctx = context(&a.common)?;
    let sec = &ctx.cfg.mc;
    let (t_end, n) = ctx.t_and_n(a.t_end, a.n, sec.t_end, sec.n)?;
    let trials = a.trials.or(sec.trials).unwrap_or(1);
    if trials == 0 {
        return Err(Error::Input("trials must be >= 1".into()).into());
    }
    let truth = ctx.model.layout().params_from_map(&ctx.params_given, ctx.bench.as_ref().map(|b| &b.truth))?;
    let z0 = ctx.z0(&a.z0, &sec.z0)?;
    let profile = a.profile_z0 || sec.profile_z0.or(ctx.bench.as_ref().map(|b| b.profile_z0)).unwrap_or(false);
    let setup = McSetup {
        t_end,
        n,
        weights: ctx.weights(&a.w_grid, &sec.w_grid)?,
        trials,
        seed0: ctx.seed,
        profile_z0: profile,
        init: InitPolicy::Perturb(sec.init_perturbation.unwrap_or(0.5)),
        threads: sec.threads,
    };
    let report = monte_carlo(ctx.model.as_ref(), &truth, &z0, &setup, &ctx.cfg.estimator_options())?;
    if let Some(p) = a.out.clone().or_else(|| sec.out.clone()) {
        write_json(&report, Some(&p))?;
    }
    let table = report.table_csv(!(a.no_timing || sec.no_timing.unwrap_or(false)));
    match a.table.clone().or_else(|| sec.table.clone()) {
        Some(p) => {
            let mut f = create(&p)?;
            f.write_all(table.as_bytes()).map_err(Error::from)?;
            f.flush().map_err(Error::from)?;
        }
        None => print!("{table}"),
    }
    if report.failures == report.trials {
        return Err(Failure::Numerical(format!("all {} trials failed", report.trials)));
    }
    Ok(())
}

fn cmd_check_hypo(a: CheckArgs) -> std::result::Result<(), Failure> {
    let ctx = context(&a.common)?;
    let sec = &ctx.cfg.check_hypo;
    let psi = ctx.true_params()?;
    let d = ctx.model.dims().d();
    let bounds = ctx.bench.as_ref().map(|b| b.probe_box.clone()).unwrap_or_else(|| vec![(-3.0, 3.0); d]);
    let probes = probe_states(&bounds, sec.probes.unwrap_or(50), ctx.seed);
    let mut report = lag_graph(ctx.model.as_ref(), &psi, &probes)?;
    if let Some(m) = ctx.cfg.solver.m_b {
        report.m_b = m;
    }
    let (t_end, n) = ctx.t_and_n(a.t_end, a.n, sec.t_end, sec.n)?;
    let z0 = ctx.z0(&a.z0, &sec.z0)?;
    let traj = simulate(ctx.model.as_ref(), &psi, &z0, t_end, n, ctx.seed)?;
    report.h1_min_singular_value = Some(h1_rank_check(ctx.model.as_ref(), &psi, &traj, report.m_b)?);
    write_json(&report, None)?;
    if !report.connected() {
        let l = report.m_l.iter().position(Option::is_none).unwrap_or(0);
        return Err(Error::Connexity(l).into());
    }
    if !report.rank_ok() {
        return Err(Failure::Numerical(format!(
            "rank condition fails: smallest singular value {:e} <= {RANK_TOL:e}",
            report.h1_min_singular_value.unwrap_or(0.0)
        )));
    }
    Ok(())
}
