//! Nested estimation: tracking solve inside a contrast minimization over the
//! parameters, inside a weight selection by the control-norm criterion.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrast::lagged_terms;
use crate::error::{Error, Result};
use crate::hypo::{lag_graph, probe_states};
use crate::model::{Params, SdeModel, Vector};
use crate::models::benchmark;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::simulate::simulate;
use crate::tracking::{solve_tracking, IterationOptions, TrackingSolution};

/// Objective value returned for infeasible or failed evaluations.
pub const SENTINEL: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorOptions {
    pub tracking: IterationOptions,
    /// Overrides the lag found by the drift-graph analysis.
    pub m_b: Option<usize>,
    /// Select the weight maximizing log K; `false` minimizes instead.
    pub maximize_k: bool,
    pub max_evals: usize,
    pub simplex_tol: f64,
    pub restarts: usize,
    /// Initial simplex step in log coordinates (positive parameters), and
    /// relative step for the others.
    pub simplex_step: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            tracking: IterationOptions::default(),
            m_b: None,
            maximize_k: true,
            max_evals: 500,
            simplex_tol: 1e-6,
            restarts: 1,
            simplex_step: 0.25,
        }
    }
}

impl EstimatorOptions {
    fn nelder_mead(&self) -> NelderMeadOptions {
        NelderMeadOptions { tol: self.simplex_tol, max_evals: self.max_evals, restarts: self.restarts }
    }
}

/// Contrast lag from the drift graph, probing the built-in box when the model
/// has one and `[-3, 3]^d` otherwise.
pub fn resolve_m_b(model: &dyn SdeModel, psi: &Params, opts: &EstimatorOptions) -> Result<usize> {
    if let Some(m) = opts.m_b {
        return Ok(m);
    }
    let d = model.dims().d();
    let bounds = benchmark(model.id())
        .filter(|b| b.probe_box.len() == d)
        .map(|b| b.probe_box)
        .unwrap_or_else(|| vec![(-3.0, 3.0); d]);
    let report = lag_graph(model, psi, &probe_states(&bounds, 50, 0))?;
    if let Some(l) = report.m_l.iter().position(Option::is_none) {
        return Err(Error::Connexity(l));
    }
    Ok(report.m_b)
}

/// Contrast along the tracking predictor at `psi`, or [`SENTINEL`] on any failure.
#[allow(clippy::too_many_arguments)]
pub fn middle_objective(
    model: &dyn SdeModel,
    psi: &Params,
    y: &[Vector],
    dt: f64,
    w: f64,
    opts: &IterationOptions,
    z0: Option<&Vector>,
    m_b: usize,
) -> f64 {
    if model.layout().validate(psi.as_slice()).is_err() {
        return SENTINEL;
    }
    let value = solve_tracking(model, psi, y, dt, w, opts, z0)
        .and_then(|sol| lagged_terms(model, psi, &sol.control.z_bar, y, dt, m_b))
        .map(|ev| ev.value);
    match value {
        Ok(v) if v.is_finite() && v < SENTINEL => v,
        _ => SENTINEL,
    }
}

#[derive(Clone, Debug)]
pub struct PsiFit {
    pub psi: Params,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Maps free parameters to unconstrained coordinates (log for positive ones).
struct Transform {
    base: Vec<f64>,
    free: Vec<usize>,
    log: Vec<bool>,
}

impl Transform {
    fn new(model: &dyn SdeModel, init: &Params) -> Self {
        let specs = model.layout().specs();
        let free = model.layout().free_indices();
        let log = free.iter().map(|&i| specs[i].positive).collect();
        Self { base: init.as_slice().to_vec(), free, log }
    }

    fn to_x(&self, psi: &[f64]) -> Vec<f64> {
        self.free.iter().zip(&self.log).map(|(&i, &lg)| if lg { psi[i].ln() } else { psi[i] }).collect()
    }

    fn to_psi(&self, x: &[f64]) -> Params {
        let mut p = self.base.clone();
        for ((&i, &lg), &v) in self.free.iter().zip(&self.log).zip(x) {
            p[i] = if lg { v.exp() } else { v };
        }
        Params(p)
    }
}

/// Minimizes the middle objective over the free parameters from `psi_init`.
#[allow(clippy::too_many_arguments)]
pub fn fit_psi(
    model: &dyn SdeModel,
    y: &[Vector],
    dt: f64,
    w: f64,
    psi_init: &Params,
    opts: &EstimatorOptions,
    z0: Option<&Vector>,
    m_b: usize,
) -> Result<PsiFit> {
    model.layout().validate(psi_init.as_slice())?;
    let tr = Transform::new(model, psi_init);
    let x0 = tr.to_x(psi_init.as_slice());
    let steps: Vec<f64> = x0
        .iter()
        .zip(&tr.log)
        .map(|(&x, &lg)| if lg { opts.simplex_step } else { opts.simplex_step * x.abs().max(0.1) })
        .collect();
    let mut f = |x: &[f64]| middle_objective(model, &tr.to_psi(x), y, dt, w, &opts.tracking, z0, m_b);
    let best = nelder_mead(&mut f, &x0, &steps, &opts.nelder_mead());
    if best.value >= SENTINEL {
        return Err(Error::Estimation(format!("every contrast evaluation failed at w = {w:e}")));
    }
    Ok(PsiFit { psi: tr.to_psi(&best.x), value: best.value, evals: best.evals, converged: best.converged })
}

/// `Σ_i [(d_U/2 − 1) log ‖ū_i‖² − ‖ū_i‖²/2]`. A zero row gives `−∞` unless `d_U = 2`.
pub fn k_criterion(u_bar: &[Vector], d_u: usize) -> f64 {
    let expo = d_u as f64 / 2.0 - 1.0;
    let mut total = 0.0;
    for u in u_bar {
        let s = u.norm_squared();
        if d_u == 2 {
            total -= s / 2.0;
        } else if s == 0.0 {
            return f64::NEG_INFINITY;
        } else {
            total += expo * s.ln() - s / 2.0;
        }
    }
    total
}

/// Controls entering the criterion: the last `m_B` are dropped because no
/// observation inside the horizon depends on them.
pub fn scored_controls(u_bar: &[Vector], m_b: usize) -> &[Vector] {
    &u_bar[..u_bar.len().saturating_sub(m_b)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KTableRow {
    pub w: f64,
    /// `null` when the criterion is not finite or the fit failed.
    #[serde(rename = "logK")]
    pub log_k: Option<f64>,
    pub psi: BTreeMap<String, f64>,
    pub contrast: Option<f64>,
    pub z0: Vec<f64>,
    pub mean_control_sq: Option<f64>,
    pub evaluations: usize,
    pub simplex_converged: bool,
    pub tracking_iterations: usize,
    pub tracking_converged: bool,
    pub wall_time_s: f64,
    pub error: Option<String>,
    /// Raw criterion, kept for ordering when it is `−∞`.
    #[serde(skip)]
    pub raw_log_k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub contrast_value: f64,
    pub m_b: usize,
    pub profile_z0: bool,
    pub maximize_k: bool,
    pub failed_weights: usize,
    pub overlapping_windows: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub model: String,
    pub psi_hat: BTreeMap<String, f64>,
    pub w_hat: f64,
    pub z0_hat: Vec<f64>,
    pub k_table: Vec<KTableRow>,
    pub diagnostics: Diagnostics,
    pub wall_time_s: f64,
}

impl EstimationResult {
    pub fn psi_params(&self, model: &dyn SdeModel) -> Result<Params> {
        model.layout().params_from_map(&self.psi_hat, None)
    }

    pub fn selected(&self) -> Option<&KTableRow> {
        self.k_table.iter().find(|r| r.w == self.w_hat)
    }
}

/// Picks the weight by the criterion; ties go to the smaller weight.
pub fn pick_weight(rows: &[(f64, f64)], maximize: bool) -> Option<f64> {
    let mut order: Vec<&(f64, f64)> = rows.iter().filter(|(_, k)| !k.is_nan()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, f64)> = None;
    for &&(w, k) in &order {
        let better = match best {
            None => true,
            Some((_, bk)) => (maximize && k > bk) || (!maximize && k < bk),
        };
        if better {
            best = Some((w, k));
        }
    }
    best.map(|(w, _)| w)
}

/// Tracking solve and scored controls at fixed parameters and weight.
#[allow(clippy::too_many_arguments)]
pub fn track_and_score(
    model: &dyn SdeModel,
    psi: &Params,
    y: &[Vector],
    dt: f64,
    w: f64,
    opts: &IterationOptions,
    z0: Option<&Vector>,
    m_b: usize,
) -> Result<(TrackingSolution, f64, f64)> {
    let sol = solve_tracking(model, psi, y, dt, w, opts, z0)?;
    let scored = scored_controls(&sol.control.u_bar, m_b);
    let log_k = k_criterion(scored, model.dims().d_u);
    let mean_sq = scored.iter().map(|u| u.norm_squared()).sum::<f64>() / scored.len().max(1) as f64;
    Ok((sol, log_k, mean_sq))
}

#[allow(clippy::too_many_arguments)]
fn fit_one_weight(
    model: &dyn SdeModel,
    y: &[Vector],
    dt: f64,
    w: f64,
    psi_init: &Params,
    opts: &EstimatorOptions,
    z0: Option<&Vector>,
    m_b: usize,
) -> (KTableRow, bool) {
    let start = Instant::now();
    let layout = model.layout();
    let mut row = KTableRow {
        w,
        log_k: None,
        psi: BTreeMap::new(),
        contrast: None,
        z0: Vec::new(),
        mean_control_sq: None,
        evaluations: 0,
        simplex_converged: false,
        tracking_iterations: 0,
        tracking_converged: false,
        wall_time_s: 0.0,
        error: None,
        raw_log_k: f64::NAN,
    };
    let mut overlapping = false;
    let outcome = fit_psi(model, y, dt, w, psi_init, opts, z0, m_b).and_then(|fit| {
        let (sol, log_k, mean_sq) = track_and_score(model, &fit.psi, y, dt, w, &opts.tracking, z0, m_b)?;
        overlapping = lagged_terms(model, &fit.psi, &sol.control.z_bar, y, dt, m_b).map(|e| e.overlapping)?;
        Ok((fit, sol, log_k, mean_sq))
    });
    match outcome {
        Ok((fit, sol, log_k, mean_sq)) => {
            row.psi = layout.to_map(&fit.psi);
            row.contrast = Some(fit.value);
            row.z0 = sol.control.z0_used.iter().copied().collect();
            row.raw_log_k = log_k;
            row.log_k = log_k.is_finite().then_some(log_k);
            row.mean_control_sq = Some(mean_sq);
            row.evaluations = fit.evals;
            row.simplex_converged = fit.converged;
            row.tracking_iterations = sol.iterations;
            row.tracking_converged = sol.converged;
        }
        Err(e) => {
            log::warn!("fit at w = {w:e} failed: {e}");
            row.error = Some(e.to_string());
        }
    }
    row.wall_time_s = start.elapsed().as_secs_f64();
    (row, overlapping)
}

/// Fits the parameters for every weight in `weights` and keeps the one chosen
/// by the control-norm criterion. `z0 = None` profiles the initial condition.
pub fn select_weight(
    model: &dyn SdeModel,
    y: &[Vector],
    dt: f64,
    weights: &[f64],
    psi_init: &Params,
    opts: &EstimatorOptions,
    z0: Option<&Vector>,
) -> Result<EstimationResult> {
    let start = Instant::now();
    if weights.is_empty() {
        return Err(Error::InvalidArgument("weight grid is empty".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!("weights must be finite and > 0, got {w}")));
    }
    model.layout().validate(psi_init.as_slice())?;
    let m_b = resolve_m_b(model, psi_init, opts)?;
    let n = y.len().saturating_sub(1);
    if n < m_b + 2 {
        return Err(Error::InvalidArgument(format!("need n >= m_B + 2 = {}, got {n}", m_b + 2)));
    }

    let rows: Vec<(KTableRow, bool)> = weights
        .par_iter()
        .map(|&w| fit_one_weight(model, y, dt, w, psi_init, opts, z0, m_b))
        .collect();
    let overlapping = rows.iter().any(|(_, o)| *o);
    let k_table: Vec<KTableRow> = rows.into_iter().map(|(r, _)| r).collect();
    let failed = k_table.iter().filter(|r| r.error.is_some()).count();
    let candidates: Vec<(f64, f64)> =
        k_table.iter().filter(|r| r.error.is_none()).map(|r| (r.w, r.raw_log_k)).collect();
    let w_hat = pick_weight(&candidates, opts.maximize_k).ok_or_else(|| {
        let reasons: Vec<String> = k_table.iter().filter_map(|r| r.error.clone()).collect();
        Error::Estimation(format!("no weight produced an estimate: {}", reasons.join("; ")))
    })?;
    let best = k_table.iter().find(|r| r.w == w_hat).expect("selected weight is in the table");
    Ok(EstimationResult {
        model: model.id().to_string(),
        psi_hat: best.psi.clone(),
        w_hat,
        z0_hat: best.z0.clone(),
        diagnostics: Diagnostics {
            contrast_value: best.contrast.unwrap_or(f64::NAN),
            m_b,
            profile_z0: z0.is_none(),
            maximize_k: opts.maximize_k,
            failed_weights: failed,
            overlapping_windows: overlapping,
        },
        k_table,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// How each Monte Carlo trial starts its parameter search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitPolicy {
    /// Each free parameter times `1 + U(−s, s)`, drawn from the trial seed.
    Perturb(f64),
    Fixed(Vec<f64>),
}

impl Default for InitPolicy {
    fn default() -> Self {
        InitPolicy::Perturb(0.5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSetup {
    pub t_end: f64,
    pub n: usize,
    pub weights: Vec<f64>,
    pub trials: usize,
    pub seed0: u64,
    pub profile_z0: bool,
    pub init: InitPolicy,
    /// Worker threads; `None` reads `HYPOCTRL_THREADS`, then uses the default pool.
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub psi_hat: Option<Vec<f64>>,
    pub w_hat: Option<f64>,
    pub k_table: Vec<KTableRow>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub model: String,
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    pub t_end: f64,
    pub n: usize,
    pub weights: Vec<f64>,
    pub trials: usize,
    pub failures: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Mean fit time per weight, in grid order, over successful trials.
    pub mean_time_per_w: Vec<f64>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Starting point for a trial: the truth, perturbed on free coordinates.
pub fn initial_guess(model: &dyn SdeModel, truth: &Params, policy: &InitPolicy, seed: u64) -> Result<Params> {
    match policy {
        InitPolicy::Fixed(v) => {
            let p = Params(v.clone());
            model.layout().validate(p.as_slice())?;
            Ok(p)
        }
        InitPolicy::Perturb(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_1417_0000_0001);
            let mut p = truth.as_slice().to_vec();
            for i in model.layout().free_indices() {
                p[i] *= 1.0 + rng.random_range(-s..=*s);
            }
            let p = Params(p);
            model.layout().validate(p.as_slice())?;
            Ok(p)
        }
    }
}

/// One simulate-then-estimate trial with seed `seed`.
pub fn run_trial(
    model: &dyn SdeModel,
    truth: &Params,
    z0: &Vector,
    setup: &McSetup,
    opts: &EstimatorOptions,
    seed: u64,
) -> Result<EstimationResult> {
    let traj = simulate(model, truth, z0, setup.t_end, setup.n, seed)?;
    let init = initial_guess(model, truth, &setup.init, seed)?;
    let known = (!setup.profile_z0).then_some(z0);
    select_weight(model, &traj.observations, traj.dt(), &setup.weights, &init, opts, known)
}

pub fn thread_count(setup_threads: Option<usize>) -> Option<usize> {
    setup_threads
        .or_else(|| std::env::var("HYPOCTRL_THREADS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&t| t > 0)
}

/// Runs `setup.trials` seeded trials (seed `seed0 + k`) on a bounded pool and
/// aggregates the estimates of the successful ones.
pub fn monte_carlo(
    model: &dyn SdeModel,
    truth: &Params,
    z0: &Vector,
    setup: &McSetup,
    opts: &EstimatorOptions,
) -> Result<MonteCarloReport> {
    if setup.trials < 1 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    model.layout().validate(truth.as_slice())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(setup.threads) {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..setup.trials)
            .into_par_iter()
            .map(|k| {
                let seed = setup.seed0.wrapping_add(k as u64);
                let start = Instant::now();
                let res = run_trial(model, truth, z0, setup, opts, seed);
                let wall_time_s = start.elapsed().as_secs_f64();
                match res {
                    Ok(r) => {
                        let psi = r.psi_params(model).map(|p| p.0).ok();
                        TrialOutcome { trial: k, seed, psi_hat: psi, w_hat: Some(r.w_hat), k_table: r.k_table, error: None, wall_time_s }
                    }
                    Err(e) => {
                        log::warn!("trial {k} (seed {seed}) failed: {e}");
                        TrialOutcome { trial: k, seed, psi_hat: None, w_hat: None, k_table: Vec::new(), error: Some(e.to_string()), wall_time_s }
                    }
                }
            })
            .collect()
    });
    Ok(aggregate(model, truth, setup, outcomes))
}

fn aggregate(model: &dyn SdeModel, truth: &Params, setup: &McSetup, outcomes: Vec<TrialOutcome>) -> MonteCarloReport {
    let k = truth.len();
    let ok: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.psi_hat.as_ref()).collect();
    let m = ok.len();
    let mut mean = vec![f64::NAN; k];
    let mut variance = vec![f64::NAN; k];
    if m > 0 {
        for j in 0..k {
            let mu = ok.iter().map(|p| p[j]).sum::<f64>() / m as f64;
            let var = if m > 1 { ok.iter().map(|p| (p[j] - mu).powi(2)).sum::<f64>() / (m - 1) as f64 } else { 0.0 };
            mean[j] = mu;
            variance[j] = var;
        }
    }
    let mean_time_per_w = setup
        .weights
        .iter()
        .map(|&w| {
            let times: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.error.is_none())
                .filter_map(|o| o.k_table.iter().find(|r| r.w == w).map(|r| r.wall_time_s))
                .collect();
            if times.is_empty() {
                f64::NAN
            } else {
                times.iter().sum::<f64>() / times.len() as f64
            }
        })
        .collect();
    MonteCarloReport {
        model: model.id().to_string(),
        names: model.layout().names().iter().map(|s| s.to_string()).collect(),
        truth: truth.0.clone(),
        t_end: setup.t_end,
        n: setup.n,
        weights: setup.weights.clone(),
        trials: setup.trials,
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
        mean,
        variance,
        mean_time_per_w,
        outcomes,
    }
}

impl MonteCarloReport {
    /// One table row: `T, n, trials, failures`, then `mean (variance)` pairs per
    /// parameter, then mean seconds per weight unless `timing` is off.
    pub fn table_csv(&self, timing: bool) -> String {
        let mut header = vec!["T".to_string(), "n".into(), "trials".into(), "failures".into()];
        for name in &self.names {
            header.push(format!("{name}_mean"));
            header.push(format!("{name}_var"));
        }
        if timing {
            for w in &self.weights {
                header.push(format!("time_s_w{w:e}"));
            }
        }
        let mut row = vec![format!("{}", self.t_end), self.n.to_string(), self.trials.to_string(), self.failures.to_string()];
        for (m, v) in self.mean.iter().zip(&self.variance) {
            row.push(format!("{m:.6e}"));
            row.push(format!("{v:.6e}"));
        }
        if timing {
            for t in &self.mean_time_per_w {
                row.push(format!("{t:.3}"));
            }
        }
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_cyclic_feedback, make_fhn};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn k_criterion_special_cases() {
        let u: Vec<Vector> = vec![Vector::from_vec(vec![1.0, 2.0]), Vector::from_vec(vec![0.5, 0.0])];
        assert_eq!(k_criterion(&u, 2), -(5.0 + 0.25) / 2.0);
        assert_eq!(k_criterion(&[Vector::zeros(2)], 2), 0.0);
        assert_eq!(k_criterion(&vec![Vector::zeros(1); 3], 1), f64::NEG_INFINITY);
        assert_eq!(k_criterion(&[Vector::zeros(3)], 3), f64::NEG_INFINITY);
        let one = [Vector::from_element(1, 2.0)];
        approx::assert_relative_eq!(k_criterion(&one, 1), -0.5 * 4f64.ln() - 2.0);
    }

    #[test]
    fn chi_square_mean_of_standard_normal_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d_u in 1..=3 {
            let u: Vec<Vector> =
                (0..10_000).map(|_| Vector::from_fn(d_u, |_, _| StandardNormal.sample(&mut rng))).collect();
            let mean = u.iter().map(|v| v.norm_squared()).sum::<f64>() / u.len() as f64;
            assert!((mean - d_u as f64).abs() < 0.1 * d_u as f64, "{d_u}: {mean}");
        }
    }

    #[test]
    fn weight_choice_ties_and_direction() {
        let rows = [(1e20, -3.0), (1e15, -3.0), (1e25, -5.0)];
        assert_eq!(pick_weight(&rows, true), Some(1e15));
        assert_eq!(pick_weight(&rows, false), Some(1e25));
        let rows = [(1e20, f64::NEG_INFINITY), (1e15, f64::NEG_INFINITY)];
        assert_eq!(pick_weight(&rows, true), Some(1e15));
        // Shifting log K by a constant is a positive rescaling of K.
        let shifted: Vec<(f64, f64)> = [(1.0, -2.0), (2.0, -1.0), (3.0, -4.0)].iter().map(|&(w, k)| (w, k + 17.0)).collect();
        assert_eq!(pick_weight(&shifted, true), Some(2.0));
        assert_eq!(pick_weight(&[], true), None);
    }

    #[test]
    fn zero_diffusion_hits_sentinel() {
        let m = make_fhn();
        let truth = Params::new(vec![0.1, 1.5, 0.8, 0.3]);
        let traj = simulate(m.as_ref(), &truth, &Vector::zeros(2), 2.0, 200, 1).unwrap();
        let opts = IterationOptions::default();
        let zero = Params::new(vec![0.1, 1.5, 0.8, 0.0]);
        assert_eq!(middle_objective(m.as_ref(), &zero, &traj.observations, traj.dt(), 1e16, &opts, None, 1), SENTINEL);
        let a = middle_objective(m.as_ref(), &truth, &traj.observations, traj.dt(), 1e16, &opts, None, 1);
        let b = middle_objective(m.as_ref(), &truth, &traj.observations, traj.dt(), 1e16, &opts, None, 1);
        assert!(a < SENTINEL);
        assert_eq!(a, b);
    }

    #[test]
    fn transform_round_trip_keeps_fixed_entries() {
        let m = crate::model::fix_params(&make_fhn(), &[("beta", 0.8)]).unwrap();
        let init = Params::new(vec![0.1, 1.5, 0.8, 0.3]);
        let tr = Transform::new(m.as_ref(), &init);
        let x = tr.to_x(init.as_slice());
        assert_eq!(x.len(), 3);
        approx::assert_relative_eq!(x[0], 0.1f64.ln());
        let back = tr.to_psi(&[0.2f64.ln(), 2.0, 0.5f64.ln()]);
        approx::assert_relative_eq!(back.0[0], 0.2, max_relative = 1e-14);
        assert_eq!(back.0[1], 2.0);
        assert_eq!(back.0[2], 0.8);
    }

    #[test]
    fn initial_guess_is_seeded_and_feasible() {
        let m = make_cyclic_feedback();
        let truth = Params::new(vec![0.2, 0.15]);
        let a = initial_guess(m.as_ref(), &truth, &InitPolicy::Perturb(0.5), 3).unwrap();
        let b = initial_guess(m.as_ref(), &truth, &InitPolicy::Perturb(0.5), 3).unwrap();
        assert_eq!(a, b);
        for (x, t) in a.0.iter().zip(&truth.0) {
            assert!((x / t - 1.0).abs() <= 0.5);
        }
    }

    #[test]
    fn table_without_timing_has_no_time_columns() {
        let report = MonteCarloReport {
            model: "cyclic".into(),
            names: vec!["nu".into(), "c".into()],
            truth: vec![0.2, 0.15],
            t_end: 10.0,
            n: 1000,
            weights: vec![1e15, 1e20],
            trials: 2,
            failures: 0,
            mean: vec![0.2, 0.15],
            variance: vec![1e-3, 1e-5],
            mean_time_per_w: vec![1.0, 2.0],
            outcomes: vec![],
        };
        let t = report.table_csv(false);
        assert!(!t.contains("time_s"));
        assert_eq!(t.lines().count(), 2);
        assert!(report.table_csv(true).contains("time_s_w1e15"));
    }
}
