//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails. `ACCEPTANCE_ONLY=1,5,10` runs a subset.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use hypoctrl::contrast::{lagged_terms, mc_covariance_check};
use hypoctrl::estimator::{monte_carlo, pick_weight, track_and_score, EstimatorOptions, InitPolicy, McSetup};
use hypoctrl::hypo::{connexity_lags, probe_states, verify_lag_finite_difference};
use hypoctrl::lq::{cost_eval, profiled_cost_eval, solve_lq, Linearization};
use hypoctrl::models::{benchmark, model_by_id};
use hypoctrl::simulate::{observe_states, simulate};
use hypoctrl::tracking::{linearize, IterationOptions};
use hypoctrl::{ModelSpec, Params, Vector};
use rand::Rng;

use common::{dense_minimizer, max_abs_diff, random_instance, rng};

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion = (usize, &'static str, fn() -> Verdict);

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn model(id: &str) -> ModelSpec {
    model_by_id(id, &Default::default()).unwrap()
}

fn lq_oracle() -> Verdict {
    let start = Instant::now();
    let (mut worst_u, mut worst_cost) = (0.0f64, 0.0f64);
    for seed in 0..50 {
        let lin = random_instance(seed);
        let z0 = Vector::from_fn(lin.state_dim(), |k, _| 0.3 * k as f64 - 0.5);
        let (_, sol) = solve_lq(&lin, Some(&z0)).unwrap();
        let dense = dense_minimizer(&lin, Some(&z0));
        worst_u = worst_u.max(max_abs_diff(&sol.u_bar, &dense.u));
        worst_cost = worst_cost.max((sol.cost - dense.cost).abs() / dense.cost.abs().max(1e-300));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst_u <= 1e-7 && worst_cost <= 1e-8 && secs < 5.0,
        format!("max |u - u_dense| = {worst_u:.2e} (<= 1e-7), max rel cost gap = {worst_cost:.2e} (<= 1e-8), {secs:.3} s (< 5 s)"),
    )
}

fn optimality() -> Verdict {
    let mut worst = f64::INFINITY;
    for seed in 100..110 {
        let lin = random_instance(seed);
        let z0 = Vector::zeros(lin.state_dim());
        let (_, sol) = solve_lq(&lin, Some(&z0)).unwrap();
        let base = cost_eval(&lin, &sol.u_bar, &z0).unwrap();
        let mut r = rng(seed);
        for k in 0..100 {
            let scale = 10f64.powi(-(k % 6));
            let u: Vec<Vector> = sol
                .u_bar
                .iter()
                .map(|u| u.map(|v| v + scale * r.random_range(-1.0..1.0)))
                .collect();
            worst = worst.min(cost_eval(&lin, &u, &z0).unwrap() - base);
        }
    }
    verdict(worst >= -1e-9, format!("min cost(u) - cost(u_bar) over 1000 perturbations = {worst:.3e} (>= -1e-9)"))
}

fn cyclic_linearization(psi: &Params, y: &[Vector], dt: f64, w: f64) -> Linearization {
    let m = model("cyclic");
    let profile = vec![Vector::zeros(3); y.len()];
    linearize(m.as_ref(), psi, &profile, y, dt, w)
}

fn profiled_initial() -> Verdict {
    let m = model("cyclic");
    let psi = Params::new(vec![0.2, 0.15]);
    let quiet = Params::new(vec![0.2, 0.0]);
    let mut worst_err = 0.0f64;
    let mut r = rng(3);
    for k in 0..5 {
        let z_star = Vector::from_fn(3, |_, _| r.random_range(-2.0..2.0));
        let traj = simulate(m.as_ref(), &quiet, &z_star, 10.0, 1000, k).unwrap();
        let lin = cyclic_linearization(&psi, &traj.observations, traj.dt(), 10f64.powi(2 * k as i32 + 2));
        let (_, sol) = solve_lq(&lin, None).unwrap();
        worst_err = worst_err.max((&sol.z0_used - &z_star).norm());
    }

    let traj = simulate(m.as_ref(), &psi, &Vector::from_vec(vec![0.5, -0.3, 0.2]), 10.0, 1000, 11).unwrap();
    let lin = cyclic_linearization(&psi, &traj.observations, traj.dt(), 1e20);
    let (_, sol) = solve_lq(&lin, None).unwrap();
    let base = profiled_cost_eval(&lin, &sol.u_bar, &sol.z0_used).unwrap();
    let mut worst_gap = f64::INFINITY;
    for k in 0..100 {
        let scale = 10f64.powi(-(k % 5) - 1);
        let dz = Vector::from_fn(3, |_, _| scale * r.random_range(-1.0..1.0));
        let z = &sol.z0_used + dz;
        let (_, moved) = solve_lq(&lin, Some(&z)).unwrap();
        let cost = profiled_cost_eval(&lin, &moved.u_bar, &z).unwrap();
        worst_gap = worst_gap.min(cost - base);
    }
    let tol = 1e-9 * base.abs().max(1.0);
    verdict(
        worst_err <= 1e-6 && worst_gap >= -tol,
        format!(
            "noiseless max ||z0_hat - z0*|| = {worst_err:.2e} (<= 1e-6); noisy min profiled gap = {worst_gap:.3e} (>= -{tol:.1e})"
        ),
    )
}

fn elliptic_reduction() -> Verdict {
    let m = model("ou");
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let (theta, mu, sigma) = (r.random_range(0.2..3.0), r.random_range(-1.0..1.0), r.random_range(0.1..1.0));
        let psi = Params::new(vec![theta, mu, sigma]);
        let n = r.random_range(20..=60);
        let dt = r.random_range(0.005..0.05);
        let traj = simulate(m.as_ref(), &psi, &Vector::from_element(1, mu + 0.5), n as f64 * dt, n, 100 + k).unwrap();
        let y = &traj.observations;
        let lagged = lagged_terms(m.as_ref(), &psi, y, y, dt, 0).unwrap().value;
        // Euler pseudo-likelihood of increments, over the same n - 1 transitions.
        let var = dt * sigma * sigma;
        let direct: f64 = (0..n - 1)
            .map(|i| {
                let e = y[i + 1][0] - y[i][0] - dt * theta * (mu - y[i][0]);
                e * e / var + var.ln()
            })
            .sum();
        worst = worst.max((lagged - direct).abs());
    }
    verdict(worst <= 1e-10, format!("max |H_lagged - H_euler| over 20 datasets = {worst:.2e} (<= 1e-10)"))
}

fn lag_detection() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for (id, expected) in [("cyclic", 2), ("fhn", 1), ("ou", 0), ("synaptic", 1)] {
        let m = model(id);
        let b = benchmark(id).unwrap();
        let probes = probe_states(&b.probe_box, 50, 7);
        let report = connexity_lags(m.as_ref(), &b.truth, &probes).unwrap();
        let mut ok = report.m_b == expected;
        let dims = m.dims();
        let z0 = probes[0].clone();
        for (l, lag) in report.m_l.iter().enumerate() {
            let first = (0..dims.d_u)
                .filter_map(|j| verify_lag_finite_difference(m.as_ref(), &b.truth, &z0, 0.01, j, l).unwrap())
                .min();
            ok &= first == lag.map(|v| v + 1);
        }
        if dims.d_v == 0 {
            ok &= verify_lag_finite_difference(m.as_ref(), &b.truth, &z0, 0.01, 0, 0).unwrap() == Some(0);
        }
        pass &= ok;
        let lags: Vec<String> = report.m_l.iter().map(|l| l.map_or("none".into(), |v| v.to_string())).collect();
        lines.push(format!("{id} m_B={} m_l=[{}]", report.m_b, lags.join(",")));
    }
    verdict(pass, format!("{} (finite-difference lag = m_l + 1 on every smooth coordinate)", lines.join("; ")))
}

fn covariance_oracle() -> Verdict {
    let mut pass = true;
    let mut lines = Vec::new();
    for id in ["cyclic", "fhn", "synaptic"] {
        let m = model(id);
        let b = benchmark(id).unwrap();
        let probes = probe_states(&b.probe_box, 50, 7);
        let m_b = connexity_lags(m.as_ref(), &b.truth, &probes).unwrap().m_b;
        let traj = simulate(m.as_ref(), &b.truth, &b.z0, b.t_end, b.n, 5).unwrap();
        let eval = lagged_terms(m.as_ref(), &b.truth, &traj.states, &traj.observations, traj.dt(), m_b).unwrap();
        let i = b.n / 2;
        let mc = mc_covariance_check(m.as_ref(), &b.truth, &traj.states[i..=i + m_b], traj.dt(), m_b, 100_000, 9).unwrap();
        let rel = (&eval.sigma[i] - &mc).norm() / eval.sigma[i].norm();
        pass &= rel <= 0.05;
        lines.push(format!("{id} {:.2}%", 100.0 * rel));
    }
    verdict(pass, format!("relative Frobenius gap at 1e5 samples: {} (<= 5%)", lines.join(", ")))
}

fn mc_run(id: &str, trials: usize, seed0: u64) -> hypoctrl::estimator::MonteCarloReport {
    let m = model(id);
    let b = benchmark(id).unwrap();
    let setup = McSetup {
        t_end: b.t_end,
        n: b.n,
        weights: b.weights.clone(),
        trials,
        seed0,
        profile_z0: b.profile_z0,
        init: InitPolicy::Perturb(0.5),
        threads: None,
    };
    monte_carlo(m.as_ref(), &b.truth, &b.z0, &setup, &EstimatorOptions::default()).unwrap()
}

fn describe(report: &hypoctrl::estimator::MonteCarloReport) -> String {
    let cols: Vec<String> = report
        .names
        .iter()
        .zip(report.mean.iter().zip(&report.variance))
        .map(|(n, (m, v))| format!("{n} {m:.4} ({v:.1e})"))
        .collect();
    format!("{}; failures {}/{}", cols.join(", "), report.failures, report.trials)
}

fn within(report: &hypoctrl::estimator::MonteCarloReport, bounds: &[(&str, f64, f64)]) -> bool {
    bounds.iter().all(|&(name, lo, hi)| {
        let k = report.names.iter().position(|n| n == name).unwrap();
        (lo..=hi).contains(&report.mean[k])
    })
}

fn cyclic_table() -> Verdict {
    let report = mc_run("cyclic", 100, 1);
    let ok = within(&report, &[("nu", 0.18, 0.28), ("c", 0.12, 0.16)]);
    verdict(ok && report.failures < report.trials, format!("{} (nu in [0.18, 0.28], c in [0.12, 0.16])", describe(&report)))
}

fn fhn_table() -> Verdict {
    let report = mc_run("fhn", 20, 1);
    let published: [(&str, f64, f64); 4] = [("epsilon", 0.09, 2e-5), ("gamma", 1.58, 6e-2), ("beta", 0.87, 5e-2), ("sigma", 0.29, 2e-4)];
    let bounds: Vec<(&str, f64, f64)> =
        published.iter().map(|&(n, m, v)| (n, m - 3.0 * v.sqrt(), m + 3.0 * v.sqrt())).collect();
    let ok = within(&report, &bounds);
    verdict(ok && report.failures < report.trials, format!("{} (means within 3 published sd)", describe(&report)))
}

fn synaptic_table() -> Verdict {
    let report = mc_run("synaptic", 10, 1);
    let ok = within(&report, &[("tau_e", 0.40, 0.62), ("tau_i", 0.85, 1.40), ("g_i", 9.2, 9.7)]);
    verdict(
        ok && report.failures < report.trials,
        format!("{} (tau_e in [0.40, 0.62], tau_i in [0.85, 1.40], g_i in [9.2, 9.7]; sigmas not gated)", describe(&report)),
    )
}

fn chi_square_calibration() -> Verdict {
    let m = model("cyclic");
    let b = benchmark("cyclic").unwrap();
    let opts = IterationOptions::default();
    let mut hits = 0;
    let mut means = Vec::new();
    for seed in 0..20 {
        let traj = simulate(m.as_ref(), &b.truth, &b.z0, b.t_end, b.n, 1000 + seed).unwrap();
        let y = observe_states(m.obs_matrix(), &traj.states);
        let scored: Vec<(f64, f64, f64)> = b
            .weights
            .iter()
            .map(|&w| {
                let (_, k, sq) = track_and_score(m.as_ref(), &b.truth, &y, traj.dt(), w, &opts, Some(&b.z0), 2).unwrap();
                (w, k, sq)
            })
            .collect();
        let pairs: Vec<(f64, f64)> = scored.iter().map(|&(w, k, _)| (w, k)).collect();
        let w_hat = pick_weight(&pairs, true).unwrap();
        let sq = scored.iter().find(|s| s.0 == w_hat).unwrap().2;
        means.push(sq);
        if (0.5..=1.5).contains(&sq) {
            hits += 1;
        }
    }
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.iter().cloned().fold(0.0, f64::max);
    verdict(
        hits >= 16,
        format!("{hits}/20 seeds with mean ||u||^2 in [0.5, 1.5] at w_hat (>= 16); range [{lo:.3}, {hi:.3}]"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "LQ solution equals dense quadratic minimizer", lq_oracle),
        (2, "optimal control is a minimum under perturbation", optimality),
        (3, "profiled initial condition", profiled_initial),
        (4, "elliptic reduction of the lagged contrast", elliptic_reduction),
        (5, "lag detection and finite-difference lags", lag_detection),
        (6, "window covariance against Monte Carlo", covariance_oracle),
        (7, "cyclic model, 100 trials", cyclic_table),
        (8, "FitzHugh-Nagumo, 20 trials", fhn_table),
        (9, "synaptic conductance, 10 trials", synaptic_table),
        (10, "chi-square calibration of controls", chi_square_calibration),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (k, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&k)) {
            continue;
        }
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| verdict(false, "panicked".to_string()));
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {k:>2}: {name}: {} [{:.1} s]", v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
