//! State predictor for nonlinear drifts: repeated LQ solves with the
//! pseudo-linear coefficients frozen along the previous iterate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lq::{solve_lq, ControlSolution, Linearization};
use crate::model::{Matrix, Params, SdeModel, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationOptions {
    /// Threshold on `Σ_i ‖Z̄_i^l − Z̄_i^{l−1}‖²`; `None` means `1e-6 · n`.
    pub epsilon: Option<f64>,
    pub max_iter: usize,
    /// Constant starting profile when the initial condition is profiled.
    /// `None` uses the least-squares solution of `C z = Y_0`.
    pub z0_guess: Option<Vec<f64>>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self { epsilon: None, max_iter: 30, z0_guess: None }
    }
}

impl IterationOptions {
    pub fn epsilon_for(&self, n: usize) -> f64 {
        self.epsilon.unwrap_or(1e-6 * n as f64)
    }

    pub fn check(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {e}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrackingSolution {
    pub control: ControlSolution,
    pub iterations: usize,
    pub converged: bool,
    /// Iterate change after each pass.
    pub changes: Vec<f64>,
    /// The linearization used by the last pass.
    pub linearization: Linearization,
}

/// Freezes `A`, `r`, `Γ` along `profile` (`n + 1` states, the last one unused).
pub fn linearize(
    model: &dyn SdeModel,
    psi: &Params,
    profile: &[Vector],
    y: &[Vector],
    dt: f64,
    w: f64,
) -> Linearization {
    let n = y.len() - 1;
    let d = model.dims().d();
    let p = psi.as_slice();
    let mut abar = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    for (i, z) in profile.iter().take(n).enumerate() {
        let t = i as f64 * dt;
        let mut a = model.pseudo_a(z, t, p) * dt;
        for k in 0..d {
            a[(k, k)] += 1.0;
        }
        abar.push(a);
        r.push(model.pseudo_r(t, p));
        gamma.push(model.gamma(z, t, p));
    }
    Linearization { abar, r, gamma, dt, c: model.obs_matrix().clone(), y: y.to_vec(), w }
}

fn default_start(c: &Matrix, y0: &Vector) -> Result<Vector> {
    c.clone()
        .pseudo_inverse(1e-12)
        .map(|pinv| pinv * y0)
        .map_err(|e| Error::InvalidArgument(format!("observation matrix: {e}")))
}

/// Iterates frozen LQ solves until the predictor stops moving. `z0 = None`
/// profiles the initial condition at every pass.
pub fn solve_tracking(
    model: &dyn SdeModel,
    psi: &Params,
    y: &[Vector],
    dt: f64,
    w: f64,
    opts: &IterationOptions,
    z0: Option<&Vector>,
) -> Result<TrackingSolution> {
    opts.check()?;
    if y.len() < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    let dims = model.dims();
    if y.iter().any(|v| v.len() != dims.d_o) {
        return Err(Error::Dimension(format!("observations must have length {}", dims.d_o)));
    }
    let n = y.len() - 1;
    let start = match (z0, &opts.z0_guess) {
        (Some(z), _) => z.clone(),
        (None, Some(g)) => Vector::from_column_slice(g),
        (None, None) => default_start(model.obs_matrix(), &y[0])?,
    };
    if start.len() != dims.d() {
        return Err(Error::Dimension(format!("initial state must have length {}", dims.d())));
    }
    let eps = opts.epsilon_for(n);

    let mut profile = vec![start; n + 1];
    let mut lin = linearize(model, psi, &profile, y, dt, w);
    let mut changes = Vec::new();
    let mut iter = 0;
    loop {
        iter += 1;
        let (_, sol) = solve_lq(&lin, z0)?;
        let change: f64 = sol.z_bar.iter().zip(&profile).map(|(a, b)| (a - b).norm_squared()).sum();
        changes.push(change);
        if change < eps || iter >= opts.max_iter {
            let converged = change < eps;
            if !converged {
                log::warn!("tracking did not converge after {iter} passes (change {change:e})");
            }
            return Ok(TrackingSolution { control: sol, iterations: iter, converged, changes, linearization: lin });
        }
        let next = linearize(model, psi, &sol.z_bar, y, dt, w);
        if next == lin {
            // Same frozen problem: the next pass reproduces this one exactly.
            iter += 1;
            changes.push(0.0);
            return Ok(TrackingSolution { control: sol, iterations: iter, converged: true, changes, linearization: lin });
        }
        profile = sol.z_bar;
        lin = next;
    }
}
