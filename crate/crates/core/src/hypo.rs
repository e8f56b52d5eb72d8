//! Noise-propagation lags and the rank condition on the lagged noise coefficient.
//!
//! The lag of a smooth coordinate is the number of drift edges on the shortest
//! path reaching it from a rough coordinate through smooth coordinates only.
//! Under the Euler scheme, noise injected at step `i` first moves smooth
//! coordinate `l` at step `i + lag + 1`.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Matrix, Params, SdeModel, Vector};
use crate::simulate::Trajectory;

/// Relative threshold deciding whether a finite-difference partial is nonzero.
pub const JACOBIAN_TOL: f64 = 1e-8;
/// Smallest singular value below which the rank condition counts as failed.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagReport {
    /// Per smooth coordinate, `None` when no rough coordinate reaches it.
    pub m_l: Vec<Option<usize>>,
    pub m_b: usize,
    pub h1_min_singular_value: Option<f64>,
}

impl LagReport {
    pub fn connected(&self) -> bool {
        self.m_l.iter().all(Option::is_some)
    }

    pub fn rank_ok(&self) -> bool {
        self.h1_min_singular_value.is_some_and(|s| s > RANK_TOL)
    }
}

/// Uniform draws in a box, one `(lo, hi)` pair per coordinate.
pub fn probe_states(bounds: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            Vector::from_iterator(
                bounds.len(),
                bounds.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo }),
            )
        })
        .collect()
}

/// `dep[a][b]` is true when `f_b` depends on `z_a` at some probe state.
pub fn dependency_graph(model: &dyn SdeModel, psi: &Params, probes: &[Vector]) -> Vec<Vec<bool>> {
    let d = model.dims().d();
    let p = psi.as_slice();
    let mut dep = vec![vec![false; d]; d];
    for z in probes {
        let f = model.drift(z, 0.0, p);
        for a in 0..d {
            let h = 1e-6 * (1.0 + z[a].abs());
            let mut zp = z.clone();
            zp[a] += h;
            let mut zm = z.clone();
            zm[a] -= h;
            let df = (model.drift(&zp, 0.0, p) - model.drift(&zm, 0.0, p)) / (2.0 * h);
            for b in 0..d {
                if df[b].abs() > JACOBIAN_TOL * (1.0 + f[b].abs()) {
                    dep[a][b] = true;
                }
            }
        }
    }
    dep
}

/// Lag analysis without failing on disconnected coordinates.
pub fn lag_graph(model: &dyn SdeModel, psi: &Params, probes: &[Vector]) -> Result<LagReport> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("at least one probe state is required".into()));
    }
    let dims = model.dims();
    let d = dims.d();
    if probes.iter().any(|z| z.len() != d) {
        return Err(Error::Dimension(format!("probe states must have length {d}")));
    }
    let dep = dependency_graph(model, psi, probes);

    // Multi-source BFS from the rough block; smooth nodes are the only ones expanded further.
    let mut dist: Vec<Option<usize>> = (0..d).map(|j| (j >= dims.d_v).then_some(0)).collect();
    let mut queue: VecDeque<usize> = (dims.d_v..d).collect();
    while let Some(a) = queue.pop_front() {
        let da = dist[a].unwrap_or(0);
        for b in 0..dims.d_v {
            if dep[a][b] && dist[b].is_none() {
                dist[b] = Some(da + 1);
                queue.push_back(b);
            }
        }
    }
    let m_l: Vec<Option<usize>> = dist[..dims.d_v].to_vec();
    let m_b = m_l.iter().flatten().copied().max().unwrap_or(0);
    Ok(LagReport { m_l, m_b, h1_min_singular_value: None })
}

/// Lag analysis; errors when a smooth coordinate is unreachable from the noise.
pub fn connexity_lags(model: &dyn SdeModel, psi: &Params, probes: &[Vector]) -> Result<LagReport> {
    let report = lag_graph(model, psi, probes)?;
    if let Some(l) = report.m_l.iter().position(Option::is_none) {
        return Err(Error::Connexity(l));
    }
    Ok(report)
}

/// Ordered product `Ā_b ⋯ Ā_a` (identity when `a > b`).
pub(crate) fn left_product(abar: &[Matrix], a: usize, b: usize, d: usize) -> Matrix {
    let mut p = Matrix::identity(d, d);
    if a <= b {
        for m in &abar[a..=b] {
            p = m * p;
        }
    }
    p
}

fn min_singular_value(m: &Matrix) -> f64 {
    if m.nrows() > m.ncols() || m.is_empty() {
        return 0.0;
    }
    m.singular_values().min()
}

/// Minimum over windows of the smallest singular value of `C (Ā_{i+m} ⋯ Ā_{i+1}) Γ(Z_i)`.
pub fn h1_rank_check_states(
    model: &dyn SdeModel,
    psi: &Params,
    times: &[f64],
    states: &[Vector],
    dt: f64,
    m_b: usize,
) -> Result<f64> {
    let d = model.dims().d();
    if states.len() != times.len() {
        return Err(Error::Dimension("times and states differ in length".into()));
    }
    if states.len() <= m_b {
        return Err(Error::Dimension(format!(
            "trajectory has {} points, need more than m_B = {m_b}",
            states.len()
        )));
    }
    if states.iter().any(|z| z.len() != d) {
        return Err(Error::Dimension(format!("states must have length {d}")));
    }
    let p = psi.as_slice();
    let c = model.obs_matrix();
    let abar: Vec<Matrix> = states
        .iter()
        .zip(times)
        .map(|(z, &t)| Matrix::identity(d, d) + model.pseudo_a(z, t, p) * dt)
        .collect();
    let mut smin = f64::INFINITY;
    for i in 0..states.len() - m_b {
        let prod = left_product(&abar, i + 1, i + m_b, d);
        let g = c * prod * model.gamma(&states[i], times[i], p);
        smin = smin.min(min_singular_value(&g));
    }
    Ok(smin)
}

pub fn h1_rank_check(model: &dyn SdeModel, psi: &Params, traj: &Trajectory, m_b: usize) -> Result<f64> {
    h1_rank_check_states(model, psi, &traj.times, &traj.states, traj.dt(), m_b)
}

/// Perturbs rough coordinate `j` right after the first Euler step (equivalently,
/// the step-0 noise) and returns the first step `k` at which smooth coordinate
/// `l` responds under the deterministic Euler map. `None` past `d_V + 2` steps.
/// Models without smooth coordinates report lag 0.
pub fn verify_lag_finite_difference(
    model: &dyn SdeModel,
    psi: &Params,
    z0: &Vector,
    dt: f64,
    j: usize,
    l: usize,
) -> Result<Option<usize>> {
    let dims = model.dims();
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be > 0, got {dt}")));
    }
    if z0.len() != dims.d() {
        return Err(Error::Dimension(format!("initial state must have length {}", dims.d())));
    }
    if j >= dims.d_u {
        return Err(Error::InvalidArgument(format!("rough index {j} out of range")));
    }
    if dims.d_v == 0 {
        return Ok(Some(0));
    }
    if l >= dims.d_v {
        return Err(Error::InvalidArgument(format!("smooth index {l} out of range")));
    }
    let p = psi.as_slice();
    let step = |z: &Vector, t: f64| z + model.drift(z, t, p) * dt;
    let z1 = step(z0, 0.0);
    let u = dims.d_v + j;
    let delta = 1e-4 * (1.0 + z1[u].abs());
    let mut plus = z1.clone();
    plus[u] += delta;
    let mut minus = z1;
    minus[u] -= delta;
    let horizon = dims.d_v + 2;
    for k in 2..=horizon {
        let t = (k - 1) as f64 * dt;
        plus = step(&plus, t);
        minus = step(&minus, t);
        let deriv = (plus[l] - minus[l]) / (2.0 * delta);
        if deriv.abs() > RANK_TOL {
            return Ok(Some(k));
        }
    }
    Ok(None)
}
