//! Gaussian pseudo-likelihood of `(m_B + 1)`-step-ahead observation residuals.

use nalgebra::Cholesky;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Matrix, Params, SdeModel, Vector};

#[derive(Clone, Debug)]
pub struct ContrastEval {
    /// Residuals `X_i`, `i = 0..n − m_B − 2`.
    pub x: Vec<Vector>,
    pub sigma: Vec<Matrix>,
    pub logdets: Vec<f64>,
    pub value: f64,
    /// True when some window has more than one nonzero noise block, so that
    /// consecutive residuals share noise and the sum is only a pseudo-likelihood.
    pub overlapping: bool,
}

fn abar_at(model: &dyn SdeModel, z: &Vector, t: f64, p: &[f64], dt: f64) -> Matrix {
    let mut a = model.pseudo_a(z, t, p) * dt;
    for k in 0..a.nrows() {
        a[(k, k)] += 1.0;
    }
    a
}

/// Noise blocks `G_r = √Δ C Ā_m ⋯ Ā_{r+1} Γ_r`, `r = 0..m`, for one window
/// whose `Ā` and `Γ` are given in window order.
fn noise_blocks(c: &Matrix, abar: &[Matrix], gamma: &[Matrix], sqrt_dt: f64) -> Vec<Matrix> {
    let m = gamma.len() - 1;
    let mut q = c.clone();
    let mut blocks = vec![Matrix::zeros(0, 0); m + 1];
    for r in (0..=m).rev() {
        blocks[r] = &q * &gamma[r] * sqrt_dt;
        if r > 0 {
            q = &q * &abar[r];
        }
    }
    blocks
}

/// Evaluates the lagged contrast along the predictor `z_bar` (`n + 1` states).
pub fn lagged_terms(
    model: &dyn SdeModel,
    psi: &Params,
    z_bar: &[Vector],
    y: &[Vector],
    dt: f64,
    m_b: usize,
) -> Result<ContrastEval> {
    let dims = model.dims();
    if y.is_empty() || z_bar.len() != y.len() {
        return Err(Error::Dimension(format!(
            "predictor has {} states, observations {} rows",
            z_bar.len(),
            y.len()
        )));
    }
    let n = y.len() - 1;
    if n <= m_b + 1 {
        return Err(Error::InvalidArgument(format!("need n > m_B + 1, got n = {n}, m_B = {m_b}")));
    }
    if z_bar.iter().any(|z| z.len() != dims.d()) || y.iter().any(|v| v.len() != dims.d_o) {
        return Err(Error::Dimension("predictor or observation width".into()));
    }
    let p = psi.as_slice();
    let c = model.obs_matrix();
    let sqrt_dt = dt.sqrt();
    let abar: Vec<Matrix> =
        z_bar.iter().enumerate().map(|(k, z)| abar_at(model, z, k as f64 * dt, p, dt)).collect();
    let gamma: Vec<Matrix> = z_bar.iter().enumerate().map(|(k, z)| model.gamma(z, k as f64 * dt, p)).collect();
    let r: Vec<Vector> = (0..=n).map(|k| model.pseudo_r(k as f64 * dt, p)).collect();

    let terms = n - m_b - 1;
    let mut out = ContrastEval {
        x: Vec::with_capacity(terms),
        sigma: Vec::with_capacity(terms),
        logdets: Vec::with_capacity(terms),
        value: 0.0,
        overlapping: false,
    };
    for i in 0..terms {
        // Walk the window backwards, carrying Q = C Ā_{i+m} ⋯ Ā_{i+r+1}.
        let mut q = c.clone();
        let mut mean = Vector::zeros(dims.d_o);
        let mut sigma = Matrix::zeros(dims.d_o, dims.d_o);
        let mut active = 0;
        for rr in (0..=m_b).rev() {
            let k = i + rr;
            let g = &q * &gamma[k] * sqrt_dt;
            if g.iter().any(|&v| v != 0.0) {
                active += 1;
            }
            sigma += &g * g.transpose();
            mean += &q * &r[k] * dt;
            q = &q * &abar[k];
        }
        mean += &q * &z_bar[i];
        out.overlapping |= active > 1;
        let x = &y[i + m_b + 1] - mean;

        let jitter = 1e-12 * sigma.trace() / dims.d_o as f64;
        for k in 0..dims.d_o {
            sigma[(k, k)] += jitter;
        }
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::RankCondition { index: i })?;
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !logdet.is_finite() {
            return Err(Error::RankCondition { index: i });
        }
        let quad = x.dot(&chol.solve(&x));
        if !quad.is_finite() {
            return Err(Error::NonFinite("contrast residual"));
        }
        out.value += quad + logdet;
        out.x.push(x);
        out.sigma.push(sigma);
        out.logdets.push(logdet);
    }
    if out.overlapping {
        log::debug!("contrast windows share noise blocks; value is a pseudo-likelihood");
    }
    Ok(out)
}

/// Covariance of the window noise from the formula used by [`lagged_terms`],
/// without jitter. `window` holds `Z̄_i..Z̄_{i+m_B}`.
pub fn window_covariance(model: &dyn SdeModel, psi: &Params, window: &[Vector], t0: f64, dt: f64) -> Matrix {
    let p = psi.as_slice();
    let abar: Vec<Matrix> =
        window.iter().enumerate().map(|(r, z)| abar_at(model, z, t0 + r as f64 * dt, p, dt)).collect();
    let gamma: Vec<Matrix> =
        window.iter().enumerate().map(|(r, z)| model.gamma(z, t0 + r as f64 * dt, p)).collect();
    let d_o = model.dims().d_o;
    noise_blocks(model.obs_matrix(), &abar, &gamma, dt.sqrt())
        .iter()
        .fold(Matrix::zeros(d_o, d_o), |acc, g| acc + g * g.transpose())
}

/// Empirical covariance of `C ξ` where `ξ` accumulates the window noise by
/// running the frozen linear dynamics forward. `window` holds `m_B + 1` states.
pub fn mc_covariance_check(
    model: &dyn SdeModel,
    psi: &Params,
    window: &[Vector],
    dt: f64,
    m_b: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Matrix> {
    let dims = model.dims();
    if window.len() != m_b + 1 {
        return Err(Error::Dimension(format!("window must hold m_B + 1 = {} states", m_b + 1)));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let p = psi.as_slice();
    let sqrt_dt = dt.sqrt();
    let abar: Vec<Matrix> = window.iter().enumerate().map(|(r, z)| abar_at(model, z, r as f64 * dt, p, dt)).collect();
    let gamma: Vec<Matrix> = window.iter().enumerate().map(|(r, z)| model.gamma(z, r as f64 * dt, p)).collect();
    let c = model.obs_matrix();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sum = Vector::zeros(dims.d_o);
    let mut sum_sq = Matrix::zeros(dims.d_o, dims.d_o);
    let mut u = Vector::zeros(dims.d_u);
    for _ in 0..n_samples {
        let mut xi = Vector::zeros(dims.d());
        for r in 0..=m_b {
            for v in u.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            xi += &gamma[r] * &u * sqrt_dt;
            if r < m_b {
                xi = &abar[r + 1] * xi;
            }
        }
        let x = c * xi;
        sum += &x;
        sum_sq += &x * x.transpose();
    }
    let k = n_samples as f64;
    let mean = sum / k;
    Ok((sum_sq - &mean * mean.transpose() * k) / (k - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{benchmark, make_cyclic_feedback, make_fhn};
    use crate::simulate::simulate;

    #[test]
    fn cyclic_window_block() {
        let m = make_cyclic_feedback();
        let psi = Params::new(vec![0.2, 0.15]);
        let window = vec![Vector::from_vec(vec![0.1, 0.2, 0.3]); 3];
        let s = window_covariance(m.as_ref(), &psi, &window, 0.0, 0.01);
        let g = 0.1 * 0.01 * 0.01 * 0.15;
        approx::assert_relative_eq!(g, 1.5e-6, max_relative = 1e-12);
        approx::assert_relative_eq!(s[(0, 0)], g * g, max_relative = 1e-10);
    }

    #[test]
    fn fhn_window_block() {
        let m = make_fhn();
        let psi = benchmark("fhn").unwrap().truth;
        let window = vec![Vector::from_vec(vec![0.3, 0.1]); 2];
        let s = window_covariance(m.as_ref(), &psi, &window, 0.0, 0.01);
        approx::assert_relative_eq!(s[(0, 0)], 9e-6, max_relative = 1e-10);
    }

    #[test]
    fn noiseless_residuals_vanish() {
        let m = make_fhn();
        let mut psi = benchmark("fhn").unwrap().truth;
        let traj = simulate(m.as_ref(), &Params::new(vec![0.1, 1.5, 0.8, 0.0]), &Vector::from_vec(vec![0.5, 0.0]), 2.0, 200, 1)
            .unwrap();
        psi.0[3] = 0.3;
        let ev = lagged_terms(m.as_ref(), &psi, &traj.states, &traj.observations, traj.dt(), 1).unwrap();
        assert_eq!(ev.x.len(), 200 - 2);
        assert!(ev.x.iter().all(|x| x.amax() < 1e-12));
        approx::assert_relative_eq!(ev.value, ev.logdets.iter().sum::<f64>(), max_relative = 1e-9);
        assert!(!ev.overlapping);
    }

    #[test]
    fn zero_diffusion_is_rank_failure() {
        let m = make_fhn();
        let psi = Params::new(vec![0.1, 1.5, 0.8, 0.0]);
        let traj = simulate(m.as_ref(), &psi, &Vector::zeros(2), 1.0, 50, 1).unwrap();
        let err = lagged_terms(m.as_ref(), &psi, &traj.states, &traj.observations, traj.dt(), 1).unwrap_err();
        assert!(matches!(err, Error::RankCondition { index: 0 }));
        let window = vec![Vector::zeros(2); 2];
        let s = mc_covariance_check(m.as_ref(), &psi, &window, 0.01, 1, 10_000, 1).unwrap();
        assert_eq!(s.amax(), 0.0);
    }

    #[test]
    fn monte_carlo_agrees_with_formula() {
        let m = make_cyclic_feedback();
        let psi = Params::new(vec![0.2, 0.15]);
        let window = vec![
            Vector::from_vec(vec![0.1, 0.2, 0.3]),
            Vector::from_vec(vec![0.2, 0.1, 0.0]),
            Vector::from_vec(vec![0.3, 0.0, -0.3]),
        ];
        let exact = window_covariance(m.as_ref(), &psi, &window, 0.0, 0.01);
        let mc = mc_covariance_check(m.as_ref(), &psi, &window, 0.01, 2, 100_000, 9).unwrap();
        assert!((mc - &exact).norm() / exact.norm() < 0.05);
    }

    #[test]
    fn too_short_series() {
        let m = make_fhn();
        let psi = benchmark("fhn").unwrap().truth;
        let z = vec![Vector::zeros(2); 3];
        let y = vec![Vector::zeros(1); 3];
        assert!(lagged_terms(m.as_ref(), &psi, &z, &y, 0.1, 1).is_err());
    }
}
