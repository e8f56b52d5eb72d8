//! Linear-quadratic tracking for a frozen linearization.
//!
//! Dynamics `Z_{i+1} = Ā_i Z_i + Δ r_i + √Δ Γ_i u_i` with cost
//! `Σ_{i=1..n} ‖C Z_i − Y_i‖² + (1/w) Σ_{i=0..n−1} ‖u_i‖²`.
//! The backward recursion is the block form of the Riccati equation for the
//! state extended by a constant 1, so the affine term `r` and the data `Y` end up
//! in the vector sequence `h`. Only the `d_U × d_U` inner matrix
//! `(1/w) I + Δ Γᵀ E Γ` is ever inverted, so rank-deficient `Γ` is fine.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::model::{Matrix, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    /// `Ā_i = I + Δ A(z_i, t_i)`, `i = 0..n−1`.
    pub abar: Vec<Matrix>,
    /// `r(t_i)`, `i = 0..n−1`.
    pub r: Vec<Vector>,
    /// `Γ(z_i, t_i)`, `i = 0..n−1`.
    pub gamma: Vec<Matrix>,
    pub dt: f64,
    pub c: Matrix,
    /// Observations `Y_0..Y_n`.
    pub y: Vec<Vector>,
    pub w: f64,
}

impl Linearization {
    pub fn steps(&self) -> usize {
        self.abar.len()
    }

    pub fn state_dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn control_dim(&self) -> usize {
        self.gamma.first().map_or(0, |g| g.ncols())
    }

    pub fn check(&self) -> Result<()> {
        let n = self.abar.len();
        let d = self.state_dim();
        if n == 0 {
            return Err(Error::Dimension("linearization has no steps".into()));
        }
        if self.r.len() != n || self.gamma.len() != n || self.y.len() != n + 1 {
            return Err(Error::Dimension(format!(
                "sequence lengths: abar {n}, r {}, gamma {}, y {} (expected n+1)",
                self.r.len(),
                self.gamma.len(),
                self.y.len()
            )));
        }
        let du = self.control_dim();
        let d_o = self.c.nrows();
        for i in 0..n {
            if self.abar[i].shape() != (d, d)
                || self.r[i].len() != d
                || self.gamma[i].shape() != (d, du)
            {
                return Err(Error::Dimension(format!("step {i} has inconsistent shapes")));
            }
        }
        if self.y.iter().any(|y| y.len() != d_o) {
            return Err(Error::Dimension("observation rows do not match C".into()));
        }
        if !(self.w > 0.0) || !self.w.is_finite() {
            return Err(Error::InvalidArgument(format!("weight must be > 0, got {}", self.w)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    /// `E_0..E_n`.
    pub e: Vec<Matrix>,
    /// `h_0..h_n`.
    pub h: Vec<Vector>,
    /// `G_i = [(1/w) I + Δ Γ_iᵀ E_{i+1} Γ_i]⁻¹`, `i = 0..n−1`.
    pub inner_inv: Vec<Matrix>,
}

#[derive(Clone, Debug)]
pub struct ControlSolution {
    /// `ū_0..ū_{n−1}`.
    pub u_bar: Vec<Vector>,
    /// `Z̄_0..Z̄_n`.
    pub z_bar: Vec<Vector>,
    pub cost: f64,
    pub z0_used: Vector,
}

fn spd_inverse(m: Matrix, what: &'static str) -> Result<Matrix> {
    // Closed forms for the common one- and two-noise cases.
    match m.nrows() {
        1 => {
            let a = m[(0, 0)];
            return if a > 0.0 { Ok(Matrix::from_element(1, 1, 1.0 / a)) } else { Err(Error::NotPositiveDefinite(what)) };
        }
        2 => {
            let (a, b, c) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
            let det = a * c - b * b;
            return if a > 0.0 && det > 0.0 {
                Ok(Matrix::from_row_slice(2, 2, &[c / det, -b / det, -b / det, a / det]))
            } else {
                Err(Error::NotPositiveDefinite(what))
            };
        }
        _ => {}
    }
    Cholesky::new(m)
        .map(|ch| ch.inverse())
        .ok_or(Error::NotPositiveDefinite(what))
}

/// Backward recursion for `(E_i, h_i)`, `i = n..0`.
pub fn riccati_backward(lin: &Linearization) -> Result<RiccatiSolution> {
    lin.check()?;
    let n = lin.steps();
    let d = lin.state_dim();
    let du = lin.control_dim();
    let dt = lin.dt;
    let ctc = lin.c.tr_mul(&lin.c);
    let inv_w = 1.0 / lin.w;

    let mut e = Vec::with_capacity(n + 1);
    let mut h = Vec::with_capacity(n + 1);
    let mut inner_inv = Vec::with_capacity(n);
    e.push(ctc.clone());
    h.push(-lin.c.tr_mul(&lin.y[n]));

    let mut e_g = Matrix::zeros(d, du);
    let mut inner = Matrix::zeros(du, du);
    let mut k = Matrix::zeros(d, du);
    let mut kg = Matrix::zeros(d, du);
    let mut at_e = Matrix::zeros(d, d);
    let mut q = Vector::zeros(d);
    let mut gq = Vector::zeros(du);

    // Built in reverse and flipped at the end.
    for i in (0..n).rev() {
        let a = &lin.abar[i];
        let g = &lin.gamma[i];
        let e1 = e.last().expect("terminal term pushed");
        let h1 = h.last().expect("terminal term pushed");

        e1.mul_to(g, &mut e_g);
        g.tr_mul_to(&e_g, &mut inner);
        inner *= dt;
        for j in 0..du {
            inner[(j, j)] += inv_w;
        }
        let ginv = spd_inverse(inner.clone(), "Riccati inner matrix")?;
        // K = Āᵀ E Γ
        a.tr_mul_to(e1, &mut at_e);
        at_e.mul_to(g, &mut k);
        k.mul_to(&ginv, &mut kg);
        let mut ei = ctc.clone();
        ei.gemm(1.0, &at_e, a, 1.0);
        for j in 0..du {
            ei.ger(-dt, &kg.column(j), &k.column(j), 1.0);
        }
        symmetrize(&mut ei);

        q.copy_from(h1);
        q.gemv(dt, e1, &lin.r[i], 1.0);
        let mut hi = Vector::zeros(d);
        hi.gemv_tr(1.0, a, &q, 0.0);
        hi.gemv_tr(-1.0, &lin.c, &lin.y[i], 1.0);
        gq.gemv_tr(1.0, g, &q, 0.0);
        hi.gemv(-dt, &kg, &gq, 1.0);

        if ei.iter().any(|x| !x.is_finite()) || hi.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Riccati recursion"));
        }
        e.push(ei);
        h.push(hi);
        inner_inv.push(ginv);
    }
    e.reverse();
    h.reverse();
    inner_inv.reverse();
    Ok(RiccatiSolution { e, h, inner_inv })
}

fn symmetrize(m: &mut Matrix) {
    let d = m.nrows();
    for r in 0..d {
        for c in (r + 1)..d {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

/// Forward pass: optimal feedback control and the state predictor from `Z_0`.
pub fn control_forward(lin: &Linearization, ricc: &RiccatiSolution, z0: &Vector) -> Result<ControlSolution> {
    let n = lin.steps();
    if ricc.e.len() != n + 1 {
        return Err(Error::Dimension("Riccati solution does not match the linearization".into()));
    }
    if z0.len() != lin.state_dim() {
        return Err(Error::Dimension(format!("initial state has length {}", z0.len())));
    }
    let d = lin.state_dim();
    let du = lin.control_dim();
    let dt = lin.dt;
    let sqrt_dt = dt.sqrt();
    let mut z_bar = Vec::with_capacity(n + 1);
    let mut u_bar = Vec::with_capacity(n);
    z_bar.push(z0.clone());
    let mut costate = Vector::zeros(d);
    let mut gc = Vector::zeros(du);
    for i in 0..n {
        let g = &lin.gamma[i];
        let mut next = lin.r[i].clone();
        next.gemv(1.0, &lin.abar[i], &z_bar[i], dt);
        costate.copy_from(&ricc.h[i + 1]);
        costate.gemv(1.0, &ricc.e[i + 1], &next, 1.0);
        gc.gemv_tr(1.0, g, &costate, 0.0);
        let mut u = Vector::zeros(du);
        u.gemv(-sqrt_dt, &ricc.inner_inv[i], &gc, 0.0);
        next.gemv(sqrt_dt, g, &u, 1.0);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("forward control pass"));
        }
        u_bar.push(u);
        z_bar.push(next);
    }
    let cost = trajectory_cost(lin, &z_bar, &u_bar);
    Ok(ControlSolution { u_bar, z_bar, cost, z0_used: z0.clone() })
}

fn trajectory_cost(lin: &Linearization, z: &[Vector], u: &[Vector]) -> f64 {
    let misfit: f64 = (1..z.len()).map(|i| (&lin.c * &z[i] - &lin.y[i]).norm_squared()).sum();
    let penalty: f64 = u.iter().map(|u| u.norm_squared()).sum();
    misfit + penalty / lin.w
}

/// Rolls the frozen dynamics forward under `u` and returns the tracking cost.
pub fn cost_eval(lin: &Linearization, u: &[Vector], z0: &Vector) -> Result<f64> {
    let z = rollout(lin, u, z0)?;
    Ok(trajectory_cost(lin, &z, u))
}

/// Cost plus the initial misfit `‖C Z_0 − Y_0‖²`: the quantity whose minimum over
/// `u` is the quadratic `Z_0ᵀ E_0 Z_0 + 2 h_0ᵀ Z_0 + const` profiled by
/// [`estimate_z0`].
pub fn profiled_cost_eval(lin: &Linearization, u: &[Vector], z0: &Vector) -> Result<f64> {
    Ok(cost_eval(lin, u, z0)? + (&lin.c * z0 - &lin.y[0]).norm_squared())
}

pub fn rollout(lin: &Linearization, u: &[Vector], z0: &Vector) -> Result<Vec<Vector>> {
    let n = lin.steps();
    if u.len() != n || z0.len() != lin.state_dim() {
        return Err(Error::Dimension("control sequence or initial state shape".into()));
    }
    let sqrt_dt = lin.dt.sqrt();
    let mut z = Vec::with_capacity(n + 1);
    z.push(z0.clone());
    for i in 0..n {
        let next = &lin.abar[i] * &z[i] + &lin.r[i] * lin.dt + &lin.gamma[i] * &u[i] * sqrt_dt;
        z.push(next);
    }
    Ok(z)
}

/// Profiled initial condition `−E_0⁻¹ h_0`.
pub fn estimate_z0(ricc: &RiccatiSolution) -> Result<Vector> {
    let e0 = &ricc.e[0];
    let h0 = &ricc.h[0];
    let svd = e0.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) || svd.singular_values.min() <= 1e-14 * smax {
        return Err(Error::SingularInitial);
    }
    let z = svd.solve(&(-h0), 0.0).map_err(|_| Error::SingularInitial)?;
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularInitial);
    }
    Ok(z)
}

/// Backward + forward pass; profiles `Z_0` when `z0` is `None`.
pub fn solve_lq(lin: &Linearization, z0: Option<&Vector>) -> Result<(RiccatiSolution, ControlSolution)> {
    let ricc = riccati_backward(lin)?;
    let start = match z0 {
        Some(z) => z.clone(),
        None => estimate_z0(&ricc)?,
    };
    let sol = control_forward(lin, &ricc, &start)?;
    Ok((ricc, sol))
}
