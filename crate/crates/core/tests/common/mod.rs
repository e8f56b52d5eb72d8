//! Shared oracles for the integration tests.
#![allow(dead_code)]

use hypoctrl::lq::Linearization;
use hypoctrl::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn rand_vector(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Random time-varying instance with `d ≤ 4`, `d_U ≤ 2`, `n ≤ 10`. Every third
/// instance zeroes a column of `Γ` at some steps so that `Γ` is rank deficient.
pub fn random_instance(seed: u64) -> Linearization {
    let mut rng = rng(seed);
    let d = rng.random_range(1..=4);
    let d_u = rng.random_range(1..=2usize.min(d));
    let d_o = rng.random_range(1..=d);
    let n = rng.random_range(1..=10);
    let dt = rng.random_range(0.05..0.5);
    let deficient = seed.is_multiple_of(3);
    let abar = (0..n).map(|_| Matrix::identity(d, d) + rand_matrix(&mut rng, d, d, 0.8)).collect();
    let r = (0..n).map(|_| rand_vector(&mut rng, d, 1.0)).collect();
    let gamma = (0..n)
        .map(|i| {
            let mut g = rand_matrix(&mut rng, d, d_u, 1.0);
            if deficient && i % 2 == 0 {
                g.column_mut(0).fill(0.0);
            }
            g
        })
        .collect();
    let c = rand_matrix(&mut rng, d_o, d, 1.0);
    let y = (0..=n).map(|_| rand_vector(&mut rng, d_o, 2.0)).collect();
    let w = 10f64.powf(rng.random_range(-1.0..2.0));
    Linearization { abar, r, gamma, dt, c, y, w }
}

/// Stacked least-squares form of the tracking cost over `x = (z0?, u_0..u_{n-1})`:
/// the residual is `H x + b` and the penalty `(1/w)‖u‖²`.
struct Stacked {
    h: Matrix,
    b: Vector,
    penalty: Vector,
}

fn stack(lin: &Linearization, z0: Option<&Vector>) -> Stacked {
    let n = lin.steps();
    let d = lin.state_dim();
    let du = lin.control_dim();
    let d_o = lin.c.nrows();
    let z_cols = if z0.is_none() { d } else { 0 };
    let cols = z_cols + n * du;
    let rows = if z0.is_none() { (n + 1) * d_o } else { n * d_o };
    let sqrt_dt = lin.dt.sqrt();

    // Z_i = S_i x + s_i, tracked as an affine map in x.
    let mut s_mat = Matrix::zeros(d, cols);
    let mut s_vec = Vector::zeros(d);
    match z0 {
        Some(z) => s_vec.copy_from(z),
        None => s_mat.view_mut((0, 0), (d, d)).fill_with_identity(),
    }
    let mut h = Matrix::zeros(rows, cols);
    let mut b = Vector::zeros(rows);
    let mut row = 0;
    if z0.is_none() {
        h.view_mut((0, 0), (d_o, cols)).copy_from(&(&lin.c * &s_mat));
        b.rows_mut(0, d_o).copy_from(&(&lin.c * &s_vec - &lin.y[0]));
        row = d_o;
    }
    for i in 0..n {
        s_mat = &lin.abar[i] * &s_mat;
        s_vec = &lin.abar[i] * &s_vec + &lin.r[i] * lin.dt;
        let g = &lin.gamma[i] * sqrt_dt;
        let mut block = s_mat.view_mut((0, z_cols + i * du), (d, du));
        block += &g;
        h.view_mut((row, 0), (d_o, cols)).copy_from(&(&lin.c * &s_mat));
        b.rows_mut(row, d_o).copy_from(&(&lin.c * &s_vec - &lin.y[i + 1]));
        row += d_o;
    }
    let mut penalty = Vector::from_element(cols, 1.0 / lin.w);
    penalty.rows_mut(0, z_cols).fill(0.0);
    Stacked { h, b, penalty }
}

pub struct DenseSolution {
    pub z0: Option<Vector>,
    pub u: Vec<Vector>,
    pub cost: f64,
}

/// Minimizer of the stacked quadratic through its normal equations, solved by SVD.
/// `z0 = None` also optimizes the initial state (with the `‖C Z_0 − Y_0‖²` term).
pub fn dense_minimizer(lin: &Linearization, z0: Option<&Vector>) -> DenseSolution {
    let st = stack(lin, z0);
    let mut normal = st.h.transpose() * &st.h;
    for k in 0..normal.nrows() {
        normal[(k, k)] += st.penalty[k];
    }
    let rhs = -(st.h.transpose() * &st.b);
    let x = normal.svd(true, true).solve(&rhs, 1e-300).expect("svd solve");
    let resid = &st.h * &x + &st.b;
    let cost = resid.norm_squared() + x.component_mul(&x).dot(&st.penalty);
    let du = lin.control_dim();
    let z_cols = if z0.is_none() { lin.state_dim() } else { 0 };
    let u = (0..lin.steps()).map(|i| x.rows(z_cols + i * du, du).into_owned()).collect();
    DenseSolution { z0: z0.is_none().then(|| x.rows(0, z_cols).into_owned()), u, cost }
}

pub fn max_abs_diff(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}
