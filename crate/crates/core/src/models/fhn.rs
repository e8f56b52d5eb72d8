//! Hypoelliptic FitzHugh–Nagumo neuron: membrane potential `V` smooth, recovery `U` rough.

use crate::model::{Dims, Matrix, ParamLayout, ParamSpec, SdeModel, Vector};

const EPS: usize = 0;
const GAMMA: usize = 1;
const BETA: usize = 2;
const SIGMA: usize = 3;

#[derive(Debug)]
pub struct FitzHughNagumo {
    /// Stimulus current, known.
    pub s: f64,
    c: Matrix,
    layout: ParamLayout,
}

impl FitzHughNagumo {
    pub fn with_stimulus(s: f64) -> Self {
        Self {
            s,
            c: Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            layout: ParamLayout::new(vec![
                ParamSpec::positive("epsilon"),
                ParamSpec::free("gamma"),
                ParamSpec::free("beta"),
                ParamSpec::positive("sigma"),
            ]),
        }
    }
}

impl Default for FitzHughNagumo {
    fn default() -> Self {
        Self::with_stimulus(0.0)
    }
}

impl SdeModel for FitzHughNagumo {
    fn id(&self) -> &str {
        "fhn"
    }

    fn dims(&self) -> Dims {
        Dims::new(1, 1, 1)
    }

    fn obs_matrix(&self) -> &Matrix {
        &self.c
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn drift(&self, z: &Vector, _t: f64, psi: &[f64]) -> Vector {
        let (v, u) = (z[0], z[1]);
        Vector::from_vec(vec![
            (v - v * v * v - u + self.s) / psi[EPS],
            psi[GAMMA] * v - u + psi[BETA],
        ])
    }

    fn pseudo_a(&self, z: &Vector, _t: f64, psi: &[f64]) -> Matrix {
        let v = z[0];
        let eps = psi[EPS];
        Matrix::from_row_slice(2, 2, &[(1.0 - v * v) / eps, -1.0 / eps, psi[GAMMA], -1.0])
    }

    fn pseudo_r(&self, _t: f64, psi: &[f64]) -> Vector {
        Vector::from_vec(vec![self.s / psi[EPS], psi[BETA]])
    }

    fn diffusion_b(&self, _z: &Vector, _t: f64, psi: &[f64]) -> Matrix {
        Matrix::from_element(1, 1, psi[SIGMA])
    }
}
