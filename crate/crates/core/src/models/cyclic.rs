//! Monotone cyclic feedback system: three linearly coupled populations, noise on the last.

use crate::model::{Dims, Matrix, ParamLayout, ParamSpec, SdeModel, Vector};

const NU: usize = 0;
const C: usize = 1;

#[derive(Debug)]
pub struct CyclicFeedback {
    c: Matrix,
    layout: ParamLayout,
}

impl Default for CyclicFeedback {
    fn default() -> Self {
        Self {
            c: Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            layout: ParamLayout::new(vec![ParamSpec::free("nu"), ParamSpec::positive("c")]),
        }
    }
}

impl SdeModel for CyclicFeedback {
    fn id(&self) -> &str {
        "cyclic"
    }

    fn dims(&self) -> Dims {
        Dims::new(2, 1, 1)
    }

    fn obs_matrix(&self) -> &Matrix {
        &self.c
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn drift(&self, z: &Vector, _t: f64, psi: &[f64]) -> Vector {
        let nu = psi[NU];
        Vector::from_vec(vec![-nu * z[0] + z[1], -nu * z[1] + z[2], -nu * z[2]])
    }

    fn pseudo_a(&self, _z: &Vector, _t: f64, psi: &[f64]) -> Matrix {
        let nu = psi[NU];
        #[rustfmt::skip]
        let a = Matrix::from_row_slice(3, 3, &[
            -nu, 1.0, 0.0,
            0.0, -nu, 1.0,
            0.0, 0.0, -nu,
        ]);
        a
    }

    fn pseudo_r(&self, _t: f64, _psi: &[f64]) -> Vector {
        Vector::zeros(3)
    }

    fn diffusion_b(&self, _z: &Vector, _t: f64, psi: &[f64]) -> Matrix {
        Matrix::from_element(1, 1, psi[C])
    }
}
