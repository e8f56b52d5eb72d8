//! Scalar Ornstein–Uhlenbeck process, fully observed. The elliptic (`d_V = 0`) reference model.

use crate::model::{Dims, Matrix, ParamLayout, ParamSpec, SdeModel, Vector};

#[derive(Debug)]
pub struct OrnsteinUhlenbeck {
    c: Matrix,
    layout: ParamLayout,
}

impl Default for OrnsteinUhlenbeck {
    fn default() -> Self {
        Self {
            c: Matrix::identity(1, 1),
            layout: ParamLayout::new(vec![
                ParamSpec::positive("theta"),
                ParamSpec::free("mu"),
                ParamSpec::positive("sigma"),
            ]),
        }
    }
}

impl SdeModel for OrnsteinUhlenbeck {
    fn id(&self) -> &str {
        "ou"
    }

    fn dims(&self) -> Dims {
        Dims::new(0, 1, 1)
    }

    fn obs_matrix(&self) -> &Matrix {
        &self.c
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn drift(&self, z: &Vector, _t: f64, psi: &[f64]) -> Vector {
        Vector::from_element(1, psi[0] * (psi[1] - z[0]))
    }

    fn pseudo_a(&self, _z: &Vector, _t: f64, psi: &[f64]) -> Matrix {
        Matrix::from_element(1, 1, -psi[0])
    }

    fn pseudo_r(&self, _t: f64, psi: &[f64]) -> Vector {
        Vector::from_element(1, psi[0] * psi[1])
    }

    fn diffusion_b(&self, _z: &Vector, _t: f64, psi: &[f64]) -> Matrix {
        Matrix::from_element(1, 1, psi[2])
    }
}
