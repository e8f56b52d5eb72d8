//! Conductance-based neuron with diffusive excitatory/inhibitory synaptic input.
//!
//! State `(V, G_E, G_I)`; only `V` is observed. The conductances carry square-root
//! diffusion, clamped at zero so Euler steps that cross zero stay defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dims, Matrix, ParamLayout, ParamSpec, SdeModel, Vector};

const TAU_E: usize = 0;
const TAU_I: usize = 1;
const G_I: usize = 2;
const SIGMA_E: usize = 3;
const SIGMA_I: usize = 4;

/// Known physical constants of the conductance model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynapticConstants {
    /// Membrane capacitance.
    pub c_c: f64,
    pub g_l: f64,
    pub v_l: f64,
    pub v_e: f64,
    pub v_i: f64,
    pub i_inj: f64,
    /// Mean excitatory conductance.
    pub g_e: f64,
}

impl Default for SynapticConstants {
    fn default() -> Self {
        Self { c_c: 1.0, g_l: 50.0, v_l: -70.0, v_e: 0.0, v_i: -80.0, i_inj: -60.0, g_e: 17.8 }
    }
}

#[derive(Debug)]
pub struct SynapticConductance {
    pub constants: SynapticConstants,
    c: Matrix,
    layout: ParamLayout,
}

impl SynapticConductance {
    pub fn new(constants: SynapticConstants) -> Result<Self> {
        if !(constants.c_c > 0.0) {
            return Err(Error::Parameter(format!(
                "capacitance must be > 0, got {}",
                constants.c_c
            )));
        }
        Ok(Self {
            constants,
            c: Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]),
            layout: ParamLayout::new(vec![
                ParamSpec::positive("tau_e"),
                ParamSpec::positive("tau_i"),
                ParamSpec::positive("g_i"),
                ParamSpec::positive("sigma_e"),
                ParamSpec::positive("sigma_i"),
            ]),
        })
    }
}

impl SdeModel for SynapticConductance {
    fn id(&self) -> &str {
        "synaptic"
    }

    fn dims(&self) -> Dims {
        Dims::new(1, 2, 1)
    }

    fn obs_matrix(&self) -> &Matrix {
        &self.c
    }

    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn drift(&self, z: &Vector, _t: f64, psi: &[f64]) -> Vector {
        let k = &self.constants;
        let (v, ge, gi) = (z[0], z[1], z[2]);
        Vector::from_vec(vec![
            (-k.g_l * (v - k.v_l) - ge * (v - k.v_e) - gi * (v - k.v_i) + k.i_inj) / k.c_c,
            -(ge - k.g_e) / psi[TAU_E],
            -(gi - psi[G_I]) / psi[TAU_I],
        ])
    }

    fn pseudo_a(&self, z: &Vector, _t: f64, psi: &[f64]) -> Matrix {
        let k = &self.constants;
        let v = z[0];
        #[rustfmt::skip]
        let a = Matrix::from_row_slice(3, 3, &[
            -k.g_l / k.c_c, -(v - k.v_e) / k.c_c, -(v - k.v_i) / k.c_c,
            0.0, -1.0 / psi[TAU_E], 0.0,
            0.0, 0.0, -1.0 / psi[TAU_I],
        ]);
        a
    }

    fn pseudo_r(&self, _t: f64, psi: &[f64]) -> Vector {
        let k = &self.constants;
        Vector::from_vec(vec![
            (k.g_l * k.v_l + k.i_inj) / k.c_c,
            k.g_e / psi[TAU_E],
            psi[G_I] / psi[TAU_I],
        ])
    }

    fn diffusion_b(&self, z: &Vector, _t: f64, psi: &[f64]) -> Matrix {
        let mut b = Matrix::zeros(2, 2);
        b[(0, 0)] = psi[SIGMA_E] * z[1].max(0.0).sqrt();
        b[(1, 1)] = psi[SIGMA_I] * z[2].max(0.0).sqrt();
        b
    }
}
