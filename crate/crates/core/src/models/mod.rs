//! Built-in models and their reference simulation settings.

mod cyclic;
mod fhn;
mod ou;
mod synaptic;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use cyclic::CyclicFeedback;
pub use fhn::FitzHughNagumo;
pub use ou::OrnsteinUhlenbeck;
pub use synaptic::{SynapticConductance, SynapticConstants};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Params, Vector};

pub const MODEL_IDS: [&str; 4] = ["cyclic", "fhn", "synaptic", "ou"];

pub fn make_cyclic_feedback() -> ModelSpec {
    Arc::new(CyclicFeedback::default())
}

pub fn make_fhn() -> ModelSpec {
    Arc::new(FitzHughNagumo::default())
}

pub fn make_synaptic_conductance(constants: SynapticConstants) -> Result<ModelSpec> {
    Ok(Arc::new(SynapticConductance::new(constants)?))
}

pub fn make_ou() -> ModelSpec {
    Arc::new(OrnsteinUhlenbeck::default())
}

/// Looks up a built-in model. `constants` overrides known quantities
/// (`s` for `fhn`; `c_c`, `g_l`, `v_l`, `v_e`, `v_i`, `i_inj`, `g_e` for `synaptic`).
pub fn model_by_id(id: &str, constants: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    let unknown = |allowed: &[&str]| -> Result<()> {
        match constants.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Parameter(format!("model `{id}` has no constant `{k}`"))),
            None => Ok(()),
        }
    };
    match id {
        "cyclic" => {
            unknown(&[])?;
            Ok(make_cyclic_feedback())
        }
        "ou" => {
            unknown(&[])?;
            Ok(make_ou())
        }
        "fhn" => {
            unknown(&["s"])?;
            let s = constants.get("s").copied().unwrap_or(0.0);
            Ok(Arc::new(FitzHughNagumo::with_stimulus(s)))
        }
        "synaptic" => {
            unknown(&["c_c", "g_l", "v_l", "v_e", "v_i", "i_inj", "g_e"])?;
            let mut k = SynapticConstants::default();
            for (name, &v) in constants {
                let slot = match name.as_str() {
                    "c_c" => &mut k.c_c,
                    "g_l" => &mut k.g_l,
                    "v_l" => &mut k.v_l,
                    "v_e" => &mut k.v_e,
                    "v_i" => &mut k.v_i,
                    "i_inj" => &mut k.i_inj,
                    _ => &mut k.g_e,
                };
                *slot = v;
            }
            make_synaptic_conductance(k)
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// Reference simulation study settings for a built-in model.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub truth: Params,
    pub z0: Vector,
    pub weights: Vec<f64>,
    /// Whether the initial condition is profiled out instead of known.
    pub profile_z0: bool,
    pub t_end: f64,
    pub n: usize,
    /// Box for hypoellipticity probes, per coordinate `(lo, hi)`.
    pub probe_box: Vec<(f64, f64)>,
}

pub fn benchmark(id: &str) -> Option<Benchmark> {
    let b = match id {
        "cyclic" => Benchmark {
            truth: Params::new(vec![0.2, 0.15]),
            z0: Vector::zeros(3),
            weights: vec![1e15, 1e20, 1e25, 1e30],
            profile_z0: false,
            t_end: 10.0,
            n: 1000,
            probe_box: vec![(-3.0, 3.0); 3],
        },
        "fhn" => Benchmark {
            truth: Params::new(vec![0.1, 1.5, 0.8, 0.3]),
            z0: Vector::zeros(2),
            weights: vec![1e16, 1e18, 1e20, 1e25],
            profile_z0: true,
            t_end: 10.0,
            n: 1000,
            probe_box: vec![(-3.0, 3.0); 2],
        },
        "synaptic" => Benchmark {
            truth: Params::new(vec![0.5, 1.0, 9.4, 0.1, 0.1]),
            z0: Vector::from_vec(vec![-60.0, 10.0, 1.0]),
            weights: vec![1e8, 5e8, 1e9, 5e9],
            profile_z0: false,
            t_end: 20.0,
            n: 1000,
            probe_box: vec![(-80.0, -40.0), (1.0, 30.0), (1.0, 20.0)],
        },
        "ou" => Benchmark {
            truth: Params::new(vec![1.0, 0.5, 0.3]),
            z0: Vector::from_element(1, 0.5),
            weights: vec![1e4, 1e6, 1e8],
            profile_z0: false,
            t_end: 10.0,
            n: 1000,
            probe_box: vec![(-2.0, 2.0)],
        },
        _ => return None,
    };
    Some(b)
}
