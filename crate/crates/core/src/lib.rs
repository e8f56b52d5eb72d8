//! Parameter estimation for partially observed hypoelliptic SDEs through
//! linear-quadratic tracking of the discretized dynamics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hypo;
pub mod lq;
pub mod model;
pub mod models;
pub mod simulate;
pub mod tracking;
pub mod contrast;
pub mod optim;
pub mod estimator;
pub mod config;

pub use error::{Error, Result};
pub use model::{Dims, Matrix, ModelSpec, ParamLayout, ParamSpec, Params, SdeModel, Vector};
