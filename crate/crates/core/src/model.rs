//! SDE model abstraction.
//!
//! A model is `dZ = f(Z,t) dt + Γ(Z,t) dW` with the state split into `d_V` smooth
//! coordinates (no direct noise) stacked over `d_U` rough ones, observed through a
//! constant matrix `C` without measurement error. Every model also carries a
//! pseudo-linear decomposition `f(z,t) = A(z,t) z + r(t)` which the tracking
//! solver freezes along a reference trajectory.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative tolerance used when registering user models.
pub const PSEUDO_LINEAR_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_v: usize,
    pub d_u: usize,
    pub d_o: usize,
}

impl Dims {
    pub fn new(d_v: usize, d_u: usize, d_o: usize) -> Self {
        Self { d_v, d_u, d_o }
    }

    /// Full state dimension `d_V + d_U`.
    pub fn d(&self) -> usize {
        self.d_v + self.d_u
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub positive: bool,
    pub fixed: Option<f64>,
}

impl ParamSpec {
    pub fn free(name: &str) -> Self {
        Self { name: name.to_string(), positive: false, fixed: None }
    }

    pub fn positive(name: &str) -> Self {
        Self { name: name.to_string(), positive: true, fixed: None }
    }
}

/// Ordered parameter descriptors; the flattened parameter vector follows this order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    specs: Vec<ParamSpec>,
}

impl ParamLayout {
    pub fn new(specs: Vec<ParamSpec>) -> Self {
        Self { specs }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn names(&self) -> Vec<&str> {
        self.specs.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    /// Indices of parameters the optimizer is allowed to move.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.specs.len()).filter(|&i| self.specs[i].fixed.is_none()).collect()
    }

    pub fn fix(&mut self, name: &str, value: f64) -> Result<()> {
        let idx = self
            .index_of(name)
            .ok_or_else(|| Error::Parameter(format!("unknown parameter `{name}`")))?;
        if self.specs[idx].positive && value <= 0.0 {
            return Err(Error::Parameter(format!("`{name}` must be > 0, got {value}")));
        }
        self.specs[idx].fixed = Some(value);
        Ok(())
    }

    /// Strict check: positive-flagged entries `> 0`, fixed entries equal.
    pub fn validate(&self, values: &[f64]) -> Result<()> {
        self.check(values, true)
    }

    /// Like [`ParamLayout::validate`] but admits the boundary value `0` for
    /// positive-flagged entries (degenerate diffusion in simulations and checks).
    pub fn validate_closed(&self, values: &[f64]) -> Result<()> {
        self.check(values, false)
    }

    fn check(&self, values: &[f64], strict: bool) -> Result<()> {
        if values.len() != self.specs.len() {
            return Err(Error::Parameter(format!(
                "expected {} parameters, got {}",
                self.specs.len(),
                values.len()
            )));
        }
        for (spec, &v) in self.specs.iter().zip(values) {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("`{}` is not finite", spec.name)));
            }
            if spec.positive && (v < 0.0 || (strict && v == 0.0)) {
                return Err(Error::Parameter(format!("`{}` must be > 0, got {v}", spec.name)));
            }
            if let Some(f) = spec.fixed {
                if f != v {
                    return Err(Error::Parameter(format!(
                        "`{}` is fixed to {f}, got {v}",
                        spec.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds a parameter vector from a name→value map. Missing names fall back to
    /// the fixed value, then to `defaults`.
    pub fn params_from_map(
        &self,
        map: &BTreeMap<String, f64>,
        defaults: Option<&Params>,
    ) -> Result<Params> {
        self.assemble(map, defaults, true)
    }

    /// [`ParamLayout::params_from_map`] admitting zero for positive-flagged entries.
    pub fn params_from_map_closed(
        &self,
        map: &BTreeMap<String, f64>,
        defaults: Option<&Params>,
    ) -> Result<Params> {
        self.assemble(map, defaults, false)
    }

    fn assemble(
        &self,
        map: &BTreeMap<String, f64>,
        defaults: Option<&Params>,
        strict: bool,
    ) -> Result<Params> {
        for k in map.keys() {
            if self.index_of(k).is_none() {
                return Err(Error::Parameter(format!(
                    "unknown parameter `{k}` (expected one of {})",
                    self.names().join(", ")
                )));
            }
        }
        let mut values = Vec::with_capacity(self.len());
        for (i, spec) in self.specs.iter().enumerate() {
            let v = match (map.get(&spec.name), spec.fixed, defaults) {
                (Some(&v), _, _) => v,
                (None, Some(f), _) => f,
                (None, None, Some(d)) => d.as_slice()[i],
                (None, None, None) => {
                    return Err(Error::Parameter(format!("missing parameter `{}`", spec.name)))
                }
            };
            values.push(v);
        }
        self.check(&values, strict)?;
        Ok(Params(values))
    }

    pub fn to_map(&self, params: &Params) -> BTreeMap<String, f64> {
        self.specs
            .iter()
            .zip(params.as_slice())
            .map(|(s, &v)| (s.name.clone(), v))
            .collect()
    }
}

/// Flattened `ψ = (θ, σ)` in layout order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params(pub Vec<f64>);

impl Params {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for Params {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Evaluators of a partially observed SDE. Implementations must be pure.
pub trait SdeModel: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;
    fn dims(&self) -> Dims;
    fn obs_matrix(&self) -> &Matrix;
    fn layout(&self) -> &ParamLayout;

    /// Full drift `f = (g; h)`.
    fn drift(&self, z: &Vector, t: f64, psi: &[f64]) -> Vector;
    fn pseudo_a(&self, z: &Vector, t: f64, psi: &[f64]) -> Matrix;
    fn pseudo_r(&self, t: f64, psi: &[f64]) -> Vector;
    /// Rough-block diffusion `B`, `d_U × d_U`.
    fn diffusion_b(&self, z: &Vector, t: f64, psi: &[f64]) -> Matrix;

    /// `Γ = [0_{d_V×d_U}; B]`.
    fn gamma(&self, z: &Vector, t: f64, psi: &[f64]) -> Matrix {
        let dims = self.dims();
        let b = self.diffusion_b(z, t, psi);
        let mut g = Matrix::zeros(dims.d(), dims.d_u);
        g.view_mut((dims.d_v, 0), (dims.d_u, dims.d_u)).copy_from(&b);
        g
    }
}

pub type ModelSpec = Arc<dyn SdeModel>;

/// Max over samples of `‖A(z,t) z + r(t) − f(z,t)‖_∞`.
pub fn check_pseudo_linear(model: &dyn SdeModel, psi: &Params, samples: &[(Vector, f64)]) -> f64 {
    samples
        .iter()
        .map(|(z, t)| {
            let p = psi.as_slice();
            let lin = model.pseudo_a(z, *t, p) * z + model.pseudo_r(*t, p);
            (lin - model.drift(z, *t, p)).amax()
        })
        .fold(0.0, f64::max)
}

/// Same as [`check_pseudo_linear`] but scaled by `1 + ‖f‖_∞` at each sample.
pub fn check_pseudo_linear_relative(
    model: &dyn SdeModel,
    psi: &Params,
    samples: &[(Vector, f64)],
) -> f64 {
    samples
        .iter()
        .map(|(z, t)| {
            let p = psi.as_slice();
            let f = model.drift(z, *t, p);
            let lin = model.pseudo_a(z, *t, p) * z + model.pseudo_r(*t, p);
            (lin - &f).amax() / (1.0 + f.amax())
        })
        .fold(0.0, f64::max)
}

fn row_rank(c: &Matrix) -> usize {
    c.clone().svd(false, false).rank(1e-12 * (1.0 + c.amax()))
}

type DriftFn = dyn Fn(&Vector, f64, &[f64]) -> Vector + Send + Sync;
type MatFn = dyn Fn(&Vector, f64, &[f64]) -> Matrix + Send + Sync;
type AffineFn = dyn Fn(f64, &[f64]) -> Vector + Send + Sync;

/// A user model assembled from closures. Build with [`FnModel::new`] and
/// register through [`register_model`], which checks the decomposition.
pub struct FnModel {
    id: String,
    dims: Dims,
    c: Matrix,
    layout: ParamLayout,
    drift: Box<DriftFn>,
    pseudo_a: Box<MatFn>,
    pseudo_r: Box<AffineFn>,
    diffusion_b: Box<MatFn>,
}

impl fmt::Debug for FnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("id", &self.id)
            .field("dims", &self.dims)
            .field("layout", &self.layout)
            .finish_non_exhaustive()
    }
}

impl FnModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: &str,
        dims: Dims,
        c: Matrix,
        layout: ParamLayout,
        drift: impl Fn(&Vector, f64, &[f64]) -> Vector + Send + Sync + 'static,
        pseudo_a: impl Fn(&Vector, f64, &[f64]) -> Matrix + Send + Sync + 'static,
        pseudo_r: impl Fn(f64, &[f64]) -> Vector + Send + Sync + 'static,
        diffusion_b: impl Fn(&Vector, f64, &[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.to_string(),
            dims,
            c,
            layout,
            drift: Box::new(drift),
            pseudo_a: Box::new(pseudo_a),
            pseudo_r: Box::new(pseudo_r),
            diffusion_b: Box::new(diffusion_b),
        }
    }
}

impl SdeModel for FnModel {
    fn id(&self) -> &str {
        &self.id
    }
    fn dims(&self) -> Dims {
        self.dims
    }
    fn obs_matrix(&self) -> &Matrix {
        &self.c
    }
    fn layout(&self) -> &ParamLayout {
        &self.layout
    }
    fn drift(&self, z: &Vector, t: f64, psi: &[f64]) -> Vector {
        (self.drift)(z, t, psi)
    }
    fn pseudo_a(&self, z: &Vector, t: f64, psi: &[f64]) -> Matrix {
        (self.pseudo_a)(z, t, psi)
    }
    fn pseudo_r(&self, t: f64, psi: &[f64]) -> Vector {
        (self.pseudo_r)(t, psi)
    }
    fn diffusion_b(&self, z: &Vector, t: f64, psi: &[f64]) -> Matrix {
        (self.diffusion_b)(z, t, psi)
    }
}

/// Checks shapes, observation rank and the pseudo-linear identity on `samples`
/// before handing out a shareable model.
pub fn register_model(
    model: impl SdeModel + 'static,
    psi: &Params,
    samples: &[(Vector, f64)],
) -> Result<ModelSpec> {
    validate_model(&model, psi, samples)?;
    Ok(Arc::new(model))
}

pub fn validate_model(model: &dyn SdeModel, psi: &Params, samples: &[(Vector, f64)]) -> Result<()> {
    let dims = model.dims();
    let c = model.obs_matrix();
    if c.nrows() != dims.d_o || c.ncols() != dims.d() {
        return Err(Error::Dimension(format!(
            "observation matrix is {}x{}, expected {}x{}",
            c.nrows(),
            c.ncols(),
            dims.d_o,
            dims.d()
        )));
    }
    if row_rank(c) != dims.d_o {
        return Err(Error::Dimension("observation matrix lacks full row rank".into()));
    }
    model.layout().validate(psi.as_slice())?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples for the pseudo-linear check".into()));
    }
    for (z, t) in samples {
        let p = psi.as_slice();
        if z.len() != dims.d() {
            return Err(Error::Dimension(format!("sample state has length {}", z.len())));
        }
        let f = model.drift(z, *t, p);
        let a = model.pseudo_a(z, *t, p);
        let r = model.pseudo_r(*t, p);
        let b = model.diffusion_b(z, *t, p);
        if f.len() != dims.d() || a.shape() != (dims.d(), dims.d()) || r.len() != dims.d() {
            return Err(Error::Dimension("drift/pseudo-linear evaluator shapes".into()));
        }
        if b.shape() != (dims.d_u, dims.d_u) {
            return Err(Error::Dimension("diffusion evaluator shape".into()));
        }
    }
    let resid = check_pseudo_linear_relative(model, psi, samples);
    if !(resid <= PSEUDO_LINEAR_TOL) {
        return Err(Error::InvalidArgument(format!(
            "pseudo-linear decomposition does not reproduce the drift (relative residual {resid:.3e})"
        )));
    }
    Ok(())
}

/// Wraps a model with a different parameter layout (e.g. extra fixed entries).
#[derive(Debug)]
pub struct Relayout {
    inner: ModelSpec,
    layout: ParamLayout,
}

/// Returns a model whose layout pins the given parameters to fixed values.
pub fn fix_params(model: &ModelSpec, fixed: &[(&str, f64)]) -> Result<ModelSpec> {
    let mut layout = model.layout().clone();
    for (name, v) in fixed {
        layout.fix(name, *v)?;
    }
    Ok(Arc::new(Relayout { inner: model.clone(), layout }))
}

impl SdeModel for Relayout {
    fn id(&self) -> &str {
        self.inner.id()
    }
    fn dims(&self) -> Dims {
        self.inner.dims()
    }
    fn obs_matrix(&self) -> &Matrix {
        self.inner.obs_matrix()
    }
    fn layout(&self) -> &ParamLayout {
        &self.layout
    }
    fn drift(&self, z: &Vector, t: f64, psi: &[f64]) -> Vector {
        self.inner.drift(z, t, psi)
    }
    fn pseudo_a(&self, z: &Vector, t: f64, psi: &[f64]) -> Matrix {
        self.inner.pseudo_a(z, t, psi)
    }
    fn pseudo_r(&self, t: f64, psi: &[f64]) -> Vector {
        self.inner.pseudo_r(t, psi)
    }
    fn diffusion_b(&self, z: &Vector, t: f64, psi: &[f64]) -> Matrix {
        self.inner.diffusion_b(z, t, psi)
    }
    fn gamma(&self, z: &Vector, t: f64, psi: &[f64]) -> Matrix {
        self.inner.gamma(z, t, psi)
    }
}
