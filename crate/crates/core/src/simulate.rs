//! Euler–Maruyama simulation on the observation grid.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Matrix, Params, SdeModel, Vector};

/// Any state entry beyond this magnitude aborts the simulation.
pub const EXPLOSION_BOUND: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub observations: Vec<Vector>,
    pub seed: u64,
}

impl Trajectory {
    /// Number of Euler steps `n` (the grid has `n + 1` points).
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Deterministic RNG for a given seed.
pub fn rng_for_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `Z_{i+1} = Z_i + Δ f(Z_i, t_i) + √Δ Γ(Z_i, t_i) u_i` with `Δ = T / n`.
pub fn simulate(
    model: &dyn SdeModel,
    psi: &Params,
    z0: &Vector,
    t_end: f64,
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    let dims = model.dims();
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("T must be > 0, got {t_end}")));
    }
    if n < 1 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if z0.len() != dims.d() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, model has d = {}",
            z0.len(),
            dims.d()
        )));
    }
    model.layout().validate_closed(psi.as_slice())?;

    let p = psi.as_slice();
    let dt = t_end / n as f64;
    let sqrt_dt = dt.sqrt();
    let mut rng = rng_for_seed(seed);
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let mut states = Vec::with_capacity(n + 1);
    states.push(z0.clone());
    let mut noise = Vector::zeros(dims.d_u);
    for i in 0..n {
        let z = &states[i];
        let t = times[i];
        for x in noise.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        let mut next = z + model.drift(z, t, p) * dt;
        let b = model.diffusion_b(z, t, p);
        let kick = b * &noise * sqrt_dt;
        let mut rough = next.rows_mut(dims.d_v, dims.d_u);
        rough += kick;
        if next.iter().any(|x| !x.is_finite() || x.abs() > EXPLOSION_BOUND) {
            return Err(Error::Explosion { step: i + 1 });
        }
        states.push(std::mem::take(&mut next));
    }
    let observations = observe_states(model.obs_matrix(), &states);
    Ok(Trajectory { times, states, observations, seed })
}

pub fn observe_states(c: &Matrix, states: &[Vector]) -> Vec<Vector> {
    states.iter().map(|z| c * z).collect()
}

/// `C Z_i` for every grid point; identical to `traj.observations`.
pub fn observe(model: &dyn SdeModel, traj: &Trajectory) -> Vec<Vector> {
    observe_states(model.obs_matrix(), &traj.states)
}

/// Writes `t,z1..zd,y1..ydo`, one row per grid point.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let d = traj.states.first().map_or(0, |z| z.len());
    let d_o = traj.observations.first().map_or(0, |y| y.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|k| format!("z{k}")));
    header.extend((1..=d_o).map(|k| format!("y{k}")));
    w.write_record(&header)?;
    for ((t, z), y) in traj.times.iter().zip(&traj.states).zip(&traj.observations) {
        let mut row = Vec::with_capacity(1 + d + d_o);
        row.push(format_f64(*t));
        row.extend(z.iter().map(|x| format_f64(*x)));
        row.extend(y.iter().map(|x| format_f64(*x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn format_f64(x: f64) -> String {
    // shortest repr that round-trips exactly
    format!("{x:?}")
}

/// Observation data read from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedData {
    pub times: Vec<f64>,
    pub observations: Vec<Vector>,
    pub columns: Vec<String>,
}

impl ObservedData {
    /// Uniform grid step; fails on non-uniform or decreasing time columns.
    pub fn dt(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::Input("need at least two time points".into()));
        }
        let dt = (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Input("time column is not increasing".into()));
        }
        for (k, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
                return Err(Error::Input(format!(
                    "time grid is not uniform near line {}",
                    k + 3
                )));
            }
        }
        Ok(dt)
    }
}

/// Reads observations from a CSV with a `t` column. `obs_cols` selects columns by
/// header name or 0-based index; by default every `y*` column is used, or every
/// non-`t` column when there are none.
pub fn read_observations_csv<R: Read>(input: R, obs_cols: Option<&[String]>) -> Result<ObservedData> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let t_idx = headers
        .iter()
        .position(|h| h == "t")
        .ok_or_else(|| Error::Input("missing `t` column".into()))?;
    let cols: Vec<usize> = match obs_cols {
        Some(sel) => sel
            .iter()
            .map(|s| {
                headers
                    .iter()
                    .position(|h| h == s)
                    .or_else(|| s.parse::<usize>().ok().filter(|&i| i < headers.len()))
                    .ok_or_else(|| Error::Input(format!("no column `{s}`")))
            })
            .collect::<Result<_>>()?,
        None => {
            let ys: Vec<usize> = (0..headers.len()).filter(|&i| headers[i].starts_with('y')).collect();
            if ys.is_empty() {
                (0..headers.len()).filter(|&i| i != t_idx).collect()
            } else {
                ys
            }
        }
    };
    if cols.is_empty() {
        return Err(Error::Input("no observation columns".into()));
    }
    let mut times = Vec::new();
    let mut observations = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != headers.len() {
            return Err(Error::Input(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                rec.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("line {line}: non-numeric value `{}`", &rec[i])))
        };
        times.push(parse(t_idx)?);
        observations.push(Vector::from_vec(cols.iter().map(|&i| parse(i)).collect::<Result<_>>()?));
    }
    if observations.len() < 2 {
        return Err(Error::Input("need at least two rows of data".into()));
    }
    Ok(ObservedData {
        times,
        observations,
        columns: cols.iter().map(|&i| headers[i].clone()).collect(),
    })
}
