//! Nelder–Mead simplex minimization.

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    /// Stop when every vertex is within `tol · (1 + ‖x_best‖∞)` of the best one.
    pub tol: f64,
    /// Budget shared by the first run and the restart.
    pub max_evals: usize,
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_evals: 500, restarts: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Counter<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    evals: usize,
}

impl Counter<'_> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` from `x0`; the initial simplex offsets coordinate `k` by `steps[k]`.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    opts: &NelderMeadOptions,
) -> Minimum {
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let mut counter = Counter { f, evals: 0 };
    let mut best_x = x0.to_vec();
    let mut best_v = counter.eval(x0);
    if x0.is_empty() {
        return Minimum { x: best_x, value: best_v, evals: counter.evals, converged: true };
    }
    let mut converged = false;
    for _ in 0..=opts.restarts {
        if counter.evals >= opts.max_evals {
            break;
        }
        let (x, v, ok) = run(&mut counter, &best_x, best_v, steps, opts);
        if v <= best_v {
            best_x = x;
            best_v = v;
        }
        converged = ok;
    }
    Minimum { x: best_x, value: best_v, evals: counter.evals, converged }
}

fn run(
    counter: &mut Counter<'_>,
    x0: &[f64],
    v0: f64,
    steps: &[f64],
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, bool) {
    let k = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((x0.to_vec(), v0));
    for i in 0..k {
        if counter.evals >= opts.max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = counter.eval(&x);
        simplex.push((x, v));
    }
    if simplex.len() < k + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, v) = simplex.swap_remove(0);
        return (x, v, false);
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let scale = 1.0 + simplex[0].0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.tol * scale {
            let (x, v) = simplex.swap_remove(0);
            return (x, v, true);
        }
        if counter.evals >= opts.max_evals {
            let (x, v) = simplex.swap_remove(0);
            return (x, v, false);
        }

        let centroid: Vec<f64> = (0..k).map(|j| simplex[..k].iter().map(|(x, _)| x[j]).sum::<f64>() / k as f64).collect();
        let worst = simplex[k].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(1.0);
        let vr = counter.eval(&xr);
        if vr < simplex[0].1 {
            let xe = along(2.0);
            let ve = counter.eval(&xe);
            simplex[k] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[k - 1].1 {
            simplex[k] = (xr, vr);
            continue;
        }
        let (xc, vc) = if vr < worst.1 {
            let x = along(0.5);
            let v = counter.eval(&x);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = counter.eval(&x);
            (x, v)
        };
        if vc < worst.1.min(vr) {
            simplex[k] = (xc, vc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if counter.evals >= opts.max_evals {
                break;
            }
            let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let v = counter.eval(&x);
            *vertex = (x, v);
        }
    }
}
