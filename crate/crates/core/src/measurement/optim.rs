/// Settings for [`bfgs_maximize`].
#[derive(Clone, Debug, PartialEq)]
pub struct BfgsOptions {
    /// Stop when the gradient ∞-norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at every accepted iterate, starting point first.
    pub trace: Vec<f64>,
}

fn step_size(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Central-difference gradient.
pub fn numeric_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step_size(x[i]);
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Symmetric finite-difference Hessian, row-major.
pub fn numeric_hessian(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut h = vec![0.0; n * n];
    let mut y = x.to_vec();
    let f0 = f(x);
    let hs: Vec<f64> = x.iter().map(|&v| 1e-4 * v.abs().max(1.0)).collect();
    for i in 0..n {
        y[i] = x[i] + hs[i];
        let up = f(&y);
        y[i] = x[i] - hs[i];
        let down = f(&y);
        y[i] = x[i];
        h[i * n + i] = (up - 2.0 * f0 + down) / (hs[i] * hs[i]);
        for j in 0..i {
            let mut e = |si: f64, sj: f64| {
                y[i] = x[i] + si * hs[i];
                y[j] = x[j] + sj * hs[j];
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * hs[i] * hs[j]);
            h[i * n + j] = v;
            h[j * n + i] = v;
        }
    }
    h
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Quasi-Newton ascent with numeric gradients and a backtracking line
/// search; accepted iterates never decrease `f`.
pub fn bfgs_maximize(f: &impl Fn(&[f64]) -> f64, x0: Vec<f64>, opts: &BfgsOptions) -> BfgsResult {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = numeric_gradient(f, &x);
    // inverse Hessian approximation of -f
    let mut hinv = vec![0.0; n * n];
    let reset = |h: &mut [f64]| {
        h.fill(0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut hinv);
    let mut trace = vec![fx];
    let mut iterations = 0;
    let mut converged = inf_norm(&g) < opts.tol;
    let mut first = true;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i * n + j] * g[j]).sum()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            reset(&mut hinv);
            d = g.clone();
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        if first {
            // keep the first unscaled step modest
            let s = 1.0 / inf_norm(&d).max(1.0);
            d.iter_mut().for_each(|v| *v *= s);
            slope *= s;
            first = false;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let fn_ = f(&xn);
            if fn_.is_finite() && fn_ >= fx + 1e-4 * t * slope {
                accepted = Some((xn, fn_));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            // line search failed: the gradient is at its numerical floor
            break;
        };
        let gn = numeric_gradient(f, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        // curvature pair for the minimization of -f
        let yv: Vec<f64> = g.iter().zip(&gn).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i * n + j] * yv[j]).sum()).collect();
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += (1.0 + yhy * rho) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        x = xn;
        fx = fn_;
        g = gn;
        trace.push(fx);
        converged = inf_norm(&g) < opts.tol;
    }
    BfgsResult {
        gradient_norm: inf_norm(&g),
        x,
        value: fx,
        iterations,
        converged,
        trace,
    }
}
