use thiserror::Error;

use super::RandomStream;

/// Cap on hull abscissae; beyond it the envelope stops adapting.
pub const MAX_ABSCISSAE: usize = 50;

const CONCAVITY_TOL: f64 = 1e-8;
const MAX_TRIALS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArsError {
    #[error("log density is not concave near x = {x}")]
    NotLogConcave { x: f64 },
    #[error("log density or slope is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("no initial abscissa lies inside the domain ({lo}, {hi})")]
    EmptyDomain { lo: f64, hi: f64 },
    #[error("could not bracket the mode; density looks improper")]
    Improper,
    #[error("no acceptance after {0} trials")]
    Exhausted(usize),
}

/// A log-density known up to an additive constant, with its derivative.
pub trait LogDensity {
    /// `(ln f(x), d/dx ln f(x))` for `x` inside the domain.
    fn eval(&self, x: f64) -> (f64, f64);

    /// Open support `(lo, hi)`; either end may be infinite.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

impl<F: Fn(f64) -> (f64, f64)> LogDensity for F {
    fn eval(&self, x: f64) -> (f64, f64) {
        self(x)
    }
}

struct Hull {
    lo: f64,
    hi: f64,
    x: Vec<f64>,
    h: Vec<f64>,
    s: Vec<f64>,
    // z[j] is the right edge of segment j; the last entry is `hi`
    z: Vec<f64>,
    log_mass: Vec<f64>,
}

impl Hull {
    fn insert(&mut self, xv: f64, hv: f64, sv: f64) {
        let pos = self.x.partition_point(|&v| v < xv);
        if self.x.get(pos) == Some(&xv) {
            return;
        }
        self.x.insert(pos, xv);
        self.h.insert(pos, hv);
        self.s.insert(pos, sv);
    }

    fn check_concave(&self) -> Result<(), ArsError> {
        for j in 0..self.x.len().saturating_sub(1) {
            let (x0, x1) = (self.x[j], self.x[j + 1]);
            let (h0, h1) = (self.h[j], self.h[j + 1]);
            let tol = CONCAVITY_TOL * (1.0 + h0.abs().max(h1.abs()));
            // each tangent must lie above the neighbouring point
            if h1 > h0 + self.s[j] * (x1 - x0) + tol || h0 > h1 + self.s[j + 1] * (x0 - x1) + tol {
                return Err(ArsError::NotLogConcave { x: x0 });
            }
        }
        Ok(())
    }

    fn upper_at(&self, j: usize, x: f64) -> f64 {
        self.h[j] + self.s[j] * (x - self.x[j])
    }

    fn rebuild(&mut self) {
        let k = self.x.len();
        self.z.clear();
        for j in 0..k - 1 {
            let (x0, x1) = (self.x[j], self.x[j + 1]);
            let ds = self.s[j] - self.s[j + 1];
            let z = if ds.abs() <= 1e-12 * (self.s[j].abs() + self.s[j + 1].abs()) || ds <= 0.0 {
                0.5 * (x0 + x1)
            } else {
                (self.h[j + 1] - self.h[j] - x1 * self.s[j + 1] + x0 * self.s[j]) / ds
            };
            self.z.push(z.clamp(x0, x1));
        }
        self.z.push(self.hi);
        self.log_mass.clear();
        for j in 0..k {
            let a = if j == 0 { self.lo } else { self.z[j - 1] };
            let b = self.z[j];
            self.log_mass.push(self.segment_log_mass(j, a, b));
        }
    }

    fn segment_log_mass(&self, j: usize, a: f64, b: f64) -> f64 {
        let w = b - a;
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let s = self.s[j];
        if w.is_finite() && (s * w).abs() < 1e-10 {
            return self.upper_at(j, 0.5 * (a + b)) + w.ln();
        }
        if s > 0.0 {
            self.upper_at(j, b) + (-(-s * w).exp_m1()).ln() - s.ln()
        } else {
            self.upper_at(j, a) + (-(s * w).exp_m1()).ln() - (-s).ln()
        }
    }

    fn draw(&self, stream: &mut RandomStream) -> (f64, usize) {
        let top = self.log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = self.log_mass.iter().map(|m| (m - top).exp()).sum();
        let mut target = stream.uniform() * total;
        let mut j = self.log_mass.len() - 1;
        for (i, m) in self.log_mass.iter().enumerate() {
            let p = (m - top).exp();
            if target < p {
                j = i;
                break;
            }
            target -= p;
        }
        let a = if j == 0 { self.lo } else { self.z[j - 1] };
        let b = self.z[j];
        let w = b - a;
        let s = self.s[j];
        let u = stream.uniform();
        let x = if w.is_finite() && (s * w).abs() < 1e-10 {
            a + u * w
        } else if s > 0.0 {
            b + (u + (1.0 - u) * (-s * w).exp()).ln() / s
        } else {
            a + (u * (s * w).exp_m1()).ln_1p() / s
        };
        (x.clamp(a, b), j)
    }

    fn lower_at(&self, x: f64) -> f64 {
        let k = self.x.len();
        if k < 2 || x < self.x[0] || x > self.x[k - 1] {
            return f64::NEG_INFINITY;
        }
        let i = self.x.partition_point(|&v| v <= x).min(k - 1).max(1) - 1;
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        ((x1 - x) * self.h[i] + (x - x0) * self.h[i + 1]) / (x1 - x0)
    }
}

fn eval_checked(density: &impl LogDensity, x: f64) -> Result<(f64, f64), ArsError> {
    let (h, s) = density.eval(x);
    if h.is_finite() && s.is_finite() {
        Ok((h, s))
    } else {
        Err(ArsError::NonFinite { x })
    }
}

/// One exact draw from a log-concave density by tangent-envelope adaptive
/// rejection sampling. Initial abscissae outside the open domain are ignored;
/// on infinite ends the hull is extended until it brackets the mode.
pub fn ars_sample(
    density: &impl LogDensity,
    init: &[f64],
    stream: &mut RandomStream,
) -> Result<f64, ArsError> {
    let (lo, hi) = density.domain();
    let mut hull = Hull {
        lo,
        hi,
        x: Vec::with_capacity(MAX_ABSCISSAE + 4),
        h: Vec::with_capacity(MAX_ABSCISSAE + 4),
        s: Vec::with_capacity(MAX_ABSCISSAE + 4),
        z: Vec::with_capacity(MAX_ABSCISSAE + 4),
        log_mass: Vec::with_capacity(MAX_ABSCISSAE + 4),
    };
    for &x in init {
        if x > lo && x < hi && x.is_finite() {
            let (h, s) = eval_checked(density, x)?;
            hull.insert(x, h, s);
        }
    }
    if hull.x.is_empty() {
        return Err(ArsError::EmptyDomain { lo, hi });
    }

    if lo == f64::NEG_INFINITY {
        let mut step = (hull.x[hull.x.len() - 1] - hull.x[0]).max(1.0);
        let mut tries = 0;
        while hull.s[0] <= 0.0 {
            tries += 1;
            if tries > 60 {
                return Err(ArsError::Improper);
            }
            let x = hull.x[0] - step;
            let (h, s) = eval_checked(density, x)?;
            hull.insert(x, h, s);
            step *= 2.0;
        }
    }
    if hi == f64::INFINITY {
        let mut step = (hull.x[hull.x.len() - 1] - hull.x[0]).max(1.0);
        let mut tries = 0;
        while hull.s[hull.s.len() - 1] >= 0.0 {
            tries += 1;
            if tries > 60 {
                return Err(ArsError::Improper);
            }
            let x = hull.x[hull.x.len() - 1] + step;
            let (h, s) = eval_checked(density, x)?;
            hull.insert(x, h, s);
            step *= 2.0;
        }
    }
    hull.check_concave()?;
    hull.rebuild();

    for _ in 0..MAX_TRIALS {
        let (x, j) = hull.draw(stream);
        let upper = hull.upper_at(j, x);
        let log_w = stream.uniform().ln();
        if log_w <= hull.lower_at(x) - upper {
            return Ok(x);
        }
        let (h, s) = eval_checked(density, x)?;
        if h > upper + CONCAVITY_TOL * (1.0 + h.abs()) {
            return Err(ArsError::NotLogConcave { x });
        }
        if log_w <= h - upper {
            return Ok(x);
        }
        if hull.x.len() < MAX_ABSCISSAE && x > lo && x < hi {
            hull.insert(x, h, s);
            hull.check_concave()?;
            hull.rebuild();
        }
    }
    Err(ArsError::Exhausted(MAX_TRIALS))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Exp1;

    impl LogDensity for Exp1 {
        fn eval(&self, x: f64) -> (f64, f64) {
            (-x, -1.0)
        }

        fn domain(&self) -> (f64, f64) {
            (0.0, f64::INFINITY)
        }
    }

    #[test]
    fn standard_normal_mean() {
        let mut st = RandomStream::new(11, 0);
        let f = |x: f64| (-0.5 * x * x, -x);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| ars_sample(&f, &[-1.0, 1.0], &mut st).unwrap()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "{mean}");
    }

    #[test]
    fn exponential_draws_positive() {
        let mut st = RandomStream::new(12, 0);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = ars_sample(&Exp1, &[0.5, 2.0], &mut st).unwrap();
            assert!(x > 0.0);
            sum += x;
        }
        assert!((sum / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn bimodal_rejected() {
        // mixture of N(-3,1) and N(3,1)
        let f = |x: f64| {
            let a = (-0.5 * (x + 3.0) * (x + 3.0)).exp();
            let b = (-0.5 * (x - 3.0) * (x - 3.0)).exp();
            ((a + b).ln(), (-(x + 3.0) * a - (x - 3.0) * b) / (a + b))
        };
        let mut st = RandomStream::new(13, 0);
        let mut failed = false;
        for _ in 0..100 {
            if let Err(ArsError::NotLogConcave { .. }) = ars_sample(&f, &[-4.0, 0.0, 4.0], &mut st) {
                failed = true;
                break;
            }
        }
        assert!(failed);
    }

    #[test]
    fn brackets_from_one_side() {
        let mut st = RandomStream::new(14, 0);
        let f = |x: f64| (-0.5 * (x - 40.0) * (x - 40.0), -(x - 40.0));
        let x = ars_sample(&f, &[0.0], &mut st).unwrap();
        assert!((x - 40.0).abs() < 6.0);
    }
}
