use std::f64::consts::PI;

/// Gauss–Hermite rule for `E f(Z)`, `Z ~ N(0,1)`: `Σ wᵢ f(xᵢ)`, weights summing to 1.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `ln wᵢ`, for log-space accumulation.
    pub log_weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let (x, w) = physicists(n);
        let nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights: Vec<f64> = w.iter().map(|v| v / PI.sqrt()).collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Self {
            nodes,
            weights,
            log_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Nodes and weights for `∫ e^{-t²} g(t) dt` by Newton iteration on the
/// normalized Hermite recurrence.
fn physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    const EPS: f64 = 3e-14;
    // π^{-1/4}
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_normal_moments() {
        for n in [1usize, 2, 5, 8, 16, 32, 64] {
            let gh = GaussHermite::new(n);
            let moment = |p: i32| -> f64 {
                gh.nodes.iter().zip(&gh.weights).map(|(x, w)| w * x.powi(p)).sum()
            };
            assert!((moment(0) - 1.0).abs() < 1e-13, "n={n}");
            if n >= 2 {
                assert!((moment(2) - 1.0).abs() < 1e-12, "n={n}");
            }
            if n >= 3 {
                assert!((moment(4) - 3.0).abs() < 1e-11, "n={n}");
            }
            if n >= 4 {
                assert!((moment(6) - 15.0).abs() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn known_three_point_rule() {
        let gh = GaussHermite::new(3);
        assert!((gh.nodes[0] - 3f64.sqrt()).abs() < 1e-14);
        assert!(gh.nodes[1].abs() < 1e-14);
        assert!((gh.weights[1] - 2.0 / 3.0).abs() < 1e-14);
    }
}
