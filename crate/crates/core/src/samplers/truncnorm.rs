use thiserror::Error;

use super::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TruncNormError {
    #[error("empty truncation interval ({lower}, {upper})")]
    EmptyInterval { lower: f64, upper: f64 },
    #[error("standard deviation must be positive and finite, got {0}")]
    BadScale(f64),
}

/// Exact draw from `N(mean, sd²)` restricted to `(lower, upper)`.
///
/// Works on the standardized bounds with Robert's mixture of proposals:
/// plain normal rejection when the region holds enough mass, translated
/// exponential proposals in the tails, and uniform proposals for short
/// finite intervals.
pub fn truncated_normal(
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    stream: &mut RandomStream,
) -> Result<f64, TruncNormError> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(TruncNormError::BadScale(sd));
    }
    if !(lower < upper) {
        return Err(TruncNormError::EmptyInterval { lower, upper });
    }
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let z = if a >= 0.0 {
        positive_side(a, b, stream)
    } else if b <= 0.0 {
        -positive_side(-b, -a, stream)
    } else {
        straddling(a, b, stream)
    };
    Ok((mean + sd * z).clamp(lower, upper))
}

/// `0 ≤ a < b ≤ ∞`.
fn positive_side(a: f64, b: f64, stream: &mut RandomStream) -> f64 {
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    // expected cost of the exponential proposal versus a uniform one on (a, b)
    let uniform_wins = b.is_finite()
        && b - a < (2.0 / alpha) * (0.5 * (a * a - a * (a * a + 4.0).sqrt()) / 2.0 + 0.5).exp();
    if a < 0.45 && b - a >= 1.0 {
        // plenty of mass in (a, b); plain rejection
        loop {
            let z = stream.normal().abs();
            if z > a && z < b {
                return z;
            }
        }
    }
    if uniform_wins {
        loop {
            let z = a + (b - a) * stream.uniform();
            if stream.uniform().ln() <= 0.5 * (a * a - z * z) {
                return z;
            }
        }
    }
    loop {
        let z = a + stream.exponential() / alpha;
        if z >= b {
            continue;
        }
        let d = z - alpha;
        if stream.uniform().ln() <= -0.5 * d * d {
            return z;
        }
    }
}

/// `a < 0 < b`.
fn straddling(a: f64, b: f64, stream: &mut RandomStream) -> f64 {
    if b - a < (2.0 * std::f64::consts::PI).sqrt() {
        loop {
            let z = a + (b - a) * stream.uniform();
            if stream.uniform().ln() <= -0.5 * z * z {
                return z;
            }
        }
    }
    loop {
        let z = stream.normal();
        if z > a && z < b {
            return z;
        }
    }
}
