//! Sample statistics shared by the data, simulation and convolution code.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum; order-stable for a given input order.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values.iter().copied()) / values.len() as f64
}

/// Median of an unsorted slice (average of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Moment summary of a sample.
///
/// `sd` uses the `n - 1` divisor. Skewness and kurtosis are the moment
/// ratios `m3/m2^1.5` and `m4/m2²` (a normal sample has kurtosis 3); both
/// are `None` when the sample has zero spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

impl SampleMoments {
    pub fn from_slice(values: &[f64]) -> Self {
        let n = values.len();
        let mu = mean(values);
        let m2 = sum(values.iter().map(|v| (v - mu).powi(2))) / n as f64;
        let m3 = sum(values.iter().map(|v| (v - mu).powi(3))) / n as f64;
        let m4 = sum(values.iter().map(|v| (v - mu).powi(4))) / n as f64;
        let sd = if n > 1 { (m2 * n as f64 / (n - 1) as f64).sqrt() } else { 0.0 };
        // relative threshold so that rounding noise in a constant series reads as zero spread
        let spread = m2 > (f64::EPSILON * mu.abs()).powi(2) * 16.0 && m2 > 0.0;
        Self {
            count: n,
            mean: mu,
            sd,
            skewness: spread.then(|| m3 / m2.powf(1.5)),
            kurtosis: spread.then(|| m4 / (m2 * m2)),
        }
    }
}

/// Weighted moments for gridded or quadrature data: returns
/// `(mean, variance, skewness, kurtosis)` of the weighted points.
pub fn weighted_moments(xs: &[f64], ws: &[f64]) -> (f64, f64, f64, f64) {
    let total = sum(ws.iter().copied());
    let mu = sum(xs.iter().zip(ws).map(|(x, w)| x * w)) / total;
    let m = |k: i32| sum(xs.iter().zip(ws).map(|(x, w)| (x - mu).powi(k) * w)) / total;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    (mu, m2, m3 / m2.powf(1.5), m4 / (m2 * m2))
}
