//! Quadrature helpers: Gauss-Legendre panels, trapezoid sums and
//! probability-space rules for expectations under heavy-tailed laws.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights of order `n` on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

// P_n(z) and P_n'(z) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (z, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let lo = a + h * k as f64;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (zi, wi) in z.iter().zip(&w) {
            s += wi * f(mid + 0.5 * h * zi);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Trapezoid rule over ordered abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// A quadrature rule in probability space: `E[g(X)] ≈ Σ wᵢ·g(Q(pᵢ))`.
///
/// Panels are graded geometrically toward both ends of the window so that
/// power-law tails of the quantile function are resolved.
#[derive(Debug, Clone)]
pub struct ProbabilityRule {
    pub probs: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ProbabilityRule {
    /// Rule over `(0, 1)` with tail panels down to `10^-decades` on each side.
    pub fn graded(decades: u32, core_panels: usize, order: usize) -> Self {
        let mut breaks = Vec::new();
        for k in (1..=decades).rev() {
            breaks.push(10f64.powi(-(k as i32)));
        }
        let core_lo = 0.1;
        let core_hi = 0.9;
        for j in 1..core_panels {
            breaks.push(core_lo + (core_hi - core_lo) * j as f64 / core_panels as f64);
        }
        for k in 1..=decades {
            breaks.push(1.0 - 10f64.powi(-(k as i32)));
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self::from_breakpoints(&breaks, order)
    }

    /// Rule over `[10^-decades, 0.5]`, graded toward zero. Paired with an
    /// upper-tail quantile it covers the mirror half without forming `1 − p`.
    pub fn lower_half(decades: u32, core_panels: usize, order: usize) -> Self {
        let mut breaks: Vec<f64> = (1..=decades).rev().map(|k| 10f64.powi(-(k as i32))).collect();
        for j in 1..=core_panels {
            breaks.push(0.1 + 0.4 * j as f64 / core_panels as f64);
        }
        Self::from_breakpoints(&breaks, order)
    }

    /// Uniform panels over `[lo, hi]`, with `extra` interior breakpoints
    /// (for example a payoff kink) honoured exactly.
    pub fn window(lo: f64, hi: f64, panels: usize, order: usize, extra: &[f64]) -> Self {
        let mut breaks: Vec<f64> = (0..=panels).map(|j| lo + (hi - lo) * j as f64 / panels as f64).collect();
        breaks.extend(extra.iter().copied().filter(|p| *p > lo && *p < hi));
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        Self::from_breakpoints(&breaks, order)
    }

    pub fn from_breakpoints(breaks: &[f64], order: usize) -> Self {
        let (z, w) = gauss_legendre(order);
        let mut probs = Vec::with_capacity(breaks.len() * order);
        let mut weights = Vec::with_capacity(breaks.len() * order);
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (zi, wi) in z.iter().zip(&w) {
                probs.push(mid + half * zi);
                weights.push(half * wi);
            }
        }
        Self { probs, weights }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}
