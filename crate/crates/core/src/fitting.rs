//! Maximum-likelihood fits of Student's t and normal distributions to
//! return series.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use std::f64::consts::PI;

use crate::distributions::{NoiseDistribution, NormalDist, StudentT};
use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::stats;

pub const NU_MIN: f64 = 0.5;
pub const NU_MAX: f64 = 200.0;
pub const MIN_T_FIT_OBS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    StudentT,
    Normal,
}

/// Parameter triple. `nu` is absent for the normal family, where `scale`
/// is sigma; for the t family `scale` is b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub scale: f64,
    pub loc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub params: Params,
    pub std_errors: Params,
    /// Inverse observed information in the order (nu, b, loc) or (sigma, loc).
    pub covariance: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    pub n_obs: usize,
    #[serde(default)]
    pub horizon_days: usize,
    /// The shape estimate sits on the upper search bound; the data are
    /// indistinguishable from normal.
    #[serde(default)]
    pub nu_at_upper_bound: bool,
}

impl FitResult {
    pub fn distribution(&self) -> Result<NoiseDistribution> {
        Ok(match self.family {
            Family::StudentT => {
                let nu = self.params.nu.ok_or_else(|| Error::invalid("t fit without shape"))?;
                StudentT::new(nu, self.params.scale, self.params.loc)?.into()
            }
            Family::Normal => NormalDist::new(self.params.scale, self.params.loc)?.into(),
        })
    }
}

/// Log-likelihood of a location-scale t over `xs`.
pub fn t_log_likelihood(xs: &[f64], nu: f64, b: f64, loc: f64) -> f64 {
    if !(nu > 0.0 && b > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = xs.len() as f64;
    let norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (PI * nu).ln() - b.ln();
    let tail = stats::sum(xs.iter().map(|x| {
        let z = (x - loc) / b;
        (z * z / nu).ln_1p()
    }));
    n * norm - 0.5 * (nu + 1.0) * tail
}

/// Gradient of [`t_log_likelihood`] with respect to (nu, b, loc).
pub fn t_score(xs: &[f64], nu: f64, b: f64, loc: f64) -> [f64; 3] {
    let n = xs.len() as f64;
    let mut g_nu = n * (0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu);
    let mut g_b = -n / b;
    let mut g_loc = 0.0;
    let (mut s_lnw, mut s_nu, mut s_b, mut s_loc) = (0.0, 0.0, 0.0, 0.0);
    for x in xs {
        let z = (x - loc) / b;
        let w = 1.0 + z * z / nu;
        s_lnw += w.ln();
        s_nu += z * z / w;
        s_b += z * z / w;
        s_loc += z / w;
    }
    g_nu += -0.5 * s_lnw + (nu + 1.0) / (2.0 * nu * nu) * s_nu;
    g_b += (nu + 1.0) / (nu * b) * s_b;
    g_loc += (nu + 1.0) / (nu * b) * s_loc;
    [g_nu, g_b, g_loc]
}

/// MLE of (nu, b, loc).
///
/// The data are standardized by median and interquartile range, a
/// multistart simplex runs over (ln nu, ln b, loc), and Newton steps on the
/// analytic score polish the best candidate.
pub fn fit_student_t(r: &ReturnSeries) -> Result<FitResult> {
    let xs = &r.values;
    let n = xs.len();
    if n < MIN_T_FIT_OBS {
        return Err(Error::Degenerate(format!("t fit needs at least {MIN_T_FIT_OBS} observations, got {n}")));
    }
    let centre = stats::median(xs);
    let mut sorted = xs.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| sorted[((n - 1) as f64 * p).round() as usize];
    let mut spread = q(0.75) - q(0.25);
    if !(spread > 0.0) {
        spread = stats::SampleMoments::from_slice(xs).sd;
    }
    if !(spread > 0.0) {
        return Err(Error::Degenerate("all returns are equal".into()));
    }
    let zs: Vec<f64> = xs.iter().map(|x| (x - centre) / spread).collect();

    let objective = |p: &[f64]| {
        let nu = p[0].exp();
        if !(NU_MIN..=NU_MAX).contains(&nu) {
            return f64::INFINITY;
        }
        -t_log_likelihood(&zs, nu, p[1].exp(), p[2])
    };
    let opts = NelderMeadOptions { max_evals: 3000, f_tol: 1e-12, x_tol: 1e-8 };
    let starts = [1.5, 3.0, 6.0, 15.0, 60.0];
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (k, &nu0) in starts.iter().enumerate() {
        let q75 = StudentT::standard(nu0)?.quantile(0.75)?;
        let b0 = 0.5 / q75;
        let m = nelder_mead(objective, &[nu0.ln(), b0.ln(), 0.0], &[0.3, 0.2, 0.1], &opts);
        if best.as_ref().is_none_or(|b| m.value < b.2) {
            best = Some((k, m.x, m.value));
        }
    }
    let (_, x, _) = best.expect("at least one start");
    let mut theta = [x[0].exp().clamp(NU_MIN, NU_MAX), x[1].exp(), x[2]];
    theta = newton_polish(&zs, theta);

    if theta[0] <= NU_MIN * (1.0 + 1e-6) {
        return Err(Error::Boundary { param: "nu", bound: NU_MIN });
    }
    let at_upper = theta[0] >= NU_MAX * (1.0 - 1e-6);
    let (nu, b, loc) = (theta[0], theta[1] * spread, centre + theta[2] * spread);
    if !(b.is_finite() && loc.is_finite()) {
        return Err(Error::NonConvergence { what: "t fit", iterations: opts.max_evals, last: nu });
    }
    let cov = t_covariance(xs, nu, b, loc);
    let se = |i: usize| cov.as_ref().map(|c| c[i][i].max(0.0).sqrt()).unwrap_or(f64::NAN);
    let covariance = cov.map(|c| c.iter().map(|r| r.to_vec()).collect()).unwrap_or_default();
    Ok(FitResult {
        family: Family::StudentT,
        params: Params { nu: Some(nu), scale: b, loc },
        std_errors: Params { nu: Some(se(0)), scale: se(1), loc: se(2) },
        covariance,
        log_likelihood: t_log_likelihood(xs, nu, b, loc),
        n_obs: n,
        horizon_days: r.horizon_days,
        nu_at_upper_bound: at_upper,
    })
}

// Newton iterations on the score with a backtracking guard; keeps nu in bounds.
fn newton_polish(zs: &[f64], mut theta: [f64; 3]) -> [f64; 3] {
    let ll = |t: &[f64; 3]| t_log_likelihood(zs, t[0], t[1], t[2]);
    let mut current = ll(&theta);
    for _ in 0..30 {
        let g = t_score(zs, theta[0], theta[1], theta[2]);
        let h = score_jacobian(zs, &theta);
        let Some(step) = solve3(&h, &g) else { break };
        let mut accepted = false;
        let mut lambda = 1.0;
        for _ in 0..30 {
            let cand = [
                (theta[0] - lambda * step[0]).clamp(NU_MIN, NU_MAX),
                theta[1] - lambda * step[1],
                theta[2] - lambda * step[2],
            ];
            if cand[1] > 0.0 {
                let v = ll(&cand);
                if v >= current {
                    accepted = v > current || cand != theta;
                    theta = cand;
                    current = v;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted || step.iter().zip(&theta).all(|(s, t)| (lambda * s).abs() <= 1e-12 * t.abs().max(1.0)) {
            break;
        }
    }
    theta
}

// Central differences of the analytic score.
fn score_jacobian(xs: &[f64], theta: &[f64; 3]) -> [[f64; 3]; 3] {
    let mut h = [[0.0; 3]; 3];
    for j in 0..3 {
        let step = 1e-5 * theta[j].abs().max(1e-2);
        let mut up = *theta;
        let mut dn = *theta;
        up[j] += step;
        dn[j] -= step;
        let gu = t_score(xs, up[0], up[1], up[2]);
        let gd = t_score(xs, dn[0], dn[1], dn[2]);
        for i in 0..3 {
            h[i][j] = (gu[i] - gd[i]) / (2.0 * step);
        }
    }
    for i in 0..3 {
        for j in 0..i {
            let s = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = s;
            h[j][i] = s;
        }
    }
    h
}

/// Inverse observed information at (nu, b, loc), `None` when the Hessian
/// is not negative definite.
pub fn t_covariance(xs: &[f64], nu: f64, b: f64, loc: f64) -> Option<[[f64; 3]; 3]> {
    let h = score_jacobian(xs, &[nu, b, loc]);
    let neg = h.map(|row| row.map(|v| -v));
    let inv = invert3(&neg)?;
    (0..3).all(|i| inv[i][i] > 0.0).then_some(inv)
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let d = det3(m);
    if !(d.abs() > 0.0 && d.is_finite()) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / d;
        }
    }
    Some(inv)
}

fn solve3(m: &[[f64; 3]; 3], v: &[f64; 3]) -> Option<[f64; 3]> {
    let inv = invert3(m)?;
    Some([0, 1, 2].map(|i| (0..3).map(|j| inv[i][j] * v[j]).sum()))
}

/// Closed-form normal MLE (divisor `n`).
pub fn fit_normal(r: &ReturnSeries) -> Result<FitResult> {
    let xs = &r.values;
    let n = xs.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("normal fit needs at least 2 observations, got {n}")));
    }
    let loc = stats::mean(xs);
    let var = stats::sum(xs.iter().map(|x| (x - loc).powi(2))) / n as f64;
    if !(var > (f64::EPSILON * loc.abs()).powi(2) * 16.0 && var > 0.0) {
        return Err(Error::Degenerate("all returns are equal".into()));
    }
    let sigma = var.sqrt();
    let nf = n as f64;
    let d = NormalDist::new(sigma, loc)?;
    let ll = stats::sum(xs.iter().map(|x| d.ln_pdf(*x)));
    let (se_sigma, se_loc) = (sigma / (2.0 * nf).sqrt(), sigma / nf.sqrt());
    Ok(FitResult {
        family: Family::Normal,
        params: Params { nu: None, scale: sigma, loc },
        std_errors: Params { nu: None, scale: se_sigma, loc: se_loc },
        covariance: vec![vec![se_sigma * se_sigma, 0.0], vec![0.0, se_loc * se_loc]],
        log_likelihood: ll,
        n_obs: n,
        horizon_days: r.horizon_days,
        nu_at_upper_bound: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub x: f64,
    pub empirical: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessArtifacts {
    pub cdf_overlay: Vec<CdfPoint>,
    /// Overlay rows with empirical CDF in [0, 0.1].
    pub lower_tail: Vec<CdfPoint>,
    /// Overlay rows with empirical CDF in [0.9, 1].
    pub upper_tail: Vec<CdfPoint>,
    /// Kolmogorov–Smirnov distance over the observations.
    pub ks_statistic: f64,
}

/// Empirical and fitted CDFs on `points` evenly spaced values spanning the
/// data.
pub fn goodness_artifacts(r: &ReturnSeries, fit: &FitResult, points: usize) -> Result<GoodnessArtifacts> {
    let d = fit.distribution()?;
    let mut xs = r.values.clone();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = d.cdf(x);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    let mut overlay = Vec::with_capacity(points);
    if points > 0 && n > 0 {
        let (lo, hi) = (xs[0], xs[n - 1]);
        for k in 0..points {
            let x = if points == 1 { lo } else { lo + (hi - lo) * k as f64 / (points - 1) as f64 };
            let below = xs.partition_point(|v| *v <= x);
            overlay.push(CdfPoint { x, empirical: below as f64 / n as f64, fitted: d.cdf(x) });
        }
    }
    let lower_tail = overlay.iter().copied().filter(|p| p.empirical <= 0.1).collect();
    let upper_tail = overlay.iter().copied().filter(|p| p.empirical >= 0.9).collect();
    Ok(GoodnessArtifacts { cdf_overlay: overlay, lower_tail, upper_tail, ks_statistic: ks })
}
