//! European call pricers: quantile-grid quadrature under the saturated
//! model, Black-Scholes, historical returns and a truncated log-t law.

use serde::{Deserialize, Serialize};

use crate::distributions::{NoiseDistribution, NormalDist, StudentT, TruncatedStudentT};
use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::montecarlo::MeanConstraint;
use crate::optimize::{brent_root, positive_root};
use crate::quadrature::{trapezoid, ProbabilityRule};
use crate::saturated_model::{SaturatedModel, SolverConfig};
use crate::stats;

pub const DAYS_PER_YEAR: u32 = 252;

/// Contract terms plus the fitted per-mille return distribution for the
/// horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingSpec {
    pub s0: f64,
    pub strike: f64,
    pub horizon_days: u32,
    pub rate: f64,
    pub days_per_year: u32,
    /// Fitted distribution of per-mille returns; its scale is the volatility.
    pub fit: NoiseDistribution,
    pub beta: f64,
    #[serde(default)]
    pub mean_constraint: PricingMean,
}

/// Mean handling for the quadrature calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PricingMean {
    /// Centre the input at the forward (`S(m) = forward`) and match sd only.
    #[default]
    Centered,
    /// Also force the mean of `S_T` to the forward.
    Forced,
}

impl From<PricingMean> for MeanConstraint {
    fn from(p: PricingMean) -> Self {
        match p {
            PricingMean::Centered => MeanConstraint::Centered,
            PricingMean::Forced => MeanConstraint::Forced,
        }
    }
}

impl PricingSpec {
    pub fn new(s0: f64, strike: f64, horizon_days: u32, rate: f64, fit: NoiseDistribution, beta: f64) -> Result<Self> {
        let spec = Self {
            s0,
            strike,
            horizon_days,
            rate,
            days_per_year: DAYS_PER_YEAR,
            fit,
            beta,
            mean_constraint: PricingMean::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::invalid(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::invalid(format!("strike must be positive, got {}", self.strike)));
        }
        if self.horizon_days == 0 {
            return Err(Error::invalid("horizon must be at least 1 day"));
        }
        if self.days_per_year == 0 {
            return Err(Error::invalid("days_per_year must be positive"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !self.rate.is_finite() {
            return Err(Error::invalid("rate must be finite"));
        }
        Ok(())
    }

    pub fn years(&self) -> f64 {
        self.horizon_days as f64 / self.days_per_year as f64
    }

    pub fn forward(&self) -> f64 {
        self.s0 * (self.rate * self.years()).exp()
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.years()).exp()
    }

    /// Volatility as a fraction: the fitted scale divided by 1000.
    pub fn vol(&self) -> f64 {
        self.fit.scale() / 1000.0
    }

    pub fn with_strike(mut self, strike: f64) -> Self {
        self.strike = strike;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }
}

/// Probabilities at which the payoff is evaluated for trapezoid
/// integration; the last point is the far-tail cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    probs: Vec<f64>,
}

pub const TAIL_POINTS: [f64; 6] = [1e-5, 2.5e-5, 5e-5, 1e-4, 2.5e-4, 5e-4];

impl QuadratureGrid {
    /// `sections` equal-probability sections between `core_lo` and
    /// `core_hi`, plus `tail_points` and their mirror images near 1.
    pub fn new(core_lo: f64, core_hi: f64, sections: usize, tail_points: &[f64]) -> Result<Self> {
        if !(0.0 < core_lo && core_lo < core_hi && core_hi < 1.0) || sections == 0 {
            return Err(Error::invalid("grid core must satisfy 0 < lo < hi < 1 with at least one section"));
        }
        let mut probs: Vec<f64> = tail_points.to_vec();
        probs.extend((0..=sections).map(|k| core_lo + (core_hi - core_lo) * k as f64 / sections as f64));
        probs.extend(tail_points.iter().rev().map(|p| 1.0 - p));
        if probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) || probs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid probabilities must be strictly increasing inside (0, 1)"));
        }
        Ok(Self { probs })
    }

    /// 1000 sections over [0.001, 0.999] with the six tail points each side.
    pub fn standard() -> Self {
        Self::new(1e-3, 0.999, 1000, &TAIL_POINTS).expect("standard grid is valid")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Upper cutoff beyond which the analytic tail term applies.
    pub fn tail_cutoff(&self) -> f64 {
        *self.probs.last().expect("grid is nonempty")
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self::standard()
    }
}

/// A price with the calibration that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRecord {
    pub price: f64,
    /// Undiscounted expected payoff, `C_T = e^{rT}·C_o`.
    pub expected_payoff: f64,
    pub forward: f64,
    pub input_scale: f64,
    pub input_shift: f64,
    pub achieved_mean: f64,
    pub achieved_sd: f64,
    pub target_sd: f64,
    /// Contribution of the analytic upper-tail term before discounting.
    pub tail_term: f64,
}

/// Calibration nodes and weights: a half-interval rule graded deep enough
/// that the neglected tails do not move the second moment of a linear map
/// of the noise by more than about 1e-13 relative, mirrored onto the upper
/// half through the upper-tail quantile.
fn moment_nodes(noise: &NoiseDistribution) -> Result<(Vec<f64>, Vec<f64>)> {
    let decades = match noise.shape() {
        Some(nu) if nu > 2.0 => ((13.0 / (1.0 - 2.0 / nu)).ceil() as u32).clamp(13, 300),
        Some(_) => 300,
        None => 13,
    };
    let rule = ProbabilityRule::lower_half(decades, 40, 16);
    let mut xi = Vec::with_capacity(2 * rule.len());
    for &p in &rule.probs {
        xi.push(noise.quantile(p)?);
    }
    for &p in &rule.probs {
        xi.push(noise.upper_quantile(p)?);
    }
    let mut w = rule.weights.clone();
    w.extend_from_slice(&rule.weights);
    Ok((xi, w))
}

struct Calibration {
    q: f64,
    m: f64,
    mean: f64,
    sd: f64,
}

fn rule_moments(model: &SaturatedModel, xi: &[f64], w: &[f64], total: f64, q: f64, m: f64) -> Result<(f64, f64)> {
    let cfg = SolverConfig::default();
    let s: Vec<f64> = xi.iter().map(|x| model.solve(m + q * x, &cfg)).collect::<Result<_>>()?;
    let mean = stats::sum(s.iter().zip(w).map(|(v, wi)| v * wi)) / total;
    let var = stats::sum(s.iter().zip(w).map(|(v, wi)| (v - mean).powi(2) * wi)) / total;
    Ok((mean, var.max(0.0).sqrt()))
}

fn calibrate_quadrature(
    model: &SaturatedModel,
    std_noise: &NoiseDistribution,
    forward: f64,
    target_sd: f64,
    mean: PricingMean,
) -> Result<Calibration> {
    let (xi, weights) = moment_nodes(std_noise)?;
    let total = stats::sum(weights.iter().copied());
    let w = &weights;
    let sd_at = |q: f64, m: f64| rule_moments(model, &xi, w, total, q, m).map(|v| v.1).unwrap_or(f64::NAN);
    let mean_at = |q: f64, m: f64| rule_moments(model, &xi, w, total, q, m).map(|v| v.0).unwrap_or(f64::NAN);

    let factor = std_noise
        .sd_factor()
        .ok_or_else(|| Error::InfiniteExpectation("noise has no finite variance; the sd target is undefined".into()))?;
    let mut m = model.inverse(forward)?;
    let mut q = target_sd / (model.slope(forward) * factor);
    let solve_q = |m: f64, guess: f64| {
        positive_root(|q| sd_at(q, m) - target_sd, 0.5 * guess, 2.0 * guess, 1e-14 * guess.max(1.0))
            .map_err(|_| Error::Infeasible(format!("target sd {target_sd} not reachable")))
    };
    q = solve_q(m, q)?;
    if mean == PricingMean::Forced {
        for _ in 0..100 {
            let f = |mm: f64| mean_at(q, mm) - forward;
            let width = 0.1 * (1.0 + m.abs());
            let (mut lo, mut hi) = (m - width, m + width);
            let mut tries = 0;
            while f(lo) > 0.0 && tries < 60 {
                lo -= (hi - lo) * 2.0;
                tries += 1;
            }
            while f(hi) < 0.0 && tries < 120 {
                hi += (hi - lo) * 2.0;
                tries += 1;
            }
            let m_new = brent_root(f, lo, hi, 1e-15 * (1.0 + m.abs()), 200)?;
            let q_new = solve_q(m_new, q)?;
            let done = (m_new - m).abs() <= 1e-13 * (1.0 + m.abs()) && (q_new - q).abs() <= 1e-13 * q;
            m = m_new;
            q = q_new;
            if done {
                break;
            }
        }
    }
    let (mean_v, sd_v) = rule_moments(model, &xi, w, total, q, m)?;
    Ok(Calibration { q, m, mean: mean_v, sd: sd_v })
}

/// `E[(S − K)⁺; ξ > ξ*]`. For `β = 0` the lognormal closed form from the
/// strike crossing. Otherwise the price is replaced by its asymptote
/// `S(0) + (q/β)ξ`, integrated from where that line crosses the strike.
fn upper_tail_payoff(
    model: &SaturatedModel,
    noise: &NoiseDistribution,
    cal: &Calibration,
    strike: f64,
    xi_star: f64,
) -> Result<f64> {
    if model.beta() == 0.0 {
        let n = NormalDist::standard();
        let xi_k = xi_star.max(((strike / model.s0()).ln() - cal.m) / cal.q);
        let v = model.s0() * (cal.m + 0.5 * cal.q * cal.q).exp() * n.sf(xi_k - cal.q) - strike * n.sf(xi_k);
        return Ok(v.max(0.0));
    }
    let s_centre = model.solve(cal.m, &SolverConfig::default())?;
    let slope = cal.q / model.beta();
    let xi_l = xi_star.max((strike - s_centre) / slope);
    let partial =
        noise.upper_partial_mean(xi_l).ok_or_else(|| Error::InfiniteExpectation("noise has no finite mean".into()))?;
    Ok(((s_centre - strike) * noise.sf(xi_l) + slope * partial).max(0.0))
}

/// Call price by trapezoid integration of the payoff over the quantile
/// grid, with an analytic term for the upper tail beyond the cutoff.
pub fn price_saturated(spec: &PricingSpec, grid: &QuadratureGrid) -> Result<PriceRecord> {
    spec.validate()?;
    let std_noise = spec.fit.standardized();
    if spec.beta == 0.0 && std_noise.shape().is_some() {
        return Err(Error::InfiniteExpectation(
            "the standard model with Student's t noise has an infinite expected terminal price".into(),
        ));
    }
    let model = SaturatedModel::new(spec.s0, spec.beta, 0.0)?;
    let forward = spec.forward();
    let factor =
        std_noise.sd_factor().ok_or_else(|| Error::InfiniteExpectation("noise has no finite variance".into()))?;
    let target_sd = forward * spec.vol() * factor;
    let cal = calibrate_quadrature(&model, &std_noise, forward, target_sd, spec.mean_constraint)?;

    let cfg = SolverConfig::default();
    let probs = grid.probs();
    let payoff: Vec<f64> = probs
        .iter()
        .map(|&p| {
            let xi = std_noise.quantile(p)?;
            Ok((model.solve(cal.m + cal.q * xi, &cfg)? - spec.strike).max(0.0))
        })
        .collect::<Result<_>>()?;
    let body = trapezoid(probs, &payoff);

    let xi_star = std_noise.quantile(grid.tail_cutoff())?;
    let tail = upper_tail_payoff(&model, &std_noise, &cal, spec.strike, xi_star)?;
    let expected = body + tail;
    Ok(PriceRecord {
        price: spec.discount() * expected,
        expected_payoff: expected,
        forward,
        input_scale: cal.q,
        input_shift: cal.m,
        achieved_mean: cal.mean,
        achieved_sd: cal.sd,
        target_sd,
        tail_term: tail,
    })
}

/// Black-Scholes call with time `t_days / 252` years.
pub fn price_black_scholes(s0: f64, strike: f64, t_days: f64, rate: f64, sigma_annual: f64) -> Result<f64> {
    if !(s0 > 0.0) || !(strike >= 0.0) || !(t_days > 0.0) {
        return Err(Error::invalid("Black-Scholes needs s0 > 0, strike >= 0 and t > 0"));
    }
    if !(sigma_annual > 0.0 && sigma_annual.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma_annual}")));
    }
    if strike == 0.0 {
        return Ok(s0);
    }
    let t = t_days / DAYS_PER_YEAR as f64;
    let sd = sigma_annual * t.sqrt();
    let d1 = ((s0 / strike).ln() + (rate + 0.5 * sigma_annual * sigma_annual) * t) / sd;
    let d2 = d1 - sd;
    let n = NormalDist::standard();
    Ok(s0 * n.cdf(d1) - strike * (-rate * t).exp() * n.cdf(d2))
}

/// Annual volatility from a per-mille scale fitted at horizon `t_days`.
pub fn annualized_sigma(scale_per_mille: f64, t_days: f64) -> f64 {
    scale_per_mille / 1000.0 * (DAYS_PER_YEAR as f64 / t_days).sqrt()
}

/// Call price from historical returns, shifted additively so the mean
/// terminal price is the forward.
pub fn price_empirical(returns: &ReturnSeries, spec: &PricingSpec) -> Result<PriceRecord> {
    spec.validate()?;
    if returns.values.is_empty() {
        return Err(Error::EmptySeries("no returns to price from".into()));
    }
    if returns.horizon_days != spec.horizon_days as usize {
        return Err(Error::invalid(format!(
            "return horizon {} differs from contract horizon {}",
            returns.horizon_days, spec.horizon_days
        )));
    }
    let forward = spec.forward();
    let shift = 1000.0 * (forward / spec.s0 - 1.0) - stats::mean(&returns.values);
    let terminal: Vec<f64> = returns.values.iter().map(|r| spec.s0 * (1.0 + (r + shift) / 1000.0)).collect();
    let expected = stats::mean(&terminal.iter().map(|s| (s - spec.strike).max(0.0)).collect::<Vec<_>>());
    let m = stats::SampleMoments::from_slice(&terminal);
    Ok(PriceRecord {
        price: spec.discount() * expected,
        expected_payoff: expected,
        forward,
        input_scale: 1.0,
        input_shift: shift,
        achieved_mean: m.mean,
        achieved_sd: m.sd,
        target_sd: m.sd,
        tail_term: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPriceRecord {
    pub price: f64,
    pub expected_payoff: f64,
    /// Location of `ln(S_T/s0)` that makes the mean the forward.
    pub log_location: f64,
    /// Lower and upper truncation of `ln(S_T/s0)`.
    pub bounds: (f64, f64),
    /// Set when no terminal price in the window exceeds the strike.
    pub all_payoffs_zero: bool,
}

/// Call price when `ln(S_T/s0)` follows the fitted law (scale divided by
/// 1000) truncated at its `1 − p_trunc` and `p_trunc` quantiles, with the
/// location chosen so that `E[S_T]` is the forward.
pub fn price_truncated_log_t(spec: &PricingSpec, p_trunc: f64) -> Result<LogPriceRecord> {
    spec.validate()?;
    if !(p_trunc > 0.5 && p_trunc < 1.0) {
        return Err(Error::Domain(format!("p_trunc must lie in (0.5, 1), got {p_trunc}")));
    }
    let std_noise = spec.fit.standardized();
    let b = spec.vol();
    let (p_lo, p_hi) = (1.0 - p_trunc, p_trunc);
    let z_lo = std_noise.quantile(p_lo)?;
    let z_hi = std_noise.quantile(p_hi)?;
    let forward = spec.forward();
    let discount = spec.discount();
    if z_hi - z_lo <= 1e-12 * (1.0 + z_hi.abs()) {
        // window has collapsed onto a point at the forward
        let payoff = (forward - spec.strike).max(0.0);
        let loc = (forward / spec.s0).ln();
        return Ok(LogPriceRecord {
            price: discount * payoff,
            expected_payoff: payoff,
            log_location: loc,
            bounds: (loc, loc),
            all_payoffs_zero: payoff == 0.0,
        });
    }
    let mass = p_hi - p_lo;
    let rule = ProbabilityRule::window(p_lo, p_hi, 200, 16, &[]);
    let zs: Vec<f64> = rule.probs.iter().map(|&p| std_noise.quantile(p)).collect::<Result<_>>()?;
    // E[e^{bZ}] over the truncated law
    let mgf = stats::sum(zs.iter().zip(&rule.weights).map(|(z, w)| (b * z).exp() * w)) / mass;
    let loc = (forward / spec.s0).ln() - mgf.ln();

    // payoff kink where s0·e^{loc + b z} = K
    let z_kink = ((spec.strike / spec.s0).ln() - loc) / b;
    let expected = if z_kink >= z_hi {
        0.0
    } else {
        let p_kink = if z_kink <= z_lo { p_lo } else { std_noise.cdf(z_kink) };
        let rule = ProbabilityRule::window(p_kink, p_hi, 200, 16, &[]);
        stats::sum(rule.probs.iter().zip(&rule.weights).map(|(&p, w)| {
            let z = std_noise.quantile(p).unwrap_or(z_hi).clamp(z_lo, z_hi);
            (spec.s0 * (loc + b * z).exp() - spec.strike).max(0.0) * w
        })) / mass
    };
    Ok(LogPriceRecord {
        price: discount * expected,
        expected_payoff: expected,
        log_location: loc,
        bounds: (loc + b * z_lo, loc + b * z_hi),
        all_payoffs_zero: expected == 0.0,
    })
}

/// Return level of a fitted distribution at probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationLevel {
    /// Quantile including the location, in per mille.
    pub level: f64,
    /// Distance of the quantile from the location, in per mille.
    pub excursion: f64,
}

pub fn truncation_per_mille(fit: &NoiseDistribution, p: f64) -> Result<TruncationLevel> {
    let level = fit.quantile(p)?;
    Ok(TruncationLevel { level, excursion: level - fit.loc() })
}

/// Convenience constructors for the two fitted families.
pub fn t_fit(nu: f64, b: f64, loc: f64) -> Result<NoiseDistribution> {
    Ok(StudentT::new(nu, b, loc)?.into())
}

pub fn normal_fit(sigma: f64, loc: f64) -> Result<NoiseDistribution> {
    Ok(NormalDist::new(sigma, loc)?.into())
}

/// Truncated t fit in per mille.
pub fn truncated_t_fit(nu: f64, b: f64, loc: f64, lower: f64, upper: f64) -> Result<NoiseDistribution> {
    Ok(TruncatedStudentT::new(StudentT::new(nu, b, loc)?, lower, upper)?.into())
}
