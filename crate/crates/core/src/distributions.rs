//! Location-scale noise distributions: normal, Student's t and truncated
//! Student's t.
//!
//! All three expose density, distribution and quantile functions, moments
//! where they exist, and seeded sampling. Objects are immutable after
//! construction.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::quadrature::ProbabilityRule;

/// Probability tolerance used by the quantile inversion.
pub const QUANTILE_PROB_TOL: f64 = 1e-12;

// Above this shape the incomplete-beta continued fraction stops converging
// in a fixed number of terms; a corrected normal approximation is used.
const LARGE_NU: f64 = 1e5;

/// Seeded generator used for every random draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Analytic (or numerically integrated) moments. Absent values mean the
/// moment does not exist for the given parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub skewness: Option<f64>,
    /// Non-excess kurtosis (3 for a normal).
    pub kurtosis: Option<f64>,
}

/// Student's t with shape `nu`, scale `b` and location `loc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentT {
    nu: f64,
    b: f64,
    loc: f64,
    #[serde(skip)]
    ln_norm: f64,
}

impl StudentT {
    pub fn new(nu: f64, b: f64, loc: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid(format!("shape nu must be positive, got {nu}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("scale b must be positive, got {b}")));
        }
        if !loc.is_finite() {
            return Err(Error::invalid("location must be finite"));
        }
        let ln_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (PI * nu).ln();
        Ok(Self { nu, b, loc, ln_norm })
    }

    /// Unit-scale, zero-location t with the same shape.
    pub fn standard(nu: f64) -> Result<Self> {
        Self::new(nu, 1.0, 0.0)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn scale(&self) -> f64 {
        self.b
    }

    pub fn loc(&self) -> f64 {
        self.loc
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.b;
        self.ln_norm - self.b.ln() - 0.5 * (self.nu + 1.0) * (z * z / self.nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    // P(T <= z) for z <= 0 on the standard scale.
    fn lower_tail_std(&self, z: f64) -> f64 {
        debug_assert!(z <= 0.0);
        if self.nu > LARGE_NU {
            let zc = z * (1.0 - 0.25 / self.nu) / (1.0 + z * z / (2.0 * self.nu)).sqrt();
            return 0.5 * erfc(-zc / SQRT_2);
        }
        let x = self.nu / (self.nu + z * z);
        0.5 * beta_reg(0.5 * self.nu, 0.5, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.b;
        if z <= 0.0 {
            self.lower_tail_std(z)
        } else {
            1.0 - self.lower_tail_std(-z)
        }
    }

    /// Survival function `P(X > x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.b;
        if z >= 0.0 {
            self.lower_tail_std(-z)
        } else {
            1.0 - self.lower_tail_std(z)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let z = symmetric_quantile(
            p,
            |z| self.lower_tail_std(z),
            |z| (self.ln_norm - 0.5 * (self.nu + 1.0) * (z * z / self.nu).ln_1p()).exp(),
        );
        Ok(self.loc + self.b * z)
    }

    pub fn moments(&self) -> Moments {
        let nu = self.nu;
        Moments {
            mean: (nu > 1.0).then_some(self.loc),
            sd: (nu > 2.0).then(|| self.b * (nu / (nu - 2.0)).sqrt()),
            skewness: (nu > 3.0).then_some(0.0),
            kurtosis: (nu > 4.0).then(|| 3.0 * (nu - 2.0) / (nu - 4.0)),
        }
    }

    /// `∫_c^∞ x f(x) dx`, finite for `nu > 1`.
    pub fn upper_partial_mean(&self, c: f64) -> Option<f64> {
        if self.nu <= 1.0 {
            return None;
        }
        let z = (c - self.loc) / self.b;
        // standard t: ∫_z^∞ t f(t) dt = (nu + z²)/(nu - 1) · f(z)
        let f_std = (self.ln_norm - 0.5 * (self.nu + 1.0) * (z * z / self.nu).ln_1p()).exp();
        let first = (self.nu + z * z) / (self.nu - 1.0) * f_std;
        Some(self.loc * self.sf(c) + self.b * first)
    }
}

/// Normal distribution with standard deviation `sigma` and mean `loc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDist {
    sigma: f64,
    loc: f64,
}

impl NormalDist {
    pub fn new(sigma: f64, loc: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !loc.is_finite() {
            return Err(Error::invalid("location must be finite"));
        }
        Ok(Self { sigma, loc })
    }

    pub fn standard() -> Self {
        Self { sigma: 1.0, loc: 0.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn loc(&self) -> f64 {
        self.loc
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - 0.5 * (2.0 * PI).ln()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        0.5 * erfc(-(x - self.loc) / (self.sigma * SQRT_2))
    }

    pub fn sf(&self, x: f64) -> f64 {
        0.5 * erfc((x - self.loc) / (self.sigma * SQRT_2))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let z = symmetric_quantile(p, |z| 0.5 * erfc(-z / SQRT_2), |z| (-0.5 * z * z).exp() / (2.0 * PI).sqrt());
        Ok(self.loc + self.sigma * z)
    }

    pub fn moments(&self) -> Moments {
        Moments { mean: Some(self.loc), sd: Some(self.sigma), skewness: Some(0.0), kurtosis: Some(3.0) }
    }

    pub fn upper_partial_mean(&self, c: f64) -> f64 {
        let z = (c - self.loc) / self.sigma;
        self.loc * self.sf(c) + self.sigma * (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
    }
}

/// Student's t restricted to `[lower, upper]` and renormalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedStudentT {
    base: StudentT,
    lower: f64,
    upper: f64,
    cdf_lower: f64,
    mass: f64,
}

impl TruncatedStudentT {
    pub fn new(base: StudentT, lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::invalid(format!(
                "truncation bounds must satisfy lower < upper, got [{lower}, {upper}]"
            )));
        }
        let cdf_lower = if lower == f64::NEG_INFINITY { 0.0 } else { base.cdf(lower) };
        let mass = if upper == f64::INFINITY {
            base.sf(lower.max(f64::MIN))
        } else if lower == f64::NEG_INFINITY {
            base.cdf(upper)
        } else {
            // difference taken on the side with better relative precision
            let mid = base.loc();
            if upper <= mid {
                base.cdf(upper) - cdf_lower
            } else if lower >= mid {
                base.sf(lower) - base.sf(upper)
            } else {
                1.0 - cdf_lower - base.sf(upper)
            }
        };
        if mass <= 0.0 {
            return Err(Error::invalid("truncation window carries no probability mass"));
        }
        Ok(Self { base, lower, upper, cdf_lower, mass })
    }

    pub fn base(&self) -> &StudentT {
        &self.base
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Probability mass of the base distribution inside the window.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper {
            0.0
        } else {
            self.base.pdf(x) / self.mass
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper {
            f64::NEG_INFINITY
        } else {
            self.base.ln_pdf(x) - self.mass.ln()
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            0.0
        } else if x >= self.upper {
            1.0
        } else {
            ((self.base.cdf(x) - self.cdf_lower) / self.mass).clamp(0.0, 1.0)
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        if x <= self.lower {
            1.0
        } else if x >= self.upper {
            0.0
        } else {
            let above =
                if self.upper == f64::INFINITY { self.base.sf(x) } else { self.base.sf(x) - self.base.sf(self.upper) };
            (above / self.mass).clamp(0.0, 1.0)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let target = self.cdf_lower + p * self.mass;
        let x = if target <= 0.0 {
            self.lower
        } else if target >= 1.0 {
            self.upper
        } else {
            self.base.quantile(target)?
        };
        Ok(x.clamp(self.lower, self.upper))
    }

    /// Moments by quadrature over the quantile function. With an infinite
    /// bound the k-th moment exists only for `nu > k`.
    pub fn moments(&self) -> Moments {
        let bounded = self.lower.is_finite() && self.upper.is_finite();
        let exists = |k: f64| bounded || self.base.nu() > k;
        if !exists(1.0) {
            return Moments { mean: None, sd: None, skewness: None, kurtosis: None };
        }
        let rule = ProbabilityRule::graded(13, 40, 16);
        let xs: Vec<f64> =
            rule.probs.iter().map(|&p| self.quantile(p).expect("rule probabilities lie in (0, 1)")).collect();
        let total = rule.total_weight();
        let raw =
            |k: i32| -> f64 { crate::stats::sum(xs.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k))) / total };
        let mean = raw(1);
        let central = |k: i32| -> f64 {
            crate::stats::sum(xs.iter().zip(&rule.weights).map(|(x, w)| w * (x - mean).powi(k))) / total
        };
        let var = central(2);
        Moments {
            mean: Some(mean),
            sd: exists(2.0).then(|| var.sqrt()),
            skewness: exists(3.0).then(|| central(3) / var.powf(1.5)),
            kurtosis: exists(4.0).then(|| central(4) / (var * var)),
        }
    }
}

/// One of the three noise families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseDistribution {
    Normal(NormalDist),
    StudentT(StudentT),
    TruncatedStudentT(TruncatedStudentT),
}

impl NoiseDistribution {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal(d) => d.pdf(x),
            Self::StudentT(d) => d.pdf(x),
            Self::TruncatedStudentT(d) => d.pdf(x),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal(d) => d.ln_pdf(x),
            Self::StudentT(d) => d.ln_pdf(x),
            Self::TruncatedStudentT(d) => d.ln_pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal(d) => d.cdf(x),
            Self::StudentT(d) => d.cdf(x),
            Self::TruncatedStudentT(d) => d.cdf(x),
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Self::Normal(d) => d.sf(x),
            Self::StudentT(d) => d.sf(x),
            Self::TruncatedStudentT(d) => d.sf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            Self::Normal(d) => d.quantile(p),
            Self::StudentT(d) => d.quantile(p),
            Self::TruncatedStudentT(d) => d.quantile(p),
        }
    }

    /// Quantile at `1 − s`, accurate when `s` is far below machine epsilon.
    pub fn upper_quantile(&self, s: f64) -> Result<f64> {
        check_probability(s)?;
        match self {
            Self::Normal(d) => Ok(2.0 * d.loc() - d.quantile(s)?),
            Self::StudentT(d) => Ok(2.0 * d.loc() - d.quantile(s)?),
            Self::TruncatedStudentT(d) => {
                let base = d.base();
                let above = if d.upper() == f64::INFINITY { 0.0 } else { base.sf(d.upper()) };
                let target = above + s * d.mass();
                let x = if target >= 1.0 { d.lower() } else { 2.0 * base.loc() - base.quantile(target)? };
                Ok(x.clamp(d.lower(), d.upper()))
            }
        }
    }

    pub fn moments(&self) -> Moments {
        match self {
            Self::Normal(d) => d.moments(),
            Self::StudentT(d) => d.moments(),
            Self::TruncatedStudentT(d) => d.moments(),
        }
    }

    pub fn loc(&self) -> f64 {
        match self {
            Self::Normal(d) => d.loc(),
            Self::StudentT(d) => d.loc(),
            Self::TruncatedStudentT(d) => d.base().loc(),
        }
    }

    /// Scale parameter: `sigma` for the normal, `b` for the t families.
    pub fn scale(&self) -> f64 {
        match self {
            Self::Normal(d) => d.sigma(),
            Self::StudentT(d) => d.scale(),
            Self::TruncatedStudentT(d) => d.base().scale(),
        }
    }

    /// Shape parameter, `None` for the normal.
    pub fn shape(&self) -> Option<f64> {
        match self {
            Self::Normal(_) => None,
            Self::StudentT(d) => Some(d.nu()),
            Self::TruncatedStudentT(d) => Some(d.base().nu()),
        }
    }

    /// Ratio of standard deviation to scale (`sqrt(nu/(nu-2))` for t).
    pub fn sd_factor(&self) -> Option<f64> {
        let m = self.standardized().moments();
        m.sd
    }

    /// Support bounds (infinite for untruncated families).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::TruncatedStudentT(d) => (d.lower(), d.upper()),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Same family with zero location and unit scale.
    pub fn standardized(&self) -> NoiseDistribution {
        match self {
            Self::Normal(_) => Self::Normal(NormalDist::standard()),
            Self::StudentT(d) => Self::StudentT(StudentT::standard(d.nu()).expect("validated shape")),
            Self::TruncatedStudentT(d) => {
                let base = d.base();
                let lo = (d.lower() - base.loc()) / base.scale();
                let hi = (d.upper() - base.loc()) / base.scale();
                Self::TruncatedStudentT(
                    TruncatedStudentT::new(StudentT::standard(base.nu()).expect("validated"), lo, hi)
                        .expect("validated window"),
                )
            }
        }
    }

    /// `∫_c^∞ x f(x) dx`, or `None` when the mean does not exist.
    pub fn upper_partial_mean(&self, c: f64) -> Option<f64> {
        match self {
            Self::Normal(d) => Some(d.upper_partial_mean(c)),
            Self::StudentT(d) => d.upper_partial_mean(c),
            Self::TruncatedStudentT(d) => {
                if c >= d.upper() {
                    return Some(0.0);
                }
                let start = c.max(d.lower());
                let p0 = d.cdf(start);
                let rule = ProbabilityRule::from_breakpoints(&graded_window(p0, 1.0), 16);
                Some(crate::stats::sum(
                    rule.probs
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&p, w)| w * d.quantile(p.min(1.0 - 1e-16)).unwrap_or(d.upper())),
                ))
            }
        }
    }

    /// `n` draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        let mut rng = seeded_rng(seed);
        let out = match self {
            Self::Normal(d) => (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    d.loc() + d.sigma() * z
                })
                .collect(),
            Self::StudentT(d) => {
                let t = rand_distr::StudentT::new(d.nu()).map_err(|e| Error::invalid(format!("t sampler: {e}")))?;
                (0..n).map(|_| d.loc() + d.scale() * t.sample(&mut rng)).collect()
            }
            Self::TruncatedStudentT(d) => {
                let u = Uniform::new(0.0f64, 1.0).expect("unit interval");
                let mut v = Vec::with_capacity(n);
                while v.len() < n {
                    let p = u.sample(&mut rng);
                    if p > 0.0 {
                        v.push(d.quantile(p)?);
                    }
                }
                v
            }
        };
        Ok(out)
    }
}

impl From<NormalDist> for NoiseDistribution {
    fn from(d: NormalDist) -> Self {
        Self::Normal(d)
    }
}

impl From<StudentT> for NoiseDistribution {
    fn from(d: StudentT) -> Self {
        Self::StudentT(d)
    }
}

impl From<TruncatedStudentT> for NoiseDistribution {
    fn from(d: TruncatedStudentT) -> Self {
        Self::TruncatedStudentT(d)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")))
    }
}

// Breakpoints from p0 to p1 that tighten geometrically toward p1.
fn graded_window(p0: f64, p1: f64) -> Vec<f64> {
    let width = p1 - p0;
    let mut b = vec![p0];
    for k in 1..=40 {
        let gap = width * 0.5f64.powi(k);
        if gap < 1e-15 {
            break;
        }
        b.push(p1 - gap);
    }
    b.push(p1);
    b
}

/// Quantile of a distribution symmetric about zero, given its lower-tail
/// cdf and its density. Solves on the lower side for accuracy; the upper
/// side follows from symmetry (`1 - p` is exact for `p >= 0.5`).
fn symmetric_quantile(p: f64, lower_cdf: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let (s, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    sign * lower_tail_root(s, &lower_cdf, &pdf)
}

// Finds z <= 0 with F(z) = s for s in (0, 0.5). Safeguarded Newton on
// ln F(z) - ln s with a bisection fallback inside an expanding bracket.
fn lower_tail_root(s: f64, cdf: &impl Fn(f64) -> f64, pdf: &impl Fn(f64) -> f64) -> f64 {
    let mut hi = 0.0f64;
    let mut lo = -1.0f64;
    while cdf(lo) > s {
        hi = lo;
        lo *= 2.0;
        if lo < -1e300 {
            return lo;
        }
    }
    let ln_s = s.ln();
    let mut z = 0.5 * (lo + hi);
    for _ in 0..300 {
        let f = cdf(z);
        if f <= 0.0 {
            lo = z;
            z = 0.5 * (lo + hi);
            continue;
        }
        let g = f.ln() - ln_s;
        if g > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        if (f - s).abs() <= QUANTILE_PROB_TOL * s.min(1.0) * 1e-3 || (hi - lo) <= 4.0 * f64::EPSILON * z.abs() {
            break;
        }
        let d = pdf(z) / f;
        let mut next = if d > 0.0 { z - g / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 2.0 * f64::EPSILON * z.abs().max(1e-300) {
            z = next;
            break;
        }
        z = next;
    }
    z
}
