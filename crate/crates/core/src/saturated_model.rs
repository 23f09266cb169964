//! Terminal-price solver for the saturated equation
//! `β·S + ln S = β·S₀ + ln S₀ + x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters: initial price `s0`, saturation `beta` and drift `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturatedModel {
    s0: f64,
    beta: f64,
    alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_iter: 200 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

impl SaturatedModel {
    pub fn new(s0: f64, beta: f64, alpha: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid(format!("s0 must be positive, got {s0}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be nonnegative, got {beta}")));
        }
        if !alpha.is_finite() {
            return Err(Error::invalid("alpha must be finite"));
        }
        Ok(Self { s0, beta, alpha })
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Terminal price for input `x`.
    pub fn solve(&self, x: f64, cfg: &SolverConfig) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("input x must be finite, got {x}")));
        }
        if self.beta == 0.0 {
            return Ok(standard_model_price(self.s0, x));
        }
        cfg.validate()?;
        let beta = self.beta;
        let c = beta * self.s0 + self.s0.ln() + x;
        // g(u) = β·eᵘ + u − c is increasing and convex in u = ln S
        let mut hi = if c <= 0.0 { c } else { c.min((c / beta).ln().max(0.0)) };
        let mut lo = c - beta * hi.exp();
        if hi < lo {
            std::mem::swap(&mut lo, &mut hi);
        }
        let guess_s = self.s0 * x.exp();
        let mut u = if beta * guess_s < 1.0 && guess_s.is_finite() {
            guess_s.ln()
        } else {
            let w = (c - (c / beta).ln()) / beta;
            if w > 0.0 {
                w.ln()
            } else {
                0.5 * (lo + hi)
            }
        };
        if !(u >= lo && u <= hi) {
            u = 0.5 * (lo + hi);
        }
        // residual tolerance, floored at the rounding error of forming c
        let tol = cfg.rel_tol * (1.0 + x.abs()) + 16.0 * f64::EPSILON * c.abs().max(1.0);
        for _ in 0..cfg.max_iter {
            let e = u.exp();
            let g = beta * e + u - c;
            if g.abs() <= 4.0 * f64::EPSILON * c.abs().max(1.0) {
                return Ok(e);
            }
            if g > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let mut next = u - g / (beta * e + 1.0);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(1.0) && g.abs() <= tol {
                return Ok(next.exp());
            }
            u = next;
        }
        let s = u.exp();
        if (beta * s + u - c).abs() <= tol {
            return Ok(s);
        }
        Err(Error::NonConvergence { what: "saturated solve", iterations: cfg.max_iter, last: s })
    }

    /// Input `x` that produces terminal price `s`.
    pub fn inverse(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("price must be positive, got {s}")));
        }
        Ok(self.beta * (s - self.s0) + (s / self.s0).ln())
    }

    /// `dS/dx = S / (1 + β·S)`.
    pub fn slope(&self, s: f64) -> f64 {
        s / (1.0 + self.beta * s)
    }

    /// `(x, S(x))` pairs.
    pub fn transfer_curve(&self, xs: &[f64], cfg: &SolverConfig) -> Result<Vec<(f64, f64)>> {
        xs.iter().map(|&x| Ok((x, self.solve(x, cfg)?))).collect()
    }
}

/// Geometric model `s0·eˣ`.
pub fn standard_model_price(s0: f64, x: f64) -> f64 {
    s0 * x.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(s0: f64, beta: f64) -> SaturatedModel {
        SaturatedModel::new(s0, beta, 0.0).unwrap()
    }

    fn residual(m: &SaturatedModel, x: f64, s: f64) -> f64 {
        m.beta() * s + s.ln() - (m.beta() * m.s0() + m.s0().ln() + x)
    }

    // independent bisection on S in (0, 1e4)
    fn bisect(beta: f64, s0: f64, x: f64) -> f64 {
        let c = beta * s0 + s0.ln() + x;
        let (mut a, mut b) = (1e-300f64, 1e4f64);
        for _ in 0..2000 {
            let m = 0.5 * (a + b);
            if beta * m + m.ln() > c {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn beta_zero_is_exponential() {
        let s = model(50.0, 0.0).solve(0.03, &SolverConfig::default()).unwrap();
        assert_eq!(s, 50.0 * 0.03f64.exp());
        assert!((s - 51.5227).abs() < 1e-4);
    }

    #[test]
    fn zero_input_returns_s0() {
        for beta in [0.0, 0.001, 0.3, 3.0, 10.0] {
            let s = model(50.0, beta).solve(0.0, &SolverConfig::default()).unwrap();
            assert!((s - 50.0).abs() < 1e-10 * 50.0, "beta {beta}: {s}");
        }
    }

    #[test]
    fn matches_bisection_oracle() {
        let s = model(50.0, 0.3).solve(1.0, &SolverConfig::default()).unwrap();
        let oracle = bisect(0.3, 50.0, 1.0);
        assert!((s - oracle).abs() < 1e-10);
        assert!((s - 53.13).abs() < 0.01);
    }

    #[test]
    fn large_input_slope_tends_to_inverse_beta() {
        let m = model(50.0, 3.0);
        let cfg = SolverConfig::default();
        let h = 1e-3;
        let slope = (m.solve(300.0 + h, &cfg).unwrap() - m.solve(300.0 - h, &cfg).unwrap()) / (2.0 * h);
        assert!((slope * 3.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn near_exponential_regime() {
        let m = model(50.0, 1e-6);
        let cfg = SolverConfig::default();
        for i in 0..=60 {
            let x = -3.0 + 0.1 * i as f64;
            let s = m.solve(x, &cfg).unwrap();
            let g = 50.0 * x.exp();
            assert!((s - g).abs() / g < 0.005, "x {x}: {s} vs {g}");
        }
    }

    #[test]
    fn very_negative_input_stays_positive() {
        let m = model(50.0, 0.3);
        let s = m.solve(-30.0, &SolverConfig::default()).unwrap();
        assert!(s > 0.0 && s < 1e-4);
        assert!((s - bisect(0.3, 50.0, -30.0)).abs() < 1e-12);
        let s = m.solve(-700.0, &SolverConfig::default()).unwrap();
        assert!(s > 0.0);
    }

    #[test]
    fn huge_input_does_not_overflow() {
        let m = model(50.0, 0.3);
        let s = m.solve(1e4, &SolverConfig::default()).unwrap();
        assert!(s.is_finite());
        assert!(residual(&m, 1e4, s).abs() < 1e-9 * 1e4);
    }

    #[test]
    fn invalid_inputs() {
        assert!(SaturatedModel::new(0.0, 1.0, 0.0).is_err());
        assert!(SaturatedModel::new(1.0, -1.0, 0.0).is_err());
        assert!(model(1.0, 1.0).solve(f64::NAN, &SolverConfig::default()).is_err());
        let bad = SolverConfig { rel_tol: 0.0, max_iter: 10 };
        assert!(model(1.0, 1.0).solve(1.0, &bad).is_err());
    }

    #[test]
    fn standard_model_examples() {
        assert_eq!(standard_model_price(50.0, 0.0), 50.0);
        assert!((standard_model_price(50.0, 2f64.ln()) - 100.0).abs() < 1e-12);
        assert!((standard_model_price(1.0, -1.0) - 0.367_879).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn residual_and_round_trip(beta in 0.0f64..10.0, s0 in 1e-3f64..1e3, x in -30.0f64..30.0) {
            let m = model(s0, beta);
            let s = m.solve(x, &SolverConfig::default()).unwrap();
            prop_assert!(s > 0.0);
            prop_assert!(residual(&m, x, s).abs() < 1e-9 * (1.0 + x.abs()));
            prop_assert!((m.inverse(s).unwrap() - x).abs() < 1e-9 * (1.0 + x.abs()));
        }

        #[test]
        fn monotone_in_input(beta in 0.0f64..10.0, s0 in 1e-3f64..1e3, x1 in -30.0f64..30.0, dx in 1e-6f64..5.0) {
            let m = model(s0, beta);
            let cfg = SolverConfig::default();
            prop_assert!(m.solve(x1, &cfg).unwrap() < m.solve(x1 + dx, &cfg).unwrap());
        }

        #[test]
        fn compressed_by_saturation(b1 in 0.0f64..5.0, db in 0.0f64..5.0, x in 0.0f64..20.0) {
            let cfg = SolverConfig::default();
            let s1 = model(50.0, b1).solve(x, &cfg).unwrap();
            let s2 = model(50.0, b1 + db).solve(x, &cfg).unwrap();
            prop_assert!(s2 <= s1 * (1.0 + 1e-12));
        }
    }
}
