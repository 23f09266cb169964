//! Reference parameter sets: S&P 500 return fits (January 1950 to July
//! 2011, per mille) and the contract used throughout the pricing tables.

use crate::distributions::{NoiseDistribution, NormalDist, StudentT, TruncatedStudentT};

pub const S0: f64 = 50.0;
pub const STRIKE: f64 = 49.0;
pub const RATE: f64 = 0.03;

pub const HORIZONS: [u32; 5] = [1, 22, 44, 88, 128];
pub const BETAS: [f64; 6] = [0.001, 0.01, 0.1, 0.3, 1.0, 3.0];
pub const STRIKES: [f64; 9] = [40.0, 42.5, 45.0, 47.5, 50.0, 52.5, 55.0, 57.5, 60.0];

/// Truncation probability for the log-t pricer.
pub const LOG_T_TRUNCATION: f64 = 0.9999;

/// Simulation settings for the one-year descriptive study.
pub const SIM_PATHS: usize = 131_072;
pub const SIM_SEED: u64 = 1;
pub const SIM_VOL: f64 = 0.3;
pub const SIM_YEARS: f64 = 1.0;
pub const SIM_T_SHAPE: f64 = 3.0;

/// Bounds used to truncate the 1-day t fit before convolving.
pub const CONVOLUTION_BOUNDS: (f64, f64) = (-305.0, 116.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonFit {
    pub horizon_days: u32,
    pub t: (f64, f64, f64),
    pub normal: (f64, f64),
}

/// Best-fit (nu, b, loc) and (sigma, loc) per horizon.
pub const SP500_FITS: [HorizonFit; 5] = [
    HorizonFit { horizon_days: 1, t: (3.33, 6.06, 0.46), normal: (7.3, 0.42) },
    HorizonFit { horizon_days: 22, t: (6.3, 34.7, 9.0), normal: (38.5, 8.8) },
    HorizonFit { horizon_days: 44, t: (9.0, 50.4, 16.9), normal: (54.5, 17.1) },
    HorizonFit { horizon_days: 88, t: (12.6, 73.9, 34.2), normal: (79.2, 34.2) },
    HorizonFit { horizon_days: 128, t: (12.0, 98.0, 45.8), normal: (104.6, 46.5) },
];

pub fn fit_for(horizon_days: u32) -> Option<&'static HorizonFit> {
    SP500_FITS.iter().find(|f| f.horizon_days == horizon_days)
}

impl HorizonFit {
    pub fn t_dist(&self) -> NoiseDistribution {
        let (nu, b, loc) = self.t;
        StudentT::new(nu, b, loc).expect("preset parameters are valid").into()
    }

    pub fn normal_dist(&self) -> NoiseDistribution {
        let (sigma, loc) = self.normal;
        NormalDist::new(sigma, loc).expect("preset parameters are valid").into()
    }
}

/// The 1-day t fit truncated to [`CONVOLUTION_BOUNDS`].
pub fn truncated_daily_fit() -> NoiseDistribution {
    let (nu, b, loc) = SP500_FITS[0].t;
    let (lo, hi) = CONVOLUTION_BOUNDS;
    TruncatedStudentT::new(StudentT::new(nu, b, loc).expect("valid"), lo, hi).expect("valid window").into()
}
