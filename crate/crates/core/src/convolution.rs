//! Self-convolution of densities sampled on a uniform grid.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::distributions::NoiseDistribution;
use crate::error::{Error, Result};
use crate::fitting::{fit_normal, fit_student_t};
use crate::market_data::{adaptive_histogram, ReturnSeries};
use crate::quadrature::trapezoid;
use crate::stats::{self, SampleMoments};

/// Default cap on grid points produced by a convolution.
pub const DEFAULT_POINT_CAP: usize = 1 << 24;
pub const DEFAULT_STEP: f64 = 0.5;

// probability allowed outside the grid for an unbounded density
const OUTSIDE_MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedDensity {
    pub grid_min: f64,
    pub grid_step: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMoments {
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl GriddedDensity {
    pub fn new(grid_min: f64, grid_step: f64, values: Vec<f64>) -> Result<Self> {
        if !(grid_step > 0.0 && grid_step.is_finite()) || !grid_min.is_finite() {
            return Err(Error::invalid("grid step must be positive and the origin finite"));
        }
        if values.is_empty() || values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("densities must be finite and nonnegative"));
        }
        Ok(Self { grid_min, grid_step, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid_max(&self) -> f64 {
        self.grid_min + self.grid_step * (self.values.len() - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.grid_min + self.grid_step * i as f64).collect()
    }

    /// Trapezoid integral of the density.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.xs(), &self.values)
    }

    fn renormalized(mut self) -> Self {
        let m = self.mass();
        if m > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= m);
        }
        self
    }

    /// Moments with each grid point weighted by `value·step`.
    pub fn moments(&self) -> DensityMoments {
        let xs = self.xs();
        let (mean, var, skewness, kurtosis) = stats::weighted_moments(&xs, &self.values);
        DensityMoments { mean, sd: var.sqrt(), skewness, kurtosis }
    }

    /// Linear interpolation; zero outside the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        let u = (x - self.grid_min) / self.grid_step;
        if u < 0.0 || u > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.values.len() - 1);
        if i + 1 >= self.values.len() {
            return self.values[i];
        }
        let f = u - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Copy translated by `dx`.
    pub fn shifted(&self, dx: f64) -> Self {
        Self { grid_min: self.grid_min + dx, ..self.clone() }
    }
}

/// Samples `d` on `grid_min, grid_min + step, …` up to `grid_max` and
/// renormalizes to unit trapezoid mass.
pub fn discretize(d: &NoiseDistribution, grid_min: f64, grid_max: f64, step: f64) -> Result<GriddedDensity> {
    if !(step > 0.0) || !(grid_max > grid_min) {
        return Err(Error::invalid("grid needs step > 0 and grid_max > grid_min"));
    }
    let (lo, hi) = d.support();
    let tol = 1e-9 * step;
    let covered = if lo.is_finite() && hi.is_finite() {
        grid_min <= lo + tol && grid_max >= hi - tol
    } else {
        d.cdf(grid_min) + d.sf(grid_max) <= OUTSIDE_MASS_TOL
    };
    if !covered {
        return Err(Error::SupportNotCovered { grid_min, grid_max });
    }
    let n = ((grid_max - grid_min) / step + 1e-9).floor() as usize + 1;
    let values: Vec<f64> = (0..n).map(|i| d.pdf(grid_min + step * i as f64)).collect();
    let g = GriddedDensity::new(grid_min, step, values)?;
    Ok(g.renormalized())
}

/// Linear convolution of two densities on the same step, trapezoid rule
/// in the integration variable.
pub fn convolve(a: &GriddedDensity, b: &GriddedDensity, cap: usize) -> Result<GriddedDensity> {
    if (a.grid_step - b.grid_step).abs() > 1e-12 * a.grid_step {
        return Err(Error::invalid("densities must share a grid step"));
    }
    let out_len = a.len() + b.len() - 1;
    if out_len > cap {
        return Err(Error::GridOverflow { points: out_len, cap });
    }
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    // endpoint half-weights make each output value the trapezoid rule over
    // the overlap of the two supports
    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        let last = buf.len() - 1;
        if last > 0 {
            buf[0] *= 0.5;
            buf[last] *= 0.5;
        }
        buf.resize(size, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(&a.values);
    let mut fb = pad(&b.values);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = a.grid_step / size as f64;
    let values = fa[..out_len].iter().map(|c| (c.re * scale).max(0.0)).collect();
    GriddedDensity::new(a.grid_min + b.grid_min, a.grid_step, values)
}

/// Result of [`self_convolve_traced`]: the n-fold density and the
/// trapezoid mass after every convolution, before renormalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionTrace {
    pub density: GriddedDensity,
    pub step_masses: Vec<f64>,
}

pub fn self_convolve(g: &GriddedDensity, n: usize) -> Result<GriddedDensity> {
    Ok(self_convolve_traced(g, n, DEFAULT_POINT_CAP)?.density)
}

/// n-fold self-convolution by repeated squaring.
pub fn self_convolve_traced(g: &GriddedDensity, n: usize, cap: usize) -> Result<ConvolutionTrace> {
    if n == 0 {
        return Err(Error::invalid("fold count must be at least 1"));
    }
    let needed = n.saturating_mul(g.len() - 1).saturating_add(1);
    if needed > cap {
        return Err(Error::GridOverflow { points: needed, cap });
    }
    let mut masses = Vec::new();
    let mut result: Option<GriddedDensity> = None;
    let mut base = g.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => {
                    let c = convolve(&r, &base, cap)?;
                    masses.push(c.mass());
                    c.renormalized()
                }
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        let sq = convolve(&base, &base, cap)?;
        masses.push(sq.mass());
        base = sq.renormalized();
    }
    Ok(ConvolutionTrace { density: result.expect("n >= 1"), step_masses: masses })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub x: f64,
    pub data: f64,
    pub convolution: f64,
    pub normal_fit: f64,
    pub t_fit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub overlay: Vec<OverlayRow>,
    /// Convolution minus data: mean, sd, skewness and kurtosis.
    pub deltas: DensityMoments,
    pub convolution: DensityMoments,
    pub data: DensityMoments,
}

pub fn moment_deltas(a: &DensityMoments, b: &DensityMoments) -> DensityMoments {
    DensityMoments {
        mean: a.mean - b.mean,
        sd: a.sd - b.sd,
        skewness: a.skewness - b.skewness,
        kurtosis: a.kurtosis - b.kurtosis,
    }
}

/// Overlays the convolution, translated to the data average, with the
/// data histogram and best-fit normal and t densities. The returns are
/// expected to be demeaned.
pub fn compare(g: &GriddedDensity, r: &ReturnSeries) -> Result<Comparison> {
    if r.values.len() < 2 {
        return Err(Error::EmptySeries("comparison needs at least 2 returns".into()));
    }
    let sample = SampleMoments::from_slice(&r.values);
    let data = DensityMoments {
        mean: sample.mean,
        sd: sample.sd,
        skewness: sample.skewness.unwrap_or(0.0),
        kurtosis: sample.kurtosis.unwrap_or(0.0),
    };
    let conv = g.moments();
    let centred = g.shifted(sample.mean - conv.mean);
    let hist = adaptive_histogram(r, 5)?;
    let normal = fit_normal(r)?.distribution()?;
    let t = fit_student_t(r).ok().and_then(|f| f.distribution().ok());
    let overlay = hist
        .centers()
        .iter()
        .zip(&hist.densities)
        .map(|(&x, &density)| OverlayRow {
            x,
            data: density,
            convolution: centred.density_at(x),
            normal_fit: normal.pdf(x),
            t_fit: t.map(|d| d.pdf(x)),
        })
        .collect();
    let conv = centred.moments();
    Ok(Comparison { overlay, deltas: moment_deltas(&conv, &data), convolution: conv, data })
}
