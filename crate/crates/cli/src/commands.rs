use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use satprice::convolution::{compare, discretize, self_convolve_traced, DEFAULT_POINT_CAP};
use satprice::distributions::{NoiseDistribution, NormalDist, StudentT, TruncatedStudentT};
use satprice::fitting::{fit_normal, fit_student_t, goodness_artifacts, FitResult};
use satprice::market_data::{descriptive_stats, linear_returns, load_csv, ColumnSpec, PriceSeries};
use satprice::montecarlo::{report, CalibrationTarget, OptionTerms, DEFAULT_SD_STOP};
use satprice::presets;
use satprice::pricing::{
    annualized_sigma, price_black_scholes, price_empirical, price_saturated, price_truncated_log_t, PricingMean,
    PricingSpec, QuadratureGrid,
};
use satprice::saturated_model::SaturatedModel;

use crate::output::{num, opt, Artifact, Table};
use crate::CliError;

pub const DATA_DIR_ENV: &str = "SATPRICE_DATA_DIR";
pub const DEFAULT_CSV_NAME: &str = "sp500.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    T,
    Normal,
}

/// Resolves a price file: explicit paths are taken as given, relative ones
/// that do not exist fall back to the data directory, and no path at all
/// means `sp500.csv` in the data directory.
pub fn resolve_csv(path: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
    match (path, dir) {
        (Some(p), Some(d)) if p.is_relative() && !p.exists() => Ok(d.join(p)),
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(d)) => Ok(d.join(DEFAULT_CSV_NAME)),
        (None, None) => Err(CliError::Usage(format!("no --csv given and {DATA_DIR_ENV} is not set"))),
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CsvArgs {
    /// Price file; defaults to sp500.csv in $SATPRICE_DATA_DIR.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value = "Date")]
    pub date_column: String,
    #[arg(long, default_value = "Adj Close")]
    pub price_column: String,
}

impl CsvArgs {
    fn resolved(&self) -> Result<Self, CliError> {
        Ok(Self { csv: Some(resolve_csv(self.csv.as_deref())?), ..self.clone() })
    }

    fn load(&self) -> Result<PriceSeries, CliError> {
        let path = self.csv.as_deref().expect("resolved");
        let columns = ColumnSpec { date: self.date_column.clone(), price: self.price_column.clone() };
        Ok(load_csv(path, &columns)?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReturnsArgs {
    #[command(flatten)]
    pub data: CsvArgs,
    /// Horizons in trading days.
    #[arg(long, value_delimiter = ',', default_value = "1,22,44,88,128")]
    pub horizons: Vec<usize>,
}

pub fn returns(args: &ReturnsArgs) -> Result<Artifact, CliError> {
    let cfg = ReturnsArgs { data: args.data.resolved()?, ..args.clone() };
    if cfg.horizons.is_empty() {
        return Err(CliError::Usage("at least one horizon is required".into()));
    }
    let series = cfg.data.load()?;
    let mut table = Table::new(&["horizon", "count", "min", "average", "median", "max", "sd", "kurtosis", "skewness"]);
    let mut rows = Vec::new();
    for &h in &cfg.horizons {
        let d = descriptive_stats(&linear_returns(&series, h)?)?;
        table.push(vec![
            h.to_string(),
            d.count.to_string(),
            num(d.min),
            num(d.average),
            num(d.median),
            num(d.max),
            num(d.sd),
            opt(d.kurtosis),
            opt(d.skewness),
        ]);
        rows.push(d);
    }
    Ok(Artifact::new("returns", &cfg, None, &rows, table))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: CsvArgs,
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
    #[arg(long, value_enum, default_value_t = FamilyArg::T)]
    pub family: FamilyArg,
    /// Number of CDF overlay points to include in the JSON result.
    #[arg(long, default_value_t = 0)]
    pub overlay_points: usize,
}

#[derive(Serialize)]
struct FitOutput {
    #[serde(flatten)]
    fit: FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    goodness: Option<satprice::fitting::GoodnessArtifacts>,
}

pub fn fit(args: &FitArgs) -> Result<Artifact, CliError> {
    let cfg = FitArgs { data: args.data.resolved()?, ..args.clone() };
    let r = linear_returns(&cfg.data.load()?, cfg.horizon)?;
    let fit = match cfg.family {
        FamilyArg::T => fit_student_t(&r)?,
        FamilyArg::Normal => fit_normal(&r)?,
    };
    let goodness = if cfg.overlay_points > 0 { Some(goodness_artifacts(&r, &fit, cfg.overlay_points)?) } else { None };
    let mut table = Table::new(&["parameter", "value", "std_error"]);
    if let (Some(nu), Some(se)) = (fit.params.nu, fit.std_errors.nu) {
        table.push(vec!["nu".into(), num(nu), num(se)]);
    }
    let scale_name = if fit.params.nu.is_some() { "b" } else { "sigma" };
    table.push(vec![scale_name.into(), num(fit.params.scale), num(fit.std_errors.scale)]);
    table.push(vec!["loc".into(), num(fit.params.loc), num(fit.std_errors.loc)]);
    table.push(vec!["log_likelihood".into(), num(fit.log_likelihood), String::new()]);
    table.push(vec!["n_obs".into(), fit.n_obs.to_string(), String::new()]);
    if fit.nu_at_upper_bound {
        eprintln!("warning: shape estimate is on its upper bound; the data look normal");
    }
    Ok(Artifact::new("fit", &cfg, None, &FitOutput { fit, goodness }, table))
}

/// Reads a fit file written by `fit --format json` or a bare fit result.
pub fn read_fit_file(path: &Path) -> Result<FitResult, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let body = value.get("result").cloned().unwrap_or(value);
    serde_json::from_value(body).map_err(|e| CliError::Data(format!("{}: not a fit result: {e}", path.display())))
}

fn preset_fit(horizon: u32, family: FamilyArg) -> Result<NoiseDistribution, CliError> {
    let fit = presets::fit_for(horizon)
        .ok_or_else(|| CliError::Usage(format!("no preset fit for a {horizon}-day horizon; pass --fit-file")))?;
    Ok(match family {
        FamilyArg::T => fit.t_dist(),
        FamilyArg::Normal => fit.normal_dist(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Saturated,
    Bs,
    Empirical,
    LogT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeanArg {
    #[default]
    Centered,
    Forced,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PriceArgs {
    #[arg(long, value_enum, default_value_t = Method::Saturated)]
    pub method: Method,
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    #[arg(long, default_value_t = 22)]
    pub horizon: u32,
    /// One or more strikes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "49")]
    pub strike: Vec<f64>,
    #[arg(long, default_value_t = presets::S0)]
    pub s0: f64,
    #[arg(long, default_value_t = presets::RATE)]
    pub rate: f64,
    /// Fit result JSON; without it the built-in S&P 500 fit for the horizon is used.
    #[arg(long)]
    pub fit_file: Option<PathBuf>,
    /// Family of the built-in fit (default t, or normal for bs).
    #[arg(long, value_enum)]
    pub noise: Option<FamilyArg>,
    /// Annual volatility for bs; defaults to the annualized fit scale.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Truncation probability for log-t.
    #[arg(long, default_value_t = presets::LOG_T_TRUNCATION)]
    pub p_trunc: f64,
    #[arg(long, value_enum, default_value_t = MeanArg::Centered)]
    pub mean: MeanArg,
    #[command(flatten)]
    pub data: CsvArgs,
}

#[derive(Serialize)]
struct PriceRow {
    strike: f64,
    price: f64,
    #[serde(flatten)]
    audit: Value,
}

pub fn price(args: &PriceArgs) -> Result<Artifact, CliError> {
    let mut cfg = args.clone();
    if cfg.strike.is_empty() {
        return Err(CliError::Usage("at least one strike is required".into()));
    }
    if cfg.method == Method::Bs && cfg.sigma.is_some() {
        return black_scholes_sweep(cfg);
    }
    if cfg.noise.is_none() && cfg.fit_file.is_none() {
        cfg.noise = Some(if cfg.method == Method::Bs { FamilyArg::Normal } else { FamilyArg::T });
    }
    if cfg.method == Method::Empirical {
        cfg.data = cfg.data.resolved()?;
    }
    let fit = match &cfg.fit_file {
        Some(path) => read_fit_file(path)?.distribution()?,
        None => preset_fit(cfg.horizon, cfg.noise.expect("set above"))?,
    };
    let mut spec = PricingSpec::new(cfg.s0, cfg.strike[0], cfg.horizon, cfg.rate, fit, cfg.beta)?;
    spec.mean_constraint = match cfg.mean {
        MeanArg::Centered => PricingMean::Centered,
        MeanArg::Forced => PricingMean::Forced,
    };
    let returns = if cfg.method == Method::Empirical {
        Some(linear_returns(&cfg.data.load()?, cfg.horizon as usize)?)
    } else {
        None
    };
    let sigma = cfg.sigma.unwrap_or_else(|| annualized_sigma(spec.fit.scale(), cfg.horizon as f64));
    let grid = QuadratureGrid::standard();
    let mut rows = Vec::new();
    let mut table =
        Table::new(&["method", "strike", "price", "input_scale", "input_shift", "achieved_mean", "achieved_sd"]);
    let name = Method::to_possible_value(&cfg.method).expect("named").get_name().to_string();
    for &k in &cfg.strike {
        let s = spec.with_strike(k);
        let (price, audit, cells) = match cfg.method {
            Method::Saturated => {
                let r = price_saturated(&s, &grid)?;
                let cells = [r.input_scale, r.input_shift, r.achieved_mean, r.achieved_sd].map(num);
                (r.price, serde_json::to_value(r).expect("json"), cells)
            }
            Method::Empirical => {
                let r = price_empirical(returns.as_ref().expect("loaded"), &s)?;
                let cells = [r.input_scale, r.input_shift, r.achieved_mean, r.achieved_sd].map(num);
                (r.price, serde_json::to_value(r).expect("json"), cells)
            }
            Method::LogT => {
                let r = price_truncated_log_t(&s, cfg.p_trunc)?;
                if r.all_payoffs_zero {
                    eprintln!("warning: truncation leaves no positive payoff at strike {k}");
                }
                let cells = [String::new(), num(r.log_location), String::new(), String::new()];
                (r.price, serde_json::to_value(r).expect("json"), cells)
            }
            Method::Bs => {
                let p = price_black_scholes(cfg.s0, k, cfg.horizon as f64, cfg.rate, sigma)?;
                (p, serde_json::json!({ "sigma_annual": sigma }), Default::default())
            }
        };
        let mut row = vec![name.clone(), num(k), num(price)];
        row.extend(cells);
        table.push(row);
        rows.push(PriceRow { strike: k, price, audit });
    }
    Ok(Artifact::new("price", &cfg, None, &rows, table))
}

/// Black-Scholes with an explicit volatility; no fit is consulted.
fn black_scholes_sweep(cfg: PriceArgs) -> Result<Artifact, CliError> {
    let sigma = cfg.sigma.expect("checked by caller");
    let mut rows = Vec::new();
    let mut table = Table::new(&["method", "strike", "price", "sigma_annual"]);
    for &k in &cfg.strike {
        let price = price_black_scholes(cfg.s0, k, cfg.horizon as f64, cfg.rate, sigma)?;
        table.push(vec!["bs".into(), num(k), num(price), num(sigma)]);
        rows.push(PriceRow { strike: k, price, audit: serde_json::json!({ "sigma_annual": sigma }) });
    }
    Ok(Artifact::new("price", &cfg, None, &rows, table))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Saturation values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,0.3,1,3")]
    pub beta: Vec<f64>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Normal)]
    pub noise: FamilyArg,
    /// Shape of the t noise.
    #[arg(long, default_value_t = presets::SIM_T_SHAPE)]
    pub nu: f64,
    #[arg(long, default_value_t = presets::SIM_PATHS)]
    pub paths: usize,
    #[arg(long, default_value_t = presets::SIM_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = presets::S0)]
    pub s0: f64,
    #[arg(long, default_value_t = presets::STRIKE)]
    pub strike: f64,
    #[arg(long, default_value_t = presets::RATE)]
    pub rate: f64,
    #[arg(long, default_value_t = presets::SIM_YEARS)]
    pub years: f64,
    /// Volatility as a fraction of the forward.
    #[arg(long, default_value_t = presets::SIM_VOL)]
    pub vol: f64,
    /// Override the target mean (default: the forward).
    #[arg(long)]
    pub target_mean: Option<f64>,
    /// Override the target standard deviation.
    #[arg(long)]
    pub target_sd: Option<f64>,
}

pub fn simulate(args: &SimulateArgs) -> Result<Artifact, CliError> {
    let cfg = args.clone();
    if cfg.paths == 0 {
        return Err(CliError::Usage("--paths must be positive".into()));
    }
    let noise: NoiseDistribution = match cfg.noise {
        FamilyArg::Normal => NormalDist::standard().into(),
        FamilyArg::T => StudentT::standard(cfg.nu)?.into(),
    };
    let base = CalibrationTarget::for_contract(cfg.s0, cfg.rate, cfg.years, cfg.vol, &noise)?;
    let target = CalibrationTarget::new(
        cfg.target_mean.unwrap_or(base.target_mean),
        cfg.target_sd.unwrap_or(base.target_sd),
        DEFAULT_SD_STOP,
    )?;
    let terms = OptionTerms { strike: cfg.strike, rate: cfg.rate, years: cfg.years };
    let mut table = Table::new(&[
        "beta",
        "min",
        "average",
        "max",
        "kurtosis",
        "skewness",
        "input_scale",
        "input_shift",
        "option_price",
        "option_std_error",
    ]);
    let mut reports = Vec::new();
    for &beta in &cfg.beta {
        let model = SaturatedModel::new(cfg.s0, beta, 0.0)?;
        let r = report(&model, &noise, &target, &terms, cfg.paths, cfg.seed)?;
        table.push(vec![
            num(beta),
            num(r.min),
            num(r.average),
            num(r.max),
            opt(r.kurtosis),
            opt(r.skewness),
            num(r.input_scale),
            num(r.input_shift),
            num(r.option_price),
            num(r.option_std_error),
        ]);
        reports.push(r);
    }
    Ok(Artifact::new("simulate", &cfg, Some(cfg.seed), &reports, table))
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((lo, hi))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConvolveArgs {
    /// Fit result JSON for the one-step density; defaults to the built-in 1-day t fit.
    #[arg(long)]
    pub fit_file: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    /// Truncation window `lo,hi` in per mille; also the grid extent.
    #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
    pub truncate: Option<(f64, f64)>,
    #[arg(long, default_value_t = satprice::convolution::DEFAULT_STEP)]
    pub step: f64,
    /// Compare against demeaned n-day returns from this price file.
    #[arg(long)]
    pub compare_csv: Option<PathBuf>,
    #[arg(long, default_value = "Date")]
    pub date_column: String,
    #[arg(long, default_value = "Adj Close")]
    pub price_column: String,
}

#[derive(Serialize)]
struct ConvolveOutput {
    step_masses: Vec<f64>,
    moments: satprice::convolution::DensityMoments,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<satprice::convolution::Comparison>,
}

pub fn convolve(args: &ConvolveArgs) -> Result<Artifact, CliError> {
    let mut cfg = args.clone();
    if cfg.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let (lo, hi) = *cfg.truncate.get_or_insert(presets::CONVOLUTION_BOUNDS);
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(CliError::Usage(format!("truncation bounds must satisfy lo < hi, got {lo},{hi}")));
    }
    if let Some(p) = &cfg.compare_csv {
        cfg.compare_csv = Some(resolve_csv(Some(p))?);
    }
    let base = match &cfg.fit_file {
        Some(path) => read_fit_file(path)?.distribution()?,
        None => presets::SP500_FITS[0].t_dist(),
    };
    let one_step: NoiseDistribution = match base {
        NoiseDistribution::StudentT(t) => TruncatedStudentT::new(t, lo, hi)?.into(),
        NoiseDistribution::TruncatedStudentT(t) => TruncatedStudentT::new(*t.base(), lo, hi)?.into(),
        normal => normal,
    };
    let g = discretize(&one_step, lo, hi, cfg.step)?;
    let trace = self_convolve_traced(&g, cfg.n, DEFAULT_POINT_CAP)?;
    let density = trace.density;
    let moments = density.moments();
    let (comparison, table) = match &cfg.compare_csv {
        Some(path) => {
            let columns = ColumnSpec { date: cfg.date_column.clone(), price: cfg.price_column.clone() };
            let r = linear_returns(&load_csv(path, &columns)?, cfg.n)?.demeaned()?;
            let cmp = compare(&density, &r)?;
            let mut t = Table::new(&["x", "data", "convolution", "normal_fit", "t_fit"]);
            for row in &cmp.overlay {
                t.push(vec![num(row.x), num(row.data), num(row.convolution), num(row.normal_fit), opt(row.t_fit)]);
            }
            (Some(cmp), t)
        }
        None => {
            let mut t = Table::new(&["x", "density"]);
            for (x, v) in density.xs().iter().zip(&density.values) {
                t.push(vec![num(*x), num(*v)]);
            }
            (None, t)
        }
    };
    let out = ConvolveOutput { step_masses: trace.step_masses, moments, comparison };
    Ok(Artifact::new("convolve", &cfg, None, &out, table))
}
