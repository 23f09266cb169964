//! `report`: regenerates the five result tables from one TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use satprice::distributions::{NoiseDistribution, NormalDist, StudentT};
use satprice::fitting::{fit_normal, fit_student_t};
use satprice::market_data::{descriptive_stats, linear_returns, load_csv, ColumnSpec, PriceSeries, ReturnSeries};
use satprice::montecarlo::{report, CalibrationTarget, OptionTerms};
use satprice::presets;
use satprice::pricing::{
    annualized_sigma, price_black_scholes, price_empirical, price_saturated, price_truncated_log_t, PricingSpec,
    QuadratureGrid,
};
use satprice::saturated_model::SaturatedModel;

use crate::commands::resolve_csv;
use crate::output::{num, opt, Artifact, Format, Table};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Price file. Relative paths fall back to the data directory. When
    /// absent, fitted parameters come from the built-in presets and the
    /// tables that need raw returns are skipped.
    pub data_csv: Option<PathBuf>,
    pub date_column: String,
    pub price_column: String,
    pub format: Format,
    pub contract: Contract,
    pub simulation: Simulation,
    pub horizons: Vec<u32>,
    pub betas: Vec<f64>,
    pub sweep: Sweep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Contract {
    pub s0: f64,
    pub strike: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub paths: usize,
    pub seed: u64,
    pub vol: f64,
    pub years: f64,
    pub t_shape: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub horizon: u32,
    pub beta: f64,
    pub strikes: Vec<f64>,
    pub log_t_truncation: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            data_csv: None,
            date_column: "Date".into(),
            price_column: "Adj Close".into(),
            format: Format::Csv,
            contract: Contract::default(),
            simulation: Simulation::default(),
            horizons: presets::HORIZONS.to_vec(),
            betas: presets::BETAS.to_vec(),
            sweep: Sweep::default(),
        }
    }
}

impl Default for Contract {
    fn default() -> Self {
        Self { s0: presets::S0, strike: presets::STRIKE, rate: presets::RATE }
    }
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            paths: presets::SIM_PATHS,
            seed: presets::SIM_SEED,
            vol: presets::SIM_VOL,
            years: presets::SIM_YEARS,
            t_shape: presets::SIM_T_SHAPE,
        }
    }
}

impl Default for Sweep {
    fn default() -> Self {
        Self { horizon: 22, beta: 0.3, strikes: presets::STRIKES.to_vec(), log_t_truncation: presets::LOG_T_TRUNCATION }
    }
}

pub fn load_config(path: &Path) -> Result<ReportConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

struct HorizonInputs {
    horizon: u32,
    t: NoiseDistribution,
    normal: NoiseDistribution,
    returns: Option<ReturnSeries>,
}

fn horizon_inputs(series: Option<&PriceSeries>, h: u32) -> Result<HorizonInputs, CliError> {
    match series {
        Some(s) => {
            let r = linear_returns(s, h as usize)?;
            let t = fit_student_t(&r)?.distribution()?;
            let normal = fit_normal(&r)?.distribution()?;
            Ok(HorizonInputs { horizon: h, t, normal, returns: Some(r) })
        }
        None => {
            let fit = presets::fit_for(h)
                .ok_or_else(|| CliError::Usage(format!("no preset fit for a {h}-day horizon and no data_csv")))?;
            Ok(HorizonInputs { horizon: h, t: fit.t_dist(), normal: fit.normal_dist(), returns: None })
        }
    }
}

fn simulation_summary(cfg: &ReportConfig) -> Result<Table, CliError> {
    let sim = &cfg.simulation;
    let terms = OptionTerms { strike: cfg.contract.strike, rate: cfg.contract.rate, years: sim.years };
    let mut table =
        Table::new(&["noise", "beta", "min", "average", "max", "kurtosis", "skewness", "input_scale", "option_price"]);
    let normal: NoiseDistribution = NormalDist::standard().into();
    let t: NoiseDistribution = StudentT::standard(sim.t_shape)?.into();
    for (name, noise) in [("t", &t), ("normal", &normal)] {
        let target = CalibrationTarget::for_contract(cfg.contract.s0, cfg.contract.rate, sim.years, sim.vol, noise)?;
        for &beta in &cfg.betas {
            let model = SaturatedModel::new(cfg.contract.s0, beta, 0.0)?;
            let r = report(&model, noise, &target, &terms, sim.paths, sim.seed)?;
            table.push(vec![
                name.into(),
                num(beta),
                num(r.min),
                num(r.average),
                num(r.max),
                opt(r.kurtosis),
                opt(r.skewness),
                num(r.input_scale),
                num(r.option_price),
            ]);
        }
    }
    Ok(table)
}

fn return_stats(inputs: &[HorizonInputs]) -> Result<Table, CliError> {
    let mut table = Table::new(&[
        "horizon",
        "count",
        "min",
        "average",
        "max",
        "t_nu",
        "t_b",
        "t_loc",
        "normal_sigma",
        "normal_loc",
    ]);
    for h in inputs {
        let r = h.returns.as_ref().expect("data present");
        let d = descriptive_stats(r)?;
        table.push(vec![
            h.horizon.to_string(),
            d.count.to_string(),
            num(d.min),
            num(d.average),
            num(d.max),
            opt(h.t.shape()),
            num(h.t.scale()),
            num(h.t.loc()),
            num(h.normal.scale()),
            num(h.normal.loc()),
        ]);
    }
    Ok(table)
}

fn horizon_prices(cfg: &ReportConfig, inputs: &[HorizonInputs]) -> Result<Table, CliError> {
    let mut columns = vec!["horizon".to_string(), "noise".to_string()];
    columns.extend(cfg.betas.iter().map(|b| format!("beta_{b}")));
    columns.push("black_scholes".into());
    let mut table = Table { columns, rows: Vec::new() };
    let grid = QuadratureGrid::standard();
    let c = &cfg.contract;
    for h in inputs {
        let bs = price_black_scholes(
            c.s0,
            c.strike,
            h.horizon as f64,
            c.rate,
            annualized_sigma(h.normal.scale(), h.horizon as f64),
        )?;
        for (name, noise) in [("t", h.t), ("normal", h.normal)] {
            let mut row = vec![h.horizon.to_string(), name.to_string()];
            for &beta in &cfg.betas {
                let spec = PricingSpec::new(c.s0, c.strike, h.horizon, c.rate, noise, beta)?;
                row.push(num(price_saturated(&spec, &grid)?.price));
            }
            row.push(num(bs));
            table.rows.push(row);
        }
    }
    Ok(table)
}

fn empirical_prices(cfg: &ReportConfig, inputs: &[HorizonInputs]) -> Result<Table, CliError> {
    let mut table = Table::new(&["horizon", "empirical"]);
    let c = &cfg.contract;
    for h in inputs {
        let spec = PricingSpec::new(c.s0, c.strike, h.horizon, c.rate, h.normal, 0.0)?;
        let p = price_empirical(h.returns.as_ref().expect("data present"), &spec)?.price;
        table.push(vec![h.horizon.to_string(), num(p)]);
    }
    Ok(table)
}

fn strike_sweep(cfg: &ReportConfig, h: &HorizonInputs) -> Result<Table, CliError> {
    let with_data = h.returns.is_some();
    let mut cols = vec!["strike", "t", "normal", "black_scholes"];
    if with_data {
        cols.push("empirical");
    }
    cols.push("log_t");
    let mut table = Table::new(&cols);
    let grid = QuadratureGrid::standard();
    let c = &cfg.contract;
    let sw = &cfg.sweep;
    let t_spec = PricingSpec::new(c.s0, c.strike, h.horizon, c.rate, h.t, sw.beta)?;
    let n_spec = PricingSpec::new(c.s0, c.strike, h.horizon, c.rate, h.normal, sw.beta)?;
    let sigma = annualized_sigma(h.normal.scale(), h.horizon as f64);
    for &k in &sw.strikes {
        let mut row = vec![
            num(k),
            num(price_saturated(&t_spec.with_strike(k), &grid)?.price),
            num(price_saturated(&n_spec.with_strike(k), &grid)?.price),
            num(price_black_scholes(c.s0, k, h.horizon as f64, c.rate, sigma)?),
        ];
        if let Some(r) = &h.returns {
            row.push(num(price_empirical(r, &n_spec.with_strike(k))?.price));
        }
        row.push(num(price_truncated_log_t(&t_spec.with_strike(k), sw.log_t_truncation)?.price));
        table.push(row);
    }
    Ok(table)
}

/// Writes one CSV per result table into `out_dir` and returns the written paths.
pub fn run(cfg: &ReportConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = cfg.clone();
    if let Some(p) = &cfg.data_csv {
        cfg.data_csv = Some(resolve_csv(Some(p))?);
    }
    let series = match &cfg.data_csv {
        Some(p) => {
            let columns = ColumnSpec { date: cfg.date_column.clone(), price: cfg.price_column.clone() };
            Some(load_csv(p, &columns)?)
        }
        None => None,
    };
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Output(format!("{}: {e}", out_dir.display())))?;
    let inputs: Vec<HorizonInputs> =
        cfg.horizons.iter().map(|&h| horizon_inputs(series.as_ref(), h)).collect::<Result<_, _>>()?;
    let sweep = inputs.iter().position(|h| h.horizon == cfg.sweep.horizon).ok_or_else(|| {
        CliError::Usage(format!("sweep horizon {} is not among the configured horizons", cfg.sweep.horizon))
    })?;

    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut written = Vec::new();
    let mut emit = |name: &str, seed: Option<u64>, table: Table| -> Result<(), CliError> {
        let path = out_dir.join(format!("{name}.{ext}"));
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = table
            .rows
            .iter()
            .map(|r| table.columns.iter().cloned().zip(r.iter().map(|v| serde_json::Value::from(v.clone()))).collect())
            .collect();
        Artifact::new("report", &cfg, seed, &serde_json::json!({ "table": name, "rows": rows }), table)
            .emit(cfg.format, Some(&path))?;
        written.push(path);
        Ok(())
    };

    emit("simulation_summary", Some(cfg.simulation.seed), simulation_summary(&cfg)?)?;
    if series.is_some() {
        emit("return_stats", None, return_stats(&inputs)?)?;
    } else {
        eprintln!("note: no data_csv; skipping return_stats and empirical_prices, using built-in fits");
    }
    emit("horizon_prices", None, horizon_prices(&cfg, &inputs)?)?;
    if series.is_some() {
        emit("empirical_prices", None, empirical_prices(&cfg, &inputs)?)?;
    }
    emit("strike_sweep", None, strike_sweep(&cfg, &inputs[sweep])?)?;
    Ok(written)
}
