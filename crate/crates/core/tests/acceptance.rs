//! Acceptance checks. Prints one PASS/FAIL/INCONCLUSIVE line per criterion
//! and exits nonzero when any criterion fails.
//!
//! Run with `cargo test -p satprice --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use satprice::convolution::{discretize, self_convolve_traced, DEFAULT_POINT_CAP, DEFAULT_STEP};
use satprice::distributions::{seeded_rng, NoiseDistribution, NormalDist, StudentT};
use satprice::fitting::{fit_normal, fit_student_t};
use satprice::market_data::{descriptive_stats, linear_returns, load_csv, ColumnSpec, ReturnSeries};
use satprice::montecarlo::{report, CalibrationTarget, OptionTerms};
use satprice::presets::{self, BETAS, HORIZONS, RATE, S0, STRIKE, STRIKES};
use satprice::pricing::{
    annualized_sigma, price_black_scholes, price_empirical, price_saturated, price_truncated_log_t, PricingSpec,
    QuadratureGrid,
};
use satprice::saturated_model::{standard_model_price, SaturatedModel, SolverConfig};
use satprice::Error;

enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: impl Into<String>) -> Self {
        Self { verdict: if ok { Verdict::Pass } else { Verdict::Fail }, detail: detail.into() }
    }
}

const HORIZON_NORMAL: [[f64; 6]; 5] = [
    [1.008, 1.007, 1.007, 1.006, 1.006, 1.006],
    [1.488, 1.481, 1.469, 1.467, 1.466, 1.466],
    [1.874, 1.861, 1.840, 1.836, 1.835, 1.834],
    [2.531, 2.508, 2.472, 2.459, 2.455, 2.455],
    [3.207, 3.167, 3.104, 3.090, 3.083, 3.082],
];

const HORIZON_T: [[f64; 6]; 5] = [
    [1.025, 1.020, 1.018, 1.018, 1.018, 1.018],
    [1.527, 1.516, 1.508, 1.505, 1.504, 1.504],
    [1.910, 1.895, 1.869, 1.865, 1.863, 1.862],
    [2.543, 2.520, 2.476, 2.467, 2.466, 2.463],
    [3.242, 3.196, 3.125, 3.109, 3.102, 3.100],
];

const HORIZON_BS: [f64; 5] = [1.0061, 1.4529, 1.8162, 2.4261, 3.0361];

const SIM_NORMAL_MAX: [f64; 6] = [170.0, 146.0, 125.0, 121.0, 120.0, 120.0];
const SIM_NORMAL_KURT: [f64; 6] = [4.2, 3.4, 2.9, 2.9, 3.0, 3.0];
const SIM_NORMAL_SKEW: [f64; 6] = [0.83, 0.56, 0.16, 0.07, 0.02, 0.005];
const SIM_NORMAL_Q: [f64; 6] = [0.300, 0.451, 1.87, 4.97, 15.8, 46.7];
const SIM_NORMAL_CO: [f64; 6] = [7.03, 7.16, 7.28, 7.29, 7.29, 7.29];
const SIM_T_CO: [f64; 6] = [5.91, 8.62, 10.04, 10.21, 10.27, 10.29];

fn spec(horizon: u32, fit: NoiseDistribution, beta: f64) -> PricingSpec {
    PricingSpec::new(S0, STRIKE, horizon, RATE, fit, beta).expect("valid contract")
}

fn black_scholes() -> Outcome {
    let one_year = price_black_scholes(S0, STRIKE, 252.0, RATE, 0.3).unwrap();
    let mut ok = (one_year - 7.12).abs() <= 0.005;
    let mut detail = format!("1y σ=0.3 → {one_year:.5}");
    for (fit, expected) in presets::SP500_FITS.iter().zip(HORIZON_BS) {
        let t = fit.horizon_days as f64;
        let c = price_black_scholes(S0, STRIKE, t, RATE, annualized_sigma(fit.normal.0, t)).unwrap();
        ok &= (c - expected).abs() <= 0.0005;
        detail.push_str(&format!("; {}d {c:.5} (ref {expected})", fit.horizon_days));
    }
    Outcome::check(ok, detail)
}

fn horizon_prices(
    pick: impl Fn(&presets::HorizonFit) -> NoiseDistribution,
    table: &[[f64; 6]; 5],
    tol: f64,
) -> Outcome {
    let grid = QuadratureGrid::standard();
    let mut worst = 0.0f64;
    let mut outside = Vec::new();
    for (fit, row) in presets::SP500_FITS.iter().zip(table) {
        for (&beta, &expected) in BETAS.iter().zip(row) {
            let c = price_saturated(&spec(fit.horizon_days, pick(fit), beta), &grid).unwrap().price;
            let err = c - expected;
            worst = worst.max(err.abs());
            if err.abs() > tol {
                outside.push(format!("{}d β={beta}: {c:.4} vs {expected}", fit.horizon_days));
            }
        }
    }
    let mut detail = format!("worst |Δ| {worst:.4} (band ±{tol})");
    if !outside.is_empty() {
        detail.push_str(&format!("; {} cells outside: {}", outside.len(), outside.join(", ")));
    }
    Outcome::check(outside.is_empty(), detail)
}

fn monotone_convex(prices: &[f64]) -> bool {
    let decreasing = prices.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let convex = prices.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-9);
    decreasing && convex
}

fn strike_sweep() -> Outcome {
    let fit = presets::fit_for(22).unwrap();
    let grid = QuadratureGrid::standard();
    let t_spec = spec(22, fit.t_dist(), 0.3);
    let n_spec = spec(22, fit.normal_dist(), 0.3);
    let sigma = annualized_sigma(fit.normal.0, 22.0);
    let mut cols: [Vec<f64>; 4] = Default::default();
    for &k in &STRIKES {
        cols[0].push(price_saturated(&t_spec.with_strike(k), &grid).unwrap().price);
        cols[1].push(price_saturated(&n_spec.with_strike(k), &grid).unwrap().price);
        cols[2].push(price_black_scholes(S0, k, 22.0, RATE, sigma).unwrap());
        cols[3].push(price_truncated_log_t(&t_spec.with_strike(k), presets::LOG_T_TRUNCATION).unwrap().price);
    }
    let at_50 = STRIKES.iter().position(|&k| k == 50.0).unwrap();
    let names = ["t", "normal", "BS", "log-t"];
    let refs = [0.861, 0.836, 0.834, 0.856];
    let mut ok = true;
    let mut parts = Vec::new();
    for ((col, name), r) in cols.iter().zip(names).zip(refs) {
        let v = col[at_50];
        let shape = monotone_convex(col);
        ok &= (v - r).abs() <= 0.02 && shape;
        parts.push(format!("{name} {v:.4} (ref {r}{})", if shape { "" } else { ", not monotone/convex" }));
    }
    Outcome::check(ok, format!("K=50: {}", parts.join(", ")))
}

fn simulation_summary() -> Outcome {
    let terms = OptionTerms { strike: STRIKE, rate: RATE, years: presets::SIM_YEARS };
    let normal: NoiseDistribution = NormalDist::standard().into();
    let t: NoiseDistribution = StudentT::standard(presets::SIM_T_SHAPE).unwrap().into();
    let columns = |noise: &NoiseDistribution| {
        let target = CalibrationTarget::for_contract(S0, RATE, presets::SIM_YEARS, presets::SIM_VOL, noise).unwrap();
        BETAS
            .iter()
            .map(|&beta| {
                let model = SaturatedModel::new(S0, beta, 0.0).unwrap();
                report(&model, noise, &target, &terms, presets::SIM_PATHS, presets::SIM_SEED).unwrap()
            })
            .collect::<Vec<_>>()
    };
    let mut fails = Vec::new();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let skew_se = (6.0 / presets::SIM_PATHS as f64).sqrt();
    for (i, r) in columns(&normal).iter().enumerate() {
        let b = r.beta;
        if rel(r.max, SIM_NORMAL_MAX[i]) > 0.15 {
            fails.push(format!("normal β={b} max {:.1}", r.max));
        }
        let kurt = r.kurtosis.unwrap();
        if rel(kurt, SIM_NORMAL_KURT[i]) > 0.15 {
            fails.push(format!("normal β={b} kurtosis {kurt:.2}"));
        }
        let skew = r.skewness.unwrap();
        let band = (0.15 * SIM_NORMAL_SKEW[i]).max(3.0 * skew_se);
        if (skew - SIM_NORMAL_SKEW[i]).abs() > band {
            fails.push(format!("normal β={b} skewness {skew:.3}"));
        }
        if rel(r.input_scale, SIM_NORMAL_Q[i]) > 0.05 {
            fails.push(format!("normal β={b} q {:.3}", r.input_scale));
        }
        if (r.option_price - SIM_NORMAL_CO[i]).abs() > 0.10 {
            fails.push(format!("normal β={b} C_o {:.3}", r.option_price));
        }
    }
    let t_cols = columns(&t);
    if t_cols[0].average <= t_cols[t_cols.len() - 1].average {
        fails.push("t mean not decreasing across β".into());
    }
    if !t_cols.windows(2).all(|w| w[1].input_scale > w[0].input_scale) {
        fails.push("t input scale not increasing in β".into());
    }
    for (r, co) in t_cols.iter().zip(SIM_T_CO) {
        if (r.option_price - co).abs() > 0.5 {
            fails.push(format!("t β={} C_o {:.3} vs {co}", r.beta, r.option_price));
        }
    }
    let detail = if fails.is_empty() {
        format!("{} paths, seed {}", presets::SIM_PATHS, presets::SIM_SEED)
    } else {
        fails.join(", ")
    };
    Outcome::check(fails.is_empty(), detail)
}

fn fit_recovery() -> Outcome {
    let truth = StudentT::new(3.33, 6.06, 0.46).unwrap();
    let noise: NoiseDistribution = truth.into();
    let mut hits = 0;
    let trials = 20;
    for seed in 0..trials {
        let sample = noise.sample(15491, 1000 + seed).unwrap();
        let fit = fit_student_t(&ReturnSeries::new(1, sample).unwrap()).unwrap();
        let p = fit.params;
        let se = fit.std_errors;
        let within = (p.nu.unwrap() - 3.33).abs() <= 3.0 * se.nu.unwrap()
            && (p.scale - 6.06).abs() <= 3.0 * se.scale
            && (p.loc - 0.46).abs() <= 3.0 * se.loc;
        hits += within as u64;
    }
    Outcome::check(hits * 100 >= 95 * trials, format!("{hits}/{trials} trials within 3 SE"))
}

const RETURNS_COUNT: [usize; 5] = [15491, 15470, 15448, 15404, 15364];
const RETURNS_MIN: [f64; 5] = [-205.0, -298.0, -400.0, -403.0, -469.0];
const RETURNS_AVG: [f64; 5] = [0.329, 7.22, 14.4, 29.1, 42.9];
const RETURNS_MAX: [f64; 5] = [116.0, 224.0, 360.0, 358.0, 527.0];
const RETURNS_T_PM: [(f64, f64, f64); 5] =
    [(0.2, 0.3, 0.1), (0.7, 3.0, 0.6), (1.3, 4.0, 0.8), (3.0, 11.0, 1.0), (3.0, 11.0, 2.0)];
const RETURNS_N_PM: [(f64, f64); 5] = [(0.9, 0.2), (0.4, 0.7), (0.9, 0.5), (0.7, 1.0), (1.0, 2.0)];
const EMPIRICAL_PRICES: [f64; 5] = [1.163, 1.647, 2.243, 2.642, 3.509];

// agreement at the precision the reference value is printed with
fn matches_printed(value: f64, printed: f64) -> bool {
    let text = format!("{printed}");
    let decimals = text.split('.').nth(1).map_or(0, str::len);
    let unit = 10f64.powi(-(decimals as i32));
    (value - printed).abs() <= 0.5 * unit + 1e-9
}

fn sp500() -> Outcome {
    let Some(path) = std::env::var_os("SATPRICE_SP500_CSV") else {
        return Outcome { verdict: Verdict::Inconclusive, detail: "SATPRICE_SP500_CSV not set; skipped".into() };
    };
    let series = match load_csv(&path, &ColumnSpec::default()) {
        Ok(s) => s,
        Err(e) => return Outcome::check(false, format!("cannot load {}: {e}", path.to_string_lossy())),
    };
    let mut fails = Vec::new();
    for (i, &h) in HORIZONS.iter().enumerate() {
        let r = linear_returns(&series, h as usize).unwrap();
        let d = descriptive_stats(&r).unwrap();
        if d.count != RETURNS_COUNT[i]
            || !matches_printed(d.min, RETURNS_MIN[i])
            || !matches_printed(d.max, RETURNS_MAX[i])
            || !matches_printed(d.average, RETURNS_AVG[i])
        {
            fails.push(format!("{h}d stats n={} min {:.1} avg {:.3} max {:.1}", d.count, d.min, d.average, d.max));
        }
        let preset = presets::fit_for(h).unwrap();
        let t = fit_student_t(&r).unwrap().params;
        let (pn, pb, pl) = RETURNS_T_PM[i];
        if (t.nu.unwrap() - preset.t.0).abs() > 2.0 * pn
            || (t.scale - preset.t.1).abs() > 2.0 * pb
            || (t.loc - preset.t.2).abs() > 2.0 * pl
        {
            fails.push(format!("{h}d t fit ({:.2}, {:.2}, {:.2})", t.nu.unwrap(), t.scale, t.loc));
        }
        let n = fit_normal(&r).unwrap().params;
        let (ps, pl) = RETURNS_N_PM[i];
        if (n.scale - preset.normal.0).abs() > 2.0 * ps || (n.loc - preset.normal.1).abs() > 2.0 * pl {
            fails.push(format!("{h}d normal fit ({:.2}, {:.2})", n.scale, n.loc));
        }
        let c = price_empirical(&r, &spec(h, preset.normal_dist(), 0.0)).unwrap().price;
        if (c - EMPIRICAL_PRICES[i]).abs() > 0.03 {
            fails.push(format!("{h}d empirical {c:.4} vs {}", EMPIRICAL_PRICES[i]));
        }
    }
    let detail = if fails.is_empty() { "statistics, fits and empirical prices".to_string() } else { fails.join(", ") };
    Outcome::check(fails.is_empty(), detail)
}

fn solver_suite() -> Outcome {
    let cfg = SolverConfig::default();
    let mut rng = seeded_rng(20);
    let mut fails = [0usize; 4];
    let cases = 100_000;
    for _ in 0..cases {
        let beta = rng.random_range(0.0..=10.0);
        let s0 = 1e3 * (1.0 - rng.random::<f64>());
        let x = rng.random_range(-30.0..=30.0);
        let dx = rng.random_range(1e-6..1.0);
        let m = SaturatedModel::new(s0, beta, 0.0).unwrap();
        let s = m.solve(x, &cfg).unwrap();
        let c = beta * s0 + s0.ln() + x;
        if s.is_nan() || s <= 0.0 || (beta * s + s.ln() - c).abs() >= 1e-9 * (1.0 + x.abs()) {
            fails[0] += 1;
        }
        if m.solve(x + dx, &cfg).unwrap() <= s {
            fails[1] += 1;
        }
        let limit = SaturatedModel::new(s0, 0.0, 0.0).unwrap().solve(x, &cfg).unwrap();
        let exact = standard_model_price(s0, x);
        if (limit - exact).abs() >= 1e-12 * exact {
            fails[2] += 1;
        }
        if (m.inverse(s).unwrap() - x).abs() >= 1e-9 * (1.0 + x.abs()) {
            fails[3] += 1;
        }
    }
    let detail = format!(
        "{cases} cases; failures: residual {}, monotone {}, β=0 limit {}, round trip {}",
        fails[0], fails[1], fails[2], fails[3]
    );
    Outcome::check(fails.iter().all(|&f| f == 0), detail)
}

fn convolution() -> Outcome {
    let (lo, hi) = presets::CONVOLUTION_BOUNDS;
    let g = discretize(&presets::truncated_daily_fit(), lo, hi, DEFAULT_STEP).unwrap();
    let one = g.moments();
    let trace = self_convolve_traced(&g, 128, DEFAULT_POINT_CAP).unwrap();
    let m = trace.density.moments();
    let expected_sd = 128f64.sqrt() * one.sd;
    let sd_err = (m.sd - expected_sd).abs() / expected_sd;
    let worst_mass =
        std::iter::once(g.mass()).chain(trace.step_masses.iter().copied()).map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let ok = sd_err <= 0.02 && m.skewness < 0.0 && worst_mass <= 1e-6;
    Outcome::check(
        ok,
        format!(
            "sd {:.3} vs {:.3} ({:.3}%), skewness {:.4}, worst mass error {worst_mass:.1e} over {} steps",
            m.sd,
            expected_sd,
            100.0 * sd_err,
            m.skewness,
            trace.step_masses.len()
        ),
    )
}

fn divergence() -> Outcome {
    let fit = presets::fit_for(22).unwrap();
    match price_saturated(&spec(22, fit.t_dist(), 0.0), &QuadratureGrid::standard()) {
        Err(Error::InfiniteExpectation(msg)) => Outcome::check(true, format!("error: {msg}")),
        Err(e) => Outcome::check(false, format!("unexpected error {e}")),
        Ok(r) => Outcome::check(false, format!("returned a number {}", r.price)),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("black-scholes oracle", black_scholes),
        ("normal horizon prices", || horizon_prices(|f| f.normal_dist(), &HORIZON_NORMAL, 0.01)),
        ("t horizon prices", || horizon_prices(|f| f.t_dist(), &HORIZON_T, 0.02)),
        ("strike sweep", strike_sweep),
        ("simulation summary", simulation_summary),
        ("fit recovery", fit_recovery),
        ("s&p 500 data", sp500),
        ("solver properties", solver_suite),
        ("convolution", convolution),
        ("divergence surfacing", divergence),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let out = run();
        let tag = match out.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        println!("{tag:<12} {name:<22} {} [{:.1}s]", out.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria failed", failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
