use satprice::convolution::{compare, discretize, self_convolve, DEFAULT_STEP};
use satprice::market_data::ReturnSeries;
use satprice::presets::{self, CONVOLUTION_BOUNDS};

#[test]
fn daily_fit_grid() {
    let (lo, hi) = CONVOLUTION_BOUNDS;
    let g = discretize(&presets::truncated_daily_fit(), lo, hi, DEFAULT_STEP).unwrap();
    assert_eq!(g.len(), 843);
    assert!((g.mass() - 1.0).abs() < 1e-12);
}

#[test]
fn sum_of_128_days_against_sampled_sums() {
    let (lo, hi) = CONVOLUTION_BOUNDS;
    let daily = presets::truncated_daily_fit();
    let g = discretize(&daily, lo, hi, DEFAULT_STEP).unwrap();
    let conv = self_convolve(&g, 128).unwrap();
    let draws = daily.sample(128 * 4000, 5).unwrap();
    let sums: Vec<f64> = draws.chunks(128).map(|c| c.iter().sum::<f64>()).collect();
    let r = ReturnSeries::new(128, sums).unwrap().demeaned().unwrap();
    let cmp = compare(&conv, &r).unwrap();
    assert!(cmp.deltas.sd.abs() / cmp.data.sd < 0.05, "{:?}", cmp.deltas);
    assert!(cmp.deltas.mean.abs() < 1e-9);
    assert!(!cmp.overlay.is_empty());
}
