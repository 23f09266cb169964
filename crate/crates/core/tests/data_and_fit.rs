use std::io::Write;

use satprice::distributions::{NoiseDistribution, StudentT};
use satprice::fitting::{fit_normal, fit_student_t, goodness_artifacts, Family};
use satprice::market_data::{
    adaptive_histogram, descriptive_stats, linear_returns, load_csv, ColumnSpec, ReturnSeries,
};
use satprice::Error;

fn write_csv(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

#[test]
fn csv_to_returns_pipeline() {
    let f = write_csv(
        "Date,Open,High,Low,Close,Volume,Adj Close\n\
         1950-01-04,0,0,0,0,0,110\n1950-01-03,0,0,0,0,0,100\n1950-01-05,0,0,0,0,0,99\n",
    );
    let series = load_csv(f.path(), &ColumnSpec::default()).unwrap();
    assert_eq!(series.len(), 3);
    let r = linear_returns(&series, 1).unwrap();
    assert!((r.values[0] - 100.0).abs() < 1e-12);
    assert!((r.values[1] + 100.0).abs() < 1e-12);
    let stats = descriptive_stats(&r).unwrap();
    assert_eq!(stats.count, 2);
    assert!(matches!(linear_returns(&series, 3), Err(Error::HorizonTooLong { .. })));
}

#[test]
fn bad_row_is_reported_with_its_line() {
    let f = write_csv("Date,Adj Close\n2000-01-03,10\n2000-01-04,-1\n");
    match load_csv(f.path(), &ColumnSpec::default()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(load_csv("/nonexistent/prices.csv", &ColumnSpec::default()), Err(Error::Io(_))));
}

#[test]
fn fit_round_trip_through_json() {
    let truth: NoiseDistribution = StudentT::new(4.0, 10.0, 1.0).unwrap().into();
    let r = ReturnSeries::new(5, truth.sample(5000, 4).unwrap()).unwrap();
    let fit = fit_student_t(&r).unwrap();
    assert_eq!(fit.family, Family::StudentT);
    assert_eq!(fit.horizon_days, 5);
    let text = serde_json::to_string(&fit).unwrap();
    let back: satprice::fitting::FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, fit);
    let d = back.distribution().unwrap();
    assert!((d.scale() - fit.params.scale).abs() < 1e-12);
}

#[test]
fn t_fit_beats_normal_on_heavy_tails() {
    let truth: NoiseDistribution = StudentT::new(3.33, 6.06, 0.46).unwrap().into();
    let r = ReturnSeries::new(1, truth.sample(15491, 8).unwrap()).unwrap();
    let t = fit_student_t(&r).unwrap();
    let n = fit_normal(&r).unwrap();
    assert!(t.log_likelihood > n.log_likelihood);
    let g = goodness_artifacts(&r, &t, 200).unwrap();
    assert!(g.ks_statistic < 0.02);
    assert!(goodness_artifacts(&r, &t, 0).unwrap().cdf_overlay.is_empty());
}

#[test]
fn histogram_tail_bins_hold_enough_points() {
    let truth: NoiseDistribution = StudentT::new(3.33, 6.06, 0.46).unwrap().into();
    let r = ReturnSeries::new(1, truth.sample(15491, 2).unwrap()).unwrap();
    let h = adaptive_histogram(&r, 5).unwrap();
    assert_eq!(h.total(), 15491);
    assert!(h.counts.iter().all(|&c| c >= 5));
    let w = h.widths();
    let narrowest = w.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(w[0] > 3.0 * narrowest && w[w.len() - 1] > 3.0 * narrowest);
}
