//! Price series ingestion, per-mille linear returns, descriptive statistics
//! and adaptive-width histograms.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::{self, SampleMoments};

/// Names of the date and price columns in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub date: String,
    pub price: String,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self { date: "Date".into(), price: "Adj Close".into() }
    }
}

/// Dated adjusted closing prices, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        if dates.len() != prices.len() {
            return Err(Error::invalid("dates and prices differ in length"));
        }
        if prices.len() < 2 {
            return Err(Error::EmptySeries(format!("a price series needs at least 2 rows, got {}", prices.len())));
        }
        if let Some(i) = prices.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::invalid(format!("price at index {i} is not positive")));
        }
        if let Some(i) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("dates not strictly increasing at index {}", i + 1)));
        }
        Ok(Self { dates, prices })
    }

    /// Series without dates, indexed by trading row.
    pub fn from_prices(prices: Vec<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(1900, 1, 1).expect("valid date");
        let dates = (0..prices.len()).map(|i| start + chrono::Days::new(i as u64)).collect();
        Self::new(dates, prices)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Per-mille linear returns over `horizon_days` trading rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub horizon_days: usize,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(horizon_days: usize, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > -1000.0)) {
            return Err(Error::invalid(format!("return at index {i} is not a finite value above -1000 per mille")));
        }
        Ok(Self { horizon_days, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Copy with the sample average subtracted.
    pub fn demeaned(&self) -> Result<Self> {
        if self.values.is_empty() {
            return Err(Error::EmptySeries("cannot demean an empty return series".into()));
        }
        let mu = stats::mean(&self.values);
        Ok(Self { horizon_days: self.horizon_days, values: self.values.iter().map(|v| v - mu).collect() })
    }
}

pub fn load_csv(path: impl AsRef<Path>, columns: &ColumnSpec) -> Result<PriceSeries> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, columns)
}

/// Parses a comma-separated file with a header row.
pub fn read_csv<R: Read>(reader: R, columns: &ColumnSpec) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") })
    };
    let date_col = find(&columns.date)?;
    let price_col = find(&columns.price)?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let date_text = record.get(date_col).unwrap_or("");
        let date = parse_date(date_text)
            .ok_or_else(|| Error::Parse { line, message: format!("unreadable date '{date_text}'") })?;
        let price_text = record.get(price_col).unwrap_or("");
        let price: f64 = price_text
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("missing or unreadable price '{price_text}'") })?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(Error::Parse { line, message: format!("nonpositive price {price}") });
        }
        rows.push((date, price));
    }
    if rows.is_empty() {
        return Err(Error::EmptySeries("no data rows".into()));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Parse { line: 0, message: format!("duplicate date {}", w[0].0) });
    }
    let (dates, prices): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    PriceSeries::new(dates, prices)
}

// YYYY-MM-DD, optionally followed by a time part.
fn parse_date(text: &str) -> Option<NaiveDate> {
    let day = text.split(['T', ' ']).next()?;
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

/// `values[t] = 1000·(prices[t+n]/prices[t] − 1)` over overlapping windows.
pub fn linear_returns(series: &PriceSeries, n: usize) -> Result<ReturnSeries> {
    if n == 0 {
        return Err(Error::invalid("horizon must be at least 1 row"));
    }
    let p = series.prices();
    if p.len() <= n {
        return Err(Error::HorizonTooLong { horizon: n, len: p.len() });
    }
    let values = p.iter().zip(&p[n..]).map(|(a, b)| 1000.0 * (b - a) / a).collect();
    ReturnSeries::new(n, values)
}

/// `1000·ln(prices[t+n]/prices[t])`, unbounded below.
pub fn log_returns(series: &PriceSeries, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("horizon must be at least 1 row"));
    }
    let p = series.prices();
    if p.len() <= n {
        return Err(Error::HorizonTooLong { horizon: n, len: p.len() });
    }
    Ok(p.iter().zip(&p[n..]).map(|(a, b)| 1000.0 * (b / a).ln()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub horizon_days: usize,
    pub count: usize,
    pub min: f64,
    pub average: f64,
    pub median: f64,
    pub max: f64,
    /// Sample standard deviation (`n − 1` divisor).
    pub sd: f64,
    /// Non-excess kurtosis; absent for a constant series.
    pub kurtosis: Option<f64>,
    pub skewness: Option<f64>,
}

pub fn descriptive_stats(r: &ReturnSeries) -> Result<DescriptiveStats> {
    if r.values.len() < 2 {
        return Err(Error::Degenerate(format!("statistics need at least 2 returns, got {}", r.values.len())));
    }
    let m = SampleMoments::from_slice(&r.values);
    let min = r.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = r.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DescriptiveStats {
        horizon_days: r.horizon_days,
        count: m.count,
        min,
        average: m.mean,
        median: stats::median(&r.values),
        max,
        sd: m.sd,
        kurtosis: m.kurtosis,
        skewness: m.skewness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

const MAX_SEED_BINS: usize = 20_000;

/// Histogram seeded on a Freedman–Diaconis grid, with adjacent bins merged
/// from each tail inward until every bin holds at least `min_count`.
pub fn adaptive_histogram(r: &ReturnSeries, min_count: usize) -> Result<Histogram> {
    adaptive_histogram_with_width(r, min_count, None)
}

/// As [`adaptive_histogram`] with an explicit seeding bin width.
pub fn adaptive_histogram_with_width(r: &ReturnSeries, min_count: usize, seed_width: Option<f64>) -> Result<Histogram> {
    if min_count == 0 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    let n = r.values.len();
    if n < min_count || n == 0 {
        return Err(Error::Degenerate(format!("{n} observations cannot fill a bin of {min_count}")));
    }
    let mut v = r.values.clone();
    v.sort_by(|a, b| a.total_cmp(b));
    let (lo, hi) = (v[0], v[n - 1]);
    if hi == lo {
        let edges = vec![lo - 0.5, lo + 0.5];
        return Ok(Histogram { bin_edges: edges, counts: vec![n], densities: vec![1.0] });
    }

    let width = match seed_width {
        Some(w) if w > 0.0 => w,
        Some(w) => return Err(Error::invalid(format!("seed width must be positive, got {w}"))),
        None => {
            let q = |p: f64| v[((n - 1) as f64 * p).round() as usize];
            let iqr = q(0.75) - q(0.25);
            let fd = 2.0 * iqr / (n as f64).cbrt();
            if fd > 0.0 {
                fd
            } else {
                (hi - lo) / (n as f64).sqrt()
            }
        }
    };
    let nbins = (((hi - lo) / width).ceil() as usize).clamp(1, MAX_SEED_BINS);
    let width = (hi - lo) / nbins as f64;
    let mut counts = vec![0usize; nbins];
    for x in &v {
        let k = (((x - lo) / width) as usize).min(nbins - 1);
        counts[k] += 1;
    }
    let seed_edges: Vec<f64> = (0..=nbins).map(|k| lo + width * k as f64).collect();

    // locate the bin holding the median; tails merge toward it
    let half = n / 2;
    let mut acc = 0;
    let mut mid = 0;
    for (k, c) in counts.iter().enumerate() {
        acc += c;
        if acc > half {
            mid = k;
            break;
        }
    }

    // groups of seed bins as half-open index ranges
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    let mut begin = 0;
    let mut run = 0;
    while i < mid {
        run += counts[i];
        i += 1;
        if run >= min_count {
            groups.push((begin, i));
            begin = i;
            run = 0;
        }
    }
    let mut upper: Vec<(usize, usize)> = Vec::new();
    let mut j = nbins;
    let mut end = nbins;
    let mut run = 0;
    while j > mid + 1 {
        j -= 1;
        run += counts[j];
        if run >= min_count {
            upper.push((j, end));
            end = j;
            run = 0;
        }
    }
    groups.push((begin, end));
    groups.extend(upper.into_iter().rev());

    let mut merged: Vec<(usize, usize, usize)> =
        groups.into_iter().map(|(a, b)| (a, b, counts[a..b].iter().sum())).collect();
    // the central run can fall short when the tails consumed most points
    while let Some(k) = merged.iter().position(|g| g.2 < min_count) {
        if merged.len() == 1 {
            break;
        }
        let g = merged.remove(k);
        if k < merged.len() {
            merged[k].0 = g.0;
            merged[k].2 += g.2;
        } else {
            merged[k - 1].1 = g.1;
            merged[k - 1].2 += g.2;
        }
    }

    let mut edges = vec![seed_edges[0]];
    edges.extend(merged.iter().map(|g| seed_edges[g.1]));
    let out_counts: Vec<usize> = merged.iter().map(|g| g.2).collect();

    let total = n as f64;
    let densities = out_counts.iter().zip(edges.windows(2)).map(|(&c, w)| c as f64 / (total * (w[1] - w[0]))).collect();
    Ok(Histogram { bin_edges: edges, counts: out_counts, densities })
}
