//! Monthly time series: loading, validation, min-max scaling, chronological
//! splitting and lag embedding.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month, `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        let (y, m) = s.split_once('-').ok_or_else(|| format!("month `{s}` is not YYYY-MM"))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(format!("month `{s}` is not YYYY-MM"));
        }
        let year: i32 = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let month: u8 = m.parse().map_err(|_| format!("bad month in `{s}`"))?;
        YearMonth::new(year, month).ok_or_else(|| format!("month out of range in `{s}`"))
    }
}

/// Ordered monthly observations. Months are consecutive and values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<YearMonth>,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series starting at `start`, validating the values.
    pub fn from_values(start: YearMonth, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("series is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Row {
                row: i + 1,
                message: format!("non-finite value {}", values[i]),
            });
        }
        let mut timestamps = Vec::with_capacity(values.len());
        let mut t = start;
        for _ in 0..values.len() {
            timestamps.push(t);
            t = t.succ();
        }
        Ok(Self { timestamps, values })
    }

    pub fn timestamps(&self) -> &[YearMonth] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Month following the last observation.
    pub fn next_month(&self) -> YearMonth {
        self.timestamps[self.timestamps.len() - 1].succ()
    }

    /// Writes the series as `month,value` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["month", "value"]).map_err(ser)?;
        for (t, v) in self.timestamps.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()]).map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Loads a `month,value` CSV. Row numbers in errors count data rows from 1.
pub fn load_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_series(&text)
}

/// Parses CSV text with a `month,value` header.
pub fn parse_series(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Row {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "month" || &headers[1] != "value" {
        return Err(Error::Row {
            row: 0,
            message: "header must be `month,value`".into(),
        });
    }

    let mut timestamps: Vec<YearMonth> = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Row {
                row,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let month: YearMonth = record[0].parse().map_err(|message| Error::Row { row, message })?;
        if record[1].is_empty() {
            return Err(Error::Row {
                row,
                message: "empty value".into(),
            });
        }
        let value: f64 = record[1].parse().map_err(|_| Error::Row {
            row,
            message: format!("value `{}` is not a decimal number", &record[1]),
        })?;
        if !value.is_finite() {
            return Err(Error::Row {
                row,
                message: format!("non-finite value `{}`", &record[1]),
            });
        }
        if let Some(&prev) = timestamps.last() {
            if month == prev {
                return Err(Error::Row {
                    row,
                    message: format!("duplicate month {month}"),
                });
            }
            if month != prev.succ() {
                return Err(Error::Row {
                    row,
                    message: format!("month {month} does not follow {prev} (gap or disorder)"),
                });
            }
        }
        timestamps.push(month);
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::Degenerate("series has no data rows".into()));
    }
    Ok(TimeSeries { timestamps, values })
}

/// Min-max scaler mapping `[min, max]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: f64,
    pub max: f64,
}

impl Scaler {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::invalid("scaler", "bounds must be finite"));
        }
        if max <= min {
            return Err(Error::Degenerate(format!(
                "scaler range is empty (min {min}, max {max})"
            )));
        }
        Ok(Self { min, max })
    }

    /// Fits on training values. Needs at least two values and a non-zero range.
    pub fn fit(train: &[f64]) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::invalid(
                "train_values",
                format!("need at least 2 values, got {}", train.len()),
            ));
        }
        let min = train.iter().copied().fold(f64::INFINITY, f64::min);
        let max = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == min {
            return Err(Error::Degenerate(format!(
                "constant series (every value is {min}); cannot scale"
            )));
        }
        Self::new(min, max)
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn invert(&self, u: f64) -> f64 {
        u * (self.max - self.min) + self.min
    }

    pub fn transform_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.transform(x)).collect()
    }
}

/// Lag-embedded supervised rows: `inputs[k]` holds the `m` values preceding
/// `targets[k]`, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LagDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub m: usize,
}

impl LagDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

pub fn make_lag_dataset(values: &[f64], m: usize) -> Result<LagDataset> {
    if m == 0 {
        return Err(Error::invalid("lags", "lag count must be at least 1"));
    }
    if values.len() <= m {
        return Err(Error::InsufficientHistory {
            needed: m,
            available: values.len(),
        });
    }
    let inputs = values.windows(m + 1).map(|w| w[..m].to_vec()).collect();
    let targets = values[m..].to_vec();
    Ok(LagDataset { inputs, targets, m })
}

/// Builds lag rows whose targets are `values[start..end]`, drawing lags from
/// anywhere before `start`. Used to evaluate validation and test segments with
/// real preceding history.
pub fn lag_rows_for_range(values: &[f64], m: usize, start: usize, end: usize) -> Result<LagDataset> {
    if m == 0 {
        return Err(Error::invalid("lags", "lag count must be at least 1"));
    }
    if start < m {
        return Err(Error::InsufficientHistory {
            needed: m,
            available: start,
        });
    }
    if end > values.len() || start > end {
        return Err(Error::invalid(
            "range",
            format!("{start}..{end} outside 0..{}", values.len()),
        ));
    }
    let inputs = (start..end).map(|k| values[k - m..k].to_vec()).collect();
    let targets = values[start..end].to_vec();
    Ok(LagDataset { inputs, targets, m })
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("split", format!("{name} ratio {r} must be positive")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split", format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Segment sizes: validation and test take `floor(ratio * n)`, training takes the rest.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        if n < 10 {
            return Err(Error::invalid("split", format!("need at least 10 values, got {n}")));
        }
        // Guard against representation error such as 0.15 * 100 = 14.999...
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let val = floor(self.val);
        let test = floor(self.test);
        let train = n.saturating_sub(val + test);
        if train == 0 || val == 0 || test == 0 {
            return Err(Error::invalid(
                "split",
                format!("segment sizes ({train}, {val}, {test}) leave a segment empty"),
            ));
        }
        Ok((train, val, test))
    }
}

/// Chronological contiguous split.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<'a> {
    pub train: &'a [f64],
    pub val: &'a [f64],
    pub test: &'a [f64],
}

pub fn split_series(values: &[f64], ratios: SplitRatios) -> Result<Split<'_>> {
    let (train, val, _) = ratios.sizes(values.len())?;
    let (a, rest) = values.split_at(train);
    let (b, c) = rest.split_at(val);
    Ok(Split {
        train: a,
        val: b,
        test: c,
    })
}

/// Row-level random partition of a lag dataset, for the shuffled-split
/// option. Returns row indices for (train, val, test).
pub fn random_row_partition(
    rows: usize,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let (train, val, _) = ratios.sizes(rows)?;
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(train + val);
    let val_idx = idx.split_off(train);
    Ok((idx, val_idx, test))
}

/// Parameters of the synthetic monthly generator: linear trend plus an annual
/// sinusoid plus Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub len: usize,
    pub level: f64,
    pub slope: f64,
    pub amplitude: f64,
    pub period: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            len: 166,
            level: 100.0,
            slope: 0.05,
            amplitude: 40.0,
            period: 12.0,
            noise_sd: 1.0,
            seed: 7,
        }
    }
}

pub fn synthetic_series(spec: &SyntheticSpec) -> Result<TimeSeries> {
    if spec.len == 0 {
        return Err(Error::invalid("len", "must be positive"));
    }
    let noise = Normal::new(0.0, spec.noise_sd.max(0.0)).map_err(|e| Error::invalid("noise_sd", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values = (0..spec.len)
        .map(|t| {
            let t = t as f64;
            spec.level
                + spec.slope * t
                + spec.amplitude * (std::f64::consts::TAU * t / spec.period).sin()
                + noise.sample(&mut rng)
        })
        .collect();
    TimeSeries::from_values(YearMonth { year: 2009, month: 3 }, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_rows() {
        let ts = parse_series("month,value\n2009-03,21\n2009-04,35\n2009-05,30\n").unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.values(), &[21.0, 35.0, 30.0]);
        assert_eq!(ts.timestamps()[2].to_string(), "2009-05");
        assert_eq!(ts.next_month().to_string(), "2009-06");
    }

    #[test]
    fn gap_reported_at_row_two() {
        let err = parse_series("month,value\n2009-03,21\n2009-05,30\n").unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_and_year_rollover() {
        let err = parse_series("month,value\n2009-03,1\n2009-03,2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        let ts = parse_series("month,value\n2009-12,1\n2010-01,2\n").unwrap();
        assert_eq!(ts.len(), 2);
    }

    #[test]
    fn empty_value_cites_row() {
        let err = parse_series("month,value\n2009-03,21\n2009-04,\n").unwrap_err();
        assert!(matches!(err, Error::Row { row: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_non_finite_and_bad_header() {
        assert!(matches!(
            parse_series("month,value\n2009-03,NaN\n").unwrap_err(),
            Error::Row { row: 1, .. }
        ));
        assert!(parse_series("date,count\n2009-03,1\n").is_err());
        assert!(parse_series("month,value\n2009-3,1\n").is_err());
        assert!(parse_series("month,value\n").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_series("/nonexistent/series.csv").unwrap_err(),
            Error::Io { .. }
        ));
    }

    #[test]
    fn scaler_fit_examples() {
        let s = Scaler::fit(&[0.0, 5.0, 10.0]).unwrap();
        assert_eq!((s.min, s.max), (0.0, 10.0));
        let s = Scaler::fit(&[-1.0, 3.0]).unwrap();
        assert_eq!((s.min, s.max), (-1.0, 3.0));
        assert!(Scaler::fit(&[7.0, 7.0, 7.0]).unwrap_err().is_degenerate());
        assert!(Scaler::fit(&[1.0]).is_err());
    }

    #[test]
    fn scaler_transform_invert() {
        let s = Scaler::new(0.0, 10.0).unwrap();
        assert_eq!(s.transform(5.0), 0.5);
        assert_eq!(s.invert(1.2), 12.0);
    }

    #[test]
    fn lag_examples() {
        let d = make_lag_dataset(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(d.inputs, vec![vec![1.0, 2.0], vec![2.0, 3.0]]);
        assert_eq!(d.targets, vec![3.0, 4.0]);
        assert_eq!(make_lag_dataset(&[1.0, 2.0, 3.0, 4.0], 1).unwrap().len(), 3);
        assert!(matches!(
            make_lag_dataset(&[1.0, 2.0, 3.0, 4.0], 4).unwrap_err(),
            Error::InsufficientHistory { .. }
        ));
        assert!(make_lag_dataset(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn lag_rows_for_range_uses_prior_history() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let d = lag_rows_for_range(&v, 2, 3, 5).unwrap();
        assert_eq!(d.inputs, vec![vec![2.0, 3.0], vec![3.0, 4.0]]);
        assert_eq!(d.targets, vec![4.0, 5.0]);
        assert!(lag_rows_for_range(&v, 4, 3, 5).is_err());
    }

    #[test]
    fn split_examples() {
        let v: Vec<f64> = (0..166).map(f64::from).collect();
        let s = split_series(&v, SplitRatios::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (118, 24, 24));

        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let r = SplitRatios {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        };
        let s = split_series(&v, r).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));

        let bad = SplitRatios {
            train: 0.5,
            val: 0.2,
            test: 0.2,
        };
        assert!(split_series(&v, bad).is_err());
        assert!(split_series(&v[..9], r).is_err());
        let tiny = SplitRatios {
            train: 0.9,
            val: 0.05,
            test: 0.05,
        };
        assert!(split_series(&v, tiny).is_err());
    }

    #[test]
    fn random_partition_is_a_permutation() {
        let (a, b, c) = random_row_partition(50, SplitRatios::default(), 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (36, 7, 7));
        let mut all: Vec<usize> = a.into_iter().chain(b).chain(c).collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn synthetic_roundtrips_through_csv() {
        let ts = synthetic_series(&SyntheticSpec::default()).unwrap();
        assert_eq!(ts.len(), 166);
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let back = parse_series(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, ts);
    }
}
