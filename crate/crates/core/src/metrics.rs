//! Forecast accuracy metrics and position error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy scores for one prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `sqrt(sum (P - Y)^2 / sum Y^2)`.
    pub nrmse: f64,
    /// Unrooted variant, `sum (P - Y)^2 / sum Y^2`.
    pub nmse: f64,
    pub mae: f64,
    /// `None` when an observation is zero; see `mape_undefined`.
    pub mape: Option<f64>,
    pub mape_undefined: Option<String>,
    pub wape: f64,
    pub r_squared: f64,
    pub n: usize,
}

pub fn compute_metrics(observed: &[f64], predicted: &[f64]) -> Result<MetricsReport> {
    if observed.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: observed.len(),
            actual: predicted.len(),
        });
    }
    let n = observed.len();
    if n < 2 {
        return Err(Error::invalid("observed", format!("need at least 2 points, got {n}")));
    }
    if observed.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::invalid("predicted", "values must be finite"));
    }
    let nf = n as f64;
    let mean_y = observed.iter().sum::<f64>() / nf;

    let mut sse = 0.0;
    let mut sum_y2 = 0.0;
    let mut sum_abs_err = 0.0;
    let mut sum_abs_y = 0.0;
    let mut sst = 0.0;
    let mut ape = 0.0;
    let mut zero_at = None;
    for (i, (&y, &p)) in observed.iter().zip(predicted).enumerate() {
        let e = p - y;
        sse += e * e;
        sum_y2 += y * y;
        sum_abs_err += e.abs();
        sum_abs_y += y.abs();
        sst += (y - mean_y) * (y - mean_y);
        if y == 0.0 {
            zero_at.get_or_insert(i);
        } else {
            ape += (e / y).abs();
        }
    }
    if sst == 0.0 {
        return Err(Error::Degenerate(
            "observed series is constant; R-squared is undefined".into(),
        ));
    }
    let (mape, mape_undefined) = match zero_at {
        None => (Some(ape / nf), None),
        Some(i) => (None, Some(format!("observed value at index {i} is zero"))),
    };
    let nmse = sse / sum_y2;
    Ok(MetricsReport {
        nrmse: nmse.sqrt(),
        nmse,
        mae: sum_abs_err / nf,
        mape,
        mape_undefined,
        wape: sum_abs_err / sum_abs_y,
        r_squared: 1.0 - sse / sst,
        n,
    })
}

/// How position error is formed from coordinate differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeMode {
    /// Euclidean distance.
    #[default]
    Euclidean,
    /// Square root of the plain sum of differences, as typeset. Fails on a
    /// negative radicand.
    Literal,
}

pub fn position_error(a: &[f64], b: &[f64]) -> Result<f64> {
    position_error_with(a, b, PeMode::Euclidean)
}

pub fn position_error_with(a: &[f64], b: &[f64], mode: PeMode) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("a", "points must have at least one coordinate"));
    }
    match mode {
        PeMode::Euclidean => Ok(a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt()),
        PeMode::Literal => {
            let s: f64 = a.iter().zip(b).map(|(x, y)| y - x).sum();
            if s < 0.0 {
                Err(Error::Degenerate(format!(
                    "literal position error radicand {s} is negative"
                )))
            } else {
                Ok(s.sqrt())
            }
        }
    }
}

/// Rounds to `digits` significant digits for report output.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Report form: keys `nrmse, mae, mape, wape, r2, n`, values at 9 significant digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub nrmse: f64,
    pub mae: f64,
    pub mape: Option<f64>,
    pub wape: f64,
    pub r2: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mape_undefined: Option<String>,
}

impl MetricsReport {
    pub fn record(&self, include_nmse: bool) -> MetricsRecord {
        MetricsRecord {
            nrmse: round_sig(self.nrmse, 9),
            mae: round_sig(self.mae, 9),
            mape: self.mape.map(|m| round_sig(m, 9)),
            wape: round_sig(self.wape, 9),
            r2: round_sig(self.r_squared, 9),
            n: self.n,
            nmse: include_nmse.then(|| round_sig(self.nmse, 9)),
            mape_undefined: self.mape_undefined.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [3.0, 1.0, 4.0, 1.0, 5.0];
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!(
            (m.nrmse, m.mae, m.mape, m.wape, m.r_squared),
            (0.0, 0.0, Some(0.0), 0.0, 1.0)
        );
    }

    #[test]
    fn hand_example() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap();
        assert_eq!(m.mae, 1.0);
        assert_eq!(m.wape, 0.5);
        assert!((m.mape.unwrap() - (1.0 + 2.0 / 3.0) / 3.0).abs() < 1e-15);
        assert!((m.mape.unwrap() - 0.55556).abs() < 1e-5);
        assert!((m.nrmse - (5.0f64 / 14.0).sqrt()).abs() < 1e-15);
        assert!((m.nrmse - 0.59761).abs() < 1e-5);
        assert!((m.nmse - 5.0 / 14.0).abs() < 1e-15);
        assert_eq!(m.r_squared, -1.5);
        assert_eq!(m.n, 3);
    }

    #[test]
    fn mean_prediction_gives_zero_r2() {
        let y = [1.0, 4.0, 2.0, 9.0];
        let p = [4.0; 4];
        assert_eq!(compute_metrics(&y, &p).unwrap().r_squared, 0.0);
    }

    #[test]
    fn error_paths() {
        assert!(compute_metrics(&[1.0, 2.0], &[1.0]).is_err());
        assert!(compute_metrics(&[2.0, 2.0], &[1.0, 3.0]).unwrap_err().is_degenerate());
        assert!(compute_metrics(&[1.0], &[1.0]).is_err());
        let m = compute_metrics(&[0.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!(m.mape.is_none());
        assert!(m.mape_undefined.unwrap().contains("index 0"));
        assert_eq!(m.mae, 1.0 / 3.0);
    }

    #[test]
    fn position_error_examples() {
        assert_eq!(position_error(&[0.0, 0.0, 0.0], &[3.0, 4.0, 0.0]).unwrap(), 5.0);
        assert_eq!(position_error(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(position_error(&[1.0], &[1.0, 2.0]).is_err());
        assert!(position_error(&[], &[]).is_err());
    }

    #[test]
    fn literal_position_error() {
        assert_eq!(
            position_error_with(&[0.0, 0.0], &[3.0, 1.0], PeMode::Literal).unwrap(),
            2.0
        );
        assert!(position_error_with(&[0.0], &[-1.0], PeMode::Literal).is_err());
    }

    #[test]
    fn record_rounds_to_nine_digits() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap();
        let r = m.record(false);
        assert_eq!(r.nrmse, 0.597614305);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"nrmse":0.597614305,"mae":1.0,"mape":0.555555556,"wape":0.5,"r2":-1.5,"n":3}"#
        );
        assert!(serde_json::to_string(&m.record(true))
            .unwrap()
            .contains("\"nmse\":0.357142857"));
    }
}
