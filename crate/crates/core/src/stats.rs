//! Multi-run summaries, the paired two-sample t-test for means, and
//! improvement percentages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Min / max / mean over per-run scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn summarize_runs(values: &[f64]) -> Result<RunSummary> {
    if values.is_empty() {
        return Err(Error::invalid("values", "cannot summarize an empty list"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    // Rounding can push the mean of near-equal values a hair outside the range.
    Ok(RunSummary {
        min,
        max,
        mean: mean.clamp(min, max),
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Probability of the tail on the side of the observed statistic,
    /// `P(T >= |t|)`.
    #[default]
    OneTailed,
    /// `2 * P(T >= |t|)`.
    TwoTailed,
}

impl std::str::FromStr for Tail {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "one" | "one_tailed" => Ok(Tail::OneTailed),
            "two" | "two_tailed" => Ok(Tail::TwoTailed),
            other => Err(format!("unknown tail `{other}` (one, two)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub df: usize,
    pub t_stat: f64,
    pub p_value: f64,
    pub significant: bool,
    pub alpha_level: f64,
    pub tail: Tail,
}

/// Paired t-test on `d_i = a_i - b_i`.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha_level: f64, tail: Tail) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("trials", format!("need at least 2 pairs, got {n}")));
    }
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::invalid("alpha_level", format!("{alpha_level} not in (0, 1)")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sd_d = sample_sd(&d);
    if !(sd_d > 0.0) {
        return Err(Error::Degenerate(
            "paired differences have zero variance; t is undefined".into(),
        ));
    }
    let nf = n as f64;
    let t = mean(&d) / (sd_d / nf.sqrt());
    let df = n - 1;
    let upper = t_upper_tail(t.abs(), df as f64);
    let p_value = match tail {
        Tail::OneTailed => upper,
        Tail::TwoTailed => (2.0 * upper).min(1.0),
    };
    Ok(TTestResult {
        mean_a: mean(a),
        mean_b: mean(b),
        sd_a: sample_sd(a),
        sd_b: sample_sd(b),
        df,
        t_stat: t,
        p_value,
        significant: p_value < alpha_level,
        alpha_level,
        tail,
    })
}

/// `P(T >= t)` for Student's t with `df` degrees of freedom.
pub fn t_upper_tail(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    let half = 0.5 * regularized_incomplete_beta(x, 0.5 * df, 0.5);
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

/// Student's t cumulative distribution function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    1.0 - t_upper_tail(t, df)
}

/// Percentage by which `proposed` improves on `baseline`, relative to `proposed`.
pub fn improvement_pct(baseline: f64, proposed: f64) -> Result<f64> {
    if !(proposed > 0.0) {
        return Err(Error::invalid("proposed", format!("{proposed} must be positive")));
    }
    Ok(100.0 * (baseline - proposed) / proposed)
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9), for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)` via the modified Lentz continued
/// fraction, using the symmetry relation for `x > (a + 1) / (a + b + 2)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 3e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
