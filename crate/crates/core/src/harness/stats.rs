use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};

/// Two-sided standard normal quantile for `confidence`.
pub fn normal_quantile(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(domain("confidence", format!("{confidence} not in (0, 1)")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0))
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(domain("trials", "must be at least 1"));
    }
    if successes > trials {
        return Err(domain("successes", format!("{successes} > trials {trials}")));
    }
    let z = normal_quantile(confidence)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((low, high))
}

/// Growth model for [`scaling_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScalingModel {
    LogN,
    NLog2N,
    LinearN,
}

impl ScalingModel {
    pub fn eval(self, n: f64) -> f64 {
        match self {
            ScalingModel::LogN => n.ln(),
            ScalingModel::NLog2N => n * n.ln() * n.ln(),
            ScalingModel::LinearN => n,
        }
    }
}

impl fmt::Display for ScalingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingModel::LogN => "LOG_N",
            ScalingModel::NLog2N => "N_LOG2_N",
            ScalingModel::LinearN => "LINEAR_N",
        })
    }
}

impl FromStr for ScalingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LOG_N" => Ok(ScalingModel::LogN),
            "N_LOG2_N" => Ok(ScalingModel::NLog2N),
            "LINEAR_N" => Ok(ScalingModel::LinearN),
            _ => Err(Error::InvalidSpec(format!("unknown scaling model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub name: String,
    pub model: ScalingModel,
    pub coefficient: f64,
    pub points: Vec<(f64, f64)>,
    /// `(value - coefficient * model(n)) / value` per point.
    pub relative_residuals: Vec<f64>,
    pub max_relative_residual: f64,
    pub residual_norm: f64,
}

/// Least-squares fit of `value ≈ a · model(n)` in relative error, i.e. `a`
/// minimises `Σ ((value - a f(n)) / value)²`.
pub fn scaling_fit(points: &[(f64, f64)], model: ScalingModel) -> Result<FitReport> {
    let mut ns: Vec<f64> = points.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 3 {
        return Err(domain("points", format!("need at least 3 distinct n, got {}", ns.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 >= 2.0 && p.1 > 0.0 && p.1.is_finite())) {
        return Err(domain("points", format!("point {p:?} needs n >= 2 and a positive value")));
    }
    let ratios: Vec<f64> = points.iter().map(|&(n, v)| model.eval(n) / v).collect();
    let coefficient = ratios.iter().sum::<f64>() / ratios.iter().map(|r| r * r).sum::<f64>();
    let relative_residuals: Vec<f64> = points
        .iter()
        .map(|&(n, v)| (v - coefficient * model.eval(n)) / v)
        .collect();
    let max_relative_residual = relative_residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let residual_norm = relative_residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(FitReport {
        name: String::new(),
        model,
        coefficient,
        points: points.to_vec(),
        relative_residuals,
        max_relative_residual,
        residual_norm,
    })
}

/// Min/mean/max/quantiles of a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub std_dev: f64,
    pub standard_error: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                count,
                min: f64::NAN,
                mean: f64::NAN,
                max: f64::NAN,
                std_dev: f64::NAN,
                standard_error: f64::NAN,
                q05: f64::NAN,
                q50: f64::NAN,
                q95: f64::NAN,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        let q = |p: f64| sorted[((count - 1) as f64 * p).round() as usize];
        Self {
            count,
            min: sorted[0],
            mean,
            max: sorted[count - 1],
            std_dev: var.sqrt(),
            standard_error: (var / count as f64).sqrt(),
            q05: q(0.05),
            q50: q(0.5),
            q95: q(0.95),
        }
    }
}

/// Streaming mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Pooled combination with another accumulator.
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        let total = self.count + other.count;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / total as f64;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / total as f64;
        self.count = total;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn standard_error(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wilson_reference_values() {
        // z = 1.959963984540054; upper = (z²/n) / (1 + z²/n), evaluated with mpmath.
        let (lo, hi) = wilson_interval(0, 100, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036993498206985684).abs() < 1e-9, "{hi}");
        let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
        assert!(((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
        let (_, hi) = wilson_interval(100, 100, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(wilson_interval(1, 0, 0.95).is_err());
        assert!(wilson_interval(5, 4, 0.95).is_err());
        assert!(wilson_interval(1, 4, 1.0).is_err());
    }

    #[test]
    fn exact_fit() {
        let pts: Vec<(f64, f64)> = [64.0, 256.0, 1024.0].iter().map(|&n: &f64| (n, 2.0 * n.ln())).collect();
        let f = scaling_fit(&pts, ScalingModel::LogN).unwrap();
        assert!((f.coefficient - 2.0).abs() < 1e-12);
        assert!(f.max_relative_residual < 1e-12);
        let g = scaling_fit(&[(10.0, 30.0), (20.0, 60.0), (40.0, 120.0)], ScalingModel::LinearN).unwrap();
        assert!((g.coefficient - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits_rejected() {
        assert!(scaling_fit(&[(8.0, 1.0), (8.0, 2.0), (16.0, 3.0)], ScalingModel::LogN).is_err());
        assert!(scaling_fit(&[(8.0, 1.0), (16.0, 0.0), (32.0, 3.0)], ScalingModel::LogN).is_err());
    }

    #[test]
    fn summary_and_moments_agree() {
        let xs = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let s = MetricSummary::of(&xs);
        let mut m = Moments::default();
        let mut a = Moments::default();
        let mut b = Moments::default();
        for (i, &x) in xs.iter().enumerate() {
            m.push(x);
            if i < 3 { a.push(x) } else { b.push(x) }
        }
        a.merge(&b);
        assert!((s.mean - m.mean).abs() < 1e-12 && (a.mean - m.mean).abs() < 1e-12);
        assert!((s.std_dev * s.std_dev - m.variance()).abs() < 1e-12);
        assert!((a.variance() - m.variance()).abs() < 1e-12);
        assert_eq!((s.min, s.max, s.q50), (1.0, 9.0, 4.0));
    }

    proptest! {
        #[test]
        fn wilson_contains_estimate(trials in 1u64..10_000, frac in 0.0f64..=1.0, conf in 0.5f64..0.999) {
            let k = ((trials as f64) * frac).floor() as u64;
            let (lo, hi) = wilson_interval(k, trials, conf).unwrap();
            let p = k as f64 / trials as f64;
            prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        }
    }
}
