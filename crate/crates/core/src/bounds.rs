//! Closed-form tail bounds used to put empirical frequencies next to their
//! analytic counterparts. All logarithms are natural. Values are plain `f64`;
//! the bounds are conservative, so rounding direction does not matter at the
//! magnitudes reported.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Parameters shared by the bound calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: f64,
    /// Chernoff deviation, in `(0, 1)`.
    pub delta: f64,
    /// Failure exponent of the between-empty bound.
    pub beta: f64,
    pub mu_low: f64,
    pub mu_high: f64,
    /// Window length minus one.
    pub window: u64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        check_positive("beta", self.beta)?;
        check_positive("mu_low", self.mu_low)?;
        check_positive("mu_high", self.mu_high)?;
        check_n(self.n)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(domain("delta", format!("{delta} not in (0, 1)")))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(name, format!("{v} must be positive and finite")))
    }
}

fn check_n(n: f64) -> Result<()> {
    if n >= 2.0 && n.is_finite() {
        Ok(())
    } else {
        Err(domain("n", format!("{n} must be at least 2")))
    }
}

/// `P[X <= (1 - δ) μ_L] <= exp(-δ² μ_L / 2)` for sums of independent bits.
pub fn chernoff_lower(mu_low: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_positive("mu_low", mu_low)?;
    Ok((-delta * delta * mu_low / 2.0).exp())
}

/// `P[X >= (1 + δ) μ_H] <= exp(-δ² μ_H / 3)` for sums of independent bits.
pub fn chernoff_upper(mu_high: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    check_positive("mu_high", mu_high)?;
    Ok((-delta * delta * mu_high / 3.0).exp())
}

/// Probability bound `(window_len)² / n^β` that a Tetris bin exceeds
/// [`between_empty_threshold`] inside a window of `window_len` rounds.
pub fn between_empty_bound(beta: f64, window_len: u64, n: f64) -> Result<f64> {
    check_positive("beta", beta)?;
    check_n(n)?;
    if window_len == 0 {
        return Err(domain("window_len", "must be at least 1"));
    }
    let w = window_len as f64;
    Ok(w * w / n.powf(beta))
}

/// Load threshold `(192/5) β ln n`.
pub fn between_empty_threshold(beta: f64, n: f64) -> Result<f64> {
    check_positive("beta", beta)?;
    check_n(n)?;
    Ok(192.0 / 5.0 * beta * n.ln())
}

/// Expected Tetris arrivals into one bin over `window + 1` rounds.
pub fn tetris_window_mean(window: u64) -> f64 {
    0.75 * (window as f64 + 1.0)
}

/// Upper-tail bound on a bin receiving at least `4n` balls in `5n` Tetris
/// rounds: Chernoff with `μ = 15n/4` and `δ = 1/15`, i.e. `exp(-n/180)`.
pub fn emptying_tail_bound(n: f64) -> Result<f64> {
    check_n(n)?;
    chernoff_upper(15.0 * n / 4.0, 1.0 / 15.0)
}

/// Legitimacy threshold `C ln n`.
pub fn legitimacy_threshold(c: f64, n: usize) -> f64 {
    c * (n as f64).ln()
}

/// `4 n (ln n)²`, the parallel cover-time envelope checked by the harness.
pub fn cover_time_envelope(n: usize) -> f64 {
    let l = (n as f64).ln();
    4.0 * n as f64 * l * l
}
