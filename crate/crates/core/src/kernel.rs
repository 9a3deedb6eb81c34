//! Power-law memory weights.
//!
//! The memory sum weights the increment taken `m` steps in the past by
//! `g(m) = Γ(m + α) / Γ(m + 1)` and scales the whole sum by `1 / Γ(α)`.
//! The table is built once per run from the exact recurrence
//!
//! ```text
//! g(0)     = Γ(α)
//! g(m + 1) = g(m) · (m + α) / (m + 1)
//! ```
//!
//! which costs one multiply and one divide per lag and accumulates only
//! about `m` ulps of relative error. For large `m`, `g(m) ~ m^(α - 1)`.

use std::io::Write;
use std::path::Path;

use libm::tgamma as gamma;

use crate::error::{Error, Result};

/// Precomputed `g(m)` for `0 ≤ m ≤ horizon` together with `1 / Γ(α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    alpha: f64,
    weights: Vec<f64>,
    prefactor: f64,
    underflow: bool,
}

impl KernelTable {
    /// Builds the table for fractional order `alpha ∈ (0, 1]` and lags up to
    /// `horizon` inclusive.
    pub fn build(alpha: f64, horizon: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain("alpha", alpha, "0 < alpha <= 1"));
        }
        let mut weights = Vec::with_capacity(horizon + 1);
        let head = if alpha == 1.0 { 1.0 } else { gamma(alpha) };
        weights.push(head);
        let mut w = head;
        for m in 0..horizon {
            let m = m as f64;
            w = w * (m + alpha) / (m + 1.0);
            weights.push(w);
        }
        let underflow = weights.iter().any(|w| *w < f64::MIN_POSITIVE);
        Ok(KernelTable {
            alpha,
            prefactor: 1.0 / head,
            weights,
            underflow,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest lag covered by the table.
    pub fn horizon(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `1 / Γ(α)`.
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// True when some weight fell below the normal floating-point range.
    pub fn underflowed(&self) -> bool {
        self.underflow
    }

    /// `g(m) / m^(α - 1)`, which tends to 1 as `m` grows.
    pub fn asymptotic_ratio(&self, m: usize) -> Result<f64> {
        if m == 0 || m > self.horizon() {
            return Err(Error::Index {
                index: m,
                lo: 1,
                hi: self.horizon(),
            });
        }
        Ok(self.weights[m] / (m as f64).powf(self.alpha - 1.0))
    }

    /// Writes `m,g_alpha(m)` rows for external verification.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "m,g_alpha").map_err(io)?;
        for (m, w) in self.weights.iter().enumerate() {
            writeln!(out, "{m},{w:.16e}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}
