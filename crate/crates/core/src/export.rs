//! Output files: space-time heat maps (binary PGM), observable series,
//! run summaries and synchronization-scaling tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::{EnsembleStats, ObservableSeries};
use crate::config::RangePolicy;
use crate::error::{Error, Result};

/// Space-time field sampled every `modulus` steps; rows are time, columns
/// are sites.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMapGrid {
    modulus: usize,
    width: usize,
    times: Vec<usize>,
    values: Vec<f64>,
}

impl HeatMapGrid {
    pub fn new(width: usize, modulus: usize) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::domain("heatmap_modulus", modulus, ">= 1"));
        }
        Ok(HeatMapGrid {
            modulus,
            width,
            times: Vec::new(),
            values: Vec::new(),
        })
    }

    /// Builds a grid directly from row-major values (one row per `modulus`
    /// steps starting at `t = 0`).
    pub fn from_rows(width: usize, modulus: usize, values: Vec<f64>) -> Result<Self> {
        let mut grid = Self::new(width, modulus)?;
        if width == 0 || !values.len().is_multiple_of(width) {
            return Err(Error::Shape {
                expected: width * (values.len() / width.max(1) + 1),
                got: values.len(),
            });
        }
        grid.times = (0..values.len() / width).map(|r| r * modulus).collect();
        grid.values = values;
        Ok(grid)
    }

    /// Records `field` if `t` is a multiple of the modulus.
    pub fn observe(&mut self, t: usize, field: &[f64]) {
        if t.is_multiple_of(self.modulus) && field.len() == self.width {
            self.times.push(t);
            self.values.extend_from_slice(field);
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Global finite min/max, `None` if no finite value was recorded.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub lo: f64,
    pub hi: f64,
    /// Set when the range is degenerate and every pixel was painted 128.
    pub flat: bool,
}

impl PgmImage {
    /// `P5` header followed by the raw 8-bit pixels.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Maps each value to `floor(255 (x - lo) / (hi - lo))`, clamped to
/// `[0, 255]`. A degenerate range paints every pixel 128.
pub fn encode_heatmap(grid: &HeatMapGrid, range: RangePolicy) -> PgmImage {
    let (lo, hi) = match range {
        RangePolicy::Fixed(lo, hi) => (lo, hi),
        RangePolicy::Auto => grid.value_range().unwrap_or((0.0, 0.0)),
    };
    let flat = !(hi > lo) || !(hi - lo).is_finite();
    let pixels = grid
        .values
        .iter()
        .map(|&x| {
            if flat {
                128
            } else {
                let p = (255.0 * (x - lo) / (hi - lo)).floor();
                // NaN falls through both comparisons and lands on 0.
                if p >= 255.0 {
                    255
                } else if p > 0.0 {
                    p as u8
                } else {
                    0
                }
            }
        })
        .collect();
    PgmImage {
        width: grid.width,
        height: grid.rows(),
        pixels,
        lo,
        hi,
        flat,
    }
}

pub fn write_pgm(image: &PgmImage, path: &Path) -> Result<()> {
    fs::write(path, image.to_bytes()).map_err(|e| Error::io(path, e))
}

/// `t,mean,std` with full round-trip precision.
pub fn series_csv(series: &ObservableSeries) -> String {
    let mut out = String::from("t,mean,std\n");
    for i in 0..series.len() {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e}",
            series.times[i], series.mean_field[i], series.spatial_std[i]
        );
    }
    out
}

pub fn write_series_csv(series: &ObservableSeries, path: &Path) -> Result<()> {
    fs::write(path, series_csv(series)).map_err(|e| Error::io(path, e))
}

/// Parses the output of [`series_csv`] back into `(t, mean, std)` rows.
pub fn parse_series_csv(text: &str) -> Result<Vec<(usize, f64, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some("t,mean,std") {
        return Err(Error::Config(vec![
            "series csv: missing `t,mean,std` header".into(),
        ]));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Config(vec![format!("series csv line {}: `{line}`", i + 2)]);
            let mut cols = line.split(',');
            let t = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let mean = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let std = cols.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if cols.next().is_some() {
                return Err(bad());
            }
            Ok((t, mean, std))
        })
        .collect()
}

/// `key=value` lines.
pub fn summary_text(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn write_summary(pairs: &[(String, String)], path: &Path) -> Result<()> {
    fs::write(path, summary_text(pairs)).map_err(|e| Error::io(path, e))
}

/// One row per system size.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub stats: EnsembleStats,
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("N,mean_T_N,stderr,count\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{}",
            r.n, r.stats.mean, r.stats.stderr, r.stats.count
        );
    }
    out
}

pub fn write_scaling_csv(rows: &[ScalingRow], path: &Path) -> Result<()> {
    fs::write(path, scaling_csv(rows)).map_err(|e| Error::io(path, e))
}
