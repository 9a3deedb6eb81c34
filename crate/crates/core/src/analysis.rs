//! Observables and statistics: spatial mean and spread, synchronization
//! time, power-law fits, period detection and the two asymptotic forms of
//! Mittag-Leffler relaxation.

use libm::tgamma as gamma;

use crate::error::{Error, Result};

/// Spatial average of one field.
pub fn spatial_mean(field: &[f64]) -> f64 {
    field.iter().sum::<f64>() / field.len() as f64
}

/// `max_i x_i - min_i x_i`.
pub fn spread(field: &[f64]) -> f64 {
    let (lo, hi) = field
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

fn population_std(field: &[f64], mean: f64) -> f64 {
    let ss: f64 = field.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / field.len() as f64).sqrt()
}

/// Population standard deviation `sqrt((1/N) Σ (x_i - x̄)²)` across sites.
pub fn spatial_std(field: &[f64]) -> Result<f64> {
    if field.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: field.len(),
        });
    }
    Ok(population_std(field, spatial_mean(field)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceInfo {
    pub site: usize,
    pub t: usize,
    pub value: f64,
}

/// Per-step spatial statistics of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSeries {
    pub times: Vec<usize>,
    pub mean_field: Vec<f64>,
    pub spatial_std: Vec<f64>,
    /// `max - min` across sites at each recorded time.
    pub spread: Vec<f64>,
    pub diverged: Option<DivergenceInfo>,
    /// Configuration echo, including both seeds.
    pub metadata: Vec<(String, String)>,
}

impl ObservableSeries {
    pub fn with_metadata(metadata: Vec<(String, String)>) -> Self {
        ObservableSeries {
            metadata,
            ..Default::default()
        }
    }

    pub fn record(&mut self, t: usize, field: &[f64]) {
        let mean = spatial_mean(field);
        self.times.push(t);
        self.mean_field.push(mean);
        self.spatial_std.push(population_std(field, mean));
        self.spread.push(spread(field));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sync time read off the recorded spread.
    pub fn sync_time(&self, threshold: f64) -> SyncTimeResult {
        let hit = self.spread.iter().position(|&s| s < threshold);
        SyncTimeResult {
            t_n: hit.map(|k| self.times[k]),
            threshold,
        }
    }

    /// Fits `σ(t) ~ t^-a` over `[T/100, T]`, block-averaging over the temporal
    /// period of the mean field when one is detected.
    pub fn fit_std_decay(&self) -> Result<PowerLawFit> {
        let last = *self
            .times
            .last()
            .ok_or(Error::InsufficientData { needed: 10, got: 0 })?;
        let window = (last / 10)
            .clamp(1, 1000)
            .min(self.len().saturating_sub(1))
            .max(1);
        let period = detect_period(&self.mean_field, 12.min(window - 1).max(1), 1e-3, window)
            .ok()
            .flatten()
            .unwrap_or(1);
        let times: Vec<f64> = self.times.iter().map(|&t| t as f64).collect();
        fit_power_law(
            &times,
            &self.spatial_std,
            (last / 100).max(1) as f64,
            last as f64,
            period,
        )
    }
}

/// First time the spatial spread falls below `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncTimeResult {
    /// `None` when the spread never dropped below the threshold.
    pub t_n: Option<usize>,
    pub threshold: f64,
}

impl SyncTimeResult {
    pub fn reached(&self) -> bool {
        self.t_n.is_some()
    }
}

/// Scans fields `x(·, 0), x(·, 1), …` for the first with spread below
/// `threshold`.
pub fn sync_time<'a, I>(fields: I, threshold: f64) -> Result<SyncTimeResult>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if !(threshold > 0.0) {
        return Err(Error::domain("threshold", threshold, "> 0"));
    }
    let t_n = fields.into_iter().position(|f| spread(f) < threshold);
    Ok(SyncTimeResult { t_n, threshold })
}

/// Mean, standard error and count over the members that reached sync.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
    /// Members that never synchronized within the horizon.
    pub censored: usize,
}

impl EnsembleStats {
    pub fn from_results(results: &[SyncTimeResult]) -> Self {
        let reached: Vec<f64> = results
            .iter()
            .filter_map(|r| r.t_n)
            .map(|t| t as f64)
            .collect();
        let count = reached.len();
        let censored = results.len() - count;
        if count == 0 {
            return EnsembleStats {
                mean: f64::NAN,
                stderr: f64::NAN,
                count,
                censored,
            };
        }
        let mean = reached.iter().sum::<f64>() / count as f64;
        let stderr = if count > 1 {
            let var = reached.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        EnsembleStats {
            mean,
            stderr,
            count,
            censored,
        }
    }
}

/// Result of a least-squares fit of `log value = log amplitude - exponent · log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// Decay exponent (negated slope); for size scaling, the growth exponent.
    pub exponent: f64,
    pub amplitude: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// RMS residual in log-log space.
    pub residual: f64,
    /// Points entering the regression (after block averaging).
    pub points: usize,
    /// Samples dropped for being non-positive or non-finite.
    pub excluded: usize,
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Power-law fit of `values` against `times` over `[t_lo, t_hi]`.
///
/// Consecutive groups of `deoscillate_period` samples are averaged first
/// (1 disables smoothing; an incomplete last group is dropped), which removes
/// the modulation a period-k synchronized state imprints on the series.
pub fn fit_power_law(
    times: &[f64],
    values: &[f64],
    t_lo: f64,
    t_hi: f64,
    deoscillate_period: usize,
) -> Result<PowerLawFit> {
    const MIN_POINTS: usize = 10;
    if times.len() != values.len() {
        return Err(Error::Shape {
            expected: times.len(),
            got: values.len(),
        });
    }
    if !(t_lo > 0.0 && t_lo < t_hi) {
        return Err(Error::domain(
            "fit window",
            format!("[{t_lo}, {t_hi}]"),
            "0 < t_lo < t_hi",
        ));
    }
    if deoscillate_period == 0 {
        return Err(Error::domain("deoscillate_period", 0, ">= 1"));
    }
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
        .map(|(t, v)| (*t, *v))
        .collect();

    let k = deoscillate_period as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    for group in window.chunks_exact(deoscillate_period) {
        let t = group.iter().map(|p| p.0).sum::<f64>() / k;
        let v = group.iter().map(|p| p.1).sum::<f64>() / k;
        if v > 0.0 && v.is_finite() {
            xs.push(t.ln());
            ys.push(v.ln());
        } else {
            excluded += group.len();
        }
    }
    if xs.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_POINTS,
            got: xs.len(),
        });
    }
    let (slope, intercept, residual) = ols(&xs, &ys);
    Ok(PowerLawFit {
        exponent: -slope,
        amplitude: intercept.exp(),
        t_lo,
        t_hi,
        residual,
        points: xs.len(),
        excluded,
    })
}

/// Fits `T_N ~ N^z` and returns `z` as the exponent.
pub fn fit_sync_scaling(sizes: &[usize], mean_times: &[f64]) -> Result<PowerLawFit> {
    if sizes.len() != mean_times.len() {
        return Err(Error::Shape {
            expected: sizes.len(),
            got: mean_times.len(),
        });
    }
    let usable: Vec<(f64, f64)> = sizes
        .iter()
        .zip(mean_times)
        .filter(|(n, t)| **n > 0 && **t > 0.0 && t.is_finite())
        .map(|(n, t)| ((*n as f64).ln(), t.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: usable.len(),
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    let (slope, intercept, residual) = ols(&x, &y);
    Ok(PowerLawFit {
        exponent: slope,
        amplitude: intercept.exp(),
        t_lo: *sizes.iter().min().unwrap() as f64,
        t_hi: *sizes.iter().max().unwrap() as f64,
        residual,
        points: x.len(),
        excluded: sizes.len() - x.len(),
    })
}

/// Smallest `k ∈ [1, max_period]` with `|s[t] - s[t-k]| < tol` over the
/// trailing `window` samples, or `None` if the tail is aperiodic at this
/// tolerance.
pub fn detect_period(
    series: &[f64],
    max_period: usize,
    tol: f64,
    window: usize,
) -> Result<Option<usize>> {
    if window > series.len() || window == 0 {
        return Err(Error::domain(
            "window",
            window,
            "1 <= window <= series length",
        ));
    }
    if max_period == 0 || max_period >= window {
        return Err(Error::domain(
            "max_period",
            max_period,
            "1 <= max_period < window",
        ));
    }
    let start = series.len() - window;
    Ok((1..=max_period)
        .find(|&k| (start.max(k)..series.len()).all(|t| (series[t] - series[t - k]).abs() < tol)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `t → 0`: stretched exponential.
    Small,
    /// `t → ∞`: inverse power law.
    Large,
}

/// Asymptotic forms of `E_α(-t^α)`:
/// `exp(-t^α / Γ(1+α))` for small `t` and `t^-α / Γ(1-α)` for large `t`.
pub fn ml_asymptotic(t: f64, alpha: f64, regime: Regime) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("t", t, "t > 0"));
    }
    match regime {
        Regime::Small => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::domain("alpha", alpha, "0 < alpha <= 1"));
            }
            Ok((-t.powf(alpha) / gamma(1.0 + alpha)).exp())
        }
        Regime::Large => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::domain(
                    "alpha",
                    alpha,
                    "0 < alpha < 1 (Γ(1-α) has a pole at 1)",
                ));
            }
            Ok(t.powf(-alpha) / gamma(1.0 - alpha))
        }
    }
}
