//! Single runs, parameter scans and synchronization-time ensembles, each
//! writing its files under the experiment's output directory.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    detect_period, fit_sync_scaling, DivergenceInfo, EnsembleStats, ObservableSeries, PowerLawFit,
    SyncTimeResult,
};
use crate::config::ExperimentSpec;
use crate::engine::{run_observed, InitSpec, RunConfig};
use crate::error::{Error, Result};
use crate::export::{
    encode_heatmap, write_pgm, write_scaling_csv, write_series_csv, write_summary, HeatMapGrid,
    ScalingRow,
};
use crate::kernel::KernelTable;

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub series: ObservableSeries,
    pub final_t: usize,
    pub diverged: Option<DivergenceInfo>,
    pub sync: SyncTimeResult,
    pub fit: Option<PowerLawFit>,
    /// Period of the probe site over the trailing window, if periodic.
    pub period: Option<usize>,
    pub warnings: Vec<String>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Runs `cfg` and writes `series.csv`, `summary.txt` and, when enabled,
/// `heatmap.pgm`, `kernel.csv` and `edges.csv` into `dir`.
fn run_into(
    spec: &ExperimentSpec,
    cfg: &RunConfig,
    dir: &Path,
    extra: &[(String, String)],
) -> Result<RunReport> {
    create_dir(dir)?;
    let mut warnings = Vec::new();
    let mut grid = HeatMapGrid::new(cfg.n, spec.heatmap.modulus)?;
    let mut probe = Vec::with_capacity(cfg.steps + 1);
    let output = run_observed(cfg, |t, field| {
        if spec.heatmap.enabled {
            grid.observe(t, field);
        }
        probe.push(field[spec.probe_site.min(field.len() - 1)]);
    })?;
    let series = output.series;

    write_series_csv(&series, &dir.join("series.csv"))?;
    let mut summary = spec.to_pairs();
    summary.retain(|(k, _)| !k.starts_with("scan.") && k != "output_dir");
    // Run-level keys reflect this run, not the experiment's base config.
    for (k, v) in cfg.to_pairs() {
        if let Some(slot) = summary.iter_mut().find(|(key, _)| *key == k) {
            slot.1 = v;
        } else {
            summary.push((k, v));
        }
    }
    summary.extend(extra.iter().cloned());

    if spec.heatmap.enabled {
        let img = encode_heatmap(&grid, spec.heatmap.range);
        if img.flat {
            warnings.push(format!(
                "heat map range is degenerate ({} .. {}); painted mid-grey",
                img.lo, img.hi
            ));
        }
        write_pgm(&img, &dir.join("heatmap.pgm"))?;
        summary.push(("heatmap_rows".into(), img.height.to_string()));
        summary.push(("heatmap_lo".into(), img.lo.to_string()));
        summary.push(("heatmap_hi".into(), img.hi.to_string()));
        summary.push(("heatmap_flat".into(), img.flat.to_string()));
    }
    if spec.kernel_csv {
        KernelTable::build(cfg.alpha, cfg.steps.max(1))?.write_csv(&dir.join("kernel.csv"))?;
    }
    if spec.edges_csv {
        cfg.topology
            .build(cfg.n)?
            .write_edge_list(&dir.join("edges.csv"))?;
    }

    let sync = series.sync_time(spec.sync_threshold);
    let fit = match series.fit_std_decay() {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("no power-law fit of the spatial std: {e}"));
            None
        }
    };
    let window = (probe.len() / 10).min(1000);
    let period = if window > spec.max_period {
        detect_period(&probe, spec.max_period, spec.period_tol, window)?
    } else {
        None
    };
    let final_t = series.times.last().copied().unwrap_or(0);
    let diverged = series.diverged;
    if let Some(d) = diverged {
        warnings.push(format!(
            "diverged at t = {}, site {}, value {}",
            d.t, d.site, d.value
        ));
    }

    summary.extend([
        ("final_t".to_string(), final_t.to_string()),
        (
            "diverged".into(),
            diverged.map_or_else(
                || "no".into(),
                |d| format!("t={} site={} value={}", d.t, d.site, d.value),
            ),
        ),
        ("sync_time".into(), opt(sync.t_n)),
        ("final_std".into(), opt(series.spatial_std.last())),
        ("final_spread".into(), opt(series.spread.last())),
        ("fit_exponent".into(), opt(fit.map(|f| f.exponent))),
        ("fit_amplitude".into(), opt(fit.map(|f| f.amplitude))),
        ("fit_points".into(), opt(fit.map(|f| f.points))),
        ("probe_period".into(), opt(period)),
    ]);
    write_summary(&summary, &dir.join("summary.txt"))?;

    Ok(RunReport {
        dir: dir.to_path_buf(),
        series,
        final_t,
        diverged,
        sync,
        fit,
        period,
        warnings,
    })
}

/// One run of the base configuration into `spec.output_dir`.
pub fn run_single(spec: &ExperimentSpec) -> Result<RunReport> {
    run_into(spec, &spec.base, &spec.output_dir, &[])
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub assigned: Vec<(String, String)>,
    pub report: RunReport,
}

/// Runs every point of the scan's cartesian product into
/// `point_NNN/` subdirectories and writes a `scan.csv` table.
pub fn run_scan(spec: &ExperimentSpec) -> Result<Vec<ScanPoint>> {
    let points = spec.scan_points()?;
    create_dir(&spec.output_dir)?;
    let mut out = Vec::with_capacity(points.len());
    for (i, (assigned, cfg)) in points.into_iter().enumerate() {
        let dir = spec.output_dir.join(format!("point_{i:03}"));
        let report = run_into(spec, &cfg, &dir, &[("scan_point".into(), i.to_string())])?;
        out.push(ScanPoint { assigned, report });
    }

    let mut table = String::from("point");
    for axis in &spec.scan {
        table.push(',');
        table.push_str(&axis.key);
    }
    table.push_str(",final_t,diverged,sync_time,final_std,fit_exponent,probe_period\n");
    for (i, p) in out.iter().enumerate() {
        let r = &p.report;
        table.push_str(&i.to_string());
        for (_, v) in &p.assigned {
            table.push(',');
            table.push_str(v);
        }
        table.push_str(&format!(
            ",{},{},{},{},{},{}\n",
            r.final_t,
            r.diverged.is_some(),
            opt(r.sync.t_n),
            opt(r.series.spatial_std.last()),
            opt(r.fit.map(|f| f.exponent)),
            opt(r.period),
        ));
    }
    let path = spec.output_dir.join("scan.csv");
    fs::write(&path, table).map_err(|e| Error::io(&path, e))?;
    let mut summary = spec.to_pairs();
    summary.push(("points".into(), out.len().to_string()));
    write_summary(&summary, &spec.output_dir.join("summary.txt"))?;
    Ok(out)
}

/// Configuration of ensemble member `member` at size `n`: the base config
/// with its init (and small-world) seeds advanced by `member * seed_stride`.
pub fn ensemble_member(spec: &ExperimentSpec, n: usize, member: usize) -> RunConfig {
    let mut cfg = spec.base.clone();
    cfg.n = n;
    cfg.threads = 1;
    cfg.stop_below_spread = Some(spec.sync_threshold);
    let offset = member as u64 * spec.seed_stride;
    if let InitSpec::Uniform { seed, .. } = &mut cfg.init {
        *seed = seed.wrapping_add(offset);
    }
    cfg.topology.seed = cfg.topology.seed.wrapping_add(offset);
    cfg
}

/// Runs `cfg` until its spread first drops below `threshold`; divergence or
/// reaching `cfg.steps` counts as censored.
pub fn simulate_sync_time(cfg: &RunConfig, threshold: f64) -> Result<SyncTimeResult> {
    let mut cfg = cfg.clone();
    cfg.stop_below_spread = Some(threshold);
    let out = run_observed(&cfg, |_, _| ())?;
    Ok(out.series.sync_time(threshold))
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `T_N ∝ N^exponent`; `None` when fewer than three sizes synchronized.
    pub fit: Option<PowerLawFit>,
    pub warnings: Vec<String>,
}

/// Synchronization-time ensembles over `spec.sizes`, simulated.
pub fn run_sync_scaling(spec: &ExperimentSpec) -> Result<ScalingReport> {
    let threshold = spec.sync_threshold;
    run_sync_scaling_with(spec, |cfg| simulate_sync_time(cfg, threshold))
}

/// Like [`run_sync_scaling`] with the per-member `T_N` supplied by `source`.
/// Members run concurrently when `spec.base.threads > 1`; results do not
/// depend on the thread count.
pub fn run_sync_scaling_with<F>(spec: &ExperimentSpec, source: F) -> Result<ScalingReport>
where
    F: Fn(&RunConfig) -> Result<SyncTimeResult> + Sync,
{
    create_dir(&spec.output_dir)?;
    let pool = if spec.base.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(spec.base.threads)
                .build()
                .map_err(|e| {
                    Error::Config(vec![format!("threads = {}: {e}", spec.base.threads)])
                })?,
        )
    } else {
        None
    };

    let mut rows = Vec::with_capacity(spec.sizes.len());
    let mut warnings = Vec::new();
    for &n in &spec.sizes {
        let members: Vec<RunConfig> = (0..spec.ensemble_size)
            .map(|m| ensemble_member(spec, n, m))
            .collect();
        let results: Vec<SyncTimeResult> = match &pool {
            Some(pool) => {
                pool.install(|| members.par_iter().map(&source).collect::<Result<_>>())?
            }
            None => members.iter().map(&source).collect::<Result<_>>()?,
        };
        let stats = EnsembleStats::from_results(&results);
        if stats.censored > 0 {
            warnings.push(format!(
                "N = {n}: {} of {} members did not synchronize within {} steps; excluded from the mean",
                stats.censored, spec.ensemble_size, spec.base.steps
            ));
        }
        rows.push(ScalingRow { n, stats });
    }
    write_scaling_csv(&rows, &spec.output_dir.join("scaling.csv"))?;

    let usable: Vec<&ScalingRow> = rows.iter().filter(|r| r.stats.count > 0).collect();
    let fit = if usable.len() >= 3 {
        let sizes: Vec<usize> = usable.iter().map(|r| r.n).collect();
        let means: Vec<f64> = usable.iter().map(|r| r.stats.mean).collect();
        Some(fit_sync_scaling(&sizes, &means)?)
    } else {
        warnings.push("fewer than three sizes synchronized; no scaling fit".into());
        None
    };

    let mut summary = spec.to_pairs();
    summary.push((
        "member_seeds".into(),
        format!(
            "init_seed and topology_seed advanced by m * seed_stride, m = 0..{}",
            spec.ensemble_size
        ),
    ));
    for r in &rows {
        summary.push((format!("censored_n{}", r.n), r.stats.censored.to_string()));
    }
    summary.extend([
        ("fit_exponent".to_string(), opt(fit.map(|f| f.exponent))),
        ("fit_amplitude".to_string(), opt(fit.map(|f| f.amplitude))),
    ]);
    for w in &warnings {
        summary.push(("warning".into(), w.clone()));
    }
    write_summary(&summary, &spec.output_dir.join("summary.txt"))?;
    Ok(ScalingReport {
        rows,
        fit,
        warnings,
    })
}
