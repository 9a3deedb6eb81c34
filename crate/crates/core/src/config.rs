//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment. Scan axes are written as
//! `scan.<key> = v1, v2, …` or `scan.<key> = lo:hi:step` (inclusive). Every
//! problem in a file is reported together.
//!
//! ```text
//! mode = run
//! alpha = 0.6
//! beta = -0.9
//! epsilon = 0.55
//! n = 100
//! steps = 10000
//! topology = global
//! ```

use std::path::PathBuf;

use crate::engine::{Evolution, InitSpec, RunConfig, Summation, TopologyChoice};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Scan,
    SyncScaling,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Scan => "scan",
            Mode::SyncScaling => "sync-scaling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangePolicy {
    /// Global min/max of the recorded grid.
    Auto,
    Fixed(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOptions {
    pub enabled: bool,
    /// Only rows with `t mod modulus == 0` are recorded.
    pub modulus: usize,
    pub range: RangePolicy,
}

/// `(key, value)` pairs applied to the base config at one scan point.
pub type Assignments = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanAxis {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub base: RunConfig,
    pub scan: Vec<ScanAxis>,
    pub ensemble_size: usize,
    /// Member `m` of an ensemble uses `init_seed + m * seed_stride`.
    pub seed_stride: u64,
    pub sizes: Vec<usize>,
    pub sync_threshold: f64,
    pub output_dir: PathBuf,
    pub heatmap: HeatmapOptions,
    pub probe_site: usize,
    pub max_period: usize,
    pub period_tol: f64,
    pub kernel_csv: bool,
    pub edges_csv: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            mode: Mode::Run,
            base: RunConfig::default(),
            scan: Vec::new(),
            ensemble_size: 20,
            seed_stride: 1,
            sizes: Vec::new(),
            sync_threshold: 0.01,
            output_dir: PathBuf::from("out"),
            heatmap: HeatmapOptions {
                enabled: true,
                modulus: 1,
                range: RangePolicy::Auto,
            },
            probe_site: 0,
            max_period: 12,
            period_tol: 1e-3,
            kernel_csv: false,
            edges_csv: false,
        }
    }
}

/// Keys accepted by the parser, after alias resolution.
pub const KEYS: &[&str] = &[
    "mode",
    "alpha",
    "epsilon",
    "beta",
    "nu",
    "n",
    "steps",
    "topology",
    "rewire_p",
    "topology_seed",
    "init",
    "init_lo",
    "init_hi",
    "init_seed",
    "init_value",
    "init_values",
    "blowup_bound",
    "evolution",
    "summation",
    "memory_window",
    "stop_below_spread",
    "threads",
    "heatmap",
    "heatmap_modulus",
    "heatmap_range",
    "probe_site",
    "max_period",
    "period_tol",
    "ensemble_size",
    "seed_stride",
    "sizes",
    "sync_threshold",
    "output_dir",
    "kernel_csv",
    "edges_csv",
];

const REQUIRED: &[&str] = &["alpha", "beta", "epsilon", "steps", "topology"];

fn canonical_key(key: &str) -> String {
    let k = key.trim().replace('-', "_");
    match k.as_str() {
        "N" => "n".into(),
        "T" => "steps".into(),
        _ => k.to_lowercase(),
    }
}

/// Expands `lo:hi:step` (inclusive) or a comma list into scan values.
fn scan_values(text: &str) -> std::result::Result<Vec<String>, String> {
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format!("range `{text}` must be lo:hi:step"))?;
        if nums.len() != 3 || !(nums[2] > 0.0) || nums[1] < nums[0] {
            return Err(format!(
                "range `{text}` must be lo:hi:step with step > 0 and lo <= hi"
            ));
        }
        let count = ((nums[1] - nums[0]) / nums[2] + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| {
                let v = nums[0] + i as f64 * nums[2];
                ((v * 1e12).round() / 1e12).to_string()
            })
            .collect())
    } else {
        let list: Vec<String> = text
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if list.is_empty() {
            Err("scan axis has no values".into())
        } else {
            Ok(list)
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("{key} = {value}: not a valid number"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("{key} = {value}: expected true or false")),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// Applies one run-level key to `cfg`. Used for the base config and for
/// every scan point.
pub fn set_run_key(cfg: &mut RunConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    let value = value.trim();
    let init_parts = |cfg: &RunConfig| match cfg.init {
        InitSpec::Uniform { lo, hi, seed } => (lo, hi, seed),
        _ => (0.0, 1.0, 1),
    };
    match key {
        "alpha" => cfg.alpha = parse_num(key, value)?,
        "epsilon" => cfg.epsilon = parse_num(key, value)?,
        "beta" => cfg.beta = parse_num(key, value)?,
        "nu" => cfg.nu = parse_num(key, value)?,
        "n" => cfg.n = parse_num(key, value)?,
        "steps" => cfg.steps = parse_num(key, value)?,
        "topology" => {
            cfg.topology.kind = match value {
                "ring" => TopologyChoice::Ring,
                "global" => TopologyChoice::Global,
                "small-world" | "small_world" | "smallworld" => TopologyChoice::SmallWorld,
                _ => {
                    return Err(format!(
                        "topology = {value}: expected ring, global or small-world"
                    ))
                }
            }
        }
        "rewire_p" => cfg.topology.rewire_p = parse_num(key, value)?,
        "topology_seed" => cfg.topology.seed = parse_num(key, value)?,
        "init" => {
            cfg.init = match value {
                "uniform" => {
                    let (lo, hi, seed) = init_parts(cfg);
                    InitSpec::Uniform { lo, hi, seed }
                }
                "constant" => InitSpec::Constant(match cfg.init {
                    InitSpec::Constant(c) => c,
                    _ => 0.0,
                }),
                "explicit" => InitSpec::Explicit(match &cfg.init {
                    InitSpec::Explicit(v) => v.clone(),
                    _ => Vec::new(),
                }),
                _ => {
                    return Err(format!(
                        "init = {value}: expected uniform, constant or explicit"
                    ))
                }
            }
        }
        "init_lo" | "init_hi" | "init_seed" => {
            let (mut lo, mut hi, mut seed) = init_parts(cfg);
            match key {
                "init_lo" => lo = parse_num(key, value)?,
                "init_hi" => hi = parse_num(key, value)?,
                _ => seed = parse_num(key, value)?,
            }
            cfg.init = InitSpec::Uniform { lo, hi, seed };
        }
        "init_value" => cfg.init = InitSpec::Constant(parse_num(key, value)?),
        "init_values" => cfg.init = InitSpec::Explicit(parse_list(key, value)?),
        "blowup_bound" => cfg.blowup_bound = parse_num(key, value)?,
        "evolution" => {
            cfg.evolution = match value {
                "fractional" => Evolution::Fractional,
                "classical" => Evolution::Classical,
                _ => {
                    return Err(format!(
                        "evolution = {value}: expected fractional or classical"
                    ))
                }
            }
        }
        "summation" => {
            cfg.summation = match value {
                "plain" => Summation::Plain,
                "compensated" => Summation::Compensated,
                _ => {
                    return Err(format!(
                        "summation = {value}: expected plain or compensated"
                    ))
                }
            }
        }
        "memory_window" => {
            cfg.memory_window = match value {
                "full" | "none" => None,
                v => Some(parse_num(key, v)?),
            }
        }
        "stop_below_spread" => {
            cfg.stop_below_spread = match value {
                "none" => None,
                v => Some(parse_num(key, v)?),
            }
        }
        "threads" => cfg.threads = parse_num(key, value)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

fn is_run_key(key: &str) -> bool {
    !matches!(
        key,
        "mode"
            | "heatmap"
            | "heatmap_modulus"
            | "heatmap_range"
            | "probe_site"
            | "max_period"
            | "period_tol"
            | "ensemble_size"
            | "seed_stride"
            | "sizes"
            | "sync_threshold"
            | "output_dir"
            | "kernel_csv"
            | "edges_csv"
    )
}

fn set_spec_key(
    spec: &mut ExperimentSpec,
    key: &str,
    value: &str,
) -> std::result::Result<(), String> {
    let value = value.trim();
    match key {
        "mode" => {
            spec.mode = match value {
                "run" => Mode::Run,
                "scan" => Mode::Scan,
                "sync-scaling" | "sync_scaling" => Mode::SyncScaling,
                _ => {
                    return Err(format!(
                        "mode = {value}: expected run, scan or sync-scaling"
                    ))
                }
            }
        }
        "heatmap" => spec.heatmap.enabled = parse_bool(key, value)?,
        "heatmap_modulus" => spec.heatmap.modulus = parse_num(key, value)?,
        "heatmap_range" => {
            spec.heatmap.range = if value == "auto" {
                RangePolicy::Auto
            } else {
                let v: Vec<f64> = parse_list(key, value)?;
                if v.len() != 2 {
                    return Err(format!("heatmap_range = {value}: expected auto or lo, hi"));
                }
                RangePolicy::Fixed(v[0], v[1])
            }
        }
        "probe_site" => spec.probe_site = parse_num(key, value)?,
        "max_period" => spec.max_period = parse_num(key, value)?,
        "period_tol" => spec.period_tol = parse_num(key, value)?,
        "ensemble_size" => spec.ensemble_size = parse_num(key, value)?,
        "seed_stride" => spec.seed_stride = parse_num(key, value)?,
        "sizes" => spec.sizes = parse_list(key, value)?,
        "sync_threshold" => spec.sync_threshold = parse_num(key, value)?,
        "output_dir" => spec.output_dir = PathBuf::from(value),
        "kernel_csv" => spec.kernel_csv = parse_bool(key, value)?,
        "edges_csv" => spec.edges_csv = parse_bool(key, value)?,
        _ => set_run_key(&mut spec.base, key, value)?,
    }
    Ok(())
}

/// Splits `text` into `(line number, key, value)` assignments.
fn assignments(text: &str, errors: &mut Vec<String>) -> Vec<(usize, String, String)> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => out.push((lineno + 1, k.trim().to_string(), v.trim().to_string())),
            None => errors.push(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )),
        }
    }
    out
}

/// Parses a configuration file.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text`, then applies `overrides` (typically command-line flags)
/// on top.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentSpec> {
    let mut errors = Vec::new();
    let mut spec = ExperimentSpec::default();
    let mut seen = std::collections::BTreeSet::new();

    let mut all = assignments(text, &mut errors);
    all.extend(overrides.iter().map(|(k, v)| (0, k.clone(), v.clone())));

    for (line, key, value) in all {
        let place = if line > 0 {
            format!("line {line}: ")
        } else {
            String::from("flag: ")
        };
        if let Some(axis) = key.strip_prefix("scan.") {
            let axis = canonical_key(axis);
            if !KEYS.contains(&axis.as_str()) || !is_run_key(&axis) {
                errors.push(format!("{place}unknown scan key `{axis}`"));
                continue;
            }
            match scan_values(&value) {
                Ok(values) => {
                    spec.scan.retain(|a| a.key != axis);
                    spec.scan.push(ScanAxis { key: axis, values });
                }
                Err(e) => errors.push(format!("{place}{e}")),
            }
            continue;
        }
        let key = canonical_key(&key);
        if !KEYS.contains(&key.as_str()) {
            errors.push(format!("{place}unknown key `{key}`"));
            continue;
        }
        match set_spec_key(&mut spec, &key, &value) {
            Ok(()) => {
                seen.insert(key);
            }
            Err(e) => errors.push(format!("{place}{e}")),
        }
    }

    for key in REQUIRED {
        if !seen.contains(*key) {
            errors.push(format!("missing required key `{key}`"));
        }
    }
    if spec.mode != Mode::SyncScaling && !seen.contains("n") {
        errors.push("missing required key `n`".into());
    }
    if spec.mode == Mode::SyncScaling && !seen.contains("n") {
        spec.base.n = spec.sizes.first().copied().unwrap_or(spec.base.n);
    }
    errors.extend(spec.violations());
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Config(errors))
    }
}

impl ExperimentSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.base.violations();
        if self.ensemble_size == 0 {
            out.push("ensemble_size = 0: must be >= 1".into());
        }
        if self.heatmap.modulus == 0 {
            out.push("heatmap_modulus = 0: must be >= 1".into());
        }
        if let RangePolicy::Fixed(lo, hi) = self.heatmap.range {
            if !(lo < hi) {
                out.push(format!("heatmap_range = {lo}, {hi}: need lo < hi"));
            }
        }
        if !(self.sync_threshold > 0.0) {
            out.push(format!(
                "sync_threshold = {}: must be > 0",
                self.sync_threshold
            ));
        }
        if self.max_period == 0 {
            out.push("max_period = 0: must be >= 1".into());
        }
        if self.probe_site >= self.base.n && self.mode != Mode::SyncScaling {
            out.push(format!(
                "probe_site = {}: must be < n = {}",
                self.probe_site, self.base.n
            ));
        }
        match self.mode {
            Mode::Scan if self.scan.is_empty() => {
                out.push("mode = scan needs at least one scan.<key> axis".into())
            }
            Mode::SyncScaling if self.sizes.len() < 3 => out.push(format!(
                "sizes: sync-scaling needs >= 3 sizes, got {}",
                self.sizes.len()
            )),
            _ => {}
        }
        if self.mode == Mode::SyncScaling {
            let min_n = match self.base.topology.kind {
                TopologyChoice::Ring => 3,
                TopologyChoice::Global => 1,
                TopologyChoice::SmallWorld => 6,
            };
            for &n in &self.sizes {
                if n < min_n {
                    out.push(format!("sizes: N = {n} is below {min_n} for this topology"));
                }
            }
        }
        out
    }

    /// Cartesian product of the scan axes applied to the base config, with
    /// the per-point assignments. Without axes, the base config alone.
    pub fn scan_points(&self) -> Result<Vec<(Assignments, RunConfig)>> {
        let mut points: Vec<(Assignments, RunConfig)> = vec![(Vec::new(), self.base.clone())];
        let mut errors = Vec::new();
        for axis in &self.scan {
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for (assigned, cfg) in &points {
                for value in &axis.values {
                    let mut cfg = cfg.clone();
                    if let Err(e) = set_run_key(&mut cfg, &axis.key, value) {
                        errors.push(e);
                        continue;
                    }
                    let mut assigned = assigned.clone();
                    assigned.push((axis.key.clone(), value.clone()));
                    next.push((assigned, cfg));
                }
            }
            points = next;
        }
        for (assigned, cfg) in &points {
            for v in cfg.violations() {
                let at: Vec<String> = assigned.iter().map(|(k, v)| format!("{k}={v}")).collect();
                errors.push(format!("scan point [{}]: {v}", at.join(", ")));
            }
        }
        if errors.is_empty() {
            Ok(points)
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Every parameter of the experiment as flat pairs, in config-file keys.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![("mode".to_string(), self.mode.name().to_string())];
        out.extend(self.base.to_pairs());
        out.push(("threads".into(), self.base.threads.to_string()));
        let extra: Vec<(&str, String)> = vec![
            ("heatmap", self.heatmap.enabled.to_string()),
            ("heatmap_modulus", self.heatmap.modulus.to_string()),
            (
                "heatmap_range",
                match self.heatmap.range {
                    RangePolicy::Auto => "auto".into(),
                    RangePolicy::Fixed(lo, hi) => format!("{lo}, {hi}"),
                },
            ),
            ("probe_site", self.probe_site.to_string()),
            ("max_period", self.max_period.to_string()),
            ("period_tol", self.period_tol.to_string()),
            ("ensemble_size", self.ensemble_size.to_string()),
            ("seed_stride", self.seed_stride.to_string()),
            (
                "sizes",
                self.sizes
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
            ),
            ("sync_threshold", self.sync_threshold.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("kernel_csv", self.kernel_csv.to_string()),
            ("edges_csv", self.edges_csv.to_string()),
        ];
        out.extend(extra.into_iter().map(|(k, v)| (k.to_string(), v)));
        for axis in &self.scan {
            out.push((format!("scan.{}", axis.key), axis.values.join(", ")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
        # globally coupled decay run
        alpha = 0.6
        beta = -0.9
        epsilon = 0.55
        n = 100
        steps = 10000
        topology = global
    ";

    #[test]
    fn minimal_config_fills_defaults() {
        let spec = parse_config(MINIMAL).unwrap();
        assert_eq!(spec.mode, Mode::Run);
        assert_eq!(spec.base.alpha, 0.6);
        assert_eq!(spec.base.n, 100);
        assert_eq!(spec.base.steps, 10000);
        assert_eq!(spec.base.topology.kind, TopologyChoice::Global);
        assert_eq!(spec.base.nu, 7.5);
        assert_eq!(spec.base.blowup_bound, 1e6);
        assert_eq!(spec.base.init, InitSpec::uniform(1));
        assert_eq!(spec.ensemble_size, 20);
        assert_eq!(spec.sync_threshold, 0.01);
        assert_eq!(spec.heatmap.modulus, 1);
    }

    #[test]
    fn alpha_out_of_range_names_the_field() {
        let text = MINIMAL.replace("alpha = 0.6", "alpha = 1.5");
        match parse_config(&text) {
            Err(Error::Config(v)) => {
                assert_eq!(v.len(), 1);
                assert!(v[0].starts_with("alpha = 1.5"), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_violations_are_reported() {
        let text = "alpha = 2\nepsilon = 3\nbogus = 1\nn = x\nsteps = 10\ntopology = torus\nbeta = 0\nnot an assignment\n";
        let Err(Error::Config(v)) = parse_config(text) else {
            panic!("expected config error")
        };
        let joined = v.join("\n");
        for needle in [
            "unknown key `bogus`",
            "n = x",
            "topology = torus",
            "line 8",
            "alpha = 2",
            "epsilon = 3",
            "missing required key `topology`",
        ] {
            assert!(joined.contains(needle), "missing `{needle}` in:\n{joined}");
        }
    }

    #[test]
    fn epsilon_scan_expands_to_nine_configs() {
        let text = format!("{MINIMAL}\nmode = scan\nscan.epsilon = 0.1:0.9:0.1\n");
        let spec = parse_config(&text).unwrap();
        let points = spec.scan_points().unwrap();
        assert_eq!(points.len(), 9);
        let eps: Vec<f64> = points.iter().map(|(_, c)| c.epsilon).collect();
        assert_eq!(eps, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        assert_eq!(
            points[2].0,
            vec![("epsilon".to_string(), "0.3".to_string())]
        );
    }

    #[test]
    fn scan_is_cartesian() {
        let text = format!("{MINIMAL}\nmode = scan\nscan.epsilon = 0.1, 0.2\nscan.beta = -0.4:-0.5:0.05\nscan.alpha = 0.4,0.6,0.8\n");
        assert!(
            parse_config(&text).is_err(),
            "descending range must be rejected"
        );
        let text = format!("{MINIMAL}\nmode = scan\nscan.epsilon = 0.1, 0.2\nscan.beta = -0.5:-0.4:0.05\nscan.alpha = 0.4,0.6,0.8\n");
        let spec = parse_config(&text).unwrap();
        assert_eq!(spec.scan_points().unwrap().len(), 2 * 3 * 3);
    }

    #[test]
    fn scan_points_are_validated() {
        let text = format!("{MINIMAL}\nmode = scan\nscan.epsilon = 0.5, 1.5\n");
        let spec = parse_config(&text).unwrap();
        assert!(matches!(spec.scan_points(), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_win_over_file_values() {
        let spec = parse_config_with_overrides(
            MINIMAL,
            &[
                ("alpha".into(), "0.4".into()),
                ("init-seed".into(), "7".into()),
            ],
        )
        .unwrap();
        assert_eq!(spec.base.alpha, 0.4);
        assert_eq!(
            spec.base.init,
            InitSpec::Uniform {
                lo: 0.0,
                hi: 1.0,
                seed: 7
            }
        );
    }

    #[test]
    fn sync_scaling_needs_three_sizes() {
        let text = "mode = sync-scaling\nalpha=0.6\nbeta=-0.45\nepsilon=0.1\nsteps=100\ntopology=ring\nsizes = 25, 50\n";
        assert!(parse_config(text).is_err());
        let spec = parse_config(&format!("{text}sizes = 25, 50, 100\n")).unwrap();
        assert_eq!(spec.sizes, vec![25, 50, 100]);
    }

    #[test]
    fn echo_parses_back_to_the_same_spec() {
        let text = format!(
            "{MINIMAL}\ntopology = small-world\nrewire_p = 0.7\ntopology_seed = 5\nheatmap_modulus = 3\nheatmap_range = -1, 1\nmemory_window = 500\nmode = scan\nscan.epsilon = 0.8, 1.0\n"
        );
        let spec = parse_config(&text).unwrap();
        let echo: String = spec
            .to_pairs()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        assert_eq!(parse_config(&echo).unwrap(), spec);
    }
}
