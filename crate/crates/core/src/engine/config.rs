use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maps::GaussMap;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyChoice {
    Ring,
    Global,
    SmallWorld,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopologySpec {
    pub kind: TopologyChoice,
    pub rewire_p: f64,
    pub seed: u64,
}

impl TopologySpec {
    pub fn ring() -> Self {
        TopologySpec {
            kind: TopologyChoice::Ring,
            rewire_p: 0.0,
            seed: 0,
        }
    }

    pub fn global() -> Self {
        TopologySpec {
            kind: TopologyChoice::Global,
            ..Self::ring()
        }
    }

    pub fn small_world(rewire_p: f64, seed: u64) -> Self {
        TopologySpec {
            kind: TopologyChoice::SmallWorld,
            rewire_p,
            seed,
        }
    }

    pub fn build(&self, n: usize) -> Result<Topology> {
        match self.kind {
            TopologyChoice::Ring => Topology::ring(n),
            TopologyChoice::Global => Topology::global(n),
            TopologyChoice::SmallWorld => Topology::small_world(n, self.rewire_p, self.seed),
        }
    }
}

/// Initial field `x(i, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// i.i.d. uniform on `[lo, hi)` drawn from ChaCha8 seeded with `seed`.
    Uniform {
        lo: f64,
        hi: f64,
        seed: u64,
    },
    Constant(f64),
    Explicit(Vec<f64>),
}

impl InitSpec {
    pub fn uniform(seed: u64) -> Self {
        InitSpec::Uniform {
            lo: 0.0,
            hi: 1.0,
            seed,
        }
    }

    pub fn generate(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            InitSpec::Uniform { lo, hi, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..n)
                    .map(|_| lo + (hi - lo) * rng.random::<f64>())
                    .collect())
            }
            InitSpec::Constant(c) => Ok(vec![*c; n]),
            InitSpec::Explicit(v) if v.len() == n => Ok(v.clone()),
            InitSpec::Explicit(v) => Err(Error::Shape {
                expected: n,
                got: v.len(),
            }),
        }
    }
}

/// Fractional (power-law memory) or classical one-step evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evolution {
    Fractional,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Summation {
    Plain,
    /// Kahan-compensated memory sums; slower, meant for horizons beyond ~1e5.
    Compensated,
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub nu: f64,
    pub n: usize,
    pub steps: usize,
    pub topology: TopologySpec,
    pub init: InitSpec,
    pub blowup_bound: f64,
    pub evolution: Evolution,
    pub summation: Summation,
    /// Sum only the most recent `M` increments.
    pub memory_window: Option<usize>,
    /// Stop as soon as the spatial spread drops below this value.
    pub stop_below_spread: Option<f64>,
    /// Worker threads for per-site work; 1 runs inline.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.6,
            epsilon: 0.5,
            beta: -0.5,
            nu: GaussMap::DEFAULT_NU,
            n: 100,
            steps: 1000,
            topology: TopologySpec::ring(),
            init: InitSpec::uniform(1),
            blowup_bound: 1e6,
            evolution: Evolution::Fractional,
            summation: Summation::Plain,
            memory_window: None,
            stop_below_spread: None,
            threads: 1,
        }
    }
}

impl RunConfig {
    /// Collects every domain violation rather than stopping at the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            out.push(format!(
                "alpha = {}: must satisfy 0 < alpha <= 1",
                self.alpha
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            out.push(format!(
                "epsilon = {}: must satisfy 0 <= epsilon <= 1",
                self.epsilon
            ));
        }
        if !self.beta.is_finite() {
            out.push(format!("beta = {}: must be finite", self.beta));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            out.push(format!("nu = {}: must satisfy 0 < nu < inf", self.nu));
        }
        let min_n = match self.topology.kind {
            TopologyChoice::Ring => 3,
            TopologyChoice::Global => 1,
            TopologyChoice::SmallWorld => 6,
        };
        if self.n < min_n {
            out.push(format!(
                "n = {}: must be >= {min_n} for this topology",
                self.n
            ));
        }
        if self.topology.kind == TopologyChoice::SmallWorld
            && !(0.0..=1.0).contains(&self.topology.rewire_p)
        {
            out.push(format!(
                "rewire_p = {}: must satisfy 0 <= p <= 1",
                self.topology.rewire_p
            ));
        }
        if !(self.blowup_bound > 0.0) {
            out.push(format!("blowup_bound = {}: must be > 0", self.blowup_bound));
        }
        if let InitSpec::Uniform { lo, hi, .. } = self.init {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                out.push(format!("init range [{lo}, {hi}]: need finite lo <= hi"));
            }
        }
        if let InitSpec::Explicit(v) = &self.init {
            if v.len() != self.n {
                out.push(format!(
                    "init values: expected {} entries, got {}",
                    self.n,
                    v.len()
                ));
            }
        }
        if self.memory_window == Some(0) {
            out.push("memory_window = 0: must be >= 1".to_string());
        }
        if let Some(th) = self.stop_below_spread {
            if !(th > 0.0) {
                out.push(format!("stop_below_spread = {th}: must be > 0"));
            }
        }
        if self.threads == 0 {
            out.push("threads = 0: must be >= 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn map(&self) -> Result<GaussMap> {
        GaussMap::new(self.nu, self.beta)
    }
}

impl TopologyChoice {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyChoice::Ring => "ring",
            TopologyChoice::Global => "global",
            TopologyChoice::SmallWorld => "small-world",
        }
    }
}

impl RunConfig {
    /// Flat `key = value` echo of every field, in the config file's key names.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(&str, String)> = vec![
            ("alpha", self.alpha.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("beta", self.beta.to_string()),
            ("nu", self.nu.to_string()),
            ("n", self.n.to_string()),
            ("steps", self.steps.to_string()),
            ("topology", self.topology.kind.name().to_string()),
        ];
        if self.topology.kind == TopologyChoice::SmallWorld {
            out.push(("rewire_p", self.topology.rewire_p.to_string()));
            out.push(("topology_seed", self.topology.seed.to_string()));
        }
        match &self.init {
            InitSpec::Uniform { lo, hi, seed } => {
                out.push(("init", "uniform".into()));
                out.push(("init_lo", lo.to_string()));
                out.push(("init_hi", hi.to_string()));
                out.push(("init_seed", seed.to_string()));
            }
            InitSpec::Constant(c) => {
                out.push(("init", "constant".into()));
                out.push(("init_value", c.to_string()));
            }
            InitSpec::Explicit(v) => {
                out.push(("init", "explicit".into()));
                let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                out.push(("init_values", list.join(", ")));
            }
        }
        out.push(("blowup_bound", self.blowup_bound.to_string()));
        out.push((
            "evolution",
            match self.evolution {
                Evolution::Fractional => "fractional",
                Evolution::Classical => "classical",
            }
            .into(),
        ));
        out.push((
            "summation",
            match self.summation {
                Summation::Plain => "plain",
                Summation::Compensated => "compensated",
            }
            .into(),
        ));
        out.push((
            "memory_window",
            self.memory_window.map_or("full".into(), |m| m.to_string()),
        ));
        out.push((
            "stop_below_spread",
            self.stop_below_spread
                .map_or("none".into(), |s| s.to_string()),
        ));
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
