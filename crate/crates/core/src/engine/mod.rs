//! Time stepping for coupled fractional maps.
//!
//! Each step evaluates the coupling increment
//!
//! ```text
//! Δ(i, t) = (1 - ε) f(x_i) + (ε / d) Σ_{k ∈ nb(i)} f(x_k) - x_i
//! ```
//!
//! (`d = 2` on a ring, `d = N` for global coupling, `d = 4` on a small-world
//! lattice), appends it to the history and recomputes the field from the
//! whole memory:
//!
//! ```text
//! x(i, t+1) = x(i, 0) + (1/Γ(α)) Σ_{j=1}^{t+1} g(t+1-j) Δ(i, j-1)
//! ```
//!
//! The sum over `j` is always accumulated in ascending order, one term at a
//! time, so results do not depend on blocking or on the number of threads.

mod config;
mod memory;

use rayon::prelude::*;
use rayon::ThreadPool;

pub use config::{Evolution, InitSpec, RunConfig, Summation, TopologyChoice, TopologySpec};

use crate::analysis::{DivergenceInfo, ObservableSeries};
use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::maps::{GaussMap, OnSiteMap};
use crate::topology::{Topology, TopologyKind};
use memory::BLOCK;

const SITE_TILE: usize = 128;

/// Coupling strength `ε ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    epsilon: f64,
}

impl CouplingParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::domain("epsilon", epsilon, "0 <= epsilon <= 1"));
        }
        Ok(CouplingParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `(1 - ε) f(a) + (ε / degree) · mapped_sum - a`, evaluated in that order.
#[inline]
fn increment(fa: f64, a: f64, mapped_sum: f64, keep: f64, share: f64) -> f64 {
    keep * fa + share * mapped_sum - a
}

/// Ring increment `(1 - ε) f(a) + (ε/2) [f(b) + f(c)] - a`.
pub fn coupling_increment_g1<M: OnSiteMap>(
    a: f64,
    b: f64,
    c: f64,
    params: CouplingParams,
    map: &M,
) -> Result<f64> {
    let eps = params.epsilon;
    let sum = map.eval(b)? + map.eval(c)?;
    Ok(increment(map.eval(a)?, a, sum, 1.0 - eps, eps / 2.0))
}

/// Global increment `(1 - ε) f(a) + (ε/N) Σ_k f(x_k) - a`.
pub fn coupling_increment_g2<M: OnSiteMap>(
    a: f64,
    mapped_sum: f64,
    n: usize,
    params: CouplingParams,
    map: &M,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("N", n, "N >= 1"));
    }
    let eps = params.epsilon;
    Ok(increment(
        map.eval(a)?,
        a,
        mapped_sum,
        1.0 - eps,
        eps / n as f64,
    ))
}

/// Small-world increment `(1 - ε) f(a) + (ε/4) Σ_{k=1}^{4} f(x_ξ(i,k)) - a`.
pub fn coupling_increment_g3<M: OnSiteMap>(
    a: f64,
    neighbor_mapped_sum: f64,
    params: CouplingParams,
    map: &M,
) -> Result<f64> {
    let eps = params.epsilon;
    Ok(increment(
        map.eval(a)?,
        a,
        neighbor_mapped_sum,
        1.0 - eps,
        eps / 4.0,
    ))
}

/// One step of the classical coupled map lattice,
/// `x'(i) = (1 - ε) f(x_i) + (ε / d) Σ_{k ∈ nb(i)} f(x_k)`.
/// On a ring this is the usual diffusive nearest-neighbor lattice.
pub fn classical_cml_step<M: OnSiteMap>(
    field: &[f64],
    topology: &Topology,
    params: CouplingParams,
    map: &M,
) -> Result<Vec<f64>> {
    if field.len() != topology.size() {
        return Err(Error::Shape {
            expected: topology.size(),
            got: field.len(),
        });
    }
    let mapped = field
        .iter()
        .map(|&x| map.eval(x))
        .collect::<Result<Vec<_>>>()?;
    let coupling = Coupling::new(topology, params.epsilon, &mapped);
    Ok((0..field.len())
        .map(|i| coupling.keep * mapped[i] + coupling.share * coupling.sum(topology, i, &mapped))
        .collect())
}

/// Per-step view of the coupling: weights and the shared global sum.
struct Coupling {
    keep: f64,
    share: f64,
    global_sum: Option<f64>,
}

impl Coupling {
    fn new(topology: &Topology, epsilon: f64, mapped: &[f64]) -> Self {
        let global_sum = match topology.kind() {
            TopologyKind::Global => Some(mapped.iter().sum()),
            _ => None,
        };
        Coupling {
            keep: 1.0 - epsilon,
            share: epsilon / topology.degree() as f64,
            global_sum,
        }
    }

    #[inline]
    fn sum(&self, topology: &Topology, site: usize, mapped: &[f64]) -> f64 {
        match self.global_sum {
            Some(s) => s,
            None => topology.local_sum(site, mapped),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Running,
    /// `|x(site, t)|` exceeded the blow-up bound or became non-finite.
    Diverged {
        site: usize,
        t: usize,
        value: f64,
    },
}

/// Field, initial condition and increment history of one run.
#[derive(Debug, Clone)]
pub struct SimulationState {
    t: usize,
    x0: Vec<f64>,
    // Row j holds Δ(·, j) for all sites; rows are append-only.
    history: Vec<f64>,
    current: Vec<f64>,
    blowup_bound: f64,
    status: RunStatus,
}

impl SimulationState {
    pub fn new(x0: Vec<f64>, blowup_bound: f64) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::domain("N", 0, "N >= 1"));
        }
        if !(blowup_bound > 0.0) {
            return Err(Error::domain("blowup_bound", blowup_bound, "> 0"));
        }
        let mut state = SimulationState {
            t: 0,
            current: x0.clone(),
            x0,
            history: Vec::new(),
            blowup_bound,
            status: RunStatus::Running,
        };
        state.check_bound();
        Ok(state)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn size(&self) -> usize {
        self.x0.len()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn blowup_bound(&self) -> f64 {
        self.blowup_bound
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    /// Number of stored increment rows.
    pub fn history_len(&self) -> usize {
        self.history.len() / self.size()
    }

    /// Increments `Δ(·, j)` stored at step `j`.
    pub fn history_row(&self, j: usize) -> Option<&[f64]> {
        let n = self.size();
        self.history.get(j * n..(j + 1) * n)
    }

    fn check_bound(&mut self) {
        if let Some((site, &value)) = self
            .current
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.abs() <= self.blowup_bound))
        {
            self.status = RunStatus::Diverged {
                site,
                t: self.t,
                value,
            };
        }
    }
}

/// Owns one run: kernel, topology, map, state and the scratch buffers of the
/// blocked memory sum.
pub struct Engine<M: OnSiteMap = GaussMap> {
    kernel: KernelTable,
    topology: Topology,
    epsilon: f64,
    map: M,
    evolution: Evolution,
    summation: Summation,
    window: Option<usize>,
    state: SimulationState,
    mapped: Vec<f64>,
    next: Vec<f64>,
    pending: Vec<f64>,
    // Targets block_origin+1 ..= block_origin+BLOCK have rows 0..block_origin in `pending`.
    block_origin: Option<usize>,
    pool: Option<ThreadPool>,
}

impl<M: OnSiteMap> Engine<M> {
    pub fn new(
        kernel: KernelTable,
        topology: Topology,
        coupling: CouplingParams,
        map: M,
        state: SimulationState,
    ) -> Result<Self> {
        let n = topology.size();
        if state.size() != n {
            return Err(Error::Shape {
                expected: n,
                got: state.size(),
            });
        }
        Ok(Engine {
            kernel,
            topology,
            epsilon: coupling.epsilon,
            map,
            evolution: Evolution::Fractional,
            summation: Summation::Plain,
            window: None,
            state,
            mapped: vec![0.0; n],
            next: vec![0.0; n],
            pending: Vec::new(),
            block_origin: None,
            pool: None,
        })
    }

    pub fn with_evolution(mut self, evolution: Evolution) -> Self {
        self.evolution = evolution;
        self
    }

    pub fn with_summation(mut self, summation: Summation) -> Self {
        self.summation = summation;
        self
    }

    pub fn with_memory_window(mut self, window: Option<usize>) -> Result<Self> {
        if window == Some(0) {
            return Err(Error::domain("memory_window", 0, ">= 1"));
        }
        self.window = window;
        Ok(self)
    }

    /// Splits per-site work over `threads` workers. Results are unchanged.
    pub fn with_threads(mut self, threads: usize) -> Result<Self> {
        self.pool = if threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(vec![format!("threads = {threads}: {e}")]))?;
            Some(pool)
        } else {
            None
        };
        Ok(self)
    }

    /// Reserves history storage for `steps` more steps.
    pub fn reserve(&mut self, steps: usize) {
        if self.evolution == Evolution::Fractional {
            self.state.history.reserve(steps * self.topology.size());
        }
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn into_state(self) -> SimulationState {
        self.state
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Advances the field by one time step. A diverged run stays put and
    /// keeps reporting its divergence.
    pub fn step(&mut self) -> Result<RunStatus> {
        if self.state.is_diverged() {
            return Ok(self.state.status);
        }
        let t = self.state.t;
        let n = self.topology.size();
        if self.evolution == Evolution::Fractional && t >= self.kernel.horizon() {
            return Err(Error::Index {
                index: t + 1,
                lo: 0,
                hi: self.kernel.horizon(),
            });
        }

        for (m, &x) in self.mapped.iter_mut().zip(&self.state.current) {
            *m = self.map.apply(x);
        }
        let coupling = Coupling::new(&self.topology, self.epsilon, &self.mapped);
        let (topology, mapped, current) = (&self.topology, &self.mapped, &self.state.current);

        match self.evolution {
            Evolution::Classical => {
                for (i, out) in self.next.iter_mut().enumerate() {
                    *out = coupling.keep * mapped[i]
                        + coupling.share * coupling.sum(topology, i, mapped);
                }
            }
            Evolution::Fractional => {
                self.state.history.extend((0..n).map(|i| {
                    increment(
                        mapped[i],
                        current[i],
                        coupling.sum(topology, i, mapped),
                        coupling.keep,
                        coupling.share,
                    )
                }));
                self.memory_sum(t);
            }
        }

        std::mem::swap(&mut self.state.current, &mut self.next);
        self.state.t = t + 1;
        self.state.check_bound();
        Ok(self.state.status)
    }

    /// Writes `x(·, t+1)` into `self.next`; row `t` of the history is present.
    fn memory_sum(&mut self, t: usize) {
        let n = self.topology.size();
        let weights = self.kernel.weights();
        let prefactor = self.kernel.prefactor();
        let history = &self.state.history;
        let x0 = &self.state.x0;
        let chunk = self.chunk_len();
        let pool = self.pool.as_ref();

        let blocked = self.window.is_none() && self.summation == Summation::Plain;
        let in_block = matches!(self.block_origin, Some(o) if t < o + BLOCK);
        // Near the end of the horizon a fresh block would read past the table.
        let fits = t + BLOCK - 1 <= self.kernel.horizon();
        if !blocked || (!in_block && !fits) {
            let first = self.window.map_or(0, |m| (t + 1).saturating_sub(m));
            let compensated = self.summation == Summation::Compensated;
            for_chunks(pool, &mut self.next, 1, chunk, |out, sites| {
                memory::direct_target(
                    out,
                    history,
                    x0,
                    n,
                    sites,
                    first,
                    t,
                    weights,
                    prefactor,
                    compensated,
                )
            });
            self.block_origin = None;
            return;
        }

        if !in_block {
            self.pending.resize(n * BLOCK, 0.0);
            for_chunks(pool, &mut self.pending, BLOCK, chunk, |acc, sites| {
                memory::accumulate_block(acc, history, n, sites, t, weights)
            });
            self.block_origin = Some(t);
        }
        let origin = self.block_origin.expect("block started above");
        let pending = &self.pending;
        for_chunks(pool, &mut self.next, 1, chunk, |out, sites| {
            let acc = &pending[sites.start * BLOCK..sites.end * BLOCK];
            memory::finish_target(
                out, acc, history, x0, n, sites, origin, t, weights, prefactor,
            )
        });
    }

    fn chunk_len(&self) -> usize {
        let n = self.topology.size();
        match &self.pool {
            // Keeps a tile's block accumulators resident in L1.
            None => n.clamp(1, SITE_TILE),
            Some(pool) => n.div_ceil(4 * pool.current_num_threads()).max(8),
        }
    }
}

/// Runs `f` over consecutive site ranges of `chunk` sites, where `buf` holds
/// `per_site` values per site. Sequential without a pool.
fn for_chunks<F>(pool: Option<&ThreadPool>, buf: &mut [f64], per_site: usize, chunk: usize, f: F)
where
    F: Fn(&mut [f64], std::ops::Range<usize>) + Sync,
{
    let run = |(k, part): (usize, &mut [f64])| {
        let lo = k * chunk;
        let hi = lo + part.len() / per_site;
        f(part, lo..hi)
    };
    match pool {
        None => buf.chunks_mut(chunk * per_site).enumerate().for_each(run),
        Some(pool) => pool.install(|| {
            buf.par_chunks_mut(chunk * per_site)
                .enumerate()
                .for_each(run)
        }),
    }
}

impl Engine<GaussMap> {
    /// Validated engine for `cfg`, with a kernel covering `cfg.steps`.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = KernelTable::build(cfg.alpha, cfg.steps)?;
        let topology = cfg.topology.build(cfg.n)?;
        let state = SimulationState::new(cfg.init.generate(cfg.n)?, cfg.blowup_bound)?;
        let mut engine = Engine::new(
            kernel,
            topology,
            CouplingParams::new(cfg.epsilon)?,
            cfg.map()?,
            state,
        )?
        .with_evolution(cfg.evolution)
        .with_summation(cfg.summation)
        .with_memory_window(cfg.memory_window)?
        .with_threads(cfg.threads)?;
        engine.reserve(cfg.steps);
        Ok(engine)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: SimulationState,
    pub series: ObservableSeries,
}

/// Runs `cfg.steps` steps, recording mean, σ and spread after every step.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    run_observed(cfg, |_, _| ())
}

/// Like [`run`], additionally handing every field `x(·, t)`, `t = 0, 1, …`,
/// to `observe`. Stops early on divergence or when the spread drops below
/// `cfg.stop_below_spread`.
pub fn run_observed<F>(cfg: &RunConfig, mut observe: F) -> Result<RunOutput>
where
    F: FnMut(usize, &[f64]),
{
    let mut engine = Engine::from_config(cfg)?;
    let mut series = ObservableSeries::with_metadata(cfg.to_pairs());
    let stop = cfg.stop_below_spread.unwrap_or(f64::NEG_INFINITY);
    loop {
        let state = engine.state();
        if let RunStatus::Diverged { site, t, value } = state.status() {
            series.diverged = Some(DivergenceInfo { site, t, value });
            break;
        }
        series.record(state.t(), state.current());
        observe(state.t(), state.current());
        if state.t() >= cfg.steps || series.spread.last().is_some_and(|&s| s < stop) {
            break;
        }
        engine.step()?;
    }
    Ok(RunOutput {
        state: engine.into_state(),
        series,
    })
}

#[derive(Debug, Clone)]
pub struct TruncatedRun {
    pub output: RunOutput,
    /// Largest `|x_trunc - x_full|` over all sites and steps, when a
    /// full-memory reference was run alongside.
    pub max_deviation: Option<f64>,
}

/// Runs with only the most recent `window` increments in the memory sum.
/// With `with_reference`, a full-memory engine is stepped in lockstep to
/// measure the truncation error (doubles the cost; meant for small runs).
pub fn run_truncated(cfg: &RunConfig, window: usize, with_reference: bool) -> Result<TruncatedRun> {
    let truncated = RunConfig {
        memory_window: Some(window),
        ..cfg.clone()
    };
    if !with_reference {
        return Ok(TruncatedRun {
            output: run(&truncated)?,
            max_deviation: None,
        });
    }
    let mut reference = Engine::from_config(&RunConfig {
        memory_window: None,
        ..cfg.clone()
    })?;
    let mut deviation = 0.0_f64;
    let mut error = None;
    let output = run_observed(&truncated, |t, field| {
        if t > 0 && error.is_none() {
            if let Err(e) = reference.step() {
                error = Some(e);
                return;
            }
        }
        for (a, b) in field.iter().zip(reference.state().current()) {
            deviation = deviation.max((a - b).abs());
        }
    })?;
    if let Some(e) = error {
        return Err(e);
    }
    Ok(TruncatedRun {
        output,
        max_deviation: Some(deviation),
    })
}
