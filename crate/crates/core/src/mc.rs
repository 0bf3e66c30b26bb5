//! Stochastic simulation of the coupled dynamics with synchronous updates.
//!
//! Each step has two phases that both read the time-`t` configuration.
//! Awareness: unaware nodes are informed with probability `1 - r_i`, aware
//! nodes forget with probability `δ`. Epidemic: susceptible nodes are
//! infected with probability `1 - q_i`, where the awareness used to pick
//! `β^A` or `β^U` is the one just drawn in the awareness phase (see
//! [`ExposureAwareness`]); infected nodes recover with probability `μ`.
//! A node that stays infected stays aware whatever its awareness draw,
//! and a newly infected node is aware.
//!
//! Every node consumes exactly two uniforms per step, in node order, so a
//! trajectory is a pure function of its seed and runs that share a seed are
//! coupled across parameter values.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{sensing_escape, ModelParams, SensingBaseline};
use crate::network::MultiplexNetwork;
use crate::seeding::{derive_seed, rng_from_seed, stream, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeState {
    /// Unaware, susceptible.
    US,
    /// Aware, susceptible.
    AS,
    /// Aware, infected.
    AI,
}

impl NodeState {
    #[inline]
    pub fn is_aware(self) -> bool {
        !matches!(self, NodeState::US)
    }

    #[inline]
    pub fn is_infected(self) -> bool {
        matches!(self, NodeState::AI)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct McState {
    pub states: Vec<NodeState>,
    pub t: u64,
}

impl McState {
    /// `(aware, infected)` node counts.
    pub fn counts(&self) -> (usize, usize) {
        self.states.iter().fold((0, 0), |(a, i), s| {
            (a + s.is_aware() as usize, i + s.is_infected() as usize)
        })
    }

    /// `(ρ^A, ρ^I)`.
    pub fn densities(&self) -> (f64, f64) {
        let n = self.states.len().max(1) as f64;
        let (a, i) = self.counts();
        (a as f64 / n, i as f64 / n)
    }
}

/// Which awareness selects the infection probability of a susceptible node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureAwareness {
    /// The outcome of this step's awareness phase (matches the MMCA terms).
    #[default]
    Updated,
    /// The awareness held at time `t`.
    Current,
}

/// Ensemble and stopping controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; run `r` uses a stream derived from it.
    pub seed: u64,
    pub n_runs: usize,
    pub burn_in: usize,
    pub window: usize,
    pub max_steps: usize,
    /// Stop once two consecutive `window`-step means of `ρ^I` differ by
    /// less than this.
    pub stop_tol: f64,
    pub initial_infected: f64,
    pub exposure: ExposureAwareness,
}

pub const DEFAULT_SEED: u64 = 20_240_917;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            n_runs: 100,
            burn_in: 500,
            window: 100,
            max_steps: 5000,
            stop_tol: 1e-3,
            initial_infected: 0.01,
            exposure: ExposureAwareness::Updated,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::param("window", "must be at least 1"));
        }
        if self.burn_in + self.window > self.max_steps {
            return Err(Error::param(
                "max_steps",
                format!(
                    "burn_in + window = {} exceeds max_steps = {}",
                    self.burn_in + self.window,
                    self.max_steps
                ),
            ));
        }
        if self.n_runs == 0 {
            return Err(Error::param("n_runs", "must be at least 1"));
        }
        if !(self.initial_infected > 0.0 && self.initial_infected < 1.0) {
            return Err(Error::param(
                "initial_infected",
                format!("{} outside (0, 1)", self.initial_infected),
            ));
        }
        Ok(())
    }

    /// Seed of run `run_index`.
    pub fn run_seed(&self, run_index: usize) -> u64 {
        derive_seed(derive_seed(self.seed, stream::MONTE_CARLO), run_index as u64)
    }
}

/// `⌈frac · N⌉` distinct uniformly chosen nodes start infected (and hence
/// aware); everyone else starts unaware and susceptible.
pub fn init_state(n: usize, frac_infected: f64, rng: &mut SimRng) -> McState {
    // Guard against 0.07 * 100 = 7.000000000000001 rounding up.
    let k = ((frac_infected * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut states = vec![NodeState::US; n];
    for i in index::sample(rng, n, k.min(n)) {
        states[i] = NodeState::AI;
    }
    McState { states, t: 0 }
}

/// `t[c] = base^c` by repeated multiplication, the same operation sequence
/// the kernel products perform on a 0/1 field.
fn power_table(base: f64, max: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(max + 1);
    let mut acc = 1.0;
    t.push(acc);
    for _ in 0..max {
        acc *= base;
        t.push(acc);
    }
    t
}

/// Kernel values for indicator fields, tabulated by neighbor counts.
///
/// On a 0/1 field every kernel factor is either exactly 1 or a constant,
/// so each product depends only on how many factors are active. The tables
/// reproduce [`r_total`] and [`q`] bit for bit.
struct IndicatorKernels {
    r1: Vec<f64>,
    r2: Vec<f64>,
    q_aware: Vec<f64>,
    q_unaware: Vec<f64>,
    /// `r3` for node `i` with `c` infected contacts at `r3[r3_offset[i] + c]`.
    r3: Vec<f64>,
    r3_offset: Vec<usize>,
    use_r1: bool,
    use_r2: bool,
}

impl IndicatorKernels {
    fn new(net: &MultiplexNetwork, params: &ModelParams) -> Self {
        let n = net.node_count();
        let max_cyber = (0..n).map(|i| net.cyber.neighbors(i).len()).max().unwrap_or(0);
        let max_simplex = (0..n).map(|i| net.cyber.simplex_partners(i).len()).max().unwrap_or(0);
        let max_phys = (0..n).map(|i| net.physical.degree(i)).max().unwrap_or(0);
        let use_r1 = params.enable_r1 && params.lambda != 0.0;
        let use_r2 = params.enable_r2 && params.lambda_star != 0.0;
        let q_table = |beta: f64| {
            if beta == 0.0 {
                vec![1.0; max_phys + 1]
            } else {
                power_table(1.0 - beta, max_phys)
            }
        };

        let mut r3 = Vec::with_capacity(2 * net.physical.edge_count() + n);
        let mut r3_offset = Vec::with_capacity(n);
        for i in 0..n {
            r3_offset.push(r3.len());
            let k = net.physical.degree(i);
            for c in 0..=k {
                r3.push(if !params.enable_r3 {
                    1.0
                } else {
                    let f = if k == 0 { 0.0 } else { c as f64 / k as f64 };
                    sensing_escape(f, params)
                });
            }
        }
        IndicatorKernels {
            r1: power_table(1.0 - params.lambda, max_cyber),
            r2: power_table(1.0 - params.lambda_star, max_simplex),
            q_aware: q_table(params.beta_a()),
            q_unaware: q_table(params.beta_u),
            r3,
            r3_offset,
            use_r1,
            use_r2,
        }
    }
}

/// Reusable buffers for stepping one trajectory.
pub struct McEngine<'a> {
    net: &'a MultiplexNetwork,
    params: ModelParams,
    exposure: ExposureAwareness,
    tables: IndicatorKernels,
    aware: Vec<u8>,
    infected: Vec<u8>,
    next: Vec<NodeState>,
}

impl<'a> McEngine<'a> {
    pub fn new(net: &'a MultiplexNetwork, params: &ModelParams, exposure: ExposureAwareness) -> Self {
        let n = net.node_count();
        McEngine {
            net,
            params: *params,
            exposure,
            tables: IndicatorKernels::new(net, params),
            aware: vec![0; n],
            infected: vec![0; n],
            next: vec![NodeState::US; n],
        }
    }

    fn infected_contacts(&self, i: usize) -> usize {
        self.net
            .physical
            .neighbors(i)
            .iter()
            .map(|&j| self.infected[j] as usize)
            .sum()
    }

    /// `r_i` on the current indicator field.
    fn r(&self, i: usize, infected_contacts: usize) -> f64 {
        let t = &self.tables;
        let cyber = &self.net.cyber;
        let r1 = if t.use_r1 {
            let c: usize = cyber.neighbors(i).iter().map(|&j| self.aware[j] as usize).sum();
            t.r1[c]
        } else {
            1.0
        };
        let r2 = if t.use_r2 {
            let c: usize = cyber
                .simplex_partners(i)
                .iter()
                .map(|&[j, k]| (self.aware[j] & self.aware[k]) as usize)
                .sum();
            t.r2[c]
        } else {
            1.0
        };
        r1 * r2 * t.r3[t.r3_offset[i] + infected_contacts]
    }

    /// `q_i` on the current indicator field.
    fn q(&self, infected_contacts: usize, shielded: bool) -> f64 {
        if shielded {
            self.tables.q_aware[infected_contacts]
        } else {
            self.tables.q_unaware[infected_contacts]
        }
    }

    /// Advances `state` by one synchronous step.
    pub fn step(&mut self, state: &mut McState, rng: &mut SimRng) {
        for (j, s) in state.states.iter().enumerate() {
            self.aware[j] = s.is_aware() as u8;
            self.infected[j] = s.is_infected() as u8;
        }
        let (delta, mu) = (self.params.delta, self.params.mu);

        for (i, &s) in state.states.iter().enumerate() {
            let u_info: f64 = rng.random();
            let u_epi: f64 = rng.random();

            let next = match s {
                NodeState::AI => {
                    let aware_next = u_info >= delta;
                    if u_epi < mu {
                        if aware_next {
                            NodeState::AS
                        } else {
                            NodeState::US
                        }
                    } else {
                        NodeState::AI
                    }
                }
                NodeState::US | NodeState::AS => {
                    let contacts = self.infected_contacts(i);
                    let aware_next = if s == NodeState::US {
                        u_info < 1.0 - self.r(i, contacts)
                    } else {
                        u_info >= delta
                    };
                    let shielded = match self.exposure {
                        ExposureAwareness::Updated => aware_next,
                        ExposureAwareness::Current => s.is_aware(),
                    };
                    if u_epi < 1.0 - self.q(contacts, shielded) {
                        NodeState::AI
                    } else if aware_next {
                        NodeState::AS
                    } else {
                        NodeState::US
                    }
                }
            };
            self.next[i] = next;
        }
        std::mem::swap(&mut state.states, &mut self.next);
        state.t += 1;
    }
}

/// One step from `state` (allocating; see [`McEngine`] for loops).
pub fn mc_step(
    state: &McState,
    net: &MultiplexNetwork,
    params: &ModelParams,
    exposure: ExposureAwareness,
    rng: &mut SimRng,
) -> McState {
    let mut out = state.clone();
    McEngine::new(net, params, exposure).step(&mut out, rng);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub rho_a: f64,
    pub rho_i: f64,
    pub steps: usize,
    /// False when the run hit `max_steps` before the stopping rule fired.
    pub settled: bool,
}

/// True when nothing can ever happen again: no infection, no awareness and
/// no channel that creates awareness from nothing.
fn is_absorbed(state: &McState, params: &ModelParams) -> bool {
    let spontaneous = params.enable_r3 && params.sensing_baseline == SensingBaseline::Literal;
    !spontaneous && state.states.iter().all(|&s| s == NodeState::US)
}

/// Runs trajectory `run_index` until the windowed infection density settles
/// and returns its last-window averages.
pub fn run_to_steady(
    net: &MultiplexNetwork,
    params: &ModelParams,
    cfg: &RunConfig,
    run_index: usize,
) -> RunOutcome {
    let mut rng = rng_from_seed(cfg.run_seed(run_index));
    let mut state = init_state(net.node_count(), cfg.initial_infected, &mut rng);
    let mut engine = McEngine::new(net, params, cfg.exposure);
    let w = cfg.window;

    // Prefix sums of the per-step densities; entry t covers steps 1..=t.
    let mut cum_a = vec![0.0f64];
    let mut cum_i = vec![0.0f64];
    let window_mean = |cum: &[f64], end: usize| (cum[end] - cum[end - w]) / w as f64;

    for t in 1..=cfg.max_steps {
        if is_absorbed(&state, params) {
            return RunOutcome {
                rho_a: 0.0,
                rho_i: 0.0,
                steps: t - 1,
                settled: true,
            };
        }
        engine.step(&mut state, &mut rng);
        let (a, i) = state.densities();
        cum_a.push(cum_a[t - 1] + a);
        cum_i.push(cum_i[t - 1] + i);

        if t >= cfg.burn_in + w && t >= 2 * w {
            let current = window_mean(&cum_i, t);
            let previous = window_mean(&cum_i, t - w);
            if (current - previous).abs() < cfg.stop_tol {
                return RunOutcome {
                    rho_a: window_mean(&cum_a, t),
                    rho_i: current,
                    steps: t,
                    settled: true,
                };
            }
        }
    }
    let t = cfg.max_steps;
    let span = w.min(t).max(1);
    RunOutcome {
        rho_a: (cum_a[t] - cum_a[t - span]) / span as f64,
        rho_i: (cum_i[t] - cum_i[t - span]) / span as f64,
        steps: t,
        settled: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub rho_a_mean: f64,
    pub rho_i_mean: f64,
    pub rho_a_sd: f64,
    pub rho_i_sd: f64,
    pub runs_used: usize,
    /// Runs stopped by `max_steps` rather than by the settling rule.
    pub unsettled_runs: usize,
}

impl EnsembleResult {
    /// Standard error of `rho_i_mean`.
    pub fn rho_i_sem(&self) -> f64 {
        self.rho_i_sd / (self.runs_used as f64).sqrt()
    }

    pub fn rho_a_sem(&self) -> f64 {
        self.rho_a_sd / (self.runs_used as f64).sqrt()
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `n_runs` independent trajectories, run in parallel. Results are gathered
/// in run order, so the output does not depend on the thread count.
pub fn run_ensemble(net: &MultiplexNetwork, params: &ModelParams, cfg: &RunConfig) -> EnsembleResult {
    let outcomes: Vec<RunOutcome> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| run_to_steady(net, params, cfg, r))
        .collect();
    let a: Vec<f64> = outcomes.iter().map(|o| o.rho_a).collect();
    let i: Vec<f64> = outcomes.iter().map(|o| o.rho_i).collect();
    let (rho_a_mean, rho_a_sd) = mean_sd(&a);
    let (rho_i_mean, rho_i_sd) = mean_sd(&i);
    EnsembleResult {
        rho_a_mean,
        rho_i_mean,
        rho_a_sd,
        rho_i_sd,
        runs_used: outcomes.len(),
        unsettled_runs: outcomes.iter().filter(|o| !o.settled).count(),
    }
}
