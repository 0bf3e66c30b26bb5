//! Microscopic Markov chain iteration of the coupled UAU–SIS system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{q, r_total, ModelParams, NeighborField};
use crate::network::MultiplexNetwork;

/// Per-node probabilities of the three admissible states. There is no
/// unaware-infected component: infection implies awareness.
#[derive(Clone, Debug, PartialEq)]
pub struct MmcaState {
    pub p_us: Vec<f64>,
    pub p_as: Vec<f64>,
    pub p_ai: Vec<f64>,
}

impl MmcaState {
    /// Every node carries infection probability `infected` and is
    /// otherwise unaware-susceptible.
    pub fn uniform(n: usize, infected: f64) -> Self {
        MmcaState {
            p_us: vec![1.0 - infected; n],
            p_as: vec![0.0; n],
            p_ai: vec![infected; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_us.is_empty()
    }

    /// `P^A = P^AS + P^AI` per node.
    pub fn p_a(&self) -> Vec<f64> {
        self.p_as.iter().zip(&self.p_ai).map(|(a, b)| a + b).collect()
    }

    /// Checks range and normalization within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.len();
        if self.p_as.len() != n || self.p_ai.len() != n {
            return Err(Error::Invariant("state components differ in length".into()));
        }
        for i in 0..n {
            let (us, as_, ai) = (self.p_us[i], self.p_as[i], self.p_ai[i]);
            for v in [us, as_, ai] {
                if !(-tol..=1.0 + tol).contains(&v) {
                    return Err(Error::Invariant(format!("node {i}: probability {v} out of range")));
                }
            }
            if (us + as_ + ai - 1.0).abs() > tol {
                return Err(Error::Invariant(format!(
                    "node {i}: probabilities sum to {}",
                    us + as_ + ai
                )));
            }
        }
        Ok(())
    }

    pub fn densities(&self) -> (f64, f64) {
        let n = self.len().max(1) as f64;
        let rho_a = self.p_as.iter().zip(&self.p_ai).map(|(a, b)| a + b).sum::<f64>() / n;
        let rho_i = self.p_ai.iter().sum::<f64>() / n;
        (rho_a, rho_i)
    }

    /// Largest componentwise change between two states.
    pub fn max_abs_diff(&self, other: &MmcaState) -> f64 {
        let d = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max)
        };
        d(&self.p_us, &other.p_us)
            .max(d(&self.p_as, &other.p_as))
            .max(d(&self.p_ai, &other.p_ai))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyDensities {
    pub rho_a: f64,
    pub rho_i: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solver controls. The defaults are a 1e-6 max-norm tolerance and a
/// 10 000 iteration cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmcaConfig {
    #[serde(default = "MmcaConfig::default_tol")]
    pub tol: f64,
    #[serde(default = "MmcaConfig::default_max_iter")]
    pub max_iter: usize,
    /// Uniform initial infection probability.
    #[serde(default = "MmcaConfig::default_initial_infected")]
    pub initial_infected: f64,
}

impl MmcaConfig {
    fn default_tol() -> f64 {
        1e-6
    }
    fn default_max_iter() -> usize {
        10_000
    }
    fn default_initial_infected() -> f64 {
        0.01
    }
}

impl Default for MmcaConfig {
    fn default() -> Self {
        MmcaConfig {
            tol: Self::default_tol(),
            max_iter: Self::default_max_iter(),
            initial_infected: Self::default_initial_infected(),
        }
    }
}

/// One synchronous update: all kernels read `state`, then each node's three
/// probabilities are advanced.
pub fn mmca_step(state: &MmcaState, net: &MultiplexNetwork, params: &ModelParams) -> MmcaState {
    let n = state.len();
    let p_a = state.p_a();
    let field = NeighborField::new(&p_a, &state.p_ai);
    let (delta, mu) = (params.delta, params.mu);

    let mut next = MmcaState {
        p_us: vec![0.0; n],
        p_as: vec![0.0; n],
        p_ai: vec![0.0; n],
    };
    for i in 0..n {
        let r = r_total(i, net, &field, params);
        let qa = q(i, &net.physical, &field, params, true);
        let qu = q(i, &net.physical, &field, params, false);
        let (us, as_, ai) = (state.p_us[i], state.p_as[i], state.p_ai[i]);

        next.p_us[i] = us * r * qu + as_ * delta * qu + ai * delta * mu;
        next.p_as[i] = us * (1.0 - r) * qa + as_ * (1.0 - delta) * qa + ai * (1.0 - delta) * mu;
        next.p_ai[i] = us * ((1.0 - r) * (1.0 - qa) + r * (1.0 - qu))
            + as_ * (delta * (1.0 - qu) + (1.0 - delta) * (1.0 - qa))
            + ai * (1.0 - mu);
    }
    next
}

/// Iterates [`mmca_step`] until no component moves by `tol` or more, or
/// `max_iter` steps have run. Hitting the cap is reported through
/// `converged = false`, not as an error.
pub fn mmca_solve(
    net: &MultiplexNetwork,
    params: &ModelParams,
    init: MmcaState,
    tol: f64,
    max_iter: usize,
) -> (MmcaState, SteadyDensities) {
    let mut state = init;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = mmca_step(&state, net, params);
        iterations += 1;
        let change = next.max_abs_diff(&state);
        state = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    let (rho_a, rho_i) = state.densities();
    (
        state,
        SteadyDensities {
            rho_a,
            rho_i,
            iterations,
            converged,
        },
    )
}

/// [`mmca_solve`] from the uniform initial condition in `cfg`.
pub fn mmca_steady(net: &MultiplexNetwork, params: &ModelParams, cfg: &MmcaConfig) -> SteadyDensities {
    let init = MmcaState::uniform(net.node_count(), cfg.initial_infected);
    mmca_solve(net, params, init, cfg.tol, cfg.max_iter).1
}
