//! Per-node "not informed" and "not infected" probabilities.
//!
//! The same functions serve the MMCA solver, where the neighbor field holds
//! probabilities, and the Monte Carlo engine, where it holds 0/1
//! indicators of the current state. With indicators each product collapses
//! to the stochastic rule: `(1 - λ)` per aware neighbor, `(1 - λ*)` per
//! simplex whose two other members are both aware, `(1 - β)` per infected
//! contact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{CyberLayer, MultiplexNetwork, PhysicalLayer};

/// How the sensing channel behaves when no physical neighbor is infected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingBaseline {
    /// `1 - r3 = sigmoid(-α θ) > 0` even with no infected contact.
    #[default]
    Literal,
    /// No infected contact means no sensed signal: `r3 = 1`.
    Clamped,
}

/// Dynamical rates, response-curve parameters and channel switches. Fields
/// missing from a scenario file take their [`Default`] values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Pairwise information rate λ.
    pub lambda: f64,
    /// 2-simplex information rate λ*.
    pub lambda_star: f64,
    /// Forgetting probability δ.
    pub delta: f64,
    /// Infection probability for unaware susceptibles, β^U.
    pub beta_u: f64,
    /// Awareness attenuation, β^A = γ β^U.
    pub gamma: f64,
    /// Recovery probability μ.
    pub mu: f64,
    /// Response intensity α of the sensing sigmoid.
    pub alpha: f64,
    /// Vigilance threshold θ of the sensing sigmoid.
    pub theta: f64,
    /// Pairwise channel (r1).
    pub enable_r1: bool,
    /// 2-simplex channel (r2).
    pub enable_r2: bool,
    /// Physical sensing channel (r3).
    pub enable_r3: bool,
    pub sensing_baseline: SensingBaseline,
}


impl Default for ModelParams {
    /// The comparison setup used for the MMCA/MC agreement study.
    fn default() -> Self {
        ModelParams {
            lambda: 0.1,
            lambda_star: 0.1,
            delta: 0.8,
            beta_u: 0.5,
            gamma: 0.0,
            mu: 0.4,
            alpha: 10.0,
            theta: 0.8,
            enable_r1: true,
            enable_r2: true,
            enable_r3: true,
            sensing_baseline: SensingBaseline::Literal,
        }
    }
}

impl ModelParams {
    /// Infection probability for an aware susceptible.
    #[inline]
    pub fn beta_a(&self) -> f64 {
        self.gamma * self.beta_u
    }

    #[inline]
    pub fn beta(&self, aware: bool) -> f64 {
        if aware {
            self.beta_a()
        } else {
            self.beta_u
        }
    }

    pub fn with_channels(mut self, r1: bool, r2: bool, r3: bool) -> Self {
        self.enable_r1 = r1;
        self.enable_r2 = r2;
        self.enable_r3 = r3;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("lambda", self.lambda),
            ("lambda_star", self.lambda_star),
            ("delta", self.delta),
            ("beta_u", self.beta_u),
            ("mu", self.mu),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} outside [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param("gamma", format!("{} outside [0, 1)", self.gamma)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::param("theta", format!("{} outside (0, 1)", self.theta)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", format!("{} must be positive", self.alpha)));
        }
        Ok(())
    }
}

/// `P_j^A` and `P_j^AI` for every node, either probabilities or 0/1
/// indicators.
#[derive(Clone, Copy, Debug)]
pub struct NeighborField<'a> {
    pub p_a: &'a [f64],
    pub p_ai: &'a [f64],
}

impl<'a> NeighborField<'a> {
    pub fn new(p_a: &'a [f64], p_ai: &'a [f64]) -> Self {
        debug_assert_eq!(p_a.len(), p_ai.len());
        NeighborField { p_a, p_ai }
    }

    /// Checks `0 <= p_ai <= p_a <= 1` up to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.p_a.len() != self.p_ai.len() {
            return Err(Error::Invariant("field components differ in length".into()));
        }
        for (j, (&a, &ai)) in self.p_a.iter().zip(self.p_ai).enumerate() {
            if ai < -tol || ai > a + tol || a > 1.0 + tol {
                return Err(Error::Invariant(format!(
                    "node {j}: need 0 <= P^AI ({ai}) <= P^A ({a}) <= 1"
                )));
            }
        }
        Ok(())
    }
}

/// Probability that node `i` is not informed over pairwise cyber links.
#[inline]
pub fn r1(i: usize, net: &CyberLayer, field: &NeighborField, params: &ModelParams) -> f64 {
    if !params.enable_r1 || params.lambda == 0.0 {
        return 1.0;
    }
    let lambda = params.lambda;
    net.neighbors(i)
        .iter()
        .map(|&j| 1.0 - field.p_a[j] * lambda)
        .product()
}

/// Probability that node `i` is not informed through any of its
/// 2-simplices; a simplex only transmits when both other members are aware.
#[inline]
pub fn r2(i: usize, net: &CyberLayer, field: &NeighborField, params: &ModelParams) -> f64 {
    if !params.enable_r2 || params.lambda_star == 0.0 {
        return 1.0;
    }
    let lambda_star = params.lambda_star;
    net.simplex_partners(i)
        .iter()
        .map(|&[j, k]| 1.0 - field.p_a[j] * field.p_a[k] * lambda_star)
        .product()
}

/// Fraction of node `i`'s physical contacts that are infected; zero for an
/// isolated node.
#[inline]
pub fn infected_fraction(i: usize, net: &PhysicalLayer, field: &NeighborField) -> f64 {
    let k = net.degree(i);
    if k == 0 {
        return 0.0;
    }
    let s: f64 = net.neighbors(i).iter().map(|&j| field.p_ai[j]).sum();
    s / k as f64
}

/// Probability that node `i` does not become aware by sensing infected
/// contacts: `1 - sigmoid(α (f - θ))`.
#[inline]
pub fn r3(i: usize, net: &PhysicalLayer, field: &NeighborField, params: &ModelParams) -> f64 {
    if !params.enable_r3 {
        return 1.0;
    }
    sensing_escape(infected_fraction(i, net, field), params)
}

/// `1 - sigmoid(α (f - θ))` for an infected-contact fraction `f`, with the
/// configured behavior at `f = 0`.
#[inline]
pub fn sensing_escape(f: f64, params: &ModelParams) -> f64 {
    if f == 0.0 && params.sensing_baseline == SensingBaseline::Clamped {
        return 1.0;
    }
    // 1 - 1/(1+e^{-x}) == 1/(1+e^{x}), which stays accurate for large |x|.
    1.0 / (1.0 + (params.alpha * (f - params.theta)).exp())
}

/// Probability that node `i` receives no information from any channel.
#[inline]
pub fn r_total(i: usize, net: &MultiplexNetwork, field: &NeighborField, params: &ModelParams) -> f64 {
    r1(i, &net.cyber, field, params) * r2(i, &net.cyber, field, params) * r3(i, &net.physical, field, params)
}

/// Probability that node `i` escapes infection from all contacts, using
/// `β^A` when `aware` and `β^U` otherwise.
#[inline]
pub fn q(i: usize, net: &PhysicalLayer, field: &NeighborField, params: &ModelParams, aware: bool) -> f64 {
    let beta = params.beta(aware);
    if beta == 0.0 {
        return 1.0;
    }
    net.neighbors(i)
        .iter()
        .map(|&j| 1.0 - field.p_ai[j] * beta)
        .product()
}
