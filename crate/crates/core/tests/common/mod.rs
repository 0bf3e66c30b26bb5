//! Reference implementations used as oracles by the integration tests.
//!
//! Everything here is written against plain adjacency lists and closed-form
//! products so it shares no code path with the library beyond the network
//! constructors.

#![allow(dead_code)]

use mpspread::kernels::ModelParams;
use mpspread::mc::{ExposureAwareness, McEngine, McState, NodeState};
use mpspread::mmca::{mmca_step, MmcaState};
use mpspread::network::{CyberLayer, MultiplexNetwork, PhysicalLayer};
use mpspread::seeding::rng_from_seed;
use mpspread::threshold::{dominant_eigenvalue, solve_critical_awareness, CsrMatrix};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::seq::index;
use rand::{Rng, SeedableRng};

/// Outcome of one oracle comparison: the worst deviation found and the
/// bound it was held to.
#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub worst: f64,
    pub bound: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.worst <= self.bound
    }
}

// ---------------------------------------------------------------------------
// Three-node path, one MMCA step by hand.

pub struct PathCase {
    pub net: MultiplexNetwork,
    pub params: ModelParams,
    pub state: MmcaState,
}

pub fn path_case() -> PathCase {
    let edges = [(0, 1), (1, 2)];
    let cyber = CyberLayer::from_parts(3, edges, []).unwrap();
    let physical = PhysicalLayer::from_edges(3, edges);
    let params = ModelParams {
        lambda: 0.5,
        delta: 0.2,
        beta_u: 0.4,
        gamma: 0.0,
        mu: 0.3,
        ..ModelParams::default()
    }
    .with_channels(true, false, false);
    let state = MmcaState {
        p_us: vec![0.6, 0.2, 0.7],
        p_as: vec![0.3, 0.5, 0.1],
        p_ai: vec![0.1, 0.3, 0.2],
    };
    PathCase {
        net: MultiplexNetwork::new(cyber, physical).unwrap(),
        params,
        state,
    }
}

/// The expected next state for [`path_case`], expanded per node.
///
/// Aware probabilities are `P^A = (0.4, 0.8, 0.3)`. With only pairwise
/// awareness on, `r = (1 - 0.5·0.8, (1 - 0.5·0.4)(1 - 0.5·0.3), 1 - 0.5·0.8)`;
/// with `γ = 0` aware nodes never catch it (`q^A = 1`) and
/// `q^U = (1 - 0.4·0.3, (1 - 0.4·0.1)(1 - 0.4·0.2), 1 - 0.4·0.3)`.
pub fn path_expected() -> [[f64; 3]; 3] {
    let (delta, mu) = (0.2, 0.3);
    let r = [1.0 - 0.5 * 0.8, (1.0 - 0.5 * 0.4) * (1.0 - 0.5 * 0.3), 1.0 - 0.5 * 0.8];
    let qu = [1.0 - 0.4 * 0.3, (1.0 - 0.4 * 0.1) * (1.0 - 0.4 * 0.2), 1.0 - 0.4 * 0.3];
    let qa = [1.0; 3];
    let us = [0.6, 0.2, 0.7];
    let as_ = [0.3, 0.5, 0.1];
    let ai = [0.1, 0.3, 0.2];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        // Walk the tree: unaware susceptible, aware susceptible, infected.
        let to_us = us[i] * r[i] * qu[i] + as_[i] * delta * qu[i] + ai[i] * mu * delta;
        let to_as = us[i] * (1.0 - r[i]) * qa[i]
            + as_[i] * (1.0 - delta) * qa[i]
            + ai[i] * mu * (1.0 - delta);
        let to_ai = us[i] * (1.0 - r[i]) * (1.0 - qa[i])
            + us[i] * r[i] * (1.0 - qu[i])
            + as_[i] * (1.0 - delta) * (1.0 - qa[i])
            + as_[i] * delta * (1.0 - qu[i])
            + ai[i] * (1.0 - mu);
        out[i] = [to_us, to_as, to_ai];
    }
    out
}

pub fn path_step_check() -> Check {
    let case = path_case();
    let next = mmca_step(&case.state, &case.net, &case.params);
    let want = path_expected();
    let mut worst = 0.0f64;
    for (i, w) in want.iter().enumerate() {
        worst = worst
            .max((next.p_us[i] - w[0]).abs())
            .max((next.p_as[i] - w[1]).abs())
            .max((next.p_ai[i] - w[2]).abs());
    }
    Check { worst, bound: 1e-12 }
}

// ---------------------------------------------------------------------------
// Single-step transition frequencies on a four-node configuration.

/// Cyber links, the one simplex and contact links of the test configuration.
const FREQ_CYBER: [(usize, usize); 4] = [(0, 1), (0, 2), (1, 2), (2, 3)];
const FREQ_SIMPLEX: [usize; 3] = [0, 1, 2];
const FREQ_PHYSICAL: [(usize, usize); 6] = [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3), (0, 2)];
const FREQ_STATES: [NodeState; 4] = [NodeState::US, NodeState::AS, NodeState::AI, NodeState::US];

pub fn frequency_params() -> ModelParams {
    ModelParams {
        lambda: 0.3,
        lambda_star: 0.45,
        delta: 0.35,
        beta_u: 0.5,
        gamma: 0.4,
        mu: 0.25,
        alpha: 5.0,
        theta: 0.4,
        ..ModelParams::default()
    }
}

fn neighbors(edges: &[(usize, usize)], i: usize) -> Vec<usize> {
    edges
        .iter()
        .filter_map(|&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
        .collect()
}

/// Probabilities of ending in (US, AS, AI) after one step, from the tree.
pub fn tree_probabilities(i: usize, p: &ModelParams, exposure: ExposureAwareness) -> [f64; 3] {
    let s = FREQ_STATES[i];
    let aware = |j: usize| FREQ_STATES[j] != NodeState::US;
    let infected = |j: usize| FREQ_STATES[j] == NodeState::AI;

    let cyber = neighbors(&FREQ_CYBER, i);
    let contacts = neighbors(&FREQ_PHYSICAL, i);
    let c1 = cyber.iter().filter(|&&j| aware(j)).count();
    let c2 = if FREQ_SIMPLEX.contains(&i) {
        let others: Vec<usize> = FREQ_SIMPLEX.iter().copied().filter(|&j| j != i).collect();
        (aware(others[0]) && aware(others[1])) as usize
    } else {
        0
    };
    let ci = contacts.iter().filter(|&&j| infected(j)).count();
    let f = ci as f64 / contacts.len() as f64;
    let r = (1.0 - p.lambda).powi(c1 as i32)
        * (1.0 - p.lambda_star).powi(c2 as i32)
        * (1.0 / (1.0 + (p.alpha * (f - p.theta)).exp()));
    let qu = (1.0 - p.beta_u).powi(ci as i32);
    let qa = (1.0 - p.gamma * p.beta_u).powi(ci as i32);
    let (d, mu) = (p.delta, p.mu);

    match s {
        NodeState::AI => [mu * d, mu * (1.0 - d), 1.0 - mu],
        NodeState::US => {
            let gain = 1.0 - r;
            let q_if_aware = match exposure {
                ExposureAwareness::Updated => qa,
                ExposureAwareness::Current => qu,
            };
            [r * qu, gain * q_if_aware, gain * (1.0 - q_if_aware) + r * (1.0 - qu)]
        }
        NodeState::AS => {
            let q_if_forgot = match exposure {
                ExposureAwareness::Updated => qu,
                ExposureAwareness::Current => qa,
            };
            [d * q_if_forgot, (1.0 - d) * qa, d * (1.0 - q_if_forgot) + (1.0 - d) * (1.0 - qa)]
        }
    }
}

/// Runs `trials` independent single steps from the fixed configuration and
/// returns the largest binomial z-score over all nodes and outcomes.
pub fn frequency_check(trials: usize, exposure: ExposureAwareness, seed: u64) -> Check {
    let cyber = CyberLayer::from_parts(4, FREQ_CYBER, [FREQ_SIMPLEX]).unwrap();
    let physical = PhysicalLayer::from_edges(4, FREQ_PHYSICAL);
    let net = MultiplexNetwork::new(cyber, physical).unwrap();
    let params = frequency_params();
    let mut engine = McEngine::new(&net, &params, exposure);
    let mut rng = rng_from_seed(seed);
    let start = McState {
        states: FREQ_STATES.to_vec(),
        t: 0,
    };
    let mut counts = [[0usize; 3]; 4];
    let mut state = start.clone();
    for _ in 0..trials {
        state.states.copy_from_slice(&start.states);
        engine.step(&mut state, &mut rng);
        for (i, s) in state.states.iter().enumerate() {
            let k = match s {
                NodeState::US => 0,
                NodeState::AS => 1,
                NodeState::AI => 2,
            };
            counts[i][k] += 1;
        }
    }
    let n = trials as f64;
    let mut worst = 0.0f64;
    for (i, row) in counts.iter().enumerate() {
        let probs = tree_probabilities(i, &params, exposure);
        for (k, &p) in probs.iter().enumerate() {
            let observed = row[k] as f64;
            let z = if p <= 0.0 || p >= 1.0 {
                // Degenerate outcomes must match exactly.
                if (observed - n * p).abs() < 0.5 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (observed - n * p).abs() / (n * p * (1.0 - p)).sqrt()
            };
            worst = worst.max(z);
        }
    }
    Check { worst, bound: 4.0 }
}

// ---------------------------------------------------------------------------
// Standalone discrete-time SIS.

/// Per-run mean infected fraction over the last `tail` of `steps`
/// synchronous SIS steps.
#[allow(clippy::too_many_arguments)]
pub fn sis_reference(
    edges: &[(usize, usize)],
    n: usize,
    beta: f64,
    mu: f64,
    initial: f64,
    runs: usize,
    steps: usize,
    tail: usize,
    seed: u64,
) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let seeds = ((initial * n as f64) - 1e-9).ceil().max(1.0) as usize;
    (0..runs)
        .map(|r| {
            let mut rng = StdRng::seed_from_u64(seed.wrapping_add(r as u64));
            let mut inf = vec![false; n];
            for i in index::sample(&mut rng, n, seeds) {
                inf[i] = true;
            }
            let mut next = inf.clone();
            let mut acc = 0.0;
            for t in 0..steps {
                for i in 0..n {
                    let u: f64 = rng.random();
                    next[i] = if inf[i] {
                        u >= mu
                    } else {
                        let k = adj[i].iter().filter(|&&j| inf[j]).count();
                        u < 1.0 - (1.0 - beta).powi(k as i32)
                    };
                }
                std::mem::swap(&mut inf, &mut next);
                if t >= steps - tail {
                    acc += inf.iter().filter(|&&x| x).count() as f64 / n as f64;
                }
            }
            acc / tail as f64
        })
        .collect()
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Dense eigensolver and scalar fixed point.

/// Random nonnegative 5×5 matrices with roughly a third of entries zero.
pub fn random_nonnegative(count: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..5)
                .map(|_| {
                    (0..5)
                        .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Largest-modulus eigenvalue from a Schur decomposition.
pub fn dense_spectral_radius(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn eigen_check(count: usize, seed: u64) -> Check {
    let mut worst = 0.0f64;
    for rows in random_nonnegative(count, seed) {
        let want = dense_spectral_radius(&rows);
        let got = dominant_eigenvalue(&CsrMatrix::from_dense(&rows), 1e-15, 1_000_000);
        worst = worst.max((got.value - want).abs() / want.max(1.0));
    }
    Check { worst, bound: 1e-8 }
}

/// Root of `g` on `[lo, hi]` by bisection, assuming a sign change.
pub fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// On a triangle every node sees the same field, so critical awareness
/// reduces to `δP = (1 - (1 - λP)^2 (1 - λ*P^2))(1 - P)`.
pub fn triangle_awareness_check() -> Check {
    let (lambda, lambda_star, delta) = (0.3, 0.2, 0.4);
    let g = |p: f64| {
        let r = (1.0 - lambda * p).powi(2) * (1.0 - lambda_star * p * p);
        (1.0 - r) * (1.0 - p) - delta * p
    };
    let want = bisect(g, 1e-3, 1.0);

    let tri = [(0, 1), (1, 2), (0, 2)];
    let cyber = CyberLayer::from_parts(3, [], [[0, 1, 2]]).unwrap();
    let net = MultiplexNetwork::new(cyber, PhysicalLayer::from_edges(3, tri)).unwrap();
    let params = ModelParams {
        lambda,
        lambda_star,
        delta,
        ..ModelParams::default()
    };
    let got = solve_critical_awareness(&net, &params, 1e-15, 1_000_000);
    let worst = got.p_a.iter().map(|p| (p - want).abs()).fold(0.0, f64::max);
    Check { worst, bound: 1e-8 }
}

// ---------------------------------------------------------------------------
// Conservation and the SIS reduction, packaged for the acceptance report.

/// Iterates MMCA from random states under random parameters and returns the
/// largest normalization error or negative excursion seen after any step.
pub fn conservation_check(cases: usize, steps: usize, seed: u64) -> Check {
    use mpspread::network::{generate_simplicial_er, generate_ws};
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for c in 0..cases {
        let n = 40 + rng.random_range(0..40);
        let physical = generate_ws(n, 4, rng.random(), c as u64).unwrap();
        let cyber = generate_simplicial_er(n, 6.0, 1.5, c as u64 + 1000).unwrap();
        let net = MultiplexNetwork::new(cyber, physical).unwrap();
        let params = ModelParams {
            lambda: rng.random(),
            lambda_star: rng.random(),
            delta: rng.random(),
            beta_u: rng.random(),
            gamma: rng.random(),
            mu: rng.random(),
            alpha: rng.random_range(0.0..20.0),
            theta: rng.random(),
            ..ModelParams::default()
        };
        let mut state = MmcaState {
            p_us: Vec::with_capacity(n),
            p_as: Vec::with_capacity(n),
            p_ai: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let w: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let s: f64 = w.iter().sum();
            state.p_us.push(w[0] / s);
            state.p_as.push(w[1] / s);
            state.p_ai.push(w[2] / s);
        }
        for _ in 0..steps {
            state = mmca_step(&state, &net, &params);
            for i in 0..n {
                let (a, b, d) = (state.p_us[i], state.p_as[i], state.p_ai[i]);
                worst = worst.max((a + b + d - 1.0).abs());
                worst = worst.max(-a.min(b).min(d));
            }
        }
    }
    Check { worst, bound: 1e-10 }
}

/// Engine ensemble with every information channel off and `δ = 1` against
/// [`sis_reference`]; the bound is two ensemble standard deviations.
pub fn sis_reduction_check(runs: usize) -> (Check, f64, f64) {
    use mpspread::mc::{run_ensemble, RunConfig};
    use mpspread::network::generate_ws;
    let physical = generate_ws(1000, 4, 0.5, 7).unwrap();
    let edges: Vec<(usize, usize)> = physical.adjacency().edges().collect();
    let cyber = CyberLayer::from_parts(1000, edges.iter().copied(), []).unwrap();
    let net = MultiplexNetwork::new(cyber, physical).unwrap();
    let params = ModelParams {
        delta: 1.0,
        beta_u: 0.5,
        gamma: 0.3,
        mu: 0.4,
        ..ModelParams::default()
    }
    .with_channels(false, false, false);
    let cfg = RunConfig {
        n_runs: runs,
        seed: 11,
        ..RunConfig::default()
    };
    let engine = run_ensemble(&net, &params, &cfg);
    let reference = sis_reference(&edges, 1000, 0.5, 0.4, 0.01, runs, 1000, 200, 12);
    let (ref_mean, ref_sd) = mean_sd(&reference);
    let check = Check {
        worst: (engine.rho_i_mean - ref_mean).abs(),
        bound: 2.0 * engine.rho_i_sd.max(ref_sd),
    };
    (check, engine.rho_i_mean, ref_mean)
}
