//! Outbreak threshold `β_c = μ / λ_max(M)`, where `M` is the physical
//! adjacency with every column scaled by how much awareness shields that
//! node near the critical point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{r1, r2, ModelParams, NeighborField};
use crate::network::{MultiplexNetwork, PhysicalLayer};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50_000;

/// Awareness probabilities at the critical point, where infection is
/// vanishing and sensing contributes nothing (`r3 ≈ 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalAwareness {
    pub p_a: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Solves `P = (1-δ) P + (1 - r1 r2)(1 - P)` per node by fixed-point
/// iteration from `P = 0.5`.
///
/// Starting away from zero matters: above the information threshold the
/// zero solution is unstable and the iteration leaves it for the
/// nontrivial one, below it zero is the only fixed point.
pub fn solve_critical_awareness(
    net: &MultiplexNetwork,
    params: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> CriticalAwareness {
    let n = net.node_count();
    let mut p_a = vec![0.5; n];
    let mut next = vec![0.0; n];
    let zeros = vec![0.0; n];
    let delta = params.delta;
    for it in 1..=max_iter {
        let field = NeighborField::new(&p_a, &zeros);
        let mut change = 0.0f64;
        for i in 0..n {
            let r = r1(i, &net.cyber, &field, params) * r2(i, &net.cyber, &field, params);
            let p = p_a[i];
            let v = (1.0 - delta) * p + (1.0 - r) * (1.0 - p);
            change = change.max((v - p).abs());
            next[i] = v;
        }
        std::mem::swap(&mut p_a, &mut next);
        if change < tol {
            return CriticalAwareness {
                p_a,
                converged: true,
                iterations: it,
            };
        }
    }
    CriticalAwareness {
        p_a,
        converged: false,
        iterations: max_iter,
    }
}

/// Square sparse matrix in row-compressed form.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            assert_eq!(row.len(), n, "matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        match cols.binary_search(&col) {
            Ok(k) => self.values[self.row_ptr[row] + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (r, row) in out.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row[self.col_idx[k]] = self.values[k];
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }
}

/// `m_ji = [1 - (1-γ) P_i^A] b_ji`: entry (row `j`, column `i`) is the link
/// `j–i` weighted by node `i`'s awareness factor.
pub fn build_m_matrix(net: &PhysicalLayer, p_a: &CriticalAwareness, gamma: f64) -> CsrMatrix {
    let n = net.node_count();
    let factor: Vec<f64> = p_a.p_a.iter().map(|&p| 1.0 - (1.0 - gamma) * p).collect();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for j in 0..n {
        for &i in net.neighbors(j) {
            col_idx.push(i);
            values.push(factor[i]);
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the iterate collapsed to zero (e.g. the zero matrix).
    pub degenerate: bool,
}

/// Perron root of a nonnegative matrix by power iteration.
///
/// The iteration runs on `M + σI` with `σ` half the mean row sum, which
/// leaves the Perron vector unchanged but separates `λ` from `-λ` on
/// bipartite structure, where plain power iteration oscillates. Iterates are
/// max-norm normalized; the reported value is the Rayleigh quotient of `M`
/// itself, and iteration stops once it moves by less than `tol`.
pub fn dominant_eigenvalue(m: &CsrMatrix, tol: f64, max_iter: usize) -> EigenEstimate {
    debug_assert!(m.is_nonnegative(), "power iteration expects a nonnegative matrix");
    let n = m.dim();
    let zero = EigenEstimate {
        value: 0.0,
        iterations: 0,
        converged: true,
        degenerate: true,
    };
    if n == 0 || m.nnz() == 0 {
        return zero;
    }
    let shift = 0.5 * m.values.iter().sum::<f64>() / n as f64;
    let mut x = vec![1.0; n];
    let mut mx = vec![0.0; n];
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        m.matvec(&x, &mut mx);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let xmx: f64 = x.iter().zip(&mx).map(|(a, b)| a * b).sum();
        let rayleigh = xmx / xx;

        let mut norm = 0.0f64;
        for (xi, &mxi) in x.iter_mut().zip(&mx) {
            *xi = mxi + shift * *xi;
            norm = norm.max(xi.abs());
        }
        if norm == 0.0 || !norm.is_finite() {
            return EigenEstimate {
                iterations: it,
                ..zero
            };
        }
        x.iter_mut().for_each(|v| *v /= norm);

        if (rayleigh - prev).abs() < tol {
            return EigenEstimate {
                value: rayleigh,
                iterations: it,
                converged: true,
                degenerate: false,
            };
        }
        prev = rayleigh;
    }
    EigenEstimate {
        value: prev,
        iterations: max_iter,
        converged: false,
        degenerate: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// `μ / λ_max`, or `+∞` when `λ_max = 0` (no transmission path).
    pub beta_c: f64,
    pub lambda_max: f64,
    pub power_iters: usize,
    pub awareness_converged: bool,
    pub eigen_converged: bool,
}

impl ThresholdResult {
    pub fn is_unbounded(&self) -> bool {
        self.beta_c.is_infinite()
    }
}

/// Critical awareness, then `M`, then its Perron root.
pub fn epidemic_threshold(net: &MultiplexNetwork, params: &ModelParams) -> Result<ThresholdResult> {
    epidemic_threshold_with(net, params, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn epidemic_threshold_with(
    net: &MultiplexNetwork,
    params: &ModelParams,
    tol: f64,
    max_iter: usize,
) -> Result<ThresholdResult> {
    if params.mu.is_nan() || params.mu <= 0.0 {
        return Err(Error::param("mu", format!("threshold needs mu > 0, got {}", params.mu)));
    }
    let awareness = solve_critical_awareness(net, params, tol, max_iter);
    let m = build_m_matrix(&net.physical, &awareness, params.gamma);
    let eig = dominant_eigenvalue(&m, tol, max_iter);
    let beta_c = if eig.degenerate || eig.value <= 0.0 {
        log::info!("dominant eigenvalue is zero: no outbreak threshold (reported as +inf)");
        f64::INFINITY
    } else {
        params.mu / eig.value
    };
    Ok(ThresholdResult {
        beta_c,
        lambda_max: eig.value,
        power_iters: eig.iterations,
        awareness_converged: awareness.converged,
        eigen_converged: eig.converged,
    })
}
