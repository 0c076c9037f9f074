//! The relaxed exit-time energy, its derivatives, and the partition energy.
//!
//! For `phi` in `[0,1]^n` the relaxed energy is `E_eps(phi) = ||u||_1 / n`
//! with `u` solving `(L + eps^{-1} diag(1 - phi)) u = d`. It is strongly
//! convex in the potential, increases when `phi` grows, and converges to the
//! exact mean exit time of `S` as `eps -> 0` when `phi` is the indicator of
//! `S`. The gradient with respect to `phi` is `(u .* v) / (n eps)` with `v`
//! solving the transposed system against the all-ones vector, so it is
//! strictly positive on strongly connected graphs.
//!
//! Partitions are scored by `sum_j [1 + delta * n * E_eps(phi_j)]^{-1}`
//! (smaller is better), evaluated over soft assignments that sum to one at
//! every node. Two older variants, the plain per-class sum of energies and
//! the sum of inverse energies, are intentionally not offered as optimization
//! targets: the former is maximized by a single full class and the latter
//! lacks the curvature structure the rearrangement scheme relies on.

use nalgebra::DMatrix;

use crate::graph::Graph;
use crate::solve::{
    solve_forward_with, solve_regularized_with, RegularizedSystem, SolverOptions,
};
use crate::util::kahan_sum;
use crate::{Error, Result};

/// Hard size gate for dense Hessian assembly.
pub const HESSIAN_SIZE_CAP: usize = 500;

/// `E_eps(phi) = ||u||_1 / n`; only the forward system is solved.
pub fn relaxed_energy(g: &Graph, phi: &[f64], epsilon: f64) -> Result<f64> {
    relaxed_energy_with(g, phi, epsilon, &SolverOptions::default())
}

pub fn relaxed_energy_with(
    g: &Graph,
    phi: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let sys = RegularizedSystem::new(g, phi.to_vec(), epsilon)?;
    let (u, _) = solve_forward_with(&sys, opts)?;
    Ok(kahan_sum(u.into_iter()) / g.n() as f64)
}

/// Gradient of [`relaxed_energy`] with respect to `phi`:
/// `(u .* v) / (n eps)`, strictly positive componentwise.
pub fn energy_gradient(g: &Graph, phi: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    energy_gradient_with(g, phi, epsilon, &SolverOptions::default())
}

pub fn energy_gradient_with(
    g: &Graph,
    phi: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let sys = RegularizedSystem::new(g, phi.to_vec(), epsilon)?;
    let sol = solve_regularized_with(&sys, opts)?;
    let scale = 1.0 / (g.n() as f64 * epsilon);
    Ok(sol
        .u
        .iter()
        .zip(&sol.v)
        .map(|(&u, &v)| scale * u * v)
        .collect())
}

/// Dense Hessian of the potential-coordinate energy `||u||_1`, plus the
/// factor mapping it to `phi` coordinates.
#[derive(Debug, Clone)]
pub struct HessianParts {
    /// `H[j][k] = B_jk u_k v_j + B_kj u_j v_k` with `B = (L + X)^{-1}`.
    pub h_x: DMatrix<f64>,
    /// Hessian of [`relaxed_energy`] in `phi` coordinates is `phi_factor * h_x`.
    pub phi_factor: f64,
}

/// Assemble the dense Hessian; gated to `n <=` [`HESSIAN_SIZE_CAP`] because it
/// exists for verification, not optimization. Its symmetric part is positive
/// definite; on undirected graphs it collapses to `B .* (W + W^T)`.
pub fn energy_hessian(g: &Graph, phi: &[f64], epsilon: f64) -> Result<HessianParts> {
    energy_hessian_with(g, phi, epsilon, &SolverOptions::default())
}

pub fn energy_hessian_with(
    g: &Graph,
    phi: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<HessianParts> {
    let n = g.n();
    if n > HESSIAN_SIZE_CAP {
        return Err(Error::CapExceeded(format!(
            "dense Hessian assembly is capped at {HESSIAN_SIZE_CAP} nodes (graph has {n}); \
             use sampled curvature checks instead"
        )));
    }
    let sys = RegularizedSystem::new(g, phi.to_vec(), epsilon)?;
    let sol = solve_regularized_with(&sys, opts)?;

    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, w) in g.adjacency().row(i) {
            m[(i, j)] = -w;
        }
        m[(i, i)] += g.out_degree()[i] + (1.0 - phi[i]) / epsilon;
    }
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Singular("regularized operator is not invertible".into()))?;

    let mut h = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            h[(j, k)] = inv[(j, k)] * sol.u[k] * sol.v[j] + inv[(k, j)] * sol.u[j] * sol.v[k];
        }
    }
    Ok(HessianParts {
        h_x: h,
        phi_factor: 1.0 / (n as f64 * epsilon * epsilon),
    })
}

/// Partition energy `sum_j [1 + delta * n * E_eps(phi_j)]^{-1}` over a soft
/// assignment: every `phi_j` in `[0,1]^n` and `sum_j phi_j = 1` at each node.
/// A class that is identically one carries the limit value zero of its term.
pub fn partition_energy(g: &Graph, phis: &[Vec<f64>], epsilon: f64, delta: f64) -> Result<f64> {
    partition_energy_with(g, phis, epsilon, delta, &SolverOptions::default())
}

pub fn partition_energy_with(
    g: &Graph,
    phis: &[Vec<f64>],
    epsilon: f64,
    delta: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let n = g.n();
    if phis.is_empty() {
        return Err(Error::Validation("partition energy needs at least one class".into()));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Validation(format!("delta must be positive, got {delta}")));
    }
    for (j, phi) in phis.iter().enumerate() {
        if phi.len() != n {
            return Err(Error::Validation(format!(
                "class {j} has {} entries for {n} nodes",
                phi.len()
            )));
        }
    }
    for v in 0..n {
        let total = kahan_sum(phis.iter().map(|phi| phi[v]));
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "soft assignment sums to {total} at node {v}; classes must partition unit mass"
            )));
        }
    }
    let mut total = 0.0;
    for phi in phis {
        if phi.iter().all(|&p| p == 1.0) {
            continue; // limit term: energy diverges, the term vanishes
        }
        let e = relaxed_energy_with(g, phi, epsilon, opts)?;
        total += partition_term(n as f64 * e, delta);
    }
    Ok(total)
}

/// One summand of the partition energy from the scaled class energy `n * E`.
pub(crate) fn partition_term(scaled_energy: f64, delta: f64) -> f64 {
    1.0 / (1.0 + delta * scaled_energy)
}
