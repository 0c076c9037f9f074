//! Linear solves behind every energy evaluation: the exact exit-time system
//! restricted to a vertex set, and the regularized system
//! `(L + eps^{-1} diag(1 - phi)) u = d` together with its transpose.
//!
//! Both operators have the form `diag(shift) - A` with `shift >= d`, an
//! M-matrix that is irreducibly diagonally dominant whenever the potential is
//! positive somewhere in each escape component. Small systems go through a
//! dense LU with one step of iterative refinement; larger ones use BiCGSTAB
//! with Jacobi preconditioning and fall back to Gauss-Seidel sweeps, which
//! converge unconditionally for this class of matrices.

use nalgebra::{DMatrix, DVector};

use crate::graph::{Graph, SparseMatrix};
use crate::util::kahan_sum;
use crate::{Error, Result};

/// Tolerances and strategy switches for the linear solves.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative residual `||b - Mx|| / ||b||` required of every solve.
    pub tol: f64,
    /// Combined iteration budget for the iterative path.
    pub max_iters: usize,
    /// Systems of at most this many unknowns use the dense direct path.
    pub dense_cutoff: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iters: 10_000,
            dense_cutoff: 256,
        }
    }
}

/// The regularized operator `L + eps^{-1} diag(1 - phi)` bound to a graph.
#[derive(Debug, Clone)]
pub struct RegularizedSystem<'g> {
    graph: &'g Graph,
    phi: Vec<f64>,
    epsilon: f64,
}

impl<'g> RegularizedSystem<'g> {
    /// Validates `0 <= phi <= 1`, `phi` not identically one, and `eps > 0`.
    pub fn new(graph: &'g Graph, phi: Vec<f64>, epsilon: f64) -> Result<Self> {
        if phi.len() != graph.n() {
            return Err(Error::Validation(format!(
                "phi has {} entries for {} nodes",
                phi.len(),
                graph.n()
            )));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Validation(format!("epsilon must be positive, got {epsilon}")));
        }
        let mut all_one = true;
        for (i, &p) in phi.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("phi[{i}] = {p} outside [0, 1]")));
            }
            if p != 1.0 {
                all_one = false;
            }
        }
        if all_one {
            return Err(Error::Singular(
                "phi is identically one: the potential vanishes and L + 0 is singular".into(),
            ));
        }
        Ok(RegularizedSystem { graph, phi, epsilon })
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Diagonal shift `d + eps^{-1}(1 - phi)` of the operator.
    fn shift(&self) -> Vec<f64> {
        let d = self.graph.out_degree();
        self.phi
            .iter()
            .zip(d)
            .map(|(&p, &di)| di + (1.0 - p) / self.epsilon)
            .collect()
    }
}

/// Paired solves of the regularized system and its transpose.
#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    /// Solution of `(L + eps^{-1}(1 - phi)) u = d`.
    pub u: Vec<f64>,
    /// Solution of the transposed system with all-ones right-hand side.
    pub v: Vec<f64>,
    /// Relative residuals of the forward and transpose solves.
    pub residual_norms: [f64; 2],
}

pub fn solve_regularized(sys: &RegularizedSystem) -> Result<RelaxedSolution> {
    solve_regularized_with(sys, &SolverOptions::default())
}

pub fn solve_regularized_with(
    sys: &RegularizedSystem,
    opts: &SolverOptions,
) -> Result<RelaxedSolution> {
    let g = sys.graph();
    let shift = sys.shift();
    let ones = vec![1.0; g.n()];
    let (u, res_u) = solve_shifted(g.adjacency(), &shift, g.out_degree(), opts)?;
    let (v, res_v) = solve_shifted(g.adjacency_transpose(), &shift, &ones, opts)?;
    Ok(RelaxedSolution {
        u,
        v,
        residual_norms: [res_u, res_v],
    })
}

/// Forward solve only; used on energy-only paths where `v` is never needed.
pub(crate) fn solve_forward_with(
    sys: &RegularizedSystem,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let g = sys.graph();
    let shift = sys.shift();
    solve_shifted(g.adjacency(), &shift, g.out_degree(), opts)
}

/// Post-solve sanity gate: both solution vectors strictly positive, as the
/// discrete maximum principle guarantees on strongly connected graphs.
pub fn neumann_bound_check(sys: &RegularizedSystem, sol: &RelaxedSolution) -> bool {
    sol.u.len() == sys.graph().n()
        && sol.v.len() == sys.graph().n()
        && sol.u.iter().all(|&x| x > 0.0)
        && sol.v.iter().all(|&x| x > 0.0)
}

/// Exit times of the exact system: `v` solves `L v = d` on `S`, `v = 0` off
/// `S`, and `tau` is the graph-average of `v`.
#[derive(Debug, Clone)]
pub struct ExitTimes {
    pub exit_times: Vec<f64>,
    pub tau: f64,
}

pub fn solve_exact_met(g: &Graph, set: &[usize]) -> Result<ExitTimes> {
    solve_exact_met_with(g, set, &SolverOptions::default())
}

pub fn solve_exact_met_with(g: &Graph, set: &[usize], opts: &SolverOptions) -> Result<ExitTimes> {
    if !g.is_strongly_connected() {
        log::warn!("graph is not strongly connected; exit times may not exist for every set");
    }
    solve_exact_met_quiet(g, set, opts)
}

/// Same as [`solve_exact_met_with`] without the connectivity warning, for
/// callers that check once and then solve many sets.
pub(crate) fn solve_exact_met_quiet(
    g: &Graph,
    set: &[usize],
    opts: &SolverOptions,
) -> Result<ExitTimes> {
    let n = g.n();
    if set.is_empty() {
        return Err(Error::Validation("exit-time set is empty".into()));
    }
    let mut in_set = vec![false; n];
    for &i in set {
        if i >= n {
            return Err(Error::Validation(format!("node index {i} out of range")));
        }
        if in_set[i] {
            return Err(Error::Validation(format!("node index {i} repeated in set")));
        }
        in_set[i] = true;
    }
    if set.len() == n {
        return Err(Error::Validation("exit-time set must be a proper subset".into()));
    }

    let trapped = g.trapped_in(&in_set);
    if !trapped.is_empty() {
        let shown: Vec<String> = trapped.iter().take(8).map(|&i| g.display_name(i)).collect();
        return Err(Error::Singular(format!(
            "{} node(s) in the set cannot reach its complement (e.g. {}); \
             the restricted system is singular",
            trapped.len(),
            shown.join(", ")
        )));
    }

    // Restrict D - A to the rows and columns of the set; diagonal keeps the
    // full out-degree, so escaping edges show up as row dominance.
    let mut local = vec![usize::MAX; n];
    let mut members: Vec<usize> = set.to_vec();
    members.sort_unstable();
    for (pos, &i) in members.iter().enumerate() {
        local[i] = pos;
    }
    let m = members.len();
    let mut triplets = Vec::new();
    let mut shift = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (pos, &i) in members.iter().enumerate() {
        for (j, w) in g.adjacency().row(i) {
            if local[j] != usize::MAX {
                triplets.push((pos, local[j], w));
            }
        }
        shift.push(g.out_degree()[i]);
        rhs.push(g.out_degree()[i]);
    }
    let sub = SparseMatrix::from_triplets(m, m, &mut triplets);
    let (v_local, _res) = solve_shifted(&sub, &shift, &rhs, opts)?;

    let mut exit_times = vec![0.0; n];
    for (pos, &i) in members.iter().enumerate() {
        exit_times[i] = v_local[pos];
    }
    let tau = kahan_sum(exit_times.iter().copied()) / n as f64;
    Ok(ExitTimes { exit_times, tau })
}

/// Solve `(diag(shift) - A) x = b`, returning the solution and its relative
/// residual. `A` is the adjacency passed in (caller supplies `A` or `A^T`).
pub(crate) fn solve_shifted(
    adj: &SparseMatrix,
    shift: &[f64],
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let n = adj.n_rows();
    debug_assert_eq!(shift.len(), n);
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let diag = shift[i] - adj.diagonal_entry(i);
        if !(diag > 0.0) {
            return Err(Error::Singular(format!(
                "operator diagonal is {diag:.3e} at row {i}"
            )));
        }
    }
    if n <= opts.dense_cutoff {
        solve_dense(adj, shift, b, opts)
    } else {
        solve_iterative(adj, shift, b, opts)
    }
}

fn matvec(adj: &SparseMatrix, shift: &[f64], x: &[f64], y: &mut [f64]) {
    adj.matvec_into(x, y);
    for i in 0..x.len() {
        y[i] = shift[i] * x[i] - y[i];
    }
}

fn rel_residual(adj: &SparseMatrix, shift: &[f64], x: &[f64], b: &[f64], scratch: &mut [f64]) -> f64 {
    matvec(adj, shift, x, scratch);
    let mut rr = 0.0;
    let mut bb = 0.0;
    for i in 0..b.len() {
        let r = b[i] - scratch[i];
        rr += r * r;
        bb += b[i] * b[i];
    }
    (rr / bb).sqrt()
}

fn solve_dense(
    adj: &SparseMatrix,
    shift: &[f64],
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let n = adj.n_rows();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, w) in adj.row(i) {
            m[(i, j)] = -w;
        }
        m[(i, i)] += shift[i];
    }
    let lu = m.clone().lu();
    let rhs = DVector::from_column_slice(b);
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("dense factorization found a zero pivot".into()))?;
    // One round of iterative refinement tightens the residual to near machine
    // precision even for the stiffer small-epsilon systems.
    let r = &rhs - &m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let xs: Vec<f64> = x.iter().copied().collect();
    let mut scratch = vec![0.0; n];
    let res = rel_residual(adj, shift, &xs, b, &mut scratch);
    if !res.is_finite() || res > opts.tol.max(1e-9) {
        return Err(Error::SolverStalled {
            residual: res,
            iterations: 0,
        });
    }
    Ok((xs, res))
}

fn solve_iterative(
    adj: &SparseMatrix,
    shift: &[f64],
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let n = adj.n_rows();
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| 1.0 / (shift[i] - adj.diagonal_entry(i)))
        .collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], 0.0));
    }

    let mut x = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut used = 0usize;

    match bicgstab(adj, shift, b, &inv_diag, &mut x, opts, &mut used) {
        BicgOutcome::Converged => {
            let res = rel_residual(adj, shift, &x, b, &mut scratch);
            if res <= opts.tol {
                return Ok((x, res));
            }
        }
        BicgOutcome::Breakdown | BicgOutcome::Budget => {}
    }

    // Gauss-Seidel rescue: provably convergent here, if slower.
    if x.iter().any(|v| !v.is_finite()) {
        x.fill(0.0);
    }
    let mut res = rel_residual(adj, shift, &x, b, &mut scratch);
    while used < opts.max_iters {
        for _ in 0..16 {
            gauss_seidel_sweep(adj, b, &inv_diag, &mut x);
            used += 1;
        }
        res = rel_residual(adj, shift, &x, b, &mut scratch);
        if res <= opts.tol {
            return Ok((x, res));
        }
    }
    Err(Error::SolverStalled {
        residual: res,
        iterations: used,
    })
}

enum BicgOutcome {
    Converged,
    Breakdown,
    Budget,
}

fn bicgstab(
    adj: &SparseMatrix,
    shift: &[f64],
    b: &[f64],
    inv_diag: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
    used: &mut usize,
) -> BicgOutcome {
    let n = b.len();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = opts.tol * b_norm;
    let tiny = 1e-300;

    let mut r: Vec<f64> = b.to_vec();
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];

    let budget = opts.max_iters / 2;
    for _ in 0..budget {
        *used += 1;
        let rho_new: f64 = r_hat.iter().zip(&r).map(|(a, b)| a * b).sum();
        if rho_new.abs() < tiny || !rho_new.is_finite() {
            return BicgOutcome::Breakdown;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            p_hat[i] = p[i] * inv_diag[i];
        }
        matvec(adj, shift, &p_hat, &mut v);
        let denom: f64 = r_hat.iter().zip(&v).map(|(a, b)| a * b).sum();
        if denom.abs() < tiny || !denom.is_finite() {
            return BicgOutcome::Breakdown;
        }
        alpha = rho_new / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        if s_norm <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return BicgOutcome::Converged;
        }
        for i in 0..n {
            s_hat[i] = s[i] * inv_diag[i];
        }
        matvec(adj, shift, &s_hat, &mut t);
        let tt: f64 = t.iter().map(|v| v * v).sum();
        if tt < tiny || !tt.is_finite() {
            return BicgOutcome::Breakdown;
        }
        omega = t.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / tt;
        if omega.abs() < tiny || !omega.is_finite() {
            return BicgOutcome::Breakdown;
        }
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !r_norm.is_finite() {
            return BicgOutcome::Breakdown;
        }
        if r_norm <= target {
            return BicgOutcome::Converged;
        }
        rho = rho_new;
    }
    BicgOutcome::Budget
}

fn gauss_seidel_sweep(adj: &SparseMatrix, b: &[f64], inv_diag: &[f64], x: &mut [f64]) {
    for i in 0..b.len() {
        let mut acc = b[i];
        for (j, w) in adj.row(i) {
            if j != i {
                acc += w * x[j];
            }
        }
        x[i] = acc * inv_diag[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LoadOptions;
    use std::io::Cursor;

    fn pair() -> Graph {
        Graph::from_edge_list(Cursor::new("a b 1\nb a 1\n"), &LoadOptions::default()).unwrap()
    }

    fn cycle3() -> Graph {
        Graph::from_weighted_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], None).unwrap()
    }

    fn path3() -> Graph {
        let edges = [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)];
        Graph::from_weighted_edges(3, &edges, None).unwrap()
    }

    #[test]
    fn pair_closed_form_solution() {
        let g = pair();
        for &eps in &[1.0, 0.1, 1e-3] {
            let sys = RegularizedSystem::new(&g, vec![1.0, 0.0], eps).unwrap();
            let sol = solve_regularized(&sys).unwrap();
            assert!((sol.u[0] - (1.0 + 2.0 * eps)).abs() < 1e-12 * (1.0 + 2.0 * eps));
            assert!((sol.u[1] - 2.0 * eps).abs() < 1e-12);
            assert!(neumann_bound_check(&sys, &sol));
        }
    }

    #[test]
    fn all_ones_phi_rejected() {
        let g = cycle3();
        let err = RegularizedSystem::new(&g, vec![1.0; 3], 0.5).unwrap_err();
        assert!(matches!(err, Error::Singular(_)), "{err}");
    }

    #[test]
    fn phi_out_of_range_rejected() {
        let g = cycle3();
        assert!(RegularizedSystem::new(&g, vec![0.5, 1.2, 0.0], 0.5).is_err());
        assert!(RegularizedSystem::new(&g, vec![0.5, 0.2, 0.0], -1.0).is_err());
    }

    #[test]
    fn bound_check_fires_on_injected_negative() {
        let g = pair();
        let sys = RegularizedSystem::new(&g, vec![1.0, 0.0], 0.1).unwrap();
        let mut sol = solve_regularized(&sys).unwrap();
        assert!(neumann_bound_check(&sys, &sol));
        sol.v[1] = -1e-9;
        assert!(!neumann_bound_check(&sys, &sol));
    }

    #[test]
    fn exact_met_two_node_pair() {
        let g = pair();
        let r = solve_exact_met(&g, &[0]).unwrap();
        assert_eq!(r.exit_times, vec![1.0, 0.0]);
        assert!((r.tau - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_met_directed_cycle() {
        let g = cycle3();
        let r = solve_exact_met(&g, &[0, 1]).unwrap();
        assert!((r.exit_times[0] - 2.0).abs() < 1e-12);
        assert!((r.exit_times[1] - 1.0).abs() < 1e-12);
        assert_eq!(r.exit_times[2], 0.0);
        assert!((r.tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_met_path_graph() {
        let g = path3();
        let r = solve_exact_met(&g, &[0, 1]).unwrap();
        assert!((r.exit_times[0] - 4.0).abs() < 1e-12);
        assert!((r.exit_times[1] - 3.0).abs() < 1e-12);
        assert!((r.tau - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_met_rejects_full_and_empty_sets() {
        let g = cycle3();
        assert!(solve_exact_met(&g, &[]).is_err());
        assert!(solve_exact_met(&g, &[0, 1, 2]).is_err());
    }

    #[test]
    fn trapped_set_reports_singular() {
        // 0 -> 1 -> 2 -> 0 plus an entry edge 3 -> 0; {0,1,2} never reaches 3.
        let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (3, 0, 1.0)];
        let g = Graph::from_weighted_edges(4, &edges, None).unwrap();
        let err = solve_exact_met(&g, &[0, 1, 2]).unwrap_err();
        match err {
            Error::Singular(msg) => assert!(msg.contains("cannot reach"), "{msg}"),
            other => panic!("expected singular, got {other}"),
        }
    }

    #[test]
    fn transpose_duality_of_paired_solves() {
        for seed in 0..20u64 {
            let g = crate::synth::random_strongly_connected(40, 0.15, seed);
            let phi: Vec<f64> = (0..g.n()).map(|i| if i < 10 { 1.0 } else { 0.3 }).collect();
            let sys = RegularizedSystem::new(&g, phi, 0.25).unwrap();
            let sol = solve_regularized(&sys).unwrap();
            let lhs = kahan_sum(sol.u.iter().copied());
            let rhs = kahan_sum(sol.v.iter().zip(g.out_degree()).map(|(v, d)| v * d));
            assert!(
                (lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0),
                "duality gap {}",
                lhs - rhs
            );
        }
    }

    #[test]
    fn iterative_path_matches_dense_path() {
        let g = crate::synth::random_strongly_connected(300, 0.05, 11);
        let phi: Vec<f64> = (0..g.n()).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let sys = RegularizedSystem::new(&g, phi, 0.05).unwrap();
        let dense_opts = SolverOptions {
            dense_cutoff: 1024,
            ..Default::default()
        };
        let iter_opts = SolverOptions {
            dense_cutoff: 0,
            ..Default::default()
        };
        let a = solve_regularized_with(&sys, &dense_opts).unwrap();
        let b = solve_regularized_with(&sys, &iter_opts).unwrap();
        let scale = a.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..g.n() {
            assert!((a.u[i] - b.u[i]).abs() <= 1e-7 * scale);
        }
        assert!(b.residual_norms[0] <= 1e-10);
        assert!(b.residual_norms[1] <= 1e-10);
    }

    #[test]
    fn positivity_on_random_instances() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        for seed in 0..30u64 {
            let g = crate::synth::random_strongly_connected(50, 0.1, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
            let phi: Vec<f64> = (0..g.n()).map(|_| rng.random_range(0.0..1.0)).collect();
            let sys = RegularizedSystem::new(&g, phi, 0.1).unwrap();
            let sol = solve_regularized(&sys).unwrap();
            assert!(neumann_bound_check(&sys, &sol), "seed {seed}");
        }
    }
}
