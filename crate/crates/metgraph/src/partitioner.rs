//! K-way rearrangement on the partition energy
//! `sum_j [1 + eps * n * E_eps(phi_j)]^{-1}` (minimized). Each round solves
//! the class systems, rescales `u_j` by `(1 + eps ||u_j||_1)^{-2}`, and moves
//! every node to the class with the largest `u_j * v_j` score; that score is
//! exactly the magnitude of the partition-energy gradient entry, so the
//! energy is non-increasing along the iteration.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::partition_term;
use crate::graph::Graph;
use crate::solve::{
    solve_forward_with, solve_regularized_with, RegularizedSystem, SolverOptions,
};
use crate::util::{derive_seed, kahan_sum};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum InitStrategy {
    /// Independent uniform class per node.
    Random,
    /// K-means over the first K eigenvectors of the symmetrized Laplacian.
    SpectralKmeans,
    /// Caller-provided labels, used as-is by every restart.
    Given(Vec<usize>),
}

/// Per-class labeled node sets with clamp strength `lambda`.
#[derive(Debug, Clone)]
pub struct PartitionSupervision {
    pub class_nodes: Vec<Vec<usize>>,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct PartitionerConfig {
    /// Number of classes, `2 <= K <= n`.
    pub k_classes: usize,
    /// Scale constant; the solver runs at `eps = C * nu / ||L||_F`.
    pub epsilon_scale: f64,
    /// Scale multiplier swept by [`epsilon_sweep`].
    pub nu: f64,
    pub restarts: usize,
    /// Cap on solve rounds per restart.
    pub max_iters: usize,
    pub init: InitStrategy,
    pub seed: u64,
    pub supervision: Option<PartitionSupervision>,
    /// Re-seed classes that empty out with a random node from the largest
    /// class instead of leaving them empty.
    pub reseed_empty: bool,
    pub solver: SolverOptions,
}

impl PartitionerConfig {
    pub fn new(k_classes: usize) -> Self {
        PartitionerConfig {
            k_classes,
            epsilon_scale: 50.0,
            nu: 1.0,
            restarts: 5,
            max_iters: 100,
            init: InitStrategy::Random,
            seed: 0,
            supervision: None,
            reseed_empty: false,
            solver: SolverOptions::default(),
        }
    }
}

/// Hard partition produced by the best restart.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Class of every node, in `0..K`.
    pub labels: Vec<usize>,
    /// Scaled class energies `n * E_eps(chi_j)` at the final labels. Empty
    /// classes carry the empty-indicator energy and are listed separately.
    pub class_energies: Vec<f64>,
    /// Final value of the optimized objective (partition energy, minus the
    /// label reward when supervision is present).
    pub energy: f64,
    /// Objective per solve round; on convergence the final value repeats once.
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Classes with no members in the final labels.
    pub empty_classes: Vec<usize>,
    /// True when all but one class emptied out and the run aborted.
    pub degenerate: bool,
    /// Purity against reference labels; filled by callers that have metadata.
    pub purity: Option<f64>,
    pub epsilon: f64,
    pub restart: usize,
}

pub fn partition(g: &Graph, cfg: &PartitionerConfig) -> Result<Partition> {
    let n = g.n();
    if cfg.k_classes < 2 || cfg.k_classes > n {
        return Err(Error::Validation(format!(
            "class count {} must satisfy 2 <= K <= n = {n}",
            cfg.k_classes
        )));
    }
    if !(cfg.epsilon_scale.is_finite() && cfg.epsilon_scale > 0.0)
        || !(cfg.nu.is_finite() && cfg.nu > 0.0)
    {
        return Err(Error::Validation("epsilon scale and nu must be positive".into()));
    }
    if cfg.restarts == 0 || cfg.max_iters == 0 {
        return Err(Error::Validation("restarts and max_iters must be positive".into()));
    }
    let label_of = match &cfg.supervision {
        Some(sup) => Some(validate_supervision(sup, n, cfg.k_classes)?),
        None => None,
    };
    if let InitStrategy::Given(labels) = &cfg.init {
        if labels.len() != n || labels.iter().any(|&l| l >= cfg.k_classes) {
            return Err(Error::Validation("initial labels malformed".into()));
        }
    }
    if !g.is_strongly_connected() {
        log::warn!("graph is not strongly connected; exit-time partitioning may be ill-posed");
    }
    let epsilon = cfg.epsilon_scale * cfg.nu / g.laplacian_frobenius();

    let runs: Vec<PartitionRun> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(g, cfg, epsilon, label_of.as_deref(), r))
        .collect::<Result<Vec<_>>>()?;

    let (restart, run) = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.final_energy().total_cmp(&b.final_energy()).then(ia.cmp(ib)))
        .expect("at least one restart");

    let empty_classes: Vec<usize> = (0..cfg.k_classes)
        .filter(|&c| !run.labels.iter().any(|&l| l == c))
        .collect();
    Ok(Partition {
        energy: run.final_energy(),
        labels: run.labels,
        class_energies: run.class_energies,
        energy_trace: run.trace,
        iterations: run.iterations,
        converged: run.converged,
        empty_classes,
        degenerate: run.degenerate,
        purity: None,
        epsilon,
        restart,
    })
}

/// Semi-supervised partitioning; requires supervision in the config.
pub fn partition_ssl(g: &Graph, cfg: &PartitionerConfig) -> Result<Partition> {
    if cfg.supervision.is_none() {
        return Err(Error::Validation("partition_ssl requires supervision".into()));
    }
    partition(g, cfg)
}

struct PartitionRun {
    labels: Vec<usize>,
    class_energies: Vec<f64>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    degenerate: bool,
}

impl PartitionRun {
    fn final_energy(&self) -> f64 {
        *self.trace.last().expect("at least one solve round")
    }
}

fn run_restart(
    g: &Graph,
    cfg: &PartitionerConfig,
    epsilon: f64,
    label_of: Option<&[Option<usize>]>,
    restart: usize,
) -> Result<PartitionRun> {
    let n = g.n();
    let k = cfg.k_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, restart as u64));
    let mut labels: Vec<usize> = match &cfg.init {
        InitStrategy::Random => (0..n).map(|_| rng.random_range(0..k)).collect(),
        InitStrategy::SpectralKmeans => {
            spectral_kmeans_init(g, k, derive_seed(cfg.seed, restart as u64))?
        }
        InitStrategy::Given(init) => init.clone(),
    };

    let lambda = cfg.supervision.as_ref().map(|s| s.lambda).unwrap_or(0.0);
    let mut prev: Option<Vec<usize>> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut degenerate = false;
    let mut class_energies = vec![0.0; k];
    let mut empty_energy: Option<f64> = None;

    loop {
        let members = class_members(&labels, k);
        if members.iter().any(|m| m.len() == n) {
            degenerate = true;
            if trace.is_empty() {
                trace.push(f64::INFINITY);
            }
            break;
        }

        // Per-class paired solves; classes are independent systems.
        let solved: Vec<Option<(Vec<f64>, Vec<f64>, f64)>> = members
            .par_iter()
            .map(|nodes| -> Result<Option<(Vec<f64>, Vec<f64>, f64)>> {
                if nodes.is_empty() {
                    return Ok(None);
                }
                let mut phi = vec![0.0; n];
                for &i in nodes {
                    phi[i] = 1.0;
                }
                let sys = RegularizedSystem::new(g, phi, epsilon)?;
                let sol = solve_regularized_with(&sys, &cfg.solver)?;
                let scaled = kahan_sum(sol.u.iter().copied());
                Ok(Some((sol.u, sol.v, scaled)))
            })
            .collect::<Result<Vec<_>>>()?;

        if solved.iter().any(|s| s.is_none()) && empty_energy.is_none() {
            let sys = RegularizedSystem::new(g, vec![0.0; n], epsilon)?;
            let (u0, _) = solve_forward_with(&sys, &cfg.solver)?;
            empty_energy = Some(kahan_sum(u0.into_iter()));
        }

        let mut objective = 0.0;
        for (c, entry) in solved.iter().enumerate() {
            let scaled = match entry {
                Some((_, _, scaled)) => *scaled,
                None => empty_energy.expect("computed above"),
            };
            class_energies[c] = scaled;
            objective += partition_term(scaled, epsilon);
        }
        if let Some(label_of) = label_of {
            objective -= lambda * label_reward(&labels, label_of);
        }
        trace.push(objective);

        if trace.len() >= cfg.max_iters {
            break;
        }

        let next = assign(
            &solved,
            label_of,
            lambda,
            epsilon,
            n,
            k,
            &mut rng,
            cfg.reseed_empty,
        );
        if next == labels {
            trace.push(objective);
            converged = true;
            break;
        }
        if prev.as_ref() == Some(&next) {
            break; // two-cycle: stop without claiming convergence
        }
        prev = Some(std::mem::replace(&mut labels, next));
    }

    let iterations = trace.len() - usize::from(converged);
    Ok(PartitionRun {
        labels,
        class_energies,
        trace,
        iterations,
        converged,
        degenerate,
    })
}

fn class_members(labels: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members
}

/// Count of labeled nodes sitting in their labeled class.
fn label_reward(labels: &[usize], label_of: &[Option<usize>]) -> f64 {
    labels
        .iter()
        .zip(label_of)
        .filter(|(&l, wanted)| **wanted == Some(l))
        .count() as f64
}

#[allow(clippy::too_many_arguments)]
fn assign(
    solved: &[Option<(Vec<f64>, Vec<f64>, f64)>],
    label_of: Option<&[Option<usize>]>,
    lambda: f64,
    epsilon: f64,
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
    reseed_empty: bool,
) -> Vec<usize> {
    let scales: Vec<Option<f64>> = solved
        .iter()
        .map(|e| {
            e.as_ref().map(|(_, _, scaled)| {
                let denom = 1.0 + epsilon * scaled;
                1.0 / (denom * denom)
            })
        })
        .collect();

    let mut labels = vec![0usize; n];
    let mut tied: Vec<usize> = Vec::with_capacity(k);
    for v in 0..n {
        let mut best = f64::NEG_INFINITY;
        tied.clear();
        for c in 0..k {
            let mut score = match (&solved[c], scales[c]) {
                (Some((u, w, _)), Some(scale)) => u[v] * w[v] * scale,
                _ => f64::NEG_INFINITY,
            };
            if lambda > 0.0 {
                if let Some(label_of) = label_of {
                    if let Some(wanted) = label_of[v] {
                        score += if wanted == c { 2.0 * lambda } else { -2.0 * lambda };
                    }
                }
            }
            if score > best {
                best = score;
                tied.clear();
                tied.push(c);
            } else if score == best {
                tied.push(c);
            }
        }
        labels[v] = if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.random_range(0..tied.len())]
        };
    }

    if reseed_empty {
        let mut members = class_members(&labels, k);
        for c in 0..k {
            if members[c].is_empty() {
                let donor = (0..k).max_by_key(|&d| members[d].len()).expect("k >= 2");
                if members[donor].len() > 1 {
                    let pick = members[donor][rng.random_range(0..members[donor].len())];
                    labels[pick] = c;
                    members[donor].retain(|&x| x != pick);
                    members[c].push(pick);
                }
            }
        }
    }
    labels
}

fn validate_supervision(
    sup: &PartitionSupervision,
    n: usize,
    k: usize,
) -> Result<Vec<Option<usize>>> {
    if sup.class_nodes.len() != k {
        return Err(Error::Validation(format!(
            "supervision lists {} classes for K = {k}",
            sup.class_nodes.len()
        )));
    }
    if !(sup.lambda.is_finite() && sup.lambda >= 0.0) {
        return Err(Error::Validation(format!("lambda must be nonnegative, got {}", sup.lambda)));
    }
    let mut label_of: Vec<Option<usize>> = vec![None; n];
    for (c, nodes) in sup.class_nodes.iter().enumerate() {
        for &v in nodes {
            if v >= n {
                return Err(Error::Validation(format!("labeled node {v} out of range")));
            }
            if let Some(other) = label_of[v] {
                if other != c {
                    return Err(Error::Validation(format!(
                        "node {v} labeled into classes {other} and {c}"
                    )));
                }
            }
            label_of[v] = Some(c);
        }
    }
    Ok(label_of)
}

/// K-means over the first K eigenvectors of the symmetrized Laplacian
/// `(L + L^T) / 2`. Falls back to random labels with a warning if the
/// eigensolver gives up or the graph is too large for a dense decomposition.
pub fn spectral_kmeans_init(g: &Graph, k_classes: usize, seed: u64) -> Result<Vec<usize>> {
    let n = g.n();
    if k_classes == 0 || k_classes > n {
        return Err(Error::Validation(format!(
            "class count {k_classes} must satisfy 1 <= K <= n = {n}"
        )));
    }
    if k_classes == 1 {
        return Ok(vec![0; n]);
    }
    const DENSE_EIGEN_CAP: usize = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5eed));
    if n > DENSE_EIGEN_CAP {
        log::warn!("graph too large for dense spectral init ({n} nodes); using random labels");
        return Ok((0..n).map(|_| rng.random_range(0..k_classes)).collect());
    }
    let lap = g.laplacian().to_dense();
    let sym = (&lap + lap.transpose()) * 0.5;
    let eig = match nalgebra::SymmetricEigen::try_new(sym, 1e-12, 10_000) {
        Some(e) => e,
        None => {
            log::warn!("eigendecomposition did not converge; using random labels");
            return Ok((0..n).map(|_| rng.random_range(0..k_classes)).collect());
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut points = vec![vec![0.0; k_classes]; n];
    for (dim, &col) in order.iter().take(k_classes).enumerate() {
        for v in 0..n {
            points[v][dim] = eig.eigenvectors[(v, col)];
        }
    }
    Ok(kmeans(&points, k_classes, &mut rng))
}

/// Lloyd's algorithm with k-means++ seeding; empty clusters are re-seeded
/// with the point farthest from its center.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let dim = points[0].len();
    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, centers.last().unwrap()));
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b])))
                .unwrap();
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for d in 0..dim {
                sums[labels[i]][d] += p[d];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist2(&points[a], &centers[labels[a]])
                            .total_cmp(&dist2(&points[b], &centers[labels[b]]))
                    })
                    .unwrap();
                labels[far] = c;
                centers[c] = points[far].clone();
                changed = true;
            } else {
                for d in 0..dim {
                    centers[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// One partitioner run per scale multiplier.
#[derive(Debug, Clone)]
pub struct EpsilonSweepRow {
    pub ell: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub purity: f64,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Sweep the scale multiplier `nu = exp(0.2 * ell)` over the given exponents,
/// reporting best-restart purity against the reference labels at each scale.
pub fn epsilon_sweep(
    g: &Graph,
    cfg: &PartitionerConfig,
    ells: &[f64],
    reference: &[Option<usize>],
) -> Result<Vec<EpsilonSweepRow>> {
    let mut rows = Vec::with_capacity(ells.len());
    for &ell in ells {
        let mut local = cfg.clone();
        local.nu = (0.2 * ell).exp();
        let p = partition(g, &local)?;
        let purity = crate::metrics::purity(&p.labels, reference)?;
        rows.push(EpsilonSweepRow {
            ell,
            nu: local.nu,
            epsilon: p.epsilon,
            purity,
            energy: p.energy,
            iterations: p.iterations,
            converged: p.converged,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_mickee, random_strongly_connected, two_triangles_bridge, MickeeSpec};

    fn triangle_reference() -> Vec<Option<usize>> {
        vec![Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)]
    }

    #[test]
    fn splits_bridged_triangles() {
        let g = two_triangles_bridge(0.01);
        let mut cfg = PartitionerConfig::new(2);
        cfg.seed = 3;
        let p = partition(&g, &cfg).unwrap();
        assert!(p.converged);
        assert!(!p.degenerate);
        let purity = crate::metrics::purity(&p.labels, &triangle_reference()).unwrap();
        assert_eq!(purity, 1.0);
        // The oracle confirms the triangle split minimizes the energy.
        let oracle = crate::oracle::brute_force_best_partition(&g, 2, p.epsilon).unwrap();
        let agree = p.labels == oracle
            || p
                .labels
                .iter()
                .zip(&oracle)
                .all(|(&a, &b)| a == 1 - b);
        assert!(agree, "{:?} vs {oracle:?}", p.labels);
    }

    #[test]
    fn pair_graph_puts_each_node_alone() {
        let g = crate::Graph::from_weighted_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)], None).unwrap();
        let mut cfg = PartitionerConfig::new(2);
        cfg.restarts = 4;
        cfg.seed = 1;
        let p = partition(&g, &cfg).unwrap();
        assert!(!p.degenerate);
        assert_ne!(p.labels[0], p.labels[1]);
    }

    #[test]
    fn energy_trace_is_non_increasing() {
        for seed in 0..10u64 {
            let g = random_strongly_connected(40, 0.15, seed ^ 0xaa);
            let mut cfg = PartitionerConfig::new(3);
            cfg.restarts = 1;
            cfg.seed = seed;
            let p = partition(&g, &cfg).unwrap();
            for w in p.energy_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "seed {seed}: trace {:?}", p.energy_trace);
            }
        }
    }

    #[test]
    fn empty_class_stays_empty_and_is_flagged() {
        let g = two_triangles_bridge(0.05);
        let mut cfg = PartitionerConfig::new(3);
        cfg.restarts = 1;
        cfg.init = InitStrategy::Given(vec![0, 0, 0, 1, 1, 1]); // class 2 unused
        let p = partition(&g, &cfg).unwrap();
        assert_eq!(p.empty_classes, vec![2]);
        assert!(p.labels.iter().all(|&l| l < 2));
    }

    #[test]
    fn reseed_empty_fills_the_class() {
        let g = two_triangles_bridge(0.05);
        let mut cfg = PartitionerConfig::new(3);
        cfg.restarts = 1;
        cfg.reseed_empty = true;
        cfg.init = InitStrategy::Given(vec![0, 0, 0, 1, 1, 1]);
        let p = partition(&g, &cfg).unwrap();
        assert!(p.empty_classes.is_empty(), "labels {:?}", p.labels);
    }

    #[test]
    fn label_permutation_equivariance() {
        let g = random_strongly_connected(18, 0.25, 40);
        let init: Vec<usize> = (0..18).map(|i| i % 3).collect();
        let swapped: Vec<usize> = init.iter().map(|&l| [1, 0, 2][l]).collect();
        let mut cfg = PartitionerConfig::new(3);
        cfg.restarts = 1;
        cfg.seed = 8;
        cfg.init = InitStrategy::Given(init);
        let a = partition(&g, &cfg).unwrap();
        cfg.init = InitStrategy::Given(swapped);
        let b = partition(&g, &cfg).unwrap();
        let mapped: Vec<usize> = a.labels.iter().map(|&l| [1, 0, 2][l]).collect();
        assert_eq!(mapped, b.labels);
    }

    #[test]
    fn ssl_zero_lambda_matches_unsupervised() {
        let g = random_strongly_connected(24, 0.2, 5);
        let mut cfg = PartitionerConfig::new(3);
        cfg.seed = 12;
        let plain = partition(&g, &cfg).unwrap();
        cfg.supervision = Some(PartitionSupervision {
            class_nodes: vec![vec![0, 1], vec![2], vec![3]],
            lambda: 0.0,
        });
        let ssl = partition_ssl(&g, &cfg).unwrap();
        assert_eq!(plain.labels, ssl.labels);
    }

    #[test]
    fn ssl_full_labels_clamp_exactly() {
        let g = random_strongly_connected(21, 0.2, 6);
        let wanted: Vec<usize> = (0..21).map(|i| i % 3).collect();
        let mut class_nodes = vec![Vec::new(); 3];
        for (i, &c) in wanted.iter().enumerate() {
            class_nodes[c].push(i);
        }
        let mut cfg = PartitionerConfig::new(3);
        cfg.seed = 77;
        cfg.supervision = Some(PartitionSupervision {
            class_nodes,
            lambda: 1e6,
        });
        let p = partition_ssl(&g, &cfg).unwrap();
        assert_eq!(p.labels, wanted);
        assert!(p.converged);
    }

    #[test]
    fn ssl_conflicting_labels_rejected() {
        let g = random_strongly_connected(10, 0.3, 0);
        let mut cfg = PartitionerConfig::new(2);
        cfg.supervision = Some(PartitionSupervision {
            class_nodes: vec![vec![0, 1], vec![1]],
            lambda: 1.0,
        });
        assert!(matches!(partition(&g, &cfg), Err(Error::Validation(_))));
    }

    #[test]
    fn spectral_init_splits_triangles_by_fiedler_sign() {
        let g = two_triangles_bridge(0.01);
        let labels = spectral_kmeans_init(&g, 2, 9).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[0], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_eq!(labels[3], labels[5]);
        assert_ne!(labels[0], labels[3]);
    }

    #[test]
    fn spectral_init_single_class() {
        let g = two_triangles_bridge(0.5);
        assert_eq!(spectral_kmeans_init(&g, 1, 0).unwrap(), vec![0; 6]);
    }

    #[test]
    fn spectral_init_beats_random_baseline() {
        let mut spec = MickeeSpec::new(200, vec![20, 40]);
        spec.intra = crate::synth::BlockDensity::ExpectedDegree(12.0);
        spec.inter_density = 0.01;
        let mut wins = 0;
        let seeds = 50;
        for seed in 0..seeds {
            spec.seed = seed;
            let (g, blocks) = generate_mickee(&spec).unwrap();
            let reference: Vec<Option<usize>> = blocks.iter().map(|&b| Some(b)).collect();
            let init = spectral_kmeans_init(&g, 3, seed).unwrap();
            let spectral = crate::metrics::purity(&init, &reference).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xba5eba11));
            let random: Vec<usize> = (0..g.n()).map(|_| rng.random_range(0..3)).collect();
            let baseline = crate::metrics::purity(&random, &reference).unwrap();
            if spectral > baseline {
                wins += 1;
            }
        }
        assert!(wins * 10 >= seeds * 9, "spectral beat random on {wins}/{seeds} seeds");
    }

    #[test]
    fn class_energies_are_exact_at_the_fixed_point() {
        let g = two_triangles_bridge(0.01);
        let mut cfg = PartitionerConfig::new(2);
        cfg.seed = 3;
        let p = partition(&g, &cfg).unwrap();
        for c in 0..2 {
            let phi: Vec<f64> = (0..6).map(|i| f64::from(p.labels[i] == c)).collect();
            let e = crate::energy::relaxed_energy(&g, &phi, p.epsilon).unwrap();
            assert!((p.class_energies[c] - 6.0 * e).abs() <= 1e-10 * p.class_energies[c].abs());
        }
        let expected: f64 = p
            .class_energies
            .iter()
            .map(|&s| crate::energy::partition_term(s, p.epsilon))
            .sum();
        assert!((p.energy - expected).abs() < 1e-12);
    }

    #[test]
    fn epsilon_sweep_finds_a_stable_scale_band() {
        let g = two_triangles_bridge(0.01);
        let mut cfg = PartitionerConfig::new(2);
        cfg.seed = 2;
        cfg.restarts = 3;
        let ells: Vec<f64> = (-10..=10).map(|l| l as f64).collect();
        let rows = epsilon_sweep(&g, &cfg, &ells, &triangle_reference()).unwrap();
        let rows2 = epsilon_sweep(&g, &cfg, &ells, &triangle_reference()).unwrap();
        for (a, b) in rows.iter().zip(&rows2) {
            assert_eq!(a.purity, b.purity);
            assert_eq!(a.energy, b.energy);
        }
        // Contiguous run of perfect purity spanning at least 2 e-foldings
        // (10 consecutive integer exponents at 0.2 per step).
        let mut best_run = 0usize;
        let mut run = 0usize;
        for r in &rows {
            if r.purity == 1.0 {
                run += 1;
                best_run = best_run.max(run);
            } else {
                run = 0;
            }
        }
        assert!(best_run >= 11, "longest perfect band {best_run} of {}", rows.len());
    }
}
