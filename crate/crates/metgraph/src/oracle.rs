//! Independent ground-truth routines: a Monte Carlo walker for exit times and
//! exhaustive searches over subsets and labelings. These deliberately share
//! no code path with the relaxed solvers they are used to validate.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{partition_term, relaxed_energy_with};
use crate::graph::Graph;
use crate::solve::{solve_exact_met_quiet, SolverOptions};
use crate::util::{binomial, derive_seed, kahan_sum};
use crate::{Error, Result};

const SUBSET_CAP: u128 = 1_000_000;
const LABELING_CAP: u128 = 1_000_000;
const DEFAULT_STEP_CAP: u64 = 10_000_000;

/// Monte Carlo estimate of an exit time average.
#[derive(Debug, Clone, Copy)]
pub struct WalkEstimate {
    pub tau_hat: f64,
    pub stderr: f64,
}

/// Estimate the mean exit time of `set` by simulating the walk with
/// transition probabilities `A_ij / d_i` from every node of the set.
/// Walks exceeding ten million steps abort with an error, which signals an
/// unreachable complement.
pub fn monte_carlo_met(g: &Graph, set: &[usize], walks_per_node: usize, seed: u64) -> Result<WalkEstimate> {
    monte_carlo_met_with(g, set, walks_per_node, seed, DEFAULT_STEP_CAP)
}

pub fn monte_carlo_met_with(
    g: &Graph,
    set: &[usize],
    walks_per_node: usize,
    seed: u64,
    step_cap: u64,
) -> Result<WalkEstimate> {
    let n = g.n();
    if set.is_empty() || set.len() >= n {
        return Err(Error::Validation("walker set must be a nonempty proper subset".into()));
    }
    if walks_per_node == 0 {
        return Err(Error::Validation("walks_per_node must be positive".into()));
    }
    let mut in_set = vec![false; n];
    for &i in set {
        if i >= n {
            return Err(Error::Validation(format!("node index {i} out of range")));
        }
        in_set[i] = true;
    }
    let tables = AliasTables::build(g);

    let per_node: Vec<(f64, f64)> = set
        .par_iter()
        .map(|&start| -> Result<(f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, start as u64));
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..walks_per_node {
                let mut node = start;
                let mut steps: u64 = 0;
                loop {
                    node = tables.step(node, &mut rng);
                    steps += 1;
                    if !in_set[node] {
                        break;
                    }
                    if steps >= step_cap {
                        return Err(Error::CapExceeded(format!(
                            "walk from node {} exceeded {step_cap} steps; \
                             the complement may be unreachable",
                            g.display_name(start)
                        )));
                    }
                }
                let t = steps as f64;
                sum += t;
                sum_sq += t * t;
            }
            Ok((sum, sum_sq))
        })
        .collect::<Result<Vec<_>>>()?;

    let w = walks_per_node as f64;
    let mut means = Vec::with_capacity(set.len());
    let mut var_of_tau = 0.0;
    for &(sum, sum_sq) in &per_node {
        let mean = sum / w;
        means.push(mean);
        if walks_per_node > 1 {
            let var = (sum_sq - sum * sum / w) / (w - 1.0);
            var_of_tau += var.max(0.0) / w;
        }
    }
    let tau_hat = kahan_sum(means.into_iter()) / n as f64;
    let stderr = var_of_tau.sqrt() / n as f64;
    Ok(WalkEstimate { tau_hat, stderr })
}

/// Walker alias tables, one per node, for O(1) transition sampling.
struct AliasTables {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTables {
    fn build(g: &Graph) -> AliasTables {
        let n = g.n();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut prob = Vec::new();
        let mut alias = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let row: Vec<(usize, f64)> = g.adjacency().row(i).collect();
            let d = g.out_degree()[i];
            let m = row.len();
            let mut p: Vec<f64> = row.iter().map(|&(_, w)| w / d * m as f64).collect();
            let mut a: Vec<usize> = (0..m).collect();
            let mut small: Vec<usize> = (0..m).filter(|&k| p[k] < 1.0).collect();
            let mut large: Vec<usize> = (0..m).filter(|&k| p[k] >= 1.0).collect();
            while let (Some(s), Some(l)) = (small.pop(), large.pop()) {
                a[s] = l;
                p[l] = (p[l] + p[s]) - 1.0;
                if p[l] < 1.0 {
                    small.push(l);
                } else {
                    large.push(l);
                }
            }
            targets.extend(row.iter().map(|&(j, _)| j));
            prob.extend(p);
            alias.extend(a);
            offsets.push(targets.len());
        }
        AliasTables {
            offsets,
            targets,
            prob,
            alias,
        }
    }

    #[inline]
    fn step(&self, node: usize, rng: &mut ChaCha8Rng) -> usize {
        let lo = self.offsets[node];
        let hi = self.offsets[node + 1];
        let m = hi - lo;
        let k = rng.random_range(0..m);
        let slot = if rng.random::<f64>() < self.prob[lo + k] {
            k
        } else {
            self.alias[lo + k]
        };
        self.targets[lo + slot]
    }
}

/// Exhaustively maximize the exact mean exit time over all k-subsets.
/// Ties resolve to the lexicographically smallest subset. Refuses instances
/// with more than a million subsets.
pub fn brute_force_best_subgraph(g: &Graph, k: usize) -> Result<(Vec<usize>, f64)> {
    brute_force_best_subgraph_with(g, k, &SolverOptions::default())
}

pub fn brute_force_best_subgraph_with(
    g: &Graph,
    k: usize,
    opts: &SolverOptions,
) -> Result<(Vec<usize>, f64)> {
    let n = g.n();
    if k == 0 || k >= n {
        return Err(Error::Validation(format!("k = {k} must satisfy 1 <= k < n = {n}")));
    }
    let count = binomial(n, k);
    if count > SUBSET_CAP {
        return Err(Error::CapExceeded(format!(
            "C({n}, {k}) = {count} subsets exceeds the exhaustive cap of {SUBSET_CAP}"
        )));
    }
    let mut subset: Vec<usize> = (0..k).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let tau = solve_exact_met_quiet(g, &subset, opts)?.tau;
        match &best {
            Some((_, bt)) if *bt >= tau => {}
            _ => best = Some((subset.clone(), tau)),
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    Ok(best.expect("at least one subset enumerated"))
}

/// Advance to the next k-combination of 0..n in lexicographic order.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] != i + n - k {
            subset[i] += 1;
            for j in (i + 1)..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exhaustively minimize the partition energy (with `delta = epsilon`) over
/// all surjective labelings into `k_classes`. Tiny graphs only.
pub fn brute_force_best_partition(g: &Graph, k_classes: usize, epsilon: f64) -> Result<Vec<usize>> {
    brute_force_best_partition_with(g, k_classes, epsilon, &SolverOptions::default())
}

pub fn brute_force_best_partition_with(
    g: &Graph,
    k_classes: usize,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<Vec<usize>> {
    let n = g.n();
    if k_classes < 1 || k_classes > n {
        return Err(Error::Validation(format!(
            "class count {k_classes} must satisfy 1 <= K <= n = {n}"
        )));
    }
    let count = (k_classes as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > LABELING_CAP {
        return Err(Error::CapExceeded(format!(
            "{k_classes}^{n} = {count} labelings exceeds the exhaustive cap of {LABELING_CAP}"
        )));
    }

    let mut labels = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        if is_surjective(&labels, k_classes) {
            let value = labeling_energy(g, &labels, k_classes, epsilon, opts)?;
            match &best {
                Some((_, bv)) if *bv <= value => {}
                _ => best = Some((labels.clone(), value)),
            }
        }
        // Odometer increment over base-k_classes digits.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(best
                    .ok_or_else(|| Error::Validation("no surjective labeling exists".into()))?
                    .0);
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < k_classes {
                break;
            }
            labels[pos] = 0;
        }
    }
}

fn is_surjective(labels: &[usize], k: usize) -> bool {
    let mut seen = vec![false; k];
    for &l in labels {
        seen[l] = true;
    }
    seen.iter().all(|&s| s)
}

fn labeling_energy(
    g: &Graph,
    labels: &[usize],
    k: usize,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let n = g.n();
    let mut total = 0.0;
    for class in 0..k {
        let phi: Vec<f64> = (0..n).map(|i| f64::from(labels[i] == class)).collect();
        if phi.iter().all(|&p| p == 1.0) {
            continue; // diverging class energy, vanishing term
        }
        let e = relaxed_energy_with(g, &phi, epsilon, opts)?;
        total += partition_term(n as f64 * e, epsilon);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::solve_exact_met;
    use crate::synth::{random_strongly_connected, two_triangles_bridge};

    fn pair() -> Graph {
        Graph::from_weighted_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)], None).unwrap()
    }

    #[test]
    fn deterministic_walks_match_exact_values() {
        let g = pair();
        let est = monte_carlo_met(&g, &[0], 1000, 1).unwrap();
        assert_eq!(est.tau_hat, 0.5);
        assert_eq!(est.stderr, 0.0);

        let cyc = Graph::from_weighted_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], None).unwrap();
        let est = monte_carlo_met(&cyc, &[0, 1], 1000, 2).unwrap();
        assert_eq!(est.tau_hat, 1.0);
    }

    #[test]
    fn path_graph_estimate_brackets_exact_value() {
        let edges = [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)];
        let g = Graph::from_weighted_edges(3, &edges, None).unwrap();
        let est = monte_carlo_met(&g, &[0, 1], 100_000, 3).unwrap();
        let exact = 7.0 / 3.0;
        assert!(
            (est.tau_hat - exact).abs() <= 3.0 * est.stderr,
            "tau_hat {} vs {exact} (stderr {})",
            est.tau_hat,
            est.stderr
        );
    }

    #[test]
    fn estimates_agree_with_solver_on_random_instances() {
        for seed in 0..10u64 {
            let g = random_strongly_connected(20, 0.2, seed);
            let set: Vec<usize> = (0..((seed as usize % 4) + 1)).collect();
            let exact = solve_exact_met(&g, &set).unwrap().tau;
            let est = monte_carlo_met(&g, &set, 100_000, seed ^ 0x5a5a).unwrap();
            assert!(
                (est.tau_hat - exact).abs() <= 3.0 * est.stderr + 1e-12,
                "seed {seed}: {} vs {exact} (stderr {})",
                est.tau_hat,
                est.stderr
            );
        }
    }

    #[test]
    fn step_cap_detects_trapped_walks() {
        let edges = [(0, 1, 1.0), (1, 0, 1.0), (2, 0, 1.0)];
        let g = Graph::from_weighted_edges(3, &edges, None).unwrap();
        let err = monte_carlo_met_with(&g, &[0, 1], 10, 0, 10_000).unwrap_err();
        assert!(matches!(err, Error::CapExceeded(_)));
    }

    #[test]
    fn brute_force_finds_a_triangle() {
        let g = two_triangles_bridge(0.01);
        let (set, tau) = brute_force_best_subgraph(&g, 3).unwrap();
        assert_eq!(set, vec![0, 1, 2]); // ties with {3,4,5}, lexicographically first wins
        let other = solve_exact_met(&g, &[3, 4, 5]).unwrap().tau;
        assert!((tau - other).abs() < 1e-12);
    }

    #[test]
    fn brute_force_singletons_tie_at_inverse_n() {
        let g = random_strongly_connected(7, 0.3, 5);
        let (set, tau) = brute_force_best_subgraph(&g, 1).unwrap();
        assert_eq!(set, vec![0]);
        assert!((tau - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_caps_enforced() {
        let g = random_strongly_connected(40, 0.2, 1);
        assert!(matches!(
            brute_force_best_subgraph(&g, 12).unwrap_err(),
            Error::CapExceeded(_)
        ));
        assert!(matches!(
            brute_force_best_partition(&g, 3, 0.1).unwrap_err(),
            Error::CapExceeded(_)
        ));
    }

    #[test]
    fn brute_force_partition_prefers_triangle_split() {
        let g = two_triangles_bridge(0.01);
        let labels = brute_force_best_partition(&g, 2, 0.2).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[0], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_eq!(labels[3], labels[5]);
        assert_ne!(labels[0], labels[3]);
    }

    #[test]
    fn brute_force_partition_balances_the_path() {
        let edges = [
            (0, 1, 1.0),
            (1, 0, 1.0),
            (1, 2, 1.0),
            (2, 1, 1.0),
            (2, 3, 1.0),
            (3, 2, 1.0),
        ];
        let g = Graph::from_weighted_edges(4, &edges, None).unwrap();
        let labels = brute_force_best_partition(&g, 2, 0.1).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
    }

    #[test]
    fn brute_force_partition_with_k_equal_n() {
        let g = Graph::from_weighted_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)], None).unwrap();
        let labels = brute_force_best_partition(&g, 3, 0.2).unwrap();
        assert_eq!(labels, vec![0, 1, 2]);
    }

    #[test]
    fn next_combination_is_lexicographic() {
        let mut c = vec![0, 1, 2];
        let mut seen = vec![c.clone()];
        while next_combination(&mut c, 5) {
            seen.push(c.clone());
        }
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[1], vec![0, 1, 3]);
        assert_eq!(seen[9], vec![2, 3, 4]);
    }
}
