//! Agreement metrics between computed structures and reference labels.

use crate::{Error, Result};

/// Purity of a clustering against reference classes: the fraction of nodes
/// whose cluster's majority class matches their own,
/// `(1/N) sum_k max_l N_k^l`. Nodes without a reference label are excluded
/// and `N` shrinks accordingly.
pub fn purity(clusters: &[usize], reference: &[Option<usize>]) -> Result<f64> {
    if clusters.len() != reference.len() {
        return Err(Error::Validation(format!(
            "{} cluster labels vs {} reference labels",
            clusters.len(),
            reference.len()
        )));
    }
    let mut counts: std::collections::HashMap<(usize, usize), usize> = std::collections::HashMap::new();
    let mut covered = 0usize;
    for (&c, r) in clusters.iter().zip(reference) {
        if let Some(l) = r {
            *counts.entry((c, *l)).or_insert(0) += 1;
            covered += 1;
        }
    }
    if covered == 0 {
        return Err(Error::Validation(
            "no node carries both a cluster and a reference label".into(),
        ));
    }
    let mut majority: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for (&(c, _), &count) in &counts {
        let best = majority.entry(c).or_insert(0);
        *best = (*best).max(count);
    }
    Ok(majority.values().sum::<usize>() as f64 / covered as f64)
}

/// Overlap of a detected set with a planted set: `|S ∩ S*| / |S*|`.
pub fn subgraph_accuracy(detected: &[usize], planted: &[usize]) -> Result<f64> {
    if planted.is_empty() {
        return Err(Error::Validation("planted set is empty".into()));
    }
    let planted_set: std::collections::HashSet<usize> = planted.iter().copied().collect();
    let hit = detected
        .iter()
        .filter(|node| planted_set.contains(node))
        .count();
    Ok(hit as f64 / planted_set.len() as f64)
}
