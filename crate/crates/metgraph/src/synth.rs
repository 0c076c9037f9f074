//! Generators for the benchmark graph families used throughout the tests:
//! planted multiscale ER blocks in a sparse background, a power-law variant
//! of the background, and the directed ER-plus-cycle trap. All generation is
//! bit-for-bit deterministic given the spec and seed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Pareto};

use crate::graph::Graph;
use crate::util::derive_seed;
use crate::{Error, Result};

const CONNECTIVITY_RETRIES: u64 = 100;

/// Density parameter of an ER block, either directly or via the expected
/// (unweighted) degree of its nodes.
#[derive(Debug, Clone, Copy)]
pub enum BlockDensity {
    Density(f64),
    ExpectedDegree(f64),
}

impl BlockDensity {
    fn to_density(self, block_size: usize, what: &str) -> Result<f64> {
        let p = match self {
            BlockDensity::Density(p) => p,
            BlockDensity::ExpectedDegree(d) => {
                if block_size < 2 {
                    return Err(Error::Validation(format!(
                        "{what}: expected degree given for a block of {block_size} node(s)"
                    )));
                }
                d / (block_size as f64 - 1.0)
            }
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!(
                "{what}: edge density {p:.4} outside [0, 1]"
            )));
        }
        Ok(p)
    }

    fn expected_degree(self, block_size: usize) -> f64 {
        match self {
            BlockDensity::Density(p) => p * (block_size.saturating_sub(1)) as f64,
            BlockDensity::ExpectedDegree(d) => d,
        }
    }
}

/// Weight distribution for edges running between groups.
#[derive(Debug, Clone, Copy)]
pub enum InterWeights {
    /// Every inter-group edge carries this weight.
    Constant(f64),
    /// Half-normal weights scaled so the sample maximum lands near the given
    /// value (truncation at zero keeps weights nonnegative).
    HalfNormalMax(f64),
    /// Uniform on (0, max].
    Uniform(f64),
}

impl InterWeights {
    fn validate(&self) -> Result<()> {
        let v = match self {
            InterWeights::Constant(v) | InterWeights::HalfNormalMax(v) | InterWeights::Uniform(v) => *v,
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Validation(format!("inter-edge weight scale must be positive, got {v}")));
        }
        Ok(())
    }
}

/// Planted-block ensemble: `K` dense ER blocks of strictly increasing sizes
/// inside a sparse ER background, sparsely interconnected with weak weights.
#[derive(Debug, Clone)]
pub struct MickeeSpec {
    pub n_total: usize,
    /// Planted block sizes, strictly increasing; the remaining nodes form the
    /// background group.
    pub block_sizes: Vec<usize>,
    /// ER parameter of every planted block.
    pub intra: BlockDensity,
    /// ER parameter of the background; defaults to matching the planted
    /// blocks' expected degree so the degree profile stays flat.
    pub background: Option<BlockDensity>,
    /// Density of node pairs joined across different groups.
    pub inter_density: f64,
    pub inter_weights: InterWeights,
    pub intra_weight: f64,
    /// When set, the background block is drawn from a loopy, multi-edged
    /// configuration model with tail exponent `q` (parallel edges summed into
    /// weights, self-loops kept).
    pub powerlaw_exponent: Option<f64>,
    pub seed: u64,
}

impl MickeeSpec {
    pub fn new(n_total: usize, block_sizes: Vec<usize>) -> Self {
        MickeeSpec {
            n_total,
            block_sizes,
            intra: BlockDensity::ExpectedDegree(20.8),
            background: None,
            inter_density: 0.02,
            inter_weights: InterWeights::Constant(0.05),
            intra_weight: 1.0,
            powerlaw_exponent: None,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() {
            return Err(Error::Validation("at least one planted block is required".into()));
        }
        if self.block_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "planted block sizes must be strictly increasing".into(),
            ));
        }
        let planted: usize = self.block_sizes.iter().sum();
        if planted > self.n_total {
            return Err(Error::Validation(format!(
                "planted blocks cover {planted} nodes but the graph has {}",
                self.n_total
            )));
        }
        if !(0.0..=1.0).contains(&self.inter_density) {
            return Err(Error::Validation(format!(
                "inter-group density {} outside [0, 1]",
                self.inter_density
            )));
        }
        self.inter_weights.validate()?;
        if !(self.intra_weight.is_finite() && self.intra_weight > 0.0) {
            return Err(Error::Validation("intra-group weight must be positive".into()));
        }
        if let Some(q) = self.powerlaw_exponent {
            if !(q > 2.0) {
                return Err(Error::Validation(format!(
                    "power-law exponent must exceed 2 for a finite mean, got {q}"
                )));
            }
            if !(2.1..=4.0).contains(&q) {
                log::warn!("power-law exponent {q} is outside the tested range [2.1, 4]");
            }
        }
        Ok(())
    }

    /// Group index per node: planted blocks 0..K in spec order, background K.
    fn groups(&self) -> Vec<usize> {
        let mut g = Vec::with_capacity(self.n_total);
        for (b, &size) in self.block_sizes.iter().enumerate() {
            g.extend(std::iter::repeat(b).take(size));
        }
        g.resize(self.n_total, self.block_sizes.len());
        g
    }

    fn background_size(&self) -> usize {
        self.n_total - self.block_sizes.iter().sum::<usize>()
    }

    fn background_degree_target(&self) -> f64 {
        match self.background {
            Some(b) => b.expected_degree(self.background_size()),
            None => self
                .intra
                .expected_degree(*self.block_sizes.last().expect("validated nonempty")),
        }
    }
}

/// Generate the planted-block ensemble. Returns the graph and the group label
/// of every node (planted blocks 0..K in size order, background K). Resamples
/// until the graph is connected, up to a bounded number of retries.
pub fn generate_mickee(spec: &MickeeSpec) -> Result<(Graph, Vec<usize>)> {
    spec.validate()?;
    if spec.powerlaw_exponent.is_some() {
        return generate_powerlaw_mickee(spec);
    }
    sample_until_connected(spec, false)
}

/// Variant with a power-law background drawn from a configuration model.
/// Requires `powerlaw_exponent` to be set.
pub fn generate_powerlaw_mickee(spec: &MickeeSpec) -> Result<(Graph, Vec<usize>)> {
    spec.validate()?;
    if spec.powerlaw_exponent.is_none() {
        return Err(Error::Validation(
            "powerlaw_exponent must be set for the power-law ensemble".into(),
        ));
    }
    sample_until_connected(spec, true)
}

fn sample_until_connected(spec: &MickeeSpec, powerlaw: bool) -> Result<(Graph, Vec<usize>)> {
    let groups = spec.groups();
    for attempt in 0..CONNECTIVITY_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, attempt));
        match sample_mickee_once(spec, &groups, powerlaw, &mut rng) {
            Ok(g) if g.is_strongly_connected() => return Ok((g, groups)),
            Ok(_) | Err(Error::Validation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Validation(format!(
        "failed to draw a connected sample in {CONNECTIVITY_RETRIES} attempts; \
         increase densities or block sizes"
    )))
}

fn sample_mickee_once(
    spec: &MickeeSpec,
    groups: &[usize],
    powerlaw: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Graph> {
    let n = spec.n_total;
    let n_groups = spec.block_sizes.len() + 1;
    let bg = spec.block_sizes.len();
    let bg_size = spec.background_size();

    let mut density = Vec::with_capacity(n_groups);
    for (b, &size) in spec.block_sizes.iter().enumerate() {
        density.push(spec.intra.to_density(size, &format!("planted block {b}"))?);
    }
    let bg_density = if bg_size >= 2 && !powerlaw {
        match spec.background {
            Some(b) => b.to_density(bg_size, "background")?,
            None => BlockDensity::ExpectedDegree(spec.background_degree_target())
                .to_density(bg_size, "background")?,
        }
    } else {
        0.0
    };
    density.push(bg_density);

    // First pass fixes the topology so distribution-wide weight scales can be
    // computed before any weight is drawn.
    let mut intra_pairs: Vec<(usize, usize)> = Vec::new();
    let mut inter_pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if groups[i] == groups[j] {
                if groups[i] == bg && powerlaw {
                    continue; // background handled by the configuration model
                }
                if rng.random::<f64>() < density[groups[i]] {
                    intra_pairs.push((i, j));
                }
            } else if rng.random::<f64>() < spec.inter_density {
                inter_pairs.push((i, j));
            }
        }
    }

    let mut edges: Vec<(usize, usize, f64)> =
        Vec::with_capacity(2 * (intra_pairs.len() + inter_pairs.len()));
    for &(i, j) in &intra_pairs {
        edges.push((i, j, spec.intra_weight));
        edges.push((j, i, spec.intra_weight));
    }
    let inter_count = inter_pairs.len();
    for &(i, j) in &inter_pairs {
        let w = draw_inter_weight(spec.inter_weights, inter_count, rng);
        edges.push((i, j, w));
        edges.push((j, i, w));
    }

    if powerlaw && bg_size > 0 {
        let q = spec.powerlaw_exponent.expect("checked by caller");
        let first_bg = n - bg_size;
        configuration_model_edges(
            first_bg,
            bg_size,
            q,
            spec.background_degree_target(),
            spec.intra_weight,
            rng,
            &mut edges,
        );
    }

    Graph::from_weighted_edges(n, &edges, None)
}

fn draw_inter_weight(dist: InterWeights, count: usize, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        InterWeights::Constant(w) => w,
        InterWeights::HalfNormalMax(max) => {
            // The max of m half-normal draws sits near sigma * sqrt(2 ln m).
            let m = count.max(2) as f64;
            let sigma = max / (2.0 * m.ln()).sqrt();
            let normal = Normal::new(0.0, sigma).expect("positive sigma");
            normal.sample(rng).abs().max(f64::MIN_POSITIVE)
        }
        InterWeights::Uniform(max) => max * (1.0 - rng.random::<f64>()),
    }
}

/// Loopy multi-edged configuration model over `count` nodes starting at
/// `first`: degrees are rounded Pareto draws with tail exponent `q` and mean
/// near `mean_degree`, stubs are matched uniformly, self-loops kept (weight
/// `2 w` on the diagonal) and parallel edges summed.
fn configuration_model_edges(
    first: usize,
    count: usize,
    q: f64,
    mean_degree: f64,
    weight: f64,
    rng: &mut ChaCha8Rng,
    edges: &mut Vec<(usize, usize, f64)>,
) {
    let alpha = q - 1.0;
    let scale = mean_degree * (q - 2.0) / (q - 1.0);
    let pareto = Pareto::new(scale.max(1.0), alpha).expect("valid pareto parameters");
    let degree_cap = 10 * count;
    let mut degrees: Vec<usize> = (0..count)
        .map(|_| (pareto.sample(rng).round() as usize).clamp(1, degree_cap))
        .collect();
    if degrees.iter().sum::<usize>() % 2 == 1 {
        degrees[count - 1] += 1;
    }
    let mut stubs: Vec<usize> = Vec::with_capacity(degrees.iter().sum());
    for (offset, &d) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat(first + offset).take(d));
    }
    stubs.shuffle(rng);
    for pair in stubs.chunks_exact(2) {
        let (i, j) = (pair[0], pair[1]);
        if i == j {
            edges.push((i, i, 2.0 * weight));
        } else {
            edges.push((i, j, weight));
            edges.push((j, i, weight));
        }
    }
}

/// Directed trap benchmark: a directed ER block feeding many edges into a
/// directed cycle that returns to the block through exactly one edge. ER
/// out-weights are rescaled so every node's out-degree is comparable; the
/// cycle's internal weight defaults to that common out-degree.
pub fn generate_er_cycle(
    n_er: usize,
    n_cycle: usize,
    p_er: f64,
    cycle_weight: Option<f64>,
    seed: u64,
) -> Result<(Graph, Vec<usize>)> {
    if n_cycle < 3 {
        return Err(Error::Validation("cycle needs at least 3 nodes".into()));
    }
    if n_er < 2 {
        return Err(Error::Validation("ER block needs at least 2 nodes".into()));
    }
    if !(0.0 < p_er && p_er <= 1.0) {
        return Err(Error::Validation(format!("ER density {p_er} outside (0, 1]")));
    }
    let n = n_er + n_cycle;
    let target = p_er * (n_er - 1 + n_cycle) as f64;
    let w_cycle = cycle_weight.unwrap_or(target);
    if !(w_cycle.is_finite() && w_cycle > 0.0) {
        return Err(Error::Validation(format!("cycle weight must be positive, got {w_cycle}")));
    }
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n_er)).collect();

    for attempt in 0..CONNECTIVITY_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_er];
        for i in 0..n_er {
            for j in 0..n_er {
                if i != j && rng.random::<f64>() < p_er {
                    out[i].push((j, 1.0));
                }
            }
        }
        for c in 0..n_cycle {
            let mut fed = false;
            for e in 0..n_er {
                if rng.random::<f64>() < p_er {
                    out[e].push((n_er + c, 1.0));
                    fed = true;
                }
            }
            if !fed {
                out[rng.random_range(0..n_er)].push((n_er + c, 1.0));
            }
        }
        if out.iter().any(|row| row.is_empty()) {
            continue;
        }

        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for (i, row) in out.iter().enumerate() {
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            let scale = target / total;
            for &(j, w) in row {
                edges.push((i, j, w * scale));
            }
        }
        for c in 0..n_cycle {
            edges.push((n_er + c, n_er + (c + 1) % n_cycle, w_cycle));
        }
        let return_from = n_er + rng.random_range(0..n_cycle);
        let return_to = rng.random_range(0..n_er);
        edges.push((return_from, return_to, 1.0));

        match Graph::from_weighted_edges(n, &edges, None) {
            Ok(g) if g.is_strongly_connected() => return Ok((g, labels)),
            Ok(_) | Err(Error::Validation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Validation(format!(
        "failed to draw a strongly connected sample in {CONNECTIVITY_RETRIES} attempts"
    )))
}

/// Directed ER graph plus a random-weight ring, which guarantees strong
/// connectivity and positive out-degrees. Handy for randomized testing and
/// calibration runs.
pub fn random_strongly_connected(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n, rng.random_range(0.5..1.5)));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(0.5..1.5)));
            }
        }
    }
    Graph::from_weighted_edges(n, &edges, None).expect("ring guarantees positive out-degrees")
}

/// Two complete triangles {0,1,2} and {3,4,5} joined by one undirected bridge
/// edge 2 - 3 of the given weight. A minimal two-community fixture.
pub fn two_triangles_bridge(bridge_weight: f64) -> Graph {
    let mut edges = Vec::new();
    for tri in [[0usize, 1, 2], [3, 4, 5]] {
        for a in 0..3 {
            for b in (a + 1)..3 {
                edges.push((tri[a], tri[b], 1.0));
                edges.push((tri[b], tri[a], 1.0));
            }
        }
    }
    edges.push((2, 3, bridge_weight));
    edges.push((3, 2, bridge_weight));
    Graph::from_weighted_edges(6, &edges, None).expect("fixed fixture")
}
