//! Command-line driver: generate benchmark graphs, detect trapping subgraphs,
//! partition, run parameter sweeps to CSV, and query the exact/Monte-Carlo
//! exit-time oracles. Identical commands with identical seeds produce
//! identical scientific output; only the wall_ms column varies between runs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use metgraph::detector::{detect, DetectorConfig, DetectorSupervision};
use metgraph::graph::LoadOptions;
use metgraph::metrics::{purity, subgraph_accuracy};
use metgraph::oracle::{brute_force_best_partition, brute_force_best_subgraph, monte_carlo_met};
use metgraph::partitioner::{
    epsilon_sweep, partition, InitStrategy, PartitionSupervision, PartitionerConfig,
};
use metgraph::solve::solve_exact_met;
use metgraph::sweep::{existing_keys, Cell, SweepResult};
use metgraph::synth::{
    generate_er_cycle, generate_mickee, generate_powerlaw_mickee, BlockDensity, InterWeights,
    MickeeSpec,
};
use metgraph::{Error, Graph, Result};

#[derive(Parser)]
#[command(name = "metgraph", version, about = "Random-walk exit-time subgraph detection and graph partitioning")]
struct Cli {
    /// Worker threads for restarts, class solves, and sweep points
    /// (default: METGRAPH_JOBS env var, then all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark graph family to an edge list plus label file.
    Generate(GenerateArgs),
    /// Find a k-node set with maximal relaxed exit time.
    Detect(DetectArgs),
    /// Split the graph into K classes that each trap walkers.
    Partition(PartitionArgs),
    /// Run a parameter sweep and append rows to a CSV.
    Sweep(SweepArgs),
    /// Exact mean exit time of a node set, optionally Monte Carlo checked.
    Met(MetArgs),
    /// Exhaustive searches on tiny graphs.
    Oracle(OracleArgs),
}

#[derive(Args, Clone)]
struct GraphInput {
    /// Graph file: whitespace edge list `src dst [weight]`, or MatrixMarket
    /// coordinate (detected by header or .mtx extension).
    #[arg(long)]
    graph: PathBuf,
    /// Average the adjacency with its transpose after loading.
    #[arg(long)]
    symmetrize: bool,
    /// Give zero-out-degree nodes a self-loop of this weight instead of
    /// rejecting the graph.
    #[arg(long, value_name = "W")]
    add_self_loops: Option<f64>,
}

impl GraphInput {
    fn load(&self) -> Result<Graph> {
        let opts = LoadOptions {
            symmetrize: self.symmetrize,
            add_self_loops: self.add_self_loops,
        };
        load_graph(&self.graph, &opts)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Mickee,
    PowerlawMickee,
    ErCycle,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Spec file of `key = value` lines; see the README for the keys.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes <prefix>.edges and <prefix>.labels.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long)]
    k: usize,
    /// Scale constant; the relaxation runs at eps = C / ||L||_F.
    #[arg(long, default_value_t = 50.0)]
    c: f64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reference labels (`node label` lines) for supervision and accuracy.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Class in the label file regarded as the target set.
    #[arg(long)]
    target_label: Option<String>,
    #[arg(long, default_value_t = 1e6)]
    lambda: f64,
    /// Fraction of labeled nodes revealed to the detector.
    #[arg(long, default_value_t = 0.0)]
    supervision_frac: f64,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Spectral,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long = "K", visible_alias = "k-classes")]
    k_classes: usize,
    #[arg(long, default_value_t = 50.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    init: InitArg,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 1e6)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    supervision_frac: f64,
    /// Re-seed classes that empty out instead of leaving them empty.
    #[arg(long)]
    reseed_empty: bool,
    /// Write `node class` lines here (classes numbered from 1).
    #[arg(long)]
    out_labels: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum SweepKind {
    K,
    Epsilon,
    Noise,
    Powerlaw,
    Supervision,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Algo {
    Detect,
    Partition,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    kind: SweepKind,
    /// Grid spec: comma-separated `name=start:stop:step` or `name=v1|v2|v3`.
    #[arg(long)]
    grid: String,
    /// Number of seeds per grid point (seed values base_seed..base_seed+seeds).
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Skip grid points already present in the output CSV.
    #[arg(long)]
    resume: bool,
    /// Graph input for k / epsilon / supervision sweeps.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    symmetrize: bool,
    #[arg(long)]
    add_self_loops: Option<f64>,
    /// Generator family for noise / powerlaw sweeps.
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Generator spec file for noise / powerlaw sweeps.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<Algo>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "K")]
    k_classes: Option<usize>,
    #[arg(long, default_value_t = 50.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    target_label: Option<String>,
    #[arg(long, default_value_t = 1e6)]
    lambda: f64,
}

#[derive(Args)]
struct MetArgs {
    #[command(flatten)]
    input: GraphInput,
    /// File of node ids (whitespace separated, `#` comments).
    #[arg(long)]
    set: PathBuf,
    /// Also run this many Monte Carlo walks per set node.
    #[arg(long, value_name = "WALKS")]
    monte_carlo: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: GraphInput,
    /// Exhaustive k-subset search maximizing the exact exit time.
    #[arg(long, value_name = "K", conflicts_with = "best_partition")]
    best_subgraph: Option<usize>,
    /// Exhaustive K-labeling search minimizing the partition energy.
    #[arg(long, value_name = "K")]
    best_partition: Option<usize>,
    /// Relaxation scale for --best-partition (default 50 / ||L||_F).
    #[arg(long)]
    epsilon: Option<f64>,
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs.or_else(env_jobs) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match run(cli.command) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn env_jobs() -> Option<usize> {
    std::env::var("METGRAPH_JOBS").ok()?.parse().ok()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Partition(args) => cmd_partition(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Met(args) => cmd_met(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

// ---------------------------------------------------------------- generate

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let spec_text = read_to_string(&args.spec)?;
    let kv = parse_key_values(&spec_text)?;
    let (graph, labels, family) = match args.family {
        Family::Mickee | Family::PowerlawMickee => {
            let mut spec = mickee_spec_from_kv(&kv)?;
            spec.seed = args.seed;
            if matches!(args.family, Family::PowerlawMickee) {
                if spec.powerlaw_exponent.is_none() {
                    return Err(Error::Validation("spec must set `q` for powerlaw-mickee".into()));
                }
                let (g, l) = generate_powerlaw_mickee(&spec)?;
                (g, l, "powerlaw-mickee")
            } else {
                spec.powerlaw_exponent = None;
                let (g, l) = generate_mickee(&spec)?;
                (g, l, "mickee")
            }
        }
        Family::ErCycle => {
            let n_er = kv_usize(&kv, "n_er")?;
            let n_cycle = kv_usize(&kv, "n_cycle")?;
            let p_er = kv_f64(&kv, "p_er")?;
            let cycle_weight = kv.iter().find(|(k, _)| k == "cycle_weight").map(|(_, v)| {
                v.parse::<f64>().map_err(|e| Error::Validation(format!("cycle_weight: {e}")))
            });
            let cycle_weight = match cycle_weight {
                Some(r) => Some(r?),
                None => None,
            };
            let (g, l) = generate_er_cycle(n_er, n_cycle, p_er, cycle_weight, args.seed)?;
            (g, l, "er-cycle")
        }
    };

    let edges_path = args.out_prefix.with_extension("edges");
    let labels_path = args.out_prefix.with_extension("labels");
    let mut w = BufWriter::new(File::create(&edges_path)?);
    graph.to_edge_list(&mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&labels_path)?);
    for (i, group) in labels.iter().enumerate() {
        writeln!(w, "{} {}", graph.display_name(i), group)?;
    }
    w.flush()?;

    let record = serde_json::json!({
        "family": family,
        "seed": args.seed,
        "nodes": graph.n(),
        "edges": graph.adjacency().nnz(),
        "edges_file": edges_path,
        "labels_file": labels_path,
    });
    println!("{}", serde_json::to_string_pretty(&record).expect("json"));
    Ok(())
}

fn mickee_spec_from_kv(kv: &[(String, String)]) -> Result<MickeeSpec> {
    let n = kv_usize(kv, "n")?;
    let blocks: Vec<usize> = kv_get(kv, "blocks")?
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Validation(format!("blocks: {e}")))
        })
        .collect::<Result<_>>()?;
    let mut spec = MickeeSpec::new(n, blocks);

    if let Some(v) = kv_opt_f64(kv, "intra_degree")? {
        spec.intra = BlockDensity::ExpectedDegree(v);
    } else if let Some(v) = kv_opt_f64(kv, "intra_density")? {
        spec.intra = BlockDensity::Density(v);
    }
    if let Some(v) = kv_opt_f64(kv, "background_degree")? {
        spec.background = Some(BlockDensity::ExpectedDegree(v));
    } else if let Some(v) = kv_opt_f64(kv, "background_density")? {
        spec.background = Some(BlockDensity::Density(v));
    }
    if let Some(v) = kv_opt_f64(kv, "inter_density")? {
        spec.inter_density = v;
    } else if let Some(v) = kv_opt_f64(kv, "inter_degree")? {
        // Expected cross-group degree of a smallest-block node.
        let partner = n - spec.block_sizes.first().copied().unwrap_or(0);
        spec.inter_density = v / partner.max(1) as f64;
    }
    if let Some(raw) = kv.iter().find(|(k, _)| k == "inter_weight").map(|(_, v)| v) {
        spec.inter_weights = parse_inter_weight(raw)?;
    }
    if let Some(v) = kv_opt_f64(kv, "intra_weight")? {
        spec.intra_weight = v;
    }
    if let Some(v) = kv_opt_f64(kv, "q")? {
        spec.powerlaw_exponent = Some(v);
    }
    Ok(spec)
}

fn parse_inter_weight(raw: &str) -> Result<InterWeights> {
    let (kind, value) = raw
        .split_once(':')
        .ok_or_else(|| Error::Validation(format!("inter_weight '{raw}' wants kind:value")))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|e| Error::Validation(format!("inter_weight value: {e}")))?;
    match kind.trim() {
        "constant" => Ok(InterWeights::Constant(v)),
        "halfnormal" => Ok(InterWeights::HalfNormalMax(v)),
        "uniform" => Ok(InterWeights::Uniform(v)),
        other => Err(Error::Validation(format!("unknown inter_weight kind '{other}'"))),
    }
}

// ------------------------------------------------------------------ detect

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let g = args.input.load()?;
    let mut cfg = DetectorConfig::new(args.k);
    cfg.epsilon_scale = args.c;
    cfg.restarts = args.restarts;
    cfg.max_iters = args.max_iters;
    cfg.seed = args.seed;

    let mut target_set: Option<Vec<usize>> = None;
    if let Some(path) = &args.labels {
        let label_pairs = read_labels(path, &g)?;
        let target = args.target_label.as_ref().ok_or_else(|| {
            Error::Validation("--target-label is required with --labels".into())
        })?;
        let planted: Vec<usize> = label_pairs
            .iter()
            .filter(|(_, l)| l == target)
            .map(|(i, _)| *i)
            .collect();
        if planted.is_empty() {
            return Err(Error::Validation(format!("no node carries label '{target}'")));
        }
        if args.supervision_frac > 0.0 {
            cfg.supervision = Some(DetectorSupervision {
                labels: sample_detector_labels(&label_pairs, target, args.supervision_frac, args.seed),
                lambda: args.lambda,
            });
        }
        target_set = Some(planted);
    }

    let start = Instant::now();
    let res = detect(&g, &cfg)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    let accuracy = match &target_set {
        Some(planted) => Some(subgraph_accuracy(&res.set, planted)?),
        None => None,
    };

    let record = serde_json::json!({
        "k": args.k,
        "set": res.set.iter().map(|&i| g.display_name(i)).collect::<Vec<_>>(),
        "tau": res.exact_met,
        "energy": res.energy,
        "epsilon": res.epsilon,
        "iterations": res.iterations,
        "converged": res.converged,
        "restart": res.restart,
        "restarts": args.restarts,
        "seed": args.seed,
        "accuracy": accuracy,
        "trace": res.energy_trace,
        "wall_ms": wall_ms,
    });
    emit(&record, args.out.as_deref())
}

fn sample_detector_labels(
    label_pairs: &[(usize, String)],
    target: &str,
    frac: f64,
    seed: u64,
) -> Vec<(usize, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1abe1);
    let count = ((label_pairs.len() as f64) * frac).round() as usize;
    let count = count.min(label_pairs.len());
    rand::seq::index::sample(&mut rng, label_pairs.len(), count)
        .into_iter()
        .map(|idx| {
            let (node, label) = &label_pairs[idx];
            (*node, label == target)
        })
        .collect()
}

// --------------------------------------------------------------- partition

fn cmd_partition(args: PartitionArgs) -> Result<()> {
    let g = args.input.load()?;
    let mut cfg = PartitionerConfig::new(args.k_classes);
    cfg.epsilon_scale = args.c;
    cfg.nu = args.nu;
    cfg.restarts = args.restarts;
    cfg.max_iters = args.max_iters;
    cfg.seed = args.seed;
    cfg.reseed_empty = args.reseed_empty;
    cfg.init = match args.init {
        InitArg::Random => InitStrategy::Random,
        InitArg::Spectral => InitStrategy::SpectralKmeans,
    };

    let mut reference: Option<Vec<Option<usize>>> = None;
    if let Some(path) = &args.labels {
        let pairs = read_labels(path, &g)?;
        let (refv, class_names) = reference_classes(&g, &pairs);
        if args.supervision_frac > 0.0 {
            if class_names.len() > args.k_classes {
                return Err(Error::Validation(format!(
                    "label file has {} classes but K = {}",
                    class_names.len(),
                    args.k_classes
                )));
            }
            cfg.supervision = Some(sample_partition_supervision(
                &refv,
                args.k_classes,
                args.supervision_frac,
                args.lambda,
                args.seed,
            ));
        }
        reference = Some(refv);
    }

    let start = Instant::now();
    let mut part = partition(&g, &cfg)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    if let Some(refv) = &reference {
        part.purity = Some(purity(&part.labels, refv)?);
    }

    if let Some(path) = &args.out_labels {
        let mut w = BufWriter::new(File::create(path)?);
        for (i, &c) in part.labels.iter().enumerate() {
            writeln!(w, "{} {}", g.display_name(i), c + 1)?;
        }
        w.flush()?;
    }

    let labels_json: Option<Vec<serde_json::Value>> = if args.out_labels.is_none() {
        Some(
            part.labels
                .iter()
                .enumerate()
                .map(|(i, &c)| serde_json::json!([g.display_name(i), c + 1]))
                .collect(),
        )
    } else {
        None
    };
    let record = serde_json::json!({
        "k_classes": args.k_classes,
        "energy": part.energy,
        "class_energies": part.class_energies,
        "purity": part.purity,
        "iterations": part.iterations,
        "converged": part.converged,
        "empty_classes": part.empty_classes,
        "degenerate": part.degenerate,
        "epsilon": part.epsilon,
        "restart": part.restart,
        "seed": args.seed,
        "trace": part.energy_trace,
        "labels_file": args.out_labels,
        "labels": labels_json,
        "wall_ms": wall_ms,
    });
    emit(&record, args.out.as_deref())
}

fn reference_classes(g: &Graph, pairs: &[(usize, String)]) -> (Vec<Option<usize>>, Vec<String>) {
    let mut names: Vec<String> = pairs.iter().map(|(_, l)| l.clone()).collect();
    names.sort();
    names.dedup();
    let mut reference = vec![None; g.n()];
    for (node, label) in pairs {
        let class = names.binary_search(label).expect("deduped above");
        reference[*node] = Some(class);
    }
    (reference, names)
}

fn sample_partition_supervision(
    reference: &[Option<usize>],
    k_classes: usize,
    frac: f64,
    lambda: f64,
    seed: u64,
) -> PartitionSupervision {
    let labeled: Vec<usize> = (0..reference.len()).filter(|&i| reference[i].is_some()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1abe1);
    let count = ((labeled.len() as f64) * frac).round() as usize;
    let count = count.min(labeled.len());
    let mut class_nodes = vec![Vec::new(); k_classes];
    for idx in rand::seq::index::sample(&mut rng, labeled.len(), count) {
        let node = labeled[idx];
        class_nodes[reference[node].expect("labeled")].push(node);
    }
    PartitionSupervision { class_nodes, lambda }
}

// ------------------------------------------------------------------- sweep

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    match args.kind {
        SweepKind::K => sweep_k(&args, &grid),
        SweepKind::Epsilon => sweep_epsilon(&args, &grid),
        SweepKind::Noise | SweepKind::Powerlaw => sweep_generated(&args, &grid),
        SweepKind::Supervision => sweep_supervision(&args, &grid),
    }
}

fn sweep_graph(args: &SweepArgs) -> Result<Graph> {
    let path = args
        .graph
        .as_ref()
        .ok_or_else(|| Error::Validation("this sweep kind needs --graph".into()))?;
    load_graph(
        path,
        &LoadOptions {
            symmetrize: args.symmetrize,
            add_self_loops: args.add_self_loops,
        },
    )
}

fn sweep_k(args: &SweepArgs, grid: &[(String, Vec<f64>)]) -> Result<()> {
    let g = sweep_graph(args)?;
    let ks = grid_axis(grid, "k")?;
    let target_set: Option<Vec<usize>> = match (&args.labels, &args.target_label) {
        (Some(path), Some(target)) => {
            let pairs = read_labels(path, &g)?;
            Some(
                pairs
                    .iter()
                    .filter(|(_, l)| l == target)
                    .map(|(i, _)| *i)
                    .collect(),
            )
        }
        (Some(_), None) => {
            return Err(Error::Validation("--target-label is required with --labels".into()))
        }
        _ => None,
    };

    let columns = vec![
        "kind", "k", "seed", "epsilon", "tau", "energy", "accuracy", "iterations", "converged",
        "wall_ms",
    ];
    let mut out = CsvSink::open(&args.out, columns, &["k", "seed"], args.resume)?;
    for &kf in &ks {
        let k = kf.round() as usize;
        for seed in args.base_seed..args.base_seed + args.seeds {
            if out.skip(&[k.to_string(), seed.to_string()]) {
                continue;
            }
            let mut cfg = DetectorConfig::new(k);
            cfg.epsilon_scale = args.c;
            cfg.restarts = args.restarts;
            cfg.max_iters = args.max_iters;
            cfg.seed = seed;
            let start = Instant::now();
            let res = detect(&g, &cfg)?;
            let wall = start.elapsed().as_millis() as i64;
            let accuracy: Cell = match &target_set {
                Some(t) => subgraph_accuracy(&res.set, t)?.into(),
                None => "".into(),
            };
            out.push(vec![
                "k".into(),
                k.into(),
                (seed as i64).into(),
                res.epsilon.into(),
                res.exact_met.into(),
                res.energy.into(),
                accuracy,
                res.iterations.into(),
                res.converged.to_string().into(),
                wall.into(),
            ])?;
        }
    }
    out.finish()
}

fn sweep_epsilon(args: &SweepArgs, grid: &[(String, Vec<f64>)]) -> Result<()> {
    let g = sweep_graph(args)?;
    let ells = grid_axis(grid, "ell")?;
    let k_classes = args
        .k_classes
        .ok_or_else(|| Error::Validation("epsilon sweep needs --K".into()))?;
    let labels_path = args
        .labels
        .as_ref()
        .ok_or_else(|| Error::Validation("epsilon sweep needs --labels for purity".into()))?;
    let pairs = read_labels(labels_path, &g)?;
    let (reference, _) = reference_classes(&g, &pairs);

    let columns = vec![
        "kind", "ell", "nu", "epsilon", "seed", "purity", "energy", "iterations", "converged",
        "wall_ms",
    ];
    let mut out = CsvSink::open(&args.out, columns, &["ell", "seed"], args.resume)?;
    for seed in args.base_seed..args.base_seed + args.seeds {
        let mut cfg = PartitionerConfig::new(k_classes);
        cfg.epsilon_scale = args.c;
        cfg.restarts = args.restarts;
        cfg.max_iters = args.max_iters;
        cfg.seed = seed;
        for &ell in &ells {
            if out.skip(&[Cell::Float(ell).render(), seed.to_string()]) {
                continue;
            }
            let start = Instant::now();
            let rows = epsilon_sweep(&g, &cfg, &[ell], &reference)?;
            let wall = start.elapsed().as_millis() as i64;
            let row = &rows[0];
            out.push(vec![
                "epsilon".into(),
                row.ell.into(),
                row.nu.into(),
                row.epsilon.into(),
                (seed as i64).into(),
                row.purity.into(),
                row.energy.into(),
                row.iterations.into(),
                row.converged.to_string().into(),
                wall.into(),
            ])?;
        }
    }
    out.finish()
}

fn sweep_generated(args: &SweepArgs, grid: &[(String, Vec<f64>)]) -> Result<()> {
    let spec_path = args
        .spec
        .as_ref()
        .ok_or_else(|| Error::Validation("noise/powerlaw sweeps need --spec".into()))?;
    let base_kv = parse_key_values(&read_to_string(spec_path)?)?;
    let algo = args
        .algo
        .ok_or_else(|| Error::Validation("noise/powerlaw sweeps need --algo".into()))?;
    let powerlaw = args.kind == SweepKind::Powerlaw;
    if algo == Algo::Detect && args.k.is_none() {
        return Err(Error::Validation("--algo detect needs --k".into()));
    }
    if algo == Algo::Partition && args.k_classes.is_none() {
        return Err(Error::Validation("--algo partition needs --K".into()));
    }

    let axes: Vec<&str> = if powerlaw {
        vec!["q", "inter_density"]
    } else {
        vec!["inter_density", "inter_weight"]
    };
    let axis_a = grid_axis(grid, axes[0])?;
    let axis_b = grid_axis(grid, axes[1])?;

    let mut columns: Vec<String> = vec!["kind".into(), "algo".into()];
    columns.extend(axes.iter().map(|s| s.to_string()));
    columns.extend(["seed", "score", "tau", "energy", "iterations", "wall_ms"].map(String::from));
    let key_cols: Vec<&str> = vec![axes[0], axes[1], "seed"];
    let mut out = CsvSink::open(&args.out, columns, &key_cols, args.resume)?;

    let kind_name = if powerlaw { "powerlaw" } else { "noise" };
    for &a in &axis_a {
        for &b in &axis_b {
            for seed in args.base_seed..args.base_seed + args.seeds {
                if out.skip(&[
                    Cell::Float(a).render(),
                    Cell::Float(b).render(),
                    seed.to_string(),
                ]) {
                    continue;
                }
                let mut spec = mickee_spec_from_kv(&base_kv)?;
                spec.seed = seed;
                if powerlaw {
                    spec.powerlaw_exponent = Some(a);
                    spec.inter_density = b;
                } else {
                    spec.inter_density = a;
                    spec.inter_weights = InterWeights::Constant(b);
                }
                let start = Instant::now();
                let (g, groups) = if powerlaw {
                    generate_powerlaw_mickee(&spec)?
                } else {
                    generate_mickee(&spec)?
                };
                let (score, tau, energy, iterations) = match algo {
                    Algo::Detect => {
                        let planted: Vec<usize> = (0..g.n()).filter(|&i| groups[i] == 0).collect();
                        let mut cfg = DetectorConfig::new(args.k.expect("checked"));
                        cfg.epsilon_scale = args.c;
                        cfg.restarts = args.restarts;
                        cfg.max_iters = args.max_iters;
                        cfg.seed = seed;
                        let res = detect(&g, &cfg)?;
                        (
                            subgraph_accuracy(&res.set, &planted)?,
                            res.exact_met,
                            res.energy,
                            res.iterations,
                        )
                    }
                    Algo::Partition => {
                        let reference: Vec<Option<usize>> =
                            groups.iter().map(|&b| Some(b)).collect();
                        let mut cfg = PartitionerConfig::new(args.k_classes.expect("checked"));
                        cfg.epsilon_scale = args.c;
                        cfg.nu = args.nu;
                        cfg.restarts = args.restarts;
                        cfg.max_iters = args.max_iters;
                        cfg.seed = seed;
                        let part = partition(&g, &cfg)?;
                        (purity(&part.labels, &reference)?, f64::NAN, part.energy, part.iterations)
                    }
                };
                let wall = start.elapsed().as_millis() as i64;
                let algo_name = match algo {
                    Algo::Detect => "detect",
                    Algo::Partition => "partition",
                };
                let tau_cell: Cell = if tau.is_nan() { "".into() } else { tau.into() };
                out.push(vec![
                    kind_name.into(),
                    algo_name.into(),
                    a.into(),
                    b.into(),
                    (seed as i64).into(),
                    score.into(),
                    tau_cell,
                    energy.into(),
                    iterations.into(),
                    wall.into(),
                ])?;
            }
        }
    }
    out.finish()
}

fn sweep_supervision(args: &SweepArgs, grid: &[(String, Vec<f64>)]) -> Result<()> {
    let g = sweep_graph(args)?;
    let k_classes = args
        .k_classes
        .ok_or_else(|| Error::Validation("supervision sweep needs --K".into()))?;
    let labels_path = args
        .labels
        .as_ref()
        .ok_or_else(|| Error::Validation("supervision sweep needs --labels".into()))?;
    let pairs = read_labels(labels_path, &g)?;
    let (reference, class_names) = reference_classes(&g, &pairs);
    if class_names.len() > k_classes {
        return Err(Error::Validation(format!(
            "label file has {} classes but K = {k_classes}",
            class_names.len()
        )));
    }
    let fracs = grid_axis(grid, "frac")?;
    let nus = grid_axis(grid, "nu").unwrap_or_else(|_| vec![1.0]);

    let columns = vec![
        "kind", "frac", "nu", "seed", "lambda", "purity", "energy", "iterations", "wall_ms",
    ];
    let mut out = CsvSink::open(&args.out, columns, &["frac", "nu", "seed"], args.resume)?;
    for &frac in &fracs {
        for &nu in &nus {
            for seed in args.base_seed..args.base_seed + args.seeds {
                if out.skip(&[
                    Cell::Float(frac).render(),
                    Cell::Float(nu).render(),
                    seed.to_string(),
                ]) {
                    continue;
                }
                let mut cfg = PartitionerConfig::new(k_classes);
                cfg.epsilon_scale = args.c;
                cfg.nu = nu;
                cfg.restarts = args.restarts;
                cfg.max_iters = args.max_iters;
                cfg.seed = seed;
                if frac > 0.0 {
                    cfg.supervision = Some(sample_partition_supervision(
                        &reference, k_classes, frac, args.lambda, seed,
                    ));
                }
                let start = Instant::now();
                let part = partition(&g, &cfg)?;
                let wall = start.elapsed().as_millis() as i64;
                let p = purity(&part.labels, &reference)?;
                out.push(vec![
                    "supervision".into(),
                    frac.into(),
                    nu.into(),
                    (seed as i64).into(),
                    args.lambda.into(),
                    p.into(),
                    part.energy.into(),
                    part.iterations.into(),
                    wall.into(),
                ])?;
            }
        }
    }
    out.finish()
}

// --------------------------------------------------------------------- met

fn cmd_met(args: MetArgs) -> Result<()> {
    let g = args.input.load()?;
    let set = read_node_set(&args.set, &g)?;
    let exact = solve_exact_met(&g, &set)?;
    let mc = match args.monte_carlo {
        Some(walks) => {
            let est = monte_carlo_met(&g, &set, walks, args.seed)?;
            Some(serde_json::json!({
                "tau_hat": est.tau_hat,
                "stderr": est.stderr,
                "walks_per_node": walks,
            }))
        }
        None => None,
    };
    let record = serde_json::json!({
        "set_size": set.len(),
        "tau": exact.tau,
        "monte_carlo": mc,
    });
    println!("{}", serde_json::to_string_pretty(&record).expect("json"));
    Ok(())
}

// ------------------------------------------------------------------ oracle

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let g = args.input.load()?;
    let record = if let Some(k) = args.best_subgraph {
        let (set, tau) = brute_force_best_subgraph(&g, k)?;
        serde_json::json!({
            "kind": "best-subgraph",
            "k": k,
            "set": set.iter().map(|&i| g.display_name(i)).collect::<Vec<_>>(),
            "tau": tau,
        })
    } else if let Some(k) = args.best_partition {
        let epsilon = args
            .epsilon
            .unwrap_or_else(|| 50.0 / g.laplacian_frobenius());
        let labels = brute_force_best_partition(&g, k, epsilon)?;
        serde_json::json!({
            "kind": "best-partition",
            "k_classes": k,
            "epsilon": epsilon,
            "labels": labels
                .iter()
                .enumerate()
                .map(|(i, &c)| serde_json::json!([g.display_name(i), c + 1]))
                .collect::<Vec<_>>(),
        })
    } else {
        return Err(Error::Validation(
            "oracle needs --best-subgraph K or --best-partition K".into(),
        ));
    };
    println!("{}", serde_json::to_string_pretty(&record).expect("json"));
    Ok(())
}

// ----------------------------------------------------------------- helpers

fn load_graph(path: &Path, opts: &LoadOptions) -> Result<Graph> {
    let mut file = BufReader::new(File::open(path)?);
    let mut head = String::new();
    file.read_line(&mut head)?;
    let mut rest = String::new();
    file.read_to_string(&mut rest)?;
    let full = format!("{head}{rest}");
    let is_mtx = head.trim_start().to_lowercase().starts_with("%%matrixmarket")
        || path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mtx"));
    if is_mtx {
        Graph::from_matrix_market(full.as_bytes(), opts)
    } else {
        Graph::from_edge_list(full.as_bytes(), opts)
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

/// `node label` pairs resolved against the graph's node ids; nodes unknown to
/// the graph are rejected.
fn read_labels(path: &Path, g: &Graph) -> Result<Vec<(usize, String)>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 2 {
            return Err(Error::Parse {
                line: line_no + 1,
                msg: "expected `node label`".into(),
            });
        }
        let node = g.index_of(toks[0]).ok_or_else(|| Error::Validation(format!(
            "label file names unknown node '{}'",
            toks[0]
        )))?;
        out.push((node, toks[1].to_string()));
    }
    if out.is_empty() {
        return Err(Error::Validation("label file is empty".into()));
    }
    Ok(out)
}

fn read_node_set(path: &Path, g: &Graph) -> Result<Vec<usize>> {
    let text = read_to_string(path)?;
    let mut set = Vec::new();
    for raw in text.lines() {
        let content = raw.split('#').next().unwrap_or("");
        for tok in content.split_whitespace() {
            let node = g
                .index_of(tok)
                .ok_or_else(|| Error::Validation(format!("set file names unknown node '{tok}'")))?;
            set.push(node);
        }
    }
    if set.is_empty() {
        return Err(Error::Validation("set file names no nodes".into()));
    }
    Ok(set)
}

fn emit(record: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(record).expect("json");
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no + 1,
            msg: "expected `key = value`".into(),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn kv_get<'a>(kv: &'a [(String, String)], key: &str) -> Result<&'a str> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Validation(format!("spec is missing `{key}`")))
}

fn kv_usize(kv: &[(String, String)], key: &str) -> Result<usize> {
    kv_get(kv, key)?
        .parse()
        .map_err(|e| Error::Validation(format!("{key}: {e}")))
}

fn kv_f64(kv: &[(String, String)], key: &str) -> Result<f64> {
    kv_get(kv, key)?
        .parse()
        .map_err(|e| Error::Validation(format!("{key}: {e}")))
}

fn kv_opt_f64(kv: &[(String, String)], key: &str) -> Result<Option<f64>> {
    match kv.iter().find(|(k, _)| k == key) {
        Some((_, v)) => v
            .parse()
            .map(Some)
            .map_err(|e| Error::Validation(format!("{key}: {e}"))),
        None => Ok(None),
    }
}

/// Grid spec: comma-separated `name=start:stop:step` (inclusive) or
/// `name=v1|v2|v3`.
fn parse_grid(spec: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut axes = Vec::new();
    for part in spec.split(',') {
        let (name, body) = part
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("grid part '{part}' wants name=...")))?;
        let name = name.trim().to_string();
        let body = body.trim();
        let values: Vec<f64> = if body.contains('|') {
            body.split('|')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Validation(format!("grid value '{t}': {e}")))
                })
                .collect::<Result<_>>()?
        } else if body.contains(':') {
            let fields: Vec<&str> = body.split(':').collect();
            if fields.len() != 3 {
                return Err(Error::Validation(format!(
                    "grid range '{body}' wants start:stop:step"
                )));
            }
            let parse = |t: &str| -> Result<f64> {
                t.parse()
                    .map_err(|e| Error::Validation(format!("grid value '{t}': {e}")))
            };
            let (start, stop, step) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
            if !(step.is_finite() && step > 0.0) || stop < start {
                return Err(Error::Validation(format!("bad grid range '{body}'")));
            }
            let count = ((stop - start) / step + 0.5).floor() as usize + 1;
            (0..count).map(|i| start + step * i as f64).collect()
        } else {
            vec![body
                .parse::<f64>()
                .map_err(|e| Error::Validation(format!("grid value '{body}': {e}")))?]
        };
        if values.is_empty() {
            return Err(Error::Validation(format!("grid axis '{name}' is empty")));
        }
        axes.push((name, values));
    }
    Ok(axes)
}

fn grid_axis(grid: &[(String, Vec<f64>)], name: &str) -> Result<Vec<f64>> {
    grid.iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| Error::Validation(format!("grid is missing axis '{name}'")))
}

/// CSV sink with append-resume: existing (key) rows are skipped, fresh rows
/// appended; without resume the file is rewritten from scratch.
struct CsvSink {
    table: SweepResult,
    path: PathBuf,
    done: std::collections::HashSet<Vec<String>>,
    resume: bool,
}

impl CsvSink {
    fn open(path: &Path, columns: Vec<&str>, key_cols: &[&str], resume: bool) -> Result<CsvSink> {
        let done = if resume && path.exists() {
            existing_keys(BufReader::new(File::open(path)?), key_cols)?
        } else {
            Default::default()
        };
        Ok(CsvSink {
            table: SweepResult::new(columns),
            path: path.to_path_buf(),
            done,
            resume,
        })
    }

    fn skip(&self, key: &[String]) -> bool {
        self.resume && self.done.contains(key)
    }

    fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        self.table.push_row(row);
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.resume && self.path.exists() && !self.done.is_empty() {
            // Append fresh rows without the header.
            let mut buf = Vec::new();
            self.table.write_csv(&mut buf)?;
            let text = String::from_utf8(buf).expect("csv is utf-8");
            let mut f = std::fs::OpenOptions::new().append(true).open(&self.path)?;
            for line in text.lines().skip(1) {
                writeln!(f, "{line}")?;
            }
        } else {
            let mut w = BufWriter::new(File::create(&self.path)?);
            self.table.write_csv(&mut w)?;
            w.flush()?;
        }
        Ok(())
    }
}
