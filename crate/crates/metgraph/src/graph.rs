//! Weighted directed graphs in compressed sparse row form, plus the degree
//! and Laplacian quantities every solver consumes.
//!
//! Graphs are immutable after construction and safe to share across threads.
//! Node ids from input files are mapped to dense 0-based indices in first
//! appearance order so that identical inputs always produce identical graphs.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::util::kahan_sum;
use crate::{Error, Result};

/// Sparse row-major matrix with f64 entries. Rows store columns in ascending
/// order; explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from triplets. Duplicate (row, col) entries are summed; entries
    /// that sum to exactly zero are dropped.
    pub(crate) fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &mut Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, _) = triplets[i];
            let mut w = 0.0;
            while i < triplets.len() && triplets[i].0 == r && triplets[i].1 == c {
                w += triplets[i].2;
                i += 1;
            }
            if w != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(w);
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as (column, value), columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn diagonal_entry(&self, i: usize) -> f64 {
        self.row(i)
            .find(|&(j, _)| j == i)
            .map(|(_, w)| w)
            .unwrap_or(0.0)
    }

    /// y = A x.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            for (j, w) in self.row(i) {
                triplets.push((j, i, w));
            }
        }
        SparseMatrix::from_triplets(self.n_cols, self.n_rows, &mut triplets)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, w) in self.row(i) {
                m[(i, j)] = w;
            }
        }
        m
    }
}

/// Options applied while reading an edge list or adjacency file.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Replace A by (A + A^T) / 2 after reading.
    pub symmetrize: bool,
    /// Give every node with zero out-degree a self-loop of this weight
    /// instead of rejecting the graph.
    pub add_self_loops: Option<f64>,
}

/// Immutable weighted directed graph. Edge weight `A[i][j] >= 0` is the weight
/// of the edge i -> j; the out-degree vector is the row-sum of A, accumulated
/// with compensated summation left to right by column index.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: SparseMatrix,
    adj_t: SparseMatrix,
    out_degree: Vec<f64>,
    node_names: Option<Vec<String>>,
}

impl Graph {
    /// Build a graph from weighted directed edges over nodes 0..n. Parallel
    /// edges are summed; zero-weight edges are dropped. Every node must end
    /// up with positive out-degree.
    pub fn from_weighted_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        node_names: Option<Vec<String>>,
    ) -> Result<Graph> {
        if n == 0 {
            return Err(Error::Validation("graph has no nodes".into()));
        }
        if let Some(names) = &node_names {
            if names.len() != n {
                return Err(Error::Validation(format!(
                    "{} node names for {} nodes",
                    names.len(),
                    n
                )));
            }
        }
        let mut triplets = Vec::with_capacity(edges.len());
        for &(src, dst, w) in edges {
            if src >= n || dst >= n {
                return Err(Error::Validation(format!(
                    "edge ({src}, {dst}) out of range for {n} nodes"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!(
                    "edge ({src}, {dst}) has invalid weight {w}"
                )));
            }
            if w > 0.0 {
                triplets.push((src, dst, w));
            }
        }
        let adj = SparseMatrix::from_triplets(n, n, &mut triplets);
        Graph::from_adjacency(adj, node_names)
    }

    fn from_adjacency(adj: SparseMatrix, node_names: Option<Vec<String>>) -> Result<Graph> {
        let n = adj.n_rows();
        let mut out_degree = Vec::with_capacity(n);
        for i in 0..n {
            let d = kahan_sum(adj.row(i).map(|(_, w)| w));
            if d <= 0.0 {
                let name = node_names
                    .as_ref()
                    .map(|ns| ns[i].clone())
                    .unwrap_or_else(|| i.to_string());
                return Err(Error::Validation(format!(
                    "node '{name}' has zero out-degree; every node needs an outgoing edge \
                     (or load with add_self_loops)"
                )));
            }
            out_degree.push(d);
        }
        let adj_t = adj.transpose();
        Ok(Graph {
            adj,
            adj_t,
            out_degree,
            node_names,
        })
    }

    /// Parse a whitespace-separated edge list: `src dst [weight]` per line,
    /// `#` starts a comment, node ids are arbitrary strings. Weight defaults
    /// to 1. MatrixMarket input is handled by [`Graph::from_matrix_market`].
    pub fn from_edge_list<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Graph> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut names: Vec<String> = Vec::new();
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = line_no + 1;
            let content = match line.find('#') {
                Some(pos) => &line[..pos],
                None => &line[..],
            };
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            if tokens.len() > 3 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `src dst [weight]`, found {} fields", tokens.len()),
                });
            }
            if tokens.len() < 2 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected `src dst [weight]`".into(),
                });
            }
            let mut id_of = |tok: &str| -> usize {
                *index.entry(tok.to_string()).or_insert_with(|| {
                    names.push(tok.to_string());
                    names.len() - 1
                })
            };
            let src = id_of(tokens[0]);
            let dst = id_of(tokens[1]);
            let w = if tokens.len() == 3 {
                tokens[2].parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad weight '{}': {e}", tokens[2]),
                })?
            } else {
                1.0
            };
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!(
                    "line {line_no}: negative or non-finite weight {w}"
                )));
            }
            edges.push((src, dst, w));
        }
        if names.is_empty() {
            return Err(Error::Validation("edge list has no edges".into()));
        }
        finish_load(names.len(), edges, Some(names), opts)
    }

    /// Parse MatrixMarket coordinate format (`real`, `integer`, or `pattern`;
    /// `general` or `symmetric`) as an adjacency matrix. Indices are 1-based.
    pub fn from_matrix_market<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<Graph> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Validation("empty MatrixMarket file".into()))?;
        let header = header?;
        let fields: Vec<String> = header.split_whitespace().map(|s| s.to_lowercase()).collect();
        if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[2] != "coordinate" {
            return Err(Error::Parse {
                line: 1,
                msg: "expected `%%MatrixMarket matrix coordinate ...` header".into(),
            });
        }
        let pattern = match fields[3].as_str() {
            "real" | "integer" => false,
            "pattern" => true,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unsupported field type '{other}'"),
                })
            }
        };
        let symmetric = match fields[4].as_str() {
            "general" => false,
            "symmetric" => true,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unsupported symmetry '{other}'"),
                })
            }
        };

        let mut size: Option<(usize, usize, usize)> = None;
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for (line_no, line) in lines {
            let line = line?;
            let line_no = line_no + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            if size.is_none() {
                if toks.len() != 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "expected `rows cols nnz`".into(),
                    });
                }
                let parse = |t: &str| -> Result<usize> {
                    t.parse().map_err(|e| Error::Parse {
                        line: line_no,
                        msg: format!("bad size '{t}': {e}"),
                    })
                };
                let (r, c, nnz) = (parse(toks[0])?, parse(toks[1])?, parse(toks[2])?);
                if r != c {
                    return Err(Error::Validation(format!(
                        "adjacency matrix must be square, got {r} x {c}"
                    )));
                }
                size = Some((r, c, nnz));
                edges.reserve(nnz);
                continue;
            }
            let expected = if pattern { 2 } else { 3 };
            if toks.len() != expected {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {expected} fields"),
                });
            }
            let parse_idx = |t: &str| -> Result<usize> {
                let v: usize = t.parse().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad index '{t}': {e}"),
                })?;
                if v == 0 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "MatrixMarket indices are 1-based".into(),
                    });
                }
                Ok(v - 1)
            };
            let i = parse_idx(toks[0])?;
            let j = parse_idx(toks[1])?;
            let w = if pattern {
                1.0
            } else {
                toks[2].parse::<f64>().map_err(|e| Error::Parse {
                    line: line_no,
                    msg: format!("bad value '{}': {e}", toks[2]),
                })?
            };
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!(
                    "line {line_no}: negative or non-finite weight {w}"
                )));
            }
            edges.push((i, j, w));
            if symmetric && i != j {
                edges.push((j, i, w));
            }
        }
        let (n, _, _) = size.ok_or_else(|| Error::Validation("missing size line".into()))?;
        finish_load(n, edges, None, opts)
    }

    /// Write the graph as an edge list that round-trips bit-exactly through
    /// [`Graph::from_edge_list`]: one `src dst weight` line per stored edge,
    /// rows in index order, weights in shortest round-trip decimal form.
    pub fn to_edge_list<W: Write>(&self, mut writer: W) -> Result<()> {
        for i in 0..self.n() {
            for (j, w) in self.adj.row(i) {
                writeln!(
                    writer,
                    "{} {} {}",
                    self.display_name(i),
                    self.display_name(j),
                    w
                )?;
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.adj.n_rows()
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adj
    }

    /// Transposed adjacency (in-edges), cached at construction.
    pub fn adjacency_transpose(&self) -> &SparseMatrix {
        &self.adj_t
    }

    pub fn out_degree(&self) -> &[f64] {
        &self.out_degree
    }

    pub fn node_names(&self) -> Option<&[String]> {
        self.node_names.as_deref()
    }

    /// Name of node `i` for display: the input id when one exists, otherwise
    /// the dense index.
    pub fn display_name(&self, i: usize) -> String {
        match &self.node_names {
            Some(names) => names[i].clone(),
            None => i.to_string(),
        }
    }

    /// Dense index of an input node id.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        match &self.node_names {
            Some(names) => names.iter().position(|n| n == name),
            None => name.parse::<usize>().ok().filter(|&i| i < self.n()),
        }
    }

    /// The unnormalized out-degree Laplacian L = D - A as an explicit sparse
    /// matrix. Every row sums to zero up to roundoff.
    pub fn laplacian(&self) -> SparseMatrix {
        let n = self.n();
        let mut triplets = Vec::with_capacity(self.adj.nnz() + n);
        for i in 0..n {
            for (j, w) in self.adj.row(i) {
                triplets.push((i, j, -w));
            }
            triplets.push((i, i, self.out_degree[i]));
        }
        SparseMatrix::from_triplets(n, n, &mut triplets)
    }

    /// Frobenius norm of the Laplacian, `sqrt(sum L_ij^2)`. Positive for any
    /// graph accepted by the constructor.
    pub fn laplacian_frobenius(&self) -> f64 {
        let lap = self.laplacian();
        let mut squares = Vec::with_capacity(lap.nnz());
        for i in 0..lap.n_rows() {
            for (_, w) in lap.row(i) {
                squares.push(w * w);
            }
        }
        kahan_sum(squares.into_iter()).sqrt()
    }

    /// True iff every node reaches every other node along directed edges
    /// (two-pass reachability from node 0 on A and A^T).
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.n();
        if n <= 1 {
            return true;
        }
        reachable_count(&self.adj, 0) == n && reachable_count(&self.adj_t, 0) == n
    }

    /// Nodes in `set` from which the complement of `set` is unreachable along
    /// directed edges. Empty for strongly connected graphs and proper subsets.
    pub(crate) fn trapped_in(&self, in_set: &[bool]) -> Vec<usize> {
        let n = self.n();
        let mut can_escape = vec![false; n];
        let mut queue: Vec<usize> = (0..n).filter(|&i| !in_set[i]).collect();
        for &i in &queue {
            can_escape[i] = true;
        }
        // Backward BFS over in-edges: anything that reaches the frontier escapes.
        while let Some(node) = queue.pop() {
            for (pred, _) in self.adj_t.row(node) {
                if !can_escape[pred] {
                    can_escape[pred] = true;
                    queue.push(pred);
                }
            }
        }
        (0..n).filter(|&i| in_set[i] && !can_escape[i]).collect()
    }

    /// Graph with adjacency (A + A^T) / 2. Idempotent bit-for-bit.
    pub fn symmetrize(&self) -> Graph {
        let n = self.n();
        let mut triplets = Vec::with_capacity(2 * self.adj.nnz());
        for i in 0..n {
            for (j, w) in self.adj.row(i) {
                triplets.push((i, j, w / 2.0));
            }
            for (j, w) in self.adj_t.row(i) {
                triplets.push((i, j, w / 2.0));
            }
        }
        let adj = SparseMatrix::from_triplets(n, n, &mut triplets);
        Graph::from_adjacency(adj, self.node_names.clone())
            .expect("symmetrizing preserves positive out-degrees")
    }
}

fn finish_load(
    n: usize,
    mut edges: Vec<(usize, usize, f64)>,
    names: Option<Vec<String>>,
    opts: &LoadOptions,
) -> Result<Graph> {
    if let Some(w) = opts.add_self_loops {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::Validation(format!("self-loop weight must be positive, got {w}")));
        }
        let mut has_out = vec![false; n];
        for &(src, _, w) in &edges {
            if w > 0.0 {
                has_out[src] = true;
            }
        }
        for i in 0..n {
            if !has_out[i] {
                edges.push((i, i, w));
            }
        }
    }
    let g = Graph::from_weighted_edges(n, &edges, names)?;
    if opts.symmetrize {
        Ok(g.symmetrize())
    } else {
        Ok(g)
    }
}

fn reachable_count(adj: &SparseMatrix, start: usize) -> usize {
    let n = adj.n_rows();
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut stack = vec![start];
    let mut count = 1;
    while let Some(node) = stack.pop() {
        for (next, _) in adj.row(node) {
            if !seen[next] {
                seen[next] = true;
                count += 1;
                stack.push(next);
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn load(text: &str) -> Result<Graph> {
        Graph::from_edge_list(Cursor::new(text), &LoadOptions::default())
    }

    pub(crate) fn directed_cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Graph::from_weighted_edges(n, &edges, None).unwrap()
    }

    #[test]
    fn two_node_pair() {
        let g = load("a b 1\nb a 1\n").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.out_degree(), &[1.0, 1.0]);
        assert_eq!(g.index_of("a"), Some(0));
        assert_eq!(g.index_of("b"), Some(1));
    }

    #[test]
    fn directed_three_cycle_degrees() {
        let g = load("0 1\n1 2\n2 0\n").unwrap();
        assert_eq!(g.out_degree(), &[1.0, 1.0, 1.0]);
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn negative_weight_rejected() {
        let err = load("0 1 -2\n1 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = load("0 1 1\nonly_one_token\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn dangling_node_named_in_error() {
        let err = load("a b 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("'b'"), "{msg}");
    }

    #[test]
    fn self_loop_option_repairs_dangling() {
        let opts = LoadOptions {
            add_self_loops: Some(0.5),
            ..Default::default()
        };
        let g = Graph::from_edge_list(Cursor::new("a b 1\n"), &opts).unwrap();
        assert_eq!(g.out_degree(), &[1.0, 0.5]);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let g = load("# header\n\na b 1 # trailing\nb a 2\n").unwrap();
        assert_eq!(g.out_degree(), &[1.0, 2.0]);
    }

    #[test]
    fn parallel_edges_summed() {
        let g = load("a b 1\na b 2.5\nb a 1\n").unwrap();
        assert_eq!(g.out_degree()[0], 3.5);
        assert_eq!(g.adjacency().nnz(), 2);
    }

    #[test]
    fn laplacian_two_node_pair() {
        let g = load("a b 1\nb a 1\n").unwrap();
        let l = g.laplacian().to_dense();
        let expected = nalgebra::dmatrix![1.0, -1.0; -1.0, 1.0];
        assert_eq!(l, expected);
    }

    #[test]
    fn laplacian_directed_cycle() {
        let g = directed_cycle(3);
        let l = g.laplacian().to_dense();
        let expected = nalgebra::dmatrix![1.0, -1.0, 0.0; 0.0, 1.0, -1.0; -1.0, 0.0, 1.0];
        assert_eq!(l, expected);
    }

    #[test]
    fn laplacian_rows_sum_to_zero_on_random_graphs() {
        for seed in 0..100u64 {
            let g = crate::synth::random_strongly_connected(20, 0.2, seed);
            let lap = g.laplacian();
            for i in 0..g.n() {
                // Row sums match the degree definition exactly by construction.
                let row_sum = kahan_sum(g.adjacency().row(i).map(|(_, w)| w));
                assert_eq!(g.out_degree()[i] - row_sum, 0.0);
                // The explicit Laplacian rows vanish up to roundoff.
                let l_sum = kahan_sum(lap.row(i).map(|(_, w)| w));
                assert!(l_sum.abs() <= 1e-12 * g.out_degree()[i].max(1.0));
            }
        }
    }

    #[test]
    fn frobenius_small_cases() {
        let pair = load("a b 1\nb a 1\n").unwrap();
        assert!((pair.laplacian_frobenius() - 2.0).abs() < 1e-15);
        let cyc = directed_cycle(3);
        assert!((cyc.laplacian_frobenius() - 6.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn frobenius_matches_dense_recomputation() {
        let g = crate::synth::random_strongly_connected(100, 0.08, 7);
        let dense = g.laplacian().to_dense();
        let direct = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = (g.laplacian_frobenius() - direct).abs() / direct;
        assert!(rel < 1e-12, "rel err {rel}");
    }

    #[test]
    fn path_is_not_strongly_connected() {
        let g = load("0 1\n1 2\n2 2 1\n").unwrap();
        assert!(!g.is_strongly_connected());
    }

    #[test]
    fn matrix_market_general_and_symmetric() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n3 3 3\n1 2 1.0\n2 3 1.0\n3 1 1.0\n";
        let g = Graph::from_matrix_market(Cursor::new(text), &LoadOptions::default()).unwrap();
        assert_eq!(g.out_degree(), &[1.0, 1.0, 1.0]);
        assert!(g.is_strongly_connected());

        let sym = "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n";
        let g = Graph::from_matrix_market(Cursor::new(sym), &LoadOptions::default()).unwrap();
        assert_eq!(g.out_degree(), &[1.0, 1.0]);
    }

    #[test]
    fn symmetrize_averages_and_is_idempotent() {
        let g = load("a b 2\nb a 0\nb c 1\nc a 1\n").unwrap();
        let s1 = g.symmetrize();
        assert_eq!(s1.adjacency().diagonal_entry(0), 0.0);
        let d = s1.adjacency().to_dense();
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(1, 0)], 1.0);
        let s2 = s1.symmetrize();
        assert_eq!(s1.adjacency(), s2.adjacency());
        assert_eq!(s1.out_degree(), s2.out_degree());
    }

    proptest! {
        #[test]
        fn edge_list_round_trip_is_bit_exact(
            raw_edges in proptest::collection::vec((0usize..8, 0usize..8, 0.01f64..10.0), 1..40)
        ) {
            // Close the node set under a cycle so nothing dangles.
            let n = 8;
            let mut edges: Vec<(usize, usize, f64)> = raw_edges;
            for i in 0..n {
                edges.push((i, (i + 1) % n, 1.0));
            }
            let g = Graph::from_weighted_edges(n, &edges, None).unwrap();
            let mut buf = Vec::new();
            g.to_edge_list(&mut buf).unwrap();
            let g2 = Graph::from_edge_list(Cursor::new(buf), &LoadOptions::default()).unwrap();
            prop_assert_eq!(g.n(), g2.n());
            // Saved ids are dense indices, so first-appearance order can permute
            // them; map names back to compare the edge sets exactly.
            let mut seen: Vec<(usize, usize, f64)> = Vec::new();
            for i in 0..g2.n() {
                let orig_i: usize = g2.display_name(i).parse().unwrap();
                for (j, w) in g2.adjacency().row(i) {
                    let orig_j: usize = g2.display_name(j).parse().unwrap();
                    seen.push((orig_i, orig_j, w));
                }
            }
            seen.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            let mut expected: Vec<(usize, usize, f64)> = Vec::new();
            for i in 0..n {
                for (j, w) in g.adjacency().row(i) {
                    expected.push((i, j, w));
                }
            }
            prop_assert_eq!(seen, expected);
        }
    }
}
