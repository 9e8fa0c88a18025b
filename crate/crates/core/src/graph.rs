//! Directed graphs with node features and labels.
//!
//! [`DiGraph`] stores an ordered edge list over `n` nodes. Edges are directed
//! `(src, dst)` pairs; self-loops are never stored (operators add their own
//! diagonal terms) and duplicates are rejected. An optional ground-truth set
//! marks the edges a generator planted, by index into the edge list.
//!
//! On-disk format: a directory with `edges.csv` (`src,dst` header),
//! `labels.csv` (`node,label` header, one row per node), an optional
//! header-less `features.csv` (one row of floats per node, absent when the
//! graph has no features), and an optional `ground_truth.csv` (`src,dst`).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

/// Sorted, duplicate-free node ids.
pub type NodeSet = BTreeSet<usize>;
/// Sorted, duplicate-free edge indices.
pub type EdgeSet = BTreeSet<usize>;

/// Traversal direction for neighborhood queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge {src}->{dst} references a node outside 0..{n}")]
    EdgeOutOfRange { src: usize, dst: usize, n: usize },
    #[error("duplicate edge {src}->{dst}")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("self-loop {v}->{v} is not representable")]
    SelfLoop { v: usize },
    #[error("feature matrix has {rows} rows but the graph has {n} nodes")]
    FeatureRowMismatch { rows: usize, n: usize },
    #[error("label vector has {len} entries but the graph has {n} nodes")]
    LabelCountMismatch { len: usize, n: usize },
    #[error("ground-truth index {idx} is outside the {m}-edge list")]
    GroundTruthOutOfRange { idx: usize, m: usize },
}

#[derive(Debug, Error)]
pub enum GraphIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Train/val/test node masks. The masks are mutually disjoint; their union may
/// leave nodes out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Split {
    pub fn empty(n: usize) -> Self {
        Split { train: vec![false; n], val: vec![false; n], test: vec![false; n] }
    }

    /// All nodes assigned to training; used by oracle harnesses on tiny graphs.
    pub fn all_train(n: usize) -> Self {
        Split { train: vec![true; n], val: vec![false; n], test: vec![false; n] }
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        mask_nodes(&self.train)
    }
    pub fn val_nodes(&self) -> Vec<usize> {
        mask_nodes(&self.val)
    }
    pub fn test_nodes(&self) -> Vec<usize> {
        mask_nodes(&self.test)
    }

    pub fn is_disjoint(&self) -> bool {
        self.train
            .iter()
            .zip(&self.val)
            .zip(&self.test)
            .all(|((&a, &b), &c)| (a as u8 + b as u8 + c as u8) <= 1)
    }
}

fn mask_nodes(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

/// Directed graph over `n` nodes with an `n x c` feature matrix (`c` may be 0)
/// and one integer label per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    labels: Vec<usize>,
    ground_truth: Option<EdgeSet>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    edge_ids: BTreeMap<(usize, usize), usize>,
}

impl DiGraph {
    /// Builds a graph from an arbitrary edge list. The list is sorted into the
    /// canonical lexicographic order before indices are assigned.
    pub fn from_edge_list(
        n: usize,
        mut edges: Vec<(usize, usize)>,
        features: Array2<f64>,
        labels: Vec<usize>,
    ) -> Result<DiGraph, GraphError> {
        edges.sort_unstable();
        Self::from_ordered_edges(n, edges, features, labels)
    }

    /// Builds a graph keeping the given edge order. Used where indices must
    /// stay aligned with an existing graph (symmetrization appends reverse
    /// edges after the originals instead of re-sorting).
    pub fn from_ordered_edges(
        n: usize,
        edges: Vec<(usize, usize)>,
        features: Array2<f64>,
        labels: Vec<usize>,
    ) -> Result<DiGraph, GraphError> {
        if features.nrows() != n {
            return Err(GraphError::FeatureRowMismatch { rows: features.nrows(), n });
        }
        if labels.len() != n {
            return Err(GraphError::LabelCountMismatch { len: labels.len(), n });
        }
        let mut edge_ids = BTreeMap::new();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (idx, &(src, dst)) in edges.iter().enumerate() {
            if src >= n || dst >= n {
                return Err(GraphError::EdgeOutOfRange { src, dst, n });
            }
            if src == dst {
                return Err(GraphError::SelfLoop { v: src });
            }
            if edge_ids.insert((src, dst), idx).is_some() {
                return Err(GraphError::DuplicateEdge { src, dst });
            }
            out_adj[src].push(dst);
            in_adj[dst].push(src);
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_unstable();
        }
        Ok(DiGraph { n, edges, features, labels, ground_truth: None, out_adj, in_adj, edge_ids })
    }

    /// Attaches generator-planted ground-truth edges, by index into the
    /// (already canonical) edge list.
    pub fn with_ground_truth(mut self, gt: EdgeSet) -> Result<DiGraph, GraphError> {
        let m = self.edges.len();
        if let Some(&idx) = gt.iter().find(|&&i| i >= m) {
            return Err(GraphError::GroundTruthOutOfRange { idx, m });
        }
        self.ground_truth = Some(gt);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
    pub fn edge(&self, idx: usize) -> (usize, usize) {
        self.edges[idx]
    }
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }
    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }
    pub fn ground_truth(&self) -> Option<&EdgeSet> {
        self.ground_truth.as_ref()
    }
    pub fn edge_id(&self, src: usize, dst: usize) -> Option<usize> {
        self.edge_ids.get(&(src, dst)).copied()
    }
    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edge_ids.contains_key(&(src, dst))
    }
    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out_adj[v]
    }
    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_adj[v]
    }
    pub fn out_degree(&self, v: usize) -> usize {
        self.out_adj[v].len()
    }
    pub fn in_degree(&self, v: usize) -> usize {
        self.in_adj[v].len()
    }

    /// Number of distinct classes, assuming labels are dense in `0..k`.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    /// Graph with every edge flipped, in canonical order. Features, labels,
    /// and ground truth carry over (ground-truth indices are remapped to the
    /// flipped edges).
    pub fn reverse(&self) -> DiGraph {
        let flipped: Vec<(usize, usize)> = self.edges.iter().map(|&(s, d)| (d, s)).collect();
        let mut rev = DiGraph::from_edge_list(
            self.n,
            flipped,
            self.features.clone(),
            self.labels.clone(),
        )
        .expect("reversing a valid graph cannot fail");
        if let Some(gt) = &self.ground_truth {
            let mapped: EdgeSet = gt
                .iter()
                .map(|&idx| {
                    let (s, d) = self.edges[idx];
                    rev.edge_id(d, s).expect("flipped edge exists")
                })
                .collect();
            rev = rev.with_ground_truth(mapped).expect("indices in range");
        }
        rev
    }

    /// True when every edge has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(s, d)| self.has_edge(d, s))
    }

    /// Nodes reachable from `v` in at most `k` steps following the given
    /// direction. Always contains `v` itself (`k = 0` gives exactly `{v}`).
    pub fn k_hop_neighborhood(&self, v: usize, k: usize, dir: Direction) -> NodeSet {
        assert!(v < self.n, "node {v} out of range for n={}", self.n);
        let mut seen = NodeSet::new();
        seen.insert(v);
        let mut frontier = VecDeque::from([(v, 0usize)]);
        while let Some((u, depth)) = frontier.pop_front() {
            if depth == k {
                continue;
            }
            let next: Box<dyn Iterator<Item = usize>> = match dir {
                Direction::Out => Box::new(self.out_adj[u].iter().copied()),
                Direction::In => Box::new(self.in_adj[u].iter().copied()),
                Direction::Both => {
                    Box::new(self.out_adj[u].iter().chain(self.in_adj[u].iter()).copied())
                }
            };
            for w in next {
                if seen.insert(w) {
                    frontier.push_back((w, depth + 1));
                }
            }
        }
        seen
    }

    /// Indices of edges with both endpoints inside `nodes`.
    pub fn induced_edges(&self, nodes: &NodeSet) -> EdgeSet {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, (s, d))| nodes.contains(s) && nodes.contains(d))
            .map(|(i, _)| i)
            .collect()
    }

    /// Writes the CSV directory format. `dir` is created if missing.
    pub fn save_csv_dir(&self, dir: &Path) -> Result<(), GraphIoError> {
        std::fs::create_dir_all(dir)?;
        let mut edges = String::from("src,dst\n");
        for &(s, d) in &self.edges {
            let _ = writeln!(edges, "{s},{d}");
        }
        std::fs::write(dir.join("edges.csv"), edges)?;

        let mut labels = String::from("node,label\n");
        for (i, &l) in self.labels.iter().enumerate() {
            let _ = writeln!(labels, "{i},{l}");
        }
        std::fs::write(dir.join("labels.csv"), labels)?;

        if self.features.ncols() > 0 {
            let mut feats = String::new();
            for row in self.features.rows() {
                let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
                let _ = writeln!(feats, "{}", line.join(","));
            }
            std::fs::write(dir.join("features.csv"), feats)?;
        }

        if let Some(gt) = &self.ground_truth {
            let mut out = String::from("src,dst\n");
            for &idx in gt {
                let (s, d) = self.edges[idx];
                let _ = writeln!(out, "{s},{d}");
            }
            std::fs::write(dir.join("ground_truth.csv"), out)?;
        }
        Ok(())
    }

    /// Reads the CSV directory format written by [`DiGraph::save_csv_dir`].
    pub fn load_csv_dir(dir: &Path) -> Result<DiGraph, GraphIoError> {
        let labels_path = dir.join("labels.csv");
        let labels = read_labels(&labels_path)?;
        let n = labels.len();

        let edges = read_edge_pairs(&dir.join("edges.csv"))?;

        let features_path = dir.join("features.csv");
        let features = if features_path.exists() {
            read_features(&features_path, n)?
        } else {
            Array2::zeros((n, 0))
        };

        let mut g = DiGraph::from_edge_list(n, edges, features, labels)?;

        let gt_path = dir.join("ground_truth.csv");
        if gt_path.exists() {
            let pairs = read_edge_pairs(&gt_path)?;
            let mut gt = EdgeSet::new();
            for (s, d) in pairs {
                let idx = g.edge_id(s, d).ok_or_else(|| GraphIoError::Parse {
                    file: gt_path.display().to_string(),
                    line: 0,
                    msg: format!("ground-truth edge {s}->{d} not in edge list"),
                })?;
                gt.insert(idx);
            }
            g = g.with_ground_truth(gt)?;
        }
        Ok(g)
    }
}

fn parse_err(file: &Path, line: usize, msg: impl Into<String>) -> GraphIoError {
    GraphIoError::Parse { file: file.display().to_string(), line, msg: msg.into() }
}

fn read_edge_pairs(path: &Path) -> Result<Vec<(usize, usize)>, GraphIoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "src,dst" => {}
        _ => return Err(parse_err(path, 1, "expected header 'src,dst'")),
    }
    let mut pairs = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, i + 1, "expected 'src,dst'"))?;
        let s = a.trim().parse().map_err(|e| parse_err(path, i + 1, format!("src: {e}")))?;
        let d = b.trim().parse().map_err(|e| parse_err(path, i + 1, format!("dst: {e}")))?;
        pairs.push((s, d));
    }
    Ok(pairs)
}

fn read_labels(path: &Path) -> Result<Vec<usize>, GraphIoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "node,label" => {}
        _ => return Err(parse_err(path, 1, "expected header 'node,label'")),
    }
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, i + 1, "expected 'node,label'"))?;
        let node = a.trim().parse().map_err(|e| parse_err(path, i + 1, format!("node: {e}")))?;
        let label = b.trim().parse().map_err(|e| parse_err(path, i + 1, format!("label: {e}")))?;
        rows.push((node, label));
    }
    let n = rows.len();
    let mut labels = vec![0usize; n];
    let mut seen = vec![false; n];
    for (node, label) in rows {
        if node >= n || seen[node] {
            return Err(parse_err(path, 0, format!("node ids must be a permutation of 0..{n}")));
        }
        seen[node] = true;
        labels[node] = label;
    }
    Ok(labels)
}

fn read_features(path: &Path, n: usize) -> Result<Array2<f64>, GraphIoError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|x| x.trim().parse()).collect();
        rows.push(row.map_err(|e| parse_err(path, i + 1, format!("{e}")))?);
    }
    if rows.len() != n {
        return Err(parse_err(path, 0, format!("{} feature rows for {n} nodes", rows.len())));
    }
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(parse_err(path, 0, "ragged feature rows"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, c), flat).expect("shape checked"))
}
