//! Synthetic benchmark graphs with planted explanation targets.
//!
//! Six generators: four undirected classics (preferential-attachment bases or
//! balanced trees with house/cycle/grid motifs, stored as reciprocal directed
//! pairs) and two direction-sensitive constructions whose label signal lives in
//! edge orientation. The direction-sensitive ones are built so that collapsing
//! edge orientation makes the classes structurally indistinguishable, which is
//! exactly the failure mode the rest of the crate measures.
//!
//! Every generator is a pure function of its spec; all randomness flows
//! through labeled streams of the spec seed.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::graph::{DiGraph, EdgeSet, Split};
use crate::rng::{stream, stream_indexed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    BaShapes,
    BaCommunity,
    TreeCycles,
    TreeGrid,
    DilinkMotif,
    DilinkBase,
    /// Loaded from fixture files rather than generated; no planted ground
    /// truth.
    Real,
}

impl DatasetKind {
    /// The generated benchmarks, in sweep order. Excludes [`DatasetKind::Real`].
    pub const ALL: [DatasetKind; 6] = [
        DatasetKind::BaShapes,
        DatasetKind::BaCommunity,
        DatasetKind::TreeCycles,
        DatasetKind::TreeGrid,
        DatasetKind::DilinkMotif,
        DatasetKind::DilinkBase,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::BaShapes => "ba_shapes",
            DatasetKind::BaCommunity => "ba_community",
            DatasetKind::TreeCycles => "tree_cycles",
            DatasetKind::TreeGrid => "tree_grid",
            DatasetKind::DilinkMotif => "dilink_motif",
            DatasetKind::DilinkBase => "dilink_base",
            DatasetKind::Real => "real",
        }
    }

    pub fn from_name(name: &str) -> Option<DatasetKind> {
        if name == "real" {
            return Some(DatasetKind::Real);
        }
        DatasetKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Node budget for top-k explanation subgraphs: the planted structure size
    /// (house or cycle plus its anchor, full grid, or a bond's two endpoints).
    /// Real graphs have no planted structure; their budget is a convention.
    pub fn default_eval_k(&self) -> usize {
        match self {
            DatasetKind::BaShapes | DatasetKind::BaCommunity => 6,
            DatasetKind::TreeCycles => 6,
            DatasetKind::TreeGrid => 9,
            DatasetKind::DilinkMotif => 6,
            DatasetKind::DilinkBase => 2,
            DatasetKind::Real => 6,
        }
    }
}

/// Bond style override for the two-community direction benchmark. `None`
/// keeps the standard half-unidirectional, half-bidirectional mix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bonding {
    Uni,
    Bi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: DatasetKind,
    /// Nodes in the base graph (per community for two-community kinds).
    pub base_nodes: usize,
    /// Preferential-attachment edges per new node; unused for tree bases.
    pub attachment: usize,
    /// Planted motif instances, or cross-bond count for `DilinkBase`.
    pub motif_count: usize,
    /// `DilinkBase` only: force all bonds unidirectional or bidirectional.
    #[serde(default)]
    pub bonding: Option<Bonding>,
    /// Add random reciprocal pairs (10% of the pair count) to the
    /// preferential-attachment kinds, mirroring the usual benchmark setup.
    pub noise: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn defaults(kind: DatasetKind, seed: u64) -> SyntheticSpec {
        let (base_nodes, attachment, motif_count, noise) = match kind {
            DatasetKind::BaShapes => (300, 5, 80, true),
            DatasetKind::BaCommunity => (300, 5, 80, true),
            DatasetKind::TreeCycles => (511, 0, 80, false),
            DatasetKind::TreeGrid => (511, 0, 80, false),
            DatasetKind::DilinkMotif => (300, 5, 80, false),
            DatasetKind::DilinkBase => (150, 5, 60, false),
            // Not generatable; generate() rejects the spec.
            DatasetKind::Real => (0, 0, 0, false),
        };
        SyntheticSpec { kind, base_nodes, attachment, motif_count, bonding: None, noise, seed }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: DiGraph,
    pub split: Split,
    pub num_classes: usize,
    pub kind: DatasetKind,
    pub description: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatagenError {
    #[error("preferential attachment needs n > m >= 1, got n={n}, m={m}")]
    BaSize { n: usize, m: usize },
    #[error("motif count must be at least 1")]
    NoMotifs,
    #[error("real datasets are loaded from fixture files, not generated")]
    NotSynthetic,
    #[error("base with {base} nodes cannot host {needed} distinct bond endpoints")]
    BaseTooSmall { base: usize, needed: usize },
    #[error("motif attachment requires a symmetric base graph")]
    AsymmetricBase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motif {
    House,
    Cycle6,
    Grid3x3,
}

impl Motif {
    pub fn size(&self) -> usize {
        match self {
            Motif::House => 5,
            Motif::Cycle6 => 6,
            Motif::Grid3x3 => 9,
        }
    }

    /// Internal bonds as undirected pairs over local node ids. The house is
    /// node 0 on top, 1 and 2 in the middle, 3 and 4 at the bottom; node 0 is
    /// the attachment point for every motif.
    pub fn bonds(&self) -> &'static [(usize, usize)] {
        match self {
            Motif::House => &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 4)],
            Motif::Cycle6 => &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)],
            Motif::Grid3x3 => &[
                (0, 1),
                (1, 2),
                (3, 4),
                (4, 5),
                (6, 7),
                (7, 8),
                (0, 3),
                (3, 6),
                (1, 4),
                (4, 7),
                (2, 5),
                (5, 8),
            ],
        }
    }

    /// Class offset per local node (base nodes are class 0). Only the house
    /// distinguishes structural roles.
    pub fn roles(&self) -> &'static [usize] {
        match self {
            Motif::House => &[1, 2, 2, 3, 3],
            Motif::Cycle6 => &[1; 6],
            Motif::Grid3x3 => &[1; 9],
        }
    }
}

/// Undirected preferential-attachment graph (stored as reciprocal directed
/// pairs): a complete seed clique on `m + 1` nodes, then each new node
/// attaches to `m` distinct existing nodes with probability proportional to
/// degree.
pub fn ba_graph(n: usize, m: usize, seed: u64) -> Result<DiGraph, DatagenError> {
    if m < 1 || n <= m {
        return Err(DatagenError::BaSize { n, m });
    }
    let mut rng = stream(seed, "ba");
    let pairs = ba_pairs(n, m, &mut rng);
    let edges = reciprocal(&pairs);
    Ok(DiGraph::from_edge_list(n, edges, Array2::zeros((n, 0)), vec![0; n])
        .expect("generator emits valid edges"))
}

fn ba_pairs(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(m * (n - m - 1) + m * (m + 1) / 2);
    for i in 0..=m {
        for j in (i + 1)..=m {
            pairs.push((i, j));
        }
    }
    // One urn slot per edge endpoint makes a uniform draw degree-proportional.
    let mut urn: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    for v in (m + 1)..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            targets.insert(urn[rng.gen_range(0..urn.len())]);
        }
        for &t in &targets {
            pairs.push((t, v));
            urn.push(t);
            urn.push(v);
        }
    }
    pairs
}

fn reciprocal(pairs: &[(usize, usize)]) -> Vec<(usize, usize)> {
    pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
}

/// Plants `count` motif instances on a symmetric base graph. Each instance is
/// a fresh node block wired per the motif shape and tied to one uniformly
/// chosen base node by a reciprocal pair; planted edges are the motif-internal
/// ones.
pub fn attach_motifs(
    base: &DiGraph,
    motif: Motif,
    count: usize,
    seed: u64,
) -> Result<Dataset, DatagenError> {
    if count == 0 {
        return Err(DatagenError::NoMotifs);
    }
    if !base.is_symmetric() {
        return Err(DatagenError::AsymmetricBase);
    }
    let base_pairs: Vec<(usize, usize)> =
        base.edges().iter().copied().filter(|&(s, d)| s < d).collect();
    let mut rng = stream(seed, "motifs");
    let build = plant_motifs(&base_pairs, base.n(), motif, count, &mut rng);
    let n = build.labels.len();
    let kind = match motif {
        Motif::House => DatasetKind::BaShapes,
        Motif::Cycle6 => DatasetKind::TreeCycles,
        Motif::Grid3x3 => DatasetKind::TreeGrid,
    };
    Ok(finalize(
        build,
        Array2::zeros((n, 0)),
        seed,
        kind,
        format!("{} base + {count} {:?} motifs", base.n(), motif),
    ))
}

/// Intermediate edge bookkeeping. `pairs` are undirected (expanded to both
/// orientations at finalize time); planted edges are tracked as the directed
/// edges they will become.
struct Build {
    directed: Vec<(usize, usize)>,
    labels: Vec<usize>,
    planted: Vec<(usize, usize)>,
}

fn plant_motifs(
    base_pairs: &[(usize, usize)],
    base_n: usize,
    motif: Motif,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Build {
    let size = motif.size();
    let mut pairs = base_pairs.to_vec();
    let mut labels = vec![0usize; base_n + count * size];
    let mut planted = Vec::new();
    for i in 0..count {
        let start = base_n + i * size;
        for &(a, b) in motif.bonds() {
            pairs.push((start + a, start + b));
            planted.push((start + a, start + b));
            planted.push((start + b, start + a));
        }
        for (local, &role) in motif.roles().iter().enumerate() {
            labels[start + local] = role;
        }
        let anchor = rng.gen_range(0..base_n);
        pairs.push((anchor, start));
    }
    Build { directed: reciprocal(&pairs), labels, planted }
}

/// Adds `pairs.len() / 10` fresh random reciprocal pairs avoiding existing
/// edges and self-loops.
fn add_noise_pairs(pairs: &mut Vec<(usize, usize)>, n: usize, rng: &mut ChaCha8Rng) {
    let extra = pairs.len() / 10;
    let mut present: BTreeSet<(usize, usize)> = pairs.iter().copied().collect();
    let mut added = 0;
    while added < extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if present.insert(key) {
            pairs.push(key);
            added += 1;
        }
    }
}

fn finalize(
    build: Build,
    features: Array2<f64>,
    seed: u64,
    kind: DatasetKind,
    description: String,
) -> Dataset {
    let n = build.labels.len();
    let graph = DiGraph::from_edge_list(n, build.directed, features, build.labels)
        .expect("generator emits valid edges");
    let gt: EdgeSet = build
        .planted
        .iter()
        .map(|&(s, d)| graph.edge_id(s, d).expect("planted edge exists"))
        .collect();
    let graph = graph.with_ground_truth(gt).expect("indices from edge_id");
    let num_classes = graph.num_classes();
    for c in 0..num_classes {
        debug_assert!(graph.labels().iter().any(|&l| l == c), "class {c} unused");
    }
    let split = stratified_split(graph.labels(), seed);
    Dataset { graph, split, num_classes, kind, description }
}

/// 80/10/10 node split, stratified per class, from the dedicated split stream
/// (so topology is untouched by resplitting).
pub fn stratified_split(labels: &[usize], seed: u64) -> Split {
    let mut rng = stream(seed, "split");
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut split = Split::empty(labels.len());
    for c in 0..num_classes {
        let mut nodes: Vec<usize> = (0..labels.len()).filter(|&v| labels[v] == c).collect();
        nodes.shuffle(&mut rng);
        let k = nodes.len();
        let held = k / 10;
        for (i, &v) in nodes.iter().enumerate() {
            if i < k - 2 * held {
                split.train[v] = true;
            } else if i < k - held {
                split.val[v] = true;
            } else {
                split.test[v] = true;
            }
        }
    }
    split
}

pub fn ba_shapes(seed: u64) -> Dataset {
    build_ba_shapes(&SyntheticSpec::defaults(DatasetKind::BaShapes, seed))
}

fn build_ba_shapes(spec: &SyntheticSpec) -> Dataset {
    let community = ba_shapes_community(spec, None);
    let n = community.labels.len();
    finalize(
        community,
        Array2::zeros((n, 0)),
        spec.seed,
        DatasetKind::BaShapes,
        format!("BA({}, m={}) + {} houses", spec.base_nodes, spec.attachment, spec.motif_count),
    )
}

/// One preferential-attachment community with houses and optional noise.
/// `index` selects per-community RNG streams when two communities share a
/// seed.
fn ba_shapes_community(spec: &SyntheticSpec, index: Option<u64>) -> Build {
    let (mut ba_rng, mut motif_rng, mut noise_rng) = match index {
        None => (stream(spec.seed, "ba"), stream(spec.seed, "motifs"), stream(spec.seed, "noise")),
        Some(i) => (
            stream_indexed(spec.seed, "ba", i),
            stream_indexed(spec.seed, "motifs", i),
            stream_indexed(spec.seed, "noise", i),
        ),
    };
    let base_pairs = ba_pairs(spec.base_nodes, spec.attachment, &mut ba_rng);
    let mut build =
        plant_motifs(&base_pairs, spec.base_nodes, Motif::House, spec.motif_count, &mut motif_rng);
    if spec.noise {
        let n = build.labels.len();
        let mut pairs: Vec<(usize, usize)> =
            build.directed.iter().copied().filter(|&(s, d)| s < d).collect();
        add_noise_pairs(&mut pairs, n, &mut noise_rng);
        build.directed = reciprocal(&pairs);
    }
    build
}

pub fn ba_community(seed: u64) -> Dataset {
    build_ba_community(&SyntheticSpec::defaults(DatasetKind::BaCommunity, seed))
}

fn build_ba_community(spec: &SyntheticSpec) -> Dataset {
    let a = ba_shapes_community(spec, Some(0));
    let b = ba_shapes_community(spec, Some(1));
    let offset = a.labels.len();
    let mut directed = a.directed;
    directed.extend(b.directed.iter().map(|&(s, d)| (s + offset, d + offset)));
    let mut planted = a.planted;
    planted.extend(b.planted.iter().map(|&(s, d)| (s + offset, d + offset)));
    let mut labels = a.labels;
    labels.extend(b.labels.iter().map(|&l| l + 4));
    let n = labels.len();

    // 100 reciprocal cross-community pairs keep the two halves connected.
    let mut cross_rng = stream(spec.seed, "cross");
    let mut chosen = BTreeSet::new();
    while chosen.len() < 100 {
        let a_node = cross_rng.gen_range(0..offset);
        let b_node = offset + cross_rng.gen_range(0..(n - offset));
        chosen.insert((a_node, b_node));
    }
    directed.extend(reciprocal(&chosen.into_iter().collect::<Vec<_>>()));

    // Features: 10-dim Gaussians, unit mean shift in coordinate (class mod 10).
    let mut feat_rng = stream(spec.seed, "features");
    let normal = Normal::new(0.0, 1.0).expect("valid params");
    let mut features = Array2::zeros((n, 10));
    for v in 0..n {
        for d in 0..10 {
            let mean = if d == labels[v] % 10 { 1.0 } else { 0.0 };
            features[[v, d]] = mean + normal.sample(&mut feat_rng);
        }
    }

    finalize(
        Build { directed, labels, planted },
        features,
        spec.seed,
        DatasetKind::BaCommunity,
        "two house-planted BA communities with Gaussian class features".to_string(),
    )
}

pub fn tree_cycles(seed: u64) -> Dataset {
    build_tree_dataset(&SyntheticSpec::defaults(DatasetKind::TreeCycles, seed), Motif::Cycle6)
}

pub fn tree_grid(seed: u64) -> Dataset {
    build_tree_dataset(&SyntheticSpec::defaults(DatasetKind::TreeGrid, seed), Motif::Grid3x3)
}

fn build_tree_dataset(spec: &SyntheticSpec, motif: Motif) -> Dataset {
    let tree = balanced_tree_pairs(spec.base_nodes);
    let mut rng = stream(spec.seed, "motifs");
    let build = plant_motifs(&tree, spec.base_nodes, motif, spec.motif_count, &mut rng);
    let n = build.labels.len();
    finalize(
        build,
        Array2::zeros((n, 0)),
        spec.seed,
        if motif == Motif::Cycle6 { DatasetKind::TreeCycles } else { DatasetKind::TreeGrid },
        format!("{}-node binary tree + {} {:?} motifs", spec.base_nodes, spec.motif_count, motif),
    )
}

/// Complete binary tree on `n` nodes in heap order.
fn balanced_tree_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for v in 0..n {
        for child in [2 * v + 1, 2 * v + 2] {
            if child < n {
                pairs.push((v, child));
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DilinkVariant {
    Motif,
    Base,
}

pub fn dilink(variant: DilinkVariant, seed: u64) -> Dataset {
    let kind = match variant {
        DilinkVariant::Motif => DatasetKind::DilinkMotif,
        DilinkVariant::Base => DatasetKind::DilinkBase,
    };
    generate(&SyntheticSpec::defaults(kind, seed)).expect("default spec is valid")
}

/// Directed houses on a reciprocal base. Internal edges run top-down
/// (0->1, 0->2, 1->2, 1->3, 2->4, 3->4); half the instances receive their
/// bond from the base (classes 1-3), half send it (classes 4-6). The planted
/// set is the internal edges plus the bond.
fn build_dilink_motif(spec: &SyntheticSpec) -> Result<Dataset, DatagenError> {
    if spec.motif_count == 0 {
        return Err(DatagenError::NoMotifs);
    }
    let mut ba_rng = stream(spec.seed, "ba");
    let base_pairs = ba_pairs(spec.base_nodes, spec.attachment, &mut ba_rng);
    let mut directed = reciprocal(&base_pairs);
    let mut labels = vec![0usize; spec.base_nodes + spec.motif_count * 5];
    let mut planted = Vec::new();
    let mut rng = stream(spec.seed, "motifs");
    let inbound_count = spec.motif_count / 2;
    for i in 0..spec.motif_count {
        let start = spec.base_nodes + i * 5;
        for &(a, b) in Motif::House.bonds() {
            directed.push((start + a, start + b));
            planted.push((start + a, start + b));
        }
        let inbound = i < inbound_count;
        for (local, &role) in Motif::House.roles().iter().enumerate() {
            labels[start + local] = if inbound { role } else { role + 3 };
        }
        let anchor = rng.gen_range(0..spec.base_nodes);
        let bond = if inbound { (anchor, start) } else { (start, anchor) };
        directed.push(bond);
        planted.push(bond);
    }
    let n = labels.len();
    Ok(finalize(
        Build { directed, labels, planted },
        Array2::zeros((n, 0)),
        spec.seed,
        DatasetKind::DilinkMotif,
        format!(
            "BA({}, m={}) + {} directed houses, bond direction decides class",
            spec.base_nodes, spec.attachment, spec.motif_count
        ),
    ))
}

/// Two reciprocal communities joined by cross bonds with disjoint endpoints.
/// Unidirectional bonds label their endpoints 1, bidirectional bonds label
/// them 2; the planted set is the cross edges themselves.
fn build_dilink_base(spec: &SyntheticSpec) -> Result<Dataset, DatagenError> {
    if spec.motif_count == 0 {
        return Err(DatagenError::NoMotifs);
    }
    if spec.motif_count > spec.base_nodes {
        return Err(DatagenError::BaseTooSmall { base: spec.base_nodes, needed: spec.motif_count });
    }
    let mut a_rng = stream_indexed(spec.seed, "ba", 0);
    let mut b_rng = stream_indexed(spec.seed, "ba", 1);
    let a_pairs = ba_pairs(spec.base_nodes, spec.attachment, &mut a_rng);
    let b_pairs = ba_pairs(spec.base_nodes, spec.attachment, &mut b_rng);
    let offset = spec.base_nodes;
    let n = 2 * spec.base_nodes;
    let mut directed = reciprocal(&a_pairs);
    directed.extend(reciprocal(&b_pairs).iter().map(|&(s, d)| (s + offset, d + offset)));

    let mut cross_rng = stream(spec.seed, "cross");
    let mut a_nodes: Vec<usize> = (0..offset).collect();
    let mut b_nodes: Vec<usize> = (offset..n).collect();
    a_nodes.shuffle(&mut cross_rng);
    b_nodes.shuffle(&mut cross_rng);

    let mut labels = vec![0usize; n];
    let mut planted = Vec::new();
    let uni_count = match spec.bonding {
        None => spec.motif_count / 2,
        Some(Bonding::Uni) => spec.motif_count,
        Some(Bonding::Bi) => 0,
    };
    // With a homogeneous bonding override there is a single bond class; only
    // the mixed default separates one-way (1) from two-way (2) endpoints.
    let bi_label = if uni_count > 0 { 2 } else { 1 };
    for i in 0..spec.motif_count {
        let (a, b) = (a_nodes[i], b_nodes[i]);
        if i < uni_count {
            directed.push((a, b));
            planted.push((a, b));
            labels[a] = 1;
            labels[b] = 1;
        } else {
            directed.push((a, b));
            directed.push((b, a));
            planted.push((a, b));
            planted.push((b, a));
            labels[a] = bi_label;
            labels[b] = bi_label;
        }
    }
    Ok(finalize(
        Build { directed, labels, planted },
        Array2::zeros((n, 0)),
        spec.seed,
        DatasetKind::DilinkBase,
        format!(
            "two BA({}, m={}) communities, {} cross bonds ({} one-way)",
            spec.base_nodes, spec.attachment, spec.motif_count, uni_count
        ),
    ))
}

/// Builds the dataset a spec describes.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset, DatagenError> {
    if spec.kind == DatasetKind::Real {
        return Err(DatagenError::NotSynthetic);
    }
    if spec.motif_count == 0 {
        return Err(DatagenError::NoMotifs);
    }
    match spec.kind {
        DatasetKind::Real => unreachable!("rejected above"),
        DatasetKind::BaShapes => {
            ba_graph(spec.base_nodes, spec.attachment, spec.seed)?;
            Ok(build_ba_shapes(spec))
        }
        DatasetKind::BaCommunity => {
            ba_graph(spec.base_nodes, spec.attachment, spec.seed)?;
            Ok(build_ba_community(spec))
        }
        DatasetKind::TreeCycles => Ok(build_tree_dataset(spec, Motif::Cycle6)),
        DatasetKind::TreeGrid => Ok(build_tree_dataset(spec, Motif::Grid3x3)),
        DatasetKind::DilinkMotif => {
            ba_graph(spec.base_nodes, spec.attachment, spec.seed)?;
            build_dilink_motif(spec)
        }
        DatasetKind::DilinkBase => {
            ba_graph(spec.base_nodes, spec.attachment, spec.seed)?;
            build_dilink_base(spec)
        }
    }
}

/// Erdos-Renyi style digraph: every ordered pair present independently with
/// probability `p`. Oracle-test input, not a benchmark.
pub fn random_digraph(n: usize, p: f64, seed: u64) -> DiGraph {
    assert!((0.0..=1.0).contains(&p), "p must be a probability");
    let mut rng = stream(seed, "digraph");
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    DiGraph::from_edge_list(n, edges, Array2::zeros((n, 0)), vec![0; n])
        .expect("generator emits valid edges")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Direction, NodeSet};

    #[test]
    fn ba_seed_clique_case() {
        let g = ba_graph(6, 5, 3).unwrap();
        // n = m + 1 leaves just the complete seed clique.
        assert_eq!(g.edge_count(), 6 * 5);
        assert!(g.is_symmetric());
    }

    #[test]
    fn ba_edge_count_follows_attachment_recurrence() {
        // C(m+1, 2) clique pairs, then m new pairs per added node.
        let g = ba_graph(300, 5, 0).unwrap();
        let pairs = 15 + 5 * (300 - 6);
        assert_eq!(pairs, 1485);
        assert_eq!(g.edge_count(), 2 * pairs);
    }

    #[test]
    fn ba_is_connected_and_deterministic() {
        let g = ba_graph(120, 3, 7).unwrap();
        let reach = g.k_hop_neighborhood(0, 120, Direction::Both);
        assert_eq!(reach.len(), 120);
        assert_eq!(ba_graph(120, 3, 7).unwrap(), g);
        assert_ne!(ba_graph(120, 3, 8).unwrap(), g);
    }

    #[test]
    fn ba_rejects_bad_sizes() {
        assert_eq!(ba_graph(5, 5, 0).unwrap_err(), DatagenError::BaSize { n: 5, m: 5 });
        assert_eq!(ba_graph(5, 0, 0).unwrap_err(), DatagenError::BaSize { n: 5, m: 0 });
    }

    #[test]
    fn house_motif_shape() {
        assert_eq!(Motif::House.size(), 5);
        assert_eq!(Motif::House.bonds().len(), 6);
        // Triangle roof over a square: top bonds to both middles, middles
        // bond to each other and their bottom, bottoms bond together.
        let mut degree = [0usize; 5];
        for &(a, b) in Motif::House.bonds() {
            degree[a] += 1;
            degree[b] += 1;
        }
        assert_eq!(degree, [2, 3, 3, 2, 2]);
    }

    #[test]
    fn every_motif_node_keeps_two_planted_edges() {
        for motif in [Motif::House, Motif::Cycle6, Motif::Grid3x3] {
            let mut degree = vec![0usize; motif.size()];
            for &(a, b) in motif.bonds() {
                degree[a] += 1;
                degree[b] += 1;
            }
            assert!(degree.iter().all(|&d| d >= 2), "{motif:?}");
        }
    }

    #[test]
    fn attach_motifs_rejects_zero_and_asymmetric() {
        let base = ba_graph(20, 2, 0).unwrap();
        assert_eq!(attach_motifs(&base, Motif::House, 0, 0).unwrap_err(), DatagenError::NoMotifs);
        let directed = random_digraph(5, 0.9, 1);
        assert!(!directed.is_symmetric());
        assert_eq!(
            attach_motifs(&directed, Motif::House, 1, 0).unwrap_err(),
            DatagenError::AsymmetricBase
        );
    }

    #[test]
    fn ba_shapes_shape() {
        let ds = ba_shapes(0);
        assert_eq!(ds.graph.n(), 700);
        assert_eq!(ds.num_classes, 4);
        let gt = ds.graph.ground_truth().unwrap();
        // 80 houses, 6 bonds each, both orientations.
        assert_eq!(gt.len(), 80 * 12);
        for c in 0..4 {
            assert!(ds.graph.labels().iter().any(|&l| l == c));
        }
        assert!(ds.graph.is_symmetric());
        assert!(ds.split.is_disjoint());
    }

    #[test]
    fn ba_shapes_noise_adds_pairs() {
        let noisy = ba_shapes(2);
        let mut spec = SyntheticSpec::defaults(DatasetKind::BaShapes, 2);
        spec.noise = false;
        let clean = generate(&spec).unwrap();
        // 10% of the clean pair count, each pair two directed edges.
        let clean_pairs = clean.graph.edge_count() / 2;
        assert_eq!(noisy.graph.edge_count(), clean.graph.edge_count() + 2 * (clean_pairs / 10));
    }

    #[test]
    fn ba_community_classes_and_features() {
        let ds = ba_community(0);
        assert_eq!(ds.graph.n(), 1400);
        assert_eq!(ds.num_classes, 8);
        assert_eq!(ds.graph.feature_dim(), 10);
        // Community A holds classes 0..4, community B classes 4..8.
        assert!(ds.graph.labels()[..700].iter().all(|&l| l < 4));
        assert!(ds.graph.labels()[700..].iter().all(|&l| (4..8).contains(&l)));
        // The planted coordinate mean sits near 1, the rest near 0.
        for c in [1usize, 5] {
            let nodes: Vec<usize> =
                (0..1400).filter(|&v| ds.graph.label(v) == c).collect();
            let planted = c % 10;
            let other = (c + 3) % 10;
            let mean = |d: usize| {
                nodes.iter().map(|&v| ds.graph.features()[[v, d]]).sum::<f64>()
                    / nodes.len() as f64
            };
            assert!(mean(planted) > 0.6, "class {c}");
            assert!(mean(other).abs() < 0.4, "class {c}");
        }
        // Cross pairs keep the union connected.
        let reach = ds.graph.k_hop_neighborhood(0, 1400, Direction::Both);
        assert_eq!(reach.len(), 1400);
    }

    #[test]
    fn tree_datasets_shapes() {
        let tc = tree_cycles(0);
        assert_eq!(tc.graph.n(), 511 + 80 * 6);
        assert_eq!(tc.num_classes, 2);
        assert_eq!(tc.graph.ground_truth().unwrap().len(), 80 * 12);
        let tg = tree_grid(0);
        assert_eq!(tg.graph.n(), 511 + 80 * 9);
        assert_eq!(tg.num_classes, 2);
        assert_eq!(tg.graph.ground_truth().unwrap().len(), 80 * 24);
        assert!(tc.graph.is_symmetric() && tg.graph.is_symmetric());
    }

    #[test]
    fn dilink_motif_labels_track_bond_direction() {
        let ds = dilink(DilinkVariant::Motif, 0);
        assert_eq!(ds.graph.n(), 700);
        assert_eq!(ds.num_classes, 7);
        // 40 houses per bond direction, roles 1/2/2/3/3 within each.
        let count = |c: usize| ds.graph.labels().iter().filter(|&&l| l == c).count();
        assert_eq!((count(1), count(2), count(3)), (40, 80, 80));
        assert_eq!((count(4), count(5), count(6)), (40, 80, 80));
        assert_eq!(ds.graph.ground_truth().unwrap().len(), 80 * 7);
    }

    #[test]
    fn dilink_motif_direction_rule_separates_only_directed() {
        let ds = dilink(DilinkVariant::Motif, 0);
        let g = &ds.graph;
        let mut directed_hits = 0;
        let mut merged_hits = 0;
        let mut tops = 0;
        for v in 0..g.n() {
            let l = g.label(v);
            if l != 1 && l != 4 {
                continue;
            }
            tops += 1;
            let house: NodeSet = (v..v + 5).collect();
            let inbound_bond = g.in_neighbors(v).iter().any(|u| !house.contains(u));
            // Rule: an external in-edge marks the receiving class.
            if inbound_bond == (l == 1) {
                directed_hits += 1;
            }
            let merged_bond = inbound_bond
                || g.out_neighbors(v).iter().any(|u| !house.contains(u));
            if merged_bond == (l == 1) {
                merged_hits += 1;
            }
        }
        assert_eq!(tops, 80);
        assert_eq!(directed_hits, 80);
        // Merging orientations makes the rule fire everywhere: chance level.
        assert_eq!(merged_hits, 40);
    }

    #[test]
    fn dilink_motif_merged_house_subgraphs_isomorphic() {
        let ds = dilink(DilinkVariant::Motif, 0);
        let g = &ds.graph;
        // House i occupies nodes 300 + 5i ..; first half inbound-bonded.
        let subgraph = |i: usize| {
            let start = 300 + 5 * i;
            let nodes: Vec<usize> = (start..start + 5)
                .chain(bond_anchor(g, start))
                .collect();
            let mut adj = vec![[false; 6]; 6];
            for (x, &a) in nodes.iter().enumerate() {
                for (y, &b) in nodes.iter().enumerate() {
                    if g.has_edge(a, b) || g.has_edge(b, a) {
                        adj[x][y] = true;
                    }
                }
            }
            adj
        };
        for (i, j) in [(0, 40), (10, 50), (39, 79)] {
            assert!(isomorphic6(&subgraph(i), &subgraph(j)), "houses {i} and {j}");
        }
    }

    fn bond_anchor(g: &DiGraph, top: usize) -> Option<usize> {
        let house: NodeSet = (top..top + 5).collect();
        g.in_neighbors(top)
            .iter()
            .chain(g.out_neighbors(top))
            .copied()
            .find(|u| !house.contains(u))
    }

    fn isomorphic6(a: &[[bool; 6]], b: &[[bool; 6]]) -> bool {
        let mut perm = [0usize, 1, 2, 3, 4, 5];
        permute(&mut perm, 0, &mut |p| {
            (0..6).all(|x| (0..6).all(|y| a[x][y] == b[p[x]][p[y]]))
        })
    }

    fn permute(perm: &mut [usize; 6], k: usize, check: &mut impl FnMut(&[usize; 6]) -> bool) -> bool {
        if k == 6 {
            return check(perm);
        }
        for i in k..6 {
            perm.swap(k, i);
            if permute(perm, k + 1, check) {
                perm.swap(k, i);
                return true;
            }
            perm.swap(k, i);
        }
        false
    }

    #[test]
    fn dilink_base_counts() {
        let ds = dilink(DilinkVariant::Base, 0);
        let g = &ds.graph;
        assert_eq!(g.n(), 300);
        assert_eq!(ds.num_classes, 3);
        let count = |c: usize| g.labels().iter().filter(|&&l| l == c).count();
        // 30 one-way bonds with disjoint endpoints: exactly 60 class-1 nodes.
        assert_eq!(count(1), 60);
        assert_eq!(count(2), 60);
        let gt = g.ground_truth().unwrap();
        assert_eq!(gt.len(), 30 + 2 * 30);
        // One-way bonds have no reverse; two-way bonds do.
        for &idx in gt {
            let (s, d) = g.edge(idx);
            let reciprocated = g.has_edge(d, s);
            let class = g.label(s);
            assert_eq!(reciprocated, class == 2);
        }
    }

    #[test]
    fn dilink_base_bonding_override() {
        let mut spec = SyntheticSpec::defaults(DatasetKind::DilinkBase, 0);
        spec.bonding = Some(Bonding::Uni);
        let uni = generate(&spec).unwrap();
        assert_eq!(uni.graph.labels().iter().filter(|&&l| l == 1).count(), 120);
        assert_eq!(uni.num_classes, 2);
        spec.bonding = Some(Bonding::Bi);
        let bi = generate(&spec).unwrap();
        assert_eq!(bi.graph.labels().iter().filter(|&&l| l == 1).count(), 120);
        assert_eq!(bi.num_classes, 2);
    }

    #[test]
    fn split_is_stratified_80_10_10() {
        let ds = ba_shapes(1);
        let split = &ds.split;
        assert!(split.is_disjoint());
        for c in 0..4 {
            let class_nodes: Vec<usize> =
                (0..ds.graph.n()).filter(|&v| ds.graph.label(v) == c).collect();
            let held = class_nodes.len() / 10;
            let val = class_nodes.iter().filter(|&&v| split.val[v]).count();
            let test = class_nodes.iter().filter(|&&v| split.test[v]).count();
            let train = class_nodes.iter().filter(|&&v| split.train[v]).count();
            assert_eq!(val, held);
            assert_eq!(test, held);
            assert_eq!(train, class_nodes.len() - 2 * held);
        }
        // Resplitting with the same seed reproduces the masks.
        assert_eq!(&ba_shapes(1).split, split);
    }

    #[test]
    fn random_digraph_limits() {
        assert_eq!(random_digraph(5, 0.0, 0).edge_count(), 0);
        assert_eq!(random_digraph(5, 1.0, 0).edge_count(), 20);
        assert_eq!(random_digraph(4, 0.5, 9), random_digraph(4, 0.5, 9));
    }

    #[test]
    fn random_digraph_edge_count_concentrates() {
        // 1000 seeds of n=4, p=0.5: mean count 6, draw variance 12 * 0.25.
        let total: usize = (0..1000).map(|s| random_digraph(4, 0.5, s).edge_count()).sum();
        let mean = total as f64 / 1000.0;
        let sigma_mean = (12.0 * 0.25f64 / 1000.0).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * sigma_mean, "mean {mean}");
    }
}
