//! The two propagation operators under comparison, in maskable form.
//!
//! Pipeline `Symm` relaxes the digraph to an undirected one and applies the
//! standard self-loop normalization D^{-1/2}(A + I)D^{-1/2}. Pipeline
//! `LapNorm` keeps orientation: it forms the teleport-smoothed random walk
//! P = (1-a)P0 + (a/n)J (dangling rows made uniform first), finds its
//! stationary distribution pi, and averages the pi-similarity transform with
//! its transpose, giving a symmetric matrix whose entries still depend on
//! which way each edge points.
//!
//! Both operators are stored as per-edge structural entries plus a diagonal
//! and a handful of rank-1 terms, so that scaling an edge's multiplier scales
//! exactly that edge's contribution and products cost O(edges) instead of
//! O(n^2). The dense form is materialized once for spectral work.

use ndarray::{Array1, Array2, ArrayView2};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::DiGraph;

/// Successive-change tolerance for the stationary-distribution iteration.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Default iteration budget; callers with tiny teleport on near-bipartite
/// graphs need more and can pass their own cap.
pub const STATIONARY_ITER_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Symmetrize, then self-loop degree normalization.
    Symm,
    /// Direction-preserving stationary-weighted normalization.
    LapNorm,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Symm => "symm",
            Pipeline::LapNorm => "lapnorm",
        }
    }

    pub fn from_name(name: &str) -> Option<Pipeline> {
        match name {
            "symm" => Some(Pipeline::Symm),
            "lapnorm" => Some(Pipeline::LapNorm),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("operator requires a symmetric graph; symmetrize first")]
    AsymmetricInput,
    #[error("teleport probability must lie strictly between 0 and 1, got {0}")]
    AlphaOutOfRange(f64),
    #[error("matrix is not row-stochastic with positive entries")]
    NotStochastic,
    #[error("stationary distribution did not converge in {cap} iterations (last change {change:e})")]
    NoConvergence { cap: usize, change: f64 },
    #[error("entropy needs a symmetric operator ({0:e} asymmetry)")]
    AsymmetricOperator(f64),
    #[error("entropy needs a positive-semidefinite operator (eigenvalue {0:e})")]
    IndefiniteOperator(f64),
    #[error("graph has no nodes")]
    EmptyGraph,
}

/// One structural contribution: the directed edge `edge` adds
/// `coef * multiplier(edge)` to cell `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEntry {
    pub row: usize,
    pub col: usize,
    pub edge: usize,
    pub coef: f64,
}

/// Dense rank-1 term `weight * left * right^T`, not tied to any edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1 {
    pub weight: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// A propagation operator decomposed into maskable parts. The full matrix is
/// `diag + sum(entries) + sum(rank1)`; edge multipliers scale only `entries`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix {
    n: usize,
    edge_count: usize,
    pipeline: Pipeline,
    diag: Vec<f64>,
    entries: Vec<CellEntry>,
    rank1: Vec<Rank1>,
    dense: Array2<f64>,
}

impl PropagationMatrix {
    fn assemble(
        n: usize,
        edge_count: usize,
        pipeline: Pipeline,
        diag: Vec<f64>,
        mut entries: Vec<CellEntry>,
        rank1: Vec<Rank1>,
    ) -> PropagationMatrix {
        entries.sort_by_key(|e| (e.row, e.col, e.edge));
        let mut m = PropagationMatrix { n, edge_count, pipeline, diag, entries, rank1, dense: Array2::zeros((n, n)) };
        m.dense = m.masked_dense(&vec![1.0; edge_count]);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }
    pub fn pipeline(&self) -> Pipeline {
        self.pipeline
    }
    /// The unmasked operator.
    pub fn dense(&self) -> &Array2<f64> {
        &self.dense
    }
    pub fn entries(&self) -> &[CellEntry] {
        &self.entries
    }
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
    pub fn rank1(&self) -> &[Rank1] {
        &self.rank1
    }

    /// Materializes the operator under per-edge multipliers.
    pub fn masked_dense(&self, mult: &[f64]) -> Array2<f64> {
        assert_eq!(mult.len(), self.edge_count, "one multiplier per edge");
        let mut m = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            m[[i, i]] = self.diag[i];
        }
        for e in &self.entries {
            m[[e.row, e.col]] += mult[e.edge] * e.coef;
        }
        for r in &self.rank1 {
            for i in 0..self.n {
                let li = r.weight * r.left[i];
                if li == 0.0 {
                    continue;
                }
                for j in 0..self.n {
                    m[[i, j]] += li * r.right[j];
                }
            }
        }
        m
    }

    /// `masked(mult) . h` without materializing the matrix.
    pub fn apply_masked(&self, mult: &[f64], h: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(mult.len(), self.edge_count, "one multiplier per edge");
        self.apply_parts(h, |e| (e.row, e.col, mult[e.edge] * e.coef), false)
    }

    /// `masked(mult)^T . h`. Distinct from [`Self::apply_masked`] only when
    /// masking breaks the operator's symmetry (pipeline `Symm`, where each
    /// directed edge owns a single cell).
    pub fn apply_masked_transpose(&self, mult: &[f64], h: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(mult.len(), self.edge_count, "one multiplier per edge");
        self.apply_parts(h, |e| (e.col, e.row, mult[e.edge] * e.coef), true)
    }

    /// The unmasked product, equal to `dense() . h`.
    pub fn apply(&self, h: &ArrayView2<f64>) -> Array2<f64> {
        self.apply_parts(h, |e| (e.row, e.col, e.coef), false)
    }

    fn apply_parts(
        &self,
        h: &ArrayView2<f64>,
        entry: impl Fn(&CellEntry) -> (usize, usize, f64),
        transpose: bool,
    ) -> Array2<f64> {
        assert_eq!(h.nrows(), self.n, "row count must match node count");
        let cols = h.ncols();
        let mut y = Array2::zeros((self.n, cols));
        for i in 0..self.n {
            if self.diag[i] != 0.0 {
                let mut yr = y.row_mut(i);
                yr.scaled_add(self.diag[i], &h.row(i));
            }
        }
        for e in &self.entries {
            let (row, col, coef) = entry(e);
            if coef != 0.0 {
                let mut yr = y.row_mut(row);
                yr.scaled_add(coef, &h.row(col));
            }
        }
        for r in &self.rank1 {
            let (left, right) = if transpose { (&r.right, &r.left) } else { (&r.left, &r.right) };
            let rv = Array1::from_vec(right.clone());
            let s = h.t().dot(&rv);
            for i in 0..self.n {
                let li = r.weight * left[i];
                if li != 0.0 {
                    let mut yr = y.row_mut(i);
                    yr.scaled_add(li, &s);
                }
            }
        }
        y
    }

    /// Adds `d<G, masked(mult) . H> / d mult[e]` into `out[e]` for every edge:
    /// the inner product of `G`'s row at each entry's row with `H`'s row at
    /// its column, scaled by the entry coefficient. The multipliers themselves
    /// drop out (the map is linear in them).
    pub fn accumulate_mask_grad(
        &self,
        g_agg: &ArrayView2<f64>,
        h_in: &ArrayView2<f64>,
        out: &mut [f64],
    ) {
        assert_eq!(out.len(), self.edge_count, "one slot per edge");
        for e in &self.entries {
            out[e.edge] += e.coef * g_agg.row(e.row).dot(&h_in.row(e.col));
        }
    }
}

/// A digraph closed under edge reversal, remembering which edges were added.
/// Original edges keep their indices; each appended reverse edge records the
/// edge it mirrors.
#[derive(Debug, Clone)]
pub struct Symmetrized {
    pub graph: DiGraph,
    /// `origin[e]` is `None` for an original edge, `Some(src)` for a reverse
    /// edge added to mirror edge `src`.
    pub origin: Vec<Option<usize>>,
}

impl Symmetrized {
    /// The original-graph edge a symmetrized edge descends from.
    pub fn source_of(&self, edge: usize) -> usize {
        self.origin[edge].unwrap_or(edge)
    }
}

pub fn symmetrize(g: &DiGraph) -> Symmetrized {
    let mut edges: Vec<(usize, usize)> = g.edges().to_vec();
    let mut origin: Vec<Option<usize>> = vec![None; edges.len()];
    for (idx, &(s, d)) in g.edges().iter().enumerate() {
        if !g.has_edge(d, s) {
            edges.push((d, s));
            origin.push(Some(idx));
        }
    }
    let mut sym =
        DiGraph::from_ordered_edges(g.n(), edges, g.features().clone(), g.labels().to_vec())
            .expect("reversal preserves validity");
    if let Some(gt) = g.ground_truth() {
        sym = sym.with_ground_truth(gt.clone()).expect("original indices unchanged");
    }
    Symmetrized { graph: sym, origin }
}

/// Self-loop degree normalization of a symmetric graph: cell (i, j) of an
/// edge is 1/sqrt(deg~_i deg~_j) with deg~ counting the added self-loop, and
/// the self-loops form the (unmaskable) diagonal.
pub fn gcn_norm(g: &DiGraph) -> Result<PropagationMatrix, PreprocessError> {
    if !g.is_symmetric() {
        return Err(PreprocessError::AsymmetricInput);
    }
    let n = g.n();
    let deg: Vec<f64> = (0..n).map(|v| g.out_degree(v) as f64 + 1.0).collect();
    let diag: Vec<f64> = deg.iter().map(|d| 1.0 / d).collect();
    let entries: Vec<CellEntry> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(idx, &(s, d))| CellEntry {
            row: s,
            col: d,
            edge: idx,
            coef: 1.0 / (deg[s] * deg[d]).sqrt(),
        })
        .collect();
    Ok(PropagationMatrix::assemble(n, g.edge_count(), Pipeline::Symm, diag, entries, Vec::new()))
}

/// Teleport-smoothed walk matrix `(1-a) P0 + (a/n) J`, with dangling rows of
/// `P0` replaced by the uniform distribution before mixing.
pub fn pagerank_transition(g: &DiGraph, alpha: f64) -> Result<Array2<f64>, PreprocessError> {
    check_alpha(alpha)?;
    let n = g.n();
    if n == 0 {
        return Err(PreprocessError::EmptyGraph);
    }
    let nf = n as f64;
    let mut p = Array2::from_elem((n, n), alpha / nf);
    for i in 0..n {
        let out = g.out_neighbors(i);
        if out.is_empty() {
            for j in 0..n {
                p[[i, j]] += (1.0 - alpha) / nf;
            }
        } else {
            let share = (1.0 - alpha) / out.len() as f64;
            for &j in out {
                p[[i, j]] += share;
            }
        }
    }
    Ok(p)
}

fn check_alpha(alpha: f64) -> Result<(), PreprocessError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PreprocessError::AlphaOutOfRange(alpha));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    pub alpha: f64,
}

/// Left fixed point of a row-stochastic matrix with strictly positive
/// entries, by averaged power iteration from the uniform start.
pub fn stationary_distribution(
    p: &Array2<f64>,
    alpha: f64,
) -> Result<StationaryDistribution, PreprocessError> {
    stationary_distribution_capped(p, alpha, STATIONARY_ITER_CAP)
}

pub fn stationary_distribution_capped(
    p: &Array2<f64>,
    alpha: f64,
    cap: usize,
) -> Result<StationaryDistribution, PreprocessError> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(PreprocessError::NotStochastic);
    }
    for i in 0..n {
        let row = p.row(i);
        if (row.sum() - 1.0).abs() > 1e-9 || row.iter().any(|&x| x <= 0.0) {
            return Err(PreprocessError::NotStochastic);
        }
    }
    let pi = converge(n, cap, |pi, next| {
        for j in 0..n {
            next[j] = 0.0;
        }
        for i in 0..n {
            let w = pi[i];
            for j in 0..n {
                next[j] += w * p[[i, j]];
            }
        }
    })?;
    Ok(StationaryDistribution { pi, alpha })
}

/// Stationary distribution of the teleport-smoothed walk, using the edge
/// list directly. Agrees with the dense route to iteration tolerance.
fn stationary_on_graph(
    g: &DiGraph,
    alpha: f64,
    cap: usize,
) -> Result<Vec<f64>, PreprocessError> {
    let n = g.n();
    let nf = n as f64;
    converge(n, cap, |pi, next| {
        let mut dangling = 0.0;
        for j in 0..n {
            next[j] = 0.0;
        }
        for i in 0..n {
            let out = g.out_neighbors(i);
            if out.is_empty() {
                dangling += pi[i];
            } else {
                let share = pi[i] / out.len() as f64;
                for &j in out {
                    next[j] += share;
                }
            }
        }
        let teleport = alpha / nf + (1.0 - alpha) * dangling / nf;
        for j in 0..n {
            next[j] = (1.0 - alpha) * next[j] + teleport;
        }
    })
}

/// Averaged iteration pi <- (pi + pi P) / 2. Same fixed point as the plain
/// map, but the damping also contracts the near-(-1) modes of bipartite-ish
/// walks, which the plain iteration cannot settle.
fn converge(
    n: usize,
    cap: usize,
    mut step: impl FnMut(&[f64], &mut [f64]),
) -> Result<Vec<f64>, PreprocessError> {
    let mut pi = vec![1.0 / n as f64; n];
    let mut mapped = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..cap {
        step(&pi, &mut mapped);
        let mut next: Vec<f64> = pi.iter().zip(&mapped).map(|(&a, &b)| 0.5 * (a + b)).collect();
        let total: f64 = next.iter().sum();
        for x in &mut next {
            *x /= total;
        }
        change = next.iter().zip(&pi).map(|(&a, &b)| (a - b).abs()).sum();
        pi = next;
        if change < STATIONARY_TOL {
            return Ok(pi);
        }
    }
    Err(PreprocessError::NoConvergence { cap, change })
}

/// Direction-preserving operator: the average of the stationary-similarity
/// transform of the teleport walk and its transpose. Each directed edge
/// (i -> j) lands the same coefficient (1-a)/2 * sqrt(pi_i/pi_j) / outdeg(i)
/// on cells (i, j) and (j, i); teleport and dangling mass become rank-1
/// terms, which is where the diagonal comes from.
pub fn dilap_norm(g: &DiGraph, alpha: f64) -> Result<PropagationMatrix, PreprocessError> {
    dilap_norm_capped(g, alpha, STATIONARY_ITER_CAP)
}

pub fn dilap_norm_capped(
    g: &DiGraph,
    alpha: f64,
    cap: usize,
) -> Result<PropagationMatrix, PreprocessError> {
    check_alpha(alpha)?;
    let n = g.n();
    if n == 0 {
        return Err(PreprocessError::EmptyGraph);
    }
    let nf = n as f64;
    let pi = stationary_on_graph(g, alpha, cap)?;
    let sqrt_pi: Vec<f64> = pi.iter().map(|&x| x.sqrt()).collect();
    let inv_sqrt_pi: Vec<f64> = sqrt_pi.iter().map(|&x| 1.0 / x).collect();

    let mut entries = Vec::with_capacity(2 * g.edge_count());
    for (idx, &(i, j)) in g.edges().iter().enumerate() {
        let coef = 0.5 * (1.0 - alpha) * sqrt_pi[i] * inv_sqrt_pi[j] / g.out_degree(i) as f64;
        entries.push(CellEntry { row: i, col: j, edge: idx, coef });
        entries.push(CellEntry { row: j, col: i, edge: idx, coef });
    }

    let dangling_sqrt_pi: Vec<f64> = (0..n)
        .map(|v| if g.out_degree(v) == 0 { sqrt_pi[v] } else { 0.0 })
        .collect();
    let mut rank1 = vec![
        Rank1 { weight: 0.5 * alpha / nf, left: sqrt_pi.clone(), right: inv_sqrt_pi.clone() },
        Rank1 { weight: 0.5 * alpha / nf, left: inv_sqrt_pi.clone(), right: sqrt_pi.clone() },
    ];
    if dangling_sqrt_pi.iter().any(|&x| x != 0.0) {
        let w = 0.5 * (1.0 - alpha) / nf;
        rank1.push(Rank1 { weight: w, left: dangling_sqrt_pi.clone(), right: inv_sqrt_pi.clone() });
        rank1.push(Rank1 { weight: w, left: inv_sqrt_pi, right: dangling_sqrt_pi });
    }
    Ok(PropagationMatrix::assemble(
        n,
        g.edge_count(),
        Pipeline::LapNorm,
        vec![0.0; n],
        entries,
        rank1,
    ))
}

/// Entropy of the spectral density of a PSD operator: eigenvalues are
/// normalized to unit trace and fed through -sum(x ln x). Zero operators
/// yield zero by convention.
pub fn von_neumann_entropy(l: &Array2<f64>) -> Result<f64, PreprocessError> {
    let n = l.nrows();
    assert_eq!(l.ncols(), n, "square operator required");
    if n == 0 {
        return Ok(0.0);
    }
    let scale = l.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((l[[i, j]] - l[[j, i]]).abs());
        }
    }
    if asym > 1e-10 * (1.0 + scale) {
        return Err(PreprocessError::AsymmetricOperator(asym));
    }
    let m = DMatrix::from_row_iterator(n, n, l.iter().copied());
    let eig = m.symmetric_eigen();
    let neg_tol = 1e-8 * (1.0 + scale);
    let mut trace = 0.0;
    let mut lambdas = Vec::with_capacity(n);
    for &lam in eig.eigenvalues.iter() {
        if lam < -neg_tol {
            return Err(PreprocessError::IndefiniteOperator(lam));
        }
        let lam = lam.max(0.0);
        trace += lam;
        lambdas.push(lam);
    }
    if trace <= 0.0 {
        return Ok(0.0);
    }
    let mut h = 0.0;
    for lam in lambdas {
        let x = lam / trace;
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyGap {
    pub directed: f64,
    pub symmetrized: f64,
    pub gap: f64,
}

/// Spectral entropy of `I - operator` for the direction-preserving operator
/// versus the symmetrized one, on the same graph.
pub fn entropy_gap(g: &DiGraph, alpha: f64) -> Result<EntropyGap, PreprocessError> {
    entropy_gap_capped(g, alpha, STATIONARY_ITER_CAP)
}

pub fn entropy_gap_capped(
    g: &DiGraph,
    alpha: f64,
    cap: usize,
) -> Result<EntropyGap, PreprocessError> {
    let directed_op = dilap_norm_capped(g, alpha, cap)?;
    let symm_op = gcn_norm(&symmetrize(g).graph)?;
    let directed = von_neumann_entropy(&laplacian_of(directed_op.dense()))?;
    let symmetrized = von_neumann_entropy(&laplacian_of(symm_op.dense()))?;
    Ok(EntropyGap { directed, symmetrized, gap: directed - symmetrized })
}

fn laplacian_of(op: &Array2<f64>) -> Array2<f64> {
    let n = op.nrows();
    let mut l = -op.clone();
    for i in 0..n {
        l[[i, i]] += 1.0;
    }
    l
}

/// Everything downstream needs for one (graph, pipeline) combination: the
/// graph the operator actually runs on (symmetrized for `Symm`, as-given for
/// `LapNorm`), the operator, and for `Symm` the reverse-edge origin map.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub pipeline: Pipeline,
    pub alpha: f64,
    pub graph: DiGraph,
    pub origin: Option<Vec<Option<usize>>>,
    pub matrix: PropagationMatrix,
}

pub fn prepare(g: &DiGraph, pipeline: Pipeline, alpha: f64) -> Result<Prepared, PreprocessError> {
    prepare_capped(g, pipeline, alpha, STATIONARY_ITER_CAP)
}

pub fn prepare_capped(
    g: &DiGraph,
    pipeline: Pipeline,
    alpha: f64,
    cap: usize,
) -> Result<Prepared, PreprocessError> {
    match pipeline {
        Pipeline::Symm => {
            let sym = symmetrize(g);
            let matrix = gcn_norm(&sym.graph)?;
            Ok(Prepared { pipeline, alpha, graph: sym.graph, origin: Some(sym.origin), matrix })
        }
        Pipeline::LapNorm => {
            let matrix = dilap_norm_capped(g, alpha, cap)?;
            Ok(Prepared { pipeline, alpha, graph: g.clone(), origin: None, matrix })
        }
    }
}

/// Dense-eigensolve oracle for the stationary distribution: solves
/// (I - P^T) pi = 0 with the last balance equation swapped for sum(pi) = 1.
/// Test support; the iterative route is the production path.
pub fn stationary_lu_oracle(p: &Array2<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = if i == j { 1.0 } else { 0.0 } - p[[j, i]];
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).expect("teleport walk is nonsingular");
    x.iter().copied().collect()
}
