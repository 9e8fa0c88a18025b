//! Fixture-based loading of external graph datasets.
//!
//! Real graphs arrive as the CSV directory format from [`crate::graph`]
//! plus a JSON manifest that pins what the files must contain: node, edge,
//! and class counts and a checksum over the file bytes. Nothing is ever
//! fetched; a dataset that is not on disk does not exist. The loader keeps
//! edge direction exactly as given, which the rest of the pipeline depends
//! on; a fixture that turns out to be (nearly) symmetric makes the
//! direction comparison vacuous, so the loader measures reciprocity and
//! callers flag such runs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::datagen::{stratified_split, Dataset, DatasetKind};
use crate::eval::{
    characterization, fidelity, meets_accuracy_gate, sample_targets, EvalError,
    FidelityConvention, MetricsReport, NodeMetrics,
};
use crate::explain::{
    gnn_explainer_open, pg_explainer_explain, pg_explainer_train, ExplainerConfig, ExplainerKind,
};
use crate::graph::{DiGraph, GraphIoError};
use crate::nn::{self, GcnModel, ModelConfig, TrainConfig};
use crate::preprocess::{prepare, Pipeline};

#[derive(Debug, Error)]
pub enum RealworldError {
    #[error("manifest file {0}: {1}")]
    ManifestIo(PathBuf, std::io::Error),
    #[error("manifest {0} is not valid JSON: {1}")]
    ManifestParse(PathBuf, serde_json::Error),
    #[error("dataset file missing: {0}")]
    MissingFile(PathBuf),
    #[error("checksum mismatch: manifest says {expected}, files hash to {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("{what} count mismatch: manifest says {expected}, data has {found}")]
    CountMismatch { what: &'static str, expected: usize, found: usize },
    #[error(transparent)]
    Graph(#[from] GraphIoError),
}

/// What a fixture directory must contain to count as a named dataset.
/// `paths` are relative to the manifest file and must share one directory;
/// `sha256` is the digest of the files' bytes concatenated in `paths`
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealDatasetManifest {
    pub name: String,
    pub paths: Vec<String>,
    pub n: usize,
    pub edges: usize,
    pub classes: usize,
    pub sha256: String,
}

impl RealDatasetManifest {
    pub fn from_file(path: &Path) -> Result<RealDatasetManifest, RealworldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RealworldError::ManifestIo(path.to_path_buf(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| RealworldError::ManifestParse(path.to_path_buf(), e))
    }

    /// Writes the manifest next to an existing fixture directory, computing
    /// the checksum from the files as they are.
    pub fn create(
        name: &str,
        dir: &Path,
        paths: &[&str],
        n: usize,
        edges: usize,
        classes: usize,
    ) -> Result<RealDatasetManifest, RealworldError> {
        let files: Vec<PathBuf> = paths.iter().map(|p| dir.join(p)).collect();
        let sha256 = hash_files(&files)?;
        Ok(RealDatasetManifest {
            name: name.to_string(),
            paths: paths.iter().map(|p| p.to_string()).collect(),
            n,
            edges,
            classes,
            sha256,
        })
    }
}

fn hash_files(files: &[PathBuf]) -> Result<String, RealworldError> {
    let mut hasher = Sha256::new();
    for f in files {
        let bytes =
            std::fs::read(f).map_err(|_| RealworldError::MissingFile(f.clone()))?;
        hasher.update(&bytes);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Fraction of edges whose reverse is absent. 0 means the graph is
/// perfectly symmetric and carries no direction signal.
pub fn non_reciprocated_fraction(g: &DiGraph) -> f64 {
    if g.edge_count() == 0 {
        return 0.0;
    }
    let one_way = g.edges().iter().filter(|&&(s, d)| !g.has_edge(d, s)).count();
    one_way as f64 / g.edge_count() as f64
}

/// Below this reciprocity threshold the direction comparison is vacuous.
pub const DIRECTION_SIGNAL_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealLoadStats {
    pub non_reciprocated: f64,
    /// False when the fixture is too symmetric for a meaningful
    /// direction-aware comparison; the dataset still loads.
    pub directional: bool,
}

/// Loads and verifies a fixture: files present, checksum over the bytes,
/// counts against the data. Direction is preserved as given; the split is
/// a stratified 80/10/10 whose seed derives from the checksum, so the same
/// fixture always yields the same split and a changed fixture changes it.
pub fn load_real(
    manifest: &RealDatasetManifest,
    base_dir: &Path,
) -> Result<(Dataset, RealLoadStats), RealworldError> {
    let files: Vec<PathBuf> = manifest.paths.iter().map(|p| base_dir.join(p)).collect();
    for f in &files {
        if !f.is_file() {
            return Err(RealworldError::MissingFile(f.clone()));
        }
    }
    let found = hash_files(&files)?;
    if found != manifest.sha256 {
        return Err(RealworldError::ChecksumMismatch {
            expected: manifest.sha256.clone(),
            found,
        });
    }
    let dir = files[0].parent().unwrap_or(base_dir);
    let graph = DiGraph::load_csv_dir(dir)?;
    if graph.n() != manifest.n {
        return Err(RealworldError::CountMismatch {
            what: "node",
            expected: manifest.n,
            found: graph.n(),
        });
    }
    if graph.edge_count() != manifest.edges {
        return Err(RealworldError::CountMismatch {
            what: "edge",
            expected: manifest.edges,
            found: graph.edge_count(),
        });
    }
    let classes = graph.labels().iter().max().map_or(0, |&m| m + 1);
    if classes != manifest.classes {
        return Err(RealworldError::CountMismatch {
            what: "class",
            expected: manifest.classes,
            found: classes,
        });
    }
    let split_seed = split_seed_of(&manifest.sha256);
    let split = stratified_split(graph.labels(), split_seed);
    let stats = RealLoadStats {
        non_reciprocated: non_reciprocated_fraction(&graph),
        directional: non_reciprocated_fraction(&graph) > DIRECTION_SIGNAL_FLOOR,
    };
    let dataset = Dataset {
        graph,
        split,
        num_classes: manifest.classes,
        kind: DatasetKind::Real,
        description: format!("{} (fixture)", manifest.name),
    };
    Ok((dataset, stats))
}

/// First 16 hex digits of the checksum, so the split is a pure function of
/// the fixture content.
fn split_seed_of(sha256: &str) -> u64 {
    let prefix: String = sha256.chars().filter(|c| c.is_ascii_hexdigit()).take(16).collect();
    u64::from_str_radix(&prefix, 16).unwrap_or(0)
}

/// Settings for the explainer-by-pipeline quality grid on a loaded
/// dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub alpha: f64,
    pub hidden: usize,
    pub layers: usize,
    pub train: TrainConfig,
    pub gnn: ExplainerConfig,
    pub pg: ExplainerConfig,
    /// Test nodes to explain per cell; per-node explainers make full-set
    /// evaluation expensive, so this defaults to a sample.
    pub sample: usize,
    /// Explain every test node regardless of `sample`.
    pub full_set: bool,
    /// Node budget for the explanation subgraph fidelity is computed on.
    pub k: usize,
    pub convention: FidelityConvention,
    pub w_plus: f64,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> GridConfig {
        GridConfig {
            alpha: 0.1,
            hidden: 20,
            layers: 3,
            train: TrainConfig::default(),
            gnn: ExplainerConfig::gnn_defaults(),
            pg: ExplainerConfig::pg_defaults(),
            sample: 200,
            full_set: false,
            k: 6,
            convention: FidelityConvention::Standard,
            w_plus: 0.5,
            seed: 0,
        }
    }
}

/// One explainer-pipeline combination: the model's test accuracy, whether
/// it clears the accuracy gate, and the fidelity metrics over the sampled
/// targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub explainer: String,
    pub pipeline: String,
    pub accuracy: f64,
    pub gate_passed: bool,
    pub report: MetricsReport,
}

/// Runs both explainers under both propagation operators over one seeded
/// sample of test nodes and reports fidelity and characterization per
/// cell. AUC is absent throughout: loaded graphs carry no planted ground
/// truth.
pub fn real_dataset_grid(
    ds: &Dataset,
    cfg: &GridConfig,
    config_hash: &str,
    threads: usize,
) -> Result<Vec<GridCell>, EvalError> {
    let test_nodes = ds.split.test_nodes();
    let pool = if test_nodes.is_empty() { ds.split.train_nodes() } else { test_nodes };
    let count = if cfg.full_set { pool.len() } else { cfg.sample };
    let targets = sample_targets(&pool, count, cfg.seed, "eval-sample");

    let input_dim = if ds.graph.feature_dim() == 0 { 1 } else { ds.graph.feature_dim() };
    let mut cells = Vec::with_capacity(4);
    for pipeline in [Pipeline::Symm, Pipeline::LapNorm] {
        let prep = prepare(&ds.graph, pipeline, cfg.alpha)?;
        let model = GcnModel::init(
            ModelConfig {
                input_dim,
                hidden: cfg.hidden,
                layers: cfg.layers,
                num_classes: ds.num_classes,
            },
            cfg.seed,
        );
        let (model, _) = nn::train(model, ds, &prep.matrix, &cfg.train)?;
        let x = nn::design_matrix(&prep.graph);
        let probs = nn::gcn_forward(&model, &prep.matrix, &x.view(), None)?;
        let acc_nodes =
            if ds.split.test_nodes().is_empty() { ds.split.train_nodes() } else { ds.split.test_nodes() };
        let accuracy = nn::accuracy(&probs, prep.graph.labels(), &acc_nodes);
        let gate_passed = meets_accuracy_gate(accuracy, ds.num_classes);

        for kind in [ExplainerKind::Gnn, ExplainerKind::Pg] {
            let mut records = Vec::with_capacity(targets.len());
            let pg_net = match kind {
                ExplainerKind::Pg => {
                    Some(pg_explainer_train(&model, &prep, &targets, &cfg.pg, config_hash)?)
                }
                ExplainerKind::Gnn => None,
            };
            for &v in &targets {
                let expl = match (&pg_net, kind) {
                    (Some(net), _) => pg_explainer_explain(net, &model, &prep, v, config_hash)?,
                    (None, _) => gnn_explainer_open(&model, &prep, v, &cfg.gnn, config_hash)?.0,
                };
                let (fid_plus, fid_minus) =
                    fidelity(&model, &prep, &expl, cfg.k, cfg.convention)?;
                let ch = characterization(fid_plus, fid_minus, cfg.w_plus, 1.0 - cfg.w_plus)?;
                records.push(NodeMetrics {
                    v,
                    fid_plus,
                    fid_minus,
                    characterization: ch,
                    auc: None,
                });
            }
            cells.push(GridCell {
                explainer: kind.name().to_string(),
                pipeline: pipeline.name().to_string(),
                accuracy,
                gate_passed,
                report: MetricsReport::from_records(records, config_hash, cfg.seed, threads),
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn fixture_graph() -> DiGraph {
        // A noticeably asymmetric little citation-style graph.
        let edges = vec![(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 0), (5, 2), (2, 5)];
        let labels = vec![0, 1, 0, 1, 0, 1];
        DiGraph::from_edge_list(6, edges, Array2::zeros((6, 0)), labels).unwrap()
    }

    fn write_fixture(dir: &Path) -> RealDatasetManifest {
        fixture_graph().save_csv_dir(dir).unwrap();
        RealDatasetManifest::create("toy", dir, &["edges.csv", "labels.csv"], 6, 8, 2).unwrap()
    }

    #[test]
    fn load_verifies_and_preserves_direction() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = write_fixture(tmp.path());
        let (ds, stats) = load_real(&manifest, tmp.path()).unwrap();
        assert_eq!(ds.graph.n(), 6);
        assert_eq!(ds.graph.edge_count(), 8);
        assert_eq!(ds.num_classes, 2);
        assert_eq!(ds.kind, DatasetKind::Real);
        assert!(ds.graph.ground_truth().is_none());
        assert!(ds.graph.has_edge(0, 1));
        assert!(!ds.graph.has_edge(1, 0));
        // 6 of 8 edges are one-way.
        assert!((stats.non_reciprocated - 0.75).abs() < 1e-12);
        assert!(stats.directional);
        // The split covers every node exactly once.
        let n_assigned = (0..6)
            .filter(|&v| ds.split.train[v] || ds.split.val[v] || ds.split.test[v])
            .count();
        assert_eq!(n_assigned, 6);
    }

    #[test]
    fn loading_twice_is_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = write_fixture(tmp.path());
        let (a, _) = load_real(&manifest, tmp.path()).unwrap();
        let (b, _) = load_real(&manifest, tmp.path()).unwrap();
        assert_eq!(a.graph.edges(), b.graph.edges());
        assert_eq!(a.split.train, b.split.train);
        assert_eq!(a.split.val, b.split.val);
        assert_eq!(a.split.test, b.split.test);
    }

    #[test]
    fn each_verification_failure_is_distinct() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = write_fixture(tmp.path());

        let mut wrong_n = manifest.clone();
        wrong_n.n = 7;
        assert!(matches!(
            load_real(&wrong_n, tmp.path()),
            Err(RealworldError::CountMismatch { what: "node", .. })
        ));

        let mut wrong_edges = manifest.clone();
        wrong_edges.edges = 9;
        assert!(matches!(
            load_real(&wrong_edges, tmp.path()),
            Err(RealworldError::CountMismatch { what: "edge", .. })
        ));

        let mut wrong_classes = manifest.clone();
        wrong_classes.classes = 3;
        assert!(matches!(
            load_real(&wrong_classes, tmp.path()),
            Err(RealworldError::CountMismatch { what: "class", .. })
        ));

        let mut wrong_hash = manifest.clone();
        wrong_hash.sha256 = "0".repeat(64);
        assert!(matches!(
            load_real(&wrong_hash, tmp.path()),
            Err(RealworldError::ChecksumMismatch { .. })
        ));

        let mut missing = manifest.clone();
        missing.paths.push("nonexistent.csv".into());
        assert!(matches!(
            load_real(&missing, tmp.path()),
            Err(RealworldError::MissingFile(_))
        ));
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = write_fixture(tmp.path());
        let path = tmp.path().join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
        let back = RealDatasetManifest::from_file(&path).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn symmetric_fixture_is_flagged_not_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let g = DiGraph::from_edge_list(
            4,
            vec![(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)],
            Array2::zeros((4, 0)),
            vec![0, 1, 0, 1],
        )
        .unwrap();
        g.save_csv_dir(tmp.path()).unwrap();
        let manifest =
            RealDatasetManifest::create("sym", tmp.path(), &["edges.csv", "labels.csv"], 4, 6, 2)
                .unwrap();
        let (_, stats) = load_real(&manifest, tmp.path()).unwrap();
        assert_eq!(stats.non_reciprocated, 0.0);
        assert!(!stats.directional);
    }

    #[test]
    fn split_seed_tracks_fixture_content() {
        assert_eq!(split_seed_of("00000000000000ff"), 255);
        assert_ne!(split_seed_of("a".repeat(64).as_str()), split_seed_of("b".repeat(64).as_str()));
    }

    fn grid_dataset() -> Dataset {
        // A ring with chords: directed, two balanced classes, enough nodes
        // for the stratified split to hold out test nodes.
        let n = 40;
        let mut edges = Vec::new();
        for v in 0..n {
            edges.push((v, (v + 1) % n));
            if v % 4 == 0 {
                edges.push(((v + 7) % n, v));
            }
        }
        let labels: Vec<usize> = (0..n).map(|v| v % 2).collect();
        let graph =
            DiGraph::from_edge_list(n, edges, Array2::zeros((n, 0)), labels.clone()).unwrap();
        let split = stratified_split(&labels, 9);
        Dataset {
            graph,
            split,
            num_classes: 2,
            kind: DatasetKind::Real,
            description: "grid test".into(),
        }
    }

    #[test]
    fn quality_grid_covers_both_explainers_and_pipelines() {
        let ds = grid_dataset();
        let mut cfg = GridConfig { sample: 3, k: 4, seed: 1, ..GridConfig::default() };
        cfg.hidden = 8;
        cfg.layers = 2;
        cfg.train.epochs = 40;
        cfg.gnn.epochs = 5;
        cfg.pg.epochs = 5;
        let cells = real_dataset_grid(&ds, &cfg, "hash", 1).unwrap();
        assert_eq!(cells.len(), 4);
        let combos: Vec<(String, String)> = cells
            .iter()
            .map(|c| (c.explainer.clone(), c.pipeline.clone()))
            .collect();
        for combo in [("gnn", "symm"), ("pg", "symm"), ("gnn", "lapnorm"), ("pg", "lapnorm")] {
            assert!(combos.contains(&(combo.0.into(), combo.1.into())), "missing {combo:?}");
        }
        for cell in &cells {
            assert_eq!(cell.report.records.len(), 3);
            assert!(cell.report.fid_plus.mean.is_finite());
            assert!(cell.report.characterization.mean.is_finite());
            // No planted ground truth, so no ranking metric anywhere.
            assert!(cell.report.auc.is_none());
            assert_eq!(cell.report.auc_undefined, 3);
            assert!(cell.accuracy.is_finite());
        }
        let again = real_dataset_grid(&ds, &cfg, "hash", 1).unwrap();
        assert_eq!(cells, again);
    }
}
