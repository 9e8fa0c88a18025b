//! Where stage outputs live and how they are checked on the way back in.
//!
//! Every artifact embeds the run's config hash. A stage that consumes an
//! artifact verifies the hash against its own effective config first, so a
//! stale or foreign artifact fails loudly instead of poisoning the run.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use dgx_core::datagen::Dataset;
use dgx_core::graph::{DiGraph, Split};
use dgx_core::nn::{self, GcnModel};
use dgx_core::DatasetKind;

use crate::CliError;

pub struct Paths {
    root: PathBuf,
}

impl Paths {
    pub fn new(out_dir: &str) -> Paths {
        Paths { root: PathBuf::from(out_dir) }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("dataset")
    }
    pub fn meta(&self) -> PathBuf {
        self.dataset_dir().join("meta.json")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.ckpt")
    }
    pub fn train_log(&self) -> PathBuf {
        self.root.join("train_log.csv")
    }
    pub fn train_summary(&self) -> PathBuf {
        self.root.join("train_summary.json")
    }
    pub fn explanations(&self) -> PathBuf {
        self.root.join("explanations.jsonl")
    }
    pub fn metrics_json(&self) -> PathBuf {
        self.root.join("metrics.json")
    }
    pub fn metrics_csv(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn table1(&self, ext: &str) -> PathBuf {
        self.root.join(format!("table1.{ext}"))
    }
    pub fn table2(&self, ext: &str) -> PathBuf {
        self.root.join(format!("table2.{ext}"))
    }
    pub fn oracle(&self, kind: &str) -> PathBuf {
        self.root.join(format!("oracle_{kind}.json"))
    }
    pub fn dot_dir(&self) -> PathBuf {
        self.root.join("dot")
    }
}

/// Sidecar for the dataset CSV directory: identity, split, and the hash of
/// the config that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub config_hash: String,
    pub seed: u64,
    pub kind: String,
    pub num_classes: usize,
    pub description: String,
    pub n: usize,
    pub edges: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn save_dataset(
    ds: &Dataset,
    config_hash: &str,
    seed: u64,
    paths: &Paths,
) -> Result<(), CliError> {
    let dir = paths.dataset_dir();
    std::fs::create_dir_all(&dir)?;
    ds.graph.save_csv_dir(&dir).map_err(|e| CliError::Other(e.to_string()))?;
    let meta = DatasetMeta {
        config_hash: config_hash.to_string(),
        seed,
        kind: ds.kind.name().to_string(),
        num_classes: ds.num_classes,
        description: ds.description.clone(),
        n: ds.graph.n(),
        edges: ds.graph.edge_count(),
        train: ds.split.train_nodes(),
        val: ds.split.val_nodes(),
        test: ds.split.test_nodes(),
    };
    write_json(&paths.meta(), &meta)
}

pub fn load_dataset(paths: &Paths, expect_hash: &str) -> Result<Dataset, CliError> {
    let meta_path = paths.meta();
    if !meta_path.is_file() {
        return Err(CliError::Artifact(format!(
            "dataset metadata not found at {} (run `dgx generate` first)",
            meta_path.display()
        )));
    }
    let meta: DatasetMeta = read_json(&meta_path)?;
    if meta.config_hash != expect_hash {
        return Err(CliError::Artifact(format!(
            "dataset at {} was produced under config {} but this run is {}",
            paths.dataset_dir().display(),
            &meta.config_hash[..12.min(meta.config_hash.len())],
            &expect_hash[..12]
        )));
    }
    let graph = DiGraph::load_csv_dir(&paths.dataset_dir())
        .map_err(|e| CliError::Artifact(e.to_string()))?;
    if graph.n() != meta.n || graph.edge_count() != meta.edges {
        return Err(CliError::Artifact(format!(
            "dataset files disagree with metadata: {} nodes / {} edges on disk, {} / {} recorded",
            graph.n(),
            graph.edge_count(),
            meta.n,
            meta.edges
        )));
    }
    let mut split = Split::empty(graph.n());
    for &v in &meta.train {
        split.train[v] = true;
    }
    for &v in &meta.val {
        split.val[v] = true;
    }
    for &v in &meta.test {
        split.test[v] = true;
    }
    let kind = DatasetKind::from_name(&meta.kind)
        .ok_or_else(|| CliError::Artifact(format!("unknown dataset kind {:?} in metadata", meta.kind)))?;
    Ok(Dataset {
        graph,
        split,
        num_classes: meta.num_classes,
        kind,
        description: meta.description,
    })
}

pub fn load_model(paths: &Paths, expect_hash: &str) -> Result<GcnModel, CliError> {
    let path = paths.model();
    if !path.is_file() {
        return Err(CliError::Artifact(format!(
            "model checkpoint not found at {} (run `dgx train` first)",
            path.display()
        )));
    }
    let (model, hash) =
        nn::load_checkpoint(&path).map_err(|e| CliError::Artifact(e.to_string()))?;
    if hash != expect_hash {
        return Err(CliError::Artifact(format!(
            "checkpoint {} was trained under config {} but this run is {}",
            path.display(),
            &hash[..12.min(hash.len())],
            &expect_hash[..12]
        )));
    }
    Ok(model)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Artifact(format!("{} is not valid JSON: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}
