//! The four pipeline stages. Each consumes the previous stage's artifacts
//! by path, verifies the config hash chain, and writes its own outputs.

use std::io::Write;
use std::path::Path;

use dgx_core::config::RunConfig;
use dgx_core::datagen::{generate, Dataset, SyntheticSpec};
use dgx_core::eval::{
    characterization, explanation_auc, fidelity, meets_accuracy_gate, sample_targets,
    MetricsReport, NodeMetrics,
};
use dgx_core::explain::{
    gnn_explainer_open, pg_explainer_explain, pg_explainer_train, Explanation, ExplainerKind,
};
use dgx_core::nn::{self, GcnModel};
use dgx_core::preprocess::{entropy_gap, prepare, Prepared};
use dgx_core::realworld::{load_real, RealDatasetManifest};
use dgx_core::DatasetKind;
use serde::Serialize;

use crate::artifacts::{self, Paths};
use crate::CliError;

/// Dense spectral entropy is quadratic in memory and cubic in time; skip it
/// on graphs past this size.
const ENTROPY_NODE_CAP: usize = 2000;

pub fn cmd_generate(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.hash();
    let paths = Paths::new(&cfg.out_dir);
    let kind = cfg.dataset_kind()?;
    let ds = if kind == DatasetKind::Real {
        let manifest_path = Path::new(cfg.dataset.manifest.as_ref().expect("validated"));
        let manifest = RealDatasetManifest::from_file(manifest_path).map_err(CliError::from)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let (ds, stats) = load_real(&manifest, base)?;
        if !stats.directional {
            log::warn!(
                "fixture {} is {:.1}% non-reciprocated; the pipeline comparison is vacuous",
                manifest.name,
                stats.non_reciprocated * 100.0
            );
        }
        ds
    } else {
        generate(&SyntheticSpec::defaults(kind, cfg.seed))?
    };
    artifacts::save_dataset(&ds, &hash, cfg.seed, &paths)?;
    println!(
        "generated {} ({} nodes, {} edges, {} classes) -> {}",
        ds.kind.name(),
        ds.graph.n(),
        ds.graph.edge_count(),
        ds.num_classes,
        paths.dataset_dir().display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    config_hash: String,
    seed: u64,
    epochs_ran: usize,
    train_acc: f64,
    val_acc: Option<f64>,
    test_acc: Option<f64>,
    gate_accuracy: f64,
    gate_passed: bool,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.hash();
    let paths = Paths::new(&cfg.out_dir);
    let ds = artifacts::load_dataset(&paths, &hash)?;
    let prep = prepare(&ds.graph, cfg.pipeline()?, cfg.preprocess.alpha)?;
    let input_dim = if ds.graph.feature_dim() == 0 { 1 } else { ds.graph.feature_dim() };
    let model = GcnModel::init(cfg.model_config(input_dim, ds.num_classes), cfg.seed);
    let (model, stats) = nn::train(model, &ds, &prep.matrix, &cfg.train_config())?;

    nn::save_checkpoint(&model, &hash, &paths.model())
        .map_err(|e| CliError::Other(e.to_string()))?;
    let mut log = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for s in &stats {
        let vl = s.val_loss.map(|v| v.to_string()).unwrap_or_default();
        let va = s.val_acc.map(|v| v.to_string()).unwrap_or_default();
        log.push_str(&format!("{},{},{},{},{}\n", s.epoch, s.train_loss, s.train_acc, vl, va));
    }
    artifacts::write_text(&paths.train_log(), &log)?;

    let x = nn::design_matrix(&prep.graph);
    let probs = nn::gcn_forward(&model, &prep.matrix, &x.view(), None)
        .map_err(|e| CliError::Other(e.to_string()))?;
    let acc_of = |nodes: &[usize]| -> Option<f64> {
        (!nodes.is_empty()).then(|| nn::accuracy(&probs, ds.graph.labels(), nodes))
    };
    let train_acc = acc_of(&ds.split.train_nodes()).unwrap_or(f64::NAN);
    let val_acc = acc_of(&ds.split.val_nodes());
    let test_acc = acc_of(&ds.split.test_nodes());
    // The gate judges held-out accuracy when a test split exists.
    let gate_accuracy = test_acc.unwrap_or(train_acc);
    let gate_passed = meets_accuracy_gate(gate_accuracy, ds.num_classes);
    let summary = TrainSummary {
        config_hash: hash,
        seed: cfg.seed,
        epochs_ran: stats.len().saturating_sub(1),
        train_acc,
        val_acc,
        test_acc,
        gate_accuracy,
        gate_passed,
    };
    artifacts::write_json(&paths.train_summary(), &summary)?;
    println!(
        "trained {} epochs, accuracy {:.3} -> {}",
        summary.epochs_ran,
        gate_accuracy,
        paths.model().display()
    );
    if !gate_passed {
        return Err(CliError::Gate(format!(
            "model accuracy {:.3} is below chance + 0.2 for {} classes",
            gate_accuracy, ds.num_classes
        )));
    }
    Ok(())
}

/// Test-split targets (training split when nothing is held out), sampled
/// down unless the config asks for the full set.
pub fn explain_targets(ds: &Dataset, cfg: &RunConfig) -> Vec<usize> {
    let test = ds.split.test_nodes();
    let pool = if test.is_empty() { ds.split.train_nodes() } else { test };
    let count = if cfg.eval.full_set { pool.len() } else { cfg.eval.sample };
    sample_targets(&pool, count, cfg.seed, "eval-sample")
}

pub fn cmd_explain(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.hash();
    let paths = Paths::new(&cfg.out_dir);
    let ds = artifacts::load_dataset(&paths, &hash)?;
    let model = artifacts::load_model(&paths, &hash)?;
    let prep = prepare(&ds.graph, cfg.pipeline()?, cfg.preprocess.alpha)?;
    let targets = explain_targets(&ds, cfg);
    let expl_cfg = cfg.explainer_config();

    let mut out = Vec::with_capacity(targets.len());
    match cfg.explainer_kind()? {
        ExplainerKind::Gnn => {
            for &v in &targets {
                out.push(gnn_explainer_open(&model, &prep, v, &expl_cfg, &hash)?.0);
            }
        }
        ExplainerKind::Pg => {
            let net = pg_explainer_train(&model, &prep, &targets, &expl_cfg, &hash)?;
            for &v in &targets {
                out.push(pg_explainer_explain(&net, &model, &prep, v, &hash)?);
            }
        }
    }

    let mut file = std::io::BufWriter::new(std::fs::File::create(paths.explanations())?);
    for expl in &out {
        let line = serde_json::to_string(&expl.to_record(&prep.graph))
            .map_err(|e| CliError::Other(e.to_string()))?;
        writeln!(file, "{line}")?;
    }
    file.flush()?;
    println!("explained {} nodes -> {}", out.len(), paths.explanations().display());
    Ok(())
}

pub fn load_explanations(paths: &Paths, prep: &Prepared, expect_hash: &str) -> Result<Vec<Explanation>, CliError> {
    let path = paths.explanations();
    if !path.is_file() {
        return Err(CliError::Artifact(format!(
            "explanations not found at {} (run `dgx explain` first)",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: dgx_core::explain::ExplanationRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Artifact(format!("{} line {}: {e}", path.display(), i + 1)))?;
        if rec.config_hash != expect_hash {
            return Err(CliError::Artifact(format!(
                "explanation for node {} carries config {} but this run is {}",
                rec.v,
                &rec.config_hash[..12.min(rec.config_hash.len())],
                &expect_hash[..12]
            )));
        }
        out.push(Explanation::from_record(&rec, &prep.graph)?);
    }
    Ok(out)
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.hash();
    let paths = Paths::new(&cfg.out_dir);
    let ds = artifacts::load_dataset(&paths, &hash)?;
    let model = artifacts::load_model(&paths, &hash)?;
    let prep = prepare(&ds.graph, cfg.pipeline()?, cfg.preprocess.alpha)?;
    let explanations = load_explanations(&paths, &prep, &hash)?;

    let k = cfg.eval_k()?;
    let convention = cfg.convention()?;
    let credit = cfg.reciprocal_credit()?;
    let gt = ds.graph.ground_truth();
    let mut records = Vec::with_capacity(explanations.len());
    for expl in &explanations {
        let (fid_plus, fid_minus) = fidelity(&model, &prep, expl, k, convention)?;
        let ch = characterization(fid_plus, fid_minus, cfg.eval.w_plus, 1.0 - cfg.eval.w_plus)?;
        let auc = gt.and_then(|gt| explanation_auc(expl, gt, prep.origin.as_deref(), credit));
        records.push(NodeMetrics { v: expl.v, fid_plus, fid_minus, characterization: ch, auc });
    }
    let mut report = MetricsReport::from_records(records, &hash, cfg.seed, 1);
    if ds.graph.n() <= ENTROPY_NODE_CAP {
        report.entropy = Some(entropy_gap(&ds.graph, cfg.preprocess.alpha)?.into());
    }
    artifacts::write_json(&paths.metrics_json(), &report)?;
    artifacts::write_text(&paths.metrics_csv(), &report.to_csv())?;
    println!(
        "evaluated {} explanations: fid+ {:.3}, fid- {:.3}, char {:.3}{} -> {}",
        report.records.len(),
        report.fid_plus.mean,
        report.fid_minus.mean,
        report.characterization.mean,
        report
            .auc
            .map(|a| format!(", auc {:.3}", a.mean))
            .unwrap_or_default(),
        paths.metrics_json().display()
    );
    Ok(())
}

pub fn cmd_export_dot(cfg: &RunConfig) -> Result<(), CliError> {
    let hash = cfg.hash();
    let paths = Paths::new(&cfg.out_dir);
    let ds = artifacts::load_dataset(&paths, &hash)?;
    let prep = prepare(&ds.graph, cfg.pipeline()?, cfg.preprocess.alpha)?;
    let explanations = load_explanations(&paths, &prep, &hash)?;
    let dir = paths.dot_dir();
    std::fs::create_dir_all(&dir)?;
    for expl in &explanations {
        let dot = dgx_core::explain::to_dot(&prep.graph, expl);
        artifacts::write_text(&dir.join(format!("expl_{}.dot", expl.v)), &dot)?;
    }
    println!("wrote {} DOT files -> {}", explanations.len(), dir.display());
    Ok(())
}
