//! End-to-end run: GAT on the gene graph, MOVE latents, elastic-net
//! selection, permutation p-values and Storey q-values, then evaluation on
//! held-out samples.

mod benchmark;
mod map;
mod metrics;

pub use benchmark::{benchmark, benchmark_csv, BenchmarkConfig, BenchmarkRow, BenchmarkRun, BENCHMARK_HEADER};
pub use map::{
    build_map, export_map, map_from_json, node_width, to_dot, to_json, BiomarkerMap, MapEdge, MapFormat, MapNode,
    Provenance,
};
pub use metrics::{auc, f1, feature_precision};

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::enet::{cross_validate, enet_path, ElasticNetProblem, EnetHyper};
use crate::error::{Error, Result};
use crate::fdr::{perm_pvalues, storey_qvalues, QValueTable, DEFAULT_PI0_LAMBDA, DEFAULT_THRESHOLDS};
use crate::gat::{gat_train, AttentionMatrix, GatHyper};
use crate::graph::{correlation_graph, GeneGraph, DEFAULT_CORRELATION_THRESHOLD};
use crate::numerics::{standardize_columns, Matrix, SeededRng, Standardizer};
use crate::synth::{ingest_cohort, simulate, write_file, OmicsDataset, SimConfig};
use crate::vae::{fused_latent, move_train, MoveHyper};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdrHyper {
    /// Label permutations per feature.
    pub permutations: usize,
    /// Tuning point λ of the π0 estimate.
    pub pi0_lambda: f64,
    /// Share of training samples held back from screening and used only for
    /// p-values; 0 screens and tests on the same samples.
    pub inference_fraction: f64,
}

impl Default for FdrHyper {
    fn default() -> Self {
        FdrHyper {
            permutations: 999,
            pi0_lambda: DEFAULT_PI0_LAMBDA,
            inference_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityFile {
    pub name: String,
    pub path: PathBuf,
}

fn default_threshold() -> f64 {
    DEFAULT_CORRELATION_THRESHOLD
}

/// Pre-tabulated cohort. The first modality is the one the gene graph is
/// built on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    pub modalities: Vec<ModalityFile>,
    pub labels: PathBuf,
    #[serde(default = "default_threshold")]
    pub correlation_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Simulate(SimConfig),
    Ingest(IngestConfig),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Simulate(SimConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataSource,
    pub gat: GatHyper,
    #[serde(rename = "move")]
    pub move_hyper: MoveHyper,
    pub enet: EnetHyper,
    pub fdr: FdrHyper,
    /// q-value cut-offs reported per feature, ascending.
    pub thresholds: Vec<f64>,
    /// Node and edge budget of the biomarker map.
    pub top_k: usize,
    /// q cut-off at which feature precision is measured.
    pub eval_threshold: f64,
    pub train_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            data: DataSource::default(),
            gat: GatHyper::default(),
            move_hyper: MoveHyper::default(),
            enet: EnetHyper::default(),
            fdr: FdrHyper::default(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            top_k: 20,
            eval_threshold: 0.05,
            train_fraction: 0.7,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            field: "<json>".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.data {
            DataSource::Simulate(sim) => sim.validate()?,
            DataSource::Ingest(ing) => {
                if ing.modalities.is_empty() {
                    return Err(Error::config("data.ingest.modalities", "at least one modality file required"));
                }
                if !(ing.correlation_threshold > 0.0 && ing.correlation_threshold < 1.0) {
                    return Err(Error::config("data.ingest.correlation_threshold", "must lie in (0, 1)"));
                }
            }
        }
        self.gat.validate()?;
        self.move_hyper.validate()?;
        self.enet.validate()?;
        if self.fdr.permutations < 99 {
            return Err(Error::config("fdr.permutations", "must be at least 99"));
        }
        if !(0.0..1.0).contains(&self.fdr.pi0_lambda) {
            return Err(Error::config("fdr.pi0_lambda", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.fdr.inference_fraction) {
            return Err(Error::config("fdr.inference_fraction", "must lie in [0, 1)"));
        }
        if self.thresholds.is_empty()
            || self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0))
            || self.thresholds.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::config("thresholds", "must be non-empty, ascending and inside (0, 1)"));
        }
        if self.top_k == 0 {
            return Err(Error::config("top_k", "must be at least 1"));
        }
        if !(self.eval_threshold > 0.0 && self.eval_threshold < 1.0) {
            return Err(Error::config("eval_threshold", "must lie in (0, 1)"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Short SHA-256 digest of the configuration with the seed zeroed, so
    /// runs differing only in seed share a hash.
    pub fn hash(&self) -> String {
        let canonical = PipelineConfig { seed: 0, ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Makes relative ingestion paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DataSource::Ingest(ing) = &mut self.data {
            for m in &mut ing.modalities {
                if m.path.is_relative() {
                    m.path = base.join(&m.path);
                }
            }
            if ing.labels.is_relative() {
                ing.labels = base.join(&ing.labels);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub f1: f64,
    /// Planted-signal share of the features with q below the evaluation
    /// threshold; absent without ground truth or without discoveries.
    pub feature_precision: Option<f64>,
    /// Original features passed from elastic-net screening to testing.
    pub n_selected: usize,
    /// Features with q below the evaluation threshold.
    pub n_significant: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub runtime_secs: f64,
}

impl EvalReport {
    /// CSV without the runtime, so that repeated runs write identical bytes.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("auc,f1,feature_precision,n_selected,n_significant,n_train,n_test\n");
        let fp = self.feature_precision.map_or("NA".to_string(), |v| v.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            self.auc, self.f1, fp, self.n_selected, self.n_significant, self.n_train, self.n_test
        );
        out
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub provenance: Provenance,
    pub qvalues: QValueTable,
    pub map: BiomarkerMap,
    pub report: EvalReport,
    /// Gene graph with attention strengths.
    pub graph: GeneGraph,
    pub sample_ids: Vec<String>,
    /// Fused latent of every sample, in cohort order.
    pub latent: Matrix,
    /// Elastic-net coefficients of original features then latent columns.
    pub coefficients: Vec<(String, f64)>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl PipelineOutput {
    pub fn header(&self) -> Vec<String> {
        vec![format!(
            "config_hash={} seed={}",
            self.provenance.config_hash, self.provenance.seed
        )]
    }

    /// Writes `qvalues.csv`, `map.<ext>`, `report.csv`, `edges.tsv`,
    /// `latent.csv` and `coefficients.csv` into `dir`.
    pub fn write(&self, dir: &Path, format: MapFormat) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = self.header();
        write_file(&dir.join("qvalues.csv"), &self.qvalues.to_csv(&header))?;
        write_file(&dir.join(format!("map.{}", format.extension())), &export_map(&self.map, format))?;
        write_file(&dir.join("report.csv"), &self.report.to_csv(&header))?;
        write_file(&dir.join("edges.tsv"), &self.graph.to_edge_list(&header))?;

        let mut latent = comment_block(&header);
        latent.push_str("sample_id");
        for k in 0..self.latent.cols() {
            let _ = write!(latent, ",z{k}");
        }
        latent.push('\n');
        for (r, id) in self.sample_ids.iter().enumerate() {
            latent.push_str(id);
            for v in self.latent.row(r) {
                let _ = write!(latent, ",{v}");
            }
            latent.push('\n');
        }
        write_file(&dir.join("latent.csv"), &latent)?;

        let mut coef = comment_block(&header);
        coef.push_str("feature,beta\n");
        for (id, b) in &self.coefficients {
            let _ = writeln!(coef, "{id},{b}");
        }
        write_file(&dir.join("coefficients.csv"), &coef)
    }
}

fn comment_block(lines: &[String]) -> String {
    lines.iter().map(|c| format!("# {c}\n")).collect()
}

trait InStage<T> {
    fn stage(self, name: &'static str) -> Result<T>;
}

impl<T> InStage<T> for Result<T> {
    fn stage(self, name: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(name))
    }
}

/// Per class, a shuffled `fraction` of samples goes to training. Both parts
/// keep at least one sample of each class. Indices come back sorted.
pub fn stratified_split(labels: &[u8], fraction: f64, rng: &mut SeededRng) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::Data(format!(
                "class {class} has {} samples; a train/test split needs at least 2",
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        let k = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// One attention step over the leading columns that have a graph node;
/// remaining columns pass through.
fn smooth_prefix(attention: &AttentionMatrix, x: &Matrix) -> Result<Matrix> {
    let k = x.cols().min(attention.n_nodes());
    let lead: Vec<usize> = (0..k).collect();
    let smoothed = attention.restrict(k).propagate(&x.select_cols(&lead))?;
    if k == x.cols() {
        return Ok(smoothed);
    }
    let rest: Vec<usize> = (k..x.cols()).collect();
    Matrix::hstack(&[&smoothed, &x.select_cols(&rest)])
}

fn load(cfg: &PipelineConfig, rng: &SeededRng) -> Result<(OmicsDataset, Option<GeneGraph>)> {
    match &cfg.data {
        DataSource::Simulate(sim) => {
            let (ds, graph) = simulate(sim, &rng.split("data")).stage("simulate")?;
            Ok((ds, Some(graph)))
        }
        DataSource::Ingest(ing) => {
            let paths: Vec<(String, &Path)> = ing
                .modalities
                .iter()
                .map(|m| (m.name.clone(), m.path.as_path()))
                .collect();
            let ds = ingest_cohort(&paths, &ing.labels).stage("ingest")?;
            Ok((ds, None))
        }
    }
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let rng = SeededRng::new(cfg.seed);
    let (ds, graph) = load(cfg, &rng)?;
    run_on_dataset(cfg, &ds, graph)
}

/// Runs every stage on an already loaded cohort. Without a graph, one is
/// built from correlations among training samples of the first modality.
pub fn run_on_dataset(cfg: &PipelineConfig, ds: &OmicsDataset, graph: Option<GeneGraph>) -> Result<PipelineOutput> {
    let started = Instant::now();
    cfg.validate()?;
    ds.validate()?;
    let rng = SeededRng::new(cfg.seed);
    let provenance = Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };

    let (train, test) = stratified_split(&ds.labels, cfg.train_fraction, &mut rng.split("split")).stage("split")?;
    let tr = ds.select_samples(&train);
    let te = ds.select_samples(&test);
    let scalers: Vec<Standardizer> = tr.modalities.iter().map(|m| Standardizer::fit(&m.data)).collect();
    let xtr: Vec<Matrix> = tr.modalities.iter().map(|m| m.data.clone()).zip(&scalers).map(|(x, s)| s.apply(&x)).collect::<Result<_>>()?;
    let xte: Vec<Matrix> = te.modalities.iter().map(|m| m.data.clone()).zip(&scalers).map(|(x, s)| s.apply(&x)).collect::<Result<_>>()?;

    let graph = match graph {
        Some(g) => g,
        None => {
            let threshold = match &cfg.data {
                DataSource::Ingest(ing) => ing.correlation_threshold,
                DataSource::Simulate(_) => DEFAULT_CORRELATION_THRESHOLD,
            };
            correlation_graph(&xtr[0], threshold).stage("graph")?
        }
    };
    if graph.n_nodes() != xtr[0].cols() {
        return Err(Error::Data(format!(
            "gene graph has {} nodes but the first modality has {} features",
            graph.n_nodes(),
            xtr[0].cols()
        ))
        .in_stage("graph"));
    }

    info!("gat: {} nodes, {} edges", graph.n_nodes(), graph.n_edges());
    let gat = gat_train(&graph, &xtr[0].transpose(), &cfg.gat, &rng.split("gat")).stage("gat")?;

    info!("move: {} modalities", xtr.len());
    let smooth = |xs: &[Matrix]| -> Result<Vec<Matrix>> {
        xs.iter()
            .enumerate()
            .map(|(m, x)| {
                if cfg.move_hyper.gat_smoothing && m < 2 {
                    smooth_prefix(&gat.attention, x)
                } else {
                    Ok(x.clone())
                }
            })
            .collect()
    };
    let mtr = smooth(&xtr).stage("move")?;
    let mte = smooth(&xte).stage("move")?;
    let vae = move_train(&mtr, &cfg.move_hyper, &rng.split("move")).stage("move")?;
    let zte = fused_latent(&vae.model, &mte).stage("move")?;

    info!("enet: cross-validating over {} lambdas", cfg.enet.n_lambdas);
    let feature_ids = ds.feature_ids();
    let p_orig = feature_ids.len();
    let mut parts: Vec<&Matrix> = xtr.iter().collect();
    parts.push(&vae.fused);
    let (dtr, design_scaler) = standardize_columns(&Matrix::hstack(&parts)?);
    let mut parts: Vec<&Matrix> = xte.iter().collect();
    parts.push(&zte);
    let dte = design_scaler.apply(&Matrix::hstack(&parts)?)?;
    let ytr: Vec<f64> = tr.labels.iter().map(|&l| f64::from(l)).collect();
    let cv = cross_validate(&dtr, &ytr, &cfg.enet, &rng.split("enet")).stage("enet")?;
    let upto = cv
        .lambdas
        .iter()
        .position(|l| *l == cv.best_lambda)
        .unwrap_or(0);
    let template = ElasticNetProblem::new(&dtr, &ytr, cfg.enet.alpha, cv.best_lambda).stage("enet")?;
    let fit = enet_path(&template, &cv.lambdas[..=upto], cfg.enet.tol, cfg.enet.max_iter)
        .stage("enet")?
        .pop()
        .expect("non-empty path");
    if !fit.converged {
        warn!("elastic net stopped after {} sweeps without converging", fit.n_iter);
    }

    // screen on one part of the training samples, test on the rest
    let (screen_rows, test_rows) = if cfg.fdr.inference_fraction > 0.0 {
        stratified_split(&tr.labels, 1.0 - cfg.fdr.inference_fraction, &mut rng.split("fdr-split")).stage("fdr")?
    } else {
        let all: Vec<usize> = (0..train.len()).collect();
        (all.clone(), all)
    };
    let screen_beta = if screen_rows.len() == train.len() {
        fit.beta.clone()
    } else {
        let (dscreen, _) = standardize_columns(&dtr.select_rows(&screen_rows));
        let yscreen: Vec<f64> = screen_rows.iter().map(|&i| ytr[i]).collect();
        let screen = ElasticNetProblem::new(&dscreen, &yscreen, cfg.enet.alpha, cv.best_lambda).stage("fdr")?;
        enet_path(&screen, &cv.lambdas[..=upto], cfg.enet.tol, cfg.enet.max_iter)
            .stage("fdr")?
            .pop()
            .expect("non-empty path")
            .beta
    };
    let selected: Vec<usize> = (0..p_orig).filter(|&j| screen_beta[j] != 0.0).collect();
    info!("fdr: {} screened features", selected.len());
    let qvalues = if selected.is_empty() {
        QValueTable {
            features: vec![],
            p: vec![],
            q: vec![],
            pi0: 1.0,
            thresholds: cfg.thresholds.clone(),
            significant: vec![],
        }
    } else {
        let ids: Vec<String> = selected.iter().map(|&j| feature_ids[j].clone()).collect();
        let labels: Vec<u8> = test_rows.iter().map(|&i| tr.labels[i]).collect();
        let pv = perm_pvalues(
            &dtr.select_rows(&test_rows).select_cols(&selected),
            &labels,
            ids,
            cfg.fdr.permutations,
            &rng.split("fdr"),
        )
        .stage("fdr")?;
        storey_qvalues(&pv, cfg.fdr.pi0_lambda, &cfg.thresholds).stage("fdr")?
    };

    let latent_ids: Vec<String> = (0..vae.fused.cols()).map(|k| format!("latent:z{k}")).collect();
    let coefficients: Vec<(String, f64)> = feature_ids
        .iter()
        .chain(&latent_ids)
        .cloned()
        .zip(fit.beta.iter().copied())
        .collect();
    let beta_by_id: HashMap<String, f64> = coefficients.iter().take(p_orig).cloned().collect();
    let genomics = &ds.modalities[0];
    let graph_ids: Vec<String> = (0..genomics.n_features()).map(|j| genomics.feature_id(j)).collect();
    let loosest = *cfg.thresholds.last().expect("validated non-empty");
    let map = build_map(&qvalues, &beta_by_id, &gat.graph, &graph_ids, loosest, cfg.top_k, provenance.clone())
        .stage("map")?;

    let scores = fit.predict(&dte)?;
    let pred: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
    let significant: BTreeSet<String> = (0..qvalues.len())
        .filter(|&i| qvalues.q[i] < cfg.eval_threshold)
        .map(|i| qvalues.features[i].clone())
        .collect();
    let precision = match ds.truth_ids() {
        Some(truth) if !significant.is_empty() => Some(feature_precision(&significant, &truth)?),
        _ => None,
    };
    let mut latent = Matrix::zeros(ds.n_samples(), vae.fused.cols());
    for (rows, z) in [(&train, &vae.fused), (&test, &zte)] {
        for (r, &s) in rows.iter().enumerate() {
            latent.row_mut(s).copy_from_slice(z.row(r));
        }
    }
    let report = EvalReport {
        auc: auc(&scores, &te.labels).stage("evaluate")?,
        f1: f1(&pred, &te.labels).stage("evaluate")?,
        feature_precision: precision,
        n_selected: selected.len(),
        n_significant: significant.len(),
        n_train: train.len(),
        n_test: test.len(),
        runtime_secs: started.elapsed().as_secs_f64(),
    };
    info!(
        "done in {:.1}s: auc {:.3}, f1 {:.3}, {} significant",
        report.runtime_secs, report.auc, report.f1, report.n_significant
    );
    Ok(PipelineOutput {
        provenance,
        qvalues,
        map,
        report,
        graph: gat.graph,
        sample_ids: ds.sample_ids.clone(),
        latent,
        coefficients,
        train,
        test,
    })
}
