//! Multi-omics cohorts: the synthetic case/control simulator with planted
//! signal modules, and CSV ingestion of pre-tabulated cohorts.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{barabasi_albert, GeneGraph};
use crate::numerics::{Matrix, SeededRng};

/// Loading of every module feature on its module's shared latent factor.
pub const MODULE_FACTOR_LOADING: f64 = 0.5;

const DEFAULT_MODALITY_NAMES: [&str; 4] = ["genomics", "transcriptomics", "proteomics", "metabolomics"];

/// One omics layer: samples × features.
#[derive(Clone, Debug, PartialEq)]
pub struct Modality {
    pub name: String,
    pub feature_names: Vec<String>,
    pub data: Matrix,
}

impl Modality {
    pub fn n_features(&self) -> usize {
        self.data.cols()
    }

    /// Globally unique id of feature `j`: `modality:feature`.
    pub fn feature_id(&self, j: usize) -> String {
        format!("{}:{}", self.name, self.feature_names[j])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmicsDataset {
    pub sample_ids: Vec<String>,
    pub modalities: Vec<Modality>,
    /// 0 = control, 1 = case.
    pub labels: Vec<u8>,
    /// Per modality, per feature: whether the feature carries planted signal.
    pub truth_mask: Option<Vec<Vec<bool>>>,
    pub batch: Vec<usize>,
}

impl OmicsDataset {
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.sample_ids.len() != n || self.batch.len() != n {
            return Err(Error::Data(format!(
                "{} sample ids and {} batch ids for {n} labels",
                self.sample_ids.len(),
                self.batch.len()
            )));
        }
        for m in &self.modalities {
            if m.data.rows() != n {
                return Err(Error::Data(format!(
                    "modality `{}` has {} samples, expected {n}",
                    m.name,
                    m.data.rows()
                )));
            }
            if m.feature_names.len() != m.data.cols() {
                return Err(Error::Data(format!("modality `{}` feature names mismatch", m.name)));
            }
        }
        if let Some(mask) = &self.truth_mask {
            if mask.len() != self.modalities.len()
                || mask.iter().zip(&self.modalities).any(|(t, m)| t.len() != m.n_features())
            {
                return Err(Error::Data("truth mask does not match modality shapes".into()));
            }
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Feature ids across all modalities, in concatenation order.
    pub fn feature_ids(&self) -> Vec<String> {
        self.modalities
            .iter()
            .flat_map(|m| (0..m.n_features()).map(move |j| m.feature_id(j)))
            .collect()
    }

    /// Ids of planted signal features, if known.
    pub fn truth_ids(&self) -> Option<BTreeSet<String>> {
        let mask = self.truth_mask.as_ref()?;
        Some(
            self.modalities
                .iter()
                .zip(mask)
                .flat_map(|(m, t)| {
                    t.iter()
                        .enumerate()
                        .filter(|(_, s)| **s)
                        .map(move |(j, _)| m.feature_id(j))
                })
                .collect(),
        )
    }

    /// Restricts to a subset of samples, in the given order.
    pub fn select_samples(&self, idx: &[usize]) -> OmicsDataset {
        OmicsDataset {
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            modalities: self
                .modalities
                .iter()
                .map(|m| Modality {
                    name: m.name.clone(),
                    feature_names: m.feature_names.clone(),
                    data: m.data.select_rows(idx),
                })
                .collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            truth_mask: self.truth_mask.clone(),
            batch: idx.iter().map(|&i| self.batch[i]).collect(),
        }
    }

    /// Writes `<modality>.csv`, `labels.csv` and, when known,
    /// `truth_<modality>.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path, comments: &[String]) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header: String = comments.iter().map(|c| format!("# {c}\n")).collect();
        for m in &self.modalities {
            let mut out = header.clone();
            out.push_str("sample_id");
            for f in &m.feature_names {
                out.push(',');
                out.push_str(f);
            }
            out.push('\n');
            for (r, id) in self.sample_ids.iter().enumerate() {
                out.push_str(id);
                for v in m.data.row(r) {
                    out.push(',');
                    out.push_str(&v.to_string());
                }
                out.push('\n');
            }
            write_file(&dir.join(format!("{}.csv", m.name)), &out)?;
        }
        let mut labels = header.clone();
        labels.push_str("sample_id,label\n");
        for (id, l) in self.sample_ids.iter().zip(&self.labels) {
            labels.push_str(&format!("{id},{l}\n"));
        }
        write_file(&dir.join("labels.csv"), &labels)?;
        if let Some(mask) = &self.truth_mask {
            for (m, t) in self.modalities.iter().zip(mask) {
                let mut out = header.clone();
                out.push_str("feature,signal\n");
                for (f, s) in m.feature_names.iter().zip(t) {
                    out.push_str(&format!("{f},{}\n", u8::from(*s)));
                }
                write_file(&dir.join(format!("truth_{}.csv", m.name)), &out)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Parameters of the synthetic cohort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_samples: usize,
    pub modality_dims: Vec<usize>,
    pub module_count: usize,
    pub module_size: usize,
    /// Case-vs-control mean shift on signal features, in baseline sd units.
    pub effect_size: f64,
    pub noise_sd: f64,
    pub batch_sd: f64,
    pub n_batches: usize,
    /// Barabási–Albert attachment count for the genomics graph.
    pub graph_attach: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_samples: 200,
            modality_dims: vec![500, 300, 200, 100],
            module_count: 5,
            module_size: 10,
            effect_size: 0.8,
            noise_sd: 0.5,
            batch_sd: 0.3,
            n_batches: 2,
            graph_attach: 3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let min_dim = self.modality_dims.iter().copied().min().ok_or_else(|| {
            Error::config("modality_dims", "at least one modality is required")
        })?;
        if self.n_samples < 4 || self.n_samples % 2 != 0 {
            return Err(Error::config("n_samples", "must be even and at least 4"));
        }
        if self.module_count * self.module_size > min_dim {
            return Err(Error::config(
                "module_count",
                format!(
                    "module_count × module_size = {} exceeds the smallest modality ({min_dim})",
                    self.module_count * self.module_size
                ),
            ));
        }
        for (field, v) in [
            ("noise_sd", self.noise_sd),
            ("batch_sd", self.batch_sd),
            ("effect_size", self.effect_size),
        ] {
            if !v.is_finite() || (field != "effect_size" && v < 0.0) {
                return Err(Error::config(field, format!("invalid value {v}")));
            }
        }
        if self.n_batches == 0 {
            return Err(Error::config("n_batches", "must be at least 1"));
        }
        if self.graph_attach == 0 || self.graph_attach >= self.modality_dims[0] {
            return Err(Error::config(
                "graph_attach",
                "must satisfy 1 <= graph_attach < genomics dimension",
            ));
        }
        Ok(())
    }

    pub fn modality_name(i: usize) -> String {
        DEFAULT_MODALITY_NAMES
            .get(i)
            .map_or_else(|| format!("modality{i}"), |s| s.to_string())
    }
}

/// Picks `count` disjoint modules of `size` nodes: each grows breadth-first
/// from the highest-degree unused hub, visiting neighbors by degree.
pub fn hub_modules(graph: &GeneGraph, count: usize, size: usize) -> Vec<Vec<usize>> {
    let degrees = graph.degrees();
    let mut order: Vec<usize> = (0..graph.n_nodes()).collect();
    order.sort_by(|&a, &b| degrees[b].cmp(&degrees[a]).then(a.cmp(&b)));
    let mut used = vec![false; graph.n_nodes()];
    let mut modules = Vec::with_capacity(count);
    for &hub in &order {
        if modules.len() == count {
            break;
        }
        if used[hub] {
            continue;
        }
        let mut module = Vec::with_capacity(size);
        let mut seen = BTreeSet::from([hub]);
        let mut queue = VecDeque::from([hub]);
        while let Some(v) = queue.pop_front() {
            if module.len() == size {
                break;
            }
            if used[v] {
                continue;
            }
            module.push(v);
            let mut next: Vec<usize> = graph
                .neighbors(v)
                .iter()
                .copied()
                .filter(|u| !used[*u] && !seen.contains(u))
                .collect();
            next.sort_by(|&a, &b| degrees[b].cmp(&degrees[a]).then(a.cmp(&b)));
            for u in next {
                seen.insert(u);
                queue.push_back(u);
            }
        }
        if module.len() < size {
            continue;
        }
        for &v in &module {
            used[v] = true;
        }
        modules.push(module);
    }
    modules
}

/// Generates the synthetic cohort and its genomics interaction graph.
///
/// Labels alternate control/case; batches are assigned in alternating pairs
/// of samples so that batch is balanced against label.
pub fn simulate(cfg: &SimConfig, rng: &SeededRng) -> Result<(OmicsDataset, GeneGraph)> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let graph = barabasi_albert(cfg.modality_dims[0], cfg.graph_attach, &mut rng.split("graph"))?;
    let gen_modules = hub_modules(&graph, cfg.module_count, cfg.module_size);
    if gen_modules.len() < cfg.module_count {
        return Err(Error::config(
            "module_count",
            "graph too small to host the requested disjoint modules",
        ));
    }

    let labels: Vec<u8> = (0..n).map(|s| (s % 2) as u8).collect();
    let batch: Vec<usize> = (0..n).map(|s| (s / 2) % cfg.n_batches).collect();
    let sample_ids: Vec<String> = (0..n).map(|s| format!("S{:04}", s + 1)).collect();

    let mut factor_rng = rng.split("module-factors");
    let factors: Vec<Vec<f64>> = (0..cfg.module_count)
        .map(|_| (0..n).map(|_| factor_rng.standard_normal()).collect())
        .collect();

    let mut modalities = Vec::with_capacity(cfg.modality_dims.len());
    let mut truth = Vec::with_capacity(cfg.modality_dims.len());
    for (mi, &dim) in cfg.modality_dims.iter().enumerate() {
        let name = SimConfig::modality_name(mi);
        let mut module_of: Vec<Option<usize>> = vec![None; dim];
        if mi == 0 {
            for (k, module) in gen_modules.iter().enumerate() {
                for &v in module {
                    module_of[v] = Some(k);
                }
            }
        } else {
            for (j, slot) in module_of
                .iter_mut()
                .enumerate()
                .take(cfg.module_count * cfg.module_size)
            {
                *slot = Some(j / cfg.module_size);
            }
        }

        let mut base_rng = rng.split(&format!("baseline:{name}"));
        let mut noise_rng = rng.split(&format!("noise:{name}"));
        let mut batch_rng = rng.split(&format!("batch:{name}"));
        let offsets: Vec<Vec<f64>> = (0..cfg.n_batches)
            .map(|_| {
                (0..dim)
                    .map(|_| batch_rng.gauss(0.0, cfg.batch_sd))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;

        let mut data = Matrix::zeros(n, dim);
        for s in 0..n {
            for j in 0..dim {
                let mut v = base_rng.standard_normal();
                if let Some(k) = module_of[j] {
                    v += MODULE_FACTOR_LOADING * factors[k][s];
                    if labels[s] == 1 {
                        v += cfg.effect_size;
                    }
                }
                v += noise_rng.gauss(0.0, cfg.noise_sd)?;
                v += offsets[batch[s]][j];
                data[(s, j)] = v;
            }
        }
        let prefix = name.chars().next().unwrap_or('f');
        modalities.push(Modality {
            feature_names: (0..dim).map(|j| format!("{prefix}{j}")).collect(),
            name,
            data,
        });
        truth.push(module_of.iter().map(Option::is_some).collect());
    }

    let ds = OmicsDataset {
        sample_ids,
        modalities,
        labels,
        truth_mask: Some(truth),
        batch,
    };
    ds.validate()?;
    Ok((ds, graph))
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan" | "na")
}

struct RawTable {
    feature_names: Vec<String>,
    rows: BTreeMap<String, Vec<Option<f64>>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 {
        return Err(Error::Data(format!(
            "{}: expected a sample id column and at least one feature",
            path.display()
        )));
    }
    let feature_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows = BTreeMap::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = r + 2;
        let id = record.get(0).unwrap_or_default().to_string();
        let mut values = Vec::with_capacity(feature_names.len());
        for (c, cell) in record.iter().skip(1).enumerate() {
            if is_missing(cell) {
                values.push(None);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Data(format!(
                        "{}: non-numeric value `{cell}` at row {line}, column {} (`{}`)",
                        path.display(),
                        c + 2,
                        feature_names[c]
                    ))
                })?;
                if !v.is_finite() {
                    values.push(None);
                } else {
                    values.push(Some(v));
                }
            }
        }
        if values.len() != feature_names.len() {
            return Err(Error::Data(format!(
                "{}: row {line} has {} values, expected {}",
                path.display(),
                values.len(),
                feature_names.len()
            )));
        }
        if rows.insert(id.clone(), values).is_some() {
            return Err(Error::Data(format!("{}: duplicate sample id `{id}`", path.display())));
        }
    }
    Ok(RawTable { feature_names, rows })
}

fn read_labels(path: &Path) -> Result<HashMap<String, u8>> {
    let table = read_table(path)?;
    let mut labels = HashMap::new();
    for (id, row) in table.rows {
        let label = match row.first().copied().flatten() {
            Some(v) if v == 0.0 => 0,
            Some(v) if v == 1.0 => 1,
            other => {
                return Err(Error::Data(format!(
                    "{}: label for `{id}` must be 0 or 1, got {other:?}",
                    path.display()
                )))
            }
        };
        labels.insert(id, label);
    }
    Ok(labels)
}

/// Mean-imputes missing entries and scales each column to mean 0, sd 1
/// (population sd). Constant columns become all zeros.
pub fn impute_and_standardize(columns: &mut [Vec<Option<f64>>]) -> Vec<Vec<f64>> {
    columns
        .iter_mut()
        .enumerate()
        .map(|(j, col)| {
            let present: Vec<f64> = col.iter().flatten().copied().collect();
            let fill = if present.is_empty() {
                0.0
            } else {
                present.iter().sum::<f64>() / present.len() as f64
            };
            let filled: Vec<f64> = col.iter().map(|v| v.unwrap_or(fill)).collect();
            let n = filled.len() as f64;
            let mean = filled.iter().sum::<f64>() / n;
            let sd = (filled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                filled.iter().map(|v| (v - mean) / sd).collect()
            } else {
                warn!("feature column {j} is constant after imputation; set to zero");
                vec![0.0; filled.len()]
            }
        })
        .collect()
}

/// Loads pre-tabulated modality CSVs (first column sample id) and a
/// `sample_id,label` file. Samples are the intersection of all files,
/// sorted by id.
pub fn ingest_cohort(modality_paths: &[(String, &Path)], label_path: &Path) -> Result<OmicsDataset> {
    if modality_paths.is_empty() {
        return Err(Error::Data("no modality files given".into()));
    }
    let labels = read_labels(label_path)?;
    let tables: Vec<RawTable> = modality_paths
        .iter()
        .map(|(_, p)| read_table(p))
        .collect::<Result<_>>()?;
    let mut ids: BTreeSet<String> = labels.keys().cloned().collect();
    for t in &tables {
        ids.retain(|id| t.rows.contains_key(id));
    }
    if ids.is_empty() {
        return Err(Error::Data("no sample id is shared by all input files".into()));
    }
    let ids: Vec<String> = ids.into_iter().collect();
    let mut modalities = Vec::with_capacity(tables.len());
    for ((name, _), table) in modality_paths.iter().zip(tables) {
        let p = table.feature_names.len();
        let mut columns: Vec<Vec<Option<f64>>> = (0..p)
            .map(|j| ids.iter().map(|id| table.rows[id][j]).collect())
            .collect();
        let cols = impute_and_standardize(&mut columns);
        let data = Matrix::from_fn(ids.len(), p, |r, c| cols[c][r]);
        modalities.push(Modality {
            name: name.clone(),
            feature_names: table.feature_names,
            data,
        });
    }
    let ds = OmicsDataset {
        labels: ids.iter().map(|id| labels[id]).collect(),
        batch: vec![0; ids.len()],
        sample_ids: ids,
        modalities,
        truth_mask: None,
    };
    ds.validate()?;
    Ok(ds)
}
