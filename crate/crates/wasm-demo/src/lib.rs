//! Browser bindings for three small operations of `omicsmap`. Each returns
//! a JSON string; the `*_json` functions are the plain Rust versions used by
//! the bindings and by native tests.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use omicsmap::enet::{enet_path, ElasticNetProblem};
use omicsmap::fdr::{storey_qvalues, PValueMethod, PValueSet, DEFAULT_THRESHOLDS};
use omicsmap::graph::{barabasi_albert, degree_tail_slope};
use omicsmap::numerics::{standardize_columns, Matrix, SeededRng};

#[derive(Debug, Serialize)]
pub struct GraphSummary {
    pub n_nodes: usize,
    pub n_edges: usize,
    /// `(degree, node count)` for every degree present.
    pub histogram: Vec<(usize, usize)>,
    pub tail_slope: Option<f64>,
    /// Edges among the first 60 nodes, for drawing.
    pub preview_edges: Vec<(usize, usize)>,
}

pub fn ba_graph_json(n: usize, m_attach: usize, seed: u64) -> Result<String, String> {
    if n > 50_000 {
        return Err("n is capped at 50000 in the demo".into());
    }
    let g = barabasi_albert(n, m_attach, &mut SeededRng::new(seed)).map_err(|e| e.to_string())?;
    let mut counts = std::collections::BTreeMap::new();
    for d in g.degrees() {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    let summary = GraphSummary {
        n_nodes: g.n_nodes(),
        n_edges: g.n_edges(),
        histogram: counts.into_iter().collect(),
        tail_slope: degree_tail_slope(std::slice::from_ref(&g), (2 * m_attach).max(4)),
        preview_edges: g.edges().iter().copied().filter(|&(a, b)| a < 60 && b < 60).collect(),
    };
    Ok(serde_json::to_string(&summary).expect("summary serializes"))
}

#[derive(Debug, Serialize)]
pub struct PathSummary {
    pub lambdas: Vec<f64>,
    /// `beta[k][j]`: coefficient of feature j at `lambdas[k]`.
    pub beta: Vec<Vec<f64>>,
    /// Features carrying signal in the simulated response.
    pub signal: Vec<usize>,
}

/// Elastic-net path on a random standardized design in which the first
/// `k` of `p` features drive the response.
pub fn enet_path_json(n: usize, p: usize, k: usize, alpha: f64, seed: u64) -> Result<String, String> {
    if n < 3 || p == 0 || k > p || n * p > 200_000 {
        return Err("need n >= 3, 1 <= p, k <= p and n*p <= 200000".into());
    }
    let mut rng = SeededRng::new(seed);
    let (x, _) = standardize_columns(&Matrix::from_fn(n, p, |_, _| rng.standard_normal()));
    let y: Vec<f64> = (0..n)
        .map(|i| (0..k).map(|j| x[(i, j)]).sum::<f64>() + 0.5 * rng.standard_normal())
        .collect();
    let template = ElasticNetProblem::new(&x, &y, alpha, 1.0).map_err(|e| e.to_string())?;
    let top = template.lambda_max();
    let lambdas: Vec<f64> = (0..40).map(|i| top * 10f64.powf(-3.0 * i as f64 / 39.0)).collect();
    let fits = enet_path(&template, &lambdas, 1e-7, 10_000).map_err(|e| e.to_string())?;
    let summary = PathSummary {
        lambdas,
        beta: fits.into_iter().map(|f| f.beta).collect(),
        signal: (0..k).collect(),
    };
    Ok(serde_json::to_string(&summary).expect("summary serializes"))
}

#[derive(Debug, Serialize)]
pub struct QSummary {
    pub pi0: f64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub n_significant: Vec<usize>,
}

/// q-values for p-values separated by commas, whitespace or newlines.
pub fn qvalues_json(text: &str, pi0_lambda: f64) -> Result<String, String> {
    let p: Vec<f64> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect::<Result<_, _>>()?;
    let ids = (0..p.len()).map(|i| format!("p{i}")).collect();
    let set = PValueSet::new(ids, p, PValueMethod::Permutation).map_err(|e| e.to_string())?;
    let table = storey_qvalues(&set, pi0_lambda, &DEFAULT_THRESHOLDS).map_err(|e| e.to_string())?;
    let n_significant = table
        .thresholds
        .iter()
        .map(|&t| table.q.iter().filter(|&&q| q < t).count())
        .collect();
    let summary = QSummary {
        pi0: table.pi0,
        p: set.p,
        q: table.q,
        thresholds: table.thresholds,
        n_significant,
    };
    Ok(serde_json::to_string(&summary).expect("summary serializes"))
}

#[wasm_bindgen]
pub fn ba_graph(n: usize, m_attach: usize, seed: u64) -> Result<String, JsError> {
    ba_graph_json(n, m_attach, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn enet_path_demo(n: usize, p: usize, k: usize, alpha: f64, seed: u64) -> Result<String, JsError> {
    enet_path_json(n, p, k, alpha, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn qvalues(text: &str, pi0_lambda: f64) -> Result<String, JsError> {
    qvalues_json(text, pi0_lambda).map_err(|e| JsError::new(&e))
}
