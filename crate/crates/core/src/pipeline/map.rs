//! Biomarker map: significant features joined by their attention edges.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdr::QValueTable;
use crate::graph::GeneGraph;

const FILL: [&str; 4] = ["#b2182b", "#ef8a62", "#fddbc7", "#f7f7f7"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapNode {
    pub id: String,
    pub q: f64,
    /// −log10 q.
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapEdge {
    pub a: String,
    pub b: String,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiomarkerMap {
    pub provenance: Provenance,
    pub nodes: Vec<MapNode>,
    pub edges: Vec<MapEdge>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapFormat {
    Dot,
    Json,
}

impl MapFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MapFormat::Dot => "dot",
            MapFormat::Json => "json",
        }
    }
}

impl FromStr for MapFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(MapFormat::Dot),
            "json" => Ok(MapFormat::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown map format `{other}` (expected dot or json)"
            ))),
        }
    }
}

/// Picks up to `top_k` nodes among features with `q < cutoff`, ordered by
/// q, then |β| descending, then id; then the `top_k` strongest graph edges
/// with both ends among them. `graph_ids[v]` is the feature id of graph
/// node `v`.
pub fn build_map(
    qvalues: &QValueTable,
    beta: &HashMap<String, f64>,
    graph: &GeneGraph,
    graph_ids: &[String],
    cutoff: f64,
    top_k: usize,
    provenance: Provenance,
) -> Result<BiomarkerMap> {
    if graph_ids.len() != graph.n_nodes() {
        return Err(Error::Dimension(format!(
            "{} ids for {} graph nodes",
            graph_ids.len(),
            graph.n_nodes()
        )));
    }
    let abs_beta = |id: &str| beta.get(id).map_or(0.0, |b| b.abs());
    let mut order: Vec<usize> = (0..qvalues.len()).filter(|&i| qvalues.q[i] < cutoff).collect();
    order.sort_by(|&a, &b| {
        qvalues.q[a]
            .total_cmp(&qvalues.q[b])
            .then(abs_beta(&qvalues.features[b]).total_cmp(&abs_beta(&qvalues.features[a])))
            .then(qvalues.features[a].cmp(&qvalues.features[b]))
    });
    order.truncate(top_k);
    let nodes: Vec<MapNode> = order
        .iter()
        .map(|&i| MapNode {
            id: qvalues.features[i].clone(),
            q: qvalues.q[i],
            size: -qvalues.q[i].max(f64::MIN_POSITIVE).log10(),
        })
        .collect();

    let node_of: HashMap<&str, usize> = graph_ids.iter().enumerate().map(|(v, id)| (id.as_str(), v)).collect();
    let in_map: Vec<usize> = nodes.iter().filter_map(|n| node_of.get(n.id.as_str()).copied()).collect();
    let mut edges: Vec<MapEdge> = Vec::new();
    if let Some(strength) = graph.edge_strength() {
        for (x, &u) in in_map.iter().enumerate() {
            for &v in &in_map[x + 1..] {
                if let Some(e) = graph.edge_index(u, v) {
                    let (a, b) = if graph_ids[u] <= graph_ids[v] { (u, v) } else { (v, u) };
                    edges.push(MapEdge {
                        a: graph_ids[a].clone(),
                        b: graph_ids[b].clone(),
                        strength: strength[e],
                    });
                }
            }
        }
    }
    edges.sort_by(|x, y| {
        y.strength
            .total_cmp(&x.strength)
            .then_with(|| x.a.cmp(&y.a))
            .then_with(|| x.b.cmp(&y.b))
    });
    edges.truncate(top_k);
    Ok(BiomarkerMap {
        provenance,
        nodes,
        edges,
    })
}

/// DOT node width for a q-value: 0.3 + 0.2·clamp(−log10 q, 0, 6).
pub fn node_width(q: f64) -> f64 {
    0.3 + 0.2 * (-q.max(f64::MIN_POSITIVE).log10()).clamp(0.0, 6.0)
}

/// Quartile class of each node's q among the map's nodes (0 = smallest q).
fn quartile_buckets(nodes: &[MapNode]) -> Vec<usize> {
    let n = nodes.len();
    nodes
        .iter()
        .map(|a| {
            let below = nodes.iter().filter(|b| b.q < a.q).count();
            (4 * below / n.max(1)).min(3)
        })
        .collect()
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn to_dot(map: &BiomarkerMap) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "// config_hash={} seed={}",
        map.provenance.config_hash, map.provenance.seed
    );
    out.push_str("graph biomarkers {\n");
    out.push_str("  node [shape=circle, style=filled, fixedsize=true, fontsize=8];\n");
    for (node, bucket) in map.nodes.iter().zip(quartile_buckets(&map.nodes)) {
        let _ = writeln!(
            out,
            "  \"{}\" [width={:.3}, fillcolor=\"{}\", tooltip=\"q={:e}\"];",
            dot_escape(&node.id),
            node_width(node.q),
            FILL[bucket],
            node.q
        );
    }
    for e in &map.edges {
        let _ = writeln!(
            out,
            "  \"{}\" -- \"{}\" [penwidth={:.3}];",
            dot_escape(&e.a),
            dot_escape(&e.b),
            1.0 + 4.0 * e.strength
        );
    }
    out.push_str("}\n");
    out
}

pub fn to_json(map: &BiomarkerMap) -> String {
    let mut s = serde_json::to_string_pretty(map).expect("map serializes");
    s.push('\n');
    s
}

pub fn map_from_json(text: &str) -> Result<BiomarkerMap> {
    serde_json::from_str(text).map_err(|e| Error::Data(format!("bad map JSON: {e}")))
}

pub fn export_map(map: &BiomarkerMap, format: MapFormat) -> String {
    match format {
        MapFormat::Dot => to_dot(map),
        MapFormat::Json => to_json(map),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdr::{qvalues_with_pi0, PValueMethod, PValueSet, DEFAULT_THRESHOLDS};

    fn prov() -> Provenance {
        Provenance {
            config_hash: "abc".into(),
            seed: 7,
        }
    }

    #[test]
    fn width_clamps() {
        assert!((node_width(1e-6) - 1.5).abs() < 1e-12);
        assert!((node_width(1e-12) - 1.5).abs() < 1e-12);
        assert!((node_width(1.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn nodes_only_dot_is_well_formed() {
        let map = BiomarkerMap {
            provenance: prov(),
            nodes: vec![MapNode {
                id: "g:g1".into(),
                q: 1e-6,
                size: 6.0,
            }],
            edges: vec![],
        };
        let dot = to_dot(&map);
        assert!(dot.starts_with("// config_hash=abc seed=7\ngraph biomarkers {\n"));
        assert!(dot.contains("\"g:g1\" [width=1.500"));
        assert!(dot.trim_end().ends_with('}'));
        assert!(!dot.contains("--"));
    }

    #[test]
    fn selection_order_and_edges() {
        let features: Vec<String> = ["g:a", "g:b", "g:c", "t:d"].iter().map(|s| s.to_string()).collect();
        let p = PValueSet::new(features, vec![0.001, 0.001, 0.002, 0.5], PValueMethod::Permutation).unwrap();
        let q = qvalues_with_pi0(&p, 1.0, &DEFAULT_THRESHOLDS).unwrap();
        let beta: HashMap<String, f64> = [("g:a", 0.1), ("g:b", -0.9), ("g:c", 0.2)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let graph = GeneGraph::new(3, [(0, 1), (1, 2), (0, 2)])
            .unwrap()
            .with_strengths(vec![0.5, 1.0, 0.2])
            .unwrap();
        let ids: Vec<String> = ["g:a", "g:b", "g:c"].iter().map(|s| s.to_string()).collect();
        let map = build_map(&q, &beta, &graph, &ids, 0.1, 2, prov()).unwrap();
        let names: Vec<&str> = map.nodes.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(names, ["g:b", "g:a"]);
        assert_eq!(map.edges.len(), 1);
        assert_eq!(map.edges[0].strength, 0.5);
    }

    #[test]
    fn unknown_format_rejected() {
        assert!("svg".parse::<MapFormat>().is_err());
        assert_eq!("json".parse::<MapFormat>().unwrap(), MapFormat::Json);
    }
}
