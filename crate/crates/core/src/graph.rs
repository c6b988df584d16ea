//! Gene-interaction graphs: scale-free simulation, correlation graphs for
//! real cohorts, and the `#nodes=N` edge-list text format.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

/// Default |r| cut-off for [`correlation_graph`].
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.6;

/// Undirected simple graph over `n_nodes` genes.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    edge_strength: Option<Vec<f64>>,
    lookup: HashMap<(usize, usize), usize>,
}

impl GeneGraph {
    /// Builds a graph from an edge list. Self-loops and duplicates are
    /// rejected; endpoints are stored as `(min, max)`.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut stored = Vec::new();
        let mut lookup = HashMap::new();
        let mut neighbors = vec![Vec::new(); n_nodes];
        for (a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::Data(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::Data(format!("self-loop on node {a}")));
            }
            let key = (a.min(b), a.max(b));
            if lookup.insert(key, stored.len()).is_some() {
                return Err(Error::Data(format!("duplicate edge {key:?}")));
            }
            stored.push(key);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        neighbors.iter_mut().for_each(|n| n.sort_unstable());
        Ok(GeneGraph {
            n_nodes,
            edges: stored,
            neighbors,
            edge_strength: None,
            lookup,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbors of `i`, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn edge_strength(&self) -> Option<&[f64]> {
        self.edge_strength.as_deref()
    }

    pub fn strength(&self, a: usize, b: usize) -> Option<f64> {
        let idx = self.edge_index(a, b)?;
        self.edge_strength.as_ref().map(|s| s[idx])
    }

    /// Attaches per-edge strengths, one per stored edge, each in `[0, 1]`.
    pub fn with_strengths(mut self, strengths: Vec<f64>) -> Result<Self> {
        if strengths.len() != self.edges.len() {
            return Err(Error::Dimension(format!(
                "{} strengths for {} edges",
                strengths.len(),
                self.edges.len()
            )));
        }
        if let Some(s) = strengths.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Data(format!("edge strength {s} outside [0, 1]")));
        }
        self.edge_strength = Some(strengths);
        Ok(self)
    }

    /// Subgraph induced on nodes `0..n`.
    pub fn prefix_subgraph(&self, n: usize) -> GeneGraph {
        let n = n.min(self.n_nodes);
        let keep: Vec<usize> = (0..self.edges.len())
            .filter(|&e| self.edges[e].1 < n)
            .collect();
        let mut g = GeneGraph::new(n, keep.iter().map(|&e| self.edges[e]))
            .expect("induced subgraph of a valid graph is valid");
        if let Some(s) = &self.edge_strength {
            g.edge_strength = Some(keep.iter().map(|&e| s[e]).collect());
        }
        g
    }

    /// Serializes to the edge-list text format: a `#nodes=N` header, optional
    /// `#` comment lines, then `i<TAB>j<TAB>strength` per edge (`NA` when the
    /// graph carries no strengths).
    pub fn to_edge_list(&self, comments: &[String]) -> String {
        let mut out = format!("#nodes={}\n", self.n_nodes);
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        for (idx, (a, b)) in self.edges.iter().enumerate() {
            match &self.edge_strength {
                Some(s) => {
                    let _ = writeln!(out, "{a}\t{b}\t{}", s[idx]);
                }
                None => {
                    let _ = writeln!(out, "{a}\t{b}\tNA");
                }
            }
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<GeneGraph> {
        let mut lines = text.lines().enumerate();
        let n_nodes = match lines.next() {
            Some((_, header)) => header
                .trim()
                .strip_prefix("#nodes=")
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| Error::Data(format!("bad edge-list header `{header}`")))?,
            None => return Err(Error::Data("empty edge list".into())),
        };
        let mut edges = Vec::new();
        let mut strengths = Vec::new();
        let mut any_na = false;
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Data(format!("edge list line {}: `{line}`", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let a: usize = fields[0].parse().map_err(|_| bad())?;
            let b: usize = fields[1].parse().map_err(|_| bad())?;
            if fields[2] == "NA" {
                any_na = true;
            } else {
                strengths.push(fields[2].parse::<f64>().map_err(|_| bad())?);
            }
            edges.push((a, b));
        }
        let g = GeneGraph::new(n_nodes, edges)?;
        if any_na {
            if !strengths.is_empty() {
                return Err(Error::Data("edge list mixes NA and numeric strengths".into()));
            }
            Ok(g)
        } else if g.n_edges() == 0 {
            Ok(g)
        } else {
            g.with_strengths(strengths)
        }
    }
}

/// Closed-form edge count of [`barabasi_albert`].
pub fn ba_edge_count(n: usize, m_attach: usize) -> usize {
    (m_attach + 1) * m_attach / 2 + (n - m_attach - 1) * m_attach
}

/// Preferential-attachment graph grown from a complete graph on
/// `m_attach + 1` nodes. Targets are drawn from an urn holding both endpoints
/// of every edge, which samples proportionally to degree; duplicates within
/// one step are redrawn.
pub fn barabasi_albert(n: usize, m_attach: usize, rng: &mut SeededRng) -> Result<GeneGraph> {
    if m_attach == 0 || m_attach >= n {
        return Err(Error::InvalidArgument(format!(
            "barabasi_albert requires 1 <= m_attach < n, got m_attach={m_attach}, n={n}"
        )));
    }
    let seed_nodes = m_attach + 1;
    let mut edges = Vec::with_capacity(ba_edge_count(n, m_attach));
    let mut urn = Vec::with_capacity(2 * ba_edge_count(n, m_attach));
    for a in 0..seed_nodes {
        for b in a + 1..seed_nodes {
            edges.push((a, b));
            urn.push(a);
            urn.push(b);
        }
    }
    let mut targets = BTreeSet::new();
    for v in seed_nodes..n {
        targets.clear();
        while targets.len() < m_attach {
            targets.insert(urn[rng.below(urn.len())]);
        }
        for &t in &targets {
            edges.push((t, v));
            urn.push(t);
            urn.push(v);
        }
    }
    GeneGraph::new(n, edges)
}

/// Pearson correlation of two columns; `None` if either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Graph with an edge wherever `|r| >= threshold` between two feature
/// columns of `x` (samples × features); strengths are `|r|`.
///
/// This stands in for the unspecified gene-network construction on real
/// cohorts. Constant columns get no edges.
pub fn correlation_graph(x: &Matrix, threshold: f64) -> Result<GeneGraph> {
    if x.rows() < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation graph needs at least 3 samples, got {}",
            x.rows()
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "correlation threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let xt = x.transpose();
    let p = x.cols();
    let constant: Vec<bool> = (0..p)
        .map(|j| {
            let c = xt.row(j);
            c.iter().all(|v| *v == c[0])
        })
        .collect();
    for (j, _) in constant.iter().enumerate().filter(|(_, c)| **c) {
        warn!("feature column {j} is constant; it takes part in no correlation edges");
    }
    let mut edges = Vec::new();
    let mut strengths = Vec::new();
    for i in 0..p {
        if constant[i] {
            continue;
        }
        for j in i + 1..p {
            if constant[j] {
                continue;
            }
            let r = pearson(xt.row(i), xt.row(j)).unwrap_or(0.0);
            if r.abs() >= threshold {
                edges.push((i, j));
                strengths.push(r.abs());
            }
        }
    }
    GeneGraph::new(p, edges)?.with_strengths(strengths)
}

/// Log-log slope of the degree density over degrees `>= k_min`, pooled over
/// several graphs. Degrees are grouped into doubling bins and each bin's
/// density is count / (bin width × total nodes).
pub fn degree_tail_slope(graphs: &[GeneGraph], k_min: usize) -> Option<f64> {
    let mut degrees = Vec::new();
    let mut total = 0usize;
    for g in graphs {
        degrees.extend(g.degrees());
        total += g.n_nodes();
    }
    let k_max = *degrees.iter().max()?;
    let mut pts = Vec::new();
    let mut lo = k_min;
    while lo <= k_max {
        let hi = lo * 2;
        let count = degrees.iter().filter(|&&d| d >= lo && d < hi).count();
        if count > 0 {
            let density = count as f64 / ((hi - lo) as f64 * total as f64);
            let centre = ((lo as f64) * (hi as f64 - 1.0)).sqrt();
            pts.push((centre.ln(), density.ln()));
        }
        lo = hi;
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_growth_is_complete() {
        let mut rng = SeededRng::new(1);
        let g = barabasi_albert(4, 3, &mut rng).unwrap();
        assert_eq!(g.n_edges(), 6);
        assert!((0..4).all(|i| g.degree(i) == 3));
    }

    #[test]
    fn ba_rejects_bad_parameters() {
        let mut rng = SeededRng::new(1);
        assert!(barabasi_albert(4, 4, &mut rng).is_err());
        assert!(barabasi_albert(4, 0, &mut rng).is_err());
    }

    #[test]
    fn ba_edge_count_small() {
        let mut rng = SeededRng::new(8);
        let g = barabasi_albert(100, 2, &mut rng).unwrap();
        // K3 seed (3 edges) plus 97 growth nodes with 2 edges each
        assert_eq!(g.n_edges(), 3 + 97 * 2);
        assert_eq!(ba_edge_count(100, 2), 197);
    }

    #[test]
    fn ba_edge_count_sweep_and_symmetry() {
        for n in 5..=50 {
            for m in 1..=4 {
                if m >= n {
                    continue;
                }
                let mut rng = SeededRng::new((n * 10 + m) as u64);
                let g = barabasi_albert(n, m, &mut rng).unwrap();
                assert_eq!(g.n_edges(), ba_edge_count(n, m), "n={n} m={m}");
                for i in 0..n {
                    for &j in g.neighbors(i) {
                        assert!(g.neighbors(j).binary_search(&i).is_ok());
                    }
                }
            }
        }
    }

    #[test]
    fn ba_is_deterministic() {
        let a = barabasi_albert(200, 3, &mut SeededRng::new(42)).unwrap();
        let b = barabasi_albert(200, 3, &mut SeededRng::new(42)).unwrap();
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn identical_columns_give_unit_edge() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [4.0, 4.0], [3.0, 3.0]]).unwrap();
        let g = correlation_graph(&x, 0.9).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert!((g.strength(0, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_isolated() {
        let x = Matrix::from_rows(&[[1.0, 5.0, 1.0], [2.0, 5.0, 2.0], [3.0, 5.0, 3.1]]).unwrap();
        let g = correlation_graph(&x, 0.5).unwrap();
        assert_eq!(g.degree(1), 0);
        assert_eq!(g.edges(), &[(0, 2)]);
    }

    #[test]
    fn independent_columns_rarely_connect() {
        let mut rng = SeededRng::new(17);
        let x = Matrix::from_fn(500, 2, |_, _| rng.standard_normal());
        assert_eq!(correlation_graph(&x, 0.5).unwrap().n_edges(), 0);
    }

    #[test]
    fn correlation_matches_two_pass_oracle() {
        let mut rng = SeededRng::new(5);
        let base: Vec<f64> = (0..30).map(|_| rng.standard_normal()).collect();
        let x = Matrix::from_fn(30, 4, |r, c| base[r] * (c as f64 * 0.4) + rng.standard_normal());
        let thr = 0.3;
        let g = correlation_graph(&x, thr).unwrap();
        let mut oracle = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                let (a, b) = (x.col(i), x.col(j));
                let n = a.len() as f64;
                let ma = a.iter().sum::<f64>() / n;
                let mb = b.iter().sum::<f64>() / n;
                let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
                let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n;
                let vb: f64 = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / n;
                if (cov / (va * vb).sqrt()).abs() >= thr {
                    oracle.push((i, j));
                }
            }
        }
        assert_eq!(g.edges(), oracle.as_slice());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = GeneGraph::new(4, [(0, 1), (2, 3)])
            .unwrap()
            .with_strengths(vec![0.25, 1.0])
            .unwrap();
        let text = g.to_edge_list(&["seed=1".into()]);
        assert!(text.starts_with("#nodes=4\n"));
        assert_eq!(GeneGraph::from_edge_list(&text).unwrap(), g);

        let bare = GeneGraph::new(3, [(0, 2)]).unwrap();
        assert_eq!(GeneGraph::from_edge_list(&bare.to_edge_list(&[])).unwrap(), bare);
    }

    #[test]
    fn rejects_loops_and_duplicates() {
        assert!(GeneGraph::new(3, [(1, 1)]).is_err());
        assert!(GeneGraph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(GeneGraph::new(3, [(0, 3)]).is_err());
    }
}
