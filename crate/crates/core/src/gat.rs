//! Single-layer multi-head graph attention with hand-written gradients.
//!
//! Per head `k`, node `i` attends over `N_i ∪ {i}`:
//!
//! ```text
//! e_ij  = LeakyReLU(a_srcᵀ W h_i + a_dstᵀ W h_j)
//! α_ij  = softmax_j(e_ij)
//! h'_i  = ‖_k Σ_j α_ij W h_j
//! ```
//!
//! The layer is trained label-free by denoising reconstruction through a
//! linear readout, and the learned attention is turned into undirected
//! interaction strengths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GeneGraph;
use crate::numerics::{dot, leaky_relu, leaky_relu_grad, softmax_stable, Matrix, SeededRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatHead {
    /// `d_in × d_head`
    pub w: Matrix,
    /// Length `2·d_head`: the first half scores the attending node, the
    /// second half the attended neighbor.
    pub a: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatLayer {
    pub heads: Vec<GatHead>,
    pub leaky_slope: f64,
    /// `K·d_head × d_in` linear map used by the reconstruction objective.
    pub readout: Matrix,
}

impl GatLayer {
    /// Glorot-uniform initialization.
    pub fn init(d_in: usize, heads: usize, d_head: usize, leaky_slope: f64, rng: &mut SeededRng) -> Result<Self> {
        if heads == 0 || d_head == 0 || d_in == 0 {
            return Err(Error::InvalidArgument(format!(
                "GAT layer needs positive sizes, got d_in={d_in} heads={heads} d_head={d_head}"
            )));
        }
        let mut uniform = |bound: f64| (rng.uniform() * 2.0 - 1.0) * bound;
        let wb = (6.0 / (d_in + d_head) as f64).sqrt();
        let ab = (6.0 / (2 * d_head + 1) as f64).sqrt();
        let heads = (0..heads)
            .map(|_| GatHead {
                w: Matrix::from_fn(d_in, d_head, |_, _| uniform(wb)),
                a: (0..2 * d_head).map(|_| uniform(ab)).collect(),
            })
            .collect::<Vec<_>>();
        let out_dim = heads.len() * d_head;
        let rb = (6.0 / (out_dim + d_in) as f64).sqrt();
        let readout = Matrix::from_fn(out_dim, d_in, |_, _| uniform(rb));
        Ok(GatLayer {
            heads,
            leaky_slope,
            readout,
        })
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn d_in(&self) -> usize {
        self.heads[0].w.rows()
    }

    pub fn d_head(&self) -> usize {
        self.heads[0].w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.n_heads() * self.d_head()
    }

    pub fn is_finite(&self) -> bool {
        self.readout.is_finite()
            && self
                .heads
                .iter()
                .all(|h| h.w.is_finite() && h.a.iter().all(|x| x.is_finite()))
    }
}

#[derive(Clone, Debug)]
pub struct HeadCache {
    /// `W h` for every node, `n × d_head`.
    pub wh: Matrix,
    /// Per node, per neighborhood member: pre-activation `a_srcᵀWh_i + a_dstᵀWh_j`.
    pub pre: Vec<Vec<f64>>,
    /// Per node, per neighborhood member: `e_ij`.
    pub scores: Vec<Vec<f64>>,
    /// Per node, per neighborhood member: `α_ij`.
    pub alpha: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct GatForwardCache {
    /// Sorted `N_i ∪ {i}` for every node.
    pub neighborhoods: Vec<Vec<usize>>,
    pub heads: Vec<HeadCache>,
    /// Concatenated head outputs, `n × K·d_head`.
    pub output: Matrix,
}

impl GatForwardCache {
    /// Attention of `i` on `j` in head `k`, zero when `j ∉ N_i ∪ {i}`.
    pub fn alpha(&self, k: usize, i: usize, j: usize) -> f64 {
        self.neighborhoods[i]
            .binary_search(&j)
            .map_or(0.0, |pos| self.heads[k].alpha[i][pos])
    }
}

fn neighborhoods(graph: &GeneGraph) -> Vec<Vec<usize>> {
    (0..graph.n_nodes())
        .map(|i| {
            let mut n = graph.neighbors(i).to_vec();
            let pos = n.binary_search(&i).unwrap_err();
            n.insert(pos, i);
            n
        })
        .collect()
}

pub fn gat_forward(layer: &GatLayer, graph: &GeneGraph, h: &Matrix) -> Result<GatForwardCache> {
    if h.rows() != graph.n_nodes() {
        return Err(Error::Dimension(format!(
            "feature matrix has {} rows for a graph of {} nodes",
            h.rows(),
            graph.n_nodes()
        )));
    }
    if h.cols() != layer.d_in() {
        return Err(Error::Dimension(format!(
            "features have {} columns, layer expects {}",
            h.cols(),
            layer.d_in()
        )));
    }
    let nbhd = neighborhoods(graph);
    let n = graph.n_nodes();
    let d_head = layer.d_head();
    let mut output = Matrix::zeros(n, layer.out_dim());
    let mut heads = Vec::with_capacity(layer.n_heads());
    for (k, head) in layer.heads.iter().enumerate() {
        let wh = h.matmul(&head.w)?;
        let (a_src, a_dst) = head.a.split_at(d_head);
        let src: Vec<f64> = (0..n).map(|i| dot(a_src, wh.row(i))).collect();
        let dst: Vec<f64> = (0..n).map(|j| dot(a_dst, wh.row(j))).collect();
        let mut pre = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        let mut alpha = Vec::with_capacity(n);
        for i in 0..n {
            let p: Vec<f64> = nbhd[i].iter().map(|&j| src[i] + dst[j]).collect();
            let e: Vec<f64> = p.iter().map(|&x| leaky_relu(x, layer.leaky_slope)).collect();
            let a = softmax_stable(&e)?;
            let out = &mut output.row_mut(i)[k * d_head..(k + 1) * d_head];
            for (&j, &w) in nbhd[i].iter().zip(&a) {
                for (o, v) in out.iter_mut().zip(wh.row(j)) {
                    *o += w * v;
                }
            }
            pre.push(p);
            scores.push(e);
            alpha.push(a);
        }
        heads.push(HeadCache {
            wh,
            pre,
            scores,
            alpha,
        });
    }
    Ok(GatForwardCache {
        neighborhoods: nbhd,
        heads,
        output,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatGradients {
    pub w: Vec<Matrix>,
    pub a: Vec<Vec<f64>>,
    /// Zero unless produced by [`reconstruction_loss`].
    pub readout: Matrix,
    pub h: Matrix,
}

/// Backpropagates `grad_out = ∂L/∂h'` through the attention layer.
pub fn gat_backward(
    cache: &GatForwardCache,
    layer: &GatLayer,
    graph: &GeneGraph,
    h: &Matrix,
    grad_out: &Matrix,
) -> Result<GatGradients> {
    let n = graph.n_nodes();
    if grad_out.shape() != cache.output.shape() {
        return Err(Error::Dimension(format!(
            "output gradient is {}x{}, layer output is {}x{}",
            grad_out.rows(),
            grad_out.cols(),
            cache.output.rows(),
            cache.output.cols()
        )));
    }
    if h.rows() != n || h.cols() != layer.d_in() {
        return Err(Error::Dimension("input features do not match the forward pass".into()));
    }
    let d_head = layer.d_head();
    let mut grads_w = Vec::with_capacity(layer.n_heads());
    let mut grads_a = Vec::with_capacity(layer.n_heads());
    let mut grad_h = Matrix::zeros(n, layer.d_in());
    for (k, (head, hc)) in layer.heads.iter().zip(&cache.heads).enumerate() {
        let (a_src, a_dst) = head.a.split_at(d_head);
        let mut d_wh = Matrix::zeros(n, d_head);
        let mut d_src = vec![0.0; n];
        let mut d_dst = vec![0.0; n];
        for i in 0..n {
            let g_i = &grad_out.row(i)[k * d_head..(k + 1) * d_head];
            let nb = &cache.neighborhoods[i];
            let alpha = &hc.alpha[i];
            // out_i = Σ_j α_ij Wh_j
            let d_alpha: Vec<f64> = nb.iter().map(|&j| dot(g_i, hc.wh.row(j))).collect();
            for (&j, &a) in nb.iter().zip(alpha) {
                for (d, g) in d_wh.row_mut(j).iter_mut().zip(g_i) {
                    *d += a * g;
                }
            }
            let weighted: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
            for (pos, &j) in nb.iter().enumerate() {
                let d_e = alpha[pos] * (d_alpha[pos] - weighted);
                let d_pre = d_e * leaky_relu_grad(hc.pre[i][pos], layer.leaky_slope);
                d_src[i] += d_pre;
                d_dst[j] += d_pre;
            }
        }
        let mut d_a = vec![0.0; 2 * d_head];
        for i in 0..n {
            let wh_i = hc.wh.row(i);
            for c in 0..d_head {
                d_a[c] += d_src[i] * wh_i[c];
                d_a[d_head + c] += d_dst[i] * wh_i[c];
            }
            let row = d_wh.row_mut(i);
            for c in 0..d_head {
                row[c] += d_src[i] * a_src[c] + d_dst[i] * a_dst[c];
            }
        }
        grads_w.push(h.t_matmul(&d_wh)?);
        grad_h.add_assign(&d_wh.matmul_t(&head.w)?)?;
        grads_a.push(d_a);
    }
    Ok(GatGradients {
        w: grads_w,
        a: grads_a,
        readout: Matrix::zeros(layer.readout.rows(), layer.readout.cols()),
        h: grad_h,
    })
}

/// Mean squared error between `readout(h'(input))` and `target`, with
/// gradients for every parameter.
pub fn reconstruction_loss(
    layer: &GatLayer,
    graph: &GeneGraph,
    input: &Matrix,
    target: &Matrix,
) -> Result<(f64, GatGradients, GatForwardCache)> {
    if target.shape() != input.shape() {
        return Err(Error::Dimension("reconstruction target shape differs from input".into()));
    }
    let cache = gat_forward(layer, graph, input)?;
    let recon = cache.output.matmul(&layer.readout)?;
    let count = (target.rows() * target.cols()) as f64;
    let mut diff = recon;
    diff.axpy(-1.0, target)?;
    let loss = diff.frobenius_sq() / count;
    diff.scale(2.0 / count);
    let d_readout = cache.output.t_matmul(&diff)?;
    let d_out = diff.matmul_t(&layer.readout)?;
    let mut grads = gat_backward(&cache, layer, graph, input, &d_out)?;
    grads.readout = d_readout;
    Ok((loss, grads, cache))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatHyper {
    pub heads: usize,
    pub d_head: usize,
    pub leaky_slope: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Sd of the Gaussian corruption applied to the input each epoch.
    pub noise_sd: f64,
}

impl Default for GatHyper {
    fn default() -> Self {
        GatHyper {
            heads: 4,
            d_head: 16,
            leaky_slope: 0.2,
            lr: 0.05,
            epochs: 100,
            noise_sd: 0.5,
        }
    }
}

impl GatHyper {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 {
            return Err(Error::config("gat.heads", "must be at least 1"));
        }
        if self.d_head == 0 {
            return Err(Error::config("gat.d_head", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("gat.epochs", "must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("gat.lr", "must be positive"));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::config("gat.noise_sd", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GatTrained {
    pub layer: GatLayer,
    /// Input graph with attention-derived strengths attached.
    pub graph: GeneGraph,
    /// Head-averaged attention on clean input.
    pub attention: AttentionMatrix,
    /// Reconstruction loss before each update.
    pub losses: Vec<f64>,
}

/// Initializes a layer and trains it; see [`train_layer`].
pub fn gat_train(graph: &GeneGraph, h: &Matrix, hyper: &GatHyper, rng: &SeededRng) -> Result<GatTrained> {
    hyper.validate()?;
    let layer = GatLayer::init(h.cols(), hyper.heads, hyper.d_head, hyper.leaky_slope, &mut rng.split("gat-init"))?;
    train_layer(layer, graph, h, hyper, rng)
}

/// Full-batch gradient descent on the denoising reconstruction loss, then
/// extraction of edge strengths from attention on the clean input.
pub fn train_layer(
    mut layer: GatLayer,
    graph: &GeneGraph,
    h: &Matrix,
    hyper: &GatHyper,
    rng: &SeededRng,
) -> Result<GatTrained> {
    if hyper.epochs == 0 {
        return Err(Error::config("gat.epochs", "must be at least 1"));
    }
    let mut noise_rng = rng.split("gat-noise");
    let mut losses = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let input = if hyper.noise_sd > 0.0 {
            let mut x = h.clone();
            for v in x.as_mut_slice() {
                *v += hyper.noise_sd * noise_rng.standard_normal();
            }
            x
        } else {
            h.clone()
        };
        let (loss, grads, _) = reconstruction_loss(&layer, graph, &input, h)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "GAT reconstruction loss became non-finite at epoch {epoch}; try a smaller gat.lr"
            )));
        }
        losses.push(loss);
        for (k, head) in layer.heads.iter_mut().enumerate() {
            head.w.axpy(-hyper.lr, &grads.w[k])?;
            for (a, g) in head.a.iter_mut().zip(&grads.a[k]) {
                *a -= hyper.lr * g;
            }
        }
        layer.readout.axpy(-hyper.lr, &grads.readout)?;
        if !layer.is_finite() {
            return Err(Error::Divergence(format!(
                "GAT parameters became non-finite at epoch {epoch}; try a smaller gat.lr"
            )));
        }
    }
    let cache = gat_forward(&layer, graph, h)?;
    let strengths = edge_strengths(&cache, graph);
    let attention = AttentionMatrix::from_cache(&cache);
    Ok(GatTrained {
        layer,
        graph: graph.clone().with_strengths(strengths)?,
        attention,
        losses,
    })
}

/// Undirected strength per stored edge: mean over heads of `(α_ij + α_ji)/2`,
/// divided by the largest such value so the strongest edge is exactly 1.
pub fn edge_strengths(cache: &GatForwardCache, graph: &GeneGraph) -> Vec<f64> {
    let k = cache.heads.len() as f64;
    let raw: Vec<f64> = graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            (0..cache.heads.len())
                .map(|h| 0.5 * (cache.alpha(h, i, j) + cache.alpha(h, j, i)))
                .sum::<f64>()
                / k
        })
        .collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return raw;
    }
    raw.iter().map(|s| (s / max).min(1.0)).collect()
}

/// Sparse row-stochastic matrix of head-averaged attention weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMatrix {
    pub neighborhoods: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

impl AttentionMatrix {
    pub fn from_cache(cache: &GatForwardCache) -> Self {
        let k = cache.heads.len() as f64;
        let weights = cache
            .neighborhoods
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                (0..nb.len())
                    .map(|pos| cache.heads.iter().map(|h| h.alpha[i][pos]).sum::<f64>() / k)
                    .collect()
            })
            .collect();
        AttentionMatrix {
            neighborhoods: cache.neighborhoods.clone(),
            weights,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.neighborhoods.len()
    }

    /// Restriction to nodes `0..n` with rows renormalized to sum to one.
    pub fn restrict(&self, n: usize) -> AttentionMatrix {
        let n = n.min(self.n_nodes());
        let mut neighborhoods = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let (nb, w): (Vec<usize>, Vec<f64>) = self.neighborhoods[i]
                .iter()
                .zip(&self.weights[i])
                .filter(|(j, _)| **j < n)
                .map(|(j, w)| (*j, *w))
                .unzip();
            let total: f64 = w.iter().sum();
            neighborhoods.push(nb);
            weights.push(w.iter().map(|x| x / total).collect());
        }
        AttentionMatrix {
            neighborhoods,
            weights,
        }
    }

    /// One propagation step over the columns of `x` (samples × nodes):
    /// column `i` becomes `Σ_j A_ij x[:, j]`.
    pub fn propagate(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_nodes() {
            return Err(Error::Dimension(format!(
                "attention over {} nodes applied to {} columns",
                self.n_nodes(),
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            let src = x.row(r);
            let dst = out.row_mut(r);
            for (i, d) in dst.iter_mut().enumerate() {
                *d = self.neighborhoods[i]
                    .iter()
                    .zip(&self.weights[i])
                    .map(|(&j, &w)| w * src[j])
                    .sum();
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> GeneGraph {
        GeneGraph::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn isolated_node_attends_to_itself() {
        let g = GeneGraph::new(2, []).unwrap();
        let mut rng = SeededRng::new(1);
        let layer = GatLayer::init(3, 2, 2, 0.2, &mut rng).unwrap();
        let h = Matrix::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]]).unwrap();
        let cache = gat_forward(&layer, &g, &h).unwrap();
        for k in 0..2 {
            assert_eq!(cache.heads[k].alpha[0], vec![1.0]);
            let wh = h.matmul(&layer.heads[k].w).unwrap();
            for c in 0..2 {
                assert!((cache.output[(0, k * 2 + c)] - wh[(0, c)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_features_give_uniform_attention() {
        let g = GeneGraph::new(3, [(0, 1), (0, 2)]).unwrap();
        let mut rng = SeededRng::new(2);
        let layer = GatLayer::init(2, 1, 3, 0.2, &mut rng).unwrap();
        let h = Matrix::from_rows(&[[0.3, -0.7], [0.3, -0.7], [0.3, -0.7]]).unwrap();
        let cache = gat_forward(&layer, &g, &h).unwrap();
        for a in &cache.heads[0].alpha[0] {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn path_graph_matches_scalar_transcription() {
        let g = path3();
        let w = Matrix::from_rows(&[[0.5, -1.0], [1.5, 0.25]]).unwrap();
        let a = vec![0.7, -0.3, 0.2, 1.1];
        let layer = GatLayer {
            heads: vec![GatHead { w: w.clone(), a: a.clone() }],
            leaky_slope: 0.2,
            readout: Matrix::zeros(2, 2),
        };
        let h = Matrix::from_rows(&[[1.0, 0.0], [0.5, -2.0], [-1.0, 1.0]]).unwrap();
        let cache = gat_forward(&layer, &g, &h).unwrap();

        // scalar oracle
        let whx = |n: usize, c: usize| h[(n, 0)] * w[(0, c)] + h[(n, 1)] * w[(1, c)];
        let lrelu = |x: f64| if x > 0.0 { x } else { 0.2 * x };
        let nbhd = [vec![0usize, 1], vec![0, 1, 2], vec![1, 2]];
        for i in 0..3 {
            let e: Vec<f64> = nbhd[i]
                .iter()
                .map(|&j| {
                    lrelu(a[0] * whx(i, 0) + a[1] * whx(i, 1) + a[2] * whx(j, 0) + a[3] * whx(j, 1))
                })
                .collect();
            let z: f64 = e.iter().map(|x| x.exp()).sum();
            let alpha: Vec<f64> = e.iter().map(|x| x.exp() / z).collect();
            for (p, &j) in nbhd[i].iter().enumerate() {
                assert!((cache.alpha(0, i, j) - alpha[p]).abs() < 1e-14);
            }
            for c in 0..2 {
                let expect: f64 = nbhd[i].iter().zip(&alpha).map(|(&j, al)| al * whx(j, c)).sum();
                assert!((cache.output[(i, c)] - expect).abs() < 1e-14);
            }
        }
        assert_eq!(cache.alpha(0, 0, 2), 0.0);
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let g = path3();
        let mut rng = SeededRng::new(3);
        let layer = GatLayer::init(4, 2, 3, 0.2, &mut rng).unwrap();
        let h = Matrix::from_fn(3, 4, |_, _| rng.standard_normal());
        let cache = gat_forward(&layer, &g, &h).unwrap();
        let grads = gat_backward(&cache, &layer, &g, &h, &Matrix::zeros(3, 6)).unwrap();
        assert!(grads.w.iter().all(|m| m.as_slice().iter().all(|&x| x == 0.0)));
        assert!(grads.a.iter().flatten().all(|&x| x == 0.0));
        assert!(grads.h.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn duplicated_head_duplicates_gradient() {
        let g = GeneGraph::new(4, [(0, 1), (1, 2), (1, 3)]).unwrap();
        let mut rng = SeededRng::new(4);
        let mut layer = GatLayer::init(3, 1, 2, 0.2, &mut rng).unwrap();
        layer.heads.push(layer.heads[0].clone());
        let h = Matrix::from_fn(4, 3, |_, _| rng.standard_normal());
        let cache = gat_forward(&layer, &g, &h).unwrap();
        let block = Matrix::from_fn(4, 2, |_, _| rng.standard_normal());
        let grad_out = Matrix::hstack(&[&block, &block]).unwrap();
        let grads = gat_backward(&cache, &layer, &g, &h, &grad_out).unwrap();
        assert_eq!(grads.w[0], grads.w[1]);
        assert_eq!(grads.a[0], grads.a[1]);
    }

    #[test]
    fn backward_rejects_wrong_shape() {
        let g = path3();
        let mut rng = SeededRng::new(5);
        let layer = GatLayer::init(2, 1, 2, 0.2, &mut rng).unwrap();
        let h = Matrix::zeros(3, 2);
        let cache = gat_forward(&layer, &g, &h).unwrap();
        assert!(gat_backward(&cache, &layer, &g, &h, &Matrix::zeros(3, 3)).is_err());
        assert!(gat_forward(&layer, &g, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn strengths_rescaled_to_unit_max() {
        let mut rng = SeededRng::new(6);
        let g = crate::graph::barabasi_albert(12, 2, &mut rng).unwrap();
        let h = Matrix::from_fn(12, 5, |_, _| rng.standard_normal());
        let hyper = GatHyper {
            heads: 2,
            d_head: 3,
            epochs: 5,
            ..GatHyper::default()
        };
        let trained = gat_train(&g, &h, &hyper, &SeededRng::new(7)).unwrap();
        let s = trained.graph.edge_strength().unwrap();
        assert!(s.iter().all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(s.iter().copied().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn divergence_is_reported() {
        let mut rng = SeededRng::new(8);
        let g = crate::graph::barabasi_albert(10, 2, &mut rng).unwrap();
        let h = Matrix::from_fn(10, 6, |_, _| 10.0 * rng.standard_normal());
        let hyper = GatHyper {
            heads: 1,
            d_head: 4,
            lr: 1e6,
            epochs: 50,
            ..GatHyper::default()
        };
        let err = gat_train(&g, &h, &hyper, &SeededRng::new(1)).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err}");
    }

    #[test]
    fn attention_restriction_is_row_stochastic() {
        let mut rng = SeededRng::new(9);
        let g = crate::graph::barabasi_albert(15, 2, &mut rng).unwrap();
        let layer = GatLayer::init(4, 3, 2, 0.2, &mut rng).unwrap();
        let h = Matrix::from_fn(15, 4, |_, _| rng.standard_normal());
        let att = AttentionMatrix::from_cache(&gat_forward(&layer, &g, &h).unwrap());
        for sub in [att.clone(), att.restrict(7)] {
            for w in &sub.weights {
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let x = Matrix::from_fn(3, 15, |r, c| (r * 15 + c) as f64);
        let y = att.propagate(&x).unwrap();
        let i = 4;
        let expect: f64 = att.neighborhoods[i]
            .iter()
            .zip(&att.weights[i])
            .map(|(&j, w)| w * x[(1, j)])
            .sum();
        assert!((y[(1, i)] - expect).abs() < 1e-12);
    }
}
