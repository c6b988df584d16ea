//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use omicsmap::gat::{reconstruction_loss, GatLayer};
use omicsmap::graph::GeneGraph;
use omicsmap::numerics::{Matrix, SeededRng};
use omicsmap::vae::{draw_noise, loss_and_grad, MoveHyper, MoveModel};

pub const FD_STEP: f64 = 1e-5;

/// Relative error with a floor so that near-zero gradients are compared
/// absolutely.
pub fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6)
}

/// Central difference of `f(delta)` at zero.
pub fn central_diff(f: impl Fn(f64) -> f64) -> f64 {
    (f(FD_STEP) - f(-FD_STEP)) / (2.0 * FD_STEP)
}

pub fn random_graph(n: usize, p_edge: f64, rng: &mut SeededRng) -> GeneGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.uniform() < p_edge {
                edges.push((a, b));
            }
        }
    }
    GeneGraph::new(n, edges).unwrap()
}

#[derive(Clone, Copy)]
enum GatSlot {
    W(usize, usize),
    A(usize, usize),
    Readout(usize),
    Input(usize),
}

/// Worst relative error between analytic and finite-difference gradients of
/// the GAT reconstruction loss over every parameter and every input entry.
pub fn gat_gradient_max_rel_err(seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let graph = random_graph(5, 0.5, &mut rng);
    let d_in = 4;
    let layer = GatLayer::init(d_in, 2, 3, 0.2, &mut rng).unwrap();
    let input = Matrix::from_fn(5, d_in, |_, _| rng.standard_normal());
    let target = Matrix::from_fn(5, d_in, |_, _| rng.standard_normal());
    let (_, grads, _) = reconstruction_loss(&layer, &graph, &input, &target).unwrap();

    let eval = |slot: GatSlot, delta: f64| {
        let mut l = layer.clone();
        let mut x = input.clone();
        match slot {
            GatSlot::W(k, i) => l.heads[k].w.as_mut_slice()[i] += delta,
            GatSlot::A(k, i) => l.heads[k].a[i] += delta,
            GatSlot::Readout(i) => l.readout.as_mut_slice()[i] += delta,
            GatSlot::Input(i) => x.as_mut_slice()[i] += delta,
        }
        reconstruction_loss(&l, &graph, &x, &target).unwrap().0
    };
    let mut slots = Vec::new();
    for k in 0..layer.heads.len() {
        for i in 0..layer.heads[k].w.as_slice().len() {
            slots.push((GatSlot::W(k, i), grads.w[k].as_slice()[i]));
        }
        for i in 0..layer.heads[k].a.len() {
            slots.push((GatSlot::A(k, i), grads.a[k][i]));
        }
    }
    for i in 0..layer.readout.as_slice().len() {
        slots.push((GatSlot::Readout(i), grads.readout.as_slice()[i]));
    }
    for i in 0..input.as_slice().len() {
        slots.push((GatSlot::Input(i), grads.h.as_slice()[i]));
    }
    slots
        .into_iter()
        .map(|(slot, an)| rel_err(central_diff(|d| eval(slot, d)), an))
        .fold(0.0, f64::max)
}

/// Same check for the VAE: 2 modalities × 3 features, d_z = 2, 4 samples.
pub fn move_gradient_max_rel_err(seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let hyper = MoveHyper {
        d_z: 2,
        hidden: 3,
        beta: 0.5 + rng.uniform(),
        lambda_cross: 0.5 + rng.uniform(),
        ..MoveHyper::default()
    };
    let mut model = MoveModel::init(&[3, 3], &hyper, &mut rng).unwrap();
    for net in &mut model.nets {
        for b in [&mut net.enc_b1, &mut net.enc_b2, &mut net.dec_b1, &mut net.dec_b2] {
            b.iter_mut().for_each(|v| *v = 0.3 * rng.standard_normal());
        }
    }
    let xs: Vec<Matrix> = (0..2)
        .map(|_| Matrix::from_fn(4, 3, |_, _| rng.standard_normal()))
        .collect();
    let eps = draw_noise(2, 4, 2, &mut rng);
    let (_, grads) = loss_and_grad(&model, &xs, &eps, true).unwrap();
    let grads = grads.unwrap();

    let eval = |m: usize, t: usize, i: usize, delta: f64| {
        let mut perturbed = model.clone();
        perturbed.nets[m].tensors_mut()[t][i] += delta;
        loss_and_grad(&perturbed, &xs, &eps, false).unwrap().0.total
    };
    let mut worst = 0.0f64;
    for m in 0..model.nets.len() {
        for t in 0..8 {
            for i in 0..model.nets[m].tensors()[t].len() {
                let an = grads.nets[m].tensors()[t][i];
                worst = worst.max(rel_err(central_diff(|d| eval(m, t, i, d)), an));
            }
        }
    }
    worst
}

/// Brute-force AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counting one half.
pub fn auc_all_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            den += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / den
}

/// Benjamini–Hochberg adjusted p-values, written from the step-up
/// definition: adj_i = min over j with p_j ≥ p_i of m·p_j / rank_j.
pub fn bh_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let rank = |v: f64| p.iter().filter(|&&x| x <= v).count();
    p.iter()
        .map(|&pi| {
            p.iter()
                .filter(|&&pj| pj >= pi)
                .map(|&pj| m as f64 * pj / rank(pj) as f64)
                .fold(f64::INFINITY, f64::min)
                .min(1.0)
        })
        .collect()
}

/// Exact permutation p-value of the absolute mean-difference statistic by
/// enumerating every ordering of the labels.
pub fn exhaustive_perm_pvalue(x: &[f64], labels: &[u8]) -> f64 {
    fn stat(x: &[f64], labels: &[u8]) -> f64 {
        let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
        for (v, &l) in x.iter().zip(labels) {
            if l == 1 {
                s1 += v;
                n1 += 1.0;
            } else {
                s0 += v;
                n0 += 1.0;
            }
        }
        (s1 / n1 - s0 / n0).abs()
    }
    fn heap(k: usize, a: &mut Vec<u8>, x: &[f64], obs: f64, hits: &mut u64, total: &mut u64) {
        if k == 1 {
            *total += 1;
            if stat(x, a) >= obs - 1e-10 * obs.abs().max(1.0) {
                *hits += 1;
            }
            return;
        }
        heap(k - 1, a, x, obs, hits, total);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, x, obs, hits, total);
        }
    }
    let obs = stat(x, labels);
    let mut a = labels.to_vec();
    let (mut hits, mut total) = (0, 0);
    heap(a.len(), &mut a, x, obs, &mut hits, &mut total);
    hits as f64 / total as f64
}
