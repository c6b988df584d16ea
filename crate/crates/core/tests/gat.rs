mod common;

use omicsmap::gat::{gat_forward, gat_train, train_layer, GatHyper, GatLayer};
use omicsmap::graph::{barabasi_albert, GeneGraph};
use omicsmap::numerics::{Matrix, SeededRng};
use omicsmap::synth::{hub_modules, simulate, SimConfig};

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..10 {
        let err = common::gat_gradient_max_rel_err(seed);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn attention_rows_are_stochastic() {
    let mut rng = SeededRng::new(21);
    for _ in 0..5 {
        let g = common::random_graph(30, 0.15, &mut rng);
        let layer = GatLayer::init(6, 3, 4, 0.2, &mut rng).unwrap();
        let h = Matrix::from_fn(30, 6, |_, _| 3.0 * rng.standard_normal());
        let cache = gat_forward(&layer, &g, &h).unwrap();
        for head in &cache.heads {
            for row in &head.alpha {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn relabeling_nodes_permutes_output() {
    let mut rng = SeededRng::new(22);
    let n = 20;
    let g = common::random_graph(n, 0.2, &mut rng);
    let layer = GatLayer::init(5, 2, 3, 0.2, &mut rng).unwrap();
    let h = Matrix::from_fn(n, 5, |_, _| rng.standard_normal());
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    // node i becomes perm[i]
    let g2 = GeneGraph::new(n, g.edges().iter().map(|&(a, b)| (perm[a], perm[b]))).unwrap();
    let mut h2 = Matrix::zeros(n, 5);
    for i in 0..n {
        h2.row_mut(perm[i]).copy_from_slice(h.row(i));
    }
    let out = gat_forward(&layer, &g, &h).unwrap().output;
    let out2 = gat_forward(&layer, &g2, &h2).unwrap().output;
    for i in 0..n {
        for (a, b) in out.row(i).iter().zip(out2.row(perm[i])) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn clean_training_loss_is_non_increasing() {
    let mut rng = SeededRng::new(23);
    let g = barabasi_albert(10, 2, &mut rng).unwrap();
    let d_in = 6;
    let h = Matrix::from_fn(10, d_in, |_, _| rng.standard_normal());
    let mut layer = GatLayer::init(d_in, 2, 3, 0.2, &mut rng).unwrap();
    // head outputs span d_in columns, so the readout can reach the identity map
    assert!(layer.out_dim() >= d_in);
    layer.readout = Matrix::from_fn(layer.out_dim(), d_in, |r, c| if r == c { 1.0 } else { 0.0 });
    let hyper = GatHyper {
        heads: 2,
        d_head: 3,
        lr: 1e-2,
        epochs: 200,
        noise_sd: 0.0,
        ..GatHyper::default()
    };
    let trained = train_layer(layer, &g, &h, &hyper, &SeededRng::new(1)).unwrap();
    for w in trained.losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    assert!(trained.losses.last().unwrap() < &trained.losses[0]);
}

// Known failure: hub edges carry ~1/degree attention from the hub side, and
// module-internal edges are almost all hub edges. Run with --include-ignored.
#[test]
#[ignore = "fails at defaults: hub degree dilution outweighs learned attention"]
fn module_edges_gain_attention() {
    let cfg = SimConfig::default();
    let hyper = GatHyper::default();
    for seed in 0..5 {
        let (ds, graph) = simulate(&cfg, &SeededRng::new(seed)).unwrap();
        let modules = hub_modules(&graph, cfg.module_count, cfg.module_size);
        let mut module_of = vec![usize::MAX; graph.n_nodes()];
        for (k, m) in modules.iter().enumerate() {
            for &v in m {
                module_of[v] = k;
            }
        }
        let genomics = &ds.modalities[0].data;
        let h = omicsmap::numerics::standardize_columns(genomics).0.transpose();
        let trained = gat_train(&graph, &h, &hyper, &SeededRng::new(100 + seed)).unwrap();
        let s = trained.graph.edge_strength().unwrap();
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for (e, &(a, b)) in graph.edges().iter().enumerate() {
            if module_of[a] != usize::MAX && module_of[a] == module_of[b] {
                inside.push(s[e]);
            } else {
                outside.push(s[e]);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&inside) > mean(&outside),
            "seed {seed}: module {} vs other {}",
            mean(&inside),
            mean(&outside)
        );
    }
}
