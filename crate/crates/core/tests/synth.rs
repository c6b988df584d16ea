use omicsmap::numerics::{dot, Matrix, SeededRng};
use omicsmap::synth::{simulate, SimConfig};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn pooled_t_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let ss = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let se = (ss / df * (1.0 / na + 1.0 / nb)).sqrt();
    let t = (ma - mb) / se;
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    2.0 * (1.0 - dist.cdf(t.abs()))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Scores of the leading principal component by power iteration on the
/// column-centred Gram matrix.
fn first_pc_scores(x: &Matrix) -> Vec<f64> {
    let means: Vec<f64> = x.col_sums().iter().map(|s| s / x.rows() as f64).collect();
    let c = Matrix::from_fn(x.rows(), x.cols(), |r, j| x[(r, j)] - means[j]);
    let gram = c.matmul_t(&c).unwrap();
    let mut v: Vec<f64> = (0..x.rows()).map(|i| 1.0 + (i % 7) as f64).collect();
    for _ in 0..2000 {
        let w = gram.matvec(&v).unwrap();
        let norm = dot(&w, &w).sqrt();
        v = w.iter().map(|x| x / norm).collect();
    }
    v
}

#[test]
fn default_signal_features_are_detectable() {
    let cfg = SimConfig::default();
    let (ds, _) = simulate(&cfg, &SeededRng::new(50)).unwrap();
    let truth = ds.truth_mask.as_ref().unwrap();
    let (mut hits, mut total) = (0, 0);
    for (m, modality) in ds.modalities.iter().enumerate() {
        for j in 0..modality.n_features() {
            if !truth[m][j] {
                continue;
            }
            let col = modality.data.col(j);
            let case: Vec<f64> = (0..ds.n_samples()).filter(|&s| ds.labels[s] == 1).map(|s| col[s]).collect();
            let ctrl: Vec<f64> = (0..ds.n_samples()).filter(|&s| ds.labels[s] == 0).map(|s| col[s]).collect();
            total += 1;
            if pooled_t_pvalue(&case, &ctrl) < 0.01 {
                hits += 1;
            }
        }
    }
    assert_eq!(total, 4 * 50);
    assert!(hits as f64 >= 0.9 * total as f64, "{hits}/{total}");
}

#[test]
fn batch_dominates_leading_component_without_signal() {
    let cfg = SimConfig {
        effect_size: 0.0,
        ..SimConfig::default()
    };
    for seed in 0..3 {
        let (ds, _) = simulate(&cfg, &SeededRng::new(60 + seed)).unwrap();
        let batch: Vec<f64> = ds.batch.iter().map(|&b| b as f64).collect();
        let label: Vec<f64> = ds.labels.iter().map(|&l| f64::from(l)).collect();
        for modality in &ds.modalities {
            let pc = first_pc_scores(&modality.data);
            let (rb, rl) = (pearson(&pc, &batch).abs(), pearson(&pc, &label).abs());
            assert!(rb > rl, "seed {seed} {}: batch {rb} label {rl}", modality.name);
        }
    }
}
