//! Multi-modality variational autoencoder.
//!
//! Each modality has its own one-hidden-layer tanh encoder producing
//! `(μ, log σ²)` in a shared latent space of dimension `d_z`, and its own
//! one-hidden-layer tanh decoder. The minimized loss is
//!
//! ```text
//! total = Σ_m recon_m + β Σ_m kl_m + λ_cross · cross
//! ```
//!
//! where `recon_m` is the mean squared reconstruction error from a single
//! reparameterized draw, `kl_m` the sample-averaged KL to N(0, I), and
//! `cross` the mean over samples and unordered modality pairs of
//! `‖μ^(m) − μ^(m′)‖² / d_z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

pub const LOG_VAR_CLAMP: f64 = 10.0;

/// Parameters of one modality's encoder and decoder. Also used to hold
/// gradients of the same shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityNet {
    pub enc_w1: Matrix,
    pub enc_b1: Vec<f64>,
    pub enc_w2: Matrix,
    pub enc_b2: Vec<f64>,
    pub dec_w1: Matrix,
    pub dec_b1: Vec<f64>,
    pub dec_w2: Matrix,
    pub dec_b2: Vec<f64>,
}

impl ModalityNet {
    fn zeros(d_in: usize, hidden: usize, d_z: usize) -> Self {
        ModalityNet {
            enc_w1: Matrix::zeros(d_in, hidden),
            enc_b1: vec![0.0; hidden],
            enc_w2: Matrix::zeros(hidden, 2 * d_z),
            enc_b2: vec![0.0; 2 * d_z],
            dec_w1: Matrix::zeros(d_z, hidden),
            dec_b1: vec![0.0; hidden],
            dec_w2: Matrix::zeros(hidden, d_in),
            dec_b2: vec![0.0; d_in],
        }
    }

    fn init(d_in: usize, hidden: usize, d_z: usize, rng: &mut SeededRng) -> Self {
        let mut glorot = |r: usize, c: usize| {
            let b = (6.0 / (r + c) as f64).sqrt();
            Matrix::from_fn(r, c, |_, _| (rng.uniform() * 2.0 - 1.0) * b)
        };
        ModalityNet {
            enc_w1: glorot(d_in, hidden),
            enc_w2: glorot(hidden, 2 * d_z),
            dec_w1: glorot(d_z, hidden),
            dec_w2: glorot(hidden, d_in),
            ..ModalityNet::zeros(d_in, hidden, d_z)
        }
    }

    pub fn d_in(&self) -> usize {
        self.enc_w1.rows()
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.enc_w1.as_slice(),
            &self.enc_b1,
            self.enc_w2.as_slice(),
            &self.enc_b2,
            self.dec_w1.as_slice(),
            &self.dec_b1,
            self.dec_w2.as_slice(),
            &self.dec_b2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.enc_w1.as_mut_slice(),
            &mut self.enc_b1,
            self.enc_w2.as_mut_slice(),
            &mut self.enc_b2,
            self.dec_w1.as_mut_slice(),
            &mut self.dec_b1,
            self.dec_w2.as_mut_slice(),
            &mut self.dec_b2,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveModel {
    pub nets: Vec<ModalityNet>,
    pub d_z: usize,
    pub hidden: usize,
    pub beta: f64,
    pub lambda_cross: f64,
}

impl MoveModel {
    pub fn init(dims: &[usize], hyper: &MoveHyper, rng: &mut SeededRng) -> Result<Self> {
        hyper.validate()?;
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument("every modality needs at least one feature".into()));
        }
        Ok(MoveModel {
            nets: dims
                .iter()
                .map(|&d| ModalityNet::init(d, hyper.hidden, hyper.d_z, rng))
                .collect(),
            d_z: hyper.d_z,
            hidden: hyper.hidden,
            beta: hyper.beta,
            lambda_cross: hyper.lambda_cross,
        })
    }

    /// Same architecture with all parameters zero.
    pub fn zeros_like(&self) -> Self {
        MoveModel {
            nets: self
                .nets
                .iter()
                .map(|n| ModalityNet::zeros(n.d_in(), self.hidden, self.d_z))
                .collect(),
            ..self.clone()
        }
    }

    pub fn n_params(&self) -> usize {
        self.nets
            .iter()
            .flat_map(|n| n.tensors())
            .map(|t| t.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.nets
            .iter()
            .flat_map(|n| n.tensors())
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn check_inputs(&self, xs: &[Matrix]) -> Result<usize> {
        if xs.len() != self.nets.len() {
            return Err(Error::Dimension(format!(
                "{} modality matrices for a model of {} modalities",
                xs.len(),
                self.nets.len()
            )));
        }
        let n = xs[0].rows();
        for (m, (x, net)) in xs.iter().zip(&self.nets).enumerate() {
            if x.cols() != net.d_in() {
                return Err(Error::Dimension(format!(
                    "modality {m} has {} features, model expects {}",
                    x.cols(),
                    net.d_in()
                )));
            }
            if x.rows() != n {
                return Err(Error::Dimension(format!(
                    "modality {m} has {} samples, expected {n}",
                    x.rows()
                )));
            }
        }
        Ok(n)
    }
}

fn affine(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    let mut out = x.matmul(w)?;
    out.add_row_vector(b)?;
    Ok(out)
}

struct EncoderPass {
    hidden: Matrix,
    mu: Matrix,
    log_var_raw: Matrix,
    log_var: Matrix,
}

fn encode_one(net: &ModalityNet, x: &Matrix, d_z: usize) -> Result<EncoderPass> {
    let hidden = affine(x, &net.enc_w1, &net.enc_b1)?.map(f64::tanh);
    let out = affine(&hidden, &net.enc_w2, &net.enc_b2)?;
    let n = x.rows();
    let mu = Matrix::from_fn(n, d_z, |r, c| out[(r, c)]);
    let log_var_raw = Matrix::from_fn(n, d_z, |r, c| out[(r, d_z + c)]);
    let log_var = log_var_raw.map(|v| v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP));
    Ok(EncoderPass {
        hidden,
        mu,
        log_var_raw,
        log_var,
    })
}

/// Per-modality `(μ, log σ²)`, each `samples × d_z`; log σ² is clamped to
/// `[-10, 10]`.
pub fn move_encode(model: &MoveModel, xs: &[Matrix]) -> Result<Vec<(Matrix, Matrix)>> {
    model.check_inputs(xs)?;
    xs.iter()
        .zip(&model.nets)
        .map(|(x, net)| encode_one(net, x, model.d_z).map(|p| (p.mu, p.log_var)))
        .collect()
}

/// Mean of the modality posterior means: the fused per-sample latent.
pub fn fused_latent(model: &MoveModel, xs: &[Matrix]) -> Result<Matrix> {
    let enc = move_encode(model, xs)?;
    let mut fused = Matrix::zeros(xs[0].rows(), model.d_z);
    for (mu, _) in &enc {
        fused.add_assign(mu)?;
    }
    fused.scale(1.0 / enc.len() as f64);
    Ok(fused)
}

/// Decoder mean for latent codes `z` (samples × d_z) of modality `m`.
pub fn move_decode(model: &MoveModel, m: usize, z: &Matrix) -> Result<Matrix> {
    let net = &model.nets[m];
    let hidden = affine(z, &net.dec_w1, &net.dec_b1)?.map(f64::tanh);
    affine(&hidden, &net.dec_w2, &net.dec_b2)
}

/// KL(N(μ, diag σ²) ‖ N(0, I)) = ½ Σ_d (μ_d² + σ_d² − 1 − log σ_d²).
pub fn kl_diag_gauss(mu: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveLossReport {
    pub recon: Vec<f64>,
    pub kl: Vec<f64>,
    pub cross: f64,
    pub total: f64,
}

/// Standard-normal draws for the reparameterization, one `n × d_z` block per
/// modality, in modality order.
pub fn draw_noise(n_modalities: usize, n: usize, d_z: usize, rng: &mut SeededRng) -> Vec<Matrix> {
    (0..n_modalities)
        .map(|_| Matrix::from_fn(n, d_z, |_, _| rng.standard_normal()))
        .collect()
}

/// Loss with a reparameterized draw taken from `rng`.
pub fn move_loss(model: &MoveModel, xs: &[Matrix], rng: &mut SeededRng) -> Result<MoveLossReport> {
    let n = model.check_inputs(xs)?;
    let eps = draw_noise(xs.len(), n, model.d_z, rng);
    Ok(loss_and_grad(model, xs, &eps, false)?.0)
}

/// Loss and, if requested, its gradient for fixed reparameterization noise.
pub fn loss_and_grad(
    model: &MoveModel,
    xs: &[Matrix],
    eps: &[Matrix],
    want_grad: bool,
) -> Result<(MoveLossReport, Option<MoveModel>)> {
    let n = model.check_inputs(xs)?;
    let n_mod = xs.len();
    let d_z = model.d_z;
    if eps.len() != n_mod || eps.iter().any(|e| e.shape() != (n, d_z)) {
        return Err(Error::Dimension("reparameterization noise has the wrong shape".into()));
    }
    let nf = n as f64;

    let encs: Vec<EncoderPass> = xs
        .iter()
        .zip(&model.nets)
        .map(|(x, net)| encode_one(net, x, d_z))
        .collect::<Result<_>>()?;

    let mut recon = Vec::with_capacity(n_mod);
    let mut kl = Vec::with_capacity(n_mod);
    let mut d_mu: Vec<Matrix> = Vec::with_capacity(n_mod);
    let mut d_lv: Vec<Matrix> = Vec::with_capacity(n_mod);
    let mut grads = want_grad.then(|| model.zeros_like());

    for m in 0..n_mod {
        let enc = &encs[m];
        let net = &model.nets[m];
        let x = &xs[m];
        let sd = enc.log_var.map(|lv| (0.5 * lv).exp());
        let mut z = enc.mu.clone();
        for ((zv, s), e) in z.as_mut_slice().iter_mut().zip(sd.as_slice()).zip(eps[m].as_slice()) {
            *zv += s * e;
        }
        let dec_hidden = affine(&z, &net.dec_w1, &net.dec_b1)?.map(f64::tanh);
        let x_hat = affine(&dec_hidden, &net.dec_w2, &net.dec_b2)?;
        let count = (n * x.cols()) as f64;
        let mut diff = x_hat;
        diff.axpy(-1.0, x)?;
        recon.push(diff.frobenius_sq() / count);
        kl.push(
            (0..n)
                .map(|r| kl_diag_gauss(enc.mu.row(r), enc.log_var.row(r)))
                .sum::<f64>()
                / nf,
        );

        if let Some(g) = grads.as_mut() {
            let gnet = &mut g.nets[m];
            diff.scale(2.0 / count);
            let d_xhat = diff;
            gnet.dec_w2 = dec_hidden.t_matmul(&d_xhat)?;
            gnet.dec_b2 = d_xhat.col_sums();
            let mut d_pre = d_xhat.matmul_t(&net.dec_w2)?;
            for (d, a) in d_pre.as_mut_slice().iter_mut().zip(dec_hidden.as_slice()) {
                *d *= 1.0 - a * a;
            }
            gnet.dec_w1 = z.t_matmul(&d_pre)?;
            gnet.dec_b1 = d_pre.col_sums();
            let d_z_mat = d_pre.matmul_t(&net.dec_w1)?;

            let mut dmu = d_z_mat.clone();
            let mut dlv = Matrix::zeros(n, d_z);
            for idx in 0..n * d_z {
                let (mu, lv) = (enc.mu.as_slice()[idx], enc.log_var.as_slice()[idx]);
                let dz = d_z_mat.as_slice()[idx];
                let s = sd.as_slice()[idx];
                dmu.as_mut_slice()[idx] += model.beta * mu / nf;
                dlv.as_mut_slice()[idx] =
                    dz * eps[m].as_slice()[idx] * 0.5 * s + model.beta * 0.5 * (lv.exp() - 1.0) / nf;
            }
            d_mu.push(dmu);
            d_lv.push(dlv);
        }
    }

    let pairs = n_mod * (n_mod.saturating_sub(1)) / 2;
    let mut cross = 0.0;
    if pairs > 0 {
        let scale = 1.0 / (nf * pairs as f64 * d_z as f64);
        for a in 0..n_mod {
            for b in a + 1..n_mod {
                for idx in 0..n * d_z {
                    let diff = encs[a].mu.as_slice()[idx] - encs[b].mu.as_slice()[idx];
                    cross += diff * diff;
                    if grads.is_some() {
                        let g = model.lambda_cross * 2.0 * diff * scale;
                        d_mu[a].as_mut_slice()[idx] += g;
                        d_mu[b].as_mut_slice()[idx] -= g;
                    }
                }
            }
        }
        cross *= scale;
    }

    if let Some(g) = grads.as_mut() {
        for m in 0..n_mod {
            let enc = &encs[m];
            let net = &model.nets[m];
            let mut d_out = Matrix::zeros(n, 2 * d_z);
            for r in 0..n {
                for c in 0..d_z {
                    d_out[(r, c)] = d_mu[m][(r, c)];
                    let raw = enc.log_var_raw[(r, c)];
                    if raw > -LOG_VAR_CLAMP && raw < LOG_VAR_CLAMP {
                        d_out[(r, d_z + c)] = d_lv[m][(r, c)];
                    }
                }
            }
            let gnet = &mut g.nets[m];
            gnet.enc_w2 = enc.hidden.t_matmul(&d_out)?;
            gnet.enc_b2 = d_out.col_sums();
            let mut d_pre = d_out.matmul_t(&net.enc_w2)?;
            for (d, a) in d_pre.as_mut_slice().iter_mut().zip(enc.hidden.as_slice()) {
                *d *= 1.0 - a * a;
            }
            gnet.enc_w1 = xs[m].t_matmul(&d_pre)?;
            gnet.enc_b1 = d_pre.col_sums();
        }
    }

    let total = recon.iter().sum::<f64>()
        + model.beta * kl.iter().sum::<f64>()
        + model.lambda_cross * cross;
    Ok((
        MoveLossReport {
            recon,
            kl,
            cross,
            total,
        },
        grads,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoveHyper {
    pub d_z: usize,
    pub hidden: usize,
    pub beta: f64,
    pub lambda_cross: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Smooth genomics/transcriptomics inputs by one attention step first.
    pub gat_smoothing: bool,
}

impl Default for MoveHyper {
    fn default() -> Self {
        MoveHyper {
            d_z: 32,
            hidden: 64,
            beta: 1.0,
            lambda_cross: 0.1,
            lr: 0.05,
            epochs: 200,
            gat_smoothing: true,
        }
    }
}

impl MoveHyper {
    pub fn validate(&self) -> Result<()> {
        if self.d_z == 0 {
            return Err(Error::config("move.d_z", "must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::config("move.hidden", "must be at least 1"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("move.beta", "must be finite and non-negative"));
        }
        if !(self.lambda_cross >= 0.0 && self.lambda_cross.is_finite()) {
            return Err(Error::config("move.lambda_cross", "must be finite and non-negative"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("move.lr", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("move.epochs", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MoveTrained {
    pub model: MoveModel,
    /// `samples × d_z` mean of modality posterior means.
    pub fused: Matrix,
    /// Loss report before each update.
    pub history: Vec<MoveLossReport>,
}

/// Full-batch gradient descent with one fresh reparameterized draw per epoch.
pub fn move_train(xs: &[Matrix], hyper: &MoveHyper, rng: &SeededRng) -> Result<MoveTrained> {
    hyper.validate()?;
    let dims: Vec<usize> = xs.iter().map(Matrix::cols).collect();
    let model = MoveModel::init(&dims, hyper, &mut rng.split("move-init"))?;
    train_model(model, xs, hyper, rng)
}

/// Continues training an existing model; `hyper`'s architecture fields are
/// ignored in favour of the model's.
pub fn train_model(mut model: MoveModel, xs: &[Matrix], hyper: &MoveHyper, rng: &SeededRng) -> Result<MoveTrained> {
    let n = model.check_inputs(xs)?;
    let mut history = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let mut eps_rng = rng.split_indexed("move-eps", epoch as u64);
        let eps = draw_noise(xs.len(), n, model.d_z, &mut eps_rng);
        let (report, grads) = loss_and_grad(&model, xs, &eps, true)?;
        if !report.total.is_finite() {
            return Err(Error::Divergence(format!(
                "VAE loss became non-finite at epoch {epoch}; try a smaller move.lr"
            )));
        }
        history.push(report);
        let grads = grads.expect("gradient requested");
        for (net, g) in model.nets.iter_mut().zip(&grads.nets) {
            for (p, gp) in net.tensors_mut().into_iter().zip(g.tensors()) {
                for (v, d) in p.iter_mut().zip(gp) {
                    *v -= hyper.lr * d;
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::Divergence(format!(
                "VAE parameters became non-finite at epoch {epoch}; try a smaller move.lr"
            )));
        }
    }
    let fused = fused_latent(&model, xs)?;
    Ok(MoveTrained {
        model,
        fused,
        history,
    })
}
