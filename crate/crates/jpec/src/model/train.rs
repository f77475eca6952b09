//! Analytic gradients of the combined objective and the full-batch training
//! loop. Training is single-threaded over epochs and deterministic given the
//! graph, the negative pairs, and the config.

use super::loss::{forward_losses, LossBreakdown};
use super::{ForwardCache, JpecConfig, JpecModel, Propagators};
use crate::error::{Error, Result};
use crate::graph::{competitor_pair_sets, CompanyGraph, LabeledPair};
use crate::linalg::{finite_diff_gradient, laplacian_from_pairs, spmm, DenseMatrix, SparseMatrix};
use std::time::{Duration, Instant};

/// Gradient of the total loss with respect to every weight matrix.
#[derive(Debug, Clone)]
pub struct WeightGradients {
    pub encoder: Vec<DenseMatrix>,
    pub decoder: Vec<DenseMatrix>,
}

impl WeightGradients {
    pub fn global_norm(&self) -> f64 {
        let mut acc = 0.0;
        for g in self.encoder.iter().chain(&self.decoder) {
            acc += g.frobenius_sq();
        }
        acc.sqrt()
    }

    fn scale_in_place(&mut self, s: f64) {
        for g in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            for v in g.data_mut() {
                *v *= s;
            }
        }
    }
}

/// Backprop through decoder, eigenmap junction, and encoder.
///
/// The eigenmap contribution enters at the embedding: ∂L_pos/∂Y = 4·L⁺·Y and,
/// when the hinge is active (L_neg < margin, strict), −∂L_neg/∂Y = −4·L⁻·Y.
/// The λ-regularizer contributes 2λW to every weight gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    model: &JpecModel,
    props: &Propagators,
    enc_cache: &ForwardCache,
    dec_cache: &ForwardCache,
    x: &DenseMatrix,
    lap_pos: &SparseMatrix,
    lap_neg: &SparseMatrix,
    l_neg: f64,
) -> Result<WeightGradients> {
    let cfg = &model.config;
    let y = &enc_cache.output;
    let xhat = &dec_cache.output;

    // ∂(β‖X−X̂‖²)/∂X̂ = 2β(X̂−X)
    let mut grad_out = xhat.sub(x)?.scale(2.0 * cfg.beta)?;

    let mut decoder_grads = vec![DenseMatrix::zeros(0, 0); model.decoder_weights.len()];
    for m in (0..model.decoder_weights.len()).rev() {
        let layer = &dec_cache.layers[m];
        let act = cfg.activations[m];
        let mut delta = grad_out;
        for (d, &pre) in delta.data_mut().iter_mut().zip(layer.pre_activation.data()) {
            *d *= act.derivative(pre);
        }
        let mut grad_w = layer.propagated.t_matmul(&delta)?;
        if cfg.lambda != 0.0 {
            for (g, &w) in grad_w
                .data_mut()
                .iter_mut()
                .zip(model.decoder_weights[m].data())
            {
                *g += 2.0 * cfg.lambda * w;
            }
        }
        decoder_grads[m] = grad_w;
        grad_out = spmm(
            &props.decoder_t,
            &delta.matmul_t(&model.decoder_weights[m])?,
        )?;
    }

    // junction at Y: reconstruction path plus eigenmap terms
    let mut grad_y = grad_out;
    let pos_term = spmm(lap_pos, y)?;
    for (g, &v) in grad_y.data_mut().iter_mut().zip(pos_term.data()) {
        *g += 4.0 * v;
    }
    if l_neg < cfg.margin {
        let neg_term = spmm(lap_neg, y)?;
        for (g, &v) in grad_y.data_mut().iter_mut().zip(neg_term.data()) {
            *g -= 4.0 * v;
        }
    }

    let mut encoder_grads = vec![DenseMatrix::zeros(0, 0); model.encoder_weights.len()];
    let mut grad_h = grad_y;
    for l in (0..model.encoder_weights.len()).rev() {
        let layer = &enc_cache.layers[l];
        let act = cfg.activations[l];
        let mut delta = grad_h;
        for (d, &pre) in delta.data_mut().iter_mut().zip(layer.pre_activation.data()) {
            *d *= act.derivative(pre);
        }
        let mut grad_w = layer.propagated.t_matmul(&delta)?;
        if cfg.lambda != 0.0 {
            for (g, &w) in grad_w
                .data_mut()
                .iter_mut()
                .zip(model.encoder_weights[l].data())
            {
                *g += 2.0 * cfg.lambda * w;
            }
        }
        encoder_grads[l] = grad_w;
        grad_h = if l > 0 {
            spmm(
                &props.encoder_t,
                &delta.matmul_t(&model.encoder_weights[l])?,
            )?
        } else {
            DenseMatrix::zeros(0, 0)
        };
    }

    Ok(WeightGradients {
        encoder: encoder_grads,
        decoder: decoder_grads,
    })
}

/// Loss components of one epoch, recorded before that epoch's update.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub wall_clock: Duration,
}

/// Per-epoch loss trajectory plus the loss of the final weights.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub final_loss: Option<LossBreakdown>,
}

impl TrainReport {
    pub fn initial_total(&self) -> Option<f64> {
        self.epochs.first().map(|e| e.loss.total)
    }

    pub fn final_total(&self) -> Option<f64> {
        self.final_loss.map(|l| l.total)
    }
}

fn positive_laplacians(
    n: usize,
    pos: &[LabeledPair],
    neg: &[LabeledPair],
) -> Result<(SparseMatrix, SparseMatrix)> {
    let pos_w: Vec<(usize, usize, f64)> = pos.iter().map(|p| (p.i, p.j, f64::from(p.w))).collect();
    let neg_w: Vec<(usize, usize, f64)> = neg.iter().map(|p| (p.i, p.j, -f64::from(p.w))).collect();
    Ok((
        laplacian_from_pairs(&pos_w, n)?,
        laplacian_from_pairs(&neg_w, n)?,
    ))
}

/// Full-batch gradient descent on the combined objective.
pub fn train(
    g: &CompanyGraph,
    negatives: &[LabeledPair],
    cfg: &JpecConfig,
) -> Result<(JpecModel, TrainReport)> {
    g.validate()?;
    cfg.validate()?;
    if g.attr.cols() != cfg.encoder_dims[0] {
        return Err(Error::InvalidConfig(format!(
            "encoder input width {} does not match attribute dimension {}",
            cfg.encoder_dims[0],
            g.attr.cols()
        )));
    }
    let (pos, neg) = competitor_pair_sets(g, negatives)?;
    let props = Propagators::for_graph(g, cfg.norm_mode)?;
    let (lap_pos, lap_neg) = positive_laplacians(g.n, &pos, &neg)?;
    let mut model = JpecModel::init(cfg.clone())?;

    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        final_loss: None,
    };
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let (loss, enc_cache, dec_cache) = match forward_losses(&model, &props, &g.attr, &pos, &neg)
        {
            Ok(out) => out,
            // overflow inside a kernel is divergence too; report the epoch
            Err(Error::NonFinite { .. }) => return Err(Error::NonFiniteLoss { epoch }),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let mut grads = backward(
            &model, &props, &enc_cache, &dec_cache, &g.attr, &lap_pos, &lap_neg, loss.l_neg,
        )?;
        if cfg.grad_clip > 0.0 {
            let norm = grads.global_norm();
            if norm > cfg.grad_clip {
                grads.scale_in_place(cfg.grad_clip / norm);
            }
        }
        for (w, grad) in model
            .encoder_weights
            .iter_mut()
            .chain(model.decoder_weights.iter_mut())
            .zip(grads.encoder.iter().chain(&grads.decoder))
        {
            for (wv, &gv) in w.data_mut().iter_mut().zip(grad.data()) {
                *wv -= cfg.learning_rate * gv;
            }
        }
        report.epochs.push(EpochRecord {
            epoch,
            loss,
            wall_clock: started.elapsed(),
        });
    }
    if cfg.epochs > 0 {
        let (final_loss, _, _) = match forward_losses(&model, &props, &g.attr, &pos, &neg) {
            Ok(out) => out,
            Err(Error::NonFinite { .. }) => return Err(Error::NonFiniteLoss { epoch: cfg.epochs }),
            Err(e) => return Err(e),
        };
        if !final_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: cfg.epochs });
        }
        report.final_loss = Some(final_loss);
    }
    Ok((model, report))
}

/// Result of comparing analytic gradients against central finite differences.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// (matrix label, entry index) of the worst entry.
    pub worst_entry: (String, usize),
    pub entries_checked: usize,
}

fn rel_error(a: f64, n: f64) -> f64 {
    let denom = a.abs().max(n.abs()).max(1e-8);
    (a - n).abs() / denom
}

/// Compare analytic gradients against [`finite_diff_gradient`] for every
/// weight entry of the model implied by `(g, negatives, cfg)`.
pub fn gradient_check(
    g: &CompanyGraph,
    negatives: &[LabeledPair],
    cfg: &JpecConfig,
    eps: f64,
) -> Result<GradCheck> {
    g.validate()?;
    cfg.validate()?;
    let (pos, neg) = competitor_pair_sets(g, negatives)?;
    let props = Propagators::for_graph(g, cfg.norm_mode)?;
    let (lap_pos, lap_neg) = positive_laplacians(g.n, &pos, &neg)?;
    let model = JpecModel::init(cfg.clone())?;

    let (loss, enc_cache, dec_cache) = forward_losses(&model, &props, &g.attr, &pos, &neg)?;
    let analytic = backward(
        &model, &props, &enc_cache, &dec_cache, &g.attr, &lap_pos, &lap_neg, loss.l_neg,
    )?;

    let mut check = GradCheck {
        max_rel_error: 0.0,
        worst_entry: (String::new(), 0),
        entries_checked: 0,
    };
    let sides: [(&str, &[DenseMatrix], &[DenseMatrix], bool); 2] = [
        ("encoder", &model.encoder_weights, &analytic.encoder, true),
        ("decoder", &model.decoder_weights, &analytic.decoder, false),
    ];
    for (label, weights, grads, is_encoder) in sides {
        for (layer, (w, g_analytic)) in weights.iter().zip(grads).enumerate() {
            let numeric = finite_diff_gradient(
                |probe| {
                    let mut m = model.clone();
                    if is_encoder {
                        m.encoder_weights[layer] = probe.clone();
                    } else {
                        m.decoder_weights[layer] = probe.clone();
                    }
                    let (l, _, _) = forward_losses(&m, &props, &g.attr, &pos, &neg)?;
                    Ok(l.total)
                },
                w,
                eps,
            )?;
            for (idx, (&a, &n)) in g_analytic.data().iter().zip(numeric.data()).enumerate() {
                let e = rel_error(a, n);
                check.entries_checked += 1;
                if e > check.max_rel_error {
                    check.max_rel_error = e;
                    check.worst_entry = (format!("{label}[{layer}]"), idx);
                }
            }
        }
    }
    Ok(check)
}
