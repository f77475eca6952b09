//! First- and second-order proximity losses and the combined objective.

use super::{decode, encode, ForwardCache, JpecModel, Propagators};
use crate::error::{Error, Result};
use crate::graph::LabeledPair;
use crate::linalg::DenseMatrix;

fn pair_loss(y: &DenseMatrix, pairs: &[LabeledPair], expect_w: i8) -> Result<f64> {
    let n = y.rows();
    let k = y.cols();
    let mut acc = 0.0;
    for p in pairs {
        if p.w != expect_w {
            return Err(Error::InvalidConfig(format!(
                "pair ({}, {}) has weight {} where {} was expected",
                p.i, p.j, p.w, expect_w
            )));
        }
        for idx in [p.i, p.j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
        }
        let ri = y.row(p.i);
        let rj = y.row(p.j);
        let mut dist_sq = 0.0;
        for c in 0..k {
            let d = ri[c] - rj[c];
            dist_sq += d * d;
        }
        // the factor 2 accounts for the ordered double sum over (i, j);
        // equals 2·tr(YᵀLY) for the Laplacian built from these pairs
        acc += 2.0 * dist_sq;
    }
    Ok(acc)
}

/// Positive-pair eigenmap loss: Σ 2·w⁺·‖y_i − y_j‖² over unordered pairs.
pub fn loss_pos(y: &DenseMatrix, pos: &[LabeledPair]) -> Result<f64> {
    pair_loss(y, pos, 1)
}

/// Negative-pair eigenmap loss with flipped weights: Σ 2·(−w⁻)·‖y_i − y_j‖².
pub fn loss_neg(y: &DenseMatrix, neg: &[LabeledPair]) -> Result<f64> {
    pair_loss(y, neg, -1)
}

/// Margin ranking combination: L_pos + max(0, margin − L_neg).
pub fn loss_first_order(
    y: &DenseMatrix,
    pos: &[LabeledPair],
    neg: &[LabeledPair],
    margin: f64,
) -> Result<f64> {
    let lp = loss_pos(y, pos)?;
    let ln = loss_neg(y, neg)?;
    Ok(first_order_from_components(lp, ln, margin))
}

pub(crate) fn first_order_from_components(l_pos: f64, l_neg: f64, margin: f64) -> f64 {
    l_pos + (margin - l_neg).max(0.0)
}

/// Reconstruction loss: squared Frobenius norm of X − X̂.
pub fn loss_second_order(x: &DenseMatrix, xhat: &DenseMatrix) -> Result<f64> {
    if x.rows() != xhat.rows() || x.cols() != xhat.cols() {
        return Err(Error::ShapeMismatch {
            op: "loss_second_order",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: xhat.rows(),
            right_cols: xhat.cols(),
        });
    }
    let mut acc = 0.0;
    for (a, b) in x.data().iter().zip(xhat.data()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc)
}

/// Component breakdown of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub l_pos: f64,
    pub l_neg: f64,
    pub l_first: f64,
    pub l_second: f64,
    /// Raw Σ W² over all weight matrices, before the λ factor.
    pub weight_sq: f64,
    /// λ · weight_sq.
    pub regularizer: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub(crate) fn compose(
        l_pos: f64,
        l_neg: f64,
        l_second: f64,
        weight_sq: f64,
        margin: f64,
        beta: f64,
        lambda: f64,
    ) -> Self {
        let l_first = first_order_from_components(l_pos, l_neg, margin);
        let regularizer = lambda * weight_sq;
        LossBreakdown {
            l_pos,
            l_neg,
            l_first,
            l_second,
            weight_sq,
            regularizer,
            total: l_first + beta * l_second + regularizer,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Full forward pass returning the loss breakdown and both layer caches.
pub(crate) fn forward_losses(
    model: &JpecModel,
    props: &Propagators,
    x: &DenseMatrix,
    pos: &[LabeledPair],
    neg: &[LabeledPair],
) -> Result<(LossBreakdown, ForwardCache, ForwardCache)> {
    let (y, enc_cache) = encode(model, &props.encoder, x)?;
    let (xhat, dec_cache) = decode(model, &props.decoder, &y)?;
    let l_pos = loss_pos(&y, pos)?;
    let l_neg = loss_neg(&y, neg)?;
    let l_second = loss_second_order(x, &xhat)?;
    let breakdown = LossBreakdown::compose(
        l_pos,
        l_neg,
        l_second,
        model.weight_sq_sum(),
        model.config.margin,
        model.config.beta,
        model.config.lambda,
    );
    Ok((breakdown, enc_cache, dec_cache))
}

/// Combined objective L_1st + β·L_2nd + λ·ΣW² with its component breakdown.
pub fn total_loss(
    model: &JpecModel,
    props: &Propagators,
    x: &DenseMatrix,
    pos: &[LabeledPair],
    neg: &[LabeledPair],
) -> Result<LossBreakdown> {
    let (breakdown, _, _) = forward_losses(model, props, x, pos, neg)?;
    Ok(breakdown)
}
