//! The JPEC network: a directed-GCN encoder over the supply-chain graph, a
//! Laplacian-sharpening decoder that reconstructs node attributes, and the
//! pairwise eigenmap losses over competitor / non-competitor pairs.
//!
//! The encoder propagates with the row-normalized operator `D̃⁻¹Ã` (suitable
//! for directed graphs); the symmetric `D̃^{-1/2}ÃD̃^{-1/2}` variant exists to
//! reproduce the GCN-vs-DGCN ablation and symmetrizes the adjacency first.
//! The decoder reverses the smoothing with `2I − P`, so constant vectors are
//! fixed points of both directions.

mod loss;
mod train;

pub use loss::{
    loss_first_order, loss_neg, loss_pos, loss_second_order, total_loss, LossBreakdown,
};
pub use train::{gradient_check, train, EpochRecord, GradCheck, TrainReport, WeightGradients};

use crate::error::{Error, Result};
use crate::graph::CompanyGraph;
use crate::linalg::{
    add_self_loops, row_normalize, spmm, sym_normalize, DenseMatrix, SparseMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Propagation normalization: `row` is the directed (random-walk) operator,
/// `symmetric` the classic GCN operator on the symmetrized graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Row,
    Symmetric,
}

impl NormMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormMode::Row => "row",
            NormMode::Symmetric => "symmetric",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "row" => Ok(NormMode::Row),
            "symmetric" => Ok(NormMode::Symmetric),
            other => Err(Error::InvalidConfig(format!(
                "unknown norm mode '{other}' (expected 'row' or 'symmetric')"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation value.
    pub fn derivative(&self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation '{other}' (expected relu, tanh, or identity)"
            ))),
        }
    }
}

/// All model hyperparameters. The decoder mirrors the encoder: its widths are
/// the exact reverse of `encoder_dims` and it reuses the activation schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct JpecConfig {
    /// Layer widths from attribute dimension to embedding width.
    pub encoder_dims: Vec<usize>,
    /// One activation per encoder layer; the final layer must be identity so
    /// the embedding geometry and decoder output range are unconstrained.
    pub activations: Vec<Activation>,
    /// Hinge margin on the aggregate negative-pair loss.
    pub margin: f64,
    /// Weight of the reconstruction loss.
    pub beta: f64,
    /// Weight of the squared-entry regularizer over all weight matrices.
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub norm_mode: NormMode,
    /// Negative pairs sampled per positive pair.
    pub negative_ratio: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
}

impl JpecConfig {
    /// Defaults for a given attribute dimension.
    pub fn default_for_input(input_dim: usize) -> Self {
        JpecConfig {
            encoder_dims: vec![input_dim, 256, 64],
            activations: vec![Activation::Relu, Activation::Identity],
            margin: 10.0,
            beta: 1.0,
            lambda: 1e-4,
            learning_rate: 0.01,
            epochs: 200,
            seed: 42,
            norm_mode: NormMode::Row,
            negative_ratio: 1.0,
            grad_clip: 5.0,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        *self.encoder_dims.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_dims.len() < 2 {
            return Err(Error::InvalidConfig(
                "encoder_dims needs at least an input and an output width".to_string(),
            ));
        }
        if self.encoder_dims.contains(&0) {
            return Err(Error::InvalidConfig(
                "all encoder widths must be at least 1".to_string(),
            ));
        }
        if self.activations.len() != self.encoder_dims.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.encoder_dims.len() - 1
            )));
        }
        if *self.activations.last().unwrap() != Activation::Identity {
            return Err(Error::InvalidConfig(
                "final encoder activation must be identity".to_string(),
            ));
        }
        if self.margin.is_nan() || self.margin < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "margin must be >= 0, got {}",
                self.margin
            )));
        }
        if self.beta.is_nan() || self.beta < 0.0 || self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(
                "beta and lambda must be >= 0".to_string(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !self.negative_ratio.is_finite() || self.negative_ratio <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "negative_ratio must be > 0, got {}",
                self.negative_ratio
            )));
        }
        if self.grad_clip.is_nan() || self.grad_clip < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "grad_clip must be >= 0, got {}",
                self.grad_clip
            )));
        }
        Ok(())
    }
}

/// Model parameters: encoder weights `W⁽ˡ⁾` and mirrored decoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct JpecModel {
    pub encoder_weights: Vec<DenseMatrix>,
    pub decoder_weights: Vec<DenseMatrix>,
    pub config: JpecConfig,
}

impl JpecModel {
    /// Seeded scaled-uniform initialization: entries drawn uniformly from
    /// ±sqrt(6 / (fan_in + fan_out)), encoder layers first, then decoder.
    pub fn init(config: JpecConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dims = &config.encoder_dims;
        let mut encoder_weights = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            encoder_weights.push(init_weight(dims[l], dims[l + 1], &mut rng)?);
        }
        let rev: Vec<usize> = dims.iter().rev().copied().collect();
        let mut decoder_weights = Vec::with_capacity(rev.len() - 1);
        for m in 0..rev.len() - 1 {
            decoder_weights.push(init_weight(rev[m], rev[m + 1], &mut rng)?);
        }
        Ok(JpecModel {
            encoder_weights,
            decoder_weights,
            config,
        })
    }

    /// Shapes must chain with the configured widths; all entries finite.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let dims = &self.config.encoder_dims;
        if self.encoder_weights.len() != dims.len() - 1
            || self.decoder_weights.len() != dims.len() - 1
        {
            return Err(Error::InvalidConfig(
                "weight count does not match encoder_dims".to_string(),
            ));
        }
        for (l, w) in self.encoder_weights.iter().enumerate() {
            if w.rows() != dims[l] || w.cols() != dims[l + 1] {
                return Err(Error::InvalidConfig(format!(
                    "encoder weight {l} is {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    dims[l],
                    dims[l + 1]
                )));
            }
            w.check_finite("encoder weight")?;
        }
        let rev: Vec<usize> = dims.iter().rev().copied().collect();
        for (m, w) in self.decoder_weights.iter().enumerate() {
            if w.rows() != rev[m] || w.cols() != rev[m + 1] {
                return Err(Error::InvalidConfig(format!(
                    "decoder weight {m} is {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    rev[m],
                    rev[m + 1]
                )));
            }
            w.check_finite("decoder weight")?;
        }
        Ok(())
    }

    /// Sum of squared entries over every trainable weight matrix.
    pub fn weight_sq_sum(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.encoder_weights.iter().chain(&self.decoder_weights) {
            acc += w.frobenius_sq();
        }
        acc
    }
}

fn init_weight(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Result<DenseMatrix> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * bound)
        .collect();
    DenseMatrix::new(fan_in, fan_out, data)
}

/// Encoder propagation operator. `row` mode: `D̃⁻¹Ã` on the directed graph.
/// `symmetric` mode: `D̃^{-1/2}ÃD̃^{-1/2}` on the symmetrized (A ∨ Aᵀ) graph.
pub fn build_encoder_operator(adj: &SparseMatrix, mode: NormMode) -> Result<SparseMatrix> {
    match mode {
        NormMode::Row => row_normalize(&add_self_loops(adj)?),
        NormMode::Symmetric => sym_normalize(&add_self_loops(&symmetrize_binary(adj)?)?),
    }
}

/// Decoder sharpening operator `2I − P` where `P` is the encoder operator.
pub fn build_decoder_operator(adj: &SparseMatrix, mode: NormMode) -> Result<SparseMatrix> {
    let p = build_encoder_operator(adj, mode)?;
    sharpen(&p)
}

/// `2I − P`; every row of `P` contains its diagonal (self-loops guarantee it).
fn sharpen(p: &SparseMatrix) -> Result<SparseMatrix> {
    let n = p.rows();
    let mut triplets = Vec::with_capacity(p.nnz() + n);
    for i in 0..n {
        let (cols, vals) = p.row_entries(i);
        let mut has_diag = false;
        for (&c, &v) in cols.iter().zip(vals) {
            if c == i {
                triplets.push((i, c, 2.0 - v));
                has_diag = true;
            } else {
                triplets.push((i, c, -v));
            }
        }
        if !has_diag {
            triplets.push((i, i, 2.0));
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

/// A ∨ Aᵀ with unit weights.
fn symmetrize_binary(adj: &SparseMatrix) -> Result<SparseMatrix> {
    if adj.rows() != adj.cols() {
        return Err(Error::NotSquare {
            rows: adj.rows(),
            cols: adj.cols(),
        });
    }
    let t = adj.transpose();
    let mut triplets = Vec::with_capacity(2 * adj.nnz());
    for src in [adj, &t] {
        for i in 0..src.rows() {
            let (cols, _) = src.row_entries(i);
            for &c in cols {
                triplets.push((i, c, 1.0));
            }
        }
    }
    let union = SparseMatrix::from_triplets(adj.rows(), adj.cols(), &triplets)?;
    // duplicate entries summed to 2.0; rebinarize
    let rebuilt: Vec<(usize, usize, f64)> = (0..union.rows())
        .flat_map(|i| {
            let (cols, _) = union.row_entries(i);
            cols.iter().map(move |&c| (i, c, 1.0)).collect::<Vec<_>>()
        })
        .collect();
    SparseMatrix::from_triplets(adj.rows(), adj.cols(), &rebuilt)
}

/// Precomputed propagation operators and their transposes for backprop.
#[derive(Debug, Clone)]
pub struct Propagators {
    pub encoder: SparseMatrix,
    pub decoder: SparseMatrix,
    pub encoder_t: SparseMatrix,
    pub decoder_t: SparseMatrix,
}

impl Propagators {
    pub fn build(adj: &SparseMatrix, mode: NormMode) -> Result<Self> {
        let encoder = build_encoder_operator(adj, mode)?;
        let decoder = sharpen(&encoder)?;
        let encoder_t = encoder.transpose();
        let decoder_t = decoder.transpose();
        Ok(Propagators {
            encoder,
            decoder,
            encoder_t,
            decoder_t,
        })
    }

    pub fn for_graph(g: &CompanyGraph, mode: NormMode) -> Result<Self> {
        Propagators::build(&g.supply_adjacency()?, mode)
    }
}

/// Per-layer tensors kept for backprop: the propagated input `P·H` and the
/// pre-activation `P·H·W`.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub propagated: DenseMatrix,
    pub pre_activation: DenseMatrix,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layers: Vec<LayerCache>,
    pub output: DenseMatrix,
}

fn forward_chain(
    operator: &SparseMatrix,
    weights: &[DenseMatrix],
    activations: &[Activation],
    input: &DenseMatrix,
) -> Result<ForwardCache> {
    let mut layers = Vec::with_capacity(weights.len());
    let mut current = input.clone();
    for (w, act) in weights.iter().zip(activations) {
        let propagated = spmm(operator, &current)?;
        let pre_activation = propagated.matmul(w)?;
        let mut out = pre_activation.clone();
        for v in out.data_mut() {
            *v = act.apply(*v);
        }
        out.check_finite("activation output")?;
        layers.push(LayerCache {
            propagated,
            pre_activation,
        });
        current = out;
    }
    Ok(ForwardCache {
        layers,
        output: current,
    })
}

/// Encoder forward pass `Y⁽ˡ⁺¹⁾ = σ(P·Y⁽ˡ⁾·W⁽ˡ⁾)` starting from the
/// attribute matrix. Returns the embedding and the backprop cache.
pub fn encode(
    model: &JpecModel,
    p_enc: &SparseMatrix,
    x: &DenseMatrix,
) -> Result<(DenseMatrix, ForwardCache)> {
    if x.cols() != model.config.encoder_dims[0] {
        return Err(Error::ShapeMismatch {
            op: "encode",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: model.config.encoder_dims[0],
            right_cols: model.config.embedding_dim(),
        });
    }
    let cache = forward_chain(p_enc, &model.encoder_weights, &model.config.activations, x)?;
    Ok((cache.output.clone(), cache))
}

/// Decoder forward pass mirroring the encoder with the sharpening operator.
pub fn decode(
    model: &JpecModel,
    p_dec: &SparseMatrix,
    y: &DenseMatrix,
) -> Result<(DenseMatrix, ForwardCache)> {
    if y.cols() != model.config.embedding_dim() {
        return Err(Error::ShapeMismatch {
            op: "decode",
            left_rows: y.rows(),
            left_cols: y.cols(),
            right_rows: y.rows(),
            right_cols: model.config.embedding_dim(),
        });
    }
    let cache = forward_chain(p_dec, &model.decoder_weights, &model.config.activations, y)?;
    Ok((cache.output.clone(), cache))
}

/// Embeddings for every node of the graph: encoder forward pass only.
/// Isolated nodes are covered by the self-loop in the propagation operator.
pub fn embed(model: &JpecModel, g: &CompanyGraph) -> Result<DenseMatrix> {
    model.validate()?;
    let props = Propagators::for_graph(g, model.config.norm_mode)?;
    let (y, _) = encode(model, &props.encoder, &g.attr)?;
    Ok(y)
}
