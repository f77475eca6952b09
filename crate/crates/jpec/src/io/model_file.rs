//! Versioned model container: config, every weight matrix in row-major
//! little-endian f64, and the training seed. Loading reproduces embeddings
//! bitwise.

use super::embeddings::{check_header, Cursor};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{Activation, JpecConfig, JpecModel, NormMode};
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 8] = b"JPECMDL\0";

pub struct LoadedModel {
    pub model: JpecModel,
    pub warnings: Vec<String>,
}

fn push_matrix(out: &mut Vec<u8>, m: &DenseMatrix) {
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_matrix(cursor: &mut Cursor<'_>, what: &str) -> Result<DenseMatrix> {
    let rows = cursor.u64(what)? as usize;
    let cols = cursor.u64(what)? as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(cursor.f64(what)?);
    }
    DenseMatrix::new(rows, cols, data)
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Identity => 2,
    }
}

fn activation_from_code(code: u8, path: &Path) -> Result<Activation> {
    match code {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Identity),
        other => Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("invalid activation code {other}"),
        }),
    }
}

pub fn save_model(model: &JpecModel, path: &Path) -> Result<()> {
    model.validate()?;
    let cfg = &model.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out.push(match cfg.norm_mode {
        NormMode::Row => 0,
        NormMode::Symmetric => 1,
    });
    for v in [
        cfg.margin,
        cfg.beta,
        cfg.lambda,
        cfg.learning_rate,
        cfg.negative_ratio,
        cfg.grad_clip,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(cfg.epochs as u64).to_le_bytes());
    out.extend_from_slice(&(cfg.encoder_dims.len() as u64).to_le_bytes());
    for &d in &cfg.encoder_dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &a in &cfg.activations {
        out.push(activation_code(a));
    }
    for w in &model.encoder_weights {
        push_matrix(&mut out, w);
    }
    for w in &model.decoder_weights {
        push_matrix(&mut out, w);
    }
    write_atomic(path, &out)
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cursor = Cursor::new(&bytes, path);
    let warnings = check_header(&mut cursor, MAGIC, path)?;
    let seed = cursor.u64("seed")?;
    let norm_mode = match cursor.u8("norm mode")? {
        0 => NormMode::Row,
        1 => NormMode::Symmetric,
        other => {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                detail: format!("invalid norm mode code {other}"),
            })
        }
    };
    let margin = cursor.f64("margin")?;
    let beta = cursor.f64("beta")?;
    let lambda = cursor.f64("lambda")?;
    let learning_rate = cursor.f64("learning rate")?;
    let negative_ratio = cursor.f64("negative ratio")?;
    let grad_clip = cursor.f64("grad clip")?;
    let epochs = cursor.u64("epochs")? as usize;
    let ndims = cursor.u64("dimension count")? as usize;
    if ndims < 2 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("encoder_dims length {ndims} below 2"),
        });
    }
    let mut encoder_dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        encoder_dims.push(cursor.u64("encoder width")? as usize);
    }
    let mut activations = Vec::with_capacity(ndims - 1);
    for _ in 0..ndims - 1 {
        activations.push(activation_from_code(cursor.u8("activation")?, path)?);
    }
    let config = JpecConfig {
        encoder_dims,
        activations,
        margin,
        beta,
        lambda,
        learning_rate,
        epochs,
        seed,
        norm_mode,
        negative_ratio,
        grad_clip,
    };
    let layers = config.encoder_dims.len() - 1;
    let mut encoder_weights = Vec::with_capacity(layers);
    for _ in 0..layers {
        encoder_weights.push(read_matrix(&mut cursor, "encoder weight")?);
    }
    let mut decoder_weights = Vec::with_capacity(layers);
    for _ in 0..layers {
        decoder_weights.push(read_matrix(&mut cursor, "decoder weight")?);
    }
    if !cursor.finished() {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: "trailing bytes after weights".to_string(),
        });
    }
    let model = JpecModel {
        encoder_weights,
        decoder_weights,
        config,
    };
    model.validate()?;
    Ok(LoadedModel { model, warnings })
}
