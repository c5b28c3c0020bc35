use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, NnError, Params};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FGRCKPT\n";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config: ModelConfig,
    pub input_width: usize,
    pub descriptor_width: usize,
    pub fg_fingerprint: String,
    pub mfg_fingerprint: String,
    pub seed: u64,
    pub epoch: usize,
    /// Caller-defined metadata, stored verbatim.
    pub pipeline: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, fg: String, mfg: String, seed: u64, epoch: usize) -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                version: CHECKPOINT_VERSION,
                config: model.config.clone(),
                input_width: model.input_width,
                descriptor_width: model.descriptor_width,
                fg_fingerprint: fg,
                mfg_fingerprint: mfg,
                seed,
                epoch,
                pipeline: serde_json::Value::Null,
            },
            model,
        }
    }

    /// Refuses vocabularies other than the ones the model was trained on.
    pub fn verify_vocab(&self, fg: &str, mfg: &str) -> Result<(), NnError> {
        for (which, expected, found) in [
            ("fg", &self.header.fg_fingerprint, fg),
            ("mfg", &self.header.mfg_fingerprint, mfg),
        ] {
            if expected != found {
                return Err(NnError::VocabMismatch {
                    which,
                    expected: expected.clone(),
                    found: found.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Layout: magic, u32 header length, JSON header, u32 block count, then per
/// block u64 rows, u64 cols and row-major f64 values, all little-endian.
/// Block order: w_e, b_e, w_d (untied only), b_d, w_f, b_f.
pub fn write_checkpoint<W: Write>(ck: &Checkpoint, mut w: W) -> Result<(), NnError> {
    let mut header = ck.header.clone();
    header.config = ck.model.config.clone();
    header.input_width = ck.model.input_width;
    header.descriptor_width = ck.model.descriptor_width;
    let json = serde_json::to_vec(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let p = &ck.model.params;
    let mut shapes = vec![p.w_e.dim(), (1, p.b_e.len())];
    if let Some(w_d) = &p.w_d {
        shapes.push(w_d.dim());
    }
    shapes.extend([(1, p.b_d.len()), p.w_f.dim(), (1, p.b_f.len())]);
    w.write_all(&(shapes.len() as u32).to_le_bytes())?;
    for (block, (r, c)) in p.blocks().into_iter().zip(shapes) {
        w.write_all(&(r as u64).to_le_bytes())?;
        w.write_all(&(c as u64).to_le_bytes())?;
        for v in block {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, NnError> {
    let bad = |m: &str| NnError::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let len = read_u32(&mut r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&json).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported version {}", header.version)));
    }
    let count = read_u32(&mut r)? as usize;
    let tied = header.config.tied;
    if count != if tied { 5 } else { 6 } {
        return Err(bad("unexpected block count"));
    }
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        blocks.push(((rows, cols), data));
    }
    let mut it = blocks.into_iter();
    let mut matrix = || {
        let (shape, data) = it.next().expect("count checked");
        Array2::from_shape_vec(shape, data).expect("shape from file")
    };
    let w_e = matrix();
    let b_e = vector(matrix());
    let w_d = (!tied).then(&mut matrix);
    let b_d = vector(matrix());
    let w_f = matrix();
    let b_f = vector(matrix());
    let (l, p, k) = (header.config.latent, header.input_width, header.config.tasks);
    let m = l + if header.config.use_descriptors {
        header.descriptor_width
    } else {
        0
    };
    let shapes_ok = w_e.dim() == (l, p)
        && b_e.len() == l
        && w_d.as_ref().is_none_or(|w| w.dim() == (p, l))
        && b_d.len() == p
        && w_f.dim() == (k, m)
        && b_f.len() == k;
    if !shapes_ok {
        return Err(bad("parameter shapes disagree with the header"));
    }
    let model = Model {
        config: header.config.clone(),
        params: Params {
            w_e,
            b_e,
            w_d,
            b_d,
            w_f,
            b_f,
        },
        input_width: header.input_width,
        descriptor_width: header.descriptor_width,
    };
    Ok(Checkpoint { header, model })
}

fn vector(m: Array2<f64>) -> Array1<f64> {
    Array1::from(m.into_raw_vec_and_offset().0)
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), NnError> {
    let mut buf = Vec::new();
    write_checkpoint(ck, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(&bytes[..])
}
