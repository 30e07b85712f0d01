//! Weight snapshot file format.
//!
//! Little-endian layout: magic `CRLW`, version `u16`, layer count `u16`,
//! then per layer `rows u32, cols u32`, the row-major 32-bit weights and the
//! bias vector. The wire packet in `edgelink` wraps the same per-layer
//! encoding with a sequence number and CRC.

use std::io::{Read, Write};

use thiserror::Error;

use super::{Layer, Network};

pub const WEIGHT_MAGIC: &[u8; 4] = b"CRLW";
pub const WEIGHT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum WeightIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic, not a weight snapshot")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("layer {layer} shape {rows}x{cols} is implausible")]
    BadShape { layer: usize, rows: u32, cols: u32 },
}

/// Shape-and-data view of network parameters, independent of activations.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub version: u16,
    pub layers: Vec<WeightLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightLayer {
    pub rows: u32,
    pub cols: u32,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl WeightSnapshot {
    pub fn from_network(net: &Network) -> Self {
        Self {
            version: WEIGHT_VERSION,
            layers: net
                .layers
                .iter()
                .map(|l| WeightLayer {
                    rows: l.rows as u32,
                    cols: l.cols as u32,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }

    /// Copies the snapshot into an existing network; shapes must match.
    pub fn apply_to(&self, net: &mut Network) -> Result<(), WeightIoError> {
        if self.layers.len() != net.layers.len() {
            return Err(WeightIoError::BadShape {
                layer: self.layers.len(),
                rows: 0,
                cols: 0,
            });
        }
        for (i, (src, dst)) in self.layers.iter().zip(net.layers.iter_mut()).enumerate() {
            if src.rows as usize != dst.rows || src.cols as usize != dst.cols {
                return Err(WeightIoError::BadShape {
                    layer: i,
                    rows: src.rows,
                    cols: src.cols,
                });
            }
            dst.weights.copy_from_slice(&src.weights);
            dst.bias.copy_from_slice(&src.bias);
        }
        Ok(())
    }

    pub fn to_layers(&self) -> Vec<Layer> {
        self.layers
            .iter()
            .map(|l| Layer {
                rows: l.rows as usize,
                cols: l.cols as usize,
                weights: l.weights.clone(),
                bias: l.bias.clone(),
            })
            .collect()
    }
}

pub fn write_snapshot<W: Write>(out: &mut W, snap: &WeightSnapshot) -> Result<(), WeightIoError> {
    out.write_all(WEIGHT_MAGIC)?;
    out.write_all(&snap.version.to_le_bytes())?;
    out.write_all(&(snap.layers.len() as u16).to_le_bytes())?;
    for l in &snap.layers {
        write_layer(out, l)?;
    }
    Ok(())
}

pub(crate) fn write_layer<W: Write>(out: &mut W, l: &WeightLayer) -> Result<(), WeightIoError> {
    out.write_all(&l.rows.to_le_bytes())?;
    out.write_all(&l.cols.to_le_bytes())?;
    for v in &l.weights {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in &l.bias {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(input: &mut R) -> Result<WeightSnapshot, WeightIoError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != WEIGHT_MAGIC {
        return Err(WeightIoError::BadMagic);
    }
    let version = read_u16(input)?;
    if version != WEIGHT_VERSION {
        return Err(WeightIoError::UnsupportedVersion(version));
    }
    let n_layers = read_u16(input)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        layers.push(read_layer(input, i)?);
    }
    Ok(WeightSnapshot { version, layers })
}

pub(crate) fn read_layer<R: Read>(input: &mut R, idx: usize) -> Result<WeightLayer, WeightIoError> {
    let rows = read_u32(input)?;
    let cols = read_u32(input)?;
    if rows == 0 || cols == 0 || (rows as u64) * (cols as u64) > 64_000_000 {
        return Err(WeightIoError::BadShape {
            layer: idx,
            rows,
            cols,
        });
    }
    let mut weights = vec![0.0f32; (rows * cols) as usize];
    read_f32s(input, &mut weights)?;
    let mut bias = vec![0.0f32; rows as usize];
    read_f32s(input, &mut bias)?;
    Ok(WeightLayer {
        rows,
        cols,
        weights,
        bias,
    })
}

fn read_u16<R: Read>(input: &mut R) -> Result<u16, WeightIoError> {
    let mut b = [0u8; 2];
    input.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, WeightIoError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s<R: Read>(input: &mut R, out: &mut [f32]) -> Result<(), WeightIoError> {
    let mut buf = vec![0u8; out.len() * 4];
    input.read_exact(&mut buf)?;
    for (i, v) in out.iter_mut().enumerate() {
        *v = f32::from_le_bytes(buf[i * 4..i * 4 + 4].try_into().unwrap());
    }
    Ok(())
}
