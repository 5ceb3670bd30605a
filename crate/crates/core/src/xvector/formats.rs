//! Binary interchange formats, all little-endian.
//!
//! Weights (`XVW1`): magic, version `u16`, flags `u16` (bit 0 padded
//! convolutions, bit 1 sample variance), eps `f64`, layer count `u32`, one
//! 13-byte header per layer (kind `u8`, input `u32`, output `u32`, kernel
//! `u16`, dilation `u16`), then for each layer its weights and biases as
//! `f64`. TDNN weights are row-major `output × (kernel·input)` with the tap
//! index varying slower than the input channel.
//!
//! Features (`XVF1`): magic, frames `u32`, dim `u32`, frame-major `f64` values.
//!
//! Embedding (`XVE1`): magic, dim `u32`, `f64` values.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use super::graph::{Architecture, LayerKind, LayerParams, LayerSpec, NetworkGraph};
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"XVW1";
pub const FEATURES_MAGIC: &[u8; 4] = b"XVF1";
pub const EMBEDDING_MAGIC: &[u8; 4] = b"XVE1";
pub const WEIGHTS_VERSION: u16 = 1;
pub const FLAG_PADDED: u16 = 1;
pub const FLAG_SAMPLE_VARIANCE: u16 = 2;

/// `frames × dim` real features, frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub frames: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(frames: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * dim {
            return Err(Error::Shape(format!(
                "{} values for a {frames}×{dim} feature matrix",
                data.len()
            )));
        }
        Ok(FeatureMatrix { frames, dim, data })
    }

    /// Standard-normal features.
    pub fn random(frames: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = (0..frames * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        FeatureMatrix { frames, dim, data }
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Schema(format!("{} file is truncated", self.what)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        if self.take(4)? != m {
            return Err(Error::Schema(format!("not a {} file (bad magic)", self.what)));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::Schema(format!("{} file declares an absurd size", self.what))
        })?)?;
        let v: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Schema(format!("{} file contains non-finite values", self.what)));
        }
        Ok(v)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Schema(format!(
                "{} file has {} trailing bytes",
                self.what,
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn weights_to_bytes(g: &NetworkGraph) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + g.arch.param_count() * 8);
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    let mut flags = 0u16;
    if g.arch.padded {
        flags |= FLAG_PADDED;
    }
    if g.arch.sample_variance {
        flags |= FLAG_SAMPLE_VARIANCE;
    }
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&g.arch.eps.to_le_bytes());
    out.extend_from_slice(&(g.arch.layers.len() as u32).to_le_bytes());
    for l in &g.arch.layers {
        out.push(l.kind.code());
        out.extend_from_slice(&(l.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&(l.output_dim as u32).to_le_bytes());
        out.extend_from_slice(&(l.kernel as u16).to_le_bytes());
        out.extend_from_slice(&(l.dilation as u16).to_le_bytes());
    }
    for p in &g.params {
        put_f64s(&mut out, &p.weights);
        put_f64s(&mut out, &p.bias);
    }
    out
}

pub fn weights_from_bytes(buf: &[u8]) -> Result<NetworkGraph> {
    let mut r = Reader::new(buf, "XVW1 weights");
    r.magic(WEIGHTS_MAGIC)?;
    let version = r.u16()?;
    if version != WEIGHTS_VERSION {
        return Err(Error::Schema(format!("unsupported weights version {version}")));
    }
    let flags = r.u16()?;
    if flags & !(FLAG_PADDED | FLAG_SAMPLE_VARIANCE) != 0 {
        return Err(Error::Schema(format!("unknown weight-file flags {flags:#06x}")));
    }
    let eps = r.f64()?;
    let n = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        layers.push(LayerSpec {
            kind: LayerKind::from_code(r.u8()?)?,
            input_dim: r.u32()? as usize,
            output_dim: r.u32()? as usize,
            kernel: r.u16()? as usize,
            dilation: r.u16()? as usize,
        });
    }
    let arch = Architecture {
        layers,
        padded: flags & FLAG_PADDED != 0,
        sample_variance: flags & FLAG_SAMPLE_VARIANCE != 0,
        eps,
    };
    arch.validate()?;
    let mut params = Vec::with_capacity(n);
    for l in &arch.layers {
        params.push(LayerParams {
            weights: r.f64s(l.weight_count())?,
            bias: r.f64s(l.bias_count())?,
        });
    }
    r.finish()?;
    NetworkGraph::new(arch, params)
}

pub fn features_to_bytes(f: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + f.data.len() * 8);
    out.extend_from_slice(FEATURES_MAGIC);
    out.extend_from_slice(&(f.frames as u32).to_le_bytes());
    out.extend_from_slice(&(f.dim as u32).to_le_bytes());
    put_f64s(&mut out, &f.data);
    out
}

pub fn features_from_bytes(buf: &[u8]) -> Result<FeatureMatrix> {
    let mut r = Reader::new(buf, "XVF1 features");
    r.magic(FEATURES_MAGIC)?;
    let frames = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let data = r.f64s(frames * dim)?;
    r.finish()?;
    FeatureMatrix::new(frames, dim, data)
}

pub fn embedding_to_bytes(e: &Embedding) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + e.values.len() * 8);
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(e.values.len() as u32).to_le_bytes());
    put_f64s(&mut out, &e.values);
    out
}

pub fn embedding_from_bytes(buf: &[u8]) -> Result<Embedding> {
    let mut r = Reader::new(buf, "XVE1 embedding");
    r.magic(EMBEDDING_MAGIC)?;
    let dim = r.u32()? as usize;
    let values = r.f64s(dim)?;
    r.finish()?;
    Ok(Embedding { values })
}

pub fn load_weights(path: &Path) -> Result<NetworkGraph> {
    weights_from_bytes(&fs::read(path)?)
}

pub fn save_weights(path: &Path, g: &NetworkGraph) -> Result<()> {
    Ok(fs::write(path, weights_to_bytes(g))?)
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    features_from_bytes(&fs::read(path)?)
}

pub fn save_features(path: &Path, f: &FeatureMatrix) -> Result<()> {
    Ok(fs::write(path, features_to_bytes(f))?)
}

pub fn load_embedding(path: &Path) -> Result<Embedding> {
    embedding_from_bytes(&fs::read(path)?)
}

pub fn save_embedding(path: &Path, e: &Embedding) -> Result<()> {
    Ok(fs::write(path, embedding_to_bytes(e))?)
}
