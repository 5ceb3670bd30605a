use super::formats::{Embedding, FeatureMatrix};
use super::graph::{Architecture, LayerKind, LayerParams, LayerSpec, NetworkGraph};
use crate::error::{Error, Result};
use crate::ring_fixed::{decode_fixed, encode_fixed, FixedPointConfig, RingElement};

/// Source frame for output frame `t`, tap `j`, or `None` for zero padding.
pub fn splice_source(layer: &LayerSpec, padded: bool, t: usize, j: usize, frames: usize) -> Option<usize> {
    let pad = if padded { layer.context() / 2 } else { 0 };
    let src = (t + j * layer.dilation).checked_sub(pad)?;
    (src < frames).then_some(src)
}

pub fn output_frames(layer: &LayerSpec, padded: bool, frames: usize) -> usize {
    if padded {
        frames
    } else {
        frames - layer.context()
    }
}

/// One TDNN layer in floating point, ReLU included. Input is `frames × in`.
pub fn tdnn_forward_f64(
    input: &[f64],
    frames: usize,
    layer: &LayerSpec,
    params: &LayerParams,
    padded: bool,
    relu: bool,
) -> Vec<f64> {
    let (cin, cout, k) = (layer.input_dim, layer.output_dim, layer.kernel);
    let t_out = output_frames(layer, padded, frames);
    let mut out = vec![0.0; t_out * cout];
    let mut spliced = vec![0.0; k * cin];
    for t in 0..t_out {
        for j in 0..k {
            let dst = &mut spliced[j * cin..(j + 1) * cin];
            match splice_source(layer, padded, t, j, frames) {
                Some(s) => dst.copy_from_slice(&input[s * cin..(s + 1) * cin]),
                None => dst.fill(0.0),
            }
        }
        for o in 0..cout {
            let w = &params.weights[o * k * cin..(o + 1) * k * cin];
            let v = params.bias[o] + w.iter().zip(&spliced).map(|(a, b)| a * b).sum::<f64>();
            out[t * cout + o] = if relu { v.max(0.0) } else { v };
        }
    }
    out
}

/// Per-channel mean then standard deviation over frames.
pub fn stats_pool_f64(input: &[f64], frames: usize, dim: usize, sample_variance: bool, eps: f64) -> Vec<f64> {
    let n = frames as f64;
    let mut mean = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for t in 0..frames {
        for c in 0..dim {
            let v = input[t * dim + c];
            mean[c] += v;
            sq[c] += v * v;
        }
    }
    let mut out = Vec::with_capacity(2 * dim);
    for m in &mut mean {
        *m /= n;
    }
    out.extend_from_slice(&mean);
    for c in 0..dim {
        let mut var = (sq[c] / n - mean[c] * mean[c]).max(0.0);
        if sample_variance {
            var *= n / (n - 1.0);
        }
        out.push((var + eps).sqrt());
    }
    out
}

/// Double-precision forward pass: the oracle for the secure pipeline.
pub fn extract_reference(g: &NetworkGraph, features: &FeatureMatrix) -> Result<Embedding> {
    let arch = &g.arch;
    if features.dim != arch.input_dim() {
        return Err(Error::Shape(format!(
            "graph expects {}-dim features, got {}",
            arch.input_dim(),
            features.dim
        )));
    }
    arch.frames_per_layer(features.frames)?;
    let mut x = features.data.clone();
    let mut frames = features.frames;
    for (l, p) in arch.layers.iter().zip(&g.params) {
        match l.kind {
            LayerKind::Tdnn => {
                x = tdnn_forward_f64(&x, frames, l, p, arch.padded, true);
                frames = output_frames(l, arch.padded, frames);
            }
            LayerKind::StatsPool => {
                x = stats_pool_f64(&x, frames, l.input_dim, arch.sample_variance, arch.eps);
                frames = 1;
            }
            LayerKind::Linear => {
                x = tdnn_forward_f64(&x, 1, l, p, false, false);
            }
        }
    }
    Ok(Embedding { values: x })
}

/// Parameters encoded as ring elements.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedLayer {
    pub weights: Vec<u64>,
    pub bias: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedGraph {
    pub arch: Architecture,
    pub fixed: FixedPointConfig,
    pub layers: Vec<QuantizedLayer>,
}

impl QuantizedGraph {
    /// All parameters in file order: each layer's weights then biases.
    pub fn flat_params(&self) -> Vec<u64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn dequantize(&self) -> NetworkGraph {
        let d = |v: &Vec<u64>| -> Vec<f64> {
            v.iter()
                .map(|x| decode_fixed(RingElement(*x), &self.fixed))
                .collect()
        };
        NetworkGraph {
            arch: self.arch.clone(),
            params: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weights: d(&l.weights),
                    bias: d(&l.bias),
                })
                .collect(),
        }
    }
}

fn encode_all(values: &[f64], cfg: &FixedPointConfig, what: &dyn Fn(usize) -> String) -> Result<Vec<u64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            encode_fixed(*v, cfg).map(|r| r.0).map_err(|_| Error::ParameterRange {
                location: what(i),
                value: *v,
            })
        })
        .collect()
}

/// Encodes every parameter; an out-of-range value is reported with its location.
pub fn quantize_weights(g: &NetworkGraph, cfg: &FixedPointConfig) -> Result<QuantizedGraph> {
    let layers = g
        .params
        .iter()
        .enumerate()
        .map(|(li, p)| {
            Ok(QuantizedLayer {
                weights: encode_all(&p.weights, cfg, &|i| format!("layer {li} weight {i}"))?,
                bias: encode_all(&p.bias, cfg, &|i| format!("layer {li} bias {i}"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedGraph {
        arch: g.arch.clone(),
        fixed: *cfg,
        layers,
    })
}

pub fn quantize_features(f: &FeatureMatrix, cfg: &FixedPointConfig) -> Result<Vec<u64>> {
    let dim = f.dim;
    encode_all(&f.data, cfg, &|i| format!("feature frame {} dim {}", i / dim, i % dim))
}

/// Distance between two embeddings of equal dimension.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Comparison {
    pub dim: usize,
    pub mse: f64,
    /// MSE divided by the mean square of the reference `b`.
    pub relative_mse: f64,
    pub max_abs_diff: f64,
}

pub fn compare_embeddings(a: &Embedding, b: &Embedding) -> Result<Comparison> {
    if a.values.len() != b.values.len() {
        return Err(Error::Usage(format!(
            "cannot compare embeddings of dimension {} and {}",
            a.values.len(),
            b.values.len()
        )));
    }
    let n = a.values.len().max(1) as f64;
    let (mut se, mut power, mut max) = (0.0, 0.0, 0.0f64);
    for (x, y) in a.values.iter().zip(&b.values) {
        se += (x - y) * (x - y);
        power += y * y;
        max = max.max((x - y).abs());
    }
    let mse = se / n;
    let relative_mse = if power > 0.0 {
        se / power
    } else if se == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Comparison {
        dim: a.values.len(),
        mse,
        relative_mse,
        max_abs_diff: max,
    })
}
