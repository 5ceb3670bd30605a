use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Tdnn,
    StatsPool,
    Linear,
}

impl LayerKind {
    pub fn code(self) -> u8 {
        match self {
            LayerKind::Tdnn => 0,
            LayerKind::StatsPool => 1,
            LayerKind::Linear => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(LayerKind::Tdnn),
            1 => Ok(LayerKind::StatsPool),
            2 => Ok(LayerKind::Linear),
            _ => Err(Error::Schema(format!("unknown layer kind {c}"))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl LayerSpec {
    pub fn tdnn(input_dim: usize, output_dim: usize, kernel: usize, dilation: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Tdnn,
            input_dim,
            output_dim,
            kernel,
            dilation,
        }
    }

    pub fn stats_pool(input_dim: usize) -> Self {
        LayerSpec {
            kind: LayerKind::StatsPool,
            input_dim,
            output_dim: 2 * input_dim,
            kernel: 1,
            dilation: 1,
        }
    }

    pub fn linear(input_dim: usize, output_dim: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Linear,
            input_dim,
            output_dim,
            kernel: 1,
            dilation: 1,
        }
    }

    /// Frames of temporal context a TDNN layer consumes: d·(k−1).
    pub fn context(&self) -> usize {
        match self.kind {
            LayerKind::Tdnn => self.dilation * (self.kernel - 1),
            _ => 0,
        }
    }

    /// Number of weights (row-major `output × (kernel·input)`); zero for pooling.
    pub fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::StatsPool => 0,
            _ => self.output_dim * self.kernel * self.input_dim,
        }
    }

    pub fn bias_count(&self) -> usize {
        match self.kind {
            LayerKind::StatsPool => 0,
            _ => self.output_dim,
        }
    }
}

/// Layer list plus the conventions that change its semantics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: Vec<LayerSpec>,
    /// Zero-pad each TDNN layer by d·(k−1)/2 frames per side.
    pub padded: bool,
    /// Divide by T−1 instead of T in the pooled variance.
    pub sample_variance: bool,
    /// Added to the variance before the square root.
    pub eps: f64,
}

pub const DEFAULT_EPS: f64 = 1e-5;
pub const FEATURE_DIM: usize = 24;
pub const EMBEDDING_DIM: usize = 512;

impl Architecture {
    /// The standard x-vector extractor up to the embedding layer.
    pub fn canonical() -> Self {
        Architecture {
            layers: vec![
                LayerSpec::tdnn(24, 512, 5, 1),
                LayerSpec::tdnn(512, 512, 3, 2),
                LayerSpec::tdnn(512, 512, 3, 3),
                LayerSpec::tdnn(512, 512, 1, 1),
                LayerSpec::tdnn(512, 1500, 1, 1),
                LayerSpec::stats_pool(1500),
                LayerSpec::linear(3000, 512),
            ],
            padded: false,
            sample_variance: false,
            eps: DEFAULT_EPS,
        }
    }

    /// Same topology as [`Self::canonical`] with every hidden width set to `width`.
    pub fn scaled(feat: usize, width: usize, pooled: usize, embed: usize) -> Self {
        Architecture {
            layers: vec![
                LayerSpec::tdnn(feat, width, 5, 1),
                LayerSpec::tdnn(width, width, 3, 2),
                LayerSpec::tdnn(width, width, 3, 3),
                LayerSpec::tdnn(width, width, 1, 1),
                LayerSpec::tdnn(width, pooled, 1, 1),
                LayerSpec::stats_pool(pooled),
                LayerSpec::linear(2 * pooled, embed),
            ],
            padded: false,
            sample_variance: false,
            eps: DEFAULT_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pool_at = self
            .layers
            .iter()
            .position(|l| l.kind == LayerKind::StatsPool)
            .ok_or_else(|| Error::Schema("graph has no statistics pooling layer".into()))?;
        if self.layers.is_empty() {
            return Err(Error::Schema("empty graph".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.input_dim == 0 || l.output_dim == 0 || l.kernel == 0 || l.dilation == 0 {
                return Err(Error::Schema(format!("layer {i} has a zero dimension")));
            }
            match l.kind {
                LayerKind::Tdnn if i > pool_at => {
                    return Err(Error::Schema(format!("layer {i}: TDNN after pooling")))
                }
                LayerKind::Linear if i < pool_at => {
                    return Err(Error::Schema(format!("layer {i}: linear layer before pooling")))
                }
                LayerKind::StatsPool if i != pool_at => {
                    return Err(Error::Schema(format!("layer {i}: second pooling layer")))
                }
                LayerKind::StatsPool if l.output_dim != 2 * l.input_dim => {
                    return Err(Error::Schema(format!(
                        "layer {i}: pooling must output twice its input"
                    )))
                }
                LayerKind::Linear | LayerKind::StatsPool if l.kernel != 1 || l.dilation != 1 => {
                    return Err(Error::Schema(format!("layer {i}: kernel must be 1")))
                }
                _ => {}
            }
            if self.padded && l.kind == LayerKind::Tdnn && l.context() % 2 != 0 {
                return Err(Error::Schema(format!(
                    "layer {i}: padded mode needs an even context"
                )));
            }
            if i > 0 && self.layers[i - 1].output_dim != l.input_dim {
                return Err(Error::Schema(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    l.input_dim,
                    i - 1,
                    self.layers[i - 1].output_dim
                )));
            }
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(Error::Schema(format!("invalid eps {}", self.eps)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_dim)
    }

    /// Frames entering each layer, then the frame count at pooling.
    pub fn frames_per_layer(&self, frames: usize) -> Result<Vec<usize>> {
        let mut t = frames;
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push(t);
            match l.kind {
                LayerKind::Tdnn if !self.padded => {
                    if t < l.context() + 1 {
                        return Err(Error::Shape(format!(
                            "layer {i} needs at least {} frames, got {t}",
                            l.context() + 1
                        )));
                    }
                    t -= l.context();
                }
                LayerKind::StatsPool => {
                    if t < 2 {
                        return Err(Error::Shape(format!(
                            "statistics pooling needs at least 2 frames, got {t}"
                        )));
                    }
                    t = 1;
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Smallest input length the graph accepts.
    pub fn min_frames(&self) -> usize {
        let consumed: usize = if self.padded {
            0
        } else {
            self.layers.iter().map(|l| l.context()).sum()
        };
        consumed + 2
    }

    /// Hex SHA-256 of the JSON form; names the graph in run manifests.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("architecture serializes");
        Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight_count() + l.bias_count())
            .sum()
    }
}

/// Real-valued parameters of one layer.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// An architecture with real-valued weights.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGraph {
    pub arch: Architecture,
    pub params: Vec<LayerParams>,
}

impl NetworkGraph {
    pub fn new(arch: Architecture, params: Vec<LayerParams>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.layers.len() {
            return Err(Error::Schema(format!(
                "{} parameter sets for {} layers",
                params.len(),
                arch.layers.len()
            )));
        }
        for (i, (l, p)) in arch.layers.iter().zip(&params).enumerate() {
            if p.weights.len() != l.weight_count() || p.bias.len() != l.bias_count() {
                return Err(Error::Schema(format!(
                    "layer {i}: expected {} weights and {} biases, got {} and {}",
                    l.weight_count(),
                    l.bias_count(),
                    p.weights.len(),
                    p.bias.len()
                )));
            }
        }
        Ok(NetworkGraph { arch, params })
    }

    /// He-uniform weights, small uniform biases.
    pub fn random(arch: Architecture, seed: u64) -> Result<Self> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let params = arch
            .layers
            .iter()
            .map(|l| {
                let fan_in = (l.kernel * l.input_dim) as f64;
                let bound = (6.0 / fan_in).sqrt();
                LayerParams {
                    weights: (0..l.weight_count())
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect(),
                    bias: (0..l.bias_count()).map(|_| rng.gen_range(-0.1..0.1)).collect(),
                }
            })
            .collect();
        NetworkGraph::new(arch, params)
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let params = arch
            .layers
            .iter()
            .map(|l| LayerParams {
                weights: vec![0.0; l.weight_count()],
                bias: vec![0.0; l.bias_count()],
            })
            .collect();
        NetworkGraph::new(arch, params)
    }
}
