use clap::Args;
use xvmpc_core::engine::{EngineConfig, Scheme, TruncMode};
use xvmpc_core::xvector::{Architecture, DEFAULT_EPS, FEATURE_DIM};
use xvmpc_core::{FixedPointConfig, Result};

/// Parameters every party must agree on.
#[derive(Args, Clone, Debug)]
pub struct EngineArgs {
    /// Sharing scheme: rss3 or additive2
    #[arg(long, default_value = "rss3")]
    pub scheme: Scheme,
    /// Truncation mode: det or prob
    #[arg(long, default_value = "prob")]
    pub mode: TruncMode,
    #[arg(long, default_value_t = 15)]
    pub frac_bits: u32,
    #[arg(long, default_value_t = 16)]
    pub int_bits: u32,
    #[arg(long, default_value_t = 40)]
    pub stat_sec: u32,
    /// Bit bound on comparison inputs (default int_bits + frac_bits + 1)
    #[arg(long)]
    pub cmp_bits: Option<u32>,
    /// Cross-check replicated openings
    #[arg(long)]
    pub verify_openings: bool,
}

impl EngineArgs {
    pub fn config(&self) -> Result<EngineConfig> {
        let fixed = FixedPointConfig::new(self.frac_bits, self.int_bits, self.stat_sec)?;
        let mut cfg = EngineConfig::new(self.scheme, fixed, self.mode);
        if let Some(b) = self.cmp_bits {
            cfg = cfg.with_cmp_bits(b)?;
        }
        cfg.verify_openings = self.verify_openings;
        Ok(cfg)
    }
}

/// Network shape. The defaults give the standard extractor.
#[derive(Args, Clone, Debug)]
pub struct ArchArgs {
    #[arg(long, default_value_t = FEATURE_DIM)]
    pub feat_dim: usize,
    /// Width of the frame-level layers
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    /// Width of the layer feeding statistics pooling
    #[arg(long, default_value_t = 1500)]
    pub pooled: usize,
    /// Embedding dimension
    #[arg(long, default_value_t = 512)]
    pub embed: usize,
    /// Zero-pad frame-level layers so the frame count is kept
    #[arg(long)]
    pub padded: bool,
    /// Use the T−1 variance denominator
    #[arg(long)]
    pub sample_variance: bool,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
}

impl ArchArgs {
    pub fn architecture(&self) -> Result<Architecture> {
        let mut arch = Architecture::scaled(self.feat_dim, self.width, self.pooled, self.embed);
        arch.padded = self.padded;
        arch.sample_variance = self.sample_variance;
        arch.eps = self.eps;
        arch.validate()?;
        Ok(arch)
    }
}
