use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use xvmpc_core::engine::EngineConfig;
use xvmpc_core::preprocessing::{MaterialFileInfo, RandomnessBudget};
use xvmpc_core::xvector::Architecture;
use xvmpc_core::Error;

pub const DEALER_MANIFEST: &str = "dealer.json";

/// Written next to every output so a result can be tied to the exact
/// configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scheme: String,
    pub frac_bits: u32,
    pub int_bits: u32,
    pub stat_sec: u32,
    pub trunc: String,
    pub cmp_bits: u32,
    pub verify_openings: bool,
    pub config_hash: String,
    pub graph_hash: String,
    /// Frames × feature dimension.
    pub input_shape: [usize; 2],
    pub seed: Option<u64>,
    pub transport: String,
    pub party: Option<usize>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &EngineConfig, arch: &Architecture, frames: usize, transport: &str) -> Self {
        RunManifest {
            scheme: cfg.scheme.name().into(),
            frac_bits: cfg.fixed.f,
            int_bits: cfg.fixed.m,
            stat_sec: cfg.fixed.s,
            trunc: cfg.trunc.name().into(),
            cmp_bits: cfg.cmp_bits,
            verify_openings: cfg.verify_openings,
            config_hash: format!("{:#010x}", cfg.config_hash()),
            graph_hash: arch.fingerprint(),
            input_shape: [frames, arch.input_dim()],
            seed: None,
            transport: transport.into(),
            party: None,
            outputs: Vec::new(),
        }
    }
}

/// One party's part of an embedding kept in shared form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SharesFile {
    pub party: usize,
    pub scheme: String,
    pub frac_bits: u32,
    /// One row of share components per embedding coordinate.
    pub components: Vec<Vec<u64>>,
}

/// Public description of one dealer run, stored at the material root.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DealerManifest {
    pub engine: EngineConfig,
    pub config_hash: u32,
    pub arch: Architecture,
    pub graph_hash: String,
    pub frames: usize,
    pub seed: u64,
    pub run_id: u64,
    pub budget: RandomnessBudget,
    pub files: Vec<MaterialFileInfo>,
}

impl DealerManifest {
    /// A missing manifest means the material is missing.
    pub fn load(root: &Path) -> anyhow::Result<Self> {
        let path = root.join(DEALER_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::PreprocessingUnderflow {
            kind: format!("dealer manifest {} ({e})", path.display()),
            requested: 1,
            available: 0,
        })?;
        Ok(serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `out/name` plus its sidecar `out/name.manifest.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
