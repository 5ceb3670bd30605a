use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, Scheme, TruncMode};
use crate::error::{Error, Result};
use crate::ring_fixed::FixedPointConfig;

fn default_f() -> u32 {
    15
}
fn default_m() -> u32 {
    16
}
fn default_s() -> u32 {
    40
}
fn default_timeout_ms() -> u64 {
    600_000
}

/// Party runner configuration, read from a TOML key/value file.
///
/// ```toml
/// party_id = 1
/// scheme = "rss3"
/// peers = ["127.0.0.1:7100", "127.0.0.1:7101", "127.0.0.1:7102"]
/// frac_bits = 15
/// int_bits = 16
/// stat_sec = 40
/// trunc = "prob"
/// material = "material/"
/// timeout_ms = 60000
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartyConfig {
    pub party_id: usize,
    pub scheme: Scheme,
    /// One `host:port` per party, indexed by party id.
    pub peers: Vec<String>,
    #[serde(default = "default_f")]
    pub frac_bits: u32,
    #[serde(default = "default_m")]
    pub int_bits: u32,
    #[serde(default = "default_s")]
    pub stat_sec: u32,
    #[serde(default)]
    pub trunc: TruncMode,
    /// Bound (in bits) on comparison inputs; defaults to `int_bits + frac_bits + 1`.
    #[serde(default)]
    pub cmp_bits: Option<u32>,
    #[serde(default)]
    pub verify_openings: bool,
    pub material: PathBuf,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

impl PartyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PartyConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("party config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("party config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.scheme.parties();
        if self.peers.len() != n {
            return Err(Error::Config(format!(
                "scheme {} needs {n} peer addresses, got {}",
                self.scheme.name(),
                self.peers.len()
            )));
        }
        if self.party_id >= n {
            return Err(Error::Config(format!(
                "party_id {} out of range for {n} parties",
                self.party_id
            )));
        }
        self.engine_config().map(|_| ())
    }

    pub fn engine_config(&self) -> Result<EngineConfig> {
        let fixed = FixedPointConfig::new(self.frac_bits, self.int_bits, self.stat_sec)?;
        let mut cfg = EngineConfig::new(self.scheme, fixed, self.trunc);
        if let Some(b) = self.cmp_bits {
            cfg = cfg.with_cmp_bits(b)?;
        }
        cfg.verify_openings = self.verify_openings;
        Ok(cfg)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn socket_addrs(&self) -> Result<Vec<SocketAddr>> {
        self.peers
            .iter()
            .map(|p| {
                p.to_socket_addrs()
                    .map_err(|e| Error::Config(format!("bad peer address {p}: {e}")))?
                    .next()
                    .ok_or_else(|| Error::Config(format!("peer address {p} did not resolve")))
            })
            .collect()
    }
}
