use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::Args;
use xvmpc_core::preprocessing::{write_material, Dealer};
use xvmpc_core::xvector::{load_weights, secure_budget};

use crate::args::EngineArgs;
use crate::manifest::{write_json, DealerManifest, DEALER_MANIFEST};

#[derive(Args, Debug)]
pub struct DealerArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Weights file; only its architecture is read
    #[arg(long)]
    pub graph: PathBuf,
    /// Number of feature frames the material must cover
    #[arg(long)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Material root; party i's files go to OUT/party{i}/
    #[arg(long)]
    pub out: PathBuf,
}

pub fn dealer(a: &DealerArgs) -> Result<()> {
    let cfg = a.engine.config()?;
    let arch = load_weights(&a.graph)?.arch;
    let budget = secure_budget(&arch, a.frames, &cfg)?;

    let start = Instant::now();
    let materials = Dealer::new(cfg, a.seed).deal(&budget)?;
    fs::create_dir_all(&a.out)?;
    let mut files = Vec::new();
    for m in &materials {
        files.extend(write_material(&a.out, m)?);
    }
    let manifest = DealerManifest {
        engine: cfg,
        config_hash: cfg.config_hash(),
        graph_hash: arch.fingerprint(),
        arch,
        frames: a.frames,
        seed: a.seed,
        run_id: materials[0].run_id,
        budget,
        files,
    };
    write_json(&a.out.join(DEALER_MANIFEST), &manifest)?;

    print!("{}", manifest.budget.to_table(cfg.scheme));
    let total: u64 = manifest.files.iter().map(|f| f.bytes).sum();
    println!(
        "dealt {} parties, {} files, {total} bytes in {:.2} s (config {:#010x})",
        materials.len(),
        manifest.files.len(),
        start.elapsed().as_secs_f64(),
        manifest.config_hash
    );
    Ok(())
}
