//! All parties in one process over in-memory channels.

use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;
use xvmpc_core::preprocessing::RandomnessBudget;
use xvmpc_core::runner::{outputs, run_local, ExtractionTask, DEFAULT_TIMEOUT};
use xvmpc_core::transport::{report_ledger, CommLedger, LedgerReport};
use xvmpc_core::xvector::{
    load_features, load_weights, quantize_features, quantize_weights, save_embedding, Reveal,
    CLIENT,
};

use crate::args::EngineArgs;
use crate::manifest::{sidecar, write_json, RunManifest, SharesFile};

#[derive(Args, Debug)]
pub struct LocalArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Dealer seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep the embedding shared and write each party's components
    #[arg(long)]
    pub shares: bool,
}

#[derive(Serialize)]
struct LocalReport {
    report: LedgerReport,
    ledgers: Vec<CommLedger>,
    budget: RandomnessBudget,
    material_bytes_per_party: u64,
    offline_seconds: f64,
    online_seconds: f64,
}

pub fn local(a: &LocalArgs) -> Result<()> {
    let cfg = a.engine.config()?;
    let graph = load_weights(&a.weights)?;
    let features = load_features(&a.features)?;
    let q = quantize_weights(&graph, &cfg.fixed)?;
    let feats = quantize_features(&features, &cfg.fixed)?;
    let task = ExtractionTask {
        arch: &graph.arch,
        frames: features.frames,
        weights: Some(&q),
        features: Some(&feats),
        reveal: if a.shares { Reveal::Shares } else { Reveal::To(CLIENT) },
    };
    let run = run_local(&cfg, &task, a.seed, DEFAULT_TIMEOUT)?;
    let ledgers = run.ledgers();
    let report = LocalReport {
        report: report_ledger(&ledgers),
        ledgers,
        material_bytes_per_party: run.budget.party_bytes(cfg.scheme),
        budget: run.budget,
        offline_seconds: run.offline_seconds,
        online_seconds: run.online_seconds,
    };
    let outs = outputs(run.parties)?;

    fs::create_dir_all(&a.out)?;
    let mut manifest = RunManifest::new(&cfg, &graph.arch, features.frames, "in-process");
    manifest.seed = Some(a.seed);
    if a.shares {
        for (p, o) in outs.iter().enumerate() {
            let name = format!("shares_party{p}.json");
            write_json(
                &a.out.join(&name),
                &SharesFile {
                    party: p,
                    scheme: cfg.scheme.name().into(),
                    frac_bits: o.frac,
                    components: o.shares.clone().unwrap_or_default(),
                },
            )?;
            manifest.outputs.push(name);
        }
    } else {
        let emb = outs[CLIENT]
            .embedding(&cfg.fixed)
            .expect("the client receives the opening");
        save_embedding(&a.out.join("embedding.xve"), &emb)?;
        manifest.outputs.push("embedding.xve".into());
    }
    manifest.outputs.push("ledger.json".into());
    write_json(&a.out.join("ledger.json"), &report)?;
    let main_output = a.out.join(&manifest.outputs[0]);
    write_json(&sidecar(&main_output), &manifest)?;

    print!("{}", report.report.to_table());
    println!(
        "offline {:.3} s, online {:.3} s, total {:.3} s",
        report.offline_seconds,
        report.online_seconds,
        report.offline_seconds + report.online_seconds
    );
    Ok(())
}
