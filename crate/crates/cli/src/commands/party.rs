//! One party of a networked run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use serde::Serialize;
use xvmpc_core::preprocessing::{MaterialStore, RandomnessBudget};
use xvmpc_core::runner::{check_budget, run_party, ExtractionTask};
use xvmpc_core::transport::{tcp_connect, CommLedger, PartyConfig, Session};
use xvmpc_core::xvector::{
    load_features, load_weights, quantize_features, quantize_weights, save_embedding,
    secure_budget, Reveal, CLIENT, SERVER, VENDOR,
};
use xvmpc_core::Error;

use crate::manifest::{sidecar, write_json, DealerManifest, RunManifest, SharesFile};

#[derive(Args, Debug)]
pub struct PartyArgs {
    /// Party id; must match party_id in the config
    #[arg(long)]
    pub id: usize,
    /// Party config (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Network weights (vendor only)
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Speech features (client only)
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Material root; overrides the config
    #[arg(long)]
    pub material: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep the embedding shared instead of opening it to the client
    #[arg(long)]
    pub shares: bool,
}

/// Everything a party measured, written whether or not the run succeeded.
#[derive(Serialize)]
struct PartyReport {
    party: usize,
    ok: bool,
    error: Option<String>,
    exit_code: i32,
    ledger: Option<CommLedger>,
    material_reads_offline: u64,
    material_reads_online: u64,
    material_bytes_read: u64,
    budget: Option<RandomnessBudget>,
    consumed: Option<RandomnessBudget>,
    remaining: Option<RandomnessBudget>,
    online_seconds: f64,
}

fn role_name(id: usize) -> &'static str {
    match id {
        CLIENT => "client",
        VENDOR => "vendor",
        SERVER => "server",
        _ => "unknown",
    }
}

fn check_role(id: usize, weights: bool, features: bool) -> Result<(), Error> {
    let role = role_name(id);
    if weights && id != VENDOR {
        return Err(Error::Config(format!("party {id} ({role}) cannot supply weights")));
    }
    if features && id != CLIENT {
        return Err(Error::Config(format!("party {id} ({role}) cannot supply features")));
    }
    if id == VENDOR && !weights {
        return Err(Error::Config("the vendor must supply --weights".into()));
    }
    if id == CLIENT && !features {
        return Err(Error::Config("the client must supply --features".into()));
    }
    Ok(())
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

pub fn party(a: &PartyArgs) -> Result<()> {
    let pc = PartyConfig::load(&a.config)?;
    if pc.party_id != a.id {
        return Err(Error::Config(format!(
            "--id {} but the config is for party {}",
            a.id, pc.party_id
        ))
        .into());
    }
    check_role(a.id, a.weights.is_some(), a.features.is_some())?;
    let cfg = pc.engine_config()?;
    let root = match &a.material {
        Some(m) => m.clone(),
        None => resolve(a.config.parent().unwrap_or(Path::new(".")), &pc.material),
    };
    let dm = DealerManifest::load(&root)?;
    if dm.config_hash != cfg.config_hash() {
        return Err(Error::Config(format!(
            "material was dealt for config {:#010x}, this party runs {:#010x}",
            dm.config_hash,
            cfg.config_hash()
        ))
        .into());
    }
    let (arch, frames) = (&dm.arch, dm.frames);

    let weights = match &a.weights {
        Some(p) => {
            let g = load_weights(p)?;
            if &g.arch != arch {
                return Err(Error::Config("weights do not match the dealt architecture".into()).into());
            }
            Some(quantize_weights(&g, &cfg.fixed)?)
        }
        None => None,
    };
    let features = match &a.features {
        Some(p) => {
            let f = load_features(p)?;
            if f.frames != frames || f.dim != arch.input_dim() {
                return Err(Error::Shape(format!(
                    "features are {}×{}, material was dealt for {frames}×{}",
                    f.frames,
                    f.dim,
                    arch.input_dim()
                ))
                .into());
            }
            Some(quantize_features(&f, &cfg.fixed)?)
        }
        None => None,
    };

    // Offline: every file is read before any connection is made.
    let budget = secure_budget(arch, frames, &cfg)?;
    let mut store = MaterialStore::new(&root);
    let material = store.load_material(a.id, cfg.scheme, cfg.config_hash())?;
    check_budget(&material, &budget)?;
    let reads_offline = store.reads();

    fs::create_dir_all(&a.out)?;
    let mut report = PartyReport {
        party: a.id,
        ok: false,
        error: None,
        exit_code: 0,
        ledger: None,
        material_reads_offline: reads_offline,
        material_reads_online: 0,
        material_bytes_read: store.bytes_read(),
        budget: Some(budget),
        consumed: None,
        remaining: None,
        online_seconds: 0.0,
    };
    let report_path = a.out.join(format!("party{}.report.json", a.id));

    let reveal = if a.shares { Reveal::Shares } else { Reveal::To(CLIENT) };
    let task = ExtractionTask {
        arch,
        frames,
        weights: weights.as_ref(),
        features: features.as_deref(),
        reveal,
    };
    let online = (|| {
        let addrs = pc.socket_addrs()?;
        let links = tcp_connect(a.id, &addrs, pc.timeout())?;
        let session = Session::establish(a.id, links, cfg.config_hash(), pc.timeout())?;
        run_party(&cfg, session, material, &task)
    })();

    let run = match online {
        Ok(run) => run,
        Err(e) => {
            report.error = Some(e.to_string());
            report.exit_code = e.exit_code();
            write_json(&report_path, &report)?;
            return Err(e.into());
        }
    };
    report.material_reads_online = store.reads() - reads_offline;
    let mut ledger = run.ledger;
    ledger.offline_file_bytes = store.bytes_read();
    report.ledger = Some(ledger);
    report.consumed = Some(run.consumed.into());
    report.remaining = Some(run.remaining.into());
    report.online_seconds = run.online_seconds;

    let mut manifest = RunManifest::new(&cfg, arch, frames, "tcp");
    manifest.party = Some(a.id);
    let mut result = run.result;
    if let Ok(out) = &result {
        if let Some(emb) = out.embedding(&cfg.fixed) {
            let path = a.out.join("embedding.xve");
            save_embedding(&path, &emb)?;
            manifest.outputs.push("embedding.xve".into());
            write_json(&sidecar(&path), &manifest)?;
        }
        if let Some(components) = &out.shares {
            let name = format!("shares_party{}.json", a.id);
            let file = SharesFile {
                party: a.id,
                scheme: cfg.scheme.name().into(),
                frac_bits: out.frac,
                components: components.clone(),
            };
            write_json(&a.out.join(&name), &file)?;
            manifest.outputs.push(name);
        }
        if report.material_reads_online != 0 {
            result = Err(Error::Protocol(format!(
                "{} material reads after the online phase began",
                report.material_reads_online
            )));
        }
    }
    match &result {
        Ok(_) => report.ok = true,
        Err(e) => {
            report.error = Some(e.to_string());
            report.exit_code = e.exit_code();
        }
    }
    manifest.outputs.push(report_path.file_name().unwrap().to_string_lossy().into_owned());
    write_json(&report_path, &report)?;
    write_json(&a.out.join(format!("party{}.manifest.json", a.id)), &manifest)?;
    result?;
    Ok(())
}
