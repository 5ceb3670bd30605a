//! Timing and traffic over a range of utterance lengths.

use anyhow::Result;
use clap::Args;
use serde_json::json;
use xvmpc_core::runner::{run_local, ExtractionTask, DEFAULT_TIMEOUT};
use xvmpc_core::transport::{report_ledger, Phase};
use xvmpc_core::xvector::{quantize_features, quantize_weights, FeatureMatrix, NetworkGraph, Reveal, CLIENT};
use xvmpc_core::Error;

use crate::args::{ArchArgs, EngineArgs};

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Comma-separated frame counts
    #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
    pub frames_list: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Least-squares line through the points, with its R².
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    if a.repeats == 0 || a.frames_list.is_empty() {
        return Err(Error::Usage("need at least one repeat and one frame count".into()).into());
    }
    let cfg = a.engine.config()?;
    let arch = a.arch.architecture()?;
    let graph = NetworkGraph::random(arch.clone(), a.seed)?;
    let q = quantize_weights(&graph, &cfg.fixed)?;
    println!(
        "scheme {} trunc {} graph {} ({} parameters)",
        cfg.scheme.name(),
        cfg.trunc.name(),
        &arch.fingerprint()[..16],
        arch.param_count()
    );
    println!(
        "{:>6} {:>16} {:>16} {:>16} {:>14} {:>7} {:>14}",
        "frames", "offline s", "online s", "total s", "online B/max", "rounds", "material B"
    );
    let mut fit = Vec::new();
    for &frames in &a.frames_list {
        let (mut off, mut on, mut tot) = (Vec::new(), Vec::new(), Vec::new());
        let mut traffic = None;
        let mut rounds = 0;
        let mut material = 0;
        for r in 0..a.repeats {
            let f = FeatureMatrix::random(frames, arch.input_dim(), a.seed + 1 + r as u64);
            let feats = quantize_features(&f, &cfg.fixed)?;
            let task = ExtractionTask {
                arch: &arch,
                frames,
                weights: Some(&q),
                features: Some(&feats),
                reveal: Reveal::To(CLIENT),
            };
            let run = run_local(&cfg, &task, a.seed + r as u64, DEFAULT_TIMEOUT)?;
            let ledgers = run.ledgers();
            if let Some(prev) = &traffic {
                if prev != &ledgers {
                    return Err(Error::Protocol(format!(
                        "traffic changed between repeats at {frames} frames"
                    ))
                    .into());
                }
            }
            rounds = ledgers[0].rounds(Phase::Online);
            material = run.budget.party_bytes(cfg.scheme);
            traffic = Some(ledgers);
            off.push(run.offline_seconds);
            on.push(run.online_seconds);
            tot.push(run.offline_seconds + run.online_seconds);
        }
        let report = report_ledger(traffic.as_ref().unwrap());
        let (o, on_, t) = (mean_std(&off), mean_std(&on), mean_std(&tot));
        println!(
            "{frames:>6} {:>8.3}±{:<7.3} {:>8.3}±{:<7.3} {:>8.3}±{:<7.3} {:>14} {:>7} {:>14}",
            o.0, o.1, on_.0, on_.1, t.0, t.1, report.online_bytes_max, rounds, material
        );
        println!(
            "BENCH {}",
            json!({
                "frames": frames,
                "repeats": a.repeats,
                "offline_mean_s": o.0, "offline_std_s": o.1,
                "online_mean_s": on_.0, "online_std_s": on_.1,
                "total_mean_s": t.0, "total_std_s": t.1,
                "online_bytes_max": report.online_bytes_max,
                "online_bytes_total": report.online_bytes_total,
                "online_rounds": rounds,
                "material_bytes_per_party": material,
            })
        );
        fit.push((frames as f64, report.online_bytes_max as f64));
    }
    if fit.len() >= 2 {
        let (slope, intercept, r2) = linear_fit(&fit);
        println!("online bytes ≈ {slope:.1}·T + {intercept:.0} (R² = {r2:.6})");
        println!(
            "BENCH_FIT {}",
            json!({"slope_bytes_per_frame": slope, "intercept_bytes": intercept, "r2": r2})
        );
    }
    Ok(())
}
