//! Plaintext utilities: synthetic inputs, the reference extractor and
//! embedding comparison.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde_json::json;
use xvmpc_core::xvector::{
    compare_embeddings, extract_reference, load_embedding, load_features, load_weights,
    save_embedding, save_features, save_weights, FeatureMatrix, NetworkGraph, FEATURE_DIM,
};

use crate::args::ArchArgs;

#[derive(Args, Debug)]
pub struct GenModelArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_model(a: &GenModelArgs) -> Result<()> {
    let graph = NetworkGraph::random(a.arch.architecture()?, a.seed)?;
    save_weights(&a.out, &graph)?;
    println!(
        "wrote {} ({} parameters, graph {})",
        a.out.display(),
        graph.arch.param_count(),
        graph.arch.fingerprint()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct GenFeaturesArgs {
    #[arg(long)]
    pub frames: usize,
    #[arg(long, default_value_t = FEATURE_DIM)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_features(a: &GenFeaturesArgs) -> Result<()> {
    let f = FeatureMatrix::random(a.frames, a.dim, a.seed);
    save_features(&a.out, &f)?;
    println!("wrote {} ({}×{})", a.out.display(), f.frames, f.dim);
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReferenceArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn reference(a: &ReferenceArgs) -> Result<()> {
    let graph = load_weights(&a.weights)?;
    let features = load_features(&a.features)?;
    let emb = extract_reference(&graph, &features)?;
    save_embedding(&a.out, &emb)?;
    println!("wrote {} (dim {})", a.out.display(), emb.values.len());
    Ok(())
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Embedding under test
    pub a: PathBuf,
    /// Reference embedding; relative MSE is normalized by its power
    pub b: PathBuf,
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let c = compare_embeddings(&load_embedding(&a.a)?, &load_embedding(&a.b)?)?;
    println!("dim           {}", c.dim);
    println!("mse           {:.6e}", c.mse);
    println!("relative_mse  {:.6e}", c.relative_mse);
    println!("max_abs_diff  {:.6e}", c.max_abs_diff);
    println!(
        "{}",
        json!({"dim": c.dim, "mse": c.mse, "relative_mse": c.relative_mse, "max_abs_diff": c.max_abs_diff})
    );
    Ok(())
}
