use super::formats::Embedding;
use super::graph::{Architecture, LayerKind, LayerSpec};
use super::reference::{output_frames, splice_source, QuantizedGraph};
use crate::engine::{DryRun, Engine, EngineConfig, MatDims, Protocol, Secret, ShareVec, ZERO_INDEX};
use crate::error::{Error, Result};
use crate::preprocessing::RandomnessBudget;
use crate::ring_fixed::{decode_fixed, FixedPointConfig, RingElement};

/// Supplies the speech features and receives the embedding by default.
pub const CLIENT: usize = 0;
/// Supplies the network weights.
pub const VENDOR: usize = 1;
/// Third party of the replicated scheme; supplies nothing.
pub const SERVER: usize = 2;

/// What happens to the embedding at the end of the run.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Reveal {
    /// Open towards one party.
    To(usize),
    /// Keep it shared; every party keeps its own components.
    Shares,
}

#[derive(Clone, Debug)]
pub struct SecureOutput {
    /// Opened ring values, present at the recipient only.
    pub opened: Option<Vec<u64>>,
    /// This party's share components per coordinate, in shares mode.
    pub shares: Option<Vec<Vec<u64>>>,
    pub frac: u32,
}

impl SecureOutput {
    pub fn embedding(&self, fixed: &FixedPointConfig) -> Option<Embedding> {
        let cfg = FixedPointConfig { f: self.frac, ..*fixed };
        self.opened.as_ref().map(|v| Embedding {
            values: v.iter().map(|x| decode_fixed(RingElement(*x), &cfg)).collect(),
        })
    }
}

fn lift_bias<P: Protocol>(
    eng: &Engine<P>,
    b: &Secret<P::Vec>,
    rows: usize,
) -> Secret<P::Vec> {
    let cols = b.len();
    let idx: Vec<usize> = (0..rows).flat_map(|_| 0..cols).collect();
    let f = eng.config().fixed.f;
    let mut lifted = eng.mul_public(&b.gather(&idx), 1u64 << f);
    lifted.frac += f;
    lifted
}

/// A TDNN (or, with `frames = 1`, linear) layer on a `frames × in` input:
/// splice, one matrix product, bias, one truncation, optional ReLU.
#[allow(clippy::too_many_arguments)]
pub fn tdnn_secure<P: Protocol>(
    eng: &mut Engine<P>,
    x: &Secret<P::Vec>,
    frames: usize,
    layer: &LayerSpec,
    w: &Secret<P::Vec>,
    b: &Secret<P::Vec>,
    padded: bool,
    relu: bool,
) -> Result<(Secret<P::Vec>, usize)> {
    let (cin, cout, k) = (layer.input_dim, layer.output_dim, layer.kernel);
    if x.len() != frames * cin {
        return Err(Error::Shape(format!(
            "layer input has {} values, expected {frames}×{cin}",
            x.len()
        )));
    }
    if !padded && frames < layer.context() + 1 {
        return Err(Error::Shape(format!(
            "layer needs at least {} frames, got {frames}",
            layer.context() + 1
        )));
    }
    let t_out = output_frames(layer, padded, frames);
    let spliced = if k == 1 && !padded {
        x.clone()
    } else {
        let mut idx = Vec::with_capacity(t_out * k * cin);
        for t in 0..t_out {
            for j in 0..k {
                match splice_source(layer, padded, t, j, frames) {
                    Some(s) => idx.extend(s * cin..(s + 1) * cin),
                    None => idx.extend(std::iter::repeat_n(ZERO_INDEX, cin)),
                }
            }
        }
        x.gather(&idx)
    };
    let dims = MatDims {
        rows: t_out,
        inner: k * cin,
        cols: cout,
    };
    let z = eng.matmul(&spliced, w, dims)?;
    let z = eng.add(&z, &lift_bias(eng, b, t_out))?;
    let z = eng.truncate(&z, eng.config().fixed.f)?;
    let z = if relu { eng.relu(&z)? } else { z };
    Ok((z, t_out))
}

/// Per-channel mean and standard deviation of a `frames × dim` input.
pub fn stats_pool_secure<P: Protocol>(
    eng: &mut Engine<P>,
    x: &Secret<P::Vec>,
    frames: usize,
    dim: usize,
    sample_variance: bool,
    eps: f64,
) -> Result<Secret<P::Vec>> {
    if frames < 2 {
        return Err(Error::Shape(format!(
            "statistics pooling needs at least 2 frames, got {frames}"
        )));
    }
    let f = eng.config().fixed.f;
    const RECIP_BITS: u32 = 30;
    let recip = |v: f64| (v * (1u64 << RECIP_BITS) as f64).round() as u64;
    let inv_t = recip(1.0 / frames as f64);

    let tidx: Vec<usize> = (0..dim)
        .flat_map(|c| (0..frames).map(move |t| t * dim + c))
        .collect();
    let cols = x.gather(&tidx);

    let mut sums = cols.sum_groups(frames);
    sums.shares.scale(inv_t);
    sums.frac += RECIP_BITS;
    let mean = eng.truncate(&sums, RECIP_BITS)?;

    let sq = eng.dot_fixed(&cols, &cols, frames)?;
    let mut sq = sq;
    sq.shares.scale(inv_t);
    sq.frac += RECIP_BITS;
    let mean_sq = eng.truncate(&sq, RECIP_BITS)?;

    let mean2 = eng.mul_fixed(&mean, &mean)?;
    let var = eng.sub(&mean_sq, &mean2)?;
    let mut var = eng.relu(&var)?;
    if sample_variance {
        let n = frames as f64;
        var.shares.scale(recip(n / (n - 1.0)));
        var.frac += RECIP_BITS;
        var = eng.truncate(&var, RECIP_BITS)?;
    }
    let eps_fixed = if eps > 0.0 {
        ((eps * (1u64 << f) as f64).round() as u64).max(1)
    } else {
        0
    };
    let var = eng.add_public_scalar(&var, eps_fixed);
    let std = eng.sqrt(&var)?;
    Ok(Secret::new(P::Vec::concat(&[&mean.shares, &std.shares]), f))
}

/// Runs the full extractor on shared inputs. The vendor passes quantized
/// weights, the client passes quantized features; other arguments are
/// public and identical at every party.
pub fn extract_secure<P: Protocol>(
    eng: &mut Engine<P>,
    arch: &Architecture,
    frames: usize,
    weights: Option<&QuantizedGraph>,
    features: Option<&[u64]>,
    reveal: Reveal,
) -> Result<SecureOutput> {
    arch.validate()?;
    arch.frames_per_layer(frames)?;
    let f = eng.config().fixed.f;
    let me = eng.party();

    let params = match weights {
        Some(q) if me == VENDOR => {
            if &q.arch != arch {
                return Err(Error::Config("weights do not match the agreed architecture".into()));
            }
            if q.fixed != eng.config().fixed {
                return Err(Error::Config("weights were quantized for another fixed-point layout".into()));
            }
            Some(q.flat_params())
        }
        _ => None,
    };
    let all_params = eng.input_ring(VENDOR, params.as_deref(), arch.param_count(), f)?;
    let n_feat = frames * arch.input_dim();
    let mut x = eng.input_ring(CLIENT, features, n_feat, f)?;

    let mut t = frames;
    let mut offset = 0;
    for l in &arch.layers {
        let (wc, bc) = (l.weight_count(), l.bias_count());
        let w = all_params.slice(offset..offset + wc);
        let b = all_params.slice(offset + wc..offset + wc + bc);
        offset += wc + bc;
        match l.kind {
            LayerKind::Tdnn => {
                let (y, t2) = tdnn_secure(eng, &x, t, l, &w, &b, arch.padded, true)?;
                x = y;
                t = t2;
            }
            LayerKind::StatsPool => {
                x = stats_pool_secure(eng, &x, t, l.input_dim, arch.sample_variance, arch.eps)?;
                t = 1;
            }
            LayerKind::Linear => {
                let (y, _) = tdnn_secure(eng, &x, 1, l, &w, &b, false, false)?;
                x = y;
            }
        }
    }

    let frac = x.frac;
    Ok(match reveal {
        Reveal::To(r) => SecureOutput {
            opened: eng.open_to(&x, r)?,
            shares: None,
            frac,
        },
        Reveal::Shares => SecureOutput {
            opened: None,
            shares: Some(eng.protocol().export_shares(&x.shares)),
            frac,
        },
    })
}

/// Material one party consumes for an extraction, found by running the
/// same code against a counting backend.
pub fn secure_budget(arch: &Architecture, frames: usize, cfg: &EngineConfig) -> Result<RandomnessBudget> {
    let mut eng = Engine::new(DryRun::new(cfg.scheme, CLIENT), *cfg)?;
    extract_secure(&mut eng, arch, frames, None, None, Reveal::To(CLIENT))?;
    Ok(eng.into_protocol().into_counts().into())
}
