//! Drives one or more parties through a task: session setup, protocol
//! construction, timing and bookkeeping. Used by the CLI and the tests.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::engine::{
    AdditiveProtocol, DryRun, Engine, EngineConfig, Protocol, RssProtocol, Scheme,
};
use crate::error::{Error, Result};
use crate::preprocessing::{Dealer, MaterialKey, PartyMaterial, RandomnessBudget};
use crate::transport::{inprocess_mesh, CommLedger, Link, Session};
use crate::xvector::{extract_secure, Architecture, QuantizedGraph, Reveal, SecureOutput};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Work done identically by every party on its own engine.
pub trait PartyTask: Sync {
    type Output: Send;
    fn run<P: Protocol>(&self, eng: &mut Engine<P>) -> Result<Self::Output>;
}

/// Secure x-vector extraction. In-process every party sees both inputs,
/// but only the owning party's copy is ever used.
pub struct ExtractionTask<'a> {
    pub arch: &'a Architecture,
    pub frames: usize,
    pub weights: Option<&'a QuantizedGraph>,
    pub features: Option<&'a [u64]>,
    pub reveal: Reveal,
}

impl PartyTask for ExtractionTask<'_> {
    type Output = SecureOutput;
    fn run<P: Protocol>(&self, eng: &mut Engine<P>) -> Result<SecureOutput> {
        extract_secure(eng, self.arch, self.frames, self.weights, self.features, self.reveal)
    }
}

/// One party's result plus what it spent. The ledger is kept even when
/// the task fails.
pub struct PartyRun<T> {
    pub party: usize,
    pub result: Result<T>,
    pub ledger: CommLedger,
    pub consumed: BTreeMap<MaterialKey, u64>,
    pub remaining: BTreeMap<MaterialKey, u64>,
    pub online_seconds: f64,
}

/// Fails with an underflow error if `material` cannot cover `budget`.
pub fn check_budget(material: &PartyMaterial, budget: &RandomnessBudget) -> Result<()> {
    for (key, need) in budget.iter() {
        let have = material.available(&key);
        if have < need {
            return Err(Error::PreprocessingUnderflow {
                kind: key.to_string(),
                requested: need,
                available: have,
            });
        }
    }
    Ok(())
}

/// Runs `task` for one party over an established session.
pub fn run_party<T: PartyTask>(
    cfg: &EngineConfig,
    session: Session,
    material: PartyMaterial,
    task: &T,
) -> Result<PartyRun<T::Output>> {
    if material.config_hash != cfg.config_hash() {
        return Err(Error::IncompatibleConfig {
            local: cfg.config_hash(),
            remote: material.config_hash,
            peer: material.party,
        });
    }
    let party = session.party();
    let start = Instant::now();
    let (result, session, material) = match cfg.scheme {
        Scheme::Additive2 => {
            let mut eng = Engine::new(AdditiveProtocol::new(session, material)?, *cfg)?;
            let r = task.run(&mut eng);
            let (s, m) = eng.into_protocol().into_parts();
            (r, s, m)
        }
        Scheme::Rss3 => {
            let proto = RssProtocol::new(session, material, cfg.verify_openings)?;
            let mut eng = Engine::new(proto, *cfg)?;
            let r = task.run(&mut eng);
            let (s, m) = eng.into_protocol().into_parts();
            (r, s, m)
        }
    };
    let online_seconds = start.elapsed().as_secs_f64();
    let remaining = material
        .pools()
        .map(|(k, p)| (*k, p.remaining()))
        .collect();
    Ok(PartyRun {
        party,
        result,
        ledger: session.into_ledger(),
        consumed: material.consumption(),
        remaining,
        online_seconds,
    })
}

/// Counts the material `task` consumes, checking that every party would
/// consume the same amount.
pub fn dry_run<T: PartyTask>(cfg: &EngineConfig, task: &T) -> Result<RandomnessBudget> {
    let mut first: Option<BTreeMap<MaterialKey, u64>> = None;
    for party in 0..cfg.scheme.parties() {
        let mut eng = Engine::new(DryRun::new(cfg.scheme, party), *cfg)?;
        task.run(&mut eng)?;
        let counts = eng.into_protocol().into_counts();
        match &first {
            None => first = Some(counts),
            Some(c) if *c != counts => {
                return Err(Error::Protocol(format!(
                    "party {party} would consume different material than party 0"
                )))
            }
            _ => {}
        }
    }
    Ok(first.unwrap_or_default().into())
}

/// Picks the most informative error: a peer's disconnect is usually the
/// echo of another party's real failure.
fn root_cause(errors: Vec<Error>) -> Error {
    let mut errors = errors;
    let pos = errors
        .iter()
        .position(|e| !matches!(e, Error::Transport(_) | Error::Timeout { .. }))
        .unwrap_or(0);
    errors.swap_remove(pos)
}

/// Runs all parties on threads over in-process channels.
pub fn run_in_process<T: PartyTask>(
    cfg: &EngineConfig,
    task: &T,
    materials: Vec<PartyMaterial>,
    timeout: Duration,
) -> Result<Vec<PartyRun<T::Output>>> {
    let n = cfg.scheme.parties();
    if materials.len() != n {
        return Err(Error::Usage(format!(
            "{} needs {n} material sets, got {}",
            cfg.scheme.name(),
            materials.len()
        )));
    }
    let hash = cfg.config_hash();
    let mesh = inprocess_mesh(n);
    let results: Vec<Result<PartyRun<T::Output>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = mesh
            .into_iter()
            .zip(materials)
            .enumerate()
            .map(|(i, (links, mat)): (usize, (Vec<Option<Box<dyn Link>>>, PartyMaterial))| {
                scope.spawn(move || {
                    let session = Session::establish(i, links, hash, timeout)?;
                    run_party(cfg, session, mat, task)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Protocol("party thread panicked".into())))
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(n);
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(runs)
    } else {
        Err(root_cause(errors))
    }
}

/// Splits runs into per-party outputs, or the root-cause error.
pub fn outputs<T>(runs: Vec<PartyRun<T>>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(runs.len());
    let mut errors = Vec::new();
    for r in runs {
        match r.result {
            Ok(v) => out.push(v),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(root_cause(errors))
    }
}

/// Offline and online phases of a fully local run.
pub struct LocalRun<T> {
    pub budget: RandomnessBudget,
    pub parties: Vec<PartyRun<T>>,
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

impl<T> LocalRun<T> {
    pub fn ledgers(&self) -> Vec<CommLedger> {
        self.parties.iter().map(|p| p.ledger.clone()).collect()
    }
}

/// Dry run, dealing and the online phase in one call.
pub fn run_local<T: PartyTask>(
    cfg: &EngineConfig,
    task: &T,
    dealer_seed: u64,
    timeout: Duration,
) -> Result<LocalRun<T::Output>> {
    let start = Instant::now();
    let budget = dry_run(cfg, task)?;
    let materials = Dealer::new(*cfg, dealer_seed).deal(&budget)?;
    let offline_seconds = start.elapsed().as_secs_f64();
    let parties = run_in_process(cfg, task, materials, timeout)?;
    let online_seconds = parties
        .iter()
        .map(|p| p.online_seconds)
        .fold(0.0, f64::max);
    Ok(LocalRun {
        budget,
        parties,
        offline_seconds,
        online_seconds,
    })
}
