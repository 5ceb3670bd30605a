#![allow(dead_code)]

use xvmpc_core::engine::{Engine, EngineConfig, MatDims, Protocol, Scheme, TruncMode};
use xvmpc_core::error::Result;
use xvmpc_core::ring_fixed::{encode_fixed, FixedPointConfig};
use xvmpc_core::runner::{outputs, run_local, PartyTask, DEFAULT_TIMEOUT};
use xvmpc_core::transport::{CommLedger, Phase};

pub const SCHEMES: [Scheme; 2] = [Scheme::Additive2, Scheme::Rss3];

pub fn config(scheme: Scheme, mode: TruncMode) -> EngineConfig {
    EngineConfig::new(scheme, FixedPointConfig::default(), mode)
}

pub fn enc(v: f64) -> u64 {
    encode_fixed(v, &FixedPointConfig::default()).unwrap().0
}

pub fn dec(v: u64, frac: u32) -> f64 {
    v as i64 as f64 / (frac as f64).exp2()
}

#[derive(Clone, Copy, Debug)]
pub enum Op {
    Identity,
    Add,
    AddPublic(u64),
    MulPublic(u64),
    Mul,
    MulFixed,
    Dot(usize),
    DotFixed(usize),
    Matmul(MatDims),
    Trunc(u32, TruncMode),
    Ltz,
    Relu,
    Sqrt,
}

/// Party 0 inputs `x`, party 1 inputs `y`, everybody runs `op` and opens
/// the result. Traffic is measured around `op` alone.
pub struct OpTask {
    pub op: Op,
    pub x: Vec<u64>,
    pub y: Vec<u64>,
    pub frac: u32,
}

#[derive(Clone, Debug)]
pub struct OpOut {
    pub opened: Vec<u64>,
    pub bytes: u64,
    pub rounds: u64,
}

fn counters<P: Protocol>(eng: &Engine<P>) -> (u64, u64) {
    eng.protocol()
        .session()
        .map(|s| (s.ledger().bytes_sent(Phase::Online), s.ledger().rounds(Phase::Online)))
        .unwrap_or((0, 0))
}

impl PartyTask for OpTask {
    type Output = OpOut;

    fn run<P: Protocol>(&self, eng: &mut Engine<P>) -> Result<OpOut> {
        let x = eng.input_ring(0, Some(&self.x), self.x.len(), self.frac)?;
        let y = eng.input_ring(1, Some(&self.y), self.y.len(), self.frac)?;
        let before = counters(eng);
        let z = match self.op {
            Op::Identity => x,
            Op::Add => eng.add(&x, &y)?,
            Op::AddPublic(c) => eng.add_public_scalar(&x, c),
            Op::MulPublic(c) => eng.mul_public(&x, c),
            Op::Mul => eng.mul(&x, &y)?,
            Op::MulFixed => eng.mul_fixed(&x, &y)?,
            Op::Dot(n) => eng.dot(&x, &y, n)?,
            Op::DotFixed(n) => eng.dot_fixed(&x, &y, n)?,
            Op::Matmul(d) => eng.matmul(&x, &y, d)?,
            Op::Trunc(s, mode) => eng.truncate_mode(&x, s, mode)?,
            Op::Ltz => eng.ltz(&x)?,
            Op::Relu => eng.relu(&x)?,
            Op::Sqrt => eng.sqrt(&x)?,
        };
        let after = counters(eng);
        let opened = eng.open(&z)?;
        Ok(OpOut {
            opened,
            bytes: after.0 - before.0,
            rounds: after.1 - before.1,
        })
    }
}

/// Runs one op at every party; returns the per-party outputs and ledgers.
pub fn run_op_full(cfg: &EngineConfig, task: &OpTask, seed: u64) -> (Vec<OpOut>, Vec<CommLedger>) {
    let run = run_local(cfg, task, seed, DEFAULT_TIMEOUT).expect("local run");
    let ledgers = run.ledgers();
    (outputs(run.parties).expect("party outputs"), ledgers)
}

/// Opened result, after checking that every party opened the same thing.
pub fn run_op(cfg: &EngineConfig, task: &OpTask) -> OpOut {
    let (outs, _) = run_op_full(cfg, task, 7);
    for o in &outs[1..] {
        assert_eq!(o.opened, outs[0].opened, "parties disagree on the opening");
    }
    outs[0].clone()
}

pub fn unary(op: Op, x: Vec<u64>, frac: u32) -> OpTask {
    OpTask { op, x, y: Vec::new(), frac }
}
