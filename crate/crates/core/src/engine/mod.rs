//! Secure operations over shared fixed-point values.
//!
//! A [`Protocol`] backend supplies sharing, opening, multiplication and
//! access to dealer material. [`Engine`] layers truncation, comparison,
//! ReLU and square root on top, identically for every backend.

mod additive;
mod dryrun;
mod protocol;
mod rss;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use additive::{beaver_share, AddVec, AdditiveProtocol};
pub use dryrun::{DryRun, DryVec};
pub use protocol::{BitBatch, MatDims, Protocol, ShareVec, TruncBatch, ZERO_INDEX};
pub use rss::{RssProtocol, RssVec};

use crate::error::{Error, Result};
use crate::ring_fixed::{decode_fixed, encode_fixed, FixedPointConfig, RingElement};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Two parties, additive shares, Beaver triples.
    #[serde(rename = "additive2")]
    Additive2,
    /// Three parties, replicated shares.
    #[serde(rename = "rss3")]
    Rss3,
}

impl Scheme {
    pub fn id(self) -> u8 {
        match self {
            Scheme::Additive2 => 0,
            Scheme::Rss3 => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(Scheme::Additive2),
            1 => Ok(Scheme::Rss3),
            _ => Err(Error::Schema(format!("unknown scheme id {id}"))),
        }
    }

    pub fn parties(self) -> usize {
        match self {
            Scheme::Additive2 => 2,
            Scheme::Rss3 => 3,
        }
    }

    /// Ring elements each party stores per shared value.
    pub fn components(self) -> usize {
        match self {
            Scheme::Additive2 => 1,
            Scheme::Rss3 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Additive2 => "additive2",
            Scheme::Rss3 => "rss3",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive2" => Ok(Scheme::Additive2),
            "rss3" => Ok(Scheme::Rss3),
            _ => Err(Error::Usage(format!(
                "unknown scheme {s:?} (expected additive2 or rss3)"
            ))),
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TruncMode {
    /// Exact arithmetic shift, via a borrow circuit on the masked low bits.
    #[serde(rename = "det")]
    Deterministic,
    /// Skips the borrow: result may exceed the exact shift by one unit.
    #[default]
    #[serde(rename = "prob")]
    Probabilistic,
}

impl TruncMode {
    pub fn name(self) -> &'static str {
        match self {
            TruncMode::Deterministic => "det",
            TruncMode::Probabilistic => "prob",
        }
    }
}

impl std::str::FromStr for TruncMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" => Ok(TruncMode::Deterministic),
            "prob" => Ok(TruncMode::Probabilistic),
            _ => Err(Error::Usage(format!("unknown truncation mode {s:?} (det|prob)"))),
        }
    }
}

/// Everything the parties must agree on before running.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub scheme: Scheme,
    pub fixed: FixedPointConfig,
    pub trunc: TruncMode,
    /// Comparison inputs must satisfy |x| < 2^cmp_bits.
    pub cmp_bits: u32,
    /// Cross-check replicated openings with a digest from the second holder.
    pub verify_openings: bool,
}

/// Largest magnitude accepted by truncation: inputs satisfy |x| < 2^62.
pub const TRUNC_INPUT_BITS: u32 = 62;

impl EngineConfig {
    pub fn new(scheme: Scheme, fixed: FixedPointConfig, trunc: TruncMode) -> Self {
        EngineConfig {
            scheme,
            fixed,
            trunc,
            cmp_bits: fixed.value_bits() + 1,
            verify_openings: false,
        }
    }

    pub fn with_cmp_bits(mut self, bits: u32) -> Result<Self> {
        if !(2..=63).contains(&bits) {
            return Err(Error::Config(format!(
                "comparison bound must be between 2 and 63 bits, got {bits}"
            )));
        }
        self.cmp_bits = bits;
        Ok(self)
    }

    pub fn canonical_string(&self) -> String {
        format!(
            "scheme={};k={};f={};m={};s={};trunc={};cmp={};verify={}",
            self.scheme.name(),
            self.fixed.k,
            self.fixed.f,
            self.fixed.m,
            self.fixed.s,
            self.trunc.name(),
            self.cmp_bits,
            self.verify_openings
        )
    }

    /// First four bytes of SHA-256 over [`Self::canonical_string`].
    pub fn config_hash(&self) -> u32 {
        let d = Sha256::digest(self.canonical_string().as_bytes());
        u32::from_le_bytes([d[0], d[1], d[2], d[3]])
    }
}

/// A shared vector tagged with its fixed-point scale (`frac` fractional bits).
#[derive(Clone, Debug)]
pub struct Secret<V> {
    pub shares: V,
    pub frac: u32,
}

impl<V: ShareVec> Secret<V> {
    pub fn new(shares: V, frac: u32) -> Self {
        Secret { shares, frac }
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn gather(&self, idx: &[usize]) -> Self {
        Secret::new(self.shares.gather(idx), self.frac)
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Secret::new(self.shares.slice(range), self.frac)
    }

    pub fn sum_groups(&self, group: usize) -> Self {
        Secret::new(self.shares.sum_groups(group), self.frac)
    }
}

fn pow2(e: u32) -> u64 {
    if e >= 64 {
        0
    } else {
        1u64 << e
    }
}

/// Initial guess for 1/√x on [0.5, 1): y0 = A − B·x, minimax in relative error.
const RSQRT_A: f64 = 1.787_727_48;
const RSQRT_B: f64 = 0.809_986_85;
const SQRT_WORK_BITS: u32 = 30;
pub const SQRT_NEWTON_ITERATIONS: usize = 6;

/// One party's secure-computation context.
pub struct Engine<P: Protocol> {
    proto: P,
    cfg: EngineConfig,
}

impl<P: Protocol> Engine<P> {
    pub fn new(proto: P, cfg: EngineConfig) -> Result<Self> {
        if proto.scheme() != cfg.scheme {
            return Err(Error::Config(format!(
                "backend runs {}, config says {}",
                proto.scheme().name(),
                cfg.scheme.name()
            )));
        }
        cfg.fixed.validate()?;
        Ok(Engine { proto, cfg })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn party(&self) -> usize {
        self.proto.party()
    }

    pub fn protocol(&self) -> &P {
        &self.proto
    }

    pub fn protocol_mut(&mut self) -> &mut P {
        &mut self.proto
    }

    pub fn into_protocol(self) -> P {
        self.proto
    }

    fn f(&self) -> u32 {
        self.cfg.fixed.f
    }

    // ---- input and output ----

    /// Shares real values owned by `owner`, encoded at the configured scale.
    pub fn input_fixed(
        &mut self,
        owner: usize,
        values: Option<&[f64]>,
        n: usize,
    ) -> Result<Secret<P::Vec>> {
        let encoded = match values {
            Some(v) if self.party() == owner => Some(
                v.iter()
                    .map(|x| encode_fixed(*x, &self.cfg.fixed).map(|r| r.0))
                    .collect::<Result<Vec<u64>>>()?,
            ),
            _ => None,
        };
        self.input_ring(owner, encoded.as_deref(), n, self.f())
    }

    pub fn input_ring(
        &mut self,
        owner: usize,
        values: Option<&[u64]>,
        n: usize,
        frac: u32,
    ) -> Result<Secret<P::Vec>> {
        let values = if self.party() == owner { values } else { None };
        Ok(Secret::new(self.proto.input(owner, values, n)?, frac))
    }

    /// A sharing of public values.
    pub fn constant(&self, values: &[u64], frac: u32) -> Secret<P::Vec> {
        let mut v = P::Vec::zeros(values.len());
        self.proto.add_public(&mut v, values);
        Secret::new(v, frac)
    }

    pub fn open(&mut self, x: &Secret<P::Vec>) -> Result<Vec<u64>> {
        self.proto.open(&x.shares)
    }

    pub fn open_fixed(&mut self, x: &Secret<P::Vec>) -> Result<Vec<f64>> {
        let cfg = FixedPointConfig { f: x.frac, ..self.cfg.fixed };
        Ok(self
            .open(x)?
            .into_iter()
            .map(|v| decode_fixed(RingElement(v), &cfg))
            .collect())
    }

    pub fn open_to(&mut self, x: &Secret<P::Vec>, recipient: usize) -> Result<Option<Vec<u64>>> {
        if recipient >= self.cfg.scheme.parties() {
            return Err(Error::Usage(format!("no party {recipient} to open to")));
        }
        self.proto.open_to(&x.shares, recipient)
    }

    // ---- linear operations (no communication) ----

    fn check_same(&self, x: &Secret<P::Vec>, y: &Secret<P::Vec>, what: &str) -> Result<()> {
        if x.frac != y.frac {
            return Err(Error::Usage(format!(
                "{what}: scale mismatch (2^{} vs 2^{})",
                x.frac, y.frac
            )));
        }
        if x.len() != y.len() {
            return Err(Error::Usage(format!(
                "{what}: length mismatch ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, x: &Secret<P::Vec>, y: &Secret<P::Vec>) -> Result<Secret<P::Vec>> {
        self.check_same(x, y, "add")?;
        let mut z = x.shares.clone();
        z.add_assign(&y.shares);
        Ok(Secret::new(z, x.frac))
    }

    pub fn sub(&self, x: &Secret<P::Vec>, y: &Secret<P::Vec>) -> Result<Secret<P::Vec>> {
        self.check_same(x, y, "sub")?;
        let mut z = x.shares.clone();
        z.sub_assign(&y.shares);
        Ok(Secret::new(z, x.frac))
    }

    /// Adds public ring values already at `x`'s scale.
    pub fn add_public(&self, x: &Secret<P::Vec>, c: &[u64]) -> Result<Secret<P::Vec>> {
        if c.len() != x.len() {
            return Err(Error::Usage(format!(
                "add_public: {} constants for {} values",
                c.len(),
                x.len()
            )));
        }
        let mut z = x.shares.clone();
        self.proto.add_public(&mut z, c);
        Ok(Secret::new(z, x.frac))
    }

    pub fn add_public_scalar(&self, x: &Secret<P::Vec>, c: u64) -> Secret<P::Vec> {
        let mut z = x.shares.clone();
        self.proto.add_public(&mut z, &vec![c; x.len()]);
        Secret::new(z, x.frac)
    }

    /// Multiplies by a public integer; the scale is unchanged.
    pub fn mul_public(&self, x: &Secret<P::Vec>, c: u64) -> Secret<P::Vec> {
        let mut z = x.shares.clone();
        z.scale(c);
        Secret::new(z, x.frac)
    }

    /// Multiplies by a public real encoded at the configured scale; the
    /// result carries `f` extra fractional bits.
    pub fn mul_public_fixed(&self, x: &Secret<P::Vec>, c: f64) -> Result<Secret<P::Vec>> {
        let e = encode_fixed(c, &self.cfg.fixed)?;
        let mut z = x.shares.clone();
        z.scale(e.0);
        Ok(Secret::new(z, x.frac + self.f()))
    }

    // ---- multiplications ----

    pub fn mul(&mut self, x: &Secret<P::Vec>, y: &Secret<P::Vec>) -> Result<Secret<P::Vec>> {
        if x.len() != y.len() {
            return Err(Error::Usage(format!(
                "mul: length mismatch ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        Ok(Secret::new(self.proto.mul(&x.shares, &y.shares)?, x.frac + y.frac))
    }

    /// Product of two values at scale `f`, truncated back to scale `f`.
    pub fn mul_fixed(&mut self, x: &Secret<P::Vec>, y: &Secret<P::Vec>) -> Result<Secret<P::Vec>> {
        let z = self.mul(x, y)?;
        self.truncate(&z, y.frac)
    }

    /// Inner products of consecutive length-`len` chunks, untruncated.
    pub fn dot(
        &mut self,
        x: &Secret<P::Vec>,
        y: &Secret<P::Vec>,
        len: usize,
    ) -> Result<Secret<P::Vec>> {
        if x.len() != y.len() || len == 0 || x.len() % len != 0 {
            return Err(Error::Usage(format!(
                "dot: operands of length {} and {} do not split into chunks of {len}",
                x.len(),
                y.len()
            )));
        }
        Ok(Secret::new(
            self.proto.dot(&x.shares, &y.shares, len)?,
            x.frac + y.frac,
        ))
    }

    /// Inner products followed by a single truncation back to `x`'s scale.
    pub fn dot_fixed(
        &mut self,
        x: &Secret<P::Vec>,
        y: &Secret<P::Vec>,
        len: usize,
    ) -> Result<Secret<P::Vec>> {
        let z = self.dot(x, y, len)?;
        self.truncate(&z, y.frac)
    }

    pub fn matmul(
        &mut self,
        x: &Secret<P::Vec>,
        w: &Secret<P::Vec>,
        dims: MatDims,
    ) -> Result<Secret<P::Vec>> {
        Ok(Secret::new(
            self.proto.matmul(&x.shares, &w.shares, dims)?,
            x.frac + w.frac,
        ))
    }

    // ---- truncation ----

    pub fn truncate(&mut self, x: &Secret<P::Vec>, shift: u32) -> Result<Secret<P::Vec>> {
        self.truncate_mode(x, shift, self.cfg.trunc)
    }

    /// Divides by 2^shift, rounding toward −∞ (plus at most one unit in
    /// probabilistic mode). Requires |x| < 2^62.
    pub fn truncate_mode(
        &mut self,
        x: &Secret<P::Vec>,
        shift: u32,
        mode: TruncMode,
    ) -> Result<Secret<P::Vec>> {
        if shift > x.frac {
            return Err(Error::Usage(format!(
                "cannot truncate {shift} bits from a value with {} fractional bits",
                x.frac
            )));
        }
        Ok(Secret::new(self.trunc_raw(&x.shares, shift, mode)?, x.frac - shift))
    }

    fn trunc_raw(&mut self, x: &P::Vec, shift: u32, mode: TruncMode) -> Result<P::Vec> {
        if shift == 0 {
            return Ok(x.clone());
        }
        if shift > TRUNC_INPUT_BITS {
            return Err(Error::Usage(format!("truncation by {shift} bits exceeds 62")));
        }
        let n = x.len();
        let exact = mode == TruncMode::Deterministic;
        let pair = self.proto.take_trunc(n, shift, exact)?;
        // lift into [0, 2^63) so the opened value has a known top bit
        let mut y = x.clone();
        self.proto
            .add_public(&mut y, &vec![pow2(TRUNC_INPUT_BITS); n]);
        y.add_assign(&pair.r);
        let c = self.proto.open(&y)?;

        let low_mask = pow2(63) - 1;
        let mut public = Vec::with_capacity(n);
        let mut msb_coef = Vec::with_capacity(n);
        for &cv in &c {
            let top = cv >> 63;
            public.push(
                ((cv & low_mask) >> shift)
                    .wrapping_add(top.wrapping_mul(pow2(63 - shift)))
                    .wrapping_sub(pow2(TRUNC_INPUT_BITS - shift)),
            );
            msb_coef.push(top.wrapping_mul(pow2(64 - shift)).wrapping_neg());
        }
        let mut res = pair.r_shifted;
        res.neg_assign();
        let mut t = pair.r_msb;
        t.scale_each(&msb_coef);
        res.add_assign(&t);
        self.proto.add_public(&mut res, &public);
        if exact {
            let borrow = self.borrow_chain(&c, &pair.low_bits, shift as usize)?;
            res.sub_assign(&borrow);
        }
        Ok(res)
    }

    /// Shares of `[c mod 2^n < r mod 2^n]` for public `c` and the shared bits
    /// of `r`, by a ripple of `n − 1` multiplications.
    fn borrow_chain(&mut self, c: &[u64], bits: &[P::Vec], nbits: usize) -> Result<P::Vec> {
        let len = c.len();
        if nbits == 0 {
            return Ok(P::Vec::zeros(len));
        }
        let not_c = |i: usize| -> Vec<u64> { c.iter().map(|v| 1 - ((v >> i) & 1)).collect() };
        let mut b = bits[0].clone();
        b.scale_each(&not_c(0));
        for (i, bit) in bits.iter().enumerate().take(nbits).skip(1) {
            let p = self.proto.mul(bit, &b)?;
            // c_i = 1: b' = r_i·b ; c_i = 0: b' = r_i + b − r_i·b
            let mut q = bit.clone();
            q.add_assign(&b);
            q.sub_assign(&p);
            q.sub_assign(&p);
            q.scale_each(&not_c(i));
            b = p;
            b.add_assign(&q);
        }
        Ok(b)
    }

    // ---- comparison ----

    /// Secret bit `[x < 0]` (scale 0). Requires |x| < 2^cmp_bits.
    pub fn ltz(&mut self, x: &Secret<P::Vec>) -> Result<Secret<P::Vec>> {
        Ok(Secret::new(self.ltz_raw(&x.shares)?, 0))
    }

    fn ltz_raw(&mut self, x: &P::Vec) -> Result<P::Vec> {
        let n = x.len();
        let l = self.cfg.cmp_bits;
        let rb = self.proto.take_bits(n, l + 1)?;
        let mut y = x.clone();
        self.proto.add_public(&mut y, &vec![pow2(l); n]);
        y.add_assign(&rb.r);
        let c = self.proto.open(&y)?;
        let borrow = self.borrow_chain(&c, &rb.bits, l as usize)?;
        // t = c_l xor r_l, linear because c_l is public
        let cl: Vec<u64> = c.iter().map(|v| (v >> l) & 1).collect();
        let mut t = rb.bits[l as usize].clone();
        t.scale_each(&cl.iter().map(|b| 1u64.wrapping_sub(2 * b)).collect::<Vec<_>>());
        self.proto.add_public(&mut t, &cl);
        // bit l of x + 2^l, i.e. [x >= 0] = t xor borrow
        let tb = self.proto.mul(&t, &borrow)?;
        let mut ge = t;
        ge.add_assign(&borrow);
        ge.sub_assign(&tb);
        ge.sub_assign(&tb);
        let mut lt = ge;
        lt.neg_assign();
        self.proto.add_public(&mut lt, &vec![1; n]);
        Ok(lt)
    }

    /// max(0, x) as x·(1 − ltz(x)); ReLU(0) = 0.
    pub fn relu(&mut self, x: &Secret<P::Vec>) -> Result<Secret<P::Vec>> {
        let lt = self.ltz_raw(&x.shares)?;
        let mut ge = lt;
        ge.neg_assign();
        self.proto.add_public(&mut ge, &vec![1; x.len()]);
        Ok(Secret::new(self.proto.mul(&x.shares, &ge)?, x.frac))
    }

    // ---- square root ----

    /// √x for 0 ≤ x < 2^m at the configured scale; sqrt(0) = 0.
    ///
    /// The input is normalized by a secret power of two chosen from a
    /// one-hot vector of comparisons, then refined by Newton iterations on
    /// 1/√x̂ over [0.5, 1) and rescaled by the matching public constants.
    pub fn sqrt(&mut self, x: &Secret<P::Vec>) -> Result<Secret<P::Vec>> {
        let f = self.f();
        if x.frac != f {
            return Err(Error::Usage(format!(
                "sqrt expects scale 2^{f}, got 2^{}",
                x.frac
            )));
        }
        let mode = self.cfg.trunc;
        let n = x.len();
        let w = SQRT_WORK_BITS;
        let total_bits = self.cfg.fixed.value_bits();
        if total_bits > self.cfg.cmp_bits {
            return Err(Error::Config(format!(
                "sqrt needs a comparison bound of at least {total_bits} bits"
            )));
        }
        // keep X·S below 2^61
        let (xs, fx, bits) = if total_bits > 31 {
            let drop = total_bits - 31;
            (self.trunc_raw(&x.shares, drop, mode)?, f - drop, 31)
        } else {
            (x.shares.clone(), f, total_bits)
        };
        let l = bits as usize;

        // ge[e][j] = [X_e >= 2^j]
        let idx: Vec<usize> = (0..n).flat_map(|e| std::iter::repeat_n(e, l)).collect();
        let mut big = xs.gather(&idx);
        let offsets: Vec<u64> = (0..n)
            .flat_map(|_| (0..l).map(|j| pow2(j as u32).wrapping_neg()))
            .collect();
        self.proto.add_public(&mut big, &offsets);
        let lt = self.ltz_raw(&big)?;
        let mut ge = lt.clone();
        ge.neg_assign();
        self.proto.add_public(&mut ge, &vec![1; n * l]);

        // one-hot position of the leading bit
        let shifted: Vec<usize> = (0..n)
            .flat_map(|e| (0..l).map(move |j| if j + 1 < l { e * l + j + 1 } else { ZERO_INDEX }))
            .collect();
        let mut h = ge.clone();
        h.sub_assign(&ge.gather(&shifted));

        let gs = 61 - w - self.cfg.fixed.m.div_ceil(2);
        let s_pat: Vec<u64> = (0..n)
            .flat_map(|_| (0..l).map(|j| pow2((l - 1 - j) as u32)))
            .collect();
        let g_consts: Vec<u64> = (0..l)
            .map(|j| {
                let e = (j as f64 + 1.0 - fx as f64) / 2.0 + gs as f64;
                e.exp2().round() as u64
            })
            .collect();
        let g_pat: Vec<u64> = (0..n).flat_map(|_| g_consts.iter().copied()).collect();
        let mut s = h.clone();
        s.scale_each(&s_pat);
        let s = s.sum_groups(l);
        let mut g = h;
        g.scale_each(&g_pat);
        let g = g.sum_groups(l);

        // x̂ = X·S in [2^(l-1), 2^l); zero inputs map to 2^(l-1)
        let mut xhat = self.proto.mul(&xs, &s)?;
        let mut zero = lt.gather(&(0..n).map(|e| e * l).collect::<Vec<_>>());
        zero.scale(pow2(bits - 1));
        xhat.add_assign(&zero);
        let xhat = if bits > w {
            self.trunc_raw(&xhat, bits - w, mode)?
        } else {
            let mut v = xhat;
            v.scale(pow2(w - bits));
            v
        };

        let a = (RSQRT_A * pow2(w) as f64).round() as u64;
        let b = (RSQRT_B * pow2(w) as f64).round() as u64;
        let mut bx = xhat.clone();
        bx.scale(b);
        let mut y = self.trunc_raw(&bx, w, mode)?;
        y.neg_assign();
        self.proto.add_public(&mut y, &vec![a; n]);
        for _ in 0..SQRT_NEWTON_ITERATIONS {
            let yy = self.proto.mul(&y, &y)?;
            let t = self.trunc_raw(&yy, w, mode)?;
            let xt = self.proto.mul(&xhat, &t)?;
            let mut v = self.trunc_raw(&xt, w, mode)?;
            v.neg_assign();
            self.proto.add_public(&mut v, &vec![3 * pow2(w); n]);
            let yv = self.proto.mul(&y, &v)?;
            y = self.trunc_raw(&yv, w + 1, mode)?;
        }
        // √x̂ = x̂·(1/√x̂), then undo the normalization
        let xy = self.proto.mul(&xhat, &y)?;
        let root = self.trunc_raw(&xy, w, mode)?;
        let mut out = self.proto.mul(&root, &g)?;
        let sh = w + gs - f;
        if mode == TruncMode::Deterministic {
            // round to nearest; the probabilistic path already rounds stochastically
            self.proto.add_public(&mut out, &vec![pow2(sh - 1); n]);
        }
        Ok(Secret::new(self.trunc_raw(&out, sh, mode)?, f))
    }
}
