use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::budget::RandomnessBudget;
use super::material::{MaterialKey, MaterialKind, PartyMaterial};
use crate::engine::{EngineConfig, Scheme};
use crate::error::{Error, Result};
use crate::sharing::{next_party, PairSeed};

/// A value split into the scheme's additive components `s_0..s_{n-1}`
/// (two for the additive scheme, three for the replicated one).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SharedValue {
    pub scheme: Scheme,
    pub components: [u64; 3],
}

impl SharedValue {
    pub fn share<R: Rng + ?Sized>(x: u64, scheme: Scheme, rng: &mut R) -> Self {
        let mut c = [0u64; 3];
        let n = scheme.parties();
        let mut acc = 0u64;
        for v in c.iter_mut().take(n - 1) {
            *v = rng.next_u64();
            acc = acc.wrapping_add(*v);
        }
        c[n - 1] = x.wrapping_sub(acc);
        SharedValue {
            scheme,
            components: c,
        }
    }

    pub fn reconstruct(&self) -> u64 {
        self.components[..self.scheme.parties()]
            .iter()
            .fold(0u64, |s, v| s.wrapping_add(*v))
    }

    /// Appends what `party` stores: one component, or two for replicated shares.
    pub fn push_party_view(&self, party: usize, out: &mut Vec<u64>) {
        match self.scheme {
            Scheme::Additive2 => out.push(self.components[party]),
            Scheme::Rss3 => {
                out.push(self.components[party]);
                out.push(self.components[next_party(party)]);
            }
        }
    }
}

/// A Beaver triple: `c = a·b`.
#[derive(Clone, Debug)]
pub struct Triple {
    pub a: SharedValue,
    pub b: SharedValue,
    pub c: SharedValue,
}

/// Mask material for truncation by `shift` bits: `r` uniform on the full
/// ring, `r_shifted = signed(r) >> shift`, `r_msb` the top bit of `r` and,
/// for exact truncation, the low `shift` bits of `r`.
#[derive(Clone, Debug)]
pub struct TruncPair {
    pub r: SharedValue,
    pub r_shifted: SharedValue,
    pub r_msb: SharedValue,
    pub low_bits: Vec<SharedValue>,
}

/// A uniform ring element with shared bits `0..width`; the bits sum to
/// `r mod 2^width`.
#[derive(Clone, Debug)]
pub struct BitDecomposedRandom {
    pub r: SharedValue,
    pub bits: Vec<SharedValue>,
}

fn triple_values<R: Rng + ?Sized>(rng: &mut R, out: &mut Vec<u64>) {
    let a = rng.next_u64();
    let b = rng.next_u64();
    out.extend_from_slice(&[a, b, a.wrapping_mul(b)]);
}

fn trunc_values<R: Rng + ?Sized>(shift: u32, exact: bool, rng: &mut R, out: &mut Vec<u64>) {
    let r = rng.next_u64();
    out.push(r);
    out.push(((r as i64) >> shift) as u64);
    out.push(r >> 63);
    if exact {
        out.extend((0..shift).map(|j| (r >> j) & 1));
    }
}

fn bit_values<R: Rng + ?Sized>(width: u32, rng: &mut R, out: &mut Vec<u64>) {
    let r = rng.next_u64();
    out.push(r);
    out.extend((0..width).map(|j| (r >> j) & 1));
}

fn share_all<R: Rng + ?Sized>(values: &[u64], scheme: Scheme, rng: &mut R) -> Vec<SharedValue> {
    values
        .iter()
        .map(|v| SharedValue::share(*v, scheme, rng))
        .collect()
}

pub fn gen_triples<R: Rng + ?Sized>(n: usize, scheme: Scheme, rng: &mut R) -> Vec<Triple> {
    let mut buf = Vec::with_capacity(3);
    (0..n)
        .map(|_| {
            buf.clear();
            triple_values(rng, &mut buf);
            let s = share_all(&buf, scheme, rng);
            Triple {
                a: s[0],
                b: s[1],
                c: s[2],
            }
        })
        .collect()
}

pub fn gen_trunc_pairs<R: Rng + ?Sized>(
    n: usize,
    shift: u32,
    exact: bool,
    scheme: Scheme,
    rng: &mut R,
) -> Vec<TruncPair> {
    let mut buf = Vec::new();
    (0..n)
        .map(|_| {
            buf.clear();
            trunc_values(shift, exact, rng, &mut buf);
            let s = share_all(&buf, scheme, rng);
            TruncPair {
                r: s[0],
                r_shifted: s[1],
                r_msb: s[2],
                low_bits: s[3..].to_vec(),
            }
        })
        .collect()
}

pub fn gen_bit_randoms<R: Rng + ?Sized>(
    n: usize,
    width: u32,
    scheme: Scheme,
    rng: &mut R,
) -> Vec<BitDecomposedRandom> {
    let mut buf = Vec::new();
    (0..n)
        .map(|_| {
            buf.clear();
            bit_values(width, rng, &mut buf);
            let s = share_all(&buf, scheme, rng);
            BitDecomposedRandom {
                r: s[0],
                bits: s[1..].to_vec(),
            }
        })
        .collect()
}

/// The trusted dealer: turns a budget into per-party material.
pub struct Dealer {
    cfg: EngineConfig,
    rng: ChaCha12Rng,
}

impl Dealer {
    pub fn new(cfg: EngineConfig, seed: u64) -> Self {
        Dealer {
            cfg,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn deal(&mut self, budget: &RandomnessBudget) -> Result<Vec<PartyMaterial>> {
        let scheme = self.cfg.scheme;
        let n = scheme.parties();
        let hash = self.cfg.config_hash();
        let run_id = self.rng.next_u64();
        let mut parties: Vec<PartyMaterial> = (0..n)
            .map(|p| PartyMaterial::new(scheme, p, hash, run_id))
            .collect();

        // seed i is shared by parties i and i+1 (mod n)
        let pairs = if n == 2 { 1 } else { n };
        for i in 0..pairs {
            let seed = PairSeed::random(&mut self.rng);
            let j = (i + 1) % n;
            parties[i].seeds[j] = Some(seed);
            parties[j].seeds[i] = Some(seed);
        }

        let mut values = Vec::new();
        for (key, count) in budget.iter() {
            let count = count as usize;
            let re = key.record_elems(scheme);
            let mut bufs: Vec<Vec<u64>> = (0..n).map(|_| Vec::with_capacity(count * re)).collect();
            for _ in 0..count {
                values.clear();
                match key.kind {
                    MaterialKind::Triple => triple_values(&mut self.rng, &mut values),
                    MaterialKind::TruncProb => {
                        trunc_values(key.param as u32, false, &mut self.rng, &mut values)
                    }
                    MaterialKind::TruncExact => {
                        trunc_values(key.param as u32, true, &mut self.rng, &mut values)
                    }
                    MaterialKind::BitRandom => {
                        bit_values(key.param as u32, &mut self.rng, &mut values)
                    }
                    MaterialKind::Seeds => {
                        return Err(Error::Usage("seeds are not a countable material".into()))
                    }
                }
                for v in &values {
                    let s = SharedValue::share(*v, scheme, &mut self.rng);
                    for (p, buf) in bufs.iter_mut().enumerate() {
                        s.push_party_view(p, buf);
                    }
                }
            }
            for (m, buf) in parties.iter_mut().zip(bufs) {
                m.pool_mut(key).data = buf;
            }
        }
        Ok(parties)
    }
}

/// Reassembles the secret behind one record field from all parties' pools.
pub fn reconstruct_field(
    parties: &[PartyMaterial],
    key: MaterialKey,
    record: usize,
    field: usize,
) -> Option<u64> {
    let scheme = parties.first()?.scheme;
    let re = key.record_elems(scheme);
    let mut total = 0u64;
    // the first component held by party p is s_p under both schemes
    for m in parties {
        let data = &m.pool(&key)?.data;
        let base = record * re + field * scheme.components();
        total = total.wrapping_add(*data.get(base)?);
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring_fixed::FixedPointConfig;
    use crate::engine::TruncMode;

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(11)
    }

    #[test]
    fn triples_satisfy_product_identity() {
        for scheme in [Scheme::Additive2, Scheme::Rss3] {
            let t = gen_triples(10_000, scheme, &mut rng());
            assert_eq!(t.len(), 10_000);
            assert!(t
                .iter()
                .all(|t| t.a.reconstruct().wrapping_mul(t.b.reconstruct()) == t.c.reconstruct()));
            assert!(gen_triples(0, scheme, &mut rng()).is_empty());
        }
    }

    #[test]
    fn trunc_pairs_satisfy_shift_identity() {
        for shift in [0u32, 1, 15, 30, 62] {
            let pairs = gen_trunc_pairs(1000, shift, true, Scheme::Rss3, &mut rng());
            for p in &pairs {
                let r = p.r.reconstruct();
                assert_eq!(p.r_shifted.reconstruct(), ((r as i64) >> shift) as u64);
                assert_eq!(p.r_msb.reconstruct(), r >> 63);
                let low: u64 = p
                    .low_bits
                    .iter()
                    .enumerate()
                    .map(|(j, b)| b.reconstruct() << j)
                    .sum();
                assert_eq!(low, r & ((1u64 << shift) - 1));
                if shift == 0 {
                    assert_eq!(p.r_shifted.reconstruct(), r);
                }
            }
        }
    }

    #[test]
    fn trunc_masks_are_uniform() {
        let pairs = gen_trunc_pairs(1000, 15, false, Scheme::Additive2, &mut rng());
        let mut counts = [0f64; 16];
        for p in &pairs {
            counts[(p.r.reconstruct() >> 60) as usize] += 1.0;
        }
        let e = 1000.0 / 16.0;
        let chi2: f64 = counts.iter().map(|c| (c - e) * (c - e) / e).sum();
        // 15 degrees of freedom, p = 0.001 critical value
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn bit_randoms_decompose() {
        for scheme in [Scheme::Additive2, Scheme::Rss3] {
            for width in [33u32, 64] {
                for b in gen_bit_randoms(500, width, scheme, &mut rng()) {
                    let bits: Vec<u64> = b.bits.iter().map(|s| s.reconstruct()).collect();
                    assert!(bits.iter().all(|&x| x <= 1));
                    let sum = bits
                        .iter()
                        .enumerate()
                        .fold(0u64, |s, (j, x)| s.wrapping_add(x << j));
                    let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
                    assert_eq!(sum, b.r.reconstruct() & mask);
                }
            }
        }
    }

    #[test]
    fn dealt_parties_hold_consistent_views() {
        let cfg = EngineConfig::new(Scheme::Rss3, FixedPointConfig::default(), TruncMode::Probabilistic);
        let mut budget = RandomnessBudget::default();
        budget.add(MaterialKey::bits(5), 20);
        let parties = Dealer::new(cfg, 5).deal(&budget).unwrap();
        let key = MaterialKey::bits(5);
        for rec in 0..20 {
            // overlapping components agree: party p's second = party p+1's first
            for p in 0..3 {
                let a = &parties[p].pool(&key).unwrap().data;
                let b = &parties[(p + 1) % 3].pool(&key).unwrap().data;
                for f in 0..6 {
                    assert_eq!(a[rec * 12 + 2 * f + 1], b[rec * 12 + 2 * f]);
                }
            }
            let r = reconstruct_field(&parties, key, rec, 0).unwrap();
            for j in 0..5 {
                assert_eq!(reconstruct_field(&parties, key, rec, 1 + j).unwrap(), (r >> j) & 1);
            }
        }
        assert_eq!(parties[0].seeds[1], parties[1].seeds[0]);
        assert_eq!(parties[2].seeds[0], parties[0].seeds[2]);
        assert!(parties[0].seeds[0].is_none());
    }

    #[test]
    fn same_seed_same_material() {
        let cfg = EngineConfig::new(Scheme::Additive2, FixedPointConfig::default(), TruncMode::Deterministic);
        let mut budget = RandomnessBudget::default();
        budget.add(MaterialKey::TRIPLE, 50);
        budget.add(MaterialKey::trunc(15, true), 10);
        let a = Dealer::new(cfg, 9).deal(&budget).unwrap();
        let b = Dealer::new(cfg, 9).deal(&budget).unwrap();
        let c = Dealer::new(cfg, 10).deal(&budget).unwrap();
        for p in 0..2 {
            assert_eq!(a[p].pool(&MaterialKey::TRIPLE), b[p].pool(&MaterialKey::TRIPLE));
            assert_ne!(a[p].pool(&MaterialKey::TRIPLE), c[p].pool(&MaterialKey::TRIPLE));
        }
    }
}
