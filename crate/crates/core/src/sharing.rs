//! Additive and 3-party replicated secret sharing over Z_2^64.
//!
//! Replicated layout (0-based party ids): party `i` holds components
//! `(s_i, s_{i+1 mod 3})`, so the component `s_j` is held by parties `j`
//! and `j - 1`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring_fixed::RingElement;

/// Number of parties in the replicated scheme.
pub const RSS_PARTIES: usize = 3;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdditiveShare {
    pub party_id: usize,
    pub value: RingElement,
}

/// `pair.0` is `s_i`, `pair.1` is `s_{i+1}` for `party_id == i`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicatedShare {
    pub party_id: usize,
    pub pair: (RingElement, RingElement),
}

impl ReplicatedShare {
    pub fn add(&self, other: &ReplicatedShare) -> ReplicatedShare {
        debug_assert_eq!(self.party_id, other.party_id);
        ReplicatedShare {
            party_id: self.party_id,
            pair: (self.pair.0 + other.pair.0, self.pair.1 + other.pair.1),
        }
    }

    /// Local part of the product: `x_i y_i + x_i y_{i+1} + x_{i+1} y_i`.
    pub fn local_product(&self, other: &ReplicatedShare) -> RingElement {
        let (x0, x1) = self.pair;
        let (y0, y1) = other.pair;
        x0 * y0 + x0 * y1 + x1 * y0
    }
}

pub fn next_party(i: usize) -> usize {
    (i + 1) % RSS_PARTIES
}

pub fn prev_party(i: usize) -> usize {
    (i + RSS_PARTIES - 1) % RSS_PARTIES
}

/// Splits `x` into `n` additive shares; the first `n - 1` are uniform.
pub fn share_additive<R: Rng + ?Sized>(
    x: RingElement,
    n: usize,
    rng: &mut R,
) -> Result<Vec<AdditiveShare>> {
    if n < 2 {
        return Err(Error::Config(format!("additive sharing needs n >= 2, got {n}")));
    }
    let randoms: Vec<RingElement> = (0..n - 1).map(|_| RingElement(rng.gen())).collect();
    Ok(share_additive_with(x, &randoms))
}

/// Deterministic variant: `randoms` are the first `n - 1` shares.
pub fn share_additive_with(x: RingElement, randoms: &[RingElement]) -> Vec<AdditiveShare> {
    let last = x - randoms.iter().copied().sum::<RingElement>();
    randoms
        .iter()
        .copied()
        .chain(std::iter::once(last))
        .enumerate()
        .map(|(party_id, value)| AdditiveShare { party_id, value })
        .collect()
}

pub fn reconstruct_additive(shares: &[AdditiveShare]) -> Result<RingElement> {
    let n = shares.len();
    let mut seen = vec![false; n];
    for s in shares {
        if s.party_id >= n || seen[s.party_id] {
            return Err(Error::Protocol(format!(
                "additive reconstruction needs one share per party 0..{n}, bad party id {}",
                s.party_id
            )));
        }
        seen[s.party_id] = true;
    }
    Ok(shares.iter().map(|s| s.value).sum())
}

pub fn share_replicated<R: Rng + ?Sized>(x: RingElement, rng: &mut R) -> [ReplicatedShare; 3] {
    let s0 = RingElement(rng.gen());
    let s1 = RingElement(rng.gen());
    share_replicated_with(x, s0, s1)
}

/// Deterministic variant with the first two components fixed.
pub fn share_replicated_with(
    x: RingElement,
    s0: RingElement,
    s1: RingElement,
) -> [ReplicatedShare; 3] {
    let s2 = x - s0 - s1;
    let comps = [s0, s1, s2];
    std::array::from_fn(|i| ReplicatedShare {
        party_id: i,
        pair: (comps[i], comps[next_party(i)]),
    })
}

/// Reconstructs from any two or more parties, checking that overlapping
/// components agree.
pub fn reconstruct_replicated(shares: &[ReplicatedShare]) -> Result<RingElement> {
    let mut comps: [Option<RingElement>; 3] = [None; 3];
    for s in shares {
        if s.party_id >= RSS_PARTIES {
            return Err(Error::Protocol(format!("bad party id {}", s.party_id)));
        }
        for (slot, value) in [(s.party_id, s.pair.0), (next_party(s.party_id), s.pair.1)] {
            match comps[slot] {
                Some(prev) if prev != value => {
                    return Err(Error::Integrity(format!(
                        "component s{slot} differs between holders"
                    )))
                }
                _ => comps[slot] = Some(value),
            }
        }
    }
    let mut total = RingElement::ZERO;
    for (i, c) in comps.iter().enumerate() {
        match c {
            Some(v) => total += *v,
            None => {
                return Err(Error::Protocol(format!(
                    "component s{i} missing; need shares from at least two parties"
                )))
            }
        }
    }
    Ok(total)
}

/// A 32-byte seed known to exactly two parties.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSeed(pub [u8; 32]);

impl PairSeed {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut b = [0u8; 32];
        rng.fill_bytes(&mut b);
        PairSeed(b)
    }
}

/// Pairwise correlated randomness held by one party: one deterministic
/// stream per peer, identical to the peer's stream for this party.
pub struct SecretRng {
    party: usize,
    streams: Vec<Option<ChaCha12Rng>>,
}

impl SecretRng {
    /// `seeds[j]` is the seed shared with party `j` (`None` for self or
    /// peers without a shared seed).
    pub fn new(party: usize, seeds: &[Option<PairSeed>]) -> Self {
        let streams = seeds
            .iter()
            .map(|s| s.map(|s| ChaCha12Rng::from_seed(s.0)))
            .collect();
        SecretRng { party, streams }
    }

    pub fn party(&self) -> usize {
        self.party
    }

    fn stream(&mut self, peer: usize) -> &mut ChaCha12Rng {
        self.streams
            .get_mut(peer)
            .and_then(|s| s.as_mut())
            .unwrap_or_else(|| panic!("party {} has no seed shared with {peer}", self.party))
    }

    pub fn has_peer(&self, peer: usize) -> bool {
        matches!(self.streams.get(peer), Some(Some(_)))
    }

    /// Next value of the stream shared with `peer`.
    pub fn shared_with(&mut self, peer: usize) -> u64 {
        self.stream(peer).next_u64()
    }

    pub fn fill_shared_with(&mut self, peer: usize, out: &mut [u64]) {
        let s = self.stream(peer);
        for v in out.iter_mut() {
            *v = s.next_u64();
        }
    }

    /// Zero-share for the replicated scheme: the three parties' values sum to 0.
    pub fn zero_share(&mut self) -> RingElement {
        let next = self.shared_with(next_party(self.party));
        let prev = self.shared_with(prev_party(self.party));
        RingElement(next.wrapping_sub(prev))
    }

    /// Adds a fresh zero-share to every entry of `out`.
    pub fn add_zero_shares(&mut self, out: &mut [u64]) {
        let (n, p) = (next_party(self.party), prev_party(self.party));
        let mut buf = vec![0u64; out.len()];
        self.fill_shared_with(n, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = o.wrapping_add(*b);
        }
        self.fill_shared_with(p, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = o.wrapping_sub(*b);
        }
    }
}

/// Builds the three parties' [`SecretRng`]s from one seed per unordered pair.
pub fn rss_secret_rngs(seeds: [PairSeed; 3]) -> [SecretRng; 3] {
    // seeds[i] is shared between i and i+1
    std::array::from_fn(|i| {
        let mut per_peer = vec![None; RSS_PARTIES];
        per_peer[next_party(i)] = Some(seeds[i]);
        per_peer[prev_party(i)] = Some(seeds[prev_party(i)]);
        SecretRng::new(i, &per_peer)
    })
}

/// One party's step of re-sharing: re-randomizes its product partial. The
/// result is sent to the previous party, which stores it as its second
/// component.
pub fn reshare_local(partial: RingElement, rng: &mut SecretRng) -> RingElement {
    partial + rng.zero_share()
}

/// Runs re-sharing for all three parties at once.
pub fn reshare_rss(partials: [RingElement; 3], rngs: &mut [SecretRng; 3]) -> [ReplicatedShare; 3] {
    let fresh: [RingElement; 3] = std::array::from_fn(|i| reshare_local(partials[i], &mut rngs[i]));
    std::array::from_fn(|i| ReplicatedShare {
        party_id: i,
        pair: (fresh[i], fresh[next_party(i)]),
    })
}

/// Little-endian 8-byte encoding of ring elements.
pub fn encode_elements(values: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_elements(bytes: &[u8]) -> Result<Vec<u64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Protocol(format!(
            "element payload length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
