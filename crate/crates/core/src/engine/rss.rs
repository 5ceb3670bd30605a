//! Three-party replicated sharing: party `i` holds components `(s_i, s_{i+1})`.

use std::ops::Range;

use sha2::{Digest, Sha256};

use super::protocol::{BitBatch, MatDims, Protocol, ShareVec, TruncBatch, ZERO_INDEX};
use super::Scheme;
use crate::error::{Error, Result};
use crate::preprocessing::{MaterialKey, PartyMaterial};
use crate::sharing::{next_party, prev_party, SecretRng, RSS_PARTIES};
use crate::transport::{MessageKind, Session};

/// One party's replicated shares: `cur[i] = s_p`, `next[i] = s_{p+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RssVec {
    pub cur: Vec<u64>,
    pub next: Vec<u64>,
}

impl ShareVec for RssVec {
    fn zeros(n: usize) -> Self {
        RssVec {
            cur: vec![0; n],
            next: vec![0; n],
        }
    }

    fn len(&self) -> usize {
        self.cur.len()
    }

    fn add_assign(&mut self, o: &Self) {
        assert_eq!(self.len(), o.len(), "share length mismatch");
        for (a, b) in self.cur.iter_mut().zip(&o.cur) {
            *a = a.wrapping_add(*b);
        }
        for (a, b) in self.next.iter_mut().zip(&o.next) {
            *a = a.wrapping_add(*b);
        }
    }

    fn sub_assign(&mut self, o: &Self) {
        assert_eq!(self.len(), o.len(), "share length mismatch");
        for (a, b) in self.cur.iter_mut().zip(&o.cur) {
            *a = a.wrapping_sub(*b);
        }
        for (a, b) in self.next.iter_mut().zip(&o.next) {
            *a = a.wrapping_sub(*b);
        }
    }

    fn scale(&mut self, c: u64) {
        for a in self.cur.iter_mut().chain(self.next.iter_mut()) {
            *a = a.wrapping_mul(c);
        }
    }

    fn scale_each(&mut self, c: &[u64]) {
        assert_eq!(self.len(), c.len(), "constant length mismatch");
        for (a, c) in self.cur.iter_mut().zip(c) {
            *a = a.wrapping_mul(*c);
        }
        for (a, c) in self.next.iter_mut().zip(c) {
            *a = a.wrapping_mul(*c);
        }
    }

    fn gather(&self, idx: &[usize]) -> Self {
        let pick = |v: &Vec<u64>| -> Vec<u64> {
            idx.iter()
                .map(|&i| if i == ZERO_INDEX { 0 } else { v[i] })
                .collect()
        };
        RssVec {
            cur: pick(&self.cur),
            next: pick(&self.next),
        }
    }

    fn slice(&self, range: Range<usize>) -> Self {
        RssVec {
            cur: self.cur[range.clone()].to_vec(),
            next: self.next[range].to_vec(),
        }
    }

    fn concat(parts: &[&Self]) -> Self {
        RssVec {
            cur: parts.iter().flat_map(|p| p.cur.iter().copied()).collect(),
            next: parts.iter().flat_map(|p| p.next.iter().copied()).collect(),
        }
    }

    fn sum_groups(&self, group: usize) -> Self {
        assert!(group > 0 && self.len().is_multiple_of(group), "bad group size");
        let sum = |v: &Vec<u64>| -> Vec<u64> {
            v.chunks_exact(group)
                .map(|c| c.iter().fold(0u64, |s, x| s.wrapping_add(*x)))
                .collect()
        };
        RssVec {
            cur: sum(&self.cur),
            next: sum(&self.next),
        }
    }
}

fn rss_field(data: &[u64], rec: usize, n: usize, f: usize) -> RssVec {
    RssVec {
        cur: (0..n).map(|i| data[i * rec + 2 * f]).collect(),
        next: (0..n).map(|i| data[i * rec + 2 * f + 1]).collect(),
    }
}

fn digest(values: &[u64]) -> Vec<u8> {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().to_vec()
}

/// Local part of a product: `x_c·y_c + x_c·y_n + x_n·y_c`.
#[inline]
fn local_mul(xc: u64, xn: u64, yc: u64, yn: u64) -> u64 {
    xc.wrapping_mul(yc)
        .wrapping_add(xc.wrapping_mul(yn))
        .wrapping_add(xn.wrapping_mul(yc))
}

/// Party `0`, `1` or `2` of the replicated backend.
pub struct RssProtocol {
    party: usize,
    session: Session,
    material: PartyMaterial,
    rng: SecretRng,
    verify_openings: bool,
}

impl RssProtocol {
    pub fn new(session: Session, material: PartyMaterial, verify_openings: bool) -> Result<Self> {
        let party = session.party();
        if session.parties() != RSS_PARTIES
            || material.scheme != Scheme::Rss3
            || material.party != party
        {
            return Err(Error::Config(
                "replicated backend needs a 3-party session and matching material".into(),
            ));
        }
        let rng = SecretRng::new(party, &material.seeds);
        if !rng.has_peer(next_party(party)) || !rng.has_peer(prev_party(party)) {
            return Err(Error::Config("missing pairwise seed".into()));
        }
        Ok(RssProtocol {
            party,
            session,
            material,
            rng,
            verify_openings,
        })
    }

    pub fn material(&self) -> &PartyMaterial {
        &self.material
    }

    pub fn into_parts(self) -> (Session, PartyMaterial) {
        (self.session, self.material)
    }

    fn next(&self) -> usize {
        next_party(self.party)
    }

    fn prev(&self) -> usize {
        prev_party(self.party)
    }

    /// Re-randomizes local partials and passes them backwards; one round,
    /// one element per output per party.
    fn reshare(&mut self, mut z: Vec<u64>) -> Result<RssVec> {
        self.rng.add_zero_shares(&mut z);
        let (prev, next) = (self.prev(), self.next());
        self.session.send_elements(prev, &z)?;
        let other = self.session.recv_elements(next)?;
        self.session.end_round();
        if other.len() != z.len() {
            return Err(Error::Protocol("reshare length mismatch".into()));
        }
        Ok(RssVec { cur: z, next: other })
    }
}

impl Protocol for RssProtocol {
    type Vec = RssVec;

    fn scheme(&self) -> Scheme {
        Scheme::Rss3
    }

    fn party(&self) -> usize {
        self.party
    }

    fn add_public(&self, x: &mut RssVec, c: &[u64]) {
        assert_eq!(x.len(), c.len(), "constant length mismatch");
        // the constant becomes part of component s_0
        let target = match self.party {
            0 => &mut x.cur,
            2 => &mut x.next,
            _ => return,
        };
        for (a, c) in target.iter_mut().zip(c) {
            *a = a.wrapping_add(*c);
        }
    }

    fn input(&mut self, owner: usize, values: Option<&[u64]>, n: usize) -> Result<RssVec> {
        if owner >= RSS_PARTIES {
            return Err(Error::Usage(format!("no party {owner} in a 3-party session")));
        }
        let me = self.party;
        if me == owner {
            let v = values.ok_or_else(|| Error::Usage("input owner must supply values".into()))?;
            if v.len() != n {
                return Err(Error::Shape(format!("expected {n} input values, got {}", v.len())));
            }
            let mut cur = vec![0u64; n];
            let mut next = vec![0u64; n];
            self.rng.fill_shared_with(self.prev(), &mut cur);
            self.rng.fill_shared_with(self.next(), &mut next);
            let last: Vec<u64> = (0..n)
                .map(|i| v[i].wrapping_sub(cur[i]).wrapping_sub(next[i]))
                .collect();
            let (p, q) = (self.next(), self.prev());
            self.session.send_elements(p, &last)?;
            self.session.send_elements(q, &last)?;
            self.session.end_round();
            Ok(RssVec { cur, next })
        } else {
            let mut seeded = vec![0u64; n];
            self.rng.fill_shared_with(owner, &mut seeded);
            let last = self.session.recv_elements(owner)?;
            self.session.end_round();
            if last.len() != n {
                return Err(Error::Protocol("input share length mismatch".into()));
            }
            if me == next_party(owner) {
                Ok(RssVec {
                    cur: seeded,
                    next: last,
                })
            } else {
                Ok(RssVec {
                    cur: last,
                    next: seeded,
                })
            }
        }
    }

    fn open(&mut self, x: &RssVec) -> Result<Vec<u64>> {
        let (prev, next) = (self.prev(), self.next());
        self.session.send_elements(next, &x.cur)?;
        if self.verify_openings {
            self.session
                .send_frame(prev, MessageKind::Digest, digest(&x.next))?;
        }
        let missing = self.session.recv_elements(prev)?;
        if missing.len() != x.len() {
            return Err(Error::Protocol("opening length mismatch".into()));
        }
        if self.verify_openings {
            let d = self.session.recv_frame(next, MessageKind::Digest)?;
            if d != digest(&missing) {
                return Err(Error::Integrity(format!(
                    "party {} saw inconsistent replicated shares from {prev} and {next}",
                    self.party
                )));
            }
        }
        self.session.end_round();
        Ok((0..x.len())
            .map(|i| x.cur[i].wrapping_add(x.next[i]).wrapping_add(missing[i]))
            .collect())
    }

    fn open_to(&mut self, x: &RssVec, recipient: usize) -> Result<Option<Vec<u64>>> {
        let out = if self.party == recipient {
            let missing = self.session.recv_elements(self.prev())?;
            if missing.len() != x.len() {
                return Err(Error::Protocol("opening length mismatch".into()));
            }
            Some(
                (0..x.len())
                    .map(|i| x.cur[i].wrapping_add(x.next[i]).wrapping_add(missing[i]))
                    .collect(),
            )
        } else {
            if self.party == prev_party(recipient) {
                self.session.send_elements(recipient, &x.cur)?;
            }
            None
        };
        self.session.end_round();
        Ok(out)
    }

    fn mul(&mut self, x: &RssVec, y: &RssVec) -> Result<RssVec> {
        if x.len() != y.len() {
            return Err(Error::Usage(format!("mul length mismatch: {} vs {}", x.len(), y.len())));
        }
        let z = (0..x.len())
            .map(|i| local_mul(x.cur[i], x.next[i], y.cur[i], y.next[i]))
            .collect();
        self.reshare(z)
    }

    fn dot(&mut self, x: &RssVec, y: &RssVec, len: usize) -> Result<RssVec> {
        if x.len() != y.len() || len == 0 || !x.len().is_multiple_of(len) {
            return Err(Error::Usage(format!(
                "dot operands {} and {} do not split into length {len}",
                x.len(),
                y.len()
            )));
        }
        let z = (0..x.len() / len)
            .map(|g| {
                (g * len..(g + 1) * len).fold(0u64, |s, i| {
                    s.wrapping_add(local_mul(x.cur[i], x.next[i], y.cur[i], y.next[i]))
                })
            })
            .collect();
        self.reshare(z)
    }

    fn matmul(&mut self, x: &RssVec, w: &RssVec, d: MatDims) -> Result<RssVec> {
        if x.len() != d.rows * d.inner || w.len() != d.cols * d.inner {
            return Err(Error::Shape(format!("matmul operands do not match {d:?}")));
        }
        let z = local_matmul(x, w, d);
        self.reshare(z)
    }

    fn take_trunc(&mut self, n: usize, shift: u32, exact: bool) -> Result<TruncBatch<RssVec>> {
        let key = MaterialKey::trunc(shift, exact);
        let rec = key.record_elems(Scheme::Rss3);
        let data = self.material.take(key, n)?;
        let low = if exact { shift as usize } else { 0 };
        Ok(TruncBatch {
            r: rss_field(data, rec, n, 0),
            r_shifted: rss_field(data, rec, n, 1),
            r_msb: rss_field(data, rec, n, 2),
            low_bits: (0..low).map(|j| rss_field(data, rec, n, 3 + j)).collect(),
        })
    }

    fn take_bits(&mut self, n: usize, width: u32) -> Result<BitBatch<RssVec>> {
        let key = MaterialKey::bits(width);
        let rec = key.record_elems(Scheme::Rss3);
        let data = self.material.take(key, n)?;
        Ok(BitBatch {
            r: rss_field(data, rec, n, 0),
            bits: (0..width as usize)
                .map(|j| rss_field(data, rec, n, 1 + j))
                .collect(),
        })
    }

    fn export_shares(&self, x: &RssVec) -> Vec<Vec<u64>> {
        (0..x.len()).map(|i| vec![x.cur[i], x.next[i]]).collect()
    }

    fn session(&self) -> Option<&Session> {
        Some(&self.session)
    }
}

/// Local partials of `X · Wᵀ`: `X_c (W_c + W_n)ᵀ + X_n W_cᵀ`, four rows at a time.
fn local_matmul(x: &RssVec, w: &RssVec, d: MatDims) -> Vec<u64> {
    let k = d.inner;
    let wsum: Vec<u64> = w
        .cur
        .iter()
        .zip(&w.next)
        .map(|(a, b)| a.wrapping_add(*b))
        .collect();
    let mut z = vec![0u64; d.rows * d.cols];
    let mut r = 0;
    while r < d.rows {
        let block = (d.rows - r).min(4);
        for c in 0..d.cols {
            let ws = &wsum[c * k..(c + 1) * k];
            let wc = &w.cur[c * k..(c + 1) * k];
            let mut acc = [0u64; 4];
            for (b, a) in acc.iter_mut().enumerate().take(block) {
                let xc = &x.cur[(r + b) * k..(r + b + 1) * k];
                let xn = &x.next[(r + b) * k..(r + b + 1) * k];
                let mut s = 0u64;
                for j in 0..k {
                    s = s
                        .wrapping_add(xc[j].wrapping_mul(ws[j]))
                        .wrapping_add(xn[j].wrapping_mul(wc[j]));
                }
                *a = s;
            }
            for b in 0..block {
                z[(r + b) * d.cols + c] = acc[b];
            }
        }
        r += block;
    }
    z
}
