//! Two-party additive sharing with Beaver-triple multiplication.

use std::ops::Range;

use super::protocol::{BitBatch, MatDims, Protocol, ShareVec, TruncBatch, ZERO_INDEX};
use super::Scheme;
use crate::error::{Error, Result};
use crate::preprocessing::{MaterialKey, PartyMaterial};
use crate::sharing::SecretRng;
use crate::transport::Session;

/// One party's additive shares of a vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddVec(pub Vec<u64>);

impl ShareVec for AddVec {
    fn zeros(n: usize) -> Self {
        AddVec(vec![0; n])
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.0.len(), other.0.len(), "share length mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = a.wrapping_add(*b);
        }
    }

    fn sub_assign(&mut self, other: &Self) {
        assert_eq!(self.0.len(), other.0.len(), "share length mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a = a.wrapping_sub(*b);
        }
    }

    fn scale(&mut self, c: u64) {
        for a in &mut self.0 {
            *a = a.wrapping_mul(c);
        }
    }

    fn scale_each(&mut self, c: &[u64]) {
        assert_eq!(self.0.len(), c.len(), "constant length mismatch");
        for (a, c) in self.0.iter_mut().zip(c) {
            *a = a.wrapping_mul(*c);
        }
    }

    fn gather(&self, idx: &[usize]) -> Self {
        AddVec(
            idx.iter()
                .map(|&i| if i == ZERO_INDEX { 0 } else { self.0[i] })
                .collect(),
        )
    }

    fn slice(&self, range: Range<usize>) -> Self {
        AddVec(self.0[range].to_vec())
    }

    fn concat(parts: &[&Self]) -> Self {
        AddVec(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    fn sum_groups(&self, group: usize) -> Self {
        assert!(group > 0 && self.0.len().is_multiple_of(group), "bad group size");
        AddVec(
            self.0
                .chunks_exact(group)
                .map(|c| c.iter().fold(0u64, |s, v| s.wrapping_add(*v)))
                .collect(),
        )
    }
}

/// Party `i`'s share of `x·y` from the opened `e = x − a`, `f = y − b`:
/// `z_i = i·e·f + f·a_i + e·b_i + c_i`, with party ids 0 and 1.
pub fn beaver_share(party: u64, e: u64, f: u64, a: u64, b: u64, c: u64) -> u64 {
    party
        .wrapping_mul(e.wrapping_mul(f))
        .wrapping_add(f.wrapping_mul(a))
        .wrapping_add(e.wrapping_mul(b))
        .wrapping_add(c)
}

pub(crate) fn field(data: &[u64], rec: usize, n: usize, f: usize) -> Vec<u64> {
    (0..n).map(|i| data[i * rec + f]).collect()
}

/// Party `0` or `1` of the additive backend.
pub struct AdditiveProtocol {
    party: usize,
    session: Session,
    material: PartyMaterial,
    rng: SecretRng,
}

impl AdditiveProtocol {
    pub fn new(session: Session, material: PartyMaterial) -> Result<Self> {
        let party = session.party();
        if session.parties() != 2 || material.scheme != Scheme::Additive2 || material.party != party
        {
            return Err(Error::Config(
                "additive backend needs a 2-party session and matching material".into(),
            ));
        }
        let rng = SecretRng::new(party, &material.seeds);
        if !rng.has_peer(1 - party) {
            return Err(Error::Config("missing pairwise seed".into()));
        }
        Ok(AdditiveProtocol {
            party,
            session,
            material,
            rng,
        })
    }

    pub fn material(&self) -> &PartyMaterial {
        &self.material
    }

    pub fn into_parts(self) -> (Session, PartyMaterial) {
        (self.session, self.material)
    }

    fn other(&self) -> usize {
        1 - self.party
    }

    fn exchange(&mut self, mine: &[u64]) -> Result<Vec<u64>> {
        let other = self.other();
        self.session.send_elements(other, mine)?;
        let theirs = self.session.recv_elements(other)?;
        self.session.end_round();
        if theirs.len() != mine.len() {
            return Err(Error::Protocol(format!(
                "expected {} elements from party {other}, got {}",
                mine.len(),
                theirs.len()
            )));
        }
        Ok(theirs)
    }

    /// Beaver multiplication over flat vectors; one round.
    fn beaver(&mut self, x: &[u64], y: &[u64]) -> Result<Vec<u64>> {
        let n = x.len();
        if y.len() != n {
            return Err(Error::Usage(format!("mul length mismatch: {n} vs {}", y.len())));
        }
        let t = self.material.take(MaterialKey::TRIPLE, n)?;
        let mut mine = Vec::with_capacity(2 * n);
        for i in 0..n {
            mine.push(x[i].wrapping_sub(t[3 * i]));
        }
        for i in 0..n {
            mine.push(y[i].wrapping_sub(t[3 * i + 1]));
        }
        let abc: Vec<[u64; 3]> = t.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let theirs = self.exchange(&mine)?;
        let me = self.party as u64;
        Ok((0..n)
            .map(|i| {
                let e = mine[i].wrapping_add(theirs[i]);
                let f = mine[n + i].wrapping_add(theirs[n + i]);
                let [a, b, c] = abc[i];
                beaver_share(me, e, f, a, b, c)
            })
            .collect())
    }
}

impl Protocol for AdditiveProtocol {
    type Vec = AddVec;

    fn scheme(&self) -> Scheme {
        Scheme::Additive2
    }

    fn party(&self) -> usize {
        self.party
    }

    fn add_public(&self, x: &mut AddVec, c: &[u64]) {
        assert_eq!(x.0.len(), c.len(), "constant length mismatch");
        if self.party == 0 {
            for (a, c) in x.0.iter_mut().zip(c) {
                *a = a.wrapping_add(*c);
            }
        }
    }

    fn input(&mut self, owner: usize, values: Option<&[u64]>, n: usize) -> Result<AddVec> {
        if owner > 1 {
            return Err(Error::Usage(format!("no party {owner} in a 2-party session")));
        }
        let other = self.other();
        let mut mask = vec![0u64; n];
        self.rng.fill_shared_with(other, &mut mask);
        if self.party == owner {
            let v = values.ok_or_else(|| Error::Usage("input owner must supply values".into()))?;
            if v.len() != n {
                return Err(Error::Shape(format!("expected {n} input values, got {}", v.len())));
            }
            Ok(AddVec(v.iter().zip(&mask).map(|(x, r)| x.wrapping_sub(*r)).collect()))
        } else {
            Ok(AddVec(mask))
        }
    }

    fn open(&mut self, x: &AddVec) -> Result<Vec<u64>> {
        let theirs = self.exchange(&x.0)?;
        Ok(x.0.iter().zip(&theirs).map(|(a, b)| a.wrapping_add(*b)).collect())
    }

    fn open_to(&mut self, x: &AddVec, recipient: usize) -> Result<Option<Vec<u64>>> {
        let other = self.other();
        let out = if self.party == recipient {
            let theirs = self.session.recv_elements(other)?;
            if theirs.len() != x.0.len() {
                return Err(Error::Protocol("opening length mismatch".into()));
            }
            Some(x.0.iter().zip(&theirs).map(|(a, b)| a.wrapping_add(*b)).collect())
        } else {
            self.session.send_elements(other, &x.0)?;
            None
        };
        self.session.end_round();
        Ok(out)
    }

    fn mul(&mut self, x: &AddVec, y: &AddVec) -> Result<AddVec> {
        Ok(AddVec(self.beaver(&x.0, &y.0)?))
    }

    fn dot(&mut self, x: &AddVec, y: &AddVec, len: usize) -> Result<AddVec> {
        if len == 0 || !x.len().is_multiple_of(len) {
            return Err(Error::Usage(format!("dot length {len} does not divide {}", x.len())));
        }
        Ok(AddVec(self.beaver(&x.0, &y.0)?).sum_groups(len))
    }

    fn matmul(&mut self, x: &AddVec, w: &AddVec, d: MatDims) -> Result<AddVec> {
        if x.len() != d.rows * d.inner || w.len() != d.cols * d.inner {
            return Err(Error::Shape(format!("matmul operands do not match {d:?}")));
        }
        let total = d.rows * d.cols * d.inner;
        let mut xe = Vec::with_capacity(total);
        let mut we = Vec::with_capacity(total);
        for r in 0..d.rows {
            let xr = &x.0[r * d.inner..(r + 1) * d.inner];
            for c in 0..d.cols {
                xe.extend_from_slice(xr);
                we.extend_from_slice(&w.0[c * d.inner..(c + 1) * d.inner]);
            }
        }
        self.dot(&AddVec(xe), &AddVec(we), d.inner)
    }

    fn take_trunc(&mut self, n: usize, shift: u32, exact: bool) -> Result<TruncBatch<AddVec>> {
        let key = MaterialKey::trunc(shift, exact);
        let rec = key.record_elems(Scheme::Additive2);
        let data = self.material.take(key, n)?;
        let low = if exact { shift as usize } else { 0 };
        Ok(TruncBatch {
            r: AddVec(field(data, rec, n, 0)),
            r_shifted: AddVec(field(data, rec, n, 1)),
            r_msb: AddVec(field(data, rec, n, 2)),
            low_bits: (0..low).map(|j| AddVec(field(data, rec, n, 3 + j))).collect(),
        })
    }

    fn take_bits(&mut self, n: usize, width: u32) -> Result<BitBatch<AddVec>> {
        let key = MaterialKey::bits(width);
        let rec = key.record_elems(Scheme::Additive2);
        let data = self.material.take(key, n)?;
        Ok(BitBatch {
            r: AddVec(field(data, rec, n, 0)),
            bits: (0..width as usize)
                .map(|j| AddVec(field(data, rec, n, 1 + j)))
                .collect(),
        })
    }

    fn export_shares(&self, x: &AddVec) -> Vec<Vec<u64>> {
        x.0.iter().map(|v| vec![*v]).collect()
    }

    fn session(&self) -> Option<&Session> {
        Some(&self.session)
    }
}
