//! A protocol stand-in that only counts correlated-randomness draws.

use std::collections::BTreeMap;
use std::ops::Range;

use super::protocol::{BitBatch, MatDims, Protocol, ShareVec, TruncBatch};
use super::Scheme;
use crate::error::{Error, Result};
use crate::preprocessing::MaterialKey;
use crate::transport::Session;

/// A shape-only share vector.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct DryVec(pub usize);

impl ShareVec for DryVec {
    fn zeros(n: usize) -> Self {
        DryVec(n)
    }
    fn len(&self) -> usize {
        self.0
    }
    fn add_assign(&mut self, o: &Self) {
        assert_eq!(self.0, o.0, "share length mismatch");
    }
    fn sub_assign(&mut self, o: &Self) {
        assert_eq!(self.0, o.0, "share length mismatch");
    }
    fn scale(&mut self, _c: u64) {}
    fn scale_each(&mut self, c: &[u64]) {
        assert_eq!(self.0, c.len(), "constant length mismatch");
    }
    fn gather(&self, idx: &[usize]) -> Self {
        DryVec(idx.len())
    }
    fn slice(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.0);
        DryVec(range.len())
    }
    fn concat(parts: &[&Self]) -> Self {
        DryVec(parts.iter().map(|p| p.0).sum())
    }
    fn sum_groups(&self, group: usize) -> Self {
        assert!(group > 0 && self.0.is_multiple_of(group), "bad group size");
        DryVec(self.0 / group)
    }
}

/// Runs engine code without data and records what it would consume.
/// Opened values read as zero, which is fine because the engine's control
/// flow never depends on them.
#[derive(Clone, Debug)]
pub struct DryRun {
    scheme: Scheme,
    party: usize,
    counts: BTreeMap<MaterialKey, u64>,
}

impl DryRun {
    pub fn new(scheme: Scheme, party: usize) -> Self {
        DryRun {
            scheme,
            party,
            counts: BTreeMap::new(),
        }
    }

    pub fn counts(&self) -> &BTreeMap<MaterialKey, u64> {
        &self.counts
    }

    pub fn into_counts(self) -> BTreeMap<MaterialKey, u64> {
        self.counts
    }

    fn draw(&mut self, key: MaterialKey, n: usize) {
        if n > 0 {
            *self.counts.entry(key).or_insert(0) += n as u64;
        }
    }

    fn triples(&mut self, n: usize) {
        if self.scheme == Scheme::Additive2 {
            self.draw(MaterialKey::TRIPLE, n);
        }
    }
}

impl Protocol for DryRun {
    type Vec = DryVec;

    fn scheme(&self) -> Scheme {
        self.scheme
    }
    fn party(&self) -> usize {
        self.party
    }
    fn add_public(&self, x: &mut DryVec, c: &[u64]) {
        assert_eq!(x.0, c.len(), "constant length mismatch");
    }
    fn input(&mut self, owner: usize, _values: Option<&[u64]>, n: usize) -> Result<DryVec> {
        if owner >= self.scheme.parties() {
            return Err(Error::Usage(format!("no party {owner}")));
        }
        Ok(DryVec(n))
    }
    fn open(&mut self, x: &DryVec) -> Result<Vec<u64>> {
        Ok(vec![0; x.0])
    }
    fn open_to(&mut self, x: &DryVec, recipient: usize) -> Result<Option<Vec<u64>>> {
        Ok((recipient == self.party).then(|| vec![0; x.0]))
    }
    fn mul(&mut self, x: &DryVec, y: &DryVec) -> Result<DryVec> {
        if x.0 != y.0 {
            return Err(Error::Usage("mul length mismatch".into()));
        }
        self.triples(x.0);
        Ok(*x)
    }
    fn dot(&mut self, x: &DryVec, y: &DryVec, len: usize) -> Result<DryVec> {
        if x.0 != y.0 || len == 0 || !x.0.is_multiple_of(len) {
            return Err(Error::Usage("dot length mismatch".into()));
        }
        self.triples(x.0);
        Ok(DryVec(x.0 / len))
    }
    fn matmul(&mut self, x: &DryVec, w: &DryVec, d: MatDims) -> Result<DryVec> {
        if x.0 != d.rows * d.inner || w.0 != d.cols * d.inner {
            return Err(Error::Shape(format!("matmul operands do not match {d:?}")));
        }
        self.triples(d.rows * d.cols * d.inner);
        Ok(DryVec(d.rows * d.cols))
    }
    fn take_trunc(&mut self, n: usize, shift: u32, exact: bool) -> Result<TruncBatch<DryVec>> {
        self.draw(MaterialKey::trunc(shift, exact), n);
        Ok(TruncBatch {
            r: DryVec(n),
            r_shifted: DryVec(n),
            r_msb: DryVec(n),
            low_bits: vec![DryVec(n); if exact { shift as usize } else { 0 }],
        })
    }
    fn take_bits(&mut self, n: usize, width: u32) -> Result<BitBatch<DryVec>> {
        self.draw(MaterialKey::bits(width), n);
        Ok(BitBatch {
            r: DryVec(n),
            bits: vec![DryVec(n); width as usize],
        })
    }
    fn export_shares(&self, x: &DryVec) -> Vec<Vec<u64>> {
        vec![vec![0; self.scheme.components()]; x.0]
    }
    fn session(&self) -> Option<&Session> {
        None
    }
}
