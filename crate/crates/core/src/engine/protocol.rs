use std::fmt::Debug;
use std::ops::Range;

use crate::engine::Scheme;
use crate::error::Result;
use crate::transport::Session;

/// Index accepted by [`ShareVec::gather`] that yields a zero share.
pub const ZERO_INDEX: usize = usize::MAX;

/// One party's shares of a vector of ring elements.
///
/// All operations here are local: they never communicate.
pub trait ShareVec: Clone + Debug + Send + 'static {
    fn zeros(n: usize) -> Self;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn add_assign(&mut self, other: &Self);
    fn sub_assign(&mut self, other: &Self);
    /// Multiplies every element by the public ring constant `c`.
    fn scale(&mut self, c: u64);
    /// Multiplies element `i` by `c[i]`.
    fn scale_each(&mut self, c: &[u64]);
    /// Picks elements by index; [`ZERO_INDEX`] produces a zero share.
    fn gather(&self, idx: &[usize]) -> Self;
    fn slice(&self, range: Range<usize>) -> Self;
    fn concat(parts: &[&Self]) -> Self;
    /// Sums consecutive runs of `group` elements.
    fn sum_groups(&self, group: usize) -> Self;

    fn neg_assign(&mut self) {
        self.scale(u64::MAX);
    }
}

/// Shape of a product `X · Wᵀ` with `X: rows × inner` and `W: cols × inner`,
/// producing `rows × cols` (row-major).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct MatDims {
    pub rows: usize,
    pub inner: usize,
    pub cols: usize,
}

/// A batch of truncation pairs in structure-of-arrays form.
#[derive(Clone, Debug)]
pub struct TruncBatch<V> {
    pub r: V,
    pub r_shifted: V,
    pub r_msb: V,
    /// Bits `0..shift` of `r`; empty unless the batch is for exact truncation.
    pub low_bits: Vec<V>,
}

/// A batch of bit-decomposed randoms: `bits[j]` holds bit `j` of every `r`.
#[derive(Clone, Debug)]
pub struct BitBatch<V> {
    pub r: V,
    pub bits: Vec<V>,
}

/// The primitive operations a sharing backend must provide. Everything
/// else in the engine is built from these.
pub trait Protocol {
    type Vec: ShareVec;

    fn scheme(&self) -> Scheme;
    fn party(&self) -> usize;

    /// Adds public value `c[i]` to element `i` of the shared vector.
    fn add_public(&self, x: &mut Self::Vec, c: &[u64]);

    /// Secret-shares `n` values owned by `owner`; only the owner passes `values`.
    fn input(&mut self, owner: usize, values: Option<&[u64]>, n: usize) -> Result<Self::Vec>;

    /// Reveals `x` to every party.
    fn open(&mut self, x: &Self::Vec) -> Result<Vec<u64>>;

    /// Reveals `x` to `recipient` only.
    fn open_to(&mut self, x: &Self::Vec, recipient: usize) -> Result<Option<Vec<u64>>>;

    /// Elementwise product (integer semantics, no truncation).
    fn mul(&mut self, x: &Self::Vec, y: &Self::Vec) -> Result<Self::Vec>;

    /// Inner products of consecutive length-`len` chunks of `x` and `y`.
    fn dot(&mut self, x: &Self::Vec, y: &Self::Vec, len: usize) -> Result<Self::Vec>;

    /// Matrix product `x · wᵀ`.
    fn matmul(&mut self, x: &Self::Vec, w: &Self::Vec, dims: MatDims) -> Result<Self::Vec>;

    fn take_trunc(&mut self, n: usize, shift: u32, exact: bool) -> Result<TruncBatch<Self::Vec>>;

    fn take_bits(&mut self, n: usize, width: u32) -> Result<BitBatch<Self::Vec>>;

    /// This party's raw share components per element (one or two per element).
    fn export_shares(&self, x: &Self::Vec) -> Vec<Vec<u64>>;

    fn session(&self) -> Option<&Session>;
}
