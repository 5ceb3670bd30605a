//! Party-local pools of dealer material and their on-disk format.
//!
//! File layout (little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `MPM1`                  |
//! | 4      | 1    | scheme id                     |
//! | 5      | 1    | material kind                 |
//! | 6      | 2    | kind parameter (shift/width)  |
//! | 8      | 4    | config hash                   |
//! | 12     | 8    | record count                  |
//! | 20     | 4    | ring elements per record      |
//! | 24     | 8    | dealer run id                 |
//! | 32     | ..   | records                       |

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::Scheme;
use crate::error::{Error, Result};
use crate::sharing::PairSeed;

pub const MATERIAL_MAGIC: &[u8; 4] = b"MPM1";
pub const MATERIAL_HEADER_BYTES: usize = 32;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum MaterialKind {
    Triple = 0,
    TruncProb = 1,
    TruncExact = 2,
    BitRandom = 3,
    Seeds = 4,
}

impl MaterialKind {
    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => MaterialKind::Triple,
            1 => MaterialKind::TruncProb,
            2 => MaterialKind::TruncExact,
            3 => MaterialKind::BitRandom,
            4 => MaterialKind::Seeds,
            _ => return Err(Error::Schema(format!("unknown material kind {v}"))),
        })
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            MaterialKind::Triple => "triples",
            MaterialKind::TruncProb => "trunc-prob",
            MaterialKind::TruncExact => "trunc-exact",
            MaterialKind::BitRandom => "bits",
            MaterialKind::Seeds => "seeds",
        }
    }
}

/// A pool identity: kind plus its parameter (truncation shift or bit width).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MaterialKey {
    pub kind: MaterialKind,
    pub param: u16,
}

impl MaterialKey {
    pub const TRIPLE: MaterialKey = MaterialKey {
        kind: MaterialKind::Triple,
        param: 0,
    };

    pub fn trunc(shift: u32, exact: bool) -> Self {
        MaterialKey {
            kind: if exact {
                MaterialKind::TruncExact
            } else {
                MaterialKind::TruncProb
            },
            param: shift as u16,
        }
    }

    pub fn bits(width: u32) -> Self {
        MaterialKey {
            kind: MaterialKind::BitRandom,
            param: width as u16,
        }
    }

    /// Logical shared values per record (before replication).
    pub fn fields(&self) -> usize {
        match self.kind {
            MaterialKind::Triple => 3,
            MaterialKind::TruncProb => 3,
            MaterialKind::TruncExact => 3 + self.param as usize,
            MaterialKind::BitRandom => 1 + self.param as usize,
            MaterialKind::Seeds => 4,
        }
    }

    /// Ring elements per record for one party of `scheme`.
    pub fn record_elems(&self, scheme: Scheme) -> usize {
        match self.kind {
            MaterialKind::Seeds => 4,
            _ => self.fields() * scheme.components(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}.mpm", self.kind.file_stem(), self.param)
    }
}

impl fmt::Display for MaterialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MaterialKind::Triple => write!(f, "multiplication triple"),
            MaterialKind::TruncProb => write!(f, "truncation pair (shift {})", self.param),
            MaterialKind::TruncExact => {
                write!(f, "exact truncation pair (shift {})", self.param)
            }
            MaterialKind::BitRandom => write!(f, "bit-decomposed random (width {})", self.param),
            MaterialKind::Seeds => write!(f, "pairwise seeds"),
        }
    }
}

/// Records of one kind, consumed strictly in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pool {
    pub record_elems: usize,
    pub data: Vec<u64>,
    cursor: usize,
}

impl Pool {
    pub fn new(record_elems: usize) -> Self {
        Pool {
            record_elems,
            data: Vec::new(),
            cursor: 0,
        }
    }

    pub fn from_data(record_elems: usize, data: Vec<u64>) -> Self {
        Pool {
            record_elems,
            data,
            cursor: 0,
        }
    }

    pub fn count(&self) -> u64 {
        (self.data.len() / self.record_elems) as u64
    }

    pub fn consumed(&self) -> u64 {
        self.cursor as u64
    }

    pub fn remaining(&self) -> u64 {
        self.count() - self.consumed()
    }
}

/// Everything one party received from the dealer.
#[derive(Clone, Debug)]
pub struct PartyMaterial {
    pub scheme: Scheme,
    pub party: usize,
    pub config_hash: u32,
    pub run_id: u64,
    pub seeds: Vec<Option<PairSeed>>,
    pools: BTreeMap<MaterialKey, Pool>,
}

impl PartyMaterial {
    pub fn new(scheme: Scheme, party: usize, config_hash: u32, run_id: u64) -> Self {
        PartyMaterial {
            scheme,
            party,
            config_hash,
            run_id,
            seeds: vec![None; scheme.parties()],
            pools: BTreeMap::new(),
        }
    }

    pub fn pool_mut(&mut self, key: MaterialKey) -> &mut Pool {
        let re = key.record_elems(self.scheme);
        self.pools.entry(key).or_insert_with(|| Pool::new(re))
    }

    pub fn pool(&self, key: &MaterialKey) -> Option<&Pool> {
        self.pools.get(key)
    }

    pub fn pools(&self) -> impl Iterator<Item = (&MaterialKey, &Pool)> {
        self.pools.iter()
    }

    pub fn available(&self, key: &MaterialKey) -> u64 {
        self.pools.get(key).map_or(0, |p| p.remaining())
    }

    /// Takes the next `n` records of `key` as a flat slice.
    pub fn take(&mut self, key: MaterialKey, n: usize) -> Result<&[u64]> {
        let available = self.available(&key);
        if (n as u64) > available {
            return Err(Error::PreprocessingUnderflow {
                kind: key.to_string(),
                requested: n as u64,
                available,
            });
        }
        if n == 0 {
            return Ok(&[]);
        }
        let pool = self.pools.get_mut(&key).expect("checked above");
        let start = pool.cursor * pool.record_elems;
        pool.cursor += n;
        let end = pool.cursor * pool.record_elems;
        Ok(&pool.data[start..end])
    }

    /// Records consumed so far, per key.
    pub fn consumption(&self) -> BTreeMap<MaterialKey, u64> {
        self.pools
            .iter()
            .map(|(k, p)| (*k, p.consumed()))
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<MaterialKey, u64> {
        self.pools.iter().map(|(k, p)| (*k, p.count())).collect()
    }

    /// Drops `n` records from the end of a pool (used to provoke underflow in tests).
    pub fn truncate_pool(&mut self, key: MaterialKey, n: u64) {
        if let Some(p) = self.pools.get_mut(&key) {
            let keep = p.count().saturating_sub(n) as usize;
            p.data.truncate(keep * p.record_elems);
        }
    }

    fn seeds_records(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.seeds.len() * 4);
        for s in &self.seeds {
            let bytes = s.map(|s| s.0).unwrap_or([0u8; 32]);
            for c in bytes.chunks_exact(8) {
                out.push(u64::from_le_bytes(c.try_into().unwrap()));
            }
        }
        out
    }

    fn set_seeds_from_records(&mut self, data: &[u64]) -> Result<()> {
        let n = self.scheme.parties();
        if data.len() != n * 4 {
            return Err(Error::Schema("seed file has wrong record count".into()));
        }
        for (j, rec) in data.chunks_exact(4).enumerate() {
            self.seeds[j] = if j == self.party {
                None
            } else {
                let mut b = [0u8; 32];
                for (k, v) in rec.iter().enumerate() {
                    b[k * 8..k * 8 + 8].copy_from_slice(&v.to_le_bytes());
                }
                Some(PairSeed(b))
            };
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Header {
    scheme: Scheme,
    kind: MaterialKind,
    param: u16,
    config_hash: u32,
    count: u64,
    record_elems: u32,
    run_id: u64,
}

impl Header {
    fn encode(&self) -> [u8; MATERIAL_HEADER_BYTES] {
        let mut h = [0u8; MATERIAL_HEADER_BYTES];
        h[0..4].copy_from_slice(MATERIAL_MAGIC);
        h[4] = self.scheme.id();
        h[5] = self.kind as u8;
        h[6..8].copy_from_slice(&self.param.to_le_bytes());
        h[8..12].copy_from_slice(&self.config_hash.to_le_bytes());
        h[12..20].copy_from_slice(&self.count.to_le_bytes());
        h[20..24].copy_from_slice(&self.record_elems.to_le_bytes());
        h[24..32].copy_from_slice(&self.run_id.to_le_bytes());
        h
    }

    fn decode(h: &[u8; MATERIAL_HEADER_BYTES]) -> Result<Self> {
        if &h[0..4] != MATERIAL_MAGIC {
            return Err(Error::Schema("bad material file magic".into()));
        }
        Ok(Header {
            scheme: Scheme::from_id(h[4])?,
            kind: MaterialKind::from_u8(h[5])?,
            param: u16::from_le_bytes(h[6..8].try_into().unwrap()),
            config_hash: u32::from_le_bytes(h[8..12].try_into().unwrap()),
            count: u64::from_le_bytes(h[12..20].try_into().unwrap()),
            record_elems: u32::from_le_bytes(h[20..24].try_into().unwrap()),
            run_id: u64::from_le_bytes(h[24..32].try_into().unwrap()),
        })
    }
}

/// Summary of one written file, for the dealer manifest.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MaterialFileInfo {
    pub party: usize,
    pub file: String,
    pub key: MaterialKey,
    pub count: u64,
    pub bytes: u64,
    pub sha256: String,
}

pub fn party_dir(root: &Path, party: usize) -> PathBuf {
    root.join(format!("party{party}"))
}

fn write_file(
    path: &Path,
    header: &Header,
    data: &[u64],
) -> Result<(u64, String)> {
    let mut hasher = Sha256::new();
    let mut w = BufWriter::with_capacity(1 << 20, fs::File::create(path)?);
    let h = header.encode();
    w.write_all(&h)?;
    hasher.update(h);
    let mut buf = Vec::with_capacity(1 << 16);
    for chunk in data.chunks(8192) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        hasher.update(&buf);
    }
    w.flush()?;
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(((MATERIAL_HEADER_BYTES + data.len() * 8) as u64, hex))
}

/// Writes one party's material under `root/party{i}/`.
pub fn write_material(root: &Path, material: &PartyMaterial) -> Result<Vec<MaterialFileInfo>> {
    let dir = party_dir(root, material.party);
    fs::create_dir_all(&dir)?;
    let mut infos = Vec::new();
    let seeds_key = MaterialKey {
        kind: MaterialKind::Seeds,
        param: 0,
    };
    let seed_data = material.seeds_records();
    let mut entries: Vec<(MaterialKey, usize, &[u64])> =
        vec![(seeds_key, 4, seed_data.as_slice())];
    for (k, p) in &material.pools {
        entries.push((*k, p.record_elems, p.data.as_slice()));
    }
    for (key, re, data) in entries {
        let header = Header {
            scheme: material.scheme,
            kind: key.kind,
            param: key.param,
            config_hash: material.config_hash,
            count: (data.len() / re) as u64,
            record_elems: re as u32,
            run_id: material.run_id,
        };
        let file = key.file_name();
        let (bytes, sha256) = write_file(&dir.join(&file), &header, data)?;
        infos.push(MaterialFileInfo {
            party: material.party,
            file,
            key,
            count: header.count,
            bytes,
            sha256,
        });
    }
    Ok(infos)
}

/// Reads dealer files from disk and counts every read, so callers can
/// check that nothing is read once the online phase has begun.
#[derive(Debug)]
pub struct MaterialStore {
    root: PathBuf,
    reads: u64,
    bytes_read: u64,
}

impl MaterialStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        MaterialStore {
            root: root.into(),
            reads: 0,
            bytes_read: 0,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes_read
    }

    /// Loads all of `party`'s files, checking they come from one dealer run
    /// for `scheme` and `config_hash`.
    pub fn load_material(
        &mut self,
        party: usize,
        scheme: Scheme,
        config_hash: u32,
    ) -> Result<PartyMaterial> {
        let dir = party_dir(&self.root, party);
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| {
                Error::PreprocessingUnderflow {
                    kind: format!("material directory {} ({e})", dir.display()),
                    requested: 1,
                    available: 0,
                }
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "mpm"))
            .collect();
        entries.sort();
        let mut material: Option<PartyMaterial> = None;
        let mut have_seeds = false;
        for path in entries {
            let mut r = BufReader::with_capacity(1 << 20, fs::File::open(&path)?);
            self.reads += 1;
            let mut hb = [0u8; MATERIAL_HEADER_BYTES];
            r.read_exact(&mut hb)?;
            let h = Header::decode(&hb)?;
            if h.scheme != scheme {
                return Err(Error::Schema(format!(
                    "{} was written for scheme {}",
                    path.display(),
                    h.scheme.name()
                )));
            }
            if h.config_hash != config_hash {
                return Err(Error::IncompatibleConfig {
                    local: config_hash,
                    remote: h.config_hash,
                    peer: party,
                });
            }
            let m = material.get_or_insert_with(|| {
                PartyMaterial::new(scheme, party, config_hash, h.run_id)
            });
            if m.run_id != h.run_id {
                return Err(Error::Schema(format!(
                    "{} comes from a different dealer run",
                    path.display()
                )));
            }
            let n_elems = h.count as usize * h.record_elems as usize;
            let mut bytes = vec![0u8; n_elems * 8];
            r.read_exact(&mut bytes)?;
            let mut extra = [0u8; 1];
            if r.read(&mut extra)? != 0 {
                return Err(Error::Schema(format!("{} has trailing bytes", path.display())));
            }
            self.bytes_read += (MATERIAL_HEADER_BYTES + bytes.len()) as u64;
            let data: Vec<u64> = bytes
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let key = MaterialKey {
                kind: h.kind,
                param: h.param,
            };
            if h.kind == MaterialKind::Seeds {
                m.set_seeds_from_records(&data)?;
                have_seeds = true;
            } else {
                if key.record_elems(scheme) != h.record_elems as usize {
                    return Err(Error::Schema(format!(
                        "{} has {} elements per record, expected {}",
                        path.display(),
                        h.record_elems,
                        key.record_elems(scheme)
                    )));
                }
                m.pools
                    .insert(key, Pool::from_data(h.record_elems as usize, data));
            }
        }
        match material {
            Some(m) if have_seeds => Ok(m),
            _ => Err(Error::PreprocessingUnderflow {
                kind: format!("pairwise seeds in {}", dir.display()),
                requested: 1,
                available: 0,
            }),
        }
    }
}
