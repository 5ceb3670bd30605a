use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::material::MaterialKey;
use crate::engine::Scheme;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct BudgetEntry {
    pub key: MaterialKey,
    pub count: u64,
}

/// Records of each material kind a computation consumes (per party).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<BudgetEntry>", into = "Vec<BudgetEntry>")]
pub struct RandomnessBudget {
    counts: BTreeMap<MaterialKey, u64>,
}

impl From<Vec<BudgetEntry>> for RandomnessBudget {
    fn from(v: Vec<BudgetEntry>) -> Self {
        let mut b = RandomnessBudget::default();
        for e in v {
            b.add(e.key, e.count);
        }
        b
    }
}

impl From<RandomnessBudget> for Vec<BudgetEntry> {
    fn from(b: RandomnessBudget) -> Self {
        b.iter().map(|(key, count)| BudgetEntry { key, count }).collect()
    }
}

impl From<BTreeMap<MaterialKey, u64>> for RandomnessBudget {
    fn from(counts: BTreeMap<MaterialKey, u64>) -> Self {
        let mut b = RandomnessBudget::default();
        for (k, c) in counts {
            b.add(k, c);
        }
        b
    }
}

impl RandomnessBudget {
    pub fn add(&mut self, key: MaterialKey, count: u64) {
        if count > 0 {
            *self.counts.entry(key).or_insert(0) += count;
        }
    }

    pub fn get(&self, key: &MaterialKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (MaterialKey, u64)> + '_ {
        self.counts.iter().map(|(k, c)| (*k, *c))
    }

    pub fn as_map(&self) -> &BTreeMap<MaterialKey, u64> {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Bytes of material one party stores for this budget, headers excluded.
    pub fn party_bytes(&self, scheme: Scheme) -> u64 {
        self.iter()
            .map(|(k, c)| c * k.record_elems(scheme) as u64 * 8)
            .sum()
    }

    pub fn to_table(&self, scheme: Scheme) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<40} {:>14} {:>16}", "material", "records", "bytes/party");
        for (k, c) in self.iter() {
            let bytes = c * k.record_elems(scheme) as u64 * 8;
            let _ = writeln!(s, "{:<40} {:>14} {:>16}", k.to_string(), c, bytes);
        }
        let _ = writeln!(s, "{:<40} {:>14} {:>16}", "total", "", self.party_bytes(scheme));
        s
    }
}
