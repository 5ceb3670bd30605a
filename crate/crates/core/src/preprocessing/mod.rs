//! The offline phase: a trusted dealer produces correlated randomness,
//! written as per-party files and consumed in order during the online phase.

mod budget;
mod dealer;
mod material;

pub use budget::{BudgetEntry, RandomnessBudget};
pub use dealer::{
    gen_bit_randoms, gen_triples, gen_trunc_pairs, reconstruct_field, BitDecomposedRandom, Dealer,
    SharedValue, Triple, TruncPair,
};
pub use material::{
    party_dir, write_material, MaterialFileInfo, MaterialKey, MaterialKind, MaterialStore,
    PartyMaterial, Pool, MATERIAL_HEADER_BYTES, MATERIAL_MAGIC,
};
