pub mod bench;
pub mod data;
pub mod dealer;
pub mod local;
pub mod party;
