//! The x-vector speaker-embedding network: architecture, file formats,
//! a floating-point reference and the secure evaluation.

mod formats;
mod graph;
mod reference;
mod secure;

pub use formats::*;
pub use graph::*;
pub use reference::*;
pub use secure::*;
