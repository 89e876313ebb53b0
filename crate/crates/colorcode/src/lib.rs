//! Triangular 6.6.6 color codes, the syndrome-extraction and teleportation
//! gadgets built on them, and the lookup decoders those gadgets consume.

pub mod code;
pub mod decoders;
pub mod gadgets;
