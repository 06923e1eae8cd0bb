pub mod boolnet;
pub mod distlogic;
pub mod error;
pub mod knowledge;
pub mod network;
pub mod rewriting;
pub mod term;
pub mod trace;
