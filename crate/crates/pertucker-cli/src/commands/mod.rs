pub mod bench;
pub mod classify;
pub mod cluster;
pub mod fit;
pub mod monitor;
pub mod simulate;
