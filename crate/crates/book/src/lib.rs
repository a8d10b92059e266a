//! The guide's chapters, compiled as doc comments so that `cargo test`
//! runs every Rust listing in them.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
#[doc = include_str!("../../../book/src/phy.md")]
pub mod phy {}
#[doc = include_str!("../../../book/src/backoff.md")]
pub mod backoff {}
#[doc = include_str!("../../../book/src/slots.md")]
pub mod slots {}
#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}
#[doc = include_str!("../../../book/src/simulator.md")]
pub mod simulator {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
