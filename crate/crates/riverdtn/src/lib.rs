//! Store-carry-forward DTN library with a Bluetooth-like convergence layer,
//! bundle compression, epidemic routing, and a deterministic discrete-event
//! simulator.
//!
//! The crate is organized bottom-up:
//!
//! - [`sdnv`]: self-delimiting numeric values, the varint used on the wire
//! - [`bundle`]: bundle model and wire codec with dictionary-compressed
//!   primary blocks
//! - [`compression`]: Deflate payload compression with a no-gain fallback
//! - [`storage`]: bounded per-node bundle store with FIFO eviction and
//!   TTL expiry
//! - [`convergence`]: Bluetooth-like link model — discovery rounds, inquiry
//!   latency, half-duplex transfers at a fixed line rate
//! - [`routing`]: epidemic store-carry-forward routing over summary vectors
//! - [`sim`]: scenario-driven discrete-event simulator (office testbed and
//!   riverside presets)
//! - [`experiment`]: multi-seed experiment driver producing CSV results with
//!   confidence intervals
//!
//! Run `cargo run --example two_node_contact` for a guided tour of the stack;
//! the other examples each exercise one layer.

pub mod bundle;
pub mod compression;
pub mod convergence;
pub mod experiment;
pub mod routing;
pub mod sdnv;
pub mod sim;
pub mod storage;
