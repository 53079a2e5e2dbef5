//! Deterministic discrete-event simulator.
//!
//! A [`world::World`] advances integer-microsecond time through three event
//! kinds: transfer completions, bundle creations, and 1-second ticks that
//! integrate mobility, detect radio contacts, expire stores, and run the
//! 10-second discovery rounds that gate all communication. Everything an
//! entity draws from randomness comes from its own seeded stream, so mobility
//! is bit-identical between compression-on and compression-off runs of the
//! same seed — the contact trace is a controlled variable, exactly what the
//! delivery-ratio comparison needs.
//!
//! [`scenario`] turns a JSON [`scenario::ScenarioConfig`] (office testbed or
//! riverside presets) into a world; [`payload`] synthesizes corpus payloads
//! calibrated to per-class Deflate ratios; [`trace`] replays hand-given
//! contact traces with infinite bandwidth for oracle testing.

pub mod map;
pub mod metrics;
pub mod mobility;
pub mod payload;
pub mod scenario;
pub mod trace;
pub mod world;

use std::fmt;

use serde::{Deserialize, Serialize};

/// Application traffic class, ordered as reported in results.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ContentClass {
    Text,
    Audio,
    Video,
}

impl ContentClass {
    pub const ALL: [ContentClass; 3] = [ContentClass::Text, ContentClass::Audio, ContentClass::Video];

    pub fn name(self) -> &'static str {
        match self {
            ContentClass::Text => "text",
            ContentClass::Audio => "audio",
            ContentClass::Video => "video",
        }
    }
}

impl fmt::Display for ContentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
