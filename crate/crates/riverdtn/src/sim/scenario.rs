//! Scenario configuration: JSON-described worlds, validation, presets.
//!
//! A [`ScenarioConfig`] fully determines a run. Two presets ship with the
//! crate (also as files under `scenarios/`):
//!
//! * `testbed` — six random-waypoint walkers in a 6.32 m office square,
//!   TTL 3038 s, one node bulk-sending text bundles (compression off);
//! * `riverside` — the river community world: two pier servers feed bundles
//!   toward people living in four riverside communities, carried by
//!   travelers riding boats.
//!
//! Sizes in `workloads[].bundle_size` are interpreted per `sizes_unit`:
//! `KB` (default) means 1024 bytes, `Kb` means kilobits (125 bytes).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::EndpointId;
use crate::compression::{CompressionError, CompressionSetting};
use crate::convergence::{ConvergenceError, LinkParams};
use crate::sim::map::{default_river_map, Map, MapError, MapGraph};
use crate::sim::metrics::Metrics;
use crate::sim::payload::{pooled_variant, PayloadError};
use crate::sim::world::{World, WorldBuilder, WorldParams};
use crate::sim::ContentClass;

pub const TESTBED_PRESET: &str = include_str!("../../../../scenarios/testbed.json");
pub const RIVERSIDE_PRESET: &str = include_str!("../../../../scenarios/riverside.json");

const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error(transparent)]
    Compression(#[from] CompressionError),
    #[error(transparent)]
    Link(#[from] ConvergenceError),
}

fn config_err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Office,
    Riverside,
}

/// How `bundle_size` numbers are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeUnit {
    /// Kilobytes: 1 unit = 1024 bytes.
    KB,
    /// Kilobits: 1 unit = 125 bytes.
    Kb,
}

impl SizeUnit {
    pub fn bytes(self, units: u64) -> u64 {
        match self {
            SizeUnit::KB => units * 1024,
            SizeUnit::Kb => units * 125,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub people: usize,
    #[serde(default)]
    pub boats: usize,
}

/// One class of bundles a traffic source emits every day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub content_class: ContentClass,
    /// Size in `sizes_unit` units.
    pub bundle_size: u64,
    /// Bundles per source per day.
    pub generation: u64,
    /// Destination EIDs, round-robin; omitted = every person in the world.
    #[serde(default)]
    pub destinations: Option<Vec<String>>,
    /// Expected Deflate ratio of this class's payloads; must match the
    /// class's calibrated corpus target when given.
    #[serde(default)]
    pub payload_profile: Option<f64>,
    /// Seconds after each day's start when the class batch begins.
    #[serde(default)]
    pub start_offset_s: Option<u64>,
    /// Seconds between consecutive bundles in the batch.
    #[serde(default)]
    pub spacing_s: Option<u64>,
    /// Lifetime for this class's bundles; omitted = the scenario `ttl_s`.
    #[serde(default)]
    pub ttl_s: Option<u64>,
}

impl TrafficSpec {
    /// Per-class batch defaults. Bulky classes go out in the morning, text
    /// around midday; epidemic queues drain oldest-first, so each text
    /// bundle contends with the same day's bulk for contact bits.
    fn schedule(&self) -> (u64, u64) {
        let defaults = match self.content_class {
            ContentClass::Video => (25_200, 300),
            ContentClass::Audio => (32_400, 300),
            ContentClass::Text => (39_600, 180),
        };
        (
            self.start_offset_s.unwrap_or(defaults.0),
            self.spacing_s.unwrap_or(defaults.1),
        )
    }
}

fn d_name() -> String {
    "unnamed".to_string()
}
fn d_payload_seed() -> u64 {
    7
}
fn d_area() -> f64 {
    6.32
}
fn d_buffer() -> u64 {
    1000 * 1024 * 1024
}
fn d_ttl() -> u64 {
    86_400
}
fn d_unit() -> SizeUnit {
    SizeUnit::KB
}
fn d_person_speed() -> (f64, f64) {
    (0.8, 1.4)
}
fn d_boat_speed() -> (f64, f64) {
    (5.0, 7.0)
}
fn d_boarding() -> (u64, u64) {
    (1200, 1800)
}
fn d_home_dwell() -> (u64, u64) {
    (1800, 5400)
}
fn d_gathering_dwell() -> (u64, u64) {
    (600, 1800)
}
fn d_pier_dwell() -> (u64, u64) {
    (7200, 18_000)
}
fn d_traveler_fraction() -> f64 {
    0.35
}
fn d_travel_probability() -> f64 {
    0.5
}
fn d_boat_capacity() -> (u64, u64) {
    (1, 10)
}

/// Everything a run depends on. `run` is a pure function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "d_name")]
    pub name: String,
    pub kind: ScenarioKind,
    pub duration_s: u64,
    #[serde(default)]
    pub seed: u64,
    /// Seeds the payload corpus pool; kept apart from `seed` so different
    /// runs share one calibrated corpus.
    #[serde(default = "d_payload_seed")]
    pub payload_seed: u64,
    pub nodes: NodeCounts,
    #[serde(default)]
    pub link: LinkParams,
    /// Riverside only; omitted = the built-in six-vertex river map.
    #[serde(default)]
    pub map: Option<MapGraph>,
    /// Office walking-square side in meters.
    #[serde(default = "d_area")]
    pub area_m: f64,
    #[serde(default)]
    pub workloads: Vec<TrafficSpec>,
    #[serde(default)]
    pub compression: CompressionSetting,
    #[serde(default = "d_buffer")]
    pub buffer_bytes: u64,
    #[serde(default = "d_ttl")]
    pub ttl_s: u64,
    #[serde(default = "d_unit")]
    pub sizes_unit: SizeUnit,
    #[serde(default = "d_person_speed")]
    pub person_speed_mps: (f64, f64),
    #[serde(default = "d_boat_speed")]
    pub boat_speed_mps: (f64, f64),
    #[serde(default = "d_boarding")]
    pub boarding_range_s: (u64, u64),
    #[serde(default = "d_home_dwell")]
    pub home_dwell_s: (u64, u64),
    #[serde(default = "d_gathering_dwell")]
    pub gathering_dwell_s: (u64, u64),
    #[serde(default = "d_pier_dwell")]
    pub pier_dwell_s: (u64, u64),
    #[serde(default = "d_traveler_fraction")]
    pub traveler_fraction: f64,
    #[serde(default = "d_travel_probability")]
    pub travel_probability: f64,
    #[serde(default = "d_boat_capacity")]
    pub boat_capacity_range: (u64, u64),
    /// Remove a bundle from the destination's buffer once delivered.
    #[serde(default)]
    pub delete_delivered: bool,
}

impl ScenarioConfig {
    pub fn from_json(json: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() {
            return Err(config_err("name must not be empty"));
        }
        self.link.validate()?;
        self.compression.validate()?;
        if self.ttl_s == 0 {
            return Err(config_err("ttl_s must be > 0"));
        }
        if self.nodes.people == 0 {
            return Err(config_err("nodes.people must be > 0"));
        }
        let ranges_u = [
            ("boarding_range_s", self.boarding_range_s),
            ("home_dwell_s", self.home_dwell_s),
            ("gathering_dwell_s", self.gathering_dwell_s),
            ("pier_dwell_s", self.pier_dwell_s),
            ("boat_capacity_range", self.boat_capacity_range),
        ];
        for (field, (lo, hi)) in ranges_u {
            if lo > hi {
                return Err(config_err(format!("{field}: lower bound {lo} exceeds {hi}")));
            }
        }
        let ranges_f = [
            ("person_speed_mps", self.person_speed_mps),
            ("boat_speed_mps", self.boat_speed_mps),
        ];
        for (field, (lo, hi)) in ranges_f {
            if !(lo > 0.0 && hi >= lo) {
                return Err(config_err(format!("{field}: need 0 < lo <= hi, got ({lo}, {hi})")));
            }
        }
        for (field, value) in
            [("traveler_fraction", self.traveler_fraction), ("travel_probability", self.travel_probability)]
        {
            if !(0.0..=1.0).contains(&value) {
                return Err(config_err(format!("{field} must be in [0, 1], got {value}")));
            }
        }
        for (i, wl) in self.workloads.iter().enumerate() {
            if wl.bundle_size == 0 {
                return Err(config_err(format!("workloads[{i}].bundle_size must be > 0")));
            }
            if wl.ttl_s == Some(0) {
                return Err(config_err(format!("workloads[{i}].ttl_s must be > 0")));
            }
            let bytes = self.sizes_unit.bytes(wl.bundle_size);
            if bytes > self.buffer_bytes {
                return Err(config_err(format!(
                    "workloads[{i}]: bundle of {bytes} bytes exceeds buffer_bytes {}",
                    self.buffer_bytes
                )));
            }
            if let Some(profile) = wl.payload_profile {
                let target = wl.content_class.target_ratio();
                if (profile - target).abs() > 1e-6 {
                    return Err(config_err(format!(
                        "workloads[{i}].payload_profile {profile} does not match the {} corpus target {target}",
                        wl.content_class
                    )));
                }
            }
            if let Some(dests) = &wl.destinations {
                if dests.is_empty() {
                    return Err(config_err(format!(
                        "workloads[{i}].destinations must not be empty when given"
                    )));
                }
                for d in dests {
                    d.parse::<EndpointId>().map_err(|e| {
                        config_err(format!("workloads[{i}].destinations: {d:?}: {e}"))
                    })?;
                }
            }
        }
        match self.kind {
            ScenarioKind::Office => {
                if self.nodes.boats != 0 {
                    return Err(config_err("office scenarios take no boats"));
                }
                if !(self.area_m > 0.0) {
                    return Err(config_err("area_m must be > 0"));
                }
            }
            ScenarioKind::Riverside => {
                if self.nodes.boats == 0 {
                    return Err(config_err("riverside scenarios need at least one boat"));
                }
                let graph = self.map.clone().unwrap_or_else(default_river_map);
                let map = Map::build(&graph)?;
                for pier in ["PierA", "PierB"] {
                    map.lookup(pier).map_err(|_| {
                        config_err(format!("riverside map must contain a {pier} vertex"))
                    })?;
                }
                if map.vertex_count() < 3 {
                    return Err(config_err(
                        "riverside map needs at least one community besides the piers",
                    ));
                }
            }
        }
        Ok(())
    }

    fn world_params(&self) -> WorldParams {
        WorldParams {
            link: self.link,
            seed: self.seed,
            payload_seed: self.payload_seed,
            compression: self.compression,
            buffer_bytes: self.buffer_bytes,
            ttl_s: self.ttl_s,
            delete_delivered: self.delete_delivered,
            person_speed_mps: self.person_speed_mps,
            boat_speed_mps: self.boat_speed_mps,
            boarding_range_s: self.boarding_range_s,
            home_dwell_s: self.home_dwell_s,
            gathering_dwell_s: self.gathering_dwell_s,
            pier_dwell_s: self.pier_dwell_s,
            traveler_fraction: self.traveler_fraction,
            travel_probability: self.travel_probability,
            boat_capacity_range: self.boat_capacity_range,
        }
    }
}

fn eid(s: String) -> EndpointId {
    s.parse().expect("EIDs validated with the config")
}

/// Build the world a config describes (validated first).
pub fn build_world(config: &ScenarioConfig) -> Result<World, ScenarioError> {
    config.validate()?;
    let mut builder = WorldBuilder::new(config.world_params());
    let sources: Vec<usize>;
    let people_eids: Vec<EndpointId>;
    match config.kind {
        ScenarioKind::Office => {
            for i in 0..config.nodes.people {
                builder.add_rwp_node(eid(format!("dtn://node-{i}/in")), config.area_m);
            }
            // The first walker doubles as the traffic source.
            sources = vec![0];
            people_eids = (1..config.nodes.people)
                .map(|i| eid(format!("dtn://node-{i}/in")))
                .collect();
        }
        ScenarioKind::Riverside => {
            let graph = config.map.clone().unwrap_or_else(default_river_map);
            let map = Map::build(&graph)?;
            builder = builder.with_map(map, &["PierA", "PierB"]);
            let communities: Vec<usize> = builder
                .sites()
                .iter()
                .enumerate()
                .filter(|(_, s)| !s.is_pier)
                .map(|(i, _)| i)
                .collect();
            let cc = communities.len();
            let per_community =
                |k: usize| (config.nodes.people + cc - 1 - k) / cc; // ceil split
            let mut eids = Vec::with_capacity(config.nodes.people);
            for i in 0..config.nodes.people {
                let community = communities[i % cc];
                let home_index = i / cc;
                let person_eid = eid(format!("dtn://person-{i}/in"));
                eids.push(person_eid.clone());
                builder.add_person(person_eid, community, home_index, per_community(i % cc));
            }
            people_eids = eids;
            let site_count = builder.sites().len();
            for b in 0..config.nodes.boats {
                builder.add_boat(eid(format!("dtn://boat-{b}/relay")), b % site_count);
            }
            let piers: Vec<(usize, String)> = builder
                .sites()
                .iter()
                .enumerate()
                .filter(|(_, s)| s.is_pier)
                .map(|(i, s)| (i, s.name.to_lowercase()))
                .collect();
            sources = piers
                .into_iter()
                .map(|(site, name)| builder.add_server(eid(format!("dtn://{name}/out")), site))
                .collect();
        }
    }

    // Traffic: each source emits every workload's daily batch; destinations
    // round-robin with a per-source phase so the sources do not all target
    // the same person.
    let days = config.duration_s / SECONDS_PER_DAY
        + u64::from(config.duration_s % SECONDS_PER_DAY > 0);
    for wl in &config.workloads {
        let bytes = config.sizes_unit.bytes(wl.bundle_size);
        let (offset, spacing) = wl.schedule();
        let dests: Vec<EndpointId> = match &wl.destinations {
            Some(list) => list.iter().cloned().map(eid).collect(),
            None => people_eids.clone(),
        };
        if dests.is_empty() {
            continue;
        }
        for (src_ord, &src) in sources.iter().enumerate() {
            let mut count = 0u64;
            for day in 0..days {
                for i in 0..wl.generation {
                    let at_s = day * SECONDS_PER_DAY + offset + i * spacing;
                    if at_s > config.duration_s {
                        continue;
                    }
                    let dest = dests[(src_ord + count as usize) % dests.len()].clone();
                    builder.schedule_bundle_with_ttl(
                        src,
                        dest,
                        wl.content_class,
                        bytes,
                        at_s,
                        wl.ttl_s,
                    );
                    count += 1;
                }
            }
        }
    }
    Ok(builder.build())
}

/// Run a config to completion.
pub fn run(config: &ScenarioConfig) -> Result<Metrics, ScenarioError> {
    Ok(build_world(config)?.run(config.duration_s)?)
}

/// The office walking-square preset with the given seed.
pub fn run_testbed_preset(seed: u64) -> Metrics {
    let mut config = testbed_config();
    config.seed = seed;
    run(&config).expect("embedded testbed preset is valid")
}

pub fn testbed_config() -> ScenarioConfig {
    ScenarioConfig::from_json(TESTBED_PRESET).expect("embedded testbed preset parses")
}

pub fn riverside_config() -> ScenarioConfig {
    ScenarioConfig::from_json(RIVERSIDE_PRESET).expect("embedded riverside preset parses")
}

/// Measured Deflate ratio each workload's corpus calibrates to, for
/// diagnostics: (class, size in bytes, achieved ratio).
pub fn calibration_report(
    config: &ScenarioConfig,
) -> Result<Vec<(ContentClass, u64, f64)>, ScenarioError> {
    let mut rows = Vec::new();
    for wl in &config.workloads {
        let bytes = config.sizes_unit.bytes(wl.bundle_size);
        let variant =
            pooled_variant(wl.content_class, bytes, config.compression.level, 0, config.payload_seed)?;
        rows.push((wl.content_class, bytes, variant.report.ratio));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_presets_parse_and_validate() {
        let testbed = testbed_config();
        assert_eq!(testbed.kind, ScenarioKind::Office);
        assert_eq!(testbed.nodes.people, 6);
        assert_eq!(testbed.ttl_s, 3038);
        assert!(!testbed.compression.enabled);

        let riverside = riverside_config();
        assert_eq!(riverside.kind, ScenarioKind::Riverside);
        assert_eq!(riverside.duration_s, 864_000);
        assert_eq!(riverside.nodes.people, 150);
        assert_eq!(riverside.nodes.boats, 4);
        assert_eq!(riverside.workloads.len(), 3);
    }

    #[test]
    fn testbed_pair_exchanges_ten_text_bundles_within_34_seconds() {
        // Ten raw 100 KB bundles over one pair: 1 s inquiry + 10 × ~3.2 s.
        let mut config = testbed_config();
        config.duration_s = 34;
        let metrics = run(&config).unwrap();
        assert_eq!(metrics.class(ContentClass::Text).created, 10);
        assert_eq!(metrics.class(ContentClass::Text).delivered, 10);
        assert!(metrics.audit.clean());
    }

    #[test]
    fn testbed_seed_determinism() {
        assert_eq!(run_testbed_preset(42), run_testbed_preset(42));
    }

    #[test]
    fn testbed_floods_every_node() {
        let metrics = run_testbed_preset(7);
        // 6 nodes × 10 bundles: a copy of each bundle reaches everyone.
        assert_eq!(metrics.copies_stored, 60);
        assert!(metrics.audit.clean());
    }

    #[test]
    fn duration_zero_riverside_is_all_zero() {
        let mut config = riverside_config();
        config.duration_s = 0;
        config.nodes.people = 10;
        let metrics = run(&config).unwrap();
        assert_eq!(metrics.total_created(), 0);
        assert_eq!(metrics.total_delivered(), 0);
        assert_eq!(metrics.copies_stored, 0);
    }

    #[test]
    fn small_riverside_runs_and_counts_creations() {
        let mut config = riverside_config();
        config.nodes.people = 10;
        config.nodes.boats = 2;
        config.duration_s = 4 * 3600;
        // Two text bundles per server early in the day, small payloads.
        config.workloads = vec![TrafficSpec {
            content_class: ContentClass::Text,
            bundle_size: 20,
            generation: 2,
            destinations: None,
            payload_profile: None,
            start_offset_s: Some(600),
            spacing_s: Some(300),
        }];
        let metrics = run(&config).unwrap();
        // Two servers × 2 bundles × 1 (partial) day.
        assert_eq!(metrics.class(ContentClass::Text).created, 4);
        assert!(metrics.audit.clean());
    }

    #[test]
    fn office_with_boats_is_rejected() {
        let mut config = testbed_config();
        config.nodes.boats = 2;
        assert!(matches!(config.validate(), Err(ScenarioError::Config(_))));
    }

    #[test]
    fn riverside_map_without_piers_is_rejected() {
        let mut config = riverside_config();
        let mut graph = default_river_map();
        for v in &mut graph.vertices {
            if v.name == "PierA" {
                v.name = "Harbor".into();
            }
        }
        for e in &mut graph.edges {
            if e.0 == "PierA" {
                e.0 = "Harbor".into();
            }
            if e.1 == "PierA" {
                e.1 = "Harbor".into();
            }
        }
        config.map = Some(graph);
        assert!(matches!(config.validate(), Err(ScenarioError::Config(_))));
    }

    #[test]
    fn bad_speed_range_is_rejected() {
        let mut config = riverside_config();
        config.person_speed_mps = (2.0, 1.0);
        assert!(matches!(config.validate(), Err(ScenarioError::Config(_))));
    }

    #[test]
    fn mismatched_payload_profile_is_rejected() {
        let mut config = riverside_config();
        config.workloads[0].payload_profile = Some(0.9);
        assert!(matches!(config.validate(), Err(ScenarioError::Config(_))));
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let json = r#"{ "kind": "office", "duration_s": 1, "nodes": {"people": 2}, "warp_drive": true }"#;
        assert!(ScenarioConfig::from_json(json).is_err());
    }
}
