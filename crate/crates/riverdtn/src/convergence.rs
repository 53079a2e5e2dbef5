//! Bluetooth-like convergence layer: discovery, address adaptation, and
//! rate-limited transfer.
//!
//! The layer contributes three things to the stack:
//!
//! 1. **Discovery**: every `discovery_interval_s` a node scans for peers
//!    inside its radio disc and reports who appeared, who is still there, and
//!    who vanished since the previous round ([`DiscoveryState::run_discovery`]).
//! 2. **Adaptation**: a bundle addressed by EID becomes a [`TransferJob`]
//!    addressed by 48-bit [`DeviceAddress`], sized by its serialized
//!    (post-compression) bit count ([`adapt_bundle`]).
//! 3. **Transfer**: jobs move at a fixed line rate within a [`Contact`]. The
//!    first job of a contact also pays a one-second inquiry/paging setup
//!    cost. A transfer that outlives the contact aborts and delivers nothing.
//!
//! Links are half-duplex: a node takes part in at most one active transfer at
//! a time, in either direction. The radio is a binary disc of radius
//! `range_m` — in range means connected at `rate_bps`, out of range means
//! silence.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{Bundle, BundleId, EndpointId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConvergenceError {
    #[error("no peer with endpoint {0} in the current peer table")]
    UnknownPeer(EndpointId),
    #[error("bundle {0} is addressed to the null endpoint and cannot be transferred")]
    NoRoute(BundleId),
    #[error("invalid link parameters: {0}")]
    InvalidParams(String),
    #[error("device address {0:#x} exceeds 48 bits")]
    AddressTooWide(u64),
}

/// Radio and timing parameters of the short-range link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkParams {
    /// Radio disc radius in meters.
    pub range_m: f64,
    /// Line rate in bits per second.
    pub rate_bps: u64,
    /// Seconds between discovery rounds.
    pub discovery_interval_s: u64,
    /// Connection-setup cost paid by the first transfer of each contact.
    pub inquiry_latency_s: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self { range_m: 10.0, rate_bps: 256_000, discovery_interval_s: 10, inquiry_latency_s: 1.0 }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), ConvergenceError> {
        let complain = |what: &str| Err(ConvergenceError::InvalidParams(format!(
            "{what} must be strictly positive"
        )));
        if !(self.range_m > 0.0) {
            return complain("range_m");
        }
        if self.rate_bps == 0 {
            return complain("rate_bps");
        }
        if self.discovery_interval_s == 0 {
            return complain("discovery_interval_s");
        }
        if !(self.inquiry_latency_s > 0.0) {
            return complain("inquiry_latency_s");
        }
        Ok(())
    }

    pub fn inquiry_latency_us(&self) -> u64 {
        (self.inquiry_latency_s * 1e6).round() as u64
    }
}

/// 48-bit device address, the Bluetooth MAC analog.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct DeviceAddress(u64);

impl DeviceAddress {
    pub const MAX: u64 = (1 << 48) - 1;

    pub fn new(raw: u64) -> Result<Self, ConvergenceError> {
        if raw > Self::MAX {
            return Err(ConvergenceError::AddressTooWide(raw));
        }
        Ok(Self(raw))
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

impl fmt::Display for DeviceAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

/// A peer seen by discovery.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PeerRecord {
    pub address: DeviceAddress,
    pub eid: EndpointId,
    pub last_seen: u64,
}

/// Outcome of one discovery round, per peer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PeerEvent {
    Appeared(PeerRecord),
    Refreshed(PeerRecord),
    Disappeared { address: DeviceAddress, eid: EndpointId },
}

/// Per-node discovery memory: who was in range last round.
#[derive(Debug, Clone, Default)]
pub struct DiscoveryState {
    peers: BTreeMap<DeviceAddress, PeerRecord>,
}

impl DiscoveryState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compare this round's in-range set against the previous round.
    ///
    /// Emits `Disappeared` for peers that dropped out, then `Appeared` /
    /// `Refreshed` for current peers, each group in address order, so the
    /// event sequence is a pure function of the position trace.
    pub fn run_discovery(
        &mut self,
        now: u64,
        in_range: &[(DeviceAddress, EndpointId)],
    ) -> Vec<PeerEvent> {
        let current: BTreeMap<DeviceAddress, EndpointId> = in_range.iter().cloned().collect();
        let mut events = Vec::new();
        let gone: Vec<DeviceAddress> =
            self.peers.keys().filter(|a| !current.contains_key(a)).cloned().collect();
        for address in gone {
            let record = self.peers.remove(&address).expect("key taken from peers");
            events.push(PeerEvent::Disappeared { address, eid: record.eid });
        }
        for (address, eid) in current {
            let record = PeerRecord { address, eid, last_seen: now };
            let seen_before = self.peers.insert(address, record.clone()).is_some();
            events.push(if seen_before {
                PeerEvent::Refreshed(record)
            } else {
                PeerEvent::Appeared(record)
            });
        }
        events
    }

    /// Resolve an EID to its peer record, if that peer is currently known.
    pub fn lookup(&self, eid: &EndpointId) -> Option<&PeerRecord> {
        self.peers.values().find(|p| &p.eid == eid)
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerRecord> {
        self.peers.values()
    }
}

/// A bundle adapted for the link: destination address plus exact bit count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferJob {
    pub bundle_id: BundleId,
    pub to: DeviceAddress,
    pub bits: u64,
}

/// Resolve the peer's device address and size the serialized bundle in bits.
///
/// The bundle must already be in its transmit form (compressed or not); the
/// job carries whatever `serialize_bundle` would emit, times eight.
pub fn adapt_bundle(
    bundle: &Bundle,
    peer_eid: &EndpointId,
    peers: &DiscoveryState,
) -> Result<TransferJob, ConvergenceError> {
    if bundle.primary.destination().is_null() {
        return Err(ConvergenceError::NoRoute(bundle.id()));
    }
    let peer = peers
        .lookup(peer_eid)
        .ok_or_else(|| ConvergenceError::UnknownPeer(peer_eid.clone()))?;
    Ok(TransferJob {
        bundle_id: bundle.id(),
        to: peer.address,
        bits: bundle.serialized_len() as u64 * 8,
    })
}

/// Exact transfer time in integer microseconds.
///
/// `first_in_contact` adds the inquiry/paging setup cost. The payload phase
/// is `bits / rate` rounded up to the next microsecond, so the link never
/// runs faster than `rate_bps`.
pub fn transfer_duration_us(bits: u64, params: &LinkParams, first_in_contact: bool) -> u64 {
    let inquiry = if first_in_contact { params.inquiry_latency_us() } else { 0 };
    let payload = (u128::from(bits) * 1_000_000).div_ceil(u128::from(params.rate_bps));
    inquiry + u64::try_from(payload).expect("transfer duration fits 64 bits")
}

/// Result of attempting one transfer inside a contact.
#[derive(Debug, Clone, PartialEq)]
pub enum TransferResult {
    Completed { at_s: f64 },
    /// Contact ended mid-transfer; partial bits are wasted link budget, the
    /// receiver keeps nothing.
    Aborted { bits_sent: u64 },
}

/// A window of connectivity with one peer, with its remaining link budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub peer: PeerRecord,
    pub start_s: f64,
    pub end_s: f64,
    pub budget_bits_remaining: u64,
    inquiry_paid: bool,
}

impl Contact {
    pub fn new(peer: PeerRecord, start_s: f64, end_s: f64, params: &LinkParams) -> Self {
        assert!(end_s >= start_s, "contact ends before it starts");
        Self {
            peer,
            start_s,
            end_s,
            budget_bits_remaining: ((end_s - start_s) * params.rate_bps as f64) as u64,
            inquiry_paid: false,
        }
    }

    /// Run one job starting at `now_s`, consuming link budget.
    ///
    /// The first job of the contact pays the inquiry latency before any
    /// payload bit flows. If the job would finish after the contact ends it
    /// aborts, reporting the payload bits that made it onto the air.
    pub fn transmit(&mut self, job: &TransferJob, now_s: f64, params: &LinkParams) -> TransferResult {
        assert!(
            now_s >= self.start_s && now_s <= self.end_s,
            "transmit at {now_s} outside contact [{}, {}]",
            self.start_s,
            self.end_s
        );
        let inquiry = if self.inquiry_paid { 0.0 } else { params.inquiry_latency_s };
        self.inquiry_paid = true;
        let payload_start = now_s + inquiry;
        let finish = payload_start + job.bits as f64 / params.rate_bps as f64;
        if finish <= self.end_s {
            self.budget_bits_remaining = self.budget_bits_remaining.saturating_sub(job.bits);
            TransferResult::Completed { at_s: finish }
        } else {
            let overlap = (self.end_s - payload_start).max(0.0);
            let bits_sent = (overlap * params.rate_bps as f64) as u64;
            self.budget_bits_remaining = self.budget_bits_remaining.saturating_sub(bits_sent);
            TransferResult::Aborted { bits_sent }
        }
    }
}

/// The convergence-layer contract. The simulated implementation is
/// [`SimulatedBcl`]; a socket-backed one would slot in here.
pub trait ConvergenceLayer {
    fn params(&self) -> &LinkParams;

    /// One discovery round; see [`DiscoveryState::run_discovery`].
    fn run_discovery(
        &mut self,
        now: u64,
        in_range: &[(DeviceAddress, EndpointId)],
    ) -> Vec<PeerEvent>;

    /// EID→address adaptation; see [`adapt_bundle`].
    fn adapt_bundle(
        &self,
        bundle: &Bundle,
        peer_eid: &EndpointId,
    ) -> Result<TransferJob, ConvergenceError>;

    /// Rate-limited transfer within a contact; see [`Contact::transmit`].
    fn transmit(&self, job: &TransferJob, contact: &mut Contact, now_s: f64) -> TransferResult;
}

/// Simulated Bluetooth-like convergence layer.
#[derive(Debug, Clone)]
pub struct SimulatedBcl {
    params: LinkParams,
    discovery: DiscoveryState,
}

impl SimulatedBcl {
    pub fn new(params: LinkParams) -> Result<Self, ConvergenceError> {
        params.validate()?;
        Ok(Self { params, discovery: DiscoveryState::new() })
    }

    pub fn discovery(&self) -> &DiscoveryState {
        &self.discovery
    }
}

impl ConvergenceLayer for SimulatedBcl {
    fn params(&self) -> &LinkParams {
        &self.params
    }

    fn run_discovery(
        &mut self,
        now: u64,
        in_range: &[(DeviceAddress, EndpointId)],
    ) -> Vec<PeerEvent> {
        self.discovery.run_discovery(now, in_range)
    }

    fn adapt_bundle(
        &self,
        bundle: &Bundle,
        peer_eid: &EndpointId,
    ) -> Result<TransferJob, ConvergenceError> {
        adapt_bundle(bundle, peer_eid, &self.discovery)
    }

    fn transmit(&self, job: &TransferJob, contact: &mut Contact, now_s: f64) -> TransferResult {
        contact.transmit(job, now_s, &self.params)
    }
}
