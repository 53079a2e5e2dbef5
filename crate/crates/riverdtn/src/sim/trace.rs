//! Contact-trace replay with idealized instantaneous transfers.
//!
//! Drives the real [`BundleStore`] and [`EpidemicRouter`] through a
//! hand-written contact plan in which every transfer completes in zero time.
//! With bandwidth out of the picture, epidemic flooding must deliver exactly
//! the bundles whose destination is reachable through a time-respecting
//! contact path before the TTL runs out — a property simple enough to check
//! against an independent reachability computation, which makes this module
//! the reference executor for the routing and storage stack.
//!
//! Contacts are inclusive on both ends: a contact `[s, e]` can carry
//! transfers at any instant `t` with `s <= t <= e`. A bundle with creation
//! time `c` and TTL `l` is usable at `t` only while `t < c + l`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{Bundle, EndpointId, PayloadBlock};
use crate::convergence::{DeviceAddress, PeerRecord};
use crate::routing::{deliver_local, DeliveryOutcome, EpidemicRouter, SummaryVector};
use crate::storage::{BundleStore, StoreOutcome};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("{what} {index} refers to node {node}, but the trace has {nodes} nodes")]
    NodeOutOfRange { what: &'static str, index: usize, node: usize, nodes: usize },
    #[error("contact {index} connects node {node} to itself")]
    SelfContact { index: usize, node: usize },
    #[error("contact {index} starts at {start_s} after its end {end_s}")]
    BadInterval { index: usize, start_s: u64, end_s: u64 },
    #[error("bundle {index} has zero TTL")]
    ZeroTtl { index: usize },
}

/// One bundle in the plan, by node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub source: usize,
    pub dest: usize,
    pub created_s: u64,
    pub ttl_s: u64,
}

/// One contact window between two nodes, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceContact {
    pub a: usize,
    pub b: usize,
    pub start_s: u64,
    pub end_s: u64,
}

/// A complete replay plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub nodes: usize,
    pub bundles: Vec<TraceBundle>,
    pub contacts: Vec<TraceContact>,
}

impl TraceSpec {
    pub fn validate(&self) -> Result<(), TraceError> {
        for (index, b) in self.bundles.iter().enumerate() {
            for (what, node) in [("bundle source", b.source), ("bundle dest", b.dest)] {
                if node >= self.nodes {
                    return Err(TraceError::NodeOutOfRange {
                        what,
                        index,
                        node,
                        nodes: self.nodes,
                    });
                }
            }
            if b.ttl_s == 0 {
                return Err(TraceError::ZeroTtl { index });
            }
        }
        for (index, c) in self.contacts.iter().enumerate() {
            for (what, node) in [("contact endpoint", c.a), ("contact endpoint", c.b)] {
                if node >= self.nodes {
                    return Err(TraceError::NodeOutOfRange {
                        what,
                        index,
                        node,
                        nodes: self.nodes,
                    });
                }
            }
            if c.a == c.b {
                return Err(TraceError::SelfContact { index, node: c.a });
            }
            if c.start_s > c.end_s {
                return Err(TraceError::BadInterval {
                    index,
                    start_s: c.start_s,
                    end_s: c.end_s,
                });
            }
        }
        Ok(())
    }
}

/// Per-bundle delivery instants (`None` = never delivered).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceReport {
    pub delivery_time_s: Vec<Option<u64>>,
}

impl TraceReport {
    pub fn delivered(&self) -> usize {
        self.delivery_time_s.iter().filter(|t| t.is_some()).count()
    }
}

struct TraceNode {
    eid: EndpointId,
    address: DeviceAddress,
    store: BundleStore,
    router: EpidemicRouter,
}

/// Replay a plan. Deterministic in the spec alone.
pub fn run_trace(spec: &TraceSpec) -> Result<TraceReport, TraceError> {
    spec.validate()?;
    let mut nodes: Vec<TraceNode> = (0..spec.nodes)
        .map(|i| {
            let eid: EndpointId =
                format!("dtn://trace-{i}/in").parse().expect("generated EID is valid");
            TraceNode {
                eid: eid.clone(),
                address: DeviceAddress::new(i as u64 + 1).expect("small index"),
                store: BundleStore::new(u64::MAX / 4),
                router: EpidemicRouter::new(eid),
            }
        })
        .collect();

    let bundles: Vec<Bundle> = spec
        .bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            Bundle::new(
                &nodes[b.dest].eid,
                &nodes[b.source].eid,
                &EndpointId::null(),
                &EndpointId::null(),
                b.created_s,
                i as u64,
                b.ttl_s,
                PayloadBlock { flags: 0, data: bytes::Bytes::from_static(b"trace") },
            )
            .expect("trace bundles are well-formed")
        })
        .collect();

    let mut delivery_time_s: Vec<Option<u64>> = vec![None; spec.bundles.len()];

    // Anything can change only at a creation instant or a contact boundary.
    let times: BTreeSet<u64> = spec
        .bundles
        .iter()
        .map(|b| b.created_s)
        .chain(spec.contacts.iter().flat_map(|c| [c.start_s, c.end_s]))
        .collect();

    let mut connected: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &now in &times {
        for node in &mut nodes {
            node.store.expire(now);
        }

        // Sync router connectivity with the contacts active at `now`.
        let active: BTreeSet<(usize, usize)> = spec
            .contacts
            .iter()
            .filter(|c| c.start_s <= now && now <= c.end_s)
            .map(|c| (c.a.min(c.b), c.a.max(c.b)))
            .collect();
        for &(a, b) in connected.difference(&active) {
            let (addr_a, addr_b) = (nodes[a].address, nodes[b].address);
            nodes[a].router.on_peer_disappeared(addr_b);
            nodes[b].router.on_peer_disappeared(addr_a);
        }
        for &(a, b) in active.difference(&connected).collect::<Vec<_>>() {
            for (me, peer) in [(a, b), (b, a)] {
                let record = PeerRecord {
                    address: nodes[peer].address,
                    eid: nodes[peer].eid.clone(),
                    last_seen: now,
                };
                let summary = SummaryVector::from(nodes[peer].store.summary_vector());
                let n = &mut nodes[me];
                n.router.on_peer_appeared(record, summary, &n.store, now);
            }
        }
        connected = active;

        for (i, b) in spec.bundles.iter().enumerate() {
            if b.created_s == now {
                admit(&mut nodes[b.source], bundles[i].clone(), now, i, &mut delivery_time_s);
            }
        }

        // Flood to fixpoint: with infinite bandwidth every queued transfer
        // happens "now", including ones enabled by transfers this round.
        loop {
            let mut progress = false;
            for &(a, b) in &connected {
                for (s, r) in [(a, b), (b, a)] {
                    let receiver_addr = nodes[r].address;
                    loop {
                        let id = {
                            let n = &mut nodes[s];
                            match n.router.dequeue_for(receiver_addr, &n.store, now) {
                                Some(id) => id,
                                None => break,
                            }
                        };
                        let Some(bundle) = nodes[s].store.get(&id).cloned() else { continue };
                        let sender_addr = nodes[s].address;
                        nodes[s].router.on_transfer_completed(&id, receiver_addr);
                        nodes[r].router.note_peer_has(sender_addr, &id);
                        let index = bundles.iter().position(|x| x.id() == id);
                        admit_any(&mut nodes[r], bundle, now, index, &mut delivery_time_s);
                        progress = true;
                    }
                }
            }
            if !progress {
                break;
            }
        }
    }

    Ok(TraceReport { delivery_time_s })
}

fn admit(
    node: &mut TraceNode,
    bundle: Bundle,
    now: u64,
    index: usize,
    delivery_time_s: &mut [Option<u64>],
) {
    admit_any(node, bundle, now, Some(index), delivery_time_s);
}

fn admit_any(
    node: &mut TraceNode,
    bundle: Bundle,
    now: u64,
    index: Option<usize>,
    delivery_time_s: &mut [Option<u64>],
) {
    let id = bundle.id();
    match node.store.store(bundle.clone(), now) {
        StoreOutcome::Stored { .. } => {
            if deliver_local(&mut node.store, &bundle, &node.eid)
                == DeliveryOutcome::DeliveredFirstCopy
            {
                if let Some(i) = index {
                    delivery_time_s[i].get_or_insert(now);
                }
            }
            if node.store.contains(&id) {
                node.router.on_bundle_stored(&id, &node.store, now);
            }
        }
        StoreOutcome::Duplicate | StoreOutcome::Expired | StoreOutcome::Rejected => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(nodes: usize, bundles: &[(usize, usize, u64, u64)], contacts: &[(usize, usize, u64, u64)]) -> TraceSpec {
        TraceSpec {
            nodes,
            bundles: bundles
                .iter()
                .map(|&(source, dest, created_s, ttl_s)| TraceBundle {
                    source,
                    dest,
                    created_s,
                    ttl_s,
                })
                .collect(),
            contacts: contacts
                .iter()
                .map(|&(a, b, start_s, end_s)| TraceContact { a, b, start_s, end_s })
                .collect(),
        }
    }

    #[test]
    fn relay_chain_respects_contact_order() {
        let forward = spec(3, &[(0, 2, 0, 1000)], &[(0, 1, 0, 10), (1, 2, 20, 30)]);
        assert_eq!(run_trace(&forward).unwrap().delivery_time_s, vec![Some(20)]);
        // Same windows, but the downstream hop happens first: the copy is
        // stranded at node 1.
        let backward = spec(3, &[(0, 2, 0, 1000)], &[(1, 2, 0, 10), (0, 1, 20, 30)]);
        assert_eq!(run_trace(&backward).unwrap().delivery_time_s, vec![None]);
    }

    #[test]
    fn expiry_boundary_is_exclusive_at_the_deadline() {
        let chain = |ttl| spec(3, &[(0, 2, 0, ttl)], &[(0, 1, 0, 10), (1, 2, 20, 30)]);
        assert_eq!(run_trace(&chain(21)).unwrap().delivery_time_s, vec![Some(20)]);
        // Expires exactly when the second window opens: too late.
        assert_eq!(run_trace(&chain(20)).unwrap().delivery_time_s, vec![None]);
    }

    #[test]
    fn contact_end_is_inclusive() {
        let at = |created| spec(2, &[(0, 1, created, 100)], &[(0, 1, 0, 5)]);
        assert_eq!(run_trace(&at(5)).unwrap().delivery_time_s, vec![Some(5)]);
        assert_eq!(run_trace(&at(6)).unwrap().delivery_time_s, vec![None]);
    }

    #[test]
    fn simultaneous_contacts_cascade_in_one_instant() {
        let s = spec(4, &[(0, 3, 0, 100)], &[(0, 1, 7, 7), (1, 2, 7, 7), (2, 3, 7, 7)]);
        assert_eq!(run_trace(&s).unwrap().delivery_time_s, vec![Some(7)]);
    }

    #[test]
    fn self_addressed_bundle_delivers_at_creation() {
        let s = spec(2, &[(0, 0, 4, 10)], &[]);
        assert_eq!(run_trace(&s).unwrap().delivery_time_s, vec![Some(4)]);
    }

    #[test]
    fn disjoint_components_never_mix() {
        let s = spec(4, &[(0, 3, 0, 1000)], &[(0, 1, 0, 100), (2, 3, 0, 100)]);
        assert_eq!(run_trace(&s).unwrap().delivery_time_s, vec![None]);
    }

    #[test]
    fn gap_between_contact_windows_is_respected() {
        // Created during the gap: rides the second window.
        let two = spec(2, &[(0, 1, 6, 100)], &[(0, 1, 0, 5), (0, 1, 8, 10)]);
        assert_eq!(run_trace(&two).unwrap().delivery_time_s, vec![Some(8)]);
        let one = spec(2, &[(0, 1, 6, 100)], &[(0, 1, 0, 5)]);
        assert_eq!(run_trace(&one).unwrap().delivery_time_s, vec![None]);
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(matches!(
            run_trace(&spec(2, &[(0, 2, 0, 10)], &[])),
            Err(TraceError::NodeOutOfRange { .. })
        ));
        assert!(matches!(
            run_trace(&spec(2, &[], &[(1, 1, 0, 10)])),
            Err(TraceError::SelfContact { .. })
        ));
        assert!(matches!(
            run_trace(&spec(2, &[], &[(0, 1, 10, 0)])),
            Err(TraceError::BadInterval { .. })
        ));
        assert!(matches!(
            run_trace(&spec(2, &[(0, 1, 0, 0)], &[])),
            Err(TraceError::ZeroTtl { .. })
        ));
    }
}
