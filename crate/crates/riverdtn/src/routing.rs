//! Epidemic store-carry-forward routing over summary vectors.
//!
//! Each node runs one [`EpidemicRouter`], a pure state machine fed by the
//! event switch. When two nodes come into contact they exchange summary
//! vectors (the set of bundle ids each stores) as a zero-cost control
//! message, and each side queues the bundles the other is missing, oldest
//! creation time first. Both sides push symmetrically, alternating transfers
//! to share the half-duplex channel; the simulator owns that alternation and
//! pulls work with [`EpidemicRouter::dequeue_for`].
//!
//! A router never re-offers a bundle to a peer that is known to hold it —
//! knowledge accumulates from the peer's summary vector, from completed
//! transfers to that peer, and from bundles received from it. Copies are kept
//! until TTL even after delivery to the destination (no "immunity"), unless
//! the scenario opts into deleting delivered bundles.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::bundle::{Bundle, BundleId, EndpointId};
use crate::convergence::{DeviceAddress, PeerRecord};
use crate::storage::BundleStore;

/// Timestamped input to a node's event switch.
///
/// Events are processed in nondecreasing `at_us` order; ties break on the
/// variant order below, then on the variant's own payload ordering, so any
/// set of simultaneous events has one canonical processing order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RouterEvent {
    /// Microseconds since simulation start (1 µs resolution carries exact
    /// sub-second transfer completions).
    pub at_us: u64,
    pub kind: RouterEventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RouterEventKind {
    PeerAppeared(PeerRecord),
    PeerDisappeared(DeviceAddress),
    BundleStored(BundleId),
    TransferCompleted(BundleId, DeviceAddress),
    TransferAborted(BundleId, DeviceAddress),
}

/// The set of bundle ids a node holds, exchanged at contact start.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SummaryVector {
    pub ids: BTreeSet<BundleId>,
}

impl SummaryVector {
    pub fn contains(&self, id: &BundleId) -> bool {
        self.ids.contains(id)
    }
}

impl From<BTreeSet<BundleId>> for SummaryVector {
    fn from(ids: BTreeSet<BundleId>) -> Self {
        Self { ids }
    }
}

/// Instruction back to the simulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouterAction {
    /// Nothing to send to this peer; the connection can close from this side.
    CloseConnection { peer: DeviceAddress },
}

/// What happened when a received bundle reached the local endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryOutcome {
    DeliveredFirstCopy,
    DuplicateCopy,
    NotForMe,
}

#[derive(Debug, Clone)]
struct PeerState {
    record: PeerRecord,
    /// Ids this peer is known to hold: its summary vector plus everything we
    /// completed to it plus everything it sent us.
    knows: BTreeSet<BundleId>,
    queue: VecDeque<BundleId>,
    queued: BTreeSet<BundleId>,
}

impl PeerState {
    fn enqueue(&mut self, id: BundleId) {
        if !self.knows.contains(&id) && self.queued.insert(id.clone()) {
            self.queue.push_back(id);
        }
    }
}

/// Per-node epidemic routing state; see module docs.
#[derive(Debug, Clone)]
pub struct EpidemicRouter {
    node_eid: EndpointId,
    peers: BTreeMap<DeviceAddress, PeerState>,
}

impl EpidemicRouter {
    pub fn new(node_eid: EndpointId) -> Self {
        Self { node_eid, peers: BTreeMap::new() }
    }

    pub fn node_eid(&self) -> &EndpointId {
        &self.node_eid
    }

    /// Addresses of peers currently in contact, in address order.
    pub fn active_peers(&self) -> impl Iterator<Item = &PeerRecord> {
        self.peers.values().map(|p| &p.record)
    }

    pub fn pending_for(&self, peer: DeviceAddress) -> usize {
        self.peers.get(&peer).map_or(0, |p| p.queue.len())
    }

    /// Contact start: take the peer's summary vector and queue everything we
    /// hold that it lacks, oldest creation time first (ties by id).
    ///
    /// Bundles addressed to the null endpoint are never transfer targets, and
    /// expired entries are skipped even if the store has not purged them yet.
    pub fn on_peer_appeared(
        &mut self,
        peer: PeerRecord,
        peer_summary: SummaryVector,
        store: &BundleStore,
        now_s: u64,
    ) -> Vec<RouterAction> {
        let address = peer.address;
        let mut state = PeerState {
            record: peer,
            knows: peer_summary.ids,
            queue: VecDeque::new(),
            queued: BTreeSet::new(),
        };
        // Oldest-first: the bundles closest to expiry get the contact's bits
        // before fresher ones can crowd them out.
        let mut missing: Vec<(u64, BundleId)> = store
            .iter()
            .filter(|e| e.expires_at > now_s)
            .filter(|e| !e.bundle.primary.destination().is_null())
            .map(|e| (e.bundle.primary.creation_time, e.bundle.id()))
            .filter(|(_, id)| !state.knows.contains(id))
            .collect();
        missing.sort();
        for (_, id) in missing {
            state.enqueue(id);
        }
        let mut actions = Vec::new();
        if state.queue.is_empty() {
            actions.push(RouterAction::CloseConnection { peer: address });
        }
        self.peers.insert(address, state);
        actions
    }

    /// Contact end: forget the peer and drop its queue.
    pub fn on_peer_disappeared(&mut self, address: DeviceAddress) {
        self.peers.remove(&address);
    }

    /// A new bundle landed in the local store: offer it to every active peer
    /// not known to hold it.
    pub fn on_bundle_stored(&mut self, id: &BundleId, store: &BundleStore, now_s: u64) {
        let Some(entry) = store.entry(id) else { return };
        if entry.expires_at <= now_s || entry.bundle.primary.destination().is_null() {
            return;
        }
        for state in self.peers.values_mut() {
            state.enqueue(id.clone());
        }
    }

    /// A transfer to `peer` finished: it now holds the bundle.
    pub fn on_transfer_completed(&mut self, id: &BundleId, peer: DeviceAddress) {
        if let Some(state) = self.peers.get_mut(&peer) {
            state.knows.insert(id.clone());
        }
    }

    /// A transfer to `peer` died with the contact; the id was already
    /// dequeued and the peer will disappear at the next discovery round, so
    /// there is nothing to roll back.
    pub fn on_transfer_aborted(&mut self, _id: &BundleId, _peer: DeviceAddress) {}

    /// Record out-of-band knowledge that `peer` holds `id` — in particular
    /// when `peer` just sent it to us — and stop offering it.
    pub fn note_peer_has(&mut self, peer: DeviceAddress, id: &BundleId) {
        if let Some(state) = self.peers.get_mut(&peer) {
            state.knows.insert(id.clone());
            if state.queued.remove(id) {
                state.queue.retain(|q| q != id);
            }
        }
    }

    /// Next bundle to send to `peer`, skipping entries that have expired,
    /// left the store, or become known to the peer since they were queued.
    pub fn dequeue_for(
        &mut self,
        peer: DeviceAddress,
        store: &BundleStore,
        now_s: u64,
    ) -> Option<BundleId> {
        let state = self.peers.get_mut(&peer)?;
        while let Some(id) = state.queue.pop_front() {
            state.queued.remove(&id);
            if state.knows.contains(&id) {
                continue;
            }
            match store.entry(&id) {
                Some(entry) if entry.expires_at > now_s => return Some(id),
                _ => continue,
            }
        }
        None
    }
}

/// Hand a fully received (and decompressed) bundle to the local endpoint.
///
/// First copies are remembered in the store's delivered set so later copies
/// of the same bundle count as duplicates, not fresh deliveries.
pub fn deliver_local(
    store: &mut BundleStore,
    bundle: &Bundle,
    node_eid: &EndpointId,
) -> DeliveryOutcome {
    if &bundle.primary.destination() != node_eid {
        return DeliveryOutcome::NotForMe;
    }
    let id = bundle.id();
    if store.is_delivered(&id) {
        return DeliveryOutcome::DuplicateCopy;
    }
    store.mark_delivered(id);
    DeliveryOutcome::DeliveredFirstCopy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::PayloadBlock;

    fn eid(s: &str) -> EndpointId {
        s.parse().unwrap()
    }

    fn addr(n: u64) -> DeviceAddress {
        DeviceAddress::new(n).unwrap()
    }

    fn record(n: u64, name: &str) -> PeerRecord {
        PeerRecord { address: addr(n), eid: eid(name), last_seen: 0 }
    }

    fn make_bundle(dest: &str, src: &str, time: u64, seq: u64, lifetime: u64) -> Bundle {
        Bundle::new(
            &eid(dest),
            &eid(src),
            &EndpointId::null(),
            &EndpointId::null(),
            time,
            seq,
            lifetime,
            PayloadBlock::plain(vec![0u8; 16]),
        )
        .unwrap()
    }

    fn summary_of(store: &BundleStore) -> SummaryVector {
        SummaryVector::from(store.summary_vector())
    }

    #[test]
    fn equal_stores_close_the_connection() {
        let mut store_a = BundleStore::new(1 << 20);
        let mut store_b = BundleStore::new(1 << 20);
        let x = make_bundle("dtn://z/app", "dtn://s/app", 0, 0, 100);
        store_a.store(x.clone(), 0);
        store_b.store(x, 0);

        let mut router = EpidemicRouter::new(eid("dtn://a/app"));
        let actions =
            router.on_peer_appeared(record(2, "dtn://b/app"), summary_of(&store_b), &store_a, 0);
        assert_eq!(actions, vec![RouterAction::CloseConnection { peer: addr(2) }]);
        assert_eq!(router.dequeue_for(addr(2), &store_a, 0), None);
    }

    #[test]
    fn only_missing_bundles_are_queued() {
        let mut store_a = BundleStore::new(1 << 20);
        let mut store_b = BundleStore::new(1 << 20);
        let x = make_bundle("dtn://z/app", "dtn://s/app", 0, 0, 100);
        let y = make_bundle("dtn://z/app", "dtn://s/app", 0, 1, 100);
        store_a.store(x.clone(), 0);
        store_a.store(y.clone(), 0);
        store_b.store(y.clone(), 0);

        let mut a = EpidemicRouter::new(eid("dtn://a/app"));
        let actions = a.on_peer_appeared(record(2, "dtn://b/app"), summary_of(&store_b), &store_a, 0);
        assert!(actions.is_empty());
        assert_eq!(a.dequeue_for(addr(2), &store_a, 0), Some(x.id()));
        assert_eq!(a.dequeue_for(addr(2), &store_a, 0), None);

        let mut b = EpidemicRouter::new(eid("dtn://b/app"));
        let actions = b.on_peer_appeared(record(1, "dtn://a/app"), summary_of(&store_a), &store_b, 0);
        assert_eq!(actions, vec![RouterAction::CloseConnection { peer: addr(1) }]);
    }

    #[test]
    fn queue_is_oldest_creation_first_with_id_ties() {
        let mut store = BundleStore::new(1 << 20);
        let newer = make_bundle("dtn://z/app", "dtn://s/app", 50, 0, 500);
        let older_hi = make_bundle("dtn://z/app", "dtn://t/app", 10, 3, 500);
        let older_lo = make_bundle("dtn://z/app", "dtn://s/app", 10, 7, 500);
        for b in [&newer, &older_hi, &older_lo] {
            store.store(b.clone(), 60);
        }
        let mut r = EpidemicRouter::new(eid("dtn://a/app"));
        r.on_peer_appeared(record(2, "dtn://b/app"), SummaryVector::default(), &store, 60);
        // Creation 10 before 50; at creation 10, source dtn://s < dtn://t.
        assert_eq!(r.dequeue_for(addr(2), &store, 60), Some(older_lo.id()));
        assert_eq!(r.dequeue_for(addr(2), &store, 60), Some(older_hi.id()));
        assert_eq!(r.dequeue_for(addr(2), &store, 60), Some(newer.id()));
    }

    #[test]
    fn three_node_chain_relays_via_store_carry_forward() {
        // A meets B, hands over x; later B meets C and relays it.
        let x = make_bundle("dtn://c/app", "dtn://a/app", 0, 0, 1000);
        let mut store_a = BundleStore::new(1 << 20);
        let mut store_b = BundleStore::new(1 << 20);
        let mut store_c = BundleStore::new(1 << 20);
        store_a.store(x.clone(), 0);

        let mut a = EpidemicRouter::new(eid("dtn://a/app"));
        let mut b = EpidemicRouter::new(eid("dtn://b/app"));

        a.on_peer_appeared(record(2, "dtn://b/app"), summary_of(&store_b), &store_a, 10);
        b.on_peer_appeared(record(1, "dtn://a/app"), summary_of(&store_a), &store_b, 10);
        let sent = a.dequeue_for(addr(2), &store_a, 10).unwrap();
        assert_eq!(sent, x.id());
        // Transfer completes: B stores it, learns A has it; A learns B has it.
        store_b.store(store_a.get(&sent).unwrap().clone(), 12);
        a.on_transfer_completed(&sent, addr(2));
        b.note_peer_has(addr(1), &sent);
        b.on_bundle_stored(&sent, &store_b, 12);
        assert_eq!(deliver_local(&mut store_b, &x, &eid("dtn://b/app")), DeliveryOutcome::NotForMe);
        // B must not echo x back to A.
        assert_eq!(b.dequeue_for(addr(1), &store_b, 12), None);

        a.on_peer_disappeared(addr(2));
        b.on_peer_disappeared(addr(1));

        // Later contact B–C.
        let mut c = EpidemicRouter::new(eid("dtn://c/app"));
        b.on_peer_appeared(record(3, "dtn://c/app"), summary_of(&store_c), &store_b, 500);
        c.on_peer_appeared(record(2, "dtn://b/app"), summary_of(&store_b), &store_c, 500);
        let relayed = b.dequeue_for(addr(3), &store_b, 500).unwrap();
        assert_eq!(relayed, x.id());
        store_c.store(store_b.get(&relayed).unwrap().clone(), 502);
        assert_eq!(
            deliver_local(&mut store_c, &x, &eid("dtn://c/app")),
            DeliveryOutcome::DeliveredFirstCopy
        );
        assert_eq!(
            deliver_local(&mut store_c, &x, &eid("dtn://c/app")),
            DeliveryOutcome::DuplicateCopy
        );
    }

    #[test]
    fn stored_bundle_is_offered_to_lacking_peers_only() {
        let mut store = BundleStore::new(1 << 20);
        let mut r = EpidemicRouter::new(eid("dtn://a/app"));
        let x = make_bundle("dtn://z/app", "dtn://s/app", 0, 0, 100);

        // No contacts: nothing happens.
        store.store(x.clone(), 1);
        r.on_bundle_stored(&x.id(), &store, 1);

        // Two contacts, one already has it.
        let mut has_it = SummaryVector::default();
        has_it.ids.insert(x.id());
        r.on_peer_appeared(record(2, "dtn://b/app"), has_it, &store, 1);
        r.on_peer_appeared(record(3, "dtn://c/app"), SummaryVector::default(), &store, 1);
        // Peer 3 got x queued from the summary diff; a fresh store event must
        // not double-queue it.
        r.on_bundle_stored(&x.id(), &store, 1);
        assert_eq!(r.pending_for(addr(2)), 0);
        assert_eq!(r.pending_for(addr(3)), 1);
        assert_eq!(r.dequeue_for(addr(3), &store, 1), Some(x.id()));
        assert_eq!(r.dequeue_for(addr(3), &store, 1), None);
    }

    #[test]
    fn expired_bundles_are_never_offered() {
        let mut store = BundleStore::new(1 << 20);
        let x = make_bundle("dtn://z/app", "dtn://s/app", 0, 0, 100);
        store.store(x.clone(), 0);
        let mut r = EpidemicRouter::new(eid("dtn://a/app"));
        // Already past expiry at contact time, store not yet purged.
        r.on_peer_appeared(record(2, "dtn://b/app"), SummaryVector::default(), &store, 100);
        assert_eq!(r.pending_for(addr(2)), 0);

        // Expires between enqueue and dequeue.
        let mut r2 = EpidemicRouter::new(eid("dtn://a/app"));
        r2.on_peer_appeared(record(2, "dtn://b/app"), SummaryVector::default(), &store, 50);
        assert_eq!(r2.pending_for(addr(2)), 1);
        assert_eq!(r2.dequeue_for(addr(2), &store, 100), None);
    }

    #[test]
    fn null_destination_is_never_a_transfer_target() {
        let mut store = BundleStore::new(1 << 20);
        let to_nobody = make_bundle("dtn:none", "dtn://s/app", 0, 0, 100);
        store.store(to_nobody.clone(), 0);
        let mut r = EpidemicRouter::new(eid("dtn://a/app"));
        r.on_peer_appeared(record(2, "dtn://b/app"), SummaryVector::default(), &store, 0);
        assert_eq!(r.pending_for(addr(2)), 0);
        r.on_bundle_stored(&to_nobody.id(), &store, 0);
        assert_eq!(r.pending_for(addr(2)), 0);
    }

    #[test]
    fn disappearance_clears_the_queue() {
        let mut store = BundleStore::new(1 << 20);
        store.store(make_bundle("dtn://z/app", "dtn://s/app", 0, 0, 100), 0);
        let mut r = EpidemicRouter::new(eid("dtn://a/app"));
        r.on_peer_appeared(record(2, "dtn://b/app"), SummaryVector::default(), &store, 0);
        assert_eq!(r.pending_for(addr(2)), 1);
        r.on_peer_disappeared(addr(2));
        assert_eq!(r.pending_for(addr(2)), 0);
        assert_eq!(r.dequeue_for(addr(2), &store, 0), None);
    }

    #[test]
    fn dequeue_skips_bundles_evicted_from_store() {
        let mut store = BundleStore::new(1 << 20);
        let x = make_bundle("dtn://z/app", "dtn://s/app", 0, 0, 100);
        store.store(x.clone(), 0);
        let mut r = EpidemicRouter::new(eid("dtn://a/app"));
        r.on_peer_appeared(record(2, "dtn://b/app"), SummaryVector::default(), &store, 0);
        store.remove(&x.id());
        assert_eq!(r.dequeue_for(addr(2), &store, 0), None);
    }

    #[test]
    fn router_events_order_by_time_then_variant_then_payload() {
        let id_a = make_bundle("dtn://z/app", "dtn://a/app", 0, 0, 10).id();
        let id_b = make_bundle("dtn://z/app", "dtn://b/app", 0, 0, 10).id();
        let mut events = vec![
            RouterEvent { at_us: 5, kind: RouterEventKind::BundleStored(id_b.clone()) },
            RouterEvent { at_us: 5, kind: RouterEventKind::BundleStored(id_a.clone()) },
            RouterEvent { at_us: 5, kind: RouterEventKind::PeerAppeared(record(9, "dtn://p/app")) },
            RouterEvent { at_us: 1, kind: RouterEventKind::TransferCompleted(id_b.clone(), addr(1)) },
        ];
        events.sort();
        assert_eq!(events[0].at_us, 1);
        assert!(matches!(events[1].kind, RouterEventKind::PeerAppeared(_)));
        assert_eq!(events[2].kind, RouterEventKind::BundleStored(id_a));
        assert_eq!(events[3].kind, RouterEventKind::BundleStored(id_b));
    }
}
