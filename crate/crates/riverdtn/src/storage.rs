//! Bounded per-node bundle buffer with TTL expiry and FIFO eviction.
//!
//! Each node owns one [`BundleStore`]. Admission is capacity-checked against
//! exact serialized sizes; when a new bundle does not fit, the oldest-stored
//! bundles (ties broken by [`BundleId`] order) are evicted until it does. A
//! bundle larger than the whole capacity is rejected outright, without
//! disturbing the store. Expiry is inclusive: a bundle whose
//! `creation_time + lifetime` equals the current time is already dead.
//!
//! The store also remembers which bundle ids have been delivered to local
//! endpoints, so re-received copies of a delivered bundle are not delivered
//! twice.
//!
//! # Snapshot format
//!
//! [`BundleStore::snapshot`] serializes the stored entries (not the
//! delivered-id memory) as:
//!
//! ```text
//! magic "RDSNAP"   6 raw bytes
//! version          1 raw byte, currently 1
//! count            SDNV
//! entries          count × { stored_at SDNV | length SDNV | bundle bytes }
//! ```

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::bundle::{self, Bundle, BundleError, BundleId};
use crate::sdnv;

const SNAPSHOT_MAGIC: &[u8; 6] = b"RDSNAP";
const SNAPSHOT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("malformed snapshot at byte {pos}: {reason}")]
    MalformedSnapshot { pos: usize, reason: String },
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

fn snapshot_err(pos: usize, reason: impl Into<String>) -> StorageError {
    StorageError::MalformedSnapshot { pos, reason: reason.into() }
}

/// Result of offering a bundle to the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreOutcome {
    /// Admitted; lists the ids evicted to make room (oldest first).
    Stored { evicted: Vec<BundleId> },
    /// A bundle with this id is already stored.
    Duplicate,
    /// The bundle's lifetime had already elapsed at the offered time.
    Expired,
    /// Larger than the whole store capacity; nothing was evicted.
    Rejected,
}

impl StoreOutcome {
    pub fn is_stored(&self) -> bool {
        matches!(self, StoreOutcome::Stored { .. })
    }
}

/// A stored bundle with its bookkeeping times (seconds).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredEntry {
    pub bundle: Bundle,
    pub stored_at: u64,
    pub expires_at: u64,
}

/// Bounded bundle buffer; see module docs for admission and eviction rules.
#[derive(Debug, Clone)]
pub struct BundleStore {
    capacity_bytes: u64,
    occupancy_bytes: u64,
    entries: BTreeMap<BundleId, StoredEntry>,
    /// Eviction order: (stored_at, id), oldest first.
    by_age: BTreeSet<(u64, BundleId)>,
    /// Expiry order: (expires_at, id), soonest first.
    by_expiry: BTreeSet<(u64, BundleId)>,
    delivered: BTreeSet<BundleId>,
}

impl BundleStore {
    pub fn new(capacity_bytes: u64) -> Self {
        Self {
            capacity_bytes,
            occupancy_bytes: 0,
            entries: BTreeMap::new(),
            by_age: BTreeSet::new(),
            by_expiry: BTreeSet::new(),
            delivered: BTreeSet::new(),
        }
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn occupancy_bytes(&self) -> u64 {
        self.occupancy_bytes
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &BundleId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &BundleId) -> Option<&Bundle> {
        self.entries.get(id).map(|e| &e.bundle)
    }

    pub fn entry(&self, id: &BundleId) -> Option<&StoredEntry> {
        self.entries.get(id)
    }

    /// Stored entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = &StoredEntry> {
        self.entries.values()
    }

    /// Offer a bundle at time `now`; see [`StoreOutcome`] for the verdicts.
    pub fn store(&mut self, bundle: Bundle, now: u64) -> StoreOutcome {
        let id = bundle.id();
        if self.entries.contains_key(&id) {
            return StoreOutcome::Duplicate;
        }
        let expires_at = bundle.expires_at();
        if now >= expires_at {
            return StoreOutcome::Expired;
        }
        let size = bundle.serialized_len() as u64;
        if size > self.capacity_bytes {
            return StoreOutcome::Rejected;
        }
        let mut evicted = Vec::new();
        while self.occupancy_bytes + size > self.capacity_bytes {
            let &(_, ref victim) = self.by_age.iter().next().expect("occupancy > 0 implies entries");
            let victim = victim.clone();
            self.remove(&victim);
            evicted.push(victim);
        }
        self.by_age.insert((now, id.clone()));
        self.by_expiry.insert((expires_at, id.clone()));
        self.occupancy_bytes += size;
        self.entries.insert(id, StoredEntry { bundle, stored_at: now, expires_at });
        StoreOutcome::Stored { evicted }
    }

    /// Remove every bundle whose expiry time is ≤ `now`; returns the purged
    /// ids in ascending id order.
    pub fn expire(&mut self, now: u64) -> Vec<BundleId> {
        let mut purged: Vec<BundleId> = Vec::new();
        while let Some((expires_at, id)) = self.by_expiry.iter().next().cloned() {
            if expires_at > now {
                break;
            }
            self.remove(&id);
            purged.push(id);
        }
        purged.sort();
        purged
    }

    /// Remove one bundle by id (e.g. after local delivery when the scenario
    /// deletes delivered bundles). Returns whether it was present.
    pub fn remove(&mut self, id: &BundleId) -> bool {
        match self.entries.remove(id) {
            Some(entry) => {
                self.by_age.remove(&(entry.stored_at, id.clone()));
                self.by_expiry.remove(&(entry.expires_at, id.clone()));
                self.occupancy_bytes -= entry.bundle.serialized_len() as u64;
                true
            }
            None => false,
        }
    }

    /// Ids of all currently stored bundles, for epidemic summary exchange.
    ///
    /// Reflects the store as of the last `store`/`expire` call; callers that
    /// care about freshness expire first.
    pub fn summary_vector(&self) -> BTreeSet<BundleId> {
        self.entries.keys().cloned().collect()
    }

    /// Record that this bundle reached its local endpoint.
    pub fn mark_delivered(&mut self, id: BundleId) {
        self.delivered.insert(id);
    }

    pub fn is_delivered(&self, id: &BundleId) -> bool {
        self.delivered.contains(id)
    }

    /// Serialize the stored entries; see module docs for the layout.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.push(SNAPSHOT_VERSION);
        sdnv::encode_into(self.entries.len() as u64, &mut out);
        for entry in self.entries.values() {
            sdnv::encode_into(entry.stored_at, &mut out);
            let bytes = bundle::serialize_bundle(&entry.bundle);
            sdnv::encode_into(bytes.len() as u64, &mut out);
            out.extend_from_slice(&bytes);
        }
        out
    }

    /// Rebuild a store from a snapshot, re-admitting entries in their
    /// original storage order. Entries that no longer fit the given capacity
    /// are dropped the same way live admission would drop them.
    pub fn restore(capacity_bytes: u64, snapshot: &[u8]) -> Result<Self, StorageError> {
        if snapshot.len() < SNAPSHOT_MAGIC.len() + 1 || &snapshot[..6] != SNAPSHOT_MAGIC {
            return Err(snapshot_err(0, "missing RDSNAP magic"));
        }
        let version = snapshot[6];
        if version != SNAPSHOT_VERSION {
            return Err(snapshot_err(6, format!("unsupported snapshot version {version}")));
        }
        let mut cur = 7usize;
        let (count, n) = sdnv::decode(snapshot, cur).map_err(BundleError::from)?;
        cur += n;
        let mut items = Vec::new();
        for _ in 0..count {
            let (stored_at, n) = sdnv::decode(snapshot, cur).map_err(BundleError::from)?;
            cur += n;
            let (len, n) = sdnv::decode(snapshot, cur).map_err(BundleError::from)?;
            cur += n;
            let len = usize::try_from(len)
                .map_err(|_| snapshot_err(cur, "entry length exceeds address space"))?;
            if snapshot.len() - cur < len {
                return Err(snapshot_err(snapshot.len(), "snapshot truncated mid-entry"));
            }
            let b = bundle::deserialize_bundle(&snapshot[cur..cur + len])?;
            cur += len;
            items.push((stored_at, b));
        }
        if cur != snapshot.len() {
            return Err(snapshot_err(cur, "trailing bytes after snapshot entries"));
        }
        // Replay in original admission order so eviction picks the same
        // victims it would have live.
        items.sort_by(|(ta, a), (tb, b)| (ta, a.id()).cmp(&(tb, b.id())));
        let mut store = Self::new(capacity_bytes);
        for (stored_at, b) in items {
            store.store(b, stored_at);
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{EndpointId, PayloadBlock};

    fn make_bundle(src: &str, seq: u64, lifetime: u64, payload_len: usize) -> Bundle {
        Bundle::new(
            &EndpointId::new("dtn", "//sink/app").unwrap(),
            &EndpointId::new("dtn", src).unwrap(),
            &EndpointId::null(),
            &EndpointId::null(),
            0,
            seq,
            lifetime,
            PayloadBlock::plain(vec![0u8; payload_len]),
        )
        .unwrap()
    }

    #[test]
    fn stores_within_capacity() {
        let mut s = BundleStore::new(1000 * 1024 * 1024);
        let b = make_bundle("//a/app", 0, 3038, 1024 * 1024);
        let size = b.serialized_len() as u64;
        assert_eq!(s.store(b, 0), StoreOutcome::Stored { evicted: vec![] });
        assert_eq!(s.occupancy_bytes(), size);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn second_copy_is_duplicate() {
        let mut s = BundleStore::new(1 << 20);
        let b = make_bundle("//a/app", 0, 3038, 100);
        assert!(s.store(b.clone(), 0).is_stored());
        assert_eq!(s.store(b, 5), StoreOutcome::Duplicate);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn dead_on_arrival_is_expired() {
        let mut s = BundleStore::new(1 << 20);
        let b = make_bundle("//a/app", 0, 100, 10);
        assert_eq!(s.store(b.clone(), 100), StoreOutcome::Expired);
        assert_eq!(s.store(b.clone(), 101), StoreOutcome::Expired);
        assert!(s.store(b, 99).is_stored());
    }

    #[test]
    fn evicts_oldest_until_new_bundle_fits() {
        // Two 4 MB-ish bundles, then a 5 MB one, under a 10 MB cap.
        let mb = 1024 * 1024;
        let mut s = BundleStore::new(10 * mb as u64);
        let first = make_bundle("//a/app", 1, 3038, 4 * mb);
        let second = make_bundle("//b/app", 2, 3038, 4 * mb);
        let third = make_bundle("//c/app", 3, 3038, 5 * mb);
        assert!(s.store(first.clone(), 0).is_stored());
        assert!(s.store(second.clone(), 1).is_stored());
        let outcome = s.store(third.clone(), 2);
        assert_eq!(outcome, StoreOutcome::Stored { evicted: vec![first.id()] });
        assert!(!s.contains(&first.id()));
        assert!(s.contains(&second.id()));
        assert!(s.contains(&third.id()));
    }

    #[test]
    fn eviction_ties_break_by_id_order() {
        let mb = 1024 * 1024;
        let mut s = BundleStore::new(10 * mb as u64);
        // Both stored at t=0; //a sorts before //b.
        let a = make_bundle("//a/app", 1, 3038, 4 * mb);
        let b = make_bundle("//b/app", 1, 3038, 4 * mb);
        assert!(s.store(b.clone(), 0).is_stored());
        assert!(s.store(a.clone(), 0).is_stored());
        let outcome = s.store(make_bundle("//c/app", 1, 3038, 5 * mb), 0);
        assert_eq!(outcome, StoreOutcome::Stored { evicted: vec![a.id()] });
        assert!(s.contains(&b.id()));
    }

    #[test]
    fn oversized_bundle_rejected_without_evictions() {
        let mut s = BundleStore::new(1000);
        let small = make_bundle("//a/app", 0, 3038, 100);
        assert!(s.store(small.clone(), 0).is_stored());
        let occupancy = s.occupancy_bytes();
        assert_eq!(s.store(make_bundle("//b/app", 0, 3038, 2000), 1), StoreOutcome::Rejected);
        assert_eq!(s.occupancy_bytes(), occupancy);
        assert!(s.contains(&small.id()));
    }

    #[test]
    fn expiry_boundary_is_inclusive() {
        let mut s = BundleStore::new(1 << 20);
        let b = make_bundle("//a/app", 0, 3038, 10);
        let id = b.id();
        assert!(s.store(b, 0).is_stored());
        assert!(s.expire(3037).is_empty());
        assert!(s.contains(&id));
        assert_eq!(s.expire(3038), vec![id.clone()]);
        assert!(!s.contains(&id));
        assert_eq!(s.occupancy_bytes(), 0);
    }

    #[test]
    fn expire_on_fresh_store_is_empty() {
        let mut s = BundleStore::new(1 << 20);
        assert!(s.expire(0).is_empty());
    }

    #[test]
    fn summary_vector_tracks_contents() {
        let mut s = BundleStore::new(1 << 20);
        assert!(s.summary_vector().is_empty());
        let a = make_bundle("//a/app", 0, 100, 10);
        let b = make_bundle("//b/app", 0, 200, 10);
        s.store(a.clone(), 0);
        s.store(b.clone(), 0);
        assert_eq!(s.summary_vector(), [a.id(), b.id()].into_iter().collect());
        s.expire(100);
        assert_eq!(s.summary_vector(), [b.id()].into_iter().collect());
    }

    #[test]
    fn delivered_memory_is_separate_from_storage() {
        let mut s = BundleStore::new(1 << 20);
        let b = make_bundle("//a/app", 0, 100, 10);
        let id = b.id();
        assert!(!s.is_delivered(&id));
        s.mark_delivered(id.clone());
        assert!(s.is_delivered(&id));
        // Delivery memory survives the bundle never being stored or expiring.
        s.store(b, 0);
        s.expire(100);
        assert!(s.is_delivered(&id));
    }

    #[test]
    fn snapshot_roundtrips_contents_and_eviction_order() {
        let mut s = BundleStore::new(1 << 20);
        for seq in 0..5 {
            s.store(make_bundle("//a/app", seq, 3038, 64 * seq as usize), seq);
        }
        let restored = BundleStore::restore(s.capacity_bytes(), &s.snapshot()).unwrap();
        assert_eq!(restored.len(), s.len());
        assert_eq!(restored.occupancy_bytes(), s.occupancy_bytes());
        assert_eq!(restored.summary_vector(), s.summary_vector());
        for entry in s.iter() {
            let got = restored.entry(&entry.bundle.id()).unwrap();
            assert_eq!(got, entry);
        }
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let mut s = BundleStore::new(1 << 20);
        s.store(make_bundle("//a/app", 0, 3038, 64), 0);
        let snap = s.snapshot();
        assert!(BundleStore::restore(1 << 20, &snap[..snap.len() - 1]).is_err());
        assert!(BundleStore::restore(1 << 20, b"NOTASNAP").is_err());
        let mut wrong_version = snap.clone();
        wrong_version[6] = 9;
        assert!(BundleStore::restore(1 << 20, &wrong_version).is_err());
        let mut trailing = snap;
        trailing.push(0);
        assert!(BundleStore::restore(1 << 20, &trailing).is_err());
    }

    /// Brute-force list model used as the oracle for randomized sequences.
    struct ListModel {
        capacity: u64,
        items: Vec<(BundleId, u64, u64, u64)>, // id, stored_at, expires_at, size
    }

    impl ListModel {
        fn store(&mut self, b: &Bundle, now: u64) -> StoreOutcome {
            let id = b.id();
            if self.items.iter().any(|(i, ..)| *i == id) {
                return StoreOutcome::Duplicate;
            }
            if now >= b.expires_at() {
                return StoreOutcome::Expired;
            }
            let size = b.serialized_len() as u64;
            if size > self.capacity {
                return StoreOutcome::Rejected;
            }
            let mut evicted = Vec::new();
            while self.items.iter().map(|(.., s)| s).sum::<u64>() + size > self.capacity {
                let victim = self
                    .items
                    .iter()
                    .min_by_key(|(i, t, ..)| (*t, i.clone()))
                    .map(|(i, ..)| i.clone())
                    .unwrap();
                self.items.retain(|(i, ..)| *i != victim);
                evicted.push(victim);
            }
            self.items.push((id, now, b.expires_at(), size));
            StoreOutcome::Stored { evicted }
        }

        fn expire(&mut self, now: u64) -> Vec<BundleId> {
            let mut purged: Vec<BundleId> = self
                .items
                .iter()
                .filter(|(_, _, e, _)| *e <= now)
                .map(|(i, ..)| i.clone())
                .collect();
            self.items.retain(|(_, _, e, _)| *e > now);
            purged.sort();
            purged
        }
    }

    #[test]
    fn random_op_sequences_match_list_model() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for case in 0..20 {
            let capacity = rng.gen_range(500..5_000);
            let mut store = BundleStore::new(capacity);
            let mut model = ListModel { capacity, items: vec![] };
            let mut now = 0u64;
            for step in 0..200 {
                now += rng.gen_range(0..30);
                if rng.gen_bool(0.7) {
                    let b = make_bundle(
                        &format!("//n{}/app", rng.gen_range(0..4)),
                        rng.gen_range(0..12),
                        rng.gen_range(1..200),
                        rng.gen_range(0..900),
                    );
                    // Same creation fields can recur; ids collide on purpose.
                    let got = store.store(b.clone(), now);
                    let want = model.store(&b, now);
                    assert_eq!(got, want, "case {case} step {step} store at {now}");
                } else {
                    assert_eq!(store.expire(now), model.expire(now), "case {case} step {step}");
                }
                assert_eq!(
                    store.summary_vector().into_iter().collect::<Vec<_>>(),
                    {
                        let mut ids: Vec<_> = model.items.iter().map(|(i, ..)| i.clone()).collect();
                        ids.sort();
                        ids
                    },
                    "case {case} step {step} contents"
                );
                let model_occ: u64 = model.items.iter().map(|(.., s)| *s).sum();
                assert_eq!(store.occupancy_bytes(), model_occ, "case {case} step {step} occupancy");
                assert!(store.occupancy_bytes() <= capacity);
            }
        }
    }
}
