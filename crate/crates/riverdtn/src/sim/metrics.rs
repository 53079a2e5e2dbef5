//! Per-run measurement: per-class delivery counters and the link audit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sim::ContentClass;

/// Counters for one content class over one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// Bundles created by the traffic sources.
    pub created: u64,
    /// First copies that reached their intended destination EID.
    pub delivered: u64,
    /// Sum of delivery latencies (seconds), for the mean.
    pub latency_sum_s: f64,
    /// Payload + header bits put on the air for this class, including the
    /// partial bits of aborted transfers.
    pub bits_transmitted: u64,
    /// Sum of creation-time compression-report ratios, for the mean.
    pub ratio_sum: f64,
}

impl ClassMetrics {
    pub fn delivery_ratio(&self) -> f64 {
        if self.created == 0 {
            0.0
        } else {
            self.delivered as f64 / self.created as f64
        }
    }

    pub fn mean_latency_s(&self) -> f64 {
        if self.delivered == 0 {
            0.0
        } else {
            self.latency_sum_s / self.delivered as f64
        }
    }

    pub fn mean_compression_ratio(&self) -> f64 {
        if self.created == 0 {
            0.0
        } else {
            self.ratio_sum / self.created as f64
        }
    }
}

/// Run-wide conservation and link-discipline checks, accumulated live.
///
/// All violation counters must be zero in a correct run; they exist so tests
/// can assert the model's invariants from the outside.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkAudit {
    /// Physical contact windows observed (pair-level, begin to break).
    pub contacts: u64,
    /// Contacts whose transmitted bits exceeded rate × duration.
    pub budget_violations: u64,
    /// Highest bits/(rate × duration) seen across contacts.
    pub max_utilization: f64,
    /// Deliveries of a bundle that was not fully transferred (always 0 by
    /// construction; counted defensively).
    pub partial_deliveries: u64,
    /// Deliveries observed after the bundle's lifetime had elapsed.
    pub post_ttl_deliveries: u64,
    /// Completed transfers plus aborted attempts.
    pub transfers_completed: u64,
    pub transfers_aborted: u64,
}

impl LinkAudit {
    /// Close out one contact window of `duration_s` seconds over which
    /// `bits` were transmitted at nominal `rate_bps`.
    pub fn record_contact(&mut self, bits: u64, duration_s: f64, rate_bps: u64) {
        self.contacts += 1;
        let budget = rate_bps as f64 * duration_s;
        let utilization = if budget > 0.0 {
            bits as f64 / budget
        } else if bits > 0 {
            f64::INFINITY
        } else {
            0.0
        };
        if utilization > self.max_utilization {
            self.max_utilization = utilization;
        }
        if bits as f64 > budget {
            self.budget_violations += 1;
        }
    }

    pub fn clean(&self) -> bool {
        self.budget_violations == 0 && self.partial_deliveries == 0 && self.post_ttl_deliveries == 0
    }
}

/// Everything a run reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: BTreeMap<ContentClass, ClassMetrics>,
    pub audit: LinkAudit,
    /// Total bundle copies stored across all nodes (fan-out indicator).
    pub copies_stored: u64,
}

impl Metrics {
    pub fn class(&self, class: ContentClass) -> ClassMetrics {
        self.per_class.get(&class).copied().unwrap_or_default()
    }

    pub fn class_mut(&mut self, class: ContentClass) -> &mut ClassMetrics {
        self.per_class.entry(class).or_default()
    }

    pub fn total_delivered(&self) -> u64 {
        self.per_class.values().map(|c| c.delivered).sum()
    }

    pub fn total_created(&self) -> u64 {
        self.per_class.values().map(|c| c.created).sum()
    }
}
