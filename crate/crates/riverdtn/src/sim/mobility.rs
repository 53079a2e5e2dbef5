//! Mobility building blocks: straight-line walks, path walks, waypoint
//! draws, and per-entity random streams.
//!
//! All movement is expressed in closed form over whole-second timestamps —
//! `position(now)` is a pure function of the walk's parameters — so entity
//! positions never accumulate floating-point drift and never depend on how
//! often the world sampled them.
//!
//! Randomness discipline: every entity owns independent ChaCha streams keyed
//! by `(run_seed, entity_id, stream_tag)`. Mobility draws nothing from
//! traffic or transfer state, which is what makes the contact trace of a
//! seed identical across compression settings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::map::Vec2;

/// Stream tags for [`entity_rng`]; one per concern so adding draws to one
/// concern never perturbs another.
pub mod stream {
    pub const MOBILITY: u64 = 1;
    pub const TRAFFIC: u64 = 2;
    pub const ROLE: u64 = 3;
}

/// Independent random stream for one entity and concern.
pub fn entity_rng(run_seed: u64, entity: u64, stream_tag: u64) -> ChaCha8Rng {
    // SplitMix64 finalizer over the combined key: cheap, well-mixed, stable.
    let mut z = run_seed
        .wrapping_add(entity.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(stream_tag.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Uniform draw from an inclusive integer range; degenerate ranges allowed.
pub fn sample_seconds(rng: &mut ChaCha8Rng, range: (u64, u64)) -> u64 {
    if range.0 >= range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

/// Uniform draw from a closed float range.
pub fn sample_speed(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 >= range.1 {
        range.0
    } else {
        rng.gen_range(range.0..=range.1)
    }
}

/// Uniform point in a disc of `radius` around the origin.
pub fn disc_offset(rng: &mut ChaCha8Rng, radius: f64) -> Vec2 {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    Vec2::new(r * theta.cos(), r * theta.sin())
}

/// Golden-angle spiral placement: deterministic, evenly spread ring of homes
/// around a community center.
pub fn home_position(center: Vec2, index: usize, count: usize) -> Vec2 {
    let golden = 2.399_963_229_728_653; // radians
    let spread = if count > 1 { index as f64 / (count - 1) as f64 } else { 0.0 };
    let radius = 120.0 + 200.0 * spread;
    let theta = index as f64 * golden;
    Vec2::new(center.x + radius * theta.cos(), center.y + radius * theta.sin())
}

/// Straight-line walk at constant speed, positions in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct LineWalk {
    pub from: Vec2,
    pub to: Vec2,
    pub speed_mps: f64,
    pub started_s: u64,
}

impl LineWalk {
    pub fn position(&self, now_s: u64) -> Vec2 {
        let total = self.from.distance(self.to);
        if total == 0.0 {
            return self.to;
        }
        let traveled = self.speed_mps * now_s.saturating_sub(self.started_s) as f64;
        self.from.lerp(self.to, (traveled / total).min(1.0))
    }

    pub fn done(&self, now_s: u64) -> bool {
        let total = self.from.distance(self.to);
        self.speed_mps * now_s.saturating_sub(self.started_s) as f64 >= total
    }
}

/// Walk along a polyline (a shortest path's vertex positions) at constant
/// speed.
#[derive(Debug, Clone, PartialEq)]
pub struct PathWalk {
    points: Vec<Vec2>,
    prefix: Vec<f64>,
    pub speed_mps: f64,
    pub started_s: u64,
}

impl PathWalk {
    pub fn new(points: Vec<Vec2>, speed_mps: f64, started_s: u64) -> Self {
        assert!(!points.is_empty(), "path needs at least one point");
        let mut prefix = vec![0.0];
        for pair in points.windows(2) {
            prefix.push(prefix.last().unwrap() + pair[0].distance(pair[1]));
        }
        Self { points, prefix, speed_mps, started_s }
    }

    pub fn total_length(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    pub fn position(&self, now_s: u64) -> Vec2 {
        let traveled =
            (self.speed_mps * now_s.saturating_sub(self.started_s) as f64).min(self.total_length());
        // Find the segment containing `traveled`.
        let seg = match self.prefix.binary_search_by(|p| p.partial_cmp(&traveled).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if seg + 1 >= self.points.len() {
            return *self.points.last().unwrap();
        }
        let seg_len = self.prefix[seg + 1] - self.prefix[seg];
        if seg_len == 0.0 {
            return self.points[seg + 1];
        }
        self.points[seg].lerp(self.points[seg + 1], (traveled - self.prefix[seg]) / seg_len)
    }

    pub fn done(&self, now_s: u64) -> bool {
        self.speed_mps * now_s.saturating_sub(self.started_s) as f64 >= self.total_length()
    }

    pub fn end(&self) -> Vec2 {
        *self.points.last().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_elapsed_time_means_no_movement() {
        let walk = LineWalk {
            from: Vec2::new(3.0, 4.0),
            to: Vec2::new(100.0, 4.0),
            speed_mps: 1.3,
            started_s: 50,
        };
        assert_eq!(walk.position(50), Vec2::new(3.0, 4.0));
        // Clock values before the start are clamped, not negative.
        assert_eq!(walk.position(10), Vec2::new(3.0, 4.0));
    }

    #[test]
    fn hundred_meters_at_one_mps_takes_hundred_seconds() {
        let walk = LineWalk {
            from: Vec2::new(0.0, 0.0),
            to: Vec2::new(100.0, 0.0),
            speed_mps: 1.0,
            started_s: 0,
        };
        assert!(!walk.done(99));
        assert!(walk.done(100));
        assert_eq!(walk.position(100), Vec2::new(100.0, 0.0));
        assert_eq!(walk.position(40).x, 40.0);
        // Past arrival the walker stays put.
        assert_eq!(walk.position(500), Vec2::new(100.0, 0.0));
    }

    #[test]
    fn path_walk_traverses_segments_in_order() {
        // L-shaped path: 3000 m east then 500 m north = 3500 m at 5 m/s.
        let path = PathWalk::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(3000.0, 0.0), Vec2::new(3000.0, 500.0)],
            5.0,
            0,
        );
        assert_eq!(path.total_length(), 3500.0);
        assert!(!path.done(699));
        assert!(path.done(700));
        assert_eq!(path.position(700), Vec2::new(3000.0, 500.0));
        // At 400 s: 2000 m, still on the first segment.
        assert_eq!(path.position(400), Vec2::new(2000.0, 0.0));
        // At 650 s: 3250 m, 250 m up the second segment.
        assert_eq!(path.position(650), Vec2::new(3000.0, 250.0));
    }

    #[test]
    fn single_point_path_is_stationary() {
        let path = PathWalk::new(vec![Vec2::new(7.0, 7.0)], 5.0, 0);
        assert!(path.done(0));
        assert_eq!(path.position(1000), Vec2::new(7.0, 7.0));
    }

    #[test]
    fn entity_streams_are_independent_and_stable() {
        let mut a1 = entity_rng(9, 4, stream::MOBILITY);
        let mut a2 = entity_rng(9, 4, stream::MOBILITY);
        assert_eq!(a1.gen::<u64>(), a2.gen::<u64>());
        let mut b = entity_rng(9, 4, stream::TRAFFIC);
        let mut c = entity_rng(9, 5, stream::MOBILITY);
        let base = entity_rng(9, 4, stream::MOBILITY).gen::<u64>();
        assert_ne!(b.gen::<u64>(), base);
        assert_ne!(c.gen::<u64>(), base);
    }

    #[test]
    fn disc_offsets_stay_inside_the_disc() {
        let mut rng = entity_rng(1, 1, stream::MOBILITY);
        for _ in 0..100 {
            let p = disc_offset(&mut rng, 8.0);
            assert!(p.distance(Vec2::new(0.0, 0.0)) <= 8.0 + 1e-9);
        }
    }

    #[test]
    fn homes_spread_in_a_ring() {
        let center = Vec2::new(100.0, 100.0);
        for i in 0..20 {
            let h = home_position(center, i, 20);
            let r = h.distance(center);
            assert!((120.0..=320.0).contains(&r), "home {i} at radius {r}");
        }
        // Distinct indices land on distinct spots.
        assert_ne!(home_position(center, 0, 20), home_position(center, 1, 20));
    }

    #[test]
    fn degenerate_ranges_collapse_to_their_low_end() {
        let mut rng = entity_rng(0, 0, stream::MOBILITY);
        assert_eq!(sample_seconds(&mut rng, (5, 5)), 5);
        assert_eq!(sample_speed(&mut rng, (1.5, 1.5)), 1.5);
        let s = sample_seconds(&mut rng, (10, 20));
        assert!((10..=20).contains(&s));
    }
}
