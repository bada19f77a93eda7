//! Raycast LiDAR and the stride downsample fed to the policy and detectors.
//!
//! Beams are indexed counterclockwise starting at the robot heading, one
//! degree apart. A beam without a return reads exactly `max_range`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_bounds_exit, ray_circle, ray_segment, Vec2};
use crate::world::{Pose, WorldMap};

pub const BEAMS: usize = 360;
pub const DEFAULT_MAX_RANGE: f64 = 3.5;
pub const DEFAULT_SAMPLES: usize = 24;

/// Smallest range a beam may report; keeps every reading strictly positive.
const MIN_RANGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub max_range: f64,
    /// Standard deviation of additive Gaussian range noise (m).
    pub noise_sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            max_range: DEFAULT_MAX_RANGE,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub raw: Vec<f64>,
    pub max_range: f64,
}

impl LidarScan {
    pub fn beam_angle(pose: &Pose, i: usize) -> f64 {
        pose.theta + (i as f64).to_radians()
    }

    /// True when beam `i` struck something before `max_range`.
    pub fn is_hit(&self, i: usize) -> bool {
        self.raw[i] < self.max_range
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScan {
    pub values: Vec<f64>,
}

impl NormalizedScan {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Distance along the ray from `origin` at `angle` to the nearest surface,
/// unclamped.
pub fn cast_ray(origin: Vec2, angle: f64, world: &WorldMap) -> f64 {
    let dir = Vec2::from_angle(angle);
    let mut best = ray_bounds_exit(origin, dir, &world.bounds);
    for s in &world.segments {
        if let Some(t) = ray_segment(origin, dir, s) {
            best = best.min(t);
        }
    }
    for c in &world.circles {
        if let Some(t) = ray_circle(origin, dir, c) {
            best = best.min(t);
        }
    }
    best
}

/// Noise-free 360-beam scan from `pose`.
pub fn scan(pose: &Pose, world: &WorldMap, cfg: &LidarConfig) -> LidarScan {
    let origin = pose.position();
    let raw = (0..BEAMS)
        .map(|i| {
            cast_ray(origin, LidarScan::beam_angle(pose, i), world).clamp(MIN_RANGE, cfg.max_range)
        })
        .collect();
    LidarScan {
        raw,
        max_range: cfg.max_range,
    }
}

/// Scan with additive Gaussian range noise when `cfg.noise_sigma > 0`.
/// Readings stay within `(0, max_range]`.
pub fn scan_noisy<R: Rng + ?Sized>(
    pose: &Pose,
    world: &WorldMap,
    cfg: &LidarConfig,
    rng: &mut R,
) -> LidarScan {
    let mut s = scan(pose, world, cfg);
    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("finite sigma");
        for r in s.raw.iter_mut() {
            if *r < cfg.max_range {
                *r = (*r + normal.sample(rng)).clamp(MIN_RANGE, cfg.max_range);
            }
        }
    }
    s
}

/// Picks every `360/n`-th beam and divides by the maximum range.
pub fn downsample_normalize(scan: &LidarScan, n: usize) -> Result<NormalizedScan> {
    if n == 0 || scan.raw.len() % n != 0 {
        return Err(Error::Precondition(format!(
            "sample count {n} does not divide {}",
            scan.raw.len()
        )));
    }
    let stride = scan.raw.len() / n;
    Ok(NormalizedScan {
        values: (0..n)
            .map(|k| (scan.raw[k * stride] / scan.max_range).clamp(0.0, 1.0))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Bounds, Circle, Segment};

    fn uniform(v: f64) -> LidarScan {
        LidarScan {
            raw: vec![v; BEAMS],
            max_range: DEFAULT_MAX_RANGE,
        }
    }

    #[test]
    fn empty_room_clamps_to_max_range() {
        let w = WorldMap::new("e", Bounds::new(-5.0, -5.0, 5.0, 5.0), vec![], vec![]).unwrap();
        let s = scan(&Pose::new(0.0, 0.0, 0.3), &w, &LidarConfig::default());
        assert!(s.raw.iter().all(|&r| r == DEFAULT_MAX_RANGE));
    }

    #[test]
    fn perpendicular_wall_reads_distance() {
        let wall = Segment::new(Vec2::new(1.0, -2.0), Vec2::new(1.0, 2.0));
        let w = WorldMap::new("w", Bounds::new(-5.0, -5.0, 5.0, 5.0), vec![wall], vec![]).unwrap();
        let s = scan(&Pose::new(0.0, 0.0, 0.0), &w, &LidarConfig::default());
        assert!((s.raw[0] - 1.0).abs() < 1e-12);
        // beam 90 points at +y and sees nothing
        assert_eq!(s.raw[90], DEFAULT_MAX_RANGE);
    }

    #[test]
    fn circle_front_surface() {
        let w = WorldMap::new(
            "c",
            Bounds::new(-5.0, -5.0, 5.0, 5.0),
            vec![],
            vec![Circle::new(Vec2::new(2.0, 0.0), 0.5)],
        )
        .unwrap();
        let s = scan(&Pose::new(0.0, 0.0, 0.0), &w, &LidarConfig::default());
        assert!((s.raw[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn beams_are_counterclockwise_from_heading() {
        let wall = Segment::new(Vec2::new(-2.0, 1.0), Vec2::new(2.0, 1.0));
        let w = WorldMap::new("w", Bounds::new(-5.0, -5.0, 5.0, 5.0), vec![wall], vec![]).unwrap();
        // heading +x, wall at +y: beam 90 hits at 1.0
        let s = scan(&Pose::new(0.0, 0.0, 0.0), &w, &LidarConfig::default());
        assert!((s.raw[90] - 1.0).abs() < 1e-12);
        assert_eq!(s.raw[270], DEFAULT_MAX_RANGE);
    }

    #[test]
    fn downsample_all_max() {
        let n = downsample_normalize(&uniform(3.5), 24).unwrap();
        assert_eq!(n.len(), 24);
        assert!(n.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn downsample_first_beam_half() {
        let mut s = uniform(3.5);
        s.raw[0] = 1.75;
        let n = downsample_normalize(&s, 24).unwrap();
        assert_eq!(n.values[0], 0.5);
        assert!(n.values[1..].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn downsample_rejects_non_divisor() {
        assert!(matches!(
            downsample_normalize(&uniform(3.5), 7),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn downsample_is_exact_stride_selection() {
        let s = LidarScan {
            raw: (0..BEAMS).map(|i| 0.01 + i as f64 * 0.009).collect(),
            max_range: DEFAULT_MAX_RANGE,
        };
        let n = downsample_normalize(&s, 24).unwrap();
        for (k, v) in n.values.iter().enumerate() {
            assert_eq!(*v, s.raw[k * 15] / DEFAULT_MAX_RANGE);
        }
        // selecting all beams of an already-downsampled scan is the identity
        let again = LidarScan {
            raw: n.values.iter().map(|v| v * DEFAULT_MAX_RANGE).collect(),
            max_range: DEFAULT_MAX_RANGE,
        };
        let n2 = downsample_normalize(&again, 24).unwrap();
        for (a, b) in n.values.iter().zip(&n2.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn noisy_scan_stays_in_range() {
        use rand::SeedableRng;
        let wall = Segment::new(Vec2::new(0.05, -2.0), Vec2::new(0.05, 2.0));
        let w = WorldMap::new("w", Bounds::new(-5.0, -5.0, 5.0, 5.0), vec![wall], vec![]).unwrap();
        let cfg = LidarConfig {
            noise_sigma: 0.2,
            ..LidarConfig::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = scan_noisy(&Pose::new(0.0, 0.0, 0.0), &w, &cfg, &mut rng);
        assert!(s.raw.iter().all(|&r| r > 0.0 && r <= DEFAULT_MAX_RANGE));
    }
}
