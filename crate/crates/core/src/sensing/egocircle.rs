use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::Scan;
use crate::geom::{wrap_positive, Point2, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgocircleConfig {
    pub bins: usize,
    /// Measurements retained per bin.
    pub per_bin: usize,
    /// Measurements older than this (simulated seconds) are dropped.
    pub age_limit: f64,
    pub max_range: f64,
}

impl Default for EgocircleConfig {
    fn default() -> Self {
        Self {
            bins: 128,
            per_bin: 2,
            age_limit: 30.0,
            max_range: 5.5,
        }
    }
}

/// A remembered obstacle measurement in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoPoint {
    pub p: Point2,
    pub range: f64,
    pub stamp: f64,
}

/// Egocentric polar obstacle memory. Bin `i` covers bearings
/// `[2πi/N, 2π(i+1)/N)` in the robot frame and keeps its `per_bin` nearest
/// measurements.
#[derive(Debug, Clone)]
pub struct Egocircle {
    config: EgocircleConfig,
    bins: Vec<Vec<EgoPoint>>,
}

/// Normalised per-bin minimum ranges; 1.0 where a bin is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f32>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

impl Egocircle {
    pub fn new(config: EgocircleConfig) -> Self {
        Self {
            bins: vec![Vec::with_capacity(config.per_bin + 1); config.bins],
            config,
        }
    }

    pub fn config(&self) -> &EgocircleConfig {
        &self.config
    }

    pub fn bin_of(&self, angle: f64) -> usize {
        let n = self.config.bins;
        ((wrap_positive(angle) / TAU * n as f64).floor() as usize).min(n - 1)
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * TAU / self.config.bins as f64
    }

    pub fn bin_points(&self, i: usize) -> &[EgoPoint] {
        &self.bins[i]
    }

    /// Nearest retained measurement in bin `i`.
    pub fn bin_min(&self, i: usize) -> Option<&EgoPoint> {
        self.bins[i].first()
    }

    pub fn points(&self) -> impl Iterator<Item = &EgoPoint> {
        self.bins.iter().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.iter().all(|b| b.is_empty())
    }

    fn insert(&mut self, pt: EgoPoint) {
        let b = self.bin_of(pt.p.angle());
        let bin = &mut self.bins[b];
        let pos = bin
            .iter()
            .position(|q| pt.range < q.range || (pt.range == q.range && pt.stamp > q.stamp))
            .unwrap_or(bin.len());
        if pos < self.config.per_bin {
            bin.insert(pos, pt);
            bin.truncate(self.config.per_bin);
        }
    }

    /// Moves the memory into the new robot frame (`odom_delta` is the new pose
    /// expressed in the previous robot frame), ages it out, then inserts the
    /// nearest return per bin of `scan` taken at time `now`.
    pub fn update(&mut self, scan: &Scan, odom_delta: &Pose, now: f64) {
        assert!(odom_delta.is_finite(), "odometry delta must be finite");
        let mut kept: Vec<EgoPoint> = Vec::new();
        for bin in &mut self.bins {
            kept.append(bin);
        }
        for mut pt in kept {
            pt.p = odom_delta.inverse_transform_point(pt.p);
            pt.range = pt.p.norm();
            if pt.range > self.config.max_range || now - pt.stamp > self.config.age_limit {
                continue;
            }
            self.insert(pt);
        }
        // one measurement per bin per scan: the nearest return
        let mut nearest: Vec<Option<EgoPoint>> = vec![None; self.config.bins];
        for p in scan.hits() {
            let range = p.norm();
            if range > self.config.max_range {
                continue;
            }
            let b = self.bin_of(p.angle());
            if nearest[b].map_or(true, |q| range < q.range) {
                nearest[b] = Some(EgoPoint {
                    p,
                    range,
                    stamp: now,
                });
            }
        }
        for pt in nearest.into_iter().flatten() {
            self.insert(pt);
        }
    }

    pub fn to_observation(&self) -> Observation {
        let m = self.config.max_range;
        Observation {
            values: self
                .bins
                .iter()
                .map(|b| {
                    b.first()
                        .map_or(1.0, |p| (p.range / m).clamp(0.0, 1.0) as f32)
                })
                .collect(),
        }
    }

    /// Inserts a robot-frame measurement directly, subject to the per-bin
    /// retention rule.
    pub fn insert_point(&mut self, p: Point2, stamp: f64) {
        self.insert(EgoPoint {
            p,
            range: p.norm(),
            stamp,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::raycast;
    use crate::world::{Obstacle, Room, WorldSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn scan_with(angles: &[f64], ranges: &[f64], max_range: f64) -> Scan {
        Scan {
            angles: angles.to_vec(),
            ranges: ranges.to_vec(),
            fov: 1.0,
            max_range,
        }
    }

    #[test]
    fn empty_observation_is_all_ones() {
        let e = Egocircle::new(EgocircleConfig::default());
        let o = e.to_observation();
        assert_eq!(o.len(), 128);
        assert!(o.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn min_then_normalise() {
        let cfg = EgocircleConfig {
            max_range: 5.0,
            ..Default::default()
        };
        let mut e = Egocircle::new(cfg);
        let a = e.bin_center(10);
        e.insert_point(Point2::new(4.0 * a.cos(), 4.0 * a.sin()), 0.0);
        e.insert_point(Point2::new(2.0 * a.cos(), 2.0 * a.sin()), 0.0);
        let o = e.to_observation();
        assert!((o.values[10] - 0.4).abs() < 1e-6);
        assert_eq!(o.values[11], 1.0);
    }

    #[test]
    fn fixed_point_under_identity_odometry() {
        let mut e = Egocircle::new(EgocircleConfig::default());
        let angles: Vec<f64> = (0..20).map(|i| -0.5 + i as f64 * 0.05).collect();
        let ranges: Vec<f64> = (0..20).map(|i| 1.0 + 0.1 * i as f64).collect();
        let scan = scan_with(&angles, &ranges, 5.5);
        for k in 0..5 {
            e.update(&scan, &Pose::default(), k as f64 * 0.1);
        }
        for (a, r) in angles.iter().zip(&ranges) {
            let b = e.bin_of(*a);
            let stored = e.bin_min(b).unwrap().range;
            // other rays in the same bin may be nearer
            let nearest = angles
                .iter()
                .zip(&ranges)
                .filter(|(x, _)| e.bin_of(**x) == b)
                .map(|(_, r)| *r)
                .fold(f64::INFINITY, f64::min);
            assert!((stored - nearest).abs() < 1e-12);
            assert!(stored <= *r + 1e-12);
        }
    }

    #[test]
    fn memory_survives_rotation() {
        let mut e = Egocircle::new(EgocircleConfig::default());
        // an obstacle seen straight behind the robot
        let scan = scan_with(&[PI - 0.01], &[2.0], 5.5);
        e.update(&scan, &Pose::default(), 0.0);
        let empty = scan_with(&[0.0], &[5.5], 5.5);
        e.update(&empty, &Pose::new(0.0, 0.0, PI), 0.1);
        let fwd = e.bin_of(-0.01);
        let pt = e.bin_min(fwd).expect("memory kept in forward bin");
        assert!((pt.range - 2.0).abs() < 1e-12);
    }

    #[test]
    fn translation_shortens_range() {
        let mut e = Egocircle::new(EgocircleConfig::default());
        e.update(&scan_with(&[0.0], &[3.0], 5.5), &Pose::default(), 0.0);
        e.update(
            &scan_with(&[0.0], &[5.5], 5.5),
            &Pose::new(1.0, 0.0, 0.0),
            0.1,
        );
        let pt = e.bin_min(e.bin_of(0.0)).unwrap();
        assert!((pt.range - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ages_out_and_drops_far_points() {
        let mut e = Egocircle::new(EgocircleConfig::default());
        e.update(&scan_with(&[0.0], &[5.0], 5.5), &Pose::default(), 0.0);
        e.update(
            &scan_with(&[0.0], &[5.5], 5.5),
            &Pose::new(-1.0, 0.0, 0.0),
            0.1,
        );
        assert!(e.is_empty(), "moved beyond max range");
        e.update(&scan_with(&[0.0], &[2.0], 5.5), &Pose::default(), 1.0);
        e.update(&scan_with(&[0.0], &[5.5], 5.5), &Pose::default(), 31.5);
        assert!(e.is_empty(), "aged out");
    }

    #[test]
    fn rotating_in_place_converges_to_full_scan() {
        let mut w = WorldSpec::empty(Room::square(10.0), 0);
        w.obstacles.push(Obstacle::cylinder(7.0, 5.0, 0.3));
        w.obstacles.push(Obstacle::cylinder(3.5, 6.0, 0.2));
        w.obstacles.push(Obstacle::boxed(5.0, 2.5, 0.4, 0.6, 0.3));
        let cfg = SensorConfigLite::default();
        let mut e = Egocircle::new(EgocircleConfig::default());
        let step = 0.5;
        let mut theta: f64 = 0.0;
        let mut prev = Pose::new(5.0, 5.0, 0.0);
        for k in 0..20 {
            let pose = Pose::new(5.0, 5.0, theta);
            let scan = raycast(&w, &pose, cfg.fov, cfg.rays, 5.5);
            e.update(&scan, &prev.relative(&pose), k as f64 * 0.1);
            prev = pose;
            theta += step;
        }
        // dense full-circle reference expressed in the final robot frame;
        // rebinning under rotation may shift a measurement by one bin
        let reference = raycast(&w, &prev, TAU - 1e-6, 4096, 5.5);
        let n = 128;
        let ref_min: Vec<f64> = (0..n)
            .map(|b| {
                reference
                    .angles
                    .iter()
                    .zip(&reference.ranges)
                    .filter(|(a, r)| e.bin_of(**a) == b && **r < 5.5)
                    .map(|(_, r)| *r)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let near = |b: usize| -> f64 {
            [(b + n - 1) % n, b, (b + 1) % n]
                .iter()
                .filter_map(|&k| e.bin_min(k).map(|p| p.range))
                .fold(f64::INFINITY, f64::min)
        };
        for b in 0..n {
            if ref_min[b] < 5.0 {
                let got = near(b);
                assert!(got <= ref_min[b] + 0.05, "bin {b}: {got} vs {}", ref_min[b]);
            }
            if let Some(p) = e.bin_min(b) {
                let lo = ref_min[(b + n - 1) % n]
                    .min(ref_min[b])
                    .min(ref_min[(b + 1) % n]);
                assert!(p.range >= lo - 1e-6, "bin {b} below reference");
            }
        }
    }

    struct SensorConfigLite {
        fov: f64,
        rays: usize,
    }

    impl Default for SensorConfigLite {
        fn default() -> Self {
            Self {
                fov: 58f64.to_radians(),
                rays: 128,
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn observation_in_unit_interval(
            pts in proptest::collection::vec((-8.0f64..8.0, -8.0f64..8.0), 0..60),
            dx in -1.0f64..1.0, dth in -3.0f64..3.0,
        ) {
            let mut e = Egocircle::new(EgocircleConfig::default());
            let angles: Vec<f64> = pts.iter().map(|(x, y)| y.atan2(*x)).collect();
            let ranges: Vec<f64> = pts.iter().map(|(x, y)| x.hypot(*y).clamp(1e-3, 5.5)).collect();
            e.update(&scan_with(&angles, &ranges, 5.5), &Pose::default(), 0.0);
            e.update(&scan_with(&angles, &ranges, 5.5), &Pose::new(dx, 0.0, dth), 0.1);
            let o = e.to_observation();
            prop_assert_eq!(o.len(), 128);
            prop_assert!(o.values.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(e.points().all(|p| p.range <= 5.5));
            for b in 0..128 {
                prop_assert!(e.bin_points(b).len() <= 2);
            }
        }
    }
}
