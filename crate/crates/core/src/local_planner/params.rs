use serde::{Deserialize, Serialize};

pub const D_LA_VALUES: [f64; 10] = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5];
pub const F_GP_VALUES: [f64; 5] = [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0];
pub const HYSTERESIS_VALUES: [f64; 5] = [0.8, 0.85, 0.9, 0.95, 1.0];
pub const BLOCKING_VALUES: [f64; 4] = [0.0, 1.0, 2.0, 4.0];
pub const PREFERS_VALUES: [f64; 4] = [0.7, 0.8, 0.9, 1.0];
pub const INFLATION_VALUES: [f64; 4] = [0.0, 0.1, 0.2, 0.3];
pub const FEASIBILITY_POSES_VALUES: [usize; 4] = [1, 2, 4, 8];

/// The seven tunable navigation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavParams {
    /// Look-ahead radius in meters.
    pub d_la: f64,
    /// Global replanning frequency in Hz.
    pub f_gp: f64,
    pub selection_cost_hysteresis: f64,
    /// Seconds.
    pub switching_blocking_period: f64,
    pub selection_prefers_initial_plan: f64,
    /// Meters added to the robot radius for clearance.
    pub inflation_distance: f64,
    pub feasibility_check_poses: usize,
}

impl Default for NavParams {
    fn default() -> Self {
        NavParams {
            d_la: 3.0,
            f_gp: 1.0,
            selection_cost_hysteresis: 0.9,
            switching_blocking_period: 2.0,
            selection_prefers_initial_plan: 0.9,
            inflation_distance: 0.1,
            feasibility_check_poses: 4,
        }
    }
}

impl NavParams {
    /// Structural validity: positive radii/rates, hysteresis in (0, 1],
    /// at least one checked pose.
    pub fn is_valid(&self) -> bool {
        self.d_la > 0.0
            && self.f_gp > 0.0
            && self.selection_cost_hysteresis > 0.0
            && self.selection_cost_hysteresis <= 1.0
            && self.switching_blocking_period >= 0.0
            && self.selection_prefers_initial_plan > 0.0
            && self.inflation_distance >= 0.0
            && self.feasibility_check_poses >= 1
            && [
                self.d_la,
                self.f_gp,
                self.switching_blocking_period,
                self.inflation_distance,
            ]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_sets() {
        for (i, v) in D_LA_VALUES.iter().enumerate() {
            assert_eq!(*v, 1.0 + 0.5 * i as f64);
        }
        for w in F_GP_VALUES.windows(2) {
            assert_eq!(w[1], 2.0 * w[0]);
        }
        assert_eq!(F_GP_VALUES[4], 1.0);
    }

    #[test]
    fn defaults_lie_in_sets() {
        let d = NavParams::default();
        assert!(d.is_valid());
        assert!(D_LA_VALUES.contains(&d.d_la));
        assert!(F_GP_VALUES.contains(&d.f_gp));
        assert!(HYSTERESIS_VALUES.contains(&d.selection_cost_hysteresis));
        assert!(BLOCKING_VALUES.contains(&d.switching_blocking_period));
        assert!(PREFERS_VALUES.contains(&d.selection_prefers_initial_plan));
        assert!(INFLATION_VALUES.contains(&d.inflation_distance));
        assert!(FEASIBILITY_POSES_VALUES.contains(&d.feasibility_check_poses));
    }
}
