use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Path cost `straight + diagonal·√2` in grid steps, compared exactly.
///
/// Equal-length paths made of different step mixes can never tie by
/// accident, and sums never accumulate rounding error.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cost {
    straight: i64,
    diagonal: i64,
}

impl Cost {
    pub const ZERO: Cost = Cost {
        straight: 0,
        diagonal: 0,
    };
    pub const INFINITY: Cost = Cost {
        straight: i64::MAX,
        diagonal: i64::MAX,
    };
    pub const STRAIGHT: Cost = Cost {
        straight: 1,
        diagonal: 0,
    };
    pub const DIAGONAL: Cost = Cost {
        straight: 0,
        diagonal: 1,
    };

    pub fn new(straight: i64, diagonal: i64) -> Self {
        Cost { straight, diagonal }
    }

    pub fn straight(&self) -> i64 {
        self.straight
    }

    pub fn diagonal(&self) -> i64 {
        self.diagonal
    }

    pub fn is_infinite(&self) -> bool {
        self.straight == i64::MAX
    }

    /// Octile distance between two cells: the cost of the shortest
    /// unobstructed 8-connected path.
    pub fn octile(dx: i64, dy: i64) -> Self {
        let (dx, dy) = (dx.abs(), dy.abs());
        let d = dx.min(dy);
        Cost {
            straight: dx.max(dy) - d,
            diagonal: d,
        }
    }

    /// Cost of a single move with displacement `mv`.
    pub fn of_move(mv: (i32, i32)) -> Self {
        if mv.0 != 0 && mv.1 != 0 {
            Cost::DIAGONAL
        } else {
            Cost::STRAIGHT
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
        }
    }

    /// Metric length on a grid of the given resolution.
    pub fn meters(&self, resolution: f64) -> f64 {
        self.to_f64() * resolution
    }
}

impl std::ops::Add for Cost {
    type Output = Cost;

    fn add(self, o: Cost) -> Cost {
        if self.is_infinite() || o.is_infinite() {
            return Cost::INFINITY;
        }
        Cost {
            straight: self.straight + o.straight,
            diagonal: self.diagonal + o.diagonal,
        }
    }
}

impl Ord for Cost {
    fn cmp(&self, o: &Self) -> Ordering {
        match (self.is_infinite(), o.is_infinite()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Greater,
            (false, true) => return Ordering::Less,
            _ => {}
        }
        // sign of (a1 - a2) + (b1 - b2)·√2
        let a = (self.straight - o.straight) as i128;
        let b = (self.diagonal - o.diagonal) as i128;
        match (a.signum(), b.signum()) {
            (0, s) | (s, 0) => s.cmp(&0),
            (1, 1) => Ordering::Greater,
            (-1, -1) => Ordering::Less,
            // opposite signs: compare a² with 2b²
            (1, _) => (a * a).cmp(&(2 * b * b)),
            _ => (2 * b * b).cmp(&(a * a)),
        }
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}+{}√2", self.straight, self.diagonal)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn infinity_dominates() {
        assert!(Cost::INFINITY > Cost::new(1_000_000, 1_000_000));
        assert!((Cost::INFINITY + Cost::STRAIGHT).is_infinite());
        assert_eq!(Cost::INFINITY.cmp(&Cost::INFINITY), Ordering::Equal);
    }

    #[test]
    fn close_values_ordered() {
        // 7√2 ≈ 9.8995 < 10, 17√2 ≈ 24.0416 > 24
        assert!(Cost::new(0, 7) < Cost::new(10, 0));
        assert!(Cost::new(0, 17) > Cost::new(24, 0));
        assert_eq!(Cost::octile(3, -5), Cost::new(2, 3));
    }

    proptest! {
        #[test]
        fn order_matches_reals(a in 0i64..10_000, b in 0i64..10_000, c in 0i64..10_000, d in 0i64..10_000) {
            let x = Cost::new(a, b);
            let y = Cost::new(c, d);
            let fx = x.to_f64();
            let fy = y.to_f64();
            if (fx - fy).abs() > 1e-6 {
                prop_assert_eq!(x < y, fx < fy);
            }
            prop_assert_eq!(x == y, x.cmp(&y) == Ordering::Equal);
            prop_assert_eq!((x + y).to_f64(), Cost::new(a + c, b + d).to_f64());
        }
    }
}
