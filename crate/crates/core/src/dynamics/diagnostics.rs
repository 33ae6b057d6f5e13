//! Capability diagnostics: strictness, monotonicity, additivity and realism.

use serde::Serialize;

use super::AdProfile;

/// Mean deceleration above which a braking law is flagged unrealistic.
pub const MAX_REALISTIC_DECEL: f64 = 7.0;
/// Mean acceleration above which an acceleration law is flagged unrealistic.
pub const MAX_REALISTIC_ACCEL: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapabilityGrid {
    pub speeds: Vec<f64>,
    pub distances: Vec<f64>,
    /// Values are rounded to this step before comparison, mirroring a
    /// published table. `None` compares raw values.
    pub resolution: Option<f64>,
}

impl CapabilityGrid {
    /// Speeds 0..=15 by 5 and distances 0..=60 by 10, at 0.1 resolution.
    pub fn table_layout() -> Self {
        CapabilityGrid {
            speeds: vec![0.0, 5.0, 10.0, 15.0],
            distances: (0..=6).map(|i| i as f64 * 10.0).collect(),
            resolution: Some(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "function", rename_all = "snake_case")]
pub enum MonotonicityViolation {
    Braking { v1: f64, v2: f64, b1: f64, b2: f64 },
    AccelTimeInDistance { v: f64, x1: f64, x2: f64, t1: f64, t2: f64 },
    AccelSpeedInDistance { v: f64, x1: f64, x2: f64, s1: f64, s2: f64 },
    AccelSpeedInSpeed { x: f64, v1: f64, v2: f64, s1: f64, s2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditivityDeviation {
    pub v: f64,
    pub v_prime: f64,
    /// `B(v')`.
    pub direct: f64,
    /// `B(v) - 𝐁(v, v')`: what remains of the stop from `v` once at `v'`.
    pub remainder: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RealismFlag {
    MeanDecel { v: f64, rate: f64 },
    MeanAccel { v: f64, x: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapabilityReport {
    pub strictness_failures: Vec<String>,
    pub monotonicity: Vec<MonotonicityViolation>,
    pub additivity: Option<AdditivityDeviation>,
    pub realism: Vec<RealismFlag>,
}

impl CapabilityReport {
    pub fn is_strict(&self) -> bool {
        self.strictness_failures.is_empty()
    }

    pub fn is_monotone(&self) -> bool {
        self.monotonicity.is_empty()
    }

    /// Grid cells `(v, x)` taking part in a speed-wise AV violation.
    pub fn av_violation_cells(&self) -> Vec<(f64, f64)> {
        let mut cells = Vec::new();
        for m in &self.monotonicity {
            if let MonotonicityViolation::AccelSpeedInSpeed { x, v1, v2, .. } = *m {
                for c in [(v1, x), (v2, x)] {
                    if !cells.contains(&c) {
                        cells.push(c);
                    }
                }
            }
        }
        cells.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        cells
    }
}

fn rounded(value: f64, resolution: Option<f64>) -> f64 {
    match resolution {
        Some(r) if r > 0.0 => (value / r).round() * r,
        _ => value,
    }
}

fn decreases(a: f64, b: f64, resolution: Option<f64>) -> bool {
    match resolution {
        Some(r) if r > 0.0 => (a / r).round() > (b / r).round(),
        _ => a > b + 1e-9,
    }
}

/// Evaluates the profile on `grid`. Monotonicity is checked between
/// neighbouring grid points.
pub fn check_capability(p: &AdProfile, grid: &CapabilityGrid) -> CapabilityReport {
    let res = grid.resolution;
    let b = |v: f64| p.braking_distance(v).unwrap_or(f64::NAN);
    let reach = |v: f64, x: f64| p.accel_reach(v, x).unwrap_or((f64::NAN, f64::NAN));

    let mut strictness_failures = Vec::new();
    if b(0.0) != 0.0 {
        strictness_failures.push(format!("B(0) = {}", b(0.0)));
    }
    for &v in &grid.speeds {
        let (t, s) = reach(v, 0.0);
        if t != 0.0 {
            strictness_failures.push(format!("AT({v}, 0) = {t}"));
        }
        if s != v {
            strictness_failures.push(format!("AV({v}, 0) = {s}"));
        }
    }

    let mut monotonicity = Vec::new();
    for w in grid.speeds.windows(2) {
        let (b1, b2) = (b(w[0]), b(w[1]));
        if decreases(b1, b2, res) {
            monotonicity.push(MonotonicityViolation::Braking { v1: w[0], v2: w[1], b1, b2 });
        }
    }
    let table: Vec<Vec<(f64, f64)>> =
        grid.speeds.iter().map(|&v| grid.distances.iter().map(|&x| reach(v, x)).collect()).collect();
    for (i, &v) in grid.speeds.iter().enumerate() {
        for j in 1..grid.distances.len() {
            let (x1, x2) = (grid.distances[j - 1], grid.distances[j]);
            let ((t1, s1), (t2, s2)) = (table[i][j - 1], table[i][j]);
            if decreases(t1, t2, res) {
                monotonicity.push(MonotonicityViolation::AccelTimeInDistance { v, x1, x2, t1, t2 });
            }
            if decreases(s1, s2, res) {
                monotonicity.push(MonotonicityViolation::AccelSpeedInDistance { v, x1, x2, s1, s2 });
            }
        }
    }
    for (j, &x) in grid.distances.iter().enumerate() {
        for i in 1..grid.speeds.len() {
            let (s1, s2) = (table[i - 1][j].1, table[i][j].1);
            if decreases(s1, s2, res) {
                monotonicity.push(MonotonicityViolation::AccelSpeedInSpeed {
                    x,
                    v1: grid.speeds[i - 1],
                    v2: grid.speeds[i],
                    s1: rounded(s1, res),
                    s2: rounded(s2, res),
                });
            }
        }
    }

    let mut additivity: Option<AdditivityDeviation> = None;
    for &v in &grid.speeds {
        for &v_prime in grid.speeds.iter().filter(|&&u| u < v) {
            let Ok(partial) = p.braking_partial(v, v_prime) else { continue };
            let direct = b(v_prime);
            let remainder = b(v) - partial;
            let deviation = (direct - remainder).abs();
            if additivity.as_ref().map_or(true, |a| deviation > a.deviation) {
                additivity = Some(AdditivityDeviation { v, v_prime, direct, remainder, deviation });
            }
        }
    }

    let mut realism = Vec::new();
    for &v in grid.speeds.iter().filter(|&&v| v > 0.0) {
        let d = rounded(b(v), res);
        if d > 0.0 {
            let rate = v * v / (2.0 * d);
            if rate > MAX_REALISTIC_DECEL {
                realism.push(RealismFlag::MeanDecel { v, rate });
            }
        }
    }
    for (i, &v) in grid.speeds.iter().enumerate() {
        for (j, &x) in grid.distances.iter().enumerate() {
            let (t, s) = table[i][j];
            let (t, s) = (rounded(t, res), rounded(s, res));
            if x > 0.0 && t > 0.0 {
                let rate = (s - v) / t;
                if rate > MAX_REALISTIC_ACCEL {
                    realism.push(RealismFlag::MeanAccel { v, x, rate });
                }
            }
        }
    }

    CapabilityReport { strictness_failures, monotonicity, additivity, realism }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::presets;

    #[test]
    fn jerk_presets_are_strict_and_monotone_on_fine_grid() {
        let grid = CapabilityGrid {
            speeds: (2..=50).map(|i| i as f64 * 0.5).collect(),
            distances: (0..=320).step_by(4).map(f64::from).collect(),
            resolution: None,
        };
        for p in [presets::apollo_like(), presets::autoware_like()] {
            let r = check_capability(&p, &grid);
            assert!(r.is_strict(), "{:?}", r.strictness_failures);
            assert!(r.is_monotone(), "{:?}", r.monotonicity);
        }
    }

    // A faster start covers a short distance sooner and so gains less speed
    // before the rate has to return to zero. Below about 1 m/s the gain lost
    // outweighs the head start.
    #[test]
    fn jerk_presets_dip_in_speed_only_near_standstill() {
        let grid = CapabilityGrid {
            speeds: vec![0.0, 0.5, 1.0, 1.5],
            distances: (0..=320).step_by(4).map(f64::from).collect(),
            resolution: None,
        };
        for p in [presets::apollo_like(), presets::autoware_like()] {
            let r = check_capability(&p, &grid);
            for m in &r.monotonicity {
                let MonotonicityViolation::AccelSpeedInSpeed { v2, s1, s2, .. } = *m else {
                    panic!("unexpected violation {m:?}");
                };
                assert!(v2 <= 1.0 && s1 - s2 < 0.15, "{m:?}");
            }
            assert!(check_capability(&p, &CapabilityGrid::table_layout()).is_monotone());
        }
    }

    #[test]
    fn lgsvl_braking_rate_is_flagged() {
        let r = check_capability(
            &presets::lgsvl_ode(),
            &CapabilityGrid { speeds: vec![0.0, 20.0], distances: vec![0.0, 10.0], resolution: Some(0.1) },
        );
        let decel = r.realism.iter().find_map(|f| match f {
            RealismFlag::MeanDecel { v, rate } if *v == 20.0 => Some(*rate),
            _ => None,
        });
        assert!((decel.unwrap() - 40.0).abs() < 1e-9);
    }
}
