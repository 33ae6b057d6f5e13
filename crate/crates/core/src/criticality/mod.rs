//! Critical configurations and test-case grids.
//!
//! For each context the worst case is an arriving vehicle at the speed
//! limit that keeps going until the ego is committed, and a stopped front
//! vehicle. The critical distances `x̂_a` and `x̂_f` bound the region where
//! a progress policy can be safe.

mod grid;

pub use grid::{generate_grid, refine, CaseKey, GridSpec, TestCase};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::dynamics::{AdProfile, DynamicsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VistaKind {
    Merging,
    LaneChange,
    CrossingYield,
    CrossingLight,
}

impl VistaKind {
    pub const ALL: [VistaKind; 4] =
        [VistaKind::Merging, VistaKind::LaneChange, VistaKind::CrossingYield, VistaKind::CrossingLight];

    pub fn as_str(&self) -> &'static str {
        match self {
            VistaKind::Merging => "merging",
            VistaKind::LaneChange => "lane-change",
            VistaKind::CrossingYield => "crossing-yield",
            VistaKind::CrossingLight => "crossing-light",
        }
    }

    pub fn is_crossing(&self) -> bool {
        matches!(self, VistaKind::CrossingYield | VistaKind::CrossingLight)
    }

    /// Whether test cases include an arriving vehicle distance.
    pub fn has_arriving(&self) -> bool {
        !matches!(self, VistaKind::CrossingLight)
    }
}

impl fmt::Display for VistaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VistaKind {
    type Err = CriticalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VistaKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CriticalityError::InvalidContext(format!("unknown vista kind '{s}'")))
    }
}

/// How the ego's distance to the critical zone is derived from its speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "distance", rename_all = "snake_case")]
pub enum XeRule {
    /// `x_e = B(v_e)`: the ego is as close as it can be while still able to stop.
    Braking,
    Fixed(f64),
}

pub const LANE_CHANGE_DISTANCE: f64 = 13.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VistaContext {
    pub kind: VistaKind,
    /// Speed limit on the priority road, in m/s.
    pub vl: f64,
    /// Length of the critical zone along the ego route.
    pub cd: f64,
    /// Yellow phase, in seconds.
    pub ty: f64,
    /// All-red phase, in seconds.
    pub tar: f64,
    pub x_e_rule: XeRule,
}

impl VistaContext {
    /// Standard parameters: 80 km/h limit, 24 m crossings, 3 s yellow and
    /// 2 s all-red.
    pub fn standard(kind: VistaKind) -> Self {
        let (cd, x_e_rule) = match kind {
            VistaKind::Merging => (0.0, XeRule::Braking),
            VistaKind::LaneChange => (0.0, XeRule::Fixed(LANE_CHANGE_DISTANCE)),
            VistaKind::CrossingYield | VistaKind::CrossingLight => (24.0, XeRule::Braking),
        };
        VistaContext { kind, vl: 22.2, cd, ty: 3.0, tar: 2.0, x_e_rule }
    }

    pub fn validate(&self) -> Result<(), CriticalityError> {
        let bad = |m: &str| Err(CriticalityError::InvalidContext(m.to_string()));
        if !(self.vl > 0.0) {
            return bad("vl must be positive");
        }
        if !(self.cd >= 0.0) || !(self.ty >= 0.0) || !(self.tar >= 0.0) {
            return bad("cd, ty and tar must be non-negative");
        }
        if let XeRule::Fixed(d) = self.x_e_rule {
            if !(d >= 0.0) {
                return bad("fixed x_e must be non-negative");
            }
        }
        Ok(())
    }

    pub fn x_e(&self, ad: &AdProfile, v_e: f64) -> Result<f64, CriticalityError> {
        match self.x_e_rule {
            XeRule::Braking => Ok(ad.braking_distance(v_e)?),
            XeRule::Fixed(d) => Ok(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CriticalityError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("lane change needs a moving ego vehicle")]
    LaneChangeAtRest,
    #[error("braking function is not monotone near {0} m; run check_capability on the profile")]
    NonMonotoneBraking(f64),
    #[error("invalid context: {0}")]
    InvalidContext(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_a: Option<f64>,
    pub x_f: f64,
    /// Whether any progress can beat the light; crossing-light only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible: Option<bool>,
}

/// Largest speed `v` with `B(v) = x_e`, by bisection.
pub fn max_caution_speed(ad: &AdProfile, x_e: f64) -> Result<f64, CriticalityError> {
    if x_e.is_nan() || x_e < 0.0 {
        return Err(DynamicsError::NegativeDistance(x_e).into());
    }
    let b = |v: f64| ad.braking_distance(v);
    let mut hi = 1.0;
    while b(hi)? < x_e {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(CriticalityError::NonMonotoneBraking(x_e));
        }
    }
    let mut prev = 0.0;
    for i in 1..=64 {
        let cur = b(hi * i as f64 / 64.0)?;
        if cur + 1e-12 < prev {
            return Err(CriticalityError::NonMonotoneBraking(x_e));
        }
        prev = cur;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if b(mid)? <= x_e {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    if (b(lo)? - x_e).abs() > 1e-3 {
        return Err(CriticalityError::NonMonotoneBraking(x_e));
    }
    Ok(lo)
}

pub fn critical_values(ctx: &VistaContext, ad: &AdProfile, v_e: f64) -> Result<CriticalValues, CriticalityError> {
    ctx.validate()?;
    let x_e = ctx.x_e(ad, v_e)?;
    let b_vl = ad.braking_distance(ctx.vl)?;
    let b = |v: f64| ad.braking_distance(v);
    Ok(match ctx.kind {
        VistaKind::Merging => {
            let (at, av) = ad.accel_reach(v_e, x_e)?;
            CriticalValues { x_a: Some(b_vl + ctx.vl * at), x_f: b(av)?, feasible: None }
        }
        VistaKind::LaneChange => {
            if !(v_e > 0.0) {
                return Err(CriticalityError::LaneChangeAtRest);
            }
            CriticalValues { x_a: Some(ctx.vl * x_e / v_e + b_vl), x_f: b(v_e)?, feasible: None }
        }
        VistaKind::CrossingYield => {
            let (at, av) = ad.accel_reach(v_e, x_e + ctx.cd)?;
            CriticalValues { x_a: Some(ctx.vl * at), x_f: b(av)?, feasible: None }
        }
        VistaKind::CrossingLight => {
            let at_entry = ad.accel_time(v_e, x_e)?;
            let (at_exit, av) = ad.accel_reach(v_e, x_e + ctx.cd)?;
            let feasible = at_entry <= ctx.ty && at_exit <= ctx.ty + ctx.tar;
            CriticalValues { x_a: None, x_f: b(av)?, feasible: Some(feasible) }
        }
    })
}
