//! Test-case grids and boundary refinement.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::{CriticalityError, VistaContext, VistaKind};
use crate::dynamics::AdProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axis_max: f64,
    pub initial_step: f64,
    pub refine_step: f64,
    pub speeds: Vec<f64>,
}

impl GridSpec {
    pub fn standard(kind: VistaKind) -> Self {
        let speeds = match kind {
            VistaKind::Merging | VistaKind::CrossingYield => vec![0.0, 5.0, 10.0, 15.0],
            VistaKind::LaneChange => vec![5.0, 10.0, 15.0, 20.0],
            VistaKind::CrossingLight => vec![0.0, 5.0, 10.0, 15.0, 20.0],
        };
        GridSpec { axis_max: 320.0, initial_step: 40.0, refine_step: 5.0, speeds }
    }

    pub fn validate(&self) -> Result<(), CriticalityError> {
        let bad = |m: &str| Err(CriticalityError::InvalidContext(m.to_string()));
        if !(self.initial_step > 0.0 && self.refine_step > 0.0 && self.axis_max >= 0.0) {
            return bad("grid steps must be positive");
        }
        let ratio = self.initial_step / self.refine_step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return bad("refinement step must divide the initial step");
        }
        if self.speeds.is_empty() || self.speeds.iter().any(|v| !(*v >= 0.0)) {
            return bad("speed list must be non-empty and non-negative");
        }
        Ok(())
    }

    /// Coarse axis values `0, step, 2·step, ..., axis_max`.
    pub fn axis(&self) -> Vec<f64> {
        let n = (self.axis_max / self.initial_step + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.initial_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub context: VistaContext,
    pub v_e: f64,
    pub x_e: f64,
    /// Distance of the arriving vehicle to its zone entry; absent for
    /// crossing-light cases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_a: Option<f64>,
    /// Distance from the zone exit to the rear of the front vehicle.
    pub x_f: f64,
    pub ego_profile: String,
    pub arriving_profile: String,
}

/// Millimetre-resolution identity of a test case, used for ordering and
/// deduplication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CaseKey {
    pub kind: VistaKind,
    pub v_e_mm: i64,
    pub x_a_mm: Option<i64>,
    pub x_f_mm: i64,
}

fn mm(x: f64) -> i64 {
    (x * 1000.0).round() as i64
}

impl TestCase {
    pub fn key(&self) -> CaseKey {
        CaseKey { kind: self.context.kind, v_e_mm: mm(self.v_e), x_a_mm: self.x_a.map(mm), x_f_mm: mm(self.x_f) }
    }
}

fn excluded(ctx: &VistaContext, b_vl: f64, x_a: Option<f64>, x_f: f64) -> bool {
    matches!(ctx.kind, VistaKind::Merging | VistaKind::LaneChange) && x_a.unwrap_or(0.0) + x_f < b_vl
}

/// All coarse test cases for `ctx`, minus those where the arriving and front
/// vehicles together leave less room than the arriving vehicle needs to stop.
pub fn generate_grid(
    spec: &GridSpec,
    ctx: &VistaContext,
    ad: &AdProfile,
    ego_profile: &str,
    arriving_profile: &str,
) -> Result<Vec<TestCase>, CriticalityError> {
    spec.validate()?;
    ctx.validate()?;
    let b_vl = ad.braking_distance(ctx.vl)?;
    let axis = spec.axis();
    let xa_axis: Vec<Option<f64>> =
        if ctx.kind.has_arriving() { axis.iter().map(|&x| Some(x)).collect() } else { vec![None] };
    let mut cases = Vec::new();
    for &v_e in &spec.speeds {
        let x_e = ctx.x_e(ad, v_e)?;
        for &x_a in &xa_axis {
            for &x_f in &axis {
                if excluded(ctx, b_vl, x_a, x_f) {
                    continue;
                }
                cases.push(TestCase {
                    context: *ctx,
                    v_e,
                    x_e,
                    x_a,
                    x_f,
                    ego_profile: ego_profile.to_string(),
                    arriving_profile: arriving_profile.to_string(),
                });
            }
        }
    }
    Ok(cases)
}

/// New cases at `refine_step` spacing between every pair of evaluated cases
/// that are `initial_step` apart along one axis and whose classes differ.
/// Cases already evaluated are not repeated. Calling this repeatedly on the
/// growing result set reaches a fixpoint.
pub fn refine<K: PartialEq>(
    evaluated: &[(TestCase, K)],
    spec: &GridSpec,
    ad: &AdProfile,
) -> Result<Vec<TestCase>, CriticalityError> {
    spec.validate()?;
    let index: BTreeMap<CaseKey, usize> = evaluated.iter().enumerate().map(|(i, (c, _))| (c.key(), i)).collect();
    let mut seen: BTreeSet<CaseKey> = index.keys().copied().collect();
    let n_sub = (spec.initial_step / spec.refine_step).round() as usize;
    let mut fresh = Vec::new();
    let mut b_vl_cache: Option<(f64, f64)> = None;

    for (case, class) in evaluated {
        let vl = case.context.vl;
        let b_vl = match b_vl_cache {
            Some((v, b)) if v == vl => b,
            _ => {
                let b = ad.braking_distance(vl)?;
                b_vl_cache = Some((vl, b));
                b
            }
        };
        let mut directions: Vec<(bool, f64)> = vec![(false, spec.initial_step)];
        if case.x_a.is_some() {
            directions.push((true, spec.initial_step));
        }
        for (along_xa, d) in directions {
            let mut neighbour = case.clone();
            if along_xa {
                neighbour.x_a = case.x_a.map(|x| x + d);
            } else {
                neighbour.x_f += d;
            }
            let Some(&j) = index.get(&neighbour.key()) else { continue };
            if evaluated[j].1 == *class {
                continue;
            }
            for k in 1..n_sub {
                let offset = k as f64 * spec.refine_step;
                let mut c = case.clone();
                if along_xa {
                    c.x_a = case.x_a.map(|x| x + offset);
                } else {
                    c.x_f += offset;
                }
                if excluded(&c.context, b_vl, c.x_a, c.x_f) {
                    continue;
                }
                if seen.insert(c.key()) {
                    fresh.push(c);
                }
            }
        }
    }
    fresh.sort_by_key(|c| c.key());
    Ok(fresh)
}
