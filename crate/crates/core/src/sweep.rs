//! Grid sweeps with boundary refinement.
//!
//! A sweep runs every coarse case, then repeatedly refines between
//! neighbouring cells whose verdict classes differ until no new case
//! appears. Results are keyed by case, so the worker count and completion
//! order never change the output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::criticality::{generate_grid, refine, CaseKey, CriticalityError, GridSpec, TestCase, VistaContext};
use crate::dynamics::AdProfile;
use crate::metric_map::MapLayout;
use crate::oracle::{verdict, Behavior, OracleError, Verdict, VerdictRecord};
use crate::sim::{init_scenario, run, PolicyKind, ScenarioConfig, SimError};
use crate::vista::VisibilityParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub context: VistaContext,
    pub grid: GridSpec,
    pub ego_profile_name: String,
    pub ego_profile: AdProfile,
    pub arriving_profile_name: String,
    pub arriving_profile: AdProfile,
    pub policy: PolicyKind,
    pub dt: f64,
    pub t_max: f64,
    pub vehicle_length: f64,
    pub visibility: VisibilityParams,
    pub layout: MapLayout,
    pub inner_obstacle_margin: f64,
    pub refine: bool,
}

impl SweepSpec {
    /// Standard grid and simulation settings for `context`, with the same
    /// profile for ego and arriving vehicle.
    pub fn standard(context: VistaContext, profile_name: &str, profile: AdProfile, policy: PolicyKind) -> Self {
        let base = ScenarioConfig::new(
            TestCase {
                context,
                v_e: 0.0,
                x_e: 0.0,
                x_a: None,
                x_f: 0.0,
                ego_profile: String::new(),
                arriving_profile: String::new(),
            },
            profile.clone(),
            profile.clone(),
            policy.clone(),
        );
        SweepSpec {
            context,
            grid: GridSpec::standard(context.kind),
            ego_profile_name: profile_name.to_string(),
            ego_profile: profile.clone(),
            arriving_profile_name: profile_name.to_string(),
            arriving_profile: profile,
            policy,
            dt: base.dt,
            t_max: base.t_max,
            vehicle_length: base.vehicle_length,
            visibility: base.visibility,
            layout: base.layout,
            inner_obstacle_margin: base.inner_obstacle_margin,
            refine: true,
        }
    }

    pub fn scenario(&self, case: &TestCase) -> ScenarioConfig {
        ScenarioConfig {
            case: case.clone(),
            ego_profile: self.ego_profile.clone(),
            arriving_profile: self.arriving_profile.clone(),
            policy: self.policy.clone(),
            dt: self.dt,
            t_max: self.t_max,
            vehicle_length: self.vehicle_length,
            visibility: self.visibility,
            layout: self.layout,
            inner_obstacle_margin: self.inner_obstacle_margin,
        }
    }

    /// The coarse cases. Critical values and the grid filter use the ego
    /// profile.
    pub fn coarse_cases(&self) -> Result<Vec<TestCase>, SweepError> {
        Ok(generate_grid(
            &self.grid,
            &self.context,
            &self.ego_profile,
            &self.ego_profile_name,
            &self.arriving_profile_name,
        )?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Criticality(#[from] CriticalityError),
    #[error("case {key:?}: {source}")]
    Case { key: CaseKey, source: SimError },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Runs one case. A failed agent handshake is the agent's fault and is
/// recorded as a software failure rather than an error.
pub fn run_case(cfg: &ScenarioConfig) -> Result<VerdictRecord, SweepError> {
    match run(cfg) {
        Ok(trace) => Ok(verdict(&trace)?),
        Err(SimError::Session(reason)) => Ok(VerdictRecord {
            case: cfg.case.clone(),
            verdict: Verdict::SoftwareFailure,
            behavior: Behavior::Caution,
            properties: Default::default(),
            first_violation_tick: None,
            collision: None,
            suppressed: Default::default(),
            failure: Some(reason),
        }),
        Err(source) => Err(SweepError::Case { key: cfg.case.key(), source }),
    }
}

/// Checks that every case can be placed on the map, before anything runs.
pub fn validate_cases(spec: &SweepSpec, cases: &[TestCase]) -> Result<(), SweepError> {
    for c in cases {
        init_scenario(&spec.scenario(c)).map_err(|source| SweepError::Case { key: c.key(), source })?;
    }
    Ok(())
}

/// Runs the sweep, reusing `existing` records for cases already evaluated.
/// `on_record` sees each freshly computed record, in completion order.
pub fn sweep(
    spec: &SweepSpec,
    existing: &[VerdictRecord],
    threads: usize,
    on_record: &(dyn Fn(&VerdictRecord) + Sync),
) -> Result<Vec<VerdictRecord>, SweepError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let mut done: BTreeMap<CaseKey, VerdictRecord> = BTreeMap::new();
    for r in existing.iter().filter(|r| r.case.context == spec.context) {
        done.insert(r.case.key(), r.clone());
    }

    let mut pending = spec.coarse_cases()?;
    validate_cases(spec, &pending)?;
    loop {
        let todo: Vec<&TestCase> = pending.iter().filter(|c| !done.contains_key(&c.key())).collect();
        let fresh: Vec<Result<VerdictRecord, SweepError>> = pool.install(|| {
            todo.par_iter()
                .map(|c| {
                    let r = run_case(&spec.scenario(c))?;
                    on_record(&r);
                    Ok(r)
                })
                .collect()
        });
        for r in fresh {
            let r = r?;
            done.insert(r.case.key(), r);
        }
        if !spec.refine {
            break;
        }
        let evaluated: Vec<(TestCase, &'static str)> =
            done.values().map(|r| (r.case.clone(), r.verdict.code())).collect();
        pending = refine(&evaluated, &spec.grid, &spec.ego_profile)?;
        if pending.is_empty() {
            break;
        }
        validate_cases(spec, &pending)?;
    }
    Ok(done.into_values().collect())
}
