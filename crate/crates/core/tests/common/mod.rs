#![allow(dead_code)]

use vistacheck_core::criticality::{TestCase, VistaContext, VistaKind};
use vistacheck_core::dynamics::presets;
use vistacheck_core::sim::{PolicyKind, ScenarioConfig};

pub fn case(kind: VistaKind, v_e: f64, x_a: Option<f64>, x_f: f64) -> TestCase {
    let context = VistaContext::standard(kind);
    let x_e = context.x_e(&presets::apollo_like(), v_e).unwrap();
    TestCase { context, v_e, x_e, x_a, x_f, ego_profile: "apollo-like".into(), arriving_profile: "apollo-like".into() }
}

pub fn config(kind: VistaKind, v_e: f64, x_a: Option<f64>, x_f: f64, policy: PolicyKind) -> ScenarioConfig {
    ScenarioConfig::new(case(kind, v_e, x_a, x_f), presets::apollo_like(), presets::apollo_like(), policy)
}
