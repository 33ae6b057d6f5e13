mod common;

use vistacheck_core::criticality::{critical_values, VistaContext, VistaKind};
use vistacheck_core::dynamics::{presets, KinematicCommand};
use vistacheck_core::oracle::{verdict, Verdict};
use vistacheck_core::sim::{
    init_scenario, run, Event, PolicyKind, ScenarioConfig, ScriptedPolicy, Simulation, Termination, Trace, VehicleRole,
};
use vistacheck_core::vista::{Approach, LightColor};

fn apollo_criticals(kind: VistaKind, v_e: f64) -> (Option<f64>, f64) {
    let c = critical_values(&VistaContext::standard(kind), &presets::apollo_like(), v_e).unwrap();
    (c.x_a, c.x_f)
}

fn first_progress_tick(trace: &Trace) -> Option<u64> {
    trace.events().find_map(|(t, e)| matches!(e, Event::Progress).then_some(t))
}

fn collided(trace: &Trace) -> bool {
    trace.events().any(|(_, e)| matches!(e, Event::Collision { .. }))
}

#[test]
fn initial_state_places_every_vehicle() {
    let cfg = common::config(VistaKind::CrossingYield, 10.0, Some(120.0), 40.0, PolicyKind::WorstCaseSafe);
    let w = init_scenario(&cfg).unwrap();
    let ego = w.vehicle(VehicleRole::Ego).unwrap();
    let (entry, exit) = ego.zone.unwrap();
    assert!((entry - ego.s - cfg.case.x_e).abs() < 1e-9);
    assert_eq!(ego.motion.speed, 10.0);
    let arr = w.vehicle(VehicleRole::Arriving).unwrap();
    assert!((arr.zone.unwrap().0 - arr.s - 120.0).abs() < 1e-9);
    assert_eq!(arr.motion.speed, w.ctx.vl);
    let front = w.vehicle(VehicleRole::Front).unwrap();
    assert!((front.tail() - exit - 40.0).abs() < 1e-9, "front tail {} exit {exit}", front.tail());
    assert_eq!(front.motion.speed, 0.0);

    let at_rest = common::config(VistaKind::Merging, 0.0, Some(120.0), 40.0, PolicyKind::WorstCaseSafe);
    let ego = init_scenario(&at_rest).unwrap().vehicle(VehicleRole::Ego).unwrap().clone();
    assert!((ego.zone.unwrap().0 - ego.s).abs() < 1e-9);
}

#[test]
fn maps_too_short_for_the_case_are_rejected() {
    let cfg = common::config(VistaKind::Merging, 10.0, Some(5000.0), 40.0, PolicyKind::WorstCaseSafe);
    assert!(init_scenario(&cfg).is_err());
    let mut bad = common::config(VistaKind::Merging, 10.0, Some(40.0), 40.0, PolicyKind::WorstCaseSafe);
    bad.dt = 0.0;
    assert!(init_scenario(&bad).is_err());
}

#[test]
fn light_turns_yellow_then_red_then_side_green() {
    let cfg = common::config(VistaKind::CrossingLight, 0.0, None, 80.0, PolicyKind::WorstCaseSafe);
    let trace = run(&cfg).unwrap();
    let colors = |tick: usize| {
        let l = trace.snapshots[tick].lights.unwrap();
        (l.ego, l.side)
    };
    assert_eq!(colors(0), (LightColor::Green, LightColor::Red));
    assert_eq!(colors(1), (LightColor::Yellow, LightColor::Red));
    let dt = cfg.dt;
    let red_at = trace.snapshots.iter().position(|s| s.lights.unwrap().ego == LightColor::Red).unwrap();
    let green_at = trace.snapshots.iter().position(|s| s.lights.unwrap().side == LightColor::Green).unwrap();
    assert!(((red_at - 1) as f64 * dt - 3.0).abs() < 1e-9, "red at tick {red_at}");
    assert!(((green_at - red_at) as f64 * dt - 2.0).abs() < 1e-9, "side green at tick {green_at}");
    let changes: Vec<_> = trace
        .events()
        .filter_map(|(t, e)| match e {
            Event::LightChange { approach: Approach::Ego, color } => Some((t, *color)),
            _ => None,
        })
        .collect();
    assert_eq!(changes[0], (1, LightColor::Yellow));
}

#[test]
fn holding_speed_covers_speed_times_time() {
    let cfg = common::config(VistaKind::CrossingYield, 10.0, Some(320.0), 320.0, PolicyKind::WorstCaseSafe);
    let policy = ScriptedPolicy::new(vec![KinematicCommand::Hold; 2], false);
    let mut sim = Simulation::new(cfg, Box::new(policy)).unwrap();
    let start = sim.world().vehicle(VehicleRole::Ego).unwrap().s;
    sim.tick().unwrap();
    sim.tick().unwrap();
    let end = sim.world().vehicle(VehicleRole::Ego).unwrap().s;
    assert!((end - start - 2.0).abs() < 1e-9, "{}", end - start);
}

#[test]
fn runs_are_deterministic() {
    for policy in [PolicyKind::WorstCaseSafe, PolicyKind::Overcautious, PolicyKind::Overoptimistic { factor: 0.5 }] {
        let cfg = common::config(VistaKind::Merging, 10.0, Some(80.0), 40.0, policy);
        assert_eq!(run(&cfg).unwrap().to_jsonl(), run(&cfg).unwrap().to_jsonl());
    }
}

#[test]
fn snapshots_follow_the_kinematics() {
    let cfg = common::config(VistaKind::CrossingYield, 5.0, Some(200.0), 120.0, PolicyKind::WorstCaseSafe);
    let trace = run(&cfg).unwrap();
    let dt = trace.header.dt;
    for w in trace.snapshots.windows(2) {
        assert_eq!(w[1].tick, w[0].tick + 1);
        for role in [VehicleRole::Ego, VehicleRole::Arriving] {
            let (a, b) = (w[0].vehicle(role).unwrap(), w[1].vehicle(role).unwrap());
            assert!(b.speed >= 0.0);
            let ds = b.s - a.s;
            // Speed is continuous within a tick, so the distance lies
            // between the slower and faster end speed over one step, up to
            // the jerk-limited bulge.
            assert!(ds >= -1e-9, "{role:?} moved backwards at tick {}", w[1].tick);
            assert!(ds <= a.speed.max(b.speed) * dt + 0.05, "{role:?} jumped {ds} at tick {}", w[1].tick);
        }
    }
}

#[test]
fn commitment_is_never_revoked() {
    let cfg = common::config(VistaKind::CrossingYield, 10.0, Some(240.0), 160.0, PolicyKind::WorstCaseSafe);
    let trace = run(&cfg).unwrap();
    let tick = first_progress_tick(&trace).expect("commits to progress");
    let entry = trace.header.zones[&VehicleRole::Ego][0];
    for s in trace.snapshots.iter().filter(|s| s.tick > tick) {
        let ego = s.vehicle(VehicleRole::Ego).unwrap();
        if ego.s < entry {
            assert_ne!(ego.mode.as_deref(), Some("track_speed"), "fell back to caution at tick {}", s.tick);
        }
    }
}

#[test]
fn worst_case_safe_commits_only_beyond_the_criticals() {
    let (x_a, x_f) = apollo_criticals(VistaKind::Merging, 10.0);
    let x_a = x_a.unwrap();
    let go = run(&common::config(VistaKind::Merging, 10.0, Some(x_a + 10.0), x_f + 10.0, PolicyKind::WorstCaseSafe))
        .unwrap();
    // Events land on the snapshot the decision produced, so a commitment
    // on the very first decision shows at tick 1.
    assert_eq!(first_progress_tick(&go), Some(1));
    let wait = run(&common::config(VistaKind::Merging, 10.0, Some(x_a - 10.0), x_f + 10.0, PolicyKind::WorstCaseSafe))
        .unwrap();
    assert_ne!(first_progress_tick(&wait), Some(1));
    assert_ne!(wait.snapshots[1].vehicle(VehicleRole::Ego).unwrap().mode.as_deref(), Some("accelerate"));
}

#[test]
fn worst_case_safe_clears_the_zone_beyond_the_criticals() {
    let margin = 22.2 * 0.1 + 5.0;
    for kind in VistaKind::ALL {
        for v_e in [0.0, 5.0, 10.0, 15.0] {
            // A lane change needs a moving ego, and the light crossing is
            // infeasible from rest.
            let Ok(c) = critical_values(&VistaContext::standard(kind), &presets::apollo_like(), v_e) else {
                continue;
            };
            if c.feasible == Some(false) {
                continue;
            }
            let cfg = common::config(kind, v_e, c.x_a.map(|a| a + margin), c.x_f + margin, PolicyKind::WorstCaseSafe);
            let trace = run(&cfg).unwrap();
            let r = verdict(&trace).unwrap();
            assert_eq!(r.verdict, Verdict::SafeProgress, "{kind} v_e={v_e}: {r:?}");
            let end = trace.termination();
            assert!(matches!(end, Some(Termination::Resolved | Termination::Quiescent)), "{kind} v_e={v_e}: {end:?}");
        }
    }
}

#[test]
fn overoptimistic_merge_well_inside_the_critical_distance_collides() {
    let v_e = 10.0;
    let (x_a, x_f) = apollo_criticals(VistaKind::Merging, v_e);
    let cfg = common::config(
        VistaKind::Merging,
        v_e,
        Some(x_a.unwrap() - 40.0),
        x_f + 40.0,
        PolicyKind::Overoptimistic { factor: 0.5 },
    );
    let trace = run(&cfg).unwrap();
    assert!(collided(&trace), "{:?}", verdict(&trace).unwrap());
}

#[test]
fn overcautious_never_commits() {
    for kind in [VistaKind::Merging, VistaKind::CrossingYield, VistaKind::CrossingLight] {
        let cfg = common::config(kind, 5.0, kind.has_arriving().then_some(320.0), 320.0, PolicyKind::Overcautious);
        let trace = run(&cfg).unwrap();
        assert_eq!(first_progress_tick(&trace), None, "{kind}");
        assert!(!collided(&trace));
    }
}

#[test]
fn arriving_vehicle_cruises_past_an_idle_ego() {
    let cfg = common::config(
        VistaKind::CrossingYield,
        0.0,
        Some(80.0),
        80.0,
        PolicyKind::Scripted { commands: vec![KinematicCommand::BrakeToStop], lane_change: false },
    );
    let trace = run(&cfg).unwrap();
    let exit = trace.header.zones[&VehicleRole::Arriving][1];
    let mut passed = false;
    for s in &trace.snapshots {
        let a = s.vehicle(VehicleRole::Arriving).unwrap();
        if passed {
            break;
        }
        assert!((a.speed - 22.2).abs() < 1e-9, "arriving slowed to {} at tick {}", a.speed, s.tick);
        passed |= a.s - 5.0 > exit;
    }
    assert!(passed);
    assert_eq!(verdict(&trace).unwrap().verdict, Verdict::SafeCaution);
}

/// Runs a merging case where the ego creeps through the zone, with
/// the arriving vehicle placed `gap` metres before its zone at the tick
/// the ego enters.
fn ego_enters_with_arriving_at(gap: f64) -> Trace {
    let script = PolicyKind::Scripted {
        commands: vec![KinematicCommand::Accelerate { target: Some(2.0) }; 600],
        lane_change: false,
    };
    let probe = run(&common::config(VistaKind::Merging, 0.0, Some(320.0), 320.0, script.clone())).unwrap();
    let entry = probe
        .events()
        .find_map(|(t, e)| matches!(e, Event::ZoneEntry { vehicle: VehicleRole::Ego }).then_some(t))
        .expect("ego enters");
    let x_a = gap + 22.2 * 0.1 * entry as f64;
    run(&common::config(VistaKind::Merging, 0.0, Some(x_a), 320.0, script)).unwrap()
}

#[test]
fn arriving_vehicle_stops_short_when_it_has_room() {
    let b = presets::apollo_like().braking_distance(22.2).unwrap();
    let trace = ego_enters_with_arriving_at(b + 1.0);
    assert!(!collided(&trace), "{:?}", verdict(&trace).unwrap());
    let entry = trace.header.zones[&VehicleRole::Arriving][0];
    let stop = trace
        .snapshots
        .iter()
        .map(|s| s.vehicle(VehicleRole::Arriving).unwrap())
        .find(|a| a.speed < 0.01)
        .expect("arriving vehicle stops");
    assert!(entry - stop.s >= 1.0 - 1e-6, "stopped {} short", entry - stop.s);
}

#[test]
fn arriving_vehicle_without_room_strikes_the_ego() {
    let b = presets::apollo_like().braking_distance(22.2).unwrap();
    let trace = ego_enters_with_arriving_at(b - 5.0);
    let fault = trace.events().find_map(|(_, e)| match e {
        Event::Collision { at_fault, .. } => Some(*at_fault),
        _ => None,
    });
    assert_eq!(fault, Some(VehicleRole::Arriving));
    assert_eq!(verdict(&trace).unwrap().verdict, Verdict::ArrivingAccident);
}

#[test]
fn invalid_configurations_fail_validation() {
    let mut cfg: ScenarioConfig = common::config(VistaKind::Merging, 5.0, Some(80.0), 40.0, PolicyKind::WorstCaseSafe);
    cfg.t_max = 0.05;
    assert!(cfg.validate().is_err());
    let mut cfg = common::config(VistaKind::Merging, 5.0, Some(80.0), 40.0, PolicyKind::WorstCaseSafe);
    cfg.vehicle_length = -1.0;
    assert!(cfg.validate().is_err());
}
