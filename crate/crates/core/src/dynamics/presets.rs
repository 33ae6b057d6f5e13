//! Named capability presets.
//!
//! The jerk-limited presets are fitted to published braking and
//! acceleration tables of two open-source autopilots. The ODE preset encodes
//! the speed laws of a third. The table preset carries measured values from
//! a fourth that has no analytic law.

use super::{AdProfile, JerkLimitedProfile, OdeProfile, TableProfile};

/// Speed limit shared by every built-in context, in m/s.
pub const SPEED_LIMIT: f64 = 22.2;

pub const NAMES: [&str; 4] = ["apollo-like", "autoware-like", "carla-empirical", "lgsvl-ode"];

pub fn by_name(name: &str) -> Option<AdProfile> {
    match name {
        "apollo-like" => Some(apollo_like()),
        "autoware-like" => Some(autoware_like()),
        "carla-empirical" => Some(carla_empirical()),
        "lgsvl-ode" => Some(lgsvl_ode()),
        _ => None,
    }
}

pub fn apollo_like() -> AdProfile {
    AdProfile::JerkLimited(JerkLimitedProfile {
        a_max: 2.0,
        d_max: 6.0,
        j_accel_up: 2.0,
        j_accel_down: 4.0,
        j_decel_up: 4.0,
        j_decel_down: 2.0,
        v_cap: Some(SPEED_LIMIT),
    })
}

pub fn autoware_like() -> AdProfile {
    AdProfile::JerkLimited(JerkLimitedProfile {
        a_max: 1.0,
        d_max: 5.0,
        j_accel_up: 1.0,
        j_accel_down: 5.0,
        j_decel_up: 5.0,
        j_decel_down: 5.0,
        v_cap: Some(SPEED_LIMIT),
    })
}

pub fn lgsvl_ode() -> AdProfile {
    AdProfile::Ode(OdeProfile {
        decel_gain: 4.0,
        ramp_slope: 0.6,
        ramp_saturation: 4.0,
        gain_offset: 1.0,
        speed_limit: SPEED_LIMIT,
        stop_threshold: 0.01,
    })
}

pub fn carla_empirical() -> AdProfile {
    let speeds = vec![0.0, 5.0, 10.0, 15.0];
    let distances = vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
    let accel_speed = vec![
        vec![0.0, 10.3, 14.2, 16.9, 19.1, 21.0, 22.2],
        vec![5.0, 11.0, 14.7, 17.2, 19.4, 21.3, 22.2],
        vec![10.0, 13.6, 16.4, 18.9, 20.8, 22.2, 22.2],
        vec![15.0, 17.0, 19.3, 21.1, 22.2, 22.2, 22.2],
    ];
    let accel_time = vec![
        vec![0.0, 2.2, 3.0, 3.7, 4.2, 4.7, 5.2],
        vec![0.0, 1.4, 2.2, 2.8, 3.4, 3.9, 4.3],
        vec![0.0, 1.0, 1.6, 2.2, 2.7, 3.2, 3.6],
        vec![0.0, 0.7, 1.3, 1.8, 2.2, 2.7, 3.1],
    ];
    AdProfile::Table(TableProfile {
        brake_speeds: vec![0.0, 5.0, 10.0, 15.0, 20.0],
        brake_distances: vec![0.0, 0.8, 6.8, 15.8, 26.0],
        accel_speeds: speeds,
        accel_distances: distances,
        accel_time,
        accel_speed,
    })
}
