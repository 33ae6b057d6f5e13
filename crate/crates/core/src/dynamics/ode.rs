//! Speed laws given as ordinary differential equations.
//!
//! Braking follows `dv/dt = -k v`; acceleration follows
//! `dv/dt = (slope * min(sat, t) + offset) * (limit - v)`, where `t` is the
//! time since the acceleration began. Both have closed-form speed curves;
//! acceleration distance is integrated numerically with Simpson's rule.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeProfile {
    /// Braking gain `k`, in 1/s.
    pub decel_gain: f64,
    /// Growth of the acceleration gain per second, in 1/s².
    pub ramp_slope: f64,
    /// Time after which the acceleration gain stops growing, in seconds.
    pub ramp_saturation: f64,
    /// Acceleration gain at `t = 0`, in 1/s.
    pub gain_offset: f64,
    /// Speed approached during acceleration, in m/s.
    pub speed_limit: f64,
    /// Speed below which the vehicle counts as stopped, in m/s.
    pub stop_threshold: f64,
}

/// Step used when marching the acceleration law forward in time.
const MARCH_STEP: f64 = 0.01;

impl OdeProfile {
    pub(crate) fn validate(&self) -> Result<(), String> {
        let ok = self.decel_gain > 0.0
            && self.ramp_slope >= 0.0
            && self.ramp_saturation >= 0.0
            && self.gain_offset > 0.0
            && self.speed_limit > 0.0
            && self.stop_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err("ODE profile parameters must be positive".into())
        }
    }

    /// Integral of the acceleration gain over `[0, t]`.
    fn gain_integral(&self, t: f64) -> f64 {
        let s = self.ramp_saturation;
        if t <= s {
            self.gain_offset * t + 0.5 * self.ramp_slope * t * t
        } else {
            self.gain_offset * s + 0.5 * self.ramp_slope * s * s + (self.ramp_slope * s + self.gain_offset) * (t - s)
        }
    }

    pub(crate) fn rise_speed(&self, v0: f64, limit: f64, t: f64) -> f64 {
        if v0 >= limit {
            return v0;
        }
        limit - (limit - v0) * (-self.gain_integral(t)).exp()
    }

    /// Distance covered between `t0` and `t1` on the rise from `v0`.
    pub(crate) fn rise_distance(&self, v0: f64, limit: f64, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let n = (((t1 - t0) / 0.0025).ceil() as usize).max(2);
        let n = n + n % 2;
        let h = (t1 - t0) / n as f64;
        let mut sum = self.rise_speed(v0, limit, t0) + self.rise_speed(v0, limit, t1);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * self.rise_speed(v0, limit, t0 + h * i as f64);
        }
        sum * h / 3.0
    }

    /// Time at which the rise from `v0` reaches `speed`, if it ever does.
    pub(crate) fn rise_time_to_speed(&self, v0: f64, limit: f64, speed: f64) -> Option<f64> {
        if speed <= v0 {
            return Some(0.0);
        }
        if speed >= limit {
            return None;
        }
        let target = ((limit - v0) / (limit - speed)).ln();
        let s = self.ramp_saturation;
        let at_s = self.gain_integral(s);
        if target <= at_s {
            let (a, b) = (0.5 * self.ramp_slope, self.gain_offset);
            if a == 0.0 {
                return Some(target / b);
            }
            Some((-b + (b * b + 4.0 * a * target).sqrt()) / (2.0 * a))
        } else {
            Some(s + (target - at_s) / (self.ramp_slope * s + self.gain_offset))
        }
    }

    pub fn braking_distance(&self, v: f64) -> f64 {
        if v <= self.stop_threshold {
            0.0
        } else {
            (v - self.stop_threshold) / self.decel_gain
        }
    }

    pub fn braking_partial(&self, v: f64, v_t: f64) -> f64 {
        let floor = v_t.max(self.stop_threshold);
        if v <= floor {
            0.0
        } else {
            (v - floor) / self.decel_gain
        }
    }

    /// Time and speed when the rise from `v` has covered `x` meters.
    pub fn accel_reach(&self, v: f64, x: f64) -> (f64, f64) {
        let limit = self.speed_limit;
        if x <= 0.0 {
            return (0.0, v);
        }
        if v >= limit {
            return (x / v, v);
        }
        let (mut t, mut covered) = (0.0, 0.0);
        loop {
            let step = self.rise_distance(v, limit, t, t + MARCH_STEP);
            if covered + step >= x {
                let (mut lo, mut hi) = (t, t + MARCH_STEP);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if covered + self.rise_distance(v, limit, t, mid) < x {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let tt = 0.5 * (lo + hi);
                return (tt, self.rise_speed(v, limit, tt));
            }
            covered += step;
            t += MARCH_STEP;
        }
    }

    pub(crate) fn decay_speed(&self, v0: f64, t: f64) -> f64 {
        v0 * (-self.decel_gain * t).exp()
    }

    pub(crate) fn decay_time_to(&self, v0: f64, speed: f64) -> f64 {
        if speed >= v0 {
            0.0
        } else {
            (v0 / speed).ln() / self.decel_gain
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::presets;

    fn lgsvl() -> OdeProfile {
        match presets::lgsvl_ode() {
            crate::dynamics::AdProfile::Ode(p) => p,
            _ => unreachable!(),
        }
    }

    #[test]
    fn braking_closed_form_matches_integration() {
        let p = lgsvl();
        for v in [2.0, 5.0, 10.0, 20.0] {
            let (mut s, mut x, h) = (v, 0.0, 1e-5);
            while s >= p.stop_threshold {
                let k1 = -p.decel_gain * s;
                let k2 = -p.decel_gain * (s + 0.5 * h * k1);
                x += h * (s + 0.5 * h * k1);
                s += h * k2;
            }
            assert!((x - p.braking_distance(v)).abs() < 1e-3, "v={v}: {x}");
            let correction = p.stop_threshold / p.decel_gain;
            assert!((p.braking_distance(v) - (v / 4.0 - correction)).abs() < 1e-12);
        }
    }

    #[test]
    fn rise_time_inverts_rise_speed() {
        let p = lgsvl();
        for t in [0.3, 2.0, 4.0, 6.5] {
            let v = p.rise_speed(3.0, 22.2, t);
            let back = p.rise_time_to_speed(3.0, 22.2, v).unwrap();
            assert!((back - t).abs() < 1e-9);
        }
    }

    #[test]
    fn acceleration_distance_matches_fine_euler() {
        let p = lgsvl();
        let (t, v) = p.accel_reach(0.0, 10.0);
        let (mut s, mut x, mut tt, h) = (0.0, 0.0, 0.0f64, 1e-5);
        while x < 10.0 {
            let g = p.ramp_slope * tt.min(p.ramp_saturation) + p.gain_offset;
            let vn = s + h * g * (p.speed_limit - s);
            x += 0.5 * (s + vn) * h;
            s = vn;
            tt += h;
        }
        assert!((t - tt).abs() < 1e-3 && (v - s).abs() < 1e-3, "{t} {v} vs {tt} {s}");
    }
}
