//! Capability functions given by measured tables.
//!
//! Braking distance is interpolated linearly between tabulated speeds and
//! extended beyond the last one at that entry's mean deceleration. The
//! acceleration table is interpolated bilinearly in (speed, distance). Beyond
//! the largest tabulated distance the vehicle cruises at the last tabulated
//! speed. Beyond the largest tabulated starting speed the last row is reused
//! from the point where it reaches that speed.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    pub brake_speeds: Vec<f64>,
    pub brake_distances: Vec<f64>,
    pub accel_speeds: Vec<f64>,
    pub accel_distances: Vec<f64>,
    /// `accel_time[i][j]`: time to cover `accel_distances[j]` from `accel_speeds[i]`.
    pub accel_time: Vec<Vec<f64>>,
    /// `accel_speed[i][j]`: speed reached after `accel_distances[j]` from `accel_speeds[i]`.
    pub accel_speed: Vec<Vec<f64>>,
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    for i in 1..xs.len() {
        if x <= xs[i] {
            let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + t * (ys[i] - ys[i - 1]);
        }
    }
    *ys.last().unwrap()
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl TableProfile {
    pub(crate) fn validate(&self) -> Result<(), String> {
        let shape_ok = self.brake_speeds.len() >= 2
            && self.brake_speeds.len() == self.brake_distances.len()
            && self.accel_speeds.len() >= 1
            && self.accel_distances.len() >= 2
            && self.accel_time.len() == self.accel_speeds.len()
            && self.accel_speed.len() == self.accel_speeds.len()
            && self.accel_time.iter().chain(&self.accel_speed).all(|r| r.len() == self.accel_distances.len());
        if !shape_ok {
            return Err("table dimensions are inconsistent".into());
        }
        if !strictly_increasing(&self.brake_speeds)
            || !strictly_increasing(&self.accel_speeds)
            || !strictly_increasing(&self.accel_distances)
        {
            return Err("table axes must be strictly increasing".into());
        }
        if *self.brake_distances.last().unwrap() <= 0.0 {
            return Err("largest tabulated braking distance must be positive".into());
        }
        Ok(())
    }

    /// Mean deceleration of the largest tabulated stop.
    fn tail_decel(&self) -> f64 {
        let v = *self.brake_speeds.last().unwrap();
        let b = *self.brake_distances.last().unwrap();
        v * v / (2.0 * b)
    }

    pub fn braking_distance(&self, v: f64) -> f64 {
        let vmax = *self.brake_speeds.last().unwrap();
        if v > vmax {
            v * v / (2.0 * self.tail_decel())
        } else {
            interp(&self.brake_speeds, &self.brake_distances, v)
        }
    }

    /// Constant deceleration that stops from `v` within `B(v)`.
    pub(crate) fn stop_decel(&self, v: f64) -> f64 {
        let b = self.braking_distance(v);
        if b <= 0.0 {
            f64::INFINITY
        } else {
            v * v / (2.0 * b)
        }
    }

    pub fn braking_partial(&self, v: f64, v_t: f64) -> f64 {
        let a = self.stop_decel(v);
        if !a.is_finite() {
            return 0.0;
        }
        (v * v - v_t * v_t).max(0.0) / (2.0 * a)
    }

    fn row_reach(&self, row: usize, x: f64) -> (f64, f64) {
        let xs = &self.accel_distances;
        let xmax = *xs.last().unwrap();
        let (times, speeds) = (&self.accel_time[row], &self.accel_speed[row]);
        if x <= xmax {
            (interp(xs, times, x), interp(xs, speeds, x))
        } else {
            let (t, v) = (*times.last().unwrap(), *speeds.last().unwrap());
            (t + (x - xmax) / v, v)
        }
    }

    fn reach_tabulated(&self, v: f64, x: f64) -> (f64, f64) {
        let vs = &self.accel_speeds;
        if vs.len() == 1 || v <= vs[0] {
            return self.row_reach(0, x);
        }
        for i in 1..vs.len() {
            if v <= vs[i] {
                let w = (v - vs[i - 1]) / (vs[i] - vs[i - 1]);
                let (t0, s0) = self.row_reach(i - 1, x);
                let (t1, s1) = self.row_reach(i, x);
                return (t0 + w * (t1 - t0), s0 + w * (s1 - s0));
            }
        }
        unreachable!("speeds above the table are handled by the caller")
    }

    pub fn accel_reach(&self, v: f64, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            return (0.0, v);
        }
        let last = self.accel_speeds.len() - 1;
        if v <= self.accel_speeds[last] {
            return self.reach_tabulated(v, x);
        }
        let row_top = *self.accel_speed[last].last().unwrap();
        if v >= row_top {
            return (x / v, v);
        }
        // Find where the fastest row reaches `v` and continue from there.
        let (mut lo, mut hi) = (0.0, *self.accel_distances.last().unwrap());
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.row_reach(last, mid).1 < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x0 = 0.5 * (lo + hi);
        let (t0, _) = self.row_reach(last, x0);
        let (t1, s1) = self.row_reach(last, x0 + x);
        (t1 - t0, s1)
    }
}
