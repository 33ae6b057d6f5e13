//! Trapezoidal rate profiles with jerk-limited ramps.
//!
//! The rate (acceleration or deceleration magnitude) rises linearly to a
//! peak, holds, then falls linearly back to zero. When the requested speed
//! change is too small to reach the rate limit the trapezoid degrades to a
//! triangle.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Ramp {
    pub peak: f64,
    pub j_up: f64,
    pub hold: f64,
    pub j_down: f64,
}

impl Ramp {
    /// The ramp that changes speed by exactly `dv`.
    pub fn for_delta_v(dv: f64, rate_max: f64, j_up: f64, j_down: f64) -> Ramp {
        let dv = dv.max(0.0);
        let budget = rate_max * rate_max * (0.5 / j_up + 0.5 / j_down);
        if dv >= budget {
            Ramp { peak: rate_max, j_up, hold: (dv - budget) / rate_max, j_down }
        } else {
            let peak = (dv / (0.5 / j_up + 0.5 / j_down)).sqrt();
            Ramp { peak, j_up, hold: 0.0, j_down }
        }
    }

    /// The ramp lasting exactly `duration` seconds.
    pub fn for_duration(duration: f64, rate_max: f64, j_up: f64, j_down: f64) -> Ramp {
        let full = rate_max / j_up + rate_max / j_down;
        if duration <= full {
            let peak = duration.max(0.0) / (1.0 / j_up + 1.0 / j_down);
            Ramp { peak, j_up, hold: 0.0, j_down }
        } else {
            Ramp { peak: rate_max, j_up, hold: duration - full, j_down }
        }
    }

    /// A ramp that rises to `rate_max` and holds it indefinitely.
    pub fn open_ended(rate_max: f64, j_up: f64, j_down: f64) -> Ramp {
        Ramp { peak: rate_max, j_up, hold: f64::INFINITY, j_down }
    }

    fn t1(&self) -> f64 {
        self.peak / self.j_up
    }

    fn t2(&self) -> f64 {
        self.t1() + self.hold
    }

    pub fn duration(&self) -> f64 {
        self.t2() + self.peak / self.j_down
    }

    /// Integral of the rate over `[0, t]`.
    pub fn delta_v(&self, t: f64) -> f64 {
        let (t1, t2, t3) = (self.t1(), self.t2(), self.duration());
        let t = t.max(0.0);
        if t <= t1 {
            0.5 * self.j_up * t * t
        } else if t <= t2 {
            0.5 * self.peak * t1 + self.peak * (t - t1)
        } else if t <= t3 {
            let tau = t - t2;
            0.5 * self.peak * t1 + self.peak * self.hold + self.peak * tau - 0.5 * self.j_down * tau * tau
        } else {
            self.total_delta_v()
        }
    }

    pub fn total_delta_v(&self) -> f64 {
        self.peak * (0.5 * self.t1() + self.hold + 0.5 * self.peak / self.j_down)
    }

    /// Double integral of the rate over `[0, t]`.
    pub fn delta_x(&self, t: f64) -> f64 {
        let (t1, t2, t3) = (self.t1(), self.t2(), self.duration());
        let t = t.max(0.0);
        let d1 = self.j_up * t1.powi(3) / 6.0;
        let s1 = 0.5 * self.j_up * t1 * t1;
        if t <= t1 {
            return self.j_up * t.powi(3) / 6.0;
        }
        if t <= t2 {
            let u = t - t1;
            return d1 + s1 * u + 0.5 * self.peak * u * u;
        }
        let d2 = d1 + s1 * self.hold + 0.5 * self.peak * self.hold * self.hold;
        let s2 = s1 + self.peak * self.hold;
        let tau = (t.min(t3)) - t2;
        let d = d2 + s2 * tau + 0.5 * self.peak * tau * tau - self.j_down * tau.powi(3) / 6.0;
        if t <= t3 {
            d
        } else {
            d + self.total_delta_v() * (t - t3)
        }
    }
}
