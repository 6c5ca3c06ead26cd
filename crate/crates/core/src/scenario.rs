//! Boundary data, ramps and time grid of a loading scenario.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::mesh::{TAG_BOTTOM, TAG_LEFT, TAG_RIGHT, TAG_TOP};

/// Piecewise-linear function of time given by `(t, value)` breakpoints,
/// held constant outside its range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub points: Vec<[f64; 2]>,
}

impl Ramp {
    /// Linear rise from 0 to `level` over `[0, rise]`, then hold.
    pub fn linear(rise: f64, level: f64) -> Ramp {
        Ramp {
            points: vec![[0.0, 0.0], [rise, level]],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 0.0;
        }
        if t <= pts[0][0] {
            return pts[0][1];
        }
        for w in pts.windows(2) {
            let ([t0, v0], [t1, v1]) = (w[0], w[1]);
            if t <= t1 {
                return if t1 > t0 { v0 + (v1 - v0) * (t - t0) / (t1 - t0) } else { v1 };
            }
        }
        pts[pts.len() - 1][1]
    }

    pub fn validate(&self, name: &str, errors: &mut Vec<String>) {
        if self.points.is_empty() {
            errors.push(format!("ramp '{name}' has no points"));
            return;
        }
        if self.points[0][1] != 0.0 {
            errors.push(format!("ramp '{name}' must start at 0 (starts at {})", self.points[0][1]));
        }
        if self.points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            errors.push(format!("ramp '{name}' has non-finite points"));
        }
        if self.points.windows(2).any(|w| w[1][0] < w[0][0]) {
            errors.push(format!("ramp '{name}' times must be non-decreasing"));
        }
    }
}

fn default_ramp() -> String {
    "default".into()
}

/// Displacement condition on one component (1 or 2) of a tagged boundary.
/// A tied condition forces a common, unknown value instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementBc {
    pub boundary: String,
    pub component: usize,
    #[serde(default)]
    pub value: f64,
    #[serde(default)]
    pub tied: bool,
    #[serde(default = "default_ramp")]
    pub ramp: String,
}

/// Channel pressure condition (channel 1 or 2) on a tagged boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureBc {
    pub channel: usize,
    pub boundary: String,
    #[serde(default)]
    pub value: f64,
    #[serde(default = "default_ramp")]
    pub ramp: String,
}

/// Constant surface traction on a tagged boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TractionBc {
    pub boundary: String,
    pub value: [f64; 2],
    #[serde(default = "default_ramp")]
    pub ramp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub dt: f64,
    pub steps: usize,
    pub ramps: BTreeMap<String, Ramp>,
    #[serde(default)]
    pub displacement: Vec<DisplacementBc>,
    #[serde(default)]
    pub pressure: Vec<PressureBc>,
    #[serde(default)]
    pub traction: Vec<TractionBc>,
}

fn ramps() -> BTreeMap<String, Ramp> {
    BTreeMap::from([(default_ramp(), Ramp::linear(0.5, 1.0))])
}

fn fixed(boundary: &str, component: usize, value: f64) -> DisplacementBc {
    DisplacementBc {
        boundary: boundary.into(),
        component,
        value,
        tied: false,
        ramp: default_ramp(),
    }
}

impl Scenario {
    /// Uniform extension: left edge held, right edge pulled by `u1`, bottom
    /// on rollers, top kept straight; all boundaries impermeable.
    pub fn validation(u1: f64) -> Scenario {
        Scenario {
            dt: 0.025,
            steps: 40,
            ramps: ramps(),
            displacement: vec![
                fixed(TAG_LEFT, 1, 0.0),
                fixed(TAG_RIGHT, 1, u1),
                fixed(TAG_BOTTOM, 2, 0.0),
                DisplacementBc {
                    tied: true,
                    ..fixed(TAG_TOP, 2, 0.0)
                },
            ],
            pressure: vec![],
            traction: vec![],
        }
    }

    /// Shear: left edge clamped, right edge moved by `u2` transversally.
    pub fn shear(u2: f64) -> Scenario {
        Scenario {
            dt: 0.025,
            steps: 40,
            ramps: ramps(),
            displacement: vec![
                fixed(TAG_LEFT, 1, 0.0),
                fixed(TAG_LEFT, 2, 0.0),
                fixed(TAG_RIGHT, 1, 0.0),
                fixed(TAG_RIGHT, 2, u2),
            ],
            pressure: vec![],
            traction: vec![],
        }
    }

    /// Inflation: bottom clamped, channel 1 pressurized on the left and
    /// channel 2 on the right.
    pub fn inflation(p1: f64, p2: f64) -> Scenario {
        let pbc = |channel: usize, boundary: &str, value: f64| PressureBc {
            channel,
            boundary: boundary.into(),
            value,
            ramp: default_ramp(),
        };
        Scenario {
            dt: 0.025,
            steps: 40,
            ramps: ramps(),
            displacement: vec![fixed(TAG_BOTTOM, 1, 0.0), fixed(TAG_BOTTOM, 2, 0.0)],
            pressure: vec![pbc(1, TAG_LEFT, p1), pbc(2, TAG_RIGHT, p2)],
            traction: vec![],
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn ramp(&self, name: &str) -> &Ramp {
        &self.ramps[name]
    }

    /// `R(t_{k+1}) − R(t_k)` for the named ramp.
    pub fn ramp_increment(&self, name: &str, k: usize) -> f64 {
        let r = self.ramp(name);
        r.eval(self.time(k + 1)) - r.eval(self.time(k))
    }

    /// Copy with every prescribed amplitude set to zero.
    pub fn zero_amplitude(&self) -> Scenario {
        let mut s = self.clone();
        s.displacement.iter_mut().for_each(|d| d.value = 0.0);
        s.pressure.iter_mut().for_each(|p| p.value = 0.0);
        s.traction.iter_mut().for_each(|t| t.value = [0.0; 2]);
        s
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self, tags: &[&str], errors: &mut Vec<String>) {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errors.push(format!("time step must be positive (got {})", self.dt));
        }
        if self.steps == 0 {
            errors.push("step count must be at least 1".into());
        }
        for (name, r) in &self.ramps {
            r.validate(name, errors);
        }
        let check_tag = |b: &str, what: &str, errors: &mut Vec<String>| {
            if !tags.contains(&b) {
                errors.push(format!("{what}: unknown boundary '{b}' (known: {})", tags.join(", ")));
            }
        };
        let check_ramp = |r: &str, what: &str, errors: &mut Vec<String>| {
            if !self.ramps.contains_key(r) {
                errors.push(format!("{what}: unknown ramp '{r}'"));
            }
        };
        for (i, d) in self.displacement.iter().enumerate() {
            let what = format!("displacement condition {}", i + 1);
            check_tag(&d.boundary, &what, errors);
            check_ramp(&d.ramp, &what, errors);
            if !(d.component == 1 || d.component == 2) {
                errors.push(format!("{what}: component must be 1 or 2 (got {})", d.component));
            }
            if !d.value.is_finite() {
                errors.push(format!("{what}: value must be finite"));
            }
            if d.tied && d.value != 0.0 {
                errors.push(format!("{what}: a tied condition takes no value"));
            }
        }
        for (i, p) in self.pressure.iter().enumerate() {
            let what = format!("pressure condition {}", i + 1);
            check_tag(&p.boundary, &what, errors);
            check_ramp(&p.ramp, &what, errors);
            if !(p.channel == 1 || p.channel == 2) {
                errors.push(format!("{what}: channel must be 1 or 2 (got {})", p.channel));
            }
            if !p.value.is_finite() {
                errors.push(format!("{what}: value must be finite"));
            }
        }
        for (i, t) in self.traction.iter().enumerate() {
            let what = format!("traction condition {}", i + 1);
            check_tag(&t.boundary, &what, errors);
            check_ramp(&t.ramp, &what, errors);
        }
    }
}
