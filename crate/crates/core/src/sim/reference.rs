//! Snap-limited triangular scanning reference and its feedforward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric triangular motion between `0` and `amplitude` with period
/// `period`, whose turnarounds are shaped by a bounded snap so that jerk is
/// continuous.
///
/// Each turnaround reverses the velocity `±V` within `4τ`, `τ = (V/s)^{1/3}`,
/// with snap `±s` on four segments of length `τ`. Solving
/// `amplitude = V (period/2 - 7τ/6)` fixes the cruise speed `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleProfile {
    /// Peak-to-peak stroke, m.
    pub amplitude: f64,
    /// s.
    pub period: f64,
    /// Snap bound, m/s⁴.
    pub snap: f64,
}

/// Position, velocity, acceleration and jerk at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Kinematics {
    pub p: f64,
    pub v: f64,
    pub a: f64,
    pub j: f64,
}

impl Kinematics {
    fn advance(self, snap: f64, dt: f64) -> Self {
        let (t2, t3, t4) = (dt * dt, dt * dt * dt, dt * dt * dt * dt);
        Self {
            p: self.p + self.v * dt + self.a * t2 / 2.0 + self.j * t3 / 6.0 + snap * t4 / 24.0,
            v: self.v + self.a * dt + self.j * t2 / 2.0 + snap * t3 / 6.0,
            a: self.a + self.j * dt + snap * t2 / 2.0,
            j: self.j + snap * dt,
        }
    }
}

/// A validated profile with its constant-snap segments over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub profile: TriangleProfile,
    pub cruise_velocity: f64,
    pub tau: f64,
    /// `(start time, snap, state at start)`.
    segments: Vec<(f64, f64, Kinematics)>,
}

impl TriangleProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude {} must be >= 0", self.amplitude)));
        }
        if !(self.period > 0.0 && self.snap > 0.0 && self.period.is_finite() && self.snap.is_finite()) {
            return Err(Error::InvalidParameter("period and snap bound must be positive".into()));
        }
        Ok(())
    }

    /// Stroke reached when the turnarounds fill the whole period.
    pub fn max_amplitude(&self) -> f64 {
        let tau = self.period / 8.0;
        self.snap * tau.powi(3) * (self.period / 2.0 - 7.0 * tau / 6.0)
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        self.validate()?;
        let max = self.max_amplitude();
        if self.amplitude > max {
            return Err(Error::Profile(format!(
                "stroke {} m needs more than snap {} m/s^4 allows in period {} s (max {max:.4e} m)",
                self.amplitude, self.snap, self.period
            )));
        }
        let stroke = |v: f64| v * (self.period / 2.0 - 7.0 / 6.0 * (v / self.snap).cbrt());
        let (mut lo, mut hi) = (0.0, self.snap * (self.period / 8.0).powi(3));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if stroke(mid) < self.amplitude {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = 0.5 * (lo + hi);
        let tau = (v / self.snap).cbrt();
        let s = self.snap;
        let cruise = self.period / 2.0 - 4.0 * tau;
        // starts at the bottom turnaround, where velocity is zero and
        // acceleration peaks
        let plan = [
            (-s, tau),
            (s, tau),
            (0.0, cruise),
            (-s, tau),
            (s, 2.0 * tau),
            (-s, tau),
            (0.0, cruise),
            (s, tau),
            (-s, tau),
        ];
        let mut state = Kinematics {
            a: s * tau * tau,
            ..Default::default()
        };
        let mut t = 0.0;
        let mut segments = Vec::with_capacity(plan.len());
        for (snap, dt) in plan {
            segments.push((t, snap, state));
            state = state.advance(snap, dt);
            t += dt;
        }
        Ok(Trajectory {
            profile: *self,
            cruise_velocity: v,
            tau,
            segments,
        })
    }
}

impl Trajectory {
    pub fn at(&self, t: f64) -> Kinematics {
        if self.profile.amplitude == 0.0 {
            return Kinematics::default();
        }
        let tp = t.rem_euclid(self.profile.period);
        let i = self.segments.partition_point(|s| s.0 <= tp).saturating_sub(1);
        let (t0, snap, k) = self.segments[i];
        k.advance(snap, tp - t0)
    }
}

/// Position, velocity and acceleration sampled on `times`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceSamples {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

pub fn generate_reference(profile: &TriangleProfile, times: &[f64]) -> Result<ReferenceSamples> {
    let traj = profile.trajectory()?;
    let mut out = ReferenceSamples::default();
    for &t in times {
        let k = traj.at(t);
        out.position.push(k.p);
        out.velocity.push(k.v);
        out.acceleration.push(k.a);
    }
    Ok(out)
}

/// Feedforward gains in plant-input units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Feedforward {
    pub m: f64,
    pub c: f64,
}

impl Feedforward {
    pub fn force(&self, v: f64, a: f64) -> f64 {
        self.m * a + self.c * v
    }
}

/// `F = m·a + c·v`, elementwise.
pub fn feedforward(v: &[f64], a: &[f64], m: f64, c: f64) -> Result<Vec<f64>> {
    if v.len() != a.len() {
        return Err(Error::Dimension(format!("velocity has {} samples, acceleration {}", v.len(), a.len())));
    }
    let ff = Feedforward { m, c };
    Ok(v.iter().zip(a).map(|(&v, &a)| ff.force(v, a)).collect())
}
