//! Mirror world lines `x = q(t)` and the light-cone maps `v = V(u)` they induce.
//!
//! A ray `u = t - x` hitting the mirror at time `t*` leaves as `v = t* + q(t*)`,
//! where `t*` solves `t - q(t) = u`. Because `|q'| ≤ β_max < 1` the left-hand
//! side is strictly increasing, so the root is unique and can be bracketed
//! from the velocity bound alone.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::homography::HomographicMap;
use crate::jet::Jet;

/// User-supplied mirror motion.
///
/// Implementations must be safe to evaluate concurrently. The velocity bound
/// is trusted for bracketing and is never estimated numerically.
pub trait WorldLine: Send + Sync {
    fn position(&self, t: f64) -> f64;

    /// Upper bound on `|q'(t)|`, strictly below 1.
    fn velocity_bound(&self) -> f64;

    /// `(q', q'', q''')` at `t`, when known in closed form.
    fn derivatives(&self, _t: f64) -> Option<[f64; 3]> {
        None
    }
}

/// `Ωq(t) = mean_phase - β sin(Ωt - time_phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidalMotion {
    pub omega: f64,
    pub beta: f64,
    pub mean_phase: f64,
    pub time_phase: f64,
}

impl SinusoidalMotion {
    /// The two mirrors of a cavity of length `Kπ/Ω` oscillating with peak
    /// velocity `β = th α`; `mirror` is 1 (left) or 2 (right).
    pub fn cavity_mirror(k: u32, alpha: f64, mirror: u8, omega: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("resonance order K must be >= 1".into()));
        }
        let half = k as f64 * PI / 2.0;
        let lag = (k as f64 + 1.0) * PI / 2.0;
        let (mean_phase, time_phase) = match mirror {
            1 => (-half, lag),
            2 => (half, -lag),
            _ => return Err(Error::InvalidInput(format!("mirror index must be 1 or 2, got {mirror}"))),
        };
        Ok(SinusoidalMotion {
            omega,
            beta: alpha.tanh(),
            mean_phase,
            time_phase,
        })
    }

    fn position(&self, t: f64) -> f64 {
        (self.mean_phase - self.beta * (self.omega * t - self.time_phase).sin()) / self.omega
    }

    fn derivatives(&self, t: f64) -> [f64; 3] {
        let x = self.omega * t - self.time_phase;
        let (s, c) = x.sin_cos();
        let b = self.beta;
        let w = self.omega;
        [-b * c, b * w * s, b * w * w * c]
    }
}

#[derive(Clone)]
pub enum MirrorTrajectory {
    Static { position: f64 },
    Sinusoidal(SinusoidalMotion),
    /// The world line whose scattering map is exactly homographic:
    /// `sin(Ωq - φ_a) = -β sin(Ωt - φ_b)`.
    Homographic(HomographicMap),
    Custom(Arc<dyn WorldLine>),
}

impl fmt::Debug for MirrorTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MirrorTrajectory::Static { position } => {
                f.debug_struct("Static").field("position", position).finish()
            }
            MirrorTrajectory::Sinusoidal(m) => f.debug_tuple("Sinusoidal").field(m).finish(),
            MirrorTrajectory::Homographic(h) => f.debug_tuple("Homographic").field(h).finish(),
            MirrorTrajectory::Custom(c) => f
                .debug_struct("Custom")
                .field("velocity_bound", &c.velocity_bound())
                .finish_non_exhaustive(),
        }
    }
}

/// Switch from bisection to Newton once the bracket is this many periods wide.
const NEWTON_SWITCH: f64 = 1e-3;
const ROOT_TOL: f64 = 1e-12;

impl MirrorTrajectory {
    pub fn custom(world_line: Arc<dyn WorldLine>) -> Result<Self> {
        let b = world_line.velocity_bound();
        if !(0.0..1.0).contains(&b) {
            return Err(Error::InvalidInput(format!(
                "velocity bound must lie in [0, 1), got {b}"
            )));
        }
        Ok(MirrorTrajectory::Custom(world_line))
    }

    pub fn position(&self, t: f64) -> f64 {
        match self {
            MirrorTrajectory::Static { position } => *position,
            MirrorTrajectory::Sinusoidal(m) => m.position(t),
            MirrorTrajectory::Homographic(h) => {
                let beta = h.beta();
                let omega = h.omega();
                (h.phase() - (beta * (omega * t - h.b().arg()).sin()).asin()) / omega
            }
            MirrorTrajectory::Custom(c) => c.position(t),
        }
    }

    pub fn velocity_bound(&self) -> f64 {
        match self {
            MirrorTrajectory::Static { .. } => 0.0,
            MirrorTrajectory::Sinusoidal(m) => m.beta.abs(),
            MirrorTrajectory::Homographic(h) => h.beta(),
            MirrorTrajectory::Custom(c) => c.velocity_bound(),
        }
    }

    fn velocity(&self, t: f64) -> Option<f64> {
        match self {
            MirrorTrajectory::Static { .. } => Some(0.0),
            MirrorTrajectory::Sinusoidal(m) => Some(m.derivatives(t)[0]),
            MirrorTrajectory::Homographic(h) => {
                let beta = h.beta();
                let (s, c) = (h.omega() * t - h.b().arg()).sin_cos();
                let y = beta * s;
                Some(-beta * c / (1.0 - y * y).sqrt())
            }
            MirrorTrajectory::Custom(c) => c.derivatives(t).map(|d| d[0]),
        }
    }

    /// `(q', q'', q''')`, when available in closed form.
    pub fn kinematics(&self, t: f64) -> Option<[f64; 3]> {
        match self {
            MirrorTrajectory::Static { .. } => Some([0.0; 3]),
            MirrorTrajectory::Sinusoidal(m) => Some(m.derivatives(t)),
            MirrorTrajectory::Homographic(_) => None,
            MirrorTrajectory::Custom(c) => c.derivatives(t),
        }
    }

    fn time_scale(&self) -> f64 {
        match self {
            MirrorTrajectory::Sinusoidal(m) => 1.0 / m.omega,
            MirrorTrajectory::Homographic(h) => 1.0 / h.omega(),
            _ => 1.0,
        }
    }

    /// Solves `t + sign·q(t) = w` for the unique hit time.
    fn hit_time(&self, w: f64, sign: f64) -> Result<f64> {
        let bound = self.velocity_bound();
        if !(bound < 1.0) {
            return Err(Error::Domain(format!("velocity bound {bound} is not below 1")));
        }
        let scale = self.time_scale();
        let f = |t: f64| t + sign * self.position(t) - w;

        let t0 = w - sign * self.position(w);
        let f0 = f(t0);
        if f0 == 0.0 {
            return Ok(t0);
        }
        let width = f0.abs() / (1.0 - bound) * (1.0 + 1e-9) + 1e-15 * scale.max(t0.abs());
        let (mut lo, mut hi) = if f0 > 0.0 { (t0 - width, t0) } else { (t0, t0 + width) };
        let (flo, fhi) = (f(lo), f(hi));
        if !(flo <= 0.0 && fhi >= 0.0) {
            return Err(Error::Domain(format!(
                "cannot bracket the hit time for w = {w}: the trajectory violates its velocity bound {bound}"
            )));
        }

        while hi - lo > NEWTON_SWITCH * scale {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }

        let tol = ROOT_TOL * scale;
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let ft = f(t);
            if ft == 0.0 {
                return Ok(t);
            }
            if ft > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let next = match self.velocity(t) {
                Some(qd) => {
                    let cand = t - ft / (1.0 + sign * qd);
                    if cand > lo && cand < hi {
                        cand
                    } else {
                        0.5 * (lo + hi)
                    }
                }
                None => 0.5 * (lo + hi),
            };
            let step = (next - t).abs();
            t = next;
            if step <= tol.max(4.0 * f64::EPSILON * t.abs()) || hi - lo <= 4.0 * f64::EPSILON * t.abs() {
                return Ok(t);
            }
        }
        let residual = f(t).abs();
        if residual <= tol.max(8.0 * f64::EPSILON * t.abs()) {
            Ok(t)
        } else {
            Err(Error::Domain(format!(
                "hit-time iteration did not converge for w = {w} (residual {residual:e})"
            )))
        }
    }

    /// `v = V(u)` for a ray reflected off this mirror.
    pub fn v_of_u(&self, u: f64) -> Result<f64> {
        let t = self.hit_time(u, -1.0)?;
        Ok(t + self.position(t))
    }

    /// `u = V⁻¹(v)`.
    pub fn u_of_v(&self, v: f64) -> Result<f64> {
        let t = self.hit_time(v, 1.0)?;
        Ok(t - self.position(t))
    }

    fn jet_at_hit(&self, t: f64, value: f64) -> Result<Jet> {
        let [q1, q2, q3] = self.kinematics(t).ok_or_else(|| {
            Error::InvalidInput("trajectory does not provide closed-form derivatives".into())
        })?;
        let m = 1.0 - q1;
        let d1 = (1.0 + q1) / m;
        let d2 = 2.0 * q2 / (m * m * m);
        let d3 = 2.0 * q3 / m.powi(4) + 6.0 * q2 * q2 / m.powi(5);
        Ok(Jet {
            value,
            deriv: d1,
            schwarzian: d3 / d1 - 1.5 * (d2 / d1).powi(2),
        })
    }

    /// Value, slope and Schwarzian derivative of `V` at `u`.
    pub fn scatter_jet(&self, u: f64) -> Result<Jet> {
        match self {
            MirrorTrajectory::Homographic(h) => Ok(h.jet(u)),
            MirrorTrajectory::Static { position } => Ok(Jet {
                value: u + 2.0 * position,
                deriv: 1.0,
                schwarzian: 0.0,
            }),
            _ => {
                let t = self.hit_time(u, -1.0)?;
                self.jet_at_hit(t, t + self.position(t))
            }
        }
    }

    /// Value, slope and Schwarzian derivative of `V⁻¹` at `v`.
    pub fn inverse_scatter_jet(&self, v: f64) -> Result<Jet> {
        match self {
            MirrorTrajectory::Homographic(h) => Ok(h.inverse().jet(v)),
            MirrorTrajectory::Static { position } => Ok(Jet {
                value: v - 2.0 * position,
                deriv: 1.0,
                schwarzian: 0.0,
            }),
            _ => {
                let t = self.hit_time(v, 1.0)?;
                let u = t - self.position(t);
                Ok(self.jet_at_hit(t, v)?.inverted(u))
            }
        }
    }
}

/// Mirror position seen by the ray `u`, `Q(u) = (h(u) - u)/2`.
///
/// For the canonical phases `φ_a = 0`, `φ_b = π/2` this is
/// `ΩQ = arctg(β cos Ωu / (1 + β sin Ωu))`.
pub fn homographic_position(map: &HomographicMap, u: f64) -> f64 {
    map.half_delay(u)
}
