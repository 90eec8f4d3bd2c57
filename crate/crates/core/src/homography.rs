//! Homographic (Möbius) maps acting on the phase circle `e^{iΩu}`.
//!
//! A map `h` is represented by the unit-determinant matrix
//!
//! ```text
//! A(h) = [[a, b], [b*, a*]],   e^{iΩh(u)} = (a e^{iΩu} + b) / (b* e^{iΩu} + a*)
//! ```
//!
//! so that composition of maps is matrix multiplication. The matrix only
//! fixes `h` modulo `2π/Ω`; the lift is carried separately as a continuous
//! phase of `a`, which makes `h(u) - u` a continuous periodic function.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::Jet;

const DET_DRIFT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomographicMap {
    a: Complex64,
    b: Complex64,
    omega: f64,
    /// Continuous lift of `arg a`.
    phase: f64,
}

impl HomographicMap {
    /// Builds a map from its matrix entries, rescaling to unit determinant.
    pub fn new(a: Complex64, b: Complex64, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        let det = a.norm_sqr() - b.norm_sqr();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::InvalidInput(format!(
                "|a|^2 - |b|^2 must be positive, got {det}"
            )));
        }
        let s = det.sqrt();
        Ok(HomographicMap {
            a: a / s,
            b: b / s,
            omega,
            phase: a.arg(),
        })
    }

    /// Builds a map with an explicit lift of `arg a`.
    ///
    /// `lift` must agree with `arg a` modulo `2π`.
    pub fn with_lift(a: Complex64, b: Complex64, omega: f64, lift: f64) -> Result<Self> {
        let mut map = Self::new(a, b, omega)?;
        let turns = (lift - map.phase) / (2.0 * PI);
        if (turns - turns.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "lift {lift} is not congruent to arg a = {}",
                map.phase
            )));
        }
        map.phase = lift;
        Ok(map)
    }

    /// `a = e^{iφ_a} ch α`, `b = e^{iφ_b} sh α`; `φ_a` is taken as the lift.
    pub fn from_rapidity(alpha: f64, phi_a: f64, phi_b: f64, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        if !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("rapidity must be finite, got {alpha}")));
        }
        Ok(HomographicMap {
            a: Complex64::from_polar(alpha.cosh(), phi_a),
            b: Complex64::from_polar(alpha.sinh(), phi_b),
            omega,
            phase: phi_a,
        })
    }

    pub fn identity(omega: f64) -> Result<Self> {
        Self::from_rapidity(0.0, 0.0, 0.0, omega)
    }

    /// Rigid translation `u ↦ u + shift` (a mirror at rest at `x = shift/2`).
    pub fn translation(shift: f64, omega: f64) -> Result<Self> {
        Self::from_rapidity(0.0, 0.5 * omega * shift, 0.0, omega)
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Lifted phase of `a`; `h(u) - u` oscillates around `2·phase/Ω`.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.a, self.b], [self.b.conj(), self.a.conj()]]
    }

    pub fn determinant(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    /// `α = asinh |b|`.
    pub fn rapidity(&self) -> f64 {
        self.b.norm().asinh()
    }

    /// Peak mirror velocity `β = th α`.
    pub fn beta(&self) -> f64 {
        self.rapidity().tanh()
    }

    pub fn inverse(&self) -> Self {
        HomographicMap {
            a: self.a.conj(),
            b: -self.b,
            omega: self.omega,
            phase: -self.phase,
        }
    }

    /// `self ∘ inner`, i.e. `A(self)·A(inner)`.
    pub fn compose(&self, inner: &HomographicMap) -> Result<Self> {
        if self.omega != inner.omega {
            return Err(Error::InvalidInput(format!(
                "cannot compose maps with frequencies {} and {}",
                self.omega, inner.omega
            )));
        }
        let (ah, bh, ag, bg) = (self.a, self.b, inner.a, inner.b);
        let mut a = ah * ag + bh * bg.conj();
        let b = ah * bg + bh * ag.conj();
        // |b_h b_g*| < |a_h a_g|, so the correction stays inside (-π/2, π/2)
        // and the lift remains continuous in the map parameters.
        let phase = self.phase + inner.phase + (1.0 + (bh * bg.conj()) / (ah * ag)).arg();
        let det = a.norm_sqr() - b.norm_sqr();
        if (det - 1.0).abs() > DET_DRIFT {
            // rescaling by sqrt(det) is useless once |a|² swamps the roundoff
            a *= 1.0f64.hypot(b.norm()) / a.norm();
        }
        Ok(HomographicMap {
            a,
            b,
            omega: self.omega,
            phase,
        })
    }

    /// `p`-fold self composition (`p ≥ 0`).
    pub fn power(&self, p: u32) -> Result<Self> {
        let mut acc = HomographicMap::identity(self.omega)?;
        for _ in 0..p {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    #[inline]
    fn ratio_term(&self, u: f64) -> Complex64 {
        (self.b / self.a) * Complex64::from_polar(1.0, -self.omega * u)
    }

    /// Continuous branch of `h(u)`.
    pub fn apply(&self, u: f64) -> f64 {
        u + 2.0 * (self.phase + (1.0 + self.ratio_term(u)).arg()) / self.omega
    }

    /// `h(u+eps) - h(u)` without cancellation for small `eps`.
    pub fn increment(&self, u: f64, eps: f64) -> f64 {
        let w = 1.0 + self.ratio_term(u);
        // e^{-iΩε} - 1 = -2i sin(Ωε/2) e^{-iΩε/2}
        let half = 0.5 * self.omega * eps;
        let step = Complex64::new(0.0, -2.0 * half.sin()) * Complex64::from_polar(1.0, -half);
        let rel = (self.ratio_term(u) * step) / w;
        eps + 2.0 * (1.0 + rel).arg() / self.omega
    }

    /// `h'(u) = 1 / |a + b e^{-iΩu}|²`.
    pub fn derivative(&self, u: f64) -> f64 {
        1.0 / (self.a + self.b * Complex64::from_polar(1.0, -self.omega * u)).norm_sqr()
    }

    /// `Sh(u) = (Ω²/2)(1 - h'(u)²)`.
    pub fn schwarzian(&self, u: f64) -> f64 {
        let d = self.derivative(u);
        0.5 * self.omega * self.omega * (1.0 - d * d)
    }

    pub fn jet(&self, u: f64) -> Jet {
        let d = self.derivative(u);
        Jet {
            value: self.apply(u),
            deriv: d,
            schwarzian: 0.5 * self.omega * self.omega * (1.0 - d * d),
        }
    }

    /// Half the phase delay, `Q(u) = (h(u) - u)/2`.
    pub fn half_delay(&self, u: f64) -> f64 {
        (self.phase + (1.0 + self.ratio_term(u)).arg()) / self.omega
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "frequency must be positive and finite, got {omega}"
        )))
    }
}

/// `i^n` for any integer `n`, exactly.
pub fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Matrices of the two cavity mirrors oscillating at `Ω = Kπ/L`:
///
/// ```text
/// A(h) = [[(-i)^K ch α, i^{K+1} sh α], [(-i)^{K+1} sh α, i^K ch α]]
/// A(g) = [[i^K ch α, (-i)^{K+1} sh α], [i^{K+1} sh α, (-i)^K ch α]]
/// ```
///
/// The lifts put mirror 1 at `-L/2` and mirror 2 at `+L/2` on average.
pub fn mirror_matrices(k: u32, alpha: f64, omega: f64) -> Result<(HomographicMap, HomographicMap)> {
    if k == 0 {
        return Err(Error::InvalidInput("resonance order K must be >= 1".into()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("rapidity must be >= 0, got {alpha}")));
    }
    check_omega(omega)?;
    let k = k as i64;
    let (ch, sh) = (alpha.cosh(), alpha.sinh());
    let h = HomographicMap {
        a: i_pow(-k) * ch,
        b: i_pow(k + 1) * sh,
        omega,
        phase: -(k as f64) * PI / 2.0,
    };
    let g = HomographicMap {
        a: i_pow(k) * ch,
        b: i_pow(-(k + 1)) * sh,
        omega,
        phase: (k as f64) * PI / 2.0,
    };
    Ok((h, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn identity_composition() {
        let h = HomographicMap::from_rapidity(0.7, 0.3, -1.1, 2.0).unwrap();
        let id = HomographicMap::identity(2.0).unwrap();
        let c = id.compose(&h).unwrap();
        assert!(close(c.a(), h.a(), 1e-15) && close(c.b(), h.b(), 1e-15));
        for &u in &[0.0, 0.4, -3.0, 10.0] {
            assert!((c.apply(u) - h.apply(u)).abs() < 1e-14);
        }
    }

    #[test]
    fn frequency_mismatch_is_rejected() {
        let h = HomographicMap::identity(1.0).unwrap();
        let g = HomographicMap::identity(2.0).unwrap();
        assert!(matches!(h.compose(&g), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn round_trip_product_matches_closed_form() {
        // A(g⁻¹)A(h) = [[(-1)^K ch 2α, i sh 2α], ...] by direct multiplication.
        for k in [2u32, 4, 3] {
            let alpha = 0.37;
            let (h, g) = mirror_matrices(k, alpha, 1.0).unwrap();
            let f2 = g.inverse().compose(&h).unwrap();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!(close(f2.a(), Complex64::new(sign * (2.0 * alpha).cosh(), 0.0), 1e-14));
            assert!(close(f2.b(), Complex64::new(0.0, (2.0 * alpha).sinh()), 1e-14));
        }
    }

    #[test]
    fn determinant_survives_long_chains() {
        let (h, g) = mirror_matrices(3, 0.013, 1.0).unwrap();
        let step = g.inverse().compose(&h).unwrap();
        let mut acc = HomographicMap::identity(1.0).unwrap();
        for _ in 0..200 {
            acc = step.compose(&acc).unwrap();
            assert!((acc.determinant() - 1.0).abs() < 1e-12 * acc.a().norm_sqr());
        }
    }

    #[test]
    fn static_mirror_is_a_translation() {
        let q0 = 0.83;
        let omega = 1.7;
        let h = HomographicMap::from_rapidity(0.0, omega * q0, 0.4, omega).unwrap();
        for &u in &[-2.0, 0.0, 1.3, 50.0] {
            assert!((h.apply(u) - (u + 2.0 * q0)).abs() < 1e-13);
            assert!((h.derivative(u) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn extremal_derivatives() {
        for &alpha in &[0.05, 0.4, 1.3] {
            let h = HomographicMap::from_rapidity(alpha, 0.2, 1.9, 1.0).unwrap();
            let period = 2.0 * PI;
            let n = 10_000;
            let mut hi = f64::MIN;
            let mut lo = f64::MAX;
            for j in 0..n {
                let d = h.derivative(period * j as f64 / n as f64);
                hi = hi.max(d);
                lo = lo.min(d);
            }
            let e2 = (2.0 * alpha).exp();
            assert!(hi <= e2 * (1.0 + 1e-12) && lo >= (1.0 / e2) * (1.0 - 1e-12));
            // exact extrema where b e^{-iΩu}/a is real
            let u_max = (h.b() / h.a()).arg();
            let u_min = u_max + PI;
            assert!((h.derivative(u_min) / e2 - 1.0).abs() < 1e-10);
            assert!((h.derivative(u_max) * e2 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = HomographicMap::from_rapidity(0.6, -0.4, 0.9, 1.3).unwrap();
        let step = 1e-5 / h.omega();
        for j in 0..50 {
            let u = -3.0 + 0.17 * j as f64;
            let fd = (h.apply(u + step) - h.apply(u - step)) / (2.0 * step);
            assert!((fd - h.derivative(u)).abs() < 1e-6, "u = {u}");
        }
    }

    #[test]
    fn schwarzian_matches_finite_difference() {
        let h = HomographicMap::from_rapidity(0.4, 0.1, 2.2, 1.0).unwrap();
        let s = 1e-3;
        for j in 0..40 {
            let u = 0.157 * j as f64;
            let d = |k: f64| h.derivative(u + k * s);
            let d1 = d(0.0);
            let d2 = (-d(2.0) + 8.0 * d(1.0) - 8.0 * d(-1.0) + d(-2.0)) / (12.0 * s);
            let d3 = (-d(2.0) + 16.0 * d(1.0) - 30.0 * d(0.0) + 16.0 * d(-1.0) - d(-2.0))
                / (12.0 * s * s);
            let fd = d3 / d1 - 1.5 * (d2 / d1).powi(2);
            assert!((fd - h.schwarzian(u)).abs() < 1e-5, "u = {u}");
        }
        let id = HomographicMap::identity(1.0).unwrap();
        assert_eq!(id.schwarzian(0.3), 0.0);
    }

    #[test]
    fn increment_is_accurate() {
        let h = HomographicMap::from_rapidity(0.9, 0.3, 0.8, 1.0).unwrap();
        for &u in &[0.0, 1.0, 2.5] {
            for &eps in &[1e-2, 1e-3] {
                let naive = h.apply(u + eps) - h.apply(u);
                assert!((h.increment(u, eps) - naive).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn mirror_matrices_at_rest_are_translations() {
        for k in 1..=4u32 {
            let omega = 2.0;
            let (h, g) = mirror_matrices(k, 0.0, omega).unwrap();
            let shift = k as f64 * PI / omega;
            assert!((h.apply(0.3) - (0.3 - shift)).abs() < 1e-14);
            assert!((g.apply(0.3) - (0.3 + shift)).abs() < 1e-14);
        }
        let (h, g) = mirror_matrices(5, 0.8, 1.0).unwrap();
        assert!((h.determinant() - 1.0).abs() < 1e-14);
        assert!((g.determinant() - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn determinant_invariant(alpha in 0.0f64..0.5, pa in -3.0f64..3.0, pb in -3.0f64..3.0, n in 1usize..500) {
            let h = HomographicMap::from_rapidity(alpha, pa, pb, 1.0).unwrap();
            let g = HomographicMap::from_rapidity(alpha * 0.5, -pb, pa, 1.0).unwrap().inverse();
            let mut acc = HomographicMap::identity(1.0).unwrap();
            for j in 0..n {
                acc = if j % 2 == 0 { h.compose(&acc).unwrap() } else { g.compose(&acc).unwrap() };
            }
            // entries can grow geometrically; drift is relative to |a|²
            prop_assert!((acc.determinant() - 1.0).abs() < 1e-10 * acc.a().norm_sqr());
        }

        #[test]
        fn apply_is_monotone_and_periodic(alpha in 0.0f64..5.0, pa in -3.0f64..3.0, pb in -3.0f64..3.0, u in -20.0f64..20.0) {
            let omega = 1.3;
            let h = HomographicMap::from_rapidity(alpha, pa, pb, omega).unwrap();
            let period = 2.0 * PI / omega;
            prop_assert!((h.apply(u + period) - h.apply(u) - period).abs() < 1e-10);
            let n = 10_000;
            let mut prev = h.apply(u);
            for j in 1..=n {
                let next = h.apply(u + period * j as f64 / n as f64);
                prop_assert!(next > prev);
                prev = next;
            }
        }

        #[test]
        fn group_consistency(a1 in 0.0f64..2.0, a2 in 0.0f64..2.0, p1 in -3.0f64..3.0, p2 in -3.0f64..3.0, u in -10.0f64..10.0) {
            let omega = 0.7;
            let h = HomographicMap::from_rapidity(a1, p1, p2, omega).unwrap();
            let g = HomographicMap::from_rapidity(a2, p2, -p1, omega).unwrap();
            let hg = h.compose(&g).unwrap();
            prop_assert!(omega * (hg.apply(u) - h.apply(g.apply(u))).abs() < 1e-10);
        }

        #[test]
        fn derivative_has_unit_mean(alpha in 0.0f64..2.0, pa in -3.0f64..3.0, pb in -3.0f64..3.0) {
            let omega = 2.0;
            let h = HomographicMap::from_rapidity(alpha, pa, pb, omega).unwrap();
            let n = 2048;
            let period = 2.0 * PI / omega;
            let mean = (0..n).map(|j| h.derivative(period * j as f64 / n as f64)).sum::<f64>() / n as f64;
            prop_assert!((mean - 1.0).abs() < 1e-10);
        }
    }
}
