//! Period integrals, spectral integrals over arches, and the point-splitting
//! estimate of energy densities.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::homography::HomographicMap;
use crate::trajectory::MirrorTrajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Uniform samples per mechanical period; a power of two.
    pub points_per_period: usize,
    /// Point-splitting separations in units of `1/Ω`, strictly decreasing.
    pub eps_sequence: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points_per_period: 4096,
            eps_sequence: Self::halving_eps(7),
        }
    }
}

impl GridSpec {
    /// `Ωε_k = 2^{-k}·10⁻²`, `k = 0..levels`.
    pub fn halving_eps(levels: usize) -> Vec<f64> {
        (0..levels).map(|k| 1e-2 / (1u64 << k) as f64).collect()
    }

    pub fn with_points(points_per_period: usize) -> Self {
        GridSpec {
            points_per_period,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.points_per_period.is_power_of_two() || self.points_per_period < 2 {
            return Err(Error::InvalidInput(format!(
                "points per period must be a power of two >= 2, got {}",
                self.points_per_period
            )));
        }
        if self.eps_sequence.is_empty() || self.eps_sequence.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidInput("point-splitting separations must be positive".into()));
        }
        if self.eps_sequence.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput(
                "point-splitting separations must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}

/// Trapezoid rule over one period starting at `u = 0`.
pub fn integrate_period<F: Fn(f64) -> f64>(f: F, omega: f64, grid: &GridSpec) -> f64 {
    integrate_period_from(f, omega, grid, 0.0)
}

pub fn integrate_period_from<F: Fn(f64) -> f64>(f: F, omega: f64, grid: &GridSpec, start: f64) -> f64 {
    let n = grid.points_per_period;
    let h = 2.0 * PI / omega / n as f64;
    h * (0..n).map(|j| f(start + h * j as f64)).sum::<f64>()
}

/// `∫_a^b f` by tanh-sinh quadrature, robust against integrable endpoint
/// singularities. `f` receives `(x, distance to nearest endpoint)` so that
/// callers can resolve behaviour like `|x - a|^s` without cancellation.
pub fn tanh_sinh<F: FnMut(f64, f64) -> Result<f64>>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let half = 0.5 * (b - a);
    // abscissae with tanh(π/2 sinh t) closer to ±1 than this are dropped
    let t_max = 6.5;
    let mut h = 0.5;
    let mut eval = |t: f64| -> Result<f64> {
        let s = 0.5 * PI * t.sinh();
        let w = 0.5 * PI * t.cosh() / s.cosh().powi(2);
        // distance from the nearer endpoint in units of (b - a)/2
        let gap = 2.0 / ((2.0 * s.abs()).exp() + 1.0);
        if gap == 0.0 || w == 0.0 {
            return Ok(0.0);
        }
        let x = if s >= 0.0 { b - half * gap } else { a + half * gap };
        Ok(w * f(x, half * gap)?)
    };
    let mut sum = eval(0.0)?;
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t)? + eval(-t)?;
        k += 1;
    }
    let mut estimate = half * h * sum;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            sum += eval(t)? + eval(-t)?;
            k += 2;
        }
        let next = half * h * sum;
        let change = (next - estimate).abs();
        estimate = next;
        if change <= rel_tol * estimate.abs() {
            return Ok(estimate);
        }
    }
    Err(Error::Resource(format!(
        "tanh-sinh quadrature on [{a}, {b}] did not reach relative tolerance {rel_tol:e}"
    )))
}

/// One-period integral by tanh-sinh starting at `start`, for integrands
/// that are smooth except for a cusp at `start` (mod period).
pub fn integrate_period_cusp<F: FnMut(f64) -> Result<f64>>(mut f: F, omega: f64, start: f64, rel_tol: f64) -> Result<f64> {
    let period = 2.0 * PI / omega;
    tanh_sinh(|u, _| f(u), start, start + period, rel_tol)
}

/// A strictly increasing ray map.
pub trait RayMap {
    fn value(&self, u: f64) -> Result<f64>;
    fn deriv(&self, u: f64) -> Result<f64>;
    /// `V(u + eps) - V(u)`.
    fn increment(&self, u: f64, eps: f64) -> Result<f64> {
        Ok(self.value(u + eps)? - self.value(u)?)
    }
}

impl RayMap for HomographicMap {
    fn value(&self, u: f64) -> Result<f64> {
        Ok(self.apply(u))
    }
    fn deriv(&self, u: f64) -> Result<f64> {
        Ok(self.derivative(u))
    }
    fn increment(&self, u: f64, eps: f64) -> Result<f64> {
        Ok(HomographicMap::increment(self, u, eps))
    }
}

impl RayMap for MirrorTrajectory {
    fn value(&self, u: f64) -> Result<f64> {
        self.v_of_u(u)
    }
    fn deriv(&self, u: f64) -> Result<f64> {
        Ok(self.scatter_jet(u)?.deriv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSplit {
    /// `-(1/4π) lim_{ε→0} (V'(u₋)V'(u₊)/(V(u₊)-V(u₋))² - 1/ε²)`, `u± = u ± ε/2`,
    /// in units of `ħ` (R = 1).
    pub value: f64,
    pub error_estimate: f64,
    /// Separation (units of `1/Ω`) of the table entry that was selected.
    pub eps_used: f64,
}

/// Point-split estimate of `-(1/24π)SV(u)`, Richardson-extrapolated in `ε²`.
pub fn point_split_density<V: RayMap + ?Sized>(map: &V, u: f64, omega: f64, grid: &GridSpec) -> Result<PointSplit> {
    grid.validate()?;
    let eps: Vec<f64> = grid.eps_sequence.iter().map(|e| e / omega).collect();
    let mut raw = Vec::with_capacity(eps.len());
    for &e in &eps {
        // symmetric about u so the expansion is even in ε
        let lo = u - 0.5 * e;
        let dv = map.increment(lo, e)?;
        if !(dv > 0.0) {
            return Err(Error::Domain(format!("ray map is not increasing near u = {u}")));
        }
        let d0 = map.deriv(lo)?;
        let d1 = map.deriv(lo + e)?;
        let q = e * (d0 * d1).sqrt() / dv;
        raw.push((q - 1.0) * (q + 1.0) / (e * e));
    }
    let n = raw.len();
    // table[j][k]: j extrapolation steps ending at level k
    let mut table = vec![raw.clone()];
    for j in 1..n {
        let prev = &table[j - 1];
        let mut col = vec![f64::NAN; n];
        for k in j..n {
            let q = (eps[k - j] / eps[k]).powi(2);
            col[k] = prev[k] + (prev[k] - prev[k - 1]) / (q - 1.0);
        }
        table.push(col);
    }
    let unit = f64::EPSILON * 16.0;
    let mut best = PointSplit {
        value: raw[n - 1],
        error_estimate: f64::INFINITY,
        eps_used: grid.eps_sequence[n - 1],
    };
    for j in 0..n {
        for k in (j + 1)..n {
            let v = table[j][k];
            let truncation = (v - table[j][k - 1]).abs();
            let roundoff = unit / (eps[k] * eps[k]) * (1u64 << (2 * j)) as f64;
            let err = truncation + roundoff;
            if err < best.error_estimate {
                best = PointSplit {
                    value: v,
                    error_estimate: err,
                    eps_used: grid.eps_sequence[k],
                };
            }
        }
    }
    let scale = -1.0 / (4.0 * PI);
    Ok(PointSplit {
        value: scale * best.value,
        error_estimate: best.error_estimate / (4.0 * PI),
        eps_used: best.eps_used,
    })
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumIntegral {
    pub photon_number: f64,
    pub energy_moment: f64,
    /// Upper integration limit actually used.
    pub nu_max: f64,
    /// Estimated contribution of `ν > nu_max` to the energy moment.
    pub tail_estimate: f64,
    /// Set when the tail estimate exceeds the requested tolerance.
    pub truncated: bool,
}

/// Gauss nodes per arch for `integrate_spectrum`.
pub const NODES_PER_ARCH: usize = 40;
/// Arch contribution (relative) below which automatic integration stops.
pub const ARCH_TOL: f64 = 1e-8;
const MAX_ARCHES: usize = 400;

/// `(∫n dν, ∫ν n dν)` over `(0, nu_max)`, one Gauss–Legendre rule per arch
/// `[k, k+1]`. With `nu_max = None` arches are added until the last one
/// contributes less than `ARCH_TOL` of the running totals.
pub fn integrate_spectrum<F: FnMut(f64) -> Result<f64>>(mut n: F, nu_max: Option<f64>) -> Result<SpectrumIntegral> {
    let rule = gauss_legendre_unit(NODES_PER_ARCH);
    let mut arch = |lo: f64, hi: f64| -> Result<(f64, f64)> {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for &(x, w) in &rule {
            let nu = lo + (hi - lo) * x;
            let v = n(nu)?;
            s0 += w * v;
            s1 += w * nu * v;
        }
        Ok(((hi - lo) * s0, (hi - lo) * s1))
    };
    let (mut photons, mut energy) = (0.0, 0.0);
    let mut last = Vec::new();
    let limit = match nu_max {
        Some(v) if !(v > 0.0) => {
            return Err(Error::InvalidInput(format!("nu_max must be positive, got {v}")))
        }
        Some(v) => v,
        None => MAX_ARCHES as f64,
    };
    let mut k = 0usize;
    let mut reached = 0.0;
    while (k as f64) < limit {
        let hi = ((k + 1) as f64).min(limit);
        let (p, e) = arch(k as f64, hi)?;
        photons += p;
        energy += e;
        reached = hi;
        if hi == (k + 1) as f64 {
            last.push(e);
        }
        k += 1;
        if nu_max.is_none() && e.abs() <= ARCH_TOL * energy.abs() && p.abs() <= ARCH_TOL * photons.abs() {
            break;
        }
    }
    let tail = match last.len() {
        0 | 1 => last.last().copied().unwrap_or(0.0).abs(),
        l => {
            let q = (last[l - 1] / last[l - 2]).abs();
            if q < 1.0 {
                last[l - 1].abs() * q / (1.0 - q)
            } else {
                f64::INFINITY
            }
        }
    };
    Ok(SpectrumIntegral {
        photon_number: photons,
        energy_moment: energy,
        nu_max: reached,
        tail_estimate: tail,
        truncated: !(tail <= ARCH_TOL * energy.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::default().validate().is_ok());
        assert!(GridSpec::with_points(1000).validate().is_err());
        let g = GridSpec {
            eps_sequence: vec![1e-2, 1e-2],
            ..GridSpec::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn trapezoid_basics() {
        let g = GridSpec::default();
        let w = 1.7;
        assert!((integrate_period(|_| 3.0, w, &g) - 3.0 * 2.0 * PI / w).abs() < 1e-13);
        assert!(integrate_period(|u| (w * u).sin(), w, &g).abs() < 1e-14);
        let map = HomographicMap::from_rapidity(0.3 * 5.0, 0.2, 0.9, w).unwrap();
        let i = integrate_period(|u| map.derivative(u), w, &g);
        assert!((i / (2.0 * PI / w) - 1.0).abs() < 1e-12);
        let j = integrate_period(|u| map.derivative(u), w, &GridSpec::with_points(8192));
        assert!((i / j - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_cusps() {
        // ∫_0^1 x^{-1/2} = 2 and ∫_0^{2π} |sin(x/2)|^{0.2} dx
        let a = tanh_sinh(|_, d| Ok(if d > 0.0 { 1.0 } else { 0.0 }), 0.0, 1.0, 1e-13).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        let b = tanh_sinh(|x, _| Ok(x.powf(-0.5)), 0.0, 1.0, 1e-12).unwrap();
        assert!((b - 2.0).abs() < 1e-10);
        let c = integrate_period_cusp(|u| Ok((0.5 * u).sin().abs().powf(0.22)), 1.0, 0.0, 1e-12).unwrap();
        let fine = integrate_period(|u| (0.5 * (u + 1e-9)).sin().abs().powf(0.22), 1.0, &GridSpec::with_points(1 << 20));
        assert!((c / fine - 1.0).abs() < 1e-5);
    }

    #[test]
    fn point_split_trivial_maps() {
        let g = GridSpec::default();
        let id = HomographicMap::identity(1.0).unwrap();
        assert!(point_split_density(&id, 0.4, 1.0, &g).unwrap().value.abs() < 1e-9);
        let shift = HomographicMap::translation(0.8, 1.0).unwrap();
        assert!(point_split_density(&shift, 0.4, 1.0, &g).unwrap().value.abs() < 1e-9);
    }

    fn schwarzian_density(map: &HomographicMap, u: f64) -> f64 {
        -map.schwarzian(u) / (24.0 * PI)
    }

    #[test]
    fn point_split_matches_schwarzian() {
        let g = GridSpec::default();
        let w = 1.0;
        let map = HomographicMap::from_rapidity(0.4, 0.1, 1.2, w).unwrap();
        let scale = (0..256).map(|j| schwarzian_density(&map, 2.0 * PI * j as f64 / 256.0).abs()).fold(0.0, f64::max);
        for j in 0..50 {
            let u = 0.1257 * j as f64;
            let ps = point_split_density(&map, u, w, &g).unwrap();
            assert!((ps.value - schwarzian_density(&map, u)).abs() < 1e-5 * scale, "u={u}");
        }
    }

    #[test]
    fn point_split_error_estimate_is_honest() {
        let g = GridSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut bounded = 0;
        for _ in 0..200 {
            let alpha = rng.gen_range(0.01..1.0);
            let w = rng.gen_range(0.5..3.0);
            let map = HomographicMap::from_rapidity(alpha, rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), w).unwrap();
            let u = rng.gen_range(-10.0..10.0);
            let ps = point_split_density(&map, u, w, &g).unwrap();
            if (ps.value - schwarzian_density(&map, u)).abs() <= ps.error_estimate {
                bounded += 1;
            }
        }
        assert!(bounded >= 190, "{bounded}/200");
    }

    #[test]
    fn point_split_through_root_finding() {
        let g = GridSpec::default();
        let map = HomographicMap::from_rapidity(0.3, 0.0, 1.0, 1.0).unwrap();
        let traj = MirrorTrajectory::Homographic(map);
        for &u in &[0.0, 1.0, 2.5] {
            let ps = point_split_density(&traj, u, 1.0, &g).unwrap();
            assert!((ps.value - schwarzian_density(&map, u)).abs() < 1e-4);
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let rule = gauss_legendre_unit(NODES_PER_ARCH);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(2 * NODES_PER_ARCH as i32 - 1)).sum();
        assert!((s - 1.0 / (2.0 * NODES_PER_ARCH as f64)).abs() < 1e-14);
        let rule3 = gauss_legendre_unit(3);
        assert!((rule3[1].0 - 0.5).abs() < 1e-15);
        assert!((rule3[1].1 - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn spectrum_integrals() {
        let zero = integrate_spectrum(|_| Ok(0.0), Some(3.0)).unwrap();
        assert_eq!((zero.photon_number, zero.energy_moment), (0.0, 0.0));
        let para = integrate_spectrum(|nu| Ok(if nu < 1.0 { nu * (1.0 - nu) } else { 0.0 }), Some(1.0)).unwrap();
        assert!((para.photon_number - 1.0 / 6.0).abs() < 1e-15);
        assert!((para.energy_moment - 1.0 / 12.0).abs() < 1e-15);
        // geometric arches stop automatically
        let geo = integrate_spectrum(|nu| Ok(crate::specfun::sin_pi(nu).powi(2) * 0.1f64.powf(nu)), None).unwrap();
        assert!(!geo.truncated && geo.nu_max < 20.0);
        let cut = integrate_spectrum(|nu| Ok(crate::specfun::sin_pi(nu).powi(2) * 0.9f64.powf(nu)), Some(3.0)).unwrap();
        assert!(cut.truncated);
    }
}
