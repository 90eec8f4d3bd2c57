//! Special functions for the spectra and the closed-form energies.
//!
//! The Fourier coefficients of the field dephasing `e^{2iν̄ΩQ(u)}` of a
//! homographic mirror are expressed through
//!
//! ```text
//! G_m(ν, β) = β^m Σ_{l≥0} Γ(ν+l)Γ(m-ν+l) / Γ(m+1+l) · β^{2l}/l!
//!           = β^m Γ(ν)Γ(m-ν)/Γ(m+1) · ₂F₁(ν, m-ν; m+1; β²)
//! ```
//!
//! The hypergeometric function has `c - a - b = 1`, so it stays finite at
//! `β² = 1` where `G_m = β^m/(ν(m-ν))`; near that point the direct series
//! converges only algebraically and the logarithmic connection formula
//! (DLMF 15.8.10) is used instead.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::iteration::CavityConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            rel_tol: 1e-12,
            max_terms: 1_000_000,
        }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "series tolerance must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.max_terms == 0 {
            return Err(Error::InvalidInput("max_terms must be positive".into()));
        }
        Ok(())
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma needs a finite x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// Digamma function `ψ = Γ'/Γ`.
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// `sin(πx)`, exactly zero at integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (0.5 * x).round();
    if r == 0.0 || r.abs() == 1.0 {
        return 0.0;
    }
    let s = r.signum();
    let a = r.abs();
    s * (PI * if a > 0.5 { 1.0 - a } else { a }).sin()
}

fn check_nu_m(m: u32, nu: f64) -> Result<()> {
    if !(nu > 0.0 && (m as f64) > nu) {
        return Err(Error::Domain(format!(
            "G_m(nu, beta) is evaluated analytically only for 0 < nu < m (m = {m}, nu = {nu})"
        )));
    }
    Ok(())
}

/// `G_m(ν, β)` for `0 < ν < m` and `|β| ≤ 1`.
pub fn hyper_g(m: u32, nu: f64, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    if beta == 0.0 && m >= 1 {
        return Ok(0.0);
    }
    check_nu_m(m, nu)?;
    if !(beta.abs() <= 1.0) {
        return Err(Error::Domain(format!("|beta| must not exceed 1, got {beta}")));
    }
    let sign = if beta < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
    let b = beta.abs();
    let z = b * b;
    let (na, nb) = (nu, m as f64 - nu);
    let eps = 1.0 - z;
    let value = if z <= 0.81 || na.max(nb) * eps > 2.0 {
        g_direct(m, na, nb, b, ctl)?
    } else {
        g_connection(m, na, nb, b, ctl)?
    };
    Ok(sign * value)
}

fn g_direct(m: u32, a: f64, b: f64, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    let z = beta * beta;
    let ln_t0 = m as f64 * beta.ln() + log_gamma(a)? + log_gamma(b)? - log_gamma(m as f64 + 1.0)?;
    let c = m as f64 + 1.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for l in 0..ctl.max_terms {
        let lf = l as f64;
        let ratio = (a + lf) * (b + lf) * z / ((c + lf) * (lf + 1.0));
        term *= ratio;
        sum += term;
        // ratios decrease towards z once l exceeds ab, so the tail is geometric
        if ratio <= z && term * z <= ctl.rel_tol * sum * (1.0 - z) {
            return Ok((ln_t0 + sum.ln()).exp());
        }
    }
    Err(Error::Resource(format!(
        "hypergeometric series for G_{m}(nu = {a}, beta = {beta}) did not converge within {} terms",
        ctl.max_terms
    )))
}

fn g_connection(m: u32, a: f64, b: f64, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    let eps = 1.0 - beta * beta;
    let lead = 1.0 / (a * b);
    let prefactor = (m as f64 * beta.ln()).exp();
    if eps == 0.0 {
        return Ok(prefactor * lead);
    }
    let ln_eps = eps.ln();
    // ψ(n+1) + ψ(n+2) and ψ(a+n+1) + ψ(b+n+1), advanced by ψ(x+1) = ψ(x) + 1/x
    let mut psi_n1 = digamma(1.0);
    let mut psi_n2 = digamma(2.0);
    let mut psi_a = digamma(a + 1.0);
    let mut psi_b = digamma(b + 1.0);
    let mut coef = 1.0;
    let mut sum = 0.0;
    let mut small = 0;
    for n in 0..ctl.max_terms {
        let nf = n as f64;
        if n > 0 {
            coef *= (a + nf) * (b + nf) * eps / (nf * (nf + 1.0));
            psi_n1 += 1.0 / nf;
            psi_n2 += 1.0 / (nf + 1.0);
            psi_a += 1.0 / (a + nf);
            psi_b += 1.0 / (b + nf);
        }
        let term = coef * (ln_eps - psi_n1 - psi_n2 + psi_a + psi_b);
        sum += term;
        let total = lead + eps * sum;
        if (eps * term).abs() <= ctl.rel_tol * total.abs() {
            small += 1;
            if small >= 3 {
                return Ok(prefactor * total);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Resource(format!(
        "connection series for G_{m}(nu = {a}, beta = {beta}) did not converge within {} terms",
        ctl.max_terms
    )))
}

/// Forward recurrence is used while the growth of the dominant solution
/// stays below this factor.
const MAX_FORWARD_AMPLIFICATION: f64 = 1e6;

/// `G_m(ν, β)` for `m = m_first, …, m_first + count - 1`, with `m_first > ν`.
///
/// Uses the three-term recurrence
/// `β(m-1-ν)G_{m-1} - ((1+β²)m - 2β²ν)G_m + β(m+1-ν)G_{m+1} = 0`,
/// forward from two direct values when `|β|` is close enough to 1 for the
/// dominant solution to stay harmless, backward from two direct values
/// otherwise. Entries below `~e^{-600}` are returned as zero.
pub fn hyper_g_sequence(nu: f64, beta: f64, m_first: u32, count: usize, ctl: &SeriesControl) -> Result<Vec<f64>> {
    let mut out = vec![0.0; count];
    if count == 0 || beta == 0.0 {
        return Ok(out);
    }
    check_nu_m(m_first, nu)?;
    let b = beta.abs();
    if b > 1.0 {
        return Err(Error::Domain(format!("|beta| must not exceed 1, got {beta}")));
    }
    let lb = b.ln();
    let n = if lb < 0.0 {
        count.min((600.0 / -lb) as usize + 2)
    } else {
        count
    };
    let m0 = m_first as f64;
    let z = b * b;
    if n <= 2 {
        for (j, g) in out.iter_mut().take(n).enumerate() {
            *g = hyper_g(m_first + j as u32, nu, b, ctl)?;
        }
    } else if -2.0 * (n - 1) as f64 * lb <= MAX_FORWARD_AMPLIFICATION.ln() {
        out[0] = hyper_g(m_first, nu, b, ctl)?;
        out[1] = hyper_g(m_first + 1, nu, b, ctl)?;
        for j in 1..n - 1 {
            let k = m0 + j as f64;
            out[j + 1] = (((1.0 + z) * k - 2.0 * z * nu) * out[j] - b * (k - 1.0 - nu) * out[j - 1]) / (b * (k + 1.0 - nu));
        }
    } else {
        let top = m_first + n as u32 - 1;
        out[n - 1] = hyper_g(top, nu, b, ctl)?;
        out[n - 2] = hyper_g(top - 1, nu, b, ctl)?;
        for j in (1..n - 1).rev() {
            let k = m0 + j as f64;
            out[j - 1] = (((1.0 + z) * k - 2.0 * z * nu) * out[j] - b * (k + 1.0 - nu) * out[j + 1]) / (b * (k - 1.0 - nu));
        }
    }
    if beta < 0.0 {
        for (j, g) in out.iter_mut().enumerate() {
            if (m_first as usize + j) % 2 == 1 {
                *g = -*g;
            }
        }
    }
    Ok(out)
}

/// `Σ_i w_i G_m(ν, β_i)` for `m = m_first, …, m_first + count - 1`, all `β_i`
/// of one sign.
///
/// Each lane is dropped once `|β_i|^{m-m_first}` falls below `cutoff`. The
/// lanes run the recurrence of `hyper_g_sequence` in lockstep, forward or
/// backward by the same amplification rule, so that the per-`m` coefficients
/// are shared and the inner loops are independent across lanes.
pub fn hyper_g_weighted_sums(
    nu: f64,
    m_first: u32,
    count: usize,
    lanes: &[(f64, Complex64)],
    cutoff: f64,
    ctl: &SeriesControl,
) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); count];
    if count == 0 {
        return Ok(out);
    }
    check_nu_m(m_first, nu)?;
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::InvalidInput(format!("cutoff must lie in (0, 1), got {cutoff}")));
    }
    let negative = lanes.iter().any(|l| l.0 < 0.0);
    if negative && lanes.iter().any(|l| l.0 > 0.0) {
        return Err(Error::InvalidInput("all lanes must share the sign of beta".into()));
    }
    let mut forward = Lanes::default();
    let mut backward = Lanes::default();
    for &(beta, w) in lanes {
        let b = beta.abs();
        if b == 0.0 {
            continue;
        }
        if b > 1.0 {
            return Err(Error::Domain(format!("|beta| must not exceed 1, got {beta}")));
        }
        let lb = b.ln();
        let n = if lb < 0.0 {
            count.min((cutoff.ln() / lb).ceil() as usize + 2)
        } else {
            count
        };
        if n > 2 && -2.0 * (n - 1) as f64 * lb > MAX_FORWARD_AMPLIFICATION.ln() {
            backward.push(b, nu, w, n);
        } else {
            forward.push(b, nu, w, n);
        }
    }
    let m0 = m_first as f64;
    let mut acc = vec![[0.0f64; 2]; count];

    forward.sort();
    for i in 0..forward.len() {
        let b = forward.beta[i];
        forward.g0[i] = hyper_g(m_first, nu, b, ctl)?;
        if forward.count[i] > 1 {
            forward.g1[i] = hyper_g(m_first + 1, nu, b, ctl)?;
        }
    }
    forward.deposit(&mut acc[0], 0..forward.len(), &forward.g0);
    forward.deposit(&mut acc[1.min(count - 1)], 0..forward.active(1), &forward.g1);
    for j in 1..count.saturating_sub(1) {
        // lanes still running compute G_{j+1} from G_j (g1) and G_{j-1} (g0)
        let active = forward.active(j + 1);
        if active == 0 {
            break;
        }
        let k = m0 + j as f64;
        let c_prev = k - 1.0 - nu;
        let inv = 1.0 / (k + 1.0 - nu);
        let l = &mut forward;
        for i in 0..active {
            let g = ((l.a[i] * k - l.c[i]) * l.g1[i] - c_prev * l.g0[i]) * inv;
            l.g0[i] = l.g1[i];
            l.g1[i] = g;
        }
        forward.deposit(&mut acc[j + 1], 0..active, &forward.g1);
    }

    backward.sort();
    for i in 0..backward.len() {
        let top = m_first + backward.count[i] as u32 - 1;
        backward.g1[i] = hyper_g(top, nu, backward.beta[i], ctl)?;
        backward.g0[i] = hyper_g(top - 1, nu, backward.beta[i], ctl)?;
    }
    // at step j, running lanes hold G_j in g0 and G_{j+1} in g1
    for j in (1..count.saturating_sub(1)).rev() {
        let active = backward.active(j + 1);
        if active == 0 {
            continue;
        }
        let fresh = backward.active(j + 2);
        backward.deposit(&mut acc[j + 1], fresh..active, &backward.g1);
        backward.deposit(&mut acc[j], fresh..active, &backward.g0);
        let k = m0 + j as f64;
        let c_next = k + 1.0 - nu;
        let inv = 1.0 / (k - 1.0 - nu);
        let l = &mut backward;
        for i in 0..active {
            let g = ((l.a[i] * k - l.c[i]) * l.g0[i] - c_next * l.g1[i]) * inv;
            l.g1[i] = l.g0[i];
            l.g0[i] = g;
        }
        backward.deposit(&mut acc[j - 1], 0..active, &backward.g0);
    }

    for (o, a) in out.iter_mut().zip(&acc) {
        *o = Complex64::new(a[0], a[1]);
    }
    if negative {
        for (j, o) in out.iter_mut().enumerate() {
            if (m_first as usize + j) % 2 == 1 {
                *o = -*o;
            }
        }
    }
    Ok(out)
}

/// Structure-of-arrays state for `hyper_g_weighted_sums`.
#[derive(Default)]
struct Lanes {
    beta: Vec<f64>,
    /// `(1 + β²)/β`
    a: Vec<f64>,
    /// `2βν`
    c: Vec<f64>,
    w_re: Vec<f64>,
    w_im: Vec<f64>,
    count: Vec<usize>,
    g0: Vec<f64>,
    g1: Vec<f64>,
}

impl Lanes {
    fn push(&mut self, b: f64, nu: f64, w: Complex64, n: usize) {
        self.beta.push(b);
        self.a.push((1.0 + b * b) / b);
        self.c.push(2.0 * b * nu);
        self.w_re.push(w.re);
        self.w_im.push(w.im);
        self.count.push(n);
        self.g0.push(0.0);
        self.g1.push(0.0);
    }

    fn len(&self) -> usize {
        self.beta.len()
    }

    /// Number of lanes with more than `j` entries; after `sort` they are a prefix.
    fn active(&self, j: usize) -> usize {
        self.count.partition_point(|&n| n > j)
    }

    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&x, &y| self.count[y].cmp(&self.count[x]));
        let perm = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        self.beta = perm(&self.beta);
        self.a = perm(&self.a);
        self.c = perm(&self.c);
        self.w_re = perm(&self.w_re);
        self.w_im = perm(&self.w_im);
        self.count = idx.iter().map(|&i| self.count[i]).collect();
    }

    fn deposit(&self, acc: &mut [f64; 2], range: std::ops::Range<usize>, g: &[f64]) {
        let (mut re, mut im) = ([0.0; 4], [0.0; 4]);
        for i in range {
            re[i % 4] += self.w_re[i] * g[i];
            im[i % 4] += self.w_im[i] * g[i];
        }
        acc[0] += (re[0] + re[1]) + (re[2] + re[3]);
        acc[1] += (im[0] + im[1]) + (im[2] + im[3]);
    }
}

/// `e^{2iν̄ΩQ}` at phase `θ = Ωu`, with `ΩQ = arctg(β cos θ / (1 + β sin θ))`.
pub fn dephasing(nubar: f64, beta: f64, theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::from_polar(1.0, 2.0 * nubar * (beta * c).atan2(1.0 + beta * s))
}

/// `γ_m[ν̄] = (1/2π)∫ e^{imθ} e^{2iν̄ΩQ(θ)} dθ` by the trapezoid rule with
/// doubling (the integrand is analytic for `|β| < 1`).
pub fn fourier_coeff_quadrature(m: i64, nubar: f64, beta: f64, ctl: &SeriesControl) -> Result<Complex64> {
    if !(beta.abs() < 1.0) {
        return Err(Error::Domain(format!("quadrature needs |beta| < 1, got {beta}")));
    }
    let eval = |n: usize, offset: bool| -> Complex64 {
        let h = 2.0 * PI / n as f64;
        let shift = if offset { 0.5 } else { 0.0 };
        (0..n)
            .map(|j| {
                let th = h * (j as f64 + shift);
                Complex64::from_polar(1.0, m as f64 * th) * dephasing(nubar, beta, th)
            })
            .sum::<Complex64>()
    };
    let mut n = 64usize.max((4 * m.unsigned_abs() as usize).next_power_of_two());
    let mut sum = eval(n, false);
    while n <= 1 << 22 {
        let refined = sum + eval(n, true);
        let prev = sum / n as f64;
        n *= 2;
        sum = refined;
        let cur = sum / n as f64;
        if (cur - prev).norm() <= ctl.rel_tol {
            return Ok(cur);
        }
    }
    Err(Error::Resource(format!(
        "Fourier quadrature for gamma_{m}[{nubar}] at beta = {beta} did not converge"
    )))
}

/// `γ_m[ν̄] = (-i)^{m+2} (ν̄/π) sin(πν̄) G_m(ν̄, β)`, with the quadrature
/// fallback for `m ≤ ν̄`.
pub fn gamma_coeff(m: i64, nubar: f64, beta: f64, ctl: &SeriesControl) -> Result<Complex64> {
    if !(beta.abs() < 1.0) {
        return Err(Error::Domain(format!("|beta| must be below 1, got {beta}")));
    }
    if !(nubar >= 0.0) {
        return Err(Error::Domain(format!("nubar must be >= 0, got {nubar}")));
    }
    if beta == 0.0 || nubar == 0.0 {
        return Ok(if m == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    }
    if (m as f64) > nubar {
        let s = sin_pi(nubar);
        if s == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let g = hyper_g(m as u32, nubar, beta, ctl)?;
        return Ok(crate::homography::i_pow(-(m + 2)) * (nubar / PI * s * g));
    }
    fourier_coeff_quadrature(m, nubar, beta, ctl)
}

/// `γ_{m,p}[ν̄] = e^{iKπν̄p} γ_m[ν̄]` evaluated at `β_p = (-1)^K th(pα)`.
pub fn gamma_coeff_p(m: i64, nubar: f64, p: i64, config: &CavityConfig, ctl: &SeriesControl) -> Result<Complex64> {
    if p < -1 {
        return Err(Error::InvalidInput(format!("ray order p must be >= -1, got {p}")));
    }
    let phase = Complex64::from_polar(1.0, PI * (config.k() as f64 * nubar * p as f64).rem_euclid(2.0));
    Ok(phase * gamma_coeff(m, nubar, config.beta_p(p), ctl)?)
}

/// `ζ_u(α) = ((1 - e^{-4ρ})e^{2α} + T₁(1 - e^{2α})) / (1 - e^{4(α-ρ)})`.
pub fn zeta_u(alpha: f64, config: &CavityConfig) -> Result<f64> {
    zeta_with(alpha, config.t1(), config.rho())
}

/// `ζ_v`: `ζ_u` with the mirrors interchanged.
pub fn zeta_v(alpha: f64, config: &CavityConfig) -> Result<f64> {
    zeta_with(alpha, config.t2(), config.rho())
}

fn zeta_with(alpha: f64, t: f64, rho: f64) -> Result<f64> {
    if alpha >= rho {
        return Err(Error::EnergyDivergence { alpha, rho });
    }
    let num = -(-4.0 * rho).exp_m1() * (2.0 * alpha).exp() - t * (2.0 * alpha).exp_m1();
    Ok(num / -(4.0 * (alpha - rho)).exp_m1())
}

/// `ξ(α) = Σ_{l≥1} e^{2l(α-ρ)} / (l² ch 2αl)`.
///
/// Terms are evaluated as `2e^{-2lρ}/(l²(1 + e^{-4αl}))`; summation stops
/// once the bound `2e^{-2(L+1)ρ}/((L+1)²(1-e^{-2ρ}))` on the rest falls
/// below `rel_tol` of the partial sum.
pub fn xi(alpha: f64, config: &CavityConfig, ctl: &SeriesControl) -> Result<f64> {
    let rho = config.rho();
    let decay = -(-2.0 * rho).exp_m1();
    let mut sum = 0.0;
    for l in 1..=ctl.max_terms {
        let lf = l as f64;
        sum += 2.0 * (-2.0 * lf * rho).exp() / (lf * lf * (1.0 + (-4.0 * alpha * lf).exp()));
        let next = lf + 1.0;
        let tail = 2.0 * (-2.0 * next * rho).exp() / (next * next * decay);
        if tail <= ctl.rel_tol * sum {
            return Ok(sum);
        }
    }
    Err(Error::Resource(format!(
        "xi(alpha) did not converge within {} terms (rho = {rho})",
        ctl.max_terms
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    const EULER: f64 = 0.577_215_664_901_532_9;

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    /// Stirling series after shifting the argument above 30.
    fn ln_gamma_oracle(x: f64) -> f64 {
        let mut shift = 0.0;
        let mut y = x;
        while y < 30.0 {
            shift += y.ln();
            y += 1.0;
        }
        let b = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0];
        let mut s = (y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln();
        for (k, bk) in b.iter().enumerate() {
            let n = 2.0 * (k as f64 + 1.0);
            s += bk / (n * (n - 1.0) * y.powf(n - 1.0));
        }
        s - shift
    }

    #[test]
    fn weighted_sums_match_sequences() {
        let lanes: Vec<(f64, Complex64)> = (1..400)
            .map(|p| ((p as f64 * 0.01).tanh(), Complex64::from_polar(0.99f64.powi(p), 0.7 * p as f64)))
            .collect();
        for &nu in &[0.3, 1.7, 2.999] {
            let m_first = nu as u32 + 1;
            let count = 300;
            let sums = hyper_g_weighted_sums(nu, m_first, count, &lanes, 1e-14, &ctl()).unwrap();
            let mut want = vec![Complex64::new(0.0, 0.0); count];
            let mut scale = 0.0;
            for &(b, w) in &lanes {
                let g = hyper_g_sequence(nu, b, m_first, count, &ctl()).unwrap();
                scale += w.norm() * g[0].abs();
                for (x, gm) in want.iter_mut().zip(&g) {
                    *x += w * gm;
                }
            }
            for j in 0..count {
                assert!((sums[j] - want[j]).norm() < 1e-13 * scale, "nu={nu} j={j} {} {}", sums[j], want[j]);
            }
        }
        let neg: Vec<(f64, Complex64)> = lanes.iter().map(|&(b, w)| (-b, w)).collect();
        let a = hyper_g_weighted_sums(0.4, 1, 50, &lanes, 1e-14, &ctl()).unwrap();
        let b = hyper_g_weighted_sums(0.4, 1, 50, &neg, 1e-14, &ctl()).unwrap();
        for j in 0..50 {
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            assert_eq!(b[j], a[j] * sign);
        }
    }

    #[test]
    fn log_gamma_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!((log_gamma(0.5).unwrap() - 0.5 * PI.ln()).abs() < 1e-14);
        assert!((log_gamma(0.5).unwrap() - 0.5723649429247001).abs() < 1e-13);
        for &x in &[7.3, 0.1, 1.7, 3.25, 12.9, 55.5, 300.2] {
            let want = ln_gamma_oracle(x);
            assert!((log_gamma(x).unwrap() - want).abs() <= 1e-13 * want.abs().max(1.0), "x = {x}");
        }
        assert!(matches!(log_gamma(0.0), Err(Error::Domain(_))));
        assert!(matches!(log_gamma(-2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn digamma_values() {
        assert!((digamma(1.0) + EULER).abs() < 1e-14);
        assert!((digamma(0.5) + EULER + 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!((digamma(7.0) - (digamma(1.0) + 1.0 + 0.5 + 1.0 / 3.0 + 0.25 + 0.2 + 1.0 / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn sin_pi_is_exact_at_integers() {
        for n in -5..=5 {
            assert_eq!(sin_pi(n as f64), 0.0);
        }
        assert!((sin_pi(0.5) - 1.0).abs() < 1e-16);
        assert!((sin_pi(2.25) - (PI * 0.25).sin()).abs() < 1e-16);
        assert!((sin_pi(-1.5) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn g_leading_order() {
        assert_eq!(hyper_g(3, 0.4, 0.0, &ctl()).unwrap(), 0.0);
        let beta = 1e-6;
        for &nu in &[0.2, 0.5, 0.9] {
            let g = hyper_g(1, nu, beta, &ctl()).unwrap();
            assert!((g / (beta * PI / sin_pi(nu)) - 1.0).abs() < 1e-10);
        }
        assert!(matches!(hyper_g(2, 2.5, 0.3, &ctl()), Err(Error::Domain(_))));
    }

    #[test]
    fn g_at_unit_beta() {
        for &(m, nu) in &[(1u32, 0.3), (3, 1.5), (40, 12.25)] {
            let g = hyper_g(m, nu, 1.0, &ctl()).unwrap();
            assert!((g * nu * (m as f64 - nu) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn g_methods_agree_where_both_converge() {
        for &(m, nu) in &[(1u32, 0.3), (2, 1.4), (5, 0.7), (9, 4.5)] {
            for &beta in &[0.91f64, 0.95, 0.97] {
                let a = g_direct(m, nu, m as f64 - nu, beta, &ctl()).unwrap();
                let b = g_connection(m, nu, m as f64 - nu, beta, &ctl()).unwrap();
                assert!((a / b - 1.0).abs() < 1e-11, "m={m} nu={nu} beta={beta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn g_symmetry_in_beta() {
        for m in 1..8u32 {
            for &beta in &[0.2, 0.7, 0.95] {
                let g = hyper_g(m, 0.45, beta, &ctl()).unwrap();
                let h = hyper_g(m, 0.45, -beta, &ctl()).unwrap();
                let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                assert!((h - s * g).abs() <= 1e-15 * g.abs());
            }
        }
    }

    #[test]
    fn g_sequence_matches_direct() {
        for &beta in &[0.05f64, 0.4, -0.8, 0.97, 0.999, 0.999_999, 1.0] {
            for &nu in &[0.35f64, 1.0, 2.6] {
                let m_first = nu.floor() as u32 + 1;
                let count = 60;
                let seq = hyper_g_sequence(nu, beta, m_first, count, &ctl()).unwrap();
                for (j, g) in seq.iter().enumerate() {
                    let direct = hyper_g(m_first + j as u32, nu, beta, &ctl()).unwrap();
                    let tol = 1e-9 * direct.abs() + 1e-250;
                    assert!((g - direct).abs() <= tol, "beta={beta} nu={nu} m={}: {g} vs {direct}", m_first + j as u32);
                }
            }
        }
    }

    fn fft_coefficients(nubar: f64, beta: f64, n: usize) -> Vec<Complex64> {
        // γ_m is the coefficient of e^{-imθ}: a forward DFT of samples divided by n
        // yields coefficients of e^{-ikθ} at bin k.
        let mut buf: Vec<Complex64> = (0..n).map(|j| dephasing(nubar, beta, 2.0 * PI * j as f64 / n as f64)).collect();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c / n as f64).collect()
    }

    #[test]
    fn gamma_matches_fft() {
        let n = 4096;
        let coeffs = fft_coefficients(1.4, 0.5, n);
        let g2 = gamma_coeff(2, 1.4, 0.5, &ctl()).unwrap();
        assert!((g2 - coeffs[2]).norm() < 1e-9);
        for &beta in &[0.1, 0.5, 0.9] {
            for &nubar in &[0.25, 0.5, 1.3, 2.0, 2.75, 3.9] {
                let c = fft_coefficients(nubar, beta, n);
                for m in 0..=12i64 {
                    let g = gamma_coeff(m, nubar, beta, &ctl()).unwrap();
                    assert!((g - c[m as usize]).norm() < 1e-9, "m={m} nubar={nubar} beta={beta}");
                }
                let neg = gamma_coeff(-3, nubar, beta, &ctl()).unwrap();
                assert!((neg - c[n - 3]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn gamma_trivial_cases() {
        let c = ctl();
        assert_eq!(gamma_coeff(0, 0.7, 0.0, &c).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(gamma_coeff(3, 0.7, 0.0, &c).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(gamma_coeff(4, 2.0, 0.6, &c).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn parseval() {
        for &nubar in &[0.3, 1.7] {
            for &beta in &[0.1f64, 0.6, 0.9] {
                let mut total = 0.0;
                let mut m = 0i64;
                loop {
                    let plus = gamma_coeff(m, nubar, beta, &ctl()).unwrap().norm_sqr();
                    let minus = if m > 0 { gamma_coeff(-m, nubar, beta, &ctl()).unwrap().norm_sqr() } else { 0.0 };
                    total += plus + minus;
                    m += 1;
                    if m > 20 && plus + minus < 1e-16 {
                        break;
                    }
                }
                assert!((1.0 - total).abs() < 1e-8, "nubar={nubar} beta={beta}: {total}");
            }
        }
    }

    #[test]
    fn gamma_p_phase() {
        let cfg = CavityConfig::symmetric(3, 1.0, 0.99, 0.002).unwrap();
        let c = ctl();
        assert_eq!(gamma_coeff_p(0, 0.5, 0, &cfg, &c).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(gamma_coeff_p(2, 0.5, 0, &cfg, &c).unwrap().norm(), 0.0);
        let with = gamma_coeff_p(2, 0.5, 3, &cfg, &c).unwrap();
        let without = gamma_coeff(2, 0.5, cfg.beta_p(3), &c).unwrap();
        assert!((with - Complex64::i() * without).norm() < 1e-15);
    }

    /// Li₂(x) = π²/6 - ln x ln(1-x) - Li₂(1-x), the last by its power series.
    fn dilog_near_one(x: f64) -> f64 {
        let y = 1.0 - x;
        let mut s = 0.0;
        let mut p = 1.0;
        for k in 1..200 {
            p *= y;
            s += p / (k * k) as f64;
        }
        PI * PI / 6.0 - x.ln() * y.ln() - s
    }

    #[test]
    fn zeta_and_xi() {
        let cfg = CavityConfig::new(3, 1.0, 0.99, 0.98, 0.0).unwrap();
        assert!((zeta_u(0.0, &cfg).unwrap() - 1.0).abs() < 1e-15);
        assert!((zeta_v(0.0, &cfg).unwrap() - 1.0).abs() < 1e-15);
        let rho = cfg.rho();
        assert!(matches!(zeta_u(rho, &cfg), Err(Error::EnergyDivergence { .. })));
        assert!(zeta_u(-rho, &cfg).is_ok());

        let sym = CavityConfig::symmetric(1, 1.0, (-0.01f64).exp(), 0.0).unwrap();
        assert!((sym.rho() - 0.005).abs() < 1e-15);
        let x0 = xi(0.0, &sym, &ctl()).unwrap();
        assert!((x0 / dilog_near_one((-0.01f64).exp()) - 1.0).abs() < 1e-11);
        // ch(2αl) in the denominator: ξ(α) against a literal partial sum
        let a = 0.002;
        let lit: f64 = (1..200_000).map(|l| {
            let l = l as f64;
            (2.0 * l * (a - 0.005)).exp() / (l * l * (2.0 * a * l).cosh())
        }).sum();
        assert!((xi(a, &sym, &ctl()).unwrap() / lit - 1.0).abs() < 1e-11);
    }
}
