//! Closed forms for round spheres in any dimension `n ≥ 2`, used as ground
//! truth for the grid pipeline. Nothing here touches the grid modules.

use serde::Serialize;

use crate::error::{Error, Result};

fn omega(n: usize) -> f64 {
    // area of the unit n-sphere: ω_k = 2π ω_{k−2}/(k−1)
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mut k, mut a) = if n % 2 == 1 { (1, two_pi) } else { (2, 2.0 * two_pi) };
    while k < n {
        k += 2;
        a *= two_pi / (k - 1) as f64;
    }
    a
}

fn lapse_sq(m: f64, rho: f64, n: usize) -> f64 {
    1.0 - 2.0 * m * rho.powi(1 - n as i32)
}

/// `R₀ e^{t/n}`.
pub fn round_flow(r0: f64, n: usize, t: f64) -> f64 {
    r0 * (t / n as f64).exp()
}

/// `w = √((1 − 2mρ^{1−n}) / (1 − 2m̂ρ^{1−n}))`.
pub fn exact_w(rho: f64, m: f64, m_hat: f64, n: usize) -> Result<f64> {
    let a = lapse_sq(m, rho, n);
    let b = lapse_sq(m_hat, rho, n);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!(
            "ρ = {rho} not outside both horizons (m = {m}, m̂ = {m_hat})"
        )));
    }
    Ok((a / b).sqrt())
}

/// `dw/dt` of the closed form along `ρ = R₀ e^{t/n}`.
pub fn exact_w_rate(rho: f64, m: f64, m_hat: f64, n: usize) -> Result<f64> {
    let w = exact_w(rho, m, m_hat, n)?;
    let nf = n as f64;
    let x = rho.powi(1 - n as i32);
    let a = 1.0 - 2.0 * m * x;
    let b = 1.0 - 2.0 * m_hat * x;
    // d/dt of 2·c·x along the flow is −2c(n−1)x/n
    let da = 2.0 * m * (nf - 1.0) * x / nf;
    let db = 2.0 * m_hat * (nf - 1.0) * x / nf;
    let dw2 = (da * b - a * db) / (b * b);
    Ok(dw2 / (2.0 * w))
}

/// Right side of the round reduction of the `w` equation:
/// `−(n−1)/(2n N²) (w³ − w)`.
pub fn w_ode_rhs(rho: f64, m: f64, n: usize, w: f64) -> f64 {
    let nf = n as f64;
    -(nf - 1.0) / (2.0 * nf * lapse_sq(m, rho, n)) * (w * w * w - w)
}

/// Integrate the round `w` equation with RK4 from `w₀` at `R₀` to time `t`.
pub fn integrate_w_ode(r0: f64, m: f64, n: usize, w0: f64, t: f64, steps: usize) -> f64 {
    let dt = t / steps as f64;
    let mut w = w0;
    for i in 0..steps {
        let t0 = i as f64 * dt;
        let f = |s: f64, w: f64| w_ode_rhs(round_flow(r0, n, s), m, n, w);
        let k1 = f(t0, w);
        let k2 = f(t0 + 0.5 * dt, w + 0.5 * dt * k1);
        let k3 = f(t0 + 0.5 * dt, w + 0.5 * dt * k2);
        let k4 = f(t0 + dt, w + dt * k3);
        w += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    w
}

/// Extension mass `m̂` matched to constant boundary data `𝔥` on the round
/// sphere of area-radius `R`.
pub fn mhat_from_boundary(r: f64, m: f64, h_value: f64, n: usize) -> Result<f64> {
    let n2 = lapse_sq(m, r, n);
    if !(n2 > 0.0) {
        return Err(Error::Domain(format!("R = {r} inside the horizon")));
    }
    if !(h_value > 0.0) || !h_value.is_finite() {
        return Err(Error::NotExtendable(format!("𝔥 = {h_value} is not positive")));
    }
    let h_m = n as f64 * n2.sqrt() / r;
    let w0 = h_m / h_value;
    let rn = r.powi(n as i32 - 1);
    let m_hat = 0.5 * rn * (1.0 - n2 / (w0 * w0));
    if !(m_hat < 0.5 * rn) {
        return Err(Error::NotExtendable(format!("m̂ = {m_hat} reaches R")));
    }
    Ok(m_hat)
}

/// `(R^{n−1}/2)(N − N̂)²`.
pub fn annulus_margin(r: f64, m: f64, m_hat: f64, n: usize) -> Result<f64> {
    let a = lapse_sq(m, r, n);
    let b = lapse_sq(m_hat, r, n);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("R = {r} not outside both horizons")));
    }
    Ok(0.5 * r.powi(n as i32 - 1) * (a.sqrt() - b.sqrt()).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetricSample {
    pub t: f64,
    pub rho: f64,
    pub w: f64,
    pub q: f64,
    pub mass_aspect: f64,
}

/// `Q = n ω_n N² ρ^{n−1} (1 − 1/w)` on a round sphere.
pub fn round_q(rho: f64, m: f64, w: f64, n: usize) -> f64 {
    n as f64 * omega(n) * lapse_sq(m, rho, n) * rho.powi(n as i32 - 1) * (1.0 - 1.0 / w)
}

/// `½ ρ^{n−1} (1 − w⁻²)`.
pub fn round_mass_aspect(rho: f64, w: f64, n: usize) -> f64 {
    0.5 * rho.powi(n as i32 - 1) * (1.0 - 1.0 / (w * w))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetricRun {
    pub n: usize,
    pub m: f64,
    pub r0: f64,
    pub m_hat: f64,
    pub samples: Vec<SymmetricSample>,
}

impl SymmetricRun {
    pub fn at(&self, t: f64) -> Result<SymmetricSample> {
        sample(self.r0, self.m, self.m_hat, self.n, t)
    }
}

fn sample(r0: f64, m: f64, m_hat: f64, n: usize, t: f64) -> Result<SymmetricSample> {
    let rho = round_flow(r0, n, t);
    let w = exact_w(rho, m, m_hat, n)?;
    // w² − 1 = 2(m̂ − m)ρ^{1−n}/N̂², free of cancellation for large ρ
    let x = rho.powi(1 - n as i32);
    let a = lapse_sq(m, rho, n);
    let w2m1 = 2.0 * (m_hat - m) * x / lapse_sq(m_hat, rho, n);
    let one_minus_inv_w = w2m1 / ((w + 1.0) * w);
    let nf = n as f64;
    Ok(SymmetricSample {
        t,
        rho,
        w,
        q: nf * omega(n) * a * rho.powi(n as i32 - 1) * one_minus_inv_w,
        mass_aspect: (m_hat - m) / a,
    })
}

pub fn symmetric_trajectory(
    r0: f64,
    m: f64,
    h_value: f64,
    n: usize,
    t_final: f64,
    samples: usize,
) -> Result<SymmetricRun> {
    let m_hat = mhat_from_boundary(r0, m, h_value, n)?;
    if samples < 2 {
        return Err(Error::Domain("need at least 2 samples".into()));
    }
    let pts = (0..samples)
        .map(|i| sample(r0, m, m_hat, n, t_final * i as f64 / (samples - 1) as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetricRun {
        n,
        m,
        r0,
        m_hat,
        samples: pts,
    })
}
