//! Mass functionals of the extension and the main inequality.

use serde::Serialize;

use crate::background::{sphere_area, Background};
use crate::error::{Error, Result};
use crate::extension::ExtensionSample;
use crate::sphere_grid::SphereGrid;
use crate::surface::SurfaceGeometry;

/// `Q = ∫ N σ₁ (1 − 1/w) dA`.
pub fn weighted_brown_york(grid: &SphereGrid, geom: &SurfaceGeometry, w: &[f64]) -> Result<f64> {
    let f: Vec<f64> = (0..geom.len())
        .map(|i| geom.lapse[i] * geom.sigma1[i] * (1.0 - 1.0 / w[i]))
        .collect();
    geom.integrate(grid, &f)
}

/// Right side of the monotonicity formula,
/// `−∫ f (w−1)²/w (σ₁ ∂N/∂ν + N σ₂) dA` with `f = 1/F`.
pub fn q_rate_rhs(grid: &SphereGrid, geom: &SurfaceGeometry, w: &[f64]) -> Result<f64> {
    let f: Vec<f64> = (0..geom.len())
        .map(|i| {
            let d = w[i] - 1.0;
            -(d * d / w[i]) / geom.speed[i]
                * (geom.sigma1[i] * geom.dn_dnu[i] + geom.lapse[i] * geom.sigma2[i])
        })
        .collect();
    geom.integrate(grid, &f)
}

/// One row of the derivative audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditPoint {
    pub t: f64,
    pub dq_dt: f64,
    pub rhs: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub points: Vec<AuditPoint>,
    pub max_defect: f64,
    /// Largest `Q(t_{i+1}) − Q(t_i)`; negative when strictly decreasing.
    pub max_increase: f64,
    pub monotone_ok: bool,
    pub audit_ok: bool,
    /// Every sampled right side is `≤ 0`.
    pub rhs_sign_ok: bool,
}

/// Relative defects below this fraction of the largest `|rhs|` are measured
/// against that fraction instead, so vanishing right sides do not divide by
/// zero.
const AUDIT_FLOOR: f64 = 1e-9;

/// Compare the three-point derivative of `Q` at each interior sample with
/// the formula's right side. `series` holds `(t, Q, rhs)`.
pub fn monotonicity_audit(series: &[(f64, f64, f64)], eps_mono: f64, tol_audit: f64) -> Result<AuditReport> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least 3",
            series.len()
        )));
    }
    let scale = series.iter().map(|s| s.2.abs()).fold(0.0, f64::max);
    let floor = (AUDIT_FLOOR * scale).max(f64::MIN_POSITIVE);
    let mut points = Vec::with_capacity(series.len() - 2);
    for i in 1..series.len() - 1 {
        let (t0, q0, _) = series[i - 1];
        let (t1, q1, rhs) = series[i];
        let (t2, q2, _) = series[i + 1];
        let h1 = t1 - t0;
        let h2 = t2 - t1;
        if !(h1 > 0.0 && h2 > 0.0) {
            return Err(Error::InsufficientData(format!(
                "degenerate sample spacing at t = {t1}"
            )));
        }
        let dq = -h2 / (h1 * (h1 + h2)) * q0 + (h2 - h1) / (h1 * h2) * q1 + h1 / (h2 * (h1 + h2)) * q2;
        let defect = (dq - rhs).abs() / rhs.abs().max(floor);
        points.push(AuditPoint {
            t: t1,
            dq_dt: dq,
            rhs,
            defect,
        });
    }
    let max_defect = points.iter().map(|p| p.defect).fold(0.0, f64::max);
    let max_increase = series
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AuditReport {
        max_defect,
        max_increase,
        monotone_ok: max_increase <= eps_mono,
        audit_ok: max_defect <= tol_audit,
        rhs_sign_ok: series.iter().all(|s| s.2 <= 0.0),
        points,
    })
}

pub fn audit_samples(samples: &[ExtensionSample], eps_mono: f64, tol_audit: f64) -> Result<AuditReport> {
    let s: Vec<(f64, f64, f64)> = samples.iter().map(|s| (s.t, s.q, s.q_rhs)).collect();
    monotonicity_audit(&s, eps_mono, tol_audit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct M0Estimate {
    /// Tail average of the area-weighted mass aspect.
    pub m0: f64,
    /// Range of the mass aspect over nodes and times in the tail window.
    pub spread: f64,
    /// Leading coefficient of `w − 1 = a ρ⁻¹ + b ρ⁻²` fitted over the tail.
    pub m0_fit: f64,
    pub window_start: f64,
    pub window_samples: usize,
}

/// Extract `m₀` from the last `window_fraction` of the run's time span.
pub fn extract_m0(samples: &[ExtensionSample], window_fraction: f64) -> Result<M0Estimate> {
    let (first, last) = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InsufficientData("empty trajectory".into())),
    };
    let growth = last.diag.rho_min / first.diag.rho_min;
    if growth < std::f64::consts::E.powi(2) {
        return Err(Error::InsufficientData(format!(
            "minimum radius grew by {growth:.3}, need e²"
        )));
    }
    let start = last.t - window_fraction * (last.t - first.t);
    let tail: Vec<&ExtensionSample> = samples.iter().filter(|s| s.t >= start).collect();
    if tail.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} samples in the tail window",
            tail.len()
        )));
    }
    let m0 = tail.iter().map(|s| s.aspect.mean).sum::<f64>() / tail.len() as f64;
    let hi = tail.iter().map(|s| s.aspect.max).fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().map(|s| s.aspect.min).fold(f64::INFINITY, f64::min);

    // w − 1 = a x + b x², x = 1/ρ, over the second half of the run
    let half = first.t + 0.5 * (last.t - first.t);
    let (mut sxx, mut sx3, mut sx4, mut sxy, mut sx2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples.iter().filter(|s| s.t >= half) {
        let x = s.inv_rho_mean;
        let y = s.w_mean - 1.0;
        sxx += x * x;
        sx3 += x * x * x;
        sx4 += x * x * x * x;
        sxy += x * y;
        sx2y += x * x * y;
    }
    let det = sxx * sx4 - sx3 * sx3;
    let m0_fit = if det.abs() > 0.0 {
        (sxy * sx4 - sx2y * sx3) / det
    } else {
        f64::NAN
    };
    Ok(M0Estimate {
        m0,
        spread: hi - lo,
        m0_fit,
        window_start: start,
        window_samples: tail.len(),
    })
}

/// `m + (1/(n ω_n)) ∫ N (σ₁ − 𝔥) dA`.
pub fn quasilocal_energy(grid: &SphereGrid, bg: &Background, geom: &SurfaceGeometry, h: &[f64]) -> Result<f64> {
    if let Some((i, v)) = h.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveBoundaryCurvature { node: i, value: *v });
    }
    let n = bg.n();
    let f: Vec<f64> = (0..geom.len())
        .map(|i| geom.lapse[i] * (geom.sigma1[i] - h[i]))
        .collect();
    Ok(bg.mass() + geom.integrate(grid, &f)? / (n as f64 * sphere_area(n)))
}

/// The bound `m + (1/8π) ∫ N (H_m − H) dA` on the Bartnik mass.
pub fn bartnik_bound(grid: &SphereGrid, bg: &Background, geom: &SurfaceGeometry, h: &[f64]) -> Result<f64> {
    if bg.n() != 2 {
        return Err(Error::Domain(format!("bartnik bound needs n = 2, got {}", bg.n())));
    }
    quasilocal_energy(grid, bg, geom, h)
}

/// `½ (|Σ_h| / ω_n)^{(n−1)/n}`.
pub fn horizon_term(area: f64, n: usize) -> Result<f64> {
    if !(area >= 0.0) {
        return Err(Error::Domain(format!("horizon area {area} is negative")));
    }
    let nf = n as f64;
    Ok(0.5 * (area / sphere_area(n)).powf((nf - 1.0) / nf))
}

pub fn inequality_margin(
    grid: &SphereGrid,
    bg: &Background,
    geom: &SurfaceGeometry,
    h: &[f64],
    horizon_area: f64,
) -> Result<f64> {
    Ok(quasilocal_energy(grid, bg, geom, h)? - horizon_term(horizon_area, bg.n())?)
}

/// `Φ(m)` for a round sphere of area-radius `R` with constant boundary mean
/// curvature `h_mean` in the three-dimensional case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiCurve {
    pub r: f64,
    pub h_mean: f64,
    /// `h̄ = R h_mean / 2`.
    pub h_bar: f64,
    pub points: Vec<(f64, f64)>,
    pub m_star: f64,
    pub phi_min: f64,
    pub lapse_at_m_star: f64,
    pub m_star_closed_form: f64,
}

impl PhiCurve {
    pub fn identities_hold(&self, tol: f64) -> bool {
        (self.m_star - self.phi_min).abs() <= tol
            && (self.lapse_at_m_star - self.h_bar).abs() <= tol
            && (self.m_star - self.m_star_closed_form).abs() <= tol
    }
}

pub fn phi(r: f64, h_bar: f64, m: f64) -> f64 {
    r - m - r * h_bar * (1.0 - 2.0 * m / r).sqrt()
}

pub fn round_phi_curve(r: f64, h_mean: f64, samples: usize) -> Result<PhiCurve> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("R = {r} must be positive")));
    }
    let h_bar = r * h_mean / 2.0;
    if !(h_bar > 0.0 && h_bar < 1.0) {
        return Err(Error::Domain(format!(
            "h_mean·R = {} outside (0, 2)",
            h_mean * r
        )));
    }
    if samples < 2 {
        return Err(Error::Domain("need at least 2 curve samples".into()));
    }
    let hi = r / 2.0;
    let points = (0..samples)
        .map(|i| {
            let m = hi * (i as f64 + 0.5) / samples as f64;
            (m, phi(r, h_bar, m))
        })
        .collect();

    // golden section brackets, bisection on Φ′ finishes
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let f = |m: f64| phi(r, h_bar, m);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a < 1e-6 * hi {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let dphi = |m: f64| -1.0 + h_bar / (1.0 - 2.0 * m / r).sqrt();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if dphi(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let m_star = 0.5 * (a + b);
    Ok(PhiCurve {
        r,
        h_mean,
        h_bar,
        points,
        m_star,
        phi_min: f(m_star),
        lapse_at_m_star: (1.0 - 2.0 * m_star / r).sqrt(),
        m_star_closed_form: 0.5 * r * (1.0 - h_bar * h_bar),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassFlags {
    pub monotone_ok: bool,
    pub audit_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassReport {
    pub q_series: Vec<(f64, f64)>,
    pub q_derivative_audit: AuditReport,
    pub m0_estimate: Option<M0Estimate>,
    pub quasilocal_energy: f64,
    pub horizon_term: Option<f64>,
    pub inequality_margin: Option<f64>,
    /// `m + Q(t_final)/(n ω_n)`, bounded above by the quasi-local energy.
    pub chain_lower_bound: f64,
    pub flags: MassFlags,
}

#[allow(clippy::too_many_arguments)]
pub fn mass_report(
    bg: &Background,
    samples: &[ExtensionSample],
    quasilocal: f64,
    horizon_area: Option<f64>,
    eps_mono: f64,
    tol_audit: f64,
    m0_window: f64,
) -> Result<MassReport> {
    let audit = audit_samples(samples, eps_mono, tol_audit)?;
    let m0 = extract_m0(samples, m0_window).ok();
    let horizon = horizon_area.map(|a| horizon_term(a, bg.n())).transpose()?;
    let n = bg.n();
    let q_last = samples.last().map(|s| s.q).unwrap_or(0.0);
    Ok(MassReport {
        q_series: samples.iter().map(|s| (s.t, s.q)).collect(),
        flags: MassFlags {
            monotone_ok: audit.monotone_ok,
            audit_ok: audit.audit_ok,
        },
        q_derivative_audit: audit,
        m0_estimate: m0,
        quasilocal_energy: quasilocal,
        inequality_margin: horizon.map(|h| quasilocal - h),
        horizon_term: horizon,
        chain_lower_bound: bg.mass() + q_last / (n as f64 * sphere_area(n)),
    })
}
