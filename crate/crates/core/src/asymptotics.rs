//! Large-sphere limits for rotationally symmetric asymptotically flat
//! 3-metrics `(1 − 2μ(ρ)/ρ)⁻¹ dρ² + ρ² σ`.
//!
//! The coordinate sphere of area-radius `ρ` embeds isometrically into the
//! Schwarzschild slice of mass `m` as the round sphere of the same
//! area-radius, so the quasi-local energy reduces to
//! `E(ρ) = m + ρ N (N − √(1 − 2μ/ρ))` with `N = √(1 − 2m/ρ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere_grid::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MassProfile {
    /// `μ ≡ mass`.
    Constant { mass: f64 },
    /// `μ = mass + amplitude ρ^{−tau}`.
    PowerLaw { mass: f64, amplitude: f64, tau: f64 },
}

impl MassProfile {
    pub fn eval(&self, rho: f64) -> f64 {
        match *self {
            MassProfile::Constant { mass } => mass,
            MassProfile::PowerLaw { mass, amplitude, tau } => mass + amplitude * rho.powf(-tau),
        }
    }

    /// `μ(base + y) − μ(base)` without cancellation for small `y`.
    fn increment(&self, base: f64, y: f64) -> f64 {
        match *self {
            MassProfile::Constant { .. } => 0.0,
            MassProfile::PowerLaw { amplitude, tau, .. } => {
                amplitude * base.powf(-tau) * (-tau * (y / base).ln_1p()).exp_m1()
            }
        }
    }

    /// The limit of `μ`, i.e. the ADM mass.
    pub fn adm_mass(&self) -> f64 {
        match *self {
            MassProfile::Constant { mass } | MassProfile::PowerLaw { mass, .. } => mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialAFMetric {
    profile: MassProfile,
    rho_min: f64,
}

fn outer_root(profile: &MassProfile) -> Result<f64> {
    if let MassProfile::Constant { mass } = *profile {
        return Ok((2.0 * mass).max(0.0));
    }
    let g = |s: f64| 1.0 - 2.0 * profile.eval(s) / s;
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain("metric never becomes Riemannian".into()));
        }
    }
    // walk inward until the factor turns non-positive
    let mut lo = hi;
    loop {
        let next = lo * 0.5;
        if next < 1e-12 {
            return Ok(0.0);
        }
        if g(next) <= 0.0 || !g(next).is_finite() {
            lo = next;
            break;
        }
        lo = next;
        hi = next * 2.0;
        let _ = hi;
    }
    let mut a = lo;
    let mut b = lo * 2.0;
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if g(c) > 0.0 {
            b = c;
        } else {
            a = c;
        }
    }
    Ok(b)
}

impl RadialAFMetric {
    /// Inner boundary at the outermost zero of `1 − 2μ/ρ`.
    pub fn new(profile: MassProfile) -> Result<Self> {
        let rho_min = outer_root(&profile)?;
        Ok(Self { profile, rho_min })
    }

    /// Inner boundary placed explicitly; `1 − 2μ/ρ` must be positive beyond it.
    pub fn with_inner_radius(profile: MassProfile, rho_min: f64) -> Result<Self> {
        let root = outer_root(&profile)?;
        if rho_min < root {
            return Err(Error::Domain(format!(
                "inner radius {rho_min} lies below the metric's root {root}"
            )));
        }
        Ok(Self { profile, rho_min })
    }

    pub fn profile(&self) -> MassProfile {
        self.profile
    }

    pub fn inner_radius(&self) -> f64 {
        self.rho_min
    }

    fn radial_factor(&self, rho: f64) -> f64 {
        (1.0 - 2.0 * self.profile.eval(rho) / rho).sqrt()
    }

    /// `√(1 − 2μ(s)/s)` at `s = base + y`, accurate when `base` is a root.
    fn radial_factor_offset(&self, base: f64, y: f64) -> f64 {
        let s = base + y;
        let gap = (base - 2.0 * self.profile.eval(base)) + y - 2.0 * self.profile.increment(base, y);
        (gap / s).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereData {
    pub area: f64,
    pub mean_curvature: f64,
    pub lapse: f64,
    pub mean_curvature_model: f64,
}

pub fn sphere_data(metric: &RadialAFMetric, m: f64, rho: f64) -> Result<SphereData> {
    if !(rho > metric.rho_min) || !(rho > 2.0 * m) {
        return Err(Error::Domain(format!("ρ = {rho} outside the metric's domain")));
    }
    let lapse = (1.0 - 2.0 * m / rho).sqrt();
    Ok(SphereData {
        area: 4.0 * std::f64::consts::PI * rho * rho,
        mean_curvature: 2.0 / rho * metric.radial_factor(rho),
        lapse,
        mean_curvature_model: 2.0 / rho * lapse,
    })
}

/// `E(ρ) = m + ρ N (N − √(1 − 2μ/ρ))`.
pub fn quasilocal_energy(metric: &RadialAFMetric, m: f64, rho: f64) -> Result<f64> {
    let d = sphere_data(metric, m, rho)?;
    // N − √(1−2μ/ρ) = 2(μ − m)/(ρ (N + √(1−2μ/ρ)))
    let mu = metric.profile.eval(rho);
    let root = metric.radial_factor(rho);
    Ok(m + d.lapse * 2.0 * (mu - m) / (d.lapse + root))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCurve {
    pub points: Vec<(f64, f64)>,
    /// Polynomial extrapolation in `1/ρ` to `ρ = ∞`.
    pub limit: f64,
    /// Fitted `p` in `|value − limit| ≈ C ρ^{−p}`; `None` if the curve is
    /// already at the limit.
    pub exponent: Option<f64>,
}

/// Neville extrapolation of `(x_i, y_i)` to `x = 0`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i]);
        }
    }
    p[0]
}

const EXTRAPOLATION_POINTS: usize = 4;

fn limit_curve(points: Vec<(f64, f64)>) -> Result<LimitCurve> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least two radii".into()));
    }
    let tail = &points[points.len().saturating_sub(EXTRAPOLATION_POINTS)..];
    let xs: Vec<f64> = tail.iter().map(|p| 1.0 / p.0).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let limit = extrapolate_to_zero(&xs, &ys);
    let logs: Vec<(f64, f64)> = points
        .iter()
        .skip(points.len() / 2)
        .filter_map(|&(r, y)| {
            let d = (y - limit).abs();
            (d > 1e-13 * limit.abs().max(1.0)).then(|| (r.ln(), d.ln()))
        })
        .collect();
    let exponent = if logs.len() >= 2 {
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        Some(-sxy / sxx)
    } else {
        None
    };
    Ok(LimitCurve {
        points,
        limit,
        exponent,
    })
}

fn check_radii(rho_list: &[f64]) -> Result<()> {
    if rho_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("radii must be strictly increasing".into()));
    }
    Ok(())
}

pub fn quasilocal_limit_curve(metric: &RadialAFMetric, m: f64, rho_list: &[f64]) -> Result<LimitCurve> {
    check_radii(rho_list)?;
    let pts = rho_list
        .iter()
        .map(|&r| quasilocal_energy(metric, m, r).map(|e| (r, e)))
        .collect::<Result<Vec<_>>>()?;
    limit_curve(pts)
}

/// `∫_a^b g = ∫_0^{√(b−a)} g(a + x²) 2x dx`: removes the inverse square-root
/// behaviour of the volume integrand at a root of the radial factor. `g`
/// receives the offset `s − a`.
fn integrate_from_root(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let top = (b - a).sqrt();
    let h = |x: f64| {
        if x == 0.0 {
            0.0
        } else {
            g(x * x) * 2.0 * x
        }
    };
    let (nodes, weights) = gauss_legendre(20);
    let eval = |panels: usize| -> (f64, f64) {
        // quadratic grading toward x = 0
        let mut total = 0.0;
        let mut total_abs = 0.0;
        let mut edges = Vec::with_capacity(panels + 1);
        for i in 0..=panels {
            edges.push(top * (i as f64 / panels as f64).powi(2));
        }
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut s = 0.0;
            let mut sa = 0.0;
            for (x, wt) in nodes.iter().zip(&weights) {
                let v = h(mid + half * x);
                s += wt * v;
                sa += wt * v.abs();
            }
            total += half * s;
            total_abs += half * sa;
        }
        (total, total_abs)
    };
    let mut panels = 16;
    let (mut prev, _) = eval(panels);
    for _ in 0..12 {
        panels *= 2;
        let (next, mag) = eval(panels);
        if (next - prev).abs() <= tol * mag || mag == 0.0 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "no convergence on [{a}, {b}] after {panels} panels"
    )))
}

const VOLUME_TOL: f64 = 1e-12;

/// `V(ρ) − V_m(ρ)`, with `V` measured from the metric's inner radius and
/// `V_m` from the Schwarzschild horizon `2m`.
pub fn volume_difference(metric: &RadialAFMetric, m: f64, rho: f64) -> Result<f64> {
    let pi4 = 4.0 * std::f64::consts::PI;
    let r0 = metric.rho_min;
    let rm = 2.0 * m;
    let c = r0.max(rm);
    if !(rho > c) {
        return Err(Error::Domain(format!("ρ = {rho} inside the inner boundary {c}")));
    }
    let a = |y: f64| {
        let s = r0 + y;
        pi4 * s * s / metric.radial_factor_offset(r0, y)
    };
    let b = |y: f64| {
        let s = rm + y;
        pi4 * s * s / (y / s).sqrt()
    };
    let mut total = 0.0;
    if r0 < c {
        total += integrate_from_root(&a, r0, c, VOLUME_TOL)?;
    }
    if rm < c {
        total -= integrate_from_root(&b, rm, c, VOLUME_TOL)?;
    }
    let diff = |y: f64| {
        let s = c + y;
        let mu = metric.profile.eval(s);
        if mu == m {
            return 0.0;
        }
        let p = metric.radial_factor_offset(c, y);
        let q = (((c - rm) + y) / s).sqrt();
        // 1/p − 1/q = (q² − p²)/(p q (p + q))
        pi4 * s * s * (2.0 * (mu - m) / s) / (p * q * (p + q))
    };
    total += integrate_from_root(&diff, c, rho, VOLUME_TOL)?;
    Ok(total)
}

/// Curve of `(V(ρ) − V_m(ρ)) / (2πρ²)`.
pub fn volume_deficit_curve(metric: &RadialAFMetric, m: f64, rho_list: &[f64]) -> Result<LimitCurve> {
    check_radii(rho_list)?;
    let pts = rho_list
        .iter()
        .map(|&r| {
            volume_difference(metric, m, r).map(|v| (r, v / (2.0 * std::f64::consts::PI * r * r)))
        })
        .collect::<Result<Vec<_>>>()?;
    limit_curve(pts)
}

/// Logarithmically spaced radii from `lo` to `hi`.
pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
