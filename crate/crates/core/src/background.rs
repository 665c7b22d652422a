//! Closed-form geometry of the spatial Schwarzschild manifold in area-radius
//! coordinates `ρ`.
//!
//! The metric is `dr² + φ(r)² σ` with `φ' = √(1 − 2m φ^{1−n})`. Everything here
//! is written in terms of `ρ = φ`, the static potential is `N = φ'`, and the
//! geodesic radius `r` only ever enters through the chain rule `dρ = N dr`.

use crate::error::{Error, Result};

/// Ambient Schwarzschild slice of dimension `n + 1` and mass `m`.
///
/// `m = 0` is accepted as a Euclidean mode; operations that need a horizon
/// then return [`Error::NoHorizon`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background {
    n: usize,
    m: f64,
    rho_h: f64,
}

/// Sectional-curvature coefficients of the ambient metric at a given radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientCurvature {
    /// Coefficient of `σ_ik σ_jl − σ_il σ_jk` in `R̄(∂_i, ∂_j, ∂_k, ∂_l)`.
    pub tangential: f64,
    /// Coefficient of `σ_ij` in `R̄(∂_i, ∂_r, ∂_j, ∂_r)`.
    pub radial: f64,
}

impl Background {
    pub fn new(n: usize, m: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidBackground(format!(
                "dimension n = {n}, expected n >= 2"
            )));
        }
        if !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidBackground(format!(
                "mass m = {m}, expected a finite m >= 0"
            )));
        }
        let rho_h = if m > 0.0 {
            (2.0 * m).powf(1.0 / (n as f64 - 1.0))
        } else {
            0.0
        };
        Ok(Self { n, m, rho_h })
    }

    /// Euclidean background of dimension `n + 1`.
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(n, 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mass(&self) -> f64 {
        self.m
    }

    pub fn is_euclidean(&self) -> bool {
        self.m == 0.0
    }

    /// Horizon area-radius `(2m)^{1/(n−1)}`.
    pub fn horizon_radius(&self) -> Result<f64> {
        if self.m > 0.0 {
            Ok(self.rho_h)
        } else {
            Err(Error::NoHorizon(self.m))
        }
    }

    /// Lower bound of the admissible radii (0 in Euclidean mode).
    pub fn inner_radius(&self) -> f64 {
        self.rho_h
    }

    fn check(&self, rho: f64) -> Result<()> {
        if !(rho.is_finite() && rho > 0.0) || rho < self.rho_h {
            return Err(Error::InsideHorizon {
                rho,
                horizon: self.rho_h,
            });
        }
        Ok(())
    }

    /// `2m ρ^{1−n}`, the defect `1 − N²`.
    pub fn mass_term(&self, rho: f64) -> f64 {
        2.0 * self.m * rho.powi(1 - self.n as i32)
    }

    /// Static potential `N = √(1 − 2m ρ^{1−n})`; exactly zero on the horizon.
    pub fn lapse(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        if self.m > 0.0 && rho == self.rho_h {
            return Ok(0.0);
        }
        Ok((1.0 - self.mass_term(rho)).max(0.0).sqrt())
    }

    /// `φ'' = dN/dr = m(n−1)ρ^{−n}`.
    pub fn lapse_radial_derivative(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.m * (self.n as f64 - 1.0) * rho.powi(-(self.n as i32)))
    }

    pub fn ambient_curvature(&self, rho: f64) -> Result<AmbientCurvature> {
        self.check(rho)?;
        let n = self.n as i32;
        Ok(AmbientCurvature {
            tangential: 2.0 * self.m * rho.powi(3 - n),
            radial: -self.m * (n as f64 - 1.0) * rho.powi(1 - n),
        })
    }

    /// `Ric̄(ν, ν) = m(n−1)ρ^{−1−n} − m(n−1)(n+1)ρ^{−1−n} v^{−2}` for a radial
    /// graph with gradient factor `v`.
    pub fn ricci_normal(&self, rho: f64, v: f64) -> Result<f64> {
        self.check(rho)?;
        if !(v >= 1.0) {
            return Err(Error::InvalidGradientFactor(v));
        }
        let n = self.n as f64;
        let c = self.m * (n - 1.0) * rho.powi(-1 - self.n as i32);
        Ok(c - c * (n + 1.0) / (v * v))
    }

    /// Orthonormal-frame Ricci eigenvalues `(radial, tangential)`:
    /// `Ric̄(e_r, e_r) = −nφ''/φ`, `Ric̄(e, e) = ((n−1)(1−N²) − φφ'')/φ²`.
    pub fn ricci_eigenvalues(&self, rho: f64) -> Result<(f64, f64)> {
        let dd = self.lapse_radial_derivative(rho)?;
        let n = self.n as f64;
        let radial = -n * dd / rho;
        let tangential = ((n - 1.0) * self.mass_term(rho) - rho * dd) / (rho * rho);
        Ok((radial, tangential))
    }

    /// Chain-rule weight `A = 1/(ρN)` of `φ_var = ∫ dρ/(ρN)` and its
    /// derivative `A'(ρ)`.
    pub fn varphi_weight(&self, rho: f64) -> Result<(f64, f64)> {
        self.check(rho)?;
        let lapse = self.lapse(rho)?;
        if lapse <= 0.0 {
            return Err(Error::SingularWeight(rho));
        }
        let a = 1.0 / (rho * lapse);
        // dN/dρ = φ''/N
        let dlapse = self.m * (self.n as f64 - 1.0) * rho.powi(-(self.n as i32)) / lapse;
        let da = -a * (1.0 / rho + dlapse / lapse);
        Ok((a, da))
    }
}

/// Area of the unit `n`-sphere.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * sphere_area(n - 2),
    }
}
