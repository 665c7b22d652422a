//! Discrete calculus on the unit 2-sphere.
//!
//! Nodes are a Gauss–Legendre colatitude set crossed with equispaced
//! longitudes, so no node sits on a pole. Derivatives use five-point
//! finite-difference stencils: periodic in longitude, and in colatitude the
//! stencil continues across a pole through the identification
//! `(θ, φ) ~ (−θ, φ + π)`. Weights for the non-uniform colatitude spacing are
//! generated with Fornberg's recursion on the actual (mirrored) node
//! positions.
//!
//! Tensor outputs come in two flavours: coordinate components with respect to
//! `σ = dθ² + sin²θ dφ²`, and components in the orthonormal frame
//! `(∂_θ, ∂_φ / sin θ)` that the geometry modules work in.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const STENCIL: usize = 5;
const HALF: isize = 2;

/// Values at grid nodes, latitude-major (`index = i_theta * n_phi + j_phi`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(grid: &SphereGrid, value: f64) -> Self {
        Self(vec![value; grid.len()])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// First non-finite node, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Behaviour of a field under the pole identification. Scalars and the
/// `φ`-component of a covector are even; the `θ`-component of a covector
/// changes sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// First and second covariant derivatives of a scalar field, in the
/// orthonormal frame `(e_θ, e_φ) = (∂_θ, ∂_φ / sin θ)`.
#[derive(Debug, Clone)]
pub struct FrameDerivatives {
    pub grad: Vec<[f64; 2]>,
    pub hess: Vec<[[f64; 2]; 2]>,
}

#[derive(Debug, Clone, Copy)]
struct StencilPoint {
    ring: usize,
    flipped: bool,
}

#[derive(Clone)]
struct RingFilter {
    cutoff: usize,
}

/// Product grid on the unit 2-sphere. Immutable after construction.
#[derive(Clone)]
pub struct SphereGrid {
    n_theta: usize,
    n_phi: usize,
    theta: Vec<f64>,
    sin_theta: Vec<f64>,
    cos_theta: Vec<f64>,
    phi: Vec<f64>,
    weights: Vec<f64>,
    dphi: f64,
    phi_d1: [f64; STENCIL],
    phi_d2: [f64; STENCIL],
    theta_points: Vec<[StencilPoint; STENCIL]>,
    theta_d1: Vec<[f64; STENCIL]>,
    theta_d2: Vec<[f64; STENCIL]>,
    filters: Vec<RingFilter>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
    compensated: bool,
}

impl fmt::Debug for SphereGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereGrid")
            .field("n_theta", &self.n_theta)
            .field("n_phi", &self.n_phi)
            .field("compensated", &self.compensated)
            .finish()
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes in decreasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fornberg's finite-difference weights at `x0` for derivative orders
/// `0..=max_order` on the nodes `xs`.
pub fn fornberg_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        Self::with_options(n_theta, n_phi, false)
    }

    /// Build a grid; `compensated` switches [`SphereGrid::integrate`] to
    /// Kahan summation (same fixed order).
    pub fn with_options(n_theta: usize, n_phi: usize, compensated: bool) -> Result<Self> {
        if n_theta < 8 {
            return Err(Error::GridConfig(format!(
                "n_theta = {n_theta}, need at least 8"
            )));
        }
        if n_phi < 16 || n_phi % 2 != 0 {
            return Err(Error::GridConfig(format!(
                "n_phi = {n_phi}, need an even count of at least 16"
            )));
        }
        let (x, w_gl) = gauss_legendre(n_theta);
        let theta: Vec<f64> = x.iter().map(|xi| xi.acos()).collect();
        let sin_theta: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let cos_theta: Vec<f64> = x.clone();
        let dphi = 2.0 * PI / n_phi as f64;
        let phi: Vec<f64> = (0..n_phi).map(|j| j as f64 * dphi).collect();
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for wi in &w_gl {
            for _ in 0..n_phi {
                weights.push(wi * dphi);
            }
        }

        let nt = n_theta as isize;
        let mut theta_points = Vec::with_capacity(n_theta);
        let mut theta_d1 = Vec::with_capacity(n_theta);
        let mut theta_d2 = Vec::with_capacity(n_theta);
        for i in 0..nt {
            let mut pts = [StencilPoint {
                ring: 0,
                flipped: false,
            }; STENCIL];
            let mut xs = [0.0; STENCIL];
            for (s, o) in (-HALF..=HALF).enumerate() {
                let k = i + o;
                let (ring, flipped, t) = if k < 0 {
                    let r = (-k - 1) as usize;
                    (r, true, -theta[r])
                } else if k >= nt {
                    let r = (2 * nt - 1 - k) as usize;
                    (r, true, 2.0 * PI - theta[r])
                } else {
                    (k as usize, false, theta[k as usize])
                };
                pts[s] = StencilPoint { ring, flipped };
                xs[s] = t;
            }
            let c = fornberg_weights(theta[i as usize], &xs, 2);
            let mut d1 = [0.0; STENCIL];
            let mut d2 = [0.0; STENCIL];
            d1.copy_from_slice(&c[1]);
            d2.copy_from_slice(&c[2]);
            theta_points.push(pts);
            theta_d1.push(d1);
            theta_d2.push(d2);
        }


        let half = n_phi / 2;
        let filters = sin_theta
            .iter()
            .map(|s| RingFilter {
                cutoff: ((s * half as f64).floor() as usize).clamp(1, half),
            })
            .collect();

        let phi_d1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0].map(|c| c / dphi);
        let phi_d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0]
            .map(|c| c / (dphi * dphi));
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(n_phi);
        let fft_inverse = planner.plan_fft_inverse(n_phi);

        Ok(Self {
            n_theta,
            n_phi,
            theta,
            sin_theta,
            cos_theta,
            phi,
            weights,
            dphi,
            phi_d1,
            phi_d2,
            theta_points,
            theta_d1,
            theta_d2,
            filters,
            fft_forward,
            fft_inverse,
            compensated,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i_theta: usize, j_phi: usize) -> usize {
        i_theta * self.n_phi + j_phi
    }

    /// `(θ, φ)` of a node.
    pub fn node(&self, idx: usize) -> (f64, f64) {
        (self.theta[idx / self.n_phi], self.phi[idx % self.n_phi])
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn sin_theta_at(&self, idx: usize) -> f64 {
        self.sin_theta[idx / self.n_phi]
    }

    pub fn cos_theta_at(&self, idx: usize) -> f64 {
        self.cos_theta[idx / self.n_phi]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinate metric `σ_ij = diag(1, sin²θ)` at a node.
    pub fn metric(&self, idx: usize) -> [[f64; 2]; 2] {
        let s = self.sin_theta_at(idx);
        [[1.0, 0.0], [0.0, s * s]]
    }

    /// Non-zero Christoffel symbols of `σ` at a node:
    /// `(Γ^θ_φφ, Γ^φ_θφ) = (−sin θ cos θ, cot θ)`.
    pub fn christoffel(&self, idx: usize) -> (f64, f64) {
        let s = self.sin_theta_at(idx);
        let c = self.cos_theta_at(idx);
        (-s * c, c / s)
    }

    /// Smallest resolved node spacing on the unit sphere: the colatitude
    /// spacing, or the equatorial longitude spacing (pole rings are
    /// band-limited by [`SphereGrid::filter`]).
    pub fn min_spacing(&self) -> f64 {
        let dtheta = self
            .theta
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        dtheta.min(self.dphi)
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::FieldSize {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// Quadrature `Σ w_ij f_ij`, summed ring by ring in increasing `θ` and
    /// increasing `φ` within a ring.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check(f)?;
        if let Some(k) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        let mut total = 0.0;
        let mut carry = 0.0;
        for i in 0..self.n_theta {
            let row = i * self.n_phi;
            let mut ring = 0.0;
            for j in 0..self.n_phi {
                ring += f[row + j];
            }
            let term = ring * self.weights[row];
            if self.compensated {
                let y = term - carry;
                let t = total + y;
                carry = (t - total) - y;
                total = t;
            } else {
                total += term;
            }
        }
        Ok(total)
    }

    fn source(&self, p: StencilPoint, j: usize) -> usize {
        let jj = if p.flipped {
            (j + self.n_phi / 2) % self.n_phi
        } else {
            j
        };
        p.ring * self.n_phi + jj
    }

    fn theta_apply(&self, f: &[f64], parity: Parity, second: bool) -> Vec<f64> {
        let sign = parity.sign();
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n_theta {
            let pts = &self.theta_points[i];
            let c = if second {
                &self.theta_d2[i]
            } else {
                &self.theta_d1[i]
            };
            for j in 0..self.n_phi {
                let k = i * self.n_phi + j;
                let f0 = f[k];
                let mut acc = 0.0;
                for s in 0..STENCIL {
                    if s == HALF as usize {
                        continue;
                    }
                    let p = pts[s];
                    let val = f[self.source(p, j)];
                    let val = if p.flipped { sign * val } else { val };
                    acc += c[s] * (val - f0);
                }
                // Odd fields: the stencil weights no longer sum against f0.
                if parity == Parity::Odd {
                    let total: f64 = c.iter().sum();
                    acc += total * f0;
                }
                out[k] = acc;
            }
        }
        out
    }

    fn phi_apply(&self, f: &[f64], second: bool) -> Vec<f64> {
        let c = if second { &self.phi_d2 } else { &self.phi_d1 };
        let n = self.n_phi;
        let mut out = vec![0.0; self.len()];
        for i in 0..self.n_theta {
            let row = &f[i * n..(i + 1) * n];
            for j in 0..n {
                let f0 = row[j];
                let mut acc = 0.0;
                for (s, o) in (-HALF..=HALF).enumerate() {
                    if o == 0 {
                        continue;
                    }
                    let jj = (j as isize + o).rem_euclid(n as isize) as usize;
                    acc += c[s] * (row[jj] - f0);
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    /// `∂_θ f` for a field of the given parity.
    pub fn d_theta(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        self.theta_apply(f, parity, false)
    }

    /// `∂²_θ f` for a field of the given parity.
    pub fn d2_theta(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        self.theta_apply(f, parity, true)
    }

    pub fn d_phi(&self, f: &[f64]) -> Vec<f64> {
        self.phi_apply(f, false)
    }

    pub fn d2_phi(&self, f: &[f64]) -> Vec<f64> {
        self.phi_apply(f, true)
    }

    /// Covariant components `(f_θ, f_φ)`.
    pub fn gradient(&self, f: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check(f)?;
        let ft = self.d_theta(f, Parity::Even);
        let fp = self.d_phi(f);
        Ok(ft.into_iter().zip(fp).map(|(a, b)| [a, b]).collect())
    }

    /// Covariant Hessian `f_{;ij}` in coordinate components.
    pub fn hessian(&self, f: &[f64]) -> Result<Vec<[[f64; 2]; 2]>> {
        self.check(f)?;
        let ft = self.d_theta(f, Parity::Even);
        let fp = self.d_phi(f);
        let ftt = self.d2_theta(f, Parity::Even);
        let fpp = self.d2_phi(f);
        let ftp = self.d_theta(&fp, Parity::Even);
        Ok((0..self.len())
            .map(|k| {
                let (g_t_pp, g_p_tp) = self.christoffel(k);
                let tt = ftt[k];
                let tp = ftp[k] - g_p_tp * fp[k];
                let pp = fpp[k] - g_t_pp * ft[k];
                [[tt, tp], [tp, pp]]
            })
            .collect())
    }

    /// `Δ_σ f`.
    pub fn laplacian(&self, f: &[f64]) -> Result<ScalarField> {
        let d = self.frame_derivatives(f)?;
        Ok(ScalarField(
            d.hess.iter().map(|h| h[0][0] + h[1][1]).collect(),
        ))
    }

    /// Gradient and Hessian in the orthonormal frame `(∂_θ, ∂_φ/sin θ)`.
    pub fn frame_derivatives(&self, f: &[f64]) -> Result<FrameDerivatives> {
        self.check(f)?;
        let ft = self.d_theta(f, Parity::Even);
        let fp = self.d_phi(f);
        let ftt = self.d2_theta(f, Parity::Even);
        let fpp = self.d2_phi(f);
        let ftp = self.d_theta(&fp, Parity::Even);
        let mut grad = Vec::with_capacity(self.len());
        let mut hess = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let s = self.sin_theta_at(k);
            let c = self.cos_theta_at(k);
            let cot = c / s;
            grad.push([ft[k], fp[k] / s]);
            let tt = ftt[k];
            let tp = (ftp[k] - cot * fp[k]) / s;
            let pp = (fpp[k] + s * c * ft[k]) / (s * s);
            hess.push([[tt, tp], [tp, pp]]);
        }
        Ok(FrameDerivatives { grad, hess })
    }

    /// Longitude cutoff of ring `i`: Fourier modes `|k|` above it are removed
    /// by [`SphereGrid::filter`].
    pub fn filter_cutoff(&self, i_theta: usize) -> usize {
        self.filters[i_theta].cutoff
    }

    /// Polar filter: on each ring, drop longitude modes above
    /// `⌊sin θ · n_φ / 2⌋`. Applied to time tendencies so that the explicit
    /// step is limited by the equatorial spacing rather than the pole rings.
    /// Fields with only low longitude content near the poles pass unchanged.
    pub fn filter(&self, f: &mut [f64]) {
        let n = self.n_phi;
        let half = n / 2;
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for i in 0..self.n_theta {
            let cutoff = self.filters[i].cutoff;
            if cutoff >= half {
                continue;
            }
            let row = &mut f[i * n..(i + 1) * n];
            for (b, v) in buf.iter_mut().zip(row.iter()) {
                *b = Complex::new(*v, 0.0);
            }
            self.fft_forward.process(&mut buf);
            for (q, b) in buf.iter_mut().enumerate() {
                let k = if q <= half { q } else { n - q };
                if k > cutoff {
                    *b = Complex::new(0.0, 0.0);
                }
            }
            self.fft_inverse.process(&mut buf);
            let scale = 1.0 / n as f64;
            for (v, b) in row.iter_mut().zip(buf.iter()) {
                *v = b.re * scale;
            }
        }
    }

    /// Sample a function of `(θ, φ)` at the nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField(self.nodes().map(|(t, p)| f(t, p)).collect())
    }
}

/// Real spherical harmonic with orthonormal normalisation: `Re Y_ℓm` for
/// `m ≥ 0` and `Im Y_ℓ|m|` for `m < 0` (Condon–Shortley phase).
pub fn real_spherical_harmonic(l: usize, m: isize, theta: f64, phi: f64) -> f64 {
    let am = m.unsigned_abs();
    if am > l {
        return 0.0;
    }
    let x = theta.cos();
    let plm = associated_legendre(l, am, x);
    let mut ratio = 1.0;
    for k in (l - am + 1)..=(l + am) {
        ratio /= k as f64;
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    let angle = if m >= 0 {
        (am as f64 * phi).cos()
    } else {
        (am as f64 * phi).sin()
    };
    norm * plm * angle
}

fn associated_legendre(l: usize, m: usize, x: f64) -> f64 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= -fact * s;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    let mut pmm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmm1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = ((2 * ll - 1) as f64 * x * pmm1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmm1;
        pmm1 = pll;
    }
    pll
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_odd_grids() {
        assert!(matches!(SphereGrid::new(7, 32), Err(Error::GridConfig(_))));
        assert!(matches!(SphereGrid::new(16, 14), Err(Error::GridConfig(_))));
        assert!(matches!(SphereGrid::new(16, 33), Err(Error::GridConfig(_))));
    }

    #[test]
    fn gauss_legendre_weights_and_nodes() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // exact for x^30
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((q - 2.0 / 31.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn quadrature_examples() {
        let g = SphereGrid::new(16, 32).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!((g.integrate(&one).unwrap() - 4.0 * PI).abs() < 1e-13 * 4.0 * PI);
        let c = g.sample(|t, _| t.cos());
        assert!(g.integrate(&c).unwrap().abs() < 1e-12);
        let c2 = g.sample(|t, _| t.cos().powi(2));
        assert!((g.integrate(&c2).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
        let odd = g.sample(|t, p| t.sin() * p.cos());
        assert!(g.integrate(&odd).unwrap().abs() < 1e-12);
        let y20sq = g.sample(|t, _| ((3.0 * t.cos().powi(2) - 1.0) / 2.0).powi(2));
        assert!((g.integrate(&y20sq).unwrap() - 4.0 * PI / 5.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_exactness_band() {
        let g = SphereGrid::new(16, 32).unwrap();
        for l in 1..=14usize {
            for m in -(l as isize)..=(l as isize) {
                let f = g.sample(|t, p| real_spherical_harmonic(l, m, t, p));
                assert!(g.integrate(&f).unwrap().abs() < 1e-10, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn integrate_rejects_nan() {
        let g = SphereGrid::new(8, 16).unwrap();
        let mut f = ScalarField::constant(&g, 1.0);
        f[5] = f64::NAN;
        assert_eq!(g.integrate(&f), Err(Error::NonFinite(5)));
    }

    #[test]
    fn compensated_summation_agrees() {
        let g = SphereGrid::with_options(24, 48, true).unwrap();
        let f = g.sample(|t, p| 1.0 + t.cos() * p.sin());
        let plain = SphereGrid::new(24, 48).unwrap().integrate(&f).unwrap();
        assert!((g.integrate(&f).unwrap() - plain).abs() < 1e-13);
    }

    #[test]
    fn no_pole_nodes() {
        let g = SphereGrid::new(16, 32).unwrap();
        assert!(g.thetas().iter().all(|t| *t > 1e-3 && *t < PI - 1e-3));
    }

    #[test]
    fn constants_have_exactly_zero_derivatives() {
        let g = SphereGrid::new(16, 32).unwrap();
        let f = ScalarField::constant(&g, 3.7);
        assert!(g.gradient(&f).unwrap().iter().all(|d| d[0] == 0.0 && d[1] == 0.0));
        assert!(g
            .hessian(&f)
            .unwrap()
            .iter()
            .all(|h| h.iter().flatten().all(|v| *v == 0.0)));
    }

    #[test]
    fn laplacian_of_eigenfunctions() {
        let g = SphereGrid::new(32, 64).unwrap();
        let f = g.sample(|t, _| t.cos());
        let lap = g.laplacian(&f).unwrap();
        let err = lap.iter().zip(f.iter()).map(|(l, f)| (l + 2.0 * f).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
        let y22 = g.sample(|t, p| real_spherical_harmonic(2, 2, t, p));
        let lap = g.laplacian(&y22).unwrap();
        let err = lap.iter().zip(y22.iter()).map(|(l, f)| (l + 6.0 * f).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn hessian_trace_matches_laplacian() {
        let g = SphereGrid::new(16, 32).unwrap();
        let f = g.sample(|t, p| (t.cos() + t.sin() * p.cos()).exp());
        let hess = g.hessian(&f).unwrap();
        let lap = g.laplacian(&f).unwrap();
        for k in 0..g.len() {
            let s = g.sin_theta_at(k);
            let tr = hess[k][0][0] + hess[k][1][1] / (s * s);
            assert!((tr - lap[k]).abs() < 1e-10 * (1.0 + lap[k].abs()));
        }
    }

    #[test]
    fn odd_parity_derivative() {
        // f_θ of cos θ is −sin θ; the θ-derivative of that odd field is −cos θ.
        let g = SphereGrid::new(32, 64).unwrap();
        let ft = g.sample(|t, _| -t.sin());
        let ftt = g.d_theta(&ft, Parity::Odd);
        for (k, (t, _)) in g.nodes().enumerate() {
            assert!((ftt[k] + t.cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn filter_keeps_smooth_fields_and_kills_pole_noise() {
        let g = SphereGrid::new(32, 64).unwrap();
        let mut f = g.sample(|t, p| 1.0 + real_spherical_harmonic(2, 2, t, p) + t.cos());
        let before = f.clone();
        g.filter(&mut f);
        for (a, b) in f.iter().zip(before.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
        let mut noise = g.sample(|_, p| (30.0 * p).cos());
        g.filter(&mut noise);
        let ring0 = &noise[0..g.n_phi()];
        assert!(ring0.iter().all(|v| v.abs() < 1e-13));
        assert!(g.filter_cutoff(0) >= 2);
        assert!(g.filter_cutoff(g.n_theta() / 2) >= 31);
    }

    #[test]
    fn fornberg_reproduces_central_stencil() {
        let c = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in c[2].iter().zip(d2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn harmonics_are_orthonormal() {
        let g = SphereGrid::new(16, 32).unwrap();
        let y22 = g.sample(|t, p| real_spherical_harmonic(2, 2, t, p));
        let y21 = g.sample(|t, p| real_spherical_harmonic(2, 1, t, p));
        let sq: Vec<f64> = y22.iter().map(|v| v * v).collect();
        let cross: Vec<f64> = y22.iter().zip(y21.iter()).map(|(a, b)| a * b).collect();
        // Re Y_22 carries half the norm of the complex harmonic.
        assert!((g.integrate(&sq).unwrap() - 0.5).abs() < 1e-12);
        assert!(g.integrate(&cross).unwrap().abs() < 1e-12);
    }

    #[test]
    fn integration_is_deterministic() {
        let g = SphereGrid::new(24, 48).unwrap();
        let f = g.sample(|t, p| (t * 3.1).sin() * (p * 2.0).cos() + 0.3);
        let a = g.integrate(&f).unwrap();
        let b = g.integrate(&f).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
