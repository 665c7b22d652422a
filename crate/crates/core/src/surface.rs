//! Pointwise geometry of a star-shaped radial graph `ρ = ρ(ω)` in the
//! Schwarzschild background (n = 2).
//!
//! Everything is expressed in the `σ`-orthonormal frame `(e_θ, e_φ)` of the
//! unit sphere. With `A = 1/(ρN)` and `ψ` the graph function whose gradient
//! is `Aρ_a`, the induced metric is `g = ρ²(σ + dψ⊗dψ)` and the shape
//! operator is
//!
//! ```text
//! h^a_b = N/(ρv) δ^a_b − 1/(ρv) σ̃^{ac} ψ_{cb},   σ̃ = σ − ψψ/v²,   v² = 1 + |ψ|².
//! ```

use std::sync::Arc;

use crate::background::Background;
use crate::error::{Error, Result};
use crate::sphere_grid::{FrameDerivatives, ScalarField, SphereGrid};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

const DEFAULT_SMOOTHNESS: f64 = 0.25;

/// A star-shaped surface written as a graph over the unit sphere.
#[derive(Debug, Clone)]
pub struct RadialGraph {
    grid: Arc<SphereGrid>,
    bg: Background,
    rho: ScalarField,
}

impl RadialGraph {
    pub fn new(grid: Arc<SphereGrid>, bg: Background, rho: ScalarField) -> Result<Self> {
        Self::with_smoothness(grid, bg, rho, DEFAULT_SMOOTHNESS)
    }

    /// `smoothness` bounds the relative jump of `ρ` between neighbouring
    /// nodes.
    pub fn with_smoothness(
        grid: Arc<SphereGrid>,
        bg: Background,
        rho: ScalarField,
        smoothness: f64,
    ) -> Result<Self> {
        if rho.len() != grid.len() {
            return Err(Error::FieldSize {
                expected: grid.len(),
                got: rho.len(),
            });
        }
        if let Some(k) = rho.first_non_finite() {
            return Err(Error::NonFinite(k));
        }
        let inner = bg.inner_radius();
        for (k, r) in rho.iter().enumerate() {
            if *r <= inner || *r <= 0.0 {
                return Err(Error::InsideHorizon {
                    rho: *r,
                    horizon: inner,
                });
            }
            let _ = k;
        }
        let nt = grid.n_theta();
        let np = grid.n_phi();
        for i in 0..nt {
            for j in 0..np {
                let k = grid.index(i, j);
                let right = grid.index(i, (j + 1) % np);
                let mut jump = (rho[k] - rho[right]).abs() / rho[k];
                if i + 1 < nt {
                    let down = grid.index(i + 1, j);
                    jump = jump.max((rho[k] - rho[down]).abs() / rho[k]);
                }
                if jump > smoothness {
                    return Err(Error::DegenerateGraph {
                        node: k,
                        reason: format!("relative jump {jump:.3} exceeds {smoothness}"),
                    });
                }
            }
        }
        Ok(Self { grid, bg, rho })
    }

    /// Round sphere `ρ ≡ r`.
    pub fn round(grid: Arc<SphereGrid>, bg: Background, r: f64) -> Result<Self> {
        let rho = ScalarField::constant(&grid, r);
        Self::new(grid, bg, rho)
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn background(&self) -> &Background {
        &self.bg
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn into_rho(self) -> ScalarField {
        self.rho
    }

    /// Same grid and background, new radius field.
    pub fn with_rho(&self, rho: ScalarField) -> Result<Self> {
        Self::new(self.grid.clone(), self.bg, rho)
    }
}

/// Order of the curvature quotient driving the flow.
pub fn speed(k: usize, sigma1: f64, sigma2: f64) -> f64 {
    match k {
        1 => sigma1,
        _ => 4.0 * sigma2 / sigma1,
    }
}

/// Largest partial derivative of the speed with respect to a principal
/// curvature.
fn speed_sensitivity(k: usize, sigma1: f64, sigma2: f64) -> f64 {
    match k {
        1 => 1.0,
        _ => {
            let disc = (0.25 * sigma1 * sigma1 - sigma2).max(0.0).sqrt();
            let l1 = 0.5 * sigma1 + disc;
            let l2 = 0.5 * sigma1 - disc;
            let s = sigma1 * sigma1;
            4.0 * l1.abs().max(l2.abs()).powi(2) / s
        }
    }
}

/// All pointwise geometry of a radial graph.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub k: usize,
    pub rho: Vec<f64>,
    pub grad_rho: Vec<Vec2>,
    /// Frame gradient of the graph function.
    pub psi: Vec<Vec2>,
    /// Frame Hessian of the graph function.
    pub psi_hess: Vec<Mat2>,
    pub v: Vec<f64>,
    pub g: Vec<Mat2>,
    pub g_inv: Vec<Mat2>,
    /// Shape operator, `h[a][b] = h^a_b`.
    pub h: Vec<Mat2>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub speed: Vec<f64>,
    pub u: Vec<f64>,
    pub lapse: Vec<f64>,
    pub dn_dnu: Vec<f64>,
    pub r_intrinsic: Vec<f64>,
    pub ric_nu: Vec<f64>,
    /// `dA / dσ = ρ² v`.
    pub area_element: Vec<f64>,
    /// Difference between the Levi-Civita connections of `g` and `σ`,
    /// `c[c][a][b] = C^c_{ab}`.
    pub connection: Vec<[Mat2; 2]>,
    pub area: f64,
    pub min_sigma1: f64,
    pub min_sigma2: f64,
    pub max_grad_varphi_sq: f64,
    /// Parabolic coefficient of the linearised flow, maximised over nodes.
    pub max_diffusion: f64,
}

pub fn assemble(graph: &RadialGraph, k: usize) -> Result<SurfaceGeometry> {
    if k == 0 || k > 2 {
        return Err(Error::FlowConfig(format!("k = {k} outside 1..=2")));
    }
    let grid = graph.grid();
    let bg = graph.background();
    let rho = graph.rho();
    let FrameDerivatives { grad, hess } = grid.frame_derivatives(rho)?;
    let n = grid.len();

    let mut geom = SurfaceGeometry {
        k,
        rho: rho.to_vec(),
        grad_rho: grad.clone(),
        psi: Vec::with_capacity(n),
        psi_hess: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        g_inv: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        sigma1: Vec::with_capacity(n),
        sigma2: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        lapse: Vec::with_capacity(n),
        dn_dnu: Vec::with_capacity(n),
        r_intrinsic: Vec::with_capacity(n),
        ric_nu: Vec::with_capacity(n),
        area_element: Vec::with_capacity(n),
        connection: Vec::with_capacity(n),
        area: 0.0,
        min_sigma1: f64::INFINITY,
        min_sigma2: f64::INFINITY,
        max_grad_varphi_sq: 0.0,
        max_diffusion: 0.0,
    };

    for idx in 0..n {
        let r = rho[idx];
        let big_n = bg.lapse(r)?;
        let (a, a_prime) = bg.varphi_weight(r)?;
        let dr = grad[idx];
        let hr = hess[idx];
        let psi = [a * dr[0], a * dr[1]];
        let mut psi_h = [[0.0; 2]; 2];
        for p in 0..2 {
            for q in 0..2 {
                psi_h[p][q] = a * hr[p][q] + a_prime * dr[p] * dr[q];
            }
        }
        let grad_sq = psi[0] * psi[0] + psi[1] * psi[1];
        let v2 = 1.0 + grad_sq;
        let v = v2.sqrt();
        let r2 = r * r;

        let mut g = [[0.0; 2]; 2];
        let mut sig_t = [[0.0; 2]; 2];
        for p in 0..2 {
            for q in 0..2 {
                let d = if p == q { 1.0 } else { 0.0 };
                g[p][q] = r2 * (d + psi[p] * psi[q]);
                sig_t[p][q] = d - psi[p] * psi[q] / v2;
            }
        }
        let det_g = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if !(det_g > 0.0) || !(g[0][0] > 0.0) {
            return Err(Error::DegenerateGraph {
                node: idx,
                reason: "induced metric not positive definite".into(),
            });
        }
        let g_inv = sig_t.map(|row| row.map(|x| x / r2));

        let mut h = [[0.0; 2]; 2];
        for p in 0..2 {
            for q in 0..2 {
                let mut acc = 0.0;
                for c in 0..2 {
                    acc += sig_t[p][c] * psi_h[c][q];
                }
                let d = if p == q { big_n } else { 0.0 };
                h[p][q] = (d - acc) / (r * v);
            }
        }
        let s1 = h[0][0] + h[1][1];
        let s2 = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let f_speed = speed(k, s1, s2);
        let ric = bg.ricci_normal(r, v)?;
        let ddn = bg.lapse_radial_derivative(r)?;

        // ∇_c g_ab in the σ-connection
        let mut dg = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    let d = if p == q { 1.0 } else { 0.0 };
                    dg[c][p][q] = 2.0 * r * dr[c] * (d + psi[p] * psi[q])
                        + r2 * (psi_h[p][c] * psi[q] + psi[p] * psi_h[q][c]);
                }
            }
        }
        let mut conn = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    let mut acc = 0.0;
                    for d in 0..2 {
                        acc += g_inv[c][d] * (dg[p][q][d] + dg[q][p][d] - dg[d][p][q]);
                    }
                    conn[c][p][q] = 0.5 * acc;
                }
            }
        }

        let diffusion = v2 * speed_sensitivity(k, s1, s2) / (f_speed * f_speed * r2);

        geom.psi.push(psi);
        geom.psi_hess.push(psi_h);
        geom.v.push(v);
        geom.g.push(g);
        geom.g_inv.push(g_inv);
        geom.h.push(h);
        geom.sigma1.push(s1);
        geom.sigma2.push(s2);
        geom.speed.push(f_speed);
        geom.u.push(r / v);
        geom.lapse.push(big_n);
        geom.dn_dnu.push(ddn / v);
        geom.r_intrinsic.push(2.0 * (s2 - ric));
        geom.ric_nu.push(ric);
        geom.area_element.push(r2 * v);
        geom.connection.push(conn);
        geom.min_sigma1 = geom.min_sigma1.min(s1);
        geom.min_sigma2 = geom.min_sigma2.min(s2);
        geom.max_grad_varphi_sq = geom.max_grad_varphi_sq.max(grad_sq);
        if diffusion.is_finite() {
            geom.max_diffusion = geom.max_diffusion.max(diffusion.abs());
        } else {
            geom.max_diffusion = f64::INFINITY;
        }
    }
    geom.area = grid.integrate(&geom.area_element)?;
    Ok(geom)
}

impl SurfaceGeometry {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// `∫_Σ f dA`.
    pub fn integrate(&self, grid: &SphereGrid, f: &[f64]) -> Result<f64> {
        let weighted: Vec<f64> = f
            .iter()
            .zip(&self.area_element)
            .map(|(a, b)| a * b)
            .collect();
        grid.integrate(&weighted)
    }

    /// `Δ_g f` from precomputed frame derivatives of `f`.
    pub fn laplacian_from(&self, d: &FrameDerivatives) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let gi = &self.g_inv[idx];
                let c = &self.connection[idx];
                let grad = d.grad[idx];
                let hess = d.hess[idx];
                let mut acc = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        let corr = c[0][p][q] * grad[0] + c[1][p][q] * grad[1];
                        acc += gi[p][q] * (hess[p][q] - corr);
                    }
                }
                acc
            })
            .collect()
    }

    /// `Δ_g f`.
    pub fn laplacian(&self, grid: &SphereGrid, f: &[f64]) -> Result<Vec<f64>> {
        let d = grid.frame_derivatives(f)?;
        Ok(self.laplacian_from(&d))
    }

    /// `g(∇a, ∇b)` from frame gradients.
    pub fn inner(&self, idx: usize, a: Vec2, b: Vec2) -> f64 {
        let gi = &self.g_inv[idx];
        let mut acc = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                acc += gi[p][q] * a[p] * b[q];
            }
        }
        acc
    }

    /// Largest `|ρ h^a_b − N δ^a_b|`; zero exactly for round spheres.
    pub fn roundness_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.len() {
            let r = self.rho[idx];
            let big_n = self.lapse[idx];
            for p in 0..2 {
                for q in 0..2 {
                    let d = if p == q { big_n } else { 0.0 };
                    worst = worst.max((r * self.h[idx][p][q] - d).abs());
                }
            }
        }
        worst
    }

    /// Largest component of `ρ⁻² g − σ`.
    pub fn gtilde_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for psi in &self.psi {
            for p in 0..2 {
                for q in 0..2 {
                    worst = worst.max((psi[p] * psi[q]).abs());
                }
            }
        }
        worst
    }

    /// Largest node-wise Gauss residual `|σ₂ − (R/2 + Ric(ν,ν))|`.
    pub fn gauss_residual(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.sigma2[i] - (0.5 * self.r_intrinsic[i] + self.ric_nu[i])).abs())
            .fold(0.0, f64::max)
    }
}

/// `∫ (2N − σ₁ u) dA`.
pub fn minkowski_residual(grid: &SphereGrid, geom: &SurfaceGeometry) -> Result<f64> {
    let f: Vec<f64> = (0..geom.len())
        .map(|i| 2.0 * geom.lapse[i] - geom.sigma1[i] * geom.u[i])
        .collect();
    geom.integrate(grid, &f)
}

/// `∫ [σ₂^{ij} Φ_{;ij} − Ric(ν, ∇Φ)] dA` with `Φ_{;ij} = N g_ij − u h_ij`.
/// The Ricci term is what integration by parts of the Newton tensor leaves
/// behind in a curved background.
pub fn second_minkowski_residual(
    grid: &SphereGrid,
    bg: &Background,
    geom: &SurfaceGeometry,
) -> Result<f64> {
    let mut f = Vec::with_capacity(geom.len());
    for i in 0..geom.len() {
        let r = geom.rho[i];
        let v = geom.v[i];
        let (lr, lt) = bg.ricci_eigenvalues(r)?;
        let ric_tangent = (lr - lt) * (r / v) * (1.0 - 1.0 / (v * v));
        let newton = geom.lapse[i] * geom.sigma1[i] - 2.0 * geom.sigma2[i] * geom.u[i];
        f.push(newton - ric_tangent);
    }
    geom.integrate(grid, &f)
}

/// Area-weighted RMS of `∇_a u − h^b_a ∇_b Φ`, with `∇u` by finite
/// differences of the tabulated support function and `∇Φ = ρ ∇ρ / N`.
pub fn support_function_residual(grid: &SphereGrid, geom: &SurfaceGeometry) -> Result<f64> {
    let du = grid.frame_derivatives(&geom.u)?.grad;
    let mut sq = Vec::with_capacity(geom.len());
    for i in 0..geom.len() {
        let phi_a = geom.grad_rho[i].map(|x| x * geom.rho[i] / geom.lapse[i]);
        let h = geom.h[i];
        let mut s = 0.0;
        for a in 0..2 {
            let rhs = h[0][a] * phi_a[0] + h[1][a] * phi_a[1];
            let e = du[i][a] - rhs;
            s += e * e;
        }
        sq.push(s);
    }
    Ok((geom.integrate(grid, &sq)? / geom.area).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub min_sigma1: f64,
    pub min_sigma2: f64,
    pub is_2_convex: bool,
    pub max_grad_varphi_sq: f64,
    pub ric_condition_ok: bool,
}

pub fn convexity_report(geom: &SurfaceGeometry) -> ConvexityReport {
    ConvexityReport {
        min_sigma1: geom.min_sigma1,
        min_sigma2: geom.min_sigma2,
        is_2_convex: geom.min_sigma1 > 0.0 && geom.min_sigma2 > 0.0,
        max_grad_varphi_sq: geom.max_grad_varphi_sq,
        ric_condition_ok: geom.max_grad_varphi_sq <= 2.0,
    }
}

/// `ρ = R (1 + Σ a Y_ℓm)` sampled on the grid.
pub fn harmonic_perturbation(grid: &SphereGrid, r: f64, modes: &[(usize, isize, f64)]) -> ScalarField {
    grid.sample(|t, p| {
        let pert: f64 = modes
            .iter()
            .map(|&(l, m, a)| a * crate::sphere_grid::real_spherical_harmonic(l, m, t, p))
            .sum();
        r * (1.0 + pert)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(nt: usize, np: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(nt, np).unwrap())
    }

    #[test]
    fn round_sphere_example() {
        let grid = setup(16, 32);
        let bg = Background::new(2, 1.0).unwrap();
        let graph = RadialGraph::round(grid.clone(), bg, 4.0).unwrap();
        let geom = assemble(&graph, 2).unwrap();
        let n = 0.5f64.sqrt();
        for i in 0..geom.len() {
            assert_eq!(geom.v[i], 1.0);
            assert!((geom.sigma1[i] - 2.0 * n / 4.0).abs() < 1e-15);
            assert!((geom.sigma2[i] - 0.03125).abs() < 1e-15);
            assert!((geom.r_intrinsic[i] - 0.125).abs() < 1e-15);
            assert!((geom.u[i] - 4.0).abs() < 1e-15);
            assert!((geom.speed[i] - 2.0 * n / 4.0).abs() < 1e-15);
        }
        assert!(geom.roundness_defect() < 1e-14);
        assert_eq!(geom.gtilde_defect(), 0.0);
        assert!((geom.area - 4.0 * std::f64::consts::PI * 16.0).abs() < 1e-11);
        assert!(minkowski_residual(&grid, &geom).unwrap().abs() < 1e-12);
        assert!(second_minkowski_residual(&grid, &bg, &geom).unwrap().abs() < 1e-12);
        assert!(support_function_residual(&grid, &geom).unwrap() < 1e-12);
    }

    #[test]
    fn round_sphere_near_horizon_is_convex() {
        let grid = setup(8, 16);
        let bg = Background::new(2, 1.0).unwrap();
        let geom = assemble(&RadialGraph::round(grid, bg, 2.01).unwrap(), 2).unwrap();
        let rep = convexity_report(&geom);
        assert!(rep.is_2_convex && rep.ric_condition_ok);
        assert_eq!(rep.max_grad_varphi_sq, 0.0);
    }

    #[test]
    fn rejects_surface_inside_horizon() {
        let grid = setup(8, 16);
        let bg = Background::new(2, 1.0).unwrap();
        assert!(matches!(
            RadialGraph::round(grid, bg, 1.5),
            Err(Error::InsideHorizon { .. })
        ));
    }

    #[test]
    fn perturbed_graph_is_finite_and_gauss_consistent() {
        let grid = setup(32, 64);
        let bg = Background::new(2, 1.0).unwrap();
        let rho = harmonic_perturbation(&grid, 4.0, &[(2, 2, 0.05)]);
        let geom = assemble(&RadialGraph::new(grid, bg, rho).unwrap(), 2).unwrap();
        assert!(geom.sigma1.iter().all(|x| x.is_finite()));
        assert!(geom.gauss_residual() < 1e-12);
        assert!(geom.v.iter().all(|v| *v >= 1.0));
        assert!(convexity_report(&geom).is_2_convex);
    }

    #[test]
    fn laplacian_of_round_sphere_scales() {
        let grid = setup(32, 64);
        let bg = Background::new(2, 1.0).unwrap();
        let geom = assemble(&RadialGraph::round(grid.clone(), bg, 3.0).unwrap(), 2).unwrap();
        let f = grid.sample(|t, _| t.cos());
        let lap = geom.laplacian(&grid, &f).unwrap();
        for i in 0..grid.len() {
            assert!((lap[i] + 2.0 * f[i] / 9.0).abs() < 1e-5);
        }
    }

    #[test]
    fn laplacian_is_invariant_under_parametrisation() {
        // A Euclidean sphere shifted off-centre is still round; its Laplacian
        // on the first-order eigenfunction restricted from R³ must be −2/r² x.
        let grid = setup(48, 96);
        let bg = Background::euclidean(2).unwrap();
        let c = 0.3;
        let r0 = 2.0;
        // |x| = ρ with x = c e_z + r0 n  ⇒ ρ(ω) solves ρ² − 2cρ cosθ + c² − r0² = 0
        let rho = grid.sample(|t, _| c * t.cos() + (r0 * r0 - c * c * t.sin().powi(2)).sqrt());
        let graph = RadialGraph::new(grid.clone(), bg, rho.clone()).unwrap();
        let geom = assemble(&graph, 2).unwrap();
        let xz: Vec<f64> = grid.nodes().zip(rho.iter()).map(|((t, _), r)| r * t.cos() - c).collect();
        let lap = geom.laplacian(&grid, &xz).unwrap();
        let err = (0..grid.len())
            .map(|i| (lap[i] + 2.0 * xz[i] / (r0 * r0)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
        for i in 0..grid.len() {
            assert!((geom.sigma1[i] - 2.0 / r0).abs() < 1e-6);
            assert!((geom.sigma2[i] - 1.0 / (r0 * r0)).abs() < 1e-6);
        }
    }
}
