//! The lapse ratio `w = η/f` of the scalar-flat warped extension, evolved
//! together with the flow.
//!
//! With `f = 1/F` the flow speed, `H̄ = σ₁` and `R` the scalar curvature of
//! `g_t`,
//!
//! ```text
//! ∂w/∂t = (w²/H̄)(f Δw + 2⟨∇w, ∇f⟩) − (fR − 2Δf)(w³ − w)/(2H̄)
//! ```
//!
//! along normal trajectories. Grid points move radially instead, so the
//! tendency picks up the tangential drift `f ⟨ψ, ∇_σ w⟩/(vρ)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{axpy, rho_tendency, rk4_combine, stable_dt, FlowConfig, FlowDiagnostics};
use crate::mass::{q_rate_rhs, weighted_brown_york};
use crate::sphere_grid::{ScalarField, SphereGrid};
use crate::surface::{assemble, RadialGraph, SurfaceGeometry};

/// `w₀ = σ₁/𝔥` from a boundary mean-curvature field.
pub fn initial_w(geom: &SurfaceGeometry, h_boundary: &[f64]) -> Result<ScalarField> {
    if h_boundary.len() != geom.len() {
        return Err(Error::FieldSize {
            expected: geom.len(),
            got: h_boundary.len(),
        });
    }
    h_boundary
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if !(*h > 0.0) || !h.is_finite() {
                Err(Error::NonPositiveBoundaryCurvature { node: i, value: *h })
            } else {
                Ok(geom.sigma1[i] / h)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(ScalarField::new)
}

/// `𝔪 = ½ ρ (1 − w⁻²)` at each node.
pub fn mass_aspect_field(geom: &SurfaceGeometry, w: &[f64]) -> Vec<f64> {
    geom.rho
        .iter()
        .zip(w)
        .map(|(r, w)| 0.5 * r * (1.0 - 1.0 / (w * w)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AspectStats {
    pub min: f64,
    pub max: f64,
    /// Area-weighted mean over the surface.
    pub mean: f64,
}

pub fn mass_aspect(grid: &SphereGrid, geom: &SurfaceGeometry, w: &[f64]) -> Result<(Vec<f64>, AspectStats)> {
    let m = mass_aspect_field(geom, w);
    let mean = geom.integrate(grid, &m)? / geom.area;
    let stats = AspectStats {
        min: m.iter().copied().fold(f64::INFINITY, f64::min),
        max: m.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
    };
    Ok((m, stats))
}

/// Parabolic coefficient of the `w` equation, maximised over nodes.
pub fn w_diffusion(geom: &SurfaceGeometry, w: &[f64]) -> f64 {
    (0..geom.len())
        .map(|i| w[i] * w[i] / (geom.speed[i] * geom.sigma1[i] * geom.rho[i] * geom.rho[i]))
        .fold(0.0, f64::max)
}

/// Time derivative of `w` at fixed grid point.
pub fn w_tendency(grid: &SphereGrid, geom: &SurfaceGeometry, w: &[f64]) -> Result<Vec<f64>> {
    let f: Vec<f64> = geom.speed.iter().map(|s| 1.0 / s).collect();
    let dw = grid.frame_derivatives(w)?;
    let df = grid.frame_derivatives(&f)?;
    let lap_w = geom.laplacian_from(&dw);
    let lap_f = geom.laplacian_from(&df);
    let mut out = Vec::with_capacity(geom.len());
    for i in 0..geom.len() {
        let wi = w[i];
        let s1 = geom.sigma1[i];
        let diffusion = wi * wi / s1 * (f[i] * lap_w[i] + 2.0 * geom.inner(i, dw.grad[i], df.grad[i]));
        let reaction = (f[i] * geom.r_intrinsic[i] - 2.0 * lap_f[i]) * (wi * wi * wi - wi) / (2.0 * s1);
        let psi = geom.psi[i];
        let drift = f[i] * (psi[0] * dw.grad[i][0] + psi[1] * dw.grad[i][1]) / (geom.v[i] * geom.rho[i]);
        out.push(diffusion - reaction + drift);
    }
    grid.filter(&mut out);
    Ok(out)
}

/// One coupled state of surface and lapse ratio.
#[derive(Debug, Clone)]
pub struct ExtensionState {
    pub t: f64,
    pub graph: RadialGraph,
    pub geom: SurfaceGeometry,
    pub w: ScalarField,
}

impl ExtensionState {
    pub fn new(graph: RadialGraph, w: ScalarField, k: usize, t: f64) -> Result<Self> {
        let geom = assemble(&graph, k)?;
        if w.len() != geom.len() {
            return Err(Error::FieldSize {
                expected: geom.len(),
                got: w.len(),
            });
        }
        Ok(Self { t, graph, geom, w })
    }

    /// Start from boundary data `𝔥`.
    pub fn from_boundary(graph: RadialGraph, h_boundary: &[f64], k: usize) -> Result<Self> {
        let geom = assemble(&graph, k)?;
        let w = initial_w(&geom, h_boundary)?;
        Ok(Self {
            t: 0.0,
            graph,
            geom,
            w,
        })
    }

    /// `H_η = σ₁ / w`.
    pub fn h_eta(&self) -> Vec<f64> {
        self.geom.sigma1.iter().zip(self.w.iter()).map(|(s, w)| s / w).collect()
    }

    pub fn mass_aspect(&self) -> Result<(Vec<f64>, AspectStats)> {
        mass_aspect(self.graph.grid(), &self.geom, &self.w)
    }

    pub fn stable_dt(&self, safety: f64) -> f64 {
        let d = self.geom.max_diffusion.max(w_diffusion(&self.geom, &self.w));
        stable_dt(self.graph.grid(), d, safety)
    }
}

fn check_stage(geom: &SurfaceGeometry, w: &[f64], t: f64) -> Result<()> {
    let min_sk = if geom.k == 1 {
        geom.min_sigma1
    } else {
        geom.min_sigma1.min(geom.min_sigma2)
    };
    if !(min_sk > 0.0) {
        return Err(Error::ConvexityLost { k: geom.k, t });
    }
    if w.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::LapsePositivityLost(t));
    }
    Ok(())
}

/// Advance `(ρ, w)` by one RK4 step; every stage uses its own geometry.
pub fn step(state: &ExtensionState, dt: f64) -> Result<ExtensionState> {
    let bound = state.stable_dt(1.0);
    if dt > bound {
        return Err(Error::UnstableStep {
            dt,
            suggested: bound,
        });
    }
    let grid = state.graph.grid().clone();
    let k = state.geom.k;
    let t = state.t;
    check_stage(&state.geom, &state.w, t)?;
    let rho0 = state.graph.rho();
    let w0: &[f64] = &state.w;
    let tend = |geom: &SurfaceGeometry, w: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((rho_tendency(&grid, geom), w_tendency(&grid, geom, w)?))
    };
    let stage = |kr: &[f64], kw: &[f64], h: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let graph = state.graph.with_rho(axpy(rho0, h, kr))?;
        let geom = assemble(&graph, k)?;
        let w = axpy(w0, h, kw);
        check_stage(&geom, &w, t + h)?;
        tend(&geom, &w)
    };
    let (r1, w1) = tend(&state.geom, w0)?;
    let (r2, w2) = stage(&r1, &w1, 0.5 * dt)?;
    let (r3, w3) = stage(&r2, &w2, 0.5 * dt)?;
    let (r4, w4) = stage(&r3, &w3, dt)?;
    let rho = rk4_combine(rho0, dt, [&r1, &r2, &r3, &r4]);
    let w = rk4_combine(w0, dt, [&w1, &w2, &w3, &w4]);
    if rho.first_non_finite().is_some() || w.first_non_finite().is_some() {
        return Err(Error::BlowUp(t + dt));
    }
    if w.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::LapsePositivityLost(t + dt));
    }
    let graph = state.graph.with_rho(rho)?;
    ExtensionState::new(graph, w, k, t + dt)
}

/// Advance only `w` on a frozen surface (diagnostic use).
pub fn step_w(state: &ExtensionState, dt: f64) -> Result<ScalarField> {
    let grid = state.graph.grid();
    let w0: &[f64] = &state.w;
    let k1 = w_tendency(grid, &state.geom, w0)?;
    let k2 = w_tendency(grid, &state.geom, &axpy(w0, 0.5 * dt, &k1))?;
    let k3 = w_tendency(grid, &state.geom, &axpy(w0, 0.5 * dt, &k2))?;
    let k4 = w_tendency(grid, &state.geom, &axpy(w0, dt, &k3))?;
    let w = rk4_combine(w0, dt, [&k1, &k2, &k3, &k4]);
    if w.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::LapsePositivityLost(state.t + dt));
    }
    Ok(w)
}

/// Everything recorded at an output stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionSample {
    pub t: f64,
    pub diag: FlowDiagnostics,
    pub q: f64,
    pub q_rhs: f64,
    pub aspect: AspectStats,
    pub max_abs_w_minus_1: f64,
    /// Area-weighted means of `w` and `1/ρ`, for the expansion fit.
    pub w_mean: f64,
    pub inv_rho_mean: f64,
    /// `max |w − 1| ρ`.
    pub w_envelope: f64,
}

impl ExtensionSample {
    pub fn of(state: &ExtensionState) -> Result<Self> {
        let grid = state.graph.grid();
        let geom = &state.geom;
        let w: &[f64] = &state.w;
        let q = weighted_brown_york(grid, geom, w)?;
        let q_rhs = q_rate_rhs(grid, geom, w)?;
        let (_, aspect) = state.mass_aspect()?;
        let w_mean = geom.integrate(grid, w)? / geom.area;
        let inv: Vec<f64> = geom.rho.iter().map(|r| 1.0 / r).collect();
        let inv_rho_mean = geom.integrate(grid, &inv)? / geom.area;
        let max_abs_w_minus_1 = w.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        let w_envelope = w
            .iter()
            .zip(&geom.rho)
            .map(|(x, r)| (x - 1.0).abs() * r)
            .fold(0.0, f64::max);
        Ok(Self {
            t: state.t,
            diag: FlowDiagnostics::of(geom),
            q,
            q_rhs,
            aspect,
            max_abs_w_minus_1,
            w_mean,
            inv_rho_mean,
            w_envelope,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RunStatus {
    Completed,
    ConvexityLost { t: f64 },
    LapsePositivityLost { t: f64 },
    BlowUp { t: f64 },
}

#[derive(Debug, Clone)]
pub struct ExtensionRun {
    pub samples: Vec<ExtensionSample>,
    /// Full `(ρ, w)` fields at each sample, when requested.
    pub states: Vec<(f64, ScalarField, ScalarField)>,
    pub status: RunStatus,
    pub steps: usize,
}

/// Run the coupled flow from `state0` to `cfg.t_final`.
pub fn run(state0: ExtensionState, cfg: &FlowConfig, keep_states: bool) -> Result<ExtensionRun> {
    cfg.validate()?;
    let mut state = state0;
    let mut samples = vec![ExtensionSample::of(&state)?];
    let mut states = Vec::new();
    if keep_states {
        states.push((state.t, state.graph.rho().clone(), state.w.clone()));
    }
    let mut steps = 0;
    let mut status = RunStatus::Completed;
    while state.t < cfg.t_final {
        let mut dt = state.stable_dt(cfg.dt_safety);
        let last = state.t + dt >= cfg.t_final;
        if last {
            dt = cfg.t_final - state.t;
        }
        let t = state.t;
        state = match step(&state, dt) {
            Ok(mut s) => {
                if last {
                    s.t = cfg.t_final;
                }
                s
            }
            Err(Error::ConvexityLost { t, .. }) => {
                status = RunStatus::ConvexityLost { t };
                break;
            }
            Err(Error::LapsePositivityLost(t)) => {
                status = RunStatus::LapsePositivityLost { t };
                break;
            }
            Err(Error::BlowUp(_)) | Err(Error::NonFinite(_)) => {
                status = RunStatus::BlowUp { t: t + dt };
                break;
            }
            Err(e) => return Err(e),
        };
        steps += 1;
        let min_sk = state.geom.min_sigma1.min(if state.geom.k == 1 {
            f64::INFINITY
        } else {
            state.geom.min_sigma2
        });
        let floor_hit = !(min_sk > cfg.convexity_tolerance);
        if steps % cfg.output_stride == 0 || last || floor_hit {
            samples.push(ExtensionSample::of(&state)?);
            if keep_states {
                states.push((state.t, state.graph.rho().clone(), state.w.clone()));
            }
        }
        if floor_hit {
            status = RunStatus::ConvexityLost { t: state.t };
            break;
        }
    }
    Ok(ExtensionRun {
        samples,
        states,
        status,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::Background;
    use crate::surface::harmonic_perturbation;
    use std::sync::Arc;

    fn grid(nt: usize, np: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(nt, np).unwrap())
    }

    #[test]
    fn initial_w_examples() {
        let g = grid(8, 16);
        let bg = Background::new(2, 1.0).unwrap();
        let geom = assemble(&RadialGraph::round(g, bg, 4.0).unwrap(), 2).unwrap();
        let w = initial_w(&geom, &geom.sigma1).unwrap();
        assert!(w.iter().all(|x| *x == 1.0));
        let h: Vec<f64> = geom.sigma1.iter().map(|s| 0.9 * s).collect();
        let w = initial_w(&geom, &h).unwrap();
        assert!(w.iter().all(|x| (x - 1.0 / 0.9).abs() < 1e-15));
        let h: Vec<f64> = geom.sigma1.iter().map(|s| 1.2 * s).collect();
        assert!(initial_w(&geom, &h).unwrap().iter().all(|x| *x < 1.0));
        let mut h = geom.sigma1.clone();
        h[3] = 0.0;
        assert!(matches!(
            initial_w(&geom, &h),
            Err(Error::NonPositiveBoundaryCurvature { node: 3, .. })
        ));
    }

    #[test]
    fn unit_lapse_is_fixed_point() {
        let g = grid(16, 32);
        let bg = Background::new(2, 1.0).unwrap();
        let rho = harmonic_perturbation(&g, 4.0, &[(2, 2, 0.05)]);
        let graph = RadialGraph::new(g.clone(), bg, rho).unwrap();
        let geom = assemble(&graph, 2).unwrap();
        let w = ScalarField::constant(&g, 1.0);
        let tend = w_tendency(&g, &geom, &w).unwrap();
        assert!(tend.iter().all(|x| *x == 0.0));
        let (m, _) = mass_aspect(&g, &geom, &w).unwrap();
        assert!(m.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn aspect_example() {
        // exact w for m̂ = 1.5 at ρ = 8
        let g = grid(8, 16);
        let bg = Background::new(2, 1.0).unwrap();
        let geom = assemble(&RadialGraph::round(g.clone(), bg, 8.0).unwrap(), 2).unwrap();
        let w = ScalarField::constant(&g, (0.75f64 / (1.0 - 3.0 / 8.0)).sqrt());
        let (_, st) = mass_aspect(&g, &geom, &w).unwrap();
        assert!((st.mean - 2.0 / 3.0).abs() < 1e-13);
        assert!((st.max - st.min).abs() < 1e-14);
    }

    #[test]
    fn frozen_surface_w_step_keeps_round_data_uniform() {
        let g = grid(8, 16);
        let bg = Background::new(2, 1.0).unwrap();
        let graph = RadialGraph::round(g.clone(), bg, 4.0).unwrap();
        let state = ExtensionState::new(graph, ScalarField::constant(&g, 1.2), 2, 0.0).unwrap();
        let w = step_w(&state, 1e-3).unwrap();
        assert!(w.iter().all(|x| *x == w[0]));
        assert!(w[0] < 1.2);
    }
}
