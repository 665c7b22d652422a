//! Inverse curvature flow `∂X/∂t = ν/F` for radial graphs, stepped as the
//! scalar equation `∂ρ/∂t = N v / F` with classical RK4.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere_grid::{ScalarField, SphereGrid};
use crate::surface::{assemble, RadialGraph, SurfaceGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub k: usize,
    pub t_final: f64,
    pub dt_safety: f64,
    pub output_stride: usize,
    /// The run stops once `min σ_k` falls to this value.
    pub convexity_tolerance: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            k: 2,
            t_final: 3.0,
            dt_safety: 0.25,
            output_stride: 10,
            convexity_tolerance: 0.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.k) {
            return Err(Error::FlowConfig(format!("k = {} outside 1..=2", self.k)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::FlowConfig(format!(
                "t_final = {} must be positive",
                self.t_final
            )));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::FlowConfig(format!(
                "dt_safety = {} outside (0, 1]",
                self.dt_safety
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::FlowConfig("output_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scalar diagnostics of one flow state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowDiagnostics {
    pub roundness_defect: f64,
    pub gtilde_defect: f64,
    pub max_grad_varphi: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub area: f64,
    pub min_sigma1: f64,
    pub min_sigma2: f64,
}

impl FlowDiagnostics {
    pub fn of(geom: &SurfaceGeometry) -> Self {
        let (lo, hi) = geom
            .rho
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(*r), b.max(*r)));
        Self {
            roundness_defect: geom.roundness_defect(),
            gtilde_defect: geom.gtilde_defect(),
            max_grad_varphi: geom.max_grad_varphi_sq.sqrt(),
            rho_min: lo,
            rho_max: hi,
            area: geom.area,
            min_sigma1: geom.min_sigma1,
            min_sigma2: geom.min_sigma2,
        }
    }
}

/// A recorded state. Geometry is rebuilt on demand with
/// [`FlowSnapshot::geometry`] so long trajectories stay small.
#[derive(Debug, Clone)]
pub struct FlowSnapshot {
    pub t: f64,
    pub graph: RadialGraph,
    pub diag: FlowDiagnostics,
}

impl FlowSnapshot {
    pub fn geometry(&self, k: usize) -> Result<SurfaceGeometry> {
        assemble(&self.graph, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FlowStatus {
    Completed,
    ConvexityLost { t: f64 },
    BlowUp { t: f64 },
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub k: usize,
    pub snapshots: Vec<FlowSnapshot>,
    pub status: FlowStatus,
    pub steps: usize,
}

/// Largest stable step for a parabolic coefficient `diffusion` on `grid`.
pub fn stable_dt(grid: &SphereGrid, diffusion: f64, safety: f64) -> f64 {
    let h = grid.min_spacing();
    safety * h * h / (4.0 * diffusion)
}

/// `N v / F`, band-limited near the poles.
pub fn rho_tendency(grid: &SphereGrid, geom: &SurfaceGeometry) -> Vec<f64> {
    let mut out: Vec<f64> = (0..geom.len())
        .map(|i| geom.lapse[i] * geom.v[i] / geom.speed[i])
        .collect();
    grid.filter(&mut out);
    out
}

fn check_speed(geom: &SurfaceGeometry, t: f64, floor: f64) -> Result<()> {
    let min_sk = if geom.k == 1 {
        geom.min_sigma1
    } else {
        geom.min_sigma1.min(geom.min_sigma2)
    };
    if !(min_sk > floor) || geom.speed.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::ConvexityLost { k: geom.k, t });
    }
    Ok(())
}

pub(crate) fn axpy(base: &[f64], dt: f64, k: &[f64]) -> ScalarField {
    base.iter().zip(k).map(|(b, k)| b + dt * k).collect::<Vec<_>>().into()
}

pub(crate) fn rk4_combine(base: &[f64], dt: f64, k: [&[f64]; 4]) -> ScalarField {
    (0..base.len())
        .map(|i| base[i] + dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect::<Vec<_>>()
        .into()
}

/// One RK4 step from `graph`, whose geometry `geom` is already assembled.
pub fn step(graph: &RadialGraph, geom: &SurfaceGeometry, dt: f64, t: f64) -> Result<RadialGraph> {
    let grid = graph.grid().clone();
    let bound = stable_dt(&grid, geom.max_diffusion, 1.0);
    if dt > bound {
        return Err(Error::UnstableStep {
            dt,
            suggested: bound,
        });
    }
    check_speed(geom, t, 0.0)?;
    let k = geom.k;
    let rho0 = graph.rho();
    let k1 = rho_tendency(&grid, geom);
    let stage = |kk: &[f64], h: f64| -> Result<Vec<f64>> {
        let g = graph.with_rho(axpy(rho0, h, kk))?;
        let ge = assemble(&g, k)?;
        check_speed(&ge, t + h, 0.0)?;
        Ok(rho_tendency(&grid, &ge))
    };
    let k2 = stage(&k1, 0.5 * dt)?;
    let k3 = stage(&k2, 0.5 * dt)?;
    let k4 = stage(&k3, dt)?;
    let rho = rk4_combine(rho0, dt, [&k1, &k2, &k3, &k4]);
    if rho.first_non_finite().is_some() {
        return Err(Error::BlowUp(t + dt));
    }
    graph.with_rho(rho)
}

pub fn run(graph0: &RadialGraph, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let grid: Arc<SphereGrid> = graph0.grid().clone();
    let mut graph = graph0.clone();
    let mut geom = assemble(&graph, cfg.k)?;
    check_speed(&geom, 0.0, cfg.convexity_tolerance)?;
    let mut t = 0.0;
    let mut snapshots = vec![FlowSnapshot {
        t,
        graph: graph.clone(),
        diag: FlowDiagnostics::of(&geom),
    }];
    let mut steps = 0;
    let mut status = FlowStatus::Completed;
    while t < cfg.t_final {
        let mut dt = stable_dt(&grid, geom.max_diffusion, cfg.dt_safety);
        let last = t + dt >= cfg.t_final;
        if last {
            dt = cfg.t_final - t;
        }
        match step(&graph, &geom, dt, t) {
            Ok(g) => graph = g,
            Err(Error::ConvexityLost { t: tl, .. }) => {
                status = FlowStatus::ConvexityLost { t: tl };
                break;
            }
            Err(Error::BlowUp(_)) | Err(Error::NonFinite(_)) => {
                status = FlowStatus::BlowUp { t: t + dt };
                break;
            }
            Err(e) => return Err(e),
        }
        t = if last { cfg.t_final } else { t + dt };
        steps += 1;
        geom = match assemble(&graph, cfg.k) {
            Ok(g) => g,
            Err(Error::NonFinite(_)) => {
                status = FlowStatus::BlowUp { t };
                break;
            }
            Err(e) => return Err(e),
        };
        let floor_hit = check_speed(&geom, t, cfg.convexity_tolerance).is_err();
        if steps % cfg.output_stride == 0 || last || floor_hit {
            snapshots.push(FlowSnapshot {
                t,
                graph: graph.clone(),
                diag: FlowDiagnostics::of(&geom),
            });
        }
        if floor_hit {
            status = FlowStatus::ConvexityLost { t };
            break;
        }
    }
    Ok(FlowTrajectory {
        k: cfg.k,
        snapshots,
        status,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    RoundnessDefect,
    GtildeDefect,
    MaxGradVarphi,
}

impl Diagnostic {
    pub fn of(&self, d: &FlowDiagnostics) -> f64 {
        match self {
            Diagnostic::RoundnessDefect => d.roundness_defect,
            Diagnostic::GtildeDefect => d.gtilde_defect,
            Diagnostic::MaxGradVarphi => d.max_grad_varphi,
        }
    }
}

/// Exponential fit `diag ≈ C e^{−α t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub alpha: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    /// The diagnostic sat at the numerical floor; `α` is not meaningful.
    pub at_floor: bool,
    pub samples: usize,
}

const DECAY_FLOOR: f64 = 1e-12;

/// Least squares on `log(diag)` against `t` over the last three quarters of
/// the trajectory, dropping samples at or below the numerical floor.
pub fn fit_decay(series: &[(f64, f64)]) -> Result<DecayFit> {
    if series.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least 10",
            series.len()
        )));
    }
    let t0 = series[0].0;
    let t1 = series[series.len() - 1].0;
    if t1 - t0 < 1.0 {
        return Err(Error::InsufficientData(format!(
            "time span {} shorter than 1",
            t1 - t0
        )));
    }
    let start = t0 + 0.25 * (t1 - t0);
    let mut pts = Vec::new();
    for &(t, d) in series {
        if !(d > DECAY_FLOOR) {
            break;
        }
        if t >= start {
            pts.push((t, d.ln()));
        }
    }
    if pts.len() < 3 {
        return Ok(DecayFit {
            c: 0.0,
            alpha: f64::INFINITY,
            residual: 0.0,
            at_floor: true,
            samples: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mt;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - icpt - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        c: icpt.exp(),
        alpha: -slope,
        residual,
        at_floor: false,
        samples: pts.len(),
    })
}

impl FlowTrajectory {
    pub fn series(&self, which: Diagnostic) -> Vec<(f64, f64)> {
        self.snapshots
            .iter()
            .map(|s| (s.t, which.of(&s.diag)))
            .collect()
    }

    pub fn fit_decay(&self, which: Diagnostic) -> Result<DecayFit> {
        fit_decay(&self.series(which))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::Background;
    use crate::surface::harmonic_perturbation;

    fn grid(nt: usize, np: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(nt, np).unwrap())
    }

    #[test]
    fn round_flow_is_exponential() {
        let g = grid(16, 32);
        let bg = Background::new(2, 1.0).unwrap();
        let graph = RadialGraph::round(g, bg, 4.0).unwrap();
        let cfg = FlowConfig {
            t_final: 2.0,
            dt_safety: 0.5,
            ..Default::default()
        };
        let tr = run(&graph, &cfg).unwrap();
        assert_eq!(tr.status, FlowStatus::Completed);
        let last = tr.snapshots.last().unwrap();
        assert_eq!(last.t, 2.0);
        let exact = 4.0 * 1f64.exp();
        for r in last.graph.rho().iter() {
            assert!((r / exact - 1.0).abs() < 1e-6);
        }
        let fit = tr.fit_decay(Diagnostic::RoundnessDefect).unwrap();
        assert!(fit.at_floor);
    }

    #[test]
    fn euclidean_round_flow() {
        let g = grid(8, 16);
        let bg = Background::euclidean(2).unwrap();
        let graph = RadialGraph::round(g, bg, 1.0).unwrap();
        let cfg = FlowConfig {
            t_final: 1.0,
            k: 1,
            ..Default::default()
        };
        let tr = run(&graph, &cfg).unwrap();
        let r = tr.snapshots.last().unwrap().graph.rho()[0];
        assert!((r - 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn single_step_local_error() {
        let g = grid(8, 16);
        let bg = Background::new(2, 1.0).unwrap();
        let graph = RadialGraph::round(g, bg, 4.0).unwrap();
        let geom = assemble(&graph, 2).unwrap();
        let errs: Vec<f64> = [2e-3, 1e-3]
            .iter()
            .map(|&dt| (step(&graph, &geom, dt, 0.0).unwrap().rho()[0] - 4.0 * (dt / 2.0f64).exp()).abs())
            .collect();
        // O(dt⁵) local error: halving dt cuts it by ~32
        assert!(errs[0] < 1e-13);
        assert!(errs[1] <= errs[0]);
    }

    #[test]
    fn rejects_oversized_step() {
        let g = grid(8, 16);
        let bg = Background::new(2, 1.0).unwrap();
        let graph = RadialGraph::round(g, bg, 4.0).unwrap();
        let geom = assemble(&graph, 2).unwrap();
        assert!(matches!(
            step(&graph, &geom, 10.0, 0.0),
            Err(Error::UnstableStep { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = FlowConfig {
            dt_safety: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = FlowConfig {
            k: 3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn perturbed_flow_rounds_out() {
        let g = grid(16, 32);
        let bg = Background::new(2, 1.0).unwrap();
        let rho = harmonic_perturbation(&g, 4.0, &[(2, 2, 0.05)]);
        let graph = RadialGraph::new(g, bg, rho).unwrap();
        let cfg = FlowConfig {
            t_final: 2.0,
            output_stride: 20,
            ..Default::default()
        };
        let tr = run(&graph, &cfg).unwrap();
        assert_eq!(tr.status, FlowStatus::Completed);
        let d: Vec<f64> = tr.snapshots.iter().map(|s| s.diag.roundness_defect).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        let a: Vec<f64> = tr.snapshots.iter().map(|s| s.diag.area).collect();
        assert!(a.windows(2).all(|w| w[1] > w[0]));
        let rmax0 = tr.snapshots[0].diag.rho_max;
        let rmin0 = tr.snapshots[0].diag.rho_min;
        for s in &tr.snapshots {
            let e = (s.t / 2.0).exp();
            assert!(s.diag.rho_max <= e * rmax0 * (1.0 + 1e-6));
            assert!(s.diag.rho_min >= e * rmin0 * (1.0 - 1e-6));
            assert!(s.diag.max_grad_varphi.powi(2) <= 2.0);
        }
        let fit = tr.fit_decay(Diagnostic::RoundnessDefect).unwrap();
        assert!(!fit.at_floor && fit.alpha > 0.0);
    }

    #[test]
    fn fit_decay_recovers_rate() {
        let s: Vec<(f64, f64)> = (0..40).map(|i| {
            let t = i as f64 * 0.1;
            (t, 3.0 * (-0.7 * t).exp())
        }).collect();
        let f = fit_decay(&s).unwrap();
        assert!((f.alpha - 0.7).abs() < 1e-12 && (f.c - 3.0).abs() < 1e-10);
        assert!(fit_decay(&s[..5]).is_err());
    }
}
