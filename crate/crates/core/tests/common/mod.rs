#![allow(dead_code)]

use std::sync::Arc;

use qlmass::extension::{self, ExtensionRun, ExtensionState};
use qlmass::surface::harmonic_perturbation;
use qlmass::{Background, FlowConfig, Parity, RadialGraph, SphereGrid};

pub fn grid(nt: usize, np: usize) -> Arc<SphereGrid> {
    Arc::new(SphereGrid::new(nt, np).unwrap())
}

pub fn perturbed(grid: &Arc<SphereGrid>, bg: Background, amp: f64) -> RadialGraph {
    let rho = harmonic_perturbation(grid, 4.0, &[(2, 2, amp)]);
    RadialGraph::new(grid.clone(), bg, rho).unwrap()
}

/// Run the coupled flow with `𝔥 = factor · H_m`.
pub fn run_factor(graph: RadialGraph, factor: f64, cfg: &FlowConfig, keep: bool) -> ExtensionRun {
    let geom = qlmass::assemble(&graph, cfg.k).unwrap();
    let h: Vec<f64> = geom.sigma1.iter().map(|s| factor * s).collect();
    let state = ExtensionState::from_boundary(graph, &h, cfg.k).unwrap();
    extension::run(state, cfg, keep).unwrap()
}

/// Observed orders `log2(e_i / e_{i+1})` for a sequence of errors on grids
/// refined by two.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0].abs() / w[1].abs()).log2()).collect()
}

/// `∫ K dA` with `K` from the Brioschi formula applied to the coordinate
/// metric `E dθ² + 2F dθdφ + G dφ²` of the graph, built directly from `ρ`.
/// The explicit `sin θ` factors of `F = sin θ F̂` and `G = sin²θ Ĝ` are
/// differentiated by hand; `E`, `F̂`, `Ĝ` are smooth and even across the poles.
pub fn brioschi_total_curvature(grid: &SphereGrid, bg: &Background, rho: &[f64]) -> f64 {
    let rt = grid.d_theta(rho, Parity::Even);
    let rp = grid.d_phi(rho);
    let n = grid.len();
    let mut e = vec![0.0; n];
    let mut fh = vec![0.0; n];
    let mut gh = vec![0.0; n];
    for i in 0..n {
        let s = grid.sin_theta_at(i);
        let n2 = 1.0 - 2.0 * bg.mass() / rho[i];
        let rp_s = rp[i] / s;
        e[i] = rt[i] * rt[i] / n2 + rho[i] * rho[i];
        fh[i] = rt[i] * rp_s / n2;
        gh[i] = rp_s * rp_s / n2 + rho[i] * rho[i];
    }
    let e_u = grid.d_theta(&e, Parity::Even);
    let e_v = grid.d_phi(&e);
    let e_vv = grid.d2_phi(&e);
    let fh_u = grid.d_theta(&fh, Parity::Even);
    let fh_v = grid.d_phi(&fh);
    let fh_uv = grid.d_theta(&fh_v, Parity::Even);
    let gh_u = grid.d_theta(&gh, Parity::Even);
    let gh_v = grid.d_phi(&gh);
    let gh_uu = grid.d2_theta(&gh, Parity::Even);
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let mut integrand = vec![0.0; n];
    for i in 0..n {
        let s = grid.sin_theta_at(i);
        let c = grid.cos_theta_at(i);
        let f = s * fh[i];
        let f_u = c * fh[i] + s * fh_u[i];
        let f_v = s * fh_v[i];
        let f_uv = c * fh_v[i] + s * fh_uv[i];
        let g = s * s * gh[i];
        let g_u = 2.0 * s * c * gh[i] + s * s * gh_u[i];
        let g_v = s * s * gh_v[i];
        let g_uu = 2.0 * (c * c - s * s) * gh[i] + 4.0 * s * c * gh_u[i] + s * s * gh_uu[i];
        let a = det3([
            [-0.5 * e_vv[i] + f_uv - 0.5 * g_uu, 0.5 * e_u[i], f_u - 0.5 * e_v[i]],
            [f_v - 0.5 * g_u, e[i], f],
            [0.5 * g_v, f, g],
        ]);
        let b = det3([
            [0.0, 0.5 * e_v[i], 0.5 * g_u],
            [0.5 * e_v[i], e[i], f],
            [0.5 * g_u, f, g],
        ]);
        let det = e[i] * g - f * f;
        let k = (a - b) / (det * det);
        integrand[i] = k * det.sqrt() / s;
    }
    grid.integrate(&integrand).unwrap()
}
