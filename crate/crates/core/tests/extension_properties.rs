mod common;

use std::f64::consts::PI;

use common::{grid, perturbed, run_factor};
use qlmass::flow::FlowConfig;
use qlmass::mass::{audit_samples, quasilocal_energy};
use qlmass::{assemble, oracle, Background, RadialGraph};

fn cfg(t: f64) -> FlowConfig {
    FlowConfig {
        t_final: t,
        output_stride: 5,
        ..Default::default()
    }
}

#[test]
fn round_solver_matches_the_one_dimensional_route() {
    let bg = Background::new(2, 1.0).unwrap();
    let g = grid(16, 32);
    let run = run_factor(RadialGraph::round(g, bg, 4.0).unwrap(), 0.8, &cfg(2.0), true);
    let w0 = run.states[0].2[0];
    for (t, _, w) in &run.states {
        let reference = oracle::integrate_w_ode(4.0, 1.0, 2, w0, *t, 4000);
        assert!((w[0] / reference - 1.0).abs() < 1e-6);
        assert!(w.iter().all(|x| *x == w[0]));
    }
}

#[test]
fn comparison_principle() {
    let bg = Background::new(2, 1.0).unwrap();
    let g = grid(16, 32);
    let above = run_factor(perturbed(&g, bg, 0.05), 0.9, &cfg(1.5), true);
    for (_, _, w) in &above.states {
        assert!(w.iter().all(|x| *x >= 1.0 - 1e-8));
    }
    let below = run_factor(perturbed(&g, bg, 0.05), 1.1, &cfg(1.5), true);
    for (_, _, w) in &below.states {
        assert!(w.iter().all(|x| *x <= 1.0 + 1e-8));
    }
}

#[test]
fn mass_aspect_flattens_and_envelope_stays_bounded() {
    let bg = Background::new(2, 1.0).unwrap();
    let g = grid(16, 32);
    let run = run_factor(perturbed(&g, bg, 0.05), 0.9, &cfg(3.0), false);
    let spreads: Vec<f64> = run.samples.iter().map(|s| s.aspect.max - s.aspect.min).collect();
    assert!(spreads.last().unwrap() < &spreads[0]);
    let quarter = run.samples.len() / 4;
    let early = run.samples[..=quarter].iter().map(|s| s.w_envelope).fold(0.0, f64::max);
    let all = run.samples.iter().map(|s| s.w_envelope).fold(0.0, f64::max);
    assert!(all <= 2.0 * early);
    assert!(run.samples.iter().all(|s| s.q_rhs <= 0.0));
}

#[test]
fn chain_inequality_and_constant_q() {
    let bg = Background::new(2, 1.0).unwrap();
    let g = grid(16, 32);
    let graph = perturbed(&g, bg, 0.05);
    let geom = assemble(&graph, 2).unwrap();
    let h: Vec<f64> = geom.sigma1.iter().map(|s| 0.85 * s).collect();
    let energy = quasilocal_energy(&g, &bg, &geom, &h).unwrap();
    let run = run_factor(graph.clone(), 0.85, &cfg(2.0), false);
    let q0 = run.samples[0].q;
    assert!((energy - (1.0 + q0 / (8.0 * PI))).abs() < 1e-12);
    let q_end = run.samples.last().unwrap().q;
    assert!(energy >= 1.0 + q_end / (8.0 * PI) - 1e-9);

    let fixed = run_factor(graph, 1.0, &cfg(1.0), false);
    assert!(fixed.samples.iter().all(|s| s.q_rhs == 0.0 && s.max_abs_w_minus_1 <= 1e-10));
    let a = audit_samples(&run.samples, 0.0, 0.02).unwrap();
    assert!(a.audit_ok && a.monotone_ok && a.rhs_sign_ok);
}
