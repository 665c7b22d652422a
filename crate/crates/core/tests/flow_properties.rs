mod common;

use common::{grid, perturbed};
use proptest::prelude::*;
use qlmass::flow::{self, Diagnostic, FlowConfig, FlowStatus};
use qlmass::{Background, RadialGraph};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn round_data_follow_the_exponential(r in 2.5f64..10.0, m in 0f64..1.0, k in 1usize..=2) {
        let g = grid(8, 16);
        let bg = Background::new(2, m).unwrap();
        let cfg = FlowConfig { k, t_final: 0.5, ..Default::default() };
        let tr = flow::run(&RadialGraph::round(g, bg, r).unwrap(), &cfg).unwrap();
        for s in &tr.snapshots {
            let exact = r * (s.t / 2.0).exp();
            prop_assert!((s.diag.rho_max / exact - 1.0).abs() <= 1e-6);
            prop_assert!((s.diag.rho_min / exact - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn perturbed_flow_invariants() {
    let bg = Background::new(2, 1.0).unwrap();
    let g = grid(24, 48);
    let cfg = FlowConfig {
        t_final: 1.5,
        output_stride: 5,
        ..Default::default()
    };
    let tr = flow::run(&perturbed(&g, bg, 0.05), &cfg).unwrap();
    assert_eq!(tr.status, FlowStatus::Completed);
    let first = tr.snapshots[0].diag;
    for w in tr.snapshots.windows(2) {
        assert!(w[1].t > w[0].t);
        assert!(w[1].diag.area > w[0].diag.area);
        assert!(w[1].diag.roundness_defect < w[0].diag.roundness_defect);
    }
    for s in &tr.snapshots {
        let e = (s.t / 2.0).exp();
        assert!(s.diag.rho_min >= e * first.rho_min * (1.0 - 1e-6));
        assert!(s.diag.rho_max <= e * first.rho_max * (1.0 + 1e-6));
        assert!(s.diag.max_grad_varphi.powi(2) <= 2.0);
        let geom = s.geometry(2).unwrap();
        assert!(geom.gauss_residual() < 1e-12);
        assert!(geom.min_sigma2 > 0.0);
    }
}

#[test]
fn decay_rates_agree_across_resolutions() {
    let bg = Background::new(2, 1.0).unwrap();
    let cfg = FlowConfig {
        t_final: 2.0,
        output_stride: 5,
        ..Default::default()
    };
    let a = flow::run(&perturbed(&grid(16, 32), bg, 0.05), &cfg).unwrap();
    let b = flow::run(&perturbed(&grid(24, 48), bg, 0.05), &cfg).unwrap();
    let fa = a.fit_decay(Diagnostic::RoundnessDefect).unwrap();
    let fb = b.fit_decay(Diagnostic::RoundnessDefect).unwrap();
    assert!(fa.alpha > 0.0 && fb.alpha > 0.0);
    assert!((fa.alpha / fb.alpha - 1.0).abs() < 0.1);
}

#[test]
fn convexity_floor_stops_the_run() {
    let bg = Background::new(2, 1.0).unwrap();
    let g = grid(16, 32);
    let graph = perturbed(&g, bg, 0.05);
    let cfg = FlowConfig {
        t_final: 1.0,
        convexity_tolerance: 1.0,
        ..Default::default()
    };
    assert!(matches!(
        flow::run(&graph, &cfg),
        Err(qlmass::Error::ConvexityLost { .. })
    ));
}
