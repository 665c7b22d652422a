use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use anyhow::anyhow;
use qlmass::asymptotics::{self, RadialAFMetric};
use qlmass::extension::{self, ExtensionRun, ExtensionState, RunStatus};
use qlmass::flow::{self, DecayFit};
use qlmass::mass::{self, monotonicity_audit, AuditReport, MassReport};
use qlmass::surface::harmonic_perturbation;
use qlmass::{assemble, oracle, Background, RadialGraph, SphereGrid, SurfaceGeometry};
use serde::Serialize;

use crate::config::{ExperimentConfig, HMode, HValue};
use crate::output::{read_q_series, table_csv, trajectory_csv, Artifacts, Row};
use crate::{Context, Failure};

/// Tolerance for the algebraic identities of the Φ curve.
const PHI_IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Self { name, pass, detail }
    }
}

fn config_err(key: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("key `{key}`: {e}"))
}

fn runtime(e: qlmass::Error) -> Failure {
    Failure::Runtime(anyhow!(e))
}

/// Write the report, print the check lines and turn failed checks into
/// exit code 1.
fn finish(
    ctx: &Context,
    art: &mut Artifacts,
    suffix: &str,
    report: &impl Serialize,
    checks: &[Check],
) -> Result<(), Failure> {
    art.json(suffix, report)?;
    for c in checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for p in &art.written {
        ctx.log(format!("wrote {}", p.display()));
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

fn surface_background(cfg: &ExperimentConfig) -> Result<Background, Failure> {
    if cfg.background.n != 2 {
        return Err(config_err(
            "background.n",
            format!("surface runs need n = 2, got {}", cfg.background.n),
        ));
    }
    Background::new(2, cfg.background.m).map_err(|e| config_err("background.m", e))
}

fn build_grid(cfg: &ExperimentConfig) -> Result<Arc<SphereGrid>, Failure> {
    let g = &cfg.grid;
    SphereGrid::with_options(g.n_theta, g.n_phi, g.compensated)
        .map(Arc::new)
        .map_err(|e| config_err("grid", e))
}

fn build_graph(cfg: &ExperimentConfig, grid: &Arc<SphereGrid>, bg: Background) -> Result<RadialGraph, Failure> {
    let ig = &cfg.initial_graph;
    let modes: Vec<(usize, isize, f64)> = ig.harmonics.iter().map(|h| (h.l, h.m, h.amplitude)).collect();
    let rho = harmonic_perturbation(grid, ig.r, &modes);
    RadialGraph::with_smoothness(grid.clone(), bg, rho, ig.smoothness).map_err(|e| config_err("initial_graph", e))
}

fn boundary_field(cfg: &ExperimentConfig, geom: &SurfaceGeometry) -> Result<Vec<f64>, Failure> {
    let n = geom.sigma1.len();
    match (cfg.boundary_h.mode, &cfg.boundary_h.value) {
        (HMode::Factor, HValue::Scalar(f)) => Ok(geom.sigma1.iter().map(|s| f * s).collect()),
        (HMode::Field, HValue::Scalar(v)) => Ok(vec![*v; n]),
        (HMode::Field, HValue::Nodes(v)) if v.len() == n => Ok(v.clone()),
        (HMode::Field, HValue::Nodes(v)) => Err(config_err(
            "boundary_h.value",
            format!("{} values for {n} grid nodes", v.len()),
        )),
        (HMode::Factor, HValue::Nodes(_)) => Err(config_err("boundary_h.value", "mode `factor` takes a single number")),
    }
}

fn fit(series: Vec<(f64, f64)>) -> Option<DecayFit> {
    flow::fit_decay(&series).ok()
}

#[derive(Serialize)]
struct DecayReport {
    roundness_defect: Option<DecayFit>,
    gtilde_defect: Option<DecayFit>,
}

#[derive(Serialize)]
struct FlowRunReport<'a> {
    command: &'static str,
    seed: Option<u64>,
    config: &'a ExperimentConfig,
    status: RunStatus,
    steps: usize,
    mass: &'a MassReport,
    decay: DecayReport,
    checks: &'a [Check],
}

struct Setup {
    bg: Background,
    grid: Arc<SphereGrid>,
    geom0: SurfaceGeometry,
    h: Vec<f64>,
    run: ExtensionRun,
}

fn run_extension(ctx: &Context, keep_states: bool) -> Result<Setup, Failure> {
    let cfg = &ctx.cfg;
    let bg = surface_background(cfg)?;
    let grid = build_grid(cfg)?;
    let graph = build_graph(cfg, &grid, bg)?;
    let geom0 = assemble(&graph, cfg.flow.k).map_err(|e| config_err("initial_graph", e))?;
    let h = boundary_field(cfg, &geom0)?;
    let state = ExtensionState::from_boundary(graph, &h, cfg.flow.k).map_err(|e| config_err("boundary_h", e))?;
    ctx.log(format!(
        "grid {}x{}, m = {}, t_final = {}",
        grid.n_theta(),
        grid.n_phi(),
        bg.mass(),
        cfg.flow.t_final
    ));
    let run = extension::run(state, &cfg.flow, keep_states).map_err(runtime)?;
    ctx.log(format!("{} steps, {} samples, status {:?}", run.steps, run.samples.len(), run.status));
    Ok(Setup {
        bg,
        grid,
        geom0,
        h,
        run,
    })
}

fn audit_checks(a: &AuditReport, eps: f64, tol: f64) -> Vec<Check> {
    vec![
        Check::new(
            "q_monotone",
            a.monotone_ok,
            format!("max increase of Q {:e}, allowed {eps:e}", a.max_increase),
        ),
        Check::new(
            "q_audit",
            a.audit_ok,
            format!("max relative dQ/dt defect {:e}, allowed {tol:e}", a.max_defect),
        ),
        Check::new("q_rhs_sign", a.rhs_sign_ok, "right side of dQ/dt is non-positive".into()),
    ]
}

pub fn flow_run(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let s = run_extension(ctx, false)?;
    let samples = &s.run.samples;
    let q0 = samples[0].q;
    let eps = cfg.tolerances.mono * q0.abs();
    let qle = mass::quasilocal_energy(&s.grid, &s.bg, &s.geom0, &s.h).map_err(runtime)?;
    let report = mass::mass_report(
        &s.bg,
        samples,
        qle,
        cfg.mass.horizon_area,
        eps,
        cfg.tolerances.audit,
        cfg.mass.m0_window,
    )
    .map_err(runtime)?;

    let mut checks = vec![Check::new(
        "flow_completed",
        s.run.status == RunStatus::Completed,
        format!("{:?} after {} steps", s.run.status, s.run.steps),
    )];
    checks.extend(audit_checks(&report.q_derivative_audit, eps, cfg.tolerances.audit));
    let slack = eps / (2.0 * qlmass::sphere_area(2));
    checks.push(Check::new(
        "chain_inequality",
        qle >= report.chain_lower_bound - slack,
        format!("quasi-local energy {qle} >= m + Q(t_final)/8pi = {}", report.chain_lower_bound),
    ));
    let convex = samples.iter().all(|x| {
        if cfg.flow.k == 2 {
            x.diag.min_sigma2 > 0.0 && x.diag.min_sigma1 > 0.0
        } else {
            x.diag.min_sigma1 > 0.0
        }
    });
    checks.push(Check::new(
        "k_convex",
        convex,
        format!("min sigma_{} stays positive", cfg.flow.k),
    ));
    let quarter = samples.iter().filter(|x| x.t <= samples[0].t + 0.25 * cfg.flow.t_final);
    let early = quarter.map(|x| x.w_envelope).fold(0.0, f64::max);
    let overall = samples.iter().map(|x| x.w_envelope).fold(0.0, f64::max);
    checks.push(Check::new(
        "w_envelope_bounded",
        overall <= 2.0 * early,
        format!("max |w-1| rho {overall:e}, first quarter {early:e}"),
    ));

    let rows: Vec<Row> = samples.iter().map(Row::of).collect();
    let mut art = Artifacts::new(&ctx.out_dir, &cfg.outputs.prefix)?;
    art.text("trajectory.csv", &trajectory_csv(&rows, Some(&report.q_derivative_audit)))?;
    let decay = DecayReport {
        roundness_defect: fit(samples.iter().map(|x| (x.t, x.diag.roundness_defect)).collect()),
        gtilde_defect: fit(samples.iter().map(|x| (x.t, x.diag.gtilde_defect)).collect()),
    };
    let out = FlowRunReport {
        command: "flow-run",
        seed: ctx.seed,
        config: cfg,
        status: s.run.status,
        steps: s.run.steps,
        mass: &report,
        decay,
        checks: &checks,
    };
    finish(ctx, &mut art, "report.json", &out, &checks)
}

#[derive(Serialize)]
struct OracleReport<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    m_hat: f64,
    h_value: f64,
    max_rel_error_rho: f64,
    max_rel_error_w: f64,
    max_rel_error_q: f64,
    max_rel_error_mass_aspect: f64,
    max_rel_error_dq_rhs: f64,
    checks: &'a [Check],
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn oracle_check(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    if !cfg.initial_graph.harmonics.is_empty() {
        return Err(config_err("initial_graph.harmonics", "the oracle check needs round data"));
    }
    let r = cfg.initial_graph.r;
    let s = run_extension(ctx, true)?;
    let h_value = s.h[0];
    if s.h.iter().any(|v| *v != h_value) {
        return Err(config_err("boundary_h.value", "the oracle check needs constant boundary data"));
    }
    let sym = oracle::symmetric_trajectory(r, s.bg.mass(), h_value, 2, cfg.flow.t_final, 2)
        .map_err(|e| config_err("boundary_h", e))?;

    let (mut e_rho, mut e_w, mut e_q, mut e_m, mut e_rhs) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut oracle_rows = Vec::with_capacity(s.run.samples.len());
    for ((t, rho, w), sample) in s.run.states.iter().zip(&s.run.samples) {
        let o = sym.at(*t).map_err(runtime)?;
        for i in 0..rho.len() {
            e_rho = e_rho.max(rel(rho[i], o.rho));
            e_w = e_w.max(rel(w[i], o.w));
            let aspect = 0.5 * rho[i] * (1.0 - 1.0 / (w[i] * w[i]));
            e_m = e_m.max(rel(aspect, o.mass_aspect));
        }
        e_q = e_q.max(rel(sample.q, o.q));
        // Round spheres: −∫ f (w−1)²/w (σ₁ ∂_ν N + N σ₂) dA = −2πρ (w−1)²/w.
        let rhs = -2.0 * PI * o.rho * (o.w - 1.0).powi(2) / o.w;
        if rhs != 0.0 || sample.q_rhs != 0.0 {
            e_rhs = e_rhs.max(rel(sample.q_rhs, rhs));
        }
        let n = (1.0 - 2.0 * s.bg.mass() / o.rho).sqrt();
        oracle_rows.push(Row {
            t: *t,
            rho_min: o.rho,
            rho_max: o.rho,
            area: 4.0 * PI * o.rho * o.rho,
            q: o.q,
            m_aspect_min: o.mass_aspect,
            m_aspect_max: o.mass_aspect,
            roundness_defect: 0.0,
            gtilde_defect: 0.0,
            min_sigma2: (n / o.rho).powi(2),
            max_grad_varphi_sq: 0.0,
            dq_rhs: rhs,
        });
    }
    let tol = cfg.tolerances;
    let checks = vec![
        Check::new(
            "flow_completed",
            s.run.status == RunStatus::Completed,
            format!("{:?}", s.run.status),
        ),
        Check::new(
            "oracle_fields",
            e_rho <= tol.oracle && e_w <= tol.oracle,
            format!("rel error rho {e_rho:e}, w {e_w:e}, allowed {:e}", tol.oracle),
        ),
        Check::new(
            "oracle_integrals",
            e_q <= tol.oracle_integral && e_m <= tol.oracle_integral && e_rhs <= tol.oracle_integral,
            format!(
                "rel error Q {e_q:e}, mass aspect {e_m:e}, dQ/dt {e_rhs:e}, allowed {:e}",
                tol.oracle_integral
            ),
        ),
    ];
    let rows: Vec<Row> = s.run.samples.iter().map(Row::of).collect();
    let mut art = Artifacts::new(&ctx.out_dir, &cfg.outputs.prefix)?;
    art.text("trajectory.csv", &trajectory_csv(&rows, None))?;
    art.text("oracle.csv", &trajectory_csv(&oracle_rows, None))?;
    let out = OracleReport {
        command: "oracle-check",
        config: cfg,
        m_hat: sym.m_hat,
        h_value,
        max_rel_error_rho: e_rho,
        max_rel_error_w: e_w,
        max_rel_error_q: e_q,
        max_rel_error_mass_aspect: e_m,
        max_rel_error_dq_rhs: e_rhs,
        checks: &checks,
    };
    finish(ctx, &mut art, "report.json", &out, &checks)
}

#[derive(Serialize)]
struct PhiReport<'a> {
    command: &'static str,
    #[serde(rename = "R")]
    r: f64,
    h_mean: f64,
    h_bar: f64,
    m_star: f64,
    min_phi: f64,
    lapse_at_m_star: f64,
    m_star_closed_form: f64,
    checks: &'a [Check],
}

pub fn phi_curve(ctx: &Context) -> Result<(), Failure> {
    let p = ctx.cfg.phi_curve;
    let c = mass::round_phi_curve(p.r, p.h_mean, p.samples).map_err(|e| config_err("phi_curve", e))?;
    let checks = vec![Check::new(
        "phi_identities",
        c.identities_hold(PHI_IDENTITY_TOL),
        format!(
            "m* {} = min phi {} = closed form {}; N(m*) {} = h_bar {}",
            c.m_star, c.phi_min, c.m_star_closed_form, c.lapse_at_m_star, c.h_bar
        ),
    )];
    let mut art = Artifacts::new(&ctx.out_dir, &ctx.cfg.outputs.prefix)?;
    art.text("curve.csv", &table_csv(&["m", "phi"], c.points.iter().map(|(m, f)| vec![*m, *f])))?;
    let out = PhiReport {
        command: "phi-curve",
        r: c.r,
        h_mean: c.h_mean,
        h_bar: c.h_bar,
        m_star: c.m_star,
        min_phi: c.phi_min,
        lapse_at_m_star: c.lapse_at_m_star,
        m_star_closed_form: c.m_star_closed_form,
        checks: &checks,
    };
    finish(ctx, &mut art, "report.json", &out, &checks)
}

#[derive(Serialize)]
struct AnnulusPoint {
    m_hat: f64,
    h: f64,
    margin: f64,
    margin_closed_form: f64,
}

#[derive(Serialize)]
struct AnnulusReport<'a> {
    command: &'static str,
    #[serde(rename = "R")]
    r: f64,
    m: f64,
    points: Vec<AnnulusPoint>,
    checks: &'a [Check],
}

pub fn annulus_sweep(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let bg = surface_background(cfg)?;
    let grid = build_grid(cfg)?;
    let r = cfg.annulus.r;
    let graph = RadialGraph::round(grid.clone(), bg, r).map_err(|e| config_err("annulus.R", e))?;
    let geom = assemble(&graph, 2).map_err(|e| config_err("annulus.R", e))?;
    let mut points = Vec::new();
    for (i, &m_hat) in cfg.annulus.m_hat.iter().enumerate() {
        let n_hat_sq = 1.0 - 2.0 * m_hat / r;
        if !(m_hat > 0.0 && n_hat_sq > 0.0) {
            return Err(config_err(
                &format!("annulus.m_hat[{i}]"),
                format!("{m_hat} must be positive with a horizon inside R = {r}"),
            ));
        }
        let h_value = 2.0 * n_hat_sq.sqrt() / r;
        let h = vec![h_value; grid.len()];
        let area = 4.0 * PI * (2.0 * m_hat).powi(2);
        let margin = mass::inequality_margin(&grid, &bg, &geom, &h, area).map_err(runtime)?;
        let closed = oracle::annulus_margin(r, bg.mass(), m_hat, 2).map_err(runtime)?;
        points.push(AnnulusPoint {
            m_hat,
            h: h_value,
            margin,
            margin_closed_form: closed,
        });
    }
    let worst = points
        .iter()
        .map(|p| (p.margin - p.margin_closed_form).abs())
        .fold(0.0, f64::max);
    let lowest = points.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    let tol = cfg.tolerances.margin;
    let checks = vec![
        Check::new(
            "margin_closed_form",
            worst <= tol,
            format!("max |margin - closed form| {worst:e}, allowed {tol:e}"),
        ),
        Check::new(
            "margin_nonnegative",
            points.is_empty() || lowest >= -tol,
            format!("smallest margin {lowest:e}"),
        ),
    ];
    let mut art = Artifacts::new(&ctx.out_dir, &cfg.outputs.prefix)?;
    art.text(
        "curve.csv",
        &table_csv(
            &["m_hat", "h", "margin", "margin_closed_form"],
            points.iter().map(|p| vec![p.m_hat, p.h, p.margin, p.margin_closed_form]),
        ),
    )?;
    let out = AnnulusReport {
        command: "annulus-sweep",
        r,
        m: bg.mass(),
        points,
        checks: &checks,
    };
    finish(ctx, &mut art, "report.json", &out, &checks)
}

#[derive(Serialize)]
struct LimitSummary {
    limit: f64,
    exponent: Option<f64>,
    final_value: f64,
}

#[derive(Serialize)]
struct LimitsReport<'a> {
    command: &'static str,
    adm_mass: f64,
    m: f64,
    inner_radius: f64,
    quasilocal_energy: LimitSummary,
    volume_deficit_ratio: LimitSummary,
    checks: &'a [Check],
}

pub fn limits(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let l = cfg.limits;
    let m = cfg.background.m;
    let metric = match l.rho_min {
        Some(r) => RadialAFMetric::with_inner_radius(l.profile, r),
        None => RadialAFMetric::new(l.profile),
    }
    .map_err(|e| config_err("limits.profile", e))?;
    let radii = asymptotics::log_radii(l.rho_lo, l.rho_max, l.count);
    let e = asymptotics::quasilocal_limit_curve(&metric, m, &radii).map_err(|e| config_err("limits", e))?;
    let v = asymptotics::volume_deficit_curve(&metric, m, &radii).map_err(runtime)?;
    let adm = l.profile.adm_mass();
    let e_last = e.points.last().map(|p| p.1).unwrap_or(f64::NAN);
    let v_last = v.points.last().map(|p| p.1).unwrap_or(f64::NAN);
    let target = adm - m;
    let scale = if target != 0.0 { target.abs() } else { 1.0 };
    let tol = cfg.tolerances;
    let checks = vec![
        Check::new(
            "quasilocal_limit",
            (e.limit - adm).abs() <= tol.limit,
            format!("extrapolated {} vs ADM mass {adm}, allowed {:e}", e.limit, tol.limit),
        ),
        Check::new(
            "volume_limit",
            (v_last - target).abs() <= tol.volume * scale,
            format!("ratio at rho = {} is {v_last} vs {target}", l.rho_max),
        ),
    ];
    let mut art = Artifacts::new(&ctx.out_dir, &cfg.outputs.prefix)?;
    art.text(
        "curve.csv",
        &table_csv(
            &["rho", "quasilocal_energy", "volume_deficit_ratio"],
            e.points.iter().zip(&v.points).map(|(a, b)| vec![a.0, a.1, b.1]),
        ),
    )?;
    let out = LimitsReport {
        command: "limits",
        adm_mass: adm,
        m,
        inner_radius: metric.inner_radius(),
        quasilocal_energy: LimitSummary {
            limit: e.limit,
            exponent: e.exponent,
            final_value: e_last,
        },
        volume_deficit_ratio: LimitSummary {
            limit: v.limit,
            exponent: v.exponent,
            final_value: v_last,
        },
        checks: &checks,
    };
    finish(ctx, &mut art, "report.json", &out, &checks)
}

#[derive(Serialize)]
struct AuditOutput<'a> {
    command: &'static str,
    trajectory: String,
    q_derivative_audit: &'a AuditReport,
    checks: &'a [Check],
}

pub fn audit(ctx: &Context, trajectory: &Path) -> Result<(), Failure> {
    let series = read_q_series(trajectory)?;
    let q0 = series.first().map(|s| s.1).unwrap_or(0.0);
    let eps = ctx.cfg.tolerances.mono * q0.abs();
    let tol = ctx.cfg.tolerances.audit;
    let report = monotonicity_audit(&series, eps, tol).map_err(runtime)?;
    let checks = audit_checks(&report, eps, tol);
    let mut art = Artifacts::new(&ctx.out_dir, &ctx.cfg.outputs.prefix)?;
    let out = AuditOutput {
        command: "audit",
        trajectory: trajectory.display().to_string(),
        q_derivative_audit: &report,
        checks: &checks,
    };
    finish(ctx, &mut art, "audit.json", &out, &checks)
}
