//! CSV and JSON artifacts. Floats are written with Rust's shortest
//! round-trip formatting, so reading a file back reproduces every value.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qlmass::mass::AuditReport;
use qlmass::ExtensionSample;
use serde::Serialize;

pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "t",
    "rho_min",
    "rho_max",
    "area",
    "Q",
    "m_aspect_min",
    "m_aspect_max",
    "roundness_defect",
    "gtilde_defect",
    "min_sigma2",
    "max_grad_varphi_sq",
    "audit_defect",
    "dq_rhs",
];

/// One row of the trajectory table.
#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub t: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub area: f64,
    pub q: f64,
    pub m_aspect_min: f64,
    pub m_aspect_max: f64,
    pub roundness_defect: f64,
    pub gtilde_defect: f64,
    pub min_sigma2: f64,
    pub max_grad_varphi_sq: f64,
    pub dq_rhs: f64,
}

impl Row {
    pub fn of(s: &ExtensionSample) -> Self {
        Self {
            t: s.t,
            rho_min: s.diag.rho_min,
            rho_max: s.diag.rho_max,
            area: s.diag.area,
            q: s.q,
            m_aspect_min: s.aspect.min,
            m_aspect_max: s.aspect.max,
            roundness_defect: s.diag.roundness_defect,
            gtilde_defect: s.diag.gtilde_defect,
            min_sigma2: s.diag.min_sigma2,
            max_grad_varphi_sq: s.diag.max_grad_varphi * s.diag.max_grad_varphi,
            dq_rhs: s.q_rhs,
        }
    }
}

/// Trajectory table. `audit` supplies the defect column; rows without an
/// audit point (the end points) leave it empty.
pub fn trajectory_csv(rows: &[Row], audit: Option<&AuditReport>) -> String {
    let mut out = TRAJECTORY_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let defect = audit
            .and_then(|a| a.points.iter().find(|p| p.t == r.t))
            .map(|p| p.defect.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.rho_min,
            r.rho_max,
            r.area,
            r.q,
            r.m_aspect_min,
            r.m_aspect_max,
            r.roundness_defect,
            r.gtilde_defect,
            r.min_sigma2,
            r.max_grad_varphi_sq,
            defect,
            r.dq_rhs
        );
    }
    out
}

/// Generic two-or-more column table.
pub fn table_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `(t, Q, dq_rhs)` columns of a trajectory file.
pub fn read_q_series(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().context("empty trajectory file")?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("column `{name}` missing from {}", path.display()))
    };
    let (it, iq, ir) = (col("t")?, col("Q")?, col("dq_rhs")?);
    let mut series = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            bail!("row {} has {} cells, header has {}", k + 2, cells.len(), header.len());
        }
        let get = |i: usize| -> Result<f64> {
            cells[i]
                .trim()
                .parse()
                .with_context(|| format!("row {}: cannot parse {:?}", k + 2, cells[i]))
        };
        series.push((get(it)?, get(iq)?, get(ir)?));
    }
    Ok(series)
}

pub struct Artifacts {
    dir: PathBuf,
    prefix: String,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, prefix: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            written: Vec::new(),
        })
    }

    pub fn text(&mut self, suffix: &str, body: &str) -> Result<()> {
        let path = self.dir.join(format!("{}_{suffix}", self.prefix));
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json(&mut self, suffix: &str, value: &impl Serialize) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(suffix, &body)
    }
}
