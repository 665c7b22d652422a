use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no horizon: mass {0} is not positive")]
    NoHorizon(f64),
    #[error("area-radius {rho} lies inside the horizon at {horizon}")]
    InsideHorizon { rho: f64, horizon: f64 },
    #[error("invalid gradient factor v = {0}, expected v >= 1")]
    InvalidGradientFactor(f64),
    #[error("singular weight: lapse vanishes at area-radius {0}")]
    SingularWeight(f64),
    #[error("invalid background: {0}")]
    InvalidBackground(String),
    #[error("grid configuration: {0}")]
    GridConfig(String),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("field has {got} values, grid has {expected} nodes")]
    FieldSize { expected: usize, got: usize },
    #[error("degenerate graph at node {node}: {reason}")]
    DegenerateGraph { node: usize, reason: String },
    #[error("lost {k}-convexity at t = {t}")]
    ConvexityLost { k: usize, t: f64 },
    #[error("time step {dt} exceeds stability bound; suggested dt = {suggested}")]
    UnstableStep { dt: f64, suggested: f64 },
    #[error("blow-up at t = {0}")]
    BlowUp(f64),
    #[error("lapse positivity lost at t = {0}")]
    LapsePositivityLost(f64),
    #[error("boundary mean curvature must be positive, got {value} at node {node}")]
    NonPositiveBoundaryCurvature { node: usize, value: f64 },
    #[error("boundary datum not symmetric-extendable: {0}")]
    NotExtendable(String),
    #[error("invalid flow configuration: {0}")]
    FlowConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}
