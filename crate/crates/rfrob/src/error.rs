use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("block index {index} out of range 0..={max}")]
    BlockOutOfRange { index: usize, max: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cutoff radii invalid: inner {inner}, outer {outer}, box {box_side}")]
    CutoffRadii { inner: f64, outer: f64, box_side: f64 },

    #[error("invalid modulus: {0}")]
    InvalidModulus(String),

    #[error("flow modulus diverged (t = {t}, r = {r})")]
    FlowModulusDiverged { t: f64, r: f64 },

    #[error("range error: {0}")]
    Range(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("left flow domain at seed #{seed} = {point:?} (t = {t})")]
    LeftFlowDomain { seed: usize, point: Vec<f64>, t: f64 },

    #[error("query outside chart image: {0}")]
    OutsideChartImage(String),

    #[error("aliasing risk: {0}; use a finer grid")]
    AliasingRisk(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("subbundle not transverse to coordinate split: {0}")]
    NotTransverse(String),

    #[error("rank-deficient basis at {fraction:.3}% of grid points")]
    RankDeficient { fraction: f64 },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unknown catalog id `{0}`")]
    UnknownCatalogId(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
