use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chart coordinate |Y| = {norm:.6e} is outside the chart radius {radius:.6e}")]
    ChartOutOfRange { norm: f64, radius: f64 },

    #[error("Newton inversion of the tubular chart did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },

    #[error("metric is singular or indefinite (det = {det:.3e})")]
    SingularMetric { det: f64 },

    #[error("invalid patch: {0}")]
    InvalidPatch(String),

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("time step {dt:.3e} violates the stability bound {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("surface left the chart: max |u| = {max_u:.3e} exceeds {bound:.3e}")]
    ChartExit { max_u: f64, bound: f64 },

    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: i64, j: i64 },

    #[error("requested time {t} is at or past the singular time {singular_time}")]
    PastSingularity { t: f64, singular_time: f64 },

    #[error("exact solution undefined at rim node ({i}, {j}) at t = {t}")]
    ExactUndefined { i: i64, j: i64, t: f64 },

    #[error("reflection condition violated: |a12(y1, 0)| = {value:.3e} > {tol:.3e}")]
    ReflectionConditionViolated { value: f64, tol: f64 },

    #[error("surface has no free-boundary edge")]
    NoFreeBoundary,

    #[error("need at least {needed} snapshots in the window, found {found}")]
    InsufficientSnapshots { needed: usize, found: usize },

    #[error("density query violates its preconditions: {0}")]
    InvalidQuery(String),

    #[error("boundary kernel time window violated: T - t = {elapsed:.3e} exceeds {limit:.3e}")]
    TimeWindow { elapsed: f64, limit: f64 },

    #[error("topology tag missing")]
    TopologyUntagged,

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("time {t} is outside the trajectory range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("region contains no samples")]
    EmptyRegion,

    /// A failure read back from a persisted run.
    #[error("{0}")]
    Recorded(String),
}

impl Error {
    /// Failures of the numerics rather than of the request.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SingularMetric { .. }
                | Error::CflViolation { .. }
                | Error::ChartExit { .. }
                | Error::NonFinite { .. }
                | Error::PastSingularity { .. }
                | Error::ExactUndefined { .. }
                | Error::Recorded(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
