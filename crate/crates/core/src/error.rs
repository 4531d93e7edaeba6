use thiserror::Error;

pub type Result<T, E = SgpcaError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SgpcaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate-vector: {0}")]
    DegenerateVector(&'static str),

    /// Thresholding zeroed the whole iterate before normalization.
    #[error("threshold-too-large: iterate fully zeroed at iteration {iteration}")]
    ThresholdTooLarge { iteration: usize },

    #[error("rank-collapse: column {column} vanished during orthonormalization at iteration {iteration}")]
    RankCollapse { column: usize, iteration: usize },

    #[error("empty-selection: {0}")]
    EmptySelection(&'static str),

    #[error("subsample-too-small: floor({n} * {rho}) = {size} < 2")]
    SubsampleTooSmall { n: usize, rho: f64, size: usize },

    #[error("tuning-failed: every cell failed for component {component}")]
    TuningFailed { component: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate-spec: {0}")]
    DegenerateSpec(String),

    #[error("unknown preset `{0}` (expected one of 1a, 1b, 1c, 2i, 2ii, 3)")]
    UnknownPreset(String),

    #[error("component {component}: {source}")]
    Component {
        component: usize,
        #[source]
        source: Box<SgpcaError>,
    },
}

impl SgpcaError {
    pub(crate) fn at_component(self, component: usize) -> Self {
        SgpcaError::Component {
            component,
            source: Box::new(self),
        }
    }

    /// Strips any component annotation.
    pub fn root(&self) -> &SgpcaError {
        match self {
            SgpcaError::Component { source, .. } => source.root(),
            other => other,
        }
    }

    /// Errors caused by the numerics (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            SgpcaError::ThresholdTooLarge { .. }
                | SgpcaError::RankCollapse { .. }
                | SgpcaError::EmptySelection(_)
                | SgpcaError::TuningFailed { .. }
                | SgpcaError::DegenerateVector(_)
        )
    }
}
