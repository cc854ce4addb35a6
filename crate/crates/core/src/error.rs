use thiserror::Error;

/// Errors surfaced by graph construction, enumeration oracles, bound
/// evaluators and the coupling machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("joint state space of {actual} states exceeds the enumeration cap of {cap}")]
    StateSpaceTooLarge { actual: u128, cap: u64 },

    #[error("subset enumeration over {n} variables exceeds the supported maximum of {max}")]
    SubsetSpaceTooLarge { n: usize, max: usize },

    #[error("distribution tables have mismatched shape: {0}")]
    DimensionMismatch(String),

    #[error("Dobrushin's condition violated: total influence alpha = {alpha} >= 1")]
    DobrushinViolated { alpha: f64 },

    #[error("epsilon = {epsilon} is below the bound's validity threshold {threshold}")]
    EpsilonTooSmall { epsilon: f64, threshold: f64 },

    #[error("sequential bound function failed the convexity/monotonicity spot check")]
    NonConvexBoundFunction,

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    #[error("graph generation failed after {attempts} rejected pairings")]
    GenerationFailure { attempts: usize },

    #[error("target tau* = {target} is not attainable on support {{0..{support_max}}} with n = {n}")]
    UnattainableTauStar {
        target: f64,
        support_max: u64,
        n: u64,
    },

    #[error("monotone coupling requires a ferromagnetic Ising-type graph: {0}")]
    NonFerromagnetic(String),

    #[error("need at least {required} coupling runs, got {actual}")]
    InsufficientTrials { required: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
