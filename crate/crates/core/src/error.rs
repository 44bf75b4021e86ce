use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("order {requested} exceeds the supported table (max {supported})")]
    OrderOutOfRange { requested: usize, supported: usize },
    #[error("exponent not splittable: {0}")]
    UnsupportedExponent(String),
    #[error("summation window of {terms} terms exceeds the guard of {limit}")]
    WindowTooLarge { terms: u64, limit: u64 },
    #[error("Fock cutoff exceeded: tail population {tail:.3e} at dimension {dim}")]
    CutoffExceeded { dim: usize, tail: f64 },
    #[error("no inversion registered for loop '{loop_name}' with model {model}")]
    UnknownLoopInversion { loop_name: String, model: String },
    #[error("symbolic budget exceeded: {0}")]
    SymbolicBudgetExceeded(String),
    #[error("no solution; largest solvable target count is {max_m}")]
    NoSolution { max_m: usize },
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::OrderOutOfRange { .. } => "order_out_of_range",
            Error::UnsupportedExponent(_) => "unsupported_exponent",
            Error::WindowTooLarge { .. } => "window_too_large",
            Error::CutoffExceeded { .. } => "cutoff_exceeded",
            Error::UnknownLoopInversion { .. } => "unknown_loop_inversion",
            Error::SymbolicBudgetExceeded(_) => "symbolic_budget_exceeded",
            Error::NoSolution { .. } => "no_solution",
            Error::InvalidLoop(_) => "invalid_loop",
        }
    }
}
