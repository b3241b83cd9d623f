use thiserror::Error;

/// Errors produced by the tableau checkers, the model layer and the stepper.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes or structure of the inputs do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// An argument is outside the range where the operation is defined.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// `F1(u) + C0` or the auxiliary variable went nonpositive.
    #[error("SAV breakdown: auxiliary value {value} is not positive")]
    SavBreakdown { value: f64 },

    /// An inverse transform produced a significant imaginary part.
    #[error("numerical contamination: imaginary residual {residual:e} exceeds tolerance")]
    Symmetry { residual: f64 },

    /// Extrapolation needs history that the state does not hold yet.
    #[error("startup required: {0}")]
    StartupRequired(String),

    /// The incomplete stage iteration did not reach its tolerance.
    #[error("stage iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The nonlinear startup fixed point did not converge.
    #[error("startup fixed point did not converge after {iterations} sweeps (residual {residual:e}); try a smaller time step")]
    Startup { iterations: usize, residual: f64 },

    /// A per-mode or auxiliary linear system is singular.
    #[error("singular linear system: {0}")]
    Singular(String),

    /// Tableau file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
