use thiserror::Error;

/// Errors shared across the reduction and simulation pipeline.
#[derive(Debug, Error)]
pub enum GaelError {
    #[error("Hamiltonian matrix R is not symmetric (asymmetry {defect:.3e} exceeds tolerance)")]
    NonSymmetricHamiltonian { defect: f64 },

    #[error("homodyne channel {channel} is not backed by the Lindblad terms (min eigenvalue {min_eig:.3e})")]
    UnbackedChannel { channel: usize, min_eig: f64 },

    #[error("drift matrix is not Hurwitz: eigenvalue {re:.6e}{im:+.6e}i has non-negative real part")]
    NonStableDrift { re: f64, im: f64 },

    #[error("Riccati relaxation did not converge within t = {max_time:.1} (residual {residual:.3e})")]
    RiccatiDivergence { max_time: f64, residual: f64 },

    #[error("covariance matrix violates the Heisenberg bound: min eig(Gamma + i sigma) = {min_eig:.3e}")]
    InvalidCovariance { min_eig: f64 },

    #[error("{what} is numerically singular (condition number {cond:.3e})")]
    SingularMatrix { what: &'static str, cond: f64 },

    #[error("channel detuning {detuning} is not compatible with coupling frequency {omega} (expected +/- omega)")]
    UnsupportedDetuning { detuning: f64, omega: f64 },

    #[error("channel has zero detuning; the static elimination path applies")]
    ZeroDetuning,

    #[error("decay matrix has a genuinely negative eigenvalue {eig:.3e} (norm {norm:.3e}); elimination invalid")]
    NegativeDecay { eig: f64, norm: f64 },

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("density operator has trace {trace:.6e}, expected 1")]
    NormalizationError { trace: f64 },

    #[error("measurement channel {channel} has no matching Lindblad backing in the unraveling")]
    InvalidUnraveling { channel: usize },

    #[error("full and reduced models expose different channel counts ({full} vs {reduced})")]
    PairingError { full: usize, reduced: usize },

    #[error("trace drifted by {drift:.3e} in one step; decrease dt")]
    StepSizeError { drift: f64 },

    #[error("postselection kept no trajectories at threshold {threshold}")]
    EmptySelection { threshold: f64 },

    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),

    #[error("matrix CSV parse error: {0}")]
    CsvParse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
