use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph is disconnected ({} components: {})", .components.len(), format_components(.components))]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("graph is bipartite; this operation needs a non-bipartite graph (lambda_max < 2)")]
    Bipartite,

    #[error("generator gave up after {attempts} attempts: {reason}")]
    AttemptCapExceeded { attempts: usize, reason: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("self-loop on node {node}{}", line_suffix(*.line))]
    SelfLoop { node: usize, line: Option<usize> },

    #[error("duplicate edge ({u}, {v}){}", line_suffix(*.line))]
    DuplicateEdge {
        u: usize,
        v: usize,
        line: Option<usize>,
    },

    #[error("node index {index} out of range for n = {n}")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("Jacobi eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("laplacian has {0} zero eigenvalues; expected exactly one")]
    RepeatedZeroEigenvalue(usize),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("w = 0 gives a degenerate capacity (S divides by w)")]
    DegenerateCapacity,

    #[error("premise violated: {0}")]
    PremiseViolation(String),

    #[error("every pair has a zero mixing bound (under-reaching everywhere)")]
    AllPairsZero,

    #[error("random walker {walker} exceeded the step cap of {cap}")]
    StepCapExceeded { walker: usize, cap: u64 },

    #[error("MAX readout tie in channel {channel}: top two candidates differ by {gap:e}")]
    ReadoutTie { channel: usize, gap: f64 },

    #[error(
        "MAX readout argmax in channel {channel} changes inside the finite-difference stencil"
    )]
    ArgmaxSwitch { channel: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

fn format_components(components: &[Vec<usize>]) -> String {
    components
        .iter()
        .map(|c| {
            if c.len() <= 8 {
                format!("{c:?}")
            } else {
                format!("[{}, {}, ... {} nodes]", c[0], c[1], c.len())
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
