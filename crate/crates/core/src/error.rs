use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("barrier leaves the unit square at ({x}, {y})")]
    BarrierOutsideDomain { x: f64, y: f64 },
    #[error("degenerate barrier: {0}")]
    DegenerateBarrier(String),
    #[error("LSQ stencil for cell ({i}, {j}) has only {size} usable neighbors")]
    StencilTooSmall { i: usize, j: usize, size: usize },
    #[error("merge target of cell ({i}, {j}) is itself a small cut cell on the same side")]
    MergeTargetCut { i: usize, j: usize },
    #[error("least-squares stencil is rank deficient")]
    RankDeficient,
    #[error("special average requested for a dry state")]
    DryInput,
    #[error("singular eigenbasis in edge decomposition")]
    SingularBasis,
    #[error("CFL violation: |s| dt/dx = {0}")]
    CflViolation(f64),
    #[error("singular redistribution matrix")]
    SingularRedistribution,
    #[error("chevron mapping needs an even resolution, got {0}")]
    OddResolutionForChevron(usize),
    #[error("mapped grid cannot represent this barrier: {0}")]
    UnsupportedMapping(String),
    #[error("every cell is dry")]
    AllDry,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{0}`")]
    Validation(String),
    #[error("step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
