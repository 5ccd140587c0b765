use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("point {point:?} is closer than {margin:e} to the domain boundary")]
    BoundaryProximity { point: Vec<f64>, margin: f64 },
    #[error("differential has numerical rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("induced metric is not positive definite")]
    SingularMetric,
    #[error("vector is not normal: tangential part {deviation:e}")]
    NonNormal { deviation: f64 },
    #[error("immersion is not contained in a sphere: {reason}")]
    NotSpherical { reason: String },
    #[error("rank of {bundle} varies over the grid ({min}..{max})")]
    RankDrop { bundle: String, min: usize, max: usize },
    #[error("frame gauge jumps by {jump:.3} between neighbouring grid points")]
    GaugeJump { jump: f64 },
    #[error("closedness residual {residual:e} exceeds {tolerance:e}")]
    NotClosed { residual: f64, tolerance: f64 },
    #[error("point clouds are degenerate: {0}")]
    DegenerateCloud(String),
    #[error("point clouds differ in shape: {0}")]
    CloudMismatch(String),
    #[error("frames are not orthonormal (deviation {deviation:e})")]
    NonOrthonormalFrame { deviation: f64 },
    #[error("conjugation symmetry violated (deviation {deviation:e})")]
    ConjugationSymmetry { deviation: f64 },
    #[error("matrix is not in the {algebra} algebra (deviation {deviation:e})")]
    NotInAlgebra { algebra: String, deviation: f64 },
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("not an orthogonal complex structure: {0}")]
    InvalidComplexStructure(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
