use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} lies outside the reference domain")]
    Domain([f64; 3]),
    #[error("inadmissible material: coercivity estimate {0:.3e} is not positive")]
    InadmissibleMaterial(f64),
    #[error("invalid Voigt matrix: {0}")]
    Voigt(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("point {0:?} could not be located in the mesh")]
    Locate(Vec<f64>),
    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("non-symmetric tensor data: {0}")]
    NonSymmetric(String),
    #[error("coercivity failure: smallest eigenvalue {0:.3e}")]
    Coercivity(f64),
    #[error("regime mismatch: {0}")]
    Regime(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
