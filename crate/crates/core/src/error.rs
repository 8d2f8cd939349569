use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Quadrature requested above the tabulated range.
    UnsupportedDegree(usize),
    /// Degenerate or inverted element.
    Geometry { element: usize, detail: String },
    /// Boundary specification that the requested space cannot realize.
    IncompatibleBc(String),
    /// Element Gram matrix lost positive definiteness during factorization.
    SingularGram { element: usize },
    /// Global system could not be factorized or iterated to tolerance.
    Solver(String),
    /// Invalid problem or run configuration.
    Config(String),
    /// Inputs that refer to different meshes or sizes.
    Mismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsupportedDegree(d) => write!(f, "quadrature degree {d} is not supported (max 20)"),
            Error::Geometry { element, detail } => write!(f, "degenerate element {element}: {detail}"),
            Error::IncompatibleBc(msg) => write!(f, "boundary conditions incompatible with space: {msg}"),
            Error::SingularGram { element } => write!(f, "element Gram matrix of element {element} is singular"),
            Error::Solver(msg) => write!(f, "solver failure: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Mismatch(msg) => write!(f, "mismatched inputs: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
