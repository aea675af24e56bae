use alloc::vec::Vec;
use core::fmt;

/// Failure modes shared by every module of the crate.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// The e0 coefficient of a conformal point is (numerically) zero.
    DegeneratePoint,
    /// `X * reverse(X)` has a non-scalar part above tolerance.
    NonScalarNorm { residual: f64 },
    /// `X * reverse(X)` is (numerically) zero.
    NullMultivector,
    /// Rotor logarithm requested on the branch where its direction is undefined.
    RotationSingularity,
    /// A multivector has support outside the requested group.
    NotInGroup { residual: f64 },
    /// Points defining a primitive are coincident, collinear or coplanar.
    DegeneratePrimitive { measure: f64 },
    /// Two normals (or directions) are exactly opposite.
    AntipodalNormals,
    /// Primitive kinds differ where they must agree.
    KindMismatch,
    /// Joint value outside its limits while enforcement is on.
    JointLimit { joint: usize, value: f64 },
    /// Vector or matrix size does not match the system.
    DimensionMismatch { expected: usize, found: usize },
    /// Number of chains not in 1..=4 or unsupported for the kind.
    ChainCount(usize),
    /// Task-space inertia cannot be formed.
    SingularTaskInertia { min_eigenvalue: f64 },
    /// Manipulability inverse requested with a vanishing eigenvalue.
    SingularManipulability { min_eigenvalue: f64 },
    /// Iterative solver stopped without meeting its tolerance.
    NotConverged { best: Vec<f64>, residual: f64, iterations: usize },
    /// Malformed configuration or command.
    Invalid(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DegeneratePoint => write!(f, "degenerate point: zero e0 coefficient"),
            Error::NonScalarNorm { residual } => {
                write!(f, "X*reverse(X) is not scalar (residual {residual:e})")
            }
            Error::NullMultivector => write!(f, "null multivector"),
            Error::RotationSingularity => write!(f, "rotation logarithm is singular"),
            Error::NotInGroup { residual } => {
                write!(f, "multivector is not in the group (residual {residual:e})")
            }
            Error::DegeneratePrimitive { measure } => {
                write!(f, "degenerate primitive (measure {measure:e})")
            }
            Error::AntipodalNormals => write!(f, "antipodal normals"),
            Error::KindMismatch => write!(f, "primitive kinds differ"),
            Error::JointLimit { joint, value } => {
                write!(f, "joint {joint} value {value} outside its limits")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::ChainCount(n) => write!(f, "unsupported number of chains: {n}"),
            Error::SingularTaskInertia { min_eigenvalue } => {
                write!(f, "singular task inertia (min eigenvalue {min_eigenvalue:e})")
            }
            Error::SingularManipulability { min_eigenvalue } => {
                write!(f, "singular manipulability (min eigenvalue {min_eigenvalue:e})")
            }
            Error::NotConverged { residual, iterations, .. } => {
                write!(f, "not converged after {iterations} iterations (residual {residual:e})")
            }
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
