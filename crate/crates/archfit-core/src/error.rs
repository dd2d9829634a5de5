//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by mesh, model and fitting operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two consecutive ring centroids coincide or a ring is collapsed.
    DegenerateMesh(String),
    /// A contour has (near-)zero perimeter.
    DegenerateContour,
    /// A slicing plane does not intersect the mesh surface.
    NoIntersection,
    /// A slicing plane cuts the surface in more than one closed loop.
    MultipleLoops(usize),
    /// Mesh topologies differ where identical topology is required.
    TopologyMismatch,
    /// The training set has fewer independent directions than requested.
    RankDeficient { requested: usize, usable: usize },
    /// Too few contours for spline interpolation; use the surrogate arc.
    TooFewSlices { got: usize, need: usize },
    /// Loss or gradient became NaN/Inf during optimization.
    NonFinite { epoch: usize, frame: usize },
    /// Voxel grids differ where identical grids are required.
    GridMismatch,
    /// A point-set metric was called with an empty set.
    EmptySet,
    /// The centerline has no interior height maximum.
    NoApex,
    /// An arclength interval maps to no ring.
    EmptyRegion,
    /// The centerline is too short for the requested station layout.
    TooShort { length_mm: f64, required_mm: f64 },
    /// First and last contour centroids coincide; no surrogate arc exists.
    CoincidentCenters,
    /// Generated tube self-intersects for the given parameters.
    SelfIntersection(String),
    /// End-ring capping failed; the surface cannot be made watertight.
    OpenSurface,
    /// A parameter is outside its documented domain.
    InvalidParameter(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DegenerateMesh(what) => write!(f, "degenerate mesh: {what}"),
            Error::DegenerateContour => write!(f, "contour perimeter is zero"),
            Error::NoIntersection => write!(f, "plane does not intersect the mesh"),
            Error::MultipleLoops(n) => {
                write!(f, "plane cuts the surface in {n} closed loops, expected 1")
            }
            Error::TopologyMismatch => write!(f, "mesh topologies differ"),
            Error::RankDeficient { requested, usable } => write!(
                f,
                "rank-deficient training set: requested {requested} modes, {usable} usable"
            ),
            Error::TooFewSlices { got, need } => {
                write!(f, "{got} contours, {need} needed for spline interpolation")
            }
            Error::NonFinite { epoch, frame } => {
                write!(f, "non-finite loss/gradient at frame {frame}, epoch {epoch}")
            }
            Error::GridMismatch => write!(f, "voxel grids differ"),
            Error::EmptySet => write!(f, "empty point set"),
            Error::NoApex => write!(f, "centerline height is monotone, no apex"),
            Error::EmptyRegion => write!(f, "arclength interval contains no ring"),
            Error::TooShort { length_mm, required_mm } => write!(
                f,
                "centerline length {length_mm:.1} mm below required {required_mm:.1} mm"
            ),
            Error::CoincidentCenters => write!(f, "end contour centroids coincide"),
            Error::SelfIntersection(what) => write!(f, "self-intersecting tube: {what}"),
            Error::OpenSurface => write!(f, "end-ring capping failed"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
