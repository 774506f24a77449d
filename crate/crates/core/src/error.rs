use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polytope is not full-dimensional")]
    NotFullDimensional,

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("{weight} weight cannot be evaluated on a {domain} grid")]
    WrongDomainKind {
        weight: &'static str,
        domain: &'static str,
    },

    #[error("grid needs at least {needed} nodes per axis, found {found}")]
    GridTooSmall { needed: usize, found: usize },

    #[error(
        "quadrature did not converge: achieved relative agreement {achieved:e}, requested {requested:e}"
    )]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("Gram not PD at working precision: {0}")]
    GramNotPositiveDefinite(String),

    #[error("v-box too narrow: {0}; widen the box")]
    BoxTooNarrow(String),

    #[error("duplicate abscissa at index {0}")]
    DuplicateAbscissa(usize),

    #[error("abscissae must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),

    #[error("obstacle solver did not converge after {iterations} sweeps (last update {last_update:e})")]
    NotConverged {
        iterations: usize,
        last_update: f64,
        history: Vec<f64>,
    },

    #[error("boundary data exceeds the obstacle at boundary node {0}")]
    BoundaryAboveObstacle(usize),

    #[error("reference Hessian is degenerate at node {0}")]
    DegenerateReference(usize),

    #[error("fit window touches the contact-set boundary at node {0}")]
    WindowTouchesBoundary(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
