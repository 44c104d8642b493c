use thiserror::Error;

/// Everything that can go wrong when constructing points or evaluating any of
/// the function families. Domain violations are reported eagerly so callers
/// never receive a silently meaningless number.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("segment scale R must be positive and finite, got {0}")]
    NonPositiveScale(f64),

    #[error("cylindrical radius rho must be >= 0 and finite, got {0}")]
    NegativeRho(f64),

    #[error("coordinate is not finite")]
    NonFiniteCoordinate,

    #[error("degree n={n} is not valid for this family (order m={m})")]
    UnsupportedIndex { n: i32, m: i32 },

    #[error("argument x={0} outside the domain of this evaluation regime")]
    DomainError(f64),

    #[error("Legendre argument x={0} sits on a singular point (|x| = 1)")]
    SingularArgument(f64),

    #[error("evaluation point is on the singular line segment (distance {distance:.3e} < tube radius {tube:.3e})")]
    SingularRegion { distance: f64, tube: f64 },

    #[error("evaluation point is at the expansion origin")]
    OriginSingularity,

    #[error("second-kind harmonics diverge on the z-axis (|u| = 1)")]
    AxisSingularity,

    #[error("spheroidal radial coordinate xi={0} is on the focal segment (xi <= 1)")]
    FocalSegmentSingularity(f64),

    #[error("series diverges in this region ({0})")]
    DivergentRegion(String),

    #[error("series/recurrence failed to converge after {terms} terms (best value {partial:.6e}, est. error {est_error:.3e})")]
    NonConvergence {
        partial: f64,
        est_error: f64,
        terms: u32,
    },

    #[error("method {method} is not applicable at this point ({reason})")]
    RegionViolation { method: String, reason: String },

    #[error("quadrature did not reach tolerance {tol:.3e} after {panels} panels (best {value:.6e} +/- {est_error:.3e})")]
    QuadNoConvergence {
        value: f64,
        est_error: f64,
        tol: f64,
        panels: u32,
    },

    #[error("analytic tail of the regularized integral cannot be summed below tolerance here")]
    TailTooLarge,

    #[error("series tail estimate {est_error:.3e} still above tolerance at the term cap k_max={k_max}; increase k_max or move the point away from the focal segment")]
    SlowConvergence { est_error: f64, k_max: i32 },
}

pub type Result<T> = std::result::Result<T, EvalError>;
