//! Harmonic potentials of finite line sources ("logopoles") and the
//! spherical / spheroidal harmonic families they connect to.
//!
//! The central family `L_n^m` is the potential of a line source of density
//! `v^{n+m}` on the segment `{rho = 0, 0 <= z <= R}`, normalized so each
//! member is harmonic away from the segment and reduces to familiar closed
//! forms at low index. The crate evaluates
//!
//! * `L_n^m` everywhere off the segment, by automatic selection among series,
//!   recurrence, closed-form, and reflection routes (module [`logopole`]),
//! * Legendre functions of both kinds in all index regimes, without the
//!   Condon-Shortley phase (module [`legendre`]),
//! * solid spherical harmonics of both kinds and prolate spheroidal
//!   harmonics in centered and offset frames (module [`harmonics`]),
//! * cross-family identities: finite expansions of spheroidal harmonics in
//!   logopoles and in second-kind solid harmonics, translation identities,
//!   expansion coefficients with several independent evaluation routes
//!   (module [`relations`]),
//! * slow adaptive-quadrature reference values for everything above
//!   (module [`oracle`]).
//!
//! Conventions: lengths are scaled by the segment length `R` ("hatted"
//! coordinates); `atanh` is used instead of logarithm ratios; angular
//! factors are `e^{i m phi}` with no Condon-Shortley phase anywhere.

pub mod cli;
pub mod coords;
pub mod error;
pub mod eval;
pub mod factorial;
pub mod grid;
pub mod legendre;
pub mod harmonics;
pub mod logopoles;
pub mod oracle;
pub mod relations;

pub use coords::{FieldPoint, Frame};
pub use error::{EvalError, Result};
pub use eval::{EvalOptions, EvalResult, MethodPolicy, Route};
pub use grid::{AxisSpec, GridFamily, GridSpec, Transform};
pub use logopoles::{logopole, logopole_with, Family, LogopoleSpec};
pub use relations::{
    beta_coefficients, centred_pssh_from_logopoles, logopole_from_pssh_series,
    pssh_derivative_series, pssh_offset_from_logopoles, BetaRoute, CoeffFamily,
    CoeffStability, DiffOperator, ExpansionCoeffs,
};
