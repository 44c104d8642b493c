//! Field-point geometry for a unit source segment on the z-axis.
//!
//! All function families in this crate are built around the line segment
//! `{rho = 0, 0 <= z <= R}`. A [`FieldPoint`] caches every coordinate frame
//! those families need:
//!
//! * spherical about the segment base `O` (origin): `r`, `u = cos(theta)`,
//! * spherical about the segment tip `O'` at `z = R`: `r'`, `u'`,
//! * spherical about the mirror point `O''` at `z = -R`: `r''`, `u''`,
//! * prolate spheroidal with foci `O''`/`O'` (centered): `xi`, `eta`,
//! * prolate spheroidal with foci `O`/`O'` (offset): `xibar`, `etabar`.
//!
//! Lengths are stored R-scaled ("hatted"); the handy factorizations
//! `xibar + etabar = 2 r_hat` and `xibar - etabar = 2 rp_hat` are used
//! throughout. Difference quantities that suffer catastrophic cancellation
//! near the segment or the axis (`xibar - 1`, `1 -/+ etabar`, `1 -/+ u`) have
//! dedicated accessors built from `rho^2 / (a + b)` identities.

use crate::error::{EvalError, Result};

/// Expansion centre selector for the spherical frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Segment base (origin).
    O,
    /// Segment tip at `z = R`.
    OPrime,
    /// Mirror point at `z = -R`.
    ODoublePrime,
}

/// Focal-segment selector for prolate spheroidal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Focal {
    /// Foci at `z = -R` and `z = +R`.
    Centered,
    /// Foci at `z = 0` and `z = +R`.
    Offset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub rho: f64,
    pub z: f64,
    pub phi: f64,
    /// Segment length R (also the focal scale).
    pub scale: f64,

    // R-scaled cylindrical coordinates.
    pub rho_h: f64,
    pub z_h: f64,

    // Spherical frames (R-scaled radii, u = cos theta).
    pub r_h: f64,
    pub u: f64,
    pub rp_h: f64,
    pub up: f64,
    pub rpp_h: f64,
    pub upp: f64,

    // Prolate spheroidal coordinates.
    pub xi: f64,
    pub eta: f64,
    pub xibar: f64,
    pub etabar: f64,
}

impl FieldPoint {
    /// Construct from cylindrical coordinates. Rejects non-finite input,
    /// negative `rho`, and non-positive `scale`.
    pub fn new(rho: f64, z: f64, phi: f64, scale: f64) -> Result<FieldPoint> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(EvalError::NonPositiveScale(scale));
        }
        if !rho.is_finite() || !z.is_finite() || !phi.is_finite() {
            return Err(EvalError::NonFiniteCoordinate);
        }
        if rho < 0.0 {
            return Err(EvalError::NegativeRho(rho));
        }

        let rho_h = rho / scale;
        let z_h = z / scale;

        let r_h = rho_h.hypot(z_h);
        let rp_h = rho_h.hypot(z_h - 1.0);
        let rpp_h = rho_h.hypot(z_h + 1.0);

        let u = if r_h > 0.0 { z_h / r_h } else { 1.0 };
        let up = if rp_h > 0.0 { (z_h - 1.0) / rp_h } else { 1.0 };
        let upp = if rpp_h > 0.0 { (z_h + 1.0) / rpp_h } else { 1.0 };

        let xi = 0.5 * (rpp_h + rp_h);
        // eta = (r'' - r')/2; the difference of hypots cancels, but
        // r''^2 - r'^2 = 4 z_h gives an exact quotient form.
        let eta = if xi > 0.0 { z_h / xi } else { 0.0 };

        let xibar = r_h + rp_h;
        // Same trick: r^2 - r'^2 = 2 z_h - 1.
        let etabar = if xibar > 0.0 {
            (2.0 * z_h - 1.0) / xibar
        } else {
            0.0
        };

        Ok(FieldPoint {
            rho,
            z,
            phi,
            scale,
            rho_h,
            z_h,
            r_h,
            u,
            rp_h,
            up,
            rpp_h,
            upp,
            xi,
            eta,
            xibar,
            etabar,
        })
    }

    /// Construct from offset prolate spheroidal coordinates
    /// (`xibar >= 1`, `|etabar| <= 1`).
    pub fn from_offset_spheroidal(xibar: f64, etabar: f64, phi: f64, scale: f64) -> Result<FieldPoint> {
        if !(xibar.is_finite() && etabar.is_finite()) {
            return Err(EvalError::NonFiniteCoordinate);
        }
        if xibar < 1.0 {
            return Err(EvalError::DomainError(xibar));
        }
        if etabar.abs() > 1.0 {
            return Err(EvalError::DomainError(etabar));
        }
        let z_h = 0.5 * (xibar * etabar + 1.0);
        let rho_h = 0.5 * ((xibar * xibar - 1.0) * (1.0 - etabar * etabar)).max(0.0).sqrt();
        FieldPoint::new(rho_h * scale, z_h * scale, phi, scale)
    }

    /// Construct from centered prolate spheroidal coordinates
    /// (`xi >= 1`, `|eta| <= 1`).
    pub fn from_centered_spheroidal(xi: f64, eta: f64, phi: f64, scale: f64) -> Result<FieldPoint> {
        if !(xi.is_finite() && eta.is_finite()) {
            return Err(EvalError::NonFiniteCoordinate);
        }
        if xi < 1.0 {
            return Err(EvalError::DomainError(xi));
        }
        if eta.abs() > 1.0 {
            return Err(EvalError::DomainError(eta));
        }
        let z_h = xi * eta;
        let rho_h = ((xi * xi - 1.0) * (1.0 - eta * eta)).max(0.0).sqrt();
        FieldPoint::new(rho_h * scale, z_h * scale, phi, scale)
    }

    /// Same point with a different z (used by the shifted-argument relations).
    pub fn with_z(&self, z: f64) -> Result<FieldPoint> {
        FieldPoint::new(self.rho, z, self.phi, self.scale)
    }

    /// Unscaled distance from the point to the source segment
    /// `{rho = 0, 0 <= z <= R}`.
    pub fn singular_distance(&self) -> f64 {
        let d_h = if self.z_h < 0.0 {
            self.r_h
        } else if self.z_h > 1.0 {
            self.rp_h
        } else {
            self.rho_h
        };
        d_h * self.scale
    }

    pub fn r_hat(&self, frame: Frame) -> f64 {
        match frame {
            Frame::O => self.r_h,
            Frame::OPrime => self.rp_h,
            Frame::ODoublePrime => self.rpp_h,
        }
    }

    pub fn cos_theta(&self, frame: Frame) -> f64 {
        match frame {
            Frame::O => self.u,
            Frame::OPrime => self.up,
            Frame::ODoublePrime => self.upp,
        }
    }

    pub fn sin_theta(&self, frame: Frame) -> f64 {
        let r = self.r_hat(frame);
        if r > 0.0 {
            self.rho_h / r
        } else {
            0.0
        }
    }

    fn frame_z(&self, frame: Frame) -> f64 {
        match frame {
            Frame::O => self.z_h,
            Frame::OPrime => self.z_h - 1.0,
            Frame::ODoublePrime => self.z_h + 1.0,
        }
    }

    /// `1 - u` for the given frame without cancellation as `u -> 1`.
    pub fn one_minus_u(&self, frame: Frame) -> f64 {
        let r = self.r_hat(frame);
        let zf = self.frame_z(frame);
        if zf >= 0.0 {
            self.rho_h * self.rho_h / (r * (r + zf))
        } else {
            (r - zf) / r
        }
    }

    /// `atanh(u)` for the given frame, from the stable `1 -+ u` factors.
    /// Direct `u.atanh()` amplifies the rounding of `u` by `1/(1-u^2)`,
    /// which costs half the significant digits near the axis; this form
    /// keeps full relative accuracy there.
    pub fn atanh_u(&self, frame: Frame) -> f64 {
        0.5 * (self.one_plus_u(frame) / self.one_minus_u(frame)).ln()
    }

    /// `1 + u` for the given frame without cancellation as `u -> -1`.
    pub fn one_plus_u(&self, frame: Frame) -> f64 {
        let r = self.r_hat(frame);
        let zf = self.frame_z(frame);
        if zf <= 0.0 {
            self.rho_h * self.rho_h / (r * (r - zf))
        } else {
            (r + zf) / r
        }
    }

    /// `xibar - 1`, exact near the segment where `r + r' -> R`.
    pub fn xibar_minus_1(&self) -> f64 {
        let rr = self.rho_h * self.rho_h;
        let z = self.z_h;
        if z < 0.0 {
            -2.0 * z + rr / (self.r_h - z) + rr / (self.rp_h + 1.0 - z)
        } else if z <= 1.0 {
            rr / (self.r_h + z) + rr / (self.rp_h + 1.0 - z)
        } else {
            2.0 * (z - 1.0) + rr / (self.r_h + z) + rr / (self.rp_h + z - 1.0)
        }
    }

    /// `1 - etabar`, exact near the positive-z part of the axis.
    pub fn one_minus_etabar(&self) -> f64 {
        let rr = self.rho_h * self.rho_h;
        let z = self.z_h;
        let num = if z >= 1.0 {
            rr / (self.r_h + z) + rr / (self.rp_h + z - 1.0)
        } else if z >= 0.0 {
            rr / (self.r_h + z) + (self.rp_h + 1.0 - z)
        } else {
            (self.r_h - z) + (self.rp_h + 1.0 - z)
        };
        num / self.xibar
    }

    /// `1 + etabar`, exact near the negative-z part of the axis.
    pub fn one_plus_etabar(&self) -> f64 {
        let rr = self.rho_h * self.rho_h;
        let z = self.z_h;
        let num = if z <= 0.0 {
            rr / (self.r_h - z) + rr / (self.rp_h + 1.0 - z)
        } else if z <= 1.0 {
            (self.r_h + z) + rr / (self.rp_h + 1.0 - z)
        } else {
            (self.r_h + z) + (self.rp_h + z - 1.0)
        };
        num / self.xibar
    }

    /// `xi - 1` for the centered frame, exact near the focal segment.
    pub fn xi_minus_1(&self) -> f64 {
        let rr = self.rho_h * self.rho_h;
        let z = self.z_h;
        let half = 0.5;
        if z < -1.0 {
            (-z - 1.0) + half * (rr / (self.rpp_h - z - 1.0) + rr / (self.rp_h + 1.0 - z))
        } else if z <= 1.0 {
            half * (rr / (self.rpp_h + z + 1.0) + rr / (self.rp_h + 1.0 - z))
        } else {
            (z - 1.0) + half * (rr / (self.rpp_h + z + 1.0) + rr / (self.rp_h + z - 1.0))
        }
    }

    /// `xibar^2 - 1` via the stable difference.
    pub fn xibar_sq_minus_1(&self) -> f64 {
        self.xibar_minus_1() * (self.xibar + 1.0)
    }

    /// `1 - etabar^2` via the stable differences.
    pub fn one_minus_etabar_sq(&self) -> f64 {
        self.one_minus_etabar() * self.one_plus_etabar()
    }
}
