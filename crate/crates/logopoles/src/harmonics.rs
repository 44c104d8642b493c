//! Solid spherical harmonics of both kinds and prolate solid spheroidal
//! harmonics, in every frame the segment geometry uses.
//!
//! Frames: `O` at the lower segment end (origin), `O'` at the upper end
//! (z = R), `O''` at the mirror point (z = -R). The centered spheroidal
//! system has its foci at O'' and O' (focal half-length R); the offset
//! system has them at O and O' (focal half-length R/2).
//!
//! All values factor exactly as (real meridional profile) x `e^{i m phi}`.
//! First-kind Legendre factors are seeded from the exactly-known cylindrical
//! ratio sin(theta) = rho/r rather than from `sqrt(1 - u^2)`, which keeps
//! the axis limit clean.

use num_complex::Complex64;

use crate::coords::{FieldPoint, Frame};
use crate::error::{EvalError, Result};
use crate::eval::{CompensatedSum, EvalResult, Route};
use crate::legendre::{legendre_q, p_array_with_sin, q_cut_array_stable};

/// Which prolate spheroidal system a product harmonic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FocalFrame {
    /// Foci at z = -R and z = +R: coordinates (xi, eta).
    Centered,
    /// Foci at z = 0 and z = +R: coordinates (xibar, etabar).
    Offset,
}

pub(crate) fn phase(m: i32, phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, m as f64 * phi)
}

fn check_order(n: i32, m: i32, min_n: i32) -> Result<()> {
    if m < 0 || n < min_n {
        Err(EvalError::UnsupportedIndex { n, m })
    } else {
        Ok(())
    }
}

/// Exterior solid spherical harmonic `r^{-n-1} P_n^m(u) e^{im phi}` in the
/// requested frame (lengths in units of R). Requires n >= m >= 0.
pub fn ssh_exterior(n: i32, m: i32, p: &FieldPoint, frame: Frame) -> Result<EvalResult> {
    check_order(n, m, m)?;
    let r = p.r_hat(frame);
    if r == 0.0 {
        return Err(EvalError::OriginSingularity);
    }
    let u = p.cos_theta(frame);
    let s = p.sin_theta(frame);
    let pv = p_array_with_sin(m, n, u, s)[n as usize];
    let profile = r.powi(-n - 1) * pv;
    let est = f64::EPSILON * profile.abs() * (n - m + 2) as f64;
    Ok(EvalResult::new(
        profile * phase(m, p.phi),
        Route::ClosedForm,
        est,
        (n - m + 1) as u32,
    ))
}

/// Regular (interior) solid spherical harmonic `r^n P_n^m(u) e^{im phi}`.
pub fn ssh_regular(n: i32, m: i32, p: &FieldPoint, frame: Frame) -> Result<EvalResult> {
    check_order(n, m, m)?;
    let r = p.r_hat(frame);
    let u = if r == 0.0 { 1.0 } else { p.cos_theta(frame) };
    let s = if r == 0.0 { 0.0 } else { p.sin_theta(frame) };
    let pv = p_array_with_sin(m, n, u, s)[n as usize];
    // r = 0 with n = 0 must still give P_0 = 1; powi(0) handles it.
    let profile = r.powi(n) * pv;
    let est = f64::EPSILON * profile.abs() * (n - m + 2) as f64;
    Ok(EvalResult::new(
        profile * phase(m, p.phi),
        Route::ClosedForm,
        est,
        (n - m + 1) as u32,
    ))
}

/// Solid spherical harmonic of the second kind,
/// `r^n Q_n^m(u) e^{im phi}`, degrees n >= -m (the rational band included).
pub fn ssh_second_kind(n: i32, m: i32, p: &FieldPoint, frame: Frame) -> Result<EvalResult> {
    check_order(n, m, -m)?;
    let r = p.r_hat(frame);
    if r == 0.0 {
        return Err(EvalError::OriginSingularity);
    }
    let u = p.cos_theta(frame);
    if u.abs() >= 1.0 || p.sin_theta(frame) == 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let q = legendre_q(n, m, u)?.value;
    let profile = r.powi(n) * q;
    let est = f64::EPSILON * profile.abs() * (n.unsigned_abs() + m.unsigned_abs() + 2) as f64;
    Ok(EvalResult::new(
        profile * phase(m, p.phi),
        Route::ClosedForm,
        est,
        (n + m + 1) as u32,
    ))
}

/// First-kind Legendre factor of a spheroidal product, `P_n^m(eta)`, with
/// the angular sine supplied stably from cylindrical data.
fn p_eta(n: i32, m: i32, eta: f64, sin_eta: f64) -> f64 {
    p_array_with_sin(m, n, eta, sin_eta)[n as usize]
}

/// Prolate solid spheroidal harmonic `Q_n^m(xi) P_n^m(eta) e^{im phi}` in
/// the chosen focal frame. Requires n >= m >= 0 and xi > 1.
pub fn pssh(n: i32, m: i32, p: &FieldPoint, focal: FocalFrame) -> Result<EvalResult> {
    check_order(n, m, m)?;
    let (xi, eta, xi_m1, sin_eta) = match focal {
        FocalFrame::Centered => {
            let xi_m1 = p.xi_minus_1();
            // rho^2 = (xi^2 - 1)(1 - eta^2) with focal half-length 1.
            let s = if xi_m1 > 0.0 {
                p.rho_h / (xi_m1 * (p.xi + 1.0)).sqrt()
            } else {
                0.0
            };
            (p.xi, p.eta, xi_m1, s)
        }
        FocalFrame::Offset => {
            let xi_m1 = p.xibar_minus_1();
            // rho^2 = (1/4)(xibar^2 - 1)(1 - etabar^2): half-length 1/2.
            let s = if xi_m1 > 0.0 {
                2.0 * p.rho_h / p.xibar_sq_minus_1().sqrt()
            } else {
                0.0
            };
            (p.xibar, p.etabar, xi_m1, s)
        }
    };
    if xi_m1 <= 0.0 {
        return Err(EvalError::FocalSegmentSingularity(xi));
    }
    let q = legendre_q(n, m, xi)?.value;
    let pv = p_eta(n, m, eta, sin_eta);
    let profile = q * pv;
    let est = f64::EPSILON * profile.abs() * (n - m + 2) as f64;
    Ok(EvalResult::new(
        profile * phase(m, p.phi),
        Route::ClosedForm,
        est,
        (n - m + 1) as u32,
    ))
}

/// Coefficient stream c_k = (n+k)! / (k! (k+m)! (n-k)!) for k = 0..=n,
/// generated by rational updates (no factorial overflow).
pub(crate) struct FrameSumCoeffs {
    n: i32,
    m: i32,
    k: i32,
    c: f64,
}

impl FrameSumCoeffs {
    pub(crate) fn new(n: i32, m: i32) -> Self {
        // c_0 = n! / (0! m! n!) = 1/m!.
        let c = 1.0 / crate::factorial::factorial(m);
        FrameSumCoeffs { n, m, k: 0, c }
    }
}

impl Iterator for FrameSumCoeffs {
    type Item = (i32, f64);
    fn next(&mut self) -> Option<(i32, f64)> {
        if self.k > self.n {
            return None;
        }
        let out = (self.k, self.c);
        let (n, m, k) = (self.n, self.m, self.k);
        self.c *= ((n + k + 1) as f64 * (n - k) as f64)
            / ((k + 1) as f64 * (k + m + 1) as f64);
        self.k += 1;
        Some(out)
    }
}

/// Centered spheroidal harmonic of the second kind assembled from solid
/// spherical harmonics of the second kind in the two end frames:
///
/// `Q_n^m(xi) P_n^{-m}(eta) = sum_{k=0}^n c_k/2 [ (-1)^{n+k+m} (r''/2)^k
/// Q_k^m(u'') - (-1)^m (r'/2)^k Q_k^m(u') ]`.
///
/// The `(-1)^m` on the primed group comes from reflecting the double-primed
/// expansion through z = 0 (Legendre parity); dropping it breaks every odd
/// order, as direct comparison with the product form shows.
///
/// Each summand diverges on the axis beyond the segment while the assembled
/// value stays finite there, so both groups are accumulated separately in
/// compensated arithmetic and subtracted last; `est_error` reports the
/// cancellation honestly. Note the contract: the result equals
/// `pssh(Centered)` times the order-reflection factor
/// `(-1)^m (n-m)!/(n+m)!`.
pub fn pssh_from_offset_q(n: i32, m: i32, p: &FieldPoint) -> Result<EvalResult> {
    check_order(n, m, m)?;
    if p.rho_h == 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let qpp = q_cut_array_stable(
        m,
        n,
        p.upp,
        p.sin_theta(Frame::ODoublePrime),
        p.atanh_u(Frame::ODoublePrime),
    )?;
    let qp = q_cut_array_stable(
        m,
        n,
        p.up,
        p.sin_theta(Frame::OPrime),
        p.atanh_u(Frame::OPrime),
    )?;
    let half_rpp = 0.5 * p.rpp_h;
    let half_rp = 0.5 * p.rp_h;
    let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mut group_pp = CompensatedSum::new();
    let mut group_p = CompensatedSum::new();
    let mut pow_pp = 1.0f64;
    let mut pow_p = 1.0f64;
    for (k, c) in FrameSumCoeffs::new(n, m) {
        let sign = if (n + k + m) % 2 == 0 { 1.0 } else { -1.0 };
        let idx = (k + m) as usize;
        group_pp.add(0.5 * c * sign * pow_pp * qpp[idx]);
        group_p.add(0.5 * c * sign_m * pow_p * qp[idx]);
        pow_pp *= half_rpp;
        pow_p *= half_rp;
    }
    let profile = group_pp.sum() - group_p.sum();
    let est = group_pp.cancellation_error()
        + group_p.cancellation_error()
        + f64::EPSILON * (group_pp.sum().abs() + group_p.sum().abs());
    Ok(EvalResult::new(
        profile * phase(m, p.phi),
        Route::SecondKindSum,
        est,
        (n + 1) as u32,
    ))
}

/// First-kind analogue used internally by the conversion identities:
/// `P_n^m(xi) P_n^{-m}(eta) = sum_{k=m}^n (-1)^{n+k+m} c_k (r''/2)^k
/// P_k^m(u'')` — a single-frame finite sum with no second-kind factors.
pub fn pp_first_kind_from_double_primed(
    n: i32,
    m: i32,
    p: &FieldPoint,
) -> Result<f64> {
    check_order(n, m, m)?;
    let pk = p_array_with_sin(
        m,
        n,
        p.upp,
        p.sin_theta(Frame::ODoublePrime),
    );
    let half_rpp = 0.5 * p.rpp_h;
    let mut acc = CompensatedSum::new();
    let mut pow_pp = half_rpp.powi(m);
    for (k, c) in FrameSumCoeffs::new(n, m) {
        if k >= m {
            let sign = if (n + k + m) % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(sign * c * pow_pp * pk[k as usize]);
            pow_pp *= half_rpp;
        } else if k == 0 {
            // Power accumulator starts at (r''/2)^m; nothing to add below m.
        }
    }
    Ok(acc.sum())
}

/// Logarithmic-part identity: both sides carry the same `atanh` singular
/// structure, assembled from the two end frames:
/// `P_n^m(xi) Q_0(xi) P_n^{-m}(eta) = sum_{k=m}^n c_k/2 [ (-1)^{n+k+m}
/// (r''/2)^k P_k^m(u'') Q_0(u'') - (-1)^m (r'/2)^k P_k^m(u') Q_0(u') ]`
/// (the primed group carries the same reflection factor `(-1)^m` as in
/// [`pssh_from_offset_q`]).
pub fn pp_log_part_from_offset(n: i32, m: i32, p: &FieldPoint) -> Result<f64> {
    check_order(n, m, m)?;
    if p.rho_h == 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let ppp = p_array_with_sin(m, n, p.upp, p.sin_theta(Frame::ODoublePrime));
    let pp = p_array_with_sin(m, n, p.up, p.sin_theta(Frame::OPrime));
    let q0pp = p.atanh_u(Frame::ODoublePrime);
    let q0p = p.atanh_u(Frame::OPrime);
    let half_rpp = 0.5 * p.rpp_h;
    let half_rp = 0.5 * p.rp_h;
    let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mut group_pp = CompensatedSum::new();
    let mut group_p = CompensatedSum::new();
    let mut pow_pp = half_rpp.powi(m);
    let mut pow_p = half_rp.powi(m);
    for (k, c) in FrameSumCoeffs::new(n, m) {
        if k < m {
            continue;
        }
        let sign = if (n + k + m) % 2 == 0 { 1.0 } else { -1.0 };
        group_pp.add(0.5 * c * sign * pow_pp * ppp[k as usize] * q0pp);
        group_p.add(0.5 * c * sign_m * pow_p * pp[k as usize] * q0p);
        pow_pp *= half_rpp;
        pow_p *= half_rp;
    }
    Ok(group_pp.sum() - group_p.sum())
}

/// Translation of regular solid harmonics between the end frames:
/// `sum_{k=m}^n binom(n+m, k+m) r'^k P_k^m(u') = r^n P_n^m(u)`.
/// Returns the left side; callers compare with [`ssh_regular`] at `O`.
pub fn translated_regular_sum(n: i32, m: i32, p: &FieldPoint) -> Result<f64> {
    check_order(n, m, m)?;
    let pk = p_array_with_sin(m, n, p.up, p.sin_theta(Frame::OPrime));
    let mut acc = CompensatedSum::new();
    // binom(n+m, k+m) via rational updates from k = m.
    let mut b = crate::factorial::binomial(n + m, 2 * m);
    let mut rpow = p.rp_h.powi(m);
    for k in m..=n {
        acc.add(b * rpow * pk[k as usize]);
        b *= (n - k) as f64 / (k + m + 1) as f64;
        rpow *= p.rp_h;
    }
    Ok(acc.sum())
}
