//! Evaluation routes for the segment potentials `L_n^m`: harmonic functions
//! whose only singularity is the axial line segment `{rho = 0, 0 <= z <= R}`.
//!
//! The hatted (R-scaled) normalization is
//!
//! ```text
//! L_n^m = (2m-1)!! rho^m e^{im phi} Int_0^1 v^{n+m} (rho^2 + (z-v)^2)^{-(m+1/2)} dv
//! ```
//!
//! (lengths in units of R). Three index families exist:
//!
//! * **standard** `n >= -m, m >= 0` — the family above;
//! * **negative degree** `m = 0, n < 0` — a distinct definition whose
//!   multipole series starts at `k = |n|` to skip the divergent term;
//! * **reflected order** `m < 0, n >= |m|` — order reflection of the
//!   second-kind finite sum, singular on an unbounded part of the axis.
//!
//! No single evaluation route is numerically trustworthy everywhere, so this
//! module implements them all — series, finite second-kind sums, closed
//! forms, forward/backward degree recurrences, order recurrences — plus a
//! region-aware dispatcher ([`logopole`]) that picks a stable one per point.
//! Every result carries its route tag and an honest absolute error estimate.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::coords::{FieldPoint, Frame};
use crate::error::{EvalError, Result};
use crate::eval::{CompensatedSum, EvalOptions, EvalResult, MethodPolicy, Route};
use crate::factorial::{binomial, double_factorial, factorial_ratio};
use crate::harmonics::{phase, pssh, FocalFrame};
use crate::legendre::{
    p_array_with_sin, q_cut_array_stable, q_minus_m_times_sin_m, w_shifted_array,
};
use crate::oracle::{quad_line_multipole, quad_negative_degree, LineDensity};

const EPS: f64 = f64::EPSILON;

/// Index family, uniquely determined by `(n, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `m >= 0`, `n >= -m`: line density `v^{n+m}` on the segment.
    Standard,
    /// `m = 0`, `n < 0`: multipole-regularized line density `v^n`.
    NegativeDegree,
    /// `m < 0`, `n >= |m|`: order reflection, axis-singular.
    ReflectedOrder,
}

/// Validated index pair for the segment-potential families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogopoleSpec {
    pub n: i32,
    pub m: i32,
}

impl LogopoleSpec {
    /// Accepts exactly the union of the three families:
    /// `n >= -m` (standard / reflected) or `m = 0, n < 0` (negative degree).
    pub fn new(n: i32, m: i32) -> Result<Self> {
        if n >= -m || m == 0 {
            Ok(LogopoleSpec { n, m })
        } else {
            Err(EvalError::UnsupportedIndex { n, m })
        }
    }

    pub fn family(self) -> Family {
        if self.m < 0 {
            Family::ReflectedOrder
        } else if self.n < -self.m {
            // Only reachable with m = 0, n < 0 after validation.
            Family::NegativeDegree
        } else {
            Family::Standard
        }
    }
}

/// Evaluation modes for the lowest-degree potential `L_{-m}^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinusMMode {
    /// Difference of the two frame polynomials: simple but catastrophically
    /// cancelling near the axis for `z < 0` or `z > R`.
    Naive,
    /// Offset-spheroidal double sum with the `rho^m`-governing factor pulled
    /// out; stable in almost all space.
    Stable,
    /// First-order raise in `m` from the base potential; stable for
    /// increasing `m` inside `0 < z < R`.
    Recurrence,
}

/// Direction of the three-term degree recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrenceDirection {
    /// Stable for `r < R`.
    Forward,
    /// Stable for `r > R`; seeded in the large-degree limit and rescaled.
    Backward,
}

/// The two order-raising recurrences (both unstable for increasing `m`;
/// exposed for identity testing and instability demonstrations only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaiseVariant {
    /// `L_n^{m+1}` from `L_n^m` and `L_n^{m-1}` with a `cot(theta)` weight
    /// (requires `m >= 1`).
    Cotangent,
    /// `L_n^{m+1}` from `L_n^m` and `L_{n-1}^m` with a `1/sin(theta)` weight.
    MixedDegree,
}

/// Reject points inside the singularity tube around the source segment.
pub(crate) fn check_tube(p: &FieldPoint, opts: &EvalOptions) -> Result<()> {
    let d = p.singular_distance();
    let tube = opts.tube_frac * p.scale;
    if d < tube {
        Err(EvalError::SingularRegion { distance: d, tube })
    } else {
        Ok(())
    }
}

fn check_standard(spec: LogopoleSpec) -> Result<()> {
    if spec.family() == Family::Standard {
        Ok(())
    } else {
        Err(EvalError::UnsupportedIndex {
            n: spec.n,
            m: spec.m,
        })
    }
}

/// Base potential `L_0` (uniform line charge): `2 Q_0(xibar) =
/// ln((xibar+1)/(xibar-1))`, evaluated with the cancellation-free
/// `xibar - 1`. Finite everywhere off the segment, including the axis.
pub(crate) fn base_l0(p: &FieldPoint) -> f64 {
    ((p.xibar + 1.0) / p.xibar_minus_1()).ln()
}

// ---------------------------------------------------------------------------
// Series routes
// ---------------------------------------------------------------------------

/// Common engine for the three multipole-type series: sums
/// `coef(k) * P_k^m(x) / r^{k+1}` from `k = k0` with per-step rational
/// coefficient updates, a measured-ratio geometric tail bound, and an
/// abs-sum rounding term. `r > 1` is the caller's responsibility.
struct SeriesAccum {
    acc: CompensatedSum,
    last: [f64; 3],
    terms: u32,
}

impl SeriesAccum {
    fn new() -> Self {
        SeriesAccum {
            acc: CompensatedSum::new(),
            last: [f64::INFINITY; 3],
            terms: 0,
        }
    }

    fn push(&mut self, term: f64) {
        self.acc.add(term);
        self.last = [self.last[1], self.last[2], term.abs()];
        self.terms += 1;
    }

    /// True once the last three terms are all below `tol` times the
    /// accumulated value (three in a row guards parity-zero terms).
    fn converged(&self, tol: f64) -> bool {
        let scale = self.acc.sum().abs().max(f64::MIN_POSITIVE);
        self.last.iter().all(|t| *t <= tol * scale)
    }

    /// Tail estimate from the measured decay ratio, clamped to the
    /// asymptotic ratio `q_min` from below and 0.999 from above. In the
    /// oscillatory regime a single term can sit near a Legendre zero, so the
    /// ratio is the two-step geometric mean and the launch amplitude is the
    /// largest recent term projected forward — the newest term alone would
    /// understate the tail by orders of magnitude whenever the stop lands on
    /// a near-zero.
    fn tail_est(&self, q_min: f64) -> f64 {
        let measured = if self.last[0] > 0.0 && self.last[0].is_finite() && self.last[2] > 0.0
        {
            (self.last[2] / self.last[0]).sqrt()
        } else {
            q_min
        };
        let q = measured.max(q_min).min(0.999);
        let amp = self.last[2]
            .max(q * self.last[1].min(f64::MAX))
            .max(q * q * self.last[0].min(f64::MAX));
        amp * q / (1.0 - q)
    }

    fn est_error(&self, q_min: f64) -> f64 {
        self.tail_est(q_min) + self.acc.cancellation_error()
    }
}

/// Iterator over `T_k = P_k^m(x) / r^{k+1}` for `k = m, m+1, ...` with the
/// radial decay folded into the degree recurrence (no overflow for large k).
struct ScaledExteriorHarmonics {
    x_over_r: f64,
    inv_r2: f64,
    m: i32,
    k: i32,
    prev: f64,
    cur: f64,
}

impl ScaledExteriorHarmonics {
    /// `s` is the exact `sin(theta) = rho/r` for the frame.
    fn new(m: i32, x: f64, s: f64, r: f64) -> Self {
        // T_m = (2m-1)!! s^m / r^{m+1}
        let mut t = double_factorial(2 * m - 1) / r;
        let sr = s / r;
        for _ in 0..m {
            t *= sr;
        }
        ScaledExteriorHarmonics {
            x_over_r: x / r,
            inv_r2: 1.0 / (r * r),
            m,
            k: m,
            prev: 0.0,
            cur: t,
        }
    }
}

impl Iterator for ScaledExteriorHarmonics {
    type Item = (i32, f64);

    fn next(&mut self) -> Option<(i32, f64)> {
        let out = (self.k, self.cur);
        let k = self.k;
        let next = if k == self.m {
            (2 * k + 1) as f64 * self.x_over_r * self.cur
        } else {
            ((2 * k + 1) as f64 * self.x_over_r * self.cur
                - (k + self.m) as f64 * self.inv_r2 * self.prev)
                / (k - self.m + 1) as f64
        };
        self.prev = self.cur;
        self.cur = next;
        self.k += 1;
        Some(out)
    }
}

/// Multipole series about the segment base: `L_n^m = sum_{k>=m} S_k^m/(n+k+1)`
/// for `r > R`. Stable there for any index, including near the axis.
pub fn logopole_series_multipole(
    spec: LogopoleSpec,
    p: &FieldPoint,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    check_standard(spec)?;
    check_tube(p, opts)?;
    let (n, m) = (spec.n, spec.m);
    if p.r_h <= 1.0 {
        return Err(EvalError::DivergentRegion(format!(
            "multipole series needs r > R, got r = {:.6} R",
            p.r_h
        )));
    }
    let mut sum = SeriesAccum::new();
    let harmonics = ScaledExteriorHarmonics::new(m, p.u, p.sin_theta(Frame::O), p.r_h);
    for (k, t) in harmonics {
        sum.push(t / (n + k + 1) as f64);
        if sum.terms >= 4 && sum.converged(opts.tol) {
            let v = sum.acc.sum();
            return Ok(EvalResult::new(
                v * phase(m, p.phi),
                Route::MultipoleSeries,
                sum.est_error(1.0 / p.r_h),
                sum.terms,
            ));
        }
        if sum.terms >= opts.term_cap {
            return Err(EvalError::NonConvergence {
                partial: sum.acc.sum(),
                est_error: sum.est_error(1.0 / p.r_h),
                terms: sum.terms,
            });
        }
    }
    unreachable!("series iterator is infinite");
}

/// Offset multipole series about the segment tip:
/// `L_n^m = sum_{k>=m} (-1)^{k+m} (n+m)!(k-m)!/(n+k+1)! S_k^{m'}` for
/// `r' > R`. The alternating sign cancels the parity of `P_k^m(u')` near the
/// negative axis, so this route is also stable near the axis below the
/// segment where the second-kind sum is not.
pub fn logopole_offset_series(
    spec: LogopoleSpec,
    p: &FieldPoint,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    check_standard(spec)?;
    check_tube(p, opts)?;
    let (n, m) = (spec.n, spec.m);
    if p.rp_h <= 1.0 {
        return Err(EvalError::DivergentRegion(format!(
            "offset series needs r' > R, got r' = {:.6} R",
            p.rp_h
        )));
    }
    let mut sum = SeriesAccum::new();
    let harmonics = ScaledExteriorHarmonics::new(m, p.up, p.sin_theta(Frame::OPrime), p.rp_h);
    // c_k = (n+m)!(k-m)!/(n+k+1)!, seeded at k = m, ratio (k+1-m)/(n+k+2).
    let mut c = 1.0 / (n + m + 1) as f64;
    let mut sign = 1.0f64;
    for (k, t) in harmonics {
        sum.push(sign * c * t);
        c *= (k + 1 - m) as f64 / (n + k + 2) as f64;
        sign = -sign;
        if sum.terms >= 4 && sum.converged(opts.tol) {
            let v = sum.acc.sum();
            return Ok(EvalResult::new(
                v * phase(m, p.phi),
                Route::OffsetSeries,
                sum.est_error(1.0 / p.rp_h),
                sum.terms,
            ));
        }
        if sum.terms >= opts.term_cap {
            return Err(EvalError::NonConvergence {
                partial: sum.acc.sum(),
                est_error: sum.est_error(1.0 / p.rp_h),
                terms: sum.terms,
            });
        }
    }
    unreachable!("series iterator is infinite");
}

/// Finite second-kind sum — the analytic continuation of the multipole
/// series, valid in all space off the segment:
///
/// `L_n^m = r^n Q_n^m(u) e^{im phi} - sum_{k=-m}^n binom(n+m, k+m) r'^k
/// Q_k^m(u') e^{im phi}`.
///
/// Each term is singular on the whole axis; the sum cancels everything off
/// the segment, so precision degrades near the axis for `z < 0` or `z > R`
/// (the estimate reports that honestly). Degrees below `m` use the rational
/// band continuation of `Q` on the cut.
pub fn logopole_sum_second_kind(
    spec: LogopoleSpec,
    p: &FieldPoint,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    check_standard(spec)?;
    check_tube(p, opts)?;
    let (n, m) = (spec.n, spec.m);
    if p.rho_h == 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let q_o = q_cut_array_stable(m, n, p.u, p.sin_theta(Frame::O), p.atanh_u(Frame::O))?;
    let q_p = q_cut_array_stable(m, n, p.up, p.sin_theta(Frame::OPrime), p.atanh_u(Frame::OPrime))?;
    let lead = p.r_h.powi(n) * q_o[(n + m) as usize];
    let mut sum = CompensatedSum::new();
    let mut b = 1.0f64; // binom(n+m, k+m) at k = -m
    let mut pow = p.rp_h.powi(-m);
    for k in -m..=n {
        sum.add(b * pow * q_p[(k + m) as usize]);
        b *= (n - k) as f64 / (k + m + 1) as f64;
        pow *= p.rp_h;
    }
    let value = lead - sum.sum();
    let est = 4.0 * (sum.cancellation_error() + EPS * (lead.abs() + value.abs()));
    Ok(EvalResult::new(
        value * phase(m, p.phi),
        Route::SecondKindSum,
        est,
        (n + m + 2) as u32,
    ))
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Indices with a tabulated closed form in offset spheroidal coordinates.
pub const CLOSED_FORM_TABLE: [(i32, i32); 7] =
    [(0, 0), (-1, 1), (0, 1), (1, 1), (-2, 2), (0, 2), (1, 2)];

/// Closed-form evaluation for the tabulated low-order indices, written in
/// cancellation-free factors (`xibar^2 - 1`, `1 - etabar^2`, `xibar - etabar
/// = 2 r'/R`, `xibar + etabar = 2 r/R`). Errors with `UnsupportedIndex` for
/// indices outside [`CLOSED_FORM_TABLE`].
pub fn logopole_closed_low_order(
    spec: LogopoleSpec,
    p: &FieldPoint,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    check_tube(p, opts)?;
    let (n, m) = (spec.n, spec.m);
    let x2 = p.xibar_sq_minus_1();
    let (rho, r, rp) = (p.rho_h, p.r_h, p.rp_h);
    let (xb, eb) = (p.xibar, p.etabar);
    let (value, est) = match (n, m) {
        (0, 0) => {
            let v = base_l0(p);
            (Complex64::new(v, 0.0), 4.0 * EPS * v.abs())
        }
        (-1, 1) => {
            let v = 2.0 * rho * (r + rp) / (x2 * r * rp);
            (v * phase(1, p.phi), 6.0 * EPS * v.abs())
        }
        (0, 1) => {
            let v = 2.0 * rho / (rp * x2);
            (v * phase(1, p.phi), 6.0 * EPS * v.abs())
        }
        (1, 1) => {
            // L_1^1 = L_0^1 + Q_1^1(xibar) P_1^1(etabar) e^{i phi}
            let l01 = 2.0 * rho / (rp * x2);
            let q11 = pssh(1, 1, p, FocalFrame::Offset)?;
            (
                l01 * phase(1, p.phi) + q11.value,
                6.0 * EPS * l01.abs() + q11.est_error,
            )
        }
        (-2, 2) => {
            let e2 = p.one_minus_etabar_sq();
            let b = 3.0 * eb * eb * xb + e2 * xb.powi(3) - 3.0 * xb.powi(5);
            let b_abs = 3.0 * eb * eb * xb + e2 * xb.powi(3) + 3.0 * xb.powi(5);
            let den = 2.0 * x2 * x2 * r.powi(3) * rp.powi(3);
            let v = -rho * rho * b / den;
            let est = 4.0 * EPS * (rho * rho * b_abs / den + v.abs());
            (v * phase(2, p.phi), est)
        }
        (0, 2) => {
            let b = 2.0 * xb * xb - 1.0 - xb * eb;
            let b_abs = 2.0 * xb * xb + 1.0 + xb * eb.abs();
            let den = rp.powi(3) * x2 * x2;
            let v = 2.0 * rho * rho * b / den;
            let est = 4.0 * EPS * (2.0 * rho * rho * b_abs / den + v.abs());
            (v * phase(2, p.phi), est)
        }
        (1, 2) => {
            let b = 3.0 * xb * xb - 2.0 - eb * eb;
            let v = rho * rho * b / (rp.powi(3) * x2 * x2);
            (v * phase(2, p.phi), 8.0 * EPS * v.abs())
        }
        _ => return Err(EvalError::UnsupportedIndex { n, m }),
    };
    Ok(EvalResult::new(value, Route::ClosedForm, est, 1))
}

// ---------------------------------------------------------------------------
// Lowest degree n = -m
// ---------------------------------------------------------------------------

/// Naive lowest-degree profile (value, est) at `phi = 0`:
/// difference of the two frame polynomials over `rho^m`.
fn naive_minus_m_profile(m: i32, p: &FieldPoint) -> Result<(f64, f64)> {
    if p.rho_h == 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let a = q_minus_m_times_sin_m(m, p.u);
    let b = q_minus_m_times_sin_m(m, p.up);
    let rhom = p.rho_h.powi(m);
    let v = (a - b) / rhom;
    let est = 2.0 * EPS * ((a.abs() + b.abs()) / rhom + v.abs());
    Ok((v, est))
}

/// Cancellation-free lowest-degree profile (value, est) at `phi = 0`.
///
/// The `rho^m` behaviour near the axis and the `rho^-m` divergence near the
/// segment are both carried by a single explicit factor `(2 rho / R
/// (xibar^2-1))^m`; the remaining double sum has only mild cancellation.
/// Evaluated in log-magnitude space so no intermediate power over- or
/// underflows for any order or position.
fn stable_minus_m_profile(m: i32, p: &FieldPoint) -> (f64, f64) {
    debug_assert!(m >= 1);
    if p.rho_h == 0.0 {
        // The factored-out governing term is rho^m: exactly zero on the axis.
        return (0.0, 0.0);
    }
    let x2 = p.xibar_sq_minus_1();
    let ln_xi = p.xibar.ln();
    // xibar^4 - etabar^2 = (xibar^2 - etabar)(xibar^2 + etabar), both > 0.
    let ln_b = (x2 + p.one_minus_etabar()).ln() + (p.xibar * p.xibar + p.etabar).ln();
    // xibar^2 - etabar^2 = 4 r r' / R^2, exactly.
    let ln_a = (4.0f64).ln() + p.r_h.ln() + p.rp_h.ln();
    let ln_eta = if p.etabar == 0.0 {
        f64::NEG_INFINITY
    } else {
        (p.etabar.abs() * x2).ln()
    };

    let mut entries: Vec<(f64, f64)> = Vec::with_capacity((m * (m + 1) / 2) as usize);
    let mut max_log = f64::NEG_INFINITY;
    for q in 0..m {
        let binq = binomial(m - 1, q) / (2 * q + 1) as f64;
        for pp in 0..=q {
            if pp > 0 && p.etabar == 0.0 {
                continue; // (etabar (xibar^2-1))^{2p} = 0
            }
            let coef = binq * binomial(q, pp) * double_factorial(2 * m + 2 * pp - 2 * q - 3)
                / (double_factorial(2 * pp - 1) * double_factorial(2 * m - 2 * q - 3));
            let mut lg = (2 * q + 1) as f64 * ln_xi
                + (m - 2 * q - 1) as f64 * ln_b
                + (2 * q - 2 * pp - (2 * m - 1)) as f64 * ln_a
                + coef.ln();
            if pp > 0 {
                lg += (2 * pp) as f64 * ln_eta;
            }
            let sign = if (pp + q) % 2 == 0 { 1.0 } else { -1.0 };
            entries.push((sign, lg));
            if lg > max_log {
                max_log = lg;
            }
        }
    }
    let mut sum = CompensatedSum::new();
    for (sign, lg) in &entries {
        sum.add(sign * (lg - max_log).exp());
    }
    let s = sum.sum();
    let ln_pre = (m + 1) as f64 * LN_2
        + double_factorial(2 * m - 1).ln()
        + m as f64 * ((2.0 * p.rho_h).ln() - x2.ln());
    let scale = (ln_pre + max_log).exp();
    let value = s.signum() * (ln_pre + max_log + s.abs().ln()).exp();
    let est = scale * sum.cancellation_error()
        + value.abs() * EPS * (1.0 + ln_pre.abs() + max_log.abs());
    (value, est)
}

/// Region-appropriate lowest-degree profile: the naive difference is stable
/// between the segment planes (both polynomials have the same sign and add),
/// the factored form everywhere else.
fn minus_m_region_profile(m: i32, p: &FieldPoint) -> Result<(f64, f64)> {
    if p.z_h > 0.0 && p.z_h < 1.0 {
        naive_minus_m_profile(m, p)
    } else {
        Ok(stable_minus_m_profile(m, p))
    }
}

/// First-order raise marching `L_{-j-1}^{j+1}` from `L_{-j}^j`; each step adds
/// an inhomogeneous term of the same sign in `0 < z < R`, so the march is
/// stable there for increasing order (and only there).
fn recurrence_minus_m_profile(
    m: i32,
    p: &FieldPoint,
) -> Result<(f64, f64)> {
    if !(p.z_h > 0.0 && p.z_h < 1.0) {
        return Err(EvalError::RegionViolation {
            method: "minus-m-recurrence".into(),
            reason: format!(
                "the order-raising march is only stable between the segment planes \
                 (0 < z < R), got z = {:.6} R",
                p.z_h
            ),
        });
    }
    let rho = p.rho_h;
    let (r2, rp2) = (p.r_h * p.r_h, p.rp_h * p.rp_h);
    let mut prof = base_l0(p);
    let mut est = 4.0 * EPS * prof.abs();
    let mut rho_pow = 1.0 / rho; // rho^{j-1}
    let mut r_inv = 1.0; // r^{-2j}
    let mut rp_inv = 1.0; // r'^{-2j}
    for j in 0..m {
        let fac = double_factorial(2 * j - 1) * rho_pow;
        let inhom = fac * (p.u * r_inv - p.up * rp_inv);
        let carry = 2.0 * j as f64 / rho;
        let next = carry * prof + inhom;
        est = carry * est
            + EPS * (carry * prof.abs() + fac.abs() * (p.u.abs() * r_inv + p.up.abs() * rp_inv)
                + next.abs());
        prof = next;
        rho_pow *= rho;
        r_inv /= r2;
        rp_inv /= rp2;
    }
    Ok((prof, est))
}

/// Lowest-degree potential `L_{-m}^m` (`m >= 0`) by the requested mode.
pub fn logopole_minus_m(
    m: i32,
    p: &FieldPoint,
    mode: MinusMMode,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    if m < 0 {
        return Err(EvalError::UnsupportedIndex { n: m, m });
    }
    check_tube(p, opts)?;
    let route = match mode {
        MinusMMode::Naive => Route::NaiveMinusM,
        MinusMMode::Stable => Route::StableMinusM,
        MinusMMode::Recurrence => Route::RecurrenceM,
    };
    if m == 0 {
        let v = base_l0(p);
        return Ok(EvalResult::real(v, route, 4.0 * EPS * v.abs(), 1));
    }
    let (prof, est) = match mode {
        MinusMMode::Naive => naive_minus_m_profile(m, p)?,
        MinusMMode::Stable => stable_minus_m_profile(m, p),
        MinusMMode::Recurrence => recurrence_minus_m_profile(m, p)?,
    };
    let terms = match mode {
        MinusMMode::Naive => m as u32,
        MinusMMode::Stable => (m * (m + 1) / 2) as u32,
        MinusMMode::Recurrence => m as u32,
    };
    Ok(EvalResult::new(prof * phase(m, p.phi), route, est, terms))
}

// ---------------------------------------------------------------------------
// Degree recurrence (three-term, inhomogeneous)
// ---------------------------------------------------------------------------

/// One order of the forward march: profiles (value, est) for degrees
/// `-mu ..= top`. `diag_prev` is `L_{mu-1}^{mu-1}` from the previous order,
/// required once `top >= mu` (the generic step divides by `n - mu + 1`, which
/// vanishes when producing degree `mu`; a triangular step through the
/// lower-order diagonal value bridges it).
fn forward_order(
    mu: i32,
    top: i32,
    p: &FieldPoint,
    diag_prev: Option<(f64, f64)>,
) -> Result<(Vec<(f64, f64)>, Option<(f64, f64)>)> {
    debug_assert!(mu >= 0 && top >= -mu);
    let (rho, z) = (p.rho_h, p.z_h);
    let (r, rp) = (p.r_h, p.rp_h);
    let r2 = r * r;
    let rho_m = rho.powi(mu);
    let mut out: Vec<(f64, f64)> = Vec::with_capacity((top + mu + 1) as usize);

    let seed0 = if mu == 0 {
        let v = base_l0(p);
        (v, 4.0 * EPS * v.abs())
    } else {
        minus_m_region_profile(mu, p)?
    };
    out.push(seed0);
    if top > -mu {
        // L_{-mu+1}^mu = z L_{-mu}^mu + (2mu-3)!! rho^mu (r^{1-2mu} - r'^{1-2mu})
        let fac = double_factorial(2 * mu - 3) * rho_m;
        let inhom = fac * (r.powi(1 - 2 * mu) - rp.powi(1 - 2 * mu));
        let v = z * seed0.0 + inhom;
        let e = z.abs() * seed0.1
            + EPS * (fac.abs() * (r.powi(1 - 2 * mu) + rp.powi(1 - 2 * mu)) + v.abs());
        out.push((v, e));
    }
    let rhs = double_factorial(2 * mu - 1) * rho_m * rp.powi(1 - 2 * mu);
    let mut deg = -mu + 2;
    while deg <= top {
        let (lv, le) = out[out.len() - 1];
        let (pv, pe) = out[out.len() - 2];
        let next = if deg == mu && mu >= 1 {
            // Triangular step: L_mu^mu from L_{mu-1}^mu and L_{mu-1}^{mu-1}.
            // Integrating v^{2mu} = v^{2mu-1}(z - (z - v)) by parts gives
            //   L_mu^mu = z L_{mu-1}^mu - (2mu-3)!! rho^mu / r'^{2mu-1}
            //             + (2mu-1) rho L_{mu-1}^{mu-1}.
            let (dv, de) = diag_prev.ok_or_else(|| EvalError::RegionViolation {
                method: "forward".into(),
                reason: "internal: missing lower-order diagonal for the triangular step".into(),
            })?;
            let head = -double_factorial(2 * mu - 3) * rho_m / rp.powi(2 * mu - 1);
            let cross = (2 * mu - 1) as f64 * rho;
            let v = head + z * lv + cross * dv;
            let e = z.abs() * le
                + cross * de
                + EPS * (head.abs() + z.abs() * lv.abs() + cross * dv.abs() + v.abs());
            (v, e)
        } else {
            let n = deg - 1; // produce L_{n+1}
            let div = (n - mu + 1) as f64;
            let t1 = z * (2 * n + 1) as f64;
            let t2 = r2 * (n + mu) as f64;
            let v = (t1 * lv - t2 * pv + rhs) / div;
            let e = (t1.abs() * le
                + t2 * pe
                + EPS * (t1.abs() * lv.abs() + t2 * pv.abs() + rhs.abs()))
                / div.abs()
                + EPS * v.abs();
            (v, e)
        };
        out.push(next);
        deg += 1;
    }
    let diag = if top >= mu {
        Some(out[(2 * mu) as usize])
    } else {
        None
    };
    Ok((out, diag))
}

/// One backward march at a fixed padding: rescaled profiles for degrees
/// `-m ..= n_max`, seeded from the large-degree limit at `N = n_max + pad`
/// and normalized against `reference = L_{-m}^m`.
fn backward_march(
    m: i32,
    n_max: i32,
    pad: i32,
    p: &FieldPoint,
    reference: f64,
) -> Result<Vec<f64>> {
    let (z, r, rp) = (p.z_h, p.r_h, p.rp_h);
    let r2 = r * r;
    let s_inf = double_factorial(2 * m - 1) * p.rho_h.powi(m) * rp.powi(-2 * m - 1);
    let rhs = double_factorial(2 * m - 1) * p.rho_h.powi(m) * rp.powi(1 - 2 * m);
    let big_n = n_max + pad;
    let mut upper = s_inf / (big_n + m + 2) as f64; // M_{n+1}
    let mut cur = s_inf / (big_n + m + 1) as f64; // M_n
    let mut out = vec![0.0f64; (n_max + m + 1) as usize];
    for n in (-m + 1..=big_n).rev() {
        let lower = (z * (2 * n + 1) as f64 * cur - (n - m + 1) as f64 * upper + rhs)
            / (r2 * (n + m) as f64);
        if n - 1 <= n_max {
            out[(n - 1 + m) as usize] = lower;
        }
        upper = cur;
        cur = lower;
    }
    let ratio = reference / out[0];
    if !ratio.is_finite() {
        return Err(EvalError::NonConvergence {
            partial: out[0],
            est_error: f64::INFINITY,
            terms: (big_n + m) as u32,
        });
    }
    for v in &mut out {
        *v *= ratio;
    }
    Ok(out)
}

/// Full degree ladder `L_{-m}^m ..= L_{n_max}^m` by the three-term
/// recurrence.
///
/// * `Forward` marches up from the lowest degree; stable for `r < R`.
/// * `Backward` marches down from the asymptotic seed and rescales against
///   the lowest degree; stable for `r > R`. The padding above `n_max` is
///   doubled until two consecutive ladders agree, and the observed
///   inter-ladder difference enters each error estimate.
///
/// Outside its stable region a direction errs with `RegionViolation` unless
/// `override_region` is set (useful for demonstrating the instability).
pub fn logopole_recurrence_n(
    m: i32,
    n_max: i32,
    p: &FieldPoint,
    direction: RecurrenceDirection,
    override_region: bool,
    opts: &EvalOptions,
) -> Result<Vec<EvalResult>> {
    if m < 0 || n_max < -m {
        return Err(EvalError::UnsupportedIndex { n: n_max, m });
    }
    check_tube(p, opts)?;
    match direction {
        RecurrenceDirection::Forward => {
            if !override_region && p.r_h >= 1.0 {
                return Err(EvalError::RegionViolation {
                    method: "forward".into(),
                    reason: format!(
                        "the forward march is unstable for r > R (r = {:.4} R); \
                         use the backward direction there",
                        p.r_h
                    ),
                });
            }
            let mut diag = None;
            if n_max >= m {
                for mu in 0..m {
                    let (_, d) = forward_order(mu, mu, p, diag)?;
                    diag = d;
                }
            }
            let (profiles, _) = forward_order(m, n_max, p, diag)?;
            let ph = phase(m, p.phi);
            Ok(profiles
                .iter()
                .enumerate()
                .map(|(i, (v, e))| EvalResult::new(v * ph, Route::ForwardRecurrence, *e, i as u32 + 1))
                .collect())
        }
        RecurrenceDirection::Backward => {
            if !override_region && p.r_h <= 1.0 {
                return Err(EvalError::RegionViolation {
                    method: "backward".into(),
                    reason: format!(
                        "the backward march is unstable for r < R (r = {:.4} R); \
                         use the forward direction there",
                        p.r_h
                    ),
                });
            }
            let (reference, ref_est) = if m == 0 {
                let v = base_l0(p);
                (v, 4.0 * EPS * v.abs())
            } else {
                minus_m_region_profile(m, p)?
            };
            if reference == 0.0 {
                // Off-segment axis with m > 0: the whole ladder vanishes.
                return Ok((-m..=n_max)
                    .map(|_| EvalResult::real(0.0, Route::BackwardRecurrence, 0.0, 0))
                    .collect());
            }
            let ref_rel = ref_est / reference.abs();
            let pad_cap = opts.backward_padding as i32 * 128;
            let mut pad = opts.backward_padding.max(4) as i32;
            let mut prev = backward_march(m, n_max, pad, p, reference)?;
            loop {
                pad *= 2;
                let cur = backward_march(m, n_max, pad, p, reference)?;
                let converged = cur
                    .iter()
                    .zip(&prev)
                    .all(|(c, q)| (c - q).abs() <= 1e-13 * c.abs() + 1e-280);
                if converged || pad >= pad_cap {
                    let ph = phase(m, p.phi);
                    let big_n = n_max + pad;
                    return Ok(cur
                        .iter()
                        .zip(&prev)
                        .enumerate()
                        .map(|(i, (c, q))| {
                            let n = i as i32 - m;
                            let est = (c - q).abs() + c.abs() * (ref_rel + 4.0 * EPS);
                            EvalResult::new(c * ph, Route::BackwardRecurrence, est, (big_n - n) as u32)
                        })
                        .collect());
                }
                prev = cur;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// On-axis formulas (m = 0, rho = 0, z > R)
// ---------------------------------------------------------------------------

/// Stable on-axis evaluation above the segment: the tail series
/// `L_n(0, z) = sum_{k>n} z^{n-k}/k` for `n >= 0`, and the closed form
/// `z^n ln(z/(z-1))` for `n < 0`.
pub fn logopole_axis(n: i32, z_hat: f64, opts: &EvalOptions) -> Result<EvalResult> {
    if !(z_hat > 1.0) {
        return Err(EvalError::DomainError(z_hat));
    }
    if n < 0 {
        let v = z_hat.powi(n) * (1.0 / (z_hat - 1.0)).ln_1p();
        return Ok(EvalResult::real(v, Route::AxisFormula, 4.0 * EPS * v.abs(), 1));
    }
    let inv_z = 1.0 / z_hat;
    let mut sum = CompensatedSum::new();
    let mut pow = inv_z;
    let mut i = 1;
    loop {
        let term = pow / (n + i) as f64;
        sum.add(term);
        let tail = term * inv_z / (1.0 - inv_z);
        if tail <= opts.tol * sum.sum() {
            return Ok(EvalResult::real(
                sum.sum(),
                Route::AxisFormula,
                tail + sum.cancellation_error(),
                i as u32,
            ));
        }
        if i as u32 >= opts.term_cap {
            return Err(EvalError::NonConvergence {
                partial: sum.sum(),
                est_error: tail,
                terms: i as u32,
            });
        }
        pow *= inv_z;
        i += 1;
    }
}

/// The textbook closed form `z^n (ln(z/(z-1)) - sum_{k<=n} z^{-k}/k)` on the
/// axis above the segment. Exact algebraically but catastrophically
/// cancelling as `n` grows (the estimate reports the loss); kept as the
/// counterpart the tail series fixes.
pub fn logopole_axis_closed(n: i32, z_hat: f64) -> Result<EvalResult> {
    if n < 0 {
        return Err(EvalError::UnsupportedIndex { n, m: 0 });
    }
    if !(z_hat > 1.0) {
        return Err(EvalError::DomainError(z_hat));
    }
    let log_term = (1.0 / (z_hat - 1.0)).ln_1p();
    let mut partial = CompensatedSum::new();
    let mut pow = 1.0;
    for k in 1..=n {
        pow /= z_hat;
        partial.add(pow / k as f64);
    }
    let zn = z_hat.powi(n);
    let v = zn * (log_term - partial.sum());
    let est = 2.0 * EPS * zn * (log_term.abs() + partial.sum().abs()) + 2.0 * EPS * v.abs();
    Ok(EvalResult::real(v, Route::AxisFormula, est, n as u32 + 1))
}

// ---------------------------------------------------------------------------
// Negative degree (m = 0, n < 0)
// ---------------------------------------------------------------------------

/// Multipole series for the negative-degree family, `r > R`:
/// `L_n = sum_{k >= |n|} S_k / (k - |n| + 1)` (the divergent low-`k` terms of
/// the standard series are absent by definition).
pub fn logopole_negative_degree_series(
    n: i32,
    p: &FieldPoint,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    if n >= 0 {
        return Err(EvalError::UnsupportedIndex { n, m: 0 });
    }
    check_tube(p, opts)?;
    if p.r_h <= 1.0 {
        return Err(EvalError::DivergentRegion(format!(
            "multipole series needs r > R, got r = {:.6} R",
            p.r_h
        )));
    }
    let nbar = -n;
    let mut sum = SeriesAccum::new();
    for (k, t) in ScaledExteriorHarmonics::new(0, p.u, p.sin_theta(Frame::O), p.r_h) {
        if k < nbar {
            continue;
        }
        sum.push(t / (k - nbar + 1) as f64);
        if sum.terms >= 4 && sum.converged(opts.tol) {
            return Ok(EvalResult::real(
                sum.acc.sum(),
                Route::MultipoleSeries,
                sum.est_error(1.0 / p.r_h),
                sum.terms,
            ));
        }
        if sum.terms >= opts.term_cap {
            return Err(EvalError::NonConvergence {
                partial: sum.acc.sum(),
                est_error: sum.est_error(1.0 / p.r_h),
                terms: sum.terms,
            });
        }
    }
    unreachable!("series iterator is infinite");
}

/// Negative-degree potentials by logarithmic closed forms (`|n| <= 4`) and,
/// beyond, an upward march of the inhomogeneous recurrence that ties three
/// consecutive negative degrees to partial multipole sums. Valid in all
/// space off the segment.
pub fn logopole_negative_degree(n: i32, p: &FieldPoint, opts: &EvalOptions) -> Result<EvalResult> {
    if n >= 0 {
        return Err(EvalError::UnsupportedIndex { n, m: 0 });
    }
    check_tube(p, opts)?;
    let nbar = -n;
    let (r, rp, xb, eb) = (p.r_h, p.rp_h, p.xibar, p.etabar);
    let e2 = p.one_minus_etabar_sq();
    // G = ln((xibar+etabar)^2 / (xibar^2-1)) with xibar+etabar = 2 r / R.
    let g = (4.0 * r * r / p.xibar_sq_minus_1()).ln();
    let deg_needed = (nbar - 1).max(3);
    let parr = p_array_with_sin(0, deg_needed + 1, p.u, p.sin_theta(Frame::O));
    let s_k = |k: i32| parr[k as usize] / r.powi(k + 1);

    let closed = |nb: i32| -> (f64, f64) {
        let (lead, corr) = match nb {
            1 => (s_k(0) * g, 0.0),
            2 => (s_k(1) * g, -e2 / (2.0 * r.powi(3))),
            3 => (
                s_k(2) * g,
                -(7.0 + eb * eb + 8.0 * eb * xb) * e2 / (16.0 * r.powi(5)),
            ),
            4 => {
                let poly = 37.0 - 2.0 * eb * eb + eb.powi(4)
                    + 9.0 * eb * (7.0 + eb * eb) * xb
                    + 9.0 * (5.0 * eb * eb - 1.0) * xb * xb;
                (s_k(3) * g, -e2 * poly / (96.0 * r.powi(7)))
            }
            _ => unreachable!(),
        };
        let v = lead + corr;
        (v, 6.0 * EPS * (lead.abs() + corr.abs() + v.abs()))
    };

    if nbar <= 4 {
        let (v, e) = closed(nbar);
        return Ok(EvalResult::real(v, Route::NegativeDegree, e, nbar as u32));
    }

    // March degree downward: the relation with index j links L_{-j},
    // L_{-j-1}, L_{-j-2} and the partial sums of exterior harmonics.
    let (mut a, mut ea) = closed(3); // L_{-3}
    let (mut b, mut eb_) = closed(4); // L_{-4}
    let r2 = r * r;
    let rp2 = rp * rp;
    let mut cum = CompensatedSum::new(); // sum_{k=0}^{j} S_k
    for k in 0..=3 {
        cum.add(s_k(k));
    }
    for j in 3..=(nbar - 2) {
        let s_next = s_k(j + 1);
        let s_cur = s_k(j);
        let t1 = (2 * j + 1) as f64 * p.z_h;
        let inhom = -rp + rp2 * cum.sum() + r2 * s_next - s_cur;
        let next = (t1 * b - j as f64 * a + inhom) / ((j + 1) as f64 * r2);
        let e_next = (t1.abs() * eb_
            + j as f64 * ea
            + EPS * (t1.abs() * b.abs() + j as f64 * a.abs() + rp + rp2 * cum.sum().abs()
                + r2 * s_next.abs() + s_cur.abs()))
            / ((j + 1) as f64 * r2)
            + EPS * next.abs();
        a = b;
        ea = eb_;
        b = next;
        eb_ = e_next;
        cum.add(s_next);
    }
    Ok(EvalResult::real(b, Route::NegativeDegree, eb_, nbar as u32))
}

// ---------------------------------------------------------------------------
// Reflected (negative) order
// ---------------------------------------------------------------------------

/// `L_n^{-m}` for `m >= 1`, `n >= m`: the order reflection of the finite
/// second-kind sum, `(-)^m (n-m)!/(n+m)! [r^n Q_n^m(u) - sum_{k=m}^n
/// binom(n+m, k+m) r'^k Q_k^m(u')] e^{-im phi}`. Because the reflected sum
/// starts at `k = m` rather than `k = -m`, the axis singularities no longer
/// cancel for `z < 0` or `z > R`: the function is genuinely singular there,
/// and the estimate grows accordingly.
///
/// `m` is passed as the *positive* reflection `|m|`.
pub fn logopole_negative_order(
    n: i32,
    m: i32,
    p: &FieldPoint,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    if m < 1 || n < m {
        return Err(EvalError::UnsupportedIndex { n, m: -m });
    }
    check_tube(p, opts)?;
    if p.rho_h == 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let q_o = q_cut_array_stable(m, n, p.u, p.sin_theta(Frame::O), p.atanh_u(Frame::O))?;
    let q_p = q_cut_array_stable(m, n, p.up, p.sin_theta(Frame::OPrime), p.atanh_u(Frame::OPrime))?;
    let lead = p.r_h.powi(n) * q_o[(n + m) as usize];
    let mut sum = CompensatedSum::new();
    let mut b = binomial(n + m, 2 * m);
    let mut pow = p.rp_h.powi(m);
    for k in m..=n {
        sum.add(b * pow * q_p[(k + m) as usize]);
        b *= (n - k) as f64 / (k + m + 1) as f64;
        pow *= p.rp_h;
    }
    let bracket = lead - sum.sum();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let pref = sign * factorial_ratio(n - m, n + m);
    let est = pref.abs() * 4.0 * (sum.cancellation_error() + EPS * (lead.abs() + bracket.abs()));
    Ok(EvalResult::new(
        pref * bracket * phase(-m, p.phi),
        Route::ReflectedOrder,
        est,
        (n - m + 2) as u32,
    ))
}

// ---------------------------------------------------------------------------
// Separated logarithmic form
// ---------------------------------------------------------------------------

/// The form that isolates the logarithmic content in a single base-potential
/// factor (`n >= m`):
///
/// `L_n^m = { r^n [P_n^m(u) L_0 - W_{n-1}^m(u)]
///            + sum_{k=-m}^n binom(n+m, k+m) r'^k W_{k-1}^m(u') } e^{im phi}`
///
/// where `L_0` is the base potential and `W` are the polynomial second-kind
/// remainders. All logarithms of the finite second-kind sum collapse into
/// the one `L_0` by the translation identity of the first-kind harmonics.
pub fn logopole_separated(
    n: i32,
    m: i32,
    p: &FieldPoint,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    if m < 0 || n < m {
        return Err(EvalError::UnsupportedIndex { n, m });
    }
    check_tube(p, opts)?;
    if p.rho_h == 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let l0 = base_l0(p);
    let parr = p_array_with_sin(m, n, p.u, p.sin_theta(Frame::O));
    let w_o = w_shifted_array(m, n, p.u, p.sin_theta(Frame::O), p.atanh_u(Frame::O))?;
    let w_p = w_shifted_array(m, n, p.up, p.sin_theta(Frame::OPrime), p.atanh_u(Frame::OPrime))?;
    let head = p.r_h.powi(n) * (parr[n as usize] * l0 - w_o[(n + m) as usize]);
    let mut sum = CompensatedSum::new();
    let mut b = 1.0f64;
    let mut pow = p.rp_h.powi(-m);
    for k in -m..=n {
        sum.add(b * pow * w_p[(k + m) as usize]);
        b *= (n - k) as f64 / (k + m + 1) as f64;
        pow *= p.rp_h;
    }
    let value = head + sum.sum();
    let est = 4.0 * (sum.cancellation_error() + EPS * (head.abs() + value.abs()));
    Ok(EvalResult::new(
        value * phase(m, p.phi),
        Route::Separated,
        est,
        (n + m + 2) as u32,
    ))
}

// ---------------------------------------------------------------------------
// Order-raising recurrences
// ---------------------------------------------------------------------------

/// Raise the order by one from supplied lower-order values: produces
/// `L_n^{m+1}` from `L_n^m` (`l_nm`) and the variant-specific companion
/// (`l_aux` = `L_n^{m-1}` for `Cotangent`, `L_{n-1}^m` for `MixedDegree`).
/// Both variants lose precision with every application (error is amplified
/// by the `1/sin(theta)`-type weights); estimates propagate that honestly.
pub fn logopole_raise_order(
    n: i32,
    m: i32,
    p: &FieldPoint,
    variant: RaiseVariant,
    l_nm: &EvalResult,
    l_aux: &EvalResult,
) -> Result<EvalResult> {
    if p.rho_h == 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let s_o = p.sin_theta(Frame::O);
    let sp = p.sin_theta(Frame::OPrime);
    match variant {
        RaiseVariant::Cotangent => {
            if m < 1 || n < 1 - m {
                return Err(EvalError::UnsupportedIndex { n, m });
            }
            let cot = p.u / s_o;
            // S_m^{m-1 '} and S_{m-1}^{m-1 '} profiles (no azimuthal factor).
            let pm = p_array_with_sin(m - 1, m, p.up, sp)[m as usize];
            let s_deg_m = pm / p.rp_h.powi(m + 1);
            let s_deg_m1 = double_factorial(2 * m - 3) * sp.powi(m - 1) / p.rp_h.powi(m);
            let c1 = 2.0 * m as f64 * cot;
            let c2 = ((n - m + 1) * (m + n)) as f64;
            let inhom = s_deg_m - (n - m + 1) as f64 * s_deg_m1;
            let value = c1 * phase(1, p.phi) * l_nm.value
                - (c2 * l_aux.value + inhom * phase(m - 1, p.phi)) * phase(2, p.phi);
            let est = c1.abs() * l_nm.est_error
                + c2 * l_aux.est_error
                + EPS
                    * (c1.abs() * l_nm.value.norm()
                        + c2 * l_aux.value.norm()
                        + s_deg_m.abs()
                        + ((n - m + 1) as f64 * s_deg_m1).abs()
                        + value.norm());
            Ok(EvalResult::new(
                value,
                Route::RecurrenceM,
                est,
                l_nm.terms_used + l_aux.terms_used + 1,
            ))
        }
        RaiseVariant::MixedDegree => {
            if m < 0 || n < 1 - m {
                return Err(EvalError::UnsupportedIndex { n, m });
            }
            // S_m^{m '} profile.
            let s_mm = double_factorial(2 * m - 1) * sp.powi(m) / p.rp_h.powi(m + 1);
            let c1 = (n + m) as f64 * p.r_h;
            let c2 = (n - m) as f64 * p.u;
            let bracket = c1 * l_aux.value - c2 * l_nm.value
                + (p.u - p.r_h) * s_mm * phase(m, p.phi);
            let value = bracket * phase(1, p.phi) / s_o;
            let est = (c1.abs() * l_aux.est_error
                + c2.abs() * l_nm.est_error
                + EPS
                    * (c1.abs() * l_aux.value.norm()
                        + c2.abs() * l_nm.value.norm()
                        + ((p.u - p.r_h) * s_mm).abs()
                        + bracket.norm()))
                / s_o;
            Ok(EvalResult::new(
                value,
                Route::RecurrenceM,
                est,
                l_nm.terms_used + l_aux.terms_used + 1,
            ))
        }
    }
}

/// Convenience wrapper: evaluates the required lower-order inputs with the
/// automatic dispatcher, then raises once, returning `L_n^{m+1}`.
pub fn logopole_recurrence_m(
    n: i32,
    m: i32,
    p: &FieldPoint,
    variant: RaiseVariant,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    let l_nm = logopole_with(LogopoleSpec::new(n, m)?, p, MethodPolicy::Auto, opts)?;
    let l_aux = match variant {
        RaiseVariant::Cotangent => {
            logopole_with(LogopoleSpec::new(n, m - 1)?, p, MethodPolicy::Auto, opts)?
        }
        RaiseVariant::MixedDegree => {
            logopole_with(LogopoleSpec::new(n - 1, m)?, p, MethodPolicy::Auto, opts)?
        }
    };
    logopole_raise_order(n, m, p, variant, &l_nm, &l_aux)
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

fn region_violation(method: &str, reason: String) -> EvalError {
    EvalError::RegionViolation {
        method: method.into(),
        reason,
    }
}

fn ladder_entry(mut results: Vec<EvalResult>) -> EvalResult {
    results.pop().expect("ladder is never empty")
}

fn auto_dispatch(spec: LogopoleSpec, p: &FieldPoint, opts: &EvalOptions) -> Result<EvalResult> {
    let (n, m) = (spec.n, spec.m);
    match spec.family() {
        Family::ReflectedOrder => logopole_negative_order(n, -m, p, opts),
        Family::NegativeDegree => {
            if p.r_h >= 1.05 {
                logopole_negative_degree_series(n, p, opts)
            } else {
                logopole_negative_degree(n, p, opts)
            }
        }
        Family::Standard => {
            check_tube(p, opts)?;
            if p.rho_h == 0.0 && m > 0 {
                // Transverse multipoles vanish identically on the axis.
                return Ok(EvalResult::real(0.0, Route::Exact, 0.0, 0));
            }
            if p.rho_h == 0.0 && m == 0 && p.z_h > 1.0 {
                return logopole_axis(n, p.z_h, opts);
            }
            if n == -m && m > 0 {
                let mode = if p.z_h > 0.0 && p.z_h < 1.0 {
                    MinusMMode::Naive
                } else {
                    MinusMMode::Stable
                };
                return logopole_minus_m(m, p, mode, opts);
            }
            if CLOSED_FORM_TABLE.contains(&(n, m)) {
                return logopole_closed_low_order(spec, p, opts);
            }
            let r = p.r_h;
            if r < 0.95 {
                return Ok(ladder_entry(logopole_recurrence_n(
                    m,
                    n,
                    p,
                    RecurrenceDirection::Forward,
                    false,
                    opts,
                )?));
            }
            if r >= 1.2 {
                return logopole_series_multipole(spec, p, opts);
            }
            if r >= 1.05 {
                return Ok(ladder_entry(logopole_recurrence_n(
                    m,
                    n,
                    p,
                    RecurrenceDirection::Backward,
                    false,
                    opts,
                )?));
            }
            // Shell band around r = R: the finite sum is exact but loses
            // digits near the axis beyond the segment; reroute there.
            let near_axis = p.rho_h < 0.01 * (1.0 + p.z_h.abs());
            if near_axis && p.z_h <= 0.0 {
                return logopole_offset_series(spec, p, opts);
            }
            if near_axis && p.z_h >= 1.0 && m >= 1 && r > 1.0 {
                return logopole_series_multipole(spec, p, opts);
            }
            logopole_sum_second_kind(spec, p, opts)
        }
    }
}

fn fixed_dispatch(
    spec: LogopoleSpec,
    p: &FieldPoint,
    route: Route,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    let (n, m) = (spec.n, spec.m);
    let family = spec.family();
    match route {
        Route::MultipoleSeries => match family {
            Family::Standard => logopole_series_multipole(spec, p, opts),
            Family::NegativeDegree => logopole_negative_degree_series(n, p, opts),
            Family::ReflectedOrder => Err(region_violation(
                "multipole-series",
                "no segment-based multipole series exists for reflected order".into(),
            )),
        },
        Route::SecondKindSum => match family {
            Family::Standard => logopole_sum_second_kind(spec, p, opts),
            _ => Err(region_violation(
                "second-kind-sum",
                "the finite second-kind sum needs n >= -m with m >= 0".into(),
            )),
        },
        Route::OffsetSeries => match family {
            Family::Standard => logopole_offset_series(spec, p, opts),
            _ => Err(region_violation(
                "offset-series",
                "the offset series needs n >= -m with m >= 0".into(),
            )),
        },
        Route::ForwardRecurrence => match family {
            Family::Standard => Ok(ladder_entry(logopole_recurrence_n(
                m,
                n,
                p,
                RecurrenceDirection::Forward,
                true,
                opts,
            )?)),
            _ => Err(region_violation(
                "forward",
                "the degree recurrence needs n >= -m with m >= 0".into(),
            )),
        },
        Route::BackwardRecurrence => match family {
            Family::Standard => Ok(ladder_entry(logopole_recurrence_n(
                m,
                n,
                p,
                RecurrenceDirection::Backward,
                true,
                opts,
            )?)),
            _ => Err(region_violation(
                "backward",
                "the degree recurrence needs n >= -m with m >= 0".into(),
            )),
        },
        Route::ClosedForm => logopole_closed_low_order(spec, p, opts),
        Route::StableMinusM => {
            if n == -m && m >= 0 {
                logopole_minus_m(m, p, MinusMMode::Stable, opts)
            } else {
                Err(region_violation(
                    "stable-minus-m",
                    format!("route only defined on the n = -m diagonal, got ({n}, {m})"),
                ))
            }
        }
        Route::NaiveMinusM => {
            if n == -m && m >= 0 {
                logopole_minus_m(m, p, MinusMMode::Naive, opts)
            } else {
                Err(region_violation(
                    "naive-minus-m",
                    format!("route only defined on the n = -m diagonal, got ({n}, {m})"),
                ))
            }
        }
        Route::RecurrenceM => {
            if n == -m && m >= 1 {
                logopole_minus_m(m, p, MinusMMode::Recurrence, opts)
            } else if family == Family::Standard && m >= 1 && n >= 2 - m {
                logopole_recurrence_m(n, m - 1, p, RaiseVariant::MixedDegree, opts)
            } else {
                Err(region_violation(
                    "recurrence-m",
                    format!(
                        "order raising needs m >= 1 and n >= 2-m (or the n = -m diagonal), \
                         got ({n}, {m})"
                    ),
                ))
            }
        }
        Route::Separated => match family {
            Family::Standard if n >= m => logopole_separated(n, m, p, opts),
            _ => Err(region_violation(
                "separated",
                "the separated logarithmic form needs n >= m >= 0".into(),
            )),
        },
        Route::NegativeDegree => match family {
            Family::NegativeDegree => logopole_negative_degree(n, p, opts),
            _ => Err(region_violation(
                "negative-degree",
                "route only defined for m = 0, n < 0".into(),
            )),
        },
        Route::ReflectedOrder => match family {
            Family::ReflectedOrder => logopole_negative_order(n, -m, p, opts),
            _ => Err(region_violation(
                "reflected-order",
                "route only defined for m < 0, n >= |m|".into(),
            )),
        },
        Route::AxisFormula => {
            if m == 0 && p.rho_h == 0.0 {
                logopole_axis(n, p.z_h, opts)
            } else {
                Err(region_violation(
                    "axis",
                    format!(
                        "axis formulas need m = 0 and rho = 0, got m = {m}, rho = {:.3e} R",
                        p.rho_h
                    ),
                ))
            }
        }
        Route::Quadrature => {
            check_tube(p, opts)?;
            match family {
                Family::Standard => {
                    let q = quad_line_multipole(
                        LineDensity::Monomial { power: n + m },
                        m,
                        p,
                        opts.tol,
                    )?;
                    Ok(EvalResult::new(
                        q.value * phase(m, p.phi),
                        Route::Quadrature,
                        q.est_error,
                        q.panels,
                    ))
                }
                Family::NegativeDegree => {
                    let q = quad_negative_degree(-n, p, opts.tol)?;
                    Ok(EvalResult::real(
                        q.value,
                        Route::Quadrature,
                        q.est_error,
                        q.panels,
                    ))
                }
                Family::ReflectedOrder => Err(region_violation(
                    "quadrature",
                    "no integral representation is implemented for reflected order".into(),
                )),
            }
        }
        Route::Exact => Err(region_violation(
            "exact",
            "the exact-zero shortcut is selected only by the automatic dispatcher".into(),
        )),
        Route::RelationSum | Route::CoefficientSeries => Err(region_violation(
            route.name(),
            "cross-family assemblies are invoked through the relations module, \
             not the logopole dispatcher"
                .into(),
        )),
    }
}

/// Evaluate `L_n^m` at a field point under the given method policy, with
/// default evaluation options.
pub fn logopole(spec: LogopoleSpec, p: &FieldPoint, policy: MethodPolicy) -> Result<EvalResult> {
    logopole_with(spec, p, policy, &EvalOptions::default())
}

/// Evaluate `L_n^m` at a field point.
///
/// `MethodPolicy::Auto` picks a route that is stable at the point's position
/// (region bands in `r/R`, with near-axis and on-axis reroutes);
/// `MethodPolicy::Fixed` forces a specific route, erring with
/// `RegionViolation` when the route does not apply to the index family.
pub fn logopole_with(
    spec: LogopoleSpec,
    p: &FieldPoint,
    policy: MethodPolicy,
    opts: &EvalOptions,
) -> Result<EvalResult> {
    match policy {
        MethodPolicy::Auto => auto_dispatch(spec, p, opts),
        MethodPolicy::Fixed(route) => fixed_dispatch(spec, p, route, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quad_minus_m_logopole;

    fn pt(rho: f64, z: f64) -> FieldPoint {
        FieldPoint::new(rho, z, 0.0, 1.0).unwrap()
    }

    fn ptp(rho: f64, z: f64, phi: f64) -> FieldPoint {
        FieldPoint::new(rho, z, phi, 1.0).unwrap()
    }

    fn auto(n: i32, m: i32, p: &FieldPoint) -> EvalResult {
        logopole(LogopoleSpec::new(n, m).unwrap(), p, MethodPolicy::Auto)
            .unwrap_or_else(|e| panic!("auto L_{n}^{m} failed: {e}"))
    }

    fn fixed(n: i32, m: i32, p: &FieldPoint, route: Route) -> Result<EvalResult> {
        logopole(LogopoleSpec::new(n, m)?, p, MethodPolicy::Fixed(route))
    }

    fn oracle(n: i32, m: i32, p: &FieldPoint) -> (f64, f64) {
        let q = quad_line_multipole(LineDensity::Monomial { power: n + m }, m, p, 1e-12)
            .unwrap_or_else(|e| panic!("oracle L_{n}^{m} failed: {e}"));
        (q.value, q.est_error)
    }

    #[test]
    fn spec_validation_and_families() {
        assert_eq!(LogopoleSpec::new(3, 1).unwrap().family(), Family::Standard);
        assert_eq!(LogopoleSpec::new(-2, 2).unwrap().family(), Family::Standard);
        assert_eq!(
            LogopoleSpec::new(-3, 0).unwrap().family(),
            Family::NegativeDegree
        );
        assert_eq!(
            LogopoleSpec::new(4, -2).unwrap().family(),
            Family::ReflectedOrder
        );
        assert!(matches!(
            LogopoleSpec::new(-2, 1),
            Err(EvalError::UnsupportedIndex { .. })
        ));
        assert!(matches!(
            LogopoleSpec::new(1, -2),
            Err(EvalError::UnsupportedIndex { .. })
        ));
    }

    /// Hand-derivable anchor values at simple points.
    #[test]
    fn anchor_values() {
        // L_0(rho=R, z=0) = ln(1 + sqrt(2)) = asinh(1).
        let v = auto(0, 0, &pt(1.0, 0.0));
        assert!((v.value.re - 1.0f64.asinh()).abs() < 1e-14);

        // L_{-1}^1(rho=R, z=R/2) = (u - u')/rho = 2/sqrt(5).
        let v = auto(-1, 1, &pt(1.0, 0.5));
        assert!((v.value.re - 2.0 / 5.0f64.sqrt()).abs() < 1e-14);

        // L_{-1}(rho=R, z=0) = ln(2(sqrt(2)-1)) / r.
        let v = auto(-1, 0, &pt(1.0, 0.0));
        assert!((v.value.re - (2.0 * (2.0f64.sqrt() - 1.0)).ln()).abs() < 1e-14);

        // On-axis: L_0(0, 2R) = ln 2, L_1(0, 2R) = 2 ln 2 - 1,
        // L_{-2}(0, 2R) = ln(2)/4. All three go through truncated series
        // (default tolerance 1e-11), so allow that much.
        let v = auto(0, 0, &pt(0.0, 2.0));
        assert!((v.value.re - 2.0f64.ln()).abs() < 1e-10);
        assert!((v.value.re - 2.0f64.ln()).abs() <= v.est_error.max(1e-15));
        let v = auto(1, 0, &pt(0.0, 2.0));
        assert!((v.value.re - (2.0 * 2.0f64.ln() - 1.0)).abs() < 1e-10);
        let v = auto(-2, 0, &pt(0.0, 2.0));
        assert!((v.value.re - 2.0f64.ln() / 4.0).abs() < 1e-10);
    }

    /// At (rho, z) = (R, R/2): xibar = sqrt(5), etabar = 0, so every closed
    /// form reduces to a hand value. The (1, 2) value also pins the sign of
    /// that table entry, which is independently fixed by the positivity of
    /// the defining integral.
    #[test]
    fn closed_forms_at_symmetric_point() {
        let p = pt(1.0, 0.5);
        let s5 = 5.0f64.sqrt();
        let cases = [
            (-1, 1, 2.0 / s5),
            (0, 1, 1.0 / s5),
            (1, 1, 1.0 / s5 + 2.0 * ((1.0 / s5).atanh() - s5 / 4.0)),
            (-2, 2, 140.0 * s5 / 125.0),
            (0, 2, 9.0 / (5.0 * s5)),
            (1, 2, 13.0 / (16.0 * 1.25f64.powf(1.5))),
        ];
        for (n, m, expect) in cases {
            let v = fixed(n, m, &p, Route::ClosedForm).unwrap();
            assert!(
                (v.value.re - expect).abs() < 1e-13 * expect.abs().max(1.0),
                "closed L_{n}^{m}: got {}, expected {expect}",
                v.value.re
            );
        }
    }

    #[test]
    fn closed_forms_match_oracle_generic_points() {
        for p in [pt(0.7, 0.31), pt(1.4, -0.43), pt(0.33, 1.27)] {
            for (n, m) in CLOSED_FORM_TABLE {
                let v = fixed(n, m, &p, Route::ClosedForm).unwrap();
                let (q, qe) = oracle(n, m, &p);
                let tol = (5.0 * (v.est_error + qe)).max(1e-11 * q.abs());
                assert!(
                    (v.value.re - q).abs() < tol,
                    "closed L_{n}^{m} at ({}, {}): {} vs oracle {}",
                    p.rho_h,
                    p.z_h,
                    v.value.re,
                    q
                );
            }
        }
    }

    /// Every automatic route agrees with adaptive quadrature of the defining
    /// integral, across the region bands the dispatcher distinguishes.
    #[test]
    fn auto_matches_oracle_across_regions() {
        let points = [
            pt(0.5, 0.3),   // r < R: forward recurrence
            pt(2.0, 0.7),   // r > 1.2 R: multipole series
            pt(1.08, 0.3),  // backward band
            pt(0.7, 0.7),   // shell band: second-kind sum
            pt(0.4, -0.8),  // below the segment
            pt(0.002, -1.0) // near-axis shell band: offset reroute
        ];
        for p in points {
            for (n, m) in [(0, 0), (1, 0), (2, 1), (3, 1), (5, 2), (2, 2), (4, 3)] {
                let v = auto(n, m, &p);
                let (q, qe) = oracle(n, m, &p);
                let tol = (5.0 * (v.est_error + qe)).max(1e-8 * q.abs() + 1e-14);
                assert!(
                    (v.value.re - q).abs() < tol,
                    "L_{n}^{m} at ({}, {}) via {:?}: {} vs oracle {} (est {:.2e})",
                    p.rho_h,
                    p.z_h,
                    v.method,
                    v.value.re,
                    q,
                    v.est_error
                );
            }
        }
    }

    #[test]
    fn dispatcher_selects_expected_routes() {
        let cases: [(i32, i32, FieldPoint, Route); 11] = [
            (2, 1, pt(0.5, 0.3), Route::ForwardRecurrence),
            (2, 1, pt(2.5, 0.1), Route::MultipoleSeries),
            (3, 0, pt(1.1, 0.2), Route::BackwardRecurrence),
            (3, 1, pt(0.7, 0.7), Route::SecondKindSum),
            (2, 1, pt(0.001, -0.97), Route::OffsetSeries),
            (2, 1, pt(0.001, 1.035), Route::MultipoleSeries),
            (3, 0, pt(0.0, 2.0), Route::AxisFormula),
            (-3, 3, pt(0.3, 2.0), Route::StableMinusM),
            (-3, 3, pt(0.5, 0.5), Route::NaiveMinusM),
            (1, 2, pt(0.6, 0.3), Route::ClosedForm),
            (4, -2, pt(0.8, 0.4), Route::ReflectedOrder),
        ];
        for (n, m, p, expect) in cases {
            let v = auto(n, m, &p);
            assert_eq!(
                v.method, expect,
                "route for L_{n}^{m} at ({}, {})",
                p.rho_h, p.z_h
            );
        }
        // Transverse multipole on the off-segment axis: exactly zero.
        let v = auto(1, 1, &pt(0.0, 2.5));
        assert_eq!(v.method, Route::Exact);
        assert_eq!(v.value.re, 0.0);
        assert_eq!(v.est_error, 0.0);
        // Negative degree: closed/march inside, series outside.
        assert_eq!(auto(-5, 0, &pt(0.4, 0.2)).method, Route::NegativeDegree);
        assert_eq!(auto(-5, 0, &pt(2.0, 0.2)).method, Route::MultipoleSeries);
    }

    /// The forward march amplifies error for r > R: fine at low degree,
    /// order-one wrong near degree 40+ at (rho, z) = (2R, 0), and the
    /// propagated estimate must admit it.
    #[test]
    fn forward_recurrence_unstable_outside() {
        let p = pt(2.0, 0.0);
        let ladder = logopole_recurrence_n(
            0,
            60,
            &p,
            RecurrenceDirection::Forward,
            true,
            &EvalOptions::default(),
        )
        .unwrap();
        let spec10 = LogopoleSpec::new(10, 0).unwrap();
        let spec55 = LogopoleSpec::new(55, 0).unwrap();
        let good = logopole_series_multipole(spec10, &p, &EvalOptions::default()).unwrap();
        let bad_ref = logopole_series_multipole(spec55, &p, &EvalOptions::default()).unwrap();
        let rel10 = (ladder[10].value.re - good.value.re).abs() / good.value.re.abs();
        let rel55 = (ladder[55].value.re - bad_ref.value.re).abs() / bad_ref.value.re.abs();
        assert!(rel10 < 1e-9, "low degrees should survive: rel {rel10:.2e}");
        assert!(rel55 > 1e-2, "instability should have set in: rel {rel55:.2e}");
        assert!(
            ladder[55].est_error > 0.1 * (ladder[55].value.re - bad_ref.value.re).abs(),
            "estimate must admit the blow-up"
        );
        // And without the override the direction is refused out of region.
        let err = logopole_recurrence_n(
            0,
            10,
            &p,
            RecurrenceDirection::Forward,
            false,
            &EvalOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::RegionViolation { .. }));
    }

    /// Backward recurrence with asymptotic seeding and rescaling holds to
    /// degree 400 for m <= 2 outside the segment sphere.
    #[test]
    fn backward_recurrence_high_degree() {
        let p = pt(1.5, 0.4);
        let opts = EvalOptions::default();
        for m in 0..=2 {
            let ladder =
                logopole_recurrence_n(m, 400, &p, RecurrenceDirection::Backward, false, &opts)
                    .unwrap();
            for n in [5, 50, 200, 400] {
                let spec = LogopoleSpec::new(n, m).unwrap();
                let series = logopole_series_multipole(spec, &p, &opts).unwrap();
                let got = ladder[(n + m) as usize].value.re;
                let rel = (got - series.value.re).abs() / series.value.re.abs();
                assert!(
                    rel < 1e-8,
                    "backward L_{n}^{m}: rel {rel:.2e} ({} vs {})",
                    got,
                    series.value.re
                );
            }
        }
    }

    /// The three lowest-degree modes agree where they are all stable.
    #[test]
    fn minus_m_modes_agree_in_strip() {
        let p = pt(0.9, 0.6);
        let opts = EvalOptions::default();
        for m in 1..=10 {
            let naive = logopole_minus_m(m, &p, MinusMMode::Naive, &opts).unwrap();
            let stable = logopole_minus_m(m, &p, MinusMMode::Stable, &opts).unwrap();
            let rec = logopole_minus_m(m, &p, MinusMMode::Recurrence, &opts).unwrap();
            let scale = naive.value.re.abs();
            assert!((naive.value.re - stable.value.re).abs() < 1e-10 * scale, "m={m}");
            assert!((naive.value.re - rec.value.re).abs() < 1e-10 * scale, "m={m}");
        }
        for m in [1, 3, 6] {
            let stable = logopole_minus_m(m, &p, MinusMMode::Stable, &opts).unwrap();
            let q = quad_minus_m_logopole(m, &p, 1e-12).unwrap();
            assert!(
                (stable.value.re - q.value).abs()
                    < (5.0 * (stable.est_error + q.est_error)).max(1e-10 * q.value.abs()),
                "m={m}: {} vs oracle {}",
                stable.value.re,
                q.value
            );
        }
    }

    /// Near the axis beyond the segment the naive difference loses all
    /// digits (and must say so), while the factored form stays accurate.
    #[test]
    fn minus_m_stable_beats_naive_near_axis() {
        let m = 5;
        let p = pt(1e-6, 3.0);
        let opts = EvalOptions::default();
        let stable = logopole_minus_m(m, &p, MinusMMode::Stable, &opts).unwrap();
        let naive = logopole_minus_m(m, &p, MinusMMode::Naive, &opts).unwrap();
        let q = quad_minus_m_logopole(m, &p, 1e-11).unwrap();
        assert!(q.value != 0.0 && stable.value.re != 0.0);
        let rel = (stable.value.re - q.value).abs() / q.value.abs();
        assert!(rel < 1e-9, "stable vs oracle: rel {rel:.2e}");
        assert!(stable.est_error < 1e-8 * q.value.abs());
        // Third, fully independent route: the multipole series is also exact
        // near the axis (its terms carry sin theta analytically).
        let series =
            logopole_series_multipole(LogopoleSpec::new(-m, m).unwrap(), &p, &opts).unwrap();
        let rel_s = (stable.value.re - series.value.re).abs() / series.value.re.abs();
        assert!(rel_s < 1e-9, "stable vs multipole series: rel {rel_s:.2e}");
        // The naive route is catastrophically wrong here and its estimate
        // admits it.
        assert!((naive.value.re - q.value).abs() > 1e3 * q.value.abs());
        assert!(naive.est_error > q.value.abs());
    }

    /// Factored form against the order-raising march deep into high order.
    #[test]
    fn minus_m_stable_vs_recurrence_high_order() {
        let p = pt(0.5, 0.5);
        let opts = EvalOptions::default();
        for (m, tol) in [(5, 1e-10), (10, 1e-8), (25, 1e-6), (40, 1e-4)] {
            let stable = logopole_minus_m(m, &p, MinusMMode::Stable, &opts).unwrap();
            let rec = logopole_minus_m(m, &p, MinusMMode::Recurrence, &opts).unwrap();
            let rel = (stable.value.re - rec.value.re).abs() / rec.value.re.abs();
            assert!(rel < tol, "m={m}: rel {rel:.2e}");
        }
        // Outside the strip the march is refused.
        let err = logopole_minus_m(3, &pt(0.5, 2.0), MinusMMode::Recurrence, &opts).unwrap_err();
        assert!(matches!(err, EvalError::RegionViolation { .. }));
    }

    /// On-axis: the tail series is stable for large n where the textbook
    /// closed form cancels catastrophically (`z^n` times a difference that
    /// shrinks like `z^{-n}`) — and the closed form's estimate covers its
    /// actual error.
    #[test]
    fn axis_series_vs_closed_form() {
        let opts = EvalOptions::default();
        let zh = 2.0;
        let series = logopole_axis(60, zh, &opts).unwrap();
        let closed = logopole_axis_closed(60, zh).unwrap();
        let diff = (series.value.re - closed.value.re).abs();
        assert!(series.est_error < 1e-9 * series.value.re.abs());
        // The closed bracket is a ~1e-20 residual computed from O(1) terms,
        // so the closed value is rounding noise times 2^60 (possibly exactly
        // zero); either way it has no correct digits and its estimate says so.
        assert!(diff > 0.5 * series.value.re.abs(), "total loss at degree 60");
        assert!(closed.est_error > 0.2 * diff, "estimate admits the loss");
        assert!(
            closed.est_error > 100.0 * series.value.re.abs(),
            "estimate reports complete digit loss"
        );
        // Low degree: both fine (the gap is the series truncation, which its
        // estimate covers).
        let s5 = logopole_axis(5, zh, &opts).unwrap();
        let c5 = logopole_axis_closed(5, zh).unwrap();
        let d5 = (s5.value.re - c5.value.re).abs();
        assert!(d5 < 2.0 * (s5.est_error + c5.est_error) + 1e-15);
        assert!(d5 < 1e-9 * s5.value.re.abs());
        assert!(matches!(
            logopole_axis(3, 0.9, &opts),
            Err(EvalError::DomainError(_))
        ));
    }

    #[test]
    fn negative_degree_matches_oracle() {
        let opts = EvalOptions::default();
        for p in [pt(0.6, 0.3), pt(0.9, -0.3)] {
            for nbar in 1..=8 {
                let v = logopole_negative_degree(-nbar, &p, &opts).unwrap();
                let q = quad_negative_degree(nbar, &p, 1e-12).unwrap();
                let tol = if nbar <= 4 { 1e-9 } else { 1e-7 };
                let rel = (v.value.re - q.value).abs() / q.value.abs();
                assert!(
                    rel < tol,
                    "L_{{-{nbar}}} at ({}, {}): rel {rel:.2e}",
                    p.rho_h,
                    p.z_h
                );
            }
        }
        let far = pt(2.0, 0.7);
        for nbar in 1..=6 {
            let v = logopole_negative_degree_series(-nbar, &far, &opts).unwrap();
            let q = quad_negative_degree(nbar, &far, 1e-12).unwrap();
            let rel = (v.value.re - q.value).abs() / q.value.abs();
            assert!(rel < 1e-9, "series L_{{-{nbar}}}: rel {rel:.2e}");
        }
    }

    /// The reflected-order family: phase convention e^{-im phi}, axis
    /// rejection, and agreement between the generic machinery and a direct
    /// transcription at the lowest index.
    #[test]
    fn negative_order_basics() {
        let opts = EvalOptions::default();
        assert!(matches!(
            logopole_negative_order(2, 2, &pt(0.0, 2.0), &opts),
            Err(EvalError::AxisSingularity)
        ));
        let p0 = pt(0.8, 0.4);
        let phi = 0.7;
        let pp = ptp(0.8, 0.4, phi);
        let a = logopole_negative_order(3, 2, &p0, &opts).unwrap();
        let b = logopole_negative_order(3, 2, &pp, &opts).unwrap();
        let rotated = a.value * phase(-2, phi);
        assert!((b.value - rotated).norm() < 1e-12 * a.value.norm());
        // Direct transcription for n = m = 1 (the k-sum has the single term
        // k = 1 with binomial weight C(2, 2) = 1):
        // L_1^{-1} = -(1/2) [r Q_1^1(u) - r' Q_1^1(u')] e^{-i phi}.
        let q_o = q_cut_array_stable(1, 1, p0.u, p0.sin_theta(Frame::O), p0.atanh_u(Frame::O))
            .unwrap();
        let q_p = q_cut_array_stable(
            1,
            1,
            p0.up,
            p0.sin_theta(Frame::OPrime),
            p0.atanh_u(Frame::OPrime),
        )
        .unwrap();
        let direct = -0.5 * (p0.r_h * q_o[2] - p0.rp_h * q_p[2]);
        let v = logopole_negative_order(1, 1, &p0, &opts).unwrap();
        assert!((v.value.re - direct).abs() < 1e-13 * direct.abs().max(1.0));
    }

    /// The separated logarithmic form agrees with the independent routes in
    /// both radial regimes.
    #[test]
    fn separated_form_agrees() {
        let opts = EvalOptions::default();
        for (p, n, m) in [
            (pt(0.8, 0.3), 3, 1),
            (pt(0.8, 0.3), 2, 0),
            (pt(1.3, 0.5), 4, 2),
            (pt(0.5, -0.6), 5, 3),
        ] {
            let sep = logopole_separated(n, m, &p, &opts).unwrap();
            let reference = auto(n, m, &p);
            let tol = (5.0 * (sep.est_error + reference.est_error))
                .max(1e-10 * reference.value.norm());
            assert!(
                (sep.value - reference.value).norm() < tol,
                "separated L_{n}^{m}: {} vs {}",
                sep.value.re,
                reference.value.re
            );
        }
    }

    #[test]
    fn offset_series_agrees_below_segment() {
        let opts = EvalOptions::default();
        let p = pt(0.4, -0.8);
        for (n, m) in [(0, 0), (2, 0), (3, 1), (4, 2)] {
            let spec = LogopoleSpec::new(n, m).unwrap();
            let off = logopole_offset_series(spec, &p, &opts).unwrap();
            let reference = auto(n, m, &p);
            let tol =
                (5.0 * (off.est_error + reference.est_error)).max(1e-10 * reference.value.norm());
            assert!(
                (off.value - reference.value).norm() < tol,
                "offset L_{n}^{m}: {} vs {}",
                off.value.re,
                reference.value.re
            );
        }
        // Divergent inside the offset sphere.
        assert!(matches!(
            logopole_offset_series(LogopoleSpec::new(2, 1).unwrap(), &pt(0.3, 0.8), &opts),
            Err(EvalError::DivergentRegion(_))
        ));
    }

    /// Both order-raising variants reproduce an independently evaluated
    /// L_2^2, including off the phi = 0 half-plane.
    #[test]
    fn raise_variants_agree() {
        let opts = EvalOptions::default();
        let p = ptp(1.3, 0.6, 0.3);
        let reference = auto(2, 2, &p);
        for variant in [RaiseVariant::Cotangent, RaiseVariant::MixedDegree] {
            let raised = logopole_recurrence_m(2, 1, &p, variant, &opts).unwrap();
            let tol = (5.0 * (raised.est_error + reference.est_error))
                .max(1e-9 * reference.value.norm());
            assert!(
                (raised.value - reference.value).norm() < tol,
                "{variant:?}: {} vs {}",
                raised.value,
                reference.value
            );
        }
    }

    /// Raising repeatedly amplifies error; the propagated estimate grows
    /// with each step and stays honest against an independent value.
    #[test]
    fn repeated_raising_loses_precision() {
        let p = pt(0.6, 0.35);
        let n = 6;
        let mut lower = auto(n, 0, &p); // L_6^0
        let mut cur = auto(n, 1, &p); // L_6^1
        let mut first_rel_est = None;
        let mut last_rel_est = 0.0;
        for m in 1..=5 {
            let next = logopole_raise_order(n, m, &p, RaiseVariant::Cotangent, &cur, &lower)
                .unwrap();
            let reference = auto(n, m + 1, &p);
            let err = (next.value - reference.value).norm();
            assert!(
                err < 30.0 * next.est_error + 1e-12 * reference.value.norm(),
                "m={m}: raise error {err:.2e} not covered by estimate {:.2e}",
                next.est_error
            );
            let rel_est = next.est_error / reference.value.norm();
            if first_rel_est.is_none() {
                first_rel_est = Some(rel_est);
            }
            last_rel_est = rel_est;
            lower = cur;
            cur = next;
        }
        // Each step multiplies the absolute estimate by the recurrence
        // weights; relative to the (also growing) reference the accumulation
        // is gentler but still monotone upward.
        assert!(
            last_rel_est > 1.5 * first_rel_est.unwrap(),
            "estimate should grow under repeated raising: {:.2e} -> {last_rel_est:.2e}",
            first_rel_est.unwrap()
        );
    }

    #[test]
    fn phase_convention_standard_family() {
        let phi = 0.9;
        let a = auto(3, 2, &pt(1.1, 0.4));
        let b = auto(3, 2, &ptp(1.1, 0.4, phi));
        assert!((b.value - a.value * phase(2, phi)).norm() < 1e-12 * a.value.norm());
        assert!(a.value.im.abs() < 1e-15 * a.value.re.abs());
    }

    #[test]
    fn far_field_decays_and_matches_series() {
        let p = pt(50.0, 0.0);
        let v = auto(2, 1, &p);
        assert_eq!(v.method, Route::MultipoleSeries);
        // Leading behaviour S_1^1 ~ (2m-1)!! rho^m / r^{2m+1} = 1/2500.
        assert!(v.value.re.abs() < 1e-3);
        let (q, qe) = oracle(2, 1, &p);
        assert!((v.value.re - q).abs() < (5.0 * (v.est_error + qe)).max(1e-10 * q.abs()));
    }

    #[test]
    fn error_paths() {
        let opts = EvalOptions::default();
        // Inside the singular tube.
        assert!(matches!(
            logopole(LogopoleSpec::new(2, 0).unwrap(), &pt(1e-9, 0.5), MethodPolicy::Auto),
            Err(EvalError::SingularRegion { .. })
        ));
        // No closed form at (5, 3).
        assert!(matches!(
            fixed(5, 3, &pt(0.5, 0.3), Route::ClosedForm),
            Err(EvalError::UnsupportedIndex { .. })
        ));
        // Exact is dispatcher-internal.
        assert!(matches!(
            fixed(1, 1, &pt(0.0, 2.0), Route::Exact),
            Err(EvalError::RegionViolation { .. })
        ));
        // Axis formulas refuse off-axis points.
        assert!(matches!(
            fixed(2, 0, &pt(0.5, 2.0), Route::AxisFormula),
            Err(EvalError::RegionViolation { .. })
        ));
        // Second-kind sum is singular exactly on the axis.
        assert!(matches!(
            logopole_sum_second_kind(LogopoleSpec::new(2, 0).unwrap(), &pt(0.0, 2.0), &opts),
            Err(EvalError::AxisSingularity)
        ));
        // Multipole series refuses the interior.
        assert!(matches!(
            logopole_series_multipole(LogopoleSpec::new(2, 0).unwrap(), &pt(0.3, 0.2), &opts),
            Err(EvalError::DivergentRegion(_))
        ));
        // Ladder indices must be in range.
        assert!(matches!(
            logopole_recurrence_n(
                1,
                -2,
                &pt(0.5, 0.3),
                RecurrenceDirection::Forward,
                false,
                &opts
            ),
            Err(EvalError::UnsupportedIndex { .. })
        ));
    }

    /// Fixed-route evaluations agree with the quadrature route on a generic
    /// interior and exterior point, wherever the route is applicable.
    #[test]
    fn fixed_routes_cross_check() {
        let inner = pt(0.55, 0.35);
        let outer = pt(1.6, 0.35);
        for (n, m) in [(2, 0), (3, 1)] {
            let (qi, _) = oracle(n, m, &inner);
            let (qo, _) = oracle(n, m, &outer);
            for (p, q, routes) in [
                (
                    &inner,
                    qi,
                    vec![
                        Route::SecondKindSum,
                        Route::ForwardRecurrence,
                        Route::Separated,
                        Route::Quadrature,
                    ],
                ),
                (
                    &outer,
                    qo,
                    vec![
                        Route::SecondKindSum,
                        Route::MultipoleSeries,
                        Route::BackwardRecurrence,
                        Route::OffsetSeries,
                        Route::Separated,
                        Route::Quadrature,
                    ],
                ),
            ] {
                for route in routes {
                    let v = fixed(n, m, p, route).unwrap_or_else(|e| {
                        panic!("route {route:?} failed for L_{n}^{m}: {e}")
                    });
                    let tol = (5.0 * (v.est_error + 1e-12 * q.abs())).max(1e-9 * q.abs());
                    assert!(
                        (v.value.re - q).abs() < tol,
                        "route {route:?} for L_{n}^{m}: {} vs {}",
                        v.value.re,
                        q
                    );
                }
            }
        }
    }
}
