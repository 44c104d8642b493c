//! Slow, independent reference values from adaptive quadrature.
//!
//! Everything here evaluates the *defining integrals* of the function
//! families directly, with no shared code paths with the fast evaluation
//! routes, so agreement between the two is meaningful evidence of
//! correctness. All results are meridional profiles (the value at phi = 0);
//! the full complex value is `profile * e^{i m phi}`.
//!
//! The families and their line-source representations (hatted coordinates,
//! lengths in units of the segment length R):
//!
//! * Segment multipole of order m with monomial density,
//!   `profile = (2m-1)!! rho^m INT_0^1 v^{n+m} / (rho^2 + (z-v)^2)^{m+1/2} dv`
//!   — the basic family `L_n^m` for n >= -m.
//! * Same kernel with Legendre-weighted density `(1-v^2)^{m/2} P_n^m(v)` over
//!   [-1, 1] and an extra factor `(-1)^m / 2`, giving the spheroidal product
//!   `Q_n^m(xi) P_n^m(eta)` (centered frame). The 1/2 is required for the
//!   representation to hold (directly checkable at m = 0 against
//!   `2 atanh(1/xi)`).
//! * Negative-degree continuation for m = 0: density `v^{-nbar}` on (0, 1]
//!   with the first `nbar` multipole terms of the source's far-field
//!   subtracted inside the integrand.
//! * Solid spherical harmonics of the second kind, interior
//!   (`r^n Q_n^m(u)`) and exterior (`r^{-n-1} Q_n^m(u)`) radial types, as
//!   whole-axis source distributions regularized by multipole counterterms;
//!   the truncated pieces beyond the numeric window are summed analytically.
//! * The angular integral `(2m-1)!!/sin^m(theta) INT_theta^{pi/2}
//!   sin^{2m-1}` for the rational band value `Q_{-m}^m(cos theta)`, and its
//!   two-center difference, which is the lowest-degree member `L_{-m}^m`.

use crate::coords::FieldPoint;
use crate::error::{EvalError, Result};
use crate::factorial::double_factorial;
use crate::legendre::{dm_p_array, p_array};

/// Outcome of an adaptive quadrature: the value, an honest error estimate,
/// and how many panels the subdivision used.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub est_error: f64,
    pub panels: u32,
}

/// Line-source density selector for [`quad_line_multipole`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineDensity {
    /// `v^{power}` on [0, 1]; `power = n + m >= 0` gives the standard family.
    Monomial { power: i32 },
    /// `(1-v^2)^{m/2} P_degree^m(v)` on [-1, 1]; gives the spheroidal
    /// product `Q_degree^m(xi) P_degree^m(eta)`.
    Legendre { degree: i32 },
}

// ---------------------------------------------------------------------------
// Gauss-Kronrod 15-point kernel and adaptive driver
// ---------------------------------------------------------------------------

/// 15-point Kronrod abscissae (positive half; symmetric).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
/// Embedded 7-point Gauss weights (nodes are the odd-index `XGK` entries).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 15(7) evaluation over [a, b]: returns the Kronrod value
/// and a conservative error estimate from the Gauss-Kronrod difference.
fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut resabs = WGK[7] * fc.abs();
    let mut fv = [0.0f64; 14];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        fv[j] = f1;
        fv[7 + j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv[j] - mean).abs() + (fv[7 + j] - mean).abs());
    }
    let value = resk * half;
    let errabs = ((resk - resg) * half).abs();
    let resasc = resasc * half.abs();
    let err = if resasc != 0.0 && errabs != 0.0 {
        resasc * 1.0f64.min((200.0 * errabs / resasc).powf(1.5))
    } else {
        errabs
    };
    // Guard against error estimates below attainable roundoff.
    let round = f64::EPSILON * 50.0 * resabs * half.abs();
    (value, err.max(round))
}

struct Panel {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

/// Adaptive bisection over an initial set of segments. `hints` are extra
/// interior split points (near-singular peaks); `tol` is relative to the
/// accumulated value with a tiny absolute floor.
pub(crate) fn integrate_adaptive(
    f: &mut dyn FnMut(f64) -> f64,
    segments: &[(f64, f64)],
    hints: &[f64],
    tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    let mut panels: Vec<Panel> = Vec::new();
    for &(a, b) in segments {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(EvalError::DomainError(b - a));
        }
        // Carve the segment at any interior hints so the first pass already
        // isolates known peaks.
        let mut cuts: Vec<f64> = hints
            .iter()
            .copied()
            .filter(|h| *h > a && *h < b)
            .collect();
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let mut lo = a;
        for c in cuts.into_iter().chain(std::iter::once(b)) {
            let (v, e) = gk15(f, lo, c);
            panels.push(Panel {
                a: lo,
                b: c,
                val: v,
                err: e,
            });
            lo = c;
        }
    }
    loop {
        let mut total = 0.0f64;
        let mut err = 0.0f64;
        for p in &panels {
            total += p.val;
            err += p.err;
        }
        if !total.is_finite() {
            return Err(EvalError::DomainError(total));
        }
        if err <= tol * total.abs().max(1e-300) || err <= 1e-305 {
            return Ok(QuadResult {
                value: total,
                est_error: err,
                panels: panels.len() as u32,
            });
        }
        if panels.len() >= max_panels {
            // Budget exhausted: report honestly rather than guessing.
            if err > 1e6 * tol * total.abs().max(1e-300) {
                return Err(EvalError::QuadNoConvergence {
                    value: total,
                    est_error: err,
                    tol,
                    panels: panels.len() as u32,
                });
            }
            return Ok(QuadResult {
                value: total,
                est_error: err,
                panels: panels.len() as u32,
            });
        }
        // Split the worst panel.
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .unwrap();
        let Panel { a, b, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // Interval at floating-point resolution; cannot refine further.
            let (v, e) = gk15(f, a, b);
            panels.push(Panel { a, b, val: v, err: e });
            let total: f64 = panels.iter().map(|p| p.val).sum();
            let err: f64 = panels.iter().map(|p| p.err).sum();
            return Ok(QuadResult {
                value: total,
                est_error: err,
                panels: panels.len() as u32,
            });
        }
        let (v1, e1) = gk15(f, a, mid);
        let (v2, e2) = gk15(f, mid, b);
        panels.push(Panel {
            a,
            b: mid,
            val: v1,
            err: e1,
        });
        panels.push(Panel {
            a: mid,
            b,
            val: v2,
            err: e2,
        });
    }
}

/// Convenience wrapper for a single smooth interval.
pub(crate) fn integrate_interval(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult> {
    integrate_adaptive(f, &[(a, b)], &[], tol, 2000)
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// `1 / (rho^2 + (z - v)^2)^{m + 1/2}`.
fn axial_kernel(rho2: f64, dz: f64, m: i32) -> f64 {
    let d = (rho2 + dz * dz).sqrt();
    d.powi(-(2 * m + 1))
}

fn check_point(p: &FieldPoint) -> Result<(f64, f64, f64)> {
    Ok((p.rho_h, p.z_h, p.rho_h * p.rho_h))
}

// ---------------------------------------------------------------------------
// Segment sources: the basic family and the spheroidal product
// ---------------------------------------------------------------------------

/// Reference value (meridional profile) for a finite-segment multipole
/// source of order `m` with the chosen density.
///
/// * `Monomial { power }` with `power = n + m >= 0` on [0, 1] gives the
///   standard-family profile of `L_n^m`.
/// * `Legendre { degree }` on [-1, 1] gives `Q_degree^m(xi) P_degree^m(eta)`
///   in the centered spheroidal frame.
pub fn quad_line_multipole(
    density: LineDensity,
    m: i32,
    p: &FieldPoint,
    tol: f64,
) -> Result<QuadResult> {
    if m < 0 {
        return Err(EvalError::UnsupportedIndex { n: 0, m });
    }
    let (rho, z, rho2) = check_point(p)?;
    let dfact = double_factorial(2 * m - 1);
    match density {
        LineDensity::Monomial { power } => {
            if power < 0 {
                return Err(EvalError::UnsupportedIndex { n: power - m, m });
            }
            if p.singular_distance() <= 0.0 {
                return Err(EvalError::FocalSegmentSingularity(p.xi));
            }
            let pref = dfact * rho.powi(m);
            let mut f = |v: f64| v.powi(power) * axial_kernel(rho2, z - v, m);
            let hint = z.clamp(0.0, 1.0);
            let mut r = integrate_adaptive(&mut f, &[(0.0, 1.0)], &[hint], tol, 4000)?;
            r.value *= pref;
            r.est_error *= pref.abs();
            Ok(r)
        }
        LineDensity::Legendre { degree } => {
            if degree < m {
                // First-kind factor vanishes; the product is identically 0.
                return Ok(QuadResult {
                    value: 0.0,
                    est_error: 0.0,
                    panels: 0,
                });
            }
            // Off the full focal segment |z| <= 1 on the axis.
            if rho == 0.0 && z.abs() <= 1.0 {
                return Err(EvalError::FocalSegmentSingularity(p.xi));
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let pref = 0.5 * sign * dfact * rho.powi(m);
            // (1-v^2)^{m/2} P_deg^m(v) = (1-v^2)^m d^m P_deg(v): polynomial,
            // exact at the endpoints.
            let mut f = |v: f64| {
                let poly = dm_p_array(m, degree, v)[degree as usize];
                let w = (1.0 - v * v).powi(m);
                w * poly * axial_kernel(rho2, z - v, m)
            };
            let hint = z.clamp(-1.0, 1.0);
            let mut r = integrate_adaptive(&mut f, &[(-1.0, 1.0)], &[hint], tol, 4000)?;
            r.value *= pref;
            r.est_error *= pref.abs();
            Ok(r)
        }
    }
}

/// Reference profile for the negative-degree continuation (m = 0):
/// `INT_0^1 v^{-nbar} [ 1/s(v) - sum_{k<nbar} v^k P_k(u)/r^{k+1} ] dv`,
/// the potential of a `v^{-nbar}` charge density regularized by multipoles
/// of infinite strength (their finite parts dropped by definition).
pub fn quad_negative_degree(nbar: i32, p: &FieldPoint, tol: f64) -> Result<QuadResult> {
    if nbar < 1 {
        return Err(EvalError::UnsupportedIndex { n: -nbar, m: 0 });
    }
    if p.singular_distance() <= 0.0 {
        return Err(EvalError::FocalSegmentSingularity(p.xi));
    }
    let (_, z, rho2) = check_point(p)?;
    let r_hat = p.r_h;
    let u = p.u;
    // Multipole coefficients of the source's small-v expansion:
    // 1/s(v) = (1/r) sum_k P_k(u) t^k with t = v/r, |t| < 1. Working in the
    // ratio t keeps every partial quantity in range even very close to the
    // near end of the segment.
    let n_counter = nbar as usize;
    let k_series = 80usize.max(2 * n_counter);
    let pk = p_array(0, k_series as i32, u);
    // Below the switch point the subtracted form cancels catastrophically;
    // evaluate the identical tail series instead.
    let v_switch = (0.5 * r_hat).min(0.9);
    let mut f = |v: f64| {
        let t = v / r_hat;
        if v < v_switch {
            // r^{-nbar-1} sum_{k >= nbar} P_k(u) t^{k - nbar}
            let mut acc = 0.0f64;
            let mut tpow = 1.0f64;
            for k in n_counter..=k_series {
                acc += pk[k] * tpow;
                tpow *= t;
            }
            acc * r_hat.powi(-nbar - 1)
        } else {
            let mut sub = 0.0f64;
            let mut tpow = 1.0f64;
            for k in 0..n_counter {
                sub += pk[k] * tpow;
                tpow *= t;
            }
            (axial_kernel(rho2, z - v, 0) - sub / r_hat) * v.powi(-nbar)
        }
    };
    let hint = z.clamp(0.0, 1.0);
    integrate_adaptive(
        &mut f,
        &[(0.0, 1.0)],
        &[v_switch, hint],
        tol,
        4000,
    )
}

// ---------------------------------------------------------------------------
// Whole-axis sources: solid harmonics of the second kind
// ---------------------------------------------------------------------------

/// Radial type of the second-kind solid harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondKindRadial {
    /// `r^n Q_n^m(u)`: interior type, source on the whole axis plus
    /// counterterms at infinity.
    Interior,
    /// `r^{-n-1} Q_n^m(u)`: exterior type, source diverging at the origin.
    Exterior,
}

/// Reference profile for the solid spherical harmonic of the second kind,
/// degree `n >= -m`, from its whole-axis line-source representation. The
/// numeric window is supplemented by analytic multipole tails on both ends
/// (and around the origin for the exterior type).
pub fn quad_ssh_second_kind(
    n: i32,
    m: i32,
    p: &FieldPoint,
    radial: SecondKindRadial,
    tol: f64,
) -> Result<QuadResult> {
    if m < 0 || n < -m {
        return Err(EvalError::UnsupportedIndex { n, m });
    }
    let (rho, z, rho2) = check_point(p)?;
    if rho <= 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let r_hat = p.r_h;
    let u = p.u;
    let dfact = double_factorial(2 * m - 1);
    let kernel_pref = 0.5 * dfact * rho.powi(m);
    let big_v = 1.5 * r_hat;
    let k_cap = 700i32;
    let pk = p_array(m, k_cap, u);

    match radial {
        SecondKindRadial::Interior => {
            // Numeric window [-V, V]; kink at v = 0, peak near v = z.
            let mut f = |v: f64| {
                let base = v.signum() * v.powi(n + m) * axial_kernel(rho2, z - v, m);
                kernel_pref * base
            };
            let hints = [0.0, z.clamp(-big_v, big_v)];
            let raw = integrate_adaptive(&mut f, &[(-big_v, big_v)], &hints, tol, 4000)?;
            // Counterterms at mu = V: sum_{k=m, n-k odd}^{n-1} V^{n-k}/(n-k) r^k P_k^m.
            let mut counter = 0.0f64;
            let mut k = n - 1;
            while k >= m {
                if (n - k) % 2 == 1 {
                    counter += big_v.powi(n - k) / (n - k) as f64
                        * r_hat.powi(k)
                        * pk[k as usize];
                }
                k -= 1;
            }
            // Analytic tail: sum over k > n with k - n odd and k >= m (lower
            // degrees have no multipole content at order m).
            let mut tail = 0.0f64;
            let mut tail_trunc = 0.0f64;
            let ratio2 = (r_hat / big_v) * (r_hat / big_v);
            let mut k = (n + 1).max(m);
            if (k - n).rem_euclid(2) == 0 {
                k += 1;
            }
            let mut scale_max = 0.0f64;
            let mut smalls = 0;
            while k <= k_cap {
                let term = pk[k as usize] * r_hat.powi(k) * big_v.powi(n - k) / (k - n) as f64;
                tail += term;
                scale_max = scale_max.max(term.abs());
                tail_trunc = term.abs() * ratio2 / (1.0 - ratio2);
                if term.abs() < 1e-18 * tail.abs().max(1e-280) {
                    smalls += 1;
                    if smalls >= 2 {
                        break;
                    }
                } else {
                    smalls = 0;
                }
                k += 2;
            }
            let value = raw.value - counter + tail;
            // Cancellation between window and counterterms limits attainable
            // relative accuracy; account for it honestly.
            let cancel = f64::EPSILON * (raw.value.abs() + counter.abs() + scale_max);
            Ok(QuadResult {
                value,
                est_error: raw.est_error + tail_trunc.max(0.0) + cancel,
                panels: raw.panels,
            })
        }
        SecondKindRadial::Exterior => {
            // Analytic core (|v| < v0), numeric annulus, analytic tail.
            let v0 = 0.75 * r_hat;
            let mut f = |v: f64| {
                let base = v.powi(m - n - 1) * axial_kernel(rho2, z - v, m);
                kernel_pref * base
            };
            let hints = [z.clamp(-big_v, big_v)];
            let raw = integrate_adaptive(
                &mut f,
                &[(-big_v, -v0), (v0, big_v)],
                &hints,
                tol,
                4000,
            )?;
            let mut core = 0.0f64;
            let mut tail = 0.0f64;
            let mut core_trunc = 0.0f64;
            let mut scale_max = 0.0f64;
            let ratio2 = (v0 / r_hat) * (v0 / r_hat);
            let mut k = m;
            if (k - n).rem_euclid(2) == 0 {
                k += 1;
            }
            let mut smalls = 0;
            while k <= k_cap {
                let pkv = pk[k as usize];
                let c = pkv * r_hat.powi(-k - 1) * v0.powi(k - n) / (k - n) as f64;
                core += c;
                scale_max = scale_max.max(c.abs());
                let t = pkv * r_hat.powi(k) * big_v.powi(-(n + k + 1)) / (n + k + 1) as f64;
                tail += t;
                if k > n {
                    core_trunc = c.abs() * ratio2 / (1.0 - ratio2);
                    if c.abs() < 1e-18 * core.abs().max(1e-280)
                        && t.abs() < 1e-18 * tail.abs().max(1e-280)
                    {
                        smalls += 1;
                        if smalls >= 2 {
                            break;
                        }
                    } else {
                        smalls = 0;
                    }
                }
                k += 2;
            }
            let value = core + raw.value + tail;
            let cancel = f64::EPSILON * (raw.value.abs() + scale_max);
            Ok(QuadResult {
                value,
                est_error: raw.est_error + core_trunc.max(0.0) + cancel,
                panels: raw.panels,
            })
        }
    }
}

/// The interior second-kind bracket at a *finite* symmetric truncation `mu`,
/// without the analytic tail: useful for demonstrating convergence of the
/// limit representation as `mu` grows.
pub fn quad_ssh_interior_truncated(
    n: i32,
    m: i32,
    p: &FieldPoint,
    mu: f64,
    tol: f64,
) -> Result<QuadResult> {
    if m < 0 || n < -m {
        return Err(EvalError::UnsupportedIndex { n, m });
    }
    let (rho, z, rho2) = check_point(p)?;
    if rho <= 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    if mu <= 0.0 || !mu.is_finite() {
        return Err(EvalError::DomainError(mu));
    }
    let r_hat = p.r_h;
    let u = p.u;
    let kernel_pref = 0.5 * double_factorial(2 * m - 1) * rho.powi(m);
    let mut f =
        |v: f64| kernel_pref * v.signum() * v.powi(n + m) * axial_kernel(rho2, z - v, m);
    let hints = [0.0, z.clamp(-mu, mu)];
    let raw = integrate_adaptive(&mut f, &[(-mu, mu)], &hints, tol, 4000)?;
    let pk = p_array(m, n.max(0), u);
    let mut counter = 0.0f64;
    let mut k = n - 1;
    while k >= m {
        if (n - k) % 2 == 1 {
            counter += mu.powi(n - k) / (n - k) as f64 * r_hat.powi(k) * pk[k as usize];
        }
        k -= 1;
    }
    Ok(QuadResult {
        value: raw.value - counter,
        est_error: raw.est_error,
        panels: raw.panels,
    })
}

// ---------------------------------------------------------------------------
// Angular integrals: the rational band value and the lowest-degree member
// ---------------------------------------------------------------------------

/// `Q_{-m}^m(cos theta)` from its angular integral,
/// `(2m-1)!!/sin^m(theta) INT_theta^{pi/2} sin^{2m-1}(t) dt`, m >= 1.
pub fn quad_q_minus_m(m: i32, theta: f64, tol: f64) -> Result<QuadResult> {
    if m < 1 {
        return Err(EvalError::UnsupportedIndex { n: -m, m });
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) || theta == 0.0 || theta == std::f64::consts::PI
    {
        return Err(EvalError::SingularArgument(theta.cos()));
    }
    let pref = double_factorial(2 * m - 1) / theta.sin().powi(m);
    let mut f = |t: f64| t.sin().powi(2 * m - 1);
    let (a, b) = if theta <= std::f64::consts::FRAC_PI_2 {
        (theta, std::f64::consts::FRAC_PI_2)
    } else {
        // Oriented integral: swap and negate.
        (std::f64::consts::FRAC_PI_2, theta)
    };
    let mut r = integrate_interval(&mut f, a, b, tol)?;
    if theta > std::f64::consts::FRAC_PI_2 {
        r.value = -r.value;
    }
    r.value *= pref;
    r.est_error *= pref.abs();
    Ok(r)
}

/// Reference profile for the lowest-degree member `L_{-m}^m` from the
/// two-center angular integral
/// `(2m-1)!! / rho^m INT_theta^{theta'} sin^{2m-1}(t) dt` (m >= 1).
/// Positive everywhere off the segment and stable arbitrarily close to the
/// axis, which makes it the referee of choice for the reflected families.
pub fn quad_minus_m_logopole(m: i32, p: &FieldPoint, tol: f64) -> Result<QuadResult> {
    if m < 1 {
        return Err(EvalError::UnsupportedIndex { n: -m, m });
    }
    let (rho, _, _) = check_point(p)?;
    if rho <= 0.0 {
        return Err(EvalError::AxisSingularity);
    }
    let pref = double_factorial(2 * m - 1) / rho.powi(m);
    // The angular integral int_theta^theta' sin^{2m-1} in the cosine
    // variable t is int_{u'}^{u} (1 - t^2)^{m-1} dt. Near the axis both
    // cosines approach +-1 and the interval endpoints must be located to
    // full relative precision, so shift to s = 1 -+ t with the endpoint
    // computed from the cancellation-free factorization
    // 1 -+ z/r = rho^2 / (r (r +- z)).
    let mm = m - 1;
    let mut r = if p.z_h >= 1.0 {
        let s_lo = rho * rho / (p.r_h * (p.r_h + p.z_h));
        let s_hi = rho * rho / (p.rp_h * (p.rp_h + p.z_h - 1.0));
        let mut f = |s: f64| (s * (2.0 - s)).powi(mm);
        integrate_interval(&mut f, s_lo, s_hi, tol)?
    } else if p.z_h <= 0.0 {
        let w_lo = rho * rho / (p.rp_h * (p.rp_h + 1.0 - p.z_h));
        let w_hi = rho * rho / (p.r_h * (p.r_h - p.z_h));
        let mut f = |w: f64| (w * (2.0 - w)).powi(mm);
        integrate_interval(&mut f, w_lo, w_hi, tol)?
    } else {
        let mut f = |t: f64| (1.0 - t * t).powi(mm);
        integrate_interval(&mut f, p.up, p.u, tol)?
    };
    r.value *= pref;
    r.est_error *= pref.abs();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::legendre_q;

    /// ln(1 + sqrt(2)): uniform-density value at rho = 1, z = 0.
    const L0_CORNER: f64 = 0.881373587019543;

    fn pt(rho: f64, z: f64) -> FieldPoint {
        FieldPoint::new(rho, z, 0.0, 1.0).unwrap()
    }

    #[test]
    fn engine_integrates_polynomials_exactly() {
        let mut f = |x: f64| x * x;
        let r = integrate_interval(&mut f, 0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-15);
        let mut g = |x: f64| x.powi(21);
        let r = integrate_interval(&mut g, -1.0, 2.0, 1e-12).unwrap();
        let exact = (2.0f64.powi(22) - 1.0) / 22.0;
        assert!((r.value - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn engine_handles_integrable_peak() {
        // INT_0^1 dx / sqrt(x) = 2, singular at the left endpoint.
        let mut f = |x: f64| 1.0 / x.sqrt();
        let r = integrate_adaptive(&mut f, &[(1e-300, 1.0)], &[], 1e-10, 4000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-6, "got {}", r.value);
    }

    #[test]
    fn uniform_density_matches_frozen_corner_value() {
        let p = pt(1.0, 0.0);
        let r = quad_line_multipole(LineDensity::Monomial { power: 0 }, 0, &p, 1e-12).unwrap();
        assert!(
            (r.value - L0_CORNER).abs() < 1e-11,
            "L_0(1,0) = {} vs {}",
            r.value,
            L0_CORNER
        );
        assert!(r.est_error < 1e-10);
    }

    #[test]
    fn linear_density_matches_boundary_identity() {
        // INT_0^1 v/s dv = z L_0 + r' - r exactly.
        for &(rho, z) in &[(1.0, 0.0), (0.7, 0.4), (2.0, -1.0), (0.3, 1.8)] {
            let p = pt(rho, z);
            let l0 = quad_line_multipole(LineDensity::Monomial { power: 0 }, 0, &p, 1e-12)
                .unwrap()
                .value;
            let l1 = quad_line_multipole(LineDensity::Monomial { power: 1 }, 0, &p, 1e-12)
                .unwrap()
                .value;
            let expect = z * l0 + p.rp_h - p.r_h;
            assert!(
                (l1 - expect).abs() < 1e-10 * (1.0 + expect.abs()),
                "at ({rho},{z}): {l1} vs {expect}"
            );
        }
    }

    #[test]
    fn quadratic_density_frozen_value() {
        // 2 L_2 - 3 z L_1 + r^2 L_0 = r' at (1, 0) gives L_2 = (sqrt(2) - L_0)/2.
        let p = pt(1.0, 0.0);
        let l2 = quad_line_multipole(LineDensity::Monomial { power: 2 }, 0, &p, 1e-12)
            .unwrap()
            .value;
        let expect = (2.0f64.sqrt() - L0_CORNER) / 2.0;
        assert!((l2 - expect).abs() < 1e-11, "{l2} vs {expect}");
    }

    #[test]
    fn legendre_weighted_density_reproduces_spheroidal_product_m0() {
        // Half the uniform integral over [-1,1] is atanh(1/xi) exactly.
        for &(rho, z) in &[(1.0, 0.5), (0.5, 2.0), (2.0, -0.3)] {
            let p = pt(rho, z);
            let r = quad_line_multipole(LineDensity::Legendre { degree: 0 }, 0, &p, 1e-12)
                .unwrap();
            let expect = (1.0 / p.xi).atanh();
            assert!(
                (r.value - expect).abs() < 1e-10 * expect.abs().max(1.0),
                "at ({rho},{z}): {} vs {expect}",
                r.value
            );
        }
    }

    #[test]
    fn legendre_weighted_density_cross_checks_second_kind_values() {
        // Independent paths: the segment integral vs direct evaluation of
        // Q_n^m(xi) P_n^m(eta) via the Legendre module.
        for &(n, m) in &[(1, 0), (2, 0), (1, 1), (2, 1), (2, 2), (4, 2), (5, 3)] {
            for &(rho, z) in &[(1.2, 0.4), (0.6, 1.4), (2.5, -0.8)] {
                let p = pt(rho, z);
                let r =
                    quad_line_multipole(LineDensity::Legendre { degree: n }, m, &p, 1e-12)
                        .unwrap();
                let q = legendre_q(n, m, p.xi).unwrap().value;
                let pe = crate::legendre::legendre_p(n, m, p.eta).unwrap();
                let expect = q * pe;
                assert!(
                    (r.value - expect).abs() < 1e-9 * expect.abs().max(1e-6),
                    "n={n} m={m} at ({rho},{z}): {} vs {expect}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn negative_degree_matches_closed_log_form() {
        // Independent check: the nbar = 1 member has the closed form
        // (1/r) ln(2r / (r + r' - u)) with u = cos(theta).
        for &(rho, z) in &[(1.0, 0.0), (0.8, 0.5), (1.5, -0.7), (0.4, 1.9), (3.0, 1.0)] {
            let p = pt(rho, z);
            let r = quad_negative_degree(1, &p, 1e-12).unwrap();
            let expect = (2.0 * p.r_h / (p.r_h + p.rp_h - p.u)).ln() / p.r_h;
            assert!(
                (r.value - expect).abs() < 1e-9 * expect.abs().max(1.0),
                "at ({rho},{z}): {} vs {expect}",
                r.value
            );
        }
    }

    #[test]
    fn second_kind_interior_matches_legendre_module() {
        for &(n, m) in &[(0, 0), (1, 0), (3, 0), (1, 1), (2, 1), (-1, 1), (2, 2), (-2, 2), (4, 3)] {
            for &(rho, z) in &[(0.8, 0.3), (1.6, -0.9), (0.5, 1.2)] {
                let p = pt(rho, z);
                let r = quad_ssh_second_kind(n, m, &p, SecondKindRadial::Interior, 1e-11)
                    .unwrap();
                let expect = p.r_h.powi(n) * legendre_q(n, m, p.u).unwrap().value;
                assert!(
                    (r.value - expect).abs() < 2e-8 * expect.abs().max(1.0),
                    "n={n} m={m} at ({rho},{z}): {} vs {expect} (est {})",
                    r.value,
                    r.est_error
                );
            }
        }
    }

    #[test]
    fn second_kind_exterior_matches_legendre_module() {
        for &(n, m) in &[(0, 0), (2, 0), (1, 1), (3, 2), (-1, 1)] {
            for &(rho, z) in &[(0.9, 0.4), (1.8, -0.6)] {
                let p = pt(rho, z);
                let r = quad_ssh_second_kind(n, m, &p, SecondKindRadial::Exterior, 1e-11)
                    .unwrap();
                let expect = p.r_h.powi(-n - 1) * legendre_q(n, m, p.u).unwrap().value;
                assert!(
                    (r.value - expect).abs() < 2e-8 * expect.abs().max(1.0),
                    "n={n} m={m} at ({rho},{z}): {} vs {expect} (est {})",
                    r.value,
                    r.est_error
                );
            }
        }
    }

    #[test]
    fn truncated_interior_converges_with_window() {
        let p = pt(1.1, 0.6);
        let n = 3;
        let m = 1;
        let expect = p.r_h.powi(n) * legendre_q(n, m, p.u).unwrap().value;
        // The leading truncation term decays only like 1/mu, so check the
        // rate across a 16x window growth rather than an absolute target.
        let mut errs = Vec::new();
        for &mu in &[2.0, 8.0, 32.0] {
            let r = quad_ssh_interior_truncated(n, m, &p, mu, 1e-11).unwrap();
            errs.push((r.value - expect).abs());
        }
        assert!(errs[1] < errs[0] * 0.5, "{errs:?}");
        assert!(errs[2] < errs[1] * 0.5, "{errs:?}");
        assert!(errs[2] < 8.0 * errs[0] / 16.0, "{errs:?}");
    }

    #[test]
    fn angular_band_value_matches_rational_form() {
        for m in 1..=6 {
            for &theta in &[0.4, 1.0, 1.9, 2.6] {
                let r = quad_q_minus_m(m, theta, 1e-12).unwrap();
                let expect = legendre_q(-m, m, theta.cos()).unwrap().value;
                assert!(
                    (r.value - expect).abs() < 1e-10 * expect.abs().max(1.0),
                    "m={m} theta={theta}: {} vs {expect}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn lowest_degree_profile_positive_and_consistent() {
        // L_{-m}^m = [sin^m Q_{-m}^m(u) - sin^m Q_{-m}^m(u')] / rho^m via the
        // band polynomial, vs the angular integral.
        for m in 1..=5 {
            for &(rho, z) in &[(0.7, 0.5), (1.5, -0.4), (0.9, 1.7)] {
                let p = pt(rho, z);
                let r = quad_minus_m_logopole(m, &p, 1e-12).unwrap();
                assert!(r.value > 0.0);
                let naive = (crate::legendre::q_minus_m_times_sin_m(m, p.u)
                    - crate::legendre::q_minus_m_times_sin_m(m, p.up))
                    / rho.powi(m);
                assert!(
                    (r.value - naive).abs() < 1e-10 * naive.abs().max(1.0),
                    "m={m} at ({rho},{z}): {} vs {naive}",
                    r.value
                );
            }
        }
    }

    #[test]
    fn near_singular_point_converges_honestly() {
        let p = pt(1e-5, 0.5);
        let r = quad_line_multipole(LineDensity::Monomial { power: 2 }, 0, &p, 1e-10).unwrap();
        assert!(r.value.is_finite() && r.value > 0.0);
        assert!(r.est_error < 1e-7 * r.value);
    }

    #[test]
    fn on_segment_point_is_rejected() {
        let p = pt(0.0, 0.5);
        assert!(matches!(
            quad_line_multipole(LineDensity::Monomial { power: 0 }, 0, &p, 1e-10),
            Err(EvalError::FocalSegmentSingularity(_))
        ));
        assert!(matches!(
            quad_ssh_second_kind(1, 0, &p, SecondKindRadial::Interior, 1e-10),
            Err(EvalError::AxisSingularity)
        ));
    }
}
