//! Associated Legendre functions of both kinds, in every index regime the
//! segment-source families need.
//!
//! Conventions (no Condon-Shortley phase anywhere):
//!
//! ```text
//! P_n^m(x) = |1 - x^2|^{m/2} d^m P_n(x) / dx^m,       P_1^1(x) = +sqrt(1-x^2)
//! Q_n^m(x) = |1 - x^2|^{m/2} d^m Q_n(x) / dx^m
//! Q_0(x)   = atanh(x)            for |x| < 1
//! Q_0(x)   = atanh(1/x)          for  x  > 1
//! ```
//!
//! On the cut (|x| < 1) the second kind splits into a log part and a rational
//! part,
//!
//! ```text
//! Q_n^m(x) = P_n^m(x) atanh(x) - W_{n-1}^m(x),
//! W_{n-1}^0(x) = sum_{k=1..n} P_{k-1}(x) P_{n-k}(x) / k,
//! ```
//!
//! and `Q_n^m` stays finite for all degrees n >= -m. In the band
//! -m <= n < m the log part vanishes (`P_n^m = 0`) and `Q_n^m` is a pure
//! rational function, obtained from a terminating hypergeometric sum for
//! n < 0 and continued through the band by the shared three-term degree
//! recurrence
//!
//! ```text
//! (n - m + 1) C_{n+1}^m = (2n + 1) x C_n^m - (n + m) C_{n-1}^m .
//! ```
//!
//! Order raising for any solution family (P, Q, W alike) uses
//!
//! ```text
//! C_n^{m+1} = [ (n + m) C_{n-1}^m - (n - m) x C_n^m ] / sqrt(1 - x^2)   (|x| < 1)
//! C_n^{m+1} = [ (n - m) x C_n^m - (n + m) C_{n-1}^m ] / sqrt(x^2 - 1)   ( x  > 1)
//! ```
//!
//! For x > 1 the second kind is the recessive solution, so large degrees come
//! from a backward (Miller-style) sweep normalized against `atanh(1/x)` at
//! m = 0 or against a closed Leibniz form for `Q_m^m` at m > 0.

use crate::error::{EvalError, Result};
use crate::factorial::{double_factorial, factorial, factorial_ratio};

/// Split evaluation of a second-kind function. On the cut with n >= m the
/// value is `log_coefficient * atanh(x) - W`, and `log_coefficient = P_n^m(x)`;
/// in rational regimes (band indices, exterior argument) `has_log_part` is
/// false and `log_coefficient` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreValue {
    pub value: f64,
    pub has_log_part: bool,
    pub log_coefficient: f64,
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(EvalError::DomainError(x))
    }
}

/// First-kind values for n = 0..=n_max at fixed order m >= 0. Entries with
/// n < m are zero. `s` is |1-x^2|^{1/2}; callers near the axis pass the
/// exactly-known sin(theta) instead of recomputing it from x.
pub(crate) fn p_array_with_sin(m: i32, n_max: i32, x: f64, s: f64) -> Vec<f64> {
    debug_assert!(m >= 0);
    let len = (n_max.max(-1) + 1) as usize;
    let mut out = vec![0.0f64; len];
    if n_max < m {
        return out;
    }
    // P_m^m = (2m-1)!! s^m, then one raised-degree seed and the three-term
    // degree recurrence upward (neutrally stable on the cut, dominant-growth
    // stable for x > 1).
    let mut pmm = double_factorial(2 * m - 1);
    for _ in 0..m {
        pmm *= s;
    }
    out[m as usize] = pmm;
    if n_max == m {
        return out;
    }
    let mut prev = pmm;
    let mut cur = (2 * m + 1) as f64 * x * pmm;
    out[(m + 1) as usize] = cur;
    for n in (m + 1)..n_max {
        let next = ((2 * n + 1) as f64 * x * cur - (n + m) as f64 * prev) / (n - m + 1) as f64;
        prev = cur;
        cur = next;
        out[(n + 1) as usize] = cur;
    }
    out
}

pub(crate) fn p_array(m: i32, n_max: i32, x: f64) -> Vec<f64> {
    let s = ((1.0 - x) * (1.0 + x)).abs().sqrt();
    p_array_with_sin(m, n_max, x, s)
}

/// First-kind Legendre function, paper-free sign convention (no
/// Condon-Shortley phase), valid on the cut and for |x| > 1.
///
/// Negative orders with -n <= m < 0 use the reflection
/// `P_n^{-m} = (-1)^m (n-m)!/(n+m)! P_n^m`; `m > n` returns 0.
pub fn legendre_p(n: i32, m: i32, x: f64) -> Result<f64> {
    check_finite(x)?;
    if n < 0 {
        return Err(EvalError::UnsupportedIndex { n, m });
    }
    if m < -n {
        return Err(EvalError::UnsupportedIndex { n, m });
    }
    if m > n {
        return Ok(0.0);
    }
    let ma = m.abs();
    let p = p_array(ma, n, x)[n as usize];
    if m >= 0 {
        Ok(p)
    } else {
        let sign = if ma % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * factorial_ratio(n - ma, n + ma) * p)
    }
}

/// m-th derivative of the Legendre polynomials: row `d^m P_n / dx^m` for
/// n = 0..=n_max. Used where `P_n^m / |1-x^2|^{m/2}` must stay finite at
/// x = +/-1 (quadrature densities, projection integrals).
pub(crate) fn dm_p_array(m: i32, n_max: i32, x: f64) -> Vec<f64> {
    debug_assert!(m >= 0);
    let len = (n_max + 1) as usize;
    let mut cur = vec![0.0f64; len];
    // Derivative order 0: plain polynomials.
    if len > 0 {
        cur[0] = 1.0;
    }
    if len > 1 {
        cur[1] = x;
        for n in 1..n_max {
            cur[(n + 1) as usize] = ((2 * n + 1) as f64 * x * cur[n as usize]
                - n as f64 * cur[(n - 1) as usize])
                / (n + 1) as f64;
        }
    }
    // Raise the derivative order via d^j P_{n+1} = x d^j P_n + (n+j) d^{j-1} P_n.
    for j in 1..=m {
        let mut next = vec![0.0f64; len];
        for n in (j - 1)..n_max {
            next[(n + 1) as usize] = x * next[n as usize] + (n + j) as f64 * cur[n as usize];
        }
        cur = next;
    }
    cur
}

/// Ferrers first kind with order -m, m > n >= 0 (outside the reflection
/// formula's reach), via the terminating hypergeometric series. Needed only
/// by the band connection identity between the two kinds.
pub fn legendre_p_negative_order_general(n: i32, m: i32, x: f64) -> Result<f64> {
    check_finite(x)?;
    if n < 0 || m <= 0 {
        return Err(EvalError::UnsupportedIndex { n, m: -m });
    }
    if x.abs() >= 1.0 {
        return Err(EvalError::SingularArgument(x));
    }
    if m <= n {
        return legendre_p(n, -m, x);
    }
    let w = 0.5 * (1.0 - x);
    // 2F1(-n, n+1; 1+m; w), n+1 terms.
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..n {
        term *= (k as f64 - n as f64) * (n + 1 + k) as f64 / ((1 + m + k) as f64 * (k + 1) as f64)
            * w;
        sum += term;
    }
    let half = ((1.0 - x) / (1.0 + x)).powf(0.5 * m as f64);
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign / factorial(m) * half * sum)
}

// ---------------------------------------------------------------------------
// Second kind on the cut (|x| < 1)
// ---------------------------------------------------------------------------

/// Terminating sum for the rational negative-degree values
/// `Q_{-nbar-1}^m(x)` with 0 <= nbar < m, |x| < 1.
pub fn q_rational_negative(nbar: i32, m: i32, x: f64) -> f64 {
    debug_assert!(nbar >= 0 && nbar < m);
    let pref = factorial(m + nbar) * factorial(m - nbar - 1) * double_factorial(2 * nbar - 1);
    let mut sum = 0.0f64;
    let qmax = (m + nbar) / 2;
    for q in 0..=qmax {
        let pow = m + nbar - 2 * q;
        let mut denom = factorial(pow) * double_factorial(2 * q);
        for k in 0..q {
            denom *= (2 * nbar - 2 * k - 1) as f64;
        }
        let sign = if (q + nbar) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * x.powi(pow) / denom;
    }
    let smi = (1.0 - x * x).powf(-0.5 * m as f64);
    pref * smi * sum
}

/// Odd polynomial `sin^m(theta) * Q_{-m}^m(cos theta)` evaluated at u:
/// `(2m-1)!! sum_k (-1)^k binom(m-1, k) u^{2k+1} / (2k+1)`. This is the
/// axis-stable core of the lowest-degree reflected family.
pub(crate) fn q_minus_m_times_sin_m(m: i32, u: f64) -> f64 {
    debug_assert!(m >= 1);
    let mut sum = 0.0f64;
    let mut binom = 1.0f64; // binom(m-1, k)
    let u2 = u * u;
    let mut upow = u;
    for k in 0..m {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * upow / (2 * k + 1) as f64;
        binom *= (m - 1 - k) as f64 / (k + 1) as f64;
        upow *= u2;
    }
    double_factorial(2 * m - 1) * sum
}

/// All second-kind values on the cut for degrees n = -m ..= n_max at fixed
/// order m >= 0. Index i holds degree n = i - m.
///
/// Degrees n >= m are built as `P_n^m atanh(x) - W_{n-1}^m` with the W array
/// raised from order zero; the rational band -m <= n < m is reached by
/// running the degree recurrence downward from (Q_m^m, Q_{m+1}^m).
pub(crate) fn q_cut_array(m: i32, n_max: i32, x: f64) -> Result<Vec<f64>> {
    let s = ((1.0 - x) * (1.0 + x)).abs().sqrt();
    q_cut_array_with_sin(m, n_max, x, s)
}

/// As [`q_cut_array`], with `sin(theta) = sqrt(1-x^2)` supplied by the
/// caller. Near the axis the steep `s^{-m}` part of Q dominates, and a
/// cylindrical caller knows `s = rho/r` far more accurately than it can be
/// recovered from the rounded `x`; identities that cancel that divergence
/// across frames need this to cancel consistently.
pub(crate) fn q_cut_array_with_sin(m: i32, n_max: i32, x: f64, s: f64) -> Result<Vec<f64>> {
    q_cut_array_stable(m, n_max, x, s, x.atanh())
}

/// As [`q_cut_array_with_sin`], additionally taking `atanh(x)` from the
/// caller. `atanh` amplifies input rounding by `1/(1-x^2)`; a caller that
/// knows `1 -+ x` exactly (e.g. `1 - u = rho^2 / (r(r+z))`) can supply
/// `atanh(x) = ln((1+x)/(1-x))/2` with full relative accuracy, which the
/// rounded `x` alone cannot achieve near the axis.
pub(crate) fn q_cut_array_stable(
    m: i32,
    n_max: i32,
    x: f64,
    s: f64,
    atanh_x: f64,
) -> Result<Vec<f64>> {
    debug_assert!(m >= 0);
    if x.abs() >= 1.0 || s <= 0.0 {
        return Err(EvalError::SingularArgument(x));
    }
    let n_top = n_max.max(m + 1);
    let len = (n_top + m + 1) as usize;
    let q0 = atanh_x;
    let p = p_array_with_sin(m, n_top, x, s);
    let w = w_array_from_order_zero(m, n_top - 1, x, s);
    let mut out = vec![0.0f64; len];
    for n in m..=n_top {
        let wv = if n == 0 { 0.0 } else { w[(n - 1) as usize] };
        out[(n + m) as usize] = p[n as usize] * q0 - wv;
    }
    // March the band downward: Q_{n-1} = [(2n+1) x Q_n - (n-m+1) Q_{n+1}] / (n+m).
    for n in (-m + 1..=m).rev() {
        let qn = out[(n + m) as usize];
        let qn1 = out[(n + m + 1) as usize];
        out[(n + m - 1) as usize] =
            ((2 * n + 1) as f64 * x * qn - (n - m + 1) as f64 * qn1) / (n + m) as f64;
    }
    out.truncate((n_max + m + 1) as usize);
    Ok(out)
}

/// W polynomials `W_{n-1}^m` for n = 0..=n_max+? returned as index n-1 -> value
/// at indices 0..=k_max (i.e. entry k holds `W_k^m`). Entries below k = m-1
/// are produced by the raising chain and equal `-Q_{k+1}^m` only for band
/// indices handled elsewhere; this routine only serves k >= -1 with
/// `W_{-1}^m = 0` implicit (not stored).
fn w_array_from_order_zero(m: i32, k_max: i32, x: f64, s: f64) -> Vec<f64> {
    if k_max < 0 {
        return Vec::new();
    }
    // Order zero over a range long enough to survive m raisings: the raise
    // consumes one lower-degree neighbour per level.
    let top = k_max + 1; // C_n := W_{n-1}, need n up to k_max + 1
    let mut c = vec![0.0f64; (top + 1) as usize];
    // C_0 = W_{-1} = 0, C_1 = W_0 = 1, then the degree recurrence.
    if top >= 1 {
        c[1] = 1.0;
    }
    for n in 1..top {
        c[(n + 1) as usize] =
            ((2 * n + 1) as f64 * x * c[n as usize] - n as f64 * c[(n - 1) as usize]) / (n + 1) as f64;
    }
    for j in 0..m {
        let mut next = vec![0.0f64; (top + 1) as usize];
        for n in 1..=top {
            next[n as usize] =
                ((n + j) as f64 * c[(n - 1) as usize] - (n - j) as f64 * x * c[n as usize]) / s;
        }
        c = next;
    }
    // Shift: entry k of the result is W_k^m = C_{k+1}.
    (1..=(k_max + 1)).map(|n| c[n as usize]).collect()
}

/// Shifted W array for the log/rational split of a whole second-kind sum:
/// entry `i` holds `W_{k-1}^m(x)` with `k = i - m`, for `k = -m ..= n_max`.
///
/// Degrees `k >= m` come from the order-raising chain (true rational
/// companions); band degrees `k < m` use `W_{k-1}^m = -Q_k^m` (the first-kind
/// log coefficient `P_k^m` vanishes there), with the convention `W_{-1}^0 = 0`
/// at order zero. `s` and `atanh_x` as in [`q_cut_array_stable`].
pub(crate) fn w_shifted_array(
    m: i32,
    n_max: i32,
    x: f64,
    s: f64,
    atanh_x: f64,
) -> Result<Vec<f64>> {
    debug_assert!(m >= 0 && n_max >= m);
    let band_q = q_cut_array_stable(m, m, x, s, atanh_x)?;
    let w_hi = w_array_from_order_zero(m, n_max - 1, x, s);
    let mut out = Vec::with_capacity((n_max + m + 1) as usize);
    for k in -m..=n_max {
        let v = if m == 0 && k == 0 {
            0.0
        } else if k < m {
            -band_q[(k + m) as usize]
        } else {
            w_hi[(k - 1) as usize]
        };
        out.push(v);
    }
    Ok(out)
}

/// `W_k^m(x)`: the rational companion of the second kind on the cut, such
/// that `Q_n^m = P_n^m atanh(x) - W_{n-1}^m` for n >= m. Defined for
/// k >= -m-1; for k < m-1 it equals `-Q_{k+1}^m` (band values).
pub fn w_poly(k: i32, m: i32, x: f64) -> Result<f64> {
    check_finite(x)?;
    if m < 0 {
        return Err(EvalError::UnsupportedIndex { n: k, m });
    }
    if k < -m - 1 {
        return Err(EvalError::UnsupportedIndex { n: k, m });
    }
    // W^0 is a plain polynomial (any x); for m > 0 the 1/sqrt(1-x^2) factors
    // restrict the domain to the open cut.
    if x.abs() >= 1.0 && m > 0 {
        return Err(EvalError::SingularArgument(x));
    }
    if k == -1 && m == 0 {
        return Ok(0.0);
    }
    if k < m - 1 {
        // Band: W_k^m = -Q_{k+1}^m, rational.
        let q = q_cut_array(m, m + 1, x)?;
        return Ok(-q[(k + 1 + m) as usize]);
    }
    let s = ((1.0 - x) * (1.0 + x)).abs().sqrt();
    Ok(w_array_from_order_zero(m, k, x, s)[k as usize])
}

/// Second-kind Legendre function.
///
/// * `|x| < 1`: any degree n >= -m (split form for n >= m, rational band
///   below). Returns the split in [`LegendreValue`].
/// * `x > 1`: backward-recurrence evaluation, degrees n >= -m (band degrees
///   are the downward continuation of the recurrence).
/// * Negative order with n >= |m| maps through
///   `Q_n^{-m} = (-1)^m (n-m)!/(n+m)! Q_n^m`.
pub fn legendre_q(n: i32, m: i32, x: f64) -> Result<LegendreValue> {
    check_finite(x)?;
    if m < 0 {
        let ma = -m;
        if n < ma {
            return Err(EvalError::UnsupportedIndex { n, m });
        }
        let base = legendre_q(n, ma, x)?;
        let sign = if ma % 2 == 0 { 1.0 } else { -1.0 };
        let f = sign * factorial_ratio(n - ma, n + ma);
        return Ok(LegendreValue {
            value: f * base.value,
            has_log_part: base.has_log_part,
            log_coefficient: f * base.log_coefficient,
        });
    }
    if n < -m {
        return Err(EvalError::UnsupportedIndex { n, m });
    }
    if x.abs() == 1.0 {
        return Err(EvalError::SingularArgument(x));
    }
    if x.abs() < 1.0 {
        let arr = q_cut_array(m, n.max(m), x)?;
        let value = arr[(n + m) as usize];
        if n >= m {
            Ok(LegendreValue {
                value,
                has_log_part: true,
                log_coefficient: legendre_p(n, m, x)?,
            })
        } else {
            Ok(LegendreValue {
                value,
                has_log_part: false,
                log_coefficient: 0.0,
            })
        }
    } else if x > 1.0 {
        let arr = q_ext_array(m, n.max(m), x)?;
        Ok(LegendreValue {
            value: arr[(n + m) as usize],
            has_log_part: false,
            log_coefficient: 0.0,
        })
    } else {
        // x < -1 is never needed by the segment families.
        Err(EvalError::DomainError(x))
    }
}

// ---------------------------------------------------------------------------
// Second kind, exterior argument (x > 1)
// ---------------------------------------------------------------------------

/// Closed Leibniz form for `Q_m^m(x)`, x > 1: expand
/// `d^m [P_m Q_0 - W_{m-1}^0] / dx^m` with exact polynomial derivative rows
/// and the elementary derivatives of `atanh(1/x)`.
fn q_mm_exterior(m: i32, x: f64) -> f64 {
    let q0 = (1.0 / x).atanh();
    if m == 0 {
        return q0;
    }
    // Derivative rows of P_n and of V_n := W_{n-1}^0 up to order m at degree m.
    // d^j P at degree m for j = 0..=m:
    let mut dp = vec![0.0f64; (m + 1) as usize];
    for (j, slot) in dp.iter_mut().enumerate() {
        *slot = dm_p_array(j as i32, m, x)[m as usize];
    }
    // V rows: V_0 = 0, V_1 = 1; (n+1) V_{n+1} = (2n+1)(x V_n)' rules handled
    // by differentiating the degree recurrence j times.
    // dv[j][n] = d^j V_n.
    let nn = (m + 1) as usize;
    let mut dv = vec![vec![0.0f64; nn]; (m + 1) as usize];
    if m >= 1 {
        dv[0][1] = 1.0;
    }
    for n in 1..m {
        for j in 0..=m {
            let d_xvn = x * dv[j as usize][n as usize]
                + if j > 0 {
                    j as f64 * dv[(j - 1) as usize][n as usize]
                } else {
                    0.0
                };
            dv[j as usize][(n + 1) as usize] = ((2 * n + 1) as f64 * d_xvn
                - n as f64 * dv[j as usize][(n - 1) as usize])
                / (n + 1) as f64;
        }
    }
    // Derivatives of Q_0 = atanh(1/x): order k >= 1 gives
    // ((-1)^{k-1} (k-1)!/2) [ (x+1)^{-k} - (x-1)^{-k} ].
    let mut dq0 = vec![q0; (m + 1) as usize];
    for k in 1..=m {
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        dq0[k as usize] = 0.5
            * sign
            * factorial(k - 1)
            * ((x + 1.0).powi(-k) - (x - 1.0).powi(-k));
    }
    // Leibniz: d^m(P_m Q_0) = sum_j binom(m,j) d^j P_m d^{m-j} Q_0.
    let mut acc = 0.0f64;
    let mut binom = 1.0f64;
    for j in 0..=m {
        acc += binom * dp[j as usize] * dq0[(m - j) as usize];
        binom *= (m - j) as f64 / (j + 1) as f64;
    }
    acc -= dv[m as usize][m as usize];
    (x * x - 1.0).powf(0.5 * m as f64) * acc
}

/// Exterior second-kind values for degrees n = -m ..= n_max (index i holds
/// n = i - m) via a backward sweep. Seeds start `max(20, 10/ln x)` degrees
/// above the target; the recessive character of Q for x > 1 washes out the
/// arbitrary seed, and the sweep is normalized at the known lowest m = 0 /
/// n = m value.
pub(crate) fn q_ext_array(m: i32, n_max: i32, x: f64) -> Result<Vec<f64>> {
    debug_assert!(m >= 0);
    if x <= 1.0 {
        return Err(EvalError::DomainError(x));
    }
    let pad = 20.0f64.max((10.0 / x.ln()).ceil()).min(60_000.0) as i32;
    let n_start = n_max.max(m) + pad;
    let len = (n_start + m + 1) as usize;
    let mut c = vec![0.0f64; len + 1];
    c[len] = 0.0; // degree n_start + 1
    c[len - 1] = 1e-280; // degree n_start
    // March down: C_{n-1} = [(2n+1) x C_n - (n-m+1) C_{n+1}] / (n+m).
    for n in (-m + 1..=n_start).rev() {
        let i = (n + m) as usize;
        let cn = c[i];
        let cn1 = c[i + 1];
        let v = ((2 * n + 1) as f64 * x * cn - (n - m + 1) as f64 * cn1) / (n + m) as f64;
        c[i - 1] = v;
        if v.abs() > 1e250 {
            for w in c[i - 1..].iter_mut() {
                *w *= 1e-250;
            }
        }
    }
    let reference = q_mm_exterior(m, x);
    let anchor = c[(2 * m) as usize]; // degree n = m
    if anchor == 0.0 || !anchor.is_finite() {
        return Err(EvalError::NonConvergence {
            partial: 0.0,
            est_error: f64::INFINITY,
            terms: n_start as u32,
        });
    }
    let ratio = reference / anchor;
    let mut out: Vec<f64> = c[..(n_max + m + 1) as usize].to_vec();
    for v in out.iter_mut() {
        *v *= ratio;
    }
    Ok(out)
}
