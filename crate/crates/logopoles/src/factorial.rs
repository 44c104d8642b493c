//! Factorial-family helpers shared by every module.
//!
//! Tables run to index 400; entries past 170 overflow to `f64::INFINITY`,
//! which is fine for the places the raw tables are used (small indices).
//! Anything that can legitimately see large indices goes through the
//! incremental-ratio helpers instead so no intermediate overflows.

const TABLE_LEN: usize = 401;

fn factorial_table() -> &'static [f64; TABLE_LEN] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0f64; TABLE_LEN];
        for k in 1..TABLE_LEN {
            t[k] = t[k - 1] * k as f64;
        }
        t
    })
}

fn double_factorial_table() -> &'static [f64; TABLE_LEN] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0f64; TABLE_LEN];
        for k in 2..TABLE_LEN {
            t[k] = t[k - 2] * k as f64;
        }
        t
    })
}

/// k! for k >= 0 (infinity past 170).
pub fn factorial(k: i32) -> f64 {
    assert!(k >= 0, "factorial of negative integer {k}");
    if (k as usize) < TABLE_LEN {
        factorial_table()[k as usize]
    } else {
        f64::INFINITY
    }
}

/// k!! with the empty-product conventions (-1)!! = 0!! = 1 and (-3)!! = -1.
pub fn double_factorial(k: i32) -> f64 {
    assert!(k >= -3, "double factorial of {k} is not used anywhere");
    match k {
        -3 => -1.0,
        -1 | 0 => 1.0,
        _ if (k as usize) < TABLE_LEN => double_factorial_table()[k as usize],
        _ => f64::INFINITY,
    }
}

/// a!/b! for a, b >= 0 computed as an explicit product, so it stays finite for
/// indices far beyond 170 as long as the ratio itself fits in f64.
pub fn factorial_ratio(a: i32, b: i32) -> f64 {
    assert!(a >= 0 && b >= 0);
    if a >= b {
        ((b + 1)..=a).fold(1.0, |acc, k| acc * k as f64)
    } else {
        1.0 / factorial_ratio(b, a)
    }
}

/// Binomial coefficient as f64, multiplicative form (exact for all values
/// representable in f64, no 170! overflow).
pub fn binomial(n: i32, k: i32) -> f64 {
    if k < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}
