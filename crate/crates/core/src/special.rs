//! Special functions: log-gamma, regularized incomplete gamma, the chi-square
//! distribution and the normal CDF.

use std::f64::consts::{LN_2, PI};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn prefactor(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..MAX_ITER {
        term *= x / (a + n as f64);
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * prefactor(a, x)
}

fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    // modified Lentz
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    prefactor(a, x) * h
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x) / Γ(a)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        lower_series(a, x).min(1.0)
    } else {
        (1.0 - upper_continued_fraction(a, x)).max(0.0)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`, evaluated
/// without cancellation in either tail.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        (1.0 - lower_series(a, x)).max(0.0)
    } else {
        upper_continued_fraction(a, x).min(1.0)
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        1.0 + gamma_p(0.5, x * x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Chi-square CDF with `d` degrees of freedom.
pub fn chi2_cdf(d: u32, z: f64) -> f64 {
    assert!(d >= 1, "chi-square needs at least one degree of freedom");
    if z.is_nan() {
        return f64::NAN;
    }
    gamma_p(f64::from(d) / 2.0, z / 2.0)
}

/// Chi-square survival function, `1 - chi2_cdf(d, z)`.
pub fn chi2_sf(d: u32, z: f64) -> f64 {
    assert!(d >= 1, "chi-square needs at least one degree of freedom");
    gamma_q(f64::from(d) / 2.0, z / 2.0)
}

/// Chi-square density.
pub fn chi2_pdf(d: u32, z: f64) -> f64 {
    if z < 0.0 {
        return 0.0;
    }
    let k = f64::from(d) / 2.0;
    if z == 0.0 {
        return match d {
            1 => f64::INFINITY,
            2 => 0.5,
            _ => 0.0,
        };
    }
    ((k - 1.0) * z.ln() - z / 2.0 - k * LN_2 - ln_gamma(k)).exp()
}

/// Inverse of [`chi2_cdf`]: returns `z` with `chi2_cdf(d, z) = c`.
///
/// `c = 0` maps to 0 and `c = 1` to `+inf`. Bracketing followed by
/// Newton steps with a bisection fallback.
pub fn chi2_quantile(d: u32, c: f64) -> f64 {
    assert!(d >= 1, "chi-square needs at least one degree of freedom");
    if c.is_nan() {
        return f64::NAN;
    }
    if c <= 0.0 {
        return 0.0;
    }
    if c >= 1.0 {
        return f64::INFINITY;
    }
    let upper_tail = c >= 0.5;
    let target = if upper_tail { 1.0 - c } else { c };
    // increasing in z in both branches
    let residual = |z: f64| {
        if upper_tail {
            target - chi2_sf(d, z)
        } else {
            chi2_cdf(d, z) - target
        }
    };

    let mut lo = 0.0_f64;
    let mut hi = f64::from(d).max(1.0);
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }

    // Wilson-Hilferty start, clipped into the bracket
    let df = f64::from(d);
    let zq = normal_quantile_rough(c);
    let wh = df * (1.0 - 2.0 / (9.0 * df) + zq * (2.0 / (9.0 * df)).sqrt()).powi(3);
    let mut z = if wh.is_finite() && wh > lo && wh < hi {
        wh
    } else {
        0.5 * (lo + hi)
    };

    for _ in 0..500 {
        let r = residual(z);
        if r.abs() <= 1e-17 * target.clamp(1e-300, 1.0) || r == 0.0 {
            return z;
        }
        if r < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        if (hi - lo) <= 4.0 * f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
            return z;
        }
        let slope = chi2_pdf(d, z);
        let newton = z - r / slope;
        z = if slope.is_finite() && slope > 0.0 && newton > lo && newton < hi {
            newton
        } else if newton == z {
            return z;
        } else {
            0.5 * (lo + hi)
        };
    }
    z
}

// Good to ~1e-3; only used as a starting point.
fn normal_quantile_rough(p: f64) -> f64 {
    let q = if p < 0.5 { p } else { 1.0 - p };
    let t = (-2.0 * q.ln()).sqrt();
    let x = t - (2.515_517 + 0.802_853 * t + 0.010_328 * t * t)
        / (1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t);
    if p < 0.5 {
        -x
    } else {
        x
    }
}
