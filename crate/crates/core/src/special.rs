//! Special functions shared by every test in the crate.
//!
//! Log-gamma, the regularized incomplete gamma pair, chi-square tails and
//! quantiles, the standard normal CDF/quantile, and the bivariate normal
//! orthant probability. All targets are absolute error ≤ 1e-10 over the
//! ranges the crate uses; reference values in the unit tests come from
//! 50-digit mpmath evaluations.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
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

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cont_frac(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cont_frac(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_cont_frac(a: f64, x: f64) -> f64 {
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
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma_q(0.5 * df, 0.5 * x)
}

/// Quantile of the gamma distribution with the given shape and unit scale,
/// parameterised by its *upper* tail probability: returns `x` with
/// `Q(shape, x) = upper`. Working from the upper tail keeps full relative
/// precision for the tiny p-values fed into p-value combination.
pub fn gamma_upper_quantile(shape: f64, upper: f64) -> f64 {
    assert!(shape > 0.0, "gamma shape must be positive");
    if upper >= 1.0 {
        return 0.0;
    }
    if upper <= 0.0 {
        return f64::INFINITY;
    }
    if (shape - 1.0).abs() < f64::EPSILON {
        return -upper.ln();
    }

    // Wilson–Hilferty start, then safeguarded Newton on log Q.
    let z = -normal_quantile(upper);
    let nu = 2.0 * shape;
    let wh = 1.0 - 2.0 / (9.0 * nu) + z * (2.0 / (9.0 * nu)).sqrt();
    let mut x = (0.5 * nu * wh.powi(3)).max(1e-3 * shape).max(1e-300);

    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let target = upper.ln();
    for _ in 0..200 {
        let q = gamma_q(shape, x);
        let f = q.max(1e-320).ln() - target;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx ln Q = −density / Q
        let ln_density = (shape - 1.0) * x.ln() - x - ln_gamma(shape);
        let dlog = -(ln_density - q.max(1e-320).ln()).exp();
        let mut next = x - f / dlog;
        if !next.is_finite() || next <= lo || next >= hi {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1.0) };
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// Chi-square quantile from the upper tail: `x` with `chi2_sf(x, df) = upper`.
pub fn chi2_isf(upper: f64, df: f64) -> f64 {
    2.0 * gamma_upper_quantile(0.5 * df, upper)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        1.0 + gamma_p(0.5, x * x)
    }
}

/// Standard normal CDF Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal upper tail 1 − Φ(z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal quantile Φ⁻¹(p).
///
/// Acklam's rational approximation as a starting point, polished with
/// Halley steps against [`normal_cdf`] (or [`normal_sf`] in the upper half,
/// so both tails keep relative precision).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

// Returns x ≤ 0 with Φ(x) = tail, where `tail ≤ 0.5`.
fn lower_quantile(tail: f64) -> f64 {
    let mut x = acklam(tail);
    for _ in 0..50 {
        let e = normal_cdf(x) - tail;
        let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if density == 0.0 {
            break;
        }
        let u = e / density;
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Bivariate standard normal orthant probability Pr(Z1 > h, Z2 > k) for
/// correlation `rho`.
///
/// Uses Pr(Z1 ≤ h', Z2 ≤ k') = Φ(h')Φ(k') + (1/2π)∫₀^{asin ρ} exp(−(h'²+k'²−2h'k' sin θ)/(2cos²θ)) dθ
/// with h' = −h, k' = −k, integrated by adaptive Simpson.
pub fn bvn_upper(h: f64, k: f64, rho: f64) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    if rho >= 1.0 {
        return normal_sf(h.max(k));
    }
    if rho <= -1.0 {
        return (normal_sf(h) - normal_cdf(-k)).max(0.0);
    }
    let (a, b) = (-h, -k);
    let base = normal_cdf(a) * normal_cdf(b);
    if rho == 0.0 {
        return base;
    }
    let integrand = |t: f64| {
        let c = t.cos();
        (-(a * a + b * b - 2.0 * a * b * t.sin()) / (2.0 * c * c)).exp()
    };
    let upper = rho.asin();
    let integral = adaptive_simpson(&integrand, 0.0, upper, 1e-14, 50);
    (base + integral / (2.0 * PI)).clamp(0.0, 1.0)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Standard logit.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
