//! Von Mises primitives and circular arithmetic.
//!
//! Angles are plain `f64` radians. The canonical range is `(-π, π]`; use
//! [`wrap_angle`] to bring any finite value into it.
//!
//! The modified Bessel functions are evaluated in exponentially scaled form
//! (`e^{-κ} I_ν(κ)`) so that densities and the mean resultant length stay
//! finite all the way up to [`KAPPA_MAX`].

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::error::{GeoError, Result};

/// Upper clamp for von Mises concentrations.
pub const KAPPA_MAX: f64 = 1e4;

/// Below this the power series is used, above it the asymptotic expansion.
const SERIES_CUTOFF: f64 = 15.0;

/// Readings with mean resultant at or above this map to `KAPPA_MAX`.
const RESULTANT_SATURATION: f64 = 1.0 - 1e-9;

/// Wraps a finite angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut r = theta.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r <= -PI {
        r += TAU;
    }
    r
}

/// Difference `a - b` wrapped into `(-π, π]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// Clamps a concentration into `[0, KAPPA_MAX]`. NaN maps to 0.
#[inline]
pub fn clamp_kappa(kappa: f64) -> f64 {
    if kappa.is_nan() {
        0.0
    } else {
        kappa.clamp(0.0, KAPPA_MAX)
    }
}

fn series_scaled(order: u32, x: f64) -> f64 {
    // e^{-x} (x/2)^ν Σ (x²/4)^k / (k! (k+ν)!)
    let q = 0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let nu = order as f64;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + nu));
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum * (-x).exp()
}

fn asymptotic_scaled(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum: f64 = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum / (TAU * x).sqrt()
}

fn scaled_bessel(order: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    if x < SERIES_CUTOFF {
        series_scaled(order, x)
    } else {
        asymptotic_scaled(order, x)
    }
}

/// Exponentially scaled `e^{-κ} I_0(κ)`.
pub fn bessel_i0e(kappa: f64) -> f64 {
    scaled_bessel(0, kappa)
}

/// Exponentially scaled `e^{-κ} I_1(κ)`.
pub fn bessel_i1e(kappa: f64) -> f64 {
    scaled_bessel(1, kappa)
}

/// Modified Bessel function of the first kind, order 0.
///
/// Overflows to `+inf` above roughly κ = 713; use [`ln_bessel_i0`] there.
pub fn bessel_i0(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(bessel_i0e(kappa) * kappa.exp())
}

/// Modified Bessel function of the first kind, order 1.
pub fn bessel_i1(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(bessel_i1e(kappa) * kappa.exp())
}

/// `ln I_0(κ)`, finite over the whole admissible range.
pub fn ln_bessel_i0(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(bessel_i0e(kappa).ln() + kappa)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_nan() || kappa < 0.0 {
        return Err(GeoError::Domain(format!(
            "bessel argument must be nonnegative, got {kappa}"
        )));
    }
    Ok(())
}

/// Mean resultant length `A(κ) = I_1(κ) / I_0(κ)` of a von Mises.
pub fn mean_resultant(kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    bessel_i1e(kappa) / bessel_i0e(kappa)
}

/// Log density of a von Mises with mean `mu` and concentration `kappa`.
pub fn vm_log_density(theta: f64, mu: f64, kappa: f64) -> f64 {
    let kappa = clamp_kappa(kappa);
    let d = wrap_angle(wrap_angle(theta) - mu);
    kappa * (d.cos() - 1.0) - (TAU * bessel_i0e(kappa)).ln()
}

/// Von Mises density `e^{κ cos(θ-μ)} / (2π I_0(κ))`.
pub fn vm_density(theta: f64, mu: f64, kappa: f64) -> f64 {
    vm_log_density(theta, mu, kappa).exp()
}

/// Inverts the mean resultant length: returns κ with `A(κ) = r`.
///
/// Negative `r` gives 0 and `r` within 1e-9 of 1 saturates at
/// [`KAPPA_MAX`]. Solved by Newton steps inside a shrinking bracket.
pub fn resultant_to_kappa(r: f64) -> f64 {
    if r.is_nan() || r <= 0.0 {
        return 0.0;
    }
    if r >= RESULTANT_SATURATION || r >= mean_resultant(KAPPA_MAX) {
        return KAPPA_MAX;
    }
    let (mut lo, mut hi) = (0.0_f64, KAPPA_MAX);
    // Standard closed-form approximation as the starting point
    let mut k = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r.powi(2) + 3.0 * r)
    };
    k = k.clamp(lo, hi);
    for _ in 0..200 {
        let a = mean_resultant(k);
        let f = a - r;
        if f.abs() < 1e-13 {
            break;
        }
        if f > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let deriv = if k > 0.0 { 1.0 - a / k - a * a } else { 0.5 };
        let mut next = k - f / deriv;
        if !(next > lo && next < hi) || deriv <= 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - k).abs() <= 1e-15 * k.max(1.0) {
            k = next;
            break;
        }
        k = next;
    }
    k.clamp(0.0, KAPPA_MAX)
}

/// Concentration whose mean resultant matches a wrapped normal with
/// standard deviation `sigma` (radians).
pub fn kappa_from_sigma(sigma: f64) -> f64 {
    resultant_to_kappa((-0.5 * sigma * sigma).exp())
}

/// Draws from a von Mises distribution (Best & Fisher rejection sampler).
pub fn vm_sample<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    let kappa = clamp_kappa(kappa);
    if kappa < 1e-8 {
        // uniform on (-π, π]
        return wrap_angle(PI - rng.random::<f64>() * TAU);
    }
    let s = 0.5 / kappa;
    let r = s + (1.0 + s * s).sqrt();
    let w = loop {
        let u: f64 = rng.random();
        let z = (PI * u).cos();
        let w = (1.0 + r * z) / (r + z);
        let y = kappa * (r - w);
        let v: f64 = rng.random();
        if y * (2.0 - y) - v >= 0.0 || (y / v).ln() + 1.0 - y >= 0.0 {
            break w;
        }
    };
    let mut dev = w.clamp(-1.0, 1.0).acos();
    if rng.random::<f64>() < 0.5 {
        dev = -dev;
    }
    wrap_angle(mu + dev)
}

/// Circular mean and mean resultant length of a set of angles.
pub fn circular_mean(angles: &[f64]) -> (f64, f64) {
    if angles.is_empty() {
        return (0.0, 0.0);
    }
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let n = angles.len() as f64;
    (wrap_angle(s.atan2(c)), (s * s + c * c).sqrt() / n)
}
