//! Chi-squared(1) distribution, error function and Holm adjustment.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const FRAC_2_SQRT_PI: f64 = core::f64::consts::FRAC_2_SQRT_PI;
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Series of `exp(z^2) erf(z)`; every term is positive, so there is no
/// cancellation for moderate `z`.
fn erf_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= 2.0 * z2 / (2.0 * k + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * libm::exp(-z2) * sum
}

/// `erfc(z)` for `z > 0` by the Laplace continued fraction, evaluated with
/// the modified Lentz algorithm.
fn erfc_fraction(z: f64) -> f64 {
    // erfc(z) = exp(-z^2)/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for i in 1..2000 {
        let a = 0.5 * i as f64;
        d = z + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = z + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    libm::exp(-z * z) / (f * SQRT_PI)
}

/// Error function.
pub fn erf(z: f64) -> f64 {
    if z < 0.0 {
        -erf(-z)
    } else if z <= 2.0 {
        erf_series(z)
    } else {
        1.0 - erfc_fraction(z)
    }
}

/// Complementary error function, accurate in the upper tail.
pub fn erfc(z: f64) -> f64 {
    if z < 0.0 {
        2.0 - erfc(-z)
    } else if z <= 2.0 {
        1.0 - erf_series(z)
    } else {
        erfc_fraction(z)
    }
}

fn check_chi2_arg(x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("chi-squared argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// Distribution function of the chi-squared law with one degree of freedom.
pub fn chi2_1_cdf(x: f64) -> Result<f64> {
    check_chi2_arg(x)?;
    Ok(erf(libm::sqrt(0.5 * x)))
}

/// Upper tail `1 - F(x)` of the chi-squared(1) law.
pub fn chi2_1_sf(x: f64) -> Result<f64> {
    check_chi2_arg(x)?;
    Ok(erfc(libm::sqrt(0.5 * x)))
}

/// Quantile of the chi-squared(1) law: the `x` with `F(x) = p`.
pub fn chi2_1_quantile(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::domain(format!("probability must lie in [0, 1), got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    // Solve erf(z) = p for z = sqrt(x / 2); work on the complement in the
    // upper half so tiny tails keep their precision.
    let upper = p > 0.5;
    let target = if upper { 1.0 - p } else { p };
    let residual = |z: f64| if upper { target - erfc(z) } else { erf(z) - target };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = residual(z);
        if r == 0.0 {
            break;
        }
        if r < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = FRAC_2_SQRT_PI * libm::exp(-z * z);
        let newton = z - r / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - z).abs() <= 1e-16 * z.max(1e-300) || hi - lo <= 1e-16 * hi {
            z = next;
            break;
        }
        z = next;
    }
    Ok(2.0 * z * z)
}

/// Holm step-down adjusted p-values, returned in input order.
pub fn holm_adjust(p: &[f64]) -> Vec<f64> {
    let k = p.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; k];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((k - rank) as f64 * p[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    adjusted
}
