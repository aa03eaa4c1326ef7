//! The logarithmic mean and the scalar facts about it that the LSI
//! constants rely on.

use crate::error::{Error, Result};

/// Half-width of the symmetric offset used to evaluate `h_p` at its removable point.
pub const H_P_OFFSET: f64 = 1e-7;

fn check_positive(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveArgument(a))
    }
}

fn check_unit(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(p))
    }
}

/// Λ(a, b) = (a − b)/(log a − log b), with Λ(a, a) = a.
///
/// Exactly symmetric and 1-homogeneous up to rounding. For nearby arguments
/// the quotient is rewritten as `(a+b)/2 · u/atanh(u)` with `u = (a−b)/(a+b)`,
/// which carries no cancellation.
pub fn log_mean(a: f64, b: f64) -> Result<f64> {
    check_positive(a)?;
    check_positive(b)?;
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == lo {
        return Ok(hi);
    }
    let u = (hi - lo) / (hi + lo);
    if u < 0.5 {
        Ok(0.5 * (hi + lo) * (u / u.atanh()))
    } else {
        Ok((hi - lo) / (hi.ln() - lo.ln()))
    }
}

/// `(√(ab), Λ(a,b), (a+b)/2)`, which is non-decreasing in that order.
pub fn log_mean_bounds(a: f64, b: f64) -> Result<(f64, f64, f64)> {
    let l = log_mean(a, b)?;
    Ok(((a * b).sqrt(), l, 0.5 * (a + b)))
}

fn h_p_raw(p: f64, t: f64) -> f64 {
    let q = 1.0 - p;
    let num = ((t / p).sqrt() - ((1.0 - t) / q).sqrt()).powi(2);
    let den = t * ((t - p) / p).ln_1p() + (1.0 - t) * ((p - t) / q).ln_1p();
    num / den
}

/// h_p(t) = (√(t/p) − √((1−t)/(1−p)))² / (t log(t/p) + (1−t) log((1−t)/(1−p))).
///
/// Within `H_P_OFFSET` of the removable point t = p the value is the average
/// of the quotient at p ± `H_P_OFFSET`.
pub fn h_p(p: f64, t: f64) -> Result<f64> {
    check_unit(p)?;
    check_unit(t)?;
    if (t - p).abs() < H_P_OFFSET {
        let lo = (p - H_P_OFFSET).max(0.5 * p);
        let hi = (p + H_P_OFFSET).min(0.5 * (1.0 + p));
        return Ok(0.5 * (h_p_raw(p, lo) + h_p_raw(p, hi)));
    }
    Ok(h_p_raw(p, t))
}

/// Strict inequality Λ(p,1−p)/(p(1−p)) < min(1/(p log(1/p)), 1/((1−p) log(1/(1−p)))).
pub fn upper_bound_check(p: f64) -> Result<bool> {
    check_unit(p)?;
    let q = 1.0 - p;
    let lhs = log_mean(p, q)? / (p * q);
    let r1 = 1.0 / (p * (1.0 / p).ln());
    let r2 = 1.0 / (q * (-p).ln_1p().abs());
    Ok(lhs < r1.min(r2))
}
