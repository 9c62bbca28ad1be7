//! Hypergeometric-type power series and the Bessel function `J_a`.

use super::dd::DoubleDouble as TwoFloat;

use super::gamma::{is_nonpositive_integer, ln_gamma_signed};
use crate::error::{Error, Result};
use crate::Precision;

/// Relative truncation tolerance for infinite series.
pub const SERIES_TOL: f64 = 1e-15;
/// Hard cap on the number of series terms.
pub const SERIES_CAP: usize = 500;

/// Accumulates `Σ_j t_j` where `t_0 = first` and `t_{j+1} = t_j * ratio(j)`.
///
/// `ratio` returns `None` when the series terminates. Summation stops once a
/// term falls below `SERIES_TOL` relative to the running sum while terms are
/// shrinking; reaching `SERIES_CAP` is an error.
pub(crate) fn ratio_series<F>(first: f64, precision: Precision, what: &'static str, mut ratio: F) -> Result<f64>
where
    F: FnMut(usize) -> Option<f64>,
{
    match precision {
        Precision::Double => {
            let mut term = first;
            let mut sum = first;
            let mut prev = first.abs();
            for j in 0..SERIES_CAP {
                let Some(r) = ratio(j) else { return Ok(sum) };
                term *= r;
                sum += term;
                let a = term.abs();
                if a <= SERIES_TOL * sum.abs() && a <= prev || (a == 0.0 && sum == 0.0) {
                    return Ok(sum);
                }
                prev = a;
            }
        }
        Precision::Extended => {
            let mut term = TwoFloat::from(first);
            let mut sum = term;
            let mut prev = first.abs();
            for j in 0..SERIES_CAP {
                let Some(r) = ratio(j) else { return Ok(sum.to_f64()) };
                term *= TwoFloat::from(r);
                sum += term;
                let a = term.to_f64().abs();
                let s = sum.to_f64().abs();
                if a <= 1e-32 * s && a <= prev || (a == 0.0 && s == 0.0) {
                    return Ok(sum.to_f64());
                }
                prev = a;
            }
        }
    }
    Err(Error::NonConvergence { what, terms: SERIES_CAP })
}

/// Same as [`ratio_series`] but with the term ratio available in double-double.
fn ratio_series_dd<F>(first: f64, what: &'static str, mut ratio: F) -> Result<f64>
where
    F: FnMut(usize) -> Option<TwoFloat>,
{
    let mut term = TwoFloat::from(first);
    let mut sum = term;
    let mut prev = first.abs();
    for j in 0..SERIES_CAP {
        let Some(r) = ratio(j) else { return Ok(sum.to_f64()) };
        term *= r;
        sum += term;
        let a = term.to_f64().abs();
        let s = sum.to_f64().abs();
        if a <= 1e-32 * s && a <= prev || (a == 0.0 && s == 0.0) {
            return Ok(sum.to_f64());
        }
        prev = a;
    }
    Err(Error::NonConvergence { what, terms: SERIES_CAP })
}

fn check_params(params: &[f64]) -> Result<()> {
    for &a in params {
        if is_nonpositive_integer(a + 1.0) {
            return Err(Error::Domain(format!("parameter a = {a} makes (a+1)_j vanish")));
        }
    }
    Ok(())
}

/// `Σ_j (-x)^j / (j! Π_s (a_s+1)_j)`, the `0F_M` series at argument `-x`.
pub fn hyp_0fm(params: &[f64], x: f64) -> Result<f64> {
    hyp_0fm_with(params, x, Precision::Double)
}

pub fn hyp_0fm_with(params: &[f64], x: f64, precision: Precision) -> Result<f64> {
    check_params(params)?;
    ratio_series(1.0, precision, "0F_M", |j| {
        let jf = j as f64;
        let den: f64 = params.iter().map(|a| a + 1.0 + jf).product();
        Some(-x / ((jf + 1.0) * den))
    })
}

/// Terminating series `Σ_{j=0}^n (-n)_j x^j / (j! Π_l (a_l+1)_j)`.
pub fn hyp_1fm(n: usize, params: &[f64], x: f64) -> Result<f64> {
    check_params(params)?;
    let nf = n as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 0..n {
        let jf = j as f64;
        let den: f64 = params.iter().map(|a| a + 1.0 + jf).product();
        term *= (jf - nf) * x / ((jf + 1.0) * den);
        sum += term;
    }
    Ok(sum)
}

/// Bessel function of the first kind `J_a(x)` from its ascending series.
///
/// Terms are accumulated in double-double so the alternating series stays
/// accurate to about `1e-12` up to `x = 40`.
pub fn bessel_j(order: f64, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("bessel_j needs x >= 0, got {x}")));
    }
    if order <= -1.0 {
        return Err(Error::Domain(format!("bessel_j needs order > -1, got {order}")));
    }
    if x == 0.0 {
        return Ok(if order == 0.0 { 1.0 } else { 0.0 });
    }
    let half = x / 2.0;
    let (lg, sign) = ln_gamma_signed(order + 1.0)?;
    let first = sign * (order * half.ln() - lg).exp();
    let q = TwoFloat::from(half) * TwoFloat::from(half);
    ratio_series_dd(first, "bessel_j", |k| {
        let k = k as f64;
        let den = TwoFloat::from(k + 1.0) * TwoFloat::from(order + k + 1.0);
        Some(-q / den)
    })
}

/// Gauss hypergeometric `2F1(p, q; r; z)` by direct summation.
///
/// All call sites have either `|z| < 1` or a terminating series.
pub fn gauss_2f1(p: f64, q: f64, r: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(r) {
        return Err(Error::Domain(format!("2F1 lower parameter r = {r} is a pole")));
    }
    let terminating = is_nonpositive_integer(p) || is_nonpositive_integer(q);
    if !terminating && z.abs() >= 1.0 {
        return Err(Error::Domain(format!("2F1 series diverges at z = {z}")));
    }
    ratio_series_dd(1.0, "gauss_2f1", |k| {
        let k = k as f64;
        let num = TwoFloat::from(p + k) * TwoFloat::from(q + k);
        if num == TwoFloat::from(0.0) {
            return None;
        }
        let den = TwoFloat::from(r + k) * TwoFloat::from(k + 1.0);
        Some(num * TwoFloat::from(z) / den)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Plain term-by-term sum of `0F_M`, `terms` terms, in double-double.
    fn brute_0fm(params: &[f64], x: f64, terms: usize) -> f64 {
        let mut term = TwoFloat::from(1.0);
        let mut sum = term;
        for j in 0..terms {
            let jf = j as f64;
            let mut den = TwoFloat::from(jf + 1.0);
            for a in params {
                den *= TwoFloat::from(a + 1.0 + jf);
            }
            term = term * TwoFloat::from(-x) / den;
            sum += term;
        }
        sum.to_f64()
    }

    #[test]
    fn zero_argument() {
        assert_eq!(hyp_0fm(&[0.3, 1.2], 0.0).unwrap(), 1.0);
        assert_eq!(hyp_1fm(0, &[0.3], 5.0).unwrap(), 1.0);
    }

    #[test]
    fn one_param_is_bessel() {
        let v = hyp_0fm(&[0.0], 1.0).unwrap();
        assert!((v - bessel_j(0.0, 2.0).unwrap()).abs() < 1e-14);
        // J_0(2) = 0.22389077914123567
        assert!((v - 0.223_890_779_141_235_67).abs() < 1e-15);
    }

    #[test]
    fn two_param_matches_brute_force() {
        let v = hyp_0fm(&[0.0, 1.0], 1.0).unwrap();
        let oracle = brute_0fm(&[0.0, 1.0], 1.0, 200);
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn bessel_relation_across_orders() {
        for &a in &[0.0, 0.5, 1.0, 2.0] {
            for i in 1..=20 {
                let x = i as f64 * 0.5;
                let f = hyp_0fm(&[a], x).unwrap();
                let g = ln_gamma_signed(a + 1.0).unwrap().0.exp();
                let j = g * x.powf(-a / 2.0) * bessel_j(a, 2.0 * x.sqrt()).unwrap();
                assert!((f - j).abs() < 1e-10, "a={a} x={x}");
            }
        }
    }

    #[test]
    fn one_fm_small_cases() {
        assert_eq!(hyp_1fm(1, &[0.0], 2.0).unwrap(), -1.0);
        // 1F1(-3; 1; x) = L_3(x) = 1 - 3x + 3x^2/2 - x^3/6
        let x = 0.7_f64;
        let l3 = 1.0 - 3.0 * x + 1.5 * x * x - x.powi(3) / 6.0;
        assert!((hyp_1fm(3, &[0.0], x).unwrap() - l3).abs() < 1e-14);
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1.0, 0.0).unwrap(), 0.0);
        let exact = (2.0 / PI).sqrt() * 1f64.sin();
        assert!((bessel_j(0.5, 1.0).unwrap() - exact).abs() < 1e-15);
        assert!(bessel_j(0.0, -1.0).is_err());
    }

    #[test]
    fn bessel_large_argument_half_integer() {
        for &x in &[10.0, 25.0, 40.0_f64] {
            let exact = (2.0 / (PI * x)).sqrt() * x.sin();
            assert!((bessel_j(0.5, x).unwrap() - exact).abs() < 1e-12, "x={x}");
            // J_{3/2}(x) = sqrt(2/(pi x)) (sin x / x - cos x)
            let exact = (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos());
            assert!((bessel_j(1.5, x).unwrap() - exact).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn gauss_2f1_cases() {
        assert_eq!(gauss_2f1(0.3, 0.4, 1.5, 0.0).unwrap(), 1.0);
        let (q, r, z) = (2.5, 1.5, 0.3);
        assert!((gauss_2f1(-1.0, q, r, z).unwrap() - (1.0 - q * z / r)).abs() < 1e-15);
        // 1 + (-2)(-3)/1 * 0.5 + (-2)(-1)(-3)(-2)/(1*2*2) * 0.25
        let brute = 1.0 + 6.0 * 0.5 + (2.0 * 6.0 / 2.0 / 2.0) * 0.25;
        assert_eq!(brute, 4.75);
        assert!((gauss_2f1(-2.0, -3.0, 1.0, 0.5).unwrap() - 4.75).abs() < 1e-14);
        assert!(gauss_2f1(1.0, 1.0, 0.0, 0.5).is_err());
        // 2F1(1,1;2;z) = -ln(1-z)/z
        let z = 0.6_f64;
        assert!((gauss_2f1(1.0, 1.0, 2.0, z).unwrap() + (1.0 - z).ln() / z).abs() < 1e-13);
    }
}
