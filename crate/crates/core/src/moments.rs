//! Spectral moments: the `q`-weighted moment identity, the lattice-path
//! evaluation of the scaled large-`N` moments, and the Fuss–Catalan limits
//! of Laguerre products.

use std::collections::BTreeMap;
use std::io::Write;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::hardedge::ConvergenceReport;
use crate::polya::{BiorthogonalEvaluator, KERNEL_SUM_MAX_N};
use crate::specfun::integrate_dyadic;

/// Largest moment order accepted by [`spectral_moment`].
pub const MOMENT_MAX_K: u32 = 4;
/// Largest `N` accepted by [`spectral_moment`].
pub const MOMENT_MAX_N: usize = 60;

/// Large-`N` three-term-style recurrence `t P_n ~ N^r̂ Σ_s α̂_s P_{n+s}`,
/// `s = −r..=1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceCoefficients {
    pub r: usize,
    pub hat_alpha: BTreeMap<i32, f64>,
    pub hat_r_exponent: f64,
}

impl RecurrenceCoefficients {
    pub fn new(r: usize, hat_alpha: BTreeMap<i32, f64>, hat_r_exponent: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::Domain("recurrence depth r must be positive".into()));
        }
        if hat_alpha.get(&1).copied().unwrap_or(0.0) == 0.0 {
            return Err(Error::Domain("the s = 1 coefficient must be nonzero".into()));
        }
        if let Some(s) = hat_alpha.keys().find(|&&s| s > 1 || s < -(r as i32)) {
            return Err(Error::Domain(format!("shift {s} lies outside -{r}..=1")));
        }
        Ok(Self { r, hat_alpha, hat_r_exponent })
    }

    fn alpha(&self, s: i32) -> f64 {
        self.hat_alpha.get(&s).copied().unwrap_or(0.0)
    }
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

fn binomial_big(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// The `k`-th Fuss–Catalan number `binom(k(M+1), k)/(kM+1)`, exactly.
pub fn fuss_catalan(k: u64, m: u64) -> Result<BigUint> {
    if k == 0 || m == 0 {
        return Err(Error::Domain(format!("fuss_catalan needs k, M >= 1, got k = {k}, M = {m}")));
    }
    let top = k * (m + 1);
    let denom = k * m + 1;
    if top <= 60 {
        if let Some(b) = binomial_u128(top, k) {
            return Ok(BigUint::from(b / denom as u128));
        }
    }
    Ok(binomial_big(top, k) / BigUint::from(denom))
}

/// Fuss–Catalan number as a float (exact while it fits in 53 bits).
pub fn fuss_catalan_f64(k: u64, m: u64) -> Result<f64> {
    fuss_catalan(k, m)?
        .to_f64()
        .ok_or_else(|| Error::Domain("Fuss-Catalan number does not fit in f64".into()))
}

/// Coefficients for a product of `M` Laguerre ensembles in the
/// `P_n = p_n/(n! M[w](n+1))` normalisation: `α̂_s = binom(M+1, 1−s)`.
pub fn laguerre_product_recurrence(m: usize) -> Result<RecurrenceCoefficients> {
    if m == 0 {
        return Err(Error::Domain("M must be positive".into()));
    }
    let alpha = (-(m as i32)..=1)
        .map(|s| (s, binomial_u128(m as u64 + 1, (1 - s) as u64).unwrap_or(0) as f64))
        .collect();
    RecurrenceCoefficients::new(m, alpha, m as f64)
}

/// `Σ_R multinomial(k; a) Π α̂_s^{a_s}` over compositions with
/// `Σ a_s = k`, `Σ s a_s = 1`, by depth-first enumeration.
pub fn lattice_path_sum(k: u32, coeffs: &RecurrenceCoefficients) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let shifts: Vec<i32> = (-(coeffs.r as i32)..=1).rev().collect();
    let mut factorial = vec![1.0_f64; k as usize + 1];
    for i in 1..=k as usize {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let mut total = 0.0;
    enumerate(&shifts, 0, k as i64, 1, factorial[k as usize], &factorial, coeffs, &mut total);
    Ok(total)
}

/// Chooses `a_s` for `shifts[idx..]`, with `left` steps still to place and
/// `height` still to climb. Every remaining shift is at most `shifts[idx]`
/// and at least `−r`, which bounds the reachable heights.
#[allow(clippy::too_many_arguments)]
fn enumerate(
    shifts: &[i32],
    idx: usize,
    left: i64,
    height: i64,
    weight: f64,
    factorial: &[f64],
    coeffs: &RecurrenceCoefficients,
    total: &mut f64,
) {
    if idx == shifts.len() {
        if left == 0 && height == 0 {
            *total += weight;
        }
        return;
    }
    let s = shifts[idx] as i64;
    let lowest = *shifts.last().unwrap() as i64;
    let alpha = coeffs.alpha(shifts[idx]);
    for a in 0..=left {
        let rest = left - a;
        let need = height - s * a;
        let next_max = shifts.get(idx + 1).map_or(0, |&t| t as i64);
        if idx + 1 == shifts.len() {
            if rest != 0 || need != 0 {
                continue;
            }
        } else if need > rest * next_max || need < rest * lowest {
            continue;
        }
        let w = weight / factorial[a as usize] * alpha.powi(a as i32);
        if w != 0.0 || a == 0 {
            enumerate(shifts, idx + 1, rest, need, w, factorial, coeffs, total);
        }
    }
}

/// `[u¹] (Σ_s α̂_s u^s)^k` by Laurent-polynomial multiplication.
pub fn generating_function_coefficient(k: u32, coeffs: &RecurrenceCoefficients) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let r = coeffs.r as i64;
    // index i holds the coefficient of u^(i - offset)
    let base: Vec<f64> = (-r..=1).map(|s| coeffs.alpha(s as i32)).collect();
    let mut poly = vec![1.0];
    let mut offset: i64 = 0;
    for _ in 0..k {
        let mut next = vec![0.0; poly.len() + base.len() - 1];
        for (i, p) in poly.iter().enumerate() {
            for (j, b) in base.iter().enumerate() {
                next[i + j] += p * b;
            }
        }
        poly = next;
        offset += r;
    }
    Ok(poly.get((1 + offset) as usize).copied().unwrap_or(0.0))
}

/// Both sides of `k ∫ t^k K_N(t,t) dt = N (M(N+1)/M(N)) ∫ t^k p_{N−1} q_N dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralMoment {
    pub k: u32,
    pub n: usize,
    /// `∫ t^k K_N(t,t) dt`.
    pub moment: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl SpectralMoment {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(f64::MIN_POSITIVE)
    }
}

/// Evaluates the moment identity. The integrals are taken in closed form
/// through the Mellin pairing, which stays exact where the integrands'
/// cancellation defeats quadrature (large `N`); see
/// [`spectral_moment_quadrature`] for a direct check at small `N`.
pub fn spectral_moment(ev: &BiorthogonalEvaluator, k: u32) -> Result<SpectralMoment> {
    let n = ev.n();
    if k == 0 || k > MOMENT_MAX_K {
        return Err(Error::SizeGuard(format!("moment order must be in 1..={MOMENT_MAX_K}, got {k}")));
    }
    if n > MOMENT_MAX_N {
        return Err(Error::SizeGuard(format!("spectral moments are limited to N <= {MOMENT_MAX_N}, got {n}")));
    }
    let moment = ev.diagonal_moment(k)?;
    // p_{N-1} q_N = −p̂_{N-1} q̂_N M(N)/M(N+1), so the moment ratio cancels
    let rhs = -(n as f64) * ev.edge_pairing(k)?;
    Ok(SpectralMoment { k, n, moment, lhs: k as f64 * moment, rhs })
}

/// `(∫ t^k K_N(t,t) dt, ∫ t^k p̂_{N−1}(t) q̂_N(t) dt)` by dyadic quadrature,
/// for `N ≤` [`KERNEL_SUM_MAX_N`].
pub fn spectral_moment_quadrature(ev: &BiorthogonalEvaluator, k: u32) -> Result<(f64, f64)> {
    let n = ev.n();
    if n > KERNEL_SUM_MAX_N {
        return Err(Error::SizeGuard(format!("quadrature moments are limited to N <= {KERNEL_SUM_MAX_N}")));
    }
    let qs = (0..=n).map(|j| ev.q_hat(j, f64::INFINITY)).collect::<Result<Vec<_>>>()?;
    let diag = integrate_dyadic(
        |t| {
            let mut acc = 0.0;
            for (j, q) in qs.iter().take(n).enumerate() {
                acc += ev.p_hat(j, t)? * q.eval(t)?;
            }
            Ok(t.powi(k as i32) * acc)
        },
        1e-10,
        1e-16,
    )?;
    let pair = integrate_dyadic(|t| Ok(t.powi(k as i32) * ev.p_hat(n - 1, t)? * qs[n].eval(t)?), 1e-10, 1e-16)?;
    Ok((diag, pair))
}

/// One row of a scaled-moment table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledMoment {
    pub k: u32,
    pub m: usize,
    pub n: usize,
    /// `N^{−(kM+1)} ∫ t^k K_N(t,t) dt`.
    pub scaled: f64,
    pub fuss_catalan: f64,
}

/// Scaled moment of the product of `M` Laguerre ensembles with exponents `a`.
pub fn scaled_moment(a: &[f64], k: u32, n: usize) -> Result<ScaledMoment> {
    let m = a.len();
    let ev = BiorthogonalEvaluator::new(EnsembleSpec::laguerre_product(a, n).build()?)?;
    let sm = spectral_moment(&ev, k)?;
    let scaled = sm.moment / (n as f64).powf((k as usize * m + 1) as f64);
    Ok(ScaledMoment { k, m, n, scaled, fuss_catalan: fuss_catalan_f64(k as u64, m as u64)? })
}

/// Gap between the scaled moment and its Fuss–Catalan limit along a ladder
/// (all exponents zero).
pub fn scaled_moment_limit_check(m: usize, k: u32, ladder: &[usize]) -> Result<(ConvergenceReport, Vec<ScaledMoment>)> {
    if !(1..=2).contains(&m) || !(1..=3).contains(&k) {
        return Err(Error::Domain(format!("limit check covers M in 1..=2 and k in 1..=3, got M = {m}, k = {k}")));
    }
    let a = vec![0.0; m];
    let rows = ladder.iter().map(|&n| scaled_moment(&a, k, n)).collect::<Result<Vec<_>>>()?;
    let residuals = rows.iter().map(|r| vec![r.scaled - r.fuss_catalan]).collect();
    let report = ConvergenceReport::from_residuals(
        format!("scaled moment k={k} M={m}"),
        ladder.to_vec(),
        vec![(k as f64, m as f64)],
        residuals,
    )?;
    Ok((report, rows))
}

/// CSV with columns `k, M, N, scaled_moment, fuss_catalan`.
pub fn write_moments_csv<W: Write>(rows: &[ScaledMoment], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Domain(format!("CSV output failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "M", "N", "scaled_moment", "fuss_catalan"]).map_err(io)?;
    for r in rows {
        w.write_record([r.k.to_string(), r.m.to_string(), r.n.to_string(), format!("{:e}", r.scaled), r.fuss_catalan.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Domain(format!("CSV output failed: {e}")))
}
