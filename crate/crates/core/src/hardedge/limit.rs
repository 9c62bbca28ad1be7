//! Limit functions `F`, `G`, the Bessel kernel and the predicted `1/N`
//! corrections.

use crate::ensembles::{EnsembleSpec, Family};
use crate::error::{Error, Result};
use crate::mellin::{GammaFactor, MellinInverse, MellinIntegrand, MellinWeight};
use crate::specfun::{bessel_j, integrate_adaptive, integrate_graded, ln_gamma};
use crate::specfun::dd::DoubleDouble;
use crate::Precision;

/// Relative agreement for the limit-kernel quadratures.
pub const LIMIT_QUAD_TOL: f64 = 1e-12;
/// Terms kept in the `F` series (far beyond what `x ≤ 100` needs).
const F_TERMS: usize = 400;
/// Relative gap below which the closed Bessel-kernel form is replaced by the
/// diagonal value at the midpoint (exact to second order by symmetry).
const DIAGONAL_GAP: f64 = 1e-5;

/// `(1/4) ∫₀¹ J_a(√(xt)) J_a(√(yt)) dt` by Gauss–Legendre in `u = √t`.
pub fn bessel_kernel_quadrature(x: f64, y: f64, a: f64) -> Result<f64> {
    check_bessel_args(x, y, a)?;
    let (sx, sy) = (x.sqrt(), y.sqrt());
    let v = integrate_adaptive(
        |u| Ok(2.0 * u * bessel_j(a, sx * u)? * bessel_j(a, sy * u)?),
        0.0,
        1.0,
        LIMIT_QUAD_TOL,
        32,
        4096,
    )?;
    Ok(0.25 * v)
}

/// Closed ratio form
/// `[J_a(√x) √y J_a'(√y) − √x J_a'(√x) J_a(√y)] / (2(x − y))`,
/// with `(1/4)(J_a(√x)² − J_{a+1}(√x) J_{a−1}(√x))` on the diagonal.
pub fn bessel_kernel_closed(x: f64, y: f64, a: f64) -> Result<f64> {
    check_bessel_args(x, y, a)?;
    if x == 0.0 || y == 0.0 {
        return bessel_kernel_quadrature(x, y, a);
    }
    if (x - y).abs() <= DIAGONAL_GAP * x.max(y) {
        let z = (0.5 * (x + y)).sqrt();
        let (j, j1) = (bessel_j(a, z)?, bessel_j(a + 1.0, z)?);
        // J_{a-1}(z) = (2a/z) J_a(z) − J_{a+1}(z)
        let jm = 2.0 * a / z * j - j1;
        return Ok(0.25 * (j * j - j1 * jm));
    }
    let (sx, sy) = (x.sqrt(), y.sqrt());
    let (jx, jx1) = (bessel_j(a, sx)?, bessel_j(a + 1.0, sx)?);
    let (jy, jy1) = (bessel_j(a, sy)?, bessel_j(a + 1.0, sy)?);
    // z J_a'(z) = a J_a(z) − z J_{a+1}(z)
    let dx = a * jx - sx * jx1;
    let dy = a * jy - sy * jy1;
    Ok((jx * dy - dx * jy) / (2.0 * (x - y)))
}

/// The Bessel hard-edge kernel `K^hard(x, y)`.
pub fn bessel_kernel(x: f64, y: f64, a: f64) -> Result<f64> {
    bessel_kernel_closed(x, y, a)
}

fn check_bessel_args(x: f64, y: f64, a: f64) -> Result<()> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::Domain(format!("Bessel kernel needs x, y >= 0, got ({x}, {y})")));
    }
    if !(a > -1.0) {
        return Err(Error::Domain(format!("Bessel kernel needs a > -1, got {a}")));
    }
    Ok(())
}

/// `|(x∂_x + y∂_y + 1) K^hard(x, y) − (1/4) J_a(√x) J_a(√y)|`, with the
/// Euler operator applied as `d/dλ [λ K^hard(λx, λy)]` at `λ = 1`.
pub fn scaling_identity_residual(x: f64, y: f64, a: f64) -> Result<f64> {
    let lhs = crate::polya::richardson(|l| Ok(l * bessel_kernel(l * x, l * y, a)?), 1.0, 1e-3)?;
    let rhs = 0.25 * bessel_j(a, x.sqrt())? * bessel_j(a, y.sqrt())?;
    Ok((lhs - rhs).abs())
}

/// Limit functions and predicted correction of one ensemble family.
///
/// `F(x) = Σ_j (−x)^j / (j! W(j+1))` and `G` is the inverse transform of
/// `W(s)/Γ(1−s)`, where `W` is the `N`-independent part of the weight's
/// Mellin transform normalised to `W(1) = 1`. With these,
/// `s_N K_N(s_N x, s_N y) → ∫₀¹ F(xt) G(yt) dt`.
#[derive(Debug, Clone)]
pub struct HardEdgeModel {
    pub family: Family,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub theta: f64,
    /// Coefficient of `−(x∂_x − y∂_y) F(x) G(y)` in the correction.
    pub kappa: f64,
    /// Coefficient of `F(x) G(y)` in the correction.
    pub b_sum: f64,
    f_ln_coefficients: Vec<f64>,
    g: MellinInverse,
    g_euler: MellinInverse,
    graded: bool,
}

impl HardEdgeModel {
    /// Model valid for `G` arguments up to `y_max`.
    pub fn new(spec: &EnsembleSpec, y_max: f64) -> Result<Self> {
        spec.validate()?;
        let m = spec.m() as f64;
        let mut factors = Vec::new();
        let mut ln_pre = 0.0;
        let (kappa, b_sum) = match spec.family {
            Family::LaguerreProduct => {
                for &a in &spec.a {
                    ln_pre -= ln_gamma(a + 1.0);
                    factors.push(GammaFactor::numerator(1.0, a));
                }
                (0.5, 0.0)
            }
            Family::MuttalibBorodinLaguerre => {
                let (a, th) = (spec.a[0], spec.theta());
                ln_pre -= ln_gamma(a + 1.0);
                factors.push(GammaFactor::numerator(th, a + 1.0 - th));
                (0.5, 0.0)
            }
            Family::LaguerreInverseProduct | Family::JacobiUnitary => {
                for &a in &spec.a {
                    ln_pre -= ln_gamma(a + 1.0);
                    factors.push(GammaFactor::numerator(1.0, a));
                }
                (0.5 * (1.0 + m), spec.b.iter().sum())
            }
        };
        let limit = MellinWeight::from_ln_prefactor(ln_pre, factors);
        let f_ln_coefficients = (0..F_TERMS)
            .map(|j| {
                let (w, sign) = limit.ln_eval_real(j as f64 + 1.0)?;
                if sign <= 0.0 {
                    return Err(Error::Domain(format!("W({}) is not positive", j + 1)));
                }
                Ok(-ln_gamma(j as f64 + 1.0) - w)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g_weight = limit.clone();
        g_weight.factors.push(GammaFactor::denominator(-1.0, 1.0));
        let graded = !g_weight.half_integer_exponents();
        let integrand = MellinIntegrand::new(g_weight);
        let g = MellinInverse::new(integrand.clone(), y_max, Precision::Double)?;
        let g_euler = MellinInverse::new(integrand.with_euler_power(1), y_max, Precision::Double)?;
        Ok(Self {
            family: spec.family,
            a: spec.a.clone(),
            b: spec.b.clone(),
            theta: spec.theta.unwrap_or(1.0),
            kappa,
            b_sum,
            f_ln_coefficients,
            g,
            g_euler,
            graded,
        })
    }

    /// `(x d/dx)^k F(x)` by term-wise differentiation, summed in double-double.
    pub fn f_euler(&self, k: u32, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::Domain(format!("F needs x >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(if k == 0 { 1.0 } else { 0.0 });
        }
        let lx = x.ln();
        let mut acc = DoubleDouble::ZERO;
        let mut peak = f64::NEG_INFINITY;
        for (j, c) in self.f_ln_coefficients.iter().enumerate() {
            let ln_term = c + j as f64 * lx;
            peak = peak.max(ln_term);
            if j > 0 && ln_term < peak - 45.0 && ln_term < self.f_ln_coefficients[j - 1] + (j as f64 - 1.0) * lx {
                return Ok(acc.to_f64());
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += DoubleDouble::new(sign * (j as f64).powi(k as i32) * ln_term.exp());
        }
        Err(Error::NonConvergence { what: "limit function F", terms: F_TERMS })
    }

    pub fn f(&self, x: f64) -> Result<f64> {
        self.f_euler(0, x)
    }

    pub fn g(&self, y: f64) -> Result<f64> {
        if y == 0.0 {
            return self.g.eval(f64::MIN_POSITIVE);
        }
        self.g.eval(y)
    }

    /// `y G'(y)`.
    pub fn y_dg(&self, y: f64) -> Result<f64> {
        self.g_euler.eval(y.max(f64::MIN_POSITIVE))
    }

    /// `∫₀¹ F(xt) G(yt) dt` in `u = √t`, graded towards 0 when `G` has
    /// exponents that `√t` does not smooth out.
    pub fn limit_kernel(&self, x: f64, y: f64) -> Result<f64> {
        if x < 0.0 || y < 0.0 {
            return Err(Error::Domain("limit kernel arguments must be non-negative".into()));
        }
        let f = |u| self.limit_integrand(x, y, u);
        if self.graded {
            integrate_graded(f, 1.0, LIMIT_QUAD_TOL, 1e-14)
        } else {
            integrate_adaptive(f, 0.0, 1.0, LIMIT_QUAD_TOL, 32, 4096)
        }
    }

    /// Integrand of [`limit_kernel`](Self::limit_kernel) in `u = √t`.
    pub fn limit_integrand(&self, x: f64, y: f64, u: f64) -> Result<f64> {
        let t = u * u;
        Ok(2.0 * u * self.f(x * t)? * self.g(y * t)?)
    }

    /// Coefficient of `1/N`:
    /// `−κ (x∂_x − y∂_y) F(x) G(y) + (Σ b_l) F(x) G(y)`, with `κ = 1/2` for
    /// products and Muttalib–Borodin, `κ = (1+M)/2` with inverses.
    pub fn correction(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.correction_form(self.f(x)?, self.f_euler(1, x)?, self.g(y)?, self.y_dg(y)?))
    }

    /// The correction as an expression in `F(x)`, `xF'(x)`, `G(y)`, `yG'(y)`.
    pub fn correction_form(&self, f: f64, x_df: f64, g: f64, y_dg: f64) -> f64 {
        -self.kappa * (x_df * g - f * y_dg) + self.b_sum * f * g
    }
}

/// `predicted_correction(family, params, x, y)`: the `1/N` coefficient in the
/// family's natural hard-edge variables. For the Jacobi ensemble these are
/// the `X/(4N²)` variables, in which the correction is `(1/4) C(X/4, Y/4)`
/// with `C` the `M = 1` inverse-product correction.
pub fn predicted_correction(spec: &EnsembleSpec, x: f64, y: f64) -> Result<f64> {
    let reach = 1.1 * x.max(y).max(1.0);
    let model = HardEdgeModel::new(spec, reach)?;
    match spec.family {
        Family::JacobiUnitary => Ok(0.25 * model.correction(x / 4.0, y / 4.0)?),
        _ => model.correction(x, y),
    }
}
