//! Pólya ensembles: the biorthogonal pair `(p_n, q_n)` and the correlation
//! kernel, built from nothing but the Mellin transform of the weight.
//!
//! With `M(k) = M[w](k)`,
//!
//! ```text
//! p_n(x) = (-1)^n n! M(n+1) Σ_j (-x)^j / (j! (n-j)! M(j+1))
//! q_n(x) = (1/(n! M(n+1))) (d/dx)^n ((-x)^n w(x))
//! ```
//!
//! Internally both are carried in a normalisation that stays finite when
//! `M(N+1)` is infinite:
//!
//! * `p̂_n = (-1)^n p_n M(1)/M(n+1)`, so `p̂_n(0) = 1`;
//! * `q̂_n = (-1)^n q_n M(n+1)/M(1)`, the inverse Mellin transform of
//!   `Π_{l=1}^{n}(1 - s/l) · M[w](s)/M(1)`.
//!
//! Then `Σ_{j<N} p_j(x) q_j(y) = Σ_{j<N} p̂_j(x) q̂_j(y)` and
//! `K_N(x, y) = N ∫₀¹ p̂_{N-1}(xt) q̂_N(yt) dt`.

use crate::error::{Error, Result};
use crate::mellin::{MellinInverse, MellinIntegrand, MellinWeight};
use crate::specfun::dd::DoubleDouble;
use crate::specfun::{integrate_adaptive_floor, integrate_dyadic_floor, integrate_graded, ln_gamma};
use crate::Precision;
use serde::{Deserialize, Serialize};

/// Largest `N` accepted by the direct kernel sum.
pub const KERNEL_SUM_MAX_N: usize = 12;
/// Largest index accepted by [`BiorthogonalEvaluator::biorthogonality_matrix`].
pub const BIORTHOGONALITY_MAX: usize = 8;
/// Relative agreement between successive kernel quadrature orders.
pub const KERNEL_QUAD_TOL: f64 = 1e-11;
/// Dyadic panels in the fixed kernel rule for non-half-integer exponents.
const FIXED_PANELS: usize = 40;
/// Agreement required between the `h²` and `h⁴` Richardson levels.
pub const RICHARDSON_TOL: f64 = 1e-7;

/// An `N`-point Pólya ensemble described by its weight's Mellin transform.
#[derive(Debug, Clone)]
pub struct PolyaEnsemble {
    pub n: usize,
    pub weight: MellinWeight,
    pub strip: (f64, f64),
    pub precision: Precision,
}

impl PolyaEnsemble {
    /// Checks that the moments `M[w](k+1)`, `k = 0..N-1`, are finite and
    /// positive. `M[w](N+1)` may be infinite (it only enters `p_N`, `q_N`).
    pub fn new(n: usize, weight: MellinWeight) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("ensemble size N must be positive".into()));
        }
        let strip = weight.strip();
        for k in 0..n {
            let s = k as f64 + 1.0;
            if !(s > strip.0 && s < strip.1) {
                return Err(Error::Domain(format!("moment M[w]({s}) lies outside the strip {strip:?}")));
            }
            let (ln, sign) = weight.ln_eval_real(s)?;
            if sign <= 0.0 || !ln.is_finite() {
                return Err(Error::Domain(format!("moment M[w]({s}) is not finite and positive")));
            }
        }
        Ok(Self { n, weight, strip, precision: Precision::Double })
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }
}

/// Evaluates `p_n`, `q_n` and `K_N` for one ensemble. Immutable after
/// construction; the moment table is built eagerly.
#[derive(Debug, Clone)]
pub struct BiorthogonalEvaluator {
    pub ensemble: PolyaEnsemble,
    /// `ln M[w](k+1)` for `k = 0..=N`; the last entry is `+inf` when the
    /// moment diverges.
    ln_moments: Vec<f64>,
}

impl BiorthogonalEvaluator {
    pub fn new(ensemble: PolyaEnsemble) -> Result<Self> {
        let n = ensemble.n;
        let mut ln_moments = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let s = k as f64 + 1.0;
            let ln = if s < ensemble.strip.1 {
                match ensemble.weight.ln_eval_real(s) {
                    Ok((v, sign)) if sign > 0.0 => v,
                    _ => f64::INFINITY,
                }
            } else {
                f64::INFINITY
            };
            ln_moments.push(ln);
        }
        Ok(Self { ensemble, ln_moments })
    }

    pub fn n(&self) -> usize {
        self.ensemble.n
    }

    pub fn precision(&self) -> Precision {
        self.ensemble.precision
    }

    /// `ln M[w](k+1)`.
    pub fn ln_moment(&self, k: usize) -> f64 {
        self.ln_moments[k]
    }

    /// `M[w](n+1) / M[w](n)` for `n >= 1`.
    pub fn moment_ratio(&self, n: usize) -> Result<f64> {
        self.check_degree(n)?;
        Ok((self.ln_moments[n] - self.ln_moments[n - 1]).exp())
    }

    fn check_degree(&self, n: usize) -> Result<()> {
        if n > self.n() {
            return Err(Error::Domain(format!("degree {n} exceeds N = {}", self.n())));
        }
        if !self.ln_moments[n].is_finite() {
            return Err(Error::Domain(format!("M[w]({}) is infinite for this ensemble", n + 1)));
        }
        Ok(())
    }

    /// `(coefficient, power)` pairs of `p̂_n` in log form: the `j`-th term is
    /// `(-1)^j e^{c_j} x^j`.
    fn p_hat_log_coefficients(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..=n)
            .map(|j| {
                let jf = j as f64;
                ln_gamma(nf + 1.0) - ln_gamma(jf + 1.0) - ln_gamma(nf - jf + 1.0) + self.ln_moments[0]
                    - self.ln_moments[j]
            })
            .collect()
    }

    fn sum_terms(&self, terms: impl Iterator<Item = f64>) -> f64 {
        match self.precision() {
            Precision::Double => terms.sum(),
            Precision::Extended => terms.fold(DoubleDouble::ZERO, |acc, t| acc + DoubleDouble::new(t)).to_f64(),
        }
    }

    /// `p̂_n(x) = Σ_j binom(n, j) (-x)^j M(1)/M(j+1)`.
    pub fn p_hat(&self, n: usize, x: f64) -> Result<f64> {
        if n > self.n() {
            return Err(Error::Domain(format!("degree {n} exceeds N = {}", self.n())));
        }
        if n == self.n() {
            self.check_degree(n)?;
        }
        if x == 0.0 {
            return Ok(1.0);
        }
        let lx = x.abs().ln();
        let sx = x.signum();
        let c = self.p_hat_log_coefficients(n);
        // the j-th term is (-x)^j e^{c_j}
        Ok(self.sum_terms(c.iter().enumerate().map(|(j, cj)| (-sx).powi(j as i32) * (cj + j as f64 * lx).exp())))
    }

    /// `d/dx p̂_n(x)` by term-wise differentiation.
    pub fn p_hat_derivative(&self, n: usize, x: f64) -> Result<f64> {
        self.p_hat(n, 0.0)?;
        if n == 0 {
            return Ok(0.0);
        }
        let c = self.p_hat_log_coefficients(n);
        if x == 0.0 {
            return Ok(-c[1].exp());
        }
        let lx = x.abs().ln();
        let sx = x.signum();
        Ok(self.sum_terms((1..=n).map(|j| {
            // d/dx (-x)^j = -j (-x)^{j-1}
            -(-sx).powi(j as i32 - 1) * (c[j] + (j as f64).ln() + (j as f64 - 1.0) * lx).exp()
        })))
    }

    fn p_scale(&self, n: usize) -> Result<f64> {
        self.check_degree(n)?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * (self.ln_moments[n] - self.ln_moments[0]).exp())
    }

    /// The monic polynomial `p_n(x)`.
    pub fn p_n(&self, n: usize, x: f64) -> Result<f64> {
        Ok(self.p_scale(n)? * self.p_hat(n, x)?)
    }

    pub fn p_n_derivative(&self, n: usize, x: f64) -> Result<f64> {
        Ok(self.p_scale(n)? * self.p_hat_derivative(n, x)?)
    }

    /// Leading coefficient of `p_n` from an `n`-th divided difference on
    /// equispaced nodes (a check on monic-ness that does not look at the
    /// coefficient formula).
    pub fn divided_difference_leading(&self, n: usize) -> Result<f64> {
        let ratio = if n >= 1 { self.moment_ratio(n)? } else { 1.0 };
        let h = 10.0 * ratio.max(1.0);
        let mut vals: Vec<f64> = (0..=n).map(|k| self.p_n(n, k as f64 * h)).collect::<Result<_>>()?;
        for level in 1..=n {
            for k in (level..=n).rev() {
                vals[k] = (vals[k] - vals[k - 1]) / (level as f64 * h);
            }
        }
        Ok(vals[n])
    }

    /// Integrand whose inverse transform is `q̂_n`, optionally times `(-s)^k`
    /// (that is, `(x d/dx)^k q̂_n`).
    pub fn q_hat_integrand(&self, n: usize, euler_power: u32) -> MellinIntegrand {
        let mut weight = self.ensemble.weight.clone();
        weight.ln_prefactor -= self.ln_moments[0];
        MellinIntegrand::new(weight).with_falling(n).with_euler_power(euler_power)
    }

    /// Evaluator for `q̂_n` on `(0, x_max]`.
    pub fn q_hat(&self, n: usize, x_max: f64) -> Result<MellinInverse> {
        if n > self.n() {
            return Err(Error::Domain(format!("degree {n} exceeds N = {}", self.n())));
        }
        MellinInverse::new(self.q_hat_integrand(n, 0), x_max, self.precision())
    }

    /// Evaluator for `x q̂_n'(x)`, from the integrand multiplied by `-s`.
    pub fn q_hat_euler(&self, n: usize, x_max: f64) -> Result<MellinInverse> {
        MellinInverse::new(self.q_hat_integrand(n, 1), x_max, self.precision())
    }

    fn q_scale(&self, n: usize) -> Result<f64> {
        self.check_degree(n)?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign * (self.ln_moments[0] - self.ln_moments[n]).exp())
    }

    /// `q_n(x)` for `x > 0`.
    pub fn q_n(&self, n: usize, x: f64) -> Result<f64> {
        Ok(self.q_scale(n)? * self.q_hat(n, x)?.eval(x)?)
    }

    /// `Σ_{j<N} p_j(x) q_j(y)`, for cross-checks at small `N`.
    pub fn kernel_sum(&self, x: f64, y: f64) -> Result<f64> {
        if self.n() > KERNEL_SUM_MAX_N {
            return Err(Error::SizeGuard(format!(
                "kernel_sum is limited to N <= {KERNEL_SUM_MAX_N}, got {}",
                self.n()
            )));
        }
        let mut acc = 0.0;
        for j in 0..self.n() {
            acc += self.p_hat(j, x)? * self.q_hat(j, y.max(f64::MIN_POSITIVE))?.eval(y)?;
        }
        Ok(acc)
    }

    /// Evaluator for `q̂_N` suitable for kernels with second argument up to `y_max`.
    pub fn kernel_q(&self, y_max: f64) -> Result<MellinInverse> {
        self.q_hat(self.n(), if y_max > 0.0 { y_max } else { 1.0 })
    }

    /// Kernel integrand in `u = √t` (including the Jacobian `2u`).
    fn kernel_integrand(&self, q: &MellinInverse, x: f64, y: f64, u: f64) -> Result<f64> {
        let t = u * u;
        Ok(2.0 * u * self.p_hat(self.n() - 1, x * t)? * q.eval(y * t)?)
    }

    /// `K_N(x, y) = N ∫₀¹ p̂_{N-1}(xt) q̂_N(yt) dt`, order doubling from 64.
    pub fn kernel_integral(&self, x: f64, y: f64) -> Result<f64> {
        let q = self.kernel_q(y)?;
        self.kernel_integral_with(&q, x, y)
    }

    /// Same as [`kernel_integral`](Self::kernel_integral) with a prebuilt `q̂_N`
    /// evaluator covering `y`.
    ///
    /// The integral is taken in `u = √t`, which makes the integrand smooth
    /// when the small-`y` exponents of `q̂_N` are half-integers; otherwise the
    /// `u`-range is graded geometrically towards 0.
    pub fn kernel_integral_with(&self, q: &MellinInverse, x: f64, y: f64) -> Result<f64> {
        if x < 0.0 || y < 0.0 {
            return Err(Error::Domain("kernel arguments must be non-negative".into()));
        }
        let nf = self.n() as f64;
        let f = |u| self.kernel_integrand(q, x, y, u);
        let v = if self.ensemble.weight.half_integer_exponents() {
            integrate_adaptive_floor(f, 0.0, 1.0, KERNEL_QUAD_TOL, KERNEL_QUAD_TOL, 0.0, 64, 8192)?
        } else {
            integrate_graded(f, 1.0, KERNEL_QUAD_TOL, KERNEL_QUAD_TOL)?
        };
        Ok(nf * v)
    }

    /// Kernel at `(λx, λy)` by a fixed rule in `u = √t`: a smooth function
    /// of `λ`, which is what finite differences need. `q̂_N` is evaluated on
    /// the path chosen at `λ = 1`. Exponents that are not half-integers get
    /// dyadic panels toward `u = 0` instead of a single Gauss rule.
    fn kernel_fixed(&self, q: &MellinInverse, x: f64, y: f64, lam: f64, order: usize) -> Result<f64> {
        let mut acc = 0.0;
        for (u, w) in self.fixed_nodes(order) {
            let t = u * u;
            acc += w * 2.0 * u * self.p_hat(self.n() - 1, lam * x * t)? * q.eval_anchored(lam * y * t, y * t)?;
        }
        Ok(self.n() as f64 * acc)
    }

    fn fixed_nodes(&self, order: usize) -> Vec<(f64, f64)> {
        if self.ensemble.weight.half_integer_exponents() {
            return crate::specfun::gauss_legendre(order).mapped(0.0, 1.0).collect();
        }
        let rule = crate::specfun::gauss_legendre((order / 8).max(8));
        (0..FIXED_PANELS)
            .flat_map(|k| {
                let hi = 0.5f64.powi(k as i32);
                let lo = if k + 1 == FIXED_PANELS { 0.0 } else { 0.5 * hi };
                rule.mapped(lo, hi).collect::<Vec<_>>()
            })
            .collect()
    }

    /// `|x p_n' − n p_n − n (M(n+1)/M(n)) p_{n−1}|` with the exact derivative.
    pub fn recurrence_residual_p(&self, n: usize, x: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("the p-recurrence needs n >= 1".into()));
        }
        let nf = n as f64;
        let lhs = x * self.p_n_derivative(n, x)?;
        let rhs = nf * self.p_n(n, x)? + nf * self.moment_ratio(n)? * self.p_n(n - 1, x)?;
        Ok((lhs - rhs).abs())
    }

    /// `|x q_n' + (n+1)(M(n+2)/M(n+1)) q_{n+1} + (n+1) q_n|`, with `q_n'` from
    /// two-level Richardson central differences.
    pub fn recurrence_residual_q(&self, n: usize, x: f64) -> Result<f64> {
        if n + 1 > self.n() {
            return Err(Error::Domain(format!("the q-recurrence needs n <= N-1, got n = {n}")));
        }
        if x <= 0.0 {
            return Err(Error::Domain("the q-recurrence needs x > 0".into()));
        }
        let h = 1e-4 * x.max(1.0);
        let h = h.min(0.4 * x);
        // one contour band around x: residue sums cancel too much for an h = 1e-4 stencil
        let qn = MellinInverse::contour(self.q_hat_integrand(n, 0), x + h, self.precision())?;
        let qn1 = self.q_hat(n + 1, x)?;
        let dq = richardson(|z| qn.eval_anchored(z, x), x, h)?;
        let nf = n as f64 + 1.0;
        // in the hatted normalisation: x q̂_n' − (n+1) q̂_{n+1} + (n+1) q̂_n = 0
        let r = x * dq - nf * qn1.eval(x)? + nf * qn.eval(x)?;
        Ok((self.q_scale(n)? * r).abs())
    }

    /// `|(x∂_x + y∂_y + 1)K_N − N p̂_{N−1}(x) q̂_N(y)|`, which is
    /// `(x∂_x + y∂_y + 1)K_N + N (M(N+1)/M(N)) p_{N−1}(x) q_N(y)` in the hatted
    /// normalisation. The Euler derivative is `d/dλ K_N(λx, λy)` at `λ = 1`.
    pub fn differential_identity_residual(&self, x: f64, y: f64) -> Result<f64> {
        if x <= 0.0 || y <= 0.0 {
            return Err(Error::Domain("the differential identity needs x, y > 0".into()));
        }
        let h = 1e-4;
        let q = self.kernel_q(y * (1.0 + h))?;
        let order = self.converged_order(&q, x, y)?;
        let k = |lam: f64| self.kernel_fixed(&q, x, y, lam, order);
        let euler = richardson(k, 1.0, h)?;
        let lhs = euler + k(1.0)?;
        let rhs = self.n() as f64 * self.p_hat(self.n() - 1, x)? * q.eval(y)?;
        Ok((lhs - rhs).abs())
    }

    /// The `t`-form: `|d/dt[t K_N(tx, ty)] − N p̂_{N−1}(tx) q̂_N(ty)|` at `t`.
    pub fn t_form_residual(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::Domain("t must be positive".into()));
        }
        let h = 1e-4 * t.max(1.0);
        let q = self.kernel_q(y * (t + h))?;
        let order = self.converged_order(&q, x * t, y * t)?;
        let g = |s: f64| Ok(s * self.kernel_fixed(&q, t * x, t * y, s / t, order)?);
        let lhs = richardson(g, t, h)?;
        let rhs = self.n() as f64 * self.p_hat(self.n() - 1, t * x)? * q.eval(t * y)?;
        Ok((lhs - rhs).abs())
    }

    /// Smallest doubled order (from 64) at which the fixed rule has settled.
    fn converged_order(&self, q: &MellinInverse, x: f64, y: f64) -> Result<usize> {
        let mut order = 64;
        let mut prev = self.kernel_fixed(q, x, y, 1.0, order)?;
        while order < 8192 {
            let cur = self.kernel_fixed(q, x, y, 1.0, 2 * order)?;
            if (cur - prev).abs() <= KERNEL_QUAD_TOL * cur.abs().max(1e-13) {
                return Ok(2 * order);
            }
            prev = cur;
            order *= 2;
        }
        Err(Error::Quadrature("kernel rule did not settle".into()))
    }

    /// `∫₀^∞ p_m(x) q_n(x) dx` for `m, n <= m_max`.
    pub fn biorthogonality_matrix(&self, m_max: usize) -> Result<Vec<Vec<f64>>> {
        if m_max > BIORTHOGONALITY_MAX {
            return Err(Error::SizeGuard(format!("m_max is limited to {BIORTHOGONALITY_MAX}")));
        }
        if m_max >= self.n() && !self.ln_moments[m_max].is_finite() {
            return Err(Error::Domain(format!("M[w]({}) is infinite", m_max + 1)));
        }
        let qs: Vec<MellinInverse> = (0..=m_max)
            .map(|n| self.q_hat(n, f64::INFINITY))
            .collect::<Result<_>>()?;
        let mut out = vec![vec![0.0; m_max + 1]; m_max + 1];
        for (m, row) in out.iter_mut().enumerate() {
            for (n, cell) in row.iter_mut().enumerate() {
                // q̂ evaluations carry up to ~1e-11 relative noise; entries need 1e-8
                let v = integrate_dyadic_floor(|x| Ok(self.p_hat(m, x)? * qs[n].eval(x)?), 1e-10, 1e-10, 1e-16)?;
                // p_m q_n = p̂_m q̂_n (-1)^{m+n} M(m+1)/M(n+1)
                let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                *cell = sign * (self.ln_moments[m] - self.ln_moments[n]).exp() * v;
            }
        }
        Ok(out)
    }

    /// `∫₀^∞ t^k K_N(t, t) dt`, exactly, through the Mellin pairing
    /// `∫ x^m q̂_j(x) dx = Π_{l≤j}(1 − (m+1)/l) M(m+1)/M(1)`:
    ///
    /// `Σ_{j<N} Σ_i (−1)^{i+j} binom(j, i) binom(k+i, j) M(k+i+1)/M(i+1)`.
    pub fn diagonal_moment(&self, k: u32) -> Result<f64> {
        let n = self.n();
        let kk = k as usize;
        let mut ln_ratio = Vec::with_capacity(n);
        for i in 0..n {
            let s = (kk + i + 1) as f64;
            if s >= self.ensemble.strip.1 {
                return Err(Error::Domain(format!("M[w]({s}) is infinite")));
            }
            let (top, sign) = self.ensemble.weight.ln_eval_real(s)?;
            if sign <= 0.0 {
                return Err(Error::Domain(format!("M[w]({s}) is not positive")));
            }
            ln_ratio.push(top - self.ln_moments[i]);
        }
        let ln_binom = |a: usize, b: usize| ln_gamma(a as f64 + 1.0) - ln_gamma(b as f64 + 1.0) - ln_gamma((a - b) as f64 + 1.0);
        let terms = (0..n).flat_map(|j| {
            let ln_ratio = &ln_ratio;
            (j.saturating_sub(kk)..=j).map(move |i| {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                sign * (ln_binom(j, i) + ln_binom(kk + i, j) + ln_ratio[i]).exp()
            })
        });
        Ok(self.sum_terms(terms))
    }

    /// `∫₀^∞ t^k p̂_{N-1}(t) q̂_N(t) dt` through the same pairing; only
    /// `j ≥ N − k` survives:
    ///
    /// `Σ_j (−1)^{j+N} binom(N−1, j) binom(k+j, N) M(k+j+1)/M(j+1)`.
    pub fn edge_pairing(&self, k: u32) -> Result<f64> {
        let n = self.n();
        let kk = k as usize;
        let ln_binom = |a: usize, b: usize| ln_gamma(a as f64 + 1.0) - ln_gamma(b as f64 + 1.0) - ln_gamma((a - b) as f64 + 1.0);
        let mut terms = Vec::with_capacity(kk);
        for j in n.saturating_sub(kk)..n {
            let s = (kk + j + 1) as f64;
            if s >= self.ensemble.strip.1 {
                return Err(Error::Domain(format!("M[w]({s}) is infinite")));
            }
            let (top, sign) = self.ensemble.weight.ln_eval_real(s)?;
            if sign <= 0.0 {
                return Err(Error::Domain(format!("M[w]({s}) is not positive")));
            }
            let parity = if (j + n) % 2 == 0 { 1.0 } else { -1.0 };
            terms.push(parity * (ln_binom(n - 1, j) + ln_binom(kk + j, n) + top - self.ln_moments[j]).exp());
        }
        Ok(self.sum_terms(terms.into_iter()))
    }
}

/// Largest residual of each invariant over a small evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantResiduals {
    /// `max |∫ p_m q_n − δ_mn|`.
    pub biorthogonality: f64,
    pub recurrence_p: f64,
    pub recurrence_q: f64,
    pub differential_identity: f64,
}

impl InvariantResiduals {
    /// Tolerances `(biorthogonality, p-recurrence, q-recurrence, differential identity)`.
    pub const TOLERANCES: [f64; 4] = [1e-8, 1e-10, 1e-7, 1e-6];

    pub fn as_array(&self) -> [f64; 4] {
        [self.biorthogonality, self.recurrence_p, self.recurrence_q, self.differential_identity]
    }

    pub fn passes(&self) -> bool {
        self.as_array().iter().zip(Self::TOLERANCES).all(|(r, t)| *r <= t)
    }
}

impl BiorthogonalEvaluator {
    /// Runs every invariant at the points `xs` (pairs `(xs[i], xs[i+1])`
    /// for the differential identity). The `p`-recurrence is measured
    /// relative to `max(1, |x p_n'|)` so that it is scale-free across families.
    pub fn invariant_residuals(&self, xs: &[f64]) -> Result<InvariantResiduals> {
        let n = self.n();
        let m_max = (n - 1).min(BIORTHOGONALITY_MAX);
        let mut bio: f64 = 0.0;
        for (i, row) in self.biorthogonality_matrix(m_max)?.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                bio = bio.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        let (mut rp, mut rq, mut rd) = (0.0_f64, 0.0_f64, 0.0_f64);
        for &x in xs {
            for k in 1..n {
                let scale = (x * self.p_n_derivative(k, x)?).abs().max(1.0);
                rp = rp.max(self.recurrence_residual_p(k, x)? / scale);
            }
            for k in 0..n - 1 {
                rq = rq.max(self.recurrence_residual_q(k, x)?);
            }
        }
        for w in xs.windows(2) {
            rd = rd.max(self.differential_identity_residual(w[0], w[1])?);
        }
        Ok(InvariantResiduals { biorthogonality: bio, recurrence_p: rp, recurrence_q: rq, differential_identity: rd })
    }
}

/// Central difference at step `h` and `h/2` combined by Richardson; the
/// `h²`-accurate and `h⁴`-accurate levels must agree to [`RICHARDSON_TOL`].
pub fn richardson<F>(mut f: F, x: f64, h: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let d1 = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let d2 = (f(x + 0.5 * h)? - f(x - 0.5 * h)?) / h;
    let r = (4.0 * d2 - d1) / 3.0;
    if (d2 - r).abs() > RICHARDSON_TOL * r.abs().max(1.0) {
        return Err(Error::FiniteDifference((d2 - r).abs()));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleSpec;
    use crate::specfun::integrate_adaptive;

    fn ev(spec: EnsembleSpec) -> BiorthogonalEvaluator {
        BiorthogonalEvaluator::new(spec.build().unwrap()).unwrap()
    }

    fn lue(a: f64, n: usize) -> BiorthogonalEvaluator {
        ev(EnsembleSpec::laguerre_product(&[a], n))
    }

    #[test]
    fn p_small_degrees() {
        let e = lue(0.6, 4);
        for x in [0.0, 0.3, 2.5] {
            assert_eq!(e.p_n(0, x).unwrap(), 1.0);
            assert!((e.p_n(1, x).unwrap() - (x - 1.6)).abs() < 1e-13);
        }
    }

    #[test]
    fn p3_is_monic_laguerre() {
        // p_3 = (-1)^3 3! L_3^{(a)}, L_n^{(a)}(x) = Σ_j (-1)^j binom(n+a, n-j) x^j / j!
        let a: f64 = 0.5;
        let x: f64 = 0.7;
        let binom = |top: f64, k: usize| (0..k).fold(1.0, |acc, i| acc * (top - i as f64) / (i as f64 + 1.0));
        let l3: f64 = (0..=3)
            .map(|j| (-1f64).powi(j as i32) * binom(3.0 + a, 3 - j) * x.powi(j as i32) / [1.0, 1.0, 2.0, 6.0][j])
            .sum();
        let e = lue(a, 4);
        assert!((e.p_n(3, x).unwrap() + 6.0 * l3).abs() < 1e-12);
    }

    #[test]
    fn q_closed_forms() {
        let e = lue(0.0, 3);
        assert!((e.q_n(0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-13);
        let x: f64 = 0.5;
        let exact = 0.25 * (2.0 - 4.0 * x + x * x) * (-x).exp();
        assert!((e.q_n(2, x).unwrap() - exact).abs() < 1e-12);
        let e = lue(1.0, 3);
        for x in [0.1_f64, 1.0, 5.0] {
            let rodrigues = -0.5 * (2.0 * x - x * x) * (-x).exp();
            assert!((e.q_n(1, x).unwrap() - rodrigues).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn q_paths_agree() {
        let e = ev(EnsembleSpec::laguerre_product(&[0.0, 0.5], 4));
        for n in 0..=3 {
            let integrand = e.q_hat_integrand(n, 0);
            let res = crate::mellin::residue_series(&integrand, 0.8).unwrap();
            let con = crate::mellin::inverse_mellin_auto(&integrand, 0.8).unwrap();
            assert!((res - con).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn monic_by_divided_differences() {
        for spec in [
            EnsembleSpec::laguerre_product(&[0.0], 8),
            EnsembleSpec::laguerre_product(&[0.0, 1.0], 8),
            EnsembleSpec::mb_laguerre(0.5, 2.0, 8),
            EnsembleSpec::laguerre_inverse_product(&[1.0], &[1.0], 9),
        ] {
            let e = ev(spec.clone()).with_precision_for_tests();
            for n in 1..=8 {
                let lead = e.divided_difference_leading(n).unwrap();
                assert!((lead - 1.0).abs() < 1e-10, "{spec:?} n={n} lead={lead}");
            }
        }
    }

    #[test]
    fn kernel_sum_matches_integral() {
        let e = lue(0.0, 3);
        let (s, i) = (e.kernel_sum(0.7, 1.3).unwrap(), e.kernel_integral(0.7, 1.3).unwrap());
        assert!((s - i).abs() < 1e-8, "{s} {i}");
        let e = ev(EnsembleSpec::laguerre_product(&[0.0, 1.0], 2));
        let (s, i) = (e.kernel_sum(0.5, 0.5).unwrap(), e.kernel_integral(0.5, 0.5).unwrap());
        assert!((s - i).abs() < 1e-8, "{s} {i}");
        let e = lue(0.0, 1);
        assert!((e.kernel_integral(0.3, 1.1).unwrap() - (-1.1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kernel_sum_guard() {
        assert!(matches!(lue(0.0, 13).kernel_sum(1.0, 1.0), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn density_positive_and_normalised() {
        let e = lue(0.0, 8);
        for x in [0.1, 1.0, 5.0] {
            assert!(e.kernel_integral(x, x).unwrap() > 0.0);
        }
        let e = lue(0.0, 5);
        assert!((e.diagonal_moment(0).unwrap() - 5.0).abs() < 1e-12);
        // E tr X = N (N + a) for the Laguerre ensemble
        assert!((e.diagonal_moment(1).unwrap() - 25.0).abs() < 1e-10);
        let q = e.q_hat(5, f64::INFINITY).unwrap();
        let quad = integrate_adaptive(|t| e.kernel_integral_with(&q, t, t), 0.0, 60.0, 1e-9, 32, 1024).unwrap();
        assert!((quad - 5.0).abs() < 1e-7, "{quad}");
    }

    #[test]
    fn recurrences() {
        assert!(lue(0.0, 2).recurrence_residual_p(1, 2.0).unwrap() < 1e-12);
        let e = ev(EnsembleSpec::laguerre_product(&[0.0, 1.0], 4));
        assert!(e.recurrence_residual_p(3, 0.7).unwrap() < 1e-10);
        assert!(lue(0.0, 2).recurrence_residual_q(0, 1.0).unwrap() < 1e-8);
        assert!(lue(2.0, 3).recurrence_residual_q(2, 0.5).unwrap() < 1e-8);
        let e = ev(EnsembleSpec::laguerre_product(&[0.0, 0.5], 3));
        assert!(e.recurrence_residual_q(1, 1.0).unwrap() < 1e-7);
        assert!(lue(0.0, 2).recurrence_residual_p(0, 1.0).is_err());
    }

    #[test]
    fn euler_derivative_paths_agree() {
        let e = ev(EnsembleSpec::laguerre_product(&[0.0, 0.5], 3));
        let q = e.q_hat(2, 2.0).unwrap();
        let qe = e.q_hat_euler(2, 2.0).unwrap();
        for x in [0.3, 1.0, 1.9] {
            let fd = x * richardson(|z| q.eval(z), x, 1e-4).unwrap();
            assert!((fd - qe.eval(x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn differential_identity() {
        assert!(lue(0.0, 4).differential_identity_residual(0.5, 1.5).unwrap() < 1e-6);
        assert!(lue(1.0, 3).differential_identity_residual(1.0, 1.0).unwrap() < 1e-6);
        assert!(lue(0.0, 4).t_form_residual(0.8, 1.6, 0.5).unwrap() < 1e-6);
    }

    #[test]
    fn biorthogonality() {
        let m = lue(0.0, 3).biorthogonality_matrix(1).unwrap();
        assert!((m[0][0] - 1.0).abs() < 1e-8 && m[0][1].abs() < 1e-8);
        let e = ev(EnsembleSpec::laguerre_product(&[0.0, 1.0], 5));
        let m = e.biorthogonality_matrix(4).unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-8, "({i},{j}) = {v}");
            }
        }
    }

    impl BiorthogonalEvaluator {
        fn with_precision_for_tests(mut self) -> Self {
            self.ensemble.precision = Precision::Extended;
            self
        }
    }
}
