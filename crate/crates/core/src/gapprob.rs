//! Gap probabilities of the Jacobi β-ensemble `x^a (1-x)^b` near the hard
//! edge `x = 1`, for integer `b`.
//!
//! The finite-`N` probability `E_N(0; (s, 1))` is a power of `s` times a
//! generalised `2F1` in the repeated argument `1 - s`: a Gauss function for
//! `b = 1`, a `b`-dimensional torus integral otherwise. Its hard-edge limit
//! is a `b`-fold integral over the keyhole contour
//!
//! ```text
//! I_b(s)[f] = ∫ Π_l dz_l/(2πi z_l) f(z) Π_l z_l^{2/β-1} e^{1/z_l + s z_l/4}
//!                 Π_{j<k} (-(z_k - z_j)²/(z_j z_k))^{2/β}
//! ```
//!
//! with `z = e^{2πix}`. On this normalisation `I_1(0)[1] = 1/Γ(2/β)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardedge::ConvergenceReport;
use crate::specfun::{gauss_2f1, gauss_legendre, ln_gamma};

/// Inner end of the keyhole's axis legs; `e^{-1/ε}` bounds what is cut off.
pub const KEYHOLE_EPSILON: f64 = 1e-3;
/// Agreement required between a contour rule and its refinement.
pub const CONTOUR_TOL: f64 = 1e-8;
/// Largest `N` for [`brute_force_e_gap`].
pub const BRUTE_FORCE_MAX_N: usize = 3;
/// Largest dimension of the torus and contour integrals.
pub const MAX_DIMENSION: u32 = 3;

/// `(N, β, a, b)` of the Jacobi β-ensemble with weight `x^a (1-x)^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiBetaSpec {
    pub n: usize,
    pub beta: f64,
    pub a: f64,
    pub b: u32,
}

impl JacobiBetaSpec {
    pub fn new(n: usize, beta: f64, a: f64, b: u32) -> Result<Self> {
        let spec = Self { n, beta, a, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.a > -1.0) {
            return Err(Error::Domain(format!("a must exceed -1, got {}", self.a)));
        }
        Ok(())
    }

    /// Exponent of the power of `s` in front of the polynomial.
    pub fn power(&self) -> f64 {
        let n = self.n as f64;
        n * (self.a + 1.0) + self.beta * n * (n - 1.0) / 2.0
    }
}

/// The Morris integral `M_b(ã, b̃, λ)`, `λ = 2/β`.
pub fn morris_integral(a_t: f64, b_t: f64, lam: f64, b: u32) -> Result<f64> {
    let mut ln = 0.0;
    for j in 0..b {
        let j = j as f64;
        let args_up = [1.0 + a_t + b_t + j * lam, 1.0 + (j + 1.0) * lam];
        let args_down = [1.0 + a_t + j * lam, 1.0 + b_t + j * lam, 1.0 + lam];
        for &x in args_up.iter().chain(&args_down) {
            if !(x > 0.0) {
                return Err(Error::Pole(x));
            }
        }
        ln += args_up.iter().map(|&x| ln_gamma(x)).sum::<f64>() - args_down.iter().map(|&x| ln_gamma(x)).sum::<f64>();
    }
    Ok(ln.exp())
}

/// Gauss–Legendre nodes on `[-1/2, 1/2]`, graded toward both ends down to
/// width `2^{-depth}`.
fn torus_nodes(order: usize, depth: u32) -> Vec<(f64, f64)> {
    let rule = gauss_legendre(order);
    let mut out = Vec::new();
    for k in 0..depth {
        let (lo, hi) = (0.5 - 0.5f64.powi(k as i32 + 1), 0.5 - 0.5f64.powi(k as i32 + 2));
        let hi = if k + 1 == depth { 0.5 } else { hi };
        for (x, w) in rule.mapped(lo, hi) {
            out.push((x, w));
            out.push((-x, w));
        }
    }
    out
}

/// `Σ` over the `b`-fold tensor grid of `Π_l g_l · pair(…)`, with the outer
/// index spread across threads.
fn tensor_sum<T, P>(nodes: &[T], b: usize, weight: impl Fn(&T) -> Complex64 + Sync, pair: P) -> Complex64
where
    T: Sync,
    P: Fn(&[&T]) -> Complex64 + Sync,
{
    let g: Vec<Complex64> = nodes.iter().map(&weight).collect();
    let m = nodes.len();
    (0..m)
        .into_par_iter()
        .map(|first| {
            if g[first] == Complex64::new(0.0, 0.0) {
                return Complex64::new(0.0, 0.0);
            }
            let mut idx = vec![0usize; b];
            idx[0] = first;
            let mut acc = Complex64::new(0.0, 0.0);
            let mut chosen: Vec<&T> = Vec::with_capacity(b);
            loop {
                chosen.clear();
                chosen.extend(idx.iter().map(|&i| &nodes[i]));
                let w: Complex64 = idx.iter().map(|&i| g[i]).product();
                acc += w * pair(&chosen);
                // odometer over indices 1..b
                let mut pos = b;
                loop {
                    if pos == 1 {
                        return acc;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < m {
                        break;
                    }
                    idx[pos] = 0;
                }
                if b == 1 {
                    return acc;
                }
            }
        })
        .sum()
}

/// The torus form of the generalised `2F1(r, -b̃; 2(b-1)/β + ã + 1; (u)^b)`,
/// normalised by the Morris integral.
fn torus_2f1(n: usize, beta: f64, a_t: f64, b_t: f64, u: f64, b: u32, order: usize) -> Result<f64> {
    let p = a_t + b_t;
    let depth = if p.fract() == 0.0 { 4 } else { 40 };
    let nodes = torus_nodes(order, depth);
    let lam2 = 4.0 / beta;
    let total = tensor_sum(
        &nodes,
        b as usize,
        |&(x, w)| {
            let phase = Complex64::from_polar(1.0, PI * x * (a_t - b_t));
            let edge = (2.0 * (PI * x).cos()).max(0.0).powf(p);
            let poly = (Complex64::new(1.0, 0.0) + u * Complex64::from_polar(1.0, 2.0 * PI * x)).powi(n as i32);
            w * phase * edge * poly
        },
        |xs| {
            let mut v = 1.0;
            for k in 1..xs.len() {
                for j in 0..k {
                    v *= (2.0 * (PI * (xs[k].0 - xs[j].0)).sin()).abs().powf(lam2);
                }
            }
            Complex64::new(v, 0.0)
        },
    );
    Ok(total.re / morris_integral(a_t, b_t, 2.0 / beta, b)?)
}

/// `E_N(0; (s, 1))`, the probability that every eigenvalue lies in `(0, s)`.
pub fn e_gap_finite(spec: &JacobiBetaSpec, s: f64) -> Result<f64> {
    spec.validate()?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1], got {s}")));
    }
    let n = spec.n as f64;
    let prefactor = s.powf(spec.power());
    let q = -(n - 1.0) - 2.0 * (spec.a + 1.0) / spec.beta;
    let poly = match spec.b {
        0 => 1.0,
        1 => gauss_2f1(-n, q, 2.0 / spec.beta, 1.0 - s)?,
        b if b <= MAX_DIMENSION => {
            let a_t = 2.0 / spec.beta - 1.0;
            let b_t = -q;
            let coarse = torus_2f1(spec.n, spec.beta, a_t, b_t, 1.0 - s, b, 16)?;
            let fine = torus_2f1(spec.n, spec.beta, a_t, b_t, 1.0 - s, b, 32)?;
            if (fine - coarse).abs() > 1e-9 * fine.abs().max(1.0) {
                return Err(Error::Quadrature(format!("torus integral unsettled: {coarse} vs {fine}")));
            }
            fine
        }
        b => return Err(Error::SizeGuard(format!("b = {b} exceeds {MAX_DIMENSION}"))),
    };
    Ok(prefactor * poly)
}

fn jacobi_density(spec: &JacobiBetaSpec, xs: &[f64]) -> f64 {
    let mut v: f64 = xs.iter().map(|&x| x.powf(spec.a) * (1.0 - x).powi(spec.b as i32)).product();
    for k in 1..xs.len() {
        for j in 0..k {
            v *= (xs[k] - xs[j]).abs().powf(spec.beta);
        }
    }
    v
}

/// Tensor Gauss–Legendre of the density over `(0, s)^N`.
fn cube_integral(spec: &JacobiBetaSpec, s: f64, order: usize) -> f64 {
    let nodes: Vec<(f64, f64)> = gauss_legendre(order).mapped(0.0, s).collect();
    tensor_sum(&nodes, spec.n, |&(_, w)| Complex64::new(w, 0.0), |xs| {
        let pts: Vec<f64> = xs.iter().map(|p| p.0).collect();
        Complex64::new(jacobi_density(spec, &pts), 0.0)
    })
    .re
}

/// `E_N(0; (s, 1))` straight from the eigenvalue density, for `N ≤ 3`.
/// The order is doubled until two rules agree to `1e-10`.
pub fn brute_force_e_gap(spec: &JacobiBetaSpec, s: f64) -> Result<f64> {
    spec.validate()?;
    if spec.n > BRUTE_FORCE_MAX_N {
        return Err(Error::SizeGuard(format!("brute force is limited to N <= {BRUTE_FORCE_MAX_N}")));
    }
    let ratio = |order| cube_integral(spec, s, order) / cube_integral(spec, 1.0, order);
    let mut prev = ratio(8);
    for order in [16, 32, 64] {
        let cur = ratio(order);
        if (cur - prev).abs() <= 1e-10 * cur.abs().max(1e-300) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature("brute-force gap probability did not settle".into()))
}

/// One quadrature node on the keyhole contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourNode {
    pub z: Complex64,
    /// Branch-resolved `log z` (argument `∓π` on the lower/upper axis leg).
    pub ln_z: Complex64,
    /// Quadrature weight times `dz / (2πi z)`.
    pub weight: Complex64,
}

/// The keyhole: out from `0` to `-1` below the negative axis, once round
/// the unit circle counter-clockwise, back to `0` above the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyholeContour {
    pub inner_cut_start: f64,
    pub circle_radius: f64,
    pub order: usize,
    pub axis_nodes: Vec<ContourNode>,
    pub circle_nodes: Vec<ContourNode>,
}

impl KeyholeContour {
    /// Dyadic panels on each axis leg from `1` down to `ε`, sixteen equal
    /// panels on the circle, `order` Gauss points per panel.
    pub fn new(epsilon: f64, order: usize) -> Result<Self> {
        if !(epsilon > 0.0 && (-1.0 / epsilon).exp() < 1e-16) {
            return Err(Error::Domain(format!("keyhole cut start {epsilon} leaves e^(-1/eps) above 1e-16")));
        }
        let rule = gauss_legendre(order);
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        let mut axis_nodes = Vec::new();
        let mut hi = 1.0;
        while hi > epsilon {
            let lo = (0.5 * hi).max(epsilon);
            for (r, w) in rule.mapped(lo, hi) {
                let z = Complex64::new(-r, 0.0);
                let base = w / (two_pi_i * r);
                axis_nodes.push(ContourNode { z, ln_z: Complex64::new(r.ln(), -PI), weight: base });
                axis_nodes.push(ContourNode { z, ln_z: Complex64::new(r.ln(), PI), weight: -base });
            }
            hi = lo;
        }
        let panels = 16;
        let mut circle_nodes = Vec::new();
        for p in 0..panels {
            let lo = -PI + 2.0 * PI * p as f64 / panels as f64;
            let hi = lo + 2.0 * PI / panels as f64;
            for (phi, w) in rule.mapped(lo, hi) {
                circle_nodes.push(ContourNode {
                    z: Complex64::from_polar(1.0, phi),
                    ln_z: Complex64::new(0.0, phi),
                    weight: Complex64::new(w / (2.0 * PI), 0.0),
                });
            }
        }
        Ok(Self { inner_cut_start: epsilon, circle_radius: 1.0, order, axis_nodes, circle_nodes })
    }

    /// The same contour with twice the Gauss points per panel.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.inner_cut_start, 2 * self.order)
    }

    pub fn nodes(&self) -> Vec<ContourNode> {
        self.axis_nodes.iter().chain(&self.circle_nodes).copied().collect()
    }
}

impl Default for KeyholeContour {
    fn default() -> Self {
        Self::new(KEYHOLE_EPSILON, 24).expect("default keyhole parameters are valid")
    }
}

/// `2/β` as an integer, which the contour form needs for `b ≥ 2` (the
/// pair factor must continue analytically off the circle).
fn integer_lambda(beta: f64, b: u32) -> Result<i32> {
    let lam = 2.0 / beta;
    if b >= 2 && (lam.fract() != 0.0 || lam < 1.0) {
        return Err(Error::Unsupported(format!("contour integrals with b >= 2 need 2/beta integral, got beta = {beta}")));
    }
    Ok(lam.round() as i32)
}

fn contour_value(s: f64, q: i32, b: u32, beta: f64, contour: &KeyholeContour) -> Result<Complex64> {
    let lam = integer_lambda(beta, b)?;
    let c = 2.0 / beta - 1.0;
    let nodes = contour.nodes();
    Ok(tensor_sum(
        &nodes,
        b as usize,
        |nd| nd.weight * (c * nd.ln_z + nd.z.inv() + 0.25 * s * nd.z).exp(),
        |zs| {
            let f: Complex64 = zs.iter().map(|nd| nd.z.powi(q)).sum();
            let mut v = Complex64::new(1.0, 0.0);
            for k in 1..zs.len() {
                for j in 0..k {
                    let (zk, zj) = (zs[k].z, zs[j].z);
                    v *= (-(zk - zj) * (zk - zj) / (zj * zk)).powi(lam);
                }
            }
            f * v
        },
    ))
}

/// `I_b(s)[f_q]` with `f_q = Σ_l z_l^q`. The value is checked against the
/// refined contour and must be real.
pub fn i_b_functional(s: f64, q: i32, b: u32, beta: f64, contour: &KeyholeContour) -> Result<f64> {
    if b == 0 || b > MAX_DIMENSION {
        return Err(Error::SizeGuard(format!("b must lie in 1..={MAX_DIMENSION}, got {b}")));
    }
    let v = contour_value(s, q, b, beta, contour)?;
    let fine = contour_value(s, q, b, beta, &contour.refined()?)?;
    let scale = fine.norm().max(1e-3);
    if (fine - v).norm() > CONTOUR_TOL * scale {
        return Err(Error::Quadrature(format!("keyhole rule unsettled: {v} vs {fine}")));
    }
    if fine.im.abs() > CONTOUR_TOL * scale {
        return Err(Error::ImaginaryResidue { residue: fine.im });
    }
    Ok(fine.re)
}

/// Absolute residuals of the three integration-by-parts relations between
/// `I_b[f_q]`, `q = -2..2`, with `d/ds I_b[f_0] = (b/4) I_b[f_1]`:
///
/// ```text
/// (s/16) I[f_2]  = -(2/β) I'[f_0] + (1/4) I[f_0]
/// I[f_{-2}]      = (s/4) I[f_0] + 2(2/β - 1 - b/β)((s/b) I'[f_0] + (2/β - 1) I[f_0])
/// I[f_{-1}]      = (2/β - 1) I[f_0] + (s/b) I'[f_0]
/// ```
pub fn prop_a1_residuals(s: f64, b: u32, beta: f64) -> Result<[f64; 3]> {
    if b == 0 || b > 2 {
        return Err(Error::SizeGuard(format!("b must be 1 or 2, got {b}")));
    }
    let contour = KeyholeContour::default();
    let i = |q| i_b_functional(s, q, b, beta, &contour);
    let (i0, i1, i2, im1, im2) = (i(0)?, i(1)?, i(2)?, i(-1)?, i(-2)?);
    let bf = b as f64;
    let c = 2.0 / beta - 1.0;
    let d0 = bf / 4.0 * i1;
    Ok([
        (s / 16.0 * i2 + 2.0 / beta * d0 - 0.25 * i0).abs(),
        (im2 - s / 4.0 * i0 - 2.0 * (c - bf / beta) * (s / bf * d0 + c * i0)).abs(),
        (im1 - c * i0 - s / bf * d0).abs(),
    ])
}

/// `(E^hard(s; b), d/ds E^hard(s; b))` with
/// `E^hard = e^{-βs/8} Γ(2/β)^b / b! · I_b(s)[1]`.
pub fn e_hard_with_derivative(s: f64, b: u32, beta: f64) -> Result<(f64, f64)> {
    let damp = (-beta * s / 8.0).exp();
    if b == 0 {
        return Ok((damp, -beta / 8.0 * damp));
    }
    if b > 2 {
        return Err(Error::SizeGuard(format!("b must be at most 2, got {b}")));
    }
    let contour = KeyholeContour::default();
    let bf = b as f64;
    let norm = bf * ln_gamma(2.0 / beta) - ln_gamma(bf + 1.0);
    let plain = i_b_functional(s, 0, b, beta, &contour)? / bf;
    let slope = 0.25 * i_b_functional(s, 1, b, beta, &contour)?;
    let scale = damp * norm.exp();
    Ok((scale * plain, scale * (slope - beta / 8.0 * plain)))
}

/// `E^hard(s; b)`.
pub fn e_hard(s: f64, b: u32, beta: f64) -> Result<f64> {
    Ok(e_hard_with_derivative(s, b, beta)?.0)
}

/// `E_N(0; (1 - s/4N², 1))` at one ladder point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub beta: f64,
    pub a: f64,
    pub b: u32,
    pub s: f64,
    pub n: usize,
    pub e_n: f64,
    pub e_hard: f64,
    /// `N (E_N - E^hard) / (s dE^hard/ds)`.
    pub coefficient: f64,
}

/// The `1/N` coefficient of `E_N(0; (1 - s/4N², 1))` about `E^hard`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub rows: Vec<GapRow>,
    /// Residual after subtracting the predicted `1/N` term.
    pub report: ConvergenceReport,
    /// Richardson extrapolation of the last two per-`N` coefficients.
    pub fitted_coefficient: f64,
    /// `2(1 + a + b)/β - 1`.
    pub target_coefficient: f64,
}

impl ExpansionCheck {
    /// Within 10% of the target, or within 0.1 when the target vanishes.
    pub fn passes(&self) -> bool {
        let gap = (self.fitted_coefficient - self.target_coefficient).abs();
        if self.target_coefficient == 0.0 {
            gap < 0.1
        } else {
            gap < 0.1 * self.target_coefficient.abs()
        }
    }
}

pub fn expansion_check_st0(beta: f64, a: f64, b: u32, s: f64, ladder: &[usize]) -> Result<ExpansionCheck> {
    if b > 1 {
        return Err(Error::SizeGuard(format!("the expansion check covers b in 0..=1, got {b}")));
    }
    if ladder.len() < 3 {
        return Err(Error::Domain("the expansion check needs at least 3 ladder points".into()));
    }
    let (eh, deh) = e_hard_with_derivative(s, b, beta)?;
    let target = 2.0 * (1.0 + a + b as f64) / beta - 1.0;
    let mut rows = Vec::with_capacity(ladder.len());
    let mut residuals = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let spec = JacobiBetaSpec::new(n, beta, a, b)?;
        let nf = n as f64;
        let e_n = e_gap_finite(&spec, 1.0 - s / (4.0 * nf * nf))?;
        let coefficient = nf * (e_n - eh) / (s * deh);
        rows.push(GapRow { beta, a, b, s, n, e_n, e_hard: eh, coefficient });
        residuals.push(vec![e_n - eh - target / nf * s * deh]);
    }
    let k = rows.len();
    let (c1, c2) = (rows[k - 2].coefficient, rows[k - 1].coefficient);
    let (n1, n2) = (ladder[k - 2] as f64, ladder[k - 1] as f64);
    // c_N = c + d/N: eliminate d between the last two points
    let fitted = (n2 * c2 - n1 * c1) / (n2 - n1);
    let report = ConvergenceReport::from_residuals(
        format!("gap expansion beta={beta} a={a} b={b}"),
        ladder.to_vec(),
        vec![(s, 0.0)],
        residuals,
    )?;
    Ok(ExpansionCheck { rows, report, fitted_coefficient: fitted, target_coefficient: target })
}

/// CSV with columns `beta, a, b, s, N, E_N, E_hard, fitted_coefficient,
/// target_coefficient`.
pub fn write_gap_csv<W: Write>(check: &ExpansionCheck, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Domain(format!("CSV output failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta", "a", "b", "s", "N", "E_N", "E_hard", "fitted_coefficient", "target_coefficient"])
        .map_err(io)?;
    for r in &check.rows {
        w.write_record([
            r.beta.to_string(),
            r.a.to_string(),
            r.b.to_string(),
            r.s.to_string(),
            r.n.to_string(),
            format!("{:e}", r.e_n),
            format!("{:e}", r.e_hard),
            check.fitted_coefficient.to_string(),
            check.target_coefficient.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Domain(format!("CSV output failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{gamma, hyp_0fm};

    #[test]
    fn morris_examples() {
        assert!((morris_integral(0.0, 0.0, 1.0, 1).unwrap() - 1.0).abs() < 1e-14);
        let (a, b) = (0.7, 1.3);
        let want = gamma(1.0 + a + b).unwrap() / (gamma(1.0 + a).unwrap() * gamma(1.0 + b).unwrap());
        assert!((morris_integral(a, b, 0.5, 1).unwrap() - want).abs() < 1e-13);
        // the torus integral at u = 0 is the normalisation itself
        let torus = torus_2f1(0, 2.0, 0.0, 1.0, 0.0, 2, 32).unwrap();
        assert!((torus - 1.0).abs() < 1e-6, "{torus}");
        assert!(morris_integral(-2.0, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn finite_gap_examples() {
        let spec = JacobiBetaSpec::new(1, 2.0, 0.0, 1).unwrap();
        assert!((e_gap_finite(&spec, 0.3).unwrap() - 0.51).abs() < 1e-14);
        assert!((e_gap_finite(&spec, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(e_gap_finite(&spec, 1e-8).unwrap() < 1e-7);
        assert!(e_gap_finite(&spec, 0.0).is_err());
        let uniform = JacobiBetaSpec::new(1, 2.0, 0.0, 0).unwrap();
        assert!((brute_force_e_gap(&uniform, 0.37).unwrap() - 0.37).abs() < 1e-12);
        assert!((brute_force_e_gap(&spec, 0.3).unwrap() - 0.51).abs() < 1e-12);
    }

    #[test]
    fn gauss_route_matches_brute_force() {
        for n in 1..=3 {
            for beta in [2.0, 4.0] {
                for a in [0.0, 1.0] {
                    let spec = JacobiBetaSpec::new(n, beta, a, 1).unwrap();
                    let mut last = 0.0;
                    for s in [0.2, 0.5, 0.8] {
                        let e = e_gap_finite(&spec, s).unwrap();
                        let bf = brute_force_e_gap(&spec, s).unwrap();
                        assert!((e - bf).abs() < 1e-6 * bf.max(1e-300) || (e - bf).abs() < 1e-12, "{spec:?} s={s}: {e} vs {bf}");
                        assert!(e > last);
                        last = e;
                    }
                }
            }
        }
    }

    #[test]
    fn torus_route_matches_brute_force() {
        for n in 1..=2 {
            for a in [0.0, 1.0] {
                let spec = JacobiBetaSpec::new(n, 2.0, a, 2).unwrap();
                for s in [0.2, 0.5, 0.8] {
                    let e = e_gap_finite(&spec, s).unwrap();
                    let bf = brute_force_e_gap(&spec, s).unwrap();
                    assert!((e - bf).abs() < 1e-5 * bf, "{spec:?} s={s}: {e} vs {bf}");
                }
            }
        }
    }

    #[test]
    fn hankel_oracle() {
        for beta in [2.0, 4.0, 1.0] {
            let v = i_b_functional(0.0, 0, 1, beta, &KeyholeContour::default()).unwrap();
            assert!((v - 1.0 / gamma(2.0 / beta).unwrap()).abs() < 1e-10, "beta={beta}: {v}");
        }
        let coarse = i_b_functional(2.0, 1, 1, 2.0, &KeyholeContour::new(KEYHOLE_EPSILON, 16).unwrap()).unwrap();
        let fine = i_b_functional(2.0, 1, 1, 2.0, &KeyholeContour::new(KEYHOLE_EPSILON, 32).unwrap()).unwrap();
        assert!((coarse - fine).abs() < 1e-8);
        assert!(KeyholeContour::new(0.1, 16).is_err());
    }

    #[test]
    fn derivative_relation() {
        let c = KeyholeContour::default();
        let h = 1e-3;
        let d = (i_b_functional(1.0 + h, 0, 1, 2.0, &c).unwrap() - i_b_functional(1.0 - h, 0, 1, 2.0, &c).unwrap()) / (2.0 * h);
        let want = 0.25 * i_b_functional(1.0, 1, 1, 2.0, &c).unwrap();
        assert!((d - want).abs() < 1e-6);
    }

    #[test]
    fn integration_by_parts_relations() {
        let r = prop_a1_residuals(1.0, 1, 2.0).unwrap();
        assert!(r[0] < 1e-7 && r[1] < 1e-7 && r[2] < 1e-7, "{r:?}");
        let r = prop_a1_residuals(2.0, 2, 2.0).unwrap();
        assert!(r.iter().all(|&x| x < 1e-6), "{r:?}");
        let r = prop_a1_residuals(1.5, 1, 4.0).unwrap();
        assert!(r.iter().all(|&x| x < 1e-7), "{r:?}");
    }

    #[test]
    fn hard_edge_values() {
        assert_eq!(e_hard(3.0, 0, 2.0).unwrap(), (-0.75f64).exp());
        for b in 1..=2 {
            assert!((e_hard(0.0, b, 2.0).unwrap() - 1.0).abs() < 1e-6);
        }
        assert!((e_hard(0.0, 1, 4.0).unwrap() - 1.0).abs() < 1e-6);
        // β = 2, b = 1: e^{-s/4} I_0(√s); hyp_0fm takes a and sums (-x)^j/(j! (a+1)_j)
        let s: f64 = 3.0;
        let want = (-s / 4.0).exp() * hyp_0fm(&[0.0], -s / 4.0).unwrap();
        assert!((e_hard(s, 1, 2.0).unwrap() - want).abs() < 1e-10, "{} vs {want}", e_hard(s, 1, 2.0).unwrap());
        let eh = e_hard(4.0, 1, 2.0).unwrap();
        let gaps: Vec<f64> = [10, 20, 40]
            .iter()
            .map(|&n| {
                let spec = JacobiBetaSpec::new(n, 2.0, 0.0, 1).unwrap();
                (e_gap_finite(&spec, 1.0 - 4.0 / (4.0 * (n * n) as f64)).unwrap() - eh).abs()
            })
            .collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
    }

    #[test]
    fn expansion_coefficients() {
        for (beta, a, b) in [(2.0, 0.0, 0), (2.0, 1.0, 0), (2.0, 0.0, 1), (4.0, 0.0, 1)] {
            let chk = expansion_check_st0(beta, a, b, 2.0, &[20, 40, 80, 160]).unwrap();
            assert!(chk.passes(), "{beta} {a} {b}: {} vs {}", chk.fitted_coefficient, chk.target_coefficient);
            assert!(chk.report.fitted_order > 1.9, "{}", chk.report.fitted_order);
        }
    }
}
