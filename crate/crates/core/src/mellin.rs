//! Mellin transforms as products of gamma factors, and their inversion.
//!
//! A transform `Φ(s)` is inverted as
//!
//! ```text
//! f(x) = (1/2πi) ∫_{c-i∞}^{c+i∞} Φ(s) x^{-s} ds
//! ```
//!
//! either by the trapezoid rule on the vertical line `Re s = c` (the
//! integrands decay like gamma functions, so the rule converges
//! geometrically) or by summing residues at the left poles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::specfun::dd::DoubleDouble;
use crate::specfun::{ln_gamma, ln_gamma_signed, log_gamma};
use crate::Precision;

/// Endpoint modulus allowed relative to the peak of a contour integrand.
pub const DECAY_TOL: f64 = 1e-16;
/// Initial trapezoid node count.
pub const INITIAL_NODES: usize = 801;
/// Agreement required between successive node doublings.
pub const NODE_AGREEMENT: f64 = 1e-11;
/// Minimum separation of simple poles for the residue path.
pub const POLE_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorLocation {
    Numerator,
    Denominator,
}

/// `Γ(slope·s + offset)` in the numerator or denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFactor {
    pub slope: f64,
    pub offset: f64,
    pub location: FactorLocation,
}

impl GammaFactor {
    pub fn numerator(slope: f64, offset: f64) -> Self {
        assert!(slope != 0.0, "gamma factor slope must be nonzero");
        Self { slope, offset, location: FactorLocation::Numerator }
    }

    pub fn denominator(slope: f64, offset: f64) -> Self {
        assert!(slope != 0.0, "gamma factor slope must be nonzero");
        Self { slope, offset, location: FactorLocation::Denominator }
    }

    fn sign(&self) -> f64 {
        match self.location {
            FactorLocation::Numerator => 1.0,
            FactorLocation::Denominator => -1.0,
        }
    }
}

/// `e^{ln_prefactor} · Π Γ(slope·s+offset)^{±1}`. The prefactor is kept as
/// a logarithm since normalisations like `1/Γ(N+b)` underflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MellinWeight {
    pub ln_prefactor: f64,
    pub factors: Vec<GammaFactor>,
}

impl MellinWeight {
    pub fn new(prefactor: f64, factors: Vec<GammaFactor>) -> Self {
        assert!(prefactor > 0.0, "prefactor must be positive");
        Self::from_ln_prefactor(prefactor.ln(), factors)
    }

    pub fn from_ln_prefactor(ln_prefactor: f64, factors: Vec<GammaFactor>) -> Self {
        assert!(ln_prefactor.is_finite(), "prefactor must be positive and finite");
        Self { ln_prefactor, factors }
    }

    /// Log of the transform at complex `s`.
    pub fn ln_eval(&self, s: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(self.ln_prefactor, 0.0);
        for (index, f) in self.factors.iter().enumerate() {
            let arg = s * f.slope + f.offset;
            match log_gamma(arg) {
                Ok(v) => acc += f.sign() * v,
                Err(_) => match f.location {
                    FactorLocation::Numerator => {
                        return Err(Error::FactorPole {
                            index,
                            slope: f.slope,
                            offset: f.offset,
                            s: format!("{s}"),
                        })
                    }
                    FactorLocation::Denominator => return Ok(Complex64::new(f64::NEG_INFINITY, 0.0)),
                },
            }
        }
        Ok(acc)
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.ln_eval(s)?.exp())
    }

    /// `ln |Φ(s)|` and sign for real `s`; a zero from a denominator pole is
    /// reported as `(-inf, 0)`.
    pub fn ln_eval_real(&self, s: f64) -> Result<(f64, f64)> {
        let mut ln = self.ln_prefactor;
        let mut sign = 1.0;
        for (index, f) in self.factors.iter().enumerate() {
            let arg = f.slope * s + f.offset;
            match ln_gamma_signed(arg) {
                Ok((l, sg)) => {
                    ln += f.sign() * l;
                    sign *= sg;
                }
                Err(_) => match f.location {
                    FactorLocation::Numerator => {
                        return Err(Error::FactorPole {
                            index,
                            slope: f.slope,
                            offset: f.offset,
                            s: format!("{s}"),
                        })
                    }
                    FactorLocation::Denominator => return Ok((f64::NEG_INFINITY, 0.0)),
                },
            }
        }
        Ok((ln, sign))
    }

    /// Whether every left pole `s = −(offset + k)/slope` sits at a multiple
    /// of `−1/2`, so that inverse transforms are smooth in `√x` near 0
    /// (up to logarithms from coincident poles).
    pub fn half_integer_exponents(&self) -> bool {
        let is_int = |v: f64| (v - v.round()).abs() < 1e-12;
        self.factors
            .iter()
            .filter(|f| f.location == FactorLocation::Numerator && f.slope > 0.0)
            .all(|f| is_int(2.0 / f.slope) && is_int(2.0 * f.offset / f.slope))
    }

    /// Open strip `(lo, hi)` free of numerator poles.
    pub fn strip(&self) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for f in self.factors.iter().filter(|f| f.location == FactorLocation::Numerator) {
            let edge = -f.offset / f.slope;
            if f.slope > 0.0 {
                lo = lo.max(edge);
            } else {
                hi = hi.min(edge);
            }
        }
        (lo, hi)
    }
}

/// `eval_mellin`: the transform at complex `s`.
pub fn eval_mellin(w: &MellinWeight, s: Complex64) -> Result<Complex64> {
    w.eval(s)
}

/// A Mellin–Barnes integrand `Φ(s) = W(s) · Π_{l=1}^{n}(1 - s/l) · (-s)^k`.
///
/// The falling product carries the `n`-dependence of `q_n`; the power
/// `(-s)^k` applies `(x d/dx)^k` to the inverse transform.
#[derive(Debug, Clone, PartialEq)]
pub struct MellinIntegrand {
    pub weight: MellinWeight,
    pub falling: usize,
    pub euler_power: u32,
}

impl MellinIntegrand {
    pub fn new(weight: MellinWeight) -> Self {
        Self { weight, falling: 0, euler_power: 0 }
    }

    pub fn with_falling(mut self, n: usize) -> Self {
        self.falling = n;
        self
    }

    pub fn with_euler_power(mut self, k: u32) -> Self {
        self.euler_power = k;
        self
    }

    /// `ln Φ(s)` on a contour; the falling product is accumulated factor by
    /// factor rather than through gamma ratios.
    pub fn ln_eval(&self, s: Complex64) -> Result<Complex64> {
        let mut acc = self.weight.ln_eval(s)?;
        for l in 1..=self.falling {
            acc += (1.0 - s / l as f64).ln();
        }
        if self.euler_power > 0 {
            acc += self.euler_power as f64 * (-s).ln();
        }
        Ok(acc)
    }

    /// `ln |Φ(s)|` and sign at real `s` left of every falling-product zero.
    fn ln_eval_real(&self, s: f64) -> Result<(f64, f64)> {
        let (mut ln, mut sign) = self.weight.ln_eval_real(s)?;
        if self.falling > 0 {
            if s >= 1.0 {
                // only reached for poles right of 1, which no supported family has
                let mut p = 1.0;
                for l in 1..=self.falling {
                    p *= 1.0 - s / l as f64;
                }
                if p == 0.0 {
                    return Ok((f64::NEG_INFINITY, 0.0));
                }
                ln += p.abs().ln();
                sign *= p.signum();
            } else {
                let n = self.falling as f64;
                ln += ln_gamma(n + 1.0 - s) - ln_gamma(n + 1.0) - ln_gamma(1.0 - s);
            }
        }
        if self.euler_power > 0 {
            let k = self.euler_power as i32;
            if s == 0.0 {
                return Ok((f64::NEG_INFINITY, 0.0));
            }
            ln += k as f64 * s.abs().ln();
            sign *= (-s).signum().powi(k);
        }
        Ok((ln, sign))
    }

    pub fn strip(&self) -> (f64, f64) {
        self.weight.strip()
    }

    /// Default abscissa: half a unit into the strip, or the strip midpoint
    /// when the strip is narrower than one unit.
    pub fn default_abscissa(&self) -> f64 {
        let (lo, hi) = self.strip();
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) if hi - lo < 1.0 => 0.5 * (lo + hi),
            (true, _) => lo + 0.5,
            (false, true) => hi - 0.5,
            (false, false) => 0.5,
        }
    }
}

/// Vertical contour `Re s = c`, `|Im s| <= T`, with an odd number of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub abscissa: f64,
    pub half_height: f64,
    pub node_count: usize,
}

impl ContourSpec {
    pub fn new(abscissa: f64, half_height: f64, node_count: usize) -> Result<Self> {
        if node_count < 3 || node_count % 2 == 0 {
            return Err(Error::Domain(format!("node_count must be odd and >= 3, got {node_count}")));
        }
        if half_height <= 0.0 {
            return Err(Error::Domain("half_height must be positive".into()));
        }
        Ok(Self { abscissa, half_height, node_count })
    }

    fn check_strip(&self, strip: (f64, f64)) -> Result<()> {
        if !(self.abscissa > strip.0 && self.abscissa < strip.1) {
            return Err(Error::Domain(format!(
                "abscissa {} outside the strip ({}, {})",
                self.abscissa, strip.0, strip.1
            )));
        }
        Ok(())
    }
}

/// Integrand values on a contour, reusable for many `x`.
#[derive(Debug, Clone)]
pub struct ContourTable {
    pub spec: ContourSpec,
    ln_phi: Vec<Complex64>,
    ts: Vec<f64>,
}

impl ContourTable {
    /// Tabulates `ln Φ` and checks the decay contract at the endpoints.
    pub fn new(integrand: &MellinIntegrand, spec: ContourSpec) -> Result<Self> {
        spec.check_strip(integrand.strip())?;
        let n = spec.node_count;
        let h = 2.0 * spec.half_height / (n - 1) as f64;
        let ts: Vec<f64> = (0..n).map(|k| -spec.half_height + h * k as f64).collect();
        let ln_phi = ts
            .iter()
            .map(|&t| integrand.ln_eval(Complex64::new(spec.abscissa, t)))
            .collect::<Result<Vec<_>>>()?;
        let peak = ln_phi.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
        let edge = ln_phi[0].re.max(ln_phi[n - 1].re);
        if edge > peak + DECAY_TOL.ln() {
            return Err(Error::ContourDecay(format!(
                "endpoint modulus e^{edge:.2} vs peak e^{peak:.2} at T = {}",
                spec.half_height
            )));
        }
        Ok(Self { spec, ln_phi, ts })
    }

    /// Adaptive table: `T` from the decay scan, nodes doubled from
    /// [`INITIAL_NODES`] until consecutive estimates at every probe point agree.
    pub fn auto(integrand: &MellinIntegrand, abscissa: Option<f64>, probes: &[f64]) -> Result<Self> {
        let c = abscissa.unwrap_or_else(|| integrand.default_abscissa());
        let half_height = decay_height(integrand, c)?;
        let mut nodes = INITIAL_NODES;
        let mut table = Self::new(integrand, ContourSpec::new(c, half_height, nodes)?)?;
        for _ in 0..7 {
            if probes.iter().all(|&x| table.refinement_gap(x) <= NODE_AGREEMENT) {
                return Ok(table);
            }
            nodes = 2 * nodes - 1;
            table = Self::new(integrand, ContourSpec::new(c, half_height, nodes)?)?;
        }
        Err(Error::Quadrature(format!("contour trapezoid unresolved at {nodes} nodes")))
    }

    /// Trapezoid sums at step `stride·h` over all nodes; returns
    /// (value, imaginary part, Σ|terms|).
    fn sums(&self, x: f64, stride: usize) -> (f64, f64, f64) {
        let lx = x.ln();
        let n = self.ts.len();
        let h = stride as f64 * 2.0 * self.spec.half_height / (n - 1) as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        let mut abs = 0.0;
        for k in (0..n).step_by(stride) {
            let s = Complex64::new(self.spec.abscissa, self.ts[k]);
            let v = (self.ln_phi[k] - s * lx).exp();
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            re += w * v.re;
            im += w * v.im;
            abs += w * v.norm();
        }
        let scale = h / (2.0 * PI);
        (re * scale, im * scale, abs * scale)
    }

    fn refinement_gap(&self, x: f64) -> f64 {
        let (fine, _, abs) = self.sums(x, 1);
        let (coarse, _, _) = self.sums(x, 2);
        (fine - coarse).abs() / abs.max(fine.abs()).max(1e-300)
    }

    /// Inverse transform at `x > 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(Error::Domain(format!("inverse Mellin needs x > 0, got {x}")));
        }
        let (re, im, abs) = self.sums(x, 1);
        if im.abs() > 1e-8 * abs.max(re.abs()) {
            return Err(Error::ImaginaryResidue { residue: im.abs() });
        }
        Ok(re)
    }
}

/// Smallest `T` (scanned in unit steps) past which `|Φ(c+it)|` stays below
/// `DECAY_TOL` times the peak seen so far.
fn decay_height(integrand: &MellinIntegrand, c: f64) -> Result<f64> {
    let mut peak = integrand.ln_eval(Complex64::new(c, 0.0))?.re;
    let mut t = 0.0;
    while t < 1e4 {
        t += 1.0;
        let v = integrand.ln_eval(Complex64::new(c, t))?.re;
        peak = peak.max(v);
        if t >= 4.0 && v < peak + DECAY_TOL.ln() {
            // the integrands are log-concave in t past their peak
            let next = integrand.ln_eval(Complex64::new(c, t + 1.0))?.re;
            if next < v {
                return Ok(t);
            }
        }
    }
    Err(Error::ContourDecay(format!("no decay to {DECAY_TOL:e} of the peak below T = 1e4")))
}

/// Inverse transform on a fixed contour.
pub fn inverse_mellin(integrand: &MellinIntegrand, x: f64, contour: &ContourSpec) -> Result<f64> {
    ContourTable::new(integrand, *contour)?.eval(x)
}

/// Inverse transform with the adaptive contour defaults.
pub fn inverse_mellin_auto(integrand: &MellinIntegrand, x: f64) -> Result<f64> {
    ContourTable::auto(integrand, None, &[x])?.eval(x)
}

/// Which poles a residue expansion collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleSide {
    /// Poles left of the contour; the expansion converges toward `x → 0`.
    Left,
    /// Poles right of the contour; the expansion converges toward `x → ∞`.
    Right,
}

/// Residue expansion of an integrand, with coefficients precomputed for the
/// truncation needed at the reference point `x_ref`. A left expansion is
/// valid on `(0, x_ref]`, a right expansion on `[x_ref, ∞)`; truncation only
/// improves away from `x_ref`.
#[derive(Debug, Clone)]
pub struct ResidueExpansion {
    /// `(ln |coef|, sign, exponent)`: the term is `sign · e^{ln|coef|} · x^{exponent}`.
    terms: Vec<(f64, f64, f64)>,
    pub x_ref: f64,
    pub side: PoleSide,
}

impl ResidueExpansion {
    /// Left-pole expansion valid on `(0, x_max]`.
    pub fn new(integrand: &MellinIntegrand, x_max: f64) -> Result<Self> {
        Self::with_side(integrand, x_max, PoleSide::Left)
    }

    pub fn with_side(integrand: &MellinIntegrand, x_ref: f64, side: PoleSide) -> Result<Self> {
        if x_ref <= 0.0 || !x_ref.is_finite() {
            return Err(Error::Domain(format!("reference point must be positive and finite, got {x_ref}")));
        }
        let family: Vec<(usize, GammaFactor)> = integrand
            .weight
            .factors
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, f)| {
                f.location == FactorLocation::Numerator
                    && match side {
                        PoleSide::Left => f.slope > 0.0,
                        PoleSide::Right => f.slope < 0.0,
                    }
            })
            .collect();
        if family.is_empty() {
            return Err(Error::Unsupported("no poles on the requested side".into()));
        }
        // pole m of Γ(αs+β) sits at s = -(β+m)/α on either side
        let pole = |f: &GammaFactor, m: f64| -(f.offset + m) / f.slope;

        let mut poles: Vec<f64> = Vec::new();
        for (_, f) in &family {
            for m in 0..64 {
                poles.push(pole(f, m as f64));
            }
        }
        poles.sort_by(|a, b| a.partial_cmp(b).expect("finite poles"));
        if let Some(w) = poles.windows(2).find(|w| (w[1] - w[0]).abs() < POLE_SEPARATION) {
            return Err(Error::CoincidentPoles(w[0]));
        }

        let lx = x_ref.ln();
        let mut terms = Vec::new();
        for (index, f) in &family {
            let mut others = integrand.clone();
            others.weight.factors.remove(*index);
            let mut best = f64::NEG_INFINITY;
            let mut prev = f64::INFINITY;
            let mut m = 0usize;
            loop {
                if m >= crate::specfun::SERIES_CAP {
                    return Err(Error::NonConvergence { what: "residue series", terms: m });
                }
                let mf = m as f64;
                let s = pole(f, mf);
                // Res Γ(αs+β) = (-1)^m/(m! α); closing to the right flips the
                // orientation, so both sides carry (-1)^m/(m! |α|)
                let ln_res = -ln_gamma(mf + 1.0) - f.slope.abs().ln();
                let sign_res = if m % 2 == 0 { 1.0 } else { -1.0 };
                let (ln_rest, sign_rest) = match others.ln_eval_real(s) {
                    Ok(v) => v,
                    Err(Error::FactorPole { .. }) => return Err(Error::CoincidentPoles(s)),
                    Err(e) => return Err(e),
                };
                let ln_c = ln_res + ln_rest;
                let exponent = -s;
                terms.push((ln_c, sign_res * sign_rest, exponent));
                let at_ref = ln_c + exponent * lx;
                if at_ref.is_finite() {
                    best = best.max(at_ref);
                }
                // stop once terms are 1e-18 below the largest and shrinking
                if m >= 4 && (at_ref < best - 41.5 || at_ref == f64::NEG_INFINITY) && at_ref <= prev {
                    break;
                }
                if at_ref.is_finite() {
                    prev = at_ref;
                }
                m += 1;
            }
        }
        Ok(Self { terms, x_ref, side })
    }

    pub fn covers(&self, x: f64) -> bool {
        match self.side {
            PoleSide::Left => x <= self.x_ref * (1.0 + 1e-12),
            PoleSide::Right => x >= self.x_ref * (1.0 - 1e-12),
        }
    }

    /// Sum at `x`, with the largest term magnitude (a cancellation gauge).
    pub fn eval_with(&self, x: f64, precision: Precision) -> Result<(f64, f64)> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::Domain(format!("residue series needs x >= 0, got {x}")));
        }
        if !self.covers(x) {
            return Err(Error::Domain(format!("x = {x} outside the expansion range (reference {})", self.x_ref)));
        }
        let lx = x.ln();
        let mut dd = DoubleDouble::ZERO;
        let mut sum = 0.0;
        let mut max_term: f64 = 0.0;
        for &(ln_c, sign, e) in &self.terms {
            if sign == 0.0 {
                continue;
            }
            let v = if x == 0.0 {
                match e.partial_cmp(&0.0) {
                    Some(std::cmp::Ordering::Greater) => 0.0,
                    Some(std::cmp::Ordering::Equal) => sign * ln_c.exp(),
                    _ => return Err(Error::Domain("inverse transform is singular at x = 0".into())),
                }
            } else {
                sign * (ln_c + e * lx).exp()
            };
            max_term = max_term.max(v.abs());
            match precision {
                Precision::Double => sum += v,
                Precision::Extended => dd += DoubleDouble::new(v),
            }
        }
        let total = match precision {
            Precision::Double => sum,
            Precision::Extended => dd.to_f64(),
        };
        Ok((total, max_term))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.eval_with(x, Precision::Double)?.0)
    }

    /// Whether the expansion is well conditioned near `x_ref`: the largest
    /// term stays within [`CANCELLATION_LIMIT`] of the function scale.
    fn well_conditioned(&self, precision: Precision) -> bool {
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            let step = f64::powi(2.0, k);
            let x = match self.side {
                PoleSide::Left => self.x_ref / step,
                PoleSide::Right => self.x_ref * step,
            };
            match self.eval_with(x, precision) {
                Ok((v, m)) => {
                    scale = scale.max(v.abs());
                    worst = worst.max(m);
                }
                Err(_) => return false,
            }
        }
        worst <= CANCELLATION_LIMIT * scale
    }
}

/// Sum of residues at the left poles, for generic (pairwise separated) poles.
pub fn residue_series(integrand: &MellinIntegrand, x: f64) -> Result<f64> {
    ResidueExpansion::new(integrand, x)?.eval(x)
}

/// Whether the residue path applies to this integrand.
pub fn has_simple_left_poles(integrand: &MellinIntegrand) -> bool {
    !matches!(ResidueExpansion::new(integrand, 1.0), Err(Error::CoincidentPoles(_)))
}

/// Largest residue-term magnitude tolerated relative to the function scale
/// before the contour path is preferred.
pub const CANCELLATION_LIMIT: f64 = 1e6;

/// Point beyond which a right-pole expansion is tried.
const RIGHT_EXPANSION_START: f64 = 4.0;
/// Point beyond which contour tables move their abscissa to the saddle.
const SADDLE_START: f64 = 4.0;

/// Abscissa minimising `ln W(c) − c ln x` over the strip: the real saddle of
/// the weight part, where the contour integrand has the least cancellation.
pub fn saddle_abscissa(weight: &MellinWeight, x: f64) -> f64 {
    let (lo, hi) = weight.strip();
    let a = if lo.is_finite() { lo + 0.25 } else { -50.0 };
    let b = if hi.is_finite() { hi - 0.25 } else { a + 4.0 * x + 50.0 };
    if b <= a {
        return 0.5 * (lo + hi);
    }
    let lx = x.ln();
    let phi = |c: f64| weight.ln_eval_real(c).map(|v| v.0 - c * lx).unwrap_or(f64::INFINITY);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c1 = b - g * (b - a);
    let mut c2 = a + g * (b - a);
    let (mut f1, mut f2) = (phi(c1), phi(c2));
    for _ in 0..80 {
        if f1 < f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - g * (b - a);
            f1 = phi(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + g * (b - a);
            f2 = phi(c2);
        }
    }
    0.5 * (a + b)
}

/// Inverse transform on `(0, x_max]` (`x_max` may be infinite), choosing per
/// point between the left residue series, the right residue series and the
/// vertical contour. Residue series are used only where well conditioned.
/// Contour evaluations use one table per dyadic band of `x`, with the
/// abscissa at the band's saddle, so that neither tiny nor large `x` suffers
/// from aliasing or cancellation.
#[derive(Debug, Clone)]
pub struct MellinInverse {
    pub integrand: MellinIntegrand,
    pub x_max: f64,
    pub precision: Precision,
    left: Option<ResidueExpansion>,
    right: Option<ResidueExpansion>,
    bands: Arc<Mutex<HashMap<i32, Arc<ContourTable>>>>,
}

impl MellinInverse {
    pub fn new(integrand: MellinIntegrand, x_max: f64, precision: Precision) -> Result<Self> {
        if !(x_max > 0.0) {
            return Err(Error::Domain(format!("x_max must be positive, got {x_max}")));
        }
        let mut candidates = Vec::new();
        if x_max.is_finite() {
            candidates.push(x_max);
        }
        candidates.extend([16.0, 4.0, 1.0, 0.25].into_iter().filter(|&c| c < x_max));
        let mut left = None;
        for x_ref in candidates {
            match ResidueExpansion::new(&integrand, x_ref) {
                Ok(e) if e.well_conditioned(precision) => {
                    left = Some(e);
                    break;
                }
                Ok(_) => continue,
                Err(_) => break,
            }
        }
        let covered = left.as_ref().is_some_and(|e| e.covers(x_max));
        let right = if !covered && x_max > RIGHT_EXPANSION_START {
            ResidueExpansion::with_side(&integrand, RIGHT_EXPANSION_START, PoleSide::Right)
                .ok()
                .filter(|e| e.well_conditioned(precision))
        } else {
            None
        };
        Ok(Self { integrand, x_max, precision, left, right, bands: Default::default() })
    }

    /// Contour path everywhere, no residue series.
    pub fn contour(integrand: MellinIntegrand, x_max: f64, precision: Precision) -> Result<Self> {
        Ok(Self { integrand, x_max, precision, left: None, right: None, bands: Default::default() })
    }

    pub fn uses_residues(&self) -> bool {
        self.left.as_ref().is_some_and(|e| e.covers(self.x_max))
    }

    fn band_table(&self, x: f64) -> Result<Arc<ContourTable>> {
        let band = x.log2().floor() as i32;
        if let Some(t) = self.bands.lock().expect("band cache poisoned").get(&band) {
            return Ok(Arc::clone(t));
        }
        let lo = f64::powi(2.0, band);
        let centre = lo * std::f64::consts::SQRT_2;
        let (slo, shi) = self.integrand.strip();
        let base = self.integrand.default_abscissa();
        let c = if x > SADDLE_START {
            // nudged off the integers so no node sits on a zero of the falling product
            let c = saddle_abscissa(&self.integrand.weight, centre).max(base) + 0.123_456_789;
            if c >= shi - 0.1 { 0.5 * (base + shi) } else { c }
        } else if centre < 0.5 && slo.is_finite() {
            // close to the leading pole, so x^{-c} does not amplify rounding
            slo + (2.0 / centre.ln().abs()).clamp(0.1_f64.min(base - slo), base - slo)
        } else {
            base
        };
        let table = Arc::new(ContourTable::auto(&self.integrand, Some(c), &[lo, centre, 2.0 * lo])?);
        self.bands.lock().expect("band cache poisoned").insert(band, Arc::clone(&table));
        Ok(table)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if x > self.x_max * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("x = {x} beyond x_max = {}", self.x_max)));
        }
        if let Some(e) = self.left.as_ref().filter(|e| e.covers(x)) {
            return Ok(e.eval_with(x, self.precision)?.0);
        }
        if let Some(e) = self.right.as_ref().filter(|e| e.covers(x)) {
            return Ok(e.eval_with(x, self.precision)?.0);
        }
        if x <= 0.0 {
            return Err(Error::Domain(format!("contour inversion needs x > 0, got {x}")));
        }
        self.band_table(x)?.eval(x)
    }

    /// Evaluates at `x` by the path [`MellinInverse::eval`] takes at
    /// `anchor`, so that a finite-difference stencil around `anchor` sees one
    /// smooth function rather than a seam between bands.
    pub fn eval_anchored(&self, x: f64, anchor: f64) -> Result<f64> {
        if x > self.x_max * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("x = {x} beyond x_max = {}", self.x_max)));
        }
        for e in [&self.left, &self.right].into_iter().flatten() {
            if e.covers(anchor) && e.covers(x) {
                return Ok(e.eval_with(x, self.precision)?.0);
            }
        }
        if x <= 0.0 || anchor <= 0.0 {
            return Err(Error::Domain(format!("contour inversion needs x > 0, got {x}")));
        }
        self.band_table(anchor)?.eval(x)
    }
}
