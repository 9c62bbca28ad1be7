//! Finite-`N` kernels at hard-edge scale and `N`-ladder experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::ConvergenceReport;
use super::limit::{bessel_kernel, HardEdgeModel};
use crate::ensembles::{EnsembleSpec, Family, JacobiMap};
use crate::error::{Error, Result};
use crate::mellin::MellinInverse;
use crate::polya::BiorthogonalEvaluator;
use crate::specfun::dd::DoubleDouble;
use crate::specfun::{bessel_j, hyp_1fm, ln_gamma};
use crate::Precision;

/// Ladder sizes from which the evaluator switches to extended accumulation.
pub const EXTENDED_FROM_N: usize = 200;
/// Default `N`-ladder.
pub const DEFAULT_LADDER: [usize; 4] = [25, 50, 100, 200];
/// Midpoint 5×5 grid axis on `[0, 6]` (products, Muttalib–Borodin, inverse products).
pub const PRODUCT_AXIS: [f64; 5] = [0.6, 1.8, 3.0, 4.2, 5.4];
/// Midpoint 5×5 grid axis on `[0, 8]` (Bessel variables).
pub const BESSEL_AXIS: [f64; 5] = [0.8, 2.4, 4.0, 5.6, 7.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// The family's own `N`.
    #[default]
    Plain,
    /// `N` replaced by `N + a/2` (Laguerre) or `N + (a+b)/2` (inverse, Jacobi).
    Optimal,
}

/// Variables in which the scaled kernel is compared with its limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// The family's hard-edge scale, unsymmetrised kernel, limit `∫ F G`.
    Natural,
    /// `X/(4N)` (Laguerre) or `X/(4N²)` (inverse, Jacobi), symmetrised
    /// kernel, limit `K^hard`. `M = 1` only.
    Bessel,
}

fn single(spec: &EnsembleSpec) -> Result<(f64, f64)> {
    if spec.m() != 1 || spec.family == Family::MuttalibBorodinLaguerre {
        return Err(Error::Unsupported(format!("{:?} with M = {} has no Bessel-frame form", spec.family, spec.m())));
    }
    Ok((spec.a[0], spec.b.first().copied().unwrap_or(0.0)))
}

/// `N` itself, or the shifted size of the optimal scaling.
pub fn effective_n(spec: &EnsembleSpec, scaling: Scaling) -> Result<f64> {
    let n = spec.n as f64;
    match scaling {
        Scaling::Plain => Ok(n),
        Scaling::Optimal => {
            let (a, b) = single(spec)?;
            Ok(match spec.family {
                Family::LaguerreProduct => n + a / 2.0,
                _ => n + (a + b) / 2.0,
            })
        }
    }
}

/// The factor `s` in `s K_N(s x, s y)`.
pub fn frame_scale(spec: &EnsembleSpec, frame: Frame, scaling: Scaling) -> Result<f64> {
    let n = effective_n(spec, scaling)?;
    match frame {
        Frame::Natural => Ok(spec.hard_edge_scale().factor(n)),
        Frame::Bessel => {
            single(spec)?;
            Ok(match spec.family {
                Family::LaguerreProduct => 1.0 / (4.0 * n),
                _ => 1.0 / (4.0 * n * n),
            })
        }
    }
}

/// `1/N` coefficient `c` of `c J_a(√X) J_a(√Y)` in the Bessel frame:
/// `a/8` for the Laguerre ensemble, `(a+b)/4` with an inverse factor.
pub fn bessel_correction_coefficient(spec: &EnsembleSpec) -> Result<f64> {
    let (a, b) = single(spec)?;
    Ok(match spec.family {
        Family::LaguerreProduct => a / 8.0,
        _ => (a + b) / 4.0,
    })
}

/// The kernel `K_N` of one ensemble with a `q̂_N` evaluator covering the
/// arguments of interest.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    pub spec: EnsembleSpec,
    ev: BiorthogonalEvaluator,
    q: MellinInverse,
}

impl FiniteKernel {
    /// `reach` bounds the second kernel argument in the family's own variable.
    pub fn new(spec: &EnsembleSpec, reach: f64) -> Result<Self> {
        Self::with_precision(spec, reach, Precision::Double)
    }

    /// As [`FiniteKernel::new`]; `Extended` forces extended accumulation
    /// below [`EXTENDED_FROM_N`] too.
    pub fn with_precision(spec: &EnsembleSpec, reach: f64, floor: Precision) -> Result<Self> {
        let precision = if spec.n >= EXTENDED_FROM_N { Precision::Extended } else { floor };
        let ev = BiorthogonalEvaluator::new(spec.build()?.with_precision(precision))?;
        let x_reach = match spec.family {
            Family::JacobiUnitary => {
                if !(reach < 1.0) {
                    return Err(Error::Domain(format!("Jacobi reach {reach} must be below 1")));
                }
                JacobiMap.to_x(reach)
            }
            _ => reach,
        };
        let q = ev.kernel_q(x_reach)?;
        Ok(Self { spec: spec.clone(), ev, q })
    }

    pub fn evaluator(&self) -> &BiorthogonalEvaluator {
        &self.ev
    }

    /// `K_N(x, y)` in the family's own variable (`(0, 1)` for Jacobi).
    pub fn raw(&self, x: f64, y: f64) -> Result<f64> {
        match self.spec.family {
            Family::JacobiUnitary => JacobiMap.kernel(x, y, |u, v| self.ev.kernel_integral_with(&self.q, u, v)),
            _ => self.ev.kernel_integral_with(&self.q, x, y),
        }
    }

    /// The symmetric kernel `K_N(x, y) √(ω(x)/ω(y))` of the same point
    /// process, where `K_N(x, y) = ω(y) S(x, y)` with `S` symmetric.
    pub fn symmetric(&self, x: f64, y: f64) -> Result<f64> {
        let (a, b) = single(&self.spec)?;
        let nf = self.spec.n as f64;
        if x <= 0.0 || y <= 0.0 {
            return Err(Error::Domain("the symmetrised kernel needs x, y > 0".into()));
        }
        let inverse_sym = |u: f64, v: f64| -> Result<f64> {
            let k = self.ev.kernel_integral_with(&self.q, u, v)?;
            let ln = 0.5 * a * (u / v).ln() + 0.5 * (a + b + 2.0 * nf) * ((1.0 + v) / (1.0 + u)).ln();
            Ok(k * ln.exp())
        };
        match self.spec.family {
            Family::LaguerreProduct => {
                let k = self.raw(x, y)?;
                Ok(k * (0.5 * a * (x / y).ln() - 0.5 * (x - y)).exp())
            }
            Family::LaguerreInverseProduct => inverse_sym(x, y),
            Family::JacobiUnitary => {
                let map = JacobiMap;
                let k = inverse_sym(map.to_x(x), map.to_x(y))?;
                Ok(k * (map.jacobian(x) * map.jacobian(y)).sqrt())
            }
            Family::MuttalibBorodinLaguerre => unreachable!("rejected by single()"),
        }
    }

    /// `s K_N(s x, s y)` in the requested frame and scaling.
    pub fn scaled(&self, x: f64, y: f64, frame: Frame, scaling: Scaling) -> Result<f64> {
        let s = frame_scale(&self.spec, frame, scaling)?;
        match frame {
            Frame::Natural => Ok(s * self.raw(s * x, s * y)?),
            Frame::Bessel => Ok(s * self.symmetric(s * x, s * y)?),
        }
    }
}

/// `scaled_kernel(ev, x, y, scaling)`: one-off evaluation in the natural frame.
pub fn scaled_kernel(spec: &EnsembleSpec, x: f64, y: f64, frame: Frame, scaling: Scaling) -> Result<f64> {
    let s = frame_scale(spec, frame, scaling)?;
    FiniteKernel::new(spec, 1.01 * s * x.max(y))?.scaled(x, y, frame, scaling)
}

/// Limit and predicted `1/N` correction of one family in one frame.
#[derive(Debug, Clone)]
pub struct FrameLimit {
    frame: Frame,
    spec: EnsembleSpec,
    model: Option<HardEdgeModel>,
}

impl FrameLimit {
    pub fn new(spec: &EnsembleSpec, frame: Frame, reach: f64) -> Result<Self> {
        let model = match frame {
            Frame::Natural => Some(HardEdgeModel::new(spec, 1.01 * reach.max(1.0))?),
            Frame::Bessel => {
                single(spec)?;
                None
            }
        };
        Ok(Self { frame, spec: spec.clone(), model })
    }

    pub fn limit(&self, x: f64, y: f64) -> Result<f64> {
        match (&self.model, self.spec.family) {
            (Some(m), Family::JacobiUnitary) => Ok(0.25 * m.limit_kernel(x / 4.0, y / 4.0)?),
            (Some(m), _) => m.limit_kernel(x, y),
            (None, _) => bessel_kernel(x, y, self.spec.a[0]),
        }
    }

    pub fn correction(&self, x: f64, y: f64) -> Result<f64> {
        match (&self.model, self.spec.family) {
            (Some(m), Family::JacobiUnitary) => Ok(0.25 * m.correction(x / 4.0, y / 4.0)?),
            (Some(m), _) => m.correction(x, y),
            (None, _) => {
                let a = self.spec.a[0];
                Ok(bessel_correction_coefficient(&self.spec)? * bessel_j(a, x.sqrt())? * bessel_j(a, y.sqrt())?)
            }
        }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }
}

/// One convergence experiment: residual of the scaled kernel against its
/// limit, optionally after subtracting the predicted `1/N` term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelExperiment {
    pub spec: EnsembleSpec,
    pub ladder: Vec<usize>,
    pub axis: Vec<f64>,
    pub frame: Frame,
    pub scaling: Scaling,
    pub subtract: bool,
    #[serde(default)]
    pub precision: Precision,
}

impl KernelExperiment {
    pub fn new(spec: EnsembleSpec, frame: Frame, scaling: Scaling, subtract: bool) -> Self {
        let axis = match frame {
            Frame::Natural if spec.family != Family::JacobiUnitary => PRODUCT_AXIS.to_vec(),
            _ => BESSEL_AXIS.to_vec(),
        };
        Self { spec, ladder: DEFAULT_LADDER.to_vec(), axis, frame, scaling, subtract, precision: Precision::Double }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_ladder(mut self, ladder: &[usize]) -> Self {
        self.ladder = ladder.to_vec();
        self
    }

    pub fn with_axis(mut self, axis: &[f64]) -> Self {
        self.axis = axis.to_vec();
        self
    }

    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.axis.iter().flat_map(|&x| self.axis.iter().map(move |&y| (x, y))).collect()
    }

    pub fn label(&self) -> String {
        format!(
            "{:?} a={:?} b={:?} theta={:?} {:?}/{:?}{}",
            self.spec.family,
            self.spec.a,
            self.spec.b,
            self.spec.theta,
            self.frame,
            self.scaling,
            if self.subtract { " minus 1/N term" } else { "" }
        )
    }

    /// Signed residuals, one row per ladder point.
    pub fn residuals(&self) -> Result<Vec<Vec<f64>>> {
        let grid = self.grid();
        let top = self.axis.iter().cloned().fold(0.0, f64::max);
        let limit = FrameLimit::new(&self.spec, self.frame, top)?;
        let reference: Vec<(f64, f64)> = grid
            .par_iter()
            .map(|&(x, y)| {
                let c = if self.subtract { limit.correction(x, y)? } else { 0.0 };
                Ok((limit.limit(x, y)?, c))
            })
            .collect::<Result<_>>()?;
        self.ladder
            .iter()
            .map(|&n| {
                let spec = self.spec.with_n(n);
                let s = frame_scale(&spec, self.frame, self.scaling)?;
                let kernel = FiniteKernel::with_precision(&spec, 1.01 * s * top, self.precision)?;
                grid.par_iter()
                    .zip(&reference)
                    .map(|(&(x, y), &(l, c))| Ok(kernel.scaled(x, y, self.frame, self.scaling)? - l - c / n as f64))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect()
    }

    pub fn run(&self) -> Result<ConvergenceReport> {
        ConvergenceReport::from_residuals(self.label(), self.ladder.clone(), self.grid(), self.residuals()?)
    }
}

/// Comparison of a fitted `1/N` coefficient with candidate normalisations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderComparison {
    pub fitted: f64,
    pub candidates: Vec<(String, f64)>,
    /// Name of the closest candidate.
    pub matched: String,
    pub relative_gap: f64,
}

/// Fits `c` in `residual ≈ c J_a(√X) J_a(√Y) / N` (Bessel frame, plain
/// scaling, nothing subtracted) by projecting `N · residual` on
/// `J_a J_a` at the two largest ladder points and extrapolating the `O(1/N)`
/// drift away.
pub fn first_order_coefficient(
    experiment: &KernelExperiment,
    candidates: &[(&str, f64)],
) -> Result<(FirstOrderComparison, ConvergenceReport)> {
    if experiment.frame != Frame::Bessel || experiment.scaling != Scaling::Plain || experiment.subtract {
        return Err(Error::Unsupported("the first-order fit uses the plain Bessel frame without subtraction".into()));
    }
    let k = experiment.ladder.len();
    if k < 3 || experiment.ladder[k - 1] != 2 * experiment.ladder[k - 2] {
        return Err(Error::Domain("the first-order fit needs a doubling ladder of at least 3 points".into()));
    }
    let report = experiment.run()?;
    let a = experiment.spec.a[0];
    let shape: Vec<f64> = report
        .grid
        .iter()
        .map(|&(x, y)| Ok(bessel_j(a, x.sqrt())? * bessel_j(a, y.sqrt())?))
        .collect::<Result<_>>()?;
    let norm: f64 = shape.iter().map(|g| g * g).sum();
    let project = |row: &[f64], n: usize| row.iter().zip(&shape).map(|(r, g)| n as f64 * r * g).sum::<f64>() / norm;
    let c_big = project(&report.residuals[k - 1], report.n_ladder[k - 1]);
    let c_small = project(&report.residuals[k - 2], report.n_ladder[k - 2]);
    let fitted = 2.0 * c_big - c_small;
    let (name, value) = candidates
        .iter()
        .min_by(|p, q| (p.1 - fitted).abs().total_cmp(&(q.1 - fitted).abs()))
        .ok_or_else(|| Error::Domain("no candidates given".into()))?;
    let cmp = FirstOrderComparison {
        fitted,
        candidates: candidates.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        matched: name.to_string(),
        relative_gap: (fitted - value).abs() / value.abs().max(f64::MIN_POSITIVE),
    };
    Ok((cmp, report))
}

/// `sup_x |₁F_M(−N+1; a+1; x/N) − (1 − (xD + (xD)²)/(2N)) ₀F_M(−x)|` over
/// `xs`, with `xD` applied term by term.
pub fn polynomial_expansion_residual(params: &[f64], n: usize, xs: &[f64]) -> Result<f64> {
    let nf = n as f64;
    let mut sup = 0.0_f64;
    for &x in xs {
        let lhs = hyp_1fm(n - 1, params, x / nf)?;
        let mut acc = DoubleDouble::ZERO;
        let mut peak = f64::NEG_INFINITY;
        let mut converged = x == 0.0;
        for j in 0..400usize {
            let jf = j as f64;
            let ln_c = -ln_gamma(jf + 1.0) - params.iter().map(|a| ln_gamma(a + 1.0 + jf) - ln_gamma(a + 1.0)).sum::<f64>();
            let ln_term = if x == 0.0 { if j == 0 { 0.0 } else { break } } else { ln_c + jf * x.ln() };
            peak = peak.max(ln_term);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += DoubleDouble::new(sign * (1.0 - (jf + jf * jf) / (2.0 * nf)) * ln_term.exp());
            if jf > x && ln_term < peak - 45.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence { what: "0F_M expansion", terms: 400 });
        }
        sup = sup.max((lhs - acc.to_f64()).abs());
    }
    Ok(sup)
}

/// Difference of the 2×2 correlation determinants at `(x1, x2)` built from
/// the `M = 1` product kernel `limit + C/N` and from the same kernel with the
/// antisymmetric derivative part of `C` removed, i.e. `limit + (a/2N) F G`.
pub fn determinant_cancellation(model: &HardEdgeModel, n: usize, x1: f64, x2: f64) -> Result<f64> {
    if model.family != Family::LaguerreProduct || model.a.len() != 1 {
        return Err(Error::Unsupported("determinant cancellation is stated for M = 1 products".into()));
    }
    let a = model.a[0];
    let nf = n as f64;
    let pts = [x1, x2];
    let mut full = [[0.0; 2]; 2];
    let mut reduced = [[0.0; 2]; 2];
    for (i, &x) in pts.iter().enumerate() {
        for (j, &y) in pts.iter().enumerate() {
            let l = model.limit_kernel(x, y)?;
            full[i][j] = l + model.correction(x, y)? / nf;
            reduced[i][j] = l + 0.5 * a * model.f(x)? * model.g(y)? / nf;
        }
    }
    let det = |m: [[f64; 2]; 2]| m[0][0] * m[1][1] - m[0][1] * m[1][0];
    Ok((det(full) - det(reduced)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardedge::convergence_fit;

    #[test]
    fn scales() {
        let lue = EnsembleSpec::laguerre_product(&[2.0], 10);
        assert_eq!(frame_scale(&lue, Frame::Bessel, Scaling::Optimal).unwrap(), 1.0 / 44.0);
        assert_eq!(frame_scale(&lue, Frame::Natural, Scaling::Plain).unwrap(), 0.1);
        let jac = EnsembleSpec::jacobi_unitary(1.0, 1.0, 10);
        assert_eq!(frame_scale(&jac, Frame::Natural, Scaling::Optimal).unwrap(), 1.0 / 484.0);
        let prod = EnsembleSpec::laguerre_product(&[0.0, 0.5], 10);
        assert!(matches!(frame_scale(&prod, Frame::Bessel, Scaling::Plain), Err(Error::Unsupported(_))));
        assert!(matches!(effective_n(&prod, Scaling::Optimal), Err(Error::Unsupported(_))));
    }

    #[test]
    fn symmetric_kernel_is_symmetric() {
        for spec in [
            EnsembleSpec::laguerre_product(&[1.0], 6),
            EnsembleSpec::laguerre_inverse_product(&[1.0], &[1.0], 6),
        ] {
            let k = FiniteKernel::new(&spec, 3.0).unwrap();
            let (s1, s2) = (k.symmetric(0.4, 2.5).unwrap(), k.symmetric(2.5, 0.4).unwrap());
            assert!((s1 - s2).abs() < 1e-9 * s1.abs().max(1e-3), "{s1} {s2}");
        }
        let k = FiniteKernel::new(&EnsembleSpec::jacobi_unitary(1.0, 2.0, 5), 0.8).unwrap();
        let (s1, s2) = (k.symmetric(0.2, 0.7).unwrap(), k.symmetric(0.7, 0.2).unwrap());
        assert!((s1 - s2).abs() < 1e-9, "{s1} {s2}");
    }

    #[test]
    fn lue_a0_close_to_bessel() {
        let spec = EnsembleSpec::laguerre_product(&[0.0], 100);
        let v = scaled_kernel(&spec, 1.0, 1.0, Frame::Bessel, Scaling::Plain).unwrap();
        assert!((v - bessel_kernel(1.0, 1.0, 0.0).unwrap()).abs() < 5e-5);
    }

    #[test]
    fn lue_optimal_scaling_ratio() {
        let r = |n| {
            let spec = EnsembleSpec::laguerre_product(&[2.0], n);
            scaled_kernel(&spec, 2.0, 3.0, Frame::Bessel, Scaling::Optimal).unwrap() - bessel_kernel(2.0, 3.0, 2.0).unwrap()
        };
        let ratio = r(20) / r(40);
        assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn jacobi_symmetric_a_b_zero_is_second_order() {
        let spec = EnsembleSpec::jacobi_unitary(0.0, 0.0, 50);
        let v = scaled_kernel(&spec, 2.0, 2.0, Frame::Bessel, Scaling::Plain).unwrap();
        assert!((v - bessel_kernel(2.0, 2.0, 0.0).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn polynomial_expansion_order() {
        let xs: Vec<f64> = (0..=16).map(|i| i as f64 * 0.5).collect();
        for params in [vec![0.0], vec![0.0, 0.5]] {
            let ladder = [50, 100, 200, 400];
            let r: Vec<f64> = ladder.iter().map(|&n| polynomial_expansion_residual(&params, n, &xs).unwrap()).collect();
            let (order, _) = convergence_fit(&ladder, &r).unwrap();
            assert!(order >= 1.9, "{params:?}: {order}");
        }
    }

    #[test]
    fn determinant_difference_is_second_order() {
        let model = HardEdgeModel::new(&EnsembleSpec::laguerre_product(&[1.0], 2), 6.0).unwrap();
        let ladder = [25, 50, 100, 200];
        let r: Vec<f64> = ladder.iter().map(|&n| determinant_cancellation(&model, n, 0.7, 2.3).unwrap()).collect();
        let (order, _) = convergence_fit(&ladder, &r).unwrap();
        assert!(order >= 1.9, "{order}");
    }
}
