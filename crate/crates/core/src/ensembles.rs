//! Concrete ensemble families as Mellin weights, with their hard-edge scales.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mellin::{GammaFactor, MellinWeight};
use crate::polya::PolyaEnsemble;
use crate::specfun::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(alias = "LaguerreProduct", alias = "laguerre", alias = "lue")]
    LaguerreProduct,
    #[serde(alias = "MuttalibBorodinLaguerre", alias = "mb", alias = "muttalib_borodin")]
    MuttalibBorodinLaguerre,
    #[serde(alias = "LaguerreInverseProduct", alias = "inverse_product")]
    LaguerreInverseProduct,
    #[serde(alias = "JacobiUnitary", alias = "jacobi", alias = "jue")]
    JacobiUnitary,
}

/// Hard-edge scale `x → x / (coefficient · N^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardEdgeScale {
    pub coefficient: f64,
    pub exponent: f64,
}

impl HardEdgeScale {
    /// The factor `s` with `s · K_N(s x, s y)` tending to the limit kernel.
    pub fn factor(&self, n: f64) -> f64 {
        1.0 / (self.coefficient * n.powf(self.exponent))
    }
}

/// Ensemble descriptor; this is also the CLI's JSON input format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub family: Family,
    #[serde(rename = "M", default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
}

impl EnsembleSpec {
    pub fn laguerre_product(a: &[f64], n: usize) -> Self {
        Self { family: Family::LaguerreProduct, m: Some(a.len()), a: a.to_vec(), b: vec![], theta: None, n }
    }

    pub fn mb_laguerre(a: f64, theta: f64, n: usize) -> Self {
        Self {
            family: Family::MuttalibBorodinLaguerre,
            m: Some(1),
            a: vec![a],
            b: vec![],
            theta: Some(theta),
            n,
        }
    }

    pub fn laguerre_inverse_product(a: &[f64], b: &[f64], n: usize) -> Self {
        Self {
            family: Family::LaguerreInverseProduct,
            m: Some(a.len()),
            a: a.to_vec(),
            b: b.to_vec(),
            theta: None,
            n,
        }
    }

    pub fn jacobi_unitary(a: f64, b: f64, n: usize) -> Self {
        Self { family: Family::JacobiUnitary, m: Some(1), a: vec![a], b: vec![b], theta: None, n }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Domain(format!("ensemble document: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// Number of factors `M`.
    pub fn m(&self) -> usize {
        self.m.unwrap_or(self.a.len())
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        let m = self.m();
        if m == 0 || self.a.len() != m {
            return Err(Error::Domain(format!("expected {m} a-parameters, got {}", self.a.len())));
        }
        if let Some(a) = self.a.iter().find(|a| !(**a > -1.0)) {
            return Err(Error::Domain(format!("a-parameter {a} must exceed -1")));
        }
        match self.family {
            Family::LaguerreInverseProduct | Family::JacobiUnitary => {
                if self.b.len() != m {
                    return Err(Error::Domain(format!("expected {m} b-parameters, got {}", self.b.len())));
                }
                if let Some(b) = self.b.iter().find(|b| !(**b >= 0.0)) {
                    return Err(Error::Domain(format!("b-parameter {b} must be non-negative")));
                }
            }
            _ => {}
        }
        match self.family {
            Family::MuttalibBorodinLaguerre => {
                if m != 1 {
                    return Err(Error::Domain("the Muttalib–Borodin family has a single a-parameter".into()));
                }
                if !(self.theta() > 0.0) {
                    return Err(Error::Domain("theta must be positive".into()));
                }
            }
            Family::JacobiUnitary if m != 1 => {
                return Err(Error::Domain("the Jacobi family has a single (a, b) pair".into()));
            }
            _ => {}
        }
        Ok(())
    }

    /// The normalised Mellin weight; for inverse products it depends on `N`.
    pub fn weight(&self) -> Result<MellinWeight> {
        self.validate()?;
        let mut ln_pre = 0.0;
        let mut factors = Vec::new();
        match self.family {
            Family::LaguerreProduct => {
                for &a in &self.a {
                    ln_pre -= ln_gamma(a + 1.0);
                    factors.push(GammaFactor::numerator(1.0, a));
                }
            }
            Family::MuttalibBorodinLaguerre => {
                let (a, th) = (self.a[0], self.theta());
                ln_pre -= ln_gamma(a + 1.0);
                factors.push(GammaFactor::numerator(th, a + 1.0 - th));
            }
            Family::LaguerreInverseProduct | Family::JacobiUnitary => {
                let nf = self.n as f64;
                for (&a, &b) in self.a.iter().zip(&self.b) {
                    ln_pre -= ln_gamma(a + 1.0) + ln_gamma(b + nf);
                    factors.push(GammaFactor::numerator(1.0, a));
                    factors.push(GammaFactor::numerator(-1.0, b + nf + 1.0));
                }
            }
        }
        Ok(MellinWeight::from_ln_prefactor(ln_pre, factors))
    }

    pub fn build(&self) -> Result<PolyaEnsemble> {
        PolyaEnsemble::new(self.n, self.weight()?)
    }

    /// Default hard-edge scale of the family.
    pub fn hard_edge_scale(&self) -> HardEdgeScale {
        match self.family {
            Family::LaguerreProduct | Family::MuttalibBorodinLaguerre => {
                HardEdgeScale { coefficient: 1.0, exponent: 1.0 }
            }
            Family::LaguerreInverseProduct => HardEdgeScale { coefficient: 1.0, exponent: self.m() as f64 + 1.0 },
            Family::JacobiUnitary => HardEdgeScale { coefficient: 4.0, exponent: 2.0 },
        }
    }
}

pub fn make_laguerre_product(a: &[f64], n: usize) -> Result<PolyaEnsemble> {
    EnsembleSpec::laguerre_product(a, n).build()
}

pub fn make_mb_laguerre(a: f64, theta: f64, n: usize) -> Result<PolyaEnsemble> {
    EnsembleSpec::mb_laguerre(a, theta, n).build()
}

pub fn make_laguerre_inverse_product(a: &[f64], b: &[f64], n: usize) -> Result<PolyaEnsemble> {
    EnsembleSpec::laguerre_inverse_product(a, b, n).build()
}

/// The change of variables `x = y/(1 − y)` taking the Jacobi unitary
/// ensemble on `(0, 1)` to the `M = 1` inverse product on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiMap;

impl JacobiMap {
    pub fn to_x(&self, y: f64) -> f64 {
        y / (1.0 - y)
    }

    pub fn to_y(&self, x: f64) -> f64 {
        x / (1.0 + x)
    }

    /// `dx/dy`.
    pub fn jacobian(&self, y: f64) -> f64 {
        1.0 / ((1.0 - y) * (1.0 - y))
    }

    /// Jacobi-side kernel `K^J(u, v) = K^{(I)}(x(u), x(v)) · x'(v)` from any
    /// evaluator of the inverse-product kernel.
    pub fn kernel<F>(&self, u: f64, v: f64, mut k_inverse: F) -> Result<f64>
    where
        F: FnMut(f64, f64) -> Result<f64>,
    {
        if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
            return Err(Error::Domain("Jacobi variables lie in [0, 1)".into()));
        }
        Ok(k_inverse(self.to_x(u), self.to_x(v))? * self.jacobian(v))
    }
}

/// Jacobi unitary ensemble with weight `y^a (1−y)^b` as the inverse product
/// with `(a_1, b_1) = (a, b)`, plus the variable map.
pub fn make_jacobi_unitary(a: f64, b: f64, n: usize) -> Result<(PolyaEnsemble, JacobiMap)> {
    Ok((EnsembleSpec::jacobi_unitary(a, b, n).build()?, JacobiMap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn at(w: &MellinWeight, s: f64) -> f64 {
        w.eval(Complex64::new(s, 0.0)).unwrap().re
    }

    #[test]
    fn weights_are_normalised() {
        let specs = [
            EnsembleSpec::laguerre_product(&[0.0], 3),
            EnsembleSpec::laguerre_product(&[0.3, 1.7, 2.0], 3),
            EnsembleSpec::mb_laguerre(0.5, 0.5, 4),
            EnsembleSpec::mb_laguerre(1.0, 2.0, 4),
            EnsembleSpec::laguerre_inverse_product(&[0.0, 1.0], &[0.0, 2.0], 5),
            EnsembleSpec::jacobi_unitary(1.0, 1.0, 7),
        ];
        for s in specs {
            assert!((at(&s.weight().unwrap(), 1.0) - 1.0).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn documented_values() {
        let w = EnsembleSpec::laguerre_product(&[0.0, 1.0, 2.0], 1).weight().unwrap();
        assert!((at(&w, 2.0) - 6.0).abs() < 1e-12);
        let w = EnsembleSpec::mb_laguerre(0.0, 2.0, 1).weight().unwrap();
        assert!((at(&w, 2.0) - 2.0).abs() < 1e-13);
        let w = EnsembleSpec::laguerre_inverse_product(&[0.0], &[0.0], 2).weight().unwrap();
        assert!((at(&w, 2.0) - 1.0).abs() < 1e-13);
        // θ = 1 coincides with the single Laguerre weight
        let mb = EnsembleSpec::mb_laguerre(0.7, 1.0, 3).weight().unwrap();
        let lp = EnsembleSpec::laguerre_product(&[0.7], 3).weight().unwrap();
        for s in [0.5, 1.3, 2.9] {
            assert!((at(&mb, s) - at(&lp, s)).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_product_density() {
        // M = 1, a = b = 0, N = 2: w(x) = 2 / (1+x)^3
        let w = EnsembleSpec::laguerre_inverse_product(&[0.0], &[0.0], 2).weight().unwrap();
        let g = crate::mellin::MellinIntegrand::new(w);
        let v = crate::mellin::inverse_mellin_auto(&g, 1.0).unwrap();
        assert!((v - 0.25).abs() < 1e-11);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = EnsembleSpec::from_json(r#"{"family":"laguerre_product","M":2,"a":[0,1],"N":4}"#).unwrap();
        assert_eq!(s, EnsembleSpec::laguerre_product(&[0.0, 1.0], 4));
        let back = EnsembleSpec::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(EnsembleSpec::from_json(r#"{"family":"laguerre_product","M":2,"a":[0],"N":4}"#).is_err());
        assert!(EnsembleSpec::from_json(r#"{"family":"jacobi_unitary","a":[0],"b":[-1],"N":4}"#).is_err());
        assert!(EnsembleSpec::from_json(r#"{"family":"mb","a":[0],"theta":0,"N":4}"#).is_err());
        assert!(EnsembleSpec::from_json("{").is_err());
    }

    #[test]
    fn jacobi_map() {
        let m = JacobiMap;
        assert_eq!(m.to_x(0.5), 1.0);
        assert!((m.to_y(m.to_x(0.3)) - 0.3).abs() < 1e-15);
        assert_eq!(m.jacobian(0.5), 4.0);
    }
}
