//! Decay-order fits over an `N`-ladder.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluator noise floor; fitted residuals must exceed ten times this.
pub const NOISE_FLOOR: f64 = 1e-10;

/// Residuals of one convergence experiment over an `N`-ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub n_ladder: Vec<usize>,
    /// Sup over the grid, one entry per ladder point.
    pub residual_sup: Vec<f64>,
    /// Least-squares slope of `−ln r` against `ln N`.
    pub fitted_order: f64,
    /// `r · N^order` at the largest `N`.
    pub fitted_coefficient: f64,
    pub grid: Vec<(f64, f64)>,
    /// Signed residual at each grid point, one row per ladder point.
    pub residuals: Vec<Vec<f64>>,
}

/// Least-squares order and coefficient from `(N, r)` pairs.
pub fn convergence_fit(n_ladder: &[usize], residual_sup: &[f64]) -> Result<(f64, f64)> {
    if n_ladder.len() != residual_sup.len() {
        return Err(Error::Domain("ladder and residual lengths differ".into()));
    }
    if n_ladder.len() < 3 {
        return Err(Error::Domain(format!("a fit needs at least 3 ladder points, got {}", n_ladder.len())));
    }
    if let Some((n, r)) = n_ladder.iter().zip(residual_sup).find(|(_, &r)| !(r > 10.0 * NOISE_FLOOR)) {
        return Err(Error::NoiseFloor(format!("residual {r:e} at N = {n} is within 10x of {NOISE_FLOOR:e}")));
    }
    let xs: Vec<f64> = n_ladder.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = residual_sup.iter().map(|r| r.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let order = -sxy / sxx;
    let last = n_ladder.len() - 1;
    let coefficient = residual_sup[last] * (n_ladder[last] as f64).powf(order);
    Ok((order, coefficient))
}

impl ConvergenceReport {
    /// Builds the report from signed per-point residuals.
    pub fn from_residuals(
        label: impl Into<String>,
        n_ladder: Vec<usize>,
        grid: Vec<(f64, f64)>,
        residuals: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let residual_sup: Vec<f64> =
            residuals.iter().map(|row| row.iter().fold(0.0_f64, |m, r| m.max(r.abs()))).collect();
        let (fitted_order, fitted_coefficient) = convergence_fit(&n_ladder, &residual_sup)?;
        Ok(Self { label: label.into(), n_ladder, residual_sup, fitted_order, fitted_coefficient, grid, residuals })
    }

    /// `r · N^order` at the largest `N` for a prescribed order, e.g. the
    /// `1/N` coefficient when `order = 1`.
    pub fn coefficient_at(&self, order: f64) -> f64 {
        let last = self.n_ladder.len() - 1;
        self.residual_sup[last] * (self.n_ladder[last] as f64).powf(order)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Domain(format!("JSON encoding failed: {e}")))
    }

    /// CSV with columns `N, sup_residual, r(x_1,y_1), …`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["N".to_string(), "sup_residual".to_string()];
        header.extend(self.grid.iter().map(|(x, y)| format!("r({x},{y})")));
        let io = |e: csv::Error| Error::Domain(format!("CSV output failed: {e}"));
        w.write_record(&header).map_err(io)?;
        for ((n, sup), row) in self.n_ladder.iter().zip(&self.residual_sup).zip(&self.residuals) {
            let mut rec = vec![n.to_string(), format!("{sup:e}")];
            rec.extend(row.iter().map(|r| format!("{r:e}")));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Domain(format!("CSV output failed: {e}")))?;
        Ok(())
    }
}
