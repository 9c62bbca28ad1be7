//! Gauss–Legendre rules and the adaptive drivers built on them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of an `order`-point rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, w * half))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_rule(order: usize) -> QuadratureRule {
    assert!(order >= 1, "quadrature order must be positive");
    if order == 1 {
        return QuadratureRule { nodes: vec![0.0], weights: vec![2.0], order };
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1e-3) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // descending from the guess, stored ascending
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights, order }
}

/// Gauss–Legendre rule with `order` points, exact for degree `2·order − 1`.
///
/// Rules are cached process-wide; repeated requests are cheap.
pub fn gauss_legendre(order: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&order) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(compute_rule(order));
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(order)
        .or_insert_with(|| Arc::clone(&rule));
    rule
}

/// Integrates `f` over `[a, b]`, doubling the rule order from `start` until two
/// successive estimates agree to `rel_tol`. When the integral cancels far
/// below `∫|f|`, agreement at the rounding level of `∫|f|` is accepted.
pub fn integrate_adaptive<F>(f: F, a: f64, b: f64, rel_tol: f64, start: usize, max_order: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_adaptive_floor(f, a, b, rel_tol, 1e-14, rel_tol * rel_tol, start, max_order)
}

/// [`integrate_adaptive`] with explicit floors: agreement to `l1_floor · ∫|f|`
/// or to `abs_tol` is also accepted.
#[allow(clippy::too_many_arguments)]
pub fn integrate_adaptive_floor<F>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    l1_floor: f64,
    abs_tol: f64,
    start: usize,
    max_order: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut order = start.max(2);
    let (mut prev, _) = eval_rule(&mut f, order, a, b)?;
    while order < max_order {
        order *= 2;
        let (cur, l1) = eval_rule(&mut f, order, a, b)?;
        let tol = (rel_tol * cur.abs()).max(l1_floor * l1).max(abs_tol);
        if (cur - prev).abs() <= tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!(
        "no agreement to {rel_tol:e} on [{a}, {b}] up to order {max_order}"
    )))
}

/// Rule estimate together with the matching estimate of `∫|f|`.
fn eval_rule<F>(f: &mut F, order: usize, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let rule = gauss_legendre(order);
    let mut acc = 0.0;
    let mut l1 = 0.0;
    for (x, w) in rule.mapped(a, b) {
        let v = w * f(x)?;
        acc += v;
        l1 += v.abs();
    }
    Ok((acc, l1))
}

/// Integrates over `[0, ∞)` by summing unit-growing panels `[T_k, T_{k+1}]`
/// until the integrand magnitude at the panel end drops below `tail_tol`
/// and is decreasing.
pub fn integrate_half_line<F>(mut f: F, panel: f64, rel_tol: f64, tail_tol: f64, max_panels: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut prev_end = f64::INFINITY;
    for _ in 0..max_panels {
        let hi = lo + panel;
        total += integrate_adaptive(&mut f, lo, hi, rel_tol, 32, 1024)?;
        let end = f(hi)?.abs();
        if end < tail_tol && end <= prev_end {
            return Ok(total);
        }
        prev_end = end;
        lo = hi;
    }
    Err(Error::Quadrature(format!("tail bound not reached after {max_panels} panels")))
}

/// Integrates over `(0, ∞)` on dyadic panels `[2^k, 2^{k+1}]`, walking down
/// from 1 and up from 2 until two consecutive panels contribute less than
/// `abs_tol`. Power-law behaviour at either end costs a few panels per decade
/// instead of breaking the rule's convergence.
pub fn integrate_dyadic<F>(f: F, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_dyadic_floor(f, rel_tol, 1e-14, abs_tol)
}

/// [`integrate_dyadic`] with panel agreement also accepted at
/// `l1_floor · ∫|f|`, for integrands whose evaluation noise sits above
/// `1e-14` of their magnitude.
pub fn integrate_dyadic_floor<F>(mut f: F, rel_tol: f64, l1_floor: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_PANELS: i32 = 400;
    let mut total = 0.0;
    for dir in [-1i32, 1] {
        let mut quiet = 0;
        let mut k: i32 = if dir < 0 { 0 } else { 1 };
        loop {
            if k.abs() > MAX_PANELS {
                return Err(Error::Quadrature("dyadic panels did not reach the tail bound".into()));
            }
            let lo = f64::powi(2.0, k);
            let part = integrate_adaptive_floor(&mut f, lo, 2.0 * lo, rel_tol, l1_floor, abs_tol, 16, 512)?;
            total += part;
            quiet = if part.abs() <= abs_tol { quiet + 1 } else { 0 };
            if quiet >= 2 && k.abs() >= 3 {
                break;
            }
            k += dir;
        }
    }
    Ok(total)
}

/// `∫₀^b f` on geometrically graded panels `[b 2^{-k-1}, b 2^{-k}]`, for
/// integrands with a non-analytic power at the origin. Stops once two
/// consecutive panels fall below `1e-17` of the running total.
pub fn integrate_graded<F>(mut f: F, b: f64, rel_tol: f64, l1_floor: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_PANELS: i32 = 300;
    let mut total = 0.0;
    let mut quiet = 0;
    for k in 0..MAX_PANELS {
        let hi = b * f64::powi(0.5, k);
        let part = integrate_adaptive_floor(&mut f, 0.5 * hi, hi, rel_tol, l1_floor, 0.0, 16, 1024)?;
        total += part;
        quiet = if part.abs() <= 1e-17 * total.abs() { quiet + 1 } else { 0 };
        if quiet >= 2 && k >= 4 {
            return Ok(total);
        }
    }
    Err(Error::Quadrature(format!("graded panels did not decay towards 0 within {MAX_PANELS} panels")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_handles_fractional_powers() {
        // ∫₀¹ t^{-0.35} cos t dt against a long series
        let exact: f64 = (0..30)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let fact: f64 = (1..=2 * k).map(|j| j as f64).product();
                sign / (fact * (2.0 * k as f64 + 0.65))
            })
            .sum();
        let v = integrate_graded(|t| Ok(t.powf(-0.35) * t.cos()), 1.0, 1e-13, 1e-15).unwrap();
        assert!((v - exact).abs() < 1e-12, "{v} {exact}");
    }

    #[test]
    fn low_orders() {
        let r1 = gauss_legendre(1);
        assert_eq!(r1.nodes, vec![0.0]);
        assert_eq!(r1.weights, vec![2.0]);
        let r2 = gauss_legendre(2);
        let n = 1.0 / 3f64.sqrt();
        assert!((r2.nodes[0] + n).abs() < 1e-15 && (r2.nodes[1] - n).abs() < 1e-15);
        assert!((r2.weights[0] - 1.0).abs() < 1e-15 && (r2.weights[1] - 1.0).abs() < 1e-15);
        let r3 = gauss_legendre(3);
        let v = r3.integrate(-1.0, 1.0, |x| x.powi(4));
        assert!((v - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rule_invariants() {
        for order in [1usize, 2, 3, 5, 8, 17, 64, 200] {
            let r = gauss_legendre(order);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "order {order}");
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!(r.nodes.windows(2).all(|p| p[0] < p[1]), "order {order}");
            let max_deg = (2 * order - 1).min(40);
            for d in 0..=max_deg {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                let v = r.integrate(-1.0, 1.0, |x| x.powi(d as i32));
                assert!((v - exact).abs() < 1e-12, "order {order} degree {d}");
            }
        }
    }

    #[test]
    fn adaptive_and_half_line() {
        let v = integrate_adaptive(|x| Ok(x.sin()), 0.0, std::f64::consts::PI, 1e-13, 8, 256).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        let v = integrate_half_line(|x| Ok(x * x * (-x).exp()), 4.0, 1e-13, 1e-16, 100).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate_dyadic(|x| Ok(x.powf(-0.5) * (-x).exp()), 1e-13, 1e-16).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let v = integrate_dyadic(|x| Ok(1.0 / (1.0 + x).powi(2)), 1e-13, 1e-15).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }
}
