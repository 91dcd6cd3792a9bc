//! Threshold selection at fixed occupancy.
//!
//! With `pi_up` and `lambda` fixed, `mu` follows from `K`, and the cost
//! `psi(K) = alpha * gamma + beta * E[R]` trades replacement churn against
//! the wait for re-insertion. Writing `x = pi^(-1/(K+1)) - 1`,
//! `gamma = lambda pi x` falls with `K` and `E[R] = (1 - pi) / (pi lambda x)`
//! grows with it.

use crate::counter::{provision_from_target, TargetSpec};
use crate::error::{domain, Error, Result};
use crate::scalar::Real;

pub const DEFAULT_K_MAX: f64 = 100.0;
/// Width of the final golden-section bracket.
pub const K_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights<T> {
    /// Cost per insertion event.
    pub alpha: T,
    /// Cost per unit of mean return time.
    pub beta: T,
    pub k_max: T,
}

impl<T: Real> CostWeights<T> {
    pub fn new(alpha: T, beta: T, k_max: T) -> Result<Self> {
        let w = Self { alpha, beta, k_max };
        w.validate()?;
        Ok(w)
    }

    pub fn with_default_k_max(alpha: T, beta: T) -> Result<Self> {
        Self::new(alpha, beta, T::lit(DEFAULT_K_MAX))
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::zero() && self.beta >= T::zero()) {
            return Err(domain("cost weights must be non-negative"));
        }
        if self.alpha == T::zero() && self.beta == T::zero() {
            return Err(domain("alpha and beta cannot both be zero"));
        }
        if !(self.k_max > T::zero() && self.k_max.is_finite()) {
            return Err(domain("K_max must be positive and finite"));
        }
        Ok(())
    }
}

fn check_pi_lambda<T: Real>(pi_up: T, lambda: T) -> Result<()> {
    if !(pi_up > T::zero() && pi_up < T::one()) {
        return Err(domain(format!("pi_up must lie in (0,1), got {pi_up}")));
    }
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// `pi^(-1/(K+1)) - 1`
fn excess<T: Real>(k: T, pi_up: T) -> T {
    (-pi_up.ln() / (k + T::one())).exp_m1()
}

/// `psi(K)` in closed form.
pub fn objective<T: Real>(k: T, weights: &CostWeights<T>, pi_up: T, lambda: T) -> Result<T> {
    check_pi_lambda(pi_up, lambda)?;
    if !(k >= T::zero()) {
        return Err(domain(format!("K must be non-negative, got {k}")));
    }
    let x = excess(k, pi_up);
    let churn = lambda * pi_up * x;
    let wait = (T::one() - pi_up) / (pi_up * lambda) / x;
    Ok(weights.alpha * churn + weights.beta * wait)
}

/// Expected return time at threshold `K` with `mu` provisioned for `pi_up`.
pub fn return_time_at<T: Real>(k: T, pi_up: T, lambda: T) -> Result<T> {
    Ok(provision_from_target(&TargetSpec::new(pi_up, lambda, k)?)?.mean_return)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<T> {
    pub k: T,
    pub cost: T,
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section<T: Real, F: FnMut(T) -> T>(mut f: F, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = (a + b) / T::lit(2.0);
    let fx = f(x);
    // the bracket may have collapsed onto an end point
    [(a, f(a)), (b, f(b))].into_iter().fold((x, fx), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Minimizes `psi` over `[0, K_max]`. With `beta = 0` the cost is strictly
/// decreasing so the answer is `K_max` exactly; with `alpha = 0` it is
/// strictly increasing so the answer is `0`.
pub fn minimize<T: Real>(weights: &CostWeights<T>, pi_up: T, lambda: T) -> Result<Minimum<T>> {
    weights.validate()?;
    check_pi_lambda(pi_up, lambda)?;
    let k = if weights.beta == T::zero() {
        weights.k_max
    } else if weights.alpha == T::zero() {
        T::zero()
    } else {
        let f = |k: T| objective(k, weights, pi_up, lambda).unwrap_or(T::infinity());
        golden_section(f, T::zero(), weights.k_max, T::lit(K_TOLERANCE)).0
    };
    Ok(Minimum { k, cost: objective(k, weights, pi_up, lambda)? })
}

/// Minimizes `psi` subject to `E[R] <= r_star`. Either the unconstrained
/// optimum is admissible, or the constraint binds and the answer is the `K`
/// with `E[R](K) = r_star`.
pub fn minimize_with_return_cap<T: Real>(weights: &CostWeights<T>, pi_up: T, lambda: T, r_star: T) -> Result<T> {
    if !(r_star > T::zero()) {
        return Err(domain(format!("return-time cap must be positive, got {r_star}")));
    }
    let floor = return_time_at(T::zero(), pi_up, lambda)?;
    if floor > r_star {
        return Err(Error::InfeasibleConstraint(format!("E[R] >= {floor} for every K, cap is {r_star}")));
    }
    let best = minimize(weights, pi_up, lambda)?;
    if return_time_at(best.k, pi_up, lambda)? <= r_star {
        return Ok(best.k);
    }
    let (mut lo, mut hi) = (T::zero(), best.k);
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if return_time_at(mid, pi_up, lambda)? <= r_star {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `phi(K) = pi^(-1/(K+1))`
pub fn phi<T: Real>(k: T, pi_up: T) -> T {
    pi_up.powf(-T::one() / (k + T::one()))
}

/// `omega(K) = 1 / (pi^(-1/(K+1)) - 1)`
pub fn omega<T: Real>(k: T, pi_up: T) -> T {
    T::one() / excess(k, pi_up)
}

/// Closed-form second derivative of `phi`.
pub fn phi_second_derivative<T: Real>(k: T, pi_up: T) -> T {
    let l = pi_up.ln();
    let k1 = k + T::one();
    -l * (T::lit(2.0) * k1 - l) / (k1.powi(4) * pi_up.powf(T::one() / k1))
}

/// Sign function for the curvature of `omega`:
/// `pi^(1/(K+1)) (2K - ln pi + 2) - (2K + ln pi + 2)`.
pub fn omega_curvature_sign<T: Real>(k: T, pi_up: T) -> T {
    let l = pi_up.ln();
    let two = T::lit(2.0);
    pi_up.powf(T::one() / (k + T::one())) * (two * k - l + two) - (two * k + l + two)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveKind {
    Phi,
    Omega,
    Delta,
    PhiClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityViolation {
    pub k: f64,
    pub curve: CurveKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub min_phi_curvature: f64,
    pub min_omega_curvature: f64,
    pub min_delta: f64,
    pub min_phi_closed_form: f64,
    pub violations: Vec<ConvexityViolation>,
}

impl ConvexityReport {
    pub fn is_convex(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tolerance for discrete second differences.
pub const CURVATURE_TOLERANCE: f64 = -1e-9;

/// Numerical check that `phi` and `omega` are convex on a sorted grid,
/// plus the sign condition `delta(K) >= 0` that controls `omega`.
pub fn verify_convexity<T: Real>(pi_up: T, k_grid: &[T]) -> Result<ConvexityReport> {
    if !(pi_up > T::zero() && pi_up < T::one()) {
        return Err(domain("pi_up must lie in (0,1)"));
    }
    if k_grid.windows(2).any(|w| !(w[1] > w[0])) || k_grid.first().is_some_and(|&k| k < T::zero()) {
        return Err(domain("K grid must be sorted, strictly increasing and non-negative"));
    }
    let mut report = ConvexityReport {
        min_phi_curvature: f64::INFINITY,
        min_omega_curvature: f64::INFINITY,
        min_delta: f64::INFINITY,
        min_phi_closed_form: f64::INFINITY,
        violations: Vec::new(),
    };
    let tol = T::lit(CURVATURE_TOLERANCE);
    let flag = |violations: &mut Vec<ConvexityViolation>, k: T, curve, v: T, bound: T| {
        if v < bound {
            violations.push(ConvexityViolation { k: k.as_f64(), curve, value: v.as_f64() });
        }
    };
    for w in k_grid.windows(3) {
        let (x0, x1, x2) = (w[0], w[1], w[2]);
        let second = |f: &dyn Fn(T) -> T| {
            let s1 = (f(x1) - f(x0)) / (x1 - x0);
            let s2 = (f(x2) - f(x1)) / (x2 - x1);
            T::lit(2.0) * (s2 - s1) / (x2 - x0)
        };
        let dphi = second(&|k| phi(k, pi_up));
        let domega = second(&|k| omega(k, pi_up));
        report.min_phi_curvature = report.min_phi_curvature.min(dphi.as_f64());
        report.min_omega_curvature = report.min_omega_curvature.min(domega.as_f64());
        flag(&mut report.violations, x1, CurveKind::Phi, dphi, tol);
        flag(&mut report.violations, x1, CurveKind::Omega, domega, tol);
    }
    for &k in k_grid {
        let d = omega_curvature_sign(k, pi_up);
        let c = phi_second_derivative(k, pi_up);
        report.min_delta = report.min_delta.min(d.as_f64());
        report.min_phi_closed_form = report.min_phi_closed_form.min(c.as_f64());
        flag(&mut report.violations, k, CurveKind::Delta, d, tol);
        flag(&mut report.violations, k, CurveKind::PhiClosedForm, c, T::zero());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::lambda_for_insertion_rate;
    use approx::assert_relative_eq;

    fn example_lambda() -> f64 {
        lambda_for_insertion_rate(0.32, 0.9, 10.0).unwrap()
    }

    #[test]
    fn objective_at_published_point() {
        let w = CostWeights::with_default_k_max(1.0, 1.0).unwrap();
        let v = objective(10.0, &w, 0.9, 36.94).unwrap();
        assert_relative_eq!(v, 0.6325, epsilon = 5e-4);
        let prov = provision_from_target(&TargetSpec::new(0.9, 36.94, 10.0).unwrap()).unwrap();
        assert_relative_eq!(v, prov.gamma + prov.mean_return, max_relative = 1e-12);
    }

    #[test]
    fn boundary_weights_are_monotone() {
        let churn_only = CostWeights::new(1.0, 0.0, 20.0).unwrap();
        let wait_only = CostWeights::new(0.0, 1.0, 20.0).unwrap();
        let ks: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        for w in ks.windows(2) {
            assert!(objective(w[1], &churn_only, 0.6, 2.0).unwrap() < objective(w[0], &churn_only, 0.6, 2.0).unwrap());
            assert!(objective(w[1], &wait_only, 0.6, 2.0).unwrap() > objective(w[0], &wait_only, 0.6, 2.0).unwrap());
        }
    }

    #[test]
    fn churn_only_picks_k_max() {
        let w = CostWeights::new(1.0, 0.0, 20.0).unwrap();
        assert_eq!(minimize(&w, 0.5, 3.0).unwrap().k, 20.0);
    }

    #[test]
    fn published_example_optimum() {
        let w = CostWeights::new(1.0, 1.0, 50.0).unwrap();
        let lambda = example_lambda();
        let m = minimize(&w, 0.9, lambda).unwrap();
        assert!((m.k - 10.0).abs() < 0.5, "K* = {}", m.k);
        let prov = provision_from_target(&TargetSpec::new(0.9, lambda, m.k).unwrap()).unwrap();
        assert!((prov.gamma - 0.32).abs() <= 0.01);
        assert!((prov.mean_return - 0.31).abs() <= 0.01);
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(CostWeights::new(0.0, 0.0, 10.0).is_err());
        assert!(CostWeights::new(-1.0, 1.0, 10.0).is_err());
        assert!(CostWeights::new(1.0, 1.0, 0.0).is_err());
        let w = CostWeights::new(1.0, 1.0, 10.0).unwrap();
        assert!(objective(1.0, &w, 1.0, 1.0).is_err());
        assert!(minimize(&w, 0.0, 1.0).is_err());
    }

    #[test]
    fn cap_cases() {
        let w = CostWeights::new(1.0, 1.0, 50.0).unwrap();
        let lambda = example_lambda();
        let free = minimize(&w, 0.9, lambda).unwrap().k;
        let slack = 10.0 * return_time_at(free, 0.9, lambda).unwrap();
        assert_eq!(minimize_with_return_cap(&w, 0.9, lambda, slack).unwrap(), free);

        let k = minimize_with_return_cap(&w, 0.9, lambda, 0.31).unwrap();
        assert!((k - 10.0).abs() < 0.5);
        assert_relative_eq!(return_time_at(k, 0.9, lambda).unwrap(), 0.31, max_relative = 1e-9);
        // closed-form inverse of E[R](K) = r
        let x = 0.1 / (0.9 * lambda * 0.31);
        let inverse = -(0.9f64).ln() / x.ln_1p() - 1.0;
        assert_relative_eq!(k, inverse, epsilon = 1e-8);

        let floor = return_time_at(0.0, 0.9, lambda).unwrap();
        assert!(matches!(minimize_with_return_cap(&w, 0.9, lambda, floor * 0.5), Err(Error::InfeasibleConstraint(_))));
    }

    #[test]
    fn convexity_on_fine_grid() {
        let grid: Vec<f64> = (0..=5000).map(|i| i as f64 * 0.01).collect();
        let r = verify_convexity(0.5, &grid).unwrap();
        assert!(r.is_convex(), "{:?}", &r.violations[..r.violations.len().min(5)]);
        assert!(r.min_phi_closed_form > 0.0);
        assert!(omega_curvature_sign(0.0, 0.5) >= 0.0);
        assert!(omega_curvature_sign(1e4f64, 0.5).abs() < 1e-3);
    }

    #[test]
    fn phi_closed_form_matches_differences() {
        let h = 1e-3;
        for &k in &[0.0, 1.5, 7.0, 30.0] {
            let k: f64 = k + 1.0;
            let fd = (phi(k + h, 0.3) - 2.0 * phi(k, 0.3) + phi(k - h, 0.3)) / (h * h);
            assert_relative_eq!(fd, phi_second_derivative(k, 0.3), max_relative = 1e-4);
        }
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, _) = golden_section(|x: f64| (x - 0.2).powi(2), -1.0, 1.0, 1e-9);
        assert!((x - 0.2).abs() < 1e-8);
        let (x, _) = golden_section(|x: f64| x, 0.0, 5.0, 1e-9);
        assert_eq!(x, 0.0);
    }
}
