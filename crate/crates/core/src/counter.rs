//! Single-threshold reinforced counter.
//!
//! Requests arrive as a Poisson process of rate `lambda`; a timer with
//! exponential ticks of rate `mu` decrements the counter. The content is
//! inserted when an arrival lifts the counter from `K` to `K + 1` and evicted
//! when a tick drops it from `K + 1` back to `K`. The counter is an M/M/1
//! queue, so the cached fraction of time is the tail mass above `K`.

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterParams<T> {
    pub lambda: T,
    pub mu: T,
    /// Eviction threshold. Real valued; the simulator randomizes between
    /// the neighbouring integers.
    pub k: T,
}

impl<T: Real> CounterParams<T> {
    pub fn new(lambda: T, mu: T, k: T) -> Result<Self> {
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(domain(format!("lambda must be positive, got {lambda}")));
        }
        if !(mu > T::zero() && mu.is_finite()) {
            return Err(domain(format!("mu must be positive, got {mu}")));
        }
        if !(k >= T::zero() && k.is_finite()) {
            return Err(domain(format!("K must be non-negative, got {k}")));
        }
        Ok(Self { lambda, mu, k })
    }

    pub fn rho(&self) -> T {
        self.lambda / self.mu
    }

    fn stable_rho(&self) -> Result<T> {
        let rho = self.rho();
        if rho < T::one() {
            Ok(rho)
        } else {
            Err(Error::UnstableCounter { rho: rho.as_f64() })
        }
    }
}

/// Steady-state metrics of one counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState<T> {
    pub pi_up: T,
    pub rho: T,
    /// Insertion rate (equals the eviction rate).
    pub gamma: T,
    /// Mean time cached after an insertion, E[B].
    pub mean_busy: T,
    /// Mean time to re-enter after an eviction, E[R].
    pub mean_return: T,
}

impl<T: Real> SteadyState<T> {
    pub fn from_params(params: &CounterParams<T>) -> Result<Self> {
        Ok(Self {
            pi_up: occupancy_probability(params)?,
            rho: params.rho(),
            gamma: replacement_rate(params)?,
            mean_busy: mean_busy(params)?,
            mean_return: mean_return(params)?,
        })
    }
}

/// `rho^(K+1)`.
pub fn occupancy_probability<T: Real>(params: &CounterParams<T>) -> Result<T> {
    let rho = params.stable_rho()?;
    Ok(rho.powf(params.k + T::one()))
}

/// M/M/1 busy period `1 / (mu - lambda)`.
pub fn mean_busy<T: Real>(params: &CounterParams<T>) -> Result<T> {
    params.stable_rho()?;
    Ok(T::one() / (params.mu - params.lambda))
}

/// `(1 - pi_up) / (pi_up (mu - lambda))`.
pub fn mean_return<T: Real>(params: &CounterParams<T>) -> Result<T> {
    let pi = occupancy_probability(params)?;
    Ok((T::one() - pi) / (pi * (params.mu - params.lambda)))
}

/// `lambda rho^K (1 - rho)`.
pub fn replacement_rate<T: Real>(params: &CounterParams<T>) -> Result<T> {
    let rho = params.stable_rho()?;
    Ok(params.lambda * rho.powf(params.k) * (T::one() - rho))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec<T> {
    pub pi_up_target: T,
    pub lambda: T,
    pub k: T,
}

impl<T: Real> TargetSpec<T> {
    pub fn new(pi_up_target: T, lambda: T, k: T) -> Result<Self> {
        if !(pi_up_target > T::zero() && pi_up_target < T::one()) {
            return Err(domain(format!("pi_up target must lie in (0,1), got {pi_up_target}")));
        }
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(domain(format!("lambda must be positive, got {lambda}")));
        }
        if !(k >= T::zero() && k.is_finite()) {
            return Err(domain(format!("K must be non-negative, got {k}")));
        }
        Ok(Self { pi_up_target, lambda, k })
    }
}

/// Counter tuned to hit a target occupancy at a given threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provisioned<T> {
    pub mu: T,
    pub rho: T,
    pub gamma: T,
    pub mean_return: T,
}

impl<T: Real> Provisioned<T> {
    pub fn params(&self, spec: &TargetSpec<T>) -> CounterParams<T> {
        CounterParams { lambda: spec.lambda, mu: self.mu, k: spec.k }
    }
}

/// Inverse provisioning: with `pi_up` fixed, `rho = pi_up^(1/(K+1))`.
pub fn provision_from_target<T: Real>(spec: &TargetSpec<T>) -> Result<Provisioned<T>> {
    let TargetSpec { pi_up_target: pi, lambda, k } = *spec;
    if !(pi > T::zero() && pi < T::one()) {
        return Err(domain(format!("pi_up target must lie in (0,1), got {pi}")));
    }
    let exponent = T::one() / (k + T::one());
    let rho = pi.powf(exponent);
    // pi^(-1/(K+1)) - 1, computed without cancellation
    let excess = (-pi.ln() * exponent).exp_m1();
    let mu = lambda * (T::one() + excess);
    Ok(Provisioned { mu, rho, gamma: lambda * pi * excess, mean_return: (T::one() - pi) / (pi * lambda * excess) })
}

/// Request rate that yields insertion rate `gamma` at occupancy `pi_up` and
/// threshold `K`. Inverse of the `gamma` column of [`provision_from_target`]
/// in `lambda`, which it scales linearly.
pub fn lambda_for_insertion_rate<T: Real>(gamma: T, pi_up: T, k: T) -> Result<T> {
    if !(pi_up > T::zero() && pi_up < T::one()) {
        return Err(domain(format!("pi_up must lie in (0,1), got {pi_up}")));
    }
    if !(gamma > T::zero()) || k < T::zero() {
        return Err(domain("gamma must be positive and K non-negative"));
    }
    let excess = (-pi_up.ln() / (k + T::one())).exp_m1();
    Ok(gamma / (pi_up * excess))
}

/// Markov inequality bound on `P(R > r)`, clipped at 1.
pub fn markov_tail_bound<T: Real>(mean_return: T, r: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(domain(format!("r must be positive, got {r}")));
    }
    Ok((mean_return / r).min(T::one()))
}

/// Two-point randomization of a real threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedThreshold<T> {
    pub low: u64,
    pub high: u64,
    /// Probability of drawing `high` for a renewal cycle.
    pub weight: T,
}

pub fn randomized_threshold<T: Real>(k_real: T) -> RandomizedThreshold<T> {
    let k_real = k_real.max(T::zero());
    let floor = k_real.floor();
    let low = floor.to_u64().unwrap_or(0);
    let weight = k_real - floor;
    if weight == T::zero() {
        RandomizedThreshold { low, high: low, weight }
    } else {
        RandomizedThreshold { low, high: low + 1, weight }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(l: f64, m: f64, k: f64) -> CounterParams<f64> {
        CounterParams::new(l, m, k).unwrap()
    }

    // expected return time by first passage: climb j -> j+1 takes
    // (1/lambda) sum_{i<=j} rho^{-i}, starting at K
    fn first_passage_return(l: f64, m: f64, k: usize) -> f64 {
        let rho = l / m;
        (0..=k).map(|j| rho.powi(-(j as i32))).sum::<f64>() / l
    }

    #[test]
    fn occupancy_examples() {
        assert_eq!(occupancy_probability(&p(1.0, 2.0, 0.0)).unwrap(), 0.5);
        assert_eq!(occupancy_probability(&p(1.0, 2.0, 1.0)).unwrap(), 0.25);
        assert_relative_eq!(
            occupancy_probability(&p(1.0, 1.05, 1.0)).unwrap(),
            (1.0f64 / 1.05).powi(2),
            max_relative = 1e-14
        );
        assert_relative_eq!(occupancy_probability(&p(1.0, 1.05, 1.0)).unwrap(), 0.90703, epsilon = 5e-6);
    }

    #[test]
    fn unstable_is_rejected() {
        assert!(matches!(occupancy_probability(&p(2.0, 2.0, 1.0)), Err(Error::UnstableCounter { .. })));
        assert!(matches!(mean_busy(&p(3.0, 2.0, 1.0)), Err(Error::UnstableCounter { .. })));
        assert!(matches!(mean_return(&p(3.0, 2.0, 1.0)), Err(Error::UnstableCounter { .. })));
        assert!(matches!(replacement_rate(&p(3.0, 2.0, 1.0)), Err(Error::UnstableCounter { .. })));
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(CounterParams::new(0.0, 1.0, 0.0).is_err());
        assert!(CounterParams::new(1.0, -1.0, 0.0).is_err());
        assert!(CounterParams::new(1.0, 2.0, -0.5).is_err());
    }

    #[test]
    fn busy_and_return_examples() {
        assert_eq!(mean_busy(&p(1.0, 2.0, 0.0)).unwrap(), 1.0);
        assert_relative_eq!(mean_busy(&p(1.0, 1.05, 0.0)).unwrap(), 20.0, max_relative = 1e-12);
        assert_eq!(mean_busy(&p(2.0, 3.0, 0.0)).unwrap(), 1.0);
        assert_relative_eq!(mean_return(&p(1.0, 2.0, 1.0)).unwrap(), 3.0, max_relative = 1e-14);
        assert_relative_eq!(mean_return(&p(1.0, 2.0, 0.0)).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn return_time_matches_first_passage() {
        for &(l, m) in &[(1.0, 2.0), (0.3, 0.5), (5.0, 5.5), (2.0, 9.0)] {
            for k in 0..15 {
                let closed = mean_return(&p(l, m, k as f64)).unwrap();
                assert_relative_eq!(closed, first_passage_return(l, m, k), max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn replacement_rate_examples() {
        assert_eq!(replacement_rate(&p(1.0, 2.0, 1.0)).unwrap(), 0.25);
        assert_eq!(replacement_rate(&p(1.0, 2.0, 0.0)).unwrap(), 0.5);
        let s = SteadyState::from_params(&p(1.0, 2.0, 1.0)).unwrap();
        assert_relative_eq!(1.0 / (s.mean_busy + s.mean_return), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn provisioning_examples() {
        let a = provision_from_target(&TargetSpec::new(0.25, 1.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(a.mu, 2.0, max_relative = 1e-14);
        let b = provision_from_target(&TargetSpec::new(0.9, 1.0, 10.0).unwrap()).unwrap();
        assert_relative_eq!(b.rho, 0.9f64.powf(1.0 / 11.0), max_relative = 1e-14);
        assert_relative_eq!(b.rho, 0.990467, epsilon = 5e-7);
        assert_relative_eq!(b.mu, 1.009625, epsilon = 1e-6);
        let c = provision_from_target(&TargetSpec::new(0.5, 3.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(c.mu, 6.0, max_relative = 1e-14);
        let spec = TargetSpec::new(0.9, 1.0, 10.0).unwrap();
        let back = occupancy_probability(&b.params(&spec)).unwrap();
        assert_relative_eq!(back, 0.9, max_relative = 1e-12);
    }

    #[test]
    fn provisioning_rejects_bad_target() {
        assert!(TargetSpec::new(1.0, 1.0, 1.0).is_err());
        assert!(TargetSpec::new(0.0, 1.0, 1.0).is_err());
        let raw = TargetSpec { pi_up_target: 1.2, lambda: 1.0, k: 0.0 };
        assert!(provision_from_target(&raw).is_err());
    }

    #[test]
    fn recovered_lambda_reproduces_published_point() {
        let lambda = lambda_for_insertion_rate(0.32f64, 0.9, 10.0).unwrap();
        assert_relative_eq!(lambda, 36.94, epsilon = 5e-3);
        let prov = provision_from_target(&TargetSpec::new(0.9, lambda, 10.0).unwrap()).unwrap();
        assert_relative_eq!(prov.gamma, 0.32, epsilon = 1e-3);
        assert!((prov.mean_return - 0.31).abs() < 0.01);
    }

    #[test]
    fn markov_bound_examples() {
        assert_relative_eq!(markov_tail_bound(0.31, 3.1).unwrap(), 0.1, max_relative = 1e-14);
        assert_eq!(markov_tail_bound(5.0, 1.0).unwrap(), 1.0);
        assert_eq!(markov_tail_bound(1.0, 4.0).unwrap(), 0.25);
        assert!(markov_tail_bound(1.0, 0.0).is_err());
    }

    #[test]
    fn randomized_threshold_examples() {
        assert_eq!(randomized_threshold(10.0), RandomizedThreshold { low: 10, high: 10, weight: 0.0 });
        assert_eq!(randomized_threshold(9.25), RandomizedThreshold { low: 9, high: 10, weight: 0.25 });
        assert_eq!(randomized_threshold(0.5), RandomizedThreshold { low: 0, high: 1, weight: 0.5 });
    }

    #[test]
    fn single_precision_works() {
        let params = CounterParams::<f32>::new(1.0, 2.0, 1.0).unwrap();
        let s = SteadyState::from_params(&params).unwrap();
        assert!((s.pi_up - 0.25).abs() < 1e-6);
        assert!((s.mean_return - 3.0).abs() < 1e-5);
    }
}
