//! Storage occupancy when each file is cached independently with its own
//! probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AvailabilityProfile, CacheNetwork, Capacity};
use crate::error::{domain, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverflowMethod {
    /// Poisson-binomial convolution, unit file sizes only.
    Exact,
    MonteCarlo {
        draws: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyStats<T> {
    /// `sum_f pi[i][f] * t_f` per cache.
    pub expected: Vec<T>,
    /// `P(occupancy > s_i)`; zero for unbounded storage.
    pub overflow: Vec<T>,
    /// Standard error of each overflow estimate, zero when exact.
    pub stderr: Vec<T>,
}

/// Distribution of the number of successes among independent Bernoulli
/// trials with probabilities `p`.
pub fn poisson_binomial_pmf<T: Real>(p: &[T]) -> Vec<T> {
    let mut pmf = vec![T::zero(); p.len() + 1];
    pmf[0] = T::one();
    for (n, &q) in p.iter().enumerate() {
        for k in (0..=n + 1).rev() {
            let stay = pmf[k] * (T::one() - q);
            let up = if k > 0 { pmf[k - 1] * q } else { T::zero() };
            pmf[k] = stay + up;
        }
    }
    pmf
}

/// Estimates `P(sum_f B_f t_f > capacity)` with `B_f ~ Bernoulli(p_f)`.
/// Returns `(estimate, standard error)`.
pub fn overflow_monte_carlo<T: Real>(p: &[T], sizes: &[T], capacity: T, draws: usize, seed: u64) -> Result<(T, T)> {
    if p.len() != sizes.len() {
        return Err(domain("probabilities and sizes differ in length"));
    }
    if draws == 0 {
        return Err(domain("Monte Carlo needs at least one draw"));
    }
    let p64: Vec<f64> = p.iter().map(|x| x.as_f64()).collect();
    let t64: Vec<f64> = sizes.iter().map(|x| x.as_f64()).collect();
    let cap = capacity.as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..draws {
        let load: f64 = p64.iter().zip(&t64).filter(|(&q, _)| rng.random::<f64>() < q).map(|(_, &t)| t).sum();
        if load > cap {
            hits += 1;
        }
    }
    let n = draws as f64;
    let est = hits as f64 / n;
    let se = (est * (1.0 - est) / n).sqrt();
    Ok((T::lit(est), T::lit(se)))
}

/// Expected storage per cache and the probability that it exceeds `s_i`.
pub fn expected_occupancy<T: Real>(
    profile: &AvailabilityProfile<T>,
    net: &CacheNetwork<T>,
    method: OverflowMethod,
) -> Result<OccupancyStats<T>> {
    profile.check_dims(net)?;
    let c = net.caches();
    let mut stats = OccupancyStats {
        expected: Vec::with_capacity(c),
        overflow: Vec::with_capacity(c),
        stderr: Vec::with_capacity(c),
    };
    for i in 0..c {
        let row = &profile.rows()[i];
        stats.expected.push(row.iter().zip(net.sizes()).map(|(&p, &t)| p * t).sum());
        let Capacity::Finite(s) = net.storage()[i] else {
            stats.overflow.push(T::zero());
            stats.stderr.push(T::zero());
            continue;
        };
        let (over, se) = match method {
            OverflowMethod::Exact => {
                if net.sizes().iter().any(|&t| t != T::one()) {
                    return Err(domain("exact overflow needs unit file sizes"));
                }
                let pmf = poisson_binomial_pmf(row);
                let tail = pmf.iter().enumerate().filter(|(k, _)| T::from_count(*k) > s).map(|(_, &q)| q).sum();
                (tail, T::zero())
            }
            OverflowMethod::MonteCarlo { draws, seed } => {
                overflow_monte_carlo(row, net.sizes(), s, draws, seed.wrapping_add(i as u64))?
            }
        };
        stats.overflow.push(over);
        stats.stderr.push(se);
    }
    Ok(stats)
}
