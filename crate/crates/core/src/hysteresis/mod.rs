//! Reinforced counter with hysteresis.
//!
//! Content enters the cache when an arrival lifts the counter to `K + 1` and
//! leaves only when a tick brings the counter down to `K_h <= K`. Counter
//! values in `(K_h, K]` are therefore seen both cached and uncached. With
//! `K_h = K` this is the single-threshold counter.
//!
//! The exact chain and its first-passage systems are the reference for every
//! metric here. The closed recursions for `nu` (mean residence) and `xi`
//! (mean return) are kept alongside for comparison.

mod phase;

pub use phase::PhaseType;

use crate::error::{domain, Error, Result};
use crate::linalg::Ctmc;
use crate::scalar::Real;

/// Target truncation tail `rho^(N_max - K)`.
pub const TRUNCATION_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisParams<T> {
    pub lambda: T,
    pub mu: T,
    /// Insertion threshold.
    pub k: usize,
    /// Eviction threshold, `k_h <= k`.
    pub k_h: usize,
}

impl<T: Real> HysteresisParams<T> {
    pub fn new(lambda: T, mu: T, k: usize, k_h: usize) -> Result<Self> {
        if !(lambda > T::zero() && lambda.is_finite() && mu > T::zero() && mu.is_finite()) {
            return Err(domain("lambda and mu must be positive"));
        }
        if k_h > k {
            return Err(domain(format!("K_h = {k_h} exceeds K = {k}")));
        }
        Ok(Self { lambda, mu, k, k_h })
    }

    pub fn rho(&self) -> T {
        self.lambda / self.mu
    }

    pub fn with_mu(&self, mu: T) -> Self {
        Self { mu, ..*self }
    }

    fn require_stable(&self) -> Result<T> {
        let rho = self.rho();
        if rho < T::one() {
            Ok(rho)
        } else {
            Err(Error::UnstableCounter { rho: rho.as_f64() })
        }
    }

    /// Smallest `N_max >= K + 2` with `rho^(N_max - K) < 1e-12`.
    pub fn default_truncation(&self) -> Result<usize> {
        let rho = self.require_stable()?.as_f64();
        let extra = (TRUNCATION_TAIL.ln() / rho.ln()).floor() as usize + 1;
        Ok(self.k + extra.max(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainState {
    pub count: usize,
    pub cached: bool,
}

/// Explicit truncated chain over `(counter value, cached flag)`.
#[derive(Debug, Clone)]
pub struct HysteresisChain<T> {
    params: HysteresisParams<T>,
    n_max: usize,
    states: Vec<ChainState>,
    ctmc: Ctmc<T>,
}

impl<T: Real> HysteresisChain<T> {
    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn params(&self) -> &HysteresisParams<T> {
        &self.params
    }

    pub fn ctmc(&self) -> &Ctmc<T> {
        &self.ctmc
    }

    pub fn generator(&self) -> Vec<Vec<T>> {
        self.ctmc.generator()
    }

    pub fn index_of(&self, state: ChainState) -> Option<usize> {
        state_index(&self.params, state)
    }

    pub fn stationary(&self) -> Result<Vec<T>> {
        self.ctmc.stationary()
    }
}

fn state_index<T>(p: &HysteresisParams<T>, s: ChainState) -> Option<usize> {
    let (k, kh) = (p.k, p.k_h);
    let n = s.count;
    if n <= kh {
        (!s.cached).then_some(n)
    } else if n <= k {
        Some(kh + 1 + 2 * (n - kh - 1) + usize::from(s.cached))
    } else {
        s.cached.then_some(kh + 1 + 2 * (k - kh) + (n - k - 1))
    }
}

/// Builds the truncated chain. Levels `0..=N_max`; the top level has no
/// up-transition.
pub fn build_chain<T: Real>(params: &HysteresisParams<T>, n_max: usize) -> Result<HysteresisChain<T>> {
    params.require_stable()?;
    let (k, kh) = (params.k, params.k_h);
    if n_max < k + 2 {
        return Err(Error::Truncation { n_max, required: k + 2 });
    }
    let mut states = Vec::with_capacity(kh + 1 + 2 * (k - kh) + (n_max - k));
    for n in 0..=n_max {
        if n <= kh {
            states.push(ChainState { count: n, cached: false });
        } else if n <= k {
            states.push(ChainState { count: n, cached: false });
            states.push(ChainState { count: n, cached: true });
        } else {
            states.push(ChainState { count: n, cached: true });
        }
    }
    let mut ctmc = Ctmc::new(states.len());
    let idx = |s: ChainState| state_index(params, s).expect("state in chain");
    for (i, s) in states.iter().enumerate() {
        debug_assert_eq!(idx(*s), i);
        if s.count < n_max {
            let up = s.count + 1;
            let cached = s.cached || up == k + 1;
            ctmc.add_rate(i, idx(ChainState { count: up, cached }), params.lambda);
        }
        if s.count > 0 {
            let down = s.count - 1;
            let cached = s.cached && down > kh;
            ctmc.add_rate(i, idx(ChainState { count: down, cached }), params.mu);
        }
    }
    Ok(HysteresisChain { params: *params, n_max, states, ctmc })
}

/// Stationary probability that the content is cached.
pub fn stationary_occupancy<T: Real>(chain: &HysteresisChain<T>) -> Result<T> {
    let pi = chain.stationary()?;
    Ok(chain.states.iter().zip(pi).filter(|(s, _)| s.cached).map(|(_, p)| p).sum())
}

/// Mean time from eviction (counter at `K_h`, uncached) until the counter
/// reaches `K + 1`. Solved on the finite uncached range `0..=K`; finite even
/// when `rho >= 1`.
pub fn first_passage_mean_return<T: Real>(params: &HysteresisParams<T>) -> Result<T> {
    Ok(return_phase(params)?.mean_from_each()?[params.k_h])
}

/// Mean residence time: `K - K_h + 1` downward passages of `1/(mu - lambda)`.
pub fn first_passage_mean_busy<T: Real>(params: &HysteresisParams<T>) -> Result<T> {
    params.require_stable()?;
    Ok(T::from_count(params.k - params.k_h + 1) / (params.mu - params.lambda))
}

/// Mean residence time by solving the absorbing system on cached levels
/// `K_h + 1 ..= n_max` (reflecting top). Converges to the ladder value as
/// `n_max` grows.
pub fn mean_busy_truncated<T: Real>(params: &HysteresisParams<T>, n_max: usize) -> Result<T> {
    busy_phase(params, n_max)?.mean()
}

fn return_phase<T: Real>(p: &HysteresisParams<T>) -> Result<PhaseType<T>> {
    let n = p.k + 1;
    let down: Vec<T> = (0..n).map(|i| if i > 0 { p.mu } else { T::zero() }).collect();
    let up: Vec<T> = (0..n).map(|i| if i + 1 < n { p.lambda } else { T::zero() }).collect();
    let absorb: Vec<T> = (0..n).map(|i| if i + 1 == n { p.lambda } else { T::zero() }).collect();
    PhaseType::new(down, up, absorb, p.k_h)
}

fn busy_phase<T: Real>(p: &HysteresisParams<T>, n_max: usize) -> Result<PhaseType<T>> {
    p.require_stable()?;
    if n_max < p.k + 2 {
        return Err(Error::Truncation { n_max, required: p.k + 2 });
    }
    // phase a <-> level K_h + 1 + a
    let n = n_max - p.k_h;
    let down: Vec<T> = (0..n).map(|a| if a > 0 { p.mu } else { T::zero() }).collect();
    let up: Vec<T> = (0..n).map(|a| if a + 1 < n { p.lambda } else { T::zero() }).collect();
    let absorb: Vec<T> = (0..n).map(|a| if a == 0 { p.mu } else { T::zero() }).collect();
    PhaseType::new(down, up, absorb, p.k - p.k_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sojourn {
    /// Residence in the cache after insertion.
    Busy,
    /// Time to re-enter after eviction.
    Return,
}

/// Phase-type law of `B` or `R` with the default truncation for `B`.
pub fn sojourn_phase<T: Real>(params: &HysteresisParams<T>, which: Sojourn) -> Result<PhaseType<T>> {
    match which {
        Sojourn::Return => return_phase(params),
        Sojourn::Busy => busy_phase(params, params.default_truncation()?),
    }
}

/// CDF of `B` or `R` on `grid`, uniformization error at most `1e-10` per point.
pub fn sojourn_cdf<T: Real>(params: &HysteresisParams<T>, which: Sojourn, grid: &[T]) -> Result<Vec<T>> {
    if grid.iter().any(|&t| t < T::zero() || !t.is_finite()) {
        return Err(domain("grid times must be finite and non-negative"));
    }
    if which == Sojourn::Busy {
        params.require_stable()?;
    }
    let ph = sojourn_phase(params, which)?;
    Ok(ph.cdf(grid, T::lit(1e-10)))
}

pub fn coefficient_of_variation<T: Real>(params: &HysteresisParams<T>, which: Sojourn) -> Result<T> {
    params.require_stable()?;
    sojourn_phase(params, which)?.coefficient_of_variation()
}

/// `1 / (E[B] + E[R])` from the first-passage values.
pub fn replacement_rate_hysteresis<T: Real>(params: &HysteresisParams<T>) -> Result<T> {
    let b = first_passage_mean_busy(params)?;
    let r = first_passage_mean_return(params)?;
    Ok(T::one() / (b + r))
}

/// Cached fraction of time by the renewal argument `E[B] / (E[B] + E[R])`.
pub fn renewal_occupancy<T: Real>(params: &HysteresisParams<T>) -> Result<T> {
    let b = first_passage_mean_busy(params)?;
    let r = first_passage_mean_return(params)?;
    Ok(b / (b + r))
}

/// `nu(1..=up_to)` by `nu(i) = 1/mu + nu(i-1) + rho nu(1)`, `nu(1) = 1/(mu - lambda)`.
/// Entry `i - 1` is the mean residence when `K - K_h = i - 1`.
pub fn paper_recursion_nu<T: Real>(params: &HysteresisParams<T>, up_to: usize) -> Result<Vec<T>> {
    let rho = params.require_stable()?;
    let nu1 = T::one() / (params.mu - params.lambda);
    let mut out = Vec::with_capacity(up_to);
    for i in 0..up_to {
        let v = if i == 0 { nu1 } else { T::one() / params.mu + out[i - 1] + rho * nu1 };
        out.push(v);
    }
    Ok(out)
}

/// `xi(1..=up_to)` by `xi(i) = 1/lambda + xi(i-1) + xi(1)/rho`, with
/// `xi(1) = (1/lambda) sum_{j=0}^{K} rho^{-j}`. Implemented as printed; it does
/// not agree with the first-passage return time once `K_h < K`.
pub fn paper_recursion_xi<T: Real>(params: &HysteresisParams<T>, up_to: usize) -> Result<Vec<T>> {
    let rho = params.rho();
    if !(rho > T::zero()) {
        return Err(domain("rho must be positive"));
    }
    let inv_rho = T::one() / rho;
    let mut pow = T::one();
    let mut sum = T::zero();
    for _ in 0..=params.k {
        sum = sum + pow;
        pow = pow * inv_rho;
    }
    let xi1 = sum / params.lambda;
    let mut out = Vec::with_capacity(up_to);
    for i in 0..up_to {
        let v = if i == 0 { xi1 } else { T::one() / params.lambda + out[i - 1] + inv_rho * xi1 };
        out.push(v);
    }
    Ok(out)
}

/// Both recursions evaluated together.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageTimes<T> {
    pub nu: Vec<T>,
    pub xi: Vec<T>,
}

pub fn paper_recursions<T: Real>(params: &HysteresisParams<T>, up_to: usize) -> Result<PassageTimes<T>> {
    Ok(PassageTimes { nu: paper_recursion_nu(params, up_to)?, xi: paper_recursion_xi(params, up_to)? })
}

/// One point where the printed `xi` recursion and the first-passage return
/// time disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiDivergence {
    pub lambda: f64,
    pub mu: f64,
    pub k: usize,
    pub k_h: usize,
    pub recursion: f64,
    pub oracle: f64,
}

impl XiDivergence {
    pub fn relative_gap(&self) -> f64 {
        (self.recursion - self.oracle).abs() / self.oracle.abs()
    }
}

/// Compares `xi(K - K_h + 1)` against the first-passage mean return for all
/// `K_h <= K` and reports every point whose relative gap exceeds `tol`.
pub fn xi_divergence<T: Real>(lambda: T, mu: T, k: usize, tol: f64) -> Result<Vec<XiDivergence>> {
    let base = HysteresisParams::new(lambda, mu, k, k)?;
    let xi = paper_recursion_xi(&base, k + 1)?;
    let mut out = Vec::new();
    for k_h in (0..=k).rev() {
        let p = HysteresisParams { k_h, ..base };
        let d = XiDivergence {
            lambda: lambda.as_f64(),
            mu: mu.as_f64(),
            k,
            k_h,
            recursion: xi[k - k_h].as_f64(),
            oracle: first_passage_mean_return(&p)?.as_f64(),
        };
        if d.relative_gap() > tol {
            out.push(d);
        }
    }
    Ok(out)
}

/// Finds `mu` such that the cached fraction equals `pi_up_target`.
/// Occupancy falls strictly with `mu`; bracket grows geometrically then
/// bisects.
pub fn retune_mu_for_target<T: Real>(pi_up_target: T, lambda: T, k: usize, k_h: usize) -> Result<T> {
    if !(pi_up_target > T::zero() && pi_up_target < T::one()) {
        return Err(domain(format!("pi_up target must lie in (0,1), got {pi_up_target}")));
    }
    let base = HysteresisParams::new(lambda, lambda * T::lit(2.0), k, k_h)?;
    let occ = |mu: T| renewal_occupancy(&base.with_mu(mu));
    let mut lo = lambda * (T::one() + T::epsilon().sqrt());
    if occ(lo)? < pi_up_target {
        return Err(Error::Bracket(format!("occupancy at mu -> lambda is below {pi_up_target}")));
    }
    let mut hi = lambda * T::lit(2.0);
    let mut grow = 0;
    while occ(hi)? > pi_up_target {
        lo = hi;
        hi = hi * T::lit(2.0);
        grow += 1;
        if grow > 200 {
            return Err(Error::Bracket("occupancy does not fall below target".into()));
        }
    }
    for _ in 0..400 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let o = occ(mid)?;
        if o == pi_up_target {
            return Ok(mid);
        }
        if o > pi_up_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hp(l: f64, m: f64, k: usize, kh: usize) -> HysteresisParams<f64> {
        HysteresisParams::new(l, m, k, kh).unwrap()
    }

    #[test]
    fn state_count_examples() {
        let c = build_chain(&hp(1.0, 2.0, 1, 0), 40).unwrap();
        assert_eq!(c.states().len(), 42);
        let c = build_chain(&hp(1.0, 2.0, 3, 3), 40).unwrap();
        assert_eq!(c.states().len(), 41);
        for (k, kh, n) in [(5, 2, 30), (12, 0, 50), (4, 4, 9)] {
            let c = build_chain(&hp(1.0, 3.0, k, kh), n).unwrap();
            assert_eq!(c.states().len(), 1 + kh + 2 * (k - kh) + (n - k));
        }
    }

    #[test]
    fn generator_is_conservative() {
        let c = build_chain(&hp(1.0, 2.0, 4, 1), 20).unwrap();
        for row in c.generator() {
            let off: f64 = row.iter().filter(|&&x| x > 0.0).sum();
            let diag: f64 = row.iter().filter(|&&x| x < 0.0).sum();
            assert!(row.iter().sum::<f64>() <= 1e-15);
            assert!(off >= 0.0 && diag <= 0.0);
        }
    }

    #[test]
    fn flags_follow_band_rules() {
        let p = hp(1.0, 2.0, 5, 2);
        let c = build_chain(&p, 20).unwrap();
        for s in c.states() {
            if s.count <= 2 {
                assert!(!s.cached);
            }
            if s.count >= 6 {
                assert!(s.cached);
            }
        }
        for n in 3..=5 {
            assert!(c.index_of(ChainState { count: n, cached: true }).is_some());
            assert!(c.index_of(ChainState { count: n, cached: false }).is_some());
        }
    }

    #[test]
    fn build_rejects_bad_inputs() {
        assert!(matches!(build_chain(&hp(2.0, 2.0, 1, 0), 40), Err(Error::UnstableCounter { .. })));
        assert!(matches!(build_chain(&hp(1.0, 2.0, 5, 0), 6), Err(Error::Truncation { .. })));
        assert!(HysteresisParams::new(1.0, 2.0, 1, 2).is_err());
    }

    #[test]
    fn stationary_examples() {
        let occ = |p: HysteresisParams<f64>| {
            let n = p.default_truncation().unwrap();
            stationary_occupancy(&build_chain(&p, n).unwrap()).unwrap()
        };
        assert_relative_eq!(occ(hp(1.0, 2.0, 1, 1)), 0.25, max_relative = 1e-10);
        assert_relative_eq!(occ(hp(1.0, 2.0, 1, 0)), 1.0 / 3.0, max_relative = 1e-10);
        assert_relative_eq!(occ(hp(1.0, 1.05, 1, 1)), (1.0f64 / 1.05).powi(2), max_relative = 1e-9);
    }

    #[test]
    fn passage_examples() {
        assert_relative_eq!(first_passage_mean_busy(&hp(1.0, 2.0, 1, 0)).unwrap(), 2.0);
        assert_relative_eq!(first_passage_mean_return(&hp(1.0, 2.0, 1, 0)).unwrap(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(first_passage_mean_return(&hp(1.0, 2.0, 1, 1)).unwrap(), 3.0, max_relative = 1e-14);
        // finite even when unstable
        assert!(first_passage_mean_return(&hp(3.0, 2.0, 2, 1)).unwrap().is_finite());
        assert!(first_passage_mean_busy(&hp(3.0, 2.0, 2, 1)).is_err());
    }

    #[test]
    fn truncated_busy_converges_to_ladder() {
        let p = hp(1.0, 2.0, 6, 2);
        let n = p.default_truncation().unwrap();
        assert_relative_eq!(
            mean_busy_truncated(&p, n).unwrap(),
            first_passage_mean_busy(&p).unwrap(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn recursion_examples() {
        let nu = paper_recursion_nu(&hp(1.0, 2.0, 5, 5), 3).unwrap();
        assert_relative_eq!(nu[0], 1.0);
        assert_relative_eq!(nu[1], 2.0, max_relative = 1e-15);
        assert_relative_eq!(nu[2], 3.0, max_relative = 1e-15);
        let xi = paper_recursion_xi(&hp(1.0, 2.0, 1, 1), 2).unwrap();
        assert_relative_eq!(xi[0], 3.0);
        assert_relative_eq!(xi[1], 10.0);
        // K_h = K: only xi(1) is used and it is the mean return
        let p = hp(0.7, 1.3, 6, 6);
        let xi = paper_recursion_xi(&p, 1).unwrap();
        assert_relative_eq!(xi[0], first_passage_mean_return(&p).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn xi_divergence_is_reported() {
        let d = xi_divergence(1.0, 2.0, 1, 1e-9).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].k_h, 0);
        assert_relative_eq!(d[0].recursion, 10.0);
        assert_relative_eq!(d[0].oracle, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn cdf_examples() {
        let p = hp(1.0, 2.0, 1, 1);
        let cdf = sojourn_cdf(&p, Sojourn::Return, &[0.0]).unwrap();
        assert_eq!(cdf[0], 0.0);
        // tail integration of 1 - CDF recovers E[R] = 3
        let h = 0.01;
        let grid: Vec<f64> = (0..=8000).map(|i| i as f64 * h).collect();
        let cdf = sojourn_cdf(&p, Sojourn::Return, &grid).unwrap();
        let tail: f64 = cdf.windows(2).map(|w| h * (2.0 - w[0] - w[1]) / 2.0).sum();
        assert!((tail - 3.0).abs() / 3.0 < 0.01, "tail integral {tail}");
        assert!(cdf.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        for (t, c) in grid.iter().zip(&cdf).skip(1) {
            assert!(1.0 - c <= (3.0 / t).min(1.0) + 1e-10);
        }
    }

    #[test]
    fn busy_cv_matches_mm1_busy_period() {
        for rho in [0.2, 0.5, 0.8] {
            let p = hp(rho, 1.0, 3, 3);
            let cv = coefficient_of_variation(&p, Sojourn::Busy).unwrap();
            assert_relative_eq!(cv, ((1.0 + rho) / (1.0 - rho)).sqrt(), max_relative = 1e-8);
        }
        let cv = coefficient_of_variation(&hp(1.0, 2.0, 1, 1), Sojourn::Busy).unwrap();
        assert_relative_eq!(cv, 3f64.sqrt(), max_relative = 1e-8);
    }

    #[test]
    fn busy_cv_falls_as_kh_falls() {
        let k = 8;
        let cvs: Vec<f64> =
            (0..=k).rev().map(|kh| coefficient_of_variation(&hp(1.0, 1.6, k, kh), Sojourn::Busy).unwrap()).collect();
        assert!(cvs.windows(2).all(|w| w[1] < w[0]), "{cvs:?}");
    }

    #[test]
    fn replacement_rate_examples() {
        assert_relative_eq!(replacement_rate_hysteresis(&hp(1.0, 2.0, 1, 1)).unwrap(), 0.25, max_relative = 1e-14);
        assert_relative_eq!(replacement_rate_hysteresis(&hp(1.0, 2.0, 1, 0)).unwrap(), 1.0 / 6.0, max_relative = 1e-14);
    }

    #[test]
    fn retune_examples() {
        let mu = retune_mu_for_target(0.25, 1.0, 1, 1).unwrap();
        assert_relative_eq!(mu, 2.0, max_relative = 1e-10);
        let mu = retune_mu_for_target(0.25, 1.0, 1, 0).unwrap();
        assert_relative_eq!(mu, (33f64.sqrt() - 1.0) / 2.0, max_relative = 1e-10);
        let g = replacement_rate_hysteresis(&hp(1.0, mu, 1, 0)).unwrap();
        assert!((g - 0.1715).abs() < 1e-3 && g < 0.25);
        let chain = build_chain(&hp(1.0, mu, 1, 0), hp(1.0, mu, 1, 0).default_truncation().unwrap()).unwrap();
        assert!((stationary_occupancy(&chain).unwrap() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn retune_rejects_bad_target() {
        assert!(retune_mu_for_target(1.0, 1.0, 3, 1).is_err());
        assert!(retune_mu_for_target(0.0, 1.0, 3, 1).is_err());
    }
}
