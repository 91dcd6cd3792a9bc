//! Small dense, banded and tridiagonal solvers plus a sparse CTMC container.
//!
//! Everything here is generic over [`Real`] so the chain oracles work in
//! `f32` as well as `f64`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gaussian elimination with partial pivoting. `a` is row-major, square.
pub fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let scale = a.iter().flat_map(|r| r.iter()).fold(T::zero(), |m, &x| m.max(x.abs()));
    let tiny = scale * T::epsilon() * T::from_count(n.max(1)) * T::lit(16.0);

    for k in 0..n {
        let (piv_row, piv_val) =
            (k..n).map(|i| (i, a[i][k].abs())).fold((k, T::zero()), |best, c| if c.1 > best.1 { c } else { best });
        if piv_val <= tiny || piv_val == T::zero() {
            return Err(Error::Singular);
        }
        a.swap(k, piv_row);
        b.swap(k, piv_row);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let akj = a[k][j];
                a[i][j] = a[i][j] - f * akj;
            }
            b[i] = b[i] - f * b[k];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(b[i], |s, j| s - a[i][j] * x[j]);
        x[i] = s / a[i][i];
    }
    Ok(x)
}

/// Like [`solve_dense`] but tolerates rank deficiency: free variables are
/// set to zero. Fails only when the system is inconsistent.
pub fn solve_dense_consistent<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    let scale = a.iter().flat_map(|r| r.iter()).chain(b.iter()).fold(T::zero(), |m, &x| m.max(x.abs()));
    let tiny = scale * T::epsilon() * T::from_count(n.max(1)) * T::lit(16.0);
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let (piv_row, piv_val) =
            (row..n)
                .map(|i| (i, a[i][col].abs()))
                .fold((row, T::zero()), |best, c| if c.1 > best.1 { c } else { best });
        if piv_val <= tiny {
            continue;
        }
        a.swap(row, piv_row);
        b.swap(row, piv_row);
        for i in row + 1..n {
            let f = a[i][col] / a[row][col];
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                let v = a[row][j];
                a[i][j] = a[i][j] - f * v;
            }
            b[i] = b[i] - f * b[row];
        }
        pivots.push((row, col));
        row += 1;
    }
    if b[row..].iter().any(|v| v.abs() > tiny) {
        return Err(Error::Singular);
    }
    let mut x = vec![T::zero(); n];
    for &(r, c) in pivots.iter().rev() {
        let s = (c + 1..n).fold(b[r], |s, j| s - a[r][j] * x[j]);
        x[c] = s / a[r][c];
    }
    Ok(x)
}

/// Thomas algorithm. `sub[i]` couples row `i` to `i-1` (sub[0] unused),
/// `sup[i]` couples row `i` to `i+1` (last entry unused).
///
/// No pivoting: callers pass diagonally dominant systems.
pub fn solve_tridiagonal<T: Real>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    for i in 0..n {
        let lower = if i == 0 { T::zero() } else { sub[i] };
        let denom = diag[i] - if i == 0 { T::zero() } else { lower * c[i - 1] };
        if denom == T::zero() || !denom.is_finite() {
            return Err(Error::Singular);
        }
        c[i] = if i + 1 < n { sup[i] / denom } else { T::zero() };
        let prev = if i == 0 { T::zero() } else { lower * d[i - 1] };
        d[i] = (rhs[i] - prev) / denom;
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        x[i] = if i + 1 < n { d[i] - c[i] * x[i + 1] } else { d[i] };
    }
    Ok(x)
}

/// Square band matrix with `lower` sub-diagonals and `upper` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self { n, lower, upper, data: vec![T::zero(); n * (lower + upper + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.lower < i || i + self.upper < j {
            return None;
        }
        Some(i * (self.lower + self.upper + 1) + (j + self.lower - i))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s])
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] = self.data[s] + v;
    }

    /// LU without pivoting; valid for (row or column) diagonally dominant matrices.
    pub fn solve(mut self, mut b: Vec<T>) -> Result<Vec<T>> {
        let n = self.n;
        for k in 0..n {
            let piv = self.get(k, k);
            if piv == T::zero() || !piv.is_finite() {
                return Err(Error::Singular);
            }
            let i_end = (k + self.lower).min(n - 1);
            let j_end = (k + self.upper).min(n - 1);
            for i in k + 1..=i_end {
                let f = self.get(i, k) / piv;
                if f == T::zero() {
                    continue;
                }
                for j in k..=j_end {
                    let v = self.get(k, j);
                    self.add(i, j, -f * v);
                }
                b[i] = b[i] - f * b[k];
            }
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let j_end = (i + self.upper).min(n - 1);
            let s = (i + 1..=j_end).fold(b[i], |s, j| s - self.get(i, j) * x[j]);
            x[i] = s / self.get(i, i);
        }
        Ok(x)
    }
}

/// Continuous-time Markov chain stored as a list of transitions.
#[derive(Debug, Clone)]
pub struct Ctmc<T> {
    n: usize,
    transitions: Vec<(usize, usize, T)>,
}

impl<T: Real> Ctmc<T> {
    pub fn new(n: usize) -> Self {
        Self { n, transitions: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds an off-diagonal rate. Zero rates and self loops are dropped.
    pub fn add_rate(&mut self, from: usize, to: usize, rate: T) {
        assert!(from < self.n && to < self.n);
        if from != to && rate > T::zero() {
            self.transitions.push((from, to, rate));
        }
    }

    pub fn transitions(&self) -> &[(usize, usize, T)] {
        &self.transitions
    }

    pub fn exit_rates(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for &(i, _, r) in &self.transitions {
            out[i] = out[i] + r;
        }
        out
    }

    /// Dense generator matrix (rows sum to zero).
    pub fn generator(&self) -> Vec<Vec<T>> {
        let mut q = vec![vec![T::zero(); self.n]; self.n];
        for &(i, j, r) in &self.transitions {
            q[i][j] = q[i][j] + r;
            q[i][i] = q[i][i] - r;
        }
        q
    }

    /// Stationary distribution of an irreducible chain by solving global
    /// balance with `pi[0]` pinned and the balance equation of state 0 dropped.
    ///
    /// The reduced matrix is column diagonally dominant, so the banded LU
    /// needs no pivoting. Bandwidth follows from the state ordering.
    pub fn stationary(&self) -> Result<Vec<T>> {
        let n = self.n;
        if n == 1 {
            return Ok(vec![T::one()]);
        }
        let (mut lower, mut upper) = (0usize, 0usize);
        for &(i, j, _) in &self.transitions {
            if j > i {
                lower = lower.max(j - i);
            } else {
                upper = upper.max(i - j);
            }
        }
        // unknowns pi_1..pi_{n-1}; equation for state j (j >= 1):
        // sum_i pi_i Q_ij = 0
        let mut m = BandMatrix::zeros(n - 1, lower, upper);
        let mut rhs = vec![T::zero(); n - 1];
        let exit = self.exit_rates();
        for (i, &e) in exit.iter().enumerate().skip(1) {
            m.add(i - 1, i - 1, -e);
        }
        for &(i, j, r) in &self.transitions {
            if j == 0 {
                continue;
            }
            if i == 0 {
                rhs[j - 1] = rhs[j - 1] - r;
            } else {
                m.add(j - 1, i - 1, r);
            }
        }
        let rest = m.solve(rhs)?;
        let mut pi = Vec::with_capacity(n);
        pi.push(T::one());
        pi.extend(rest);
        let total: T = pi.iter().copied().sum();
        if !(total.is_finite() && total > T::zero()) {
            return Err(Error::Singular);
        }
        Ok(pi.into_iter().map(|p| p / total).collect())
    }
}
