use serde::{Deserialize, Serialize};

use super::linalg::invert;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sequencer::EventCountMatrix;

/// Ridge added to the diagonal when a conditioning correlation matrix is
/// singular.
pub const RIDGE: f64 = 1e-6;
/// Correlations are clamped to `±(1 - R_CLAMP)` before the z-transform.
pub const R_CLAMP: f64 = 1e-12;

/// Outcome of a Fisher-z partial correlation test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiTestResult<T> {
    pub partial_correlation: T,
    /// `sqrt(n - |cond| - 3) * |atanh(r)|`
    pub statistic: T,
    pub p_value: T,
    /// `p_value > alpha`
    pub independent: bool,
    /// Sample size minus the conditioning-set size.
    pub effective_n: usize,
    /// A constant column was involved or the ridge fallback was needed.
    pub degenerate: bool,
}

/// Pearson correlations of all ECM columns, computed once and shared
/// read-only by every blanket search.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix<T> {
    m: usize,
    n: usize,
    values: Vec<T>,
    constant: Vec<bool>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let m = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        let centered: Vec<Vec<T>> = columns
            .iter()
            .map(|c| {
                assert_eq!(c.len(), n, "columns must have equal length");
                let mean = c.iter().copied().sum::<T>() / T::from_usize(n.max(1)).unwrap();
                c.iter().map(|&v| v - mean).collect()
            })
            .collect();
        let norms: Vec<T> = centered
            .iter()
            .map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt())
            .collect();
        let constant: Vec<bool> = norms.iter().map(|&s| !(s > T::zero())).collect();
        let mut values = vec![T::zero(); m * m];
        for a in 0..m {
            values[a * m + a] = T::one();
            if constant[a] {
                continue;
            }
            for b in (a + 1)..m {
                if constant[b] {
                    continue;
                }
                let dot: T = centered[a].iter().zip(&centered[b]).map(|(&x, &y)| x * y).sum();
                let r = (dot / (norms[a] * norms[b])).max(-T::one()).min(T::one());
                values[a * m + b] = r;
                values[b * m + a] = r;
            }
        }
        Self { m, n, values, constant }
    }

    pub fn from_ecm(x: &EventCountMatrix) -> Self {
        let columns: Vec<Vec<T>> = (0..x.n_cols()).map(|j| x.column(j)).collect();
        Self::from_columns(&columns)
    }

    pub fn n_vars(&self) -> usize {
        self.m
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.constant[j]
    }

    pub fn get(&self, a: usize, b: usize) -> T {
        self.values[a * self.m + b]
    }

    /// Partial correlation of `i` and `j` given `cond`, from the inverse of
    /// the correlation submatrix. The flag reports the ridge fallback.
    pub fn partial_correlation(&self, i: usize, j: usize, cond: &[usize]) -> (T, bool) {
        if cond.is_empty() {
            return (self.get(i, j), false);
        }
        let idx: Vec<usize> = [i, j].into_iter().chain(cond.iter().copied()).collect();
        let k = idx.len();
        let mut sub: Vec<T> = Vec::with_capacity(k * k);
        for &a in &idx {
            for &b in &idx {
                sub.push(self.get(a, b));
            }
        }
        let tol = T::epsilon() * T::lit(1e4);
        let (inv, degenerate) = match invert(&sub, k, tol) {
            Some(inv) => (inv, false),
            None => {
                for d in 0..k {
                    sub[d * k + d] += T::lit(RIDGE);
                }
                match invert(&sub, k, T::zero()) {
                    Some(inv) => (inv, true),
                    None => return (T::zero(), true),
                }
            }
        };
        let denom = (inv[0] * inv[k + 1]).sqrt();
        if !(denom > T::zero()) {
            return (T::zero(), true);
        }
        let r = -inv[1] / denom;
        (r.max(-T::one()).min(T::one()), degenerate)
    }

    pub fn ci_test(&self, i: usize, j: usize, cond: &[usize], alpha: f64) -> Result<CiTestResult<T>> {
        if i == j {
            return Err(Error::InvalidCiTest(format!("tested variable {i} against itself")));
        }
        if cond.contains(&i) || cond.contains(&j) {
            return Err(Error::InvalidCiTest("tested variables appear in the conditioning set".into()));
        }
        if i >= self.m || j >= self.m || cond.iter().any(|&c| c >= self.m) {
            return Err(Error::InvalidCiTest("variable index out of range".into()));
        }
        if self.n <= cond.len() + 3 {
            return Err(Error::InvalidCiTest(format!(
                "Fisher-z needs n > |cond| + 3, got n = {}, |cond| = {}",
                self.n,
                cond.len()
            )));
        }
        let effective_n = self.n - cond.len();
        if self.constant[i] || self.constant[j] {
            return Ok(CiTestResult {
                partial_correlation: T::zero(),
                statistic: T::zero(),
                p_value: T::one(),
                independent: true,
                effective_n,
                degenerate: true,
            });
        }
        let (r, degenerate) = self.partial_correlation(i, j, cond);
        Ok(fisher_z(r, effective_n, alpha, degenerate))
    }
}

/// Applies the Fisher z-transform to a (partial) correlation `r` estimated
/// from `effective_n` = n - |cond| samples.
pub fn fisher_z<T: Scalar>(r: T, effective_n: usize, alpha: f64, degenerate: bool) -> CiTestResult<T> {
    let bound = T::one() - T::lit(R_CLAMP);
    let r_c = r.max(-bound).min(bound);
    let z = T::lit(0.5) * ((T::one() + r_c) / (T::one() - r_c)).ln();
    let scale = T::from_usize(effective_n.saturating_sub(3)).unwrap().sqrt();
    let statistic = scale * z.abs();
    let p = statrs::function::erf::erfc(statistic.as_f64() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    CiTestResult {
        partial_correlation: r,
        statistic,
        p_value: T::lit(p),
        independent: p > alpha,
        effective_n,
        degenerate,
    }
}

/// One-off test on raw columns; computes the full correlation matrix.
pub fn ci_test<T: Scalar>(columns: &[Vec<T>], i: usize, j: usize, cond: &[usize], alpha: f64) -> Result<CiTestResult<T>> {
    CorrelationMatrix::from_columns(columns).ci_test(i, j, cond, alpha)
}
