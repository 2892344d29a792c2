//! Estimators with error bars.
//!
//! [`Batches`] is the workhorse: a vector of running sums cut into
//! consecutive batches, each batch carrying its own weight (a sample count or
//! an accumulated flight time). Means are ratio estimators `Σ sum / Σ weight`
//! with delta-method standard errors over the batches, which reduces to
//! ordinary batch means when every step has unit weight. Merging two
//! accumulators concatenates their batch lists, so a reduction over workers
//! in a fixed order is bit-exact.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean with a standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(mean: f64, stderr: f64) -> Self {
        Self { mean, stderr }
    }

    /// `|a - b|` in units of the combined standard error.
    pub fn discrepancy(&self, other: &Estimate) -> f64 {
        let s = self.stderr.hypot(other.stderr);
        let d = (self.mean - other.mean).abs();
        if s > 0.0 {
            d / s
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn scaled(&self, k: f64) -> Estimate {
        Estimate::new(self.mean * k, self.stderr * k.abs())
    }
}

/// Multivariate batch accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Batches {
    dim: usize,
    batch_len: u64,
    steps: u64,
    current: Vec<f64>,
    current_weight: f64,
    sums: Vec<f64>,
    weights: Vec<f64>,
    total_steps: u64,
}

impl Batches {
    /// `dim` components, a new batch every `batch_len` steps.
    pub fn new(dim: usize, batch_len: u64) -> Self {
        Self {
            dim,
            batch_len: batch_len.max(1),
            steps: 0,
            current: vec![0.0; dim],
            current_weight: 0.0,
            sums: Vec::new(),
            weights: Vec::new(),
            total_steps: 0,
        }
    }

    /// Batch length giving `n_batches` batches over `n_steps` steps.
    pub fn for_steps(dim: usize, n_steps: u64, n_batches: u64) -> Self {
        Self::new(dim, (n_steps / n_batches.max(1)).max(1))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn add(&mut self, component: usize, value: f64) {
        self.current[component] += value;
    }

    /// Closes a step that contributed `weight` to the denominator.
    #[inline]
    pub fn end_step(&mut self, weight: f64) {
        self.current_weight += weight;
        self.steps += 1;
        self.total_steps += 1;
        if self.steps == self.batch_len {
            self.close();
        }
    }

    fn close(&mut self) {
        self.sums.extend_from_slice(&self.current);
        self.weights.push(self.current_weight);
        self.current.iter_mut().for_each(|v| *v = 0.0);
        self.current_weight = 0.0;
        self.steps = 0;
    }

    /// Closes a trailing partial batch. Call once at the end of a run.
    pub fn finish(&mut self) {
        if self.steps > 0 {
            self.close();
        }
    }

    /// Appends the batches of `other` (which must be finished).
    pub fn merge(&mut self, other: &Batches) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::InvalidInput(format!(
                "cannot merge accumulators of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        self.finish();
        self.sums.extend_from_slice(&other.sums);
        self.weights.extend_from_slice(&other.weights);
        self.total_steps += other.total_steps - other.steps;
        Ok(())
    }

    pub fn n_batches(&self) -> usize {
        self.weights.len()
    }

    pub fn n_steps(&self) -> u64 {
        self.total_steps
    }

    fn batch(&self, b: usize) -> &[f64] {
        &self.sums[b * self.dim..(b + 1) * self.dim]
    }

    /// Total weight over closed batches, summed in batch order.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Total of one component over closed batches, summed in batch order.
    pub fn total(&self, component: usize) -> f64 {
        (0..self.n_batches())
            .map(|b| self.batch(b)[component])
            .sum()
    }

    /// Ratio estimate `Σ sum_i / Σ weight` with its delta-method stderr.
    pub fn ratio(&self, component: usize) -> Estimate {
        let nb = self.n_batches();
        let w = self.total_weight();
        if nb == 0 || w == 0.0 {
            return Estimate::new(f64::NAN, f64::NAN);
        }
        let r = self.total(component) / w;
        if nb < 2 {
            return Estimate::new(r, f64::NAN);
        }
        let wbar = w / nb as f64;
        let ss: f64 = (0..nb)
            .map(|b| {
                let e = self.batch(b)[component] - r * self.weights[b];
                e * e
            })
            .sum();
        let var = ss / ((nb * (nb - 1)) as f64 * wbar * wbar);
        Estimate::new(r, var.sqrt())
    }

    /// Ratio of two components `Σ a / Σ b` with its delta-method stderr.
    pub fn component_ratio(&self, num: usize, den: usize) -> Estimate {
        let nb = self.n_batches();
        let a = self.total(num);
        let d = self.total(den);
        if nb < 2 || d == 0.0 {
            return Estimate::new(a / d, f64::NAN);
        }
        let r = a / d;
        let dbar = d / nb as f64;
        let ss: f64 = (0..nb)
            .map(|b| {
                let x = self.batch(b);
                let e = x[num] - r * x[den];
                e * e
            })
            .sum();
        Estimate::new(r, (ss / ((nb * (nb - 1)) as f64 * dbar * dbar)).sqrt())
    }
}

/// Mean and standard error of independent samples.
pub fn mean_stderr(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate::new(f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate::new(mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    Estimate::new(mean, (var / n as f64).sqrt())
}

/// Weighted least-squares polynomial fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    /// Coefficients in increasing powers, starting at `x^0` (or `x^1`
    /// without intercept).
    pub coef: Vec<f64>,
    pub stderr: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub intercept: bool,
}

impl PolyFit {
    /// Two-sided confidence interval for coefficient `i`, Student-t with the
    /// fit's degrees of freedom.
    pub fn ci(&self, i: usize, level: f64) -> (f64, f64) {
        let q = t_quantile(0.5 + 0.5 * level, self.dof);
        (
            self.coef[i] - q * self.stderr[i],
            self.coef[i] + q * self.stderr[i],
        )
    }

    pub fn slope(&self) -> Estimate {
        let i = usize::from(self.intercept);
        Estimate::new(self.coef[i], self.stderr[i])
    }

    pub fn intercept(&self) -> Option<Estimate> {
        self.intercept
            .then(|| Estimate::new(self.coef[0], self.stderr[0]))
    }
}

/// Fits `y ≈ Σ c_j x^j` with weights `1/σ²`. Coefficient errors come from
/// the inverse normal matrix, i.e. they trust the supplied `σ`.
pub fn wls_poly(
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    degree: usize,
    intercept: bool,
) -> Result<PolyFit> {
    let n = x.len();
    let first = usize::from(!intercept);
    let p = degree + 1 - first;
    if y.len() != n || sigma.len() != n {
        return Err(Error::InvalidInput("x, y, sigma lengths differ".into()));
    }
    if n < p || p == 0 {
        return Err(Error::InvalidInput(format!(
            "{n} points cannot fit {p} coefficients"
        )));
    }
    if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidInput(
            "sigma must be positive and finite".into(),
        ));
    }
    let a = DMatrix::from_fn(n, p, |i, j| x[i].powi((j + first) as i32) / sigma[i]);
    let b = DVector::from_fn(n, |i, _| y[i] / sigma[i]);
    let normal = a.transpose() * &a;
    let cov = normal
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular design matrix".into()))?;
    let coef = &cov * (a.transpose() * &b);
    let resid = &a * &coef - &b;
    Ok(PolyFit {
        coef: coef.iter().copied().collect(),
        stderr: (0..p).map(|j| cov[(j, j)].sqrt()).collect(),
        chi2: resid.norm_squared(),
        dof: n - p,
        intercept,
    })
}

/// Ordinary least-squares line through `(x, y)`, as used for trend slopes.
pub fn ols_line(x: &[f64], y: &[f64]) -> Result<PolyFit> {
    let fit = wls_poly(x, y, &vec![1.0; x.len()], 1, true)?;
    // rescale the coefficient errors by the residual variance
    let s2 = if fit.dof > 0 {
        fit.chi2 / fit.dof as f64
    } else {
        f64::NAN
    };
    Ok(PolyFit {
        stderr: fit.stderr.iter().map(|e| e * s2.sqrt()).collect(),
        ..fit
    })
}

/// Quantile of the Student-t distribution; the normal quantile for `dof = 0`
/// is not meaningful, so that case returns infinity.
pub fn t_quantile(p: f64, dof: usize) -> f64 {
    if dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(p))
        .unwrap_or(f64::NAN)
}

/// Two-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic critical value at the requested level.
    pub critical: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
    pub reject: bool,
}

/// Compares two samples at significance `alpha` using the asymptotic
/// Kolmogorov distribution.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "KS test needs two non-empty samples".into(),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let critical = (-(0.5 * alpha).ln() / 2.0).sqrt() / ne.sqrt();
    let p_value = kolmogorov_sf(ne.sqrt() * d);
    Ok(KsResult {
        statistic: d,
        critical,
        p_value,
        reject: d > critical,
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_stream_has_zero_error() {
        let mut b = Batches::new(1, 10);
        for _ in 0..640 {
            b.add(0, 3.5);
            b.end_step(1.0);
        }
        b.finish();
        let e = b.ratio(0);
        assert_eq!(b.n_batches(), 64);
        assert_abs_diff_eq!(e.mean, 3.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e.stderr, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn unit_weights_reduce_to_batch_means() {
        let xs: Vec<f64> = (0..400).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let mut b = Batches::new(1, 25);
        for x in &xs {
            b.add(0, *x);
            b.end_step(1.0);
        }
        b.finish();
        let means: Vec<f64> = xs
            .chunks(25)
            .map(|c| c.iter().sum::<f64>() / 25.0)
            .collect();
        let direct = mean_stderr(&means);
        let e = b.ratio(0);
        assert_abs_diff_eq!(e.mean, direct.mean, epsilon = 1e-14);
        assert_abs_diff_eq!(e.stderr, direct.stderr, epsilon = 1e-14);
    }

    #[test]
    fn merge_rejects_dimension_mismatch() {
        let mut a = Batches::new(2, 4);
        assert!(a.merge(&Batches::new(3, 4)).is_err());
    }

    #[test]
    fn straight_line_fit_is_exact() {
        let x = [0.002, 0.005, 0.01, 0.02];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let fit = wls_poly(&x, &y, &[0.1; 4], 1, true).unwrap();
        assert_abs_diff_eq!(fit.coef[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coef[1], -2.0, epsilon = 1e-10);
        assert!(fit.chi2 < 1e-20);
        // slope error against the textbook formula 1/sqrt(Σ w (x - x̄)²)
        let xbar = x.iter().sum::<f64>() / 4.0;
        let sxx: f64 = x.iter().map(|v| (v - xbar) * (v - xbar) / 0.01).sum();
        assert_abs_diff_eq!(fit.stderr[1], 1.0 / sxx.sqrt(), epsilon = 1e-9);
        let origin = wls_poly(
            &x,
            &y.iter().map(|v| v - 0.5).collect::<Vec<_>>(),
            &[0.1; 4],
            1,
            false,
        )
        .unwrap();
        assert_abs_diff_eq!(origin.slope().mean, -2.0, epsilon = 1e-10);
        let s: f64 = x.iter().map(|v| v * v / 0.01).sum();
        assert_abs_diff_eq!(origin.slope().stderr, 1.0 / s.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(wls_poly(&[1.0], &[1.0], &[1.0], 1, true).is_err());
        assert!(wls_poly(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 0.0], 1, true).is_err());
        assert!(wls_poly(&[1.0, 1.0], &[1.0, 2.0], &[1.0, 1.0], 1, true).is_err());
    }

    #[test]
    fn t_quantiles() {
        // tabulated values
        assert_abs_diff_eq!(t_quantile(0.975, 2), 4.302653, epsilon = 1e-5);
        assert_abs_diff_eq!(t_quantile(0.975, 1000), 1.962339, epsilon = 1e-5);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..1000).map(f64::from).collect();
        let r = ks_two_sample(&a, &a, 0.01).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject);
        let b: Vec<f64> = a.iter().map(|v| v + 200.0).collect();
        let r = ks_two_sample(&a, &b, 0.01).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.2, epsilon = 1e-12);
        assert!(r.reject);
        // c(0.01) = 1.6276 for equal sample sizes n: 1.6276 * sqrt(2/n)
        assert_abs_diff_eq!(
            r.critical,
            1.62762 * (2.0f64 / 1000.0).sqrt(),
            epsilon = 1e-5
        );
    }

    #[test]
    fn kolmogorov_tail_values() {
        // tabulated: P(K > 1.36) ≈ 0.0495, P(K > 1.63) ≈ 0.0098
        assert_abs_diff_eq!(kolmogorov_sf(1.36), 0.0495, epsilon = 5e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.63), 0.0098, epsilon = 3e-4);
    }

    proptest! {
        #[test]
        fn merging_splits_is_bit_exact(xs in prop::collection::vec(-10.0f64..10.0, 64..400), cut in 1usize..63) {
            let batch = 8u64;
            let cut = (cut * batch as usize).min(xs.len());
            let mut whole = Batches::new(2, batch);
            for x in &xs { whole.add(0, *x); whole.add(1, x * x); whole.end_step(1.0); }
            whole.finish();
            let mut left = Batches::new(2, batch);
            for x in &xs[..cut] { left.add(0, *x); left.add(1, x * x); left.end_step(1.0); }
            left.finish();
            let mut right = Batches::new(2, batch);
            for x in &xs[cut..] { right.add(0, *x); right.add(1, x * x); right.end_step(1.0); }
            right.finish();
            left.merge(&right).unwrap();
            prop_assert_eq!(left.ratio(0), whole.ratio(0));
            prop_assert_eq!(left.ratio(1), whole.ratio(1));
            prop_assert_eq!(left.n_steps(), whole.n_steps());
        }

        #[test]
        fn ratio_stderr_is_nonnegative(xs in prop::collection::vec(0.0f64..1.0, 10..200)) {
            let mut b = Batches::new(1, 3);
            for x in &xs { b.add(0, *x); b.end_step(0.5 + x); }
            b.finish();
            prop_assert!(b.ratio(0).stderr >= 0.0);
        }
    }
}
