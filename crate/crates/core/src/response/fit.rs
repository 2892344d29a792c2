//! Linear response across a grid of fields, and the conductivity.

use super::kawasaki::{family_member, kawasaki_terms, truncation, KawasakiTerm, Weight};
use super::JacobianConfig;
use crate::dynamics::Billiard;
use crate::error::{Error, Result};
use crate::measure::{birkhoff_map_average, current, AverageEstimate, MapObservable, RunSpec};
use crate::rng::derive_seed;
use crate::stats::{wls_poly, Estimate, PolyFit};
use serde::{Deserialize, Serialize};

/// Coefficient size, in standard errors, beyond which the quadratic term
/// counts as detected.
const NONLINEAR_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub eps_grid: Vec<f64>,
    /// Per-field direct run; the seed of field `i` is derived from
    /// `run.seed` and `i`.
    pub run: RunSpec,
    /// `ν₀` samples for the series slope.
    pub n_samples: u64,
    pub k_max: usize,
    pub jacobian: JacobianConfig,
}

impl ResponseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "need at least 4 fields, got {}",
                self.eps_grid.len()
            )));
        }
        if self.eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidInput(
                "fields must be positive and finite".into(),
            ));
        }
        let mut g = self.eps_grid.clone();
        g.sort_by(f64::total_cmp);
        if g.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("fields must be distinct".into()));
        }
        self.run.validate()?;
        self.jacobian.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub epsilon: f64,
    pub nu_f: AverageEstimate,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseReport {
    pub observable: String,
    pub points: Vec<ResponsePoint>,
    pub fit: PolyFit,
    pub slope: Estimate,
    pub slope_ci95: (f64, f64),
    pub intercept: Estimate,
    pub intercept_ci95: (f64, f64),
    /// `ε²` coefficient of a quadratic fit.
    pub quadratic: Estimate,
    pub nonlinear: bool,
    pub recommendation: Option<String>,
    /// `ν̂₀(f)` from the series samples.
    pub nu0_f: Estimate,
    pub intercept_consistent: bool,
    pub series_terms: Vec<KawasakiTerm>,
    pub truncation: usize,
    pub series_slope: Estimate,
    /// Fitted slope over series slope.
    pub agreement_ratio: f64,
    pub slope_discrepancy_sigma: f64,
    pub series_flagged_fraction: f64,
}

fn ci_halfwidth(fit: &PolyFit, i: usize) -> f64 {
    let (lo, hi) = fit.ci(i, 0.95);
    0.5 * (hi - lo)
}

/// Fits `ν_ε(f) ≈ ν₀(f) + ε·slope` over the grid and compares the slope
/// with the zero-field series `Σ_k ν₀((f∘F₀^k) Δ₀)`.
pub fn linear_response_fit(
    billiard: &Billiard,
    f: MapObservable,
    spec: &ResponseSpec,
) -> Result<ResponseReport> {
    spec.validate()?;
    if billiard.model.field_direction().is_none() {
        return Err(Error::InvalidInput(
            "linear response needs a thermostat model family".into(),
        ));
    }
    let mut points = Vec::with_capacity(spec.eps_grid.len());
    for (i, &eps) in spec.eps_grid.iter().enumerate() {
        let seed = derive_seed(spec.run.seed, i as u64);
        let run = RunSpec { seed, ..spec.run };
        let nu_f = birkhoff_map_average(&family_member(billiard, eps), f, &run)?;
        points.push(ResponsePoint {
            epsilon: eps,
            nu_f,
            seed,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let y: Vec<f64> = points.iter().map(|p| p.nu_f.mean).collect();
    let s: Vec<f64> = points.iter().map(|p| p.nu_f.stderr).collect();
    let fit = wls_poly(&x, &y, &s, 1, true)?;
    let quad = wls_poly(&x, &y, &s, 2, true)?;
    let quadratic = Estimate::new(quad.coef[2], quad.stderr[2]);
    let nonlinear = quadratic.mean.abs() > NONLINEAR_SIGMA * quadratic.stderr;
    let eps_max = x.iter().copied().fold(0.0, f64::max);
    let recommendation = nonlinear.then(|| {
        format!(
            "curvature detected; restrict the grid below ε = {:.3e}",
            0.5 * eps_max
        )
    });

    let zero = family_member(billiard, 0.0);
    let series = kawasaki_terms(
        billiard,
        &zero,
        Weight::Zero,
        &[f],
        spec.n_samples,
        spec.k_max,
        derive_seed(spec.run.seed, u64::MAX),
        spec.run.workers,
        &spec.jacobian,
        0.0,
    )?;
    let terms = series.terms[0].clone();
    let (k, _) = truncation(&terms);
    let series_slope = series.partial_sums[0][k - 1];
    let nu0_f = series.nu0[0];
    let slope = fit.slope();
    let intercept = fit.intercept().expect("fit has an intercept");
    let q = ci_halfwidth(&fit, 0) / intercept.stderr;
    let intercept_consistent =
        (intercept.mean - nu0_f.mean).abs() <= q * intercept.stderr.hypot(nu0_f.stderr);
    Ok(ResponseReport {
        observable: f.name(),
        points,
        slope_ci95: fit.ci(1, 0.95),
        intercept_ci95: fit.ci(0, 0.95),
        slope,
        intercept,
        quadratic,
        nonlinear,
        recommendation,
        nu0_f,
        intercept_consistent,
        series_terms: terms,
        truncation: k,
        series_slope,
        agreement_ratio: slope.mean / series_slope.mean,
        slope_discrepancy_sigma: slope.discrepancy(&series_slope),
        series_flagged_fraction: series.flagged_fraction(),
        fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityPoint {
    pub epsilon: f64,
    pub j1: AverageEstimate,
    pub j2: AverageEstimate,
    pub mean_tau: AverageEstimate,
    /// `J₁/ε`.
    pub ratio: Estimate,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivityReport {
    pub points: Vec<ConductivityPoint>,
    /// Slope of `J₁` through the origin.
    pub sigma: Estimate,
    pub sigma_ci95: (f64, f64),
    /// Slope of `J₂` through the origin; zero for an isotropic response.
    pub transverse: Estimate,
    /// Largest pairwise disagreement of `J₁/ε`, in combined standard errors.
    pub max_pairwise_sigma: f64,
    pub pairwise_consistent: bool,
    /// `ε²` coefficient of `J₁ ≈ σε + cε²`.
    pub quadratic: Estimate,
    pub nonlinear: bool,
    pub recommendation: Option<String>,
}

/// Conductivity from the current on a grid of positive fields.
pub fn conductivity(
    billiard: &Billiard,
    eps_grid: &[f64],
    run: &RunSpec,
) -> Result<ConductivityReport> {
    if eps_grid.len() < 2 || eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidInput(
            "conductivity needs at least 2 positive fields".into(),
        ));
    }
    if billiard.model.field_direction().is_none() {
        return Err(Error::InvalidInput(
            "conductivity needs a thermostat model family".into(),
        ));
    }
    run.validate()?;
    let mut points = Vec::with_capacity(eps_grid.len());
    for (i, &eps) in eps_grid.iter().enumerate() {
        let seed = derive_seed(run.seed, i as u64);
        let c = current(&family_member(billiard, eps), &RunSpec { seed, ..*run })?;
        points.push(ConductivityPoint {
            epsilon: eps,
            ratio: c.j1.estimate().scaled(1.0 / eps),
            j1: c.j1,
            j2: c.j2,
            mean_tau: c.mean_tau,
            seed,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let s1: Vec<f64> = points.iter().map(|p| p.j1.stderr).collect();
    let y1: Vec<f64> = points.iter().map(|p| p.j1.mean).collect();
    let y2: Vec<f64> = points.iter().map(|p| p.j2.mean).collect();
    let s2: Vec<f64> = points.iter().map(|p| p.j2.stderr).collect();
    let fit = wls_poly(&x, &y1, &s1, 1, false)?;
    let transverse = wls_poly(&x, &y2, &s2, 1, false)?.slope();
    let mut max_pairwise: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            max_pairwise = max_pairwise.max(a.ratio.discrepancy(&b.ratio));
        }
    }
    let (quadratic, nonlinear) = if points.len() >= 3 {
        let q = wls_poly(&x, &y1, &s1, 2, false)?;
        let e = Estimate::new(q.coef[1], q.stderr[1]);
        (e, e.mean.abs() > NONLINEAR_SIGMA * e.stderr)
    } else {
        (Estimate::new(f64::NAN, f64::NAN), false)
    };
    let eps_max = x.iter().copied().fold(0.0, f64::max);
    Ok(ConductivityReport {
        sigma: fit.slope(),
        sigma_ci95: fit.ci(0, 0.95),
        transverse,
        pairwise_consistent: max_pairwise <= 3.0,
        max_pairwise_sigma: max_pairwise,
        quadratic,
        nonlinear,
        recommendation: nonlinear.then(|| {
            format!(
                "curvature detected; restrict the grid below ε = {:.3e}",
                0.5 * eps_max
            )
        }),
        points,
    })
}
