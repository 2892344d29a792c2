//! Kawasaki series `ν_ε(f) = ν₀(f) + ε Σ_{k≥1} ν₀((f∘F_ε^k) Δ_ε)`.
//!
//! Each `ν₀` sample `X` contributes the products `f(F^k X)·Δ(X)` for
//! `k = 1..K_max`. Only running sums are kept (of the products, of their
//! partial sums over `k`, of their squares and of the cross terms with
//! `f(X)`), so any truncation's estimate and error can be read off at the
//! end without storing samples.

use super::{delta_0, delta_eps, Flag, JacobianConfig};
use crate::dynamics::{Billiard, ForceModel, Segment};
use crate::error::{Error, Result};
use crate::measure::{
    birkhoff_map_averages, sample_nu0, AverageEstimate, MapObservable, RunSpec, Visit,
};
use crate::rng::{stream, Purpose};
use crate::stats::{ols_line, Estimate};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How the weight `Δ(X)` of a sample is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `Δ_ε` of the family member at this field.
    Eps(f64),
    /// `Δ₀` by extrapolation.
    Zero,
}

/// Member of the model family at field `epsilon`; the zero field uses the
/// exact straight-line flights.
pub fn family_member(billiard: &Billiard, epsilon: f64) -> Billiard {
    if epsilon == 0.0 && billiard.model.field_direction().is_some() {
        billiard.with_model(ForceModel::Zero)
    } else {
        billiard.with_model(billiard.model.with_epsilon(epsilon))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KawasakiTerm {
    pub k: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default)]
struct Sums {
    n: u64,
    f: f64,
    f2: f64,
    // per k
    p: Vec<f64>,
    p2: Vec<f64>,
    // partial sums S_K = Σ_{k≤K} p_k
    s: Vec<f64>,
    s2: Vec<f64>,
    fs: Vec<f64>,
}

impl Sums {
    fn new(k_max: usize) -> Self {
        Self {
            p: vec![0.0; k_max],
            p2: vec![0.0; k_max],
            s: vec![0.0; k_max],
            s2: vec![0.0; k_max],
            fs: vec![0.0; k_max],
            ..Default::default()
        }
    }

    fn merge(&mut self, o: &Sums) {
        self.n += o.n;
        self.f += o.f;
        self.f2 += o.f2;
        for (a, b) in [
            (&mut self.p, &o.p),
            (&mut self.p2, &o.p2),
            (&mut self.s, &o.s),
            (&mut self.s2, &o.s2),
            (&mut self.fs, &o.fs),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

fn mean_err(sum: f64, sum2: f64, n: u64) -> Estimate {
    let nf = n as f64;
    let m = sum / nf;
    let var = ((sum2 - nf * m * m) / (nf - 1.0)).max(0.0);
    Estimate::new(m, (var / nf).sqrt())
}

/// Raw series estimates for a list of observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub k_max: usize,
    /// `ν̂₀(f)` per observable, over the unflagged samples.
    pub nu0: Vec<Estimate>,
    /// Terms `T_k`, `k = 1..k_max`, per observable.
    pub terms: Vec<Vec<KawasakiTerm>>,
    /// `Σ_{k≤K} T_k` for `K = 1..k_max`, per observable.
    pub partial_sums: Vec<Vec<Estimate>>,
    /// `ν̂₀(f) + c Σ_{k≤K} T_k` for the `c` passed to [`kawasaki_terms`].
    pub combined: Vec<Vec<Estimate>>,
    pub n_samples: u64,
    pub n_used: u64,
    pub flags: BTreeMap<String, u64>,
}

impl SeriesEstimate {
    pub fn flagged_fraction(&self) -> f64 {
        1.0 - self.n_used as f64 / self.n_samples.max(1) as f64
    }
}

/// Series terms from `n_samples` draws of `ν₀`, iterating `dynamics` and
/// weighting by `weight`. `coefficient` is the `c` of
/// [`SeriesEstimate::combined`].
#[allow(clippy::too_many_arguments)]
pub fn kawasaki_terms(
    family: &Billiard,
    dynamics: &Billiard,
    weight: Weight,
    fs: &[MapObservable],
    n_samples: u64,
    k_max: usize,
    seed: u64,
    workers: usize,
    cfg: &JacobianConfig,
    coefficient: f64,
) -> Result<SeriesEstimate> {
    if k_max == 0 || fs.is_empty() || n_samples < 2 || workers == 0 {
        return Err(Error::InvalidInput(
            "series needs k_max >= 1, observables, n_samples >= 2, workers >= 1".into(),
        ));
    }
    cfg.validate()?;
    let with_path = fs.iter().any(|f| f.needs_path());
    let run = |w: usize| -> Result<(Vec<Sums>, BTreeMap<String, u64>)> {
        let n_w = n_samples / workers as u64 + u64::from((w as u64) < n_samples % workers as u64);
        let mut rng = stream(seed, w as u64, Purpose::SeriesSide);
        let mut sums = vec![Sums::new(k_max); fs.len()];
        let mut flags = BTreeMap::new();
        let mut segs: Vec<Segment> = Vec::new();
        let mut fx = vec![0.0; fs.len()];
        let mut partial = vec![0.0; fs.len()];
        for i in 0..n_w {
            let x = sample_nu0(&family.table, &mut rng);
            let d = match weight {
                Weight::Eps(e) => delta_eps(family, x, e, cfg),
                Weight::Zero => delta_0(family, x, cfg).map(|r| r.map(|d| d.value)),
            }
            .map_err(|e| Error::aborted(i, e))?;
            let d = match d {
                Ok(v) => v,
                Err(flag) => {
                    *flags.entry(flag_name(flag)).or_insert(0) += 1;
                    continue;
                }
            };
            let mut y = x;
            partial.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..=k_max {
                segs.clear();
                let c = if with_path {
                    let mut push = |s: &Segment| segs.push(*s);
                    dynamics.collision_map_observed(y, Some(&mut push))
                } else {
                    dynamics.collision_map(y)
                }
                .map_err(|e| Error::aborted(i, e))?;
                let visit = Visit {
                    x: y,
                    collision: &c,
                    segments: &segs,
                };
                for (j, f) in fs.iter().enumerate() {
                    let v = f.eval(dynamics, &visit).map_err(|e| Error::aborted(i, e))?;
                    let s = &mut sums[j];
                    if k == 0 {
                        fx[j] = v;
                        s.f += v;
                        s.f2 += v * v;
                    } else {
                        let p = v * d;
                        partial[j] += p;
                        s.p[k - 1] += p;
                        s.p2[k - 1] += p * p;
                        s.s[k - 1] += partial[j];
                        s.s2[k - 1] += partial[j] * partial[j];
                        s.fs[k - 1] += fx[j] * partial[j];
                    }
                }
                if k == k_max {
                    break;
                }
                y = c.next;
            }
            for s in sums.iter_mut() {
                s.n += 1;
            }
        }
        Ok((sums, flags))
    };
    let parts: Vec<(Vec<Sums>, BTreeMap<String, u64>)> = if workers == 1 {
        vec![run(0)?]
    } else {
        let run = &run;
        std::thread::scope(|scope| {
            let hs: Vec<_> = (0..workers).map(|w| scope.spawn(move || run(w))).collect();
            hs.into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::Integration("worker panicked".into())))
                })
                .collect::<Result<Vec<_>>>()
        })?
    };
    let mut total = vec![Sums::new(k_max); fs.len()];
    let mut flags = BTreeMap::new();
    for (sums, fl) in &parts {
        for (t, s) in total.iter_mut().zip(sums) {
            t.merge(s);
        }
        for (k, v) in fl {
            *flags.entry(k.clone()).or_insert(0) += v;
        }
    }
    let n = total[0].n;
    if n < 2 {
        return Err(Error::InvalidInput(format!("only {n} unflagged samples")));
    }
    let nf = n as f64;
    let mut out = SeriesEstimate {
        k_max,
        nu0: Vec::new(),
        terms: Vec::new(),
        partial_sums: Vec::new(),
        combined: Vec::new(),
        n_samples,
        n_used: n,
        flags,
    };
    for t in &total {
        out.nu0.push(mean_err(t.f, t.f2, n));
        out.terms.push(
            (0..k_max)
                .map(|k| {
                    let e = mean_err(t.p[k], t.p2[k], n);
                    KawasakiTerm {
                        k: k + 1,
                        value: e.mean,
                        stderr: e.stderr,
                    }
                })
                .collect(),
        );
        out.partial_sums
            .push((0..k_max).map(|k| mean_err(t.s[k], t.s2[k], n)).collect());
        let c = coefficient;
        out.combined.push(
            (0..k_max)
                .map(|k| {
                    // z = f + c S_K
                    let sz = t.f + c * t.s[k];
                    let sz2 = t.f2 + 2.0 * c * t.fs[k] + c * c * t.s2[k];
                    let m = sz / nf;
                    let var = ((sz2 - nf * m * m) / (nf - 1.0)).max(0.0);
                    Estimate::new(m, (var / nf).sqrt())
                })
                .collect(),
        );
    }
    Ok(out)
}

fn flag_name(f: Flag) -> String {
    match f {
        Flag::Grazing => "grazing",
        Flag::BranchCrossing => "branch_crossing",
        Flag::Richardson => "richardson",
    }
    .to_string()
}

/// First `K` at which three consecutive terms are below twice their
/// standard error, or `k_max` when that never happens.
pub fn truncation(terms: &[KawasakiTerm]) -> (usize, bool) {
    let mut run = 0;
    for t in terms {
        if t.value.abs() < 2.0 * t.stderr {
            run += 1;
            if run == 3 {
                return (t.k, true);
            }
        } else {
            run = 0;
        }
    }
    (terms.len(), false)
}

/// Least-squares slope of `ln|T_k|` against `k` over the kept terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub slope: Estimate,
    /// `|T_1|` exceeds three standard errors, i.e. the series carries signal
    /// and the trend is not a fit to noise.
    pub signal: bool,
}

pub fn trend(terms: &[KawasakiTerm], upto: usize) -> Option<Trend> {
    let kept: Vec<&KawasakiTerm> = terms
        .iter()
        .take(upto.max(3))
        .filter(|t| t.value != 0.0)
        .collect();
    if kept.len() < 3 {
        return None;
    }
    let x: Vec<f64> = kept.iter().map(|t| t.k as f64).collect();
    let y: Vec<f64> = kept.iter().map(|t| t.value.abs().ln()).collect();
    let fit = ols_line(&x, &y).ok()?;
    Some(Trend {
        slope: fit.slope(),
        signal: terms[0].value.abs() > 3.0 * terms[0].stderr,
    })
}

/// Settings of a Kawasaki check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KawasakiSpec {
    pub epsilon: f64,
    /// `ν₀` samples on the series side.
    pub n_samples: u64,
    pub k_max: usize,
    pub jacobian: JacobianConfig,
    /// Direct side: collisions, burn-in, seed, workers. The series side
    /// uses the same seed on independent streams.
    pub direct: RunSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KawasakiReport {
    pub epsilon: f64,
    pub observable: String,
    pub nu0_f: Estimate,
    pub terms: Vec<KawasakiTerm>,
    pub truncation: usize,
    /// The noise-floor rule fired before `k_max`.
    pub converged: bool,
    pub series_sum: Estimate,
    pub rhs: Estimate,
    pub lhs: AverageEstimate,
    /// `|LHS - RHS|` in combined standard errors.
    pub discrepancy_sigma: f64,
    pub trend: Option<Trend>,
    pub n_samples: u64,
    pub flagged_fraction: f64,
    pub flags: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
    pub seed: u64,
}

/// Checks the Kawasaki identity for each observable in `fs`.
pub fn kawasaki(
    billiard: &Billiard,
    fs: &[MapObservable],
    spec: &KawasakiSpec,
) -> Result<Vec<KawasakiReport>> {
    if !(spec.epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "ε must be >= 0, got {}",
            spec.epsilon
        )));
    }
    let member = family_member(billiard, spec.epsilon);
    let lhs = birkhoff_map_averages(&member, fs, &spec.direct)?;
    let seed = spec.direct.seed;
    if spec.epsilon == 0.0 {
        // no series: RHS is the plain ν₀ average
        let est = nu0_only(&member, fs, spec.n_samples, seed, spec.direct.workers)?;
        return Ok(fs
            .iter()
            .zip(est)
            .zip(lhs)
            .map(|((f, nu0), lhs)| KawasakiReport {
                epsilon: 0.0,
                observable: f.name(),
                nu0_f: nu0,
                terms: Vec::new(),
                truncation: 0,
                converged: true,
                series_sum: Estimate::new(0.0, 0.0),
                rhs: nu0,
                discrepancy_sigma: lhs.estimate().discrepancy(&nu0),
                lhs,
                trend: None,
                n_samples: spec.n_samples,
                flagged_fraction: 0.0,
                flags: BTreeMap::new(),
                warnings: Vec::new(),
                seed,
            })
            .collect());
    }
    let series = kawasaki_terms(
        billiard,
        &member,
        Weight::Eps(spec.epsilon),
        fs,
        spec.n_samples,
        spec.k_max,
        seed,
        spec.direct.workers,
        &spec.jacobian,
        spec.epsilon,
    )?;
    let flagged = series.flagged_fraction();
    Ok(fs
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let terms = series.terms[j].clone();
            let (k, converged) = truncation(&terms);
            let rhs = series.combined[j][k - 1];
            let mut warnings = Vec::new();
            if flagged > 0.05 {
                warnings.push(format!(
                    "{:.1}% of samples flagged; the series may be biased",
                    100.0 * flagged
                ));
            }
            if !converged {
                warnings.push(format!(
                    "terms did not reach the noise floor by k = {}",
                    spec.k_max
                ));
            }
            KawasakiReport {
                epsilon: spec.epsilon,
                observable: f.name(),
                nu0_f: series.nu0[j],
                trend: trend(&terms, k),
                series_sum: series.partial_sums[j][k - 1],
                terms,
                truncation: k,
                converged,
                rhs,
                discrepancy_sigma: lhs[j].estimate().discrepancy(&rhs),
                lhs: lhs[j],
                n_samples: spec.n_samples,
                flagged_fraction: flagged,
                flags: series.flags.clone(),
                warnings,
                seed,
            }
        })
        .collect())
}

fn nu0_only(
    b: &Billiard,
    fs: &[MapObservable],
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<Estimate>> {
    let mut rng = stream(seed, workers as u64, Purpose::Nu0Samples);
    let mut sums = vec![(0.0, 0.0); fs.len()];
    for _ in 0..n {
        let x = sample_nu0(&b.table, &mut rng);
        for (j, f) in fs.iter().enumerate() {
            let v = f.eval_at(b, x)?;
            sums[j].0 += v;
            sums[j].1 += v * v;
        }
    }
    Ok(sums.into_iter().map(|(s, s2)| mean_err(s, s2, n)).collect())
}
