//! Marginal densities of the steady state and its velocity field.
//!
//! Collision-space marginals (`φ`, `r`) histogram the post-collision
//! coordinates. Phase-space marginals (position, `θ`, velocity) sample each
//! flight on a jittered time grid of step [`SAMPLE_DT`](super::SAMPLE_DT),
//! each sample carrying weight `dt`, so the histograms are occupation times.

use super::{drive, time_samples, Acc, RunSpec, SAMPLE_DT};
use crate::dynamics::Billiard;
use crate::error::{Error, Result};
use crate::stats::Batches;
use crate::vec2::wrap_unit;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Binning of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n_bins: usize,
}

impl Axis {
    pub fn new(name: &str, lo: f64, hi: f64, n_bins: usize) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
            n_bins,
        }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n_bins as f64
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        (self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w)
    }

    pub fn center(&self, i: usize) -> f64 {
        let (a, b) = self.edges(i);
        0.5 * (a + b)
    }

    #[inline]
    pub fn bin(&self, v: f64) -> usize {
        let k = ((v - self.lo) / self.width()).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_bins - 1)
        }
    }
}

/// Normalized histogram with per-bin standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub axis: Axis,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Collisions (or flights) that contributed.
    pub n_samples: u64,
    pub flagged_fraction: f64,
}

impl DensityEstimate {
    fn from_acc(axis: Axis, acc: &Acc) -> Self {
        let w = axis.width();
        let b = &acc.batches;
        let (density, stderr): (Vec<f64>, Vec<f64>) = (0..axis.n_bins)
            .map(|i| {
                let e = b.ratio(i);
                (e.mean / w, e.stderr / w)
            })
            .unzip();
        let n = b.n_steps();
        Self {
            axis,
            density,
            stderr,
            n_samples: n,
            flagged_fraction: if n > 0 {
                acc.flagged as f64 / n as f64
            } else {
                0.0
            },
        }
    }

    /// `Σ density · width`.
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.axis.width()
    }

    /// Largest `|density - f(bin center)|` with `f` averaged over the bin by
    /// Simpson's rule.
    pub fn linf_error(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.axis.n_bins)
            .map(|i| {
                let (a, b) = self.axis.edges(i);
                let exact = (f(a) + 4.0 * f(0.5 * (a + b)) + f(b)) / 6.0;
                (self.density[i] - exact).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|d(v) - d(-v)|` in units of the combined stderr, for axes
    /// symmetric about zero.
    pub fn max_asymmetry_sigma(&self) -> f64 {
        let n = self.axis.n_bins;
        (0..n / 2)
            .map(|i| {
                let j = n - 1 - i;
                let s = self.stderr[i].hypot(self.stderr[j]);
                let d = (self.density[i] - self.density[j]).abs();
                if s > 0.0 {
                    d / s
                } else if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

fn check_bins(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidInput(format!(
            "need at least {min} bins, got {n}"
        )));
    }
    Ok(())
}

/// Histogram of the collision angle `φ` over the trajectory.
pub fn phi_density(billiard: &Billiard, spec: &RunSpec, n_bins: usize) -> Result<DensityEstimate> {
    check_bins(n_bins, 10)?;
    let axis = Axis::new("phi", -FRAC_PI_2, FRAC_PI_2, n_bins);
    collision_histogram(billiard, spec, axis, |_, x| x.phi)
}

/// Histogram of the flattened arclength `r`.
pub fn r_density(billiard: &Billiard, spec: &RunSpec, n_bins: usize) -> Result<DensityEstimate> {
    check_bins(n_bins, 10)?;
    let axis = Axis::new("r", 0.0, billiard.table.boundary_length(), n_bins);
    collision_histogram(billiard, spec, axis, |b, x| b.table.flat_r(x.bc))
}

fn collision_histogram(
    billiard: &Billiard,
    spec: &RunSpec,
    axis: Axis,
    value: impl Fn(&Billiard, &crate::dynamics::CollisionCoord) -> f64 + Sync,
) -> Result<DensityEstimate> {
    let parts = drive(
        billiard,
        spec,
        false,
        |_| Acc::new(axis.n_bins, spec),
        |acc, v, _| {
            // the point reached by the flight, so the histogram is over F(x)
            let y = v.collision.next;
            acc.batches.add(axis.bin(value(billiard, &y)), 1.0);
            acc.batches.end_step(1.0);
            acc.flagged += u64::from(v.collision.grazing);
            Ok(())
        },
    )?;
    Ok(DensityEstimate::from_acc(
        axis.clone(),
        &Acc::merge_all(parts)?,
    ))
}

/// Occupation-time histogram of the direction angle `θ ∈ [-π, π)`.
pub fn theta_density(
    billiard: &Billiard,
    spec: &RunSpec,
    n_bins: usize,
) -> Result<DensityEstimate> {
    check_bins(n_bins, 10)?;
    let axis = Axis::new("theta", -PI, PI, n_bins);
    let parts = drive(
        billiard,
        spec,
        true,
        |_| Acc::new(n_bins, spec),
        |acc, v, rng| {
            let jitter: f64 = rng.random();
            let mut w = 0.0;
            time_samples(v.segments, SAMPLE_DT, jitter, |y| {
                let th = (y[2] + PI).rem_euclid(2.0 * PI) - PI;
                acc.batches.add(axis.bin(th), SAMPLE_DT);
                w += SAMPLE_DT;
            });
            acc.batches.end_step(w);
            acc.flagged += u64::from(v.collision.grazing);
            Ok(())
        },
    )?;
    Ok(DensityEstimate::from_acc(axis, &Acc::merge_all(parts)?))
}

/// Occupation-time density of position on an `n × n` grid, normalized by
/// the free area of each cell so that it integrates to one over the
/// domain. Cells inside a scatterer carry density zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialDensity {
    pub n: usize,
    /// Row-major, `index = iy * n + ix`.
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub free_area: Vec<f64>,
    pub total_time: f64,
    pub n_samples: u64,
    pub flagged_fraction: f64,
}

impl SpatialDensity {
    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let (ix, iy) = (index % self.n, index / self.n);
        (
            (ix as f64 + 0.5) / self.n as f64,
            (iy as f64 + 0.5) / self.n as f64,
        )
    }

    pub fn cell_area(&self) -> f64 {
        1.0 / (self.n * self.n) as f64
    }

    /// `Σ density · free_area`.
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(&self.free_area)
            .map(|(d, a)| d * a)
            .sum()
    }
}

#[inline]
fn cell_index(x: f64, y: f64, n: usize) -> usize {
    let ix = ((wrap_unit(x) * n as f64) as usize).min(n - 1);
    let iy = ((wrap_unit(y) * n as f64) as usize).min(n - 1);
    iy * n + ix
}

fn free_areas(billiard: &Billiard, n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    (0..n * n)
        .map(|k| {
            let (ix, iy) = (k % n, k / n);
            let (x0, y0) = (ix as f64 * h, iy as f64 * h);
            billiard.table.free_area_in_rect(x0, x0 + h, y0, y0 + h)
        })
        .collect()
}

/// Below this free area a cell counts as covered.
const COVERED_AREA: f64 = 1e-15;

pub fn spatial_density(billiard: &Billiard, spec: &RunSpec, n: usize) -> Result<SpatialDensity> {
    check_bins(n, 10)?;
    let parts = drive(
        billiard,
        spec,
        true,
        |_| Acc::new(n * n, spec),
        |acc, v, rng| {
            let jitter: f64 = rng.random();
            let mut w = 0.0;
            time_samples(v.segments, SAMPLE_DT, jitter, |y| {
                acc.batches.add(cell_index(y[0], y[1], n), SAMPLE_DT);
                w += SAMPLE_DT;
            });
            acc.batches.end_step(w);
            acc.flagged += u64::from(v.collision.grazing);
            Ok(())
        },
    )?;
    let acc = Acc::merge_all(parts)?;
    let free_area = free_areas(billiard, n);
    let b = &acc.batches;
    let (density, stderr): (Vec<f64>, Vec<f64>) = (0..n * n)
        .map(|k| {
            if free_area[k] < COVERED_AREA {
                return (0.0, 0.0);
            }
            let e = b.ratio(k);
            (e.mean / free_area[k], e.stderr / free_area[k])
        })
        .unzip();
    let steps = b.n_steps();
    Ok(SpatialDensity {
        n,
        density,
        stderr,
        free_area,
        total_time: b.total_weight(),
        n_samples: steps,
        flagged_fraction: if steps > 0 {
            acc.flagged as f64 / steps as f64
        } else {
            0.0
        },
    })
}

/// Time-averaged velocity per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityFieldGrid {
    pub n: usize,
    /// Fraction of the total time spent in the cell.
    pub weight: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v1_stderr: Vec<f64>,
    pub v2_stderr: Vec<f64>,
    /// Time samples that fell in the cell.
    pub counts: Vec<u64>,
    /// Cells with fewer than `min_samples` samples; their velocities are NaN.
    pub insufficient: Vec<bool>,
    pub min_samples: u64,
    pub n_samples: u64,
    pub flagged_fraction: f64,
}

impl VelocityFieldGrid {
    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let (ix, iy) = (index % self.n, index / self.n);
        (
            (ix as f64 + 0.5) / self.n as f64,
            (iy as f64 + 0.5) / self.n as f64,
        )
    }
}

struct FieldAcc {
    acc: Acc,
    counts: Vec<u64>,
    // global components: time, v1·dt, v2·dt
    global: Batches,
}

/// Global mean velocity from the same samples as the field, for symmetry
/// checks: `(v̄₁, v̄₂)` with stderr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVelocity {
    pub v1: crate::stats::Estimate,
    pub v2: crate::stats::Estimate,
}

pub fn velocity_field(
    billiard: &Billiard,
    spec: &RunSpec,
    n: usize,
    min_samples: u64,
) -> Result<(VelocityFieldGrid, MeanVelocity)> {
    check_bins(n, 10)?;
    let cells = n * n;
    let parts = drive(
        billiard,
        spec,
        true,
        |_| FieldAcc {
            acc: Acc::new(3 * cells, spec),
            counts: vec![0; cells],
            global: Batches::new(2, spec.batch_len()),
        },
        |fa, v, rng| {
            let jitter: f64 = rng.random();
            let mut w = 0.0;
            let model = &billiard.model;
            time_samples(v.segments, SAMPLE_DT, jitter, |y| {
                let k = cell_index(y[0], y[1], n);
                let p = model.speed(y[0], y[1], y[2]);
                let (s, c) = y[2].sin_cos();
                fa.acc.batches.add(3 * k, SAMPLE_DT);
                fa.acc.batches.add(3 * k + 1, p * c * SAMPLE_DT);
                fa.acc.batches.add(3 * k + 2, p * s * SAMPLE_DT);
                fa.global.add(0, p * c * SAMPLE_DT);
                fa.global.add(1, p * s * SAMPLE_DT);
                fa.counts[k] += 1;
                w += SAMPLE_DT;
            });
            fa.acc.batches.end_step(w);
            fa.global.end_step(w);
            fa.acc.flagged += u64::from(v.collision.grazing);
            Ok(())
        },
    )?;
    let mut counts = vec![0u64; cells];
    let mut accs = Vec::with_capacity(parts.len());
    let mut global = Batches::new(2, spec.batch_len());
    for (i, p) in parts.into_iter().enumerate() {
        for (c, k) in counts.iter_mut().zip(&p.counts) {
            *c += k;
        }
        let mut g = p.global;
        g.finish();
        if i == 0 {
            global = g;
        } else {
            global.merge(&g)?;
        }
        accs.push(p.acc);
    }
    let acc = Acc::merge_all(accs)?;
    let b = &acc.batches;
    let total = b.total_weight();
    let mut grid = VelocityFieldGrid {
        n,
        weight: Vec::with_capacity(cells),
        v1: Vec::with_capacity(cells),
        v2: Vec::with_capacity(cells),
        v1_stderr: Vec::with_capacity(cells),
        v2_stderr: Vec::with_capacity(cells),
        counts,
        insufficient: Vec::with_capacity(cells),
        min_samples,
        n_samples: b.n_steps(),
        flagged_fraction: if b.n_steps() > 0 {
            acc.flagged as f64 / b.n_steps() as f64
        } else {
            0.0
        },
    };
    for k in 0..cells {
        let t = b.total(3 * k);
        grid.weight.push(if total > 0.0 { t / total } else { 0.0 });
        let poor = grid.counts[k] < min_samples.max(1);
        grid.insufficient.push(poor);
        if poor {
            grid.v1.push(f64::NAN);
            grid.v2.push(f64::NAN);
            grid.v1_stderr.push(f64::NAN);
            grid.v2_stderr.push(f64::NAN);
        } else {
            let e1 = b.component_ratio(3 * k + 1, 3 * k);
            let e2 = b.component_ratio(3 * k + 2, 3 * k);
            grid.v1.push(e1.mean);
            grid.v2.push(e2.mean);
            grid.v1_stderr.push(e1.stderr);
            grid.v2_stderr.push(e2.stderr);
        }
    }
    let mean = MeanVelocity {
        v1: global.ratio(0),
        v2: global.ratio(1),
    };
    Ok((grid, mean))
}
