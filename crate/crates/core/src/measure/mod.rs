//! Equilibrium sampling and ergodic averages.
//!
//! Everything here runs one long trajectory per worker. Worker `w` draws its
//! initial condition from `ν₀` on the stream `(seed, w, Trajectory)`, drops
//! `burn_in` collisions, then feeds every collision to an accumulator. The
//! per-worker accumulators are merged in worker order, which makes results a
//! function of `(seed, workers)` alone.
//!
//! Map averages estimate `ν_ε(f)`. Flow averages estimate `μ_ε(F)` through
//! the suspension identity `μ(F) = ν(∫₀^τ F dt) / ν(τ)`, with the inner
//! integral done by Gauss–Legendre quadrature on the flight segments.

mod density;
mod strips;

pub use density::{
    phi_density, r_density, spatial_density, theta_density, velocity_field, Axis, DensityEstimate,
    MeanVelocity, SpatialDensity, VelocityFieldGrid,
};
pub use strips::{classify_homogeneity, strip_census, Strip, StripCensus};

use crate::dynamics::{Billiard, Collision, CollisionCoord, Segment};
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::rng::{self, open01, Purpose, StreamRng};
use crate::stats::{Batches, Estimate};
use crate::vec2::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Time step of the sampling grid used for indicator-type observables.
pub const SAMPLE_DT: f64 = 0.01;

/// Draws a point from the billiard equilibrium measure `ν₀ ∝ cos φ dr dφ`.
pub fn sample_nu0<R: Rng + ?Sized>(table: &Table, rng: &mut R) -> CollisionCoord {
    let u_r: f64 = rng.random();
    let u_phi = open01(rng);
    nu0_from_uniforms(table, u_r, u_phi)
}

/// Inverse-CDF map from two uniforms to `ν₀`: `r` uniform on the flattened
/// boundary (so discs are chosen by circumference) and `φ = arcsin(2u - 1)`.
pub fn nu0_from_uniforms(table: &Table, u_r: f64, u_phi: f64) -> CollisionCoord {
    let bc = table.from_flat_r(u_r * table.boundary_length());
    CollisionCoord {
        bc: table.normalize(bc),
        phi: (2.0 * u_phi - 1.0).clamp(-1.0, 1.0).asin(),
    }
}

/// Sizes and seeding of a trajectory run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    /// Collisions after burn-in, summed over workers.
    pub n_collisions: u64,
    /// Collisions discarded by each worker before accumulating.
    pub burn_in: u64,
    pub seed: u64,
    pub workers: usize,
    pub n_batches: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            n_collisions: 1_000_000,
            burn_in: 1_000,
            seed: 0,
            workers: 1,
            n_batches: 64,
        }
    }
}

impl RunSpec {
    pub fn new(n_collisions: u64, seed: u64) -> Self {
        Self {
            n_collisions,
            seed,
            ..Self::default()
        }
    }

    /// Collisions needed for roughly `flow_time` units of flight time given
    /// a mean free time `tau_mean`.
    pub fn for_flow_time(flow_time: f64, tau_mean: f64, seed: u64) -> Self {
        Self::new((flow_time / tau_mean).ceil() as u64, seed)
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self { workers, ..self }
    }

    pub fn with_burn_in(self, burn_in: u64) -> Self {
        Self { burn_in, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_collisions == 0 {
            return Err(Error::InvalidInput("n_collisions must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidInput("workers must be >= 1".into()));
        }
        if self.n_batches < 2 {
            return Err(Error::InvalidInput("n_batches must be >= 2".into()));
        }
        if (self.n_collisions / self.workers as u64) < self.n_batches / self.workers as u64 {
            return Err(Error::InvalidInput("fewer collisions than batches".into()));
        }
        Ok(())
    }

    fn share(&self, worker: usize) -> u64 {
        let w = self.workers as u64;
        let base = self.n_collisions / w;
        base + u64::from((worker as u64) < self.n_collisions % w)
    }

    /// Steps per batch so that the whole run has about `n_batches` batches.
    pub fn batch_len(&self) -> u64 {
        (self.n_collisions / self.n_batches).max(1)
    }
}

/// Estimate of an ergodic average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub n_batches: u64,
    /// Share of collisions whose arrival was grazing.
    pub flagged_fraction: f64,
}

impl AverageEstimate {
    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mean, self.stderr)
    }

    fn from_batches(b: &Batches, component: usize, flagged: u64) -> Self {
        let e = b.ratio(component);
        Self::from_parts(e, b, flagged)
    }

    fn from_parts(e: Estimate, b: &Batches, flagged: u64) -> Self {
        let n = b.n_steps();
        Self {
            mean: e.mean,
            stderr: e.stderr,
            n_samples: n,
            n_batches: b.n_batches() as u64,
            flagged_fraction: if n > 0 {
                flagged as f64 / n as f64
            } else {
                0.0
            },
        }
    }
}

/// One collision seen by an accumulator: the point `x`, the flight leaving
/// it, and (when requested) the flight path.
pub struct Visit<'a> {
    pub x: CollisionCoord,
    pub collision: &'a Collision,
    pub segments: &'a [Segment],
}

/// Runs one trajectory per worker and returns the accumulators in worker
/// order. `init(worker)` builds an empty accumulator.
pub fn drive<A, I, V>(
    billiard: &Billiard,
    spec: &RunSpec,
    with_path: bool,
    init: I,
    visit: V,
) -> Result<Vec<A>>
where
    A: Send,
    I: Fn(usize) -> A + Sync,
    V: Fn(&mut A, &Visit<'_>, &mut StreamRng) -> Result<()> + Sync,
{
    spec.validate()?;
    let run = |w: usize| -> Result<A> {
        let mut rng = rng::stream(spec.seed, w as u64, Purpose::Trajectory);
        let mut acc = init(w);
        let mut x = sample_nu0(&billiard.table, &mut rng);
        for i in 0..spec.burn_in {
            x = billiard
                .collision_map(x)
                .map_err(|e| Error::aborted(i, e))?
                .next;
        }
        let mut segs: Vec<Segment> = Vec::new();
        for i in 0..spec.share(w) {
            segs.clear();
            let c = if with_path {
                let mut push = |s: &Segment| segs.push(*s);
                billiard.collision_map_observed(x, Some(&mut push))
            } else {
                billiard.collision_map(x)
            }
            .map_err(|e| Error::aborted(spec.burn_in + i, e))?;
            visit(
                &mut acc,
                &Visit {
                    x,
                    collision: &c,
                    segments: &segs,
                },
                &mut rng,
            )
            .map_err(|e| Error::aborted(spec.burn_in + i, e))?;
            x = c.next;
        }
        Ok(acc)
    };
    if spec.workers == 1 {
        return Ok(vec![run(0)?]);
    }
    let run = &run;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..spec.workers)
            .map(|w| scope.spawn(move || run(w)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Integration("worker panicked".into())))
            })
            .collect()
    })
}

/// Batch accumulator plus a grazing counter, the common accumulator shape.
pub(crate) struct Acc {
    pub batches: Batches,
    pub flagged: u64,
}

impl Acc {
    pub fn new(dim: usize, spec: &RunSpec) -> Self {
        Self {
            batches: Batches::new(dim, spec.batch_len()),
            flagged: 0,
        }
    }

    pub fn merge_all(parts: Vec<Acc>) -> Result<Acc> {
        let mut it = parts.into_iter();
        let mut first = it
            .next()
            .ok_or_else(|| Error::InvalidInput("no workers".into()))?;
        first.batches.finish();
        for mut p in it {
            p.batches.finish();
            first.batches.merge(&p.batches)?;
            first.flagged += p.flagged;
        }
        Ok(first)
    }
}

/// Smooth observables on the phase space, integrated along flights by
/// quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowObservable {
    One,
    /// Horizontal velocity component.
    V1,
    /// Vertical velocity component.
    V2,
    CosTwoTheta,
    CosTwoPiX,
    SinTwoPiY,
}

impl FlowObservable {
    pub const ALL: [FlowObservable; 6] = [
        FlowObservable::One,
        FlowObservable::V1,
        FlowObservable::V2,
        FlowObservable::CosTwoTheta,
        FlowObservable::CosTwoPiX,
        FlowObservable::SinTwoPiY,
    ];

    /// Value at `(x, y, θ)` with speed `p`.
    pub fn eval(&self, state: [f64; 3], p: f64) -> f64 {
        match self {
            FlowObservable::One => 1.0,
            FlowObservable::V1 => p * state[2].cos(),
            FlowObservable::V2 => p * state[2].sin(),
            FlowObservable::CosTwoTheta => (2.0 * state[2]).cos(),
            FlowObservable::CosTwoPiX => (2.0 * PI * state[0]).cos(),
            FlowObservable::SinTwoPiY => (2.0 * PI * state[1]).sin(),
        }
    }
}

// 5-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// `∫₀^τ F dt` along the recorded flight segments.
pub fn integrate_along(billiard: &Billiard, f: FlowObservable, segments: &[Segment]) -> f64 {
    let mut total = 0.0;
    for s in segments {
        let half = 0.5 * s.duration();
        if half <= 0.0 {
            continue;
        }
        let mid = 0.5 * (s.t0 + s.t1);
        let mut acc = 0.0;
        for (n, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let y = s.state_at(mid + half * n);
            acc += w * f.eval(y, billiard.model.speed(y[0], y[1], y[2]));
        }
        total += half * acc;
    }
    total
}

/// Calls `visit(t, state)` on the jittered time grid `t_j = (j + u)·dt`
/// inside the flight.
pub fn time_samples(segments: &[Segment], dt: f64, jitter: f64, mut visit: impl FnMut([f64; 3])) {
    let Some(last) = segments.last() else { return };
    let tau = last.t1;
    let mut k = 0usize;
    let mut j = 0u64;
    loop {
        let t = (j as f64 + jitter) * dt;
        if t >= tau {
            break;
        }
        while k + 1 < segments.len() && segments[k].t1 <= t {
            k += 1;
        }
        visit(segments[k].state_at(t));
        j += 1;
    }
}

/// Observables on the collision space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "arg")]
pub enum MapObservable {
    Constant(f64),
    CosPhi,
    SinPhi,
    /// Horizontal displacement of the unperturbed straight flight leaving
    /// the point. Independent of the force.
    StraightDx,
    /// Horizontal displacement of the actual flight leaving the point.
    FlightDx,
    FlightDy,
    /// Flight time to the next collision.
    Tau,
    /// `∫₀^τ F dt` along the flight leaving the point.
    FlightIntegral(FlowObservable),
}

impl MapObservable {
    /// Parses the names used in configuration files.
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "one" => MapObservable::Constant(1.0),
            "cos_phi" => MapObservable::CosPhi,
            "sin_phi" => MapObservable::SinPhi,
            "dx" | "straight_dx" => MapObservable::StraightDx,
            "flight_dx" => MapObservable::FlightDx,
            "flight_dy" => MapObservable::FlightDy,
            "tau" => MapObservable::Tau,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown observable '{other}' (one, cos_phi, sin_phi, dx, flight_dx, flight_dy, tau)"
                )))
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            MapObservable::Constant(c) => format!("const({c})"),
            MapObservable::CosPhi => "cos_phi".into(),
            MapObservable::SinPhi => "sin_phi".into(),
            MapObservable::StraightDx => "dx".into(),
            MapObservable::FlightDx => "flight_dx".into(),
            MapObservable::FlightDy => "flight_dy".into(),
            MapObservable::Tau => "tau".into(),
            MapObservable::FlightIntegral(f) => format!("int_{f:?}").to_lowercase(),
        }
    }

    /// `true` if the value needs the flight leaving the point.
    pub fn needs_flight(&self) -> bool {
        matches!(
            self,
            MapObservable::FlightDx
                | MapObservable::FlightDy
                | MapObservable::Tau
                | MapObservable::FlightIntegral(_)
        )
    }

    pub fn needs_path(&self) -> bool {
        matches!(self, MapObservable::FlightIntegral(_))
    }

    /// Value at a visited collision.
    pub fn eval(&self, billiard: &Billiard, v: &Visit<'_>) -> Result<f64> {
        Ok(match self {
            MapObservable::Constant(c) => *c,
            MapObservable::CosPhi => v.x.phi.cos(),
            MapObservable::SinPhi => v.x.phi.sin(),
            MapObservable::StraightDx => {
                if billiard.model.is_free() {
                    v.collision.displacement.x
                } else {
                    straight_displacement(&billiard.table, v.x)?.x
                }
            }
            MapObservable::FlightDx => v.collision.displacement.x,
            MapObservable::FlightDy => v.collision.displacement.y,
            MapObservable::Tau => v.collision.tau,
            MapObservable::FlightIntegral(f) => integrate_along(billiard, *f, v.segments),
        })
    }

    /// Value at an arbitrary point, flying from it when needed.
    pub fn eval_at(&self, billiard: &Billiard, x: CollisionCoord) -> Result<f64> {
        match self {
            MapObservable::Constant(c) => Ok(*c),
            MapObservable::CosPhi => Ok(x.phi.cos()),
            MapObservable::SinPhi => Ok(x.phi.sin()),
            MapObservable::StraightDx => Ok(straight_displacement(&billiard.table, x)?.x),
            _ => {
                let mut segs = Vec::new();
                let c = if self.needs_path() {
                    let mut push = |s: &Segment| segs.push(*s);
                    billiard.collision_map_observed(x, Some(&mut push))?
                } else {
                    billiard.collision_map(x)?
                };
                self.eval(
                    billiard,
                    &Visit {
                        x,
                        collision: &c,
                        segments: &segs,
                    },
                )
            }
        }
    }
}

/// Displacement of the straight unit-speed flight leaving `x`.
pub fn straight_displacement(table: &Table, x: CollisionCoord) -> Result<Vec2> {
    let (p, n) = table.boundary_point(x.bc)?;
    let dir = n.rotated(x.phi);
    let hit = table.first_hit_straight(p, dir)?;
    Ok(hit.point - p)
}

/// Estimates `ν_ε(f)` by a Birkhoff average along the trajectory.
pub fn birkhoff_map_average(
    billiard: &Billiard,
    f: MapObservable,
    spec: &RunSpec,
) -> Result<AverageEstimate> {
    let parts = drive(
        billiard,
        spec,
        f.needs_path(),
        |_| Acc::new(1, spec),
        |acc, v, _| {
            acc.batches.add(0, f.eval(billiard, v)?);
            acc.batches.end_step(1.0);
            acc.flagged += u64::from(v.collision.grazing);
            Ok(())
        },
    )?;
    let acc = Acc::merge_all(parts)?;
    Ok(AverageEstimate::from_batches(&acc.batches, 0, acc.flagged))
}

/// Several map averages over one trajectory.
pub fn birkhoff_map_averages(
    billiard: &Billiard,
    fs: &[MapObservable],
    spec: &RunSpec,
) -> Result<Vec<AverageEstimate>> {
    let with_path = fs.iter().any(|f| f.needs_path());
    let parts = drive(
        billiard,
        spec,
        with_path,
        |_| Acc::new(fs.len(), spec),
        |acc, v, _| {
            for (i, f) in fs.iter().enumerate() {
                acc.batches.add(i, f.eval(billiard, v)?);
            }
            acc.batches.end_step(1.0);
            acc.flagged += u64::from(v.collision.grazing);
            Ok(())
        },
    )?;
    let acc = Acc::merge_all(parts)?;
    Ok((0..fs.len())
        .map(|i| AverageEstimate::from_batches(&acc.batches, i, acc.flagged))
        .collect())
}

/// Estimates `μ_ε(F) = Σ ∫F dt / Σ τ` with quadrature along each flight.
pub fn flow_average(
    billiard: &Billiard,
    f: FlowObservable,
    spec: &RunSpec,
) -> Result<AverageEstimate> {
    let parts = drive(
        billiard,
        spec,
        true,
        |_| Acc::new(1, spec),
        |acc, v, _| {
            acc.batches.add(0, integrate_along(billiard, f, v.segments));
            acc.batches.end_step(v.collision.tau);
            acc.flagged += u64::from(v.collision.grazing);
            Ok(())
        },
    )?;
    let acc = Acc::merge_all(parts)?;
    Ok(AverageEstimate::from_batches(&acc.batches, 0, acc.flagged))
}

/// Average current `J = μ_ε(v)`, computed from flight displacements:
/// `∫₀^τ v dt` is exactly the displacement of the flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Current {
    pub j1: AverageEstimate,
    pub j2: AverageEstimate,
    pub mean_tau: AverageEstimate,
}

pub fn current(billiard: &Billiard, spec: &RunSpec) -> Result<Current> {
    let parts = drive(
        billiard,
        spec,
        false,
        |_| Acc::new(4, spec),
        |acc, v, _| {
            let d = v.collision.displacement;
            acc.batches.add(0, d.x);
            acc.batches.add(1, d.y);
            acc.batches.add(2, v.collision.tau);
            acc.batches.add(3, 1.0);
            acc.batches.end_step(v.collision.tau);
            acc.flagged += u64::from(v.collision.grazing);
            Ok(())
        },
    )?;
    let acc = Acc::merge_all(parts)?;
    let b = &acc.batches;
    Ok(Current {
        j1: AverageEstimate::from_batches(b, 0, acc.flagged),
        j2: AverageEstimate::from_batches(b, 1, acc.flagged),
        mean_tau: AverageEstimate::from_parts(b.component_ratio(2, 3), b, acc.flagged),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ForceModel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_6, PI};

    fn free() -> Billiard {
        Billiard::new(Table::reference(), ForceModel::Zero, 1e-10).unwrap()
    }

    #[test]
    fn inverse_cdf_examples() {
        let t = Table::reference();
        assert_abs_diff_eq!(nu0_from_uniforms(&t, 0.3, 0.5).phi, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            nu0_from_uniforms(&t, 0.3, 0.75).phi,
            FRAC_PI_6,
            epsilon = 1e-15
        );
        // disc A owns 2/3 of the boundary
        assert_eq!(nu0_from_uniforms(&t, 0.66, 0.5).bc.disc, 0);
        assert_eq!(nu0_from_uniforms(&t, 0.67, 0.5).bc.disc, 1);
    }

    #[test]
    fn nu0_phi_histogram() {
        let t = Table::reference();
        let mut r = rng::stream(3, 0, Purpose::Nu0Samples);
        let n = 1_000_000;
        let bins = 50;
        let w = PI / bins as f64;
        let mut h = vec![0u64; bins];
        let mut on_a = 0u64;
        for _ in 0..n {
            let x = sample_nu0(&t, &mut r);
            h[(((x.phi + PI / 2.0) / w) as usize).min(bins - 1)] += 1;
            on_a += u64::from(x.bc.disc == 0);
        }
        let worst = (0..bins)
            .map(|i| {
                let (a, b) = (-PI / 2.0 + i as f64 * w, -PI / 2.0 + (i + 1) as f64 * w);
                let exact = (b.sin() - a.sin()) / 2.0 / w;
                (h[i] as f64 / n as f64 / w - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 0.01, "L∞ = {worst}");
        assert_abs_diff_eq!(on_a as f64 / n as f64, 2.0 / 3.0, epsilon = 0.002);
    }

    #[test]
    fn constant_average_is_exact() {
        let e = birkhoff_map_average(
            &free(),
            MapObservable::Constant(2.5),
            &RunSpec::new(10_000, 1),
        )
        .unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.n_samples, 10_000);
    }

    #[test]
    fn equilibrium_map_averages() {
        let b = free();
        let spec = RunSpec::new(400_000, 2);
        let fs = [
            MapObservable::CosPhi,
            MapObservable::SinPhi,
            MapObservable::Tau,
        ];
        let e = birkhoff_map_averages(&b, &fs, &spec).unwrap();
        assert!(
            (e[0].mean - PI / 4.0).abs() <= 3.0 * e[0].stderr,
            "{:?}",
            e[0]
        );
        assert!(e[1].mean.abs() <= 3.0 * e[1].stderr, "{:?}", e[1]);
        // mean free time π|D|/|∂D|
        let t = &b.table;
        let tau = PI * t.domain_area() / t.boundary_length();
        assert!(
            (e[2].mean - tau).abs() <= 3.0 * e[2].stderr,
            "{:?} vs {tau}",
            e[2]
        );
    }

    #[test]
    fn flow_average_of_one_is_one() {
        let b = Billiard::new(Table::reference(), ForceModel::thermostat(0.01), 1e-10).unwrap();
        let e = flow_average(&b, FlowObservable::One, &RunSpec::new(2_000, 1)).unwrap();
        assert_abs_diff_eq!(e.mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn equilibrium_current_vanishes() {
        let c = current(&free(), &RunSpec::new(200_000, 4)).unwrap();
        assert!(c.j1.mean.abs() <= 3.0 * c.j1.stderr);
        assert!(c.j2.mean.abs() <= 3.0 * c.j2.stderr);
        let v1 = flow_average(&free(), FlowObservable::V1, &RunSpec::new(200_000, 4)).unwrap();
        // identical trajectory, quadrature of a constant velocity is exact
        assert_abs_diff_eq!(v1.mean, c.j1.mean, epsilon = 1e-12);
    }

    #[test]
    fn time_grid_is_jittered_and_complete() {
        let b = free();
        let mut segs = Vec::new();
        let x = CollisionCoord::new(0, 0.0, 0.0);
        b.collision_map_observed(x, Some(&mut |s: &Segment| segs.push(*s)))
            .unwrap();
        let mut n = 0;
        let mut first = None;
        time_samples(&segs, 0.01, 0.25, |y| {
            n += 1;
            first.get_or_insert(y[0]);
        });
        // τ = 0.2: samples at 0.0025, 0.0125, ..., 0.1925
        assert_eq!(n, 20);
        assert_abs_diff_eq!(first.unwrap(), 0.4 + 0.0025, epsilon = 1e-15);
    }

    #[test]
    fn run_spec_validation() {
        assert!(RunSpec::new(0, 1).validate().is_err());
        assert!(RunSpec::new(100, 1).with_workers(0).validate().is_err());
        assert!(RunSpec::new(10, 1).validate().is_err());
        let s = RunSpec::new(1001, 1).with_workers(4);
        assert_eq!((0..4).map(|w| s.share(w)).sum::<u64>(), 1001);
    }

    #[test]
    fn failures_report_progress() {
        // open horizontal corridor: the first flight along it never ends
        let t = Table::new(vec![crate::geometry::Disc::new(0.5, 0.5, 0.1)], 2.0).unwrap();
        let b = Billiard::new(t, ForceModel::Zero, 1e-10).unwrap();
        let spec = RunSpec::new(1_000_000, 1).with_burn_in(0);
        let err = birkhoff_map_average(&b, MapObservable::CosPhi, &spec).unwrap_err();
        assert!(matches!(err, Error::Aborted { .. }));
        assert!(matches!(err.root(), Error::HorizonViolation { .. }));
    }
}
