//! Free flights between collisions.
//!
//! Straight flights use the exact ray cast. Curved flights are integrated
//! with an adaptive Dormand–Prince 5(4) pair. Every trial step is screened
//! against the nearby disc copies using its chord: a path of length `ℓ` and
//! curvature at most `κ` never leaves the `κℓ²/8` neighbourhood of its chord,
//! so a step whose inflated chord misses a disc cannot touch it. A step whose
//! endpoint lands inside exactly one disc brackets the collision, which is
//! then refined by safeguarded Newton iteration on the signed distance.
//! Copies the particle is moving away from are skipped: with `κ r < 1` the
//! distance to their center cannot decrease again within a step.

use super::force::ForceModel;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryCoord, Table};
use crate::vec2::Vec2;

/// Longest arc a single step may cover. Keeps the screening local to the
/// 3×3 block of cells around the step origin.
const MAX_STEP_ARC: f64 = 0.25;
/// Below this arc length an unresolved near-contact is a tangential pass.
const MIN_STEP_ARC: f64 = 1e-9;
/// Target accuracy of the refined collision point.
const ROOT_TOL: f64 = 1e-14;
const MAX_STEPS: usize = 1_000_000;
/// Extra flight time allowed beyond `L / p_min` before declaring a horizon violation.
const HORIZON_MARGIN: f64 = 0.5;

/// Point of the phase space in the `(x, y, θ)` chart, with its speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub p: f64,
}

impl FlowState {
    pub fn new(model: &ForceModel, x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta,
            p: model.speed(x, y, theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.theta) * self.p
    }
}

/// One accepted piece of a flight, with cubic Hermite dense output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    y0: [f64; 3],
    y1: [f64; 3],
    f0: [f64; 3],
    f1: [f64; 3],
}

impl Segment {
    /// `(x, y, θ)` at flight time `t ∈ [t0, t1]`.
    pub fn state_at(&self, t: f64) -> [f64; 3] {
        let h = self.t1 - self.t0;
        if h <= 0.0 {
            return self.y0;
        }
        let s = ((t - self.t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        std::array::from_fn(|i| {
            h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i]
        })
    }

    /// Velocity vector at flight time `t` (derivative of the dense output).
    pub fn velocity_at(&self, t: f64) -> Vec2 {
        let h = self.t1 - self.t0;
        if h <= 0.0 {
            return Vec2::new(self.f0[0], self.f0[1]);
        }
        let s = ((t - self.t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let comp =
            |i: usize| d00 * self.y0[i] + d10 * self.f0[i] + d01 * self.y1[i] + d11 * self.f1[i];
        Vec2::new(comp(0), comp(1))
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// Pre-reflection data at the end of a flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    /// Hit point in the frame of the flight's start position.
    pub point: Vec2,
    /// Center of the disc copy that was hit, same frame.
    pub copy_center: Vec2,
    pub bc: BoundaryCoord,
    /// Incoming direction of motion (unit vector) and its angle.
    pub incoming: Vec2,
    pub incoming_theta: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightResult {
    pub tau: f64,
    pub arrival: Arrival,
    /// Accepted integration steps (1 for straight flights).
    pub steps: usize,
}

#[inline]
fn rhs(model: &ForceModel, y: &[f64; 3]) -> [f64; 3] {
    match model {
        ForceModel::Zero => {
            let (s, c) = y[2].sin_cos();
            [c, s, 0.0]
        }
        ForceModel::Thermostat { epsilon, direction } => {
            let (s, c) = y[2].sin_cos();
            // ε sin(β - θ)
            let (sb, cb) = direction.sin_cos();
            [c, s, epsilon * (sb * c - cb * s)]
        }
        ForceModel::General(g) => {
            let p = g.speed(y[0], y[1], y[2]);
            let (s, c) = y[2].sin_cos();
            [p * c, p * s, p * g.h(y[0], y[1], y[2])]
        }
    }
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Step {
    y: [f64; 3],
    f: [f64; 3],
    err: f64,
}

/// One Dormand–Prince step of size `h` from `y` with derivative `f0`.
fn dp_step(model: &ForceModel, y: &[f64; 3], f0: &[f64; 3], h: f64) -> Step {
    let stage = |coef: &[(f64, &[f64; 3])]| {
        let mut out = *y;
        for (a, k) in coef {
            for i in 0..3 {
                out[i] += h * a * k[i];
            }
        }
        out
    };
    let k1 = *f0;
    let k2 = rhs(model, &stage(&[(A21, &k1)]));
    let k3 = rhs(model, &stage(&[(A31, &k1), (A32, &k2)]));
    let k4 = rhs(model, &stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(
        model,
        &stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        model,
        &stage(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y5 = stage(&[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs(model, &y5);
    let mut err = 0.0f64;
    for i in 0..3 {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        err = err.max(e.abs());
    }
    Step { y: y5, f: k7, err }
}

#[inline]
fn grow_factor(err: f64, tol: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
    }
}

/// Integrates the flow without collisions for `duration`, with local error
/// at most `tol` per step.
pub fn propagate_free(
    model: &ForceModel,
    start: &FlowState,
    duration: f64,
    tol: f64,
) -> Result<FlowState> {
    if !(tol > 0.0) || duration < 0.0 {
        return Err(Error::InvalidInput(
            "tol must be > 0 and duration >= 0".into(),
        ));
    }
    let mut y = [start.x, start.y, start.theta];
    let mut f = rhs(model, &y);
    let mut t = 0.0;
    let mut h = 0.05f64.min(duration.max(1e-300));
    let mut n = 0usize;
    while t < duration {
        n += 1;
        if n > MAX_STEPS {
            return Err(Error::Integration(
                "too many steps in free propagation".into(),
            ));
        }
        let hh = h.min(duration - t);
        let st = dp_step(model, &y, &f, hh);
        if st.err > tol {
            h = hh * grow_factor(st.err, tol);
            if h < 1e-14 {
                return Err(Error::Integration(format!(
                    "step-size underflow at t = {t}"
                )));
            }
            continue;
        }
        t += hh;
        y = st.y;
        f = st.f;
        h = (hh * grow_factor(st.err, tol)).min(1.0);
    }
    Ok(FlowState::new(model, y[0], y[1], y[2]))
}

enum Screen {
    Clear,
    /// Exactly one copy contains the endpoint, nothing else is in doubt.
    Crossing {
        disc: usize,
        center: Vec2,
    },
    Ambiguous,
}

/// Classifies a trial step from `q0` (heading `u0`) to `q1` against the
/// disc copies around `q0`.
fn screen_step(table: &Table, q0: Vec2, u0: Vec2, q1: Vec2, deviation: f64) -> Screen {
    let (ci, cj) = q0.cell();
    let mut crossing: Option<(usize, Vec2)> = None;
    let mut doubtful = 0usize;
    let chord = q1 - q0;
    let chord2 = chord.norm_sq();
    for (id, d) in table.discs().iter().enumerate() {
        let r = d.radius;
        for a in -1..=1 {
            for b in -1..=1 {
                let c = Vec2::new(d.center.x + (ci + a) as f64, d.center.y + (cj + b) as f64);
                let rel0 = q0 - c;
                if rel0.dot(u0) >= 0.0 {
                    continue;
                }
                let rel1 = q1 - c;
                if rel1.norm_sq() < r * r {
                    if crossing.is_some() {
                        doubtful += 1;
                    }
                    crossing = Some((id, c));
                    continue;
                }
                let along = if chord2 > 0.0 {
                    (-rel0.dot(chord) / chord2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let closest = rel0 + chord * along;
                let reach = r + deviation;
                if closest.norm_sq() <= reach * reach {
                    doubtful += 1;
                }
            }
        }
    }
    match (crossing, doubtful) {
        (_, d) if d > 0 => Screen::Ambiguous,
        (Some((disc, center)), _) => Screen::Crossing { disc, center },
        (None, _) => Screen::Clear,
    }
}

fn straight_flight(
    table: &Table,
    start: &FlowState,
    observer: Option<&mut dyn FnMut(&Segment)>,
) -> Result<FlightResult> {
    let dir = Vec2::from_angle(start.theta);
    let hit = table.first_hit_straight(start.position(), dir)?;
    if let Some(obs) = observer {
        let y0 = [start.x, start.y, start.theta];
        let y1 = [hit.point.x, hit.point.y, start.theta];
        let f = [dir.x, dir.y, 0.0];
        obs(&Segment {
            t0: 0.0,
            t1: hit.time,
            y0,
            y1,
            f0: f,
            f1: f,
        });
    }
    Ok(FlightResult {
        tau: hit.time,
        arrival: Arrival {
            point: hit.point,
            copy_center: hit.copy_center,
            bc: hit.bc,
            incoming: dir,
            incoming_theta: start.theta,
            speed: 1.0,
        },
        steps: 1,
    })
}

/// Flies from `start` to the next collision with a scatterer.
///
/// `start` may sit on a scatterer boundary right after a reflection or in
/// the interior of the free region. The observer, when given, receives every
/// accepted piece of the trajectory in time order.
pub fn fly(
    table: &Table,
    model: &ForceModel,
    start: &FlowState,
    tol: f64,
    mut observer: Option<&mut dyn FnMut(&Segment)>,
) -> Result<FlightResult> {
    if model.is_free() {
        return straight_flight(table, start, observer);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "integration tolerance must be > 0, got {tol}"
        )));
    }
    let bounds = model.bounds();
    let kappa = bounds.h_max;
    if kappa * (table.max_radius() + 2.0 * MAX_STEP_ARC) >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "force too strong for flight screening: curvature bound {kappa}"
        )));
    }
    let t_max = table.horizon_bound() / bounds.p_min + HORIZON_MARGIN;

    let mut y = [start.x, start.y, start.theta];
    let mut f = rhs(model, &y);
    let mut t = 0.0;
    let mut h_ctrl = MAX_STEP_ARC / bounds.p_max;
    let mut h = h_ctrl;
    let mut accepted = 0usize;

    for _ in 0..MAX_STEPS {
        if t > t_max {
            return Err(Error::HorizonViolation {
                x: start.x,
                y: start.y,
                angle: start.theta,
                limit: t_max,
            });
        }
        let st = dp_step(model, &y, &f, h);
        if st.err > tol {
            h *= grow_factor(st.err, tol);
            h_ctrl = h;
            if h < 1e-14 {
                return Err(Error::Integration(format!(
                    "step-size underflow at t = {t:.6e} (x = {:.6}, y = {:.6}, θ = {:.6})",
                    y[0], y[1], y[2]
                )));
            }
            continue;
        }
        let arc = bounds.p_max * h;
        let q0 = Vec2::new(y[0], y[1]);
        let q1 = Vec2::new(st.y[0], st.y[1]);
        let deviation = kappa * arc * arc / 8.0 + 1e-15;
        match screen_step(table, q0, Vec2::from_angle(y[2]), q1, deviation) {
            Screen::Clear => {
                if let Some(obs) = observer.as_deref_mut() {
                    obs(&Segment {
                        t0: t,
                        t1: t + h,
                        y0: y,
                        y1: st.y,
                        f0: f,
                        f1: st.f,
                    });
                }
                t += h;
                y = st.y;
                f = st.f;
                accepted += 1;
                h_ctrl = (h * grow_factor(st.err, tol))
                    .max(h_ctrl)
                    .min(MAX_STEP_ARC / bounds.p_max);
                h = h_ctrl;
            }
            Screen::Ambiguous => {
                if arc <= MIN_STEP_ARC {
                    // unresolved at this scale: a tangential pass
                    if let Some(obs) = observer.as_deref_mut() {
                        obs(&Segment {
                            t0: t,
                            t1: t + h,
                            y0: y,
                            y1: st.y,
                            f0: f,
                            f1: st.f,
                        });
                    }
                    t += h;
                    y = st.y;
                    f = st.f;
                    h = h_ctrl;
                } else {
                    h *= 0.5;
                }
            }
            Screen::Crossing { disc, center } => {
                let radius = table.discs()[disc].radius;
                let (hr, yr, fr) = refine_contact(model, &y, &f, h, center, radius);
                if let Some(obs) = observer.as_deref_mut() {
                    obs(&Segment {
                        t0: t,
                        t1: t + hr,
                        y0: y,
                        y1: yr,
                        f0: f,
                        f1: fr,
                    });
                }
                let point = Vec2::new(yr[0], yr[1]);
                let incoming = Vec2::from_angle(yr[2]);
                return Ok(FlightResult {
                    tau: t + hr,
                    arrival: Arrival {
                        point,
                        copy_center: center,
                        bc: table.coord_on(disc, center, point),
                        incoming,
                        incoming_theta: yr[2],
                        speed: model.speed(yr[0], yr[1], yr[2]),
                    },
                    steps: accepted + 1,
                });
            }
        }
    }
    Err(Error::Integration(format!(
        "no collision after {MAX_STEPS} steps"
    )))
}

/// Finds the sub-step `s ∈ (0, h]` at which the trajectory enters the circle
/// `(center, radius)`, given that it starts outside and ends inside.
fn refine_contact(
    model: &ForceModel,
    y0: &[f64; 3],
    f0: &[f64; 3],
    h: f64,
    center: Vec2,
    radius: f64,
) -> (f64, [f64; 3], [f64; 3]) {
    let eval = |s: f64| {
        let st = dp_step(model, y0, f0, s);
        let rel = Vec2::new(st.y[0], st.y[1]) - center;
        let dist = rel.norm();
        let g = dist - radius;
        let dg = rel.dot(Vec2::new(st.f[0], st.f[1])) / dist;
        (g, dg, st.y, st.f)
    };
    let g_lo = (Vec2::new(y0[0], y0[1]) - center).norm() - radius;
    let (g_hi, _, y_hi, f_hi) = eval(h);
    let (mut lo, mut hi) = (0.0, h);
    let mut best = (g_hi.abs(), h, y_hi, f_hi);
    let mut s = if g_lo > g_hi {
        h * g_lo / (g_lo - g_hi)
    } else {
        0.5 * h
    };
    for _ in 0..100 {
        let (g, dg, ys, fs) = eval(s);
        if g.abs() < best.0 {
            best = (g.abs(), s, ys, fs);
        }
        if g.abs() <= ROOT_TOL {
            break;
        }
        if g > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo <= 4.0 * f64::EPSILON * h {
            break;
        }
        let newton = s - g / dg;
        s = if dg < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    (best.1, best.2, best.3)
}

/// Flies from `start` to the next collision without observing the path.
pub fn integrate_flight(
    table: &Table,
    model: &ForceModel,
    start: &FlowState,
    tol: f64,
) -> Result<FlightResult> {
    fly(table, model, start, tol, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Purpose};
    use rand::Rng;
    use std::f64::consts::PI;

    /// Thermostat flow with the field along +x, solved by hand:
    /// `tan(θ/2)` decays like `e^{-εt}`.
    fn closed_form(eps: f64, x0: f64, y0: f64, th0: f64, t: f64) -> [f64; 3] {
        let u0 = (0.5 * th0).tan();
        let u = u0 * (-eps * t).exp();
        let x = x0 + t + ((1.0 + u * u) / (1.0 + u0 * u0)).ln() / eps;
        let y = y0 + 2.0 / eps * (u0.atan() - u.atan());
        [x, y, 2.0 * u.atan()]
    }

    fn angle_diff(a: f64, b: f64) -> f64 {
        (a - b + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn free_propagation_matches_closed_form() {
        let eps = 0.1;
        let model = ForceModel::thermostat(eps);
        let mut worst: f64 = 0.0;
        for &th0 in &[0.3, 1.2, -2.0, 2.9, -0.7] {
            for &t in &[0.5, 1.0, 3.7, 10.0] {
                let s = FlowState::new(&model, 0.1, 0.2, th0);
                let end = propagate_free(&model, &s, t, 1e-10).unwrap();
                let exact = closed_form(eps, 0.1, 0.2, th0, t);
                worst = worst
                    .max((end.x - exact[0]).abs())
                    .max((end.y - exact[1]).abs())
                    .max(angle_diff(end.theta, exact[2]).abs());
            }
        }
        assert!(worst <= 1e-9, "max error {worst:e}");
    }

    #[test]
    fn free_propagation_rejects_bad_arguments() {
        let m = ForceModel::thermostat(0.1);
        let s = FlowState::new(&m, 0.0, 0.0, 0.0);
        assert!(propagate_free(&m, &s, 1.0, 0.0).is_err());
        assert!(propagate_free(&m, &s, -1.0, 1e-10).is_err());
        assert_eq!(propagate_free(&m, &s, 0.0, 1e-10).unwrap().x, 0.0);
    }

    #[test]
    fn integrated_zero_field_flight_matches_ray_cast() {
        let table = Table::reference();
        let curved = ForceModel::thermostat(0.0);
        let straight = ForceModel::Zero;
        let mut r = rng::stream(11, 0, Purpose::Custom(1));
        let mut worst_tau: f64 = 0.0;
        let mut worst_pt: f64 = 0.0;
        let mut n = 0;
        while n < 500 {
            let p = Vec2::new(r.random(), r.random());
            if table.clearance(p) <= 0.0 {
                continue;
            }
            n += 1;
            let th = r.random::<f64>() * 2.0 * PI - PI;
            let a = fly(
                &table,
                &curved,
                &FlowState::new(&curved, p.x, p.y, th),
                1e-10,
                None,
            )
            .unwrap();
            let b = fly(
                &table,
                &straight,
                &FlowState::new(&straight, p.x, p.y, th),
                1e-10,
                None,
            )
            .unwrap();
            assert_eq!(a.arrival.bc.disc, b.arrival.bc.disc);
            worst_tau = worst_tau.max((a.tau - b.tau).abs());
            worst_pt = worst_pt.max((a.arrival.point - b.arrival.point).norm());
        }
        assert!(worst_tau <= 1e-9, "|Δτ| = {worst_tau:e}");
        assert!(worst_pt <= 1e-9, "|Δq| = {worst_pt:e}");
    }

    #[test]
    fn thermostat_flight_lands_on_the_closed_form_path() {
        let table = Table::reference();
        let eps = 0.1;
        let model = ForceModel::thermostat(eps);
        let mut r = rng::stream(12, 0, Purpose::Custom(1));
        let mut n = 0;
        while n < 300 {
            let p = Vec2::new(r.random(), r.random());
            if table.clearance(p) <= 0.0 {
                continue;
            }
            n += 1;
            let th = r.random::<f64>() * 2.0 * PI - PI;
            let fr = fly(
                &table,
                &model,
                &FlowState::new(&model, p.x, p.y, th),
                1e-10,
                None,
            )
            .unwrap();
            let exact = closed_form(eps, p.x, p.y, th, fr.tau);
            let q = Vec2::new(exact[0], exact[1]);
            assert!(
                (q - fr.arrival.point).norm() <= 1e-9,
                "{:?} vs {q:?}",
                fr.arrival.point
            );
            let on_circle =
                (q - fr.arrival.copy_center).norm() - table.discs()[fr.arrival.bc.disc].radius;
            assert!(on_circle.abs() <= 1e-9);
            // nothing was crossed earlier
            for k in 1..200 {
                let e = closed_form(eps, p.x, p.y, th, fr.tau * k as f64 / 200.0);
                assert!(table.clearance(Vec2::new(e[0], e[1]).wrapped()) > -1e-9);
            }
        }
    }

    #[test]
    fn observer_sees_a_continuous_path() {
        let table = Table::reference();
        let model = ForceModel::thermostat(0.2);
        let start = FlowState::new(&model, 0.5, 0.05, 1.0);
        let mut segs: Vec<Segment> = Vec::new();
        let fr = fly(
            &table,
            &model,
            &start,
            1e-10,
            Some(&mut |s: &Segment| segs.push(*s)),
        )
        .unwrap();
        assert_eq!(segs[0].t0, 0.0);
        assert!((segs.last().unwrap().t1 - fr.tau).abs() < 1e-15);
        for w in segs.windows(2) {
            assert_eq!(w[0].t1, w[1].t0);
            let a = w[0].state_at(w[0].t1);
            let b = w[1].state_at(w[1].t0);
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
        let mid = segs[0].state_at(0.5 * (segs[0].t0 + segs[0].t1));
        let exact = closed_form(0.2, 0.5, 0.05, 1.0, 0.5 * (segs[0].t0 + segs[0].t1));
        assert!((mid[0] - exact[0]).abs() < 1e-6);
    }

    #[test]
    fn strong_forces_are_refused() {
        let table = Table::reference();
        let model = ForceModel::thermostat(1.5);
        let s = FlowState::new(&model, 0.5, 0.05, 0.0);
        assert!(matches!(
            fly(&table, &model, &s, 1e-10, None),
            Err(Error::InvalidInput(_))
        ));
    }
}
