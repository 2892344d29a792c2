//! Billiard table on the unit torus with circular scatterers.
//!
//! Positions handed to the ray queries live in the *unfolded* plane: the
//! torus is tiled by unit cells and every disc has one copy per cell. A ray
//! never needs to be wrapped; instead the queries enumerate the copies that
//! can be reached within the requested length.

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::vec2::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Quadratic discriminants below this are treated as grazing misses.
pub const TANGENCY_TOL: f64 = 1e-14;

/// Circular scatterer. The center is given in torus coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn new(cx: f64, cy: f64, radius: f64) -> Self {
        Self {
            center: Vec2::new(cx, cy),
            radius,
        }
    }

    pub fn circumference(&self) -> f64 {
        2.0 * PI * self.radius
    }
}

/// Position on the boundary of one scatterer: arclength `s` measured
/// counterclockwise from the point on the positive x-axis side of the disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoord {
    pub disc: usize,
    pub s: f64,
}

impl BoundaryCoord {
    pub fn new(disc: usize, s: f64) -> Self {
        Self { disc, s }
    }
}

/// Result of a straight ray cast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Path length to the hit (equals time at unit speed).
    pub time: f64,
    pub bc: BoundaryCoord,
    /// Hit point in the same unfolded frame as the ray origin.
    pub point: Vec2,
    /// Center of the disc copy that was hit, same frame.
    pub copy_center: Vec2,
}

/// Torus `[0,1)²` minus a finite set of pairwise disjoint discs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    discs: Vec<Disc>,
    horizon_bound: f64,
    boundary_length: f64,
    /// Flattened arclength offset of each disc.
    arc_offsets: Vec<f64>,
    max_radius: f64,
}

/// Distance between two points on the unit torus.
pub fn torus_distance(a: Vec2, b: Vec2) -> f64 {
    let d = |u: f64| {
        let w = (u - u.round()).abs();
        w.min(1.0 - w)
    };
    d(a.x - b.x).hypot(d(a.y - b.y))
}

impl Table {
    /// Validates the layout and builds the table.
    ///
    /// Centers are wrapped into `[0,1)²`. Every radius must lie in `(0, 0.5)`
    /// and every pair of discs must be disjoint on the torus.
    pub fn new(discs: Vec<Disc>, horizon_bound: f64) -> Result<Self> {
        if !(horizon_bound.is_finite() && horizon_bound > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon bound must be finite and positive, got {horizon_bound}"
            )));
        }
        let discs: Vec<Disc> = discs
            .into_iter()
            .map(|d| Disc {
                center: d.center.wrapped(),
                radius: d.radius,
            })
            .collect();
        for (i, d) in discs.iter().enumerate() {
            if !(d.center.x.is_finite() && d.center.y.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "disc {i} has a non-finite center"
                )));
            }
            if !(d.radius > 0.0 && d.radius < 0.5) {
                return Err(Error::InvalidInput(format!(
                    "disc {i} radius {} outside (0, 0.5)",
                    d.radius
                )));
            }
        }
        for i in 0..discs.len() {
            for j in (i + 1)..discs.len() {
                let gap = torus_distance(discs[i].center, discs[j].center);
                if gap <= discs[i].radius + discs[j].radius {
                    return Err(Error::InvalidInput(format!(
                        "discs {i} and {j} overlap (center distance {gap:.6} <= {:.6})",
                        discs[i].radius + discs[j].radius
                    )));
                }
            }
        }
        let mut arc_offsets = Vec::with_capacity(discs.len());
        let mut running = 0.0;
        for d in &discs {
            arc_offsets.push(running);
            running += d.circumference();
        }
        let max_radius = discs.iter().map(|d| d.radius).fold(0.0, f64::max);
        Ok(Self {
            discs,
            horizon_bound,
            boundary_length: running,
            arc_offsets,
            max_radius,
        })
    }

    /// Reference table T1: a large disc at the origin and a small one at the
    /// cell center. Axis and diagonal corridors are all blocked.
    pub fn reference() -> Self {
        Self::new(
            vec![Disc::new(0.0, 0.0, 0.40), Disc::new(0.5, 0.5, 0.20)],
            2.0,
        )
        .expect("reference table is valid")
    }

    pub fn discs(&self) -> &[Disc] {
        &self.discs
    }

    pub fn disc(&self, id: usize) -> Result<&Disc> {
        self.discs.get(id).ok_or_else(|| {
            Error::InvalidInput(format!(
                "disc id {id} out of range ({} discs)",
                self.discs.len()
            ))
        })
    }

    pub fn horizon_bound(&self) -> f64 {
        self.horizon_bound
    }

    /// Total length of the scatterer boundaries.
    pub fn boundary_length(&self) -> f64 {
        self.boundary_length
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    /// Area of the free region, `1 - Σ π r²`.
    pub fn domain_area(&self) -> f64 {
        1.0 - self
            .discs
            .iter()
            .map(|d| PI * d.radius * d.radius)
            .sum::<f64>()
    }

    /// Scalar arclength obtained by concatenating the discs in order.
    pub fn flat_r(&self, bc: BoundaryCoord) -> f64 {
        self.arc_offsets[bc.disc] + bc.s
    }

    /// Inverse of [`Table::flat_r`].
    pub fn from_flat_r(&self, r: f64) -> BoundaryCoord {
        let r = r.rem_euclid(self.boundary_length);
        let disc = self
            .arc_offsets
            .iter()
            .rposition(|&o| o <= r)
            .unwrap_or_default();
        BoundaryCoord::new(disc, r - self.arc_offsets[disc])
    }

    /// Wraps `s` into `[0, circumference)` for its disc.
    pub fn normalize(&self, bc: BoundaryCoord) -> BoundaryCoord {
        let c = self.discs[bc.disc].circumference();
        let mut s = bc.s.rem_euclid(c);
        if s >= c {
            s = 0.0;
        }
        BoundaryCoord::new(bc.disc, s)
    }

    /// Point on the fundamental copy of the disc and the unit normal pointing
    /// into the free region.
    pub fn boundary_point(&self, bc: BoundaryCoord) -> Result<(Vec2, Vec2)> {
        let d = self.disc(bc.disc)?;
        let normal = Vec2::from_angle(bc.s / d.radius);
        Ok((d.center + normal * d.radius, normal))
    }

    /// Boundary coordinate of a point lying on (a copy of) disc `id` whose
    /// copy center is `copy_center`.
    pub fn coord_on(&self, id: usize, copy_center: Vec2, point: Vec2) -> BoundaryCoord {
        let r = self.discs[id].radius;
        let angle = (point - copy_center).angle();
        self.normalize(BoundaryCoord::new(id, angle * r))
    }

    /// `true` if the point (any frame) lies strictly inside some scatterer.
    pub fn inside_scatterer(&self, p: Vec2) -> bool {
        self.clearance(p) < 0.0
    }

    /// Signed distance from `p` to the nearest scatterer boundary; negative inside.
    pub fn clearance(&self, p: Vec2) -> f64 {
        let w = p.wrapped();
        let mut best = f64::INFINITY;
        for d in &self.discs {
            for a in -1..=1 {
                for b in -1..=1 {
                    let c = d.center + Vec2::new(a as f64, b as f64);
                    let g = (w - c).norm() - d.radius;
                    if g < best {
                        best = g;
                    }
                }
            }
        }
        best
    }

    /// Casts a ray and returns the first entry into a disc copy with
    /// `0 < t <= limit`. Discs may be inflated by `inflate` (used by the
    /// curved-flight guard); `tangency` is the discriminant threshold below
    /// which a contact is treated as a miss.
    pub fn cast(
        &self,
        origin: Vec2,
        dir: Vec2,
        limit: f64,
        inflate: f64,
        tangency: f64,
    ) -> Option<RayHit> {
        let (ci, cj) = origin.cell();
        let reach = (limit + self.max_radius + inflate).ceil() as i64 + 1;
        let mut best_t = limit;
        let mut best: Option<(usize, Vec2)> = None;
        for (id, d) in self.discs.iter().enumerate() {
            let rad = d.radius + inflate;
            let rad2 = rad * rad;
            for a in -reach..=reach {
                let cx = d.center.x + (ci + a) as f64;
                let ox = origin.x - cx;
                if ox.abs() > best_t + rad {
                    continue;
                }
                for b in -reach..=reach {
                    let cy = d.center.y + (cj + b) as f64;
                    let oy = origin.y - cy;
                    // oc . dir: negative when the center lies ahead
                    let half_b = ox * dir.x + oy * dir.y;
                    if half_b > 0.0 {
                        continue;
                    }
                    if -half_b - rad > best_t {
                        continue;
                    }
                    let cc = ox * ox + oy * oy - rad2;
                    let disc = half_b * half_b - cc;
                    if disc < tangency {
                        continue;
                    }
                    let t = -half_b - disc.sqrt();
                    if t > 0.0 && t <= best_t {
                        best_t = t;
                        best = Some((id, Vec2::new(cx, cy)));
                    }
                }
            }
        }
        best.map(|(id, center)| {
            let point = origin + dir * best_t;
            let bc = self.coord_on(id, center, point);
            RayHit {
                time: best_t,
                bc,
                point,
                copy_center: center,
            }
        })
    }

    /// First collision of a straight unit-speed ray with the scatterers.
    ///
    /// Fails with [`Error::HorizonViolation`] when nothing is hit within the
    /// configured horizon bound.
    pub fn first_hit_straight(&self, origin: Vec2, dir: Vec2) -> Result<RayHit> {
        let n2 = dir.norm_sq();
        if !((n2 - 1.0).abs() < 1e-9) {
            return Err(Error::InvalidInput(format!(
                "direction must be unit length, |d|² = {n2}"
            )));
        }
        self.cast(origin, dir, self.horizon_bound, 0.0, TANGENCY_TOL)
            .ok_or(Error::HorizonViolation {
                x: origin.x,
                y: origin.y,
                angle: dir.angle(),
                limit: self.horizon_bound,
            })
    }

    /// Area of the free region inside the axis-aligned cell `[x0,x1]×[y0,y1] ⊂ [0,1]²`.
    pub fn free_area_in_rect(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let mut covered = 0.0;
        for d in &self.discs {
            for a in -1..=1 {
                for b in -1..=1 {
                    let c = d.center + Vec2::new(a as f64, b as f64);
                    covered += disc_rect_area(d.radius, x0 - c.x, x1 - c.x, y0 - c.y, y1 - c.y);
                }
            }
        }
        ((x1 - x0) * (y1 - y0) - covered).max(0.0)
    }
}

/// Area of the intersection of the disc of radius `r` centered at the origin
/// with the rectangle `[x0,x1]×[y0,y1]`.
pub fn disc_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let lo = x0.max(-r);
    let hi = x1.min(r);
    if lo >= hi || y0 >= r || y1 <= -r {
        return 0.0;
    }
    // half-chord s(x) = sqrt(r² - x²); antiderivative of s
    let half_chord = |x: f64| ((r - x) * (r + x)).max(0.0).sqrt();
    // atan2 instead of asin(x/r): asin loses half the digits near x = ±r
    let prim = |x: f64| {
        let xc = x.clamp(-r, r);
        let s = half_chord(xc);
        0.5 * (xc * s + r * r * xc.atan2(s))
    };
    let mut cuts = vec![lo, hi];
    for y in [y0, y1] {
        if y.abs() < r {
            let k = (r * r - y * y).sqrt();
            for x in [-k, k] {
                if x > lo && x < hi {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        let sm = half_chord(m);
        let top_clipped = y1 < sm;
        let bottom_clipped = y0 > -sm;
        if y1 <= -sm || y0 >= sm {
            continue;
        }
        let s_int = prim(b) - prim(a);
        let width = b - a;
        area += match (top_clipped, bottom_clipped) {
            (true, true) => (y1 - y0) * width,
            (true, false) => y1 * width + s_int,
            (false, true) => s_int - y0 * width,
            (false, false) => 2.0 * s_int,
        };
    }
    area
}

/// A ray found by the horizon scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRay {
    pub origin: Vec2,
    pub angle: f64,
    /// Free path length, `None` when nothing was hit within the scan reach.
    pub free_path: Option<f64>,
}

/// Outcome of [`check_finite_horizon`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonReport {
    pub horizon_bound: f64,
    pub n_rays: usize,
    /// Longest finite free path observed.
    pub max_free_path: f64,
    /// The worst ray whose free path exceeded the bound, if any.
    pub violating_ray: Option<ProbeRay>,
    pub passed: bool,
}

/// Sampling-based check of the finite-horizon property.
///
/// Half of the origins sit on a regular grid and use equally spaced
/// directions (so exact axis and diagonal corridors are probed); the rest are
/// stratified random origins with jittered directions. Rays are followed up
/// to twice the bound. A pass is evidence, not a proof: a corridor narrower
/// than the sampling resolution can slip through.
pub fn check_finite_horizon(
    table: &Table,
    horizon_bound: f64,
    n_origins: usize,
    n_directions: usize,
    seed: u64,
) -> Result<HorizonReport> {
    if n_origins == 0 || n_directions == 0 {
        return Err(Error::InvalidInput(
            "n_origins and n_directions must be >= 1".into(),
        ));
    }
    let reach = 2.0 * horizon_bound;
    let mut rng = rng::stream(seed, 0, Purpose::Horizon);
    let n_grid = n_origins.div_ceil(2);
    let n_random = n_origins - n_grid;
    let side = (n_grid as f64).sqrt().ceil() as usize;

    let mut origins: Vec<(Vec2, bool)> = Vec::with_capacity(n_origins);
    for k in 0..n_grid {
        let (i, j) = (k % side, k / side);
        origins.push((
            Vec2::new(i as f64 / side as f64, j as f64 / side as f64),
            true,
        ));
    }
    let side_r = (n_random.max(1) as f64).sqrt().ceil() as usize;
    for k in 0..n_random {
        let (i, j) = (k % side_r, k / side_r);
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        origins.push((
            Vec2::new(
                (i as f64 + u) / side_r as f64,
                (j as f64 + v) / side_r as f64,
            ),
            false,
        ));
    }

    let mut report = HorizonReport {
        horizon_bound,
        n_rays: 0,
        max_free_path: 0.0,
        violating_ray: None,
        passed: true,
    };
    let step = 2.0 * PI / n_directions as f64;
    for (origin, on_grid) in origins {
        if table.inside_scatterer(origin) {
            continue;
        }
        let jitter: f64 = if on_grid {
            0.0
        } else {
            rng.random::<f64>() * step
        };
        for m in 0..n_directions {
            let angle = m as f64 * step + jitter;
            let hit = table.cast(origin, Vec2::from_angle(angle), reach, 0.0, TANGENCY_TOL);
            report.n_rays += 1;
            let free_path = hit.map(|h| h.time);
            if let Some(t) = free_path {
                report.max_free_path = report.max_free_path.max(t);
            }
            let too_long = free_path.is_none_or(|t| t > horizon_bound);
            if too_long {
                report.passed = false;
                let worse = match report.violating_ray {
                    None => true,
                    Some(prev) => match (prev.free_path, free_path) {
                        (Some(a), Some(b)) => b > a,
                        (Some(_), None) => true,
                        _ => false,
                    },
                };
                if worse {
                    report.violating_ray = Some(ProbeRay {
                        origin,
                        angle,
                        free_path,
                    });
                }
            }
        }
    }
    Ok(report)
}
