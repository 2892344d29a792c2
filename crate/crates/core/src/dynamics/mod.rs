//! Collision map of the perturbed billiard.
//!
//! A point of the collision space is a boundary coordinate together with the
//! angle `φ ∈ [-π/2, π/2]` between the outgoing velocity and the inward
//! normal. [`Billiard::collision_map`] lifts it to the phase space, flies to
//! the next scatterer and reflects.

pub mod flight;
pub mod force;

pub use flight::{
    fly, integrate_flight, propagate_free, Arrival, FlightResult, FlowState, Segment,
};
pub use force::{AssumptionBReport, ForceBounds, ForceModel, GeneralForce, HValue};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCoord, Table};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Arrivals with `cos φ` below this are flagged as grazing.
pub const GRAZING_COS: f64 = 1e-8;
/// `|v·n|` below this cannot be reflected at all.
pub const TANGENT_TOL: f64 = 1e-14;

/// Point of the collision space (post-reflection convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionCoord {
    pub bc: BoundaryCoord,
    /// Angle from the inward normal to the outgoing velocity, positive
    /// counterclockwise.
    pub phi: f64,
}

impl CollisionCoord {
    pub fn new(disc: usize, s: f64, phi: f64) -> Self {
        Self {
            bc: BoundaryCoord::new(disc, s),
            phi,
        }
    }
}

/// Time reversal on the collision space, `(r, φ) -> (r, -φ)`.
pub fn reversal_involution(x: CollisionCoord) -> CollisionCoord {
    CollisionCoord {
        bc: x.bc,
        phi: -x.phi,
    }
}

/// Outcome of a specular reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub outgoing: Vec2,
    pub theta: f64,
    pub phi: f64,
}

/// Specular reflection of a unit `incoming` direction at a boundary point
/// with unit `normal` pointing into the free region.
pub fn reflect(incoming: Vec2, normal: Vec2) -> Result<Reflection> {
    let vn = incoming.dot(normal);
    if vn.abs() < TANGENT_TOL {
        return Err(Error::Grazing {
            normal_component: vn,
        });
    }
    if vn > 0.0 {
        return Err(Error::InvalidInput(format!(
            "incoming direction points away from the scatterer (v·n = {vn:.3e})"
        )));
    }
    let outgoing = incoming - normal * (2.0 * vn);
    let phi = normal
        .cross(outgoing)
        .atan2(normal.dot(outgoing))
        .clamp(-FRAC_PI_2, FRAC_PI_2);
    Ok(Reflection {
        outgoing,
        theta: outgoing.angle(),
        phi,
    })
}

/// One application of the collision map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    /// Post-reflection coordinate of the next collision.
    pub next: CollisionCoord,
    /// Flight time.
    pub tau: f64,
    /// Unfolded displacement over the flight.
    pub displacement: Vec2,
    /// Lattice cell of the disc copy that was hit, relative to the copy the
    /// flight started from.
    pub cell_shift: (i64, i64),
    pub incoming_theta: f64,
    pub outgoing_theta: f64,
    /// `cos φ` of the arrival fell below [`GRAZING_COS`].
    pub grazing: bool,
}

/// A table together with a force model and integration tolerance.
#[derive(Debug, Clone)]
pub struct Billiard {
    pub table: Table,
    pub model: ForceModel,
    pub tol: f64,
}

impl Billiard {
    pub fn new(table: Table, model: ForceModel, tol: f64) -> Result<Self> {
        model.validate()?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        Ok(Self { table, model, tol })
    }

    /// Copy of this system with a different force model.
    pub fn with_model(&self, model: ForceModel) -> Self {
        Self {
            table: self.table.clone(),
            model,
            tol: self.tol,
        }
    }

    /// Phase point leaving the fundamental disc copy at `x`.
    pub fn lift(&self, x: CollisionCoord) -> Result<FlowState> {
        if !(x.phi.abs() <= FRAC_PI_2) {
            return Err(Error::InvalidInput(format!(
                "φ = {} outside [-π/2, π/2]",
                x.phi
            )));
        }
        let (p, n) = self.table.boundary_point(x.bc)?;
        let theta = n.rotated(x.phi).angle();
        Ok(FlowState::new(&self.model, p.x, p.y, theta))
    }

    /// Flight from `x` with the path handed to `observer`.
    pub fn flight(
        &self,
        x: CollisionCoord,
        observer: Option<&mut dyn FnMut(&Segment)>,
    ) -> Result<(FlowState, FlightResult)> {
        let start = self.lift(x)?;
        let fr = fly(&self.table, &self.model, &start, self.tol, observer)?;
        Ok((start, fr))
    }

    /// `F_ε(x)` with the flight data.
    pub fn collision_map(&self, x: CollisionCoord) -> Result<Collision> {
        self.collision_map_observed(x, None)
    }

    pub fn collision_map_observed(
        &self,
        x: CollisionCoord,
        observer: Option<&mut dyn FnMut(&Segment)>,
    ) -> Result<Collision> {
        let (start, fr) = self.flight(x, observer)?;
        self.finish(x, &start, &fr)
    }

    fn finish(&self, x: CollisionCoord, start: &FlowState, fr: &FlightResult) -> Result<Collision> {
        let a = &fr.arrival;
        let normal = (a.point - a.copy_center).normalized();
        let refl = reflect(a.incoming, normal)?;
        let fundamental = self.table.discs()[x.bc.disc].center;
        let shift = a.copy_center - self.table.discs()[a.bc.disc].center - fundamental.wrapped()
            + fundamental;
        let next = CollisionCoord {
            bc: a.bc,
            phi: refl.phi,
        };
        Ok(Collision {
            next,
            tau: fr.tau,
            displacement: a.point - start.position(),
            cell_shift: (shift.x.round() as i64, shift.y.round() as i64),
            incoming_theta: a.incoming_theta,
            outgoing_theta: refl.theta,
            grazing: refl.phi.cos() < GRAZING_COS,
        })
    }

    /// `F_ε⁻¹(x) = ι F_ε ι (x)`; only defined for reversible models.
    pub fn collision_map_inverse(&self, x: CollisionCoord) -> Result<Collision> {
        if !self.model.is_reversible() {
            return Err(Error::InvalidInput(
                "inverse map needs a time-reversible force model".into(),
            ));
        }
        let mut c = self.collision_map(reversal_involution(x))?;
        c.next = reversal_involution(c.next);
        c.displacement = -c.displacement;
        c.cell_shift = (-c.cell_shift.0, -c.cell_shift.1);
        std::mem::swap(&mut c.incoming_theta, &mut c.outgoing_theta);
        Ok(c)
    }
}
