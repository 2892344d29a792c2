//! Linear response of the steady state.
//!
//! The Jacobian `g_ε` of the collision map relative to `ν₀` is computed from
//! a central-difference derivative of `F_ε` in the `(s, φ)` chart:
//! `g_ε(X) = cos φ(F_ε X) / cos φ(X) · det DF_ε(X)`. From it
//! `Δ_ε = (1 - g_ε)/ε`, and `Δ₀` is extrapolated from two small fields.
//! Samples whose stencil straddles a singularity or sits near grazing are
//! flagged and excluded, never silently kept.

mod expansion;
mod fit;
mod kawasaki;

pub use expansion::{expansion_diagnostic, ExpansionReport};
pub use fit::{
    conductivity, linear_response_fit, ConductivityPoint, ConductivityReport, ResponsePoint,
    ResponseReport, ResponseSpec,
};
pub use kawasaki::{
    family_member, kawasaki, kawasaki_terms, truncation, KawasakiReport, KawasakiSpec,
    KawasakiTerm, SeriesEstimate, Trend, Weight,
};

use crate::dynamics::{Billiard, Collision, CollisionCoord};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fields used to extrapolate `Δ₀ ≈ 2Δ_{ε₂} - Δ_{ε₁}`.
pub const DELTA0_EPS: (f64, f64) = (1e-3, 5e-4);

/// Finite-difference settings for Jacobian-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianConfig {
    /// Stencil step in chart units.
    pub delta_fd: f64,
    /// Points with `cos φ` below this (before or after the map) are flagged.
    pub grazing_cos: f64,
    /// Relative agreement required between steps `δ` and `δ/2`.
    pub richardson_rel: f64,
}

impl Default for JacobianConfig {
    fn default() -> Self {
        Self {
            delta_fd: 1e-6,
            grazing_cos: 1e-4,
            richardson_rel: 1e-3,
        }
    }
}

impl JacobianConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_fd > 0.0 && self.delta_fd < 1e-2) {
            return Err(Error::InvalidInput(format!(
                "delta_fd must be in (0, 1e-2), got {}",
                self.delta_fd
            )));
        }
        if !(self.grazing_cos >= 0.0 && self.grazing_cos < 1.0) {
            return Err(Error::InvalidInput("grazing_cos must be in [0, 1)".into()));
        }
        if !(self.richardson_rel > 0.0) {
            return Err(Error::InvalidInput("richardson_rel must be > 0".into()));
        }
        Ok(())
    }
}

/// Why a Jacobian sample was excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// `cos φ` below the threshold at the point or at its image.
    Grazing,
    /// Stencil images land on different scatterers or copies, or a stencil
    /// flight failed.
    BranchCrossing,
    /// Steps `δ` and `δ/2` disagree.
    Richardson,
}

/// Derivative of the collision map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    /// `∂(s', φ')/∂(s, φ)`, the steps `δ` and `δ/2` combined to cancel the
    /// leading `δ²` error.
    pub matrix: [[f64; 2]; 2],
    pub det: f64,
    /// Determinants of the plain central differences with steps `δ` and `δ/2`.
    pub det_step: f64,
    pub det_half: f64,
    pub image: Collision,
}

/// One evaluation of `g_ε` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianSample {
    pub x: CollisionCoord,
    pub det_df: f64,
    pub g: f64,
    pub flag: Option<Flag>,
}

fn wrapped_diff(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    if d > 0.5 * period {
        d - period
    } else {
        d
    }
}

fn fd_matrix(
    billiard: &Billiard,
    x: CollisionCoord,
    center: &Collision,
    h: f64,
) -> Option<[[f64; 2]; 2]> {
    let table = &billiard.table;
    let circ_in = table.discs()[x.bc.disc].circumference();
    let circ_out = table.discs()[center.next.bc.disc].circumference();
    let eval = |ds: f64, dphi: f64| -> Option<(f64, f64)> {
        let mut p = x;
        p.bc.s = (p.bc.s + ds).rem_euclid(circ_in);
        p.phi += dphi;
        let c = billiard.collision_map(p).ok()?;
        if c.next.bc.disc != center.next.bc.disc || c.cell_shift != center.cell_shift || c.grazing {
            return None;
        }
        Some((
            wrapped_diff(c.next.bc.s, center.next.bc.s, circ_out),
            c.next.phi - center.next.phi,
        ))
    };
    let (sp, pp) = eval(h, 0.0)?;
    let (sm, pm) = eval(-h, 0.0)?;
    let (sq, pq) = eval(0.0, h)?;
    let (sn, pn) = eval(0.0, -h)?;
    let k = 0.5 / h;
    Some([
        [(sp - sm) * k, (sq - sn) * k],
        [(pp - pm) * k, (pq - pn) * k],
    ])
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Central-difference Jacobian of `F_ε` at `x`, or the reason it was
/// flagged. Errors of the central flight propagate.
pub fn jacobian(
    billiard: &Billiard,
    x: CollisionCoord,
    cfg: &JacobianConfig,
) -> Result<std::result::Result<Jacobian, Flag>> {
    let image = billiard.collision_map(x)?;
    jacobian_with_image(billiard, x, image, cfg)
}

fn jacobian_with_image(
    billiard: &Billiard,
    x: CollisionCoord,
    image: Collision,
    cfg: &JacobianConfig,
) -> Result<std::result::Result<Jacobian, Flag>> {
    cfg.validate()?;
    if x.phi.cos() < cfg.grazing_cos || image.next.phi.cos() < cfg.grazing_cos {
        return Ok(Err(Flag::Grazing));
    }
    let h = cfg.delta_fd;
    let Some(m) = fd_matrix(billiard, x, &image, h) else {
        return Ok(Err(Flag::BranchCrossing));
    };
    let Some(m_half) = fd_matrix(billiard, x, &image, 0.5 * h) else {
        return Ok(Err(Flag::BranchCrossing));
    };
    let det_step = det2(&m);
    let det_half = det2(&m_half);
    if !((det_step - det_half).abs() <= cfg.richardson_rel * det_half.abs()) {
        return Ok(Err(Flag::Richardson));
    }
    let mut ext = [[0.0; 2]; 2];
    for (r, row) in ext.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (4.0 * m_half[r][c] - m[r][c]) / 3.0;
        }
    }
    Ok(Ok(Jacobian {
        matrix: ext,
        det: det2(&ext),
        det_step,
        det_half,
        image,
    }))
}

/// `det DF_ε(x)` with its flag.
pub fn jacobian_det(
    billiard: &Billiard,
    x: CollisionCoord,
    cfg: &JacobianConfig,
) -> Result<JacobianSample> {
    g_eps(billiard, x, cfg)
}

/// `g_ε(x) = cos φ(F_ε x) / cos φ(x) · det DF_ε(x)`.
pub fn g_eps(
    billiard: &Billiard,
    x: CollisionCoord,
    cfg: &JacobianConfig,
) -> Result<JacobianSample> {
    Ok(match jacobian(billiard, x, cfg)? {
        Ok(j) => JacobianSample {
            x,
            det_df: j.det,
            g: j.image.next.phi.cos() / x.phi.cos() * j.det,
            flag: None,
        },
        Err(flag) => JacobianSample {
            x,
            det_df: f64::NAN,
            g: f64::NAN,
            flag: Some(flag),
        },
    })
}

/// `Δ_ε(x) = (1 - g_ε(x))/ε` for the family member of `billiard` at `epsilon`.
pub fn delta_eps(
    billiard: &Billiard,
    x: CollisionCoord,
    epsilon: f64,
    cfg: &JacobianConfig,
) -> Result<std::result::Result<f64, Flag>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Δ_ε needs ε > 0, got {epsilon}"
        )));
    }
    let member = billiard.with_model(billiard.model.with_epsilon(epsilon));
    let s = g_eps(&member, x, cfg)?;
    Ok(match s.flag {
        None => Ok((1.0 - s.g) / epsilon),
        Some(f) => Err(f),
    })
}

/// `Δ₀` by two-point extrapolation, with the two inputs for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta0 {
    pub value: f64,
    pub delta_eps1: f64,
    pub delta_eps2: f64,
}

pub fn delta_0(
    billiard: &Billiard,
    x: CollisionCoord,
    cfg: &JacobianConfig,
) -> Result<std::result::Result<Delta0, Flag>> {
    if billiard.model.field_direction().is_none() {
        return Err(Error::InvalidInput(
            "Δ₀ needs an ε-parameterized (thermostat) model family".into(),
        ));
    }
    let (e1, e2) = DELTA0_EPS;
    let d1 = match delta_eps(billiard, x, e1, cfg)? {
        Ok(v) => v,
        Err(f) => return Ok(Err(f)),
    };
    let d2 = match delta_eps(billiard, x, e2, cfg)? {
        Ok(v) => v,
        Err(f) => return Ok(Err(f)),
    };
    Ok(Ok(Delta0 {
        value: 2.0 * d2 - d1,
        delta_eps1: d1,
        delta_eps2: d2,
    }))
}
