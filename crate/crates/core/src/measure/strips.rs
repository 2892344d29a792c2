//! Homogeneity strips `π/2 - k⁻² ≤ |φ| < π/2 - (k+1)⁻²` near grazing.

use super::{drive, RunSpec};
use crate::dynamics::Billiard;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

/// Absorbs rounding in `π/2 - |φ|` so that points on a strip boundary land
/// in the strip they open.
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strip {
    Bulk,
    /// Strip index `k ≥ k₀` and the sign of `φ`.
    Strip {
        k: u64,
        positive: bool,
    },
}

impl Strip {
    /// Signed index, `0` for the bulk.
    pub fn signed(&self) -> i64 {
        match *self {
            Strip::Bulk => 0,
            Strip::Strip { k, positive } => {
                let k = k.min(i64::MAX as u64) as i64;
                if positive {
                    k
                } else {
                    -k
                }
            }
        }
    }
}

pub fn classify_homogeneity(phi: f64, k0: u64) -> Result<Strip> {
    if k0 < 2 {
        return Err(Error::InvalidInput(format!("k0 must be >= 2, got {k0}")));
    }
    if !(phi.abs() <= FRAC_PI_2) {
        return Err(Error::InvalidInput(format!(
            "φ = {phi} outside [-π/2, π/2]"
        )));
    }
    let gap = FRAC_PI_2 - phi.abs();
    let bulk_edge = 1.0 / (k0 * k0) as f64;
    if gap > bulk_edge * (1.0 + BOUNDARY_TOL) {
        return Ok(Strip::Bulk);
    }
    let k = if gap <= 0.0 {
        u64::MAX
    } else {
        let v = gap.powf(-0.5);
        (v * (1.0 + BOUNDARY_TOL)).floor().min(u64::MAX as f64) as u64
    };
    Ok(Strip::Strip {
        k: k.max(k0),
        positive: phi > 0.0,
    })
}

/// Share of collisions per strip along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripCensus {
    pub k0: u64,
    pub total: u64,
    /// Signed strip index (0 for the bulk) and count.
    pub counts: BTreeMap<i64, u64>,
}

impl StripCensus {
    pub fn fraction(&self, signed: i64) -> f64 {
        self.counts.get(&signed).copied().unwrap_or(0) as f64 / self.total.max(1) as f64
    }
}

pub fn strip_census(billiard: &Billiard, spec: &RunSpec, k0: u64) -> Result<StripCensus> {
    classify_homogeneity(0.0, k0)?;
    let parts = drive(
        billiard,
        spec,
        false,
        |_| BTreeMap::<i64, u64>::new(),
        |m, v, _| {
            let s = classify_homogeneity(v.collision.next.phi, k0)?;
            *m.entry(s.signed()).or_insert(0) += 1;
            Ok(())
        },
    )?;
    let mut counts = BTreeMap::new();
    for p in parts {
        for (k, c) in p {
            *counts.entry(k).or_insert(0) += c;
        }
    }
    Ok(StripCensus {
        k0,
        total: counts.values().sum(),
        counts,
    })
}
