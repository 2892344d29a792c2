//! Growth of tangent vectors along an orbit.

use super::{jacobian, JacobianConfig};
use crate::dynamics::{Billiard, CollisionCoord};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Initial tangent slope `dφ/ds`, inside the unstable cone.
const CONE_SLOPE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    /// `ln(|DF v| / |v|)` per step; steps that restarted contribute nothing.
    pub increments: Vec<f64>,
    /// Steps at which the tangent was reset after a flagged Jacobian.
    pub restarts: Vec<usize>,
    /// Mean of the increments, `None` when there are none.
    pub lambda: Option<f64>,
    pub note: Option<String>,
}

impl ExpansionReport {
    /// Running mean of the increments.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut s = 0.0;
        self.increments
            .iter()
            .enumerate()
            .map(|(i, v)| {
                s += v;
                s / (i + 1) as f64
            })
            .collect()
    }
}

fn cone_vector() -> [f64; 2] {
    let n = CONE_SLOPE.hypot(1.0);
    [1.0 / n, CONE_SLOPE / n]
}

/// Propagates a cone vector from `x` by finite-difference derivatives of the
/// collision map for `n_iterations` steps.
pub fn expansion_diagnostic(
    billiard: &Billiard,
    x: CollisionCoord,
    n_iterations: usize,
    cfg: &JacobianConfig,
) -> Result<ExpansionReport> {
    cfg.validate()?;
    if !(x.phi.cos() >= cfg.grazing_cos) {
        return Err(Error::InvalidInput(format!(
            "starting point is grazing (φ = {})",
            x.phi
        )));
    }
    let mut v = cone_vector();
    let mut y = x;
    let mut increments = Vec::with_capacity(n_iterations);
    let mut restarts = Vec::new();
    for step in 0..n_iterations {
        match jacobian(billiard, y, cfg)? {
            Ok(j) => {
                let m = j.matrix;
                let w = [
                    m[0][0] * v[0] + m[0][1] * v[1],
                    m[1][0] * v[0] + m[1][1] * v[1],
                ];
                let n = w[0].hypot(w[1]);
                increments.push(n.ln());
                v = [w[0] / n, w[1] / n];
                y = j.image.next;
            }
            Err(_) => {
                restarts.push(step);
                v = cone_vector();
                y = billiard.collision_map(y)?.next;
            }
        }
    }
    let lambda =
        (!increments.is_empty()).then(|| increments.iter().sum::<f64>() / increments.len() as f64);
    Ok(ExpansionReport {
        note: lambda.is_none().then(|| "insufficient data".to_string()),
        increments,
        restarts,
        lambda,
    })
}
