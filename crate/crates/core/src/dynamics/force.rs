//! Force models in the `(x, y, θ)` chart of the energy shell.
//!
//! Between collisions the motion obeys `ẋ = p cos θ`, `ẏ = p sin θ`,
//! `θ̇ = p h` where `p` is the speed and `h = (-F₁ sin θ + F₂ cos θ)/p²` is
//! the normalised turning rate of the force.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Bounds a general force must declare up front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceBounds {
    pub p_min: f64,
    pub p_max: f64,
    /// Upper bound on `|h|` over the energy shell (path curvature bound).
    pub h_max: f64,
}

/// User-supplied smooth force, described through its chart functions.
pub trait GeneralForce: Send + Sync + fmt::Debug {
    /// Speed on the energy shell at `(x, y, θ)`.
    fn speed(&self, x: f64, y: f64, theta: f64) -> f64;
    /// Turning rate `h(x, y, θ)`.
    fn h(&self, x: f64, y: f64, theta: f64) -> f64;
    fn bounds(&self) -> ForceBounds;
    /// Whether the flow is reversible under `(q, p) -> (q, -p)`.
    fn reversible(&self) -> bool {
        false
    }
}

/// The stationary force driving the particle between collisions.
#[derive(Clone, Debug)]
pub enum ForceModel {
    /// Free flight.
    Zero,
    /// Constant field `E = ε (cos β, sin β)` with a Gaussian thermostat,
    /// `F = E - ((E·p)/|p|²) p`, at unit speed.
    Thermostat {
        epsilon: f64,
        direction: f64,
    },
    General(Arc<dyn GeneralForce>),
}

/// `h` and its first partial derivatives at one phase point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct HValue {
    pub h: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub h_theta: f64,
}

/// Smallness check of the force and its first derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionBReport {
    pub max_h: f64,
    pub max_hx: f64,
    pub max_hy: f64,
    pub max_htheta: f64,
    pub delta0: f64,
    pub pass: bool,
}

impl ForceModel {
    /// Thermostat with the field along +x.
    pub fn thermostat(epsilon: f64) -> Self {
        ForceModel::Thermostat {
            epsilon,
            direction: 0.0,
        }
    }

    /// Field strength for the thermostat, zero otherwise.
    pub fn epsilon(&self) -> f64 {
        match self {
            ForceModel::Thermostat { epsilon, .. } => *epsilon,
            _ => 0.0,
        }
    }

    /// Field direction (radians), `None` for non-thermostat models.
    pub fn field_direction(&self) -> Option<f64> {
        match self {
            ForceModel::Thermostat { direction, .. } => Some(*direction),
            _ => None,
        }
    }

    /// Same family with a different field strength.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        match self {
            ForceModel::Thermostat { direction, .. } => ForceModel::Thermostat {
                epsilon,
                direction: *direction,
            },
            other => other.clone(),
        }
    }

    /// `true` when flights are straight lines traversed at unit speed and
    /// the exact ray cast can be used.
    pub fn is_free(&self) -> bool {
        matches!(self, ForceModel::Zero)
    }

    pub fn is_reversible(&self) -> bool {
        match self {
            ForceModel::Zero | ForceModel::Thermostat { .. } => true,
            ForceModel::General(g) => g.reversible(),
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        match self {
            ForceModel::Zero => Ok(()),
            ForceModel::Thermostat { epsilon, direction } => {
                if !(epsilon.is_finite() && *epsilon >= 0.0 && direction.is_finite()) {
                    return Err(crate::Error::InvalidInput(format!(
                        "thermostat needs finite epsilon >= 0 and finite direction, got {epsilon}, {direction}"
                    )));
                }
                Ok(())
            }
            ForceModel::General(g) => {
                let b = g.bounds();
                if !(b.p_min > 0.0 && b.p_max >= b.p_min && b.p_max.is_finite() && b.h_max >= 0.0) {
                    return Err(crate::Error::InvalidInput(format!(
                        "inconsistent force bounds {b:?}"
                    )));
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn speed(&self, x: f64, y: f64, theta: f64) -> f64 {
        match self {
            ForceModel::Zero | ForceModel::Thermostat { .. } => 1.0,
            ForceModel::General(g) => g.speed(x, y, theta),
        }
    }

    /// Turning rate `h`. For the thermostat this is `ε sin(β - θ)`, i.e.
    /// `-ε sin θ` for a field along +x.
    #[inline]
    pub fn h(&self, x: f64, y: f64, theta: f64) -> f64 {
        match self {
            ForceModel::Zero => 0.0,
            ForceModel::Thermostat { epsilon, direction } => epsilon * (direction - theta).sin(),
            ForceModel::General(g) => g.h(x, y, theta),
        }
    }

    /// `h` with partial derivatives. Analytic for the built-in models,
    /// central differences for general forces.
    pub fn h_value(&self, x: f64, y: f64, theta: f64) -> HValue {
        match self {
            ForceModel::Zero => HValue::default(),
            ForceModel::Thermostat { epsilon, direction } => HValue {
                h: epsilon * (direction - theta).sin(),
                h_x: 0.0,
                h_y: 0.0,
                h_theta: -epsilon * (direction - theta).cos(),
            },
            ForceModel::General(g) => {
                let d = 1e-6;
                HValue {
                    h: g.h(x, y, theta),
                    h_x: (g.h(x + d, y, theta) - g.h(x - d, y, theta)) / (2.0 * d),
                    h_y: (g.h(x, y + d, theta) - g.h(x, y - d, theta)) / (2.0 * d),
                    h_theta: (g.h(x, y, theta + d) - g.h(x, y, theta - d)) / (2.0 * d),
                }
            }
        }
    }

    /// Bounds `(p_min, p_max, sup|h|)`.
    pub fn bounds(&self) -> ForceBounds {
        match self {
            ForceModel::Zero => ForceBounds {
                p_min: 1.0,
                p_max: 1.0,
                h_max: 0.0,
            },
            ForceModel::Thermostat { epsilon, .. } => ForceBounds {
                p_min: 1.0,
                p_max: 1.0,
                h_max: *epsilon,
            },
            ForceModel::General(g) => g.bounds(),
        }
    }

    /// Checks `max(|h|, |h_x|, |h_y|, |h_θ|) <= δ₀`. Analytic for the
    /// thermostat; a 32×32×64 grid scan over the torus for general forces.
    pub fn assumption_b_report(&self, delta0: f64) -> AssumptionBReport {
        let (mh, mx, my, mt) = match self {
            ForceModel::Zero => (0.0, 0.0, 0.0, 0.0),
            ForceModel::Thermostat { epsilon, .. } => (*epsilon, 0.0, 0.0, *epsilon),
            ForceModel::General(_) => {
                let mut m = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
                for i in 0..32 {
                    for j in 0..32 {
                        for k in 0..64 {
                            let v = self.h_value(
                                (i as f64 + 0.5) / 32.0,
                                (j as f64 + 0.5) / 32.0,
                                -PI + (k as f64 + 0.5) * 2.0 * PI / 64.0,
                            );
                            m.0 = m.0.max(v.h.abs());
                            m.1 = m.1.max(v.h_x.abs());
                            m.2 = m.2.max(v.h_y.abs());
                            m.3 = m.3.max(v.h_theta.abs());
                        }
                    }
                }
                m
            }
        };
        AssumptionBReport {
            max_h: mh,
            max_hx: mx,
            max_hy: my,
            max_htheta: mt,
            delta0,
            pass: mh.max(mx).max(my).max(mt) <= delta0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    /// h from the force vector, `F = E - (E·u)u` at unit speed.
    fn h_from_force(e: (f64, f64), theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let ep = e.0 * c + e.1 * s;
        let f1 = e.0 - ep * c;
        let f2 = e.1 - ep * s;
        -f1 * s + f2 * c
    }

    #[test]
    fn thermostat_turning_rate() {
        let m = ForceModel::thermostat(0.1);
        assert_abs_diff_eq!(m.h(0.3, 0.3, 0.0), 0.0, epsilon = 1e-17);
        assert_abs_diff_eq!(m.h(0.3, 0.3, FRAC_PI_2), -0.1, epsilon = 1e-16);
        for k in 0..50 {
            let th = -3.0 + 0.12 * k as f64;
            assert_abs_diff_eq!(
                m.h(0.0, 0.0, th),
                h_from_force((0.1, 0.0), th),
                epsilon = 1e-15
            );
        }
        let tilted = ForceModel::Thermostat {
            epsilon: 0.2,
            direction: 0.7,
        };
        for k in 0..50 {
            let th = -3.0 + 0.12 * k as f64;
            let e = (0.2 * 0.7f64.cos(), 0.2 * 0.7f64.sin());
            assert_abs_diff_eq!(tilted.h(0.0, 0.0, th), h_from_force(e, th), epsilon = 1e-15);
        }
        assert_eq!(ForceModel::Zero.h(0.1, 0.2, 1.0), 0.0);
    }

    #[test]
    fn assumption_b() {
        let r = ForceModel::thermostat(0.01).assumption_b_report(0.05);
        assert!(r.pass);
        assert_eq!(r.max_h, 0.01);
        assert_eq!(r.max_htheta, 0.01);
        assert!(!ForceModel::thermostat(0.1).assumption_b_report(0.05).pass);
        let z = ForceModel::Zero.assumption_b_report(0.05);
        assert!(
            z.pass && z.max_h == 0.0 && z.max_hx == 0.0 && z.max_hy == 0.0 && z.max_htheta == 0.0
        );
    }

    #[derive(Debug)]
    struct Ripple;
    impl GeneralForce for Ripple {
        fn speed(&self, _x: f64, _y: f64, _t: f64) -> f64 {
            1.0
        }
        fn h(&self, x: f64, y: f64, t: f64) -> f64 {
            0.01 * (2.0 * PI * x).sin() * (2.0 * PI * y).cos() + 0.005 * t.cos()
        }
        fn bounds(&self) -> ForceBounds {
            ForceBounds {
                p_min: 1.0,
                p_max: 1.0,
                h_max: 0.015,
            }
        }
    }

    #[test]
    fn general_force_grid_scan() {
        let m = ForceModel::General(Arc::new(Ripple));
        let r = m.assumption_b_report(0.1);
        // h_x peaks at 0.02π
        assert!((r.max_hx - 0.02 * PI).abs() < 2e-3, "{r:?}");
        assert!(r.max_htheta <= 0.005 + 1e-9);
        assert!(r.pass);
        assert!(!m.assumption_b_report(0.05).pass);
        assert!(!m.is_reversible());
    }
}
