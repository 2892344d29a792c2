use lorentz_core::dynamics::{Billiard, CollisionCoord, ForceModel};
use lorentz_core::measure::{sample_nu0, straight_displacement, MapObservable, RunSpec};
use lorentz_core::response::{
    conductivity, delta_0, delta_eps, expansion_diagnostic, g_eps, jacobian, kawasaki,
    kawasaki_terms, linear_response_fit, JacobianConfig, KawasakiSpec, ResponseSpec, Weight,
};
use lorentz_core::rng::{stream, Purpose};
use lorentz_core::stats::mean_stderr;
use lorentz_core::Table;

fn billiard(eps: f64) -> Billiard {
    let m = if eps == 0.0 {
        ForceModel::Zero
    } else {
        ForceModel::thermostat(eps)
    };
    Billiard::new(Table::reference(), m, 1e-10).unwrap()
}

// For the field along +x the phase-space contraction over a flight is the
// work done by the field, so g_ε = exp(-ε Δx) with Δx the flight's
// horizontal displacement.
#[test]
fn jacobian_matches_the_work_of_the_field() {
    let cfg = JacobianConfig::default();
    for eps in [0.01, 0.02] {
        let b = billiard(eps);
        let mut rng = stream(41, 0, Purpose::Custom(300));
        let mut used = 0;
        for _ in 0..300 {
            let x = sample_nu0(&b.table, &mut rng);
            let s = g_eps(&b, x, &cfg).unwrap();
            if s.flag.is_some() {
                continue;
            }
            let dx = b.collision_map(x).unwrap().displacement.x;
            let oracle = (-eps * dx).exp();
            assert!(
                (s.g - oracle).abs() <= 1e-5,
                "ε = {eps}: g = {} vs {oracle}",
                s.g
            );
            used += 1;
        }
        assert!(used > 280);
    }
}

#[test]
fn extrapolated_delta_is_the_straight_displacement() {
    let b = billiard(0.01);
    let cfg = JacobianConfig::default();
    let mut rng = stream(42, 0, Purpose::Custom(300));
    let mut errs = Vec::new();
    for _ in 0..5_000 {
        let x = sample_nu0(&b.table, &mut rng);
        if let Ok(d) = delta_0(&b, x, &cfg).unwrap() {
            errs.push((d.value - straight_displacement(&b.table, x).unwrap().x).abs());
        }
    }
    errs.sort_by(f64::total_cmp);
    let median = errs[errs.len() / 2];
    let large = errs.iter().filter(|e| **e > 1e-2).count() as f64 / errs.len() as f64;
    assert!(median < 1e-3, "median error {median:e}");
    assert!(large < 0.01, "{large}");
}

#[test]
fn delta_has_zero_equilibrium_mean() {
    let cfg = JacobianConfig::default();
    for eps in [0.005, 0.01, 0.02] {
        let b = billiard(eps);
        let mut rng = stream(43, 0, Purpose::Nu0Samples);
        let v: Vec<f64> = (0..20_000)
            .filter_map(|_| {
                delta_eps(&b, sample_nu0(&b.table, &mut rng), eps, &cfg)
                    .unwrap()
                    .ok()
            })
            .collect();
        let e = mean_stderr(&v);
        assert!(e.mean.abs() <= 3.0 * e.stderr, "ε = {eps}: {e:?}");
    }
}

#[test]
fn kawasaki_identity_small() {
    let b = billiard(0.01);
    let fs = [
        MapObservable::CosPhi,
        MapObservable::StraightDx,
        MapObservable::SinPhi,
    ];
    let spec = KawasakiSpec {
        epsilon: 0.01,
        n_samples: 40_000,
        k_max: 30,
        jacobian: JacobianConfig::default(),
        direct: RunSpec::new(1_000_000, 5).with_workers(2),
    };
    let reports = kawasaki(&b, &fs, &spec).unwrap();
    assert_eq!(reports.len(), 3);
    for r in &reports {
        assert!(
            r.discrepancy_sigma <= 3.0,
            "{}: {}",
            r.observable,
            r.discrepancy_sigma
        );
        assert!(r.truncation <= 30);
        assert!(r.flagged_fraction < 0.05);
    }
    let dx = &reports[1];
    assert!(dx.terms[0].value < 0.0 && dx.terms[0].value.abs() > 3.0 * dx.terms[0].stderr);
    let tr = dx.trend.unwrap();
    assert!(tr.signal && tr.slope.mean < 0.0);
}

#[test]
fn kawasaki_is_deterministic_across_runs() {
    let b = billiard(0.01);
    let spec = KawasakiSpec {
        epsilon: 0.01,
        n_samples: 2_000,
        k_max: 10,
        jacobian: JacobianConfig::default(),
        direct: RunSpec::new(20_000, 5).with_workers(3),
    };
    let a = kawasaki(&b, &[MapObservable::StraightDx], &spec).unwrap();
    let c = kawasaki(&b, &[MapObservable::StraightDx], &spec).unwrap();
    assert_eq!(a, c);
}

#[test]
fn zero_field_kawasaki_has_no_series() {
    let b = billiard(0.01);
    let spec = KawasakiSpec {
        epsilon: 0.0,
        n_samples: 10_000,
        k_max: 30,
        jacobian: JacobianConfig::default(),
        direct: RunSpec::new(50_000, 6),
    };
    let r = &kawasaki(&b, &[MapObservable::CosPhi], &spec).unwrap()[0];
    assert!(r.terms.is_empty());
    assert_eq!(r.rhs, r.nu0_f);
    assert!(r.discrepancy_sigma <= 3.0);
}

#[test]
fn field_independent_family_has_vanishing_terms() {
    let b = billiard(0.0);
    let s = kawasaki_terms(
        &b,
        &b,
        Weight::Eps(0.01),
        &[MapObservable::StraightDx, MapObservable::CosPhi],
        5_000,
        5,
        7,
        1,
        &JacobianConfig::default(),
        0.01,
    )
    .unwrap();
    for terms in &s.terms {
        for t in terms {
            assert!(t.value.abs() <= 1e-4, "{t:?}");
        }
    }
}

#[test]
fn bouncing_orbit_expansion_matches_closed_form() {
    // period-2 orbit along the x-axis between the big disc and its copy
    let (kappa, tau): (f64, f64) = (1.0 / 0.4, 1.0 - 2.0 * 0.4);
    // DF = -[[τκ + 1, τ], [τκ² + 2κ, τκ + 1]] at normal incidence
    let m = [
        [tau * kappa + 1.0, tau],
        [tau * kappa * kappa + 2.0 * kappa, tau * kappa + 1.0],
    ];
    let tr = m[0][0] + m[1][1];
    let lambda = 0.5 * (tr + (tr * tr - 4.0).sqrt());
    let b = billiard(0.0);
    let x = CollisionCoord::new(0, 0.0, 0.0);
    let j = jacobian(&b, x, &JacobianConfig::default())
        .unwrap()
        .unwrap();
    for (got, want) in j.matrix.iter().zip(&m) {
        for (g, w) in got.iter().zip(want) {
            assert!((g.abs() - w).abs() < 1e-5, "{:?}", j.matrix);
        }
    }
    let rep = expansion_diagnostic(&b, x, 25, &JacobianConfig::default()).unwrap();
    assert!(rep.restarts.is_empty());
    // the tangent aligns within ~10 bounces; rounding drift off the unstable
    // orbit grows like λⁿ, so later steps leave it
    for inc in &rep.increments[10..] {
        assert!((inc - lambda.ln()).abs() < 1e-8, "{inc} vs {}", lambda.ln());
    }
}

#[test]
fn typical_orbits_expand() {
    for eps in [0.0, 0.01] {
        let b = billiard(eps);
        let mut rng = stream(44, 0, Purpose::Custom(300));
        let x = sample_nu0(&b.table, &mut rng);
        let rep = expansion_diagnostic(&b, x, 1_000, &JacobianConfig::default()).unwrap();
        assert!(rep.lambda.unwrap() > 0.0);
        assert_eq!(rep.increments.len() + rep.restarts.len(), 1_000);
        assert!(rep.cumulative().last().unwrap() > &0.0);
    }
}

#[test]
fn response_inputs_are_validated() {
    let b = billiard(0.01);
    let mut spec = ResponseSpec {
        eps_grid: vec![0.002, 0.005, 0.01],
        run: RunSpec::new(10_000, 1),
        n_samples: 1_000,
        k_max: 10,
        jacobian: JacobianConfig::default(),
    };
    assert!(linear_response_fit(&b, MapObservable::StraightDx, &spec).is_err());
    spec.eps_grid = vec![0.002, 0.005, 0.005, 0.01];
    assert!(linear_response_fit(&b, MapObservable::StraightDx, &spec).is_err());
    spec.eps_grid = vec![0.002, 0.005, 0.01, 0.02];
    assert!(linear_response_fit(&billiard(0.0), MapObservable::StraightDx, &spec).is_err());
    assert!(conductivity(&b, &[0.01, -0.01], &RunSpec::new(10_000, 1)).is_err());
    assert!(conductivity(&billiard(0.0), &[0.01, 0.02], &RunSpec::new(10_000, 1)).is_err());
}

#[test]
fn small_response_fit_is_consistent() {
    let b = billiard(0.01);
    let spec = ResponseSpec {
        eps_grid: vec![0.02, 0.05, 0.1, 0.15],
        run: RunSpec::new(400_000, 3),
        n_samples: 20_000,
        k_max: 30,
        jacobian: JacobianConfig::default(),
    };
    let r = linear_response_fit(&b, MapObservable::StraightDx, &spec).unwrap();
    assert_eq!(r.points.len(), 4);
    assert!(r.slope_ci95.0 < r.slope.mean && r.slope.mean < r.slope_ci95.1);
    assert!(r.intercept_consistent);
    assert!(r.series_slope.mean < 0.0);
    assert!(
        r.slope_discrepancy_sigma <= 3.0,
        "{} vs {:?}",
        r.slope.mean,
        r.series_slope
    );
    let c = conductivity(&b, &[0.05, 0.1], &RunSpec::new(1_000_000, 4)).unwrap();
    assert!(c.sigma.mean > 0.0);
    assert!(c.pairwise_consistent);
}
