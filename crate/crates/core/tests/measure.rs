use lorentz_core::dynamics::{Billiard, ForceModel};
use lorentz_core::geometry::{Disc, Table};
use lorentz_core::measure::{
    birkhoff_map_average, current, drive, flow_average, phi_density, r_density, sample_nu0,
    spatial_density, strip_census, theta_density, velocity_field, Axis, FlowObservable,
    MapObservable, RunSpec,
};
use lorentz_core::rng::{stream, Purpose};
use lorentz_core::stats::{ks_two_sample, Batches};
use std::f64::consts::{FRAC_PI_2, PI};

fn billiard(eps: f64) -> Billiard {
    let m = if eps == 0.0 {
        ForceModel::Zero
    } else {
        ForceModel::thermostat(eps)
    };
    Billiard::new(Table::reference(), m, 1e-10).unwrap()
}

#[test]
fn nu0_is_invariant_under_the_free_map() {
    let b = billiard(0.0);
    let mut rng = stream(21, 0, Purpose::Nu0Samples);
    let n = 200_000;
    let (mut r1, mut p1) = (vec![], vec![]);
    for _ in 0..n {
        let x = sample_nu0(&b.table, &mut rng);
        let y = b.collision_map(x).unwrap().next;
        r1.push(b.table.flat_r(y.bc));
        p1.push(y.phi);
    }
    // compare images with a fresh, independent ν₀ sample
    let (mut rf, mut pf) = (vec![], vec![]);
    for _ in 0..n {
        let x = sample_nu0(&b.table, &mut rng);
        rf.push(b.table.flat_r(x.bc));
        pf.push(x.phi);
    }
    assert!(!ks_two_sample(&rf, &r1, 0.01).unwrap().reject);
    assert!(!ks_two_sample(&pf, &p1, 0.01).unwrap().reject);
    // and the test does see a real distortion
    let shifted: Vec<f64> = p1.iter().map(|p| (p + 0.02).min(FRAC_PI_2)).collect();
    assert!(ks_two_sample(&pf, &shifted, 0.01).unwrap().reject);
}

#[test]
fn worker_merge_is_order_fixed_and_bit_exact() {
    let b = billiard(0.01);
    let spec = RunSpec::new(40_000, 9).with_workers(4).with_burn_in(100);
    let d = phi_density(&b, &spec, 20).unwrap();
    let axis = Axis::new("phi", -FRAC_PI_2, FRAC_PI_2, 20);
    let parts = drive(
        &b,
        &spec,
        false,
        |_| Batches::new(20, spec.batch_len()),
        |acc, v, _| {
            acc.add(axis.bin(v.collision.next.phi), 1.0);
            acc.end_step(1.0);
            Ok(())
        },
    )
    .unwrap();
    let mut it = parts.into_iter();
    let mut merged = it.next().unwrap();
    merged.finish();
    for mut p in it {
        p.finish();
        merged.merge(&p).unwrap();
    }
    for i in 0..20 {
        let e = merged.ratio(i);
        assert_eq!(e.mean / axis.width(), d.density[i]);
        assert_eq!(e.stderr / axis.width(), d.stderr[i]);
    }
    assert_eq!(phi_density(&b, &spec, 20).unwrap(), d);
}

#[test]
fn densities_are_normalized_and_nonnegative() {
    let b = billiard(0.01);
    let spec = RunSpec::new(50_000, 4).with_burn_in(100);
    for d in [
        phi_density(&b, &spec, 50).unwrap(),
        r_density(&b, &spec, 50).unwrap(),
        theta_density(&b, &spec, 64).unwrap(),
    ] {
        assert!(
            (d.integral() - 1.0).abs() <= 1e-12,
            "{}: {}",
            d.axis.name,
            d.integral()
        );
        assert!(d.density.iter().all(|v| *v >= 0.0));
    }
    let s = spatial_density(&b, &spec, 20).unwrap();
    assert!((s.integral() - 1.0).abs() <= 1e-12);
    assert!(s.density.iter().all(|v| *v >= 0.0));
}

#[test]
fn equilibrium_r_density_is_uniform() {
    let b = billiard(0.0);
    let d = r_density(&b, &RunSpec::new(10_000_000, 1), 50).unwrap();
    let u = 1.0 / b.table.boundary_length();
    let rel = d
        .density
        .iter()
        .map(|v| (v - u).abs() / u)
        .fold(0.0, f64::max);
    assert!(rel <= 0.02, "{rel}");
}

#[test]
fn equal_discs_carry_equal_mass() {
    // the translation (½, ½) swaps discs 0 ↔ 1 and 2 ↔ 3
    let t = Table::new(
        vec![
            Disc::new(0.0, 0.0, 0.3),
            Disc::new(0.5, 0.5, 0.3),
            Disc::new(0.5, 0.0, 0.1),
            Disc::new(0.0, 0.5, 0.1),
        ],
        2.0,
    )
    .unwrap();
    let b = Billiard::new(t, ForceModel::thermostat(0.01), 1e-10).unwrap();
    // 40 bins of width 0.04π: discs span 15, 15, 5 and 5 bins
    let d = r_density(&b, &RunSpec::new(400_000, 2), 40).unwrap();
    let w = d.axis.width();
    let mass = |r: std::ops::Range<usize>| {
        let m: f64 = r.clone().map(|i| d.density[i] * w).sum();
        // bins of one disc are correlated; the plain sum bounds the error
        let s: f64 = r.map(|i| d.stderr[i] * w).sum();
        (m, s)
    };
    for (x, y) in [(0..15, 15..30), (30..35, 35..40)] {
        let (a, sa) = mass(x);
        let (c, sc) = mass(y);
        assert!((a - c).abs() <= 3.0 * sa.hypot(sc), "{a} vs {c}");
    }
}

#[test]
fn spatial_density_vanishes_inside_scatterers() {
    let b = billiard(0.01);
    let s = spatial_density(&b, &RunSpec::new(200_000, 5), 20).unwrap();
    for i in 0..s.density.len() {
        if s.free_area[i] == 0.0 {
            assert_eq!(s.density[i], 0.0);
        } else if s.free_area[i] > 0.5 * s.cell_area() {
            assert!(s.density[i] > 0.0, "free cell {i} empty");
        }
    }
}

#[test]
fn equilibrium_velocity_field_is_zero() {
    let b = billiard(0.0);
    let (g, mean) = velocity_field(&b, &RunSpec::new(300_000, 6), 10, 100).unwrap();
    let mut outliers = 0;
    let mut cells = 0;
    for i in 0..g.n * g.n {
        if g.insufficient[i] {
            assert!(g.v1[i].is_nan());
            continue;
        }
        cells += 2;
        outliers += usize::from(g.v1[i].abs() > 3.0 * g.v1_stderr[i]);
        outliers += usize::from(g.v2[i].abs() > 3.0 * g.v2_stderr[i]);
    }
    // ~0.3% of Gaussian components fall outside 3σ
    assert!(cells > 100);
    assert!(outliers <= 3, "{outliers} of {cells}");
    assert!(mean.v1.mean.abs() <= 3.0 * mean.v1.stderr);
    assert!(mean.v2.mean.abs() <= 3.0 * mean.v2.stderr);
}

#[test]
fn cells_inside_a_scatterer_have_no_weight() {
    let b = billiard(0.01);
    let (g, _) = velocity_field(&b, &RunSpec::new(50_000, 7), 20, 10).unwrap();
    // the cell around (0.5, 0.5) lies inside the small disc
    let i = 10 * 20 + 10;
    assert_eq!(g.weight[i], 0.0);
    assert!(g.insufficient[i]);
}

#[test]
fn suspension_identity_by_two_paths() {
    let b = billiard(0.01);
    for f in [
        FlowObservable::V1,
        FlowObservable::V2,
        FlowObservable::CosTwoTheta,
        FlowObservable::CosTwoPiX,
        FlowObservable::SinTwoPiY,
    ] {
        let direct = flow_average(&b, f, &RunSpec::new(200_000, 31)).unwrap();
        let num = birkhoff_map_average(
            &b,
            MapObservable::FlightIntegral(f),
            &RunSpec::new(200_000, 32),
        )
        .unwrap();
        let den = birkhoff_map_average(&b, MapObservable::Tau, &RunSpec::new(200_000, 33)).unwrap();
        let ratio = num.mean / den.mean;
        let se = ratio * ((num.stderr / num.mean).powi(2) + (den.stderr / den.mean).powi(2)).sqrt();
        let comb = direct.stderr.hypot(se.abs());
        assert!(
            (direct.mean - ratio).abs() <= 3.0 * comb,
            "{f:?}: {} vs {ratio} ± {comb}",
            direct.mean
        );
    }
}

#[test]
fn current_scales_linearly_and_has_no_transverse_part() {
    // fields large enough for the current to stand out of the noise
    let spec = RunSpec::new(3_000_000, 8);
    let a = current(&billiard(0.05), &spec).unwrap();
    let c = current(&billiard(0.1), &spec).unwrap();
    let ra = a.j1.estimate();
    let rc = c.j1.estimate();
    let q = rc.mean / ra.mean;
    let se = q * ((rc.stderr / rc.mean).powi(2) + (ra.stderr / ra.mean).powi(2)).sqrt();
    assert!((q - 2.0).abs() <= 3.0 * se, "J₁ ratio {q} ± {se}");
    assert!(c.j2.mean.abs() <= 3.0 * c.j2.stderr);
    let z = current(&billiard(0.0), &RunSpec::new(500_000, 8)).unwrap();
    assert!(z.j1.mean.abs() <= 3.0 * z.j1.stderr);
}

#[test]
fn field_tilts_the_direction_density() {
    let b = billiard(0.1);
    let d = theta_density(&b, &RunSpec::new(2_000_000, 10), 64).unwrap();
    assert!(d.max_asymmetry_sigma() <= 3.5);
    let at = |th: f64| d.density[d.axis.bin(th)];
    assert!(at(0.0) > at(PI - 1e-9));
    assert!(at(0.0) > at(-PI));
}

#[test]
fn strip_census_sums_to_total() {
    let b = billiard(0.01);
    let c = strip_census(&b, &RunSpec::new(100_000, 3), 3).unwrap();
    assert_eq!(c.counts.values().sum::<u64>(), c.total);
    assert!(c.fraction(0) > 0.8);
    // near-grazing strips are populated on both sides
    assert!(c.counts.keys().any(|k| *k > 0) && c.counts.keys().any(|k| *k < 0));
}
