//! One function per command: run the estimator, write CSV and JSON.

use crate::config::RunConfig;
use crate::output::{Flagged, Writer};
use crate::Failure;
use anyhow::Context;
use lorentz_core::geometry::check_finite_horizon;
use lorentz_core::measure::{
    birkhoff_map_averages, current, phi_density, r_density, spatial_density, strip_census,
    theta_density, velocity_field, AverageEstimate, DensityEstimate, MapObservable,
};
use lorentz_core::response::{
    conductivity, kawasaki, linear_response_fit, KawasakiSpec, KawasakiTerm, ResponseSpec,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

pub const COMMANDS: &[&str] = &[
    "check-horizon",
    "simulate",
    "phi-density",
    "r-density",
    "spatial-density",
    "velocity-field",
    "theta-density",
    "current",
    "kawasaki",
    "linear-response",
    "conductivity",
];

/// Commands that make sense in a sweep cell (one field strength each).
pub const SWEEPABLE: &[&str] = &[
    "simulate",
    "phi-density",
    "r-density",
    "spatial-density",
    "velocity-field",
    "theta-density",
    "current",
    "kawasaki",
];

/// Runs `name` with `cfg`, writing into `dir`. Returns the files written.
pub fn run(name: &str, cfg: &RunConfig, dir: &Path) -> anyhow::Result<Vec<std::path::PathBuf>> {
    let mut w = Writer::new(dir, name, cfg)?;
    match name {
        "check-horizon" => check_horizon(cfg, &mut w)?,
        "simulate" => simulate(cfg, &mut w)?,
        "phi-density" | "r-density" | "theta-density" => density(name, cfg, &mut w)?,
        "spatial-density" => spatial(cfg, &mut w)?,
        "velocity-field" => velocity(cfg, &mut w)?,
        "current" => run_current(cfg, &mut w)?,
        "kawasaki" => run_kawasaki(cfg, &mut w)?,
        "linear-response" => response(cfg, &mut w)?,
        "conductivity" => run_conductivity(cfg, &mut w)?,
        other => anyhow::bail!("no command `{other}`"),
    }
    Ok(w.written)
}

fn check_horizon(cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let table = cfg.table()?;
    let r = check_finite_horizon(
        &table,
        cfg.table.horizon_bound,
        cfg.horizon.n_origins,
        cfg.horizon.n_directions,
        cfg.seed,
    )?;
    w.json("horizon.json", Flagged::none(r.n_rays as u64), &r)?;
    if !r.passed {
        let ray = r.violating_ray.expect("failed check names a ray");
        return Err(Failure::Horizon(format!(
            "free path {} from ({:.6}, {:.6}) at angle {:.6} exceeds the bound {}",
            ray.free_path
                .map_or("unbounded".to_string(), |t| format!("{t:.6}")),
            ray.origin.x,
            ray.origin.y,
            ray.angle,
            r.horizon_bound
        ))
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    n_collisions: u64,
    averages: BTreeMap<String, AverageEstimate>,
    /// `ν(flight_dx)/ν(τ)`: the current along x.
    current_x: f64,
    strip_fractions: BTreeMap<i64, f64>,
}

fn simulate(cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let b = cfg.billiard()?;
    let spec = cfg.run_spec();
    let fs = [
        MapObservable::CosPhi,
        MapObservable::SinPhi,
        MapObservable::StraightDx,
        MapObservable::FlightDx,
        MapObservable::FlightDy,
        MapObservable::Tau,
    ];
    let avg = birkhoff_map_averages(&b, &fs, &spec)?;
    let census = strip_census(&b, &spec, 3)?;
    let flagged = Flagged::from_fraction(avg[0].flagged_fraction, avg[0].n_samples);
    let summary = SimulateSummary {
        n_collisions: spec.n_collisions,
        current_x: avg[3].mean / avg[5].mean,
        averages: fs.iter().map(|f| f.name()).zip(avg).collect(),
        strip_fractions: census
            .counts
            .keys()
            .map(|k| (*k, census.fraction(*k)))
            .collect(),
    };
    w.json("simulate.json", flagged, &summary)
}

#[derive(Serialize)]
struct DensitySummary<'a> {
    density: &'a DensityEstimate,
    integral: f64,
    /// L∞ distance to the zero-field density.
    equilibrium_linf: f64,
    /// Largest `|d(v) - d(-v)|` over combined stderr.
    max_asymmetry_sigma: f64,
}

fn density(name: &str, cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let b = cfg.billiard()?;
    let len = b.table.boundary_length();
    let (d, stem, linf, asym) = match name {
        "phi-density" => {
            let d = phi_density(&b, &cfg.run_spec(), cfg.histogram.bins)?;
            let linf = d.linf_error(|p| 0.5 * p.cos());
            let a = d.max_asymmetry_sigma();
            (d, "phi_density", linf, a)
        }
        "r-density" => {
            let d = r_density(&b, &cfg.run_spec(), cfg.histogram.bins)?;
            let linf = d.linf_error(|_| 1.0 / len);
            (d, "r_density", linf, f64::NAN)
        }
        _ => {
            let d = theta_density(&b, &cfg.flow_run_spec()?, cfg.histogram.theta_bins)?;
            let linf = d.linf_error(|_| 0.5 / PI);
            let a = d.max_asymmetry_sigma();
            (d, "theta_density", linf, a)
        }
    };
    let flagged = Flagged::from_fraction(d.flagged_fraction, d.n_samples);
    let rows: Vec<Vec<f64>> = (0..d.axis.n_bins)
        .map(|i| {
            let (lo, hi) = d.axis.edges(i);
            vec![lo, hi, d.density[i], d.stderr[i]]
        })
        .collect();
    w.csv(
        &format!("{stem}.csv"),
        flagged,
        &["bin_left", "bin_right", "density", "stderr"],
        &rows,
    )?;
    let summary = DensitySummary {
        integral: d.integral(),
        density: &d,
        equilibrium_linf: linf,
        max_asymmetry_sigma: asym,
    };
    w.json(&format!("{stem}.json"), flagged, &summary)
}

#[derive(Serialize)]
struct SpatialSummary {
    n: usize,
    total_time: f64,
    n_samples: u64,
    integral: f64,
    /// Equilibrium value `1/|𝒟|`.
    uniform_density: f64,
    /// Largest relative deviation from `1/|𝒟|` over cells at least 90% free.
    max_rel_deviation_free: f64,
    cells_compared: usize,
}

fn spatial(cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let b = cfg.billiard()?;
    let s = spatial_density(&b, &cfg.flow_run_spec()?, cfg.histogram.grid)?;
    let flagged = Flagged::from_fraction(s.flagged_fraction, s.n_samples);
    let u = 1.0 / b.table.domain_area();
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let mut rows = Vec::with_capacity(s.density.len());
    for i in 0..s.density.len() {
        let (x, y) = s.cell_center(i);
        rows.push(vec![x, y, s.density[i], s.stderr[i]]);
        if s.free_area[i] >= 0.9 * s.cell_area() {
            worst = worst.max((s.density[i] - u).abs() / u);
            compared += 1;
        }
    }
    w.csv(
        "spatial_density.csv",
        flagged,
        &["x", "y", "density", "stderr"],
        &rows,
    )?;
    let summary = SpatialSummary {
        n: s.n,
        total_time: s.total_time,
        n_samples: s.n_samples,
        integral: s.integral(),
        uniform_density: u,
        max_rel_deviation_free: worst,
        cells_compared: compared,
    };
    w.json("spatial_density.json", flagged, &summary)
}

#[derive(Serialize)]
struct VelocitySummary {
    n: usize,
    min_samples: u64,
    insufficient_cells: usize,
    n_samples: u64,
    mean_velocity: lorentz_core::measure::MeanVelocity,
}

fn velocity(cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let b = cfg.billiard()?;
    let (g, mean) = velocity_field(
        &b,
        &cfg.flow_run_spec()?,
        cfg.histogram.grid,
        cfg.histogram.min_samples,
    )?;
    let flagged = Flagged::from_fraction(g.flagged_fraction, g.n_samples);
    // cells below the sample floor carry NaN velocities: "insufficient data"
    let rows: Vec<Vec<f64>> = (0..g.n * g.n)
        .map(|i| {
            let (x, y) = g.cell_center(i);
            vec![x, y, g.v1[i], g.v2[i], g.weight[i]]
        })
        .collect();
    w.csv(
        "velocity_field.csv",
        flagged,
        &["x", "y", "v1", "v2", "weight"],
        &rows,
    )?;
    let summary = VelocitySummary {
        n: g.n,
        min_samples: g.min_samples,
        insufficient_cells: g.insufficient.iter().filter(|b| **b).count(),
        n_samples: g.n_samples,
        mean_velocity: mean,
    };
    w.json("velocity_field.json", flagged, &summary)
}

fn run_current(cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let b = cfg.billiard()?;
    let c = current(&b, &cfg.flow_run_spec()?)?;
    let flagged = Flagged::from_fraction(c.j1.flagged_fraction, c.j1.n_samples);
    w.json("current.json", flagged, &c)
}

fn terms_rows(terms: &[KawasakiTerm]) -> Vec<Vec<f64>> {
    terms
        .iter()
        .map(|t| vec![t.k as f64, t.value, t.stderr])
        .collect()
}

fn kawasaki_spec(cfg: &RunConfig) -> KawasakiSpec {
    KawasakiSpec {
        epsilon: cfg.force.epsilon,
        n_samples: cfg.response.n_samples,
        k_max: cfg.response.k_max,
        jacobian: cfg.jacobian(),
        direct: cfg.run_spec(),
    }
}

fn run_kawasaki(cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let b = cfg.family_billiard()?;
    let fs = cfg.map_observables()?;
    let reports = kawasaki(&b, &fs, &kawasaki_spec(cfg))?;
    let flagged = reports.first().map_or(Flagged::none(0), |r| {
        Flagged::from_fraction(r.flagged_fraction, r.n_samples)
    });
    for r in &reports {
        w.csv(
            &format!("kawasaki_terms_{}.csv", r.observable),
            flagged,
            &["k", "T_k", "stderr"],
            &terms_rows(&r.terms),
        )?;
    }
    w.json("kawasaki.json", flagged, &reports)
}

fn response(cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let b = cfg.family_billiard()?;
    let f = MapObservable::parse(&cfg.response.observable)?;
    let spec = ResponseSpec {
        eps_grid: cfg.response.eps_grid.clone(),
        run: cfg.run_spec(),
        n_samples: cfg.response.n_samples,
        k_max: cfg.response.k_max,
        jacobian: cfg.jacobian(),
    };
    let r = linear_response_fit(&b, f, &spec)?;
    let flagged = Flagged::from_fraction(r.series_flagged_fraction, cfg.response.n_samples);
    let rows: Vec<Vec<f64>> = r
        .points
        .iter()
        .map(|p| vec![p.epsilon, p.nu_f.mean, p.nu_f.stderr])
        .collect();
    w.csv(
        "response_fit.csv",
        flagged,
        &["epsilon", "nu_f", "stderr"],
        &rows,
    )?;
    w.csv(
        "kawasaki_terms.csv",
        flagged,
        &["k", "T_k", "stderr"],
        &terms_rows(&r.series_terms),
    )?;
    w.json("linear_response.json", flagged, &r)
}

fn run_conductivity(cfg: &RunConfig, w: &mut Writer) -> anyhow::Result<()> {
    let b = cfg.family_billiard()?;
    let r =
        conductivity(&b, &cfg.response.eps_grid, &cfg.flow_run_spec()?).context("conductivity")?;
    let flagged = r.points.iter().fold(Flagged::none(0), |acc, p| {
        let f = Flagged::from_fraction(p.j1.flagged_fraction, p.j1.n_samples);
        Flagged {
            count: acc.count + f.count,
            total: acc.total + f.total,
        }
    });
    let rows: Vec<Vec<f64>> = r
        .points
        .iter()
        .map(|p| {
            vec![
                p.epsilon,
                p.j1.mean,
                p.j1.stderr,
                p.j2.mean,
                p.j2.stderr,
                p.ratio.mean,
                p.ratio.stderr,
            ]
        })
        .collect();
    w.csv(
        "conductivity.csv",
        flagged,
        &[
            "epsilon",
            "j1",
            "j1_stderr",
            "j2",
            "j2_stderr",
            "ratio",
            "ratio_stderr",
        ],
        &rows,
    )?;
    w.json("conductivity.json", flagged, &r)
}
