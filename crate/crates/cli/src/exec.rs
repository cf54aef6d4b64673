//! Experiment execution: one function per kind, a shared artifact layout,
//! and the run wrapper that owns the directory lock and the manifest.
//!
//! Every result file is recorded in the manifest with a content hash as it
//! is written. When a run aborts, the partial manifest is still written
//! with the error embedded, so the directory explains itself.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use aggrolab::analytics::{classify_memory, classify_region, RegimeReport};
use aggrolab::ar1sim::{aggregate, growth_case, simulate_panel, AggregationScheme, GrowthCase};
use aggrolab::disaggregation::{beran_mle, gegenbauer_estimate, robinson_moments};
use aggrolab::fields::{
    field_spectral_density, green, green_series_terms, simulate_field_panel, FieldModel, FieldPanel,
};
use aggrolab::io::{write_pairs_csv, write_panel, write_series_csv};
use aggrolab::rng::Stream;
use aggrolab::{Error, Result};

use crate::config::{ExperimentConfig, GreenExport, Kind, Method, SpectralExport};
use crate::manifest::{Lock, Manifest, SUMMARY_FILE};

/// Runs an experiment end to end and returns the directory it wrote into
/// together with its manifest. For `report`, the directory is the finished
/// run named by the config and nothing is recomputed.
pub fn run(config: ExperimentConfig, seed: u64, workers: usize) -> Result<(PathBuf, Manifest)> {
    if config.kind == Kind::Report {
        let dir = config.run.clone().expect("validated");
        let _lock = Lock::acquire(&dir)?;
        let manifest = Manifest::load(&dir)?;
        manifest.verify_outputs(&dir)?;
        std::fs::write(dir.join(SUMMARY_FILE), manifest.render_summary())?;
        return Ok((dir, manifest));
    }

    let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let _lock = Lock::acquire(&dir)?;

    let mut manifest = Manifest::new(config.clone(), seed, workers);
    let t0 = Instant::now();
    let result = execute(&config, seed, &dir, &mut manifest);
    manifest.elapsed_s = t0.elapsed().as_secs_f64();
    match result {
        Ok(()) => {
            manifest.write(&dir)?;
            Ok((dir, manifest))
        }
        Err(e) => {
            // Best effort: the run error outranks a manifest write failure.
            manifest.error = Some(e.to_string());
            let _ = manifest.write(&dir);
            Err(e)
        }
    }
}

fn execute(
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    match config.kind {
        Kind::Simulate => simulate(config, seed, dir, manifest),
        Kind::Aggregate => aggregate_kind(config, seed, dir, manifest),
        Kind::Diagnose => diagnose(config, dir, manifest),
        Kind::Disaggregate => disaggregate(config, seed, dir, manifest),
        Kind::Field => field(config, seed, dir, manifest),
        Kind::Report => unreachable!("handled in run()"),
    }
}

fn simulate(
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    let mixing = config.mixing.as_ref().expect("validated");
    let innovation = config.innovation.as_ref().expect("validated");
    let (n_units, n) = (
        config.n_units.expect("validated"),
        config.n.expect("validated"),
    );
    for r in 0..config.replicates {
        let stream = Stream::new(seed).replicate(r as u64);
        let panel = simulate_panel(mixing, innovation, n_units, n, stream)?;
        let stem = format!("panel_{r:03}");
        write_panel(&panel, &dir.join(&stem))?;
        manifest.record_output(dir, &format!("{stem}.bin"))?;
        manifest.record_output(dir, &format!("{stem}.json"))?;
        manifest.note(format!(
            "panel {r}: {n_units} units x {n} points, {} coefficients clipped",
            panel.clipped
        ));
    }
    Ok(())
}

fn scheme_name(scheme: AggregationScheme) -> &'static str {
    match scheme {
        AggregationScheme::FiniteVariance => "finite_variance",
        AggregationScheme::Stable => "stable",
        AggregationScheme::DegenerateCheck => "degenerate_check",
    }
}

fn aggregate_kind(
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    let mixing = config.mixing.as_ref().expect("validated");
    let innovation = config.innovation.as_ref().expect("validated");
    let (n_units, n) = (
        config.n_units.expect("validated"),
        config.n.expect("validated"),
    );
    let scheme = config.scheme.expect("validated");
    for r in 0..config.replicates {
        let stream = Stream::new(seed).replicate(r as u64);
        let panel = simulate_panel(mixing, innovation, n_units, n, stream)?;
        let agg = aggregate(&panel, scheme)?;
        let file = format!("aggregate_{r:03}.csv");
        write_series_csv(&dir.join(&file), &agg.values)?;
        manifest.record_output(dir, &file)?;
        manifest.note(format!(
            "aggregate {r}: {n} points from {n_units} units, scheme {} with exponent {}, \
             {} coefficients clipped",
            scheme_name(scheme),
            agg.exponent,
            panel.clipped
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    memory: Option<RegimeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    region: Option<RegimeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    growth: Option<GrowthCase>,
}

fn h_text(report: &RegimeReport) -> String {
    match report.h {
        Some(h) => format!("H = {h}"),
        None => "H undefined".to_string(),
    }
}

fn diagnose(config: &ExperimentConfig, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let beta = config.beta.expect("validated");
    let mut report = DiagnoseReport {
        memory: None,
        region: None,
        growth: None,
    };

    if let Some(alpha) = config.alpha {
        let memory = classify_memory(alpha, beta)?;
        manifest.note(format!(
            "memory: {} ({}), {}",
            format!("{:?}", memory.memory).to_lowercase(),
            memory.limit_process,
            h_text(&memory)
        ));
        report.memory = Some(memory);
    }
    if let (Some(sigma), Some(alpha0)) = (config.sigma, config.alpha0) {
        let region = classify_region(beta, sigma, alpha0)?;
        manifest.note(format!(
            "region: {} ({}), {}",
            region.region,
            region.limit_process,
            h_text(&region)
        ));
        report.region = Some(region);
    }
    if let (Some(n_units), Some(n)) = (config.n_units, config.n) {
        let growth = growth_case(n_units, n, beta)?;
        manifest.note(format!(
            "growth: {}, mu = {}, normalization {}",
            format!("{:?}", growth.regime).to_lowercase(),
            growth.mu,
            growth.normalization
        ));
        report.growth = Some(growth);
    }

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Format(format!("regime report serialization failed: {e}")))?;
    std::fs::write(dir.join("regime.json"), json + "\n")?;
    manifest.record_output(dir, "regime.json")?;
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn disaggregate(
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<()> {
    let mixing = config.mixing.as_ref().expect("validated");
    let innovation = config.innovation.as_ref().expect("validated");
    let (n_units, n) = (
        config.n_units.expect("validated"),
        config.n.expect("validated"),
    );
    let panel = simulate_panel(mixing, innovation, n_units, n, Stream::new(seed))?;
    manifest.note(format!(
        "panel: {n_units} units x {n} points, {} coefficients clipped",
        panel.clipped
    ));

    match config.method.as_ref().expect("validated") {
        Method::Robinson { k_max } => {
            let moments = robinson_moments(&panel, *k_max)?;
            let rows: Vec<(f64, f64)> = moments
                .iter()
                .enumerate()
                .map(|(k, m)| (k as f64, *m))
                .collect();
            write_pairs_csv(&dir.join("moments.csv"), ("k", "mu_hat"), &rows)?;
            manifest.record_output(dir, "moments.csv")?;
            let flat: Vec<String> = moments.iter().map(|m| format!("{m:.6}")).collect();
            manifest.note(format!("moment estimates 0..={k_max}: {}", flat.join(", ")));
        }
        Method::Beran { h } => {
            let fit = beran_mle(&panel, *h)?;
            let json = serde_json::to_string_pretty(&fit)
                .map_err(|e| Error::Format(format!("fit serialization failed: {e}")))?;
            std::fs::write(dir.join("fit.json"), json + "\n")?;
            manifest.record_output(dir, "fit.json")?;
            manifest.note(format!(
                "beta-type fit at h = {h}: p = {:.4} (se {:.4}), q = {:.4} (se {:.4}), \
                 clamped fraction {:.4}",
                fit.p, fit.se.0, fit.q, fit.se.1, fit.clamped_fraction
            ));
        }
        Method::Gegenbauer {
            alpha_weight,
            rule,
            grid_points,
            grid_limit,
        } => {
            let (points, limit) = (*grid_points, *grid_limit);
            let agg = aggregate(&panel, AggregationScheme::FiniteVariance)?;
            let grid = linspace(-limit, limit, points);
            let est = gegenbauer_estimate(&agg.values, *alpha_weight, *rule, &grid)?;
            let rows: Vec<(f64, f64)> = grid
                .iter()
                .zip(&est.values)
                .map(|(x, v)| (*x, *v))
                .collect();
            write_pairs_csv(&dir.join("density.csv"), ("x", "phi_hat"), &rows)?;
            manifest.record_output(dir, "density.csv")?;
            let json = serde_json::to_string_pretty(&est)
                .map_err(|e| Error::Format(format!("estimate serialization failed: {e}")))?;
            std::fs::write(dir.join("estimate.json"), json + "\n")?;
            manifest.record_output(dir, "estimate.json")?;
            manifest.note(format!(
                "series estimate: order K = {}, variance plug-in {:.6}, {} grid points on \
                 [{}, {}]",
                est.k, est.sigma2_used, points, -limit, limit
            ));
        }
    }
    Ok(())
}

/// Sidecar for a stored field aggregate; the grid itself lives in
/// `field.bin` as row-major little-endian f64.
#[derive(Serialize)]
struct FieldSidecar<'a> {
    format: &'static str,
    variant: aggrolab::fields::FieldVariant,
    rows: usize,
    cols: usize,
    n_units: usize,
    mixing: &'a aggrolab::mixing::MixingSpec,
    innovation: &'a aggrolab::innovations::InnovationSpec,
    master_seed: u64,
    replicate: u64,
    clipped: usize,
    mass_deficit: f64,
    alpha: f64,
}

const FIELD_FORMAT: &str = "aggrolab.field.v1";

fn write_field_grid(dir: &Path, panel: &FieldPanel) -> Result<()> {
    let sidecar = FieldSidecar {
        format: FIELD_FORMAT,
        variant: panel.variant,
        rows: panel.rows,
        cols: panel.cols,
        n_units: panel.n_units(),
        mixing: &panel.mixing,
        innovation: &panel.innovation,
        master_seed: panel.master_seed,
        replicate: panel.replicate,
        clipped: panel.clipped,
        mass_deficit: panel.mass_deficit,
        alpha: panel.alpha,
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Format(format!("field sidecar serialization failed: {e}")))?;
    std::fs::write(dir.join("field.json"), json + "\n")?;

    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("field.bin"))?);
    for v in &panel.aggregate {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn write_green_csv(
    dir: &Path,
    variant: aggrolab::fields::FieldVariant,
    g: &GreenExport,
) -> Result<usize> {
    let radius = green_series_terms(g.a, g.tol)?;
    let table = green(variant, g.a, radius, g.tol)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("green.csv"))?);
    writeln!(w, "t,s,value")?;
    let r = table.radius() as i64;
    for t in -r..=r {
        for s in -r..=r {
            writeln!(w, "{t},{s},{}", table.get(t, s))?;
        }
    }
    w.flush()?;
    Ok(table.terms)
}

fn field(config: &ExperimentConfig, seed: u64, dir: &Path, manifest: &mut Manifest) -> Result<()> {
    let variant = config.variant.expect("validated");
    let mixing = config.mixing.clone().expect("validated");
    let innovation = config.innovation.clone().expect("validated");
    let model = FieldModel::new(variant, mixing, innovation)?;
    let (rows, cols) = (
        config.rows.expect("validated"),
        config.cols.expect("validated"),
    );
    let n_units = config.n_units.expect("validated");
    let tol = config.tol.expect("validated");

    let panel = simulate_field_panel(&model, rows, cols, n_units, tol, Stream::new(seed))?;
    write_field_grid(dir, &panel)?;
    manifest.record_output(dir, "field.bin")?;
    manifest.record_output(dir, "field.json")?;
    manifest.note(format!(
        "field {}: {rows}x{cols} aggregate of {n_units} units, {} coefficients clipped, \
         mass deficit {:.3e}",
        variant.as_str(),
        panel.clipped,
        panel.mass_deficit
    ));

    if let Some(g) = &config.green {
        let terms = write_green_csv(dir, variant, g)?;
        manifest.record_output(dir, "green.csv")?;
        manifest.note(format!(
            "green table: a = {}, {} series terms, tol {}",
            g.a, terms, g.tol
        ));
    }

    if let Some(SpectralExport { points, max_freq }) = &config.spectral {
        let sigma2 = model
            .innovation
            .variance()
            .ok_or_else(|| Error::invalid("spectral export needs a finite-variance innovation"))?;
        let mixing = &model.mixing;
        let mut rows_csv = Vec::with_capacity(*points);
        for i in 1..=*points {
            let u = max_freq * i as f64 / *points as f64;
            let f = field_spectral_density(variant, mixing, sigma2, u, u)?;
            rows_csv.push((u, f));
        }
        write_pairs_csv(&dir.join("spectral.csv"), ("u", "density"), &rows_csv)?;
        manifest.record_output(dir, "spectral.csv")?;
        manifest.note(format!(
            "spectral slice along x = y = u: {points} points up to u = {max_freq}"
        ));
    }
    Ok(())
}
