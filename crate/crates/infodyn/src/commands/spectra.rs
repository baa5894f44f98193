use std::path::Path;

use infodyn_core::pdg::{check_alpha, spectrum_for_pair, AlphaSpectrum};
use infodyn_core::{Frame, FrameSeries};
use rayon::prelude::*;
use serde::Serialize;

use super::simulate::load_manifest;
use crate::cli::{Context, SpectraArgs};
use crate::config::SpectraConfig;
use crate::error::{CliError, CliResult};
use crate::io::{csv_bytes, parse_f64, read_csv, read_pgm, sibling, write_atomic, write_json};

#[derive(Serialize)]
struct SpectraReport<'a> {
    manifest: String,
    frames_used: usize,
    pairs: usize,
    output: &'a str,
    config: &'a SpectraConfig,
}

pub fn resolve(ctx: &Context, args: &SpectraArgs) -> CliResult<SpectraConfig> {
    let mut cfg = ctx.config.spectra.clone();
    if let Some(a) = &args.alphas {
        cfg.alphas = a.clone();
    }
    if let Some(d) = args.decimate {
        cfg.decimate = d;
    }
    if cfg.alphas.is_empty() {
        return Err(CliError::validation("spectra.alphas", "list is empty"));
    }
    for &a in &cfg.alphas {
        check_alpha(a).map_err(|e| CliError::validation("spectra.alphas", e))?;
    }
    if cfg.decimate == 0 {
        return Err(CliError::validation("spectra.decimate", "must be at least 1"));
    }
    Ok(cfg)
}

pub fn load_series(manifest_path: &Path) -> CliResult<FrameSeries> {
    let manifest = load_manifest(manifest_path)?;
    let frames: Vec<Frame> =
        manifest.frames.par_iter().map(|e| read_pgm(&sibling(manifest_path, &e.path))).collect::<CliResult<_>>()?;
    let mut series = FrameSeries::default();
    for (f, e) in frames.into_iter().zip(&manifest.frames) {
        if let Some(first) = series.frames.first() {
            first.check_compatible(&f).map_err(|err| CliError::validation(e.path.clone(), err))?;
        }
        series.push(f, e.step);
    }
    Ok(series)
}

/// Spectra of every consecutive pair, computed in parallel.
pub fn compute(series: &FrameSeries, alphas: &[f64]) -> CliResult<Vec<AlphaSpectrum>> {
    (0..series.len().saturating_sub(1))
        .into_par_iter()
        .map(|i| {
            spectrum_for_pair(&series.frames[i], &series.frames[i + 1], alphas, i)
                .map_err(|e| CliError::runtime(format!("pair {i}"), e))
        })
        .collect()
}

pub fn run(ctx: &Context, args: &SpectraArgs) -> CliResult<()> {
    let cfg = resolve(ctx, args)?;
    let series = load_series(&args.manifest)?;
    let series = if cfg.decimate > 1 { series.decimated(cfg.decimate) } else { series };
    if series.len() < 2 {
        return Err(CliError::validation("--manifest", format!("need at least two frames, have {}", series.len())));
    }
    let spectra = compute(&series, &cfg.alphas)?;
    let name = args.output.clone().unwrap_or_else(|| {
        if cfg.decimate > 1 {
            format!("spectra_dec{}.csv", cfg.decimate)
        } else {
            "spectra.csv".into()
        }
    });
    write_atomic(&ctx.out_dir.join(&name), &spectra_csv(&cfg.alphas, &spectra))?;
    let report = SpectraReport {
        manifest: args.manifest.display().to_string(),
        frames_used: series.len(),
        pairs: spectra.len(),
        output: &name,
        config: &cfg,
    };
    write_json(&ctx.out_dir.join(name.replace(".csv", "_report.json")), &report)
}

pub fn spectra_header(alphas: &[f64]) -> Vec<String> {
    std::iter::once("pair_index".to_string())
        .chain(alphas.iter().map(|a| format!("I_{a}")))
        .chain(alphas.iter().map(|a| format!("P_{a}")))
        .collect()
}

pub fn spectra_csv(alphas: &[f64], spectra: &[AlphaSpectrum]) -> Vec<u8> {
    csv_bytes(
        &spectra_header(alphas),
        spectra.iter().map(|s| {
            std::iter::once(s.pair_index.to_string())
                .chain(s.pdge.iter().chain(&s.pdged).map(|v| v.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn read_spectra_csv(path: &Path) -> CliResult<Vec<AlphaSpectrum>> {
    let field = path.display().to_string();
    let (header, rows) = read_csv(path)?;
    let bad_header = || CliError::validation(&field, "header must be pair_index, I_<α>..., P_<α>...");
    if header.len() < 3 || header.len() % 2 == 0 || header[0] != "pair_index" {
        return Err(bad_header());
    }
    let m = (header.len() - 1) / 2;
    let mut alphas = Vec::with_capacity(m);
    for j in 0..m {
        let (i, p) = (&header[1 + j], &header[1 + m + j]);
        let a = i.strip_prefix("I_").ok_or_else(bad_header)?;
        if p.strip_prefix("P_") != Some(a) {
            return Err(bad_header());
        }
        alphas.push(parse_f64(&field, a)?);
    }
    rows.iter()
        .map(|r| {
            if r.len() != header.len() {
                return Err(CliError::validation(&field, "ragged row"));
            }
            let pair_index = r[0].parse().map_err(|_| CliError::validation(&field, "bad pair_index"))?;
            let vals = r[1..].iter().map(|v| parse_f64(&field, v)).collect::<CliResult<Vec<f64>>>()?;
            Ok(AlphaSpectrum {
                pair_index,
                alphas: alphas.clone(),
                pdge: vals[..m].to_vec(),
                pdged: vals[m..].to_vec(),
            })
        })
        .collect()
}
