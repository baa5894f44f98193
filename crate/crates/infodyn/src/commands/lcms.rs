use std::path::Path;

use infodyn_core::lcms::{
    classify, decompose, extract_peaks, fit_noise_envelope_with, score_label, subtract_blank, synth_generate,
    ComponentLabel, ComponentMask, LabelScore, LcmsGrid, NoiseModel, Peak,
};
use serde::{Deserialize, Serialize};

use crate::cli::{Context, LcmsAnalyzeArgs, LcmsSynthArgs};
use crate::config::{GridFormat, LcmsAnalyzeConfig, LcmsSynthConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    csv_bytes, f64_from_le_bytes, f64_le_bytes, parse_f64, read_bytes, read_csv, read_json, sibling, write_atomic,
    write_json,
};

pub const DEFAULT_SEED: u64 = 1;

/// Descriptor of a row-major `f64` grid stored next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDescriptor {
    pub file: String,
    pub dtype: String,
    pub rows: usize,
    pub cols: usize,
    pub mz: Vec<f64>,
    pub seconds_per_scan: f64,
}

fn time_header(mz_label: &str, cols: usize, seconds_per_scan: f64) -> Vec<String> {
    std::iter::once(mz_label.to_string()).chain((0..cols).map(|c| (c as f64 * seconds_per_scan).to_string())).collect()
}

/// Writes `values` as `<stem>.csv`, or `<stem>.json` plus `<stem>.f64`.
/// Returns the file name that describes the grid.
/// Writes `values` on the shape and axes of `axes`.
pub fn write_grid(dir: &Path, stem: &str, format: GridFormat, axes: &LcmsGrid, values: &[f64]) -> CliResult<String> {
    let (rows, cols, mz, sps) = (axes.rows(), axes.cols(), axes.mz(), axes.seconds_per_scan());
    match format {
        GridFormat::Csv => {
            let name = format!("{stem}.csv");
            let bytes = csv_bytes(
                &time_header("mz", cols, sps),
                (0..rows).map(|r| {
                    std::iter::once(mz[r].to_string())
                        .chain(values[r * cols..(r + 1) * cols].iter().map(|v| v.to_string()))
                        .collect::<Vec<_>>()
                }),
            );
            write_atomic(&dir.join(&name), &bytes)?;
            Ok(name)
        }
        GridFormat::Bin => {
            let data = format!("{stem}.f64");
            write_atomic(&dir.join(&data), &f64_le_bytes(values))?;
            let name = format!("{stem}.json");
            let d = GridDescriptor {
                file: data,
                dtype: "f64le".into(),
                rows,
                cols,
                mz: mz.to_vec(),
                seconds_per_scan: sps,
            };
            write_json(&dir.join(&name), &d)?;
            Ok(name)
        }
    }
}

/// Reads a CSV grid, or a JSON descriptor of a binary one.
pub fn read_grid(path: &Path) -> CliResult<(LcmsGrid, GridFormat)> {
    let field = path.display().to_string();
    if path.extension().is_some_and(|e| e == "json") {
        let d: GridDescriptor = read_json(path)?;
        if d.dtype != "f64le" {
            return Err(CliError::validation(&field, format!("unsupported dtype `{}`", d.dtype)));
        }
        let values = f64_from_le_bytes(&read_bytes(&sibling(path, &d.file))?)
            .ok_or_else(|| CliError::validation(&field, "data length is not a multiple of 8"))?;
        let grid = LcmsGrid::new(d.rows, d.cols, values, d.mz, d.seconds_per_scan)
            .map_err(|e| CliError::validation(&field, e))?;
        return Ok((grid, GridFormat::Bin));
    }
    let (header, rows, mz) = read_table(path)?;
    let cols = header.len() - 1;
    let sps = if cols > 1 { parse_f64(&field, &header[2])? - parse_f64(&field, &header[1])? } else { 1.0 };
    let mut values = Vec::with_capacity(rows.len() * cols);
    for r in &rows {
        for v in &r[1..] {
            values.push(parse_f64(&field, v)?);
        }
    }
    let grid = LcmsGrid::new(rows.len(), cols, values, mz, sps).map_err(|e| CliError::validation(&field, e))?;
    Ok((grid, GridFormat::Csv))
}

type Table = (Vec<String>, Vec<Vec<String>>, Vec<f64>);

fn read_table(path: &Path) -> CliResult<Table> {
    let field = path.display().to_string();
    let (header, rows) = read_csv(path)?;
    if header.len() < 2 || header[0] != "mz" {
        return Err(CliError::validation(&field, "header must be `mz` followed by scan times"));
    }
    if rows.iter().any(|r| r.len() != header.len()) {
        return Err(CliError::validation(&field, "ragged row"));
    }
    let mz = rows.iter().map(|r| parse_f64(&field, &r[0])).collect::<CliResult<_>>()?;
    Ok((header, rows, mz))
}

pub fn write_mask(path: &Path, mask: &ComponentMask, mz: &[f64], sps: f64) -> CliResult<()> {
    let bytes = csv_bytes(
        &time_header("mz", mask.cols, sps),
        (0..mask.rows).map(|r| {
            std::iter::once(mz[r].to_string())
                .chain((0..mask.cols).map(|c| mask.get(r, c).as_str().to_string()))
                .collect::<Vec<_>>()
        }),
    );
    write_atomic(path, &bytes)
}

pub fn read_mask(path: &Path) -> CliResult<ComponentMask> {
    let field = path.display().to_string();
    let (header, rows, _) = read_table(path)?;
    let mut labels = Vec::with_capacity(rows.len() * (header.len() - 1));
    for r in &rows {
        for l in &r[1..] {
            labels.push(
                ComponentLabel::parse(l.trim())
                    .ok_or_else(|| CliError::validation(&field, format!("unknown label `{l}`")))?,
            );
        }
    }
    Ok(ComponentMask { rows: rows.len(), cols: header.len() - 1, labels })
}

pub fn peaks_csv(peaks: &[Peak]) -> Vec<u8> {
    let header = ["m", "m_low", "m_high", "t_start", "t_end", "apex_t", "area", "max", "row_start", "row_end", "cells"]
        .map(String::from);
    csv_bytes(
        &header,
        peaks.iter().map(|p| {
            [
                p.mz.to_string(),
                p.mz_low.to_string(),
                p.mz_high.to_string(),
                p.t_start.to_string(),
                p.t_end.to_string(),
                p.apex_t.to_string(),
                p.area.to_string(),
                p.max.to_string(),
                p.row_start.to_string(),
                p.row_end.to_string(),
                p.cells.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelCounts {
    pub r: usize,
    pub q: usize,
    pub s: usize,
    pub spike: usize,
}

impl From<&ComponentMask> for LabelCounts {
    fn from(m: &ComponentMask) -> Self {
        Self {
            r: m.count(ComponentLabel::R),
            q: m.count(ComponentLabel::Q),
            s: m.count(ComponentLabel::S),
            spike: m.count(ComponentLabel::Spike),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct SynthReport<'a> {
    seed: u64,
    grid: String,
    envelope: f64,
    noise_fraction: f64,
    counts: LabelCounts,
    spikes: &'a [(usize, usize)],
    config: &'a LcmsSynthConfig,
}

pub fn resolve_synth(ctx: &Context, args: &LcmsSynthArgs) -> CliResult<LcmsSynthConfig> {
    let mut cfg = ctx.config.lcms_synth.clone();
    if let Some(f) = args.format {
        cfg.format = f;
    }
    cfg.generator.validate().map_err(|e| CliError::validation("lcms_synth.generator", e))?;
    Ok(cfg)
}

pub fn synth(ctx: &Context, args: &LcmsSynthArgs) -> CliResult<()> {
    let cfg = resolve_synth(ctx, args)?;
    let seed = ctx.seed.unwrap_or(DEFAULT_SEED);
    let out = synth_generate(&cfg.generator, seed).map_err(|e| CliError::runtime("generator", e))?;
    let dir = &ctx.out_dir;
    let g = &out.grid;
    let grid_name = write_grid(dir, "grid", cfg.format, g, g.values())?;
    write_mask(&dir.join("truth_mask.csv"), &out.truth, g.mz(), g.seconds_per_scan())?;
    write_atomic(&dir.join("truth_peaks.csv"), &peaks_csv(&out.peaks))?;
    let report = SynthReport {
        seed,
        grid: grid_name,
        envelope: out.envelope,
        noise_fraction: out.truth.fraction(ComponentLabel::R),
        counts: LabelCounts::from(&out.truth),
        spikes: &out.spikes,
        config: &cfg,
    };
    write_json(&dir.join("synth_report.json"), &report)
}

/// Fit, classification, decomposition and peak list of one grid.
pub struct Analysis {
    pub model: NoiseModel,
    pub mask: ComponentMask,
    pub components: infodyn_core::lcms::Components,
    pub peaks: Vec<Peak>,
}

pub fn analyze_grid(grid: &LcmsGrid, cfg: &LcmsAnalyzeConfig, field: &str) -> CliResult<Analysis> {
    let model =
        fit_noise_envelope_with(grid, cfg.envelope_k, cfg.clip_sigmas).map_err(|e| CliError::validation(field, e))?;
    let mask = classify(grid, &model, cfg.ridge_fraction).map_err(|e| CliError::validation("lcms_analyze", e))?;
    let components = decompose(grid, &mask, &model).map_err(|e| CliError::runtime("decompose", e))?;
    let peaks =
        extract_peaks(&components.s, grid.rows(), grid.cols(), grid.mz()).map_err(|e| CliError::runtime("peaks", e))?;
    Ok(Analysis { model, mask, components, peaks })
}

pub fn resolve_analyze(ctx: &Context, args: &LcmsAnalyzeArgs) -> CliResult<LcmsAnalyzeConfig> {
    let mut cfg = ctx.config.lcms_analyze.clone();
    if let Some(k) = args.envelope_k {
        cfg.envelope_k = k;
    }
    if let Some(f) = args.ridge_fraction {
        cfg.ridge_fraction = f;
    }
    if !(cfg.envelope_k.is_finite() && cfg.envelope_k >= 0.0) {
        return Err(CliError::validation("lcms_analyze.envelope_k", "must be finite and ≥ 0"));
    }
    if !(cfg.ridge_fraction > 0.0 && cfg.ridge_fraction <= 1.0) {
        return Err(CliError::validation("lcms_analyze.ridge_fraction", "must lie in (0, 1]"));
    }
    if !(cfg.clip_sigmas.is_finite() && cfg.clip_sigmas > 0.0) {
        return Err(CliError::validation("lcms_analyze.clip_sigmas", "must be positive"));
    }
    if !(cfg.m_tol.is_finite() && cfg.m_tol >= 0.0) {
        return Err(CliError::validation("lcms_analyze.m_tol", "must be finite and ≥ 0"));
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize)]
struct BlankSummary {
    input: String,
    blank_peaks: usize,
    removed: usize,
}

#[derive(Debug, Clone, Serialize)]
struct Scores {
    s: LabelScore,
    q: LabelScore,
    spike: LabelScore,
}

#[derive(Debug, Clone, Serialize)]
struct AnalyzeReport {
    input: String,
    noise_model: NoiseModel,
    noise_level: f64,
    ridge_levels: Vec<(usize, f64)>,
    counts: LabelCounts,
    max_residual: f64,
    peaks: usize,
    blank: Option<BlankSummary>,
    scores: Option<Scores>,
    config: LcmsAnalyzeConfig,
}

pub fn analyze(ctx: &Context, args: &LcmsAnalyzeArgs) -> CliResult<()> {
    let cfg = resolve_analyze(ctx, args)?;
    let input = args.input.display().to_string();
    let (grid, format) = read_grid(&args.input)?;
    let truth = match &args.truth {
        Some(p) => {
            let m = read_mask(p)?;
            if !m.matches(&grid) {
                return Err(CliError::validation(p.display().to_string(), "mask shape differs from the grid"));
            }
            Some(m)
        }
        None => None,
    };
    let blank_grid = match &args.blank {
        Some(p) => Some((p.display().to_string(), read_grid(p)?.0)),
        None => None,
    };
    let a = analyze_grid(&grid, &cfg, &input)?;
    let blank = match &blank_grid {
        Some((name, g)) => Some((name.clone(), analyze_grid(g, &cfg, name)?.peaks)),
        None => None,
    };

    let dir = &ctx.out_dir;
    let (mz, sps) = (grid.mz(), grid.seconds_per_scan());
    let c = &a.components;
    for (stem, values) in [("r", &c.r), ("q", &c.q), ("s", &c.s)] {
        write_grid(dir, stem, format, &grid, values)?;
    }
    write_mask(&dir.join("mask.csv"), &a.mask, mz, sps)?;
    let (final_peaks, blank_summary) = match &blank {
        Some((name, bp)) => {
            let kept = subtract_blank(&a.peaks, bp, cfg.m_tol, cfg.t_tol)
                .map_err(|e| CliError::validation("lcms_analyze.m_tol", e))?;
            write_atomic(&dir.join("peaks_before_blank.csv"), &peaks_csv(&a.peaks))?;
            write_atomic(&dir.join("blank_peaks.csv"), &peaks_csv(bp))?;
            let removed = a.peaks.len() - kept.len();
            (kept, Some(BlankSummary { input: name.clone(), blank_peaks: bp.len(), removed }))
        }
        None => (a.peaks.clone(), None),
    };
    write_atomic(&dir.join("peaks.csv"), &peaks_csv(&final_peaks))?;
    let scores = match &truth {
        Some(t) => {
            let score = |l| score_label(&a.mask, t, l).map_err(|e| CliError::runtime("scoring", e));
            Some(Scores {
                s: score(ComponentLabel::S)?,
                q: score(ComponentLabel::Q)?,
                spike: score(ComponentLabel::Spike)?,
            })
        }
        None => None,
    };
    let report = AnalyzeReport {
        input,
        noise_level: c.noise_level,
        ridge_levels: c.ridge_levels.clone(),
        counts: LabelCounts::from(&a.mask),
        max_residual: c.max_residual(&grid),
        peaks: final_peaks.len(),
        blank: blank_summary,
        scores,
        noise_model: a.model,
        config: cfg,
    };
    write_json(&dir.join("analysis_report.json"), &report)
}
