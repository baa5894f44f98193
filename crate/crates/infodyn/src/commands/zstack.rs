use std::path::Path;

use infodyn_core::zstack::{
    lil_rescale, quantize_to_u16, split_signs, stable_mask, transform_pair, LevelMap, OmegaImage, StackGeometry, ZStack,
};
use infodyn_core::Frame;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::{Context, ZStackArgs};
use crate::config::ZStackConfig;
use crate::error::{CliError, CliResult};
use crate::io::{
    csv_bytes, f64_le_bytes, read_bytes, read_json, read_pgm, sibling, u16_from_le_bytes, write_atomic, write_json,
    write_pgm,
};

/// Stack on disk: one PGM per plane and channel, or one raw volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackDescriptor {
    pub channels: Vec<String>,
    #[serde(default = "default_pitch")]
    pub pixel_pitch_nm: f64,
    #[serde(default = "default_z_step")]
    pub z_step_nm: f64,
    #[serde(default)]
    pub z_positions_nm: Option<Vec<f64>>,
    /// `planes[z][channel]` PGM paths relative to the descriptor.
    #[serde(default)]
    pub planes: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub raw: Option<RawVolume>,
}

fn default_pitch() -> f64 {
    StackGeometry::default().pixel_pitch_nm
}

fn default_z_step() -> f64 {
    StackGeometry::default().z_step_nm
}

/// Little-endian `u16` samples ordered plane, channel, row, column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVolume {
    pub file: String,
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub planes: usize,
}

/// Describes an `f64` ω volume written next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaDescriptor {
    pub file: String,
    pub dtype: String,
    pub order: String,
    pub channel: String,
    pub alpha: f64,
    pub width: usize,
    pub height: usize,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
struct PairSummary {
    pair: (usize, usize),
    stable_pixels: usize,
    min: f64,
    max: f64,
    abs_sum: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ChannelSummary {
    channel: String,
    volume: String,
    pairs: Vec<PairSummary>,
}

#[derive(Debug, Clone, Serialize)]
struct ZStackReport {
    input: String,
    planes: usize,
    geometry: StackGeometry,
    channels: Vec<ChannelSummary>,
    config: ZStackConfig,
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::validation(path.display().to_string(), msg)
}

pub fn load_stack(path: &Path) -> CliResult<ZStack> {
    let d: StackDescriptor = read_json(path)?;
    if d.channels.is_empty() {
        return Err(bad(path, "no channels"));
    }
    if let Some(c) = d
        .channels
        .iter()
        .find(|c| c.is_empty() || !c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-'))
    {
        return Err(bad(path, format!("channel name `{c}` must be ASCII letters, digits, `_` or `-`")));
    }
    if !(d.pixel_pitch_nm > 0.0 && d.z_step_nm > 0.0) {
        return Err(bad(path, "pixel_pitch_nm and z_step_nm must be positive"));
    }
    let planes: Vec<Vec<Frame>> = match (&d.planes, &d.raw) {
        (Some(files), None) => files
            .iter()
            .map(|plane| plane.iter().map(|f| read_pgm(&sibling(path, f))).collect::<CliResult<Vec<_>>>())
            .collect::<CliResult<_>>()?,
        (None, Some(raw)) => {
            let bytes = read_bytes(&sibling(path, &raw.file))?;
            let samples = u16_from_le_bytes(&bytes).ok_or_else(|| bad(path, "raw volume has an odd byte count"))?;
            let per = raw.width * raw.height;
            let expect = per * raw.planes * d.channels.len();
            if samples.len() != expect || per == 0 {
                return Err(bad(path, format!("raw volume holds {} samples, expected {expect}", samples.len())));
            }
            samples
                .chunks_exact(per * d.channels.len())
                .map(|plane| {
                    plane
                        .chunks_exact(per)
                        .map(|px| {
                            Frame::new(raw.width, raw.height, raw.bit_depth, px.to_vec()).map_err(|e| bad(path, e))
                        })
                        .collect::<CliResult<Vec<_>>>()
                })
                .collect::<CliResult<_>>()?
        }
        _ => return Err(bad(path, "give exactly one of `planes` or `raw`")),
    };
    let geometry = StackGeometry { pixel_pitch_nm: d.pixel_pitch_nm, z_step_nm: d.z_step_nm };
    let stack = match d.z_positions_nm {
        Some(z) => ZStack::with_positions(d.channels, geometry, z, planes),
        None => ZStack::new(d.channels, geometry, planes),
    };
    stack.map_err(|e| bad(path, e))
}

pub fn resolve(ctx: &Context, args: &ZStackArgs) -> CliResult<ZStackConfig> {
    let mut cfg = ctx.config.zstack.clone();
    if !args.channel.is_empty() {
        cfg.channels = args.channel.clone();
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(t) = args.stable_tolerance {
        cfg.stable_tolerance = t;
    }
    if args.no_renders {
        cfg.renders = false;
    }
    infodyn_core::pdg::check_alpha(cfg.alpha).map_err(|e| CliError::validation("zstack.alpha", e))?;
    if !(cfg.stable_tolerance >= 0.0) {
        return Err(CliError::validation("zstack.stable_tolerance", "must be ≥ 0"));
    }
    Ok(cfg)
}

fn level_csv(map: &LevelMap) -> Vec<u8> {
    csv_bytes(
        &["input_level".to_string(), "output_level".to_string()],
        map.entries.iter().map(|(i, o)| [i.to_string(), o.to_string()]),
    )
}

fn render(values: &[f64], width: usize, height: usize) -> CliResult<(Frame, LevelMap)> {
    let (px, map) = lil_rescale(&quantize_to_u16(values), 16).map_err(|e| CliError::runtime("render", e))?;
    let frame = Frame::new(width, height, 8, px.into_iter().map(u16::from).collect())
        .map_err(|e| CliError::runtime("render", e))?;
    Ok((frame, map))
}

pub fn run(ctx: &Context, args: &ZStackArgs) -> CliResult<()> {
    let cfg = resolve(ctx, args)?;
    let stack = load_stack(&args.input)?;
    let channels: Vec<String> = if cfg.channels.is_empty() { stack.channels().to_vec() } else { cfg.channels.clone() };
    let mut indices = Vec::new();
    for c in &channels {
        indices.push(stack.channel_index(c).map_err(|e| CliError::validation("zstack.channels", e))?);
    }
    if stack.len() < 2 {
        return Err(CliError::validation(args.input.display().to_string(), "need at least two z planes"));
    }

    let out = &ctx.out_dir;
    let mut summaries = Vec::new();
    for (name, &ci) in channels.iter().zip(&indices) {
        let images: Vec<OmegaImage> = (0..stack.len() - 1)
            .into_par_iter()
            .map(|z| {
                transform_pair(&stack, ci, z, cfg.alpha).map_err(|e| CliError::runtime(format!("{name} pair {z}"), e))
            })
            .collect::<CliResult<_>>()?;
        let first = &images[0];
        let (w, h) = (first.width, first.height);
        let volume = format!("omega_{name}.f64");
        let flat: Vec<f64> = images.iter().flat_map(|i| i.values.iter().copied()).collect();
        write_atomic(&out.join(&volume), &f64_le_bytes(&flat))?;
        write_json(
            &out.join(format!("omega_{name}.json")),
            &OmegaDescriptor {
                file: volume.clone(),
                dtype: "f64le".into(),
                order: "pair,row,col".into(),
                channel: name.clone(),
                alpha: cfg.alpha,
                width: w,
                height: h,
                pairs: images.iter().map(|i| i.pair).collect(),
            },
        )?;

        let mut pairs = Vec::new();
        for img in &images {
            let z = img.pair.0;
            let stable = stable_mask(img, cfg.stable_tolerance);
            pairs.push(PairSummary {
                pair: img.pair,
                stable_pixels: stable.iter().filter(|&&s| s).count(),
                min: img.values.iter().copied().fold(f64::INFINITY, f64::min),
                max: img.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                abs_sum: img.values.iter().map(|v| v.abs()).sum(),
            });
            if !cfg.renders {
                continue;
            }
            let (omega, map) = render(&img.values, w, h)?;
            write_pgm(&out.join(format!("render/{name}_{z:03}_omega.pgm")), &omega)?;
            write_atomic(&out.join(format!("levels/{name}_{z:03}_omega.csv")), &level_csv(&map))?;
            let (neg, pos) = split_signs(img);
            write_pgm(&out.join(format!("render/{name}_{z:03}_neg.pgm")), &render(&neg, w, h)?.0)?;
            write_pgm(&out.join(format!("render/{name}_{z:03}_pos.pgm")), &render(&pos, w, h)?.0)?;
            let mask = Frame::new(w, h, 8, stable.iter().map(|&s| if s { 255 } else { 0 }).collect())
                .map_err(|e| CliError::runtime("stable mask", e))?;
            write_pgm(&out.join(format!("render/{name}_{z:03}_stable.pgm")), &mask)?;
        }
        if cfg.renders {
            for z in 0..stack.len() {
                let f = stack.frame(z, ci);
                if f.bit_depth() <= 8 {
                    continue;
                }
                let (px, map) =
                    lil_rescale(f.pixels(), f.bit_depth()).map_err(|e| CliError::runtime("LIL export", e))?;
                let lil = Frame::new(f.width(), f.height(), 8, px.into_iter().map(u16::from).collect())
                    .map_err(|e| CliError::runtime("LIL export", e))?;
                write_pgm(&out.join(format!("lil/{name}_{z:03}.pgm")), &lil)?;
                write_atomic(&out.join(format!("levels/{name}_{z:03}_plane.csv")), &level_csv(&map))?;
            }
        }
        summaries.push(ChannelSummary { channel: name.clone(), volume, pairs });
    }
    let report = ZStackReport {
        input: args.input.display().to_string(),
        planes: stack.len(),
        geometry: stack.geometry().clone(),
        channels: summaries,
        config: cfg,
    };
    write_json(&out.join("zstack_report.json"), &report)
}
