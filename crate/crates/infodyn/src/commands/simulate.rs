use std::path::Path;

use infodyn_core::hodgepodge::{self, HodgepodgeError, HodgepodgeParams};
use serde::{Deserialize, Serialize};

use crate::cli::{Context, SimulateArgs};
use crate::config::SimulateConfig;
use crate::error::{CliError, CliResult};
use crate::io::{write_json, write_pgm};

pub const MANIFEST: &str = "manifest.json";
const FRAME_DIR: &str = "frames";
const SIDECAR: &str = "frames/series.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub path: String,
    pub step: u64,
}

/// Frame paths in time order, relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub frames: Vec<FrameEntry>,
    pub metadata: String,
    pub config: SimulateConfig,
}

/// Metadata shared by every frame of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub params: HodgepodgeParams,
    pub seed: u64,
    pub bit_depth: u8,
    pub steps: Vec<u64>,
}

pub fn resolve(ctx: &Context, args: &SimulateArgs) -> CliResult<SimulateConfig> {
    let mut cfg = ctx.config.simulate_bz.clone();
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    if let Some(e) = args.emit_every {
        cfg.emit_every = e;
    }
    if let Some(w) = args.width {
        cfg.params.width = w;
    }
    if let Some(h) = args.height {
        cfg.params.height = h;
    }
    if let Some(seed) = ctx.seed {
        cfg.params.seed = seed;
    }
    if cfg.steps == 0 {
        return Err(CliError::validation("simulate_bz.steps", "must be positive"));
    }
    if cfg.emit_every == 0 {
        return Err(CliError::validation("simulate_bz.emit_every", "must be positive"));
    }
    cfg.params.validate().map_err(|e| match e {
        HodgepodgeError::InvalidParams { field, reason } => {
            CliError::validation(format!("simulate_bz.params.{field}"), reason)
        }
        other => CliError::validation("simulate_bz.params", other),
    })?;
    Ok(cfg)
}

pub fn run(ctx: &Context, args: &SimulateArgs) -> CliResult<()> {
    let cfg = resolve(ctx, args)?;
    let out = &ctx.out_dir;
    let depth = cfg.params.bit_depth();
    let mut entries = Vec::new();
    let mut failure = None;
    hodgepodge::run_with(&cfg.params, cfg.steps, cfg.emit_every, |lattice| {
        if failure.is_some() {
            return;
        }
        let rel = format!("{FRAME_DIR}/frame_{:06}.pgm", entries.len());
        match write_pgm(&out.join(&rel), &lattice.to_frame(depth)) {
            Ok(()) => entries.push(FrameEntry { path: rel, step: lattice.step }),
            Err(e) => failure = Some(e),
        }
    })
    .map_err(|e| CliError::runtime("simulation", e))?;
    if let Some(e) = failure {
        return Err(e);
    }
    log::info!("wrote {} frames to {}", entries.len(), out.join(FRAME_DIR).display());
    let meta = SeriesMetadata {
        params: cfg.params.clone(),
        seed: cfg.params.seed,
        bit_depth: depth,
        steps: entries.iter().map(|e| e.step).collect(),
    };
    write_json(&out.join(SIDECAR), &meta)?;
    write_json(&out.join(MANIFEST), &Manifest { frames: entries, metadata: SIDECAR.into(), config: cfg })
}

pub fn load_manifest(path: &Path) -> CliResult<Manifest> {
    crate::io::read_json(path)
}
