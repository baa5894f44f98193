use infodyn_core::clustering::{
    adjusted_rand_index, kmeans, labels_to_segments, ClusterModel, FeatureMatrix, KMeansConfig, Segmentation,
};
use infodyn_core::pdg::AlphaSpectrum;
use serde::Serialize;

use super::spectra::read_spectra_csv;
use crate::cli::{parse_k_range, ClusterArgs, Context};
use crate::config::ClusterConfig;
use crate::error::{CliError, CliResult};
use crate::io::{csv_bytes, write_atomic, write_json};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Oscillation {
    pub start_pair: usize,
    pub end_pair: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KSummary {
    pub k: usize,
    pub objective: f64,
    pub iterations: usize,
    pub cluster_sizes: Vec<usize>,
    pub segments: usize,
    pub oscillations: Vec<Oscillation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AriEntry {
    pub k: usize,
    pub ari: f64,
    pub compared: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecimatedSummary {
    pub every: usize,
    /// `rows` when every n-th spectrum row was taken, otherwise the file used.
    pub source: String,
    pub rows: usize,
    pub per_k: Vec<KSummary>,
    pub ari: Vec<AriEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterReport {
    pub input: String,
    pub seed: u64,
    pub rows: usize,
    pub features: usize,
    pub per_k: Vec<KSummary>,
    pub decimated: Option<DecimatedSummary>,
    pub config: ClusterConfig,
}

/// One series clustered for every k.
pub struct SeriesClustering {
    pub pair_indices: Vec<usize>,
    pub models: Vec<ClusterModel>,
    pub segmentations: Vec<Segmentation>,
}

pub fn resolve(ctx: &Context, args: &ClusterArgs) -> CliResult<ClusterConfig> {
    let mut cfg = ctx.config.cluster.clone();
    if let Some(k) = &args.k {
        (cfg.k_min, cfg.k_max) = parse_k_range(k)?;
    }
    if let Some(m) = args.mode {
        cfg.mode = m.into();
    }
    if args.standardize {
        cfg.standardize = true;
    }
    if args.decimate.is_some() {
        cfg.decimate = args.decimate;
    }
    validate(&cfg)?;
    Ok(cfg)
}

pub fn validate(cfg: &ClusterConfig) -> CliResult<()> {
    if cfg.k_min == 0 || cfg.k_min > cfg.k_max {
        return Err(CliError::validation("cluster.k_min", "need 1 ≤ k_min ≤ k_max"));
    }
    if cfg.max_iter == 0 {
        return Err(CliError::validation("cluster.max_iter", "must be positive"));
    }
    if !(cfg.tol.is_finite() && cfg.tol >= 0.0) {
        return Err(CliError::validation("cluster.tol", "must be finite and ≥ 0"));
    }
    if cfg.decimate == Some(0) {
        return Err(CliError::validation("cluster.decimate", "must be at least 1"));
    }
    if cfg.min_oscillation_runs < 2 {
        return Err(CliError::validation("cluster.min_oscillation_runs", "must be at least 2"));
    }
    Ok(())
}

pub fn features(spectra: &[AlphaSpectrum], cfg: &ClusterConfig, field: &str) -> CliResult<FeatureMatrix> {
    let x = FeatureMatrix::from_spectra(spectra, cfg.mode).map_err(|e| CliError::validation(field, e))?;
    if x.rows() < cfg.k_max {
        return Err(CliError::validation(field, format!("{} rows cannot form {} clusters", x.rows(), cfg.k_max)));
    }
    Ok(if cfg.standardize { x.standardized() } else { x })
}

pub fn cluster_series(
    spectra: &[AlphaSpectrum],
    x: &FeatureMatrix,
    cfg: &ClusterConfig,
    seed: u64,
) -> CliResult<SeriesClustering> {
    let mut models = Vec::new();
    let mut segmentations = Vec::new();
    for k in cfg.k_min..=cfg.k_max {
        let km = KMeansConfig { k, seed, max_iter: cfg.max_iter, tol: cfg.tol };
        let model = kmeans(x, &km).map_err(|e| CliError::runtime(format!("k-means k={k}"), e))?;
        segmentations.push(labels_to_segments(&model.labels).map_err(|e| CliError::runtime("segments", e))?);
        models.push(model);
    }
    Ok(SeriesClustering { pair_indices: spectra.iter().map(|s| s.pair_index).collect(), models, segmentations })
}

fn summaries(c: &SeriesClustering, min_runs: usize) -> Vec<KSummary> {
    c.models
        .iter()
        .zip(&c.segmentations)
        .map(|(m, seg)| KSummary {
            k: m.k,
            objective: m.objective,
            iterations: m.iterations,
            cluster_sizes: m.cluster_sizes(),
            segments: seg.segments.len(),
            oscillations: seg
                .oscillations(min_runs)
                .into_iter()
                .map(|(a, b)| Oscillation {
                    start_pair: c.pair_indices[seg.segments[a].start],
                    end_pair: c.pair_indices[seg.segments[b].end],
                    runs: b - a + 1,
                })
                .collect(),
        })
        .collect()
}

fn labels_csv(c: &SeriesClustering) -> Vec<u8> {
    let header: Vec<String> =
        std::iter::once("pair_index".into()).chain(c.models.iter().map(|m| format!("label_k{}", m.k))).collect();
    csv_bytes(
        &header,
        c.pair_indices.iter().enumerate().map(|(i, p)| {
            std::iter::once(p.to_string()).chain(c.models.iter().map(|m| m.labels[i].to_string())).collect::<Vec<_>>()
        }),
    )
}

fn segments_csv(c: &SeriesClustering) -> Vec<u8> {
    let header: Vec<String> = ["k", "start", "end", "label"].map(String::from).to_vec();
    let rows = c.models.iter().zip(&c.segmentations).flat_map(|(m, seg)| {
        seg.segments.iter().map(move |s| {
            vec![
                m.k.to_string(),
                c.pair_indices[s.start].to_string(),
                c.pair_indices[s.end].to_string(),
                s.label.to_string(),
            ]
        })
    });
    csv_bytes(&header, rows)
}

/// ARI between decimated row `j` and full row `every · j`, for each k.
pub fn compare(full: &SeriesClustering, dec: &SeriesClustering, every: usize) -> CliResult<Vec<AriEntry>> {
    full.models
        .iter()
        .zip(&dec.models)
        .map(|(f, d)| {
            let pairs: Vec<(usize, usize)> = (0..d.labels.len())
                .filter(|j| j * every < f.labels.len())
                .map(|j| (f.labels[j * every], d.labels[j]))
                .collect();
            let (a, b): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let ari = adjusted_rand_index(&a, &b).map_err(|e| CliError::runtime(format!("ARI k={}", f.k), e))?;
            Ok(AriEntry { k: f.k, ari, compared: a.len() })
        })
        .collect()
}

pub fn run(ctx: &Context, args: &ClusterArgs) -> CliResult<()> {
    let cfg = resolve(ctx, args)?;
    let seed = ctx.seed.unwrap_or(DEFAULT_SEED);
    let input = args.input.display().to_string();
    let spectra = read_spectra_csv(&args.input)?;
    let x = features(&spectra, &cfg, &input)?;

    let dec_input = match cfg.decimate {
        Some(n) => Some(match &args.decimated_input {
            Some(p) => {
                let s = read_spectra_csv(p)?;
                let field = p.display().to_string();
                let dx = features(&s, &cfg, &field)?;
                (n, field, s, dx)
            }
            None => {
                let idx: Vec<usize> = infodyn_core::clustering::decimate_indices(spectra.len(), n);
                let s: Vec<AlphaSpectrum> = idx.iter().map(|&i| spectra[i].clone()).collect();
                let dx = features(&s, &cfg, "decimated rows")?;
                (n, "rows".to_string(), s, dx)
            }
        }),
        None => None,
    };

    let full = cluster_series(&spectra, &x, &cfg, seed)?;
    let mut decimated = None;
    if let Some((n, source, s, dx)) = &dec_input {
        let mut dec = cluster_series(s, dx, &cfg, seed)?;
        let ari = compare(&full, &dec, *n)?;
        // Decimated rows are reported at their position in the full series.
        dec.pair_indices = (0..s.len()).map(|j| j * n).collect();
        write_atomic(&ctx.out_dir.join("labels_decimated.csv"), &labels_csv(&dec))?;
        write_atomic(&ctx.out_dir.join("segments_decimated.csv"), &segments_csv(&dec))?;
        decimated = Some(DecimatedSummary {
            every: *n,
            source: source.clone(),
            rows: s.len(),
            per_k: summaries(&dec, cfg.min_oscillation_runs),
            ari,
        });
    }
    write_atomic(&ctx.out_dir.join("labels.csv"), &labels_csv(&full))?;
    write_atomic(&ctx.out_dir.join("segments.csv"), &segments_csv(&full))?;
    let report = ClusterReport {
        input,
        seed,
        rows: x.rows(),
        features: x.cols(),
        per_k: summaries(&full, cfg.min_oscillation_runs),
        decimated,
        config: cfg,
    };
    write_json(&ctx.out_dir.join("cluster_report.json"), &report)
}
