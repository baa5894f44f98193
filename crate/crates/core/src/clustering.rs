//! Segmentation of a frame-pair series by k-means on α-spectra.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pdg::AlphaSpectrum;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("need at least k = {k} rows, got {rows}")]
    TooFewRows { rows: usize, k: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("feature matrix is not rectangular or has non-finite / negative entries")]
    InvalidFeatures,
    #[error("spectra disagree on the alpha grid")]
    AlphaMismatch,
    #[error("label sequence is empty")]
    Empty,
    #[error("labelings have different lengths ({0} vs {1}) or fewer than two items")]
    LengthMismatch(usize, usize),
}

/// Which spectrum blocks form the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// `I_α` only.
    #[default]
    Pdge,
    /// `P_α` only.
    Pdged,
    /// `I_α` followed by `P_α`.
    Both,
}

/// One row per consecutive frame pair, in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub alphas: Vec<f64>,
    pub mode: FeatureMode,
}

impl FeatureMatrix {
    /// Plain matrix constructor. Entries must be finite; negative entries are
    /// allowed here so standardised matrices remain representable.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ClusterError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) || rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ClusterError::InvalidFeatures);
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat(), alphas: Vec::new(), mode: FeatureMode::Pdge })
    }

    pub fn from_spectra(spectra: &[AlphaSpectrum], mode: FeatureMode) -> Result<Self, ClusterError> {
        let alphas = spectra.first().map(|s| s.alphas.clone()).unwrap_or_default();
        if spectra.iter().any(|s| s.alphas != alphas) {
            return Err(ClusterError::AlphaMismatch);
        }
        let rows: Vec<Vec<f64>> = spectra
            .iter()
            .map(|s| match mode {
                FeatureMode::Pdge => s.pdge.clone(),
                FeatureMode::Pdged => s.pdged.clone(),
                FeatureMode::Both => s.pdge.iter().chain(&s.pdged).copied().collect(),
            })
            .collect();
        if rows.iter().flatten().any(|&v| v < 0.0) {
            return Err(ClusterError::InvalidFeatures);
        }
        let mut m = Self::from_rows(&rows)?;
        m.alphas = alphas;
        m.mode = mode;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let data = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self { rows: indices.len(), cols: self.cols, data, alphas: self.alphas.clone(), mode: self.mode }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { data: self.data.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    /// Column-wise z-scores; constant columns become zero.
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        if self.rows == 0 {
            return out;
        }
        let n = self.rows as f64;
        for c in 0..self.cols {
            let mean = (0..self.rows).map(|r| self.data[r * self.cols + c]).sum::<f64>() / n;
            let var = (0..self.rows).map(|r| self.data[r * self.cols + c] - mean).map(|d| d * d).sum::<f64>() / n;
            let sd = libm::sqrt(var);
            for r in 0..self.rows {
                let v = &mut out.data[r * self.cols + c];
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves by this Euclidean distance or more.
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, max_iter: 300, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dims: usize,
    /// Row-major `k × dims`.
    pub centroids: Vec<f64>,
    pub labels: Vec<usize>,
    /// Sum of squared Euclidean distances of rows to their centroid.
    pub objective: f64,
    /// Objective after every iteration; non-increasing.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
}

impl ClusterModel {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dims..(c + 1) * self.dims]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// Each iteration assigns rows to their nearest centroid (ties go to the
/// lower index), repairs empty clusters by moving the row farthest from its
/// centroid into them, and recomputes centroids as means. The objective
/// recorded after every iteration therefore never increases.
pub fn kmeans(x: &FeatureMatrix, config: &KMeansConfig) -> Result<ClusterModel, ClusterError> {
    let k = config.k;
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if x.rows < k {
        return Err(ClusterError::TooFewRows { rows: x.rows, k });
    }
    let (n, d) = (x.rows, x.cols);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = kmeans_plus_plus(x, k, &mut rng);
    let mut labels = alloc::vec![0usize; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..config.max_iter.max(1) {
        iterations += 1;
        for (i, label) in labels.iter_mut().enumerate() {
            *label = nearest(x.row(i), &centroids, d).0;
        }
        repair_empty_clusters(x, &mut labels, &mut centroids, k);
        let means = cluster_means(x, &labels, k);
        let objective: f64 = (0..n).map(|i| sq_dist(x.row(i), &means[labels[i] * d..(labels[i] + 1) * d])).sum();
        history.push(objective);
        let shift = (0..k)
            .map(|c| libm::sqrt(sq_dist(&centroids[c * d..(c + 1) * d], &means[c * d..(c + 1) * d])))
            .fold(0.0, f64::max);
        centroids = means;
        if shift < config.tol {
            break;
        }
    }

    Ok(ClusterModel {
        k,
        dims: d,
        centroids,
        labels,
        objective: *history.last().expect("at least one iteration"),
        objective_history: history,
        iterations,
        seed: config.seed,
    })
}

fn nearest(row: &[f64], centroids: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(d.max(1)).enumerate() {
        let dist = if d == 0 { 0.0 } else { sq_dist(row, centroid) };
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn kmeans_plus_plus(x: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, d) = (x.rows, x.cols);
    let mut centroids = Vec::with_capacity(k * d);
    centroids.extend_from_slice(x.row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), &centroids[..d])).collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = i;
                    break;
                }
            }
            // Never pick a row already sitting on a centroid.
            if dist[chosen] == 0.0 {
                chosen = dist.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(x.row(pick));
        for (i, slot) in dist.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(x.row(i), &centroids[start..start + d]));
        }
    }
    centroids
}

/// Moves rows into empty clusters until every cluster has a member. Each
/// repair takes the row farthest from its current centroid among clusters
/// that can spare one, and places the empty cluster's centroid on it.
fn repair_empty_clusters(x: &FeatureMatrix, labels: &mut [usize], centroids: &mut [f64], k: usize) {
    let d = x.cols;
    let mut sizes = alloc::vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .map(|i| (i, sq_dist(x.row(i), &centroids[labels[i] * d..(labels[i] + 1) * d])))
            .fold(None, |best: Option<(usize, f64)>, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            })
            .map(|(i, _)| i)
            .expect("rows >= k guarantees a donor");
        sizes[labels[donor]] -= 1;
        labels[donor] = empty;
        sizes[empty] = 1;
        centroids[empty * d..(empty + 1) * d].copy_from_slice(x.row(donor));
    }
}

fn cluster_means(x: &FeatureMatrix, labels: &[usize], k: usize) -> Vec<f64> {
    let d = x.cols;
    let mut sums = alloc::vec![0.0; k * d];
    let mut counts = alloc::vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        for s in &mut sums[c * d..(c + 1) * d] {
            *s /= count as f64;
        }
    }
    sums
}

/// Indices `0, n, 2n, ...` below `count`; `n = 1` keeps everything.
pub fn decimate_indices(count: usize, n: usize) -> Vec<usize> {
    (0..count).step_by(n.max(1)).collect()
}

/// Maximal run of equal consecutive labels, inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub segments: Vec<Segment>,
}

impl Segmentation {
    /// Expands the runs back into one label per row.
    pub fn flatten(&self) -> Vec<usize> {
        self.segments.iter().flat_map(|s| core::iter::repeat_n(s.label, s.len())).collect()
    }

    /// Stretches of at least `min_runs` consecutive segments that alternate
    /// between exactly two labels (A, B, A, B, ...). Returned as
    /// `(first segment, last segment)` index pairs.
    pub fn oscillations(&self, min_runs: usize) -> Vec<(usize, usize)> {
        let segs = &self.segments;
        let mut out = Vec::new();
        let mut start = 0;
        while start + 1 < segs.len() {
            let (a, b) = (segs[start].label, segs[start + 1].label);
            let mut end = start + 1;
            while end + 1 < segs.len() && segs[end + 1].label == segs[end - 1].label {
                end += 1;
            }
            if end - start + 1 >= min_runs.max(2) {
                out.push((start, end));
            }
            debug_assert!(a != b);
            start = end;
        }
        out
    }
}

pub fn labels_to_segments(labels: &[usize]) -> Result<Segmentation, ClusterError> {
    if labels.is_empty() {
        return Err(ClusterError::Empty);
    }
    let mut segments: Vec<Segment> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match segments.last_mut() {
            Some(s) if s.label == label => s.end = i,
            _ => segments.push(Segment { start: i, end: i, label }),
        }
    }
    Ok(Segmentation { segments })
}

/// Adjusted Rand index between two labelings of the same items.
///
/// Two partitions that each put everything in one cluster (or everything in
/// singletons) are identical and score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, ClusterError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(ClusterError::LengthMismatch(a.len(), b.len()));
    }
    let comb2 = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| comb2(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| comb2(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| comb2(n)).sum();
    // Every term is multiplied through by C(n, 2).
    let pairs = comb2(a.len() as u64);
    let expected = sum_a * sum_b;
    let max = (sum_a + sum_b) * pairs / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index * pairs - expected) / (max - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn assert_monotone(model: &ClusterModel) {
        for w in model.objective_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300, "objective rose: {:?}", model.objective_history);
        }
    }

    fn two_clouds(seed: u64, per: usize) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..2 * per {
            let c = i % 2;
            let center = if c == 0 { 0.0 } else { 100.0 };
            rows.push((0..3).map(|_| center + noise.sample(&mut rng)).collect::<Vec<f64>>());
            truth.push(c);
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x = matrix(&[&[1.0, 2.0], &[3.0, 6.0], &[5.0, 1.0]]);
        let m = kmeans(&x, &KMeansConfig::new(1, 7)).unwrap();
        assert_monotone(&m);
        assert!((m.centroid(0)[0] - 3.0).abs() < 1e-12 && (m.centroid(0)[1] - 3.0).abs() < 1e-12);
        // Total variance per column times rows: (8/3 + 14/3) * 3 = 22.
        assert!((m.objective - 22.0).abs() < 1e-12);
    }

    #[test]
    fn well_separated_clouds_are_recovered() {
        for seed in 0..20 {
            let (x, truth) = two_clouds(seed, 25);
            let m = kmeans(&x, &KMeansConfig::new(2, seed)).unwrap();
            assert_monotone(&m);
            assert_eq!(adjusted_rand_index(&m.labels, &truth).unwrap(), 1.0);
            // Exhaustive check: every pair agrees on "same cluster".
            for i in 0..truth.len() {
                for j in 0..truth.len() {
                    assert_eq!(m.labels[i] == m.labels[j], truth[i] == truth[j]);
                }
            }
        }
    }

    #[test]
    fn one_cluster_per_row() {
        let x = matrix(&[&[0.0], &[1.0], &[5.0], &[9.0]]);
        let m = kmeans(&x, &KMeansConfig::new(4, 3)).unwrap();
        assert_monotone(&m);
        assert_eq!(m.objective, 0.0);
        assert_eq!(m.cluster_sizes(), vec![1; 4]);
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let x = matrix(&[&[1.0], &[1.0], &[1.0], &[1.0], &[2.0]]);
        let m = kmeans(&x, &KMeansConfig::new(3, 0)).unwrap();
        assert_monotone(&m);
        assert!(m.cluster_sizes().iter().all(|&s| s >= 1));
    }

    #[test]
    fn too_few_rows() {
        let x = matrix(&[&[0.0], &[1.0]]);
        assert_eq!(kmeans(&x, &KMeansConfig::new(3, 0)), Err(ClusterError::TooFewRows { rows: 2, k: 3 }));
        assert_eq!(kmeans(&x, &KMeansConfig::new(0, 0)), Err(ClusterError::ZeroClusters));
    }

    #[test]
    fn decimation() {
        assert_eq!(decimate_indices(101, 10).len(), 11);
        assert_eq!(decimate_indices(101, 10)[10], 100);
        assert_eq!(decimate_indices(7, 1), (0..7).collect::<Vec<_>>());
        assert_eq!(decimate_indices(6, 9), vec![0]);
    }

    #[test]
    fn segments() {
        let s = labels_to_segments(&[0, 0, 1, 1, 1, 0]).unwrap();
        assert_eq!(
            s.segments,
            vec![
                Segment { start: 0, end: 1, label: 0 },
                Segment { start: 2, end: 4, label: 1 },
                Segment { start: 5, end: 5, label: 0 }
            ]
        );
        assert_eq!(labels_to_segments(&[2, 2, 2]).unwrap().segments.len(), 1);
        let alt = labels_to_segments(&[0, 1, 0, 1]).unwrap();
        assert_eq!(alt.segments.len(), 4);
        assert_eq!(alt.oscillations(4), vec![(0, 3)]);
        assert_eq!(labels_to_segments(&[]), Err(ClusterError::Empty));
    }

    #[test]
    fn oscillation_stretches() {
        let s = labels_to_segments(&[0, 1, 0, 1, 2, 1, 2, 2, 0]).unwrap();
        // Runs: 0 1 0 1 | 2 1 2 | 0  -> alternations [0..3] and [3..6].
        assert_eq!(s.oscillations(4), vec![(0, 3), (3, 6)]);
        assert!(labels_to_segments(&[0, 1, 2, 0, 1, 2]).unwrap().oscillations(3).is_empty());
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 2], &[5, 5, 9, 7]).unwrap(), 1.0);
        // Contingency table of ones: index 0, expected 2·2/6, max 2.
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(adjusted_rand_index(&[0], &[0]), Err(ClusterError::LengthMismatch(1, 1)));
        assert_eq!(adjusted_rand_index(&[0, 1], &[0]), Err(ClusterError::LengthMismatch(2, 1)));
    }

    #[test]
    fn feature_modes() {
        let s = |i: usize, v: f64| AlphaSpectrum {
            pair_index: i,
            alphas: vec![0.5, 2.0],
            pdge: vec![v, 2.0 * v],
            pdged: vec![v / 2.0, v],
        };
        let spectra = [s(0, 1.0), s(1, 4.0)];
        assert_eq!(FeatureMatrix::from_spectra(&spectra, FeatureMode::Pdge).unwrap().row(1), &[4.0, 8.0]);
        assert_eq!(FeatureMatrix::from_spectra(&spectra, FeatureMode::Pdged).unwrap().row(1), &[2.0, 4.0]);
        assert_eq!(FeatureMatrix::from_spectra(&spectra, FeatureMode::Both).unwrap().row(0), &[1.0, 2.0, 0.5, 1.0]);
        let z = FeatureMatrix::from_spectra(&spectra, FeatureMode::Pdge).unwrap().standardized();
        assert_eq!(z.row(0), &[-1.0, -1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kmeans_properties(
            raw in proptest::collection::vec(proptest::collection::vec(0.0f64..50.0, 3), 6..40),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let x = FeatureMatrix::from_rows(&raw).unwrap();
            let cfg = KMeansConfig::new(k, seed);
            let m = kmeans(&x, &cfg).unwrap();
            assert_monotone(&m);
            prop_assert!(m.labels.iter().all(|&l| l < k));
            prop_assert!(m.cluster_sizes().iter().all(|&s| s >= 1));
            prop_assert_eq!(&m, &kmeans(&x, &cfg).unwrap());

            // Power-of-two scaling is exact, so the seeding path is identical.
            let c = 4.0;
            let scaled_cfg = KMeansConfig { tol: cfg.tol * c, ..cfg.clone() };
            let s = kmeans(&x.scaled(c), &scaled_cfg).unwrap();
            prop_assert_eq!(&s.labels, &m.labels);
            prop_assert!((s.objective - c * c * m.objective).abs() <= 1e-9 * (1.0 + s.objective));
        }

        #[test]
        fn segments_flatten_back(labels in proptest::collection::vec(0usize..4, 1..60)) {
            let s = labels_to_segments(&labels).unwrap();
            prop_assert_eq!(s.flatten(), labels);
            for w in s.segments.windows(2) {
                prop_assert_eq!(w[0].end + 1, w[1].start);
                prop_assert_ne!(w[0].label, w[1].label);
            }
        }

        #[test]
        fn ari_is_relabel_invariant(labels in proptest::collection::vec(0usize..5, 2..50), perm in Just([3usize, 0, 4, 1, 2])) {
            let renamed: Vec<usize> = labels.iter().map(|&l| perm[l]).collect();
            prop_assert!((adjusted_rand_index(&labels, &renamed).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
