//! Dimensionality reduction, k-means and cluster diagnostics.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{EmbedError, EmbeddingMatrix};

const OVERSAMPLE: usize = 10;
const POWER_ITERS: usize = 2;
pub const MAX_ITER: usize = 300;
pub const TOL: f64 = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("invalid target dimension {target} for data of dim {dim} with {rows} rows")]
    TargetDim { target: usize, dim: usize, rows: usize },
    #[error("need at least {need} rows, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("silhouette needs at least two nonempty clusters")]
    SilhouetteUndefined,
    #[error("comment {0} has no cluster assignment")]
    Unassigned(String),
    #[error("centroid dim {0} does not match data dim {1}")]
    DimMismatch(usize, usize),
    #[error("cluster {0} out of range")]
    BadCluster(usize),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed cluster model: {0}")]
    Format(String),
}

/// Linear projection learned by [`truncated_svd`].
#[derive(Debug, Clone, PartialEq)]
pub struct SvdProjection {
    pub mean: Vec<f64>,
    /// One unit-length (or zero, when rank deficient) row per output dimension.
    pub components: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// Sum of squared entries of the centered data.
    pub total_variance: f64,
}

impl SvdProjection {
    pub fn project_row(&self, row: &[f32]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(row)
                    .zip(&self.mean)
                    .map(|((w, &x), m)| w * (x as f64 - m))
                    .sum()
            })
            .collect()
    }

    pub fn project(&self, m: &EmbeddingMatrix) -> EmbeddingMatrix {
        let data: Vec<f32> = (0..m.rows())
            .flat_map(|i| self.project_row(m.row(i)).into_iter().map(|x| x as f32))
            .collect();
        EmbeddingMatrix::new(m.ids().to_vec(), self.components.len(), data, false)
            .expect("projection preserves ids")
    }

    pub fn variance_ratios(&self) -> Vec<f64> {
        self.singular_values
            .iter()
            .map(|s| if self.total_variance > 0.0 { s * s / self.total_variance } else { 0.0 })
            .collect()
    }
}

fn centered(m: &EmbeddingMatrix) -> (DMatrix<f64>, Vec<f64>) {
    let (n, d) = (m.rows(), m.dim());
    let mut mean = vec![0f64; d];
    for i in 0..n {
        for (a, &x) in mean.iter_mut().zip(m.row(i)) {
            *a += x as f64;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    let x = DMatrix::from_fn(n, d, |i, j| m.row(i)[j] as f64 - mean[j]);
    (x, mean)
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn svd_core(m: &EmbeddingMatrix, target: usize, seed: u64) -> SvdProjection {
    let (x, mean) = centered(m);
    let (n, d) = x.shape();
    let total_variance = x.norm_squared();
    let l = (target + OVERSAMPLE).min(n).min(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(d, l, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = orthonormal_basis(&x * omega);
    for _ in 0..POWER_ITERS {
        let z = orthonormal_basis(x.transpose() * &q);
        q = orthonormal_basis(&x * z);
    }
    let b = q.transpose() * &x;
    let svd = b.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let smax = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    let tiny = (smax * 1e-10).max(1e-12);
    let mut components = Vec::with_capacity(target);
    let mut singular_values = Vec::with_capacity(target);
    let mut padded = 0;
    for r in 0..target {
        match order.get(r).map(|&i| (i, svd.singular_values[i])) {
            Some((i, s)) if s > tiny => {
                let mut v: Vec<f64> = v_t.row(i).iter().copied().collect();
                let pivot = v.iter().copied().fold(0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
                if pivot < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                components.push(v);
                singular_values.push(s);
            }
            _ => {
                components.push(vec![0.0; d]);
                singular_values.push(0.0);
                padded += 1;
            }
        }
    }
    if padded > 0 {
        log::warn!("data rank below {target}; padded {padded} zero component(s)");
    }
    SvdProjection {
        mean,
        components,
        singular_values,
        total_variance,
    }
}

/// Projects mean-centered rows onto the top `target_dim` right-singular
/// directions, found by randomized subspace iteration.
pub fn truncated_svd(
    m: &EmbeddingMatrix,
    target_dim: usize,
    seed: u64,
) -> Result<(EmbeddingMatrix, SvdProjection), ClusterError> {
    if target_dim == 0 || target_dim >= m.dim() || m.rows() < target_dim {
        return Err(ClusterError::TargetDim {
            target: target_dim,
            dim: m.dim(),
            rows: m.rows(),
        });
    }
    let proj = svd_core(m, target_dim, seed);
    Ok((proj.project(m), proj))
}

/// Top two principal components and their explained-variance ratios.
pub fn pca_2d(m: &EmbeddingMatrix, seed: u64) -> Result<(Vec<[f64; 2]>, [f64; 2]), ClusterError> {
    if m.rows() < 2 {
        return Err(ClusterError::TooFewRows { need: 2, have: m.rows() });
    }
    let proj = svd_core(m, 2, seed);
    let coords = (0..m.rows())
        .map(|i| {
            let p = proj.project_row(m.row(i));
            [p[0], p[1]]
        })
        .collect();
    let r = proj.variance_ratios();
    Ok((coords, [r[0], r[1]]))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn to_points(m: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|&x| x as f64).collect()).collect()
}

/// k-means++ seeding: first centroid uniform, then D²-weighted draws.
pub fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points[idx].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignment: BTreeMap<String, usize>,
    pub inertia: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Inertia after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn members(&self, cluster: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &c)| c == cluster)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &c in self.assignment.values() {
            s[c] += 1;
        }
        s
    }
}

/// Lloyd's algorithm from a k-means++ start. Stops once no centroid moves
/// more than [`TOL`] or after [`MAX_ITER`] iterations. A cluster that
/// empties is re-seeded with the point farthest from its own centroid.
pub fn kmeans(m: &EmbeddingMatrix, k: usize, seed: u64) -> Result<ClusterModel, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if m.rows() < k {
        return Err(ClusterError::TooFewRows { need: k, have: m.rows() });
    }
    let points = to_points(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&points, k, &mut rng);
    let mut labels = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let assigned: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(p, &centroids)).collect();
        for (l, (c, _)) in labels.iter_mut().zip(&assigned) {
            *l = *c;
        }
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();
        loop {
            let mut counts = vec![0usize; k];
            labels.iter().for_each(|&l| counts[l] += 1);
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            // farthest point among those whose cluster can spare one
            let far = (0..points.len())
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("rows >= k leaves a donor cluster");
            log::debug!("re-seeding empty cluster {empty} at point {far}");
            labels[far] = empty;
            dist[far] = 0.0;
        }
        let mut sums = vec![vec![0f64; m.dim()]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift = 0f64;
        for j in 0..k {
            let new: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(sq_dist(&new, &centroids[j]).sqrt());
            centroids[j] = new;
        }
        let inertia: f64 = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centroids[l])).sum();
        history.push(inertia);
        if shift < TOL {
            break;
        }
    }
    let inertia = *history.last().unwrap();
    Ok(ClusterModel {
        k,
        dim: m.dim(),
        centroids,
        assignment: m.ids().iter().cloned().zip(labels).collect(),
        inertia,
        seed,
        iterations,
        inertia_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub per_point: BTreeMap<String, f64>,
    pub mean: f64,
}

/// Euclidean silhouette. Points in singleton clusters score 0.
pub fn silhouette(m: &EmbeddingMatrix, model: &ClusterModel) -> Result<SilhouetteReport, ClusterError> {
    if model.k < 2 {
        return Err(ClusterError::SilhouetteUndefined);
    }
    let labels: Vec<usize> = m
        .ids()
        .iter()
        .map(|id| model.assignment.get(id).copied().ok_or_else(|| ClusterError::Unassigned(id.clone())))
        .collect::<Result<_, _>>()?;
    let mut sizes = vec![0usize; model.k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(ClusterError::SilhouetteUndefined);
    }
    let points = to_points(m);
    let scores: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let li = labels[i];
            if sizes[li] == 1 {
                return 0.0;
            }
            let mut sums = vec![0f64; model.k];
            for (j, p) in points.iter().enumerate() {
                if j != i {
                    sums[labels[j]] += sq_dist(&points[i], p).sqrt();
                }
            }
            let a = sums[li] / (sizes[li] - 1) as f64;
            let b = (0..model.k)
                .filter(|&c| c != li && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 { 0.0 } else { (b - a) / denom }
        })
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(SilhouetteReport {
        per_point: m.ids().iter().cloned().zip(scores).collect(),
        mean,
    })
}

/// Mean silhouette for each k, in the given order.
pub fn silhouette_scan(m: &EmbeddingMatrix, ks: &[usize], seed: u64) -> Result<Vec<(usize, f64)>, ClusterError> {
    ks.iter()
        .map(|&k| {
            let model = kmeans(m, k, seed)?;
            Ok((k, silhouette(m, &model)?.mean))
        })
        .collect()
}

/// Members of `cluster` ordered by distance to its centroid, ties by id.
pub fn nearest_to_centroid(
    model: &ClusterModel,
    m: &EmbeddingMatrix,
    cluster: usize,
    n: usize,
) -> Result<Vec<String>, ClusterError> {
    Ok(ranked_members(model, m, cluster)?.into_iter().take(n).map(|(id, _)| id).collect())
}

fn ranked_members(model: &ClusterModel, m: &EmbeddingMatrix, cluster: usize) -> Result<Vec<(String, f64)>, ClusterError> {
    if cluster >= model.k {
        return Err(ClusterError::BadCluster(cluster));
    }
    if m.dim() != model.dim {
        return Err(ClusterError::DimMismatch(model.dim, m.dim()));
    }
    let c = &model.centroids[cluster];
    let mut members: Vec<(String, f64)> = (0..m.rows())
        .filter(|&i| model.assignment.get(&m.ids()[i]) == Some(&cluster))
        .map(|i| {
            let p: Vec<f64> = m.row(i).iter().map(|&x| x as f64).collect();
            (m.ids()[i].clone(), sq_dist(&p, c).sqrt())
        })
        .collect();
    if members.is_empty() {
        log::warn!("cluster {cluster} has no members");
    }
    members.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(members)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionRecord {
    pub cluster: usize,
    pub kind: String,
    pub comment_id: String,
    pub distance: f64,
    pub text: String,
}

/// Per cluster, the `n` members nearest the centroid plus `n` other members
/// drawn at random.
pub fn inspection_export(
    model: &ClusterModel,
    m: &EmbeddingMatrix,
    texts: &BTreeMap<String, String>,
    n: usize,
    seed: u64,
) -> Result<Vec<InspectionRecord>, ClusterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for cluster in 0..model.k {
        let ranked = ranked_members(model, m, cluster)?;
        let split = n.min(ranked.len());
        let record = |kind: &str, (id, d): &(String, f64)| InspectionRecord {
            cluster,
            kind: kind.to_string(),
            comment_id: id.clone(),
            distance: *d,
            text: texts.get(id).cloned().unwrap_or_default(),
        };
        for r in &ranked[..split] {
            out.push(record("nearest", r));
        }
        let mut rest: Vec<&(String, f64)> = ranked[split..].iter().collect::<Vec<_>>().choose_multiple(&mut rng, n).copied().collect();
        rest.sort_by(|a, b| a.0.cmp(&b.0));
        for r in rest {
            out.push(record("random", r));
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    k: usize,
    dim: usize,
    seed: u64,
    inertia: f64,
    iterations: usize,
    inertia_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AssignmentRow {
    comment_id: String,
    cluster: usize,
}

impl ClusterModel {
    /// Writes the header and assignments as JSONL and the centroids as EMBX.
    pub fn write<W1: Write, W2: Write>(&self, mut jsonl: W1, centroids: W2) -> Result<(), ClusterError> {
        let header = ModelHeader {
            k: self.k,
            dim: self.dim,
            seed: self.seed,
            inertia: self.inertia,
            iterations: self.iterations,
            inertia_history: self.inertia_history.clone(),
        };
        writeln!(jsonl, "{}", serde_json::to_string(&header).map_err(std::io::Error::from)?)?;
        for (id, &c) in &self.assignment {
            let row = AssignmentRow {
                comment_id: id.clone(),
                cluster: c,
            };
            writeln!(jsonl, "{}", serde_json::to_string(&row).map_err(std::io::Error::from)?)?;
        }
        jsonl.flush()?;
        let cm = EmbeddingMatrix::new(
            (0..self.k).map(|i| format!("centroid_{i}")).collect(),
            self.dim,
            self.centroids.iter().flatten().map(|&x| x as f32).collect(),
            false,
        )?;
        cm.write_embx(centroids)?;
        Ok(())
    }

    /// Reads a model written by [`ClusterModel::write`]. Centroids come back
    /// at f32 precision.
    pub fn read<R1: BufRead, R2: std::io::Read>(jsonl: R1, centroids: R2) -> Result<ClusterModel, ClusterError> {
        let mut lines = jsonl.lines();
        let header: ModelHeader = serde_json::from_str(
            &lines.next().ok_or_else(|| ClusterError::Format("empty file".into()))??,
        )
        .map_err(|e| ClusterError::Format(e.to_string()))?;
        let mut assignment = BTreeMap::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: AssignmentRow = serde_json::from_str(&line).map_err(|e| ClusterError::Format(e.to_string()))?;
            if row.cluster >= header.k {
                return Err(ClusterError::BadCluster(row.cluster));
            }
            assignment.insert(row.comment_id, row.cluster);
        }
        let cm = EmbeddingMatrix::read_embx(centroids)?;
        if cm.rows() != header.k || cm.dim() != header.dim {
            return Err(ClusterError::Format("centroid matrix shape disagrees with header".into()));
        }
        Ok(ClusterModel {
            k: header.k,
            dim: header.dim,
            centroids: (0..cm.rows()).map(|i| cm.row(i).iter().map(|&x| x as f64).collect()).collect(),
            assignment,
            inertia: header.inertia,
            seed: header.seed,
            iterations: header.iterations,
            inertia_history: header.inertia_history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f32>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows((0..rows.len()).map(|i| format!("p{i:02}")).collect(), rows.to_vec(), false).unwrap()
    }

    #[test]
    fn k_equals_points() {
        let m = mat(&[vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 2.0], vec![9.0, 9.0]]);
        let model = kmeans(&m, 4, 3).unwrap();
        assert!(model.inertia.abs() < 1e-12);
        assert_eq!(model.sizes(), vec![1; 4]);
    }

    #[test]
    fn k_one_is_mean() {
        let m = mat(&[vec![0.0, 0.0], vec![2.0, 4.0], vec![4.0, 2.0]]);
        let model = kmeans(&m, 1, 0).unwrap();
        assert!((model.centroids[0][0] - 2.0).abs() < 1e-9);
        assert!((model.centroids[0][1] - 2.0).abs() < 1e-9);
        assert!(silhouette(&m, &model).is_err());
    }

    #[test]
    fn silhouette_conventions() {
        let m = mat(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![4.0, 4.0], vec![4.0, 4.0]]);
        let model = kmeans(&m, 2, 1).unwrap();
        let s = silhouette(&m, &model).unwrap();
        assert!(s.per_point.values().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((s.mean - 1.0).abs() < 1e-12);

        let m = mat(&[vec![0.0, 0.0], vec![0.1, 0.0], vec![10.0, 0.0]]);
        let model = kmeans(&m, 2, 1).unwrap();
        let s = silhouette(&m, &model).unwrap();
        assert_eq!(s.per_point["p02"], 0.0);
    }

    #[test]
    fn rank_one_svd() {
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32, 2.0 * i as f32, -(i as f32), 0.5 * i as f32]).collect();
        let m = mat(&rows);
        let (red, proj) = truncated_svd(&m, 1, 7).unwrap();
        let mut err = 0f64;
        let mut norm = 0f64;
        for i in 0..m.rows() {
            for j in 0..m.dim() {
                let rec = proj.mean[j] + red.row(i)[0] as f64 * proj.components[0][j];
                err += (rec - m.row(i)[j] as f64).powi(2);
                norm += (m.row(i)[j] as f64).powi(2);
            }
        }
        assert!(err.sqrt() <= 1e-6 * norm.sqrt().max(1.0) * 10.0, "{err}");
        assert!(truncated_svd(&m, 4, 0).is_err());
        assert!(truncated_svd(&m, 0, 0).is_err());
    }

    #[test]
    fn rank_deficient_pads() {
        let m = mat(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![3.0, 3.0, 0.0]]);
        let (red, proj) = truncated_svd(&m, 2, 0).unwrap();
        assert_eq!(red.dim(), 2);
        assert_eq!(proj.singular_values[1], 0.0);
        assert!(proj.components[1].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pca_line() {
        let m = mat(&(0..8).map(|i| vec![i as f32, 3.0 * i as f32 + 1.0]).collect::<Vec<_>>());
        let (coords, r) = pca_2d(&m, 0).unwrap();
        assert_eq!(coords.len(), 8);
        assert!(r[1] <= 1e-9);
        assert!(r[0] + r[1] <= 1.0 + 1e-12);
    }

    #[test]
    fn nearest_members() {
        let m = mat(&[vec![0.0], vec![1.0], vec![100.0]]);
        let model = kmeans(&m, 2, 0).unwrap();
        let lone = model.assignment["p02"];
        assert_eq!(nearest_to_centroid(&model, &m, lone, 1).unwrap(), vec!["p02"]);
        let other = 1 - lone;
        assert_eq!(nearest_to_centroid(&model, &m, other, 10).unwrap(), vec!["p00", "p01"]);
        assert!(nearest_to_centroid(&model, &m, 2, 1).is_err());
    }

    #[test]
    fn serialization_roundtrip() {
        let m = mat(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![5.0, 5.0], vec![6.0, 5.0]]);
        let model = kmeans(&m, 2, 4).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        model.write(&mut a, &mut b).unwrap();
        let back = ClusterModel::read(&a[..], &b[..]).unwrap();
        assert_eq!(back.assignment, model.assignment);
        assert_eq!(back.k, 2);
        for (x, y) in back.centroids.iter().flatten().zip(model.centroids.iter().flatten()) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}
