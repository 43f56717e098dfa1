//! Rank and intrinsic-dimension diagnostics of a forward map.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::tsv::format_float;

pub const DEFAULT_FD_STEP: f64 = 1e-4;
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_LPCA_THRESHOLD: f64 = 0.99;

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Thin SVD `a = u · diag(s) · vt` with singular values sorted descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub vt: Array2<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> Array2<f64> {
        let mut us = self.u.clone();
        for (j, sj) in self.s.iter().enumerate() {
            us.column_mut(j).mapv_inplace(|v| v * sj);
        }
        us.dot(&self.vt)
    }
}

pub fn svd(a: &Array2<f64>) -> Result<Svd> {
    if a.is_empty() {
        return Err(Error::Empty("SVD of an empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { field: "matrix".into() });
    }
    let d = to_dmatrix(a).svd(true, true);
    let (u, vt) = (d.u.expect("requested"), d.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..d.singular_values.len()).collect();
    order.sort_by(|&i, &j| d.singular_values[j].total_cmp(&d.singular_values[i]));
    Ok(Svd {
        u: Array2::from_shape_fn((u.nrows(), order.len()), |(i, j)| u[(i, order[j])]),
        s: order.iter().map(|&i| d.singular_values[i]).collect(),
        vt: Array2::from_shape_fn((order.len(), vt.ncols()), |(i, j)| vt[(order[i], j)]),
    })
}

/// Number of singular values with `σ_i / σ_1 > threshold`.
pub fn numerical_rank(s: &[f64], threshold: f64) -> usize {
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v / top > threshold).count(),
        _ => 0,
    }
}

/// Finite-difference Jacobian of `f` at `x`. Coordinates closer than `h` to
/// `bounds` use a one-sided difference; the flag reports whether any did.
pub fn jacobian_fd<F>(f: &F, x: &[f64], h: f64, bounds: Option<(f64, f64)>) -> Result<(Array2<f64>, bool)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + ?Sized,
{
    if !(h > 0.0) {
        return Err(Error::invalid("h", "step must be positive"));
    }
    let f0 = f(x)?;
    let mut jac = Array2::zeros((f0.len(), x.len()));
    let mut one_sided = false;
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let (lo_ok, hi_ok) = match bounds {
            Some((lo, hi)) => (x[j] - h >= lo, x[j] + h <= hi),
            None => (true, true),
        };
        let col: Vec<f64> = if lo_ok && hi_ok {
            xp[j] = x[j] + h;
            let fp = f(&xp)?;
            xp[j] = x[j] - h;
            let fm = f(&xp)?;
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        } else {
            one_sided = true;
            let step = if hi_ok { h } else { -h };
            xp[j] = x[j] + step;
            let fs = f(&xp)?;
            fs.iter().zip(&f0).map(|(a, b)| (a - b) / step).collect()
        };
        xp[j] = x[j];
        for (i, v) in col.into_iter().enumerate() {
            jac[[i, j]] = v;
        }
    }
    Ok((jac, one_sided))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReport {
    pub probe: Vec<f64>,
    pub jacobian: Array2<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `σ_1 / σ_r`; infinite when the rank is zero.
    pub condition: f64,
    pub one_sided: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankScan {
    pub reports: Vec<RankReport>,
    pub modal_rank: usize,
    /// Share of probes whose rank equals the modal rank.
    pub agreement: f64,
    /// `Some(r)` when at least 95% of probes agree on rank `r`.
    pub constant_rank: Option<usize>,
}

impl RankScan {
    pub fn to_tsv(&self) -> String {
        let width = self.reports.first().map_or(0, |r| r.singular_values.len());
        let mut s = String::from("probe\trank\tcondition\tone_sided");
        for i in 1..=width {
            let _ = write!(s, "\ts{i}");
        }
        s.push('\n');
        for (k, r) in self.reports.iter().enumerate() {
            let _ = write!(s, "{k}\t{}\t{}\t{}", r.rank, format_float(r.condition), r.one_sided);
            for v in &r.singular_values {
                let _ = write!(s, "\t{}", format_float(*v));
            }
            s.push('\n');
        }
        s
    }
}

fn modal(values: &[usize]) -> (usize, f64) {
    let max = values.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max + 1];
    for &v in values {
        counts[v] += 1;
    }
    let (mode, count) = counts
        .iter()
        .enumerate()
        .fold((0, 0), |best, (v, &c)| if c > best.1 { (v, c) } else { best });
    (mode, count as f64 / values.len().max(1) as f64)
}

/// Jacobian SVD at every probe, computed in parallel and kept in probe order.
pub fn rank_scan<F>(f: &F, probes: &[Vec<f64>], h: f64, threshold: f64, bounds: Option<(f64, f64)>) -> Result<RankScan>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync + ?Sized,
{
    if probes.is_empty() {
        return Err(Error::Empty("rank scan without probes".into()));
    }
    let reports = probes
        .par_iter()
        .map(|x| {
            let (jacobian, one_sided) = jacobian_fd(f, x, h, bounds)?;
            let s = svd(&jacobian)?.s;
            let rank = numerical_rank(&s, threshold);
            let condition = if rank == 0 { f64::INFINITY } else { s[0] / s[rank - 1] };
            Ok(RankReport {
                probe: x.clone(),
                jacobian,
                singular_values: s,
                rank,
                condition,
                one_sided,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ranks: Vec<usize> = reports.iter().map(|r| r.rank).collect();
    let (modal_rank, agreement) = modal(&ranks);
    Ok(RankScan {
        reports,
        modal_rank,
        agreement,
        constant_rank: (agreement >= 0.95).then_some(modal_rank),
    })
}

/// The network as a map between scaled spaces, for the scans above.
pub fn network_map(net: &Network) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Sync + '_ {
    move |x: &[f64]| {
        let m = Array2::from_shape_vec((1, x.len()), x.to_vec()).map_err(|e| Error::invalid("x", e.to_string()))?;
        Ok(net.predict(&m)?.row(0).to_vec())
    }
}

fn covariance(points: &[&[f64]]) -> DMatrix<f64> {
    let d = points[0].len();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p.iter()) {
            *m += v / n;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        for i in 0..d {
            let di = p[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (p[j] - mean[j]) / n;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov
}

/// Eigenvalues (descending, negatives clipped) and eigenvectors as columns.
fn sorted_eigen(cov: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
    let values = order.iter().map(|&i| e.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(e.eigenvectors.nrows(), order.len(), |r, c| e.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn explained_dimension(eigenvalues: &[f64], threshold: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (d, v) in eigenvalues.iter().enumerate() {
        acc += v;
        if acc / total >= threshold {
            return d + 1;
        }
    }
    eigenvalues.len()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpcaReport {
    pub query: Vec<f64>,
    pub neighbors: usize,
    pub eigenvalues: Vec<f64>,
    pub dimension: usize,
}

/// Intrinsic dimension near `query` from the covariance of its `k` nearest
/// neighbours in `cloud`.
pub fn lpca_dimension(cloud: &[Vec<f64>], query: &[f64], k: usize, threshold: f64) -> Result<LpcaReport> {
    if k < 3 {
        return Err(Error::invalid("k", "local PCA needs at least 3 neighbours"));
    }
    if k > cloud.len() {
        return Err(Error::invalid("k", format!("{k} neighbours requested from a cloud of {}", cloud.len())));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid("threshold", "must lie in (0, 1]"));
    }
    if cloud.iter().any(|p| p.len() != query.len()) {
        return Err(Error::invalid("cloud", "points and query differ in dimension"));
    }
    let dist = |p: &[f64]| p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.sort_by(|&i, &j| dist(&cloud[i]).total_cmp(&dist(&cloud[j])).then(i.cmp(&j)));
    let pts: Vec<&[f64]> = order[..k].iter().map(|&i| cloud[i].as_slice()).collect();
    let (eigenvalues, _) = sorted_eigen(covariance(&pts));
    let dimension = explained_dimension(&eigenvalues, threshold);
    Ok(LpcaReport {
        query: query.to_vec(),
        neighbors: k,
        eigenvalues,
        dimension,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpcaScan {
    pub reports: Vec<LpcaReport>,
    pub modal_dimension: usize,
    pub agreement: f64,
}

impl LpcaScan {
    pub fn to_tsv(&self) -> String {
        let width = self.reports.first().map_or(0, |r| r.eigenvalues.len());
        let mut s = String::from("query\tneighbors\tdimension");
        for i in 1..=width {
            let _ = write!(s, "\tl{i}");
        }
        s.push('\n');
        for (q, r) in self.reports.iter().enumerate() {
            let _ = write!(s, "{q}\t{}\t{}", r.neighbors, r.dimension);
            for v in &r.eigenvalues {
                let _ = write!(s, "\t{}", format_float(*v));
            }
            s.push('\n');
        }
        s
    }
}

pub fn lpca_scan(cloud: &[Vec<f64>], queries: &[Vec<f64>], k: usize, threshold: f64) -> Result<LpcaScan> {
    if queries.is_empty() {
        return Err(Error::Empty("LPCA scan without queries".into()));
    }
    let reports = queries
        .par_iter()
        .map(|q| lpca_dimension(cloud, q, k, threshold))
        .collect::<Result<Vec<_>>>()?;
    let dims: Vec<usize> = reports.iter().map(|r| r.dimension).collect();
    let (modal_dimension, agreement) = modal(&dims);
    Ok(LpcaScan {
        reports,
        modal_dimension,
        agreement,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Pca3 {
    /// Centred projections onto the leading components (up to 3 per row).
    pub coords: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Share of total variance carried by each kept component.
    pub explained: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Pca3 {
    pub fn to_tsv(&self, label_names: &[&str]) -> String {
        let mut s = String::new();
        let head: Vec<String> = (1..=self.explained.len()).map(|i| format!("pc{i}")).collect();
        let _ = writeln!(s, "{}\tlabel", head.join("\t"));
        for (c, &l) in self.coords.iter().zip(&self.labels) {
            let cells: Vec<String> = c.iter().map(|v| format_float(*v)).collect();
            let name = label_names.get(l).map_or_else(|| l.to_string(), |n| n.to_string());
            let _ = writeln!(s, "{}\t{name}", cells.join("\t"));
        }
        s
    }
}

/// Projection of a cloud onto its top three principal components. Components
/// with negligible variance are dropped with a warning.
pub fn pca3_export(points: &[Vec<f64>], labels: &[usize]) -> Result<Pca3> {
    if points.len() < 4 {
        return Err(Error::invalid("points", "PCA export needs at least 4 points"));
    }
    if labels.len() != points.len() {
        return Err(Error::invalid("labels", "one label per point is required"));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("points", "ragged rows"));
    }
    let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    let (values, vectors) = sorted_eigen(covariance(&refs));
    let total: f64 = values.iter().sum();
    let mut warnings = Vec::new();
    let keep = values
        .iter()
        .take(3)
        .take_while(|&&v| total > 0.0 && v > 1e-12 * total)
        .count();
    if keep < 3 {
        warnings.push(format!("covariance is degenerate; exporting {keep} components"));
    }
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    let coords = points
        .iter()
        .map(|p| {
            (0..keep)
                .map(|c| (0..d).map(|j| (p[j] - mean[j]) * vectors[(j, c)]).sum())
                .collect()
        })
        .collect();
    Ok(Pca3 {
        coords,
        labels: labels.to_vec(),
        explained: values[..keep].iter().map(|v| v / total).collect(),
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub centroids: Vec<Vec<f64>>,
    /// Mean distance of each cluster's points to its centroid.
    pub radii: Vec<f64>,
    pub mean_radius: f64,
    /// `(a, b, distance)` for every pair of clusters.
    pub centroid_distances: Vec<(usize, usize, f64)>,
    pub factor: f64,
    pub separable: bool,
}

impl SeparabilityReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("cluster_a\tcluster_b\tcentroid_distance\tthreshold\n");
        for (a, b, dist) in &self.centroid_distances {
            let _ = writeln!(s, "{a}\t{b}\t{}\t{}", format_float(*dist), format_float(self.factor * self.mean_radius));
        }
        s
    }
}

/// Clusters count as separable when every pairwise centroid distance exceeds
/// `factor` times the mean within-cluster radius.
pub fn separability(coords: &[Vec<f64>], labels: &[usize], factor: f64) -> Result<SeparabilityReport> {
    if coords.len() != labels.len() || coords.is_empty() {
        return Err(Error::invalid("labels", "one label per point is required"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let d = coords[0].len();
    let mut centroids = vec![vec![0.0; d]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (p, &l) in coords.iter().zip(labels) {
        counts[l] += 1;
        for (c, v) in centroids[l].iter_mut().zip(p) {
            *c += v;
        }
    }
    if counts.contains(&0) {
        return Err(Error::Empty("a label between 0 and the largest label has no points".into()));
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n as f64);
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut radii = vec![0.0; n_classes];
    for (p, &l) in coords.iter().zip(labels) {
        radii[l] += dist(p, &centroids[l]) / counts[l] as f64;
    }
    let mean_radius = radii.iter().sum::<f64>() / n_classes as f64;
    let mut centroid_distances = Vec::new();
    for a in 0..n_classes {
        for b in a + 1..n_classes {
            centroid_distances.push((a, b, dist(&centroids[a], &centroids[b])));
        }
    }
    let separable = centroid_distances.iter().all(|&(_, _, dd)| dd > factor * mean_radius);
    Ok(SeparabilityReport {
        centroids,
        radii,
        mean_radius,
        centroid_distances,
        factor,
        separable,
    })
}
