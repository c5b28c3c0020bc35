//! Representation diagnostics: Davies–Bouldin alignment over scaffold
//! clusters and angular uniformity of 2-D projections.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};
use serde::Serialize;
use thiserror::Error;

use crate::nn::Model;
use crate::train::{scaffold_groups, scaffold_keys, Dataset, Encoded};

pub const DEFAULT_BANDWIDTH: f64 = 0.2;
pub const DENSITY_GRID: usize = 360;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least 2 clusters, found {0}")]
    TooFewClusters(usize),
    #[error("clusters {0} and {1} share a centroid")]
    CoincidentCentroids(usize, usize),
    #[error("need at least {needed} points of dimension 2 or more, got {rows}x{cols}")]
    TooFewPoints { needed: usize, rows: usize, cols: usize },
    #[error("every row is zero")]
    AllZeroRows,
    #[error("bandwidth must be positive")]
    BadBandwidth,
    #[error("requested {wanted} scaffolds, dataset has {found}")]
    TooFewScaffolds { wanted: usize, found: usize },
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}

/// `(1/K) Σ_k max_{j≠k} (S_k + S_j) / M_kj`, with `S` the mean distance of
/// a cluster's points to its centroid and `M` the centroid distance.
/// Cluster ids need not be contiguous.
pub fn davies_bouldin(points: ArrayView2<f64>, labels: &[usize]) -> Result<f64, AnalysisError> {
    assert_eq!(points.nrows(), labels.len());
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    let k = members.len();
    if k < 2 {
        return Err(AnalysisError::TooFewClusters(k));
    }
    let groups: Vec<&Vec<usize>> = members.values().collect();
    let centroids: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            points
                .select(Axis(0), g)
                .mean_axis(Axis(0))
                .expect("non-empty cluster")
                .to_vec()
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scatter: Vec<f64> = groups
        .iter()
        .zip(&centroids)
        .map(|(g, c)| {
            g.iter()
                .map(|&i| dist(&points.row(i).to_vec(), c))
                .sum::<f64>()
                / g.len() as f64
        })
        .collect();
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for b in 0..k {
            if a == b {
                continue;
            }
            let m = dist(&centroids[a], &centroids[b]);
            if m == 0.0 {
                return Err(AnalysisError::CoincidentCentroids(a.min(b), a.max(b)));
            }
            worst = worst.max((scatter[a] + scatter[b]) / m);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// n×2 scores on the top two principal axes.
    pub points: Array2<f64>,
    /// Sample variances along the two axes.
    pub variance: [f64; 2],
    /// True when the data had rank below 2 and the second axis is zero.
    pub degenerate: bool,
}

/// PCA onto the top two principal axes of the mean-centered rows. Each
/// axis is signed so that its largest-magnitude loading is positive.
pub fn project_2d(points: ArrayView2<f64>) -> Result<Projection, AnalysisError> {
    let (n, m) = points.dim();
    if n < 3 || m < 2 {
        return Err(AnalysisError::TooFewPoints { needed: 3, rows: n, cols: m });
    }
    let mean = points.mean_axis(Axis(0)).expect("n > 0");
    let centered = &points - &mean;
    let x = DMatrix::from_row_iterator(n, m, centered.iter().copied());
    // eigenvectors of the scatter matrix; nalgebra's SVD can lose accuracy
    // on rank-deficient input
    let eig = SymmetricEigen::new(x.transpose() * &x);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let l0 = eig.eigenvalues[order[0]];
    let mut out = Array2::zeros((n, 2));
    let mut variance = [0.0; 2];
    let mut degenerate = false;
    for (axis, &j) in order.iter().take(2).enumerate() {
        let l = eig.eigenvalues[j];
        if l <= l0 * 1e-12 || l <= 0.0 {
            degenerate = true;
            log::warn!("projection axis {} has no variance", axis + 1);
            continue;
        }
        let mut loading: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        let big = loading
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("m >= 2");
        if loading[big] < 0.0 {
            loading.iter_mut().for_each(|v| *v = -*v);
        }
        for i in 0..n {
            out[[i, axis]] = centered.row(i).iter().zip(&loading).map(|(a, b)| a * b).sum();
        }
        variance[axis] = l / (n as f64 - 1.0);
    }
    Ok(Projection {
        points: out,
        variance,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityProfile {
    pub bandwidth: f64,
    pub angles: Vec<f64>,
    /// Grid angles in [−π, π), evenly spaced.
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub dropped_zero_rows: usize,
}

impl UniformityProfile {
    /// Periodic trapezoid rule over the grid.
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * 2.0 * PI / self.density.len() as f64
    }

    /// max/min density; 1 for a perfectly flat profile.
    pub fn flatness(&self) -> f64 {
        let max = self.density.iter().copied().fold(f64::MIN, f64::max);
        let min = self.density.iter().copied().fold(f64::MAX, f64::min);
        max / min
    }
}

/// Normalizes each 2-D point to the unit circle, takes its angle and
/// evaluates a wrapped Gaussian KDE on a 360-point grid.
pub fn uniformity_profile(points: ArrayView2<f64>, bandwidth: f64) -> Result<UniformityProfile, AnalysisError> {
    if !(bandwidth > 0.0) {
        return Err(AnalysisError::BadBandwidth);
    }
    assert_eq!(points.ncols(), 2, "uniformity needs 2-D points");
    let mut angles = Vec::with_capacity(points.nrows());
    let mut dropped = 0;
    for r in points.rows() {
        let norm = r[0].hypot(r[1]);
        if norm == 0.0 {
            dropped += 1;
            continue;
        }
        angles.push((r[1] / norm).atan2(r[0] / norm));
    }
    if angles.is_empty() {
        return Err(AnalysisError::AllZeroRows);
    }
    let grid: Vec<f64> = (0..DENSITY_GRID)
        .map(|g| -PI + 2.0 * PI * g as f64 / DENSITY_GRID as f64)
        .collect();
    // images beyond this many turns carry no mass at any sane bandwidth
    let wraps = (bandwidth * 8.0 / (2.0 * PI)).ceil() as i32 + 1;
    let norm = 1.0 / (angles.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    let density = grid
        .iter()
        .map(|&t| {
            let mut s = 0.0;
            for &a in &angles {
                for k in -wraps..=wraps {
                    let d = (t - a + 2.0 * PI * k as f64) / bandwidth;
                    s += (-0.5 * d * d).exp();
                }
            }
            s * norm
        })
        .collect();
    Ok(UniformityProfile {
        bandwidth,
        angles,
        grid,
        density,
        dropped_zero_rows: dropped,
    })
}

fn latent(model: &Model, enc: &Encoded, idx: &[usize]) -> Result<Array2<f64>, AnalysisError> {
    Ok(model.forward_encoder(enc.x.select(Axis(0), idx).view())?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaffoldCluster {
    pub key: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub scaffolds: Vec<ScaffoldCluster>,
    pub dbi_latent: f64,
    pub dbi_projected: f64,
    /// Projected points with the index of their scaffold in `scaffolds`.
    pub points: Vec<(f64, f64, usize)>,
}

/// Embeds the members of the `top_s` most populous ring scaffolds and
/// scores how well the latent space separates them. Acyclic molecules
/// share no scaffold and are left out.
pub fn alignment_report(
    model: &Model,
    ds: &Dataset,
    enc: &Encoded,
    top_s: usize,
) -> Result<AlignmentReport, AnalysisError> {
    let groups: Vec<(String, Vec<usize>)> = scaffold_groups(&scaffold_keys(ds))
        .into_iter()
        .filter(|(k, _)| !k.is_empty())
        .collect();
    if top_s < 2 || groups.len() < top_s {
        return Err(AnalysisError::TooFewScaffolds {
            wanted: top_s,
            found: groups.len(),
        });
    }
    let chosen = &groups[..top_s];
    let mut idx = Vec::new();
    let mut labels = Vec::new();
    for (c, (_, members)) in chosen.iter().enumerate() {
        idx.extend(members);
        labels.extend(std::iter::repeat_n(c, members.len()));
    }
    let z = latent(model, enc, &idx)?;
    let dbi_latent = davies_bouldin(z.view(), &labels)?;
    let proj = project_2d(z.view())?;
    let dbi_projected = davies_bouldin(proj.points.view(), &labels)?;
    Ok(AlignmentReport {
        scaffolds: chosen
            .iter()
            .map(|(k, m)| ScaffoldCluster {
                key: k.clone(),
                size: m.len(),
            })
            .collect(),
        dbi_latent,
        dbi_projected,
        points: proj
            .points
            .rows()
            .into_iter()
            .zip(&labels)
            .map(|(r, &l)| (r[0], r[1], l))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub n_points: usize,
    pub projected_variance: [f64; 2],
    pub flatness: f64,
    pub integral: f64,
    pub profile: UniformityProfile,
}

/// Latent vectors of every record, projected to 2-D, then normalized onto
/// the circle.
pub fn uniformity_report(
    model: &Model,
    enc: &Encoded,
    bandwidth: f64,
) -> Result<UniformityReport, AnalysisError> {
    let idx: Vec<usize> = (0..enc.rows()).collect();
    let z = latent(model, enc, &idx)?;
    let proj = project_2d(z.view())?;
    let profile = uniformity_profile(proj.points.view(), bandwidth)?;
    Ok(UniformityReport {
        n_points: idx.len(),
        projected_variance: proj.variance,
        flatness: profile.flatness(),
        integral: profile.integral(),
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dbi_worked_example() {
        let p = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let d = davies_bouldin(p.view(), &[0, 0, 1, 1]).unwrap();
        assert!((d - 0.1).abs() < 1e-15);
        let s = array![[0.0, 0.0], [3.0, 4.0]];
        assert_eq!(davies_bouldin(s.view(), &[4, 9]).unwrap(), 0.0);
        assert!(matches!(
            davies_bouldin(p.view(), &[0; 4]),
            Err(AnalysisError::TooFewClusters(1))
        ));
        let c = array![[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]];
        assert!(matches!(
            davies_bouldin(c.view(), &[0, 0, 1, 1]),
            Err(AnalysisError::CoincidentCentroids(0, 1))
        ));
    }

    #[test]
    fn collinear_projection_degenerates() {
        let p = array![[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let pr = project_2d(p.view()).unwrap();
        assert!(pr.degenerate);
        assert!(pr.points.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kde_modes_and_normalization() {
        let spread = array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let clump = array![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [0.5, 0.0]];
        let a = uniformity_profile(spread.view(), 0.2).unwrap();
        let b = uniformity_profile(clump.view(), 0.2).unwrap();
        assert!((a.integral() - 1.0).abs() < 1e-3);
        assert!((b.integral() - 1.0).abs() < 1e-3);
        assert!(a.flatness() < b.flatness());
        assert!(a.density.iter().all(|&d| d >= 0.0));
        let one = uniformity_profile(array![[0.0, 2.0], [0.0, 0.0]].view(), 0.2).unwrap();
        assert_eq!(one.dropped_zero_rows, 1);
        let peak = one
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((one.grid[peak] - PI / 2.0).abs() < 0.02);
        assert!(uniformity_profile(array![[0.0, 0.0]].view(), 0.2).is_err());
    }
}
