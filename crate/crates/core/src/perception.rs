//! Euclidean cluster extraction and cover-object identification.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::worldgen::PointCloud;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("link radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("min_points must be at least 1")]
    BadMinPoints,
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("{clusters} clusters but {stats} stats entries")]
    Misaligned { clusters: usize, stats: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    /// Maximum hop between two points of one cluster, meters.
    pub link_radius: f64,
    /// Clusters with fewer points are discarded.
    pub min_points: usize,
    /// Points with `z` below this are treated as ground and never clustered.
    pub ground_band: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            link_radius: 0.75,
            min_points: 5,
            ground_band: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverThresholds {
    pub h_min: f64,
    pub d_min: f64,
    pub v_min: f64,
}

impl Default for CoverThresholds {
    fn default() -> Self {
        Self {
            h_min: 0.5,
            d_min: 5.0,
            v_min: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl BoundingBox {
    fn of(cloud: &PointCloud, indices: &[usize]) -> Option<Self> {
        let first = cloud.points()[*indices.first()?];
        let mut b = BoundingBox {
            x_min: first[0],
            x_max: first[0],
            y_min: first[1],
            y_max: first[1],
            z_min: first[2],
            z_max: first[2],
        };
        for &k in &indices[1..] {
            let p = cloud.points()[k];
            b.x_min = b.x_min.min(p[0]);
            b.x_max = b.x_max.max(p[0]);
            b.y_min = b.y_min.min(p[1]);
            b.y_max = b.y_max.max(p[1]);
            b.z_min = b.z_min.min(p[2]);
            b.z_max = b.z_max.max(p[2]);
        }
        Some(b)
    }
}

/// A connected group of points, indices ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub point_indices: Vec<usize>,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub height: f64,
    /// Points per cubic meter; `+inf` when the volume is zero.
    pub density: f64,
    pub volume: f64,
    pub is_cover: bool,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Single-linkage clustering of the non-ground points: two points share a cluster
/// iff a chain of hops, each at most `link_radius`, joins them. Neighbor queries go
/// through a uniform hash grid with edge `link_radius`. Clusters are ordered by
/// their smallest point index.
pub fn euclidean_cluster(
    cloud: &PointCloud,
    params: &ClusterParams,
) -> Result<Vec<Cluster>, PerceptionError> {
    let r = params.link_radius;
    if !(r > 0.0 && r.is_finite()) {
        return Err(PerceptionError::BadRadius(r));
    }
    if params.min_points == 0 {
        return Err(PerceptionError::BadMinPoints);
    }
    let points = cloud.points();
    let kept: Vec<usize> = (0..points.len())
        .filter(|&k| points[k][2] >= params.ground_band)
        .collect();
    let key = |p: &[f64; 3]| {
        (
            (p[0] / r).floor() as i64,
            (p[1] / r).floor() as i64,
            (p[2] / r).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (slot, &k) in kept.iter().enumerate() {
        buckets.entry(key(&points[k])).or_default().push(slot);
    }
    let r2 = r * r;
    let mut dsu = DisjointSet::new(kept.len());
    for (slot, &k) in kept.iter().enumerate() {
        let p = points[k];
        let (bx, by, bz) = key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(members) = buckets.get(&(bx + dx, by + dy, bz + dz)) else {
                        continue;
                    };
                    for &other in members {
                        if other <= slot {
                            continue;
                        }
                        let q = points[kept[other]];
                        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                        if d2 <= r2 {
                            dsu.union(slot, other);
                        }
                    }
                }
            }
        }
    }
    // group by root, in order of first appearance (smallest point index)
    let mut order: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (slot, &k) in kept.iter().enumerate() {
        let root = dsu.find(slot);
        let g = *order.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(k);
    }
    Ok(groups
        .into_iter()
        .filter(|g| g.len() >= params.min_points)
        .map(|point_indices| {
            let bbox = BoundingBox::of(cloud, &point_indices).expect("non-empty group");
            Cluster {
                point_indices,
                bbox,
            }
        })
        .collect())
}

/// Height, bounding-box volume and point density of a cluster, and whether it
/// passes all three cover thresholds.
pub fn cluster_stats(
    cloud: &PointCloud,
    cluster: &Cluster,
    thresholds: &CoverThresholds,
) -> Result<ClusterStats, PerceptionError> {
    let b = BoundingBox::of(cloud, &cluster.point_indices).ok_or(PerceptionError::EmptyCluster)?;
    let height = b.z_max - b.z_min;
    let volume = (b.x_max - b.x_min) * (b.y_max - b.y_min) * height;
    let density = if volume > 0.0 {
        cluster.point_indices.len() as f64 / volume
    } else {
        f64::INFINITY
    };
    let is_cover = height >= thresholds.h_min && density >= thresholds.d_min && volume >= thresholds.v_min;
    Ok(ClusterStats {
        height,
        density,
        volume,
        is_cover,
    })
}

/// Union of the point indices of every cover cluster, ascending.
pub fn cover_points(
    clusters: &[Cluster],
    stats: &[ClusterStats],
) -> Result<Vec<usize>, PerceptionError> {
    if clusters.len() != stats.len() {
        return Err(PerceptionError::Misaligned {
            clusters: clusters.len(),
            stats: stats.len(),
        });
    }
    let mut out: Vec<usize> = clusters
        .iter()
        .zip(stats)
        .filter(|(_, s)| s.is_cover)
        .flat_map(|(c, _)| c.point_indices.iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Full cover-finding pass over one cloud.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub clusters: Vec<Cluster>,
    pub stats: Vec<ClusterStats>,
    pub cover_indices: Vec<usize>,
}

pub fn segment_cover(
    cloud: &PointCloud,
    params: &ClusterParams,
    thresholds: &CoverThresholds,
) -> Result<Segmentation, PerceptionError> {
    let clusters = euclidean_cluster(cloud, params)?;
    let stats = clusters
        .iter()
        .map(|c| cluster_stats(cloud, c, thresholds))
        .collect::<Result<Vec<_>, _>>()?;
    let cover_indices = cover_points(&clusters, &stats)?;
    Ok(Segmentation {
        clusters,
        stats,
        cover_indices,
    })
}

/// `x y z label` per point; unclustered points carry label `-1`.
pub fn cluster_labels_text(cloud: &PointCloud, clusters: &[Cluster]) -> String {
    let mut labels = vec![-1i64; cloud.len()];
    for (c, cluster) in clusters.iter().enumerate() {
        for &k in &cluster.point_indices {
            labels[k] = c as i64;
        }
    }
    let mut out = String::new();
    for (p, l) in cloud.points().iter().zip(labels) {
        out.push_str(&format!("{} {} {} {}\n", p[0], p[1], p[2], l));
    }
    out
}
