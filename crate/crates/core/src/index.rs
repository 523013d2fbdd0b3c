//! Exact nearest-neighbor search over point coordinates or feature vectors.
//!
//! A static k-d tree over row-major data of arbitrary dimension. Queries are
//! exact under Euclidean distance; equal distances resolve to the lowest
//! point index so results match a linear scan bit for bit.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexSpace {
    Coordinates,
    Features,
}

/// One nearest-neighbor answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance_sq: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.distance_sq.sqrt()
    }

    fn precedes(&self, other: &Neighbor) -> bool {
        self.distance_sq < other.distance_sq
            || (self.distance_sq == other.distance_sq && self.index < other.index)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    data: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud, space: IndexSpace) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        match space {
            IndexSpace::Coordinates => {
                let data = cloud.points().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
                Self::from_rows(3, data)
            }
            IndexSpace::Features => {
                let f = cloud.features().ok_or(Error::MissingFeatures)?;
                Self::from_rows(f.dim(), f.as_slice().to_vec())
            }
        }
    }

    /// Builds an index over `data.len() / dim` rows.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "row buffer of length {} does not hold rows of dimension {dim}",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        let mut index = Self {
            dim,
            data,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        index.build_node(0, n);
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }

        // split on the axis of largest spread
        let mut best_dim = 0;
        let mut best_spread = f64::NEG_INFINITY;
        for d in 0..self.dim {
            let (lo, hi) = self.order[start..end].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), &i| {
                    let v = self.data[i * self.dim + d];
                    (lo.min(v), hi.max(v))
                },
            );
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            // all rows identical
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }

        let mid = start + (end - start) / 2;
        let dim = self.dim;
        let data = &self.data;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            data[a * dim + best_dim].total_cmp(&data[b * dim + best_dim])
        });
        let value = self.data[self.order[mid] * dim + best_dim];

        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    fn distance_sq(&self, i: usize, query: &[f64]) -> f64 {
        self.row(i)
            .iter()
            .zip(query)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Exact nearest neighbor of `query`.
    pub fn nearest(&self, query: &[f64]) -> Neighbor {
        self.k_nearest(query, 1)[0]
    }

    /// Up to `k` nearest neighbors ordered by (distance, index).
    pub fn k_nearest(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        let k = k.max(1).min(self.len());
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        self.search(0, query, k, &mut best);
        best
    }

    /// Indices of all rows within `radius` of `query` (inclusive), ascending.
    pub fn within_radius(&self, query: &[f64], radius: f64) -> Vec<usize> {
        assert_eq!(query.len(), self.dim, "query dimension mismatch");
        let mut out = Vec::new();
        self.collect_radius(0, query, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn collect_radius(&self, node: usize, query: &[f64], radius_sq: f64, out: &mut Vec<usize>) {
        match &self.nodes[node] {
            Node::Leaf { start, end } => out.extend(
                self.order[*start..*end]
                    .iter()
                    .copied()
                    .filter(|&i| self.distance_sq(i, query) <= radius_sq),
            ),
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[*dim] - value;
                if diff <= 0.0 || diff * diff <= radius_sq {
                    self.collect_radius(*left, query, radius_sq, out);
                }
                if diff >= 0.0 || diff * diff <= radius_sq {
                    self.collect_radius(*right, query, radius_sq, out);
                }
            }
        }
    }

    fn search(&self, node: usize, query: &[f64], k: usize, best: &mut Vec<Neighbor>) {
        match &self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let cand = Neighbor {
                        index: i,
                        distance_sq: self.distance_sq(i, query),
                    };
                    if best.len() == k && !cand.precedes(&best[k - 1]) {
                        continue;
                    }
                    let pos = best.partition_point(|b| b.precedes(&cand));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[*dim] - value;
                let (near, far) = if diff < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, query, k, best);
                // `<=` keeps equal-distance candidates with lower indices reachable
                if best.len() < k || diff * diff <= best[k - 1].distance_sq {
                    self.search(far, query, k, best);
                }
            }
        }
    }
}

/// Linear-scan nearest neighbor with lowest-index tie-break.
pub fn brute_force_nearest(dim: usize, data: &[f64], query: &[f64]) -> Neighbor {
    let mut best = Neighbor {
        index: usize::MAX,
        distance_sq: f64::INFINITY,
    };
    for (i, row) in data.chunks_exact(dim).enumerate() {
        let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.distance_sq {
            best = Neighbor {
                index: i,
                distance_sq: d,
            };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_query_hits_itself() {
        let cloud = PointCloud::from_slice(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [5.0, 5.0, 5.0]])
            .unwrap();
        let idx = SpatialIndex::build(&cloud, IndexSpace::Coordinates).unwrap();
        let n = idx.nearest(&[1.0, 2.0, 3.0]);
        assert_eq!(n.index, 1);
        assert_eq!(n.distance_sq, 0.0);
    }

    #[test]
    fn collinear_query() {
        let cloud =
            PointCloud::from_slice(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]).unwrap();
        let idx = SpatialIndex::build(&cloud, IndexSpace::Coordinates).unwrap();
        assert_eq!(idx.nearest(&[1.9, 0.0, 0.0]).index, 1);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let mut pts = vec![[1.0, 0.0, 0.0]; 40];
        pts.push([-1.0, 0.0, 0.0]);
        let cloud = PointCloud::from_slice(&pts).unwrap();
        let idx = SpatialIndex::build(&cloud, IndexSpace::Coordinates).unwrap();
        assert_eq!(idx.nearest(&[0.0, 0.0, 0.0]).index, 0);
        let two = idx.k_nearest(&[1.0, 0.0, 0.0], 2);
        assert_eq!((two[0].index, two[1].index), (0, 1));
    }

    #[test]
    fn feature_space_requires_features() {
        let cloud = PointCloud::from_slice(&[[0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            SpatialIndex::build(&cloud, IndexSpace::Features),
            Err(Error::MissingFeatures)
        ));
        let empty = PointCloud::new(vec![]).unwrap();
        assert!(matches!(
            SpatialIndex::build(&empty, IndexSpace::Coordinates),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn agrees_with_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, dim) in &[(1000usize, 3usize), (300, 7), (50, 1)] {
            let data: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let idx = SpatialIndex::from_rows(dim, data.clone()).unwrap();
            for _ in 0..100 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect();
                let fast = idx.nearest(&q);
                let slow = brute_force_nearest(dim, &data, &q);
                assert_eq!(fast.index, slow.index);
                assert_eq!(fast.distance_sq, slow.distance_sq);
            }
        }
    }

    #[test]
    fn radius_query_against_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<f64> = (0..1500).map(|_| rng.random_range(0.0..1.0)).collect();
        let idx = SpatialIndex::from_rows(3, data.clone()).unwrap();
        for _ in 0..30 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let want: Vec<usize> = data
                .chunks_exact(3)
                .enumerate()
                .filter(|(_, r)| r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= 0.04)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(idx.within_radius(&q, 0.2), want);
        }
    }

    #[test]
    fn k_nearest_sorted_against_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..600).map(|_| rng.random_range(0.0..1.0)).collect();
        let idx = SpatialIndex::from_rows(3, data.clone()).unwrap();
        for _ in 0..50 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let got = idx.k_nearest(&q, 4);
            let mut all: Vec<(f64, usize)> = data
                .chunks_exact(3)
                .enumerate()
                .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let want: Vec<usize> = all[..4].iter().map(|x| x.1).collect();
            assert_eq!(got.iter().map(|n| n.index).collect::<Vec<_>>(), want);
        }
    }
}
