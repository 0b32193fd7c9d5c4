//! Exact k-th nearest neighbour distances under the Euclidean metric.

use super::SampleSet;
use crate::{Error, Result};

/// Above this many points queries go through a k-d tree.
pub const BRUTE_FORCE_LIMIT: usize = 4096;

const LEAF_SIZE: usize = 16;

/// Distance from every point to its k-th nearest *other* point. Duplicate
/// points yield zero distances.
pub fn kth_neighbor_distances(samples: &SampleSet, k: usize) -> Result<Vec<f64>> {
    let n = samples.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("neighbour order k={k} needs 1 ≤ k < n={n}")));
    }
    if n <= BRUTE_FORCE_LIMIT {
        Ok(brute_force(samples, k))
    } else {
        let tree = KdTree::build(samples);
        Ok((0..n).map(|i| tree.kth_distance(i, k)).collect())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Insert `d` into the ascending list `best` capped at `k` entries.
fn push_best(best: &mut Vec<f64>, k: usize, d: f64) {
    if best.len() == k && d >= best[k - 1] {
        return;
    }
    let pos = best.partition_point(|&b| b <= d);
    best.insert(pos, d);
    best.truncate(k);
}

pub(crate) fn brute_force(samples: &SampleSet, k: usize) -> Vec<f64> {
    let n = samples.len();
    let mut best = Vec::with_capacity(k + 1);
    (0..n)
        .map(|i| {
            best.clear();
            let p = samples.point(i);
            for j in 0..n {
                if j != i {
                    push_best(&mut best, k, sq_dist(p, samples.point(j)));
                }
            }
            best[k - 1].sqrt()
        })
        .collect()
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Static k-d tree over a borrowed sample set.
pub struct KdTree<'a> {
    samples: &'a SampleSet,
    index: Vec<usize>,
    root: Node,
}

impl<'a> KdTree<'a> {
    pub fn build(samples: &'a SampleSet) -> Self {
        let mut index: Vec<usize> = (0..samples.len()).collect();
        let root = Self::build_node(samples, &mut index, 0);
        Self { samples, index, root }
    }

    fn build_node(samples: &SampleSet, idx: &mut [usize], offset: usize) -> Node {
        if idx.len() <= LEAF_SIZE {
            return Node::Leaf { start: offset, end: offset + idx.len() };
        }
        let d = samples.dim();
        let mut dim = 0;
        let mut widest = -1.0;
        for c in 0..d {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = samples.point(i)[c];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > widest {
                widest = hi - lo;
                dim = c;
            }
        }
        if widest <= 0.0 {
            return Node::Leaf { start: offset, end: offset + idx.len() };
        }
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            samples.point(a)[dim].total_cmp(&samples.point(b)[dim])
        });
        let value = samples.point(idx[mid])[dim];
        let (l, r) = idx.split_at_mut(mid);
        let left = Box::new(Self::build_node(samples, l, offset));
        let right = Box::new(Self::build_node(samples, r, offset + mid));
        Node::Split { dim, value, left, right }
    }

    /// k-th nearest distance from point `query` to the other points.
    pub fn kth_distance(&self, query: usize, k: usize) -> f64 {
        let mut best = Vec::with_capacity(k + 1);
        let q = self.samples.point(query);
        self.search(&self.root, query, q, k, &mut best);
        best[k - 1].sqrt()
    }

    fn search(&self, node: &Node, query: usize, q: &[f64], k: usize, best: &mut Vec<f64>) {
        match node {
            Node::Leaf { start, end } => {
                for &j in &self.index[*start..*end] {
                    if j != query {
                        push_best(best, k, sq_dist(q, self.samples.point(j)));
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[*dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, q, k, best);
                if best.len() < k || diff * diff <= best[k - 1] {
                    self.search(far, query, q, k, best);
                }
            }
        }
    }
}
