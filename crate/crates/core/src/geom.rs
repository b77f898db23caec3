//! Point sets and exact Euclidean k-nearest-neighbour search.
//!
//! [`NeighborIndex`] is a bucketed kd-tree. Query results are ordered by
//! `(distance, original index)`, so ties are resolved towards the point that
//! was inserted first; [`brute_force_knn`] applies the same order with a full
//! sort and serves as the validation oracle.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// A single covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::param(
                "point",
                "a point needs at least one coordinate",
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { point: 0 });
        }
        Ok(Point(coords))
    }

    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A multiset of points of a common dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        PointSet {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        PointSet {
            dim,
            coords: Vec::with_capacity(dim * n),
        }
    }

    /// Builds a set from row vectors, checking dimensions and finiteness.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyPointSet)?;
        let dim = first.as_ref().len();
        if dim == 0 {
            return Err(Error::param(
                "dimension",
                "points must have at least one coordinate",
            ));
        }
        let mut set = PointSet::with_capacity(dim, rows.len());
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite { point: i });
            }
            set.coords.extend_from_slice(row);
        }
        Ok(set)
    }

    /// One-dimensional set from scalars.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { point: i });
        }
        Ok(PointSet {
            dim: 1,
            coords: xs.to_vec(),
        })
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { point: self.len() });
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborResult {
    pub index: usize,
    pub distance: f64,
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between two points of equal length.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Candidate {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// k nearest neighbours by full sort. Validation oracle for [`NeighborIndex`].
pub fn brute_force_knn(points: &PointSet, x: &[f64], k: usize) -> Result<Vec<NeighborResult>> {
    check_query(points, x, k)?;
    let mut all: Vec<Candidate> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Candidate {
            d2: squared_distance(p, x),
            index,
        })
        .collect();
    all.sort_unstable();
    Ok(all
        .into_iter()
        .take(k)
        .map(|c| NeighborResult {
            index: c.index,
            distance: c.d2.sqrt(),
        })
        .collect())
}

fn check_query(points: &PointSet, x: &[f64], k: usize) -> Result<()> {
    if x.len() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            found: x.len(),
        });
    }
    if k == 0 || k > points.len() {
        return Err(Error::KOutOfRange { k, n: points.len() });
    }
    Ok(())
}

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

/// Immutable kd-tree over a [`PointSet`].
///
/// Leaves hold up to 16 points. The tree stores its own permuted copy of the
/// coordinates; reported indices always refer to the original order.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    source: PointSet,
    nodes: Vec<Node>,
    // permuted coordinates, row-major
    coords: Vec<f64>,
    order: Vec<usize>,
}

impl NeighborIndex {
    pub fn build(points: PointSet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let dim = points.dim();
        let n = points.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        build_node(&points, &mut order, 0, n, &mut nodes);
        let mut coords = Vec::with_capacity(n * dim);
        for &i in &order {
            coords.extend_from_slice(points.point(i));
        }
        Ok(NeighborIndex {
            source: points,
            nodes,
            coords,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn points(&self) -> &PointSet {
        &self.source
    }

    /// The `k` nearest stored points to `x`, sorted by distance then index.
    pub fn query_knn(&self, x: &[f64], k: usize) -> Result<Vec<NeighborResult>> {
        check_query(&self.source, x, k)?;
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, x, k, &mut heap);
        let mut found = heap.into_vec();
        found.sort_unstable();
        Ok(found
            .into_iter()
            .map(|c| NeighborResult {
                index: c.index,
                distance: c.d2.sqrt(),
            })
            .collect())
    }

    /// Distance from `x` to its `k`-th nearest stored point.
    pub fn kth_distance(&self, x: &[f64], k: usize) -> Result<f64> {
        let res = self.query_knn(x, k)?;
        Ok(res[k - 1].distance)
    }

    fn search(&self, node: usize, x: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                let dim = self.dim();
                for slot in start..end {
                    let p = &self.coords[slot * dim..(slot + 1) * dim];
                    let cand = Candidate {
                        d2: squared_distance(p, x),
                        index: self.order[slot],
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if let Some(worst) = heap.peek() {
                        if cand < *worst {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = x[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, x, k, heap);
                // Equal bounds are not pruned: the far side may hold a tie
                // with a smaller original index.
                let gap2 = diff * diff;
                let visit = heap.len() < k || heap.peek().is_some_and(|w| gap2 <= w.d2);
                if visit {
                    self.search(far, x, k, heap);
                }
            }
        }
    }
}

fn build_node(
    points: &PointSet,
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let dim = points.dim();
    // split on the axis of widest spread
    let (mut axis, mut spread) = (0, -1.0);
    for a in 0..dim {
        let (lo, hi) = order[start..end]
            .iter()
            .map(|&i| points.point(i)[a])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if hi - lo > spread {
            spread = hi - lo;
            axis = a;
        }
    }
    if spread <= 0.0 {
        // all points coincide
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        points.point(a)[axis].total_cmp(&points.point(b)[axis])
    });
    let value = points.point(order[mid])[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    // left: [start, mid) has coordinates <= value, right: [mid, end) >= value
    let left = build_node(points, order, start, mid, nodes);
    let right = build_node(points, order, mid, end, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> NeighborIndex {
        NeighborIndex::build(PointSet::from_scalars(xs).unwrap()).unwrap()
    }

    #[test]
    fn build_keeps_duplicates() {
        assert_eq!(line(&[0.0, 1.0, 3.0]).len(), 3);
        assert_eq!(line(&[0.0, 0.0, 1.0]).len(), 3);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(
            NeighborIndex::build(PointSet::new(2)).unwrap_err(),
            Error::EmptyPointSet
        );
        let err = PointSet::from_rows(&[vec![0.0, 1.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        let err = PointSet::from_scalars(&[0.0, f64::NAN]).unwrap_err();
        assert_eq!(err, Error::NonFinite { point: 1 });
    }

    #[test]
    fn small_queries() {
        let idx = line(&[0.0, 1.0, 3.0]);
        let r = idx.query_knn(&[0.0], 2).unwrap();
        assert_eq!(r.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(
            r.iter().map(|n| n.distance).collect::<Vec<_>>(),
            vec![0.0, 1.0]
        );

        assert_eq!(idx.query_knn(&[3.0], 1).unwrap()[0].distance, 0.0);

        let tie = line(&[-1.0, 1.0]);
        assert_eq!(tie.query_knn(&[0.0], 1).unwrap()[0].index, 0);
        let tie = line(&[1.0, -1.0]);
        assert_eq!(tie.query_knn(&[0.0], 1).unwrap()[0].index, 0);
    }

    #[test]
    fn kth_distances() {
        let idx = line(&[0.0, 1.0, 3.0]);
        let r: Vec<f64> = (1..=3)
            .map(|k| idx.kth_distance(&[0.0], k).unwrap())
            .collect();
        assert_eq!(r, vec![0.0, 1.0, 3.0]);
        assert_eq!(line(&[5.0]).kth_distance(&[5.0], 1).unwrap(), 0.0);
        assert_eq!(line(&[0.0, 2.0]).kth_distance(&[1.0], 2).unwrap(), 1.0);
    }

    #[test]
    fn query_errors() {
        let idx = line(&[0.0, 1.0, 3.0]);
        assert_eq!(
            idx.query_knn(&[0.0], 0).unwrap_err(),
            Error::KOutOfRange { k: 0, n: 3 }
        );
        assert_eq!(
            idx.query_knn(&[0.0], 4).unwrap_err(),
            Error::KOutOfRange { k: 4, n: 3 }
        );
        assert!(matches!(
            idx.query_knn(&[0.0, 1.0], 1).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn matches_brute_force_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let set = PointSet::from_rows(&rows).unwrap();
        let idx = NeighborIndex::build(set.clone()).unwrap();
        for _ in 0..100 {
            let x = [
                rng.random::<f64>() * 1.2 - 0.1,
                rng.random::<f64>() * 1.2 - 0.1,
            ];
            let k = rng.random_range(1..=500);
            assert_eq!(
                idx.query_knn(&x, k).unwrap(),
                brute_force_knn(&set, &x, k).unwrap()
            );
        }
    }

    #[test]
    fn grid_ties_match_brute_force() {
        // integer lattice produces many exact distance ties
        let rows: Vec<Vec<f64>> = (0..20)
            .flat_map(|i| (0..20).map(move |j| vec![(i % 7) as f64, (j % 5) as f64]))
            .collect();
        let set = PointSet::from_rows(&rows).unwrap();
        let idx = NeighborIndex::build(set.clone()).unwrap();
        for q in [[0.0, 0.0], [3.0, 2.0], [3.5, 2.5], [10.0, -1.0]] {
            for k in [1, 5, 17, 100, 400] {
                assert_eq!(
                    idx.query_knn(&q, k).unwrap(),
                    brute_force_knn(&set, &q, k).unwrap()
                );
            }
        }
    }
}
