//! Nearest-sample search.
//!
//! `brute_nearest` / `brute_two_nearest` are the reference scan. `KdTree`
//! returns the same indices: candidates are ordered by `(key, index)`, so ties
//! resolve to the smallest sample index regardless of traversal order, and
//! subtrees are pruned only when their bound is strictly worse than the
//! current candidate.

use crate::geometry::Metric;
use crate::scalar::Real;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    /// Comparison key: squared distance for `Euclidean`, distance for `OneNorm`.
    pub key: T,
}

#[inline]
fn better<T: Real>(key: T, index: usize, than: &Neighbor<T>) -> bool {
    key < than.key || (key == than.key && index < than.index)
}

pub fn brute_nearest<T: Real>(points: &[T], dim: usize, metric: Metric, query: &[T]) -> Neighbor<T> {
    let mut best = Neighbor { index: usize::MAX, key: T::infinity() };
    for (j, p) in points.chunks_exact(dim).enumerate() {
        let key = metric.key(p, query);
        if better(key, j, &best) {
            best = Neighbor { index: j, key };
        }
    }
    best
}

pub fn brute_two_nearest<T: Real>(
    points: &[T],
    dim: usize,
    metric: Metric,
    query: &[T],
) -> (Neighbor<T>, Neighbor<T>) {
    let mut pair = TwoBest::new();
    for (j, p) in points.chunks_exact(dim).enumerate() {
        pair.offer(metric.key(p, query), j);
    }
    (pair.first, pair.second)
}

struct TwoBest<T> {
    first: Neighbor<T>,
    second: Neighbor<T>,
}

impl<T: Real> TwoBest<T> {
    fn new() -> Self {
        let none = Neighbor { index: usize::MAX, key: T::infinity() };
        Self { first: none, second: none }
    }

    #[inline]
    fn offer(&mut self, key: T, index: usize) {
        if better(key, index, &self.first) {
            self.second = self.first;
            self.first = Neighbor { index, key };
        } else if better(key, index, &self.second) {
            self.second = Neighbor { index, key };
        }
    }
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree<T> {
    dim: usize,
    metric: Metric,
    points: Vec<T>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> KdTree<T> {
    /// Builds a tree over row-major `points` with `dim` coordinates per row.
    pub fn new(points: &[T], dim: usize, metric: Metric) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim));
        let n = points.len() / dim;
        let mut tree = Self {
            dim,
            metric,
            points: points.to_vec(),
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    #[inline]
    fn coord(&self, j: usize, axis: usize) -> T {
        self.points[j * self.dim + axis]
    }

    #[inline]
    fn row(&self, j: usize) -> &[T] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = (0..self.dim)
            .map(|k| {
                let (lo, hi) = self.order[start..end].iter().fold(
                    (T::infinity(), T::neg_infinity()),
                    |(lo, hi), &j| {
                        let c = self.coord(j, k);
                        (lo.min(c), hi.max(c))
                    },
                );
                (k, hi - lo)
            })
            .fold((0, T::neg_infinity()), |acc, (k, s)| if s > acc.1 { (k, s) } else { acc })
            .0;
        let mid = start + (end - start) / 2;
        let (dim, pts) = (self.dim, &self.points);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a * dim + axis]
                .partial_cmp(&pts[b * dim + axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let value = self.coord(self.order[mid], axis);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    #[inline]
    fn bound(&self, query: &[T], axis: usize, value: T) -> T {
        self.metric.key_from_gap((query[axis] - value).abs())
    }

    pub fn nearest(&self, query: &[T]) -> Neighbor<T> {
        let mut best = Neighbor { index: usize::MAX, key: T::infinity() };
        if !self.nodes.is_empty() {
            self.search_one(0, query, &mut best);
        }
        best
    }

    fn search_one(&self, node: usize, query: &[T], best: &mut Neighbor<T>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.order[start..end] {
                    let key = self.metric.key(self.row(j), query);
                    if better(key, j, best) {
                        *best = Neighbor { index: j, key };
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let (near, far) = if query[axis] <= value { (left, right) } else { (right, left) };
                self.search_one(near, query, best);
                if self.bound(query, axis, value) <= best.key {
                    self.search_one(far, query, best);
                }
            }
        }
    }

    pub fn two_nearest(&self, query: &[T]) -> (Neighbor<T>, Neighbor<T>) {
        let mut pair = TwoBest::new();
        if !self.nodes.is_empty() {
            self.search_two(0, query, &mut pair);
        }
        (pair.first, pair.second)
    }

    fn search_two(&self, node: usize, query: &[T], pair: &mut TwoBest<T>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.order[start..end] {
                    pair.offer(self.metric.key(self.row(j), query), j);
                }
            }
            Node::Split { axis, value, left, right } => {
                let (near, far) = if query[axis] <= value { (left, right) } else { (right, left) };
                self.search_two(near, query, pair);
                if self.bound(query, axis, value) <= pair.second.key {
                    self.search_two(far, query, pair);
                }
            }
        }
    }
}
