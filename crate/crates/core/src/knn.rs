//! Exact k-nearest-neighbour queries over a fixed set of points.
//!
//! Results are ordered by `(squared distance, point index)`, so they match an
//! exhaustive scan exactly, including how ties are broken.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    start: usize,
    end: usize,
    /// Child node ids; `None` for leaves.
    children: Option<(usize, usize)>,
}

/// k-d tree over a subset of a borrowed point slice.
#[derive(Debug, Clone)]
pub struct KnnIndex<'a> {
    points: &'a [Vec3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KnnIndex<'a> {
    /// Index over every point.
    pub fn new(points: &'a [Vec3]) -> Result<Self> {
        Self::build(points, (0..points.len()).collect())
    }

    /// Index over `subset` only; returned indices still refer to `points`.
    pub fn with_subset(points: &'a [Vec3], subset: &[usize]) -> Result<Self> {
        if let Some(&bad) = subset.iter().find(|&&i| i >= points.len()) {
            return Err(Error::LengthMismatch { what: "k-NN subset index", expected: points.len(), found: bad });
        }
        Self::build(points, subset.to_vec())
    }

    fn build(points: &'a [Vec3], order: Vec<usize>) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut index = Self { points, order, nodes: Vec::new() };
        index.build_node(0, index.order.len());
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, start, end, children: None });
        if end - start > LEAF_SIZE {
            let extent = hi - lo;
            let axis = if extent.x >= extent.y && extent.x >= extent.z {
                0
            } else if extent.y >= extent.z {
                1
            } else {
                2
            };
            let mid = start + (end - start) / 2;
            let points = self.points;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                points[a].get(axis).total_cmp(&points[b].get(axis)).then(a.cmp(&b))
            });
            let left = self.build_node(start, mid);
            let right = self.build_node(mid, end);
            self.nodes[id].children = Some((left, right));
        }
        id
    }

    fn bounds(&self, start: usize, end: usize) -> (Vec3, Vec3) {
        let first = self.points[self.order[start]];
        self.order[start..end].iter().fold((first, first), |(lo, hi), &i| {
            let p = self.points[i];
            (
                Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        })
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn points(&self) -> &'a [Vec3] {
        self.points
    }

    /// The `min(k, len)` nearest indexed points to `q`, nearest first.
    pub fn query(&self, q: Vec3, k: usize) -> Result<Vec<usize>> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        let mut out = Vec::with_capacity(k.min(self.len()));
        self.query_into(q, k, &mut out);
        Ok(out.into_iter().map(|(_, i)| i).collect())
    }

    /// Like [`query`](Self::query) but writes `(squared distance, index)`
    /// pairs into a reusable buffer.
    pub fn query_into(&self, q: Vec3, k: usize, out: &mut Vec<(f64, usize)>) {
        self.query_filtered_into(q, k, |_| true, out);
    }

    /// Nearest `k` points among those for which `keep(index)` holds.
    pub fn query_filtered_into<F>(&self, q: Vec3, k: usize, keep: F, out: &mut Vec<(f64, usize)>)
    where
        F: Fn(usize) -> bool,
    {
        out.clear();
        if k == 0 {
            return;
        }
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if out.len() == k && box_distance_squared(q, node.lo, node.hi) > out[k - 1].0 {
                continue;
            }
            match node.children {
                Some((left, right)) => {
                    let dl = box_distance_squared(q, self.nodes[left].lo, self.nodes[left].hi);
                    let dr = box_distance_squared(q, self.nodes[right].lo, self.nodes[right].hi);
                    // Push the farther child first so the nearer one is visited first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        if !keep(i) {
                            continue;
                        }
                        let cand = (self.points[i].distance_squared(q), i);
                        insert_sorted(out, k, cand);
                    }
                }
            }
        }
    }
}

#[inline]
fn key_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[inline]
fn insert_sorted(out: &mut Vec<(f64, usize)>, k: usize, cand: (f64, usize)) {
    if out.len() == k {
        if !key_less(cand, out[k - 1]) {
            return;
        }
        out.pop();
    }
    let mut pos = out.len();
    while pos > 0 && key_less(cand, out[pos - 1]) {
        pos -= 1;
    }
    out.insert(pos, cand);
}

#[inline]
fn box_distance_squared(q: Vec3, lo: Vec3, hi: Vec3) -> f64 {
    let mut d = 0.0;
    for axis in 0..3 {
        let v = q.get(axis);
        let (l, h) = (lo.get(axis), hi.get(axis));
        let e = if v < l {
            l - v
        } else if v > h {
            v - h
        } else {
            0.0
        };
        d += e * e;
    }
    d
}
