//! Static 2-d tree for nearest-neighbour and radius queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub struct KdTree<'a> {
    points: &'a [[f64; 2]],
    /// Point indices in tree order; node `lo..hi` splits at its midpoint.
    order: Vec<usize>,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // max-heap on (distance, index), so ties keep the lower index
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [[f64; 2]]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self { points, order }
    }

    /// The `k` nearest points to point `i`, excluding `i` itself, closest
    /// first. Equal distances are ordered by index.
    pub fn k_nearest(&self, i: usize, k: usize) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 {
            self.knn(0, self.order.len(), 0, self.points[i], i, k, &mut heap);
        }
        let mut out: Vec<(usize, f64)> = heap
            .into_iter()
            .map(|c| (c.index, c.dist2.sqrt()))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Every point within distance `r` of point `i`, including `i`.
    pub fn within(&self, i: usize, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius(0, self.order.len(), 0, self.points[i], r * r, &mut out);
        out.sort_unstable();
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn knn(
        &self,
        lo: usize,
        hi: usize,
        axis: usize,
        q: [f64; 2],
        skip: usize,
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        if idx != skip {
            let c = Candidate {
                dist2: dist2(p, q),
                index: idx,
            };
            if heap.len() < k {
                heap.push(c);
            } else if c < *heap.peek().expect("heap is full") {
                heap.pop();
                heap.push(c);
            }
        }
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn(near.0, near.1, 1 - axis, q, skip, k, heap);
        // <= so that equal-distance points on the far side still compete on index
        if heap.len() < k || delta * delta <= heap.peek().expect("non-empty").dist2 {
            self.knn(far.0, far.1, 1 - axis, q, skip, k, heap);
        }
    }

    fn radius(&self, lo: usize, hi: usize, axis: usize, q: [f64; 2], r2: f64, out: &mut Vec<usize>) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = self.points[idx];
        if dist2(p, q) <= r2 {
            out.push(idx);
        }
        let delta = q[axis] - p[axis];
        if delta <= 0.0 || delta * delta <= r2 {
            self.radius(lo, mid, 1 - axis, q, r2, out);
        }
        if delta >= 0.0 || delta * delta <= r2 {
            self.radius(mid + 1, hi, 1 - axis, q, r2, out);
        }
    }
}

fn build(points: &[[f64; 2]], order: &mut [usize], axis: usize) {
    if order.len() <= 1 {
        return;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .total_cmp(&points[b][axis])
            .then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    build(points, left, 1 - axis);
    build(points, &mut right[1..], 1 - axis);
}
