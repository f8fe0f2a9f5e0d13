//! Exact k-d tree over a point set.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Spatial index supporting exact k-nearest and radius queries.
///
/// Results are `(index, squared distance)` with indices into the slice the
/// index was built from.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Vec3>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    id: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl NeighborIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut ids: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !points.is_empty() {
            build(points, &mut ids, 0, &mut nodes);
        }
        let reordered = ids.iter().map(|&i| points[i as usize]).collect();
        Self { points: reordered, ids, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point to `query`; ties resolve to the lower index.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Candidate { dist2: f64::INFINITY, id: u32::MAX };
        self.nearest_rec(0, query, &mut best);
        Some((best.id as usize, best.dist2))
    }

    /// Nearest point within `max_dist`.
    pub fn nearest_within(&self, query: &Vec3, max_dist: f64) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Candidate { dist2: max_dist * max_dist, id: u32::MAX };
        self.nearest_rec(0, query, &mut best);
        (best.id != u32::MAX).then_some((best.id as usize, best.dist2))
    }

    /// The `k` nearest points sorted by distance (ties by index).
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.id as usize, c.dist2)).collect()
    }

    /// All points with distance `<= radius`, sorted by index.
    pub fn within_radius(&self, query: &Vec3, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_rec(0, query, radius * radius, &mut out);
        }
        out.sort_by_key(|&(i, _)| i);
        out
    }

    fn nearest_rec(&self, node: usize, q: &Vec3, best: &mut Candidate) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let d2 = (self.points[slot] - q).norm_squared();
                    let id = self.ids[slot];
                    if d2 < best.dist2 || (d2 == best.dist2 && id < best.id) {
                        *best = Candidate { dist2: d2, id };
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                let (first, second) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(first as usize, q, best);
                if diff * diff <= best.dist2 {
                    self.nearest_rec(second as usize, q, best);
                }
            }
        }
    }

    fn knn_rec(&self, node: usize, q: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let c = Candidate { dist2: (self.points[slot] - q).norm_squared(), id: self.ids[slot] };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("non-empty heap") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                let (first, second) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(first as usize, q, k, heap);
                let bound = if heap.len() < k { f64::INFINITY } else { heap.peek().map_or(f64::INFINITY, |c| c.dist2) };
                if diff * diff <= bound {
                    self.knn_rec(second as usize, q, k, heap);
                }
            }
        }
    }

    fn radius_rec(&self, node: usize, q: &Vec3, r2: f64, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let d2 = (self.points[slot] - q).norm_squared();
                    if d2 <= r2 {
                        out.push((self.ids[slot] as usize, d2));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.radius_rec(left as usize, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.radius_rec(right as usize, q, r2, out);
                }
            }
        }
    }
}

fn build(points: &[Vec3], ids: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let me = nodes.len() as u32;
    if ids.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: offset as u32, end: (offset + ids.len()) as u32 });
        return me;
    }
    let mut lo = points[ids[0] as usize];
    let mut hi = lo;
    for &i in ids.iter() {
        lo = lo.inf(&points[i as usize]);
        hi = hi.sup(&points[i as usize]);
    }
    let spread = hi - lo;
    let axis = spread.imax();
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| points[a as usize][axis].total_cmp(&points[b as usize][axis]));
    let value = points[ids[mid] as usize][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_ids, right_ids) = ids.split_at_mut(mid);
    let left = build(points, left_ids, offset, nodes);
    let right = build(points, right_ids, offset + mid, nodes);
    nodes[me as usize] = Node::Split { axis: axis as u8, value, left, right };
    me
}
