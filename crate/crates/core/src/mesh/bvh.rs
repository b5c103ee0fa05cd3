use nalgebra::Vector3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn distance_squared(&self, p: &Vector3<f64>) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }

    /// Slab test for the half-line `origin + t·dir`, t ≥ 0.
    pub fn hits_ray(&self, origin: &Vector3<f64>, inv_dir: &Vector3<f64>) -> bool {
        let mut tmin: f64 = 0.0;
        let mut tmax = f64::INFINITY;
        for i in 0..3 {
            let t1 = (self.min[i] - origin[i]) * inv_dir[i];
            let t2 = (self.max[i] - origin[i]) * inv_dir[i];
            tmin = tmin.max(t1.min(t2));
            tmax = tmax.min(t1.max(t2));
        }
        tmin <= tmax
    }

    fn longest_axis(&self) -> usize {
        let ext = self.max - self.min;
        if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive in `order`; interior: index of the left child
    /// (the right child is `start + 1`).
    start: u32,
    /// Primitive count for leaves, zero for interior nodes.
    count: u32,
}

/// Bounding-volume hierarchy over triangles, median split on the longest
/// centroid axis.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(vertices: &[Vector3<f64>], triangles: &[[u32; 3]]) -> Self {
        let boxes: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                for &i in t {
                    b.grow(&vertices[i as usize]);
                }
                b
            })
            .collect();
        let centroids: Vec<Vector3<f64>> = boxes.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = vec![Node {
            bounds: Aabb::empty(),
            start: 0,
            count: 0,
        }];
        let mut stack = vec![(0usize, 0usize, order.len())];
        while let Some((node, lo, hi)) = stack.pop() {
            let bounds = order[lo..hi]
                .iter()
                .fold(Aabb::empty(), |acc, &t| acc.merge(&boxes[t as usize]));
            nodes[node].bounds = bounds;
            if hi - lo <= LEAF_SIZE {
                nodes[node].start = lo as u32;
                nodes[node].count = (hi - lo) as u32;
                continue;
            }
            let mut cbox = Aabb::empty();
            for &t in &order[lo..hi] {
                cbox.grow(&centroids[t as usize]);
            }
            let axis = cbox.longest_axis();
            let mid = (lo + hi) / 2;
            order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
            });
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            nodes[node].start = left as u32;
            stack.push((left, lo, mid));
            stack.push((left + 1, mid, hi));
        }
        Self { nodes, order }
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Visits leaves nearest-first, calling `visit(triangle)` which returns
    /// the current best squared distance; subtrees farther than it are skipped.
    pub fn nearest<F: FnMut(u32) -> f64>(&self, p: &Vector3<f64>, mut visit: F) {
        let mut best = f64::INFINITY;
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.distance_squared(p)));
        while let Some((idx, d2)) = stack.pop() {
            if d2 > best {
                continue;
            }
            let node = &self.nodes[idx as usize];
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    best = best.min(visit(t));
                }
                continue;
            }
            let (l, r) = (node.start, node.start + 1);
            let dl = self.nodes[l as usize].bounds.distance_squared(p);
            let dr = self.nodes[r as usize].bounds.distance_squared(p);
            // push the farther child first so the nearer one is popped next
            if dl <= dr {
                stack.push((r, dr));
                stack.push((l, dl));
            } else {
                stack.push((l, dl));
                stack.push((r, dr));
            }
        }
    }

    /// Calls `visit` for every triangle whose leaf box the ray touches.
    pub fn along_ray<F: FnMut(u32)>(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, mut visit: F) {
        let inv = dir.map(|c| 1.0 / c);
        let mut stack = vec![0u32];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            if !node.bounds.hits_ray(origin, &inv) {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &t in &self.order[s..s + node.count as usize] {
                    visit(t);
                }
            } else {
                stack.push(node.start);
                stack.push(node.start + 1);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn every_triangle_lands_in_exactly_one_leaf() {
        let mesh = primitives::icosphere(1.0, 2);
        let bvh = Bvh::build(&mesh.vertices, &mesh.triangles);
        let mut seen = bvh.order.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..mesh.triangles.len() as u32).collect::<Vec<_>>());
        for node in bvh.nodes.iter().filter(|n| n.count > 0) {
            for &t in &bvh.order[node.start as usize..(node.start + node.count) as usize] {
                for &v in &mesh.triangles[t as usize] {
                    let p = mesh.vertices[v as usize];
                    assert_eq!(node.bounds.distance_squared(&p), 0.0);
                }
            }
        }
    }

    #[test]
    fn aabb_distance_and_ray() {
        let b = Aabb {
            min: Vector3::zeros(),
            max: Vector3::repeat(1.0),
        };
        assert_eq!(b.distance_squared(&Vector3::new(2.0, 0.5, 0.5)), 1.0);
        let inv = Vector3::new(1.0, f64::INFINITY, f64::INFINITY);
        assert!(b.hits_ray(&Vector3::new(-1.0, 0.5, 0.5), &inv));
        assert!(!b.hits_ray(&Vector3::new(2.0, 0.5, 0.5), &inv));
    }
}
