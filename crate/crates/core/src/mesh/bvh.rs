use crate::geom::{Aabb, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    // leaf: faces[start..start+count]; interior: children at `start` and `start + 1`-th subtree via `right`
    start: u32,
    count: u32,
    right: u32,
}

/// Bounding volume hierarchy over triangle faces.
#[derive(Clone, Debug, Default)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(face_bounds: &[Aabb]) -> Self {
        let mut order: Vec<u32> = (0..face_bounds.len() as u32).collect();
        let centroids: Vec<Vec3> = face_bounds.iter().map(Aabb::center).collect();
        let mut nodes = Vec::with_capacity(2 * face_bounds.len() / LEAF_SIZE + 1);
        if !face_bounds.is_empty() {
            Self::build_rec(&mut nodes, &mut order, 0, face_bounds, &centroids);
        }
        Self { nodes, order }
    }

    fn build_rec(
        nodes: &mut Vec<Node>,
        order: &mut [u32],
        offset: usize,
        bounds: &[Aabb],
        centroids: &[Vec3],
    ) -> usize {
        let node_bounds = order
            .iter()
            .fold(Aabb::empty(), |acc, &f| acc.union(&bounds[f as usize]));
        let idx = nodes.len();
        nodes.push(Node {
            bounds: node_bounds,
            start: offset as u32,
            count: order.len() as u32,
            right: 0,
        });
        if order.len() <= LEAF_SIZE {
            return idx;
        }
        let cb = Aabb::from_points(order.iter().map(|&f| &centroids[f as usize]));
        let ext = cb.extents();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        if ext[axis] <= 0.0 {
            return idx;
        }
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let (lo, hi) = order.split_at_mut(mid);
        Self::build_rec(nodes, lo, offset, bounds, centroids);
        let right = Self::build_rec(nodes, hi, offset + mid, bounds, centroids);
        nodes[idx].count = 0;
        nodes[idx].right = right as u32;
        idx
    }

    /// Calls `visit` for every face whose box the ray enters before `t_max`.
    /// The visitor returns an updated `t_max` (for closest-hit queries).
    pub fn ray_query(&self, origin: &Vec3, dir: &Vec3, mut t_max: f64, mut visit: impl FnMut(usize) -> f64) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds.ray_entry(origin, &inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &f in &self.order[s..s + node.count as usize] {
                    t_max = t_max.min(visit(f as usize));
                }
            } else {
                stack.push(node.right as usize);
                stack.push(n + 1);
            }
        }
    }

    pub fn box_query(&self, query: &Aabb, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bounds.intersects(query) {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &f in &self.order[s..s + node.count as usize] {
                    visit(f as usize);
                }
            } else {
                stack.push(node.right as usize);
                stack.push(n + 1);
            }
        }
    }
}
