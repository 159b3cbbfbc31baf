//! Nearest-neighbour queries under the maximum norm, as needed by the
//! Kraskov-style estimators: the distance to the k-th neighbour in a joint
//! space and strict range counts in its marginal subspaces.

const LEAF_SIZE: usize = 12;
const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    start: u32,
    end: u32,
    left: u32,
    right: u32,
}

/// Static k-d tree over row-major points.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    /// Points in tree order, row-major.
    points: Vec<f64>,
    /// Original row of each tree-ordered point.
    rows: Vec<u32>,
    nodes: Vec<Node>,
    /// Per-node bounding box, `[lo_0..lo_d, hi_0..hi_d]`.
    bounds: Vec<f64>,
}

impl KdTree {
    /// `points` holds `n × dim` values, row-major.
    pub fn build(points: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && points.len().is_multiple_of(dim));
        let n = points.len() / dim;
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            dim,
            points: Vec::new(),
            rows: Vec::new(),
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            bounds: Vec::new(),
        };
        if n > 0 {
            tree.build_node(points, &mut order, 0, n);
        }
        tree.points = Vec::with_capacity(points.len());
        for &r in &order {
            let r = r as usize;
            tree.points
                .extend_from_slice(&points[r * dim..(r + 1) * dim]);
        }
        tree.rows = order;
        tree
    }

    fn build_node(&mut self, points: &[f64], order: &mut [u32], start: usize, end: usize) -> u32 {
        let dim = self.dim;
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &r in &order[start..end] {
            let p = &points[r as usize * dim..(r as usize + 1) * dim];
            for d in 0..dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let (split_dim, spread) = (0..dim)
            .map(|d| (d, hi[d] - lo[d]))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);

        if end - start > LEAF_SIZE && spread > 0.0 {
            let mid = start + (end - start) / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                points[a as usize * dim + split_dim]
                    .total_cmp(&points[b as usize * dim + split_dim])
            });
            let left = self.build_node(points, order, start, mid);
            let right = self.build_node(points, order, mid, end);
            self.nodes[id as usize].left = left;
            self.nodes[id as usize].right = right;
        }
        id
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn min_dist(&self, node: usize, q: &[f64]) -> f64 {
        let dim = self.dim;
        let b = &self.bounds[node * 2 * dim..(node + 1) * 2 * dim];
        let mut m = 0.0f64;
        for d in 0..dim {
            let v = (b[d] - q[d]).max(q[d] - b[dim + d]);
            if v > m {
                m = v;
            }
        }
        m
    }

    #[inline]
    fn max_dist(&self, node: usize, q: &[f64]) -> f64 {
        let dim = self.dim;
        let b = &self.bounds[node * 2 * dim..(node + 1) * 2 * dim];
        let mut m = 0.0f64;
        for d in 0..dim {
            let v = (q[d] - b[d]).abs().max((b[dim + d] - q[d]).abs());
            if v > m {
                m = v;
            }
        }
        m
    }

    #[inline]
    fn dist(&self, slot: usize, q: &[f64]) -> f64 {
        let p = &self.points[slot * self.dim..(slot + 1) * self.dim];
        let mut m = 0.0f64;
        for (a, b) in p.iter().zip(q) {
            let v = (a - b).abs();
            if v > m {
                m = v;
            }
        }
        m
    }

    /// Max-norm distance from `q` to its k-th nearest point, ignoring the
    /// point whose original row is `exclude`.
    pub fn kth_distance(&self, q: &[f64], k: usize, exclude: usize) -> f64 {
        assert!(k >= 1 && k < self.len());
        let mut best = vec![f64::INFINITY; k];
        self.knn_visit(0, q, exclude as u32, &mut best);
        best[k - 1]
    }

    fn knn_visit(&self, node: usize, q: &[f64], exclude: u32, best: &mut [f64]) {
        let n = &self.nodes[node];
        if n.left == NO_CHILD {
            for slot in n.start as usize..n.end as usize {
                if self.rows[slot] == exclude {
                    continue;
                }
                let d = self.dist(slot, q);
                let k = best.len();
                if d < best[k - 1] {
                    let mut i = k - 1;
                    while i > 0 && best[i - 1] > d {
                        best[i] = best[i - 1];
                        i -= 1;
                    }
                    best[i] = d;
                }
            }
            return;
        }
        let (l, r) = (n.left as usize, n.right as usize);
        let (dl, dr) = (self.min_dist(l, q), self.min_dist(r, q));
        let (first, df, second, ds) = if dl <= dr {
            (l, dl, r, dr)
        } else {
            (r, dr, l, dl)
        };
        if df < best[best.len() - 1] {
            self.knn_visit(first, q, exclude, best);
        }
        if ds < best[best.len() - 1] {
            self.knn_visit(second, q, exclude, best);
        }
    }

    /// Number of points at max-norm distance strictly below `radius`.
    pub fn count_within(&self, q: &[f64], radius: f64) -> usize {
        if self.is_empty() {
            return 0;
        }
        self.count_visit(0, q, radius)
    }

    fn count_visit(&self, node: usize, q: &[f64], radius: f64) -> usize {
        if self.min_dist(node, q) >= radius {
            return 0;
        }
        let n = &self.nodes[node];
        if self.max_dist(node, q) < radius {
            return (n.end - n.start) as usize;
        }
        if n.left == NO_CHILD {
            return (n.start as usize..n.end as usize)
                .filter(|&slot| self.dist(slot, q) < radius)
                .count();
        }
        self.count_visit(n.left as usize, q, radius) + self.count_visit(n.right as usize, q, radius)
    }
}

/// Strict range counting in a subspace: a sorted array in one dimension,
/// a k-d tree otherwise.
#[derive(Debug, Clone)]
pub enum RangeCounter {
    Sorted(Vec<f64>),
    Tree(KdTree),
}

impl RangeCounter {
    pub fn build(points: &[f64], dim: usize) -> Self {
        if dim == 1 {
            let mut v = points.to_vec();
            v.sort_by(f64::total_cmp);
            RangeCounter::Sorted(v)
        } else {
            RangeCounter::Tree(KdTree::build(points, dim))
        }
    }

    pub fn count_within(&self, q: &[f64], radius: f64) -> usize {
        match self {
            RangeCounter::Sorted(v) => {
                let q = q[0];
                // widened bracket, then trimmed with the exact |x − q| < r test
                let slack = 1e-12 * (q.abs() + radius) + f64::MIN_POSITIVE;
                let mut lo = v.partition_point(|&x| x < q - radius - slack);
                let mut hi = v.partition_point(|&x| x <= q + radius + slack);
                while lo < hi && (v[lo] - q).abs() >= radius {
                    lo += 1;
                }
                while hi > lo && (v[hi - 1] - q).abs() >= radius {
                    hi -= 1;
                }
                hi - lo
            }
            RangeCounter::Tree(t) => t.count_within(q, radius),
        }
    }
}
