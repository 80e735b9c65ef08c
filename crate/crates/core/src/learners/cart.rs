//! Greedy regression tree with axis-aligned, variance-reducing splits.

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    rows: &'a [f64],
    width: usize,
    y: &'a [f64],
    w: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Sums {
    w: f64,
    wy: f64,
    wy2: f64,
}

impl Sums {
    const ZERO: Sums = Sums {
        w: 0.0,
        wy: 0.0,
        wy2: 0.0,
    };

    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.wy += w * y;
        self.wy2 += w * y * y;
    }

    fn minus(self, o: Sums) -> Sums {
        Sums {
            w: self.w - o.w,
            wy: self.wy - o.wy,
            wy2: self.wy2 - o.wy2,
        }
    }

    fn sse(self) -> f64 {
        if self.w > 0.0 {
            (self.wy2 - self.wy * self.wy / self.w).max(0.0)
        } else {
            0.0
        }
    }
}

impl Builder<'_> {
    fn value(&self, i: usize, f: usize) -> f64 {
        self.rows[i * self.width + f]
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let wsum: f64 = idx.iter().map(|&i| self.w[i]).sum();
        if wsum > 0.0 {
            idx.iter().map(|&i| self.w[i] * self.y[i]).sum::<f64>() / wsum
        } else {
            idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
        }
    }

    /// Best `(feature, threshold, gain)`; scanning order makes the earliest
    /// feature and then the smallest threshold win exact ties.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let mut total = Sums::ZERO;
        for &i in idx {
            total.add(self.w[i], self.y[i]);
        }
        let parent = total.sse();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = idx.to_vec();
        for f in 0..self.width {
            sorted.sort_by(|&a, &b| self.value(a, f).total_cmp(&self.value(b, f)).then(a.cmp(&b)));
            let mut left = Sums::ZERO;
            for s in 0..sorted.len() - 1 {
                let i = sorted[s];
                left.add(self.w[i], self.y[i]);
                let (lo, hi) = (self.value(i, f), self.value(sorted[s + 1], f));
                let n_left = s + 1;
                if lo == hi || n_left < self.min_leaf || sorted.len() - n_left < self.min_leaf {
                    continue;
                }
                let gain = parent - left.sse() - total.minus(left).sse();
                if gain > best.map_or(0.0, |b| b.2) {
                    best = Some((f, 0.5 * (lo + hi), gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(self.leaf_value(&idx)));
        let constant = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        if depth >= self.max_depth || constant || idx.len() < 2 * self.min_leaf {
            return id;
        }
        if let Some((feature, threshold, _)) = self.best_split(&idx) {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.value(i, feature) <= threshold);
            let left = self.grow(l, depth + 1);
            let right = self.grow(r, depth + 1);
            self.nodes[id] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
        id
    }
}

impl Tree {
    pub fn fit(rows: &[f64], width: usize, y: &[f64], w: &[f64], max_depth: usize, min_leaf: usize) -> Tree {
        let mut b = Builder {
            rows,
            width,
            y,
            w,
            max_depth,
            min_leaf,
            nodes: Vec::new(),
        };
        b.grow((0..y.len()).collect(), 0);
        Tree { nodes: b.nodes }
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_recovers_step() {
        // y = 1{w >= 0} on a symmetric grid
        let w: Vec<f64> = (-5..=5).map(|k| k as f64 / 5.0).filter(|v| *v != 0.0).collect();
        let y: Vec<f64> = w.iter().map(|&v| f64::from(u8::from(v >= 0.0))).collect();
        let tree = Tree::fit(&w, 1, &y, &vec![1.0; w.len()], 1, 1);
        assert_eq!(tree.n_leaves(), 2);
        for (x, t) in w.iter().zip(&y) {
            assert_eq!(tree.predict_one(&[*x]), *t);
        }
        // brute force: the only zero-error threshold lies between -0.2 and 0.2
        assert_eq!(tree.predict_one(&[-0.0001]), 0.0);
        assert_eq!(tree.predict_one(&[0.0001]), 1.0);
    }

    #[test]
    fn equal_gains_take_first_feature() {
        // both features separate y perfectly
        let rows = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let y = [0.0, 0.0, 1.0, 1.0];
        let tree = Tree::fit(&rows, 2, &y, &[1.0; 4], 1, 1);
        match tree.nodes[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (0, 0.5)),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn constant_target_is_a_leaf() {
        let tree = Tree::fit(&[1.0, 2.0, 3.0], 1, &[4.0; 3], &[1.0; 3], 3, 1);
        assert_eq!(tree.nodes, vec![Node::Leaf(4.0)]);
    }

    #[test]
    fn min_leaf_is_respected() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let mut y = vec![0.0; 10];
        y[9] = 100.0;
        let tree = Tree::fit(&x, 1, &y, &[1.0; 10], 1, 3);
        // best admissible split leaves three rows on the right
        assert_eq!(tree.predict_one(&[9.0]), 100.0 / 3.0);
    }
}
