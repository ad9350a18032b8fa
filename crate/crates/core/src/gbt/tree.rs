use serde::{Deserialize, Serialize};

/// Growth limits of a single regression tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Limits {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `x[feature] <= threshold` goes to `left`.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// A binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
    n_left: usize,
}

impl Tree {
    /// A tree with one leaf.
    pub fn constant(value: f64) -> Self {
        Tree { nodes: vec![Node::Leaf { value }] }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Index of the leaf `x` falls into.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut at = 0;
        while let Node::Split { feature, threshold, left, right } = &self.nodes[at] {
            at = if x[*feature] <= *threshold { *left } else { *right };
        }
        at
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    /// Exact greedy least-squares tree on `target` over the rows `idx` of
    /// `x`. Leaves hold their sample indices; values are left at zero for the
    /// caller to fill in. Returns the tree and each leaf's members.
    pub(crate) fn grow(x: &[Vec<f64>], target: &[f64], idx: Vec<usize>, limits: Limits) -> (Tree, Vec<(usize, Vec<usize>)>) {
        let mut tree = Tree { nodes: Vec::new() };
        let mut leaves = Vec::new();
        tree.grow_node(x, target, idx, 0, limits, &mut leaves);
        (tree, leaves)
    }

    fn grow_node(
        &mut self,
        x: &[Vec<f64>],
        target: &[f64],
        idx: Vec<usize>,
        depth: usize,
        limits: Limits,
        leaves: &mut Vec<(usize, Vec<usize>)>,
    ) -> usize {
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let split = if depth < limits.max_depth && idx.len() >= limits.min_samples_split.max(2) {
            best_split(x, target, &idx, limits.min_samples_leaf.max(1))
        } else {
            None
        };
        match split {
            None => leaves.push((me, idx)),
            Some(b) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][b.feature] <= b.threshold);
                debug_assert_eq!(l.len(), b.n_left);
                let left = self.grow_node(x, target, l, depth + 1, limits, leaves);
                let right = self.grow_node(x, target, r, depth + 1, limits, leaves);
                self.nodes[me] = Node::Split { feature: b.feature, threshold: b.threshold, left, right };
            }
        }
        me
    }
}

/// Best variance-reduction split `S_L²/n_L + S_R²/n_R − S²/n`, ties going to
/// the lowest feature and then the lowest threshold.
fn best_split(x: &[Vec<f64>], target: &[f64], idx: &[usize], min_leaf: usize) -> Option<Best> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| target[i]).sum();
    let mean = total / n as f64;
    let ss: f64 = idx.iter().map(|&i| (target[i] - mean).powi(2)).sum();
    if ss <= 0.0 {
        return None;
    }
    let base = total * total / n as f64;
    let mut best: Option<Best> = None;
    let mut order = idx.to_vec();
    for f in 0..x[idx[0]].len() {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = 0.0;
        for k in 1..n {
            left += target[order[k - 1]];
            let (lo, hi) = (x[order[k - 1]][f], x[order[k]][f]);
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right = total - left;
            let gain = left * left / k as f64 + right * right / (n - k) as f64 - base;
            if gain > 1e-12 * ss && best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Best { gain, feature: f, threshold, n_left: k });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIMITS: Limits = Limits { max_depth: 3, min_samples_split: 2, min_samples_leaf: 1 };

    #[test]
    fn splits_a_step_at_the_midpoint() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let t: Vec<f64> = (0..10).map(|i| if i < 4 { 1.0 } else { -1.0 }).collect();
        let (tree, leaves) = Tree::grow(&x, &t, (0..10).collect(), LIMITS);
        match &tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!((threshold - 0.35).abs() < 1e-12);
            }
            _ => panic!("expected a split"),
        }
        // pure children stop splitting
        assert_eq!(leaves.len(), 2);
    }

    #[test]
    fn constant_target_is_a_single_leaf() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 1.0]).collect();
        let (tree, _) = Tree::grow(&x, &[2.0; 6], (0..6).collect(), LIMITS);
        assert_eq!(tree.n_leaves(), 1);
    }

    #[test]
    fn respects_depth_and_leaf_size() {
        let x: Vec<Vec<f64>> = (0..64).map(|i| vec![(i * 37 % 64) as f64, (i * 11 % 64) as f64]).collect();
        let t: Vec<f64> = (0..64).map(|i| ((i * 7919) % 13) as f64).collect();
        for (depth, leaf) in [(1, 1), (3, 1), (3, 10), (5, 4)] {
            let limits = Limits { max_depth: depth, min_samples_split: 2, min_samples_leaf: leaf };
            let (tree, leaves) = Tree::grow(&x, &t, (0..64).collect(), limits);
            assert!(tree.depth() <= depth);
            assert!(leaves.iter().all(|(_, m)| m.len() >= leaf));
            let total: usize = leaves.iter().map(|(_, m)| m.len()).sum();
            assert_eq!(total, 64);
            for (node, members) in &leaves {
                assert!(members.iter().all(|&i| tree.leaf_index(&x[i]) == *node));
            }
        }
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let (tree, _) = Tree::grow(&x, &t, (0..8).collect(), LIMITS);
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, .. }));
    }
}
