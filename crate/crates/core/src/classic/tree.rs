//! Unpruned CART trees with Gini impurity on dense feature rows.

use crate::series::Label;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf { positive: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [Label],
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// Best `(feature, threshold, weighted child impurity)` over all features.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<(f64, Label)> = Vec::with_capacity(n);
        for f in 0..self.rows[idx[0]].len() {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.rows[i][f], self.labels[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(order[k - 1].1 == 1);
                let (lo, hi) = (order[k - 1].0, order[k].0);
                if lo == hi {
                    continue;
                }
                let right_pos = total_pos - left_pos;
                let score = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(right_pos, n - k)) / n as f64;
                if best.is_none_or(|(_, _, b)| score < b) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, score));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { positive: pos as f64 / idx.len() as f64 });
        if pos == 0 || pos == idx.len() {
            return at;
        }
        let Some((feature, threshold, _)) = self.best_split(&idx) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.rows[i][feature] <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

impl DecisionTree {
    /// Grows a tree until leaves are pure or their rows are indistinguishable.
    ///
    /// `rows` must be non-empty and of equal width.
    pub fn fit(rows: &[Vec<f64>], labels: &[Label]) -> Self {
        assert!(!rows.is_empty() && rows.len() == labels.len());
        let mut b = Builder { rows, labels, nodes: Vec::new() };
        b.grow((0..rows.len()).collect());
        Self { nodes: b.nodes }
    }

    /// Positive fraction of the training rows in the reached leaf.
    pub fn leaf_score(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { positive } => return positive,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        crate::classifier::label_of(self.leaf_score(row))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_a_threshold() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let labels: Vec<Label> = (0..20).map(|i| u8::from(i >= 12)).collect();
        let t = DecisionTree::fit(&rows, &labels);
        assert_eq!(t.n_nodes(), 3);
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(t.predict(r), l);
        }
        assert_eq!(t.predict(&[11.4, 0.0]), 0);
        assert_eq!(t.predict(&[11.6, 0.0]), 1);
    }

    #[test]
    fn fits_xor_exactly() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let labels = vec![0, 1, 1, 0];
        let t = DecisionTree::fit(&rows, &labels);
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(t.predict(r), l);
        }
    }

    #[test]
    fn constant_features_give_a_leaf() {
        let rows = vec![vec![1.0]; 4];
        let t = DecisionTree::fit(&rows, &[0, 1, 1, 0]);
        assert_eq!(t.n_nodes(), 1);
        assert_eq!(t.leaf_score(&[1.0]), 0.5);
        assert_eq!(t.predict(&[1.0]), 1);
    }
}
