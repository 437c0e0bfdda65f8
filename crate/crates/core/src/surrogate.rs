//! Decision-tree surrogate score for incomplete rule sets.
//!
//! The instances not covered by the current rules are described by an
//! unpruned CART tree whose leaves stand in for rules that might be added
//! later; the surrogate score is the approximate-NML score of the rule set
//! with those leaves appended in place of the else rule.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::bitset::CoverSet;
use crate::data::{Column, Dataset};
use crate::model::score_covers;
use crate::regret::{log_ml_likelihood, RegretTable};

/// How the per-`min_leaf` surrogate scores are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Highest log-probability, i.e. the shortest code length.
    #[default]
    Max,
    /// Lowest log-probability.
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitTest {
    /// Left child holds `x <= threshold`.
    LessEq(f64),
    /// Left child holds `x == level`.
    Equals(u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub test: SplitTest,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf {
        indices: Vec<usize>,
        counts: Vec<u64>,
    },
    Split {
        split: Split,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn num_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.num_leaves() + right.num_leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// `m · gini` = `m - Σ c² / m`.
fn weighted_gini(counts: &[u64], m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    m as f64 - sq / m as f64
}

struct Best {
    impurity: f64,
    split: Split,
}

fn best_split(instances: &[usize], dataset: &Dataset, min_leaf: usize, counts: &[u64]) -> Option<Best> {
    let k = dataset.num_classes();
    let target = dataset.target();
    let m = instances.len();
    let mut best: Option<Best> = None;
    let consider = |impurity: f64, split: Split, best: &mut Option<Best>| {
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            *best = Some(Best { impurity, split });
        }
    };
    for (f, column) in dataset.columns().iter().enumerate() {
        match column {
            Column::Numeric(values) => {
                let mut order: Vec<(f64, u32)> =
                    instances.iter().map(|&i| (values[i], target[i])).collect();
                order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut left = vec![0u64; k];
                for pos in 0..m - 1 {
                    left[order[pos].1 as usize] += 1;
                    let n_left = pos + 1;
                    if order[pos].0 == order[pos + 1].0 {
                        continue;
                    }
                    if n_left < min_leaf || m - n_left < min_leaf {
                        continue;
                    }
                    let right: Vec<u64> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
                    let impurity = weighted_gini(&left, n_left as u64)
                        + weighted_gini(&right, (m - n_left) as u64);
                    let threshold = order[pos].0 + (order[pos + 1].0 - order[pos].0) / 2.0;
                    consider(
                        impurity,
                        Split {
                            feature: f,
                            test: SplitTest::LessEq(threshold),
                        },
                        &mut best,
                    );
                }
            }
            Column::Categorical(codes) => {
                let mut per_level: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
                for &i in instances {
                    per_level.entry(codes[i]).or_insert_with(|| vec![0; k])[target[i] as usize] += 1;
                }
                if per_level.len() < 2 {
                    continue;
                }
                for (&level, left) in &per_level {
                    let n_left: u64 = left.iter().sum();
                    let n_right = m as u64 - n_left;
                    if (n_left as usize) < min_leaf || (n_right as usize) < min_leaf {
                        continue;
                    }
                    let right: Vec<u64> = counts.iter().zip(left).map(|(t, l)| t - l).collect();
                    let impurity = weighted_gini(left, n_left) + weighted_gini(&right, n_right);
                    consider(
                        impurity,
                        Split {
                            feature: f,
                            test: SplitTest::Equals(level),
                        },
                        &mut best,
                    );
                }
            }
        }
    }
    best
}

fn goes_left(dataset: &Dataset, split: &Split, i: usize) -> bool {
    match (&dataset.columns()[split.feature], split.test) {
        (Column::Numeric(v), SplitTest::LessEq(t)) => v[i] <= t,
        (Column::Categorical(v), SplitTest::Equals(l)) => v[i] == l,
        _ => unreachable!("split test does not match column kind"),
    }
}

/// Greedy binary CART growth with Gini impurity and a minimum leaf size; no pruning.
///
/// A node becomes a leaf when it is pure, when no split leaves `min_leaf`
/// instances on both sides, or when the best split does not reduce impurity.
/// Ties go to the lowest feature index, then the lowest threshold or level.
pub fn fit_tree(instances: &[usize], dataset: &Dataset, min_leaf: usize) -> TreeNode {
    let min_leaf = min_leaf.max(1);
    let counts = dataset.class_counts_of(instances);
    let m = instances.len();
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || m < 2 * min_leaf {
        return TreeNode::Leaf {
            indices: instances.to_vec(),
            counts,
        };
    }
    let parent = weighted_gini(&counts, m as u64);
    match best_split(instances, dataset, min_leaf, &counts) {
        Some(best) if best.impurity < parent - 1e-12 * (m as f64) => {
            let (left, right): (Vec<usize>, Vec<usize>) = instances
                .iter()
                .partition(|&&i| goes_left(dataset, &best.split, i));
            TreeNode::Split {
                split: best.split,
                left: Box::new(fit_tree(&left, dataset, min_leaf)),
                right: Box::new(fit_tree(&right, dataset, min_leaf)),
            }
        }
        _ => TreeNode::Leaf {
            indices: instances.to_vec(),
            counts,
        },
    }
}

/// The tree's leaves, left to right, as `(instances, class counts)`.
pub fn tree_leaves_as_rules(tree: &TreeNode) -> Vec<(Vec<usize>, Vec<u64>)> {
    let mut out = Vec::new();
    let mut stack = vec![tree];
    while let Some(node) = stack.pop() {
        match node {
            TreeNode::Leaf { indices, counts } => out.push((indices.clone(), counts.clone())),
            TreeNode::Split { left, right, .. } => {
                stack.push(right);
                stack.push(left);
            }
        }
    }
    out
}

/// Contribution of disjoint leaves to a log2 approximate-NML score.
fn leaves_score(tree: &TreeNode, regret: &RegretTable) -> f64 {
    let mut terms: Vec<f64> = tree_leaves_as_rules(tree)
        .iter()
        .map(|(idx, counts)| log_ml_likelihood(counts) - regret.get(idx.len()))
        .collect();
    terms.sort_unstable_by(|a, b| a.total_cmp(b));
    terms.into_iter().sum()
}

/// Surrogate scoring with trees cached by the uncovered instance set.
pub struct SurrogateScorer<'a> {
    dataset: &'a Dataset,
    regret: &'a RegretTable,
    grid: Vec<usize>,
    aggregation: Aggregation,
    cache: BTreeMap<CoverSet, f64>,
}

impl<'a> SurrogateScorer<'a> {
    pub fn new(
        dataset: &'a Dataset,
        regret: &'a RegretTable,
        grid: &[usize],
        aggregation: Aggregation,
    ) -> Self {
        assert!(!grid.is_empty(), "min_leaf grid must be nonempty");
        SurrogateScorer {
            dataset,
            regret,
            grid: grid.to_vec(),
            aggregation,
            cache: BTreeMap::new(),
        }
    }

    /// Aggregated score of the tree leaves fitted on `uncovered`.
    pub fn tree_part(&mut self, uncovered: &CoverSet) -> f64 {
        if uncovered.is_empty() {
            return 0.0;
        }
        if let Some(&v) = self.cache.get(uncovered) {
            return v;
        }
        let instances = uncovered.to_vec();
        let scores = self.grid.iter().map(|&s| {
            let tree = fit_tree(&instances, self.dataset, s);
            leaves_score(&tree, self.regret)
        });
        let v = match self.aggregation {
            Aggregation::Max => scores.fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Min => scores.fold(f64::INFINITY, f64::min),
        };
        self.cache.insert(uncovered.clone(), v);
        v
    }

    /// `L_T` of the model whose rule covers are `covers`.
    pub fn score(&mut self, covers: &[&CoverSet]) -> f64 {
        let mut uncovered = self.dataset.all();
        for c in covers {
            uncovered = uncovered.difference(c);
        }
        let parts = score_covers(covers, self.dataset, self.regret);
        parts.covered + self.tree_part(&uncovered)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }
}

/// Surrogate log2 score of `prefix ⊕ candidate`: the approximate-NML score
/// after the else rule is replaced by the leaves of a tree fitted on the
/// still uncovered instances, one tree per `min_leaf` value in `grid`,
/// combined by `aggregation`.
pub fn surrogate_log_score(
    prefix: &[CoverSet],
    candidate: Option<&CoverSet>,
    dataset: &Dataset,
    grid: &[usize],
    aggregation: Aggregation,
) -> f64 {
    let regret = RegretTable::new(dataset.num_classes(), dataset.n());
    let mut scorer = SurrogateScorer::new(dataset, &regret, grid, aggregation);
    let mut covers: Vec<&CoverSet> = prefix.iter().collect();
    if let Some(c) = candidate {
        covers.push(c);
    }
    scorer.score(&covers)
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::data::{Condition, FeatureSchema};
    use crate::model::{nml_log_score_bruteforce, RuleSet};
    use crate::regret::log_regret;
    use alloc::string::{String, ToString};

    fn labels2() -> Vec<String> {
        vec!["a".to_string(), "b".to_string()]
    }

    fn one_feature(values: Vec<f64>, target: Vec<u32>) -> Dataset {
        Dataset::new(
            vec![FeatureSchema::numeric("x")],
            vec![Column::Numeric(values)],
            target,
            labels2(),
        )
        .unwrap()
    }

    /// Exhaustive Gini oracle for a single split of a one-feature sample.
    fn best_threshold_oracle(values: &[f64], target: &[u32], min_leaf: usize) -> Option<f64> {
        let mut distinct: Vec<f64> = values.to_vec();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        let gini = |idx: &[usize]| -> f64 {
            let m = idx.len() as f64;
            let ones = idx.iter().filter(|&&i| target[i] == 1).count() as f64;
            let zeros = m - ones;
            m * (1.0 - (ones / m).powi(2) - (zeros / m).powi(2))
        };
        let mut best: Option<(f64, f64)> = None;
        for w in distinct.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = (0..values.len()).filter(|&i| values[i] <= t).collect();
            let right: Vec<usize> = (0..values.len()).filter(|&i| values[i] > t).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let imp = gini(&left) + gini(&right);
            if best.is_none_or(|(b, _)| imp < b) {
                best = Some((imp, t));
            }
        }
        best.map(|(_, t)| t)
    }

    #[test]
    fn splits_at_class_boundary() {
        let values: Vec<f64> = (1..=8).map(|v| v as f64).collect();
        let target = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let ds = one_feature(values.clone(), target.clone());
        let all: Vec<usize> = (0..8).collect();
        let tree = fit_tree(&all, &ds, 2);
        let expected = best_threshold_oracle(&values, &target, 2).unwrap();
        assert_eq!(expected, 4.5);
        match &tree {
            TreeNode::Split { split, .. } => {
                assert_eq!(split.test, SplitTest::LessEq(expected));
            }
            _ => panic!("expected a split"),
        }
        let leaves = tree_leaves_as_rules(&tree);
        assert_eq!(leaves.len(), 2);
        assert_eq!(leaves[0], ((0..4).collect::<Vec<_>>(), vec![4, 0]));
        assert_eq!(leaves[1], ((4..8).collect::<Vec<_>>(), vec![0, 4]));
    }

    #[test]
    fn too_few_instances_give_a_leaf() {
        let ds = one_feature(vec![1.0, 2.0, 3.0], vec![0, 1, 0]);
        let tree = fit_tree(&[0, 1, 2], &ds, 2);
        assert_eq!(tree.num_leaves(), 1);
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let ds = one_feature((0..100).map(|v| v as f64).collect(), vec![1; 100]);
        let all: Vec<usize> = (0..100).collect();
        let tree = fit_tree(&all, &ds, 1);
        let leaves = tree_leaves_as_rules(&tree);
        assert_eq!(leaves, vec![(all.clone(), vec![0, 100])]);
    }

    #[test]
    fn depth_two_tree_partitions_input() {
        // blocks of 4: a b a b
        let values: Vec<f64> = (0..16).map(|v| v as f64).collect();
        let target: Vec<u32> = (0..16).map(|v| ((v / 4) % 2) as u32).collect();
        let ds = one_feature(values, target);
        let all: Vec<usize> = (0..16).collect();
        let tree = fit_tree(&all, &ds, 4);
        let leaves = tree_leaves_as_rules(&tree);
        assert_eq!(leaves.len(), 4);
        let mut union: Vec<usize> = leaves.iter().flat_map(|(i, _)| i.clone()).collect();
        union.sort_unstable();
        assert_eq!(union, all);
        for (idx, _) in &leaves {
            assert!(idx.len() >= 4);
        }
    }

    #[test]
    fn min_leaf_is_respected() {
        let values: Vec<f64> = (0..40).map(|v| v as f64).collect();
        let target: Vec<u32> = (0..40).map(|v| (v % 3 == 0) as u32).collect();
        let ds = one_feature(values, target);
        let all: Vec<usize> = (0..40).collect();
        for s in [1, 3, 7] {
            let tree = fit_tree(&all, &ds, s);
            for (idx, _) in tree_leaves_as_rules(&tree) {
                assert!(idx.len() >= s);
            }
        }
    }

    #[test]
    fn categorical_split() {
        let ds = Dataset::new(
            vec![FeatureSchema::categorical(
                "c",
                vec!["u".to_string(), "v".to_string(), "w".to_string()],
            )],
            vec![Column::Categorical(vec![0, 0, 1, 1, 2, 2])],
            vec![0, 0, 1, 1, 0, 0],
            labels2(),
        )
        .unwrap();
        let tree = fit_tree(&[0, 1, 2, 3, 4, 5], &ds, 1);
        match tree {
            TreeNode::Split { split, .. } => assert_eq!(split.test, SplitTest::Equals(1)),
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn empty_uncovered_set_gives_the_model_score() {
        let ds = one_feature((0..6).map(|v| v as f64).collect(), vec![0, 0, 1, 1, 0, 1]);
        let cover = ds.all();
        let s = surrogate_log_score(&[], Some(&cover), &ds, &[10, 30], Aggregation::Max);
        let rs = RuleSet::from_covers(vec![Condition::new()], &[cover], &ds);
        assert!((s - rs.appr_nml_score()).abs() < 1e-9);
    }

    #[test]
    fn small_uncovered_set_is_a_single_leaf() {
        let ds = one_feature((0..12).map(|v| v as f64).collect(), vec![0, 0, 0, 1, 1, 1, 0, 1, 0, 1, 1, 0]);
        let cover = CoverSet::from_indices(12, 0..6);
        let s = surrogate_log_score(core::slice::from_ref(&cover), None, &ds, &[10, 30, 50], Aggregation::Max);
        let rs = RuleSet::from_covers(vec![Condition::new()], &[cover], &ds);
        assert!((s - rs.appr_nml_score()).abs() < 1e-9);
    }

    #[test]
    fn pure_uncovered_block() {
        let n = 110;
        let mut target = vec![1u32; n];
        for t in target.iter_mut().take(10) {
            *t = 0;
        }
        target[3] = 1;
        let ds = one_feature((0..n).map(|v| v as f64).collect(), target);
        let prefix = CoverSet::from_indices(n, 0..10);
        let s = surrogate_log_score(core::slice::from_ref(&prefix), None, &ds, &[10], Aggregation::Max);
        let prefix_part = crate::regret::log_ml_likelihood(&ds.class_counts(&prefix))
            - log_regret(10, 2);
        let expected = prefix_part - log_regret(100, 2);
        assert!((s - expected).abs() < 1e-9, "{s} vs {expected}");
    }

    #[test]
    fn tree_leaves_match_exact_nml_on_tiny_data() {
        // leaves are disjoint, so the surrogate model equals its exact NML score
        let ds = one_feature((0..8).map(|v| v as f64).collect(), vec![0, 0, 0, 1, 1, 1, 1, 0]);
        let all: Vec<usize> = (0..8).collect();
        let tree = fit_tree(&all, &ds, 2);
        let leaves = tree_leaves_as_rules(&tree);
        assert!(leaves.len() >= 2);
        let covers: Vec<CoverSet> = leaves
            .iter()
            .map(|(idx, _)| CoverSet::from_indices(8, idx.iter().copied()))
            .collect();
        // express leaves as index-range conditions so the brute force can refit them
        let conds: Vec<Condition> = leaves
            .iter()
            .map(|(idx, _)| {
                let lo = *idx.first().unwrap() as f64 - 0.5;
                let hi = *idx.last().unwrap() as f64 + 0.5;
                Condition::from_literals([
                    crate::data::Literal::new(0, crate::data::Constraint::Greater(lo)),
                    crate::data::Literal::new(0, crate::data::Constraint::LessEq(hi)),
                ])
            })
            .collect();
        let rs = RuleSet::from_covers(conds, &covers, &ds);
        let s = surrogate_log_score(&[], None, &ds, &[2], Aggregation::Max);
        assert!((s - rs.appr_nml_score()).abs() < 1e-9);
        let brute = nml_log_score_bruteforce(&rs, &ds).unwrap();
        assert!((s - brute).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let values: Vec<f64> = (0..60).map(|v| ((v * 37) % 60) as f64).collect();
        let target: Vec<u32> = (0..60).map(|v| ((v * 7) % 5 == 0) as u32).collect();
        let ds = one_feature(values, target);
        let all: Vec<usize> = (0..60).collect();
        assert_eq!(fit_tree(&all, &ds, 3), fit_tree(&all, &ds, 3));
        let a = surrogate_log_score(&[], None, &ds, &[3, 10], Aggregation::Max);
        let b = surrogate_log_score(&[], None, &ds, &[3, 10], Aggregation::Max);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
