use turs_core::{
    find_next_rule, fit_ruleset, surrogate_log_score, weighted_ovr_auc, Aggregation, Column,
    Condition, Constraint, Dataset, FeatureSchema, Literal, SearchConfig,
};

/// 20 x 20 grid. Left half (the existing rule) is class 0 at the bottom and
/// class 1 at the top; the right half is class 1 at the bottom and mixed at
/// the top.
fn overlap_layout() -> Dataset {
    let (mut x1, mut x2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..20u32 {
        for j in 0..20u32 {
            x1.push(i as f64);
            x2.push(j as f64);
            let label = match (i < 10, j < 10) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 1,
                (false, false) => (i + j) % 2,
            };
            y.push(label);
        }
    }
    Dataset::new(
        vec![FeatureSchema::numeric("x1"), FeatureSchema::numeric("x2")],
        vec![Column::Numeric(x1), Column::Numeric(x2)],
        y,
        vec!["neg".into(), "pos".into()],
    )
    .unwrap()
}

#[test]
fn phase_two_moves_the_seed_off_the_existing_rule() {
    let ds = overlap_layout();
    let config = SearchConfig::default();
    let left = Condition::from_literals([Literal::new(0, Constraint::LessEq(9.5))]);
    let next = find_next_rule(std::slice::from_ref(&left), &ds, &config).unwrap().unwrap();

    assert!(next.rule.condition.len() > next.seed.condition.len());
    for lit in next.seed.condition.literals() {
        assert!(next.rule.condition.implies(lit));
    }
    let ds = ds.with_cut_points(config.num_cut_points);
    let prefix = [ds.cover_of(&left)];
    let grid = &config.min_leaf_grid;
    let rule_score = surrogate_log_score(&prefix, Some(&next.rule.cover), &ds, grid, Aggregation::Max);
    let seed_score = surrogate_log_score(&prefix, Some(&next.seed.cover), &ds, grid, Aggregation::Max);
    assert!(rule_score >= seed_score);
    // the returned rule no longer overlaps the existing one
    assert!(next.rule.cover.is_disjoint(&prefix[0]));
}

fn two_blocks(n: usize) -> Dataset {
    Dataset::new(
        vec![FeatureSchema::numeric("x")],
        vec![Column::Numeric((0..n).map(|i| i as f64 * 0.37).collect())],
        (0..n).map(|i| (i >= n / 2) as u32).collect(),
        vec!["a".into(), "b".into()],
    )
    .unwrap()
}

#[test]
fn separable_data_is_ranked_perfectly() {
    let ds = two_blocks(80);
    let rs = fit_ruleset(&ds, &SearchConfig::default()).unwrap();
    assert!(!rs.rules().is_empty());
    let probs: Vec<Vec<f64>> = rs
        .predict_dataset(&ds)
        .unwrap()
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    assert_eq!(weighted_ovr_auc(&probs, ds.target()).unwrap(), 1.0);
}

#[test]
fn single_class_data_gives_else_only_model() {
    let n = 50;
    let ds = Dataset::new(
        vec![FeatureSchema::numeric("x")],
        vec![Column::Numeric((0..n).map(|i| i as f64).collect())],
        vec![0; n],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let rs = fit_ruleset(&ds, &SearchConfig::default()).unwrap();
    assert!(rs.rules().is_empty());
}

#[test]
fn fitting_is_deterministic() {
    let ds = overlap_layout();
    let a = fit_ruleset(&ds, &SearchConfig::default()).unwrap();
    let b = fit_ruleset(&ds, &SearchConfig::default()).unwrap();
    assert_eq!(a.conditions(), b.conditions());
    assert_eq!(a.appr_nml_score().to_bits(), b.appr_nml_score().to_bits());
    assert!(a.rules().iter().all(|r| !r.condition.is_empty()));
}
