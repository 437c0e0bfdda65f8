use num_rational::Ratio;
use proptest::prelude::*;
use turs_core::{
    appr_nml_log_score, nml_log_score_bruteforce, Column, Condition, Constraint, CoverageCase,
    Dataset, FeatureSchema, Literal, RuleSet, Value,
};

fn labels(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

fn line_dataset(target: Vec<u32>, k: usize) -> Dataset {
    let n = target.len();
    Dataset::new(
        vec![FeatureSchema::numeric("x")],
        vec![Column::Numeric((0..n).map(|i| i as f64).collect())],
        target,
        labels(k),
    )
    .unwrap()
}

/// `lo < x <= hi` on feature `f`, with either side optional.
fn interval(f: usize, lo: Option<f64>, hi: Option<f64>) -> Condition {
    let mut lits = Vec::new();
    if let Some(lo) = lo {
        lits.push(Literal::new(f, Constraint::Greater(lo)));
    }
    if let Some(hi) = hi {
        lits.push(Literal::new(f, Constraint::LessEq(hi)));
    }
    Condition::from_literals(lits)
}

/// Disjoint interval rules on the integer line 0..n from sorted boundaries;
/// the `skip` mask leaves some blocks to the else rule.
fn disjoint_rules(n: usize, mut bounds: Vec<usize>, skip: &[bool]) -> Vec<Condition> {
    bounds.retain(|&b| b > 0 && b < n);
    bounds.sort_unstable();
    bounds.dedup();
    let mut edges = vec![0];
    edges.extend(bounds);
    edges.push(n);
    edges
        .windows(2)
        .enumerate()
        .filter(|(i, _)| !skip.get(*i).copied().unwrap_or(false))
        .map(|(_, w)| {
            let lo = (w[0] > 0).then(|| w[0] as f64 - 0.5);
            let hi = (w[1] < n).then(|| w[1] as f64 - 0.5);
            interval(0, lo, hi)
        })
        .filter(|c| !c.is_empty())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn disjoint_rules_score_exactly(
        target in proptest::collection::vec(0u32..2, 2..=8),
        bounds in proptest::collection::vec(1usize..8, 0..4),
        skip in proptest::collection::vec(any::<bool>(), 5),
    ) {
        let n = target.len();
        let ds = line_dataset(target, 2);
        let rules = disjoint_rules(n, bounds, &skip);
        let rs = RuleSet::fit(rules, &ds);
        let approx = appr_nml_log_score(&rs, &ds);
        let exact = nml_log_score_bruteforce(&rs, &ds).unwrap();
        prop_assert!((approx - exact).abs() <= 1e-9, "approx {approx} exact {exact}");
    }
}

fn grid_dataset(target: Vec<u32>, k: usize) -> Dataset {
    let n = target.len();
    Dataset::new(
        vec![FeatureSchema::numeric("a"), FeatureSchema::numeric("b")],
        vec![
            Column::Numeric((0..n).map(|i| (i % 7) as f64).collect()),
            Column::Numeric((0..n).map(|i| ((i * 3) % 11) as f64).collect()),
        ],
        target,
        labels(k),
    )
    .unwrap()
}

fn arb_condition() -> impl Strategy<Value = Condition> {
    (
        0usize..2,
        proptest::option::of(0u32..10),
        proptest::option::of(0u32..11),
    )
        .prop_map(|(f, lo, hi)| {
            interval(f, lo.map(|v| v as f64 + 0.5), hi.map(|v| v as f64 + 0.5))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn permuting_rules_changes_nothing(
        target in proptest::collection::vec(0u32..3, 30..80),
        conditions in proptest::collection::vec(arb_condition(), 1..6),
        seed in any::<u64>(),
    ) {
        let ds = grid_dataset(target, 3);
        let rs = RuleSet::fit(conditions.clone(), &ds);

        // deterministic shuffle from the seed
        let mut perm: Vec<usize> = (0..conditions.len()).collect();
        let mut state = seed | 1;
        for i in (1..perm.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let permuted: Vec<Condition> = perm.iter().map(|&i| conditions[i].clone()).collect();
        let rp = RuleSet::fit(permuted, &ds);

        prop_assert_eq!(rs.appr_nml_score().to_bits(), rp.appr_nml_score().to_bits());
        prop_assert_eq!(
            appr_nml_log_score(&rs, &ds).to_bits(),
            appr_nml_log_score(&rp, &ds).to_bits()
        );
        for a in 0..8 {
            for b in 0..12 {
                let x = [Value::Numeric(a as f64), Value::Numeric(b as f64)];
                let (p, e) = rs.predict_proba(&x).unwrap();
                let (q, f) = rp.predict_proba(&x).unwrap();
                prop_assert_eq!(p, q);
                prop_assert_eq!(e.case, f.case);
            }
        }
    }
}

#[test]
fn union_prediction_is_coverage_weighted_average() {
    // rule A: a <= 2.5, rule B: b > 5.5; no training instance satisfies both
    let cases: &[(&[(u32, u32, u32)], &[(u32, u32, u32)])] = &[
        (&[(0, 0, 0), (1, 1, 1), (2, 0, 1)], &[(6, 6, 1), (7, 8, 1), (9, 9, 0)]),
        (
            &[(0, 1, 0), (1, 2, 0), (2, 3, 0), (0, 4, 1)],
            &[(5, 6, 1), (6, 7, 1), (9, 8, 1), (8, 9, 1), (7, 10, 0)],
        ),
    ];
    for (in_a, in_b) in cases {
        let rows: Vec<(u32, u32, u32)> = in_a.iter().chain(in_b.iter()).copied().collect();
        let ds = Dataset::new(
            vec![FeatureSchema::numeric("a"), FeatureSchema::numeric("b")],
            vec![
                Column::Numeric(rows.iter().map(|r| r.0 as f64).collect()),
                Column::Numeric(rows.iter().map(|r| r.1 as f64).collect()),
            ],
            rows.iter().map(|r| r.2).collect(),
            labels(2),
        )
        .unwrap();
        let rule_a = interval(0, None, Some(2.5));
        let rule_b = interval(1, Some(5.5), None);
        let rs = RuleSet::fit(vec![rule_a, rule_b], &ds);
        assert!(ds.cover_of(&rs.conditions()[0]).is_disjoint(&ds.cover_of(&rs.conditions()[1])));

        // rational oracle: (|A| p_A + |B| p_B) / (|A| + |B|)
        let dist = |rows: &[(u32, u32, u32)]| -> Vec<Ratio<i64>> {
            let m = rows.len() as i64;
            (0..2)
                .map(|c| Ratio::new(rows.iter().filter(|r| r.2 == c).count() as i64, m))
                .collect()
        };
        let (pa, pb) = (dist(in_a), dist(in_b));
        let (na, nb) = (Ratio::from(in_a.len() as i64), Ratio::from(in_b.len() as i64));
        let expected: Vec<Ratio<i64>> = (0..2)
            .map(|c| (na * pa[c] + nb * pb[c]) / (na + nb))
            .collect();

        let (p, e) = rs
            .predict_proba(&[Value::Numeric(1.0), Value::Numeric(7.0)])
            .unwrap();
        assert_eq!(e.case, CoverageCase::Union);
        assert_eq!(e.contributing_rules, vec![0, 1]);
        for c in 0..2 {
            let exact = *expected[c].numer() as f64 / *expected[c].denom() as f64;
            assert_eq!(p[c], exact);
            // and the float result maps back to the same rational
            let back = Ratio::new(
                (p[c] * *expected[c].denom() as f64).round() as i64,
                *expected[c].denom(),
            );
            assert_eq!(back, expected[c]);
        }
    }
}
