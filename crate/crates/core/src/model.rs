//! Rules and rule sets as probabilistic models.
//!
//! Every rule's class distribution is the ML estimate over its whole
//! training cover, overlaps included, so rules are self-standing. An
//! instance covered by several rules is first reduced to the minimal covers
//! (nested rules act as exceptions of the larger ones); if more than one rule
//! survives, the instance is predicted from the pooled estimate over the
//! union of their covers. Instances covered by no rule fall to the else rule.
//!
//! A fitted [`RuleSet`] keeps its training data only as *coverage atoms*:
//! the class counts of the training instances grouped by the exact set of
//! rules covering them. Nesting relations, union estimates and the else
//! rule are all derived from the atoms, so prediction never needs the
//! training data and a serialized model reproduces predictions exactly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::bitset::CoverSet;
use crate::data::{Condition, Dataset, FeatureKind, FeatureSchema, Value};
use crate::error::TursError;
use crate::regret::{log_ml_likelihood, log_regret, ENUMERATION_LIMIT};

pub(crate) fn probabilities(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Sum that does not depend on the order of the terms.
pub(crate) fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(|a, b| a.total_cmp(b));
    terms.into_iter().sum()
}

/// `Σ_c assigned[c] · log2(pooled[c] / |pooled|)`; the assigned instances
/// are a subset of the pooled ones.
pub(crate) fn log_likelihood_under(assigned: &[u64], pooled: &[u64]) -> f64 {
    let total: u64 = pooled.iter().sum();
    let mut acc = 0.0;
    for (&a, &p) in assigned.iter().zip(pooled) {
        if a == 0 {
            continue;
        }
        if p == 0 {
            return f64::NEG_INFINITY;
        }
        acc += a as f64 * libm::log2(p as f64 / total as f64);
    }
    acc
}

/// A learned rule: condition plus the ML class distribution on its training cover.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub condition: Condition,
    pub counts: Vec<u64>,
    pub prob: Vec<f64>,
    /// `log2 R(|cover|, |Y|)`.
    pub log_regret: f64,
}

impl Rule {
    pub fn new(condition: Condition, counts: Vec<u64>) -> Self {
        let prob = probabilities(&counts);
        let log_regret = log_regret(counts.iter().sum(), counts.len());
        Rule {
            condition,
            counts,
            prob,
            log_regret,
        }
    }

    pub fn coverage(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Training instances that are covered by exactly the rules in `rules`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    /// Sorted rule indices; empty for instances covered by no rule.
    pub rules: Vec<usize>,
    pub counts: Vec<u64>,
}

/// Subset relation between training covers: `contains(i, j)` iff `cover(i) ⊆ cover(j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nesting {
    num_rules: usize,
    subset: Vec<bool>,
}

impl Nesting {
    pub fn from_atoms(num_rules: usize, atoms: &[Atom]) -> Self {
        let mut subset = vec![true; num_rules * num_rules];
        for atom in atoms {
            for &i in &atom.rules {
                for j in 0..num_rules {
                    if atom.rules.binary_search(&j).is_err() {
                        subset[i * num_rules + j] = false;
                    }
                }
            }
        }
        Nesting { num_rules, subset }
    }

    pub fn from_covers(covers: &[CoverSet]) -> Self {
        let r = covers.len();
        let mut subset = vec![false; r * r];
        for i in 0..r {
            for j in 0..r {
                subset[i * r + j] = covers[i].is_subset(&covers[j]);
            }
        }
        Nesting {
            num_rules: r,
            subset,
        }
    }

    pub fn num_rules(&self) -> usize {
        self.num_rules
    }

    /// `cover(inner) ⊆ cover(outer)`.
    pub fn is_subset(&self, inner: usize, outer: usize) -> bool {
        self.subset[inner * self.num_rules + outer]
    }

    /// All pairs `(i, j)`, `i != j`, with `cover(i) ⊆ cover(j)`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.num_rules {
            for j in 0..self.num_rules {
                if i != j && self.is_subset(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Drop every rule whose cover contains another member's cover.
///
/// Identical covers count as nested both ways; the lowest index survives.
/// The result is sorted and nonempty whenever `rules` is.
pub fn reduce_covering_rules(rules: &[usize], nesting: &Nesting) -> Vec<usize> {
    let mut kept: Vec<usize> = rules
        .iter()
        .copied()
        .filter(|&s| {
            !rules.iter().any(|&t| {
                t != s
                    && nesting.is_subset(t, s)
                    && (!nesting.is_subset(s, t) || t < s)
            })
        })
        .collect();
    kept.sort_unstable();
    kept.dedup();
    kept
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageCase {
    /// Exactly one rule covers the instance.
    Single,
    /// Several rules survive reduction; the union estimate is used.
    Union,
    /// Several rules cover the instance but reduce to a single innermost one.
    Nested,
    /// No rule covers the instance.
    Else,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionExplanation {
    pub case: CoverageCase,
    /// Rules whose estimates produced the prediction (after nesting reduction).
    pub contributing_rules: Vec<usize>,
    /// Every rule whose condition the instance satisfies.
    pub satisfied_rules: Vec<usize>,
    pub probability: Vec<f64>,
}

/// An effective group: a single rule, a union of reduced covering rules, or
/// the else rule (empty `rules`).
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub rules: Vec<usize>,
    /// Class counts over the union of the member rules' covers.
    pub pooled_counts: Vec<u64>,
    /// Class counts of the training instances assigned to this group.
    pub assigned_counts: Vec<u64>,
}

impl Group {
    pub fn case(&self) -> CoverageCase {
        match self.rules.len() {
            0 => CoverageCase::Else,
            1 => CoverageCase::Single,
            _ => CoverageCase::Union,
        }
    }

    pub fn probability(&self) -> Vec<f64> {
        probabilities(&self.pooled_counts)
    }
}

/// Group structure derived from coverage atoms.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub nesting: Nesting,
    pub groups: Vec<Group>,
}

pub(crate) fn union_counts(atoms: &[Atom], rules: &[usize], num_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_classes];
    for atom in atoms {
        if atom.rules.iter().any(|r| rules.binary_search(r).is_ok()) {
            for (c, &a) in counts.iter_mut().zip(&atom.counts) {
                *c += a;
            }
        }
    }
    counts
}

impl Layout {
    pub fn new(num_rules: usize, num_classes: usize, atoms: &[Atom]) -> Self {
        let nesting = Nesting::from_atoms(num_rules, atoms);
        let mut by_key: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut groups: Vec<Group> = Vec::new();
        for atom in atoms {
            let key = reduce_covering_rules(&atom.rules, &nesting);
            let g = *by_key.entry(key.clone()).or_insert_with(|| {
                let pooled_counts = if key.is_empty() {
                    // the else rule pools nothing beyond its own atom
                    vec![0; num_classes]
                } else {
                    union_counts(atoms, &key, num_classes)
                };
                groups.push(Group {
                    rules: key,
                    pooled_counts,
                    assigned_counts: vec![0; num_classes],
                });
                groups.len() - 1
            });
            for (c, &a) in groups[g].assigned_counts.iter_mut().zip(&atom.counts) {
                *c += a;
            }
            if groups[g].rules.is_empty() {
                for (c, &a) in groups[g].pooled_counts.iter_mut().zip(&atom.counts) {
                    *c += a;
                }
            }
        }
        Layout { nesting, groups }
    }

}

/// Group training instances by the exact set of covers containing them.
pub(crate) fn atoms_from_covers(covers: &[&CoverSet], dataset: &Dataset) -> Vec<Atom> {
    let k = dataset.num_classes();
    let target = dataset.target();
    let mut map: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
    let mut signature = Vec::with_capacity(covers.len());
    for (i, &y) in target.iter().enumerate() {
        signature.clear();
        signature.extend(
            covers
                .iter()
                .enumerate()
                .filter(|(_, c)| c.contains(i))
                .map(|(r, _)| r),
        );
        match map.get_mut(signature.as_slice()) {
            Some(counts) => counts[y as usize] += 1,
            None => {
                let mut counts = vec![0u64; k];
                counts[y as usize] += 1;
                map.insert(signature.clone(), counts);
            }
        }
    }
    map.into_iter()
        .map(|(rules, counts)| Atom { rules, counts })
        .collect()
}

/// A truly unordered probabilistic rule set with its implicit else rule.
#[derive(Clone, Debug)]
pub struct RuleSet {
    features: Vec<FeatureSchema>,
    class_labels: Vec<String>,
    rules: Vec<Rule>,
    atoms: Vec<Atom>,
    nesting: Nesting,
    groups: Vec<Group>,
    else_counts: Vec<u64>,
}

impl RuleSet {
    /// Estimate every parameter of the rule set given by `conditions` on `dataset`.
    pub fn fit(conditions: Vec<Condition>, dataset: &Dataset) -> Self {
        let covers: Vec<CoverSet> = conditions.iter().map(|c| dataset.cover_of(c)).collect();
        Self::from_covers(conditions, &covers, dataset)
    }

    /// Like [`RuleSet::fit`] with the training covers already computed.
    pub fn from_covers(conditions: Vec<Condition>, covers: &[CoverSet], dataset: &Dataset) -> Self {
        assert_eq!(conditions.len(), covers.len());
        let refs: Vec<&CoverSet> = covers.iter().collect();
        let atoms = atoms_from_covers(&refs, dataset);
        Self::from_atoms(
            dataset.features().to_vec(),
            dataset.class_labels().to_vec(),
            conditions,
            atoms,
        )
        .expect("atoms derived from covers are consistent")
    }

    /// Rebuild a rule set from its coverage atoms (the serialized form).
    pub fn from_atoms(
        features: Vec<FeatureSchema>,
        class_labels: Vec<String>,
        conditions: Vec<Condition>,
        atoms: Vec<Atom>,
    ) -> Result<Self, TursError> {
        let k = class_labels.len();
        let r = conditions.len();
        let mut seen: Vec<&Vec<usize>> = Vec::new();
        for atom in &atoms {
            if atom.counts.len() != k {
                return Err(TursError::InvalidModel(format!(
                    "atom {:?} has {} class counts, expected {k}",
                    atom.rules,
                    atom.counts.len()
                )));
            }
            if atom.rules.windows(2).any(|w| w[0] >= w[1]) || atom.rules.iter().any(|&i| i >= r) {
                return Err(TursError::InvalidModel(format!(
                    "atom rule list {:?} is not a sorted subset of 0..{r}",
                    atom.rules
                )));
            }
            if seen.contains(&&atom.rules) {
                return Err(TursError::InvalidModel(format!(
                    "duplicate atom {:?}",
                    atom.rules
                )));
            }
            seen.push(&atom.rules);
        }
        for cond in &conditions {
            for lit in cond.literals() {
                let Some(schema) = features.get(lit.feature) else {
                    return Err(TursError::InvalidModel(format!(
                        "literal refers to feature {} of {}",
                        lit.feature,
                        features.len()
                    )));
                };
                let numeric = schema.kind == FeatureKind::Numeric;
                if lit.is_numeric() != numeric {
                    return Err(TursError::InvalidModel(format!(
                        "literal kind does not match feature '{}'",
                        schema.name
                    )));
                }
            }
        }

        let rules: Vec<Rule> = conditions
            .into_iter()
            .enumerate()
            .map(|(i, cond)| Rule::new(cond, union_counts(&atoms, &[i], k)))
            .collect();
        let else_counts = atoms
            .iter()
            .find(|a| a.rules.is_empty())
            .map_or_else(|| vec![0; k], |a| a.counts.clone());
        let layout = Layout::new(r, k, &atoms);
        Ok(RuleSet {
            features,
            class_labels,
            rules,
            atoms,
            nesting: layout.nesting,
            groups: layout.groups,
            else_counts,
        })
    }

    pub fn features(&self) -> &[FeatureSchema] {
        &self.features
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.rules.iter().map(|r| r.condition.clone()).collect()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn nesting(&self) -> &Nesting {
        &self.nesting
    }

    /// Effective groups observed on the training data, else group included.
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn else_counts(&self) -> &[u64] {
        &self.else_counts
    }

    pub fn else_prob(&self) -> Vec<f64> {
        probabilities(&self.else_counts)
    }

    pub fn total_literals(&self) -> usize {
        self.rules.iter().map(|r| r.condition.len()).sum()
    }

    /// Training log2-likelihood: each instance once, through its effective group.
    pub fn training_log_likelihood(&self) -> f64 {
        canonical_sum(
            self.groups
                .iter()
                .map(|g| log_likelihood_under(&g.assigned_counts, &g.pooled_counts))
                .collect(),
        )
    }

    /// Sum of `log2 R(|S|, |Y|)` over the learned rules and the else rule.
    pub fn log_regret_sum(&self) -> f64 {
        let k = self.num_classes();
        let mut terms: Vec<f64> = self.rules.iter().map(|r| r.log_regret).collect();
        terms.push(log_regret(self.else_counts.iter().sum(), k));
        canonical_sum(terms)
    }

    /// Approximate-NML log2 score on the training data.
    pub fn appr_nml_score(&self) -> f64 {
        self.training_log_likelihood() - self.log_regret_sum()
    }

    /// Class counts over the union of the training covers of `rules` (sorted).
    pub fn union_counts(&self, rules: &[usize]) -> Vec<u64> {
        union_counts(&self.atoms, rules, self.num_classes())
    }

    pub fn check_instance(&self, instance: &[Value]) -> Result<(), TursError> {
        if instance.len() != self.features.len() {
            return Err(TursError::SchemaMismatch(format!(
                "instance has {} values, model expects {}",
                instance.len(),
                self.features.len()
            )));
        }
        for (schema, value) in self.features.iter().zip(instance) {
            let ok = matches!(
                (schema.kind, value),
                (FeatureKind::Numeric, Value::Numeric(_)) | (FeatureKind::Categorical, Value::Level(_))
            );
            if !ok {
                return Err(TursError::SchemaMismatch(format!(
                    "value for '{}' does not match its kind",
                    schema.name
                )));
            }
        }
        Ok(())
    }

    /// Indices of the rules whose conditions `instance` satisfies.
    pub fn satisfied_rules(&self, instance: &[Value]) -> Vec<usize> {
        self.rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.condition.matches(instance))
            .map(|(i, _)| i)
            .collect()
    }

    /// Class probabilities for one instance and the coverage case that produced them.
    pub fn predict_proba(
        &self,
        instance: &[Value],
    ) -> Result<(Vec<f64>, PredictionExplanation), TursError> {
        self.check_instance(instance)?;
        let satisfied = self.satisfied_rules(instance);
        Ok(self.predict_from_satisfied(satisfied))
    }

    fn predict_from_satisfied(&self, satisfied: Vec<usize>) -> (Vec<f64>, PredictionExplanation) {
        let (case, contributing, probability) = if satisfied.is_empty() {
            (CoverageCase::Else, Vec::new(), self.else_prob())
        } else {
            let reduced = reduce_covering_rules(&satisfied, &self.nesting);
            if reduced.len() == 1 {
                let case = if satisfied.len() == 1 {
                    CoverageCase::Single
                } else {
                    CoverageCase::Nested
                };
                let prob = self.rules[reduced[0]].prob.clone();
                (case, reduced, prob)
            } else {
                let prob = probabilities(&self.union_counts(&reduced));
                (CoverageCase::Union, reduced, prob)
            }
        };
        let explanation = PredictionExplanation {
            case,
            contributing_rules: contributing,
            satisfied_rules: satisfied,
            probability: probability.clone(),
        };
        (probability, explanation)
    }

    /// Predictions for every row of `dataset` (which must share the model schema).
    pub fn predict_dataset(
        &self,
        dataset: &Dataset,
    ) -> Result<Vec<(Vec<f64>, PredictionExplanation)>, TursError> {
        (0..dataset.n())
            .map(|i| self.predict_proba(&dataset.row(i)))
            .collect()
    }

    /// Log2-likelihood of `dataset`'s labels under the fitted parameters.
    /// Returns `-inf` if some label gets probability zero.
    pub fn log_likelihood(&self, dataset: &Dataset) -> Result<f64, TursError> {
        let mut terms = Vec::with_capacity(dataset.n());
        for (i, &y) in dataset.target().iter().enumerate() {
            let (prob, _) = self.predict_proba(&dataset.row(i))?;
            let p = prob[y as usize];
            if p == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            terms.push(libm::log2(p));
        }
        Ok(canonical_sum(terms))
    }
}

/// Approximate-NML log2 score of the rule set's conditions, with every
/// parameter re-estimated on `dataset`.
pub fn appr_nml_log_score(ruleset: &RuleSet, dataset: &Dataset) -> f64 {
    RuleSet::fit(ruleset.conditions(), dataset).appr_nml_score()
}

/// Exact NML log2 score by enumerating every labelling of `dataset`.
///
/// Group memberships depend only on the features, so each labelling is
/// scored with the same groups and freshly estimated parameters.
pub fn nml_log_score_bruteforce(ruleset: &RuleSet, dataset: &Dataset) -> Result<f64, TursError> {
    let n = dataset.n();
    let k = dataset.num_classes();
    let sequences = libm::pow(k as f64, n as f64);
    if sequences > ENUMERATION_LIMIT as f64 {
        return Err(TursError::EnumerationTooLarge {
            sequences,
            limit: ENUMERATION_LIMIT,
        });
    }
    let conditions = ruleset.conditions();
    let covers: Vec<CoverSet> = conditions.iter().map(|c| dataset.cover_of(c)).collect();
    let nesting = Nesting::from_covers(&covers);

    // per instance: its group's pooled instance set
    let mut group_members: Vec<Vec<usize>> = Vec::new();
    let mut group_keys: Vec<Vec<usize>> = Vec::new();
    let mut assignment = Vec::with_capacity(n);
    for i in 0..n {
        let covering: Vec<usize> = (0..covers.len()).filter(|&r| covers[r].contains(i)).collect();
        let key = reduce_covering_rules(&covering, &nesting);
        let g = match group_keys.iter().position(|k| *k == key) {
            Some(g) => g,
            None => {
                let members: Vec<usize> = if key.is_empty() {
                    (0..n)
                        .filter(|&j| covers.iter().all(|c| !c.contains(j)))
                        .collect()
                } else {
                    (0..n)
                        .filter(|&j| key.iter().any(|&r| covers[r].contains(j)))
                        .collect()
                };
                group_keys.push(key);
                group_members.push(members);
                group_keys.len() - 1
            }
        };
        assignment.push(g);
    }

    let max_likelihood = |labels: &[usize]| -> f64 {
        let mut likelihood = 1.0;
        let group_counts: Vec<Vec<u64>> = group_members
            .iter()
            .map(|members| {
                let mut counts = vec![0u64; k];
                for &j in members {
                    counts[labels[j]] += 1;
                }
                counts
            })
            .collect();
        for i in 0..n {
            let counts = &group_counts[assignment[i]];
            let total: u64 = counts.iter().sum();
            likelihood *= counts[labels[i]] as f64 / total as f64;
        }
        likelihood
    };

    let observed: Vec<usize> = dataset.target().iter().map(|&y| y as usize).collect();
    let numerator = libm::log2(max_likelihood(&observed));

    let mut labels = vec![0usize; n];
    let mut denominator = 0.0;
    loop {
        denominator += max_likelihood(&labels);
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(numerator - libm::log2(denominator));
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

/// Log2 score terms of the model given by `covers`, used during search.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CoveredScore {
    /// Log-likelihood of the covered instances minus the learned rules' regrets.
    pub covered: f64,
    /// Log-likelihood of the uncovered instances under the else rule minus its regret.
    pub else_part: f64,
}

impl CoveredScore {
    pub fn total(&self) -> f64 {
        self.covered + self.else_part
    }
}

pub(crate) fn score_covers(
    covers: &[&CoverSet],
    dataset: &Dataset,
    regret: &crate::regret::RegretTable,
) -> CoveredScore {
    let k = dataset.num_classes();
    let atoms = atoms_from_covers(covers, dataset);
    let layout = Layout::new(covers.len(), k, &atoms);
    let mut covered_terms = Vec::with_capacity(layout.groups.len() + covers.len());
    let mut else_part = 0.0;
    for g in &layout.groups {
        if g.rules.is_empty() {
            let total: u64 = g.assigned_counts.iter().sum();
            else_part = log_ml_likelihood(&g.assigned_counts) - regret.get(total as usize);
        } else {
            covered_terms.push(log_likelihood_under(&g.assigned_counts, &g.pooled_counts));
        }
    }
    for c in covers {
        covered_terms.push(-regret.get(c.len()));
    }
    CoveredScore {
        covered: canonical_sum(covered_terms),
        else_part,
    }
}
