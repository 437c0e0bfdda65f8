//! Two-phase diverse beam search for the next rule, and the outer loop that
//! assembles a rule set.
//!
//! Phase 1 grows rules as if the instances already covered by the rule set
//! were absent: it is steered by [`gain_unc`], keeps beam entries diverse on
//! their uncovered parts, and ranks every rule it ever put in a beam by the
//! surrogate score of the rule set extended with the rule's uncovered part.
//! The best `m` of those seed phase 2, which keeps growing them with
//! [`gain_incl`] (estimates on the full cover, so overlaps with existing
//! rules count) and returns the single rule with the best surrogate score of
//! the rule set extended with the rule itself.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bitset::CoverSet;
use crate::data::{Condition, Dataset, LiteralIndex};
use crate::error::TursError;
use crate::model::{log_likelihood_under, score_covers, RuleSet};
use crate::regret::{log_ml_likelihood, RegretTable};
use crate::surrogate::{Aggregation, SurrogateScorer};

/// Tolerance for the "surrogate equals the real score" stopping test.
pub const STOP_TOLERANCE: f64 = 1e-9;

/// How candidate rules are ranked when choosing the next rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScoreMode {
    /// Tree-based surrogate score (the default learner).
    #[default]
    Surrogate,
    /// Plain approximate-NML score of the extended rule set, no surrogate.
    /// Growth stops as soon as the next rule does not improve the score.
    Direct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub beam_width: usize,
    /// Beam entries may share at most a `1 - alpha` Jaccard fraction of instances.
    pub alpha: f64,
    /// Phase-1 rules handed to phase 2; `None` means `beam_width`.
    pub num_seeds: Option<usize>,
    pub min_leaf_grid: Vec<usize>,
    pub num_cut_points: usize,
    pub max_rules: usize,
    pub aggregation: Aggregation,
    pub score_mode: ScoreMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 5,
            alpha: 0.05,
            num_seeds: None,
            min_leaf_grid: vec![10, 30, 50, 70, 90],
            num_cut_points: 100,
            max_rules: 500,
            aggregation: Aggregation::Max,
            score_mode: ScoreMode::Surrogate,
        }
    }
}

impl SearchConfig {
    pub fn seeds(&self) -> usize {
        self.num_seeds.unwrap_or(self.beam_width)
    }

    pub fn validate(&self) -> Result<(), TursError> {
        let bad = |msg: alloc::string::String| Err(TursError::InvalidArgument(msg));
        if self.beam_width == 0 {
            return bad("beam width must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} is outside [0, 1]", self.alpha));
        }
        let m = self.seeds();
        if m == 0 || m > self.beam_width {
            return bad(format!(
                "number of phase-1 seeds {m} must be in 1..={}",
                self.beam_width
            ));
        }
        if self.min_leaf_grid.is_empty() || self.min_leaf_grid.contains(&0) {
            return bad("min-leaf grid must be nonempty and positive".into());
        }
        if self.num_cut_points == 0 {
            return bad("number of cut points must be positive".into());
        }
        Ok(())
    }
}

/// A rule under construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateRule {
    pub condition: Condition,
    pub cover: CoverSet,
    /// The part of `cover` not covered by the current rule set.
    pub uncovered: CoverSet,
    pub gain: f64,
    pub score: Option<f64>,
}

impl CandidateRule {
    pub fn new(condition: Condition, cover: CoverSet, covered_by_rules: &CoverSet) -> Self {
        let uncovered = cover.difference(covered_by_rules);
        CandidateRule {
            condition,
            cover,
            uncovered,
            gain: 0.0,
            score: None,
        }
    }
}

/// Which sets the beam diversity constraint compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Uncovered counterparts.
    One,
    /// Full covers.
    Two,
}

/// Regret-penalized log-likelihood per instance.
fn per_instance(log_likelihood: f64, size: usize, regret: &RegretTable) -> f64 {
    (log_likelihood - regret.get(size)) / size as f64
}

/// NML gain of `s` over its parent `q` with estimates on the uncovered parts.
pub fn gain_unc(s: &CandidateRule, q: &CandidateRule, dataset: &Dataset, regret: &RegretTable) -> f64 {
    if s.uncovered == q.uncovered {
        return 0.0;
    }
    let s_size = s.uncovered.len();
    let q_size = q.uncovered.len();
    let s_ll = log_ml_likelihood(&dataset.class_counts(&s.uncovered));
    let q_ll = log_ml_likelihood(&dataset.class_counts(&q.uncovered));
    s_size as f64 * (per_instance(s_ll, s_size, regret) - per_instance(q_ll, q_size, regret))
}

/// NML gain of `s` over `q` where the uncovered instances are scored under
/// each rule's estimate on its full cover.
pub fn gain_incl(s: &CandidateRule, q: &CandidateRule, dataset: &Dataset, regret: &RegretTable) -> f64 {
    let s_size = s.uncovered.len();
    let q_size = q.uncovered.len();
    let s_ll = log_likelihood_under(
        &dataset.class_counts(&s.uncovered),
        &dataset.class_counts(&s.cover),
    );
    let q_ll = log_likelihood_under(
        &dataset.class_counts(&q.uncovered),
        &dataset.class_counts(&q.cover),
    );
    s_size as f64 * (per_instance(s_ll, s_size, regret) - per_instance(q_ll, q_size, regret))
}

fn rank(a: &CandidateRule, b: &CandidateRule, key: impl Fn(&CandidateRule) -> f64) -> core::cmp::Ordering {
    key(b)
        .total_cmp(&key(a))
        .then(a.condition.len().cmp(&b.condition.len()))
        .then(a.condition.cmp(&b.condition))
}

/// Greedy diverse selection: by descending gain, admit candidates with
/// positive gain whose Jaccard similarity to every admitted entry is at
/// most `1 - alpha`, until `width` entries are admitted.
pub fn beam_select(
    mut candidates: Vec<CandidateRule>,
    width: usize,
    alpha: f64,
    phase: Phase,
) -> Vec<CandidateRule> {
    candidates.sort_by(|a, b| rank(a, b, |c| c.gain));
    let set = |c: &CandidateRule| -> CoverSet {
        match phase {
            Phase::One => c.uncovered.clone(),
            Phase::Two => c.cover.clone(),
        }
    };
    let mut beam: Vec<CandidateRule> = Vec::with_capacity(width);
    for cand in candidates {
        if beam.len() == width {
            break;
        }
        if cand.gain <= 0.0 {
            break;
        }
        let cs = set(&cand);
        if beam.iter().all(|e| cs.jaccard(&set(e)) <= 1.0 - alpha) {
            beam.push(cand);
        }
    }
    beam
}

/// Result of one call to [`find_next_rule`].
#[derive(Clone, Debug)]
pub struct NextRule {
    pub rule: CandidateRule,
    /// The phase-1 rule that phase 2 grew into `rule`.
    pub seed: CandidateRule,
}

struct Searcher<'a> {
    dataset: &'a Dataset,
    literals: LiteralIndex,
    regret: &'a RegretTable,
    scorer: SurrogateScorer<'a>,
    config: &'a SearchConfig,
}

impl<'a> Searcher<'a> {
    fn new(dataset: &'a Dataset, regret: &'a RegretTable, config: &'a SearchConfig) -> Self {
        Searcher {
            dataset,
            literals: LiteralIndex::new(dataset),
            regret,
            scorer: SurrogateScorer::new(dataset, regret, &config.min_leaf_grid, config.aggregation),
            config,
        }
    }

    /// Score used to rank candidates: surrogate or plain approximate NML.
    fn model_score(&mut self, covers: &[&CoverSet]) -> f64 {
        match self.config.score_mode {
            ScoreMode::Surrogate => self.scorer.score(covers),
            ScoreMode::Direct => score_covers(covers, self.dataset, self.regret).total(),
        }
    }

    fn refine(
        &self,
        beam: &[CandidateRule],
        covered: &CoverSet,
        phase: Phase,
    ) -> Vec<CandidateRule> {
        let mut candidates: BTreeMap<Condition, CandidateRule> = BTreeMap::new();
        for parent in beam {
            for (literal, cover) in self.literals.refinements(&parent.condition, &parent.cover) {
                let condition = parent.condition.with_literal(literal);
                let mut cand = CandidateRule::new(condition, cover, covered);
                if cand.uncovered.is_empty() {
                    continue;
                }
                cand.gain = match phase {
                    Phase::One => gain_unc(&cand, parent, self.dataset, self.regret),
                    Phase::Two => gain_incl(&cand, parent, self.dataset, self.regret),
                };
                match candidates.get(&cand.condition) {
                    Some(existing) if existing.gain >= cand.gain => {}
                    _ => {
                        candidates.insert(cand.condition.clone(), cand);
                    }
                }
            }
        }
        candidates.into_values().collect()
    }

    /// Beam search from `start`, returning every rule that entered a beam.
    fn grow(&self, start: CandidateRule, covered: &CoverSet, phase: Phase) -> Vec<CandidateRule> {
        let mut beam = vec![start];
        let mut record = Vec::new();
        loop {
            let candidates = self.refine(&beam, covered, phase);
            beam = beam_select(candidates, self.config.beam_width, self.config.alpha, phase);
            if beam.is_empty() {
                break;
            }
            record.extend(beam.iter().cloned());
        }
        record
    }

    fn dedup_by_condition(rules: Vec<CandidateRule>) -> Vec<CandidateRule> {
        let mut seen: BTreeMap<Condition, ()> = BTreeMap::new();
        rules
            .into_iter()
            .filter(|r| seen.insert(r.condition.clone(), ()).is_none())
            .collect()
    }

    fn next_rule(&mut self, covers: &[CoverSet]) -> Option<NextRule> {
        let n = self.dataset.n();
        let mut covered = CoverSet::empty(n);
        for c in covers {
            covered.union_with(c);
        }
        let root = CandidateRule::new(Condition::new(), self.dataset.all(), &covered);
        if root.uncovered.is_empty() {
            return None;
        }
        let base: Vec<&CoverSet> = covers.iter().collect();

        // phase 1
        let mut phase1 = Self::dedup_by_condition(self.grow(root, &covered, Phase::One));
        if phase1.is_empty() {
            return None;
        }
        for cand in phase1.iter_mut() {
            let mut with = base.clone();
            with.push(&cand.uncovered);
            cand.score = Some(self.model_score(&with));
        }
        phase1.sort_by(|a, b| rank(a, b, |c| c.score.unwrap_or(f64::NEG_INFINITY)));
        phase1.truncate(self.config.seeds());

        // phase 2
        let mut best: Option<NextRule> = None;
        for seed in phase1 {
            let mut start = seed.clone();
            start.gain = 0.0;
            let mut record = vec![start.clone()];
            record.extend(self.grow(start, &covered, Phase::Two));
            for mut cand in Self::dedup_by_condition(record) {
                let mut with = base.clone();
                with.push(&cand.cover);
                cand.score = Some(self.model_score(&with));
                let better = match &best {
                    None => true,
                    Some(b) => rank(&cand, &b.rule, |c| c.score.unwrap()).is_lt(),
                };
                if better {
                    best = Some(NextRule {
                        rule: cand,
                        seed: seed.clone(),
                    });
                }
            }
        }
        best
    }

    /// Single-phase beam search ranked by the plain approximate-NML score
    /// of the rule set extended with each candidate's full cover.
    fn greedy_next_rule(&mut self, covers: &[CoverSet]) -> Option<NextRule> {
        let mut covered = CoverSet::empty(self.dataset.n());
        for c in covers {
            covered.union_with(c);
        }
        let base: Vec<&CoverSet> = covers.iter().collect();
        let direct = |cover: &CoverSet| {
            let mut with = base.clone();
            with.push(cover);
            score_covers(&with, self.dataset, self.regret).total()
        };
        let mut root = CandidateRule::new(Condition::new(), self.dataset.all(), &covered);
        if root.uncovered.is_empty() {
            return None;
        }
        root.score = Some(direct(&root.cover));
        let mut beam = vec![root];
        let mut best: Option<CandidateRule> = None;
        loop {
            let mut candidates: BTreeMap<Condition, CandidateRule> = BTreeMap::new();
            for parent in &beam {
                let parent_score = parent.score.expect("scored");
                for (literal, cover) in self.literals.refinements(&parent.condition, &parent.cover) {
                    let condition = parent.condition.with_literal(literal);
                    if candidates.contains_key(&condition) {
                        continue;
                    }
                    let mut cand = CandidateRule::new(condition, cover, &covered);
                    if cand.uncovered.is_empty() {
                        continue;
                    }
                    let score = direct(&cand.cover);
                    cand.score = Some(score);
                    cand.gain = score - parent_score;
                    candidates.insert(cand.condition.clone(), cand);
                }
            }
            beam = beam_select(
                candidates.into_values().collect(),
                self.config.beam_width,
                self.config.alpha,
                Phase::Two,
            );
            if beam.is_empty() {
                break;
            }
            for cand in &beam {
                let better = match &best {
                    None => true,
                    Some(b) => rank(cand, b, |c| c.score.unwrap()).is_lt(),
                };
                if better {
                    best = Some(cand.clone());
                }
            }
        }
        best.map(|rule| NextRule {
            seed: rule.clone(),
            rule,
        })
    }
}

/// Like [`find_next_rule`], but a plain greedy beam search: no surrogate and
/// no uncovered-first phase, candidates ranked by the approximate-NML score
/// of the rule set extended with the candidate.
pub fn find_next_rule_greedy(
    rules: &[Condition],
    dataset: &Dataset,
    config: &SearchConfig,
) -> Result<Option<NextRule>, TursError> {
    config.validate()?;
    let dataset = dataset.clone().with_cut_points(config.num_cut_points);
    let regret = RegretTable::new(dataset.num_classes(), dataset.n());
    let covers: Vec<CoverSet> = rules.iter().map(|c| dataset.cover_of(c)).collect();
    let mut searcher = Searcher::new(&dataset, &regret, config);
    Ok(searcher.greedy_next_rule(&covers))
}

/// Find the next rule to add to the rule set given by `rules`.
///
/// Cut points are recomputed from `dataset` with `config.num_cut_points`.
pub fn find_next_rule(
    rules: &[Condition],
    dataset: &Dataset,
    config: &SearchConfig,
) -> Result<Option<NextRule>, TursError> {
    config.validate()?;
    let dataset = dataset.clone().with_cut_points(config.num_cut_points);
    let regret = RegretTable::new(dataset.num_classes(), dataset.n());
    let covers: Vec<CoverSet> = rules.iter().map(|c| dataset.cover_of(c)).collect();
    let mut searcher = Searcher::new(&dataset, &regret, config);
    Ok(searcher.next_rule(&covers))
}

/// Trace of one [`fit_ruleset_traced`] run.
#[derive(Clone, Debug)]
pub struct FitTrace {
    /// Approximate-NML score of every recorded prefix, starting with the empty rule set.
    pub prefix_scores: Vec<f64>,
    /// Conditions of the rules in the order they were added.
    pub grown: Vec<Condition>,
    /// Length of the returned prefix.
    pub chosen: usize,
}

/// Learn a rule set: repeatedly add the next rule until the search finds
/// none or the surrogate score of the extended rule set equals its real
/// score (that last rule is kept), then return the recorded prefix with the
/// best approximate-NML score.
pub fn fit_ruleset(dataset: &Dataset, config: &SearchConfig) -> Result<RuleSet, TursError> {
    fit_ruleset_traced(dataset, config).map(|(rs, _)| rs)
}

pub fn fit_ruleset_traced(
    dataset: &Dataset,
    config: &SearchConfig,
) -> Result<(RuleSet, FitTrace), TursError> {
    config.validate()?;
    let dataset = dataset.clone().with_cut_points(config.num_cut_points);
    let regret = RegretTable::new(dataset.num_classes(), dataset.n());
    let mut searcher = Searcher::new(&dataset, &regret, config);

    let mut conditions: Vec<Condition> = Vec::new();
    let mut covers: Vec<CoverSet> = Vec::new();
    let mut scores = vec![score_covers(&[], &dataset, &regret).total()];
    while conditions.len() < config.max_rules {
        let Some(next) = searcher.next_rule(&covers) else {
            break;
        };
        let mut with: Vec<&CoverSet> = covers.iter().collect();
        with.push(&next.rule.cover);
        let real = score_covers(&with, &dataset, &regret).total();
        match config.score_mode {
            ScoreMode::Surrogate => {
                // when the surrogate already equals the real score, the tree
                // found nothing beyond the else rule: keep S* and stop
                let exhausted =
                    (next.rule.score.expect("scored") - real).abs() <= STOP_TOLERANCE;
                conditions.push(next.rule.condition);
                covers.push(next.rule.cover);
                scores.push(real);
                if exhausted {
                    break;
                }
            }
            ScoreMode::Direct => {
                if real <= *scores.last().expect("nonempty") {
                    break;
                }
                conditions.push(next.rule.condition);
                covers.push(next.rule.cover);
                scores.push(real);
            }
        }
    }

    let mut chosen = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[chosen] {
            chosen = i;
        }
    }
    let trace = FitTrace {
        prefix_scores: scores,
        grown: conditions.clone(),
        chosen,
    };
    conditions.truncate(chosen);
    covers.truncate(chosen);
    let ruleset = RuleSet::from_covers(conditions, &covers, &dataset);
    Ok((ruleset, trace))
}
