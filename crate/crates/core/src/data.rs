//! Datasets, feature schemas, literals and the literal universe used to grow rules.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::bitset::CoverSet;
use crate::error::TursError;

/// Level code for a categorical value that was not seen when the schema was built.
/// It satisfies every `NotEquals` literal and no `Equals` literal.
pub const UNSEEN_LEVEL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    /// Distinct category labels; empty for numeric features.
    pub levels: Vec<String>,
    /// Ascending literal thresholds; empty for categorical features.
    pub cut_points: Vec<f64>,
}

impl FeatureSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Numeric,
            levels: Vec::new(),
            cut_points: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, levels: Vec<String>) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Categorical,
            levels,
            cut_points: Vec::new(),
        }
    }

    pub fn level_index(&self, label: &str) -> Option<u32> {
        self.levels.iter().position(|l| l == label).map(|p| p as u32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<u32>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> Value {
        match self {
            Column::Numeric(v) => Value::Numeric(v[i]),
            Column::Categorical(v) => Value::Level(v[i]),
        }
    }
}

/// One feature value of an instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Numeric(f64),
    Level(u32),
}

/// A columnar table of typed features plus a categorical target.
#[derive(Clone, Debug)]
pub struct Dataset {
    features: Vec<FeatureSchema>,
    columns: Vec<Column>,
    target: Vec<u32>,
    class_labels: Vec<String>,
    class_covers: Vec<CoverSet>,
}

impl Dataset {
    pub fn new(
        features: Vec<FeatureSchema>,
        columns: Vec<Column>,
        target: Vec<u32>,
        class_labels: Vec<String>,
    ) -> Result<Self, TursError> {
        let n = target.len();
        if features.len() != columns.len() {
            return Err(TursError::InvalidDataset(format!(
                "{} feature schemas for {} columns",
                features.len(),
                columns.len()
            )));
        }
        if class_labels.len() < 2 {
            return Err(TursError::InvalidDataset(
                "at least two class labels are required".into(),
            ));
        }
        for (schema, column) in features.iter().zip(&columns) {
            if column.len() != n {
                return Err(TursError::InvalidDataset(format!(
                    "column '{}' has {} values, target has {n}",
                    schema.name,
                    column.len()
                )));
            }
            match (schema.kind, column) {
                (FeatureKind::Numeric, Column::Numeric(values)) => {
                    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
                        return Err(TursError::InvalidDataset(format!(
                            "column '{}' has a missing or non-finite value at row {row}",
                            schema.name
                        )));
                    }
                    if schema.cut_points.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(TursError::InvalidDataset(format!(
                            "cut points of '{}' are not strictly ascending",
                            schema.name
                        )));
                    }
                }
                (FeatureKind::Categorical, Column::Categorical(codes)) => {
                    if schema.levels.is_empty() {
                        return Err(TursError::InvalidDataset(format!(
                            "categorical column '{}' has no levels",
                            schema.name
                        )));
                    }
                    for (i, level) in schema.levels.iter().enumerate() {
                        if schema.levels[..i].contains(level) {
                            return Err(TursError::InvalidDataset(format!(
                                "duplicate level '{level}' in column '{}'",
                                schema.name
                            )));
                        }
                    }
                    let num_levels = schema.levels.len() as u32;
                    if let Some(row) = codes
                        .iter()
                        .position(|&c| c >= num_levels && c != UNSEEN_LEVEL)
                    {
                        return Err(TursError::InvalidDataset(format!(
                            "column '{}' has an out-of-range level code at row {row}",
                            schema.name
                        )));
                    }
                }
                _ => {
                    return Err(TursError::InvalidDataset(format!(
                        "column '{}' does not match its declared kind",
                        schema.name
                    )))
                }
            }
        }
        let num_classes = class_labels.len();
        if let Some(row) = target.iter().position(|&y| y as usize >= num_classes) {
            return Err(TursError::InvalidDataset(format!(
                "target at row {row} is outside the {num_classes} classes"
            )));
        }
        let class_covers = (0..num_classes as u32)
            .map(|c| CoverSet::from_predicate(n, |i| target[i] == c))
            .collect();
        Ok(Dataset {
            features,
            columns,
            target,
            class_labels,
            class_covers,
        })
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureSchema] {
        &self.features
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn target(&self) -> &[u32] {
        &self.target
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn value(&self, row: usize, feature: usize) -> Value {
        self.columns[feature].value(row)
    }

    pub fn row(&self, row: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c.value(row)).collect()
    }

    pub fn all(&self) -> CoverSet {
        CoverSet::full(self.n())
    }

    /// Per-class counts of the instances in `cover`.
    pub fn class_counts(&self, cover: &CoverSet) -> Vec<u64> {
        self.class_covers
            .iter()
            .map(|c| c.intersection_len(cover) as u64)
            .collect()
    }

    pub fn class_counts_of(&self, indices: &[usize]) -> Vec<u64> {
        let mut counts = alloc::vec![0u64; self.num_classes()];
        for &i in indices {
            counts[self.target[i] as usize] += 1;
        }
        counts
    }

    pub fn cover_of(&self, condition: &Condition) -> CoverSet {
        CoverSet::from_predicate(self.n(), |i| condition.matches_row(self, i))
    }

    /// Rows selected by `indices`, in that order, with the same schema.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => Column::Numeric(indices.iter().map(|&i| v[i]).collect()),
                Column::Categorical(v) => {
                    Column::Categorical(indices.iter().map(|&i| v[i]).collect())
                }
            })
            .collect();
        let target: Vec<u32> = indices.iter().map(|&i| self.target[i]).collect();
        let n = target.len();
        let class_covers = (0..self.num_classes() as u32)
            .map(|c| CoverSet::from_predicate(n, |i| target[i] == c))
            .collect();
        Dataset {
            features: self.features.clone(),
            columns,
            target,
            class_labels: self.class_labels.clone(),
            class_covers,
        }
    }

    /// Recompute every numeric feature's cut points from this data.
    pub fn with_cut_points(mut self, num_cuts: usize) -> Self {
        for (schema, column) in self.features.iter_mut().zip(&self.columns) {
            if let Column::Numeric(values) = column {
                schema.cut_points = compute_cut_points(values, num_cuts);
            }
        }
        self
    }
}

/// Quantile thresholds for a numeric column.
///
/// For `q = 1..num_cuts-1` the threshold is the midpoint of the order
/// statistics at ranks `floor(q·n/num_cuts)` and the next one. Thresholds
/// at or outside the observed range are dropped and duplicates merged.
pub fn compute_cut_points(values: &[f64], num_cuts: usize) -> Vec<f64> {
    let n = values.len();
    if n < 2 || num_cuts < 2 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    let (min, max) = (sorted[0], sorted[n - 1]);
    let mut cuts: Vec<f64> = Vec::new();
    for q in 1..num_cuts {
        let rank = (q * n / num_cuts).clamp(1, n - 1);
        let t = sorted[rank - 1] + (sorted[rank] - sorted[rank - 1]) / 2.0;
        if t > min && t < max && cuts.last().is_none_or(|&last| t > last) {
            cuts.push(t);
        }
    }
    cuts
}

/// One constraint on a single feature.
#[derive(Clone, Copy, Debug)]
pub enum Constraint {
    LessEq(f64),
    Greater(f64),
    Equals(u32),
    NotEquals(u32),
}

impl Constraint {
    fn rank(&self) -> u8 {
        match self {
            Constraint::LessEq(_) => 0,
            Constraint::Greater(_) => 1,
            Constraint::Equals(_) => 2,
            Constraint::NotEquals(_) => 3,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Literal {
    pub feature: usize,
    pub constraint: Constraint,
}

impl Literal {
    pub fn new(feature: usize, constraint: Constraint) -> Self {
        Literal {
            feature,
            constraint,
        }
    }

    pub fn matches(&self, value: Value) -> bool {
        match (self.constraint, value) {
            (Constraint::LessEq(t), Value::Numeric(x)) => x <= t,
            (Constraint::Greater(t), Value::Numeric(x)) => x > t,
            (Constraint::Equals(l), Value::Level(v)) => v == l,
            (Constraint::NotEquals(l), Value::Level(v)) => v != l,
            _ => false,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(
            self.constraint,
            Constraint::LessEq(_) | Constraint::Greater(_)
        )
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Literal {}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        use Constraint::*;
        self.feature
            .cmp(&other.feature)
            .then(self.constraint.rank().cmp(&other.constraint.rank()))
            .then(match (self.constraint, other.constraint) {
                (LessEq(a), LessEq(b)) | (Greater(a), Greater(b)) => a.total_cmp(&b),
                (Equals(a), Equals(b)) | (NotEquals(a), NotEquals(b)) => a.cmp(&b),
                _ => Ordering::Equal,
            })
    }
}

/// A conjunction of literals kept in canonical form: sorted, with at most one
/// upper and one lower bound per numeric feature.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Condition {
    literals: Vec<Literal>,
}

impl Condition {
    pub fn new() -> Self {
        Condition::default()
    }

    pub fn from_literals<I: IntoIterator<Item = Literal>>(literals: I) -> Self {
        literals
            .into_iter()
            .fold(Condition::new(), |c, l| c.with_literal(l))
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// Interval `(lower, upper]` implied on a numeric feature.
    pub fn numeric_interval(&self, feature: usize) -> (Option<f64>, Option<f64>) {
        let mut lower = None;
        let mut upper = None;
        for lit in self.literals.iter().filter(|l| l.feature == feature) {
            match lit.constraint {
                Constraint::LessEq(t) => upper = Some(upper.map_or(t, |u: f64| u.min(t))),
                Constraint::Greater(t) => lower = Some(lower.map_or(t, |l: f64| l.max(t))),
                _ => {}
            }
        }
        (lower, upper)
    }

    fn equals_level(&self, feature: usize) -> Option<u32> {
        self.literals.iter().find_map(|l| match l.constraint {
            Constraint::Equals(v) if l.feature == feature => Some(v),
            _ => None,
        })
    }

    /// Whether `literal` is already implied by this condition.
    pub fn implies(&self, literal: &Literal) -> bool {
        let f = literal.feature;
        match literal.constraint {
            Constraint::LessEq(t) => self.numeric_interval(f).1.is_some_and(|u| u <= t),
            Constraint::Greater(t) => self.numeric_interval(f).0.is_some_and(|l| l >= t),
            Constraint::Equals(v) => self.equals_level(f) == Some(v),
            Constraint::NotEquals(v) => {
                self.equals_level(f).is_some_and(|e| e != v) || self.literals.contains(literal)
            }
        }
    }

    /// The normalized conjunction `self ∧ literal`.
    pub fn with_literal(&self, literal: Literal) -> Condition {
        if self.implies(&literal) {
            return self.clone();
        }
        let f = literal.feature;
        let mut literals: Vec<Literal> = match literal.constraint {
            // a tighter bound replaces the looser one on the same side
            Constraint::LessEq(_) => self
                .literals
                .iter()
                .filter(|l| !(l.feature == f && matches!(l.constraint, Constraint::LessEq(_))))
                .copied()
                .collect(),
            Constraint::Greater(_) => self
                .literals
                .iter()
                .filter(|l| !(l.feature == f && matches!(l.constraint, Constraint::Greater(_))))
                .copied()
                .collect(),
            // an equality makes every inequality on the feature either implied or contradictory
            Constraint::Equals(v) => self
                .literals
                .iter()
                .filter(|l| {
                    !(l.feature == f && matches!(l.constraint, Constraint::NotEquals(w) if w != v))
                })
                .copied()
                .collect(),
            Constraint::NotEquals(_) => self.literals.clone(),
        };
        let pos = literals.binary_search(&literal).unwrap_or_else(|p| p);
        literals.insert(pos, literal);
        Condition { literals }
    }

    pub fn matches(&self, instance: &[Value]) -> bool {
        self.literals.iter().all(|l| l.matches(instance[l.feature]))
    }

    pub fn matches_row(&self, dataset: &Dataset, row: usize) -> bool {
        self.literals
            .iter()
            .all(|l| l.matches(dataset.value(row, l.feature)))
    }
}

/// Every literal that can be generated from a dataset's schema, with its
/// cover on that dataset.
#[derive(Clone, Debug)]
pub struct LiteralIndex {
    literals: Vec<Literal>,
    covers: Vec<CoverSet>,
}

impl LiteralIndex {
    /// Two literals per numeric cut point, two per categorical level.
    pub fn new(dataset: &Dataset) -> Self {
        let n = dataset.n();
        let mut literals = Vec::new();
        let mut covers = Vec::new();
        for (f, (schema, column)) in dataset.features().iter().zip(dataset.columns()).enumerate() {
            match column {
                Column::Numeric(values) => {
                    for &t in &schema.cut_points {
                        let below = CoverSet::from_predicate(n, |i| values[i] <= t);
                        let above = CoverSet::full(n).difference(&below);
                        literals.push(Literal::new(f, Constraint::LessEq(t)));
                        covers.push(below);
                        literals.push(Literal::new(f, Constraint::Greater(t)));
                        covers.push(above);
                    }
                }
                Column::Categorical(codes) => {
                    for level in 0..schema.levels.len() as u32 {
                        let equal = CoverSet::from_predicate(n, |i| codes[i] == level);
                        let other = CoverSet::full(n).difference(&equal);
                        literals.push(Literal::new(f, Constraint::Equals(level)));
                        covers.push(equal);
                        literals.push(Literal::new(f, Constraint::NotEquals(level)));
                        covers.push(other);
                    }
                }
            }
        }
        LiteralIndex { literals, covers }
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn literal(&self, i: usize) -> Literal {
        self.literals[i]
    }

    pub fn cover(&self, i: usize) -> &CoverSet {
        &self.covers[i]
    }

    /// Literals that strictly shrink `cover` (the cover of `condition`)
    /// while keeping it nonempty, together with the refined covers.
    pub fn refinements(&self, condition: &Condition, cover: &CoverSet) -> Vec<(Literal, CoverSet)> {
        let size = cover.len();
        let mut out = Vec::new();
        for (lit, lit_cover) in self.literals.iter().zip(&self.covers) {
            if condition.implies(lit) {
                continue;
            }
            let refined = cover.intersection(lit_cover);
            let refined_size = refined.len();
            if refined_size > 0 && refined_size < size {
                out.push((*lit, refined));
            }
        }
        out
    }
}

/// Literals that strictly shrink the cover of `condition` on `dataset` and
/// leave it nonempty. Uses the cut points stored in the dataset schema.
pub fn enumerate_refinements(condition: &Condition, dataset: &Dataset) -> Vec<Literal> {
    let index = LiteralIndex::new(dataset);
    let cover = dataset.cover_of(condition);
    index
        .refinements(condition, &cover)
        .into_iter()
        .map(|(l, _)| l)
        .collect()
}
