//! Versioned JSON model files.
//!
//! A model is stored as its schema, its rule conditions and its coverage
//! atoms (class counts of the training instances grouped by the exact set
//! of rules covering them). Everything else, including rule estimates,
//! nesting and union groups, follows from the atoms; those derived fields
//! are written for readers and checked on load.

use serde::{Deserialize, Serialize};
use turs_core::{
    Atom, Condition, Constraint, FeatureKind, FeatureSchema, Literal, RuleSet, TursError,
};

use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "turs-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindJson {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureJson {
    pub name: String,
    pub kind: KindJson,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cut_points: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LiteralValue {
    Threshold(f64),
    Level(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiteralJson {
    pub feature: String,
    /// One of `<=`, `>`, `==`, `!=`.
    pub op: String,
    pub value: LiteralValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleJson {
    pub literals: Vec<LiteralJson>,
    pub counts: Vec<u64>,
    pub prob: Vec<f64>,
    pub coverage: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElseJson {
    pub counts: Vec<u64>,
    pub prob: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupJson {
    pub rules: Vec<usize>,
    pub pooled_counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub rules: Vec<usize>,
    pub counts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub format: String,
    pub version: u32,
    pub features: Vec<FeatureJson>,
    pub class_labels: Vec<String>,
    pub rules: Vec<RuleJson>,
    #[serde(rename = "else")]
    pub else_rule: ElseJson,
    /// `[inner, outer]` pairs of rules whose training covers are nested.
    pub nesting: Vec<[usize; 2]>,
    /// Union groups observed in training, with counts pooled over the member covers.
    pub union_groups: Vec<GroupJson>,
    pub atoms: Vec<AtomJson>,
    pub appr_nml_score: f64,
}

fn literal_to_json(lit: &Literal, features: &[FeatureSchema]) -> LiteralJson {
    let f = &features[lit.feature];
    let level = |l: u32| LiteralValue::Level(f.levels[l as usize].clone());
    let (op, value) = match lit.constraint {
        Constraint::LessEq(t) => ("<=", LiteralValue::Threshold(t)),
        Constraint::Greater(t) => (">", LiteralValue::Threshold(t)),
        Constraint::Equals(l) => ("==", level(l)),
        Constraint::NotEquals(l) => ("!=", level(l)),
    };
    LiteralJson {
        feature: f.name.clone(),
        op: op.to_string(),
        value,
    }
}

fn literal_from_json(lit: &LiteralJson, features: &[FeatureSchema]) -> Result<Literal> {
    let bad = |msg: String| Error::Model(msg);
    let index = features
        .iter()
        .position(|f| f.name == lit.feature)
        .ok_or_else(|| bad(format!("literal on unknown feature '{}'", lit.feature)))?;
    let f = &features[index];
    let level = |name: &str| {
        f.level_index(name)
            .ok_or_else(|| bad(format!("unknown level '{name}' of feature '{}'", f.name)))
    };
    let constraint = match (lit.op.as_str(), &lit.value) {
        ("<=", LiteralValue::Threshold(t)) => Constraint::LessEq(*t),
        (">", LiteralValue::Threshold(t)) => Constraint::Greater(*t),
        ("==", LiteralValue::Level(l)) => Constraint::Equals(level(l)?),
        ("!=", LiteralValue::Level(l)) => Constraint::NotEquals(level(l)?),
        (op, value) => return Err(bad(format!("bad literal {op} {value:?} on '{}'", f.name))),
    };
    Ok(Literal::new(index, constraint))
}

pub fn to_json(ruleset: &RuleSet) -> ModelJson {
    let features = ruleset.features();
    ModelJson {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        features: features
            .iter()
            .map(|f| FeatureJson {
                name: f.name.clone(),
                kind: match f.kind {
                    FeatureKind::Numeric => KindJson::Numeric,
                    FeatureKind::Categorical => KindJson::Categorical,
                },
                levels: f.levels.clone(),
                cut_points: f.cut_points.clone(),
            })
            .collect(),
        class_labels: ruleset.class_labels().to_vec(),
        rules: ruleset
            .rules()
            .iter()
            .map(|r| RuleJson {
                literals: r
                    .condition
                    .literals()
                    .iter()
                    .map(|l| literal_to_json(l, features))
                    .collect(),
                counts: r.counts.clone(),
                prob: r.prob.clone(),
                coverage: r.coverage(),
            })
            .collect(),
        else_rule: ElseJson {
            counts: ruleset.else_counts().to_vec(),
            prob: ruleset.else_prob(),
        },
        nesting: ruleset.nesting().pairs().into_iter().map(|(a, b)| [a, b]).collect(),
        union_groups: ruleset
            .groups()
            .iter()
            .filter(|g| g.rules.len() > 1)
            .map(|g| GroupJson {
                rules: g.rules.clone(),
                pooled_counts: g.pooled_counts.clone(),
            })
            .collect(),
        atoms: ruleset
            .atoms()
            .iter()
            .map(|a| AtomJson {
                rules: a.rules.clone(),
                counts: a.counts.clone(),
            })
            .collect(),
        appr_nml_score: ruleset.appr_nml_score(),
    }
}

pub fn from_json(model: &ModelJson) -> Result<RuleSet> {
    if model.format != MODEL_FORMAT {
        return Err(Error::Model(format!("format is '{}', expected '{MODEL_FORMAT}'", model.format)));
    }
    if model.version != MODEL_VERSION {
        return Err(Error::Model(format!(
            "version {} is not supported (expected {MODEL_VERSION})",
            model.version
        )));
    }
    let features: Vec<FeatureSchema> = model
        .features
        .iter()
        .map(|f| FeatureSchema {
            name: f.name.clone(),
            kind: match f.kind {
                KindJson::Numeric => FeatureKind::Numeric,
                KindJson::Categorical => FeatureKind::Categorical,
            },
            levels: f.levels.clone(),
            cut_points: f.cut_points.clone(),
        })
        .collect();
    let conditions = model
        .rules
        .iter()
        .map(|r| {
            r.literals
                .iter()
                .map(|l| literal_from_json(l, &features))
                .collect::<Result<Vec<_>>>()
                .map(Condition::from_literals)
        })
        .collect::<Result<Vec<_>>>()?;
    let atoms = model
        .atoms
        .iter()
        .map(|a| Atom {
            rules: a.rules.clone(),
            counts: a.counts.clone(),
        })
        .collect();
    let ruleset = RuleSet::from_atoms(features, model.class_labels.clone(), conditions, atoms)
        .map_err(|e| match e {
            TursError::InvalidModel(msg) => Error::Model(msg),
            other => Error::Core(other),
        })?;

    // derived fields must agree with what the atoms imply
    let derived = to_json(&ruleset);
    let check = |what: &str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("{what} disagree with the coverage atoms")))
        }
    };
    check("rules", derived.rules == model.rules)?;
    check("else-rule counts", derived.else_rule == model.else_rule)?;
    check("nesting pairs", derived.nesting == model.nesting)?;
    check("union groups", derived.union_groups == model.union_groups)?;
    Ok(ruleset)
}

pub fn write_string(ruleset: &RuleSet) -> String {
    let mut s = serde_json::to_string_pretty(&to_json(ruleset)).expect("model serializes");
    s.push('\n');
    s
}

pub fn read_str(text: &str) -> Result<RuleSet> {
    let model: ModelJson = serde_json::from_str(text)?;
    from_json(&model)
}

/// Human-readable rendering of one condition, literals joined by `AND`.
pub fn describe_condition(condition: &Condition, features: &[FeatureSchema]) -> String {
    if condition.is_empty() {
        return "TRUE".to_string();
    }
    condition
        .literals()
        .iter()
        .map(|l| {
            let j = literal_to_json(l, features);
            match j.value {
                LiteralValue::Threshold(t) => format!("{} {} {}", j.feature, j.op, t),
                LiteralValue::Level(v) => format!("{} {} {}", j.feature, j.op, v),
            }
        })
        .collect::<Vec<_>>()
        .join(" AND ")
}
