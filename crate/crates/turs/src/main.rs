use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use turs::error::{Error, Result};
use turs::turs_core::{
    fit_ruleset, log_regret, Aggregation, CoverageCase, FeatureKind, ScoreMode, SearchConfig,
};
use turs::{cross_validate, load_csv, load_instances, modelio, CvOptions, OverlapOn};

#[derive(Parser, Debug)]
#[command(name = "turs", version, about = "Truly unordered probabilistic rule sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn a rule set from a CSV file
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Where to write the model (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict class probabilities for the rows of a CSV file
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Where to write the probabilities (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the JSON report (stdout if omitted)
        #[arg(long)]
        report: Option<PathBuf>,
        /// Measure the overlap fraction on the test or the training part of each fold
        #[arg(long, value_enum, default_value_t = OverlapArg::Test)]
        overlap_on: OverlapArg,
        /// Record fit wall time (the report is then no longer reproducible)
        #[arg(long)]
        include_timing: bool,
    },
    /// Print a model's rules
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
    /// Print log2 R(n, K), the multinomial NML normalizing term
    Regret { n: u64, k: usize },
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    /// Columns to treat as categorical
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Columns to treat as numeric
    #[arg(long, value_delimiter = ',')]
    numeric: Vec<String>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    beam_width: usize,
    /// Phase-1 rules passed on to phase 2 (defaults to the beam width)
    #[arg(long)]
    num_seeds: Option<usize>,
    #[arg(long, default_value_t = 100)]
    num_cut_points: usize,
    #[arg(long, value_delimiter = ',', default_value = "10,30,50,70,90")]
    min_leaf_sizes: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    max_rules: usize,
    #[arg(long, value_enum, default_value_t = AggregationArg::Max)]
    surrogate_aggregation: AggregationArg,
    #[arg(long, value_enum, default_value_t = ScoreModeArg::Surrogate)]
    score_mode: ScoreModeArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AggregationArg {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScoreModeArg {
    Surrogate,
    Direct,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OverlapArg {
    Test,
    Train,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            beam_width: self.beam_width,
            alpha: self.alpha,
            num_seeds: self.num_seeds,
            min_leaf_grid: self.min_leaf_sizes.clone(),
            num_cut_points: self.num_cut_points,
            max_rules: self.max_rules,
            aggregation: match self.surrogate_aggregation {
                AggregationArg::Max => Aggregation::Max,
                AggregationArg::Min => Aggregation::Min,
            },
            score_mode: match self.score_mode {
                ScoreModeArg::Surrogate => ScoreMode::Surrogate,
                ScoreModeArg::Direct => ScoreMode::Direct,
            },
        }
    }
}

impl DataArgs {
    fn load(&self) -> Result<turs::turs_core::Dataset> {
        let mut overrides = BTreeMap::new();
        for c in &self.categorical {
            overrides.insert(c.clone(), FeatureKind::Categorical);
        }
        for c in &self.numeric {
            if overrides.insert(c.clone(), FeatureKind::Numeric).is_some() {
                return Err(Error::Input {
                    path: self.data.clone(),
                    message: format!("column '{c}' declared both numeric and categorical"),
                });
            }
        }
        load_csv(&self.data, &self.target, &overrides)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn read_model(path: &Path) -> Result<turs::turs_core::RuleSet> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    modelio::read_str(&text)
}

fn case_name(case: CoverageCase) -> &'static str {
    match case {
        CoverageCase::Single => "single",
        CoverageCase::Union => "union",
        CoverageCase::Nested => "nested",
        CoverageCase::Else => "else",
    }
}

fn format_probs(labels: &[String], prob: &[f64]) -> String {
    labels
        .iter()
        .zip(prob)
        .map(|(l, p)| format!("{l}={p:.4}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { data, search, out } => {
            let dataset = data.load()?;
            let config = search.config();
            let ruleset = fit_ruleset(&dataset, &config)?;
            eprintln!(
                "fitted {} rules ({} literals) on {} instances, score {:.4}",
                ruleset.rules().len(),
                ruleset.total_literals(),
                dataset.n(),
                ruleset.appr_nml_score()
            );
            write_output(out.as_deref(), &modelio::write_string(&ruleset))
        }
        Command::Predict { model, data, out } => {
            let ruleset = read_model(&model)?;
            let instances = load_instances(&data, ruleset.features(), ruleset.class_labels(), None)?;
            let mut writer = csv::Writer::from_writer(Vec::new());
            let csv_err = |source| Error::Csv {
                path: data.clone(),
                source,
            };
            let mut header: Vec<String> = ruleset.class_labels().to_vec();
            header.push("explanation".into());
            writer.write_record(&header).map_err(csv_err)?;
            for row in &instances.rows {
                let (prob, explanation) = ruleset.predict_proba(row)?;
                let mut record: Vec<String> = prob.iter().map(|p| p.to_string()).collect();
                let rules: Vec<String> = explanation
                    .contributing_rules
                    .iter()
                    .map(|r| r.to_string())
                    .collect();
                record.push(if rules.is_empty() {
                    case_name(explanation.case).to_string()
                } else {
                    format!("{}:{}", case_name(explanation.case), rules.join(";"))
                });
                writer.write_record(&record).map_err(csv_err)?;
            }
            let bytes = writer
                .into_inner()
                .map_err(|e| Error::Internal(format!("csv buffer: {e}")))?;
            write_output(out.as_deref(), &String::from_utf8_lossy(&bytes))
        }
        Command::Eval {
            data,
            search,
            folds,
            seed,
            report,
            overlap_on,
            include_timing,
        } => {
            let dataset = data.load()?;
            let options = CvOptions {
                overlap_on: match overlap_on {
                    OverlapArg::Test => OverlapOn::Test,
                    OverlapArg::Train => OverlapOn::Train,
                },
                include_timing,
            };
            let result = cross_validate(&dataset, folds, &search.config(), seed, &options)?;
            eprintln!(
                "{folds}-fold mean AUC {:.4}, mean rules {:.1}, mean literals {:.1}, mean overlap {:.3}",
                result.mean_auc,
                result.mean_num_rules,
                result.mean_total_literals,
                result.mean_overlap_fraction
            );
            write_output(report.as_deref(), &result.to_json_string())
        }
        Command::Inspect { model } => {
            let ruleset = read_model(&model)?;
            let labels = ruleset.class_labels();
            let mut text = String::new();
            for (i, rule) in ruleset.rules().iter().enumerate() {
                text.push_str(&format!(
                    "rule {i}: IF {} THEN {} (coverage {})\n",
                    modelio::describe_condition(&rule.condition, ruleset.features()),
                    format_probs(labels, &rule.prob),
                    rule.coverage()
                ));
            }
            let else_cov: u64 = ruleset.else_counts().iter().sum();
            text.push_str(&format!(
                "else: {} (coverage {else_cov})\n",
                format_probs(labels, &ruleset.else_prob())
            ));
            for (inner, outer) in ruleset.nesting().pairs() {
                text.push_str(&format!("nested: rule {inner} inside rule {outer}\n"));
            }
            text.push_str(&format!(
                "{} rules, {} literals, score {:.4}\n",
                ruleset.rules().len(),
                ruleset.total_literals(),
                ruleset.appr_nml_score()
            ));
            write_output(None, &text)
        }
        Command::Regret { n, k } => {
            if k == 0 {
                return Err(turs::turs_core::TursError::InvalidArgument(
                    "K must be at least 1".into(),
                )
                .into());
            }
            write_output(None, &format!("{}\n", log_regret(n, k)))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
